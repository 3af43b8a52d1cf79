//! End-to-end runs: synthetic data from the true coefficients, optional
//! noise, Landweber reconstruction and output files.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::assembly::Discretization;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::forward::{forward, FieldHistory, SolverConfig, TimeGrid};
use crate::inversion::{add_noise, noise_level, rows, DataTerm, InverseProblem, RunRecord};
use crate::io::{content_hash, matrix_csv, matrix_pgm, series_csv, write_all_or_nothing};
use crate::material::DictionaryCoeffs;
use crate::observation::SensorArray;
use crate::scenario::{build_excitation, Scenario};

/// Everything derived from a [`RunConfig`] before any solve.
pub struct Experiment {
    pub config: RunConfig,
    pub disc: Discretization,
    pub tg: TimeGrid,
    pub force: FieldHistory,
    pub solver: SolverConfig,
    pub scenario: Scenario,
    pub alpha_true: DictionaryCoeffs,
    pub sensors: Option<SensorArray>,
}

impl Experiment {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = config.build_mesh()?;
        let tg = config.time_grid()?;
        let force = build_excitation(&mesh, &tg, &config.excitation)?;
        let sensors = match &config.sensors {
            Some(s) => Some(SensorArray::from_layout(&mesh, &s.resolve()?, s.component)?),
            None => None,
        };
        let disc = Discretization::new(mesh, config.material_params()?, config.dictionary.knots_per_axis)?;
        let scenario = config.scenario.resolve()?;
        let alpha_true = scenario.true_coefficients(&disc.grid2, &disc.grid3)?;
        Ok(Self {
            solver: config.solver_config(),
            config,
            disc,
            tg,
            force,
            scenario,
            alpha_true,
            sensors,
        })
    }

    pub fn problem(&self) -> InverseProblem<'_> {
        InverseProblem {
            disc: &self.disc,
            tg: self.tg,
            force: &self.force,
            solver: self.solver,
        }
    }

    fn sensor_header(&self, s: &SensorArray) -> Vec<String> {
        s.nodes
            .iter()
            .zip(&s.components)
            .map(|(n, c)| format!("node{n}_x{}", c + 1))
            .collect()
    }

    fn times(&self) -> Vec<f64> {
        (0..self.tg.levels()).map(|j| self.tg.time(j)).collect()
    }
}

/// Synthetic measurements, clean and as handed to the inversion.
#[derive(Debug, Clone)]
pub enum Measurements {
    Full { clean: FieldHistory, noisy: FieldHistory },
    Sensor { clean: Vec<Vec<f64>>, noisy: Vec<Vec<f64>> },
}

impl Measurements {
    pub fn data_term<'a>(&'a self, exp: &'a Experiment) -> DataTerm<'a> {
        match (self, &exp.sensors) {
            (Self::Full { noisy, .. }, _) => DataTerm::Full(noisy),
            (Self::Sensor { noisy, .. }, Some(sensors)) => DataTerm::Sensor { sensors, y: noisy },
            (Self::Sensor { .. }, None) => unreachable!("sensor data requires sensors"),
        }
    }

    /// Absolute noise level in the residual norm of the data term.
    pub fn noise_norm(&self, exp: &Experiment) -> Result<f64> {
        match self {
            Self::Full { clean, noisy } => {
                let (c, n) = (clean.clone().into_levels(), noisy.clone().into_levels());
                noise_level(&n, &c, &exp.tg, Some(&exp.disc.mass))
            }
            Self::Sensor { clean, noisy } => noise_level(noisy, clean, &exp.tg, None),
        }
    }
}

/// Forward solve with the true coefficients plus seeded relative noise.
pub fn synthesize(exp: &Experiment) -> Result<Measurements> {
    let lw = &exp.config.landweber;
    let u = exp.problem().forward(&exp.alpha_true)?;
    Ok(match &exp.sensors {
        Some(s) => {
            let clean = s.observe_history(&u);
            let noisy = add_noise(&clean, &exp.tg, lw.noise_delta, lw.seed)?;
            Measurements::Sensor { clean, noisy }
        }
        None => {
            let clean = u.into_levels();
            let noisy = FieldHistory::from_levels(add_noise(&clean, &exp.tg, lw.noise_delta, lw.seed)?)?;
            Measurements::Full {
                clean: FieldHistory::from_levels(clean)?,
                noisy,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timings {
    pub data_s: f64,
    pub calibration_s: f64,
    pub inversion_s: f64,
}

pub struct Reconstruction {
    pub alpha: DictionaryCoeffs,
    pub record: RunRecord,
    pub measurements: Measurements,
    pub timings: Timings,
}

pub fn reconstruct(exp: &Experiment) -> Result<Reconstruction> {
    let t0 = Instant::now();
    let measurements = synthesize(exp)?;
    let noise_norm = measurements.noise_norm(exp)?;
    let data = measurements.data_term(exp);
    let problem = exp.problem();
    let t1 = Instant::now();
    let mut cfg = exp.config.landweber;
    let probe = exp.config.calibration.probe_iter;
    if probe > 0 {
        cfg.omega = problem
            .calibrate_omega(data, cfg.omega, probe, cfg.project_nonneg)?
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "no omega in {} / 2^k, k <= 8, keeps the residual nonincreasing",
                    cfg.omega
                ))
            })?;
    }
    let t2 = Instant::now();
    let (alpha, record) = problem.landweber(data, noise_norm, &cfg)?;
    let timings = Timings {
        data_s: (t1 - t0).as_secs_f64(),
        calibration_s: (t2 - t1).as_secs_f64(),
        inversion_s: t2.elapsed().as_secs_f64(),
    };
    Ok(Reconstruction {
        alpha,
        record,
        measurements,
        timings,
    })
}

fn meta(exp: &Experiment, command: &str, extra: serde_json::Value) -> Result<Vec<u8>> {
    let config = serde_json::to_vec(&exp.config)?;
    let damaged = exp.scenario.damaged_knots(&exp.disc.grid2, &exp.disc.grid3);
    let mut value = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": content_hash(&config),
        "config": exp.config,
        "scenario": exp.scenario,
        "damaged_knots": damaged,
        "sensor_count": exp.sensors.as_ref().map(SensorArray::len),
        "physical_labels": {
            "note": "computations are nondimensional; labels are informational",
            "horizon": "133 us",
            "plate_thickness": "6.7 mm",
        },
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (value.as_object_mut(), extra) {
        obj.extend(more);
    }
    Ok(serde_json::to_vec_pretty(&value)?)
}

/// Output files of a reconstruction; `residuals.json` holds no timings.
pub fn reconstruction_files(exp: &Experiment, rec: &Reconstruction) -> Result<Vec<(String, Vec<u8>)>> {
    let alpha = rows(rec.alpha.as_matrix());
    let mut files = vec![
        ("alpha.csv".to_string(), matrix_csv(&alpha).into_bytes()),
        ("alpha.pgm".to_string(), matrix_pgm(&alpha).into_bytes()),
        ("alpha_true.csv".to_string(), matrix_csv(&rows(exp.alpha_true.as_matrix())).into_bytes()),
        ("residuals.json".to_string(), serde_json::to_vec_pretty(&rec.record)?),
    ];
    if let (Some(s), Measurements::Sensor { noisy, .. }) = (&exp.sensors, &rec.measurements) {
        let csv = series_csv(&exp.sensor_header(s), &exp.times(), noisy);
        files.push(("sensors.csv".to_string(), csv.into_bytes()));
    }
    let extra = json!({
        "omega_used": rec.record.omega,
        "noise_norm": rec.record.noise_norm,
        "iterations": rec.record.iterations,
        "stop_reason": rec.record.stop_reason,
        "timings": rec.timings,
    });
    files.push(("meta.json".to_string(), meta(exp, "reconstruct", extra)?));
    Ok(files)
}

/// Loads the config, reconstructs and writes the outputs into `output.dir`.
pub fn run_reconstruct(config_path: &Path) -> Result<Reconstruction> {
    let exp = Experiment::new(RunConfig::load(config_path)?)?;
    let rec = reconstruct(&exp)?;
    write_all_or_nothing(&exp.config.output.dir, &reconstruction_files(&exp, &rec)?)?;
    Ok(rec)
}

/// Forward solve only: sensor series, optionally the full field, and metadata.
pub fn simulation_files(exp: &Experiment) -> Result<Vec<(String, Vec<u8>)>> {
    let t0 = Instant::now();
    let sol = forward(&exp.disc, &exp.alpha_true, &exp.tg, &exp.force, &exp.solver)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let times = exp.times();
    let mut files = vec![(
        "alpha_true.csv".to_string(),
        matrix_csv(&rows(exp.alpha_true.as_matrix())).into_bytes(),
    )];
    if let Some(s) = &exp.sensors {
        let y = s.observe_history(&sol.u);
        files.push(("sensors.csv".to_string(), series_csv(&exp.sensor_header(s), &times, &y).into_bytes()));
    }
    if exp.config.output.write_field {
        let header: Vec<String> = (0..exp.disc.dof_count())
            .map(|d| format!("node{}_x{}", d / 3, d % 3 + 1))
            .collect();
        let levels: Vec<Vec<f64>> = sol.u.iter().map(<[f64]>::to_vec).collect();
        files.push(("displacement.csv".to_string(), series_csv(&header, &times, &levels).into_bytes()));
    }
    let extra = json!({
        "newton_iterations": sol.newton_iterations(),
        "timings": { "forward_s": elapsed },
    });
    files.push(("meta.json".to_string(), meta(exp, "simulate", extra)?));
    Ok(files)
}

pub fn run_simulate(config_path: &Path) -> Result<()> {
    let exp = Experiment::new(RunConfig::load(config_path)?)?;
    write_all_or_nothing(&exp.config.output.dir, &simulation_files(&exp)?)
}
