//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use hyperid::config::{RunConfig, SensorConfig};
use hyperid::forward::{forward, FieldHistory};
use hyperid::inversion::{history_norm, DataTerm, LandweberConfig, StopReason};
use hyperid::material::{DictionaryCoeffs, NeoHookeanParams};
use hyperid::observation::{edge_nodes, SensorArray, SensorLayout};
use hyperid::pipeline::{reconstruct, run_reconstruct, Experiment, Reconstruction};
use hyperid::verify::{adjoint_pairing, cone_ratios, material_fd, taylor_remainders, Desk, TAYLOR_SCALES};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = fn() -> Result<Outcome, hyperid::Error>;

/// Localization statistics of a reconstruction against the planted damage.
struct Localization {
    argmax: (usize, usize),
    /// Chebyshev distance from the argmax to the nearest damaged knot.
    distance: usize,
    damaged_dev: f64,
    median_off: f64,
    off_l2: f64,
}

fn localization(exp: &Experiment, alpha: &DictionaryCoeffs) -> Localization {
    let a = alpha.as_matrix();
    let damaged: HashSet<(usize, usize)> = exp
        .scenario
        .damaged_knots(&exp.disc.grid2, &exp.disc.grid3)
        .into_iter()
        .flatten()
        .collect();
    let mut argmax = (0, 0);
    let mut best = -1.0;
    let mut off = Vec::new();
    let mut damaged_dev = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = (a[(i, j)] - 1.0).abs();
            if d > best {
                best = d;
                argmax = (i, j);
            }
            if damaged.contains(&(i, j)) {
                damaged_dev = damaged_dev.max(d);
            } else {
                off.push(d);
            }
        }
    }
    let off_l2 = off.iter().map(|d| d * d).sum::<f64>().sqrt();
    off.sort_by(f64::total_cmp);
    let median_off = if off.len() % 2 == 1 {
        off[off.len() / 2]
    } else {
        0.5 * (off[off.len() / 2 - 1] + off[off.len() / 2])
    };
    let distance = damaged
        .iter()
        .map(|&(i, j)| i.abs_diff(argmax.0).max(j.abs_diff(argmax.1)))
        .min()
        .unwrap_or(usize::MAX);
    Localization {
        argmax,
        distance,
        damaged_dev,
        median_off,
        off_l2,
    }
}

fn full_data_config(max_iter: usize, noise_delta: f64) -> RunConfig {
    RunConfig {
        landweber: LandweberConfig {
            max_iter,
            noise_delta,
            seed: 2024,
            ..LandweberConfig::default()
        },
        ..RunConfig::default()
    }
}

fn sensor_config(per_edge: usize, max_iter: usize) -> RunConfig {
    let mut cfg = RunConfig {
        sensors: Some(SensorConfig {
            layout: Some(SensorLayout::PerEdge(per_edge)),
            ..SensorConfig::default()
        }),
        ..RunConfig::default()
    };
    cfg.landweber.max_iter = max_iter;
    cfg
}

fn run(cfg: RunConfig) -> Result<(Experiment, Reconstruction), hyperid::Error> {
    let exp = Experiment::new(cfg)?;
    let rec = reconstruct(&exp)?;
    Ok((exp, rec))
}

fn c1_material() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let r = material_fd(&NeoHookeanParams::plate(), 100, 1)?;
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        r.stress_vs_energy <= 1e-6 && r.tangent_vs_stress <= 1e-6 && r.hessian_asymmetry <= 1e-12 && secs < 1.0,
        format!(
            "stress {:.2e}, tangent {:.2e}, asymmetry {:.2e}, {secs:.3}s",
            r.stress_vs_energy, r.tangent_vs_stress, r.hessian_asymmetry
        ),
    ))
}

fn c2_fixed_points() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let desk = Desk::new(16)?;
    let zero = FieldHistory::zeros(desk.tg.levels(), desk.disc.dof_count());
    let ones = DictionaryCoeffs::ones(8);
    let sol = forward(&desk.disc, &ones, &desk.tg, &zero, &desk.solver)?;
    let zero_field = sol.u.iter().all(|l| l.iter().all(|&x| x == 0.0));

    let p = desk.problem();
    let u = p.forward(&ones)?;
    let sensors = SensorArray::uniform(&desk.disc.mesh, &edge_nodes(&desk.disc.mesh, 3)?, 2)?;
    let y = sensors.observe_history(&u);
    let cfg = LandweberConfig {
        max_iter: 1,
        tol: 0.0,
        ..LandweberConfig::default()
    };
    let mut drift = 0.0f64;
    for data in [DataTerm::Full(&u), DataTerm::Sensor { sensors: &sensors, y: &y }] {
        let (alpha, _) = p.landweber(data, 0.0, &cfg)?;
        drift = drift.max((alpha.as_matrix() - ones.as_matrix()).amax());
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        zero_field && drift <= 1e-12 && secs < 10.0,
        format!("zero field exact: {zero_field}, max |alpha - 1| after one step {drift:.2e}, {secs:.1}s"),
    ))
}

fn c3_frechet() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let r = taylor_remainders(&Desk::new(16)?, &TAYLOR_SCALES, 5)?;
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        (1.4..=2.1).contains(&r.slope) && secs < 120.0,
        format!(
            "slope {:.3} over |h| {:e}..{:e}, {secs:.1}s",
            r.slope,
            TAYLOR_SCALES[0],
            TAYLOR_SCALES[TAYLOR_SCALES.len() - 1]
        ),
    ))
}

fn c4_adjoint() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let e16 = adjoint_pairing(&Desk::new(16)?, 3)?;
    let e32 = adjoint_pairing(&Desk::new(32)?, 3)?;
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        e16 <= 1e-2 && e32 <= 5e-3 && e32 < e16 && secs < 120.0,
        format!("relative gap m=16 {e16:.2e}, m=32 {e32:.2e}, {secs:.1}s"),
    ))
}

fn c5_cone() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let ratios = cone_ratios(&Desk::new(16)?, 10, 0.1, 7)?;
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        ratios.len() == 10 && worst < 0.5 && secs < 300.0,
        format!("worst ratio {worst:.3e} over 10 draws, {secs:.1}s"),
    ))
}

fn c6_localization() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let (exp, rec) = run(full_data_config(50, 0.0))?;
    let l = localization(&exp, &rec.alpha);
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        rec.record.iterations <= 50 && l.distance <= 1 && l.damaged_dev >= 3.0 * l.median_off && secs < 600.0,
        format!(
            "argmax {:?}, damaged dev {:.3e} = {:.1} x median off-damage, {} iterations, {secs:.1}s",
            l.argmax,
            l.damaged_dev,
            l.damaged_dev / l.median_off,
            rec.record.iterations
        ),
    ))
}

fn c7_noise() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let mut finite = true;
    let mut detail = String::new();
    let mut located = false;
    for delta in [0.0, 0.2] {
        let (exp, rec) = run(full_data_config(50, delta))?;
        finite &= rec.record.residuals.iter().all(|r| r.is_finite());
        if delta > 0.0 {
            let l = localization(&exp, &rec.alpha);
            located = l.distance <= 2;
            detail = format!(
                "delta 0.2: argmax {:?}, distance {}, residual {:.3e} -> {:.3e}",
                l.argmax,
                l.distance,
                rec.record.residuals[0],
                rec.record.residuals.last().copied().unwrap_or(f64::NAN)
            );
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(located && finite, format!("{detail}, traces finite: {finite}, {secs:.1}s")))
}

fn c8_sensor_count() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let mut stats = Vec::new();
    for per_edge in [9, 3] {
        let mut cfg = sensor_config(per_edge, 25);
        cfg.calibration.probe_iter = 3;
        let (exp, rec) = run(cfg)?;
        let n = exp.sensors.as_ref().map_or(0, SensorArray::len);
        stats.push((n, rec.record.omega, localization(&exp, &rec.alpha)));
    }
    let (dense, sparse) = (&stats[0], &stats[1]);
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        dense.2.off_l2 <= sparse.2.off_l2 && dense.2.distance <= 2 && sparse.2.distance <= 2,
        format!(
            "{} sensors (omega {}): off-damage l2 {:.3e}, argmax {:?}; {} sensors (omega {}): {:.3e}, argmax {:?}; {secs:.1}s",
            dense.0, dense.1, dense.2.off_l2, dense.2.argmax, sparse.0, sparse.1, sparse.2.off_l2, sparse.2.argmax
        ),
    ))
}

fn c9_discrepancy() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    // Noise at a quarter of the damage signature, so the start exceeds tau * noise.
    let probe = Experiment::new(sensor_config(3, 0))?;
    let sensors = probe.sensors.as_ref().expect("sensor config");
    let p = probe.problem();
    let y_true = sensors.observe_history(&p.forward(&probe.alpha_true)?);
    let y_ones = sensors.observe_history(&p.forward(&DictionaryCoeffs::ones(8))?);
    let signature: Vec<Vec<f64>> = y_true
        .iter()
        .zip(&y_ones)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let rel = 0.25 * history_norm(&signature, &probe.tg, None)? / history_norm(&y_true, &probe.tg, None)?;

    let mut cfg = sensor_config(3, 50);
    cfg.landweber.noise_delta = rel;
    cfg.landweber.seed = 9;
    cfg.landweber.tau = Some(2.5);
    let (_, rec) = run(cfg)?;
    let r = &rec.record;
    let level = 2.5 * r.noise_norm;
    let norms: Vec<f64> = r.residuals.iter().map(|d| d.sqrt()).collect();
    let k = norms.len();
    let passed = r.stop_reason == StopReason::Discrepancy && k >= 2 && norms[k - 1] <= level && norms[k - 2] > level;
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        passed,
        format!(
            "relative noise {rel:.3e}, stop {:?} after {k} residuals, tau*delta {level:.3e}, last {:.3e}, previous {:.3e}, {secs:.1}s",
            r.stop_reason,
            norms.last().copied().unwrap_or(f64::NAN),
            if k >= 2 { norms[k - 2] } else { f64::NAN }
        ),
    ))
}

fn c10_determinism() -> Result<Outcome, hyperid::Error> {
    let t = Instant::now();
    let dir = tempfile::tempdir()?;
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let mut cfg = sensor_config(3, 4);
        cfg.landweber.noise_delta = 0.05;
        cfg.landweber.seed = 31;
        cfg.output.dir = dir.path().join(format!("run{run_id}"));
        let path = dir.path().join(format!("config{run_id}.json"));
        std::fs::write(&path, serde_json::to_string(&cfg)?)?;
        run_reconstruct(&path)?;
        let read = |name: &str| std::fs::read(cfg.output.dir.join(name));
        outputs.push((read("alpha.csv")?, read("residuals.json")?));
    }
    let same = outputs[0] == outputs[1];
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(same, format!("alpha.csv and residuals.json identical: {same}, {secs:.1}s")))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("constitutive correctness", c1_material),
        ("zero-data fixed points", c2_fixed_points),
        ("Frechet remainder order", c3_frechet),
        ("adjoint pairing", c4_adjoint),
        ("tangential cone condition", c5_cone),
        ("scenario A localization", c6_localization),
        ("noise robustness", c7_noise),
        ("sensor-count effect", c8_sensor_count),
        ("discrepancy stopping", c9_discrepancy),
        ("determinism", c10_determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (passed, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!("{} {:>2} {name}: {detail}", if passed { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
