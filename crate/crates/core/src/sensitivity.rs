//! Linearized forward map, the backward adjoint solvers and the dictionary
//! gradient they feed.

use nalgebra::DMatrix;

use crate::assembly::{Discretization, Weighting};
use crate::error::{Error, Result};
use crate::forward::{fixed_dofs, shifted, zero_fixed, FieldHistory, SolverConfig, TimeGrid};
use crate::material::DictionaryCoeffs;
use crate::observation::SensorArray;
use crate::sparse::{cg_solve, dot};

/// Directional derivative `v = T'(alpha) h` of the displacement history.
///
/// Linearizes the discrete forward scheme exactly: the tangent is taken at
/// the blended state of each step and the load is the `h`-weighted internal
/// force, which vanishes outside the dictionary layers.
pub fn derivative_apply(
    disc: &Discretization,
    alpha: &DictionaryCoeffs,
    h: &DMatrix<f64>,
    u: &FieldHistory,
    tg: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<FieldHistory> {
    cfg.validate()?;
    let n = disc.dof_count();
    u.check(tg, n)?;
    let fixed = fixed_dofs(disc, cfg.boundary);
    let fixed = fixed.as_deref();
    let (k, theta) = (tg.step(), tg.theta);
    let c = k * k * theta / cfg.density;
    let kr = k / cfg.density;
    let mass = &disc.mass;

    let mut v = FieldHistory::zeros(tg.levels(), n);
    if h.iter().all(|&x| x == 0.0) {
        return Ok(v);
    }
    let mut ms = vec![0.0; n];
    for j in 1..=tg.steps {
        let (uj, up) = (u.level(j), u.level(j - 1));
        let a = disc.assemble_tangent(alpha, uj, up, theta)?;
        let dh = disc.assemble_weighted_force(Weighting::Direction(h), uj, up, theta)?;
        let vp = v.level(j - 1).to_vec();
        let m_vp = mass.mul_vec(&vp);
        let a_vp = a.mul_vec(&vp);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| m_vp[i] + k * ms[i] - c * ((1.0 - theta) * a_vp[i] + dh[i]))
            .collect();
        zero_fixed(&mut rhs, fixed);
        let lhs = shifted(mass, &a, c * theta, fixed);
        let vj = cg_solve(&lhs, &rhs, &vp, &cfg.cg)?.x;
        let blend: Vec<f64> = (0..n).map(|i| theta * vj[i] + (1.0 - theta) * vp[i]).collect();
        let a_blend = a.mul_vec(&blend);
        for i in 0..n {
            ms[i] -= kr * (a_blend[i] + dh[i]);
        }
        zero_fixed(&mut ms, fixed);
        v.level_mut(j).copy_from_slice(&vj);
    }
    Ok(v)
}

/// Backward theta-scheme for `rho p'' - div(d2C : Jp) = w`, `p(T) = p'(T) = 0`,
/// with `w` given as load vectors `W^j`.
pub fn adjoint_full(
    disc: &Discretization,
    alpha: &DictionaryCoeffs,
    w: &FieldHistory,
    u: &FieldHistory,
    tg: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<FieldHistory> {
    cfg.validate()?;
    let n = disc.dof_count();
    u.check(tg, n)?;
    w.check(tg, n)?;
    let fixed = fixed_dofs(disc, cfg.boundary);
    let fixed = fixed.as_deref();
    let (k, theta) = (tg.step(), tg.theta);
    let rho = cfg.density;
    let c0 = k * k * theta * theta / rho;
    let c1 = k * k * (1.0 - theta) * theta / rho;
    let mass = &disc.mass;

    let mut p = FieldHistory::zeros(tg.levels(), n);
    if w.iter().all(|l| l.iter().all(|&x| x == 0.0)) {
        return Ok(p);
    }
    let mut mq = vec![0.0; n];
    for j in (0..tg.steps).rev() {
        let a = disc.assemble_tangent(alpha, u.level(j), u.level(j + 1), theta)?;
        let s0 = shifted(mass, &a, c0, fixed);
        let pn = p.level(j + 1).to_vec();
        let m_pn = mass.mul_vec(&pn);
        let a_pn = a.mul_vec(&pn);
        let (wj, wn) = (w.level(j), w.level(j + 1));
        // S1 P^{j+1} = M P^{j+1} - c1 A P^{j+1}
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| m_pn[i] - c1 * a_pn[i] + k * mq[i] + c0 * wj[i] + c1 * wn[i])
            .collect();
        zero_fixed(&mut rhs, fixed);
        let pj = cg_solve(&s0, &rhs, &pn, &cfg.cg)?.x;
        let a_pj = a.mul_vec(&pj);
        let (kt, kr) = (k * theta / rho, k * (1.0 - theta) / rho);
        for i in 0..n {
            mq[i] += -kt * a_pj[i] - kr * a_pn[i] + kt * wj[i] + kr * wn[i];
        }
        zero_fixed(&mut mq, fixed);
        p.level_mut(j).copy_from_slice(&pj);
    }
    Ok(p)
}

/// [`adjoint_full`] driven by sensor-space data through `M_b G_bar^T`.
pub fn adjoint_sensor(
    disc: &Discretization,
    alpha: &DictionaryCoeffs,
    wsens: &[Vec<f64>],
    u: &FieldHistory,
    sensors: &SensorArray,
    tg: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<FieldHistory> {
    if wsens.len() != tg.levels() {
        return Err(Error::LengthMismatch {
            expected: tg.levels(),
            found: wsens.len(),
        });
    }
    if let Some(bad) = wsens.iter().find(|l| l.len() != sensors.len()) {
        return Err(Error::LengthMismatch {
            expected: sensors.len(),
            found: bad.len(),
        });
    }
    let w = sensors.adjoint_history(wsens)?;
    adjoint_full(disc, alpha, &w, u, tg, cfg)
}

/// `gamma_rs = int_0^T int_layers b_r b_s dC(Ju) : Jp dx dt` by the trapezoid rule.
pub fn gradient(disc: &Discretization, u: &FieldHistory, p: &FieldHistory, tg: &TimeGrid) -> Result<DMatrix<f64>> {
    let n = disc.dof_count();
    u.check(tg, n)?;
    p.check(tg, n)?;
    let dim = disc.knots_per_axis() + 1;
    let mut gamma = DMatrix::zeros(dim, dim);
    for j in 0..tg.levels() {
        if p.level(j).iter().all(|&x| x == 0.0) {
            continue;
        }
        gamma += disc.gradient_entries(u.level(j), p.level(j))? * tg.trapezoid_weight(j);
    }
    Ok(gamma)
}

/// Discrete `L2(0,T;U) + H1(0,T;H)` norm: the first part integrates
/// `||Jv||^2` in space, the second uses mass-matrix norms of values and of
/// backward differences (zero at `t = 0`), both trapezoidal in time.
pub fn space_time_norm(disc: &Discretization, v: &FieldHistory, tg: &TimeGrid) -> Result<f64> {
    v.check(tg, disc.dof_count())?;
    let k = tg.step();
    let mut stiff = 0.0;
    let mut mass = 0.0;
    for j in 0..tg.levels() {
        let wt = tg.trapezoid_weight(j);
        let vj = v.level(j);
        stiff += wt * disc.mesh.gradient_norm_sq(vj);
        mass += wt * dot(vj, &disc.mass.mul_vec(vj));
        if j > 0 {
            let d: Vec<f64> = vj.iter().zip(v.level(j - 1)).map(|(a, b)| (a - b) / k).collect();
            mass += wt * dot(&d, &disc.mass.mul_vec(&d));
        }
    }
    Ok(stiff.sqrt() + mass.sqrt())
}

/// `sum_j tau_j <a^j, b^j>` with trapezoid weights.
pub fn trapezoid_pairing(a: &FieldHistory, b: &FieldHistory, tg: &TimeGrid) -> f64 {
    (0..tg.levels())
        .map(|j| tg.trapezoid_weight(j) * dot(a.level(j), b.level(j)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{forward, BoundaryMode};
    use crate::material::NeoHookeanParams;
    use crate::mesh::PlateMesh;
    use crate::observation::edge_nodes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        disc: Discretization,
        tg: TimeGrid,
        alpha: DictionaryCoeffs,
        force: FieldHistory,
        u: FieldHistory,
        cfg: SolverConfig,
    }

    /// Load concentrated near the plate centre, smooth in time.
    fn setup(steps: usize, amp: f64) -> Setup {
        let disc = Discretization::new(PlateMesh::plate([2, 4, 4]).unwrap(), NeoHookeanParams::plate(), 4).unwrap();
        let tg = TimeGrid::new(4.0, steps, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let alpha = DictionaryCoeffs::new(DMatrix::from_fn(5, 5, |_, _| rng.gen_range(0.8..1.2))).unwrap();
        let shape: Vec<f64> = (0..disc.dof_count())
            .map(|i| {
                let x = disc.mesh.nodes[i / 3];
                if i % 3 == 2 {
                    (-(x[1] * x[1] + x[2] * x[2]) / 50.0).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let levels = (0..tg.levels())
            .map(|j| {
                let t = tg.time(j);
                let s = if t < 2.0 { amp * 0.5 * (1.0 - (std::f64::consts::PI * t).cos()) } else { 0.0 };
                shape.iter().map(|x| s * x).collect()
            })
            .collect();
        let force = FieldHistory::from_levels(levels).unwrap();
        let cfg = SolverConfig::default();
        let u = forward(&disc, &alpha, &tg, &force, &cfg).unwrap().u;
        Setup {
            disc,
            tg,
            alpha,
            force,
            u,
            cfg,
        }
    }

    fn random_history(rng: &mut ChaCha8Rng, levels: usize, n: usize) -> FieldHistory {
        FieldHistory::from_levels(
            (0..levels)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_direction_gives_zero_derivative() {
        let s = setup(8, 1.0);
        let v = derivative_apply(&s.disc, &s.alpha, &DMatrix::zeros(5, 5), &s.u, &s.tg, &s.cfg).unwrap();
        assert!(v.iter().all(|l| l.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn derivative_is_linear_in_direction() {
        let s = setup(8, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let v1 = derivative_apply(&s.disc, &s.alpha, &h, &s.u, &s.tg, &s.cfg).unwrap();
        let v3 = derivative_apply(&s.disc, &s.alpha, &(&h * -2.5), &s.u, &s.tg, &s.cfg).unwrap();
        let scale = v1.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(scale > 0.0);
        for (a, b) in v1.iter().flatten().zip(v3.iter().flatten()) {
            assert!((-2.5 * a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn derivative_matches_forward_difference_to_second_order() {
        let s = setup(8, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let v = derivative_apply(&s.disc, &s.alpha, &h, &s.u, &s.tg, &s.cfg).unwrap();
        let remainder = |eps: f64| {
            let a = DictionaryCoeffs::new(s.alpha.as_matrix() + &h * eps).unwrap();
            let ue = forward(&s.disc, &a, &s.tg, &s.force, &s.cfg).unwrap().u;
            let d = ue.difference(&s.u).unwrap().difference(&v.scaled(eps)).unwrap();
            space_time_norm(&s.disc, &d, &s.tg).unwrap()
        };
        let (r1, r2) = (remainder(0.02), remainder(0.01));
        let slope = (r1 / r2).log2();
        assert!(slope > 1.8, "slope {slope} ({r1:e}, {r2:e})");
    }

    #[test]
    fn zero_load_gives_zero_adjoint() {
        let s = setup(8, 1.0);
        let w = FieldHistory::zeros(s.tg.levels(), s.disc.dof_count());
        let p = adjoint_full(&s.disc, &s.alpha, &w, &s.u, &s.tg, &s.cfg).unwrap();
        assert!(p.iter().all(|l| l.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn terminal_adjoint_level_is_zero() {
        let s = setup(8, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = random_history(&mut rng, s.tg.levels(), s.disc.dof_count());
        let p = adjoint_full(&s.disc, &s.alpha, &w, &s.u, &s.tg, &s.cfg).unwrap();
        assert!(p.level(8).iter().all(|&x| x == 0.0));
        assert!(p.level(0).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn step_matrices_are_symmetric() {
        let s = setup(8, 1.0);
        let (k, th) = (s.tg.step(), s.tg.theta);
        let a = s.disc.assemble_tangent(&s.alpha, s.u.level(3), s.u.level(4), th).unwrap();
        let s0 = shifted(&s.disc.mass, &a, k * k * th * th, None);
        let s1 = s.disc.mass.linear_combination(1.0, &a, -k * k * (1.0 - th) * th);
        let scale = s0.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(s0.asymmetry() <= 1e-12 * scale);
        assert!(s1.asymmetry() <= 1e-12 * scale);
    }

    #[test]
    fn sensor_adjoint_equals_full_adjoint_of_lifted_data() {
        let s = setup(8, 1.0);
        let sensors = SensorArray::uniform(&s.disc.mesh, &edge_nodes(&s.disc.mesh, 3).unwrap(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ws: Vec<Vec<f64>> = (0..s.tg.levels())
            .map(|_| (0..sensors.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ps = adjoint_sensor(&s.disc, &s.alpha, &ws, &s.u, &sensors, &s.tg, &s.cfg).unwrap();
        let lifted = sensors.adjoint_history(&ws).unwrap();
        let pf = adjoint_full(&s.disc, &s.alpha, &lifted, &s.u, &s.tg, &s.cfg).unwrap();
        assert_eq!(ps, pf);

        let zero = vec![vec![0.0; sensors.len()]; s.tg.levels()];
        let p0 = adjoint_sensor(&s.disc, &s.alpha, &zero, &s.u, &sensors, &s.tg, &s.cfg).unwrap();
        assert!(p0.iter().all(|l| l.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn terminal_impulse_propagates_backward() {
        let s = setup(8, 1.0);
        let sensors = SensorArray::uniform(&s.disc.mesh, &[s.disc.mesh.node_index(0, 0, 0)], 2).unwrap();
        let mut ws = vec![vec![0.0]; s.tg.levels()];
        ws[7][0] = 1.0;
        let p = adjoint_sensor(&s.disc, &s.alpha, &ws, &s.u, &sensors, &s.tg, &s.cfg).unwrap();
        let support = |j: usize| p.level(j).iter().filter(|x| x.abs() > 1e-12).count();
        assert_eq!(support(8), 0);
        assert!(support(7) > 0);
        assert!(support(0) > 0);
        assert!(support(0) >= support(7));
    }

    #[test]
    fn adjoint_pairs_with_derivative() {
        let s = setup(16, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let v = derivative_apply(&s.disc, &s.alpha, &h, &s.u, &s.tg, &s.cfg).unwrap();
        let w = FieldHistory::from_levels(v.iter().map(|l| s.disc.mass.mul_vec(l)).collect()).unwrap();
        let p = adjoint_full(&s.disc, &s.alpha, &w, &s.u, &s.tg, &s.cfg).unwrap();
        let gamma = gradient(&s.disc, &s.u, &p, &s.tg).unwrap();
        let lhs = trapezoid_pairing(&v, &w, &s.tg);
        let rhs = -h.dot(&gamma);
        assert!(lhs > 0.0);
        assert!((lhs - rhs).abs() <= 1e-2 * lhs, "{lhs:e} vs {rhs:e}");
    }

    #[test]
    fn clamped_adjoint_vanishes_on_boundary() {
        let mut s = setup(8, 1.0);
        s.cfg.boundary = BoundaryMode::ClampedAll;
        s.u = forward(&s.disc, &s.alpha, &s.tg, &s.force, &s.cfg).unwrap().u;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = random_history(&mut rng, s.tg.levels(), s.disc.dof_count());
        let p = adjoint_full(&s.disc, &s.alpha, &w, &s.u, &s.tg, &s.cfg).unwrap();
        let fixed = s.disc.mesh.boundary_dofs();
        for l in p.iter() {
            for (x, &f) in l.iter().zip(&fixed) {
                if f {
                    assert_eq!(*x, 0.0);
                }
            }
        }
    }

    #[test]
    fn space_time_norm_is_a_norm() {
        let s = setup(8, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let a = random_history(&mut rng, s.tg.levels(), s.disc.dof_count());
        let b = random_history(&mut rng, s.tg.levels(), s.disc.dof_count());
        let na = space_time_norm(&s.disc, &a, &s.tg).unwrap();
        let nb = space_time_norm(&s.disc, &b, &s.tg).unwrap();
        let sum = FieldHistory::from_levels(
            a.iter().zip(b.iter()).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect(),
        )
        .unwrap();
        assert!(space_time_norm(&s.disc, &sum, &s.tg).unwrap() <= na + nb);
        assert!((space_time_norm(&s.disc, &a.scaled(-3.0), &s.tg).unwrap() - 3.0 * na).abs() <= 1e-12 * na);
        let z = FieldHistory::zeros(s.tg.levels(), s.disc.dof_count());
        assert_eq!(space_time_norm(&s.disc, &z, &s.tg).unwrap(), 0.0);
    }
}
