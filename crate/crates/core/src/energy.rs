//! Energy functionals, the perturbed Lyapunov functional and decay checks.
//!
//! Reports are widened to `f64` regardless of the working precision.

use serde::Serialize;

use crate::beam_fem::EmbeddingConstants;
use crate::dynamics::{Model, State, Trajectory};
use crate::error::{Error, Result};
use crate::memory_kernel::{memory_dissipation, memory_norm};
use crate::scalar::Scalar;

/// Scalar functionals of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    #[serde(rename = "norm_H2")]
    pub norm_h2: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "Etilde")]
    pub etilde: f64,
    #[serde(rename = "F_bnd")]
    pub f_bnd: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// Filled in by [`apply_delta`].
    #[serde(rename = "Edelta")]
    pub edelta: Option<f64>,
    #[serde(rename = "D_mem")]
    pub d_mem: f64,
    #[serde(rename = "D_bnd")]
    pub d_bnd: f64,
    /// `κ u″ᵀu″`, `‖v‖²` and `‖η‖²_g`, the three parts of `norm_H2`.
    #[serde(skip)]
    pub parts: [f64; 3],
}

/// `E = ½‖z‖²_ℋ + F(u(L))` and companions.
pub fn energy<T: Scalar>(z: &State<T>, model: &Model<T>) -> EnergyReport {
    let ops = &model.ops;
    let kappa = model.kappa();
    let elastic = (kappa * ops.bending_energy(&z.u)).f64();
    let kinetic = ops.mass_energy(&z.v).f64();
    let memory = memory_norm(&z.history, ops).f64();
    let norm_h2 = elastic + kinetic + memory;
    let x = z.tip(ops);
    let y = z.tip_velocity(ops);
    let f_bnd = model.law.force.potential(x).f64();
    let e = 0.5 * norm_h2 + f_bnd;
    let mv = &ops.mass * &z.v;
    EnergyReport {
        t: z.t.f64(),
        norm_h2,
        e,
        etilde: e + model.law.force.big_c_f().f64(),
        f_bnd,
        phi1: z.u.dot(&mv).f64(),
        phi2: -z.history.weighted_sum().dot(&mv).f64(),
        edelta: None,
        d_mem: memory_dissipation(&z.history, ops).f64(),
        d_bnd: (model.law.damping.value(x * x) * y * y).f64(),
        parts: [elastic, kinetic, memory],
    }
}

/// Perturbation weight of the Lyapunov functional and its admissibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaConfig {
    pub delta: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    /// `1/(2C₀)`.
    pub equivalence_bound: f64,
    /// Smallness required by the dissipation estimate, if computed.
    pub damping_bound: Option<f64>,
    pub kappa: f64,
    pub admissible: bool,
}

/// `C₀` of the equivalence estimate `|E^δ − Ẽ| ≤ δC₀Ẽ`.
///
/// The cross term `φ₂` enters with the factor `2/(1 − κ)`, which is kept here.
pub fn equivalence_constant<T: Scalar>(constants: &EmbeddingConstants<T>, kappa: f64, rho: f64) -> f64 {
    2.0 * constants.lambda0.f64().sqrt() / (rho * kappa)
        + 4.0 * constants.lambda2.f64().sqrt() / (rho * (1.0 - kappa).sqrt())
}

impl DeltaConfig {
    /// Checks a user-chosen `δ` against `1/(2C₀)`.
    pub fn with_delta<T: Scalar>(delta: f64, constants: &EmbeddingConstants<T>, kappa: f64, rho: f64) -> Self {
        let c0 = equivalence_constant(constants, kappa, rho);
        let bound = 0.5 / c0;
        Self { delta, c0, equivalence_bound: bound, damping_bound: None, kappa, admissible: delta > 0.0 && delta <= bound }
    }
}

/// Trajectory suprema entering the smallness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunBounds {
    /// `sup u(L)²`.
    pub c2: f64,
    /// `max M` on `[0, c₂]`.
    pub c3: f64,
    /// `(1 + sup|u(L)|^p)(λ₁λ₃)^{1/2}`.
    pub c4: f64,
    pub c5: f64,
}

pub fn run_bounds<T: Scalar>(
    model: &Model<T>,
    constants: &EmbeddingConstants<T>,
    rho: f64,
    tips: impl IntoIterator<Item = f64>,
) -> RunBounds {
    let c2 = tips.into_iter().fold(0.0, |m: f64, x| m.max(x * x));
    let c3 = model.law.damping.max_on(T::of(c2)).f64();
    let p = model.law.force.exponent().f64();
    let (l1, l2, l3) = (constants.lambda1.f64(), constants.lambda2.f64(), constants.lambda3.f64());
    let growth = if model.law.is_hooke() { 1.0 } else { 1.0 + c2.sqrt().powf(p) };
    let c4 = growth * (l1 * l3).sqrt();
    let kappa = model.kappa().f64();
    let cfp = model.law.force.derivative_bound().f64();
    let a1 = model.kernel.alpha1().f64();
    let c5 = 8.0 * kappa / (rho * (1.0 - kappa))
        + 2.0
        + 8.0 * cfp * cfp * c4 * c4 / (rho * kappa * (1.0 - kappa))
        + c3 * l3.sqrt() / (1.0 - kappa).sqrt()
        + 2.0 * a1 * a1 * l2 / (1.0 - kappa);
    RunBounds { c2, c3, c4, c5 }
}

/// `δ = min(1/(2C₀), δ_damping)` from the two smallness conditions.
pub fn select_delta<T: Scalar>(model: &Model<T>, constants: &EmbeddingConstants<T>, rho: f64, bounds: &RunBounds) -> DeltaConfig {
    let kappa = model.kappa().f64();
    let a2 = model.kernel.alpha2().f64();
    let m0 = model.law.damping.m0().f64();
    let (l1, l3) = (constants.lambda1.f64(), constants.lambda3.f64());
    let memory = 0.5 * a2 / (0.5 + 2.0 * (1.0 - kappa) / (rho * kappa) + bounds.c5);
    let boundary = m0 / (2.0 * l1 * bounds.c3 * bounds.c3 / (rho * kappa) + bounds.c3 * l3.sqrt() / (1.0 - kappa).sqrt());
    let damping = memory.min(boundary);
    let mut cfg = DeltaConfig::with_delta(0.0, constants, kappa, rho);
    cfg.delta = cfg.equivalence_bound.min(damping);
    cfg.damping_bound = Some(damping);
    cfg.admissible = cfg.delta > 0.0;
    cfg
}

/// `E^δ = Ẽ + δφ₁ + (2δ/(1 − κ))φ₂`.
pub fn perturbed_energy(report: &EnergyReport, delta: &DeltaConfig) -> Result<f64> {
    if !delta.admissible {
        return Err(Error::config(format!(
            "δ = {} is not admissible; the equivalence bound is 1/(2C₀) = {}",
            delta.delta, delta.equivalence_bound
        )));
    }
    Ok(report.etilde + delta.delta * report.phi1 + 2.0 * delta.delta / (1.0 - delta.kappa) * report.phi2)
}

/// Fills `E^δ` in every sample.
pub fn apply_delta<T: Scalar>(traj: &mut Trajectory<T>, delta: &DeltaConfig) -> Result<()> {
    for s in &mut traj.samples {
        s.energy.edelta = Some(perturbed_energy(&s.energy, delta)?);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSeries {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub max_abs: f64,
}

/// `r_n = (E_{n+1} − E_n)/Δt + ½(D_n + D_{n+1})`, with `D = D_mem + D_bnd`
/// sampled at the step ends. The stepper balances its own step-averaged
/// dissipation exactly, so this is an `O(Δt²)` consistency residual.
pub fn energy_identity_residual<T: Scalar>(traj: &Trajectory<T>) -> Result<ResidualSeries> {
    energy_identity_residual_with(traj, true)
}

/// As [`energy_identity_residual`], optionally leaving out the boundary channel.
pub fn energy_identity_residual_with<T: Scalar>(traj: &Trajectory<T>, include_boundary: bool) -> Result<ResidualSeries> {
    if traj.config.sample_every != 1 {
        return Err(Error::config(format!(
            "energy identity needs every step sampled, got sample_every = {}",
            traj.config.sample_every
        )));
    }
    let mut out = ResidualSeries { t: Vec::new(), r: Vec::new(), max_abs: 0.0 };
    for w in traj.samples.windows(2) {
        let d = w[1].step.ok_or_else(|| Error::config("sample lacks step diagnostics"))?;
        let (a, b) = (&w[0].energy, &w[1].energy);
        let mut r = (b.e - a.e) / d.dt + 0.5 * (a.d_mem + b.d_mem);
        if include_boundary {
            r += 0.5 * (a.d_bnd + b.d_bnd);
        }
        out.t.push(w[1].t);
        out.max_abs = out.max_abs.max(r.abs());
        out.r.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub omega: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r2: f64,
    /// Tail level `Ẽ_∞`.
    pub level: f64,
}

/// Least-squares slope of `log(Ẽ − Ẽ_∞)` over `[t0, t1]`, with `Ẽ_∞` the mean
/// over the last tenth of the samples.
pub fn fit_decay_rate<T: Scalar>(traj: &Trajectory<T>, window: (f64, f64)) -> Result<DecayFit> {
    let n = traj.samples.len();
    let tail = &traj.samples[n - (n / 10).max(1)..];
    let level = tail.iter().map(|s| s.energy.etilde).sum::<f64>() / tail.len() as f64;
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t >= window.0 && s.t <= window.1)
        .map(|s| (s.t, s.energy.etilde - level))
        .collect();
    if pts.len() < 3 {
        return Err(Error::config("decay window holds fewer than three samples"));
    }
    let scale = pts.iter().map(|p| p.1.abs()).fold(level.abs(), f64::max);
    if pts.iter().any(|p| !(p.1 > 1e-14 * scale.max(f64::MIN_POSITIVE))) {
        return Err(Error::numerical("no positive excess energy in the decay window; nothing to fit"));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(DecayFit { omega: -slope, r2, level })
}

/// Ordinary least squares `y ≈ a x + b`; returns `(a, b, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let a = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (a, my - a * mx, r2)
}

/// Violations of the pointwise inequalities along a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BandReport {
    pub samples: usize,
    pub coercivity_violations: usize,
    pub equivalence_violations: usize,
    pub decay_violations: usize,
    /// Largest `E^δ(t) / (e^{−2δt/3}E^δ(0) + (3/2)C_f)`.
    pub worst_decay_ratio: f64,
}

/// Checks `Ẽ ≥ (ϱ/2)‖z‖²`, `½Ẽ ≤ E^δ ≤ (3/2)Ẽ` and the Gronwall envelope
/// with relative `slack`.
pub fn check_bands<T: Scalar>(traj: &Trajectory<T>, rho: f64, big_c_f: f64, delta: &DeltaConfig, slack: f64) -> Result<BandReport> {
    let mut out = BandReport { samples: traj.samples.len(), ..Default::default() };
    let first = &traj.samples[0];
    let e0 = perturbed_energy(&first.energy, delta)?;
    let tiny = 1e-13;
    for s in &traj.samples {
        let r = &s.energy;
        let ed = perturbed_energy(r, delta)?;
        let floor = tiny * (r.etilde.abs() + r.norm_h2);
        if r.etilde < 0.5 * rho * r.norm_h2 - floor {
            out.coercivity_violations += 1;
        }
        if ed < 0.5 * r.etilde - floor || ed > 1.5 * r.etilde + floor {
            out.equivalence_violations += 1;
        }
        let envelope = (-(2.0 * delta.delta / 3.0) * (s.t - first.t)).exp() * e0 + 1.5 * big_c_f;
        if envelope > 0.0 {
            out.worst_decay_ratio = out.worst_decay_ratio.max(ed / envelope);
        }
        if ed > envelope * (1.0 + slack) + floor {
            out.decay_violations += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam_fem::{assemble_operators, estimate_embedding_constants, solve_static, BeamMesh};
    use crate::dynamics::{simulate, SimConfig};
    use crate::law::{Damping, Force, MaterialLaw};
    use crate::memory_kernel::{build_history_grid, make_kernel, GridScheme, Prehistory};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn model(force: Force<f64>) -> Model<f64> {
        let ops = assemble_operators(&BeamMesh::uniform(1.0, 6).unwrap()).unwrap();
        let kernel = make_kernel(&[(0.5, 1.0)]).unwrap();
        let grid = build_history_grid(&kernel, 32, GridScheme::GaussLaguerre).unwrap();
        Model::new(ops, MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.0 }, force), kernel, grid)
    }

    #[test]
    fn rest_state_has_zero_energy() {
        let m = model(Force::Hooke { lambda: 2.0 });
        let r = energy(&m.rest_state(), &m);
        assert_eq!((r.e, r.norm_h2, r.phi1, r.phi2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn static_tip_state_energy() {
        let m = model(Force::Hooke { lambda: 2.0 });
        let u = solve_static(&m.ops, 1.0, 3.0).unwrap();
        let z = m.state(u.clone(), DVector::zeros(12), Prehistory::Rest).unwrap();
        let r = energy(&z, &m);
        assert_relative_eq!(r.e, 0.5 * 0.5 * m.ops.bending_energy(&u) + 1.0, max_relative = 1e-11);
        let delta = DeltaConfig::with_delta(1e-3, &estimate_embedding_constants(&m.ops).unwrap(), 0.5, 1.0);
        assert_eq!(perturbed_energy(&r, &delta).unwrap(), r.etilde);
    }

    #[test]
    fn inadmissible_delta_refused() {
        let m = model(Force::Hooke { lambda: 2.0 });
        let c = estimate_embedding_constants(&m.ops).unwrap();
        let d = DeltaConfig::with_delta(10.0, &c, 0.5, 1.0);
        assert!(!d.admissible);
        let err = perturbed_energy(&energy(&m.rest_state(), &m), &d).unwrap_err();
        assert!(err.to_string().contains(&format!("{}", d.equivalence_bound)));
    }

    #[test]
    fn zero_trajectory_residual_vanishes_and_fit_is_refused() {
        let m = model(Force::Hooke { lambda: 2.0 });
        let traj = simulate(&m.rest_state(), &m, &SimConfig::new(0.01, 0.5)).unwrap();
        let r = energy_identity_residual(&traj).unwrap();
        assert_eq!(r.max_abs, 0.0);
        assert!(fit_decay_rate(&traj, (0.0, 0.4)).is_err());
    }

    #[test]
    fn sparse_sampling_rejected_for_identity() {
        let m = model(Force::Hooke { lambda: 2.0 });
        let mut cfg = SimConfig::new(0.01, 0.5);
        cfg.sample_every = 2;
        let traj = simulate(&m.rest_state(), &m, &cfg).unwrap();
        assert!(energy_identity_residual(&traj).is_err());
    }

    #[test]
    fn dropping_boundary_channel_leaves_its_power() {
        let m = model(Force::Hooke { lambda: 2.0 });
        let u = m.ops.interpolate(|x| (0.3 * x * x, 0.6 * x));
        let z = m.state(u, DVector::zeros(12), Prehistory::Rest).unwrap();
        let traj = simulate(&z, &m, &SimConfig::new(0.005, 1.0)).unwrap();
        let full = energy_identity_residual(&traj).unwrap();
        let partial = energy_identity_residual_with(&traj, false).unwrap();
        for (i, (a, b)) in full.r.iter().zip(&partial.r).enumerate() {
            let d = 0.5 * (traj.samples[i].energy.d_bnd + traj.samples[i + 1].energy.d_bnd);
            assert!(d >= 0.0);
            assert_relative_eq!(a - b, d, epsilon = 1e-12);
        }
        assert!(partial.r.iter().map(|r| -r).fold(f64::MIN, f64::max) > 1e-3);
    }

    #[test]
    fn identity_residual_is_second_order() {
        let m = model(Force::Hooke { lambda: 2.0 });
        // Compatible data: the boundary force balances the shear at t = 0.
        let u = m.ops.modal_basis(2.0 / m.kappa()).unwrap().vectors.column(0) * 0.5;
        let z = m.state(u, DVector::zeros(12), Prehistory::Rest).unwrap();
        let worst: Vec<f64> = [0.005, 0.0025, 0.00125]
            .iter()
            .map(|&dt| energy_identity_residual(&simulate(&z, &m, &SimConfig::new(dt, 2.0)).unwrap()).unwrap().max_abs)
            .collect();
        for w in worst.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{worst:?}");
        }
    }

    #[test]
    fn linear_fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert_relative_eq!(a, -0.5, epsilon = 1e-14);
        assert_relative_eq!(b, 2.0, epsilon = 1e-14);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-14);
    }
}

#[cfg(test)]
mod props {
    use crate::beam_fem::{assemble_operators, BeamMesh};
    use crate::dynamics::{simulate, Model, SimConfig};
    use crate::law::{Damping, Force, MaterialLaw};
    use crate::memory_kernel::{build_history_grid, make_kernel, GridScheme, Prehistory};
    use nalgebra::DVector;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn hooke_energy_never_increases(
            lambda in 0.1f64..5.0,
            m0 in 0.1f64..2.0,
            m1 in 0.0f64..2.0,
            g in 0.1f64..2.0,
            alpha in 0.5f64..10.0,
            coeffs in prop::collection::vec(-1.0f64..1.0, 10),
        ) {
            let ops = assemble_operators(&BeamMesh::uniform(1.0, 3).unwrap()).unwrap();
            let g = g.min(0.8 * alpha);
            let kernel = make_kernel(&[(g, alpha)]).unwrap();
            let grid = build_history_grid(&kernel, 6, GridScheme::GaussLaguerre).unwrap();
            let law = MaterialLaw::new(Damping::Affine { m0, m1 }, Force::Hooke { lambda });
            let model = Model::new(ops, law, kernel, grid);
            let n = model.ops.dof_count();
            let u = DVector::from_iterator(n, coeffs.iter().copied().take(n)) * 0.1;
            let v = DVector::from_iterator(n, coeffs.iter().rev().copied().take(n));
            let z0 = model.state(u, v, Prehistory::Rest).unwrap();
            let cfg = SimConfig::new(0.01, 0.5);
            let traj = simulate(&z0, &model, &cfg).unwrap();
            for w in traj.samples.windows(2) {
                prop_assert!(w[1].energy.e - w[0].energy.e <= 10.0 * cfg.newton_tol);
            }
        }
    }
}
