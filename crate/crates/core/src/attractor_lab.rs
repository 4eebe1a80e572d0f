//! Long-time diagnostics: stationary states, convergence to them, absorbing
//! balls, the stabilizability inequality on pairs and the weak-norm Hölder probe.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beam_fem::AssembledOperators;
use crate::dynamics::{simulate, Model, Sample, SimConfig, State, Trajectory};
use crate::energy::linear_fit;
use crate::error::{Error, Result};
use crate::law::{Force, MaterialLaw};
use crate::roots::bisect;
use crate::scalar::Scalar;

/// Search settings for [`stationary_solutions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryConfig {
    /// Half-width of the search interval for `b`; `None` means `10³/L³`.
    pub b_max: Option<f64>,
    /// Sample points per half-interval when bracketing.
    pub samples: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Independent starting points for the full Newton scan.
    pub fem_starts: usize,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self { b_max: None, samples: 2000, newton_tol: 1e-12, newton_max_iter: 60, fem_starts: 41 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    /// Root of the scalar reduction `6κb = f(−2bL³)`.
    pub b: f64,
    /// `b` read back from the polished discrete solution, `−u(L)/(2L³)`.
    pub b_fem: f64,
    pub tip: f64,
    /// `‖κKu + f(u(L)) t_val‖` after polishing.
    pub residual: f64,
    /// Energy `E(u*, 0, 0)`.
    pub energy: f64,
    pub u: Vec<f64>,
}

/// Equilibria `(u*, 0, 0)` of the discrete system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySet {
    pub solutions: Vec<StationaryPoint>,
    /// Tip values reached by full Newton from starts unrelated to the reduction.
    pub fem_tips: Vec<f64>,
    /// Every Newton root matches a scalar root and vice versa.
    pub consistent: bool,
    pub b_max: f64,
    pub diagnostic: Option<String>,
}

impl StationarySet {
    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// `min E(u*, 0, 0)`, a lower bound for the energy along any trajectory.
    pub fn energy_floor(&self) -> Option<f64> {
        self.solutions.iter().map(|p| p.energy).reduce(f64::min)
    }
}

/// `6κb − f(−2bL³)`, whose zeros are the cubic equilibria `u = −3bLx² + bx³`.
pub fn scalar_reduction<T: Scalar>(force: &Force<T>, kappa: f64, length: f64) -> impl Fn(f64) -> f64 + '_ {
    let l3 = length.powi(3);
    move |b| 6.0 * kappa * b - force.value(T::of(-2.0 * b * l3)).f64()
}

fn scalar_derivative<T: Scalar>(force: &Force<T>, kappa: f64, length: f64, b: f64) -> f64 {
    let l3 = length.powi(3);
    6.0 * kappa + 2.0 * l3 * force.derivative(T::of(-2.0 * b * l3)).f64()
}

/// Full discrete Newton on `κKu + f(tᵀu)t = 0`.
fn polish<T: Scalar>(ops: &AssembledOperators<T>, force: &Force<T>, kappa: T, mut u: DVector<T>, cfg: &StationaryConfig) -> Option<(DVector<T>, T)> {
    let tol = T::of(cfg.newton_tol).max(T::of(100.0) * T::eps());
    let kk = &ops.stiffness * kappa;
    let t = &ops.t_val;
    let residual = |u: &DVector<T>| {
        let x = t.dot(u);
        let r = &kk * u + t * force.value(x);
        let scale = T::one() + (&kk * u).norm() + force.value(x).abs();
        (r, scale)
    };
    for _ in 0..cfg.newton_max_iter {
        let (r, scale) = residual(&u);
        let rn = r.norm();
        if !rn.is_finite() {
            return None;
        }
        if rn <= tol * scale {
            return Some((u, rn));
        }
        let jac: DMatrix<T> = &kk + t * t.transpose() * force.derivative(t.dot(&u));
        let step = jac.lu().solve(&r)?;
        u -= step;
    }
    let (r, scale) = residual(&u);
    let rn = r.norm();
    (rn <= T::of(1e3) * tol * scale).then_some((u, rn))
}

fn cubic_state<T: Scalar>(ops: &AssembledOperators<T>, b: f64) -> DVector<T> {
    let l = ops.length().f64();
    let a = -3.0 * b * l;
    ops.interpolate(|x| {
        let x = x.f64();
        (T::of(a * x * x + b * x * x * x), T::of(2.0 * a * x + 3.0 * b * x * x))
    })
}

/// Roots of the scalar reduction, polished by full Newton, cross-checked by a
/// Newton scan from tip-load shapes.
pub fn stationary_solutions<T: Scalar>(ops: &AssembledOperators<T>, law: &MaterialLaw<T>, kappa: T, cfg: &StationaryConfig) -> Result<StationarySet> {
    if !(kappa > T::zero()) {
        return Err(Error::assumption(format!("κ must be positive, got {kappa}")));
    }
    if cfg.samples < 2 || cfg.newton_max_iter == 0 {
        return Err(Error::config("stationary search needs samples ≥ 2 and a Newton iteration cap"));
    }
    let force = &law.force;
    let l = ops.length().f64();
    let k = kappa.f64();
    let b_max = cfg.b_max.unwrap_or(1e3 / l.powi(3));
    if !(b_max > 0.0) {
        return Err(Error::config(format!("b_max must be positive, got {b_max}")));
    }
    let g = scalar_reduction(force, k, l);

    // Logarithmic spacing on both sides of zero resolves roots of every size.
    let decades = 14.0;
    let mut grid: Vec<f64> = (0..cfg.samples)
        .map(|i| b_max * 10f64.powf(-decades * (1.0 - i as f64 / (cfg.samples - 1) as f64)))
        .collect();
    let negative: Vec<f64> = grid.iter().rev().map(|b| -b).collect();
    grid = negative.into_iter().chain(std::iter::once(0.0)).chain(grid).collect();

    let mut roots: Vec<f64> = Vec::new();
    let push = |b: f64, roots: &mut Vec<f64>| {
        if !roots.iter().any(|r| (r - b).abs() <= 1e-10 * (1.0 + b.abs())) {
            roots.push(b);
        }
    };
    let values: Vec<f64> = grid.iter().map(|&b| g(b)).collect();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            push(grid[i], &mut roots);
        } else if i + 1 < grid.len() && values[i].is_finite() && values[i + 1].is_finite() && values[i] * values[i + 1] < 0.0 {
            let mut b = bisect(&g, grid[i], grid[i + 1], 1e-15)?;
            for _ in 0..4 {
                let d = scalar_derivative(force, k, l, b);
                if d == 0.0 || !d.is_finite() {
                    break;
                }
                let next = b - g(b) / d;
                if !(next >= grid[i] && next <= grid[i + 1]) {
                    break;
                }
                b = next;
            }
            push(b, &mut roots);
        }
    }
    roots.sort_by(f64::total_cmp);

    let l3 = l.powi(3);
    let mut solutions = Vec::new();
    for &b in &roots {
        let (u, residual) = polish(ops, force, kappa, cubic_state(ops, b), cfg)
            .ok_or_else(|| Error::numerical(format!("full Newton failed to polish the equilibrium with b = {b:.6e}")))?;
        let tip = ops.tip_value(&u).f64();
        let energy = 0.5 * k * ops.bending_energy(&u).f64() + force.potential(T::of(tip)).f64();
        solutions.push(StationaryPoint {
            b,
            b_fem: -tip / (2.0 * l3),
            tip,
            residual: residual.f64(),
            energy,
            u: u.iter().map(|c| c.f64()).collect(),
        });
    }

    // Newton from tip-load shapes K⁻¹t scaled over the search range.
    let shape = ops
        .stiffness
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("stiffness matrix is not positive definite"))?
        .solve(&ops.t_val);
    let shape_tip = ops.tip_value(&shape).f64();
    let mut fem_tips: Vec<f64> = Vec::new();
    let n = cfg.fem_starts.max(1);
    for i in 0..n {
        let x = if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 };
        let target_tip = -2.0 * l3 * b_max * x.signum() * 10f64.powf(-decades * (1.0 - x.abs()));
        let start = &shape * T::of(target_tip / shape_tip);
        if let Some((u, _)) = polish(ops, force, kappa, start, cfg) {
            let tip = ops.tip_value(&u).f64();
            if !fem_tips.iter().any(|r| (r - tip).abs() <= 1e-9 * (1.0 + tip.abs())) {
                fem_tips.push(tip);
            }
        }
    }
    fem_tips.sort_by(f64::total_cmp);
    let matches = |tip: f64, b: f64| (-tip / (2.0 * l3) - b).abs() <= 1e-8 * (1.0 + b.abs());
    let consistent = fem_tips.iter().all(|&t| roots.iter().any(|&b| matches(t, b)))
        && roots.iter().all(|&b| fem_tips.iter().any(|&t| matches(t, b)));

    let diagnostic = solutions.is_empty().then(|| format!("no root of 6κb = f(−2bL³) with |b| ≤ {b_max:.3e}"));
    Ok(StationarySet { solutions, fem_tips, consistent, b_max, diagnostic })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceSeries {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub terminal: f64,
}

/// `d(t) = min_{u*} (κ‖(u − u*)″‖² + ‖v‖² + ‖η‖²_g)^{1/2}`.
pub fn distance_to_stationary<T: Scalar>(traj: &Trajectory<T>, set: &StationarySet, model: &Model<T>) -> Result<DistanceSeries> {
    if set.is_empty() {
        return Err(Error::config("distance to an empty stationary set"));
    }
    let kappa = model.kappa();
    let stars: Vec<DVector<T>> = set.solutions.iter().map(|p| DVector::from_iterator(p.u.len(), p.u.iter().map(|&c| T::of(c)))).collect();
    if stars[0].len() != model.ops.dof_count() {
        return Err(Error::config("stationary set was computed on a different mesh"));
    }
    let mut out = DistanceSeries { t: Vec::with_capacity(traj.samples.len()), d: Vec::with_capacity(traj.samples.len()), terminal: 0.0 };
    for s in &traj.samples {
        let elastic = stars
            .iter()
            .map(|u| (kappa * model.ops.bending_energy(&(&s.u - u))).f64())
            .fold(f64::INFINITY, f64::min);
        let d = (elastic + s.energy.parts[1] + s.energy.parts[2]).max(0.0).sqrt();
        out.t.push(s.t);
        out.d.push(d);
    }
    out.terminal = *out.d.last().expect("trajectory holds the initial sample");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbsorbingConfig {
    pub slack: f64,
    /// Radius² used when `C_f = 0` makes the ball degenerate.
    pub floor: f64,
}

impl Default for AbsorbingConfig {
    fn default() -> Self {
        Self { slack: 0.05, floor: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorbingReport {
    #[serde(rename = "R2")]
    pub radius_sq: f64,
    /// First sample time after which `‖z‖²_ℋ ≤ R²` for the rest of the run.
    pub entry_time: Option<f64>,
    pub initial_norm_sq: f64,
    pub final_norm_sq: f64,
}

/// `R² = 6 C_f meas(Γ₁)/ϱ · (1 + slack)`; the bearing end is a single point, so `meas(Γ₁) = 1`.
pub fn absorbing_radius_sq(big_c_f: f64, rho: f64, slack: f64) -> f64 {
    6.0 * big_c_f / rho * (1.0 + slack)
}

pub fn absorbing_entry_time<T: Scalar>(traj: &Trajectory<T>, law: &MaterialLaw<T>, rho: f64, cfg: &AbsorbingConfig) -> AbsorbingReport {
    let r2 = absorbing_radius_sq(law.force.big_c_f().f64(), rho, cfg.slack);
    let radius_sq = if r2 > 0.0 { r2 } else { cfg.floor };
    let norms: Vec<f64> = traj.samples.iter().map(|s| s.energy.norm_h2).collect();
    let mut entry = None;
    for (s, &n) in traj.samples.iter().zip(&norms).rev() {
        if n > radius_sq {
            break;
        }
        entry = Some(s.t);
    }
    AbsorbingReport { radius_sq, entry_time: entry, initial_norm_sq: norms[0], final_norm_sq: *norms.last().expect("nonempty") }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairConfig {
    pub eps_grid: Vec<f64>,
    /// Radius² of the common ball `B`; `None` takes `4·max ‖z_0‖²_ℋ + 1`.
    pub ball_radius_sq: Option<f64>,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self { eps_grid: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0], ball_radius_sq: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsFit {
    pub eps: f64,
    /// Smallest constant making the inequality hold; `None` if none does.
    pub c_fit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub eps: f64,
    pub c_fit: f64,
    pub pass: bool,
    pub t: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub margin: Vec<f64>,
    pub grid: Vec<EpsFit>,
    /// `C` in `‖S_t z¹ − S_t z²‖² ≤ e^{Ct}‖z¹ − z²‖²`.
    pub lipschitz_c: Option<f64>,
    pub ball_radius_sq: f64,
    pub premise_ok: bool,
}

/// Simulates both trajectories (concurrently) and fits the stabilizability inequality.
pub fn stabilizability_check<T: Scalar>(z1: &State<T>, z2: &State<T>, model: &Model<T>, sim: &SimConfig, cfg: &PairConfig) -> Result<PairReport> {
    let mut sim = sim.clone();
    sim.keep_history = true;
    let (a, b) = std::thread::scope(|s| {
        let h = s.spawn(|| simulate(z1, model, &sim));
        let b = simulate(z2, model, &sim);
        (h.join().expect("pair worker panicked"), b)
    });
    pair_report(&a?, &b?, model, cfg)
}

/// Squared `ℋ` distance between two samples on the same grid.
pub fn sample_distance_sq<T: Scalar>(a: &Sample<T>, b: &Sample<T>, model: &Model<T>) -> Result<f64> {
    let ops = &model.ops;
    let (ha, hb) = match (&a.history, &b.history) {
        (Some(x), Some(y)) if x.len() == y.len() => (x, y),
        _ => return Err(Error::config("state differences need samples with matching stored history")),
    };
    let mut acc = (model.kappa() * ops.bending_energy(&(&a.u - &b.u)) + ops.mass_energy(&(&a.v - &b.v))).f64();
    for (x, y) in ha.iter().zip(hb) {
        acc += ops.bending_energy(&(x - y)).f64();
    }
    Ok(acc)
}

/// Fits the stabilizability inequality on two finished trajectories.
pub fn pair_report<T: Scalar>(a: &Trajectory<T>, b: &Trajectory<T>, model: &Model<T>, cfg: &PairConfig) -> Result<PairReport> {
    if a.samples.len() != b.samples.len() || a.samples.iter().zip(&b.samples).any(|(x, y)| (x.t - y.t).abs() > 1e-9 * (1.0 + x.t.abs())) {
        return Err(Error::config("pair trajectories must share the sample times"));
    }
    if cfg.eps_grid.is_empty() || cfg.eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::config("ε grid must be nonempty and positive"));
    }
    let t: Vec<f64> = a.samples.iter().map(|s| s.t).collect();
    let lhs: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| sample_distance_sq(x, y, model)).collect::<Result<_>>()?;
    let gap: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| (x.tip - y.tip).powi(2)).collect();
    let d0 = lhs[0];

    // Trapezoid rule for ∫₀^t e^{−ε(t−s)/3}|Δu(s, L)|² ds, accumulated recursively.
    let convolution = |eps: f64| {
        let mut out = vec![0.0; t.len()];
        for n in 1..t.len() {
            let h = t[n] - t[n - 1];
            let decay = (-eps * h / 3.0).exp();
            out[n] = decay * out[n - 1] + 0.5 * h * (decay * gap[n - 1] + gap[n]);
        }
        out
    };
    let fit = |eps: f64, conv: &[f64]| -> Option<f64> {
        let mut c: f64 = 0.0;
        for n in 0..t.len() {
            let excess = lhs[n] - 3.0 * (-eps * t[n] / 3.0).exp() * d0;
            if excess > 1e-13 * (d0 + lhs[n]) {
                if conv[n] <= 0.0 {
                    return None;
                }
                c = c.max(excess / conv[n]);
            }
        }
        Some(c)
    };
    let mut grid = Vec::new();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &eps in &cfg.eps_grid {
        let conv = convolution(eps);
        let c_fit = fit(eps, &conv);
        if let Some(c) = c_fit {
            if best.as_ref().map_or(true, |(e, _, _)| eps > *e) {
                best = Some((eps, c, conv));
            }
        }
        grid.push(EpsFit { eps, c_fit });
    }

    let ball_radius_sq = cfg.ball_radius_sq.unwrap_or(4.0 * a.samples[0].energy.norm_h2.max(b.samples[0].energy.norm_h2) + 1.0);
    let premise_ok = a.samples.iter().chain(&b.samples).all(|s| s.energy.norm_h2 <= ball_radius_sq);

    let lipschitz_c = if d0 > 0.0 {
        Some(t.iter().zip(&lhs).skip(1).filter(|(_, &l)| l > 0.0).map(|(&t, &l)| (l / d0).ln() / t).fold(0.0, f64::max))
    } else if lhs.iter().all(|&l| l == 0.0) {
        Some(0.0)
    } else {
        None
    };

    let (eps, c_fit, conv, pass) = match best {
        Some((e, c, conv)) => (e, c, conv, true),
        None => (cfg.eps_grid[0], f64::INFINITY, convolution(cfg.eps_grid[0]), false),
    };
    let rhs: Vec<f64> = t.iter().zip(&conv).map(|(&t, &i)| 3.0 * (-eps * t / 3.0).exp() * d0 + c_fit * i).collect();
    let margin = rhs.iter().zip(&lhs).map(|(r, l)| r - l).collect();
    Ok(PairReport { eps, c_fit, pass, t, lhs, rhs, margin, grid, lipschitz_c, ball_radius_sq, premise_ok })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakNormConfig {
    /// Order of the negative space `ℋ₋ₛ`, in `(0, 1]`.
    pub s: f64,
    /// Time lags probed; `None` spans two decades from the sample spacing.
    pub lags: Option<Vec<f64>>,
    /// Allowed shortfall of the fitted exponent below `s/2`.
    pub tolerance: f64,
}

impl Default for WeakNormConfig {
    fn default() -> Self {
        Self { s: 1.0, lags: None, tolerance: 0.05 }
    }
}

/// Spectral norms of the Hooke operator `A` (stiffness plus `λ t tᵀ` against the mass).
pub struct WeakNorm<T: Scalar> {
    vectors_t_mass: DMatrix<T>,
    eigenvalues: DVector<T>,
    s: T,
}

impl<T: Scalar> WeakNorm<T> {
    pub fn new(ops: &AssembledOperators<T>, law: &MaterialLaw<T>, s: f64) -> Result<Self> {
        let lambda = match law.force {
            Force::Hooke { lambda } => lambda,
            Force::Power { .. } => return Err(Error::assumption("the weak-norm probe is defined for the Hooke law only")),
        };
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::config(format!("weak-norm order s must lie in (0, 1], got {s}")));
        }
        let basis = ops.modal_basis(lambda)?;
        if basis.eigenvalues.iter().any(|&m| !(m > T::zero())) {
            return Err(Error::numerical("Hooke operator is not positive definite"));
        }
        Ok(Self { vectors_t_mass: basis.vectors.transpose() * &ops.mass, eigenvalues: basis.eigenvalues, s: T::of(s) })
    }

    /// `Σ μ_k^{2β} c_k²` with `c = Φᵀ M u`.
    fn power_norm_sq(&self, u: &DVector<T>, beta: T) -> T {
        let c = &self.vectors_t_mass * u;
        c.iter().zip(self.eigenvalues.iter()).fold(T::zero(), |acc, (&c, &m)| acc + m.powf(T::of(2.0) * beta) * c * c)
    }

    /// `‖(u, v, η)‖²` in `D(A^{(1−s)/2}) × D(A^{−s/2}) × L²_g(D(A^{(1−s)/2}))`.
    pub fn norm_sq(&self, u: &DVector<T>, v: &DVector<T>, history: &[DVector<T>]) -> T {
        let half = T::of(0.5);
        let b_u = half * (T::one() - self.s);
        let mut acc = self.power_norm_sq(u, b_u) + self.power_norm_sq(v, -half * self.s);
        for y in history {
            acc += self.power_norm_sq(y, b_u);
        }
        acc
    }

    pub fn distance(&self, a: &Sample<T>, b: &Sample<T>) -> Result<T> {
        let (ha, hb) = match (&a.history, &b.history) {
            (Some(x), Some(y)) if x.len() == y.len() => (x, y),
            _ => return Err(Error::config("weak-norm distances need samples with stored history")),
        };
        let dh: Vec<DVector<T>> = ha.iter().zip(hb).map(|(x, y)| x - y).collect();
        Ok(self.norm_sq(&(&a.u - &b.u), &(&a.v - &b.v), &dh).max(T::zero()).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub s: f64,
    pub lags: Vec<f64>,
    /// `max_{t₁} ‖S_{t₁+τ}z − S_{t₁}z‖_{ℋ₋ₛ}` for each lag `τ`.
    pub distances: Vec<f64>,
    pub gamma: f64,
    pub r2: f64,
    /// Guaranteed exponent `s/2`.
    pub bound: f64,
    pub pass: bool,
}

/// Fits `γ̂` in `‖S_{t₂}z − S_{t₁}z‖_{ℋ₋ₛ} ≈ C|t₂ − t₁|^γ̂` over two decades of lags.
pub fn holder_probe<T: Scalar>(traj: &Trajectory<T>, model: &Model<T>, cfg: &WeakNormConfig) -> Result<HolderReport> {
    let norm = WeakNorm::new(&model.ops, &model.law, cfg.s)?;
    let samples = &traj.samples;
    if samples.len() < 3 {
        return Err(Error::config("Hölder probe needs at least three samples"));
    }
    let spacing = samples[1].t - samples[0].t;
    let span = samples.last().expect("nonempty").t - samples[0].t;
    let lags = match &cfg.lags {
        Some(l) => l.clone(),
        None => [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0].iter().map(|k| k * spacing).collect(),
    };
    let mut used = Vec::new();
    let mut distances = Vec::new();
    for &lag in &lags {
        let shift = (lag / spacing).round() as usize;
        if shift == 0 || shift >= samples.len() || lag > 0.5 * span {
            continue;
        }
        // Anchors spread over the admissible window.
        let anchors = samples.len() - shift;
        let stride = (anchors / 50).max(1);
        let mut worst = T::zero();
        for i in (0..anchors).step_by(stride) {
            worst = worst.max(norm.distance(&samples[i], &samples[i + shift])?);
        }
        used.push(shift as f64 * spacing);
        distances.push(worst.f64());
    }
    if used.len() < 3 {
        return Err(Error::config("too few admissible lags for a Hölder fit; lengthen the run or densify the sampling"));
    }
    if distances.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::numerical("trajectory is stationary; the Hölder exponent is undefined"));
    }
    let xs: Vec<f64> = used.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let (gamma, _, r2) = linear_fit(&xs, &ys);
    let bound = 0.5 * cfg.s;
    Ok(HolderReport { s: cfg.s, lags: used, distances, gamma, r2, bound, pass: gamma >= bound - cfg.tolerance })
}
