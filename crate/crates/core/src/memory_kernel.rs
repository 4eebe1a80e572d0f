//! Relaxation kernel, history variable and memory-weighted functionals.
//!
//! The history `η^t(s) = u(t) − u(t−s)` is sampled at the nodes of a
//! quadrature rule for `∫₀^∞ g(s)(·) ds`. On the default grid each kernel
//! mode owns a Gauss–Radau–Laguerre block and `η_t = −η_s + u_t` is
//! collocated on it. The rule is exact for the products that appear in the
//! energy balance, so the discrete memory force obeys the same mode equation
//! as the continuous one and the discrete memory norm is dissipated exactly.
//! Composite grids instead rebuild node values from a stored trace of the
//! motion along characteristics.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beam_fem::AssembledOperators;
use crate::error::{Error, Result};
use crate::interp::{hermite_basis, MonotoneCubic};
use crate::quadrature::{gauss_legendre, gauss_radau_laguerre, lagrange_differentiation};
use crate::scalar::Scalar;

/// `g(s) = Σ gⱼ e^{−αⱼ s}` with derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T> {
    modes: Vec<(T, T)>,
    mass: T,
    kappa: T,
    alpha1: T,
    alpha2: T,
    alpha3: T,
}

/// Builds a kernel and rejects `∫g ≥ 1`.
pub fn make_kernel<T: Scalar>(modes: &[(T, T)]) -> Result<KernelSpec<T>> {
    let k = KernelSpec::describe(modes)?;
    if !(k.kappa > T::zero()) {
        return Err(Error::assumption(format!("κ ≤ 0: kernel mass {} is not below 1", k.mass)));
    }
    Ok(k)
}

impl<T: Scalar> KernelSpec<T> {
    /// Builds the kernel without the `κ > 0` check, for reporting.
    pub fn describe(modes: &[(T, T)]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::config("kernel needs at least one mode"));
        }
        for (j, &(g, a)) in modes.iter().enumerate() {
            if !(g > T::zero() && a > T::zero() && g.is_finite() && a.is_finite()) {
                return Err(Error::config(format!(
                    "kernel mode {j}: amplitude and rate must be positive, got ({g}, {a})"
                )));
            }
        }
        let mass = modes.iter().fold(T::zero(), |acc, &(g, a)| acc + g / a);
        let alpha1 = modes.iter().map(|m| m.1).fold(modes[0].1, T::max);
        let alpha2 = modes.iter().map(|m| m.1).fold(modes[0].1, T::min);
        Ok(Self {
            modes: modes.to_vec(),
            mass,
            kappa: T::one() - mass,
            alpha1,
            alpha2,
            alpha3: alpha1 * alpha1,
        })
    }

    pub fn modes(&self) -> &[(T, T)] {
        &self.modes
    }

    /// `∫₀^∞ g`.
    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Fastest rate.
    pub fn alpha1(&self) -> T {
        self.alpha1
    }

    /// Slowest rate.
    pub fn alpha2(&self) -> T {
        self.alpha2
    }

    /// Largest squared rate.
    pub fn alpha3(&self) -> T {
        self.alpha3
    }

    pub fn value(&self, s: T) -> T {
        self.modes.iter().fold(T::zero(), |acc, &(g, a)| acc + g * (-a * s).exp())
    }

    pub fn derivative(&self, s: T) -> T {
        self.modes.iter().fold(T::zero(), |acc, &(g, a)| acc - g * a * (-a * s).exp())
    }

    pub fn second_derivative(&self, s: T) -> T {
        self.modes.iter().fold(T::zero(), |acc, &(g, a)| acc + g * a * a * (-a * s).exp())
    }

    /// `g′(s)/g(s)`, scaled to stay finite for large `s`.
    pub fn log_derivative(&self, s: T) -> T {
        let (mut num, mut den) = (T::zero(), T::zero());
        for &(g, a) in &self.modes {
            let e = g * (-(a - self.alpha2) * s).exp();
            num += a * e;
            den += e;
        }
        -num / den
    }

    /// Checks `−α₁g ≤ g′ ≤ −α₂g` and `0 ≤ g″ ≤ α₃g` at the given abscissae.
    pub fn bounds_hold_at(&self, samples: impl IntoIterator<Item = T>) -> bool {
        let slack = T::of(1e3) * T::eps();
        samples.into_iter().all(|s| {
            let (g, d1, d2) = (self.value(s), self.derivative(s), self.second_derivative(s));
            let tol = slack * (g.abs() + d1.abs() + d2.abs());
            -self.alpha1 * g <= d1 + tol
                && d1 <= -self.alpha2 * g + tol
                && d2 >= -tol
                && d2 <= self.alpha3 * g + tol
        })
    }
}

/// Quadrature on the history axis, which also fixes how node values move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScheme {
    /// One Gauss–Radau–Laguerre block per mode, mapped by that mode's rate.
    /// `η_t = −η_s + u_t` is collocated on each block, with `η(0) = 0`
    /// imposed by a penalty at the `s = 0` node.
    #[default]
    GaussLaguerre,
    /// Composite Gauss–Legendre on `[0, S]` with `g(S) ≈ 10⁻¹⁶ g(0)`. Node
    /// values are shifted along characteristics, reconstructing `u(t − s)`
    /// from a stored trace of the motion.
    TruncatedComposite,
}

/// Contiguous run of nodes that belongs to a single exponential mode.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBlock<T> {
    pub start: usize,
    pub len: usize,
    /// `gⱼ` when the block has a node at `s = 0`, zero otherwise.
    pub amplitude: T,
    /// `αⱼ` when the block carries one mode.
    pub rate: Option<T>,
    /// `d/dξ` plus the inflow penalty in the unit `ξ = αⱼ s`, conjugated by
    /// the square roots of the weights.
    transport: Option<DMatrix<f64>>,
    root_weights: Vec<f64>,
}

impl<T> HistoryBlock<T> {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Nodes `s_k` and weights `w_k` with `Σ w_k φ(s_k) ≈ ∫₀^∞ g φ ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryGrid<T> {
    scheme: GridScheme,
    nodes: Vec<T>,
    weights: Vec<T>,
    sqrt_weights: Vec<T>,
    log_derivatives: Vec<T>,
    blocks: Vec<HistoryBlock<T>>,
    trace_horizon: T,
}

/// Relative tail weight beyond which history nodes are no longer rebuilt
/// from the stored trace.
const TAIL_WEIGHT: f64 = 1e-17;

/// Builds the grid; `n_nodes` counts nodes per mode for
/// [`GridScheme::GaussLaguerre`] (including `s = 0`) and in total otherwise.
pub fn build_history_grid<T: Scalar>(
    kernel: &KernelSpec<T>,
    n_nodes: usize,
    scheme: GridScheme,
) -> Result<HistoryGrid<T>> {
    if n_nodes == 0 {
        return Err(Error::config("history grid needs at least one node"));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut log_derivatives = Vec::new();
    let mut blocks = Vec::new();
    match scheme {
        GridScheme::GaussLaguerre => {
            let rule = gauss_radau_laguerre(n_nodes)?;
            let half_log: Vec<f64> = rule.weights.iter().map(|w| 0.5 * w.ln()).collect();
            let mut transport = lagrange_differentiation(&rule.nodes, &half_log);
            transport[(0, 0)] += n_nodes as f64;
            for &(g, a) in &kernel.modes {
                let (gf, af) = (g.f64(), a.f64());
                let start = nodes.len();
                for (&xi, &om) in rule.nodes.iter().zip(&rule.weights) {
                    nodes.push(xi / af);
                    weights.push(om * gf / af);
                    log_derivatives.push(-af);
                }
                blocks.push(HistoryBlock {
                    start,
                    len: n_nodes,
                    amplitude: g,
                    rate: Some(a),
                    transport: Some(transport.clone()),
                    root_weights: weights[start..].iter().map(|w| w.sqrt()).collect(),
                });
            }
        }
        GridScheme::TruncatedComposite => {
            let modes: Vec<(f64, f64)> = kernel.modes.iter().map(|&(g, a)| (g.f64(), a.f64())).collect();
            let per_panel = (1..=8).rev().find(|m| n_nodes % m == 0).unwrap_or(1);
            let panels = n_nodes / per_panel;
            let rule = gauss_legendre(per_panel)?;
            let h = 36.8 / kernel.alpha2.f64() / panels as f64;
            let g = |s: f64| -> f64 { modes.iter().map(|&(g, a)| g * (-a * s).exp()).sum() };
            for p in 0..panels {
                for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let s = h * (p as f64 + 0.5 * (x + 1.0));
                    nodes.push(s);
                    weights.push(0.5 * h * w * g(s));
                }
            }
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::numerical("history weights vanish"));
            }
            let mass = kernel.mass.f64();
            weights.iter_mut().for_each(|w| *w *= mass / total);
            // Nodes whose weight underflows in the working precision carry no information.
            let keep: Vec<usize> = (0..nodes.len()).filter(|&k| T::of(weights[k]) > T::zero()).collect();
            nodes = keep.iter().map(|&k| nodes[k]).collect();
            weights = keep.iter().map(|&k| weights[k]).collect();
            log_derivatives = nodes.iter().map(|&s| kernel.log_derivative(T::of(s)).f64()).collect();
            blocks.push(HistoryBlock {
                start: 0,
                len: nodes.len(),
                amplitude: T::zero(),
                rate: (kernel.modes.len() == 1).then_some(kernel.alpha1),
                transport: None,
                root_weights: Vec::new(),
            });
        }
    }
    let mut grid = HistoryGrid {
        scheme,
        sqrt_weights: weights.iter().map(|w| T::of(w.sqrt())).collect(),
        nodes: nodes.into_iter().map(T::of).collect(),
        weights: weights.into_iter().map(T::of).collect(),
        log_derivatives: log_derivatives.into_iter().map(T::of).collect(),
        blocks,
        trace_horizon: T::zero(),
    };
    if scheme == GridScheme::TruncatedComposite {
        grid.trace_horizon = grid.characteristic_horizon();
    }
    Ok(grid)
}

impl<T: Scalar> HistoryGrid<T> {
    fn characteristic_horizon(&self) -> T {
        let total = self.weights.iter().fold(T::zero(), |a, &b| a + b);
        let cut = T::of(TAIL_WEIGHT) * total;
        let mut tail = T::zero();
        for k in (0..self.nodes.len()).rev() {
            tail += self.weights[k];
            if tail > cut {
                return self.nodes[k];
            }
        }
        self.nodes[self.nodes.len() - 1]
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `√w_k`, the scaling between node values and stored values.
    pub fn sqrt_weights(&self) -> &[T] {
        &self.sqrt_weights
    }

    /// `g′(s_k)/g(s_k)` at every node, taken per block.
    pub fn log_derivatives(&self) -> &[T] {
        &self.log_derivatives
    }

    pub fn blocks(&self) -> &[HistoryBlock<T>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest lag reconstructed from the stored motion; zero when the
    /// update does not need a trace.
    pub fn trace_horizon(&self) -> T {
        self.trace_horizon
    }

    /// Coefficients and block matrices for one step of length `dt`.
    pub fn propagator(&self, dt: T) -> Result<Propagator<T>> {
        if !(dt > T::zero()) {
            return Err(Error::config(format!("history step must be positive, got {dt}")));
        }
        let mut coeff = Vec::with_capacity(self.len());
        let mut blocks = Vec::new();
        let mut mean_decay = Vec::new();
        let mut mean_coeff = T::zero();
        match self.scheme {
            GridScheme::GaussLaguerre => {
                for b in &self.blocks {
                    let (op, rate) = match (&b.transport, b.rate) {
                        (Some(op), Some(rate)) => (op, rate),
                        _ => return Err(Error::numerical("collocation block lacks its transport operator")),
                    };
                    let h = dt.f64() * rate.f64();
                    let decay = (op * -h).exp();
                    let r = DVector::from_column_slice(&b.root_weights);
                    let gain = op
                        .clone()
                        .lu()
                        .solve(&(&r - &decay * &r))
                        .ok_or_else(|| Error::numerical("history transport is singular"))?
                        / h;
                    if decay.iter().chain(gain.iter()).any(|x| !x.is_finite()) {
                        return Err(Error::numerical("history propagator is not finite"));
                    }
                    coeff.extend(gain.iter().map(|&x| T::of(x)));
                    blocks.push(decay.map(T::of));
                    let phi = T::of(-(-h).exp_m1() / h);
                    mean_coeff += (T::one() - phi) * b.amplitude / (rate * rate * dt);
                    mean_decay.push(phi);
                }
            }
            GridScheme::TruncatedComposite => {
                let two = T::of(2.0);
                for (k, &s) in self.nodes.iter().enumerate() {
                    let c = if s < dt {
                        let [_, _, h01, h11] = hermite_basis(T::one() - s / dt);
                        T::one() - h01 - two * h11
                    } else {
                        T::one()
                    };
                    coeff.push(c * self.sqrt_weights[k]);
                    mean_coeff += T::of(0.5) * c * self.weights[k];
                }
            }
        }
        Ok(Propagator { dt, coeff, blocks, mean_coeff, mean_decay })
    }
}

/// One step of the history update for a fixed `dt`, in stored values
/// `y_k = √w_k η_k`.
///
/// On collocated blocks the transport is integrated exactly with the
/// velocity frozen at `(u⁺ − u)/dt`, so `y⁺ = e^{−dt G} y + c (u⁺ − u)ᵀ`.
/// The memory sum enters the momentum balance through its exact average
/// over the step; on composite grids the endpoint mean is used instead.
#[derive(Debug, Clone)]
pub struct Propagator<T: Scalar> {
    dt: T,
    coeff: Vec<T>,
    blocks: Vec<DMatrix<T>>,
    mean_coeff: T,
    mean_decay: Vec<T>,
}

impl<T: Scalar> Propagator<T> {
    pub fn dt(&self) -> T {
        self.dt
    }

    /// `∂y_k⁺/∂u⁺` for every node.
    pub fn coefficients(&self) -> &[T] {
        &self.coeff
    }

    /// Dependence of the step-averaged `Σ w_k η_k` on `u⁺`.
    pub fn mean_coefficient(&self) -> T {
        self.mean_coeff
    }
}

/// Past displacement before the start of a simulation.
#[derive(Clone, Default)]
pub enum Prehistory<T: Scalar> {
    /// `η₀ ≡ 0`.
    #[default]
    Rest,
    /// `η₀` sampled at increasing lags, interpolated per coefficient.
    Samples(Vec<T>, Vec<MonotoneCubic<T>>),
    /// `s ↦ u₀(−s)`, so that `η₀(s) = u₀(0) − u₀(−s)`.
    Displacement(Arc<dyn Fn(T) -> DVector<T> + Send + Sync>),
}

impl<T: Scalar> fmt::Debug for Prehistory<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prehistory::Rest => f.write_str("Rest"),
            Prehistory::Samples(s, _) => write!(f, "Samples({} lags)", s.len()),
            Prehistory::Displacement(_) => f.write_str("Displacement(<fn>)"),
        }
    }
}

impl<T: Scalar> Prehistory<T> {
    /// Tabulated `η₀(s_i)`; `η₀(0) = 0` is added when the table starts later.
    pub fn samples(lags: Vec<T>, slices: Vec<DVector<T>>) -> Result<Self> {
        if lags.len() != slices.len() || lags.is_empty() {
            return Err(Error::config("prehistory table needs one slice per lag"));
        }
        let dof = slices[0].len();
        if slices.iter().any(|s| s.len() != dof) {
            return Err(Error::config("prehistory slices differ in length"));
        }
        if lags.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::config("prehistory lags must be nonnegative"));
        }
        let (mut xs, mut cols) = (lags.clone(), slices);
        if xs[0] > T::zero() {
            xs.insert(0, T::zero());
            cols.insert(0, DVector::zeros(dof));
        }
        let interps = (0..dof)
            .map(|i| MonotoneCubic::new(xs.clone(), cols.iter().map(|c| c[i]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prehistory::Samples(xs, interps))
    }

    pub fn displacement(f: impl Fn(T) -> DVector<T> + Send + Sync + 'static) -> Self {
        Prehistory::Displacement(Arc::new(f))
    }

    /// `η₀(s)` for a start displacement `u_start`.
    pub fn eta(&self, s: T, u_start: &DVector<T>) -> DVector<T> {
        match self {
            Prehistory::Rest => DVector::zeros(u_start.len()),
            Prehistory::Samples(_, interps) => DVector::from_iterator(interps.len(), interps.iter().map(|p| p.eval(s))),
            Prehistory::Displacement(f) => u_start - f(s),
        }
    }
}

#[derive(Debug, Clone)]
struct TracePoint<T: Scalar> {
    t: T,
    u: DVector<T>,
    v: DVector<T>,
}

/// `η^t` at the grid nodes, stored as `y_k = √w_k η_k`, together with the
/// motion needed to advance it.
#[derive(Debug, Clone)]
pub struct HistoryState<T: Scalar> {
    grid: Arc<HistoryGrid<T>>,
    values: Vec<DVector<T>>,
    trace: VecDeque<TracePoint<T>>,
    t_start: T,
    u_start: DVector<T>,
    prehistory: Prehistory<T>,
    cached: Option<Arc<Propagator<T>>>,
}

/// Affine dependence of the next stored values on the next displacement,
/// `y_k = c_k u_new − p_k`, and of the step-averaged memory sum,
/// `W̄ = c̄ u_new − p̄`.
#[derive(Debug, Clone)]
pub struct HistoryPlan<T: Scalar> {
    pub coeff: Vec<T>,
    pub offset: Vec<DVector<T>>,
    pub mean_coeff: T,
    pub mean_offset: DVector<T>,
}

impl<T: Scalar> HistoryState<T> {
    pub fn new(grid: Arc<HistoryGrid<T>>, prehistory: Prehistory<T>, t0: T, u0: DVector<T>, v0: DVector<T>) -> Result<Self> {
        if u0.len() != v0.len() {
            return Err(Error::config("displacement and velocity differ in length"));
        }
        if let Prehistory::Samples(_, interps) = &prehistory {
            if interps.len() != u0.len() {
                return Err(Error::config(format!(
                    "prehistory has {} coefficients, state has {}",
                    interps.len(),
                    u0.len()
                )));
            }
        }
        let mut values = Vec::with_capacity(grid.len());
        for (&s, &r) in grid.nodes.iter().zip(&grid.sqrt_weights) {
            let eta = prehistory.eta(s, &u0);
            if eta.len() != u0.len() || eta.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("initial history at lag {s} is invalid")));
            }
            values.push(eta * r);
        }
        let mut trace = VecDeque::new();
        trace.push_back(TracePoint { t: t0, u: u0.clone(), v: v0 });
        Ok(Self { grid, values, trace, t_start: t0, u_start: u0, prehistory, cached: None })
    }

    /// State with given stored values `√w_k η_k`, as produced by
    /// [`HistoryState::values`]. Only collocated grids are fully described by
    /// their values; composite grids also need the past motion.
    pub fn from_values(grid: Arc<HistoryGrid<T>>, t: T, u: DVector<T>, v: DVector<T>, values: Vec<DVector<T>>) -> Result<Self> {
        if grid.scheme != GridScheme::GaussLaguerre {
            return Err(Error::config("history values alone only describe a Gauss-Laguerre grid"));
        }
        if values.len() != grid.len() || values.iter().any(|y| y.len() != u.len()) || u.len() != v.len() {
            return Err(Error::config("history values do not match the grid and state"));
        }
        let mut trace = VecDeque::new();
        trace.push_back(TracePoint { t, u: u.clone(), v });
        let prehistory = Prehistory::Rest;
        Ok(Self { grid, values, trace, t_start: t, u_start: u, prehistory, cached: None })
    }

    pub fn grid(&self) -> &HistoryGrid<T> {
        &self.grid
    }

    pub fn grid_handle(&self) -> &Arc<HistoryGrid<T>> {
        &self.grid
    }

    /// Stored values `√w_k η_k`.
    pub fn values(&self) -> &[DVector<T>] {
        &self.values
    }

    /// `η^t(s_k)` for every node; zero where the weight underflows.
    ///
    /// On collocated grids the far nodes only carry the polynomial
    /// representation and their raw values can be large; weighted
    /// quantities are unaffected.
    pub fn slices(&self) -> Vec<DVector<T>> {
        (0..self.values.len()).map(|k| self.slice(k)).collect()
    }

    fn slice(&self, k: usize) -> DVector<T> {
        let r = self.grid.sqrt_weights[k];
        if r > T::zero() {
            &self.values[k] / r
        } else {
            DVector::zeros(self.values[k].len())
        }
    }

    pub fn time(&self) -> T {
        self.latest().t
    }

    pub fn prehistory(&self) -> &Prehistory<T> {
        &self.prehistory
    }

    fn latest(&self) -> &TracePoint<T> {
        self.trace.back().expect("trace is never empty")
    }

    /// Number of stored motion samples.
    pub fn trace_len(&self) -> usize {
        self.trace.len()
    }

    /// Displacement at an earlier time `τ`, if still reconstructible.
    pub fn displacement_at(&self, tau: T) -> Option<DVector<T>> {
        let front = &self.trace[0];
        if tau <= self.t_start {
            return Some(&self.u_start - self.prehistory.eta(self.t_start - tau, &self.u_start));
        }
        if tau < front.t {
            return None;
        }
        let last = self.latest();
        if tau >= last.t {
            return Some(last.u.clone());
        }
        let i = self.trace.partition_point(|p| p.t <= tau) - 1;
        let (a, b) = (&self.trace[i], &self.trace[i + 1]);
        let h = b.t - a.t;
        let [h00, h10, h01, h11] = hermite_basis((tau - a.t) / h);
        let mut out = &a.u * h00;
        out.axpy(h * h10, &a.v, T::one());
        out.axpy(h01, &b.u, T::one());
        out.axpy(h * h11, &b.v, T::one());
        Some(out)
    }

    /// `η^t(s)` at an arbitrary lag from the stored motion; beyond the trace
    /// the oldest reconstructible value is used.
    pub fn eta_at(&self, s: T) -> DVector<T> {
        let now = self.latest();
        match self.displacement_at(now.t - s) {
            Some(u) => &now.u - u,
            None => &now.u - &self.trace[0].u,
        }
    }

    /// Old node values linearly interpolated at lag `s` (used only past the horizon).
    fn shifted_slice(&self, s: T) -> DVector<T> {
        let nodes = &self.grid.nodes;
        let j = nodes.partition_point(|&x| x <= s);
        if j == 0 {
            return self.slice(0);
        }
        if j == nodes.len() {
            return self.slice(j - 1);
        }
        let th = (s - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
        self.slice(j - 1) * (T::one() - th) + self.slice(j) * th
    }

    /// Stored values after a step of length `dt`, as an affine function of
    /// the new displacement, assuming `(u_new − u)/dt = (v + v_new)/2`.
    pub fn plan(&self, dt: T) -> Result<HistoryPlan<T>> {
        Ok(self.plan_with(&self.grid.propagator(dt)?))
    }

    /// As [`HistoryState::plan`] with a precomputed propagator.
    pub fn plan_with(&self, prop: &Propagator<T>) -> HistoryPlan<T> {
        let now = self.latest();
        let dt = prop.dt;
        let mut offset = Vec::with_capacity(self.grid.len());
        let mut mean_offset = DVector::zeros(now.u.len());
        match self.grid.scheme {
            GridScheme::GaussLaguerre => {
                for ((block, e), &phi) in self.grid.blocks.iter().zip(&prop.blocks).zip(&prop.mean_decay) {
                    let values = &self.values[block.range()];
                    let mut sum = DVector::zeros(now.u.len());
                    for i in 0..block.len {
                        let k = block.start + i;
                        let mut p = &now.u * prop.coeff[k];
                        for (j, y) in values.iter().enumerate() {
                            p.axpy(-e[(i, j)], y, T::one());
                        }
                        sum.axpy(self.grid.sqrt_weights[k], &values[i], T::one());
                        offset.push(p);
                    }
                    let rate = block.rate.expect("collocated blocks carry a rate");
                    let gain = (T::one() - phi) * block.amplitude / (rate * rate * dt);
                    mean_offset.axpy(gain, &now.u, T::one());
                    mean_offset.axpy(-phi, &sum, T::one());
                }
            }
            GridScheme::TruncatedComposite => {
                let t1 = now.t + dt;
                let two = T::of(2.0);
                let half = T::of(0.5);
                for (k, (&s, &r)) in self.grid.nodes.iter().zip(&self.grid.sqrt_weights).enumerate() {
                    let p = if s < dt {
                        let [h00, h10, _, h11] = hermite_basis(T::one() - s / dt);
                        let mut p = &now.u * (h00 - two * h11);
                        p.axpy((h10 - h11) * dt, &now.v, T::one());
                        p
                    } else {
                        match self.displacement_at(t1 - s) {
                            Some(p) => p,
                            None => &now.u - self.shifted_slice(s - dt),
                        }
                    };
                    mean_offset.axpy(half * r * r, &p, T::one());
                    mean_offset.axpy(-half * r, &self.values[k], T::one());
                    offset.push(p * r);
                }
            }
        }
        HistoryPlan { coeff: prop.coeff.clone(), offset, mean_coeff: prop.mean_coeff, mean_offset }
    }

    /// Applies a plan with the solved displacement and records the motion.
    pub fn commit(&mut self, plan: &HistoryPlan<T>, t_new: T, u_new: DVector<T>, v_new: DVector<T>) {
        for ((y, &c), p) in self.values.iter_mut().zip(&plan.coeff).zip(&plan.offset) {
            *y = &u_new * c - p;
        }
        self.trace.push_back(TracePoint { t: t_new, u: u_new, v: v_new });
        self.trim();
    }

    /// Advances along a prescribed motion `(u_new, v_new)` at `t_new`.
    pub fn advance(&mut self, t_new: T, u_new: DVector<T>, v_new: DVector<T>) -> Result<()> {
        let now = self.latest();
        let dt = t_new - now.t;
        if !(dt > T::zero()) {
            return Err(Error::config(format!("history step must move forward, got Δt = {dt}")));
        }
        if u_new.len() != now.u.len() || v_new.len() != now.u.len() {
            return Err(Error::config("advance_history: snapshot length mismatch"));
        }
        if self.grid.scheme == GridScheme::TruncatedComposite {
            // Lags inside the stored trace are rebuilt from the prescribed
            // motion rather than from the midpoint assumption.
            let shifted: Vec<Option<DVector<T>>> = self
                .grid
                .nodes
                .iter()
                .map(|&s| (t_new - s < self.trace[0].t && t_new - s > self.t_start).then(|| self.shifted_slice(s - dt)))
                .collect();
            let increment = &u_new - &now.u;
            self.trace.push_back(TracePoint { t: t_new, u: u_new.clone(), v: v_new });
            for (k, &s) in self.grid.nodes.iter().enumerate() {
                let eta = match &shifted[k] {
                    None => &u_new - self.displacement_at(t_new - s).expect("covered by trace"),
                    Some(old) => old + &increment,
                };
                self.values[k] = eta * self.grid.sqrt_weights[k];
            }
            self.trim();
            return Ok(());
        }
        let prop = match &self.cached {
            Some(p) if p.dt == dt => p.clone(),
            _ => {
                let p = Arc::new(self.grid.propagator(dt)?);
                self.cached = Some(p.clone());
                p
            }
        };
        let plan = self.plan_with(&prop);
        self.commit(&plan, t_new, u_new, v_new);
        Ok(())
    }

    fn trim(&mut self) {
        let keep_from = self.latest().t - self.grid.trace_horizon;
        while self.trace.len() >= 2 && self.trace[1].t <= keep_from {
            self.trace.pop_front();
        }
    }

    /// `Σ w_k η_k`.
    pub fn weighted_sum(&self) -> DVector<T> {
        let mut acc = DVector::zeros(self.latest().u.len());
        for (r, y) in self.grid.sqrt_weights.iter().zip(&self.values) {
            acc.axpy(*r, y, T::one());
        }
        acc
    }
}

/// `Σ w_k K η_k`, the memory contribution to the weak form.
pub fn memory_force<T: Scalar>(h: &HistoryState<T>, ops: &AssembledOperators<T>) -> DVector<T> {
    &ops.stiffness * h.weighted_sum()
}

/// `‖η‖²` in `L²_g(ℝ⁺; V)`.
pub fn memory_norm<T: Scalar>(h: &HistoryState<T>, ops: &AssembledOperators<T>) -> T {
    weighted_quadratic(h.values(), ops, |_| T::one())
}

/// `−½ ∫ g′ ‖η″‖² ds`.
pub fn memory_dissipation<T: Scalar>(h: &HistoryState<T>, ops: &AssembledOperators<T>) -> T {
    dissipation_of(h.grid(), h.values(), ops)
}

/// Memory dissipation of arbitrary stored values. Blocks with a node at
/// `s = 0` add `½ gⱼ ‖η″(0)‖²`, which vanishes whenever `η(0) = 0` holds
/// exactly and otherwise accounts for the inflow penalty.
pub fn dissipation_of<T: Scalar>(grid: &HistoryGrid<T>, values: &[DVector<T>], ops: &AssembledOperators<T>) -> T {
    let half = T::of(0.5);
    let inflow = grid
        .blocks
        .iter()
        .filter(|b| b.amplitude > T::zero())
        .fold(T::zero(), |acc, b| {
            acc + half * b.amplitude / grid.weights[b.start] * ops.bending_energy(&values[b.start])
        });
    weighted_quadratic(values, ops, |k| -half * grid.log_derivatives[k]) + inflow
}

/// `Σ c(k) y_kᵀ K y_k` for stored values `y_k = √w_k η_k`.
pub fn weighted_quadratic<T: Scalar>(values: &[DVector<T>], ops: &AssembledOperators<T>, factor: impl Fn(usize) -> T) -> T {
    values.iter().enumerate().fold(T::zero(), |acc, (k, y)| acc + factor(k) * ops.bending_energy(y))
}

/// Exact reduction for exponential kernels: `wⱼ = ∫ gⱼ e^{−αⱼ s} η ds` and
/// `Nⱼ = ∫ gⱼ e^{−αⱼ s} η″ᵀη″ ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOracleState<T: Scalar> {
    pub w: Vec<DVector<T>>,
    pub norm: Vec<T>,
}

impl<T: Scalar> ModeOracleState<T> {
    pub fn zeros(kernel: &KernelSpec<T>, dof: usize) -> Self {
        Self { w: vec![DVector::zeros(dof); kernel.modes.len()], norm: vec![T::zero(); kernel.modes.len()] }
    }

    /// Collocated grids already carry one block per mode and are summed
    /// directly. Otherwise the stored history is integrated against each mode
    /// with composite 8-point Gauss–Legendre panels, split at the start of the run.
    pub fn from_history(h: &HistoryState<T>, kernel: &KernelSpec<T>, ops: &AssembledOperators<T>) -> Result<Self> {
        let grid = h.grid();
        if grid.scheme == GridScheme::GaussLaguerre {
            if grid.blocks.len() != kernel.modes.len() {
                return Err(Error::config("history grid was built for a different kernel"));
            }
            let mut out = Self::zeros(kernel, ops.dof_count());
            for (j, b) in grid.blocks.iter().enumerate() {
                for k in b.range() {
                    out.w[j].axpy(grid.sqrt_weights[k], &h.values[k], T::one());
                    out.norm[j] += ops.bending_energy(&h.values[k]);
                }
            }
            return Ok(out);
        }
        let rule = gauss_legendre(8)?;
        let elapsed = h.time() - h.t_start;
        let mut out = Self::zeros(kernel, ops.dof_count());
        for (j, &(g, a)) in kernel.modes.iter().enumerate() {
            let span = T::of(40.0) / a;
            let mut breaks = vec![T::zero()];
            if elapsed > T::zero() && elapsed < span {
                breaks.push(elapsed);
            }
            breaks.push(span);
            let width = T::of(0.02).min(T::one() / a);
            for seg in breaks.windows(2) {
                let panels = ((seg[1] - seg[0]) / width).ceil().to_usize().unwrap_or(1).max(1);
                let hp = (seg[1] - seg[0]) / T::of_usize(panels);
                for p in 0..panels {
                    for (&x, &wq) in rule.nodes.iter().zip(&rule.weights) {
                        let s = seg[0] + hp * (T::of_usize(p) + T::of(0.5 * (x + 1.0)));
                        let weight = T::of(0.5 * wq) * hp * g * (-a * s).exp();
                        let eta = h.eta_at(s);
                        out.norm[j] += weight * ops.bending_energy(&eta);
                        out.w[j].axpy(weight, &eta, T::one());
                    }
                }
            }
        }
        Ok(out)
    }

    /// `K Σ wⱼ`.
    pub fn force(&self, ops: &AssembledOperators<T>) -> DVector<T> {
        let mut s = DVector::zeros(ops.dof_count());
        for w in &self.w {
            s += w;
        }
        &ops.stiffness * s
    }

    pub fn memory_norm(&self) -> T {
        self.norm.iter().fold(T::zero(), |a, &b| a + b)
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::beam_fem::{assemble_operators, BeamMesh};
    use proptest::prelude::*;

    /// One to three modes with total mass below one.
    fn kernel() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.05f64..1.0, 0.2f64..20.0), 1..4).prop_map(|raw| {
            let mass: f64 = raw.iter().map(|(g, a)| g / a).sum();
            let shrink = if mass >= 0.9 { 0.9 / mass } else { 1.0 };
            raw.into_iter().map(|(g, a)| (g * shrink, a)).collect()
        })
    }

    proptest! {
        #[test]
        fn kappa_is_one_minus_mass(modes in kernel()) {
            let k = make_kernel(&modes).unwrap();
            let mass: f64 = modes.iter().map(|(g, a)| g / a).sum();
            prop_assert!((k.kappa() - (1.0 - mass)).abs() < 1e-15);
            prop_assert!(k.alpha2() <= k.alpha1());
            prop_assert!(k.bounds_hold_at((0..50).map(|i| i as f64 * 0.1)));
        }

        #[test]
        fn grid_weights_carry_the_kernel_mass(modes in kernel(), n in 1usize..24) {
            let k = make_kernel(&modes).unwrap();
            let grid = build_history_grid(&k, n, GridScheme::GaussLaguerre).unwrap();
            let total: f64 = grid.weights().iter().sum();
            prop_assert!((total - k.mass()).abs() <= 1e-12 * k.mass());
            prop_assert_eq!(grid.len(), n * modes.len());
        }

        #[test]
        fn dissipation_dominates_norm(modes in kernel(), n in 1usize..12, seed in prop::collection::vec(-1.0f64..1.0, 8)) {
            let ops = assemble_operators(&BeamMesh::uniform(1.0, 2).unwrap()).unwrap();
            let k = make_kernel(&modes).unwrap();
            let grid = Arc::new(build_history_grid(&k, n, GridScheme::GaussLaguerre).unwrap());
            let dof = ops.dof_count();
            let values: Vec<DVector<f64>> = (0..grid.len())
                .map(|i| DVector::from_iterator(dof, (0..dof).map(|j| seed[(i + 3 * j) % seed.len()] / (1.0 + i as f64))))
                .collect();
            let zero = DVector::zeros(dof);
            let h = HistoryState::from_values(grid, 0.0, zero.clone(), zero, values).unwrap();
            let norm = memory_norm(&h, &ops);
            prop_assert!(memory_dissipation(&h, &ops) >= 0.5 * k.alpha2() * norm * (1.0 - 1e-12));
        }
    }
}
