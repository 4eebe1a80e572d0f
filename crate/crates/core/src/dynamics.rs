//! Time integration of the semidiscrete beam–memory–boundary system.
//!
//! Unknowns are the displacement `u`, velocity `v` and the history slices.
//! Both integrators share the linear operator
//! `A = (2/Δt²)M + ½(κ + W)K`, where `W` collects the history weights that
//! depend on the new displacement; it is factored once per step size. The
//! boundary nonlinearity enters through the tip value only, so each step is
//! a scalar Newton solve on `x = u_{n+1}(L)` with the rank-one correction
//! `u_{n+1} = A⁻¹r − b(x)·A⁻¹t_val`.

use std::sync::Arc;

use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::beam_fem::{cholesky, AssembledOperators};
use crate::energy::{energy, EnergyReport};
use crate::error::{Error, Result};
use crate::law::MaterialLaw;
use crate::memory_kernel::{
    build_history_grid, dissipation_of, memory_norm, GridScheme, HistoryGrid, HistoryState, KernelSpec, ModeOracleState, Prehistory,
    Propagator,
};
use crate::scalar::Scalar;

/// Everything a simulation reads but never mutates.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub ops: Arc<AssembledOperators<T>>,
    pub law: MaterialLaw<T>,
    pub kernel: KernelSpec<T>,
    pub grid: Arc<HistoryGrid<T>>,
}

impl<T: Scalar> Model<T> {
    pub fn new(ops: AssembledOperators<T>, law: MaterialLaw<T>, kernel: KernelSpec<T>, grid: HistoryGrid<T>) -> Self {
        Self { ops: Arc::new(ops), law, kernel, grid: Arc::new(grid) }
    }

    pub fn kappa(&self) -> T {
        self.kernel.kappa()
    }

    pub fn state(&self, u: DVector<T>, v: DVector<T>, prehistory: Prehistory<T>) -> Result<State<T>> {
        State::new(self, T::zero(), u, v, prehistory)
    }

    /// Zero displacement, velocity and history.
    pub fn rest_state(&self) -> State<T> {
        let n = self.ops.dof_count();
        self.state(DVector::zeros(n), DVector::zeros(n), Prehistory::Rest).expect("rest state is valid")
    }
}

/// `z = (u, u_t, η)` at time `t`.
#[derive(Debug, Clone)]
pub struct State<T: Scalar> {
    pub t: T,
    pub u: DVector<T>,
    pub v: DVector<T>,
    pub history: HistoryState<T>,
}

impl<T: Scalar> State<T> {
    pub fn new(model: &Model<T>, t: T, u: DVector<T>, v: DVector<T>, prehistory: Prehistory<T>) -> Result<Self> {
        let n = model.ops.dof_count();
        if u.len() != n || v.len() != n {
            return Err(Error::config(format!("state vectors must have {n} entries")));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::config("initial state has non-finite entries"));
        }
        let history = HistoryState::new(model.grid.clone(), prehistory, t, u.clone(), v.clone())?;
        Ok(Self { t, u, v, history })
    }

    /// `‖z‖²_ℋ = κ u″ᵀu″ + ‖v‖² + ‖η‖²_g`.
    pub fn norm_sq(&self, model: &Model<T>) -> T {
        let ops = &model.ops;
        model.kappa() * ops.bending_energy(&self.u)
            + ops.mass_energy(&self.v)
            + crate::memory_kernel::memory_norm(&self.history, ops)
    }

    pub fn tip(&self, ops: &AssembledOperators<T>) -> T {
        ops.tip_value(&self.u)
    }

    pub fn tip_velocity(&self, ops: &AssembledOperators<T>) -> T {
        ops.tip_value(&self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    Midpoint,
    /// Average acceleration (β = 1/4, γ = 1/2).
    NewmarkImplicit,
}

fn default_newton_tol() -> f64 {
    1e-10
}

fn default_newton_max_iter() -> usize {
    25
}

fn default_sample_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Store the history slices in every sample (needed for state differences).
    #[serde(default)]
    pub keep_history: bool,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            integrator: Integrator::default(),
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            sample_every: default_sample_every(),
            keep_history: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config(format!("T must be nonnegative, got {}", self.t_end)));
        }
        if self.t_end > 0.0 && self.dt >= self.t_end {
            return Err(Error::config(format!("dt = {} must be below T = {}", self.dt, self.t_end)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::config("Newton tolerance and iteration cap must be positive"));
        }
        if self.sample_every == 0 {
            return Err(Error::config("sample_every must be at least 1"));
        }
        Ok(())
    }
}

/// Per-step quantities needed by the discrete energy balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub dt: f64,
    /// Memory dissipation averaged over the step, as balanced by the scheme.
    pub d_mem_mid: f64,
    /// Boundary damping power: damping force used in the step times the mean tip velocity.
    pub d_bnd_mid: f64,
    pub newton_iterations: usize,
}

/// One factorization of the linear part for a fixed step size.
pub struct Stepper<'a, T: Scalar> {
    model: &'a Model<T>,
    dt: T,
    integrator: Integrator,
    chol: Cholesky<T, Dyn>,
    propagator: Propagator<T>,
    /// `A⁻¹ t_val`.
    z: DVector<T>,
    /// `t_valᵀ A⁻¹ t_val`.
    gamma: T,
    newton_tol: T,
    newton_max_iter: usize,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    pub fn new(model: &'a Model<T>, dt: T, config: &SimConfig) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::config(format!("step must be positive, got {dt}")));
        }
        let two = T::of(2.0);
        let propagator = model.grid.propagator(dt)?;
        let ops = &model.ops;
        let a = &ops.mass * (two / (dt * dt)) + &ops.stiffness * (T::of(0.5) * model.kappa() + propagator.mean_coefficient());
        let chol = cholesky(&a, "step operator")?;
        let z = chol.solve(&ops.t_val);
        let gamma = ops.t_val.dot(&z);
        Ok(Self {
            model,
            dt,
            integrator: config.integrator,
            chol,
            propagator,
            z,
            gamma,
            newton_tol: T::of(config.newton_tol),
            newton_max_iter: config.newton_max_iter,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Boundary load and its derivative as functions of the tip increment `d`.
    fn boundary_load(&self, xn: T, yn: T, d: T) -> (T, T) {
        let law = &self.model.law;
        let dt = self.dt;
        let half = T::of(0.5);
        let two = T::of(2.0);
        let x = xn + d;
        match self.integrator {
            Integrator::Midpoint => {
                let (fbar, dfbar) = law.force.mean_value(xn, x);
                let m = xn + half * d;
                let vm = d / dt;
                let damp = law.damping.value(m * m);
                let ddamp = law.damping.derivative(m * m) * m;
                (fbar + damp * vm, dfbar + ddamp * vm + damp / dt)
            }
            Integrator::NewmarkImplicit => {
                let y = two * d / dt - yn;
                let f = half * (law.force.value(xn) + law.force.value(x));
                let df = half * law.force.derivative(x);
                let d0 = law.damping.value(xn * xn) * yn;
                let d1 = law.damping.value(x * x) * y;
                let dd1 = two * x * law.damping.derivative(x * x) * y + law.damping.value(x * x) * two / dt;
                (f + half * (d0 + d1), df + half * dd1)
            }
        }
    }

    pub fn step(&self, state: &mut State<T>, index: usize) -> Result<StepDiagnostics> {
        let ops = &self.model.ops;
        let grid = &self.model.grid;
        let dt = self.dt;
        let two = T::of(2.0);
        let half = T::of(0.5);
        let kappa = self.model.kappa();

        let plan = state.history.plan_with(&self.propagator);

        // Solved for the increment u⁺ − u to keep the 1/dt² scaling out of the cancellation.
        let mut rhs = &ops.mass * (&state.v * (two / dt));
        rhs -= &ops.stiffness * (&state.u * (kappa + plan.mean_coeff) - &plan.mean_offset);
        let du_free = self.chol.solve(&rhs);
        let d_free = ops.t_val.dot(&du_free);
        let xn = state.tip(ops);
        let yn = state.tip_velocity(ops);

        let fail = |reason: String| Error::StepFailure { step: index, t: (state.t + dt).f64(), reason };
        let phi = |d: T| -> (T, T) {
            let (b, db) = self.boundary_load(xn, yn, d);
            (d - d_free + self.gamma * b, T::one() + self.gamma * db)
        };
        let mut x = dt * yn;
        let (mut r, mut dr) = phi(x);
        let mut iterations = 0;
        loop {
            if !(r.is_finite() && dr.is_finite()) {
                return Err(fail(format!("non-finite Newton residual at tip increment {x}; reduce dt")));
            }
            let scale = x.abs() + d_free.abs() + T::eps() * (T::one() + xn.abs());
            if r.abs() <= self.newton_tol * scale {
                break;
            }
            if iterations == self.newton_max_iter {
                return Err(fail(format!(
                    "Newton did not converge in {iterations} iterations (residual {:.3e}); reduce dt",
                    r.abs().f64()
                )));
            }
            iterations += 1;
            let mut delta = -r / dr;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = x + delta;
                let (rt, dt_) = phi(trial);
                if rt.is_finite() && rt.abs() < r.abs() {
                    x = trial;
                    r = rt;
                    dr = dt_;
                    accepted = true;
                    break;
                }
                delta *= half;
            }
            if !accepted {
                if r.abs() <= T::of(1e3) * T::eps() * (T::one() + xn.abs() + x.abs()) {
                    break;
                }
                return Err(fail(format!("Newton line search stalled at residual {:.3e}; reduce dt", r.abs().f64())));
            }
        }

        let (b, _) = self.boundary_load(xn, yn, x);
        let du = &du_free - &self.z * b;
        let u_new = &state.u + &du;
        let v_new = &du * (two / dt) - &state.v;
        if u_new.iter().chain(v_new.iter()).any(|c| !c.is_finite()) {
            return Err(fail("state became non-finite".into()));
        }

        let norm_old = memory_norm(&state.history, ops);
        let old = state.history.values().to_vec();
        state.history.commit(&plan, state.t + dt, u_new.clone(), v_new.clone());
        let d_mem_mid = match grid.scheme() {
            // Exact step average of the dissipation, read off the memory balance.
            GridScheme::GaussLaguerre => {
                let mean = &u_new * plan.mean_coeff - &plan.mean_offset;
                let k_vmid = &ops.stiffness * (&du / dt);
                mean.dot(&k_vmid) - (memory_norm(&state.history, ops) - norm_old) / (two * dt)
            }
            GridScheme::TruncatedComposite => {
                let mid: Vec<DVector<T>> =
                    old.iter().zip(state.history.values()).map(|(a, b)| (a + b) * half).collect();
                dissipation_of(grid, &mid, ops)
            }
        };
        let tip_mid_velocity = x / dt;
        let force_part = match self.integrator {
            Integrator::Midpoint => self.model.law.force.mean_value(xn, xn + x).0,
            Integrator::NewmarkImplicit => half * (self.model.law.force.value(xn) + self.model.law.force.value(xn + x)),
        };
        let d_bnd_mid = (b - force_part) * tip_mid_velocity;

        state.t += dt;
        state.u = u_new;
        state.v = v_new;
        Ok(StepDiagnostics {
            dt: dt.f64(),
            d_mem_mid: d_mem_mid.f64(),
            d_bnd_mid: d_bnd_mid.f64(),
            newton_iterations: iterations,
        })
    }
}

/// One-off step; builds a fresh factorization.
pub fn step<T: Scalar>(state: &State<T>, model: &Model<T>, dt: T, config: &SimConfig) -> Result<(State<T>, StepDiagnostics)> {
    let stepper = Stepper::new(model, dt, config)?;
    let mut next = state.clone();
    let diag = stepper.step(&mut next, 0)?;
    Ok((next, diag))
}

/// Stored snapshot of a trajectory.
#[derive(Debug, Clone)]
pub struct Sample<T: Scalar> {
    pub t: f64,
    pub u: DVector<T>,
    pub v: DVector<T>,
    pub tip: f64,
    pub tip_velocity: f64,
    pub energy: EnergyReport,
    /// Diagnostics of the step that produced this sample.
    pub step: Option<StepDiagnostics>,
    /// Stored history values `√w_k η_k`, when requested.
    pub history: Option<Vec<DVector<T>>>,
}

impl<T: Scalar> Sample<T> {
    fn capture(state: &State<T>, model: &Model<T>, step: Option<StepDiagnostics>, keep_history: bool) -> Self {
        Self {
            t: state.t.f64(),
            u: state.u.clone(),
            v: state.v.clone(),
            tip: state.tip(&model.ops).f64(),
            tip_velocity: state.tip_velocity(&model.ops).f64(),
            energy: energy(state, model),
            step,
            history: keep_history.then(|| state.history.values().to_vec()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    pub samples: Vec<Sample<T>>,
    pub config: SimConfig,
    pub final_state: State<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn last(&self) -> &Sample<T> {
        self.samples.last().expect("trajectory holds the initial sample")
    }
}

/// Repeated stepping from `z0` to `T`; the last step is shortened to land on `T`.
pub fn simulate<T: Scalar>(z0: &State<T>, model: &Model<T>, config: &SimConfig) -> Result<Trajectory<T>> {
    simulate_with(z0, model, config, |_, _| {})
}

/// As [`simulate`], calling `observe` after every step with the new state.
pub fn simulate_with<T: Scalar>(
    z0: &State<T>,
    model: &Model<T>,
    config: &SimConfig,
    mut observe: impl FnMut(&State<T>, &StepDiagnostics),
) -> Result<Trajectory<T>> {
    config.validate()?;
    let mut state = z0.clone();
    let mut samples = vec![Sample::capture(&state, model, None, config.keep_history)];
    let full_steps = ((config.t_end / config.dt) * (1.0 + 1e-12)).floor() as usize;
    let remainder = config.t_end - full_steps as f64 * config.dt;
    let stepper = Stepper::new(model, T::of(config.dt), config)?;
    let tail = if remainder > 1e-9 * config.dt { Some(Stepper::new(model, T::of(remainder), config)?) } else { None };
    let total = full_steps + usize::from(tail.is_some());
    for n in 1..=total {
        let s = if n > full_steps { tail.as_ref().expect("tail step exists") } else { &stepper };
        let diag = s.step(&mut state, n)?;
        observe(&state, &diag);
        if n % config.sample_every == 0 || n == total {
            samples.push(Sample::capture(&state, model, Some(diag), config.keep_history));
        }
    }
    Ok(Trajectory { samples, config: config.clone(), final_state: state })
}

/// Reference system with the memory replaced by the exact mode equations
/// `wⱼ′ = −αⱼwⱼ + (gⱼ/αⱼ)v` and `Nⱼ′ = −αⱼNⱼ + 2wⱼᵀKv`.
#[derive(Debug, Clone)]
pub struct OracleState<T: Scalar> {
    pub t: T,
    pub u: DVector<T>,
    pub v: DVector<T>,
    pub modes: ModeOracleState<T>,
}

impl<T: Scalar> OracleState<T> {
    pub fn from_state(state: &State<T>, model: &Model<T>) -> Result<Self> {
        Ok(Self {
            t: state.t,
            u: state.u.clone(),
            v: state.v.clone(),
            modes: ModeOracleState::from_history(&state.history, &model.kernel, &model.ops)?,
        })
    }

    pub fn norm_sq(&self, model: &Model<T>) -> T {
        model.kappa() * model.ops.bending_energy(&self.u) + model.ops.mass_energy(&self.v) + self.modes.memory_norm()
    }

    /// Squared `ℋ` distance to a grid state. The oracle only knows the
    /// memory norm, so the history enters as `(‖η‖ − ‖η_o‖)²`.
    pub fn distance_sq(&self, state: &State<T>, model: &Model<T>) -> T {
        let ops = &model.ops;
        let du = &state.u - &self.u;
        let dv = &state.v - &self.v;
        let dn = crate::memory_kernel::memory_norm(&state.history, ops).max(T::zero()).sqrt()
            - self.modes.memory_norm().max(T::zero()).sqrt();
        model.kappa() * ops.bending_energy(&du) + ops.mass_energy(&dv) + dn * dn
    }
}

/// Implicit-midpoint integrator for [`OracleState`].
///
/// A Gauss–Laguerre grid with a single node per mode carries `wⱼ` through
/// exactly the mode equation, so the displacement update reuses [`Stepper`]
/// on that reduced model and only `Nⱼ` is advanced here.
pub struct ModeOracle<T: Scalar> {
    reduced: Model<T>,
    config: SimConfig,
}

impl<T: Scalar> ModeOracle<T> {
    pub fn new(model: &Model<T>, config: &SimConfig) -> Result<Self> {
        let grid = build_history_grid(&model.kernel, 1, GridScheme::GaussLaguerre)?;
        let reduced = Model {
            ops: model.ops.clone(),
            law: model.law.clone(),
            kernel: model.kernel.clone(),
            grid: Arc::new(grid),
        };
        Ok(Self { reduced, config: config.clone() })
    }

    /// Integrates over `dt` with `substeps` equal steps.
    pub fn advance(&self, s: &OracleState<T>, dt: T, substeps: usize) -> Result<OracleState<T>> {
        let n = substeps.max(1);
        let h = dt / T::of_usize(n);
        let stepper = Stepper::new(&self.reduced, h, &self.config)?;
        let grid = self.reduced.grid.clone();
        let roots = grid.sqrt_weights().to_vec();
        let values = s.modes.w.iter().zip(&roots).map(|(w, &r)| w / r).collect();
        let history = HistoryState::from_values(grid, s.t, s.u.clone(), s.v.clone(), values)?;
        let mut state = State { t: s.t, u: s.u.clone(), v: s.v.clone(), history };
        let mut norm = s.modes.norm.clone();
        let ops = &self.reduced.ops;
        for i in 0..n {
            let w_old: Vec<DVector<T>> = state.history.values().iter().zip(&roots).map(|(y, &r)| y * r).collect();
            let u_old = state.u.clone();
            stepper.step(&mut state, i)?;
            let v_mid = (&state.u - u_old) / h;
            let k_vmid = &ops.stiffness * &v_mid;
            for (j, &(g, a)) in self.reduced.kernel.modes().iter().enumerate() {
                // N⁺ = e^{−αh}N + 2∫₀ʰ e^{−α(h−τ)} w(τ)ᵀK v dτ with w relaxing towards (g/α²)v.
                let decay = (-a * h).exp();
                let tail = (T::one() - decay) / a - h * decay;
                let integral = w_old[j].dot(&k_vmid) * h * decay + (g / (a * a)) * v_mid.dot(&k_vmid) * tail;
                norm[j] = decay * norm[j] + T::of(2.0) * integral;
            }
        }
        let w = state.history.values().iter().zip(&roots).map(|(y, &r)| y * r).collect();
        Ok(OracleState { t: s.t + dt, u: state.u, v: state.v, modes: ModeOracleState { w, norm } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam_fem::{assemble_operators, BeamMesh};
    use crate::law::{Damping, Force};
    use crate::memory_kernel::{build_history_grid, make_kernel, GridScheme};

    fn model(n_el: usize, force: Force<f64>) -> Model<f64> {
        let ops = assemble_operators(&BeamMesh::uniform(1.0, n_el).unwrap()).unwrap();
        let kernel = make_kernel(&[(0.5, 1.0)]).unwrap();
        let grid = build_history_grid(&kernel, 32, GridScheme::GaussLaguerre).unwrap();
        Model::new(ops, MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.5 }, force), kernel, grid)
    }

    #[test]
    fn rest_is_an_equilibrium() {
        let m = model(4, Force::Hooke { lambda: 2.0 });
        let z0 = m.rest_state();
        let traj = simulate(&z0, &m, &SimConfig::new(0.01, 1.0)).unwrap();
        assert_eq!(traj.samples.len(), 101);
        assert!(traj.samples.iter().all(|s| s.u.amax() == 0.0 && s.v.amax() == 0.0 && s.energy.e == 0.0));
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let m = model(3, Force::Hooke { lambda: 1.0 });
        let traj = simulate(&m.rest_state(), &m, &SimConfig::new(0.1, 0.0)).unwrap();
        assert_eq!(traj.samples.len(), 1);
    }

    #[test]
    fn sample_times_increase_and_land_on_horizon() {
        let m = model(3, Force::Hooke { lambda: 1.0 });
        let u = m.ops.interpolate(|x| (0.1 * x * x, 0.2 * x));
        let z0 = m.state(u, DVector::zeros(6), Prehistory::Rest).unwrap();
        let mut cfg = SimConfig::new(0.03, 1.0);
        cfg.sample_every = 7;
        let traj = simulate(&z0, &m, &cfg).unwrap();
        assert!(traj.times().collect::<Vec<_>>().windows(2).all(|w| w[0] < w[1]));
        assert!((traj.last().t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0.0, 1.0).validate().is_err());
        assert!(SimConfig::new(2.0, 1.0).validate().is_err());
        let mut c = SimConfig::new(0.1, 1.0);
        c.sample_every = 0;
        assert!(c.validate().is_err());
        assert!(SimConfig::new(0.1, 0.0).validate().is_ok());
    }

    #[test]
    fn energy_does_not_increase() {
        for integrator in [Integrator::Midpoint, Integrator::NewmarkImplicit] {
            let m = model(6, Force::Power { k: 1.0, p: 2.0, c: 0.0 });
            let u = m.ops.interpolate(|x| (0.5 * x * x, x));
            let z0 = m.state(u, DVector::zeros(12), Prehistory::Rest).unwrap();
            let mut cfg = SimConfig::new(0.01, 3.0);
            cfg.integrator = integrator;
            let traj = simulate(&z0, &m, &cfg).unwrap();
            let increase = traj.samples.windows(2).map(|w| w[1].energy.e - w[0].energy.e).fold(f64::MIN, f64::max);
            assert!(increase <= 1e-9, "{integrator:?}: {increase:e}");
        }
    }

    #[test]
    fn newton_failure_is_reported() {
        let m = model(4, Force::Power { k: 1.0, p: 2.0, c: 0.0 });
        let u = m.ops.interpolate(|x| (0.5 * x * x, x));
        let z0 = m.state(u, DVector::zeros(8), Prehistory::Rest).unwrap();
        let mut cfg = SimConfig::new(0.01, 0.1);
        cfg.newton_max_iter = 1;
        cfg.newton_tol = 1e-300;
        match simulate(&z0, &m, &cfg) {
            Err(Error::StepFailure { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected step failure, got {other:?}"),
        }
    }

    #[test]
    fn single_precision_run() {
        let ops = assemble_operators(&BeamMesh::<f32>::uniform(1.0, 4).unwrap()).unwrap();
        let kernel = make_kernel(&[(0.5f32, 1.0)]).unwrap();
        let grid = build_history_grid(&kernel, 16, GridScheme::GaussLaguerre).unwrap();
        let law = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.0 }, Force::Hooke { lambda: 1.0 });
        let m = Model::new(ops, law, kernel, grid);
        let u = m.ops.interpolate(|x| (0.1 * x * x, 0.2 * x));
        let z0 = m.state(u, DVector::zeros(8), Prehistory::Rest).unwrap();
        let mut cfg = SimConfig::new(0.01, 1.0);
        cfg.newton_tol = 1e-5;
        let traj = simulate(&z0, &m, &cfg).unwrap();
        assert!(traj.last().energy.e < traj.samples[0].energy.e);
    }
}
