//! Bearing-end material laws: nonlocal damping `M` and boundary force `f`.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quadrature::{gauss_legendre, Rule};
use crate::roots::golden_min;
use crate::scalar::Scalar;

/// Damping coefficient `M(s)`, evaluated at `s = u(L)²`.
#[derive(Debug, Clone, PartialEq)]
pub enum Damping<T> {
    /// `M(s) = m₀ + m₁ s`.
    Affine { m0: T, m1: T },
    /// C¹ monotone-cubic interpolant of `(s_i, M_i)`, constant beyond the table.
    Tabulated(MonotoneCubic<T>),
}

impl<T: Scalar> Damping<T> {
    pub fn tabulated(s: Vec<T>, m: Vec<T>) -> Result<Self> {
        if s.first().is_some_and(|&s0| s0 > T::zero()) {
            return Err(Error::config("damping table must start at s = 0"));
        }
        Ok(Damping::Tabulated(MonotoneCubic::new(s, m)?))
    }

    pub fn value(&self, s: T) -> T {
        match self {
            Damping::Affine { m0, m1 } => *m0 + *m1 * s,
            Damping::Tabulated(p) => p.eval(s),
        }
    }

    pub fn derivative(&self, s: T) -> T {
        match self {
            Damping::Affine { m1, .. } => *m1,
            Damping::Tabulated(p) => p.derivative(s),
        }
    }

    /// Claimed lower bound `m₀`.
    pub fn m0(&self) -> T {
        match self {
            Damping::Affine { m0, .. } => *m0,
            Damping::Tabulated(p) => p.ys().iter().copied().fold(p.ys()[0], T::min),
        }
    }

    /// `max M` on `[0, s_max]`.
    pub fn max_on(&self, s_max: T) -> T {
        match self {
            Damping::Affine { m0, m1 } => m0.max(*m0 + *m1 * s_max),
            Damping::Tabulated(p) => {
                let mut m = p.eval(T::zero()).max(p.eval(s_max));
                for (&x, &y) in p.xs().iter().zip(p.ys()) {
                    if x <= s_max {
                        m = m.max(y);
                    }
                }
                m
            }
        }
    }
}

/// Boundary force `f(u)` at the bearing end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Force<T> {
    /// `f(u) = λu`.
    Hooke { lambda: T },
    /// `f(u) = k|u|^p u − c`.
    Power { k: T, p: T, c: T },
}

fn gl8() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8).expect("eight-point rule"))
}

impl<T: Scalar> Force<T> {
    pub fn value(&self, u: T) -> T {
        match *self {
            Force::Hooke { lambda } => lambda * u,
            Force::Power { k, p, c } => k * u.abs().powf(p) * u - c,
        }
    }

    pub fn derivative(&self, u: T) -> T {
        match *self {
            Force::Hooke { lambda } => lambda,
            Force::Power { k, p, .. } => k * (p + T::one()) * u.abs().powf(p),
        }
    }

    /// `F(u) = ∫₀^u f`.
    pub fn potential(&self, u: T) -> T {
        match *self {
            Force::Hooke { lambda } => T::of(0.5) * lambda * u * u,
            Force::Power { k, p, c } => {
                let q = p + T::of(2.0);
                k * u.abs().powf(q) / q - c * u
            }
        }
    }

    /// Growth exponent in `|f′(u)| ≤ C_{f′}(1 + |u|^p)`.
    pub fn exponent(&self) -> T {
        match *self {
            Force::Hooke { .. } => T::zero(),
            Force::Power { p, .. } => p,
        }
    }

    /// `C_{f′}`.
    pub fn derivative_bound(&self) -> T {
        match *self {
            Force::Hooke { lambda } => lambda.abs(),
            Force::Power { k, p, .. } => k * (p + T::one()),
        }
    }

    /// `c_f` in `F(u) ≤ f(u)u + (c_f/2)u²` and `F(u) ≥ −C_f − (c_f/2)u²`.
    pub fn c_f(&self) -> T {
        T::zero()
    }

    /// `C_f = sup(−F)`, by golden-section search on the convex potential.
    pub fn big_c_f(&self) -> T {
        match *self {
            Force::Hooke { .. } => T::zero(),
            Force::Power { k, p, c } => {
                if !(c > T::zero()) || !(k > T::zero()) {
                    return T::zero();
                }
                let guess = (c / k).powf(T::one() / (p + T::one())).f64();
                let (_, fmin) = golden_min(|u| self.potential(T::of(u)).f64(), 0.0, 2.0 * guess + 1.0, 1e-14);
                T::of((-fmin).max(0.0))
            }
        }
    }

    /// Mean value `(F(b) − F(a))/(b − a)` and its derivative in `b`.
    pub fn mean_value(&self, a: T, b: T) -> (T, T) {
        let half = T::of(0.5);
        match *self {
            Force::Hooke { lambda } => (half * lambda * (a + b), half * lambda),
            Force::Power { .. } => {
                let d = b - a;
                let scale = T::one() + a.abs() + b.abs();
                if d.abs() > T::of(1e-3) * scale {
                    let m = (self.potential(b) - self.potential(a)) / d;
                    (m, (self.value(b) - m) / d)
                } else {
                    let rule = gl8();
                    let (mut m, mut dm) = (T::zero(), T::zero());
                    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                        let th = T::of(0.5 * (x + 1.0));
                        let w = T::of(0.5 * w);
                        m += w * self.value(a + th * d);
                        dm += w * th * self.derivative(a + th * d);
                    }
                    (m, dm)
                }
            }
        }
    }
}

/// Damping and force at the bearing end.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLaw<T> {
    pub damping: Damping<T>,
    pub force: Force<T>,
}

impl<T: Scalar> MaterialLaw<T> {
    pub fn new(damping: Damping<T>, force: Force<T>) -> Self {
        Self { damping, force }
    }

    pub fn is_hooke(&self) -> bool {
        matches!(self.force, Force::Hooke { .. })
    }
}

/// `f(u(L)) + M(u(L)²)·u_t(L)`.
pub fn boundary_residual<T: Scalar>(tip: T, tip_velocity: T, law: &MaterialLaw<T>) -> T {
    law.force.value(tip) + law.damping.value(tip * tip) * tip_velocity
}

/// Outcome of a single hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Constants and per-hypothesis verdicts for a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub kappa: f64,
    pub m0: f64,
    pub c_f: f64,
    #[serde(rename = "C_f")]
    pub big_c_f: f64,
    #[serde(rename = "C_f_prime")]
    pub c_f_prime: f64,
    pub rho: f64,
    pub checks: Vec<Check>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn push(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.to_owned(), pass, detail: detail.into() });
    }

    /// Turns failed checks into an error listing them.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            let msg = self.failures().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
            Err(Error::assumption(msg))
        }
    }
}

fn sample_points() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((0..=120).map(|i| 10f64.powf(-6.0 + 0.1 * i as f64)))
}

/// Checks the structural hypotheses on `M`, `f`, `g` and the smallness of `c_f`.
pub fn validate_assumptions<T: Scalar>(
    law: &MaterialLaw<T>,
    kernel: &crate::memory_kernel::KernelSpec<T>,
    constants: &crate::beam_fem::EmbeddingConstants<T>,
) -> AssumptionReport {
    let kappa = kernel.kappa().f64();
    let m0 = law.damping.m0().f64();
    let c_f = law.force.c_f().f64();
    let lambda0 = constants.lambda0.f64();
    let lambda1 = constants.lambda1.f64();
    let rho = 1.0 - c_f * lambda1 / kappa;
    let mut report = AssumptionReport {
        kappa,
        m0,
        c_f,
        big_c_f: law.force.big_c_f().f64(),
        c_f_prime: law.force.derivative_bound().f64(),
        rho,
        checks: Vec::new(),
    };

    report.push("kappa", kappa > 0.0, format!("κ ≤ 0 (kernel mass {:.6})", kernel.mass().f64()));
    let lags = (0..400).map(|i| T::of(i as f64 * 0.05 / kernel.alpha2().f64()));
    report.push("kernel", kernel.bounds_hold_at(lags), "kernel derivative bounds fail on sampled lags");

    let damping_ok = m0 > 0.0
        && sample_points().all(|s| law.damping.value(T::of(s)).f64() >= m0 * (1.0 - 1e-12));
    report.push("damping", damping_ok, format!("M(s) ≥ m₀ > 0 fails (m₀ = {m0})"));

    let (params_ok, params_detail) = match law.force {
        Force::Hooke { lambda } => (lambda > T::zero(), format!("Hooke stiffness must be positive, got {lambda}")),
        Force::Power { k, p, c } => (
            k > T::zero() && p > T::zero() && c >= T::zero(),
            format!("power law needs k > 0, p > 0, c ≥ 0, got k = {k}, p = {p}, c = {c}"),
        ),
    };
    report.push("force", params_ok, params_detail);

    if params_ok {
        let cfp = report.c_f_prime;
        let p = law.force.exponent().f64();
        let big = report.big_c_f;
        let tol = 1e-10;
        let (mut growth, mut potential) = (true, true);
        for s in sample_points() {
            for u in [s, -s] {
                let ut = T::of(u);
                let f = law.force.value(ut).f64();
                let df = law.force.derivative(ut).f64().abs();
                let fp = law.force.potential(ut).f64();
                growth &= df <= cfp * (1.0 + u.abs().powf(p)) * (1.0 + tol) + tol;
                let scale = tol * (1.0 + fp.abs() + (f * u).abs());
                potential &= fp >= -big - 0.5 * c_f * u * u - scale;
                potential &= fp <= f * u + 0.5 * c_f * u * u + scale;
            }
        }
        report.push("force growth", growth, "|f′(u)| ≤ C_f′(1 + |u|^p) fails on sampled range");
        report.push("potential", potential, "potential bounds on F fail on sampled range");
    }

    let c_f_limit = (kappa / lambda0).min(kappa / lambda1);
    report.push("c_f", c_f >= 0.0 && c_f < c_f_limit, format!("c_f = {c_f} outside [0, {c_f_limit})"));
    report.push("rho", rho > 0.0, format!("ϱ = {rho} is not positive"));
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam_fem::{assemble_operators, estimate_embedding_constants, BeamMesh};
    use crate::memory_kernel::KernelSpec;
    use approx::assert_relative_eq;

    fn constants() -> crate::beam_fem::EmbeddingConstants<f64> {
        estimate_embedding_constants(&assemble_operators(&BeamMesh::uniform(1.0, 8).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn residual_examples() {
        let zero = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.0 }, Force::Hooke { lambda: 2.0 });
        assert_eq!(boundary_residual(0.0, 0.0, &zero), 0.0);
        assert_eq!(boundary_residual(3.0, -1.0, &zero), 5.0);
        let cubic = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 1.0 }, Force::Power { k: 1.0, p: 2.0, c: 0.0 });
        assert_relative_eq!(boundary_residual(2.0, 1.0, &cubic), 13.0, max_relative = 1e-15);
    }

    #[test]
    fn hooke_law_passes_with_unit_rho() {
        let law = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.5 }, Force::Hooke { lambda: 2.0 });
        let k = KernelSpec::describe(&[(0.5, 1.0)]).unwrap();
        let r = validate_assumptions(&law, &k, &constants());
        assert!(r.passed(), "{r:?}");
        assert_eq!((r.c_f, r.big_c_f, r.rho), (0.0, 0.0, 1.0));
    }

    #[test]
    fn heavy_kernel_fails_kappa() {
        let law = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.0 }, Force::Hooke { lambda: 2.0 });
        let k = KernelSpec::describe(&[(2.0, 1.0)]).unwrap();
        let r = validate_assumptions(&law, &k, &constants());
        assert!(!r.passed());
        assert!(r.failures().any(|c| c.detail.contains("κ ≤ 0")));
        assert!(matches!(r.into_result(), Err(Error::Assumption(_))));
    }

    #[test]
    fn power_law_potential_minimum_matches_closed_form() {
        for (k, p, c) in [(1.0f64, 2.0, 0.5), (2.0, 1.5, 3.0), (0.3, 0.7, 1.0)] {
            let f = Force::Power { k, p, c };
            let ustar = (c / k).powf(1.0 / (p + 1.0));
            let closed = c * ustar * (p + 1.0) / (p + 2.0);
            assert_relative_eq!(f.big_c_f(), closed, max_relative = 1e-9);
        }
        let law = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.0 }, Force::Power { k: 1.0, p: 2.0, c: 0.5 });
        let r = validate_assumptions(&law, &KernelSpec::describe(&[(0.5, 1.0)]).unwrap(), &constants());
        assert!(r.passed(), "{r:?}");
        assert!(r.big_c_f > 0.0);
    }

    #[test]
    fn invalid_parameters_fail() {
        let k = KernelSpec::describe(&[(0.5, 1.0)]).unwrap();
        let bad_hooke = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.0 }, Force::Hooke { lambda: -3.0 });
        assert!(!validate_assumptions(&bad_hooke, &k, &constants()).passed());
        let bad_damping = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: -1.0 }, Force::Hooke { lambda: 1.0 });
        assert!(!validate_assumptions(&bad_damping, &k, &constants()).passed());
    }

    #[test]
    fn tabulated_damping_bounds() {
        let d = Damping::tabulated(vec![0.0, 1.0, 4.0], vec![2.0, 1.0, 3.0]).unwrap();
        assert_eq!(d.m0(), 1.0);
        assert_eq!(d.max_on(0.5), 2.0);
        assert_eq!(d.max_on(10.0), 3.0);
        assert!(Damping::tabulated(vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn mean_value_matches_potential_difference() {
        let f = Force::Power { k: 1.3, p: 1.7, c: 0.2 };
        for (a, b) in [(0.1f64, 0.9f64), (-1.0, 2.0), (0.5, 0.5 + 1e-6), (-0.3, -0.3 + 1e-9)] {
            let (m, dm) = f.mean_value(a, b);
            if (b - a).abs() > 1e-7 {
                assert_relative_eq!(m * (b - a), f.potential(b) - f.potential(a), max_relative = 1e-9);
            }
            let h = 1e-6 * (1.0 + b.abs());
            let fd = (f.mean_value(a, b + h).0 - f.mean_value(a, b - h).0) / (2.0 * h);
            if (b - a).abs() > 1e-2 {
                assert_relative_eq!(dm, fd, max_relative = 1e-5);
            }
        }
        assert_eq!(Force::Hooke { lambda: 2.0 }.mean_value(1.0, 3.0), (4.0, 1.0));
    }
}
