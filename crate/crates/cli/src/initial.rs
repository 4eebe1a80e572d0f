//! Initial data `(u₀, v₀, η₀)`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use viscobeam::beam_fem::ModalBasis;
use viscobeam::memory_kernel::Prehistory;
use viscobeam::{Model64, Prehistory64, State64};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    Zero,
    /// Coefficients on the leading static eigenmodes.
    Modal,
    /// Random modal data scaled to `‖z₀‖_ℋ = norm`.
    Random,
    /// Full coefficient vectors.
    Explicit,
}

fn is_default<T: Default + PartialEq>(x: &T) -> bool {
    *x == T::default()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub kind: InitialKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    /// Number of modes excited by random data (default 4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prehistory: Option<PrehistorySpec>,
}

/// One term `coeff · sⁿ e^{−rate·s} cos(freq·s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrehistoryTerm {
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub power: u32,
    #[serde(default, skip_serializing_if = "is_default")]
    pub rate: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub freq: f64,
}

/// Past motion. Either `u₀(−s) = p(s)·u₀(0)` with `p` an exponential
/// polynomial and `p(0) = 1`, or tabulated `η₀(s)` slices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrehistorySpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<PrehistoryTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lags: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta: Vec<Vec<f64>>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Core(viscobeam::Error::config(msg))
}

impl PrehistorySpec {
    /// `p(s)`; meaningful for the exponential-polynomial form.
    pub fn profile(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * s.powi(t.power as i32) * (-t.rate * s).exp() * (t.freq * s).cos())
            .sum()
    }

    fn is_table(&self) -> bool {
        !self.lags.is_empty() || !self.eta.is_empty()
    }

    fn check(&self) -> CliResult<()> {
        match (self.terms.is_empty(), self.is_table()) {
            (false, true) => return Err(bad("prehistory takes either terms or lags/eta, not both")),
            (true, false) => return Err(bad("prehistory is empty")),
            _ => {}
        }
        for t in &self.terms {
            if !(t.coeff.is_finite() && t.rate.is_finite() && t.freq.is_finite()) || t.rate < 0.0 {
                return Err(bad("prehistory terms need finite values and rate ≥ 0"));
            }
        }
        if !self.terms.is_empty() && (self.profile(0.0) - 1.0).abs() > 1e-12 {
            return Err(bad(format!("prehistory profile must equal 1 at s = 0, got {}", self.profile(0.0))));
        }
        Ok(())
    }

    pub fn build(&self, u0: &DVector<f64>) -> CliResult<Prehistory64> {
        self.check()?;
        if self.is_table() {
            let slices = self.eta.iter().map(|e| DVector::from_column_slice(e)).collect();
            return Ok(Prehistory::samples(self.lags.clone(), slices)?);
        }
        let spec = self.clone();
        let u0 = u0.clone();
        Ok(Prehistory::displacement(move |s: f64| &u0 * spec.profile(s)))
    }
}

/// Eigenmodes of the static operator linearized at rest, `(κK + f′(0) t tᵀ, M)`.
pub fn static_modes(model: &Model64) -> CliResult<ModalBasis<f64>> {
    let spring = model.law.force.derivative(0.0) / model.kappa();
    Ok(model.ops.modal_basis(spring)?)
}

fn combine(basis: &ModalBasis<f64>, coeffs: &[f64]) -> CliResult<DVector<f64>> {
    let n = basis.vectors.ncols();
    if coeffs.len() > n {
        return Err(bad(format!("{} modal coefficients given, mesh has {n} modes", coeffs.len())));
    }
    let mut out = DVector::zeros(basis.vectors.nrows());
    for (k, &c) in coeffs.iter().enumerate() {
        out.axpy(c, &basis.vectors.column(k), 1.0);
    }
    Ok(out)
}

impl InitialData {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn explicit(u: Vec<f64>, v: Vec<f64>, prehistory: Option<PrehistorySpec>) -> Self {
        Self { kind: InitialKind::Explicit, u, v, prehistory, ..Self::default() }
    }

    pub fn random(norm: f64, modes: usize) -> Self {
        Self { kind: InitialKind::Random, norm: Some(norm), modes: Some(modes), ..Self::default() }
    }

    fn assemble(&self, model: &Model64, u: DVector<f64>, v: DVector<f64>) -> CliResult<State64> {
        let pre = match &self.prehistory {
            Some(p) => p.build(&u)?,
            None => Prehistory::Rest,
        };
        Ok(model.state(u, v, pre)?)
    }

    /// Builds `z₀`; `seed` drives random data.
    pub fn build(&self, model: &Model64, seed: u64) -> CliResult<State64> {
        let n = model.ops.dof_count();
        let z = match self.kind {
            InitialKind::Zero => self.assemble(model, DVector::zeros(n), DVector::zeros(n))?,
            InitialKind::Modal => {
                let basis = static_modes(model)?;
                self.assemble(model, combine(&basis, &self.u)?, combine(&basis, &self.v)?)?
            }
            InitialKind::Explicit => {
                if self.u.len() != n || self.v.len() != n {
                    return Err(bad(format!(
                        "explicit data needs {n} coefficients, got u: {}, v: {}",
                        self.u.len(),
                        self.v.len()
                    )));
                }
                self.assemble(model, DVector::from_column_slice(&self.u), DVector::from_column_slice(&self.v))?
            }
            InitialKind::Random => {
                let target = self.norm.ok_or_else(|| bad("random initial data needs a norm"))?;
                if !(target >= 0.0 && target.is_finite()) {
                    return Err(bad(format!("target norm must be finite and nonnegative, got {target}")));
                }
                if self.prehistory.as_ref().is_some_and(PrehistorySpec::is_table) {
                    return Err(bad("random data cannot be combined with a tabulated prehistory"));
                }
                let basis = static_modes(model)?;
                let m = self.modes.unwrap_or(4).clamp(1, n);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut a = vec![0.0; m];
                let mut b = vec![0.0; m];
                for k in 0..m {
                    let decay = 1.0 / (k + 1) as f64;
                    a[k] = rng.random_range(-1.0..1.0) * decay / basis.eigenvalues[k].sqrt();
                    b[k] = rng.random_range(-1.0..1.0) * decay;
                }
                let (u, v) = (combine(&basis, &a)?, combine(&basis, &b)?);
                let unit = self.assemble(model, u.clone(), v.clone())?;
                let norm = unit.norm_sq(model).sqrt();
                if !(norm > 0.0) {
                    return Err(bad("random data has zero norm"));
                }
                let scale = target / norm;
                self.assemble(model, u * scale, v * scale)?
            }
        };
        let n2 = z.norm_sq(model);
        if !n2.is_finite() {
            return Err(bad("initial data has infinite norm"));
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use viscobeam::beam_fem::{assemble_operators, BeamMesh};
    use viscobeam::law::{Damping, Force, MaterialLaw};
    use viscobeam::memory_kernel::{build_history_grid, make_kernel, GridScheme};
    use viscobeam::dynamics::Model;

    fn model() -> Model64 {
        let ops = assemble_operators(&BeamMesh::uniform(1.0, 4).unwrap()).unwrap();
        let law = MaterialLaw::new(Damping::Affine { m0: 1.0, m1: 0.0 }, Force::Hooke { lambda: 1.0 });
        let k = make_kernel(&[(0.5, 1.0)]).unwrap();
        let grid = build_history_grid(&k, 12, GridScheme::GaussLaguerre).unwrap();
        Model::new(ops, law, k, grid)
    }

    #[test]
    fn random_data_hits_the_target_norm() {
        let m = model();
        let z = InitialData::random(3.5, 4).build(&m, 11).unwrap();
        assert!((z.norm_sq(&m).sqrt() - 3.5).abs() < 1e-12);
        let z2 = InitialData::random(3.5, 4).build(&m, 11).unwrap();
        assert_eq!(z.u, z2.u);
        let z3 = InitialData::random(3.5, 4).build(&m, 12).unwrap();
        assert_ne!(z.u, z3.u);
    }

    #[test]
    fn random_data_with_prehistory_includes_memory_in_the_norm() {
        let m = model();
        let mut d = InitialData::random(2.0, 3);
        d.prehistory = Some(PrehistorySpec { terms: vec![PrehistoryTerm { coeff: 1.0, power: 0, rate: 0.0, freq: 2.0 }], ..Default::default() });
        let z = d.build(&m, 5).unwrap();
        assert!((z.norm_sq(&m).sqrt() - 2.0).abs() < 1e-12);
        assert!(viscobeam::memory_kernel::memory_norm(&z.history, &m.ops) > 0.0);
    }

    #[test]
    fn modal_data_is_an_eigenvector() {
        let m = model();
        let d = InitialData { kind: InitialKind::Modal, u: vec![0.0, 1.0], ..Default::default() };
        let z = d.build(&m, 0).unwrap();
        let basis = static_modes(&m).unwrap();
        let c = basis.coordinates(&z.u);
        assert!((c[1] - 1.0).abs() < 1e-12 && c[0].abs() < 1e-12);
    }

    #[test]
    fn constant_prehistory_gives_rest_history() {
        let m = model();
        let mut d = InitialData { kind: InitialKind::Modal, u: vec![1.0], ..Default::default() };
        d.prehistory = Some(PrehistorySpec { terms: vec![PrehistoryTerm { coeff: 1.0, power: 0, rate: 0.0, freq: 0.0 }], ..Default::default() });
        let z = d.build(&m, 0).unwrap();
        assert!(z.history.values().iter().all(|y| y.norm() < 1e-14));
    }

    #[test]
    fn profile_must_start_at_one() {
        let m = model();
        let mut d = InitialData { kind: InitialKind::Modal, u: vec![1.0], ..Default::default() };
        d.prehistory = Some(PrehistorySpec { terms: vec![PrehistoryTerm { coeff: 0.5, power: 0, rate: 1.0, freq: 0.0 }], ..Default::default() });
        assert!(d.build(&m, 0).is_err());
    }

    #[test]
    fn explicit_data_checks_length() {
        let m = model();
        assert!(InitialData::explicit(vec![0.0; 3], vec![0.0; 3], None).build(&m, 0).is_err());
        let n = m.ops.dof_count();
        assert!(InitialData::explicit(vec![0.1; n], vec![0.0; n], None).build(&m, 0).is_ok());
    }
}
