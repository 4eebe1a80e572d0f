//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use viscobeam::attractor_lab::{AbsorbingConfig, PairConfig, StationaryConfig, WeakNormConfig};
use viscobeam::beam_fem::{assemble_operators, estimate_embedding_constants, BeamMesh, EmbeddingConstants};
use viscobeam::dynamics::{Model, SimConfig};
use viscobeam::law::{validate_assumptions, AssumptionReport, Damping, Force, MaterialLaw};
use viscobeam::memory_kernel::{build_history_grid, make_kernel, GridScheme, KernelSpec};
use viscobeam::{MaterialLaw64, Model64, Operators64};

use crate::error::{CliError, CliResult};
use crate::initial::InitialData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for random initial data.
    #[serde(default)]
    pub seed: u64,
    pub mesh: MeshConfig,
    pub kernel: KernelConfig,
    pub law: LawConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub pair: PairSection,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(rename = "L")]
    pub length: f64,
    pub n_el: usize,
}

fn default_nodes() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `[g, α]` pairs.
    pub modes: Vec<[f64; 2]>,
    #[serde(default)]
    pub scheme: GridScheme,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DampingSpec {
    Affine { m0: f64, m1: f64 },
    Tabulated { s: Vec<f64>, m: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForceSpec {
    Hooke { lambda: f64 },
    Power { k: f64, p: f64, c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub damping: DampingSpec,
    pub force: ForceSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Write gnuplot scripts next to the CSV files.
    pub plot_scripts: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json], plot_scripts: true }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Fixed `δ`; chosen from the smallness conditions when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Fit window for the decay rate; `[0, T/2]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_window: Option<[f64; 2]>,
    /// Relative slack on the decay envelope.
    pub band_slack: f64,
    pub absorbing: AbsorbingConfig,
    pub stationary: StationaryConfig,
    pub probe: WeakNormConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            delta: None,
            decay_window: None,
            band_slack: 0.01,
            absorbing: AbsorbingConfig::default(),
            stationary: StationaryConfig::default(),
            probe: WeakNormConfig::default(),
        }
    }
}

/// Second initial datum for `pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairSection {
    /// Explicit second datum. Without it, the first datum is perturbed by a
    /// random direction of `ℋ`-size `perturbation · max(‖z₀‖, 1)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second: Option<InitialData>,
    pub perturbation: f64,
    pub eps_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ball_radius_sq: Option<f64>,
}

impl Default for PairSection {
    fn default() -> Self {
        let p = PairConfig::default();
        Self { second: None, perturbation: 0.01, eps_grid: p.eps_grid, ball_radius_sq: p.ball_radius_sq }
    }
}

impl PairSection {
    pub fn pair_config(&self) -> PairConfig {
        PairConfig { eps_grid: self.eps_grid.clone(), ball_radius_sq: self.ball_radius_sq }
    }
}

/// Parameter lists for `sweep`; runs are the Cartesian product, and an
/// empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub m0: Vec<f64>,
    /// Target `‖z₀‖_ℋ`; needs random initial data.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub norms: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn operators(&self) -> CliResult<Operators64> {
        let mesh = BeamMesh::uniform(self.mesh.length, self.mesh.n_el)?;
        Ok(assemble_operators(&mesh)?)
    }

    pub fn material_law(&self) -> CliResult<MaterialLaw64> {
        let damping = match &self.law.damping {
            DampingSpec::Affine { m0, m1 } => Damping::Affine { m0: *m0, m1: *m1 },
            DampingSpec::Tabulated { s, m } => Damping::tabulated(s.clone(), m.clone())?,
        };
        let force = match self.law.force {
            ForceSpec::Hooke { lambda } => Force::Hooke { lambda },
            ForceSpec::Power { k, p, c } => Force::Power { k, p, c },
        };
        Ok(MaterialLaw::new(damping, force))
    }

    fn kernel_modes(&self) -> Vec<(f64, f64)> {
        self.kernel.modes.iter().map(|m| (m[0], m[1])).collect()
    }

    /// Model with all hypotheses checked; violations are assumption errors.
    pub fn model(&self) -> CliResult<Model64> {
        let (report, _) = self.assumptions()?;
        report.into_result()?;
        self.model_unchecked()
    }

    /// Model without the hypothesis checks; only `κ > 0` is enforced.
    pub fn model_unchecked(&self) -> CliResult<Model64> {
        let ops = self.operators()?;
        let law = self.material_law()?;
        let kernel = make_kernel(&self.kernel_modes())?;
        let grid = build_history_grid(&kernel, self.kernel.n_nodes, self.kernel.scheme)?;
        Ok(Model::new(ops, law, kernel, grid))
    }

    /// Hypothesis report and embedding constants.
    pub fn assumptions(&self) -> CliResult<(AssumptionReport, EmbeddingConstants<f64>)> {
        let ops = self.operators()?;
        let law = self.material_law()?;
        let kernel = KernelSpec::describe(&self.kernel_modes())?;
        let constants = estimate_embedding_constants(&ops)?;
        Ok((validate_assumptions(&law, &kernel, &constants), constants))
    }

    pub fn kernel_spec(&self) -> CliResult<KernelSpec<f64>> {
        Ok(KernelSpec::describe(&self.kernel_modes())?)
    }

    pub fn decay_window(&self) -> (f64, f64) {
        match self.analysis.decay_window {
            Some([a, b]) => (a, b),
            None => (0.0, 0.5 * self.sim.t_end),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{InitialKind, PrehistorySpec};
    use proptest::prelude::*;

    const HOOKE: &str = r#"
seed = 7

[mesh]
L = 1.0
n_el = 4

[kernel]
modes = [[0.5, 1.0]]
n_nodes = 8

[law.damping]
kind = "affine"
m0 = 1.0
m1 = 0.5

[law.force]
kind = "hooke"
lambda = 1.0

[sim]
dt = 0.01
T = 1.0
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::from_toml(HOOKE).unwrap();
        assert_eq!(cfg.kernel.scheme, GridScheme::GaussLaguerre);
        assert_eq!(cfg.sim.newton_tol, 1e-10);
        assert_eq!(cfg.outputs.directory, PathBuf::from("out"));
        assert_eq!(cfg.pair.perturbation, 0.01);
        assert_eq!(cfg.decay_window(), (0.0, 0.5));
        assert!(cfg.model().is_ok());
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = HOOKE.replace("n_el = 4", "n_el = 4\nwidth = 2.0");
        assert!(matches!(RunConfig::from_toml(&bad), Err(CliError::Parse(_))));
        let bad = HOOKE.replace("lambda = 1.0", "lambda = 1.0\nmu = 3.0");
        assert!(matches!(RunConfig::from_toml(&bad), Err(CliError::Parse(_))));
    }

    #[test]
    fn heavy_kernel_is_an_assumption_failure() {
        let cfg = RunConfig::from_toml(&HOOKE.replace("[[0.5, 1.0]]", "[[2.0, 1.0]]")).unwrap();
        let err = cfg.model().unwrap_err();
        assert_eq!(err.exit_code(), crate::error::ExitCode::Assumption);
        assert!(err.to_string().contains("κ ≤ 0"));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(HOOKE).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, 1e-300f64..1e300, Just(0.1), Just(1.0 / 3.0)]
    }

    fn initial() -> impl Strategy<Value = InitialData> {
        let term = (finite(), 0u32..4, 0.0f64..10.0, finite()).prop_map(|(coeff, power, rate, freq)| {
            crate::initial::PrehistoryTerm { coeff, power, rate, freq }
        });
        (
            prop::sample::select(vec![InitialKind::Zero, InitialKind::Modal, InitialKind::Random, InitialKind::Explicit]),
            prop::collection::vec(finite(), 0..5),
            prop::option::of(finite()),
            prop::option::of(1usize..10),
            prop::option::of(prop::collection::vec(term, 1..3)),
        )
            .prop_map(|(kind, u, norm, modes, terms)| InitialData {
                kind,
                v: u.iter().rev().copied().collect(),
                u,
                norm,
                modes,
                prehistory: terms.map(|terms| PrehistorySpec { terms, ..Default::default() }),
            })
    }

    proptest! {
        #[test]
        fn any_config_round_trips(
            seed in 0u64..(i64::MAX as u64),
            length in finite(),
            modes in prop::collection::vec((finite(), finite()), 1..4),
            dt in finite(),
            power in any::<bool>(),
            a in finite(),
            b in finite(),
            init in initial(),
            second in prop::option::of(initial()),
            norms in prop::collection::vec(finite(), 0..3),
            delta in prop::option::of(finite()),
        ) {
            let mut cfg = RunConfig::from_toml(HOOKE).unwrap();
            cfg.seed = seed;
            cfg.mesh.length = length;
            cfg.kernel.modes = modes.into_iter().map(|(g, al)| [g, al]).collect();
            cfg.kernel.scheme = if power { GridScheme::TruncatedComposite } else { GridScheme::GaussLaguerre };
            cfg.sim.dt = dt;
            cfg.law.force = if power { ForceSpec::Power { k: a, p: b, c: a * b } } else { ForceSpec::Hooke { lambda: a } };
            cfg.law.damping = if power { DampingSpec::Tabulated { s: vec![0.0, a.abs()], m: vec![b, b] } } else { DampingSpec::Affine { m0: a, m1: b } };
            cfg.initial = init;
            cfg.pair.second = second;
            cfg.sweep.norms = norms;
            cfg.analysis.delta = delta;
            cfg.analysis.stationary.b_max = delta;
            let text = cfg.to_toml().unwrap();
            let again = RunConfig::from_toml(&text).unwrap();
            prop_assert_eq!(&cfg, &again);
            prop_assert_eq!(text, again.to_toml().unwrap());
        }
    }
}
