//! Numerical laboratory for a viscoelastic cantilever with fading memory and
//! nonlinear nonlocal damping at the free end.

mod error;
mod scalar;

pub mod attractor_lab;
pub mod beam_fem;
pub mod dynamics;
pub mod energy;
pub mod interp;
pub mod law;
pub mod memory_kernel;
pub mod quadrature;
pub mod roots;

pub use error::{Error, Result};
pub use scalar::Scalar;

macro_rules! aliases {
    ($t:ty; $($name:ident = $path:ident :: $ty:ident),* $(,)?) => {
        $(pub type $name = $path::$ty<$t>;)*
    };
}

aliases!(f64;
    BeamMesh64 = beam_fem::BeamMesh,
    Operators64 = beam_fem::AssembledOperators,
    MaterialLaw64 = law::MaterialLaw,
    Force64 = law::Force,
    Damping64 = law::Damping,
    Kernel64 = memory_kernel::KernelSpec,
    HistoryGrid64 = memory_kernel::HistoryGrid,
    HistoryState64 = memory_kernel::HistoryState,
    Prehistory64 = memory_kernel::Prehistory,
    Model64 = dynamics::Model,
    State64 = dynamics::State,
    Trajectory64 = dynamics::Trajectory,
);

aliases!(f32;
    BeamMesh32 = beam_fem::BeamMesh,
    Operators32 = beam_fem::AssembledOperators,
    MaterialLaw32 = law::MaterialLaw,
    Force32 = law::Force,
    Damping32 = law::Damping,
    Kernel32 = memory_kernel::KernelSpec,
    HistoryGrid32 = memory_kernel::HistoryGrid,
    HistoryState32 = memory_kernel::HistoryState,
    Prehistory32 = memory_kernel::Prehistory,
    Model32 = dynamics::Model,
    State32 = dynamics::State,
    Trajectory32 = dynamics::Trajectory,
);
