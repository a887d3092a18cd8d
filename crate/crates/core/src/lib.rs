// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod field;
pub mod geom;
pub mod mesh;
pub mod minimize;
pub mod renormalized;
pub mod surface;
pub mod vorticity;

pub use energy::{EnergyBreakdown, EnergyError, ExtrinsicWeighting};
pub use field::{DiscreteField, FieldError, FrameField, TangentBasis};
pub use geom::Vec3;
pub use mesh::{MeshError, MeshOrigin, Stiffness, Triangulation};
pub use minimize::{MinimizeError, SolveOptions, SolveTrace, StepRule};
pub use renormalized::{RenormalizedError, RenormalizedEstimate};
pub use surface::{Surface, SurfaceError, SurfaceKind};
pub use vorticity::{Defect, DefectSet, VorticityError, VorticityReport};
