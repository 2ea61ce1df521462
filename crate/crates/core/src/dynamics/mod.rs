//! Hamiltonian vector fields, the strong-Hamiltonianity classifier,
//! numerical integration and conservation diagnostics.

pub mod classify;
pub mod field;
pub mod integrator;
pub mod system;
pub mod trajectory;

pub use classify::{is_strongly_hamiltonian, StrongHamiltonianVerdict, Witness};
pub use field::{divergence, hamiltonian_vector_field, CompiledField, VectorFieldSpec};
pub use integrator::{Dop853, OdeSystem, StepStats};
pub use system::{wrap_angle, ActionDomain, AffineChart, PhaseState, SystemDefinition};
pub use trajectory::{energy_drift, integrate, IntegrateOptions, IntegratorStats, TrajectoryRecord};
