//! Load-flow analysis and distributed-generation sizing for meshed
//! transmission networks.
//!
//! The crate solves AC load flow with a polar Newton-Raphson method, ranks
//! candidate buses by loss sensitivity, and sizes DG units at those buses with
//! particle-swarm and whale optimization under technical or techno-economic
//! objectives.
//!
//! All numeric modules are generic over the scalar type through
//! [`scalar::Real`] (`f32` or `f64`); the aliases at the crate root fix the
//! working precision to `f64`, which is what the case I/O and experiment
//! harness use.

pub mod caseio;
pub mod cases;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linalg;
pub mod objectives;
pub mod powerflow;
pub mod pso;
pub mod scalar;
pub mod sensitivity;
pub mod swarm;
pub mod woa;

pub use scalar::Real;

/// `f64` working aliases for the generic core types.
pub type Bus = grid::Bus<f64>;
pub type Branch = grid::Branch<f64>;
pub type Network = grid::Network<f64>;
pub type AdmittanceMatrix = grid::AdmittanceMatrix<f64>;
pub type DgPlacement = grid::DgPlacement<f64>;
pub type PowerFlowState = powerflow::PowerFlowState<f64>;
pub type PowerFlowSolution = powerflow::PowerFlowSolution<f64>;
pub type SolveOptions = powerflow::SolveOptions<f64>;
pub type Jacobian = powerflow::Jacobian<f64>;
pub type SensitivityRanking = sensitivity::SensitivityRanking<f64>;
pub type SizingProblem = objectives::SizingProblem<f64>;
pub type Evaluation = objectives::Evaluation<f64>;
pub type CostParameters = objectives::CostParameters<f64>;
pub type PenaltyWeights = objectives::PenaltyWeights<f64>;
pub type PsoConfig = pso::PsoConfig<f64>;
pub type WoaConfig = woa::WoaConfig<f64>;
pub type Bounds = swarm::Bounds<f64>;
pub type SwarmResult = swarm::SwarmResult<f64>;

pub use grid::{apply_dg_injections, build_admittance_matrix, validate_network, BusId, BusKind};
pub use objectives::ObjectiveMode;
pub use powerflow::{solve, total_losses};
