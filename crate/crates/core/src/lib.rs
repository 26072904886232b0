//! Multi-bubble approximate solutions of `(-Δ)^m u = K u^{(N+2m)/(N-2m)}`.

pub mod bubble;
pub mod config;
pub mod error;
pub mod lattice;
pub mod pohozaev;
pub mod quadrature;
pub mod radial;
pub mod reduced;
pub mod sum;

pub use bubble::{Bubble, BubbleField, Cutoff, NormReport, SyntheticK};
pub use config::ProblemConfig;
pub use error::{Error, Result};
pub use lattice::{InteractionMatrix, Lattice, Selection};
pub use radial::{BubbleConstant, RadialFn, RadialSum, RadialTerm};
pub use reduced::{HeightSolution, HeightSystem, SolverOptions};
pub use sum::{compensated_sum, Compensated};
