//! Revenue-maximizing assortment planning with sponsored products under a
//! position-dependent multinomial logit (MNL) choice model.
//!
//! * [`exact`] solves the unconstrained problem exactly.
//! * [`constrained`] approximates the problem with a downward-closed family
//!   on the organic products.
//! * [`oracle`] enumerates small instances for ground truth.
//! * [`io`], [`generator`] and [`harness`] back the command-line tool.

pub mod constrained;
pub mod error;
pub mod exact;
pub mod generator;
pub mod harness;
pub mod io;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod submodular;
pub mod surrogate;

pub use constrained::{solve_constrained, CandidateReport, CandidateRole, CombinedReport};
pub use error::{Error, Result};
pub use exact::{solve_exact, ExactSolution};
pub use generator::{generate, GeneratorConfig};
pub use io::{parse_instance, parse_placement};
pub use model::{
    check_feasible, choice_probability, expected_revenue, ConstraintFamily, Feasibility, Instance,
    InstanceBuilder, Placement, PositionId, PositionKind, ProductId, ProductKind, Violation,
};
pub use oracle::OracleBudget;
