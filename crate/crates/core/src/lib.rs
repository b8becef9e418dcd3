//! Sample allocation for collaborative PAC learning.
//!
//! Given agents with their own distributions over a finite domain and a
//! finite hypothesis class, the crate computes how many samples each agent
//! should contribute so that every agent's ERM is (ε,δ)-accurate, analyses
//! the contribution game that arises without coordination, and evaluates
//! payment mechanisms that make truthful reporting a dominant strategy.
//!
//! ```
//! use collab_pac::{game, oracle, planner};
//!
//! let inst = game::nonexistence_instance();
//! let m = planner::solve_pac_allocation(&inst).unwrap();
//! assert!(oracle::pac_feasible(&inst, &m).unwrap());
//! ```

pub mod error;
pub mod exact;
pub mod exec;
pub mod game;
pub mod instance;
pub mod lp;
pub mod mechanism;
pub mod oracle;
pub mod planner;
pub mod reduction;
pub mod region;

pub use error::{Error, Result};
pub use exec::Exec;
pub use instance::{
    disagreement_mass, disagreement_region, load_instance, save_instance, AgentSpec, ContributionVector, Domain,
    Hypothesis, HypothesisClass, Instance,
};
pub use oracle::{FailureProbability, Objective, Oracle, OracleLimits};
pub use region::PointSet;
