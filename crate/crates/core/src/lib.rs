//! Approximate EFX allocations of indivisible goods.
//!
//! Two solvers share one exact-arithmetic model:
//! [`few_types::few_types_allocate`] returns complete 2/3-EFX allocations
//! when agents come in at most four valuation types, and
//! [`charity::charity_allocate`] returns (1-ε)-EFX allocations that leave a
//! small pool of goods unallocated. [`oracle`] holds brute-force checks and
//! trace replay.

pub mod allocation;
pub mod charity;
pub mod error;
pub mod fairness;
pub mod few_types;
pub mod generate;
pub mod graph;
pub mod instance;
pub mod oracle;
pub mod ppa;
pub mod resolution;
pub mod trace;
pub mod value;

pub use allocation::{Allocation, Bundle};
pub use error::{Error, Result};
pub use fairness::{check_alpha_efx, check_charity, Certificate, Violation};
pub use graph::{EdgeLabel, EnvyGraph, GraphKind};
pub use instance::{Agent, AgentId, AgentType, Good, Instance};
pub use value::{parse_rational, Rational, Value};
