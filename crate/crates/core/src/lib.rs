//! Distributed projected primal-dual method for constrained consensus
//! optimization over undirected networks, with Lyapunov and rate
//! diagnostics, a centralized oracle and DGD baselines.

pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod objectives;
pub mod oracle;
pub mod scenario;
pub mod sets;
pub mod solver;

pub use diagnostics::{CertificateContext, Reference, RunTrace, TraceRecord, TraceSettings, CSV_HEADER};
pub use error::{Error, ErrorCategory, Result};
pub use graph::{build_graph, GraphSpec, NetworkGraph, WeightRule};
pub use harness::{run, Algorithm, AlgorithmSelector, Overrides, Prepared, RunReport};
pub use objectives::{Objective, StackedObjective};
pub use oracle::{solve_centralized, OracleMethod, OracleSolution, Provenance};
pub use scenario::{generate_random_graph, load_scenario, parse_scenario, Scenario};
pub use sets::{ConvexSet, ProductSet};
pub use solver::{pd_run, pd_step, PdConfig, PdState, Problem, StepSchedule, StepSizeReport};
