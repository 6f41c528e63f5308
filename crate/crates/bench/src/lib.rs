//! Benchmark harness: procedural scenarios, closed-loop exploration runs
//! and metric aggregation/reporting for the exploration planner.

pub mod error;
pub mod explorer;
pub mod metrics;
pub mod scenarios;

pub use error::{BenchError, Result};
