//! Plan parsing, validation and execution.

mod exec;
pub mod plan;

pub use exec::{execute, CollectSink, CsvSink, ExecConfig, ExecutionReport, RowSink, StepReport};
pub use plan::{BoundPlan, Operation, PhysicalPlan, PlanStep};
