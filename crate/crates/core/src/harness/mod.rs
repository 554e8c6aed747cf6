//! Scenario generation, the two-stage feedback loop, batch execution and
//! file outputs.

mod batch;
mod output;
mod pipeline;
pub mod rng;
mod sample;

pub use batch::{run_batches, BatchSummary};
pub use output::{record_path, trace_path, write_records, write_summaries, TRACE_SCHEMA};
pub use pipeline::{run_two_stage, HarnessError, RackRecord, RunRecord, SimOptions, RACK_CAPACITY};
pub use sample::{
    sample_coalition_plans, sample_demand_plans, sample_scenario, scenario_digest, CoalitionPlan,
    DemandPlan, OfferingPlan, RequestPlan, Scenario, WindowMarket,
};
