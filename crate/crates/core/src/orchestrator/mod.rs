//! The closed loop: overlapped sampling and classical steps for several
//! DE populations, checkpoints, timelines and zero-variance fits.

mod config;
mod extrapolate;
mod pipeline;
mod report;
mod run;
mod sampler;
mod state;
mod timeline;

pub use config::{DavidsonConfig, InitConfig, OrbitalConfig, PartitionConfig, RunConfig};
pub use extrapolate::{
    extrapolate_zero_variance, read_variance_points, write_variance_points, Extrapolation, VariancePoint,
    VARIANCE_SCHEMA,
};
pub use pipeline::{merge_carryover, OrbitalStep, RoundReport, WalkerReport};
pub use report::{report_run, RunReport};
pub use run::{
    resume_closed_loop, run_closed_loop, run_closed_loop_with, thread_cap, warm_start, write_traces, RunSummary,
    CHECKPOINT_FILE, THREADS_ENV,
};
pub use sampler::{launch, PendingSample, RetryPolicy, SampleRequest, Sampler, SamplerOutcome, SimulatedSampler};
pub use state::{derive_seed, Checkpoint, PopulationState, Purpose, StoredVector, WalkerSlot, CHECKPOINT_VERSION};
pub use timeline::{
    covered_length, emit_timeline, read_timeline, summarize, Phase, Resource, ResourceUsage, RunClock,
    TimelineSummary, TimingRecord, TIMELINE_SCHEMA,
};
