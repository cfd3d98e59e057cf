//! Desk-scale distributed Hamiltonian application: worker ranks exchanging
//! ψ blocks and partial results over bounded channels.

mod balance;
mod distributed;
mod partition;
mod scaling;

pub use balance::{balance_tasks, round_robin, TaskAssignment};
pub use distributed::{
    assign_tasks, distributed_apply, distributed_apply_vector, distributed_apply_with, task_sizes,
    DistributedOperator, DistributedReport, EngineOptions, MessageCounts, DEFAULT_WATCHDOG,
};
pub use partition::{factorizations, plan_partition, split_even, PartitionPlan, RankId};
pub use scaling::{
    candidate_plans, scaling_benchmark, synthetic_problem, write_scaling_csv, ScalingOptions, ScalingRecord,
    SCALING_SCHEMA,
};
