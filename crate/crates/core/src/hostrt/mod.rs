//! Host side of an execution: uploads, round loop, gathers, the CPU tail,
//! compaction of filtered outputs and combining of reduction partials.

mod chain;
mod combine;
mod compact;
mod exec;
mod leftover;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffers::BufferId;
use crate::simdev::DmaStats;

pub use chain::run_subpipeline_chain;
pub use combine::combine_reduce_partials;
pub use compact::compact_filter_output;
pub use exec::execute_pipeline;
pub use leftover::{run_cpu_leftover, LeftoverResult};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HostError {
    #[error("round {round} DPU {dpu} tasklet {tasklet}: count {count} exceeds capacity {capacity}")]
    CountOverflow {
        round: usize,
        dpu: usize,
        tasklet: usize,
        count: usize,
        capacity: usize,
    },
}

/// One tasklet's slice of a downloaded region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GatherBlock {
    pub round: usize,
    pub dpu: usize,
    pub tasklet: usize,
    pub buffer: BufferId,
    pub valid_count: usize,
    /// Elements the region can hold.
    pub capacity: usize,
    /// `capacity` elements; only the first `valid_count` are meaningful.
    pub payload: Vec<u8>,
}

/// Modeled time of one execution, in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub cpu_to_dpu_ns: f64,
    pub kernel_ns: f64,
    pub dpu_to_cpu_ns: f64,
    pub host_post_ns: f64,
    /// Program generation and device allocation; not part of `total_ns`.
    pub overhead_ns: f64,
}

impl Timing {
    pub fn total_ns(&self) -> f64 {
        self.cpu_to_dpu_ns + self.kernel_ns + self.dpu_to_cpu_ns + self.host_post_ns
    }

    pub fn wall_ns(&self) -> f64 {
        self.total_ns() + self.overhead_ns
    }

    pub fn add(&mut self, o: &Timing) {
        self.cpu_to_dpu_ns += o.cpu_to_dpu_ns;
        self.kernel_ns += o.kernel_ns;
        self.dpu_to_cpu_ns += o.dpu_to_cpu_ns;
        self.host_post_ns += o.host_post_ns;
        self.overhead_ns += o.overhead_ns;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecReport {
    /// Final length of every fetched buffer.
    pub fetched: BTreeMap<BufferId, usize>,
    pub timing: Timing,
    pub rounds: usize,
    pub elements_per_round: usize,
    pub cpu_leftover: usize,
    pub subpipelines: usize,
    pub device_invocations: u64,
    pub host_invocations: u64,
    pub dma: DmaStats,
}
