//! Transfer, DMA and kernel timing formulas.

use serde::{Deserialize, Serialize};

use super::CostModel;

/// Pipeline fill: throughput grows with tasklets up to this many.
pub const PIPELINE_FILL_TASKLETS: usize = 11;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmaStats {
    pub chunks: u64,
    pub bytes: u64,
    pub min_chunk: u64,
    pub max_chunk: u64,
}

impl DmaStats {
    pub fn record(&mut self, len: usize) {
        let len = len as u64;
        self.min_chunk = if self.chunks == 0 { len } else { self.min_chunk.min(len) };
        self.max_chunk = self.max_chunk.max(len);
        self.chunks += 1;
        self.bytes += len;
    }

    pub fn merge(&mut self, other: &DmaStats) {
        if other.chunks == 0 {
            return;
        }
        self.min_chunk = if self.chunks == 0 {
            other.min_chunk
        } else {
            self.min_chunk.min(other.min_chunk)
        };
        self.max_chunk = self.max_chunk.max(other.max_chunk);
        self.chunks += other.chunks;
        self.bytes += other.bytes;
    }
}

impl CostModel {
    /// One host-issued transfer per DPU, back to back.
    pub fn serial_ns(&self, per_dpu: &[usize]) -> f64 {
        let x = &self.serial_xfer;
        per_dpu
            .iter()
            .filter(|&&b| b > 0)
            .map(|&b| x.latency_ns + b as f64 / x.bytes_per_ns)
            .sum()
    }

    /// All DPUs at once, `lanes` of them per wave, each wave paced by the
    /// largest payload.
    pub fn parallel_ns(&self, per_dpu: &[usize]) -> f64 {
        let max = per_dpu.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return 0.0;
        }
        let x = &self.parallel_xfer;
        let waves = per_dpu.len().div_ceil(x.lanes.max(1));
        x.latency_ns + waves as f64 * max as f64 / x.bytes_per_ns
    }

    pub fn broadcast_ns(&self, bytes: usize) -> f64 {
        if bytes == 0 {
            return 0.0;
        }
        self.broadcast_xfer.latency_ns + bytes as f64 / self.broadcast_xfer.bytes_per_ns
    }

    pub fn dma_ns(&self, stats: &DmaStats) -> f64 {
        stats.chunks as f64 * self.dma.latency_ns + stats.bytes as f64 / self.dma.bytes_per_ns
    }

    /// Kernel time of one DPU in one round.
    pub fn dpu_kernel_ns(&self, cycles: u64, dma: &DmaStats, freq_hz: u64, tasklets: usize) -> f64 {
        let fill = tasklets.clamp(1, PIPELINE_FILL_TASKLETS) as f64;
        cycles as f64 * 1e9 / freq_hz as f64 / fill + self.dma_ns(dma)
    }

    pub fn host_copy_ns(&self, bytes: usize) -> f64 {
        bytes as f64 / self.host_bytes_per_ns
    }

    pub fn host_invocations_ns(&self, invocations: usize) -> f64 {
        invocations as f64 * self.host_ns_per_invocation
    }

    pub fn overhead_ns(&self) -> f64 {
        self.fixed_codegen_overhead_ns + self.fixed_alloc_overhead_ns
    }
}
