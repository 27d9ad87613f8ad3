//! A deterministic simulated near-memory device: DPUs with MRAM and WRAM
//! stores, DMA rules, stage execution and a parametric timing model.

mod exec;
mod store;
mod timing;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::DeviceProgram;
use crate::patterns::ArgFault;
use crate::pipeline::StageSpec;

pub use store::ByteStore;
pub use timing::{DmaStats, PIPELINE_FILL_TASKLETS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeviceError {
    #[error("{what}: offset {offset} / length {len} violates DMA alignment")]
    AlignmentViolation { what: &'static str, offset: usize, len: usize },
    #[error("DPU {dpu}: MRAM access [{offset}, +{len}) exceeds {limit} bytes")]
    OutOfMram { dpu: usize, offset: usize, len: usize, limit: usize },
    #[error("DPU {dpu}: WRAM access [{offset}, +{len}) exceeds {limit} bytes")]
    OutOfWram { dpu: usize, offset: usize, len: usize, limit: usize },
    #[error("stage {stage} kernel '{kernel}' faulted on DPU {dpu}: {fault}")]
    KernelFault { stage: usize, kernel: String, dpu: usize, fault: ArgFault },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("program does not match device: {0}")]
    ProgramMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmaConfig {
    pub min: usize,
    pub max: usize,
    pub align: usize,
}

impl Default for DmaConfig {
    fn default() -> Self {
        Self {
            min: 8,
            max: 2048,
            align: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub n_dpus: usize,
    pub mram_bytes: usize,
    pub wram_bytes: usize,
    pub wram_reserved_bytes: usize,
    pub max_tasklets: usize,
    pub tasklets: usize,
    pub freq_hz: u64,
    pub dma: DmaConfig,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            n_dpus: 16,
            mram_bytes: 64 << 20,
            wram_bytes: 64 << 10,
            wram_reserved_bytes: 16 << 10,
            max_tasklets: 24,
            tasklets: 11,
            freq_hz: 450_000_000,
            dma: DmaConfig::default(),
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: String| Err(DeviceError::InvalidConfig(m));
        if self.n_dpus == 0 {
            return bad("n_dpus must be >= 1".into());
        }
        if self.tasklets == 0 || self.tasklets > self.max_tasklets {
            return bad(format!(
                "tasklets must be in 1..={} (got {})",
                self.max_tasklets, self.tasklets
            ));
        }
        if self.freq_hz == 0 {
            return bad("freq_hz must be > 0".into());
        }
        for (name, v) in [
            ("mram_bytes", self.mram_bytes),
            ("wram_bytes", self.wram_bytes),
            ("wram_reserved_bytes", self.wram_reserved_bytes),
            ("dma.min", self.dma.min),
            ("dma.max", self.dma.max),
            ("dma.align", self.dma.align),
        ] {
            if v % 8 != 0 {
                return bad(format!("{name} must be a multiple of 8 (got {v})"));
            }
        }
        if self.dma.min == 0 || self.dma.min > self.dma.max || self.dma.align == 0 {
            return bad("dma requires 0 < min <= max and align > 0".into());
        }
        if self.wram_reserved_bytes >= self.wram_bytes {
            return bad("wram_reserved_bytes must be below wram_bytes".into());
        }
        if self.mram_bytes == 0 {
            return bad("mram_bytes must be > 0".into());
        }
        Ok(())
    }

    pub fn usable_wram(&self) -> usize {
        self.wram_bytes.saturating_sub(self.wram_reserved_bytes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XferCost {
    pub latency_ns: f64,
    pub bytes_per_ns: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelXferCost {
    pub latency_ns: f64,
    pub bytes_per_ns: f64,
    pub lanes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub serial_xfer: XferCost,
    pub parallel_xfer: ParallelXferCost,
    pub broadcast_xfer: XferCost,
    pub dma: XferCost,
    pub cycles_per_invocation_default: u32,
    pub fixed_codegen_overhead_ns: f64,
    pub fixed_alloc_overhead_ns: f64,
    /// Host memcpy rate used for compaction and result assembly.
    pub host_bytes_per_ns: f64,
    /// Host time per kernel invocation (leftover work and partial combining).
    pub host_ns_per_invocation: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            serial_xfer: XferCost {
                latency_ns: 2_000.0,
                bytes_per_ns: 0.6,
            },
            parallel_xfer: ParallelXferCost {
                latency_ns: 20_000.0,
                bytes_per_ns: 0.6,
                lanes: 40,
            },
            broadcast_xfer: XferCost {
                latency_ns: 20_000.0,
                bytes_per_ns: 0.6,
            },
            dma: XferCost {
                latency_ns: 1_000.0,
                bytes_per_ns: 1.0,
            },
            cycles_per_invocation_default: 20,
            fixed_codegen_overhead_ns: 151e6,
            fixed_alloc_overhead_ns: 1200e6,
            host_bytes_per_ns: 10.0,
            host_ns_per_invocation: 2.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let rates = [
            self.serial_xfer.bytes_per_ns,
            self.parallel_xfer.bytes_per_ns,
            self.broadcast_xfer.bytes_per_ns,
            self.dma.bytes_per_ns,
            self.host_bytes_per_ns,
        ];
        let latencies = [
            self.serial_xfer.latency_ns,
            self.parallel_xfer.latency_ns,
            self.broadcast_xfer.latency_ns,
            self.dma.latency_ns,
            self.fixed_codegen_overhead_ns,
            self.fixed_alloc_overhead_ns,
            self.host_ns_per_invocation,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(DeviceError::InvalidConfig("all rates must be > 0".into()));
        }
        if latencies.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(DeviceError::InvalidConfig("latencies must be >= 0".into()));
        }
        if self.parallel_xfer.lanes == 0 {
            return Err(DeviceError::InvalidConfig("parallel_xfer.lanes must be >= 1".into()));
        }
        Ok(())
    }
}

/// The JSON configuration file: `{"device": {...}, "cost": {...}}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub device: DeviceConfig,
    pub cost: CostModel,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, DeviceError> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| DeviceError::InvalidConfig(e.to_string()))?;
        cfg.device.validate()?;
        cfg.cost.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, DeviceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeviceError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XferMode {
    Serial,
    Parallel,
    Broadcast,
}

impl XferMode {
    pub fn name(self) -> &'static str {
        match self {
            XferMode::Serial => "serial",
            XferMode::Parallel => "parallel",
            XferMode::Broadcast => "broadcast",
        }
    }
}

impl fmt::Display for XferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for XferMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(XferMode::Serial),
            "parallel" => Ok(XferMode::Parallel),
            "broadcast" => Ok(XferMode::Broadcast),
            _ => Err(format!("unknown transfer mode '{s}'")),
        }
    }
}

/// Host-side execution choices that are not part of the device geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub upload: XferMode,
    pub gather: XferMode,
    /// Fraction of every pipeline's elements forced onto the host.
    pub cpu_ratio: f64,
    /// Simulate DPUs on worker threads.
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            upload: XferMode::Parallel,
            gather: XferMode::Parallel,
            cpu_ratio: 0.0,
            parallel: true,
        }
    }
}

pub(crate) struct DpuState {
    pub mram: ByteStore,
    pub wram: ByteStore,
}

/// Counters of one DPU over one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DpuRoundStats {
    pub invocations: u64,
    pub cycles: u64,
    pub dma: DmaStats,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundStats {
    /// Slowest DPU.
    pub kernel_ns: f64,
    pub invocations: u64,
    pub dma: DmaStats,
    pub per_dpu_ns: Vec<f64>,
}

/// A simulated device. Exclusively borrowed by one pipeline execution.
pub struct Device {
    config: DeviceConfig,
    cost: CostModel,
    options: RunOptions,
    dpus: Vec<DpuState>,
    dma: DmaStats,
}

impl Device {
    pub fn new(config: DeviceConfig, cost: CostModel) -> Result<Self, DeviceError> {
        config.validate()?;
        cost.validate()?;
        let mut d = Self {
            config,
            cost,
            options: RunOptions::default(),
            dpus: Vec::new(),
            dma: DmaStats::default(),
        };
        d.reset(0);
        Ok(d)
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self, DeviceError> {
        Self::new(cfg.device, cfg.cost)
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn options(&self) -> &RunOptions {
        &self.options
    }

    pub fn set_options(&mut self, options: RunOptions) {
        self.options = options;
    }

    pub fn set_parallel(&mut self, parallel: bool) {
        self.options.parallel = parallel;
    }

    /// Clears all DPU memories, pre-sizing MRAM to `mram_used` bytes.
    pub fn reset(&mut self, mram_used: usize) {
        let c = &self.config;
        self.dpus = (0..c.n_dpus)
            .map(|_| DpuState {
                mram: ByteStore::with_size(c.mram_bytes, mram_used),
                wram: ByteStore::with_size(c.usable_wram(), c.usable_wram()),
            })
            .collect();
    }

    /// Cumulative DMA counters since construction.
    pub fn dma_stats(&self) -> DmaStats {
        self.dma
    }

    pub fn mram(&self, dpu: usize) -> &[u8] {
        self.dpus[dpu].mram.as_slice()
    }

    fn check_host_xfer(&self, offset: usize, len: usize) -> Result<(), DeviceError> {
        if offset % self.config.dma.align != 0 || len % 8 != 0 {
            return Err(DeviceError::AlignmentViolation {
                what: "host transfer",
                offset,
                len,
            });
        }
        Ok(())
    }

    /// Writes one payload per DPU at `offset`; `Broadcast` takes a single
    /// payload and replicates it. Returns the modeled time.
    pub fn upload(&mut self, mode: XferMode, offset: usize, payloads: &[Vec<u8>]) -> Result<f64, DeviceError> {
        let n = self.config.n_dpus;
        let expected = if mode == XferMode::Broadcast { 1 } else { n };
        if payloads.len() != expected {
            return Err(DeviceError::ProgramMismatch(format!(
                "{mode} upload needs {expected} payloads, got {}",
                payloads.len()
            )));
        }
        for p in payloads {
            self.check_host_xfer(offset, p.len())?;
        }
        for d in 0..n {
            let p = if mode == XferMode::Broadcast { &payloads[0] } else { &payloads[d] };
            self.dpus[d]
                .mram
                .write(offset, p)
                .map_err(|(offset, len, limit)| DeviceError::OutOfMram {
                    dpu: d,
                    offset,
                    len,
                    limit,
                })?;
        }
        let sizes: Vec<usize> = payloads.iter().map(Vec::len).collect();
        Ok(match mode {
            XferMode::Serial => self.cost.serial_ns(&sizes),
            XferMode::Parallel => self.cost.parallel_ns(&sizes),
            XferMode::Broadcast => self.cost.broadcast_ns(sizes[0]),
        })
    }

    /// Reads `lens[d]` bytes at `offset` from every DPU `d`.
    pub fn download(
        &mut self,
        mode: XferMode,
        offset: usize,
        lens: &[usize],
    ) -> Result<(f64, Vec<Vec<u8>>), DeviceError> {
        if lens.len() != self.config.n_dpus || mode == XferMode::Broadcast {
            return Err(DeviceError::ProgramMismatch(format!(
                "{mode} download of {} regions from {} DPUs",
                lens.len(),
                self.config.n_dpus
            )));
        }
        let mut out = Vec::with_capacity(lens.len());
        for (d, &len) in lens.iter().enumerate() {
            self.check_host_xfer(offset, len)?;
            let bytes = self.dpus[d]
                .mram
                .read(offset, len)
                .map_err(|(offset, len, limit)| DeviceError::OutOfMram {
                    dpu: d,
                    offset,
                    len,
                    limit,
                })?;
            out.push(bytes.to_vec());
        }
        let t = match mode {
            XferMode::Serial => self.cost.serial_ns(lens),
            _ => self.cost.parallel_ns(lens),
        };
        Ok((t, out))
    }

    /// Reads a list of `(offset, len)` segments from every DPU, modeled as a
    /// single transfer per DPU of the summed length.
    pub fn download_segments(
        &mut self,
        mode: XferMode,
        segments: &[Vec<(usize, usize)>],
    ) -> Result<(f64, Vec<Vec<u8>>), DeviceError> {
        if segments.len() != self.config.n_dpus || mode == XferMode::Broadcast {
            return Err(DeviceError::ProgramMismatch(format!(
                "{mode} download of {} segment lists from {} DPUs",
                segments.len(),
                self.config.n_dpus
            )));
        }
        let mut out = Vec::with_capacity(segments.len());
        let mut lens = Vec::with_capacity(segments.len());
        for (d, segs) in segments.iter().enumerate() {
            let mut bytes = Vec::new();
            for &(offset, len) in segs {
                self.check_host_xfer(offset, len)?;
                let b = self.dpus[d]
                    .mram
                    .read(offset, len)
                    .map_err(|(offset, len, limit)| DeviceError::OutOfMram {
                        dpu: d,
                        offset,
                        len,
                        limit,
                    })?;
                bytes.extend_from_slice(b);
            }
            lens.push(bytes.len());
            out.push(bytes);
        }
        let t = match mode {
            XferMode::Serial => self.cost.serial_ns(&lens),
            _ => self.cost.parallel_ns(&lens),
        };
        Ok((t, out))
    }

    /// Runs every stage of `program` on every DPU for one round.
    pub fn run_round(
        &mut self,
        program: &DeviceProgram,
        stages: &[StageSpec],
        round: usize,
    ) -> Result<RoundStats, DeviceError> {
        let plan = &program.layout;
        if plan.n_dpus != self.config.n_dpus || plan.tasklets != self.config.tasklets {
            return Err(DeviceError::ProgramMismatch(format!(
                "program for {} DPUs x {} tasklets on {} x {}",
                plan.n_dpus, plan.tasklets, self.config.n_dpus, self.config.tasklets
            )));
        }
        if stages.len() != plan.stages.len() {
            return Err(DeviceError::ProgramMismatch("stage count differs".into()));
        }
        let ctx = exec::Ctx {
            program,
            stages,
            round,
            config: &self.config,
            default_cycles: u64::from(self.cost.cycles_per_invocation_default),
        };
        let results: Vec<Result<DpuRoundStats, DeviceError>> = if self.options.parallel {
            self.dpus
                .par_iter_mut()
                .enumerate()
                .map(|(d, s)| exec::run_dpu(&ctx, d, s))
                .collect()
        } else {
            self.dpus
                .iter_mut()
                .enumerate()
                .map(|(d, s)| exec::run_dpu(&ctx, d, s))
                .collect()
        };

        let mut stats = RoundStats::default();
        for r in results {
            let s = r?;
            let t = self
                .cost
                .dpu_kernel_ns(s.cycles, &s.dma, self.config.freq_hz, self.config.tasklets);
            stats.kernel_ns = stats.kernel_ns.max(t);
            stats.per_dpu_ns.push(t);
            stats.invocations += s.invocations;
            stats.dma.merge(&s.dma);
        }
        self.dma.merge(&stats.dma);
        Ok(stats)
    }
}

impl fmt::Debug for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Device")
            .field("config", &self.config)
            .field("options", &self.options)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        DeviceConfig::default().validate().unwrap();
        CostModel::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = DeviceConfig {
            tasklets: 25,
            ..DeviceConfig::default()
        };
        assert!(c.validate().is_err());
        c.tasklets = 11;
        c.wram_bytes = 100;
        assert!(c.validate().is_err());
        assert!(SimConfig::from_json(r#"{"device": {"n_dpus": 4, "bogus": 1}}"#).is_err());
        let s = SimConfig::from_json(r#"{"device": {"n_dpus": 4}}"#).unwrap();
        assert_eq!(s.device.n_dpus, 4);
        assert_eq!(s.cost, CostModel::default());
    }

    #[test]
    fn broadcast_replicates() {
        let cfg = DeviceConfig {
            n_dpus: 3,
            ..DeviceConfig::default()
        };
        let mut d = Device::new(cfg, CostModel::default()).unwrap();
        let v: Vec<u8> = (0..16).collect();
        let t = d.upload(XferMode::Broadcast, 8, &[v.clone()]).unwrap();
        assert!(t > 0.0);
        for i in 0..3 {
            assert_eq!(&d.mram(i)[8..24], v.as_slice());
        }
        assert!(matches!(
            d.upload(XferMode::Broadcast, 4, &[v]),
            Err(DeviceError::AlignmentViolation { .. })
        ));
        let (_, got) = d.download(XferMode::Serial, 8, &[16, 8, 0]).unwrap();
        assert_eq!(got[1], (0..8).collect::<Vec<u8>>());
        assert!(got[2].is_empty());
    }

    #[test]
    fn upload_past_mram_fails() {
        let cfg = DeviceConfig {
            n_dpus: 1,
            mram_bytes: 64,
            ..DeviceConfig::default()
        };
        let mut d = Device::new(cfg, CostModel::default()).unwrap();
        assert!(matches!(
            d.upload(XferMode::Parallel, 56, &[vec![0; 16]]),
            Err(DeviceError::OutOfMram { .. })
        ));
    }
}
