use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hostrt::Timing;
use crate::pipeline::PipelineError;
use crate::simdev::{Device, DeviceError, RunOptions, SimConfig, XferMode};

use super::{build_workload, Workload, WorkloadError, WorkloadSpec};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("strategy must be serial or parallel, got {0}")]
    BadStrategy(XferMode),
}

impl BenchError {
    /// Errors caused by the configuration rather than by execution.
    pub fn is_config(&self) -> bool {
        match self {
            BenchError::Workload(WorkloadError::Pipeline(_)) => false,
            BenchError::Workload(_) | BenchError::Device(_) | BenchError::BadStrategy(_) => true,
            BenchError::Pipeline(PipelineError::Plan(_)) => true,
            BenchError::Pipeline(_) => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub n_dpus: usize,
    pub tasklets: usize,
    pub elems_per_dpu: usize,
    pub total_elements: usize,
    pub seed: u64,
    pub mram_bytes: usize,
    pub wram_bytes: usize,
    pub gemv_rows_per_dpu: usize,
    pub gemv_cols: usize,
    pub bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyTiming {
    pub cpu_to_dpu_ns: f64,
    pub kernel_ns: f64,
    pub dpu_to_cpu_ns: f64,
    pub host_post_ns: f64,
    pub total_ns: f64,
    pub overhead_ns: f64,
    pub rounds: usize,
    pub cpu_leftover: usize,
    pub verdict: bool,
}

impl StrategyTiming {
    fn new(t: &Timing, rounds: usize, cpu_leftover: usize, verdict: bool) -> Self {
        Self {
            cpu_to_dpu_ns: t.cpu_to_dpu_ns,
            kernel_ns: t.kernel_ns,
            dpu_to_cpu_ns: t.dpu_to_cpu_ns,
            host_post_ns: t.host_post_ns,
            total_ns: t.total_ns(),
            overhead_ns: t.overhead_ns,
            rounds,
            cpu_leftover,
            verdict,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub version: u32,
    pub workload: Workload,
    pub config: ConfigEcho,
    /// `pass` when every strategy reproduced the reference bytes.
    pub verdict: String,
    /// Keyed by gather strategy: `serial`, `parallel`.
    pub timings: BTreeMap<String, StrategyTiming>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Runs `spec` once per gather strategy on a fresh device built from `sim`.
pub fn run_bench(
    spec: &WorkloadSpec,
    sim: &SimConfig,
    strategies: &[XferMode],
    parallel: bool,
) -> Result<BenchReport, BenchError> {
    sim.device.validate()?;
    sim.cost.validate()?;
    let built = build_workload(spec, &sim.device)?;
    let mut timings = BTreeMap::new();
    let mut pass = true;
    for &mode in strategies {
        if mode == XferMode::Broadcast {
            return Err(BenchError::BadStrategy(mode));
        }
        let mut dev = Device::from_config(sim)?;
        dev.set_options(RunOptions {
            gather: mode,
            parallel,
            ..RunOptions::default()
        });
        let mut p = built.pipeline.clone();
        let mut bufs = built.bufs.clone();
        let r = p.execute(&mut dev, &mut bufs)?;
        let ok = built.verify(&bufs);
        pass &= ok;
        timings.insert(
            mode.name().to_string(),
            StrategyTiming::new(&r.timing, r.rounds, r.cpu_leftover, ok),
        );
    }
    Ok(BenchReport {
        version: REPORT_VERSION,
        workload: spec.workload,
        config: ConfigEcho {
            n_dpus: sim.device.n_dpus,
            tasklets: sim.device.tasklets,
            elems_per_dpu: spec.elems_per_dpu,
            total_elements: spec.total_elements(),
            seed: spec.seed,
            mram_bytes: sim.device.mram_bytes,
            wram_bytes: sim.device.wram_bytes,
            gemv_rows_per_dpu: spec.gemv_rows_per_dpu,
            gemv_cols: spec.gemv_cols,
            bins: spec.bins,
        },
        verdict: if pass { "pass" } else { "fail" }.to_string(),
        timings,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocRow {
    pub workload: Workload,
    /// Stages, fetches and the execute call.
    pub framework_calls: usize,
    /// Lines of code reported for the original framework.
    pub reported_loc: usize,
}

/// Framework calls per workload program, next to the published line counts.
pub fn loc_report() -> Vec<LocRow> {
    let tiny = crate::simdev::DeviceConfig::default();
    Workload::ALL
        .into_iter()
        .map(|w| {
            let mut spec = WorkloadSpec::new(w).with_dpus(1, 64);
            spec.gemv_rows_per_dpu = 2;
            spec.gemv_cols = 4;
            let built = build_workload(&spec, &tiny).expect("reference workloads build");
            LocRow {
                workload: w,
                framework_calls: built.calls,
                reported_loc: match w {
                    Workload::Gemv => 9,
                    Workload::HstS => 8,
                    _ => 6,
                },
            }
        })
        .collect()
}
