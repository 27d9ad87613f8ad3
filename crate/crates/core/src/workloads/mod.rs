//! The six benchmark workloads, their plain-Rust reference results and the
//! benchmark report.

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffers::{BufferId, HostBuffers};
use crate::patterns::{to_bytes, ArgSpec, KernelSpec};
use crate::pipeline::{Pipeline, PipelineError, StageSpec};
use crate::simdev::DeviceConfig;

pub use report::{
    loc_report, run_bench, BenchError, BenchReport, ConfigEcho, LocRow, StrategyTiming, REPORT_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Workload {
    #[serde(rename = "VA")]
    Va,
    #[serde(rename = "SEL")]
    Sel,
    #[serde(rename = "UNI")]
    Uni,
    #[serde(rename = "RED")]
    Red,
    #[serde(rename = "GEMV")]
    Gemv,
    #[serde(rename = "HST-S")]
    HstS,
}

impl Workload {
    pub const ALL: [Workload; 6] = [
        Workload::Va,
        Workload::Sel,
        Workload::Uni,
        Workload::Red,
        Workload::Gemv,
        Workload::HstS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Workload::Va => "VA",
            Workload::Sel => "SEL",
            Workload::Uni => "UNI",
            Workload::Red => "RED",
            Workload::Gemv => "GEMV",
            Workload::HstS => "HST-S",
        }
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Workload {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Workload::ALL
            .into_iter()
            .find(|w| w.name().eq_ignore_ascii_case(s) || w.name().replace('-', "").eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown workload '{s}' (expected VA, SEL, UNI, RED, GEMV or HST-S)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub workload: Workload,
    pub n_dpus: usize,
    pub elems_per_dpu: usize,
    pub gemv_rows_per_dpu: usize,
    pub gemv_cols: usize,
    pub bins: usize,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn new(workload: Workload) -> Self {
        Self {
            workload,
            n_dpus: 16,
            elems_per_dpu: 64 << 10,
            gemv_rows_per_dpu: 256,
            gemv_cols: 64,
            bins: 256,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dpus(mut self, n_dpus: usize, elems_per_dpu: usize) -> Self {
        self.n_dpus = n_dpus;
        self.elems_per_dpu = elems_per_dpu;
        self
    }

    /// Pipeline length in input elements.
    pub fn total_elements(&self) -> usize {
        match self.workload {
            Workload::Gemv => self.n_dpus * self.gemv_rows_per_dpu * self.gemv_cols,
            _ => self.n_dpus * self.elems_per_dpu,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("GEMV vector of {bytes} bytes does not fit the {budget}-byte per-tasklet WRAM budget")]
    VectorTooLargeForWram { bytes: usize, budget: usize },
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// A workload ready to execute: the pipeline, its inputs and the expected
/// bytes of every fetched buffer.
#[derive(Clone, Debug)]
pub struct BuiltWorkload {
    pub spec: WorkloadSpec,
    pub pipeline: Pipeline,
    pub bufs: HostBuffers,
    pub outputs: Vec<BufferId>,
    pub expected: BTreeMap<BufferId, Vec<u8>>,
    /// Framework calls in the workload program (stages, fetches, execute).
    pub calls: usize,
}

impl BuiltWorkload {
    /// Whether every fetched buffer in `bufs` equals the reference bytes.
    pub fn verify(&self, bufs: &HostBuffers) -> bool {
        self.outputs
            .iter()
            .all(|b| bufs.bytes(*b) == self.expected.get(b).map(Vec::as_slice))
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn random_u32(n: usize, seed: u64, salt: u64) -> Vec<u32> {
    let mut r = rng(seed, salt);
    (0..n).map(|_| r.gen()).collect()
}

/// Sorted values where each element repeats its predecessor with
/// probability one half.
pub fn sorted_with_duplicates(n: usize, seed: u64) -> Vec<u32> {
    let mut r = rng(seed, 3);
    let mut v = Vec::with_capacity(n);
    let mut x: u32 = r.gen_range(0..16);
    for i in 0..n {
        if i > 0 && !r.gen_bool(0.5) {
            x += r.gen_range(1..=4);
        }
        v.push(x);
    }
    v
}

fn finish(spec: WorkloadSpec, mut p: Pipeline, bufs: HostBuffers, out: BufferId, expected: Vec<u8>) -> Result<BuiltWorkload, WorkloadError> {
    p.fetch(out)?;
    Ok(BuiltWorkload {
        spec,
        calls: p.stages().len() + 2,
        pipeline: p,
        bufs,
        outputs: vec![out],
        expected: BTreeMap::from([(out, expected)]),
    })
}

pub fn build_workload(spec: &WorkloadSpec, device: &DeviceConfig) -> Result<BuiltWorkload, WorkloadError> {
    if spec.n_dpus == 0 {
        return Err(WorkloadError::InvalidSpec("n_dpus must be >= 1".into()));
    }
    let n = spec.total_elements();
    let seed = spec.seed;
    let mut bufs = HostBuffers::new();
    let mut p = Pipeline::new(n);
    let spec = *spec;

    match spec.workload {
        Workload::Va => {
            let a = random_u32(n, seed, 1);
            let b = random_u32(n, seed, 2);
            let expected: Vec<u32> = a.iter().zip(&b).map(|(x, y)| x.wrapping_add(*y)).collect();
            let (ia, ib) = (bufs.insert(&a), bufs.insert(&b));
            let c = bufs.declare::<u32>();
            let k = KernelSpec::new("va_add", |x| {
                let s = x.get::<u32>(0).wrapping_add(x.get::<u32>(1));
                x.set(2, s);
            });
            p.add_stage(StageSpec::map(
                k,
                vec![ArgSpec::input::<u32>(ia), ArgSpec::input::<u32>(ib), ArgSpec::output::<u32>(c)],
            ))?;
            finish(spec, p, bufs, c, to_bytes(&expected))
        }
        Workload::Sel => {
            let x = random_u32(n, seed, 1);
            let expected: Vec<u32> = x.iter().copied().filter(|v| v % 2 == 0).collect();
            let ix = bufs.insert(&x);
            let y = bufs.declare::<u32>();
            let k = KernelSpec::select("sel_even", |a| a.get::<u32>(0) % 2 == 0);
            p.add_stage(StageSpec::filter(k, vec![ArgSpec::output::<u32>(y), ArgSpec::input::<u32>(ix)]))?;
            finish(spec, p, bufs, y, to_bytes(&expected))
        }
        Workload::Uni => {
            let x = sorted_with_duplicates(n, seed);
            let mut expected = x.clone();
            expected.dedup();
            let ix = bufs.insert(&x);
            let ov = bufs.insert(&[u32::MAX]);
            let y = bufs.declare::<u32>();
            let k = KernelSpec::select("uni_last_of_run", |a| a.at::<u32>(1, 0) != a.at::<u32>(1, 1));
            p.add_stage(
                StageSpec::window_filter(k, 2, vec![ArgSpec::output::<u32>(y), ArgSpec::input::<u32>(ix)])
                    .with_overlap(ov),
            )?;
            finish(spec, p, bufs, y, to_bytes(&expected))
        }
        Workload::Red => {
            let x = random_u32(n, seed, 1);
            let expected = x.iter().fold(0u32, |s, v| s.wrapping_add(*v));
            let ix = bufs.insert(&x);
            let sum = bufs.declare::<u32>();
            let k = KernelSpec::new("red_sum", |a| {
                let s = a.get::<u32>(0).wrapping_add(a.get::<u32>(1));
                a.set(0, s);
            });
            p.add_stage(StageSpec::reduce(k, vec![ArgSpec::reduce_out::<u32>(sum, 1), ArgSpec::input::<u32>(ix)]))?;
            finish(spec, p, bufs, sum, to_bytes(&[expected]))
        }
        Workload::Gemv => {
            let cols = spec.gemv_cols;
            if cols == 0 || spec.gemv_rows_per_dpu == 0 {
                return Err(WorkloadError::InvalidSpec("GEMV needs rows and cols >= 1".into()));
            }
            let budget = device.usable_wram() / device.tasklets.max(1) / 8 * 8;
            if cols * 4 > budget {
                return Err(WorkloadError::VectorTooLargeForWram {
                    bytes: cols * 4,
                    budget,
                });
            }
            let m: Vec<u32> = random_u32(n, seed, 1).into_iter().map(|v| v % 1024).collect();
            let v: Vec<u32> = random_u32(cols, seed, 2).into_iter().map(|v| v % 1024).collect();
            let expected = gemv_reference(&m, &v);
            let (im, iv) = (bufs.insert(&m), bufs.insert(&v));
            let y = bufs.declare::<u32>();
            let k = KernelSpec::new("gemv_row", |a| {
                let mut acc = 0u32;
                for j in 0..a.len(0) {
                    acc = acc.wrapping_add(a.at::<u32>(0, j).wrapping_mul(a.at::<u32>(1, j)));
                }
                a.set(2, acc);
            })
            .with_cost(8 * cols as u32);
            p.add_stage(StageSpec::group(
                k,
                cols,
                vec![ArgSpec::input::<u32>(im), ArgSpec::scalar::<u32>(iv), ArgSpec::output::<u32>(y)],
            ))?;
            finish(spec, p, bufs, y, to_bytes(&expected))
        }
        Workload::HstS => {
            let bins = spec.bins;
            if bins == 0 {
                return Err(WorkloadError::InvalidSpec("HST-S needs bins >= 1".into()));
            }
            let x: Vec<u32> = random_u32(n, seed, 1).into_iter().map(|v| v % 4096).collect();
            let expected = histogram_reference(&x, bins);
            let ix = bufs.insert(&x);
            let h = bufs.declare::<u32>();
            let k = KernelSpec::new("hst_bin", move |a| {
                let bin = a.get::<u32>(1) as usize % bins;
                let c = a.at::<u32>(0, bin).wrapping_add(1);
                a.set_at(0, bin, c);
            });
            p.add_stage(StageSpec::reduce(
                k,
                vec![
                    ArgSpec::reduce_out::<u32>(h, bins),
                    ArgSpec::input::<u32>(ix),
                    ArgSpec::combine::<u32>(h, |a| {
                        for i in 0..a.len(0) {
                            let s = a.at::<u32>(0, i).wrapping_add(a.at::<u32>(1, i));
                            a.set_at(0, i, s);
                        }
                    }),
                ],
            ))?;
            finish(spec, p, bufs, h, to_bytes(&expected))
        }
    }
}

pub fn gemv_reference(m: &[u32], v: &[u32]) -> Vec<u32> {
    m.chunks(v.len())
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(0u32, |s, (a, b)| s.wrapping_add(a.wrapping_mul(*b)))
        })
        .collect()
}

pub fn histogram_reference(x: &[u32], bins: usize) -> Vec<u32> {
    let mut h = vec![0u32; bins];
    for &v in x {
        h[v as usize % bins] += 1;
    }
    h
}
