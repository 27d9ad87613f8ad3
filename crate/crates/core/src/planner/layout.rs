use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::buffers::BufferId;
use crate::patterns::{lcm, pad8, ArgRole, ElemType, PatternKind};

use super::{mram_capacity, rounds_and_leftover, wram_element_count, PlanError, RoundSplit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BufferClass {
    /// Distributed across DPUs element by element.
    Vector,
    /// Replicated to every DPU.
    Scalar,
    /// One accumulator per tasklet, combined on the host.
    Reduce,
}

impl BufferClass {
    pub fn name(self) -> &'static str {
        match self {
            BufferClass::Vector => "vector",
            BufferClass::Scalar => "scalar",
            BufferClass::Reduce => "reduce",
        }
    }
}

impl fmt::Display for BufferClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BufferClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vector" => Ok(BufferClass::Vector),
            "scalar" => Ok(BufferClass::Scalar),
            "reduce" => Ok(BufferClass::Reduce),
            _ => Err(format!("unknown buffer class '{s}'")),
        }
    }
}

/// A distinct buffer as the planner sees it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BufferShape {
    pub id: BufferId,
    pub elem: ElemType,
    pub class: BufferClass,
    /// Base elements per buffer element (group stages divide the length).
    pub scale: usize,
    /// Lookahead elements appended to each DPU's slice.
    pub ext: usize,
    /// Holds a per-tasklet compacted prefix.
    pub filtered: bool,
    /// Scalar length or reduction width, in elements.
    pub len: usize,
}

impl BufferShape {
    /// Whether the buffer carries per-tasklet count headers.
    pub fn headed(&self) -> bool {
        self.filtered || self.class == BufferClass::Reduce
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgShape {
    pub role: ArgRole,
    pub elem: ElemType,
    pub buffer: BufferId,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageShape {
    pub kind: PatternKind,
    pub window: usize,
    pub group: usize,
    pub lookahead: usize,
    /// Global invocation count past which a truncated window produces nothing.
    pub limit: Option<usize>,
    pub in_scale: usize,
    pub in_filtered: bool,
    pub args: Vec<ArgShape>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanConfig {
    pub n_dpus: usize,
    pub tasklets: usize,
    pub mram_bytes: usize,
    /// WRAM left after the runtime reservation.
    pub wram_bytes: usize,
    /// Fraction of the input forced onto the host.
    pub cpu_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BufferLayout {
    pub id: BufferId,
    pub elem: ElemType,
    pub class: BufferClass,
    pub scale: usize,
    pub ext: usize,
    pub filtered: bool,
    pub len: usize,
    pub mram: usize,
    /// Region size per DPU.
    pub bytes: usize,
    /// Offset of tasklet 0's count slot; tasklet `t` uses `header + 8t`.
    pub header: Option<usize>,
    /// Offset in the shared WRAM area (scalars only).
    pub wram: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgLayout {
    pub role: ArgRole,
    pub elem: ElemType,
    pub buffer: BufferId,
    pub mram: usize,
    /// Offset within the tasklet's WRAM area; absolute for scalars.
    pub wram: usize,
    /// Output cache of a filtered inout argument.
    pub wram_out: Option<usize>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageLayout {
    pub index: usize,
    pub kind: PatternKind,
    pub window: usize,
    pub group: usize,
    pub lookahead: usize,
    pub limit: Option<usize>,
    /// Input-domain elements per WRAM block.
    pub block: usize,
    pub in_scale: usize,
    pub in_filtered: bool,
    pub args: Vec<ArgLayout>,
}

/// Every memory parameter of one pipeline on one device geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutPlan {
    pub n_dpus: usize,
    pub tasklets: usize,
    pub total: usize,
    /// Granularity of every per-DPU and per-tasklet split, in base elements.
    pub unit: usize,
    pub per_dpu: usize,
    pub elements_per_round: usize,
    pub nr_rounds: usize,
    pub cpu_leftover: usize,
    pub header_bytes: usize,
    pub wram_budget: usize,
    pub wram_shared: usize,
    pub buffers: Vec<BufferLayout>,
    pub stages: Vec<StageLayout>,
}

impl LayoutPlan {
    pub fn leftover_start(&self) -> usize {
        self.elements_per_round * self.nr_rounds
    }

    pub fn split(&self) -> RoundSplit {
        RoundSplit {
            elements_per_round: self.elements_per_round,
            nr_rounds: self.nr_rounds,
            cpu_leftover: self.cpu_leftover,
        }
    }

    pub fn buffer(&self, id: BufferId) -> Option<&BufferLayout> {
        self.buffers.iter().find(|b| b.id == id)
    }

    /// Base-element range `[start, end)` of tasklet `t` within a DPU's share.
    pub fn tasklet_range(&self, t: usize) -> (usize, usize) {
        let units = self.per_dpu / self.unit.max(1);
        let tasklets = self.tasklets.max(1);
        let base = units / tasklets;
        let extra = units % tasklets;
        let start = t * base + t.min(extra);
        let len = base + usize::from(t < extra);
        (start * self.unit, (start + len) * self.unit)
    }

    /// Highest MRAM byte used on any DPU.
    pub fn mram_used(&self) -> usize {
        self.buffers
            .iter()
            .map(|b| b.mram + b.bytes)
            .max()
            .unwrap_or(0)
            .max(self.header_bytes)
    }
}

/// Lays out a pipeline's buffers in MRAM and each stage's caches in WRAM,
/// then splits `total` elements into rounds.
///
/// MRAM holds, in order: the count headers, scalars, reduction partials and
/// one region per vector buffer.
pub fn plan_layout(
    stages: &[StageShape],
    buffers: &[BufferShape],
    total: usize,
    cfg: &PlanConfig,
) -> Result<LayoutPlan, PlanError> {
    let tasklets = cfg.tasklets.max(1);
    let n_dpus = cfg.n_dpus.max(1);

    let mut out: Vec<BufferLayout> = buffers
        .iter()
        .map(|b| BufferLayout {
            id: b.id,
            elem: b.elem.clone(),
            class: b.class,
            scale: b.scale.max(1),
            ext: b.ext,
            filtered: b.filtered,
            len: b.len,
            mram: 0,
            bytes: 0,
            header: None,
            wram: None,
        })
        .collect();

    let mut wram_shared = 0;
    for b in out.iter_mut().filter(|b| b.class == BufferClass::Scalar) {
        b.wram = Some(wram_shared);
        wram_shared += pad8(b.len * b.elem.size);
    }
    let wram_too_small = PlanError::WramTooSmall {
        stage: None,
        budget: cfg.wram_bytes,
    };
    if wram_shared >= cfg.wram_bytes {
        return Err(wram_too_small);
    }
    let wram_budget = (cfg.wram_bytes - wram_shared) / tasklets / 8 * 8;
    if wram_budget < 8 {
        return Err(wram_too_small);
    }

    let unit = out
        .iter()
        .filter(|b| b.class == BufferClass::Vector)
        .map(|b| b.scale * b.elem.align_elems())
        .fold(1, lcm);

    let mut at = 0;
    for (i, b) in buffers.iter().enumerate() {
        if b.headed() {
            out[i].header = Some(at);
            at += 8 * tasklets;
        }
    }
    let header_bytes = at;
    for b in out.iter_mut().filter(|b| b.class == BufferClass::Scalar) {
        b.mram = at;
        b.bytes = pad8(b.len * b.elem.size);
        at += b.bytes;
    }
    for b in out.iter_mut().filter(|b| b.class == BufferClass::Reduce) {
        b.mram = at;
        b.bytes = tasklets * pad8(b.len.max(1) * b.elem.size);
        at += b.bytes;
    }
    let vectors: Vec<usize> = (0..out.len())
        .filter(|&i| out[i].class == BufferClass::Vector)
        .collect();
    let ext_bytes: usize = vectors.iter().map(|&i| pad8(out[i].ext * out[i].elem.size)).sum();
    let fixed = at - header_bytes + ext_bytes;

    let split = if vectors.is_empty() {
        RoundSplit {
            elements_per_round: 0,
            nr_rounds: 0,
            cpu_leftover: total,
        }
    } else {
        let budget = cfg
            .mram_bytes
            .checked_sub(fixed)
            .ok_or(PlanError::MramTooSmall { budget: cfg.mram_bytes })?;
        let sizes: Vec<usize> = vectors.iter().map(|&i| out[i].elem.size).collect();
        let cap = mram_capacity(&sizes, budget, header_bytes)
            .map_err(|_| PlanError::MramTooSmall { budget: cfg.mram_bytes })?
            .elems_per_dpu_per_round;
        let ratio = cfg.cpu_ratio.clamp(0.0, 1.0);
        let host = ((ratio * total as f64).ceil() as usize).min(total);
        let mut s = rounds_and_leftover(total - host, cap * n_dpus, n_dpus, unit);
        s.cpu_leftover = total - s.elements_per_round * s.nr_rounds;
        s
    };
    let per_dpu = split.elements_per_round / n_dpus;
    for &i in &vectors {
        let b = &mut out[i];
        b.mram = at;
        b.bytes = pad8((per_dpu / b.scale + b.ext) * b.elem.size);
        at += b.bytes;
    }

    let mut stage_plans = Vec::with_capacity(stages.len());
    for (index, s) in stages.iter().enumerate() {
        let too_small = PlanError::WramTooSmall {
            stage: Some(index),
            budget: wram_budget,
        };
        let filter = s.kind.is_filter();
        let mut fixed = 0;
        let mut sizes = Vec::new();
        for a in &s.args {
            match a.role {
                ArgRole::Input => {
                    fixed += pad8(s.lookahead * a.elem.size);
                    sizes.push(a.elem.size);
                }
                ArgRole::Output => {
                    fixed += if filter { 8 } else { 0 };
                    sizes.push(a.elem.size);
                }
                ArgRole::InOut => {
                    sizes.push(a.elem.size);
                    if filter {
                        fixed += 8;
                        sizes.push(a.elem.size);
                    }
                }
                ArgRole::ReduceOut => fixed += pad8(a.width.max(1) * a.elem.size),
                ArgRole::Scalar | ArgRole::Combine => {}
            }
        }
        if fixed + 8 > wram_budget {
            return Err(too_small);
        }
        let count = wram_element_count(&sizes, wram_budget - fixed)
            .map_err(|_| too_small.clone())?
            .elems_per_block;
        let gran = unit / s.in_scale.max(1);
        let block = count / gran * gran;
        if block == 0 {
            return Err(too_small);
        }

        let g = s.group.max(1);
        let find = |id: BufferId| out.iter().find(|b| b.id == id).expect("buffer listed");
        let mut cur = 0;
        let mut args = Vec::with_capacity(s.args.len());
        for a in &s.args {
            let b = find(a.buffer);
            let size = a.elem.size;
            let mut wram_out = None;
            let (wram, count) = match a.role {
                ArgRole::Input => {
                    let count = block + s.lookahead;
                    let r = (cur, count);
                    cur += pad8(count * size);
                    r
                }
                ArgRole::Output => {
                    let count = block / g;
                    let r = (cur, count);
                    cur += pad8(count * size) + if filter { 8 } else { 0 };
                    r
                }
                ArgRole::InOut => {
                    let r = (cur, block);
                    cur += pad8(block * size);
                    if filter {
                        wram_out = Some(cur);
                        cur += pad8(block * size) + 8;
                    }
                    r
                }
                ArgRole::Scalar => (b.wram.unwrap_or(0), b.len),
                ArgRole::ReduceOut => {
                    let r = (cur, a.width.max(1));
                    cur += pad8(a.width.max(1) * size);
                    r
                }
                ArgRole::Combine => (0, 0),
            };
            args.push(ArgLayout {
                role: a.role,
                elem: a.elem.clone(),
                buffer: a.buffer,
                mram: b.mram,
                wram,
                wram_out,
                count,
            });
        }
        debug_assert!(cur <= wram_budget, "stage {index} uses {cur} of {wram_budget}");
        stage_plans.push(StageLayout {
            index,
            kind: s.kind,
            window: s.window,
            group: g,
            lookahead: s.lookahead,
            limit: s.limit,
            block,
            in_scale: s.in_scale.max(1),
            in_filtered: s.in_filtered,
            args,
        });
    }

    Ok(LayoutPlan {
        n_dpus,
        tasklets,
        total,
        unit,
        per_dpu,
        elements_per_round: split.elements_per_round,
        nr_rounds: split.nr_rounds,
        cpu_leftover: split.cpu_leftover,
        header_bytes,
        wram_budget,
        wram_shared,
        buffers: out,
        stages: stage_plans,
    })
}
