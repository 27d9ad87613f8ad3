//! Memory-layout planning: WRAM cache sizes, MRAM capacity, rounds and the
//! CPU leftover, all under 8-byte alignment.

mod filter;
mod layout;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patterns::{pad8, ElemType};

pub use filter::{filter_output_plan, FilterCursor, FilterWrite};
pub use layout::{
    plan_layout, ArgLayout, ArgShape, BufferClass, BufferLayout, BufferShape, LayoutPlan, PlanConfig,
    StageLayout, StageShape,
};
pub use window::{window_overlap_plan, DpuExtent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("WRAM budget of {budget} bytes cannot hold one block{}", stage_suffix(*.stage))]
    WramTooSmall { stage: Option<usize>, budget: usize },
    #[error("MRAM budget of {budget} bytes cannot hold one element per buffer")]
    MramTooSmall { budget: usize },
    #[error("stage {stage} preserves window length but has no overlap vector")]
    MissingOverlapVector { stage: usize },
}

fn stage_suffix(stage: Option<usize>) -> String {
    stage.map(|s| format!(" for stage {s}")).unwrap_or_default()
}

/// One padded region in a sequential placement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub offset: usize,
    pub padded: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WramStagePlan {
    pub stage: usize,
    pub elems_per_block: usize,
    pub regions: Vec<Region>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MramPlan {
    pub elems_per_dpu_per_round: usize,
    pub regions: Vec<Region>,
    pub count_header_offset: usize,
    pub header_bytes: usize,
}

/// Largest count whose padded regions fit `budget`, searched downward from
/// `budget / Σ sizes`.
fn fit_count(sizes: &[usize], budget: usize) -> Option<usize> {
    let per_elem: usize = sizes.iter().sum();
    if per_elem == 0 {
        return None;
    }
    let mut count = budget / per_elem;
    while count > 0 && sizes.iter().map(|&s| pad8(count * s)).sum::<usize>() > budget {
        count -= 1;
    }
    (count > 0).then_some(count)
}

fn place(sizes: &[usize], count: usize, base: usize) -> Vec<Region> {
    let mut at = base;
    sizes
        .iter()
        .map(|&s| {
            let r = Region {
                offset: at,
                padded: pad8(count * s),
            };
            at += r.padded;
            r
        })
        .collect()
}

/// Element sizes that take part in per-element accounting.
pub fn per_element_sizes(args: &[crate::patterns::ArgSpec]) -> Vec<usize> {
    args.iter()
        .filter(|a| a.role.is_per_element())
        .map(|a| a.elem.size)
        .collect()
}

/// How many elements a tasklet's WRAM cache holds per argument.
///
/// `sizes` are the element sizes of the per-element arguments; scalars and
/// reduction outputs are excluded by the caller.
pub fn wram_element_count(sizes: &[usize], budget: usize) -> Result<WramStagePlan, PlanError> {
    let count = fit_count(sizes, budget).ok_or(PlanError::WramTooSmall {
        stage: None,
        budget,
    })?;
    Ok(WramStagePlan {
        stage: 0,
        elems_per_block: count,
        regions: place(sizes, count, 0),
    })
}

/// Per-DPU, per-round element capacity of MRAM over a deduplicated buffer set.
pub fn mram_capacity(sizes: &[usize], budget: usize, header_bytes: usize) -> Result<MramPlan, PlanError> {
    let header = pad8(header_bytes);
    if budget <= header {
        return Err(PlanError::MramTooSmall { budget });
    }
    let count = fit_count(sizes, budget - header).ok_or(PlanError::MramTooSmall { budget })?;
    Ok(MramPlan {
        elems_per_dpu_per_round: count,
        regions: place(sizes, count, header),
        count_header_offset: 0,
        header_bytes: header,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSplit {
    pub elements_per_round: usize,
    pub nr_rounds: usize,
    pub cpu_leftover: usize,
}

/// Splits `total` into equal device rounds plus a CPU tail.
///
/// A round is a multiple of `n_dpus × align`; totals smaller than one full
/// round shrink it to the largest legal size, and totals smaller than
/// `n_dpus × align` run entirely on the CPU.
pub fn rounds_and_leftover(total: usize, capacity: usize, n_dpus: usize, align: usize) -> RoundSplit {
    let step = n_dpus.max(1) * align.max(1);
    let mut per_round = capacity / step * step;
    if total < per_round {
        per_round = total / step * step;
    }
    if per_round == 0 {
        return RoundSplit {
            elements_per_round: 0,
            nr_rounds: 0,
            cpu_leftover: total,
        };
    }
    let nr_rounds = total / per_round;
    RoundSplit {
        elements_per_round: per_round,
        nr_rounds,
        cpu_leftover: total - per_round * nr_rounds,
    }
}

/// Elements of the smallest type whose byte length is a multiple of 8.
pub fn min_align_elems(types: &[ElemType]) -> usize {
    types.iter().map(ElemType::align_elems).max().unwrap_or(1)
}
