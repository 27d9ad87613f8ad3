//! Turns a pipeline into a device program: buffer and stage lists, memory
//! parameters, the host tail and host post-processing directives.

mod text;

use std::collections::BTreeSet;

use crate::buffers::{BufferId, HostBuffers};
use crate::patterns::{output_length, ArgRole, PatternKind};
use crate::pipeline::{Pipeline, PipelineError};
use crate::planner::{
    plan_layout, ArgShape, BufferClass, BufferShape, LayoutPlan, PlanConfig, StageShape,
};
use crate::simdev::DeviceConfig;

pub use text::{emit_program_text, parse_program_text, ParseError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelRecord {
    pub kernel_id: String,
    /// `kind(role:type, ...)`.
    pub signature: String,
    pub stage: usize,
}

/// Flattened view of a pipeline that the planner consumes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalLists {
    pub stages: Vec<StageShape>,
    pub buffers: Vec<BufferShape>,
}

/// Host elements `[start, end)` processed on the CPU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeftoverTask {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PostDirective {
    /// Concatenate per-tasklet valid prefixes.
    Compact { buffer: BufferId },
    /// Fold per-tasklet partials into one result.
    Combine { buffer: BufferId },
    /// Cut the assembled vector to `len` elements.
    Truncate { buffer: BufferId, len: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceProgram {
    pub layout: LayoutPlan,
    /// Kernel id per stage.
    pub kernels: Vec<String>,
    pub post: Vec<PostDirective>,
}

fn in_len(p: &Pipeline, stage: usize) -> usize {
    p.length / p.stage_in[stage].scale.max(1)
}

/// Collects buffers (first use order) and stages with their domains.
pub fn t1_extract(p: &Pipeline, bufs: &HostBuffers) -> Result<(GlobalLists, Vec<KernelRecord>), PipelineError> {
    let mut buffers: Vec<BufferShape> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut stages = Vec::with_capacity(p.stages.len());
    let mut records = Vec::with_capacity(p.stages.len());

    for (i, s) in p.stages.iter().enumerate() {
        for a in s.args.iter().filter(|a| a.role != ArgRole::Combine) {
            if !seen.insert(a.buffer) {
                continue;
            }
            let info = &p.info[&a.buffer];
            let (class, len) = match a.role {
                ArgRole::Scalar => {
                    let len = bufs.len(a.buffer).ok_or(PipelineError::MissingBuffer(a.buffer))?;
                    (BufferClass::Scalar, len)
                }
                ArgRole::ReduceOut => (BufferClass::Reduce, a.width()),
                _ => (BufferClass::Vector, 0),
            };
            buffers.push(BufferShape {
                id: a.buffer,
                elem: a.elem.clone(),
                class,
                scale: info.domain.scale,
                ext: info.ext,
                filtered: info.domain.filter.is_some(),
                len,
            });
        }

        let din = p.stage_in[i];
        let limit = if s.kind.is_window() && s.overlap.is_none() {
            Some(output_length(s.kind, in_len(p, i), s.window, s.group, false)?.bound())
        } else {
            None
        };
        stages.push(StageShape {
            kind: s.kind,
            window: s.window.unwrap_or(0),
            group: s.group.unwrap_or(1),
            lookahead: s.lookahead(),
            limit,
            in_scale: din.scale,
            in_filtered: din.filter.is_some(),
            args: s
                .args
                .iter()
                .map(|a| ArgShape {
                    role: a.role,
                    elem: a.elem.clone(),
                    buffer: a.buffer,
                    width: a.width(),
                })
                .collect(),
        });
        let sig: Vec<String> = s
            .args
            .iter()
            .map(|a| format!("{}:{}", a.role, a.elem.name))
            .collect();
        records.push(KernelRecord {
            kernel_id: s.kernel.kernel_id.clone(),
            signature: format!("{}({})", s.kind, sig.join(", ")),
            stage: i,
        });
    }
    Ok((GlobalLists { stages, buffers }, records))
}

pub fn t2_memory_params(
    lists: &GlobalLists,
    device: &DeviceConfig,
    total: usize,
    cpu_ratio: f64,
) -> Result<LayoutPlan, PipelineError> {
    let cfg = PlanConfig {
        n_dpus: device.n_dpus,
        tasklets: device.tasklets,
        mram_bytes: device.mram_bytes,
        wram_bytes: device.usable_wram(),
        cpu_ratio,
    };
    Ok(plan_layout(&lists.stages, &lists.buffers, total, &cfg)?)
}

pub fn t3_cpu_leftover(plan: &LayoutPlan) -> Option<LeftoverTask> {
    (plan.cpu_leftover > 0).then(|| LeftoverTask {
        start: plan.leftover_start(),
        end: plan.total,
    })
}

pub fn t4_postprocessing(p: &Pipeline) -> Vec<PostDirective> {
    let mut out = Vec::new();
    for s in p.stages.iter().filter(|s| s.kind == PatternKind::Reduce) {
        for a in s.args.iter().filter(|a| a.role == ArgRole::ReduceOut) {
            out.push(PostDirective::Combine { buffer: a.buffer });
        }
    }
    for &b in &p.fetch_set {
        let info = &p.info[&b];
        if info.domain.reduced {
            continue;
        }
        if info.domain.filter.is_some() {
            out.push(PostDirective::Compact { buffer: b });
        } else if info.domain.truncated {
            let Some(stage) = info.producer else { continue };
            let s = &p.stages[stage];
            let n = in_len(p, stage);
            if let Ok(len) = output_length(s.kind, n, s.window, s.group, s.overlap.is_some()) {
                out.push(PostDirective::Truncate { buffer: b, len: len.bound() });
            }
        }
    }
    out
}

/// Runs the four passes.
pub fn generate(
    p: &Pipeline,
    bufs: &HostBuffers,
    device: &DeviceConfig,
    cpu_ratio: f64,
) -> Result<(DeviceProgram, Vec<KernelRecord>), PipelineError> {
    let (lists, records) = t1_extract(p, bufs)?;
    let layout = t2_memory_params(&lists, device, p.length, cpu_ratio)?;
    let program = DeviceProgram {
        layout,
        kernels: records.iter().map(|r| r.kernel_id.clone()).collect(),
        post: t4_postprocessing(p),
    };
    Ok((program, records))
}
