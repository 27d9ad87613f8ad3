use std::collections::BTreeMap;

use crate::buffers::{BufferId, HostBuffers};
use crate::codegen::LeftoverTask;
use crate::pipeline::{run_stages_host, Pipeline, PipelineError};
use crate::simdev::CostModel;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LeftoverResult {
    /// Tail contribution of every buffer the pipeline writes.
    pub outputs: BTreeMap<BufferId, Vec<u8>>,
    pub invocations: u64,
    pub host_ns: f64,
}

/// Runs the whole pipeline on the host over base elements `[start, end)`.
pub fn run_cpu_leftover(
    p: &Pipeline,
    bufs: &HostBuffers,
    task: LeftoverTask,
    cost: &CostModel,
) -> Result<LeftoverResult, PipelineError> {
    let mut tail = HostBuffers::new();
    for &b in &p.host_inputs {
        let info = &p.info[&b];
        let bytes = bufs.bytes(b).ok_or(PipelineError::MissingBuffer(b))?;
        let size = info.elem.size;
        let part = if info.scalar {
            bytes.to_vec()
        } else {
            bytes[task.start * size..task.end * size].to_vec()
        };
        tail.set_bytes(b, info.elem.clone(), part);
    }
    for ov in p.stages.iter().filter_map(|s| s.overlap) {
        if let Some(h) = bufs.get(ov) {
            tail.set_bytes(ov, h.elem.clone(), h.bytes.clone());
        }
    }
    run_stages_host(&p.stages, &mut tail, true)?;

    let n = task.end - task.start;
    let invocations: u64 = p
        .stage_in
        .iter()
        .map(|d| (n / d.scale.max(1)) as u64)
        .sum();
    let outputs = p
        .graph
        .producer
        .keys()
        .filter_map(|&b| tail.bytes(b).map(|v| (b, v.to_vec())))
        .collect();
    Ok(LeftoverResult {
        outputs,
        invocations,
        host_ns: cost.host_invocations_ns(invocations as usize),
    })
}
