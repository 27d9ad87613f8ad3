use crate::buffers::HostBuffers;
use crate::pipeline::{Pipeline, PipelineError};
use crate::simdev::Device;

use super::{execute_pipeline, ExecReport};

/// Executes sub-pipelines in order. Each later one takes its length from the
/// host length of its first vector input, which an earlier one fetched.
pub fn run_subpipeline_chain(
    subs: Vec<Pipeline>,
    dev: &mut Device,
    bufs: &mut HostBuffers,
) -> Result<ExecReport, PipelineError> {
    let mut report = ExecReport::default();
    let n_subs = subs.len();
    for (i, mut sub) in subs.into_iter().enumerate() {
        if i > 0 {
            let first = sub.stages[0]
                .args
                .iter()
                .find(|a| a.role.reads_vector())
                .expect("validated stage reads a vector");
            let n = bufs.len(first.buffer).ok_or(PipelineError::MissingBuffer(first.buffer))?;
            sub.set_length(n);
        }
        let r = execute_pipeline(&mut sub, dev, bufs)?;
        let mut timing = r.timing;
        if i > 0 {
            // The device is allocated once per chain.
            timing.overhead_ns -= dev.cost().fixed_alloc_overhead_ns;
        }
        report.timing.add(&timing);
        report.fetched.extend(r.fetched);
        report.rounds += r.rounds;
        report.elements_per_round = report.elements_per_round.max(r.elements_per_round);
        report.cpu_leftover += r.cpu_leftover;
        report.device_invocations += r.device_invocations;
        report.host_invocations += r.host_invocations;
        report.dma.merge(&r.dma);
    }
    report.subpipelines = n_subs;
    Ok(report)
}
