use crate::buffers::HostBuffers;
use crate::patterns::{apply_pattern_host, ArgRole};

use super::{PipelineError, StageSpec};

/// Runs `stages` one after another on the host, reading and writing `bufs`.
/// With `lenient`, windows without overlap treat missing lookahead as zeros
/// instead of shortening their output.
pub fn run_stages_host(stages: &[StageSpec], bufs: &mut HostBuffers, lenient: bool) -> Result<(), PipelineError> {
    for s in stages {
        let mut params = s.params(bufs)?;
        params.lenient = lenient;
        let mut data = Vec::with_capacity(s.args.len());
        for a in &s.args {
            let d = match a.role {
                ArgRole::Input | ArgRole::InOut | ArgRole::Scalar => bufs
                    .bytes(a.buffer)
                    .ok_or(PipelineError::MissingBuffer(a.buffer))?
                    .to_vec(),
                ArgRole::ReduceOut => bufs.bytes(a.buffer).map(<[u8]>::to_vec).unwrap_or_default(),
                ArgRole::Output | ArgRole::Combine => Vec::new(),
            };
            data.push(d);
        }
        apply_pattern_host(s.kind, &s.kernel, &s.args, &params, &mut data)?;
        for (a, d) in s.args.iter().zip(data) {
            if a.role.writes() {
                bufs.set_bytes(a.buffer, a.elem.clone(), d);
            }
        }
    }
    Ok(())
}

/// The host composition of `stages` on a copy of `bufs`.
pub fn host_reference(stages: &[StageSpec], bufs: &HostBuffers) -> Result<HostBuffers, PipelineError> {
    let mut out = bufs.clone();
    run_stages_host(stages, &mut out, false)?;
    Ok(out)
}
