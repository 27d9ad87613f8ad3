use super::{GatherBlock, HostError};

/// Concatenates the valid prefix of every block, in block order. Returns the
/// compacted bytes and their element count.
pub fn compact_filter_output(blocks: &[GatherBlock], elem_size: usize) -> Result<(Vec<u8>, usize), HostError> {
    let mut out = Vec::new();
    let mut n = 0;
    for b in blocks {
        let have = b.payload.len() / elem_size;
        if b.valid_count > b.capacity || b.valid_count > have {
            return Err(HostError::CountOverflow {
                round: b.round,
                dpu: b.dpu,
                tasklet: b.tasklet,
                count: b.valid_count,
                capacity: b.capacity.min(have),
            });
        }
        out.extend_from_slice(&b.payload[..b.valid_count * elem_size]);
        n += b.valid_count;
    }
    Ok((out, n))
}
