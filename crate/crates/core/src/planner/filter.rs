use crate::patterns::pad8;

/// One WRAM→MRAM write of a filter output block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FilterWrite {
    pub kept: usize,
    /// Byte offset within the tasklet's output region.
    pub mram_offset: usize,
    pub bytes: usize,
    /// Bytes of the previous write replicated at the start of the cache.
    pub carry: usize,
    /// Cache offset where this block's first kept element lands.
    pub append_at: usize,
}

/// Tracks where the next filter block lands.
///
/// Every write is a multiple of 8 bytes. After the first block, the last 8
/// bytes of the previous write are copied to the start of the WRAM cache and
/// the next write starts over them, so kept elements stay contiguous.
#[derive(Clone, Copy, Debug)]
pub struct FilterCursor {
    size: usize,
    written: usize,
}

impl FilterCursor {
    pub fn new(elem_size: usize) -> Self {
        Self {
            size: elem_size,
            written: 0,
        }
    }

    /// `(mram_offset, carry, append_at)` for the next block.
    pub fn next_block(&self) -> (usize, usize, usize) {
        if self.written == 0 {
            (0, 0, 0)
        } else {
            let base = pad8(self.written) - 8;
            (base, 8, self.written - base)
        }
    }

    pub fn commit(&mut self, kept: usize) -> FilterWrite {
        let (mram_offset, carry, append_at) = self.next_block();
        let end = append_at + kept * self.size;
        self.written += kept * self.size;
        FilterWrite {
            kept,
            mram_offset,
            bytes: pad8(end),
            carry,
            append_at,
        }
    }

    pub fn kept_elems(&self) -> usize {
        self.written / self.size
    }
}

/// The write schedule for a sequence of per-block keep counts.
pub fn filter_output_plan(elem_size: usize, keeps: &[usize]) -> Vec<FilterWrite> {
    let mut c = FilterCursor::new(elem_size);
    keeps.iter().map(|&k| c.commit(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carry_examples() {
        assert_eq!(filter_output_plan(4, &[3])[0].bytes, 16);
        assert_eq!(filter_output_plan(4, &[4])[0].bytes, 16);
        assert_eq!(filter_output_plan(4, &[0])[0].bytes, 0);
        let p = filter_output_plan(4, &[3, 0]);
        assert_eq!((p[1].bytes, p[1].carry, p[1].mram_offset), (8, 8, 8));
    }

    #[test]
    fn offsets_never_regress() {
        let p = filter_output_plan(4, &[1, 0, 3, 2, 4, 0, 1]);
        for w in p.windows(2) {
            assert!(w[1].mram_offset >= w[0].mram_offset);
        }
        for w in &p {
            assert_eq!(w.mram_offset % 8, 0);
            assert_eq!(w.bytes % 8, 0);
        }
    }
}
