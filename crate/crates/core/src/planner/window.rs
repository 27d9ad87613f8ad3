use crate::patterns::pad8;

use super::PlanError;

/// The slice of a window input one DPU receives in one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpuExtent {
    pub dpu: usize,
    /// First global element index.
    pub start: usize,
    /// Elements taken from the input itself.
    pub from_input: usize,
    /// Elements taken from the user overlap vector.
    pub from_overlap: usize,
    /// Elements past both, filled with zeroes.
    pub zero_fill: usize,
    pub padded_bytes: usize,
}

impl DpuExtent {
    pub fn elems(&self) -> usize {
        self.from_input + self.from_overlap + self.zero_fill
    }
}

/// Extends each DPU's share of a window input by `lookahead` elements taken
/// from the next DPU's share, or past the end of the input from the overlap
/// vector.
///
/// `overlap` is the number of overlap elements the user supplied; when
/// `preserve_length` is set it must be present.
#[allow(clippy::too_many_arguments)]
pub fn window_overlap_plan(
    stage: usize,
    lookahead: usize,
    elem_size: usize,
    n_dpus: usize,
    per_dpu: usize,
    round_start: usize,
    total: usize,
    overlap: Option<usize>,
    preserve_length: bool,
) -> Result<Vec<DpuExtent>, PlanError> {
    if preserve_length && overlap.is_none() {
        return Err(PlanError::MissingOverlapVector { stage });
    }
    let ov = overlap.unwrap_or(0);
    Ok((0..n_dpus)
        .map(|dpu| {
            let start = round_start + dpu * per_dpu;
            let end = start + per_dpu + lookahead;
            let from_input = end.min(total).saturating_sub(start);
            let past = end.saturating_sub(total.max(start));
            let from_overlap = past.min(ov);
            DpuExtent {
                dpu,
                start,
                from_input,
                from_overlap,
                zero_fill: past - from_overlap,
                padded_bytes: pad8((per_dpu + lookahead) * elem_size),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dpus_window_two() {
        let e = window_overlap_plan(0, 1, 4, 2, 4, 0, 8, Some(1), true).unwrap();
        assert_eq!((e[0].start, e[0].from_input, e[0].from_overlap), (0, 5, 0));
        assert_eq!(e[0].padded_bytes, 24);
        assert_eq!((e[1].start, e[1].from_input, e[1].from_overlap), (4, 4, 1));
    }

    #[test]
    fn degenerate_and_single() {
        let e = window_overlap_plan(0, 0, 4, 2, 4, 0, 8, None, false).unwrap();
        assert!(e.iter().all(|x| x.elems() == 4));
        let e = window_overlap_plan(0, 2, 4, 1, 4, 0, 4, Some(2), true).unwrap();
        assert_eq!(e[0].elems(), 6);
        assert_eq!(e[0].from_overlap, 2);
        assert_eq!(
            window_overlap_plan(3, 2, 4, 1, 4, 0, 4, None, true),
            Err(PlanError::MissingOverlapVector { stage: 3 })
        );
        let e = window_overlap_plan(0, 2, 4, 1, 4, 0, 4, None, false).unwrap();
        assert_eq!(e[0].zero_fill, 2);
    }
}
