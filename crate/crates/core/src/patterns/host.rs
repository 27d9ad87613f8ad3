//! Reference semantics of every pattern kind, evaluated on the host.

use super::kernel::{Args, CombineFn, KernelSpec, Slot};
use super::{output_length, validate_stage_args, ArgRole, ArgSpec, PatternError, PatternKind};

/// Shape parameters of one pattern application.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PatternParams {
    pub window: Option<usize>,
    pub group: Option<usize>,
    /// Lookahead elements appended past the end of each input argument,
    /// concatenated in argument order.
    pub overlap: Option<Vec<u8>>,
    /// Treat a window longer than its input as producing no output instead
    /// of failing. Used for tail slices processed on the host.
    pub lenient: bool,
}

impl PatternParams {
    pub fn new(window: Option<usize>, group: Option<usize>) -> Self {
        Self {
            window,
            group,
            ..Self::default()
        }
    }

    pub fn with_overlap(mut self, overlap: Vec<u8>) -> Self {
        self.overlap = Some(overlap);
        self
    }
}

/// Elements one input argument exposes per invocation, and the stride between
/// consecutive invocations.
fn input_window(kind: PatternKind, w: usize, g: usize) -> (usize, usize) {
    let la = kind.lookahead(w);
    if kind.is_group() {
        (g + la, g)
    } else {
        (1 + la, 1)
    }
}

/// Applies one pattern to whole host vectors.
///
/// `data` holds one byte vector per argument, in argument order. Inputs and
/// scalars are read; outputs are replaced; a reduction output holds the
/// initial accumulator (empty means the identity) and receives the result.
/// Returns the number of elements written to each output (1 for a reduction).
pub fn apply_pattern_host(
    kind: PatternKind,
    kernel: &KernelSpec,
    args: &[ArgSpec],
    params: &PatternParams,
    data: &mut [Vec<u8>],
) -> Result<usize, PatternError> {
    validate_stage_args(kind, kernel, args)?;
    if data.len() != args.len() {
        return Err(PatternError::ArgLength {
            arg: data.len().min(args.len()),
            expected: args.len(),
            got: data.len(),
        });
    }

    let mut n = None;
    for (j, a) in args.iter().enumerate() {
        let size = a.elem.size;
        if data[j].len() % size != 0 {
            return Err(PatternError::ArgLength {
                arg: j,
                expected: data[j].len() / size * size,
                got: data[j].len(),
            });
        }
        let len = data[j].len() / size;
        match a.role {
            ArgRole::Input | ArgRole::InOut => match n {
                None => n = Some(len),
                Some(n) if n != len => {
                    return Err(PatternError::ArgLength {
                        arg: j,
                        expected: n,
                        got: len,
                    })
                }
                Some(_) => {}
            },
            ArgRole::ReduceOut if len != 0 && len != a.width() => {
                return Err(PatternError::ArgLength {
                    arg: j,
                    expected: a.width(),
                    got: len,
                })
            }
            _ => {}
        }
    }
    let n = n.unwrap_or(0);

    let w = params.window.unwrap_or(0);
    let g = params.group.unwrap_or(1);
    let la = kind.lookahead(w);
    if let Some(ov) = &params.overlap {
        let expected: usize = args
            .iter()
            .filter(|a| a.role == ArgRole::Input)
            .map(|a| la * a.elem.size)
            .sum();
        if ov.len() != expected || !kind.is_window() {
            return Err(PatternError::OverlapLength {
                expected,
                got: ov.len(),
            });
        }
    }

    let invocations = if kind.is_reduce() {
        n
    } else {
        match output_length(kind, n, params.window, params.group, params.overlap.is_some()) {
            Ok(len) => len.bound(),
            Err(PatternError::WindowTooLarge { .. }) if params.lenient => 0,
            Err(e) => return Err(e),
        }
    };

    // Window inputs read past their end into the overlap vector.
    let mut ext: Vec<Option<Vec<u8>>> = vec![None; args.len()];
    if let Some(ov) = &params.overlap {
        let mut at = 0;
        for (j, a) in args.iter().enumerate() {
            if a.role == ArgRole::Input {
                let take = la * a.elem.size;
                let mut v = data[j].clone();
                v.extend_from_slice(&ov[at..at + take]);
                ext[j] = Some(v);
                at += take;
            }
        }
    }

    let (win, stride) = input_window(kind, w, g);
    let mut slots = Vec::with_capacity(args.len());
    let mut offset = 0;
    for (j, a) in args.iter().enumerate() {
        let len = match a.role {
            ArgRole::Input => {
                if kind.is_reduce() {
                    1
                } else {
                    win
                }
            }
            ArgRole::Output | ArgRole::InOut => 1,
            ArgRole::Scalar => data[j].len() / a.elem.size,
            ArgRole::ReduceOut => a.width(),
            ArgRole::Combine => 0,
        };
        slots.push(Slot::new(offset, len, a.elem.size, a.role.writes()));
        offset += len * a.elem.size;
    }
    let mut scratch = vec![0u8; offset];
    for (j, a) in args.iter().enumerate() {
        let s = slots[j];
        let span = s.offset..s.offset + s.len * s.size;
        match a.role {
            ArgRole::Scalar => scratch[span].copy_from_slice(&data[j]),
            ArgRole::ReduceOut => {
                if data[j].is_empty() {
                    scratch[span].copy_from_slice(&a.identity_bytes());
                } else {
                    scratch[span].copy_from_slice(&data[j]);
                }
            }
            _ => {}
        }
    }

    let mut outs: Vec<Vec<u8>> = vec![Vec::new(); args.len()];
    let mut kept = 0;
    for i in 0..invocations {
        for (j, a) in args.iter().enumerate() {
            let s = slots[j];
            let size = s.size;
            match a.role {
                ArgRole::Input => {
                    let src = ext[j].as_deref().unwrap_or(&data[j]);
                    let start = if kind.is_reduce() { i } else { i * stride } * size;
                    scratch[s.offset..s.offset + s.len * size]
                        .copy_from_slice(&src[start..start + s.len * size]);
                }
                ArgRole::InOut => {
                    scratch[s.offset..s.offset + size].copy_from_slice(&data[j][i * size..(i + 1) * size]);
                }
                ArgRole::Output => scratch[s.offset..s.offset + size].fill(0),
                _ => {}
            }
        }
        let mut view = Args::new(&mut scratch, &slots);
        (kernel.apply)(&mut view);
        let keep = match (&kernel.predicate, kind.is_filter()) {
            (Some(p), true) => p(&view),
            _ => true,
        };
        if let Some(fault) = view.take_fault() {
            return Err(PatternError::KernelFault {
                kernel: kernel.kernel_id.clone(),
                fault,
            });
        }
        if kind.is_reduce() || !keep {
            continue;
        }
        kept += 1;
        for (j, a) in args.iter().enumerate() {
            if matches!(a.role, ArgRole::Output | ArgRole::InOut) {
                let s = slots[j];
                outs[j].extend_from_slice(&scratch[s.offset..s.offset + s.size]);
            }
        }
    }

    if kind.is_reduce() {
        for (j, a) in args.iter().enumerate() {
            if a.role == ArgRole::ReduceOut {
                let s = slots[j];
                data[j] = scratch[s.offset..s.offset + s.len * s.size].to_vec();
            }
        }
        return Ok(1);
    }
    for (j, a) in args.iter().enumerate() {
        if matches!(a.role, ArgRole::Output | ArgRole::InOut) {
            data[j] = std::mem::take(&mut outs[j]);
        }
    }
    Ok(kept)
}

/// Merges two partial results of one reduction stage.
#[derive(Clone)]
pub struct PartialCombiner {
    kernel_id: String,
    f: CombineFn,
    slots: Vec<Slot>,
    acc: usize,
    other: usize,
    width_bytes: usize,
}

impl PartialCombiner {
    /// `acc ← acc ⊕ other`, both `width × size` bytes.
    pub fn combine(&self, acc: &mut [u8], other: &[u8]) -> Result<(), PatternError> {
        let total = self
            .slots
            .iter()
            .map(|s| s.offset + s.len * s.size)
            .max()
            .unwrap_or(0);
        let mut scratch = vec![0u8; total];
        let a = self.slots[self.acc];
        let o = self.slots[self.other];
        scratch[a.offset..a.offset + self.width_bytes].copy_from_slice(acc);
        scratch[o.offset..o.offset + o.len * o.size].copy_from_slice(&other[..o.len * o.size]);
        let mut view = Args::new(&mut scratch, &self.slots);
        (self.f)(&mut view);
        if let Some(fault) = view.take_fault() {
            return Err(PatternError::KernelFault {
                kernel: self.kernel_id.clone(),
                fault,
            });
        }
        acc.copy_from_slice(&scratch[a.offset..a.offset + self.width_bytes]);
        Ok(())
    }
}

/// The combiner of a reduction stage: its Combine argument when present,
/// otherwise the stage's own apply function folding one partial into another.
pub fn partial_combiner(kernel: &KernelSpec, args: &[ArgSpec]) -> Result<PartialCombiner, PatternError> {
    validate_stage_args(PatternKind::Reduce, kernel, args)?;
    let out = args
        .iter()
        .position(|a| a.role == ArgRole::ReduceOut)
        .expect("validated");
    let width = args[out].width();
    let size = args[out].elem.size;
    let width_bytes = width * size;

    if let Some(c) = args.iter().find(|a| a.role == ArgRole::Combine) {
        return Ok(PartialCombiner {
            kernel_id: kernel.kernel_id.clone(),
            f: c.combiner.clone().expect("validated"),
            slots: vec![
                Slot::new(0, width, size, true),
                Slot::new(width_bytes, width, size, false),
            ],
            acc: 0,
            other: 1,
            width_bytes,
        });
    }

    // Default fold: the single input slot receives the other partial.
    let input = args
        .iter()
        .position(|a| a.role == ArgRole::Input)
        .expect("validated");
    let mut slots = vec![Slot::new(0, 0, size, false); args.len()];
    slots[out] = Slot::new(0, 1, size, true);
    slots[input] = Slot::new(8, 1, size, false);
    Ok(PartialCombiner {
        kernel_id: kernel.kernel_id.clone(),
        f: kernel.apply.clone(),
        slots,
        acc: out,
        other: input,
        width_bytes,
    })
}
