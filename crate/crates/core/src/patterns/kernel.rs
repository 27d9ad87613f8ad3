//! Host-callback kernels and the argument view they receive per invocation.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use super::elem::Element;

/// Modeled instructions per invocation when a kernel does not say otherwise.
pub const DEFAULT_COST_HINT: u32 = 20;

pub type ApplyFn = Arc<dyn Fn(&mut Args<'_>) + Send + Sync>;
pub type PredicateFn = Arc<dyn Fn(&Args<'_>) -> bool + Send + Sync>;
/// Combines two partial reductions: slot 0 is the accumulator, slot 1 the other partial.
pub type CombineFn = Arc<dyn Fn(&mut Args<'_>) + Send + Sync>;

/// Where one argument's data sits inside the memory an [`Args`] view wraps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    /// Element count visible to the kernel.
    pub len: usize,
    pub size: usize,
    pub writable: bool,
}

impl Slot {
    pub fn new(offset: usize, len: usize, size: usize, writable: bool) -> Self {
        Self {
            offset,
            len,
            size,
            writable,
        }
    }
}

/// A contract violation detected while a kernel ran.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArgFault {
    NoSuchArg(usize),
    SizeMismatch { arg: usize, expected: usize, got: usize },
    OutOfRange { arg: usize, index: usize, len: usize },
    ReadOnly(usize),
}

impl fmt::Display for ArgFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgFault::NoSuchArg(j) => write!(f, "argument {j} does not exist"),
            ArgFault::SizeMismatch { arg, expected, got } => {
                write!(f, "argument {arg} holds {expected}-byte elements, accessed as {got}-byte")
            }
            ArgFault::OutOfRange { arg, index, len } => {
                write!(f, "argument {arg} index {index} out of range (len {len})")
            }
            ArgFault::ReadOnly(j) => write!(f, "argument {j} is read-only"),
        }
    }
}

/// Typed access to the argument slots of one kernel invocation.
///
/// Argument indices follow the stage's argument list. Input slots of window
/// and group stages expose the whole window or group; everything else exposes
/// one element, except scalars (whole buffer) and reduction outputs (the
/// accumulator). Faulting accesses read as zero and are reported after the
/// invocation returns.
pub struct Args<'a> {
    mem: &'a mut [u8],
    slots: &'a [Slot],
    fault: Cell<Option<ArgFault>>,
}

impl<'a> Args<'a> {
    pub fn new(mem: &'a mut [u8], slots: &'a [Slot]) -> Self {
        Self {
            mem,
            slots,
            fault: Cell::new(None),
        }
    }

    fn record(&self, fault: ArgFault) {
        let prev = self.fault.take();
        self.fault.set(Some(prev.unwrap_or(fault)));
    }

    pub fn take_fault(&mut self) -> Option<ArgFault> {
        self.fault.take()
    }

    pub fn arg_count(&self) -> usize {
        self.slots.len()
    }

    /// Number of elements visible through argument `arg`.
    pub fn len(&self, arg: usize) -> usize {
        self.slots.get(arg).map_or(0, |s| s.len)
    }

    pub fn is_empty(&self, arg: usize) -> bool {
        self.len(arg) == 0
    }

    fn locate<T: Element>(&self, arg: usize, index: usize) -> Option<usize> {
        let Some(slot) = self.slots.get(arg) else {
            self.record(ArgFault::NoSuchArg(arg));
            return None;
        };
        if slot.size != T::SIZE {
            self.record(ArgFault::SizeMismatch {
                arg,
                expected: slot.size,
                got: T::SIZE,
            });
            return None;
        }
        if index >= slot.len {
            self.record(ArgFault::OutOfRange {
                arg,
                index,
                len: slot.len,
            });
            return None;
        }
        Some(slot.offset + index * slot.size)
    }

    pub fn get<T: Element>(&self, arg: usize) -> T {
        self.at(arg, 0)
    }

    pub fn at<T: Element>(&self, arg: usize, index: usize) -> T {
        match self.locate::<T>(arg, index) {
            Some(off) => T::read_le(&self.mem[off..]),
            None => T::default(),
        }
    }

    pub fn set<T: Element>(&mut self, arg: usize, value: T) {
        self.set_at(arg, 0, value)
    }

    pub fn set_at<T: Element>(&mut self, arg: usize, index: usize, value: T) {
        if let Some(slot) = self.slots.get(arg) {
            if !slot.writable {
                self.record(ArgFault::ReadOnly(arg));
                return;
            }
        }
        if let Some(off) = self.locate::<T>(arg, index) {
            value.write_le(&mut self.mem[off..]);
        }
    }

    /// Raw bytes of argument `arg`.
    pub fn bytes(&self, arg: usize) -> &[u8] {
        match self.slots.get(arg) {
            Some(s) => &self.mem[s.offset..s.offset + s.len * s.size],
            None => {
                self.record(ArgFault::NoSuchArg(arg));
                &[]
            }
        }
    }
}

/// A user kernel: the per-invocation function, an optional keep predicate for
/// filter-bearing patterns, and a modeled cost.
#[derive(Clone)]
pub struct KernelSpec {
    pub kernel_id: String,
    pub apply: ApplyFn,
    pub predicate: Option<PredicateFn>,
    pub cost_hint: Option<u32>,
}

impl KernelSpec {
    pub fn new(id: impl Into<String>, apply: impl Fn(&mut Args<'_>) + Send + Sync + 'static) -> Self {
        Self {
            kernel_id: id.into(),
            apply: Arc::new(apply),
            predicate: None,
            cost_hint: None,
        }
    }

    /// A filter kernel that copies the head of its first input to argument 0
    /// and keeps it when `predicate` holds. Argument 0 must be the output.
    pub fn select(
        id: impl Into<String>,
        predicate: impl Fn(&Args<'_>) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self::new(id, copy_head).with_predicate(predicate)
    }

    pub fn with_predicate(mut self, predicate: impl Fn(&Args<'_>) -> bool + Send + Sync + 'static) -> Self {
        self.predicate = Some(Arc::new(predicate));
        self
    }

    pub fn with_cost(mut self, instructions: u32) -> Self {
        self.cost_hint = Some(instructions);
        self
    }

    pub fn cost(&self) -> u32 {
        self.cost_hint.unwrap_or(DEFAULT_COST_HINT)
    }
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("kernel_id", &self.kernel_id)
            .field("predicate", &self.predicate.is_some())
            .field("cost_hint", &self.cost_hint)
            .finish()
    }
}

/// Copies the first element of argument 1 into argument 0, byte for byte.
fn copy_head(args: &mut Args<'_>) {
    let (Some(dst), Some(src)) = (args.slots.first().copied(), args.slots.get(1).copied()) else {
        args.record(ArgFault::NoSuchArg(1));
        return;
    };
    if !dst.writable {
        args.record(ArgFault::ReadOnly(0));
        return;
    }
    if dst.size != src.size {
        args.record(ArgFault::SizeMismatch {
            arg: 0,
            expected: dst.size,
            got: src.size,
        });
        return;
    }
    if src.len == 0 || dst.len == 0 {
        args.record(ArgFault::OutOfRange {
            arg: 1,
            index: 0,
            len: src.len,
        });
        return;
    }
    args.mem.copy_within(src.offset..src.offset + src.size, dst.offset);
}
