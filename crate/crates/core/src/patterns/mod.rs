//! The nine data-parallel pattern kinds, argument roles and the length
//! algebra every other module builds on.

mod elem;
mod host;
mod kernel;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffers::BufferId;

pub use elem::{from_bytes, to_bytes, ElemType, Element};
pub(crate) use elem::{lcm, pad8};
pub use host::{apply_pattern_host, partial_combiner, PartialCombiner, PatternParams};
pub use kernel::{
    ApplyFn, ArgFault, Args, CombineFn, KernelSpec, PredicateFn, Slot, DEFAULT_COST_HINT,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("group size {g} does not divide length {n}")]
    GroupNotDivisible { n: usize, g: usize },
    #[error("window extent {w} exceeds length {n} and no overlap vector was provided")]
    WindowTooLarge { n: usize, w: usize },
    #[error("{kind} stage needs a {param} parameter >= 1")]
    MissingParameter { kind: PatternKind, param: &'static str },
    #[error("argument {index}: {reason}")]
    RoleViolation { index: usize, reason: &'static str },
    #[error("argument {arg} has {got} elements, expected {expected}")]
    ArgLength { arg: usize, expected: usize, got: usize },
    #[error("overlap vector holds {got} bytes, expected {expected}")]
    OverlapLength { expected: usize, got: usize },
    #[error("kernel '{kernel}' faulted: {fault}")]
    KernelFault { kernel: String, fault: ArgFault },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternKind {
    Map,
    Reduce,
    Filter,
    Window,
    Group,
    WindowGroup,
    WindowFilter,
    GroupFilter,
    WindowGroupFilter,
}

impl PatternKind {
    pub const ALL: [PatternKind; 9] = [
        PatternKind::Map,
        PatternKind::Reduce,
        PatternKind::Filter,
        PatternKind::Window,
        PatternKind::Group,
        PatternKind::WindowGroup,
        PatternKind::WindowFilter,
        PatternKind::GroupFilter,
        PatternKind::WindowGroupFilter,
    ];

    pub fn is_window(self) -> bool {
        use PatternKind::*;
        matches!(self, Window | WindowGroup | WindowFilter | WindowGroupFilter)
    }

    pub fn is_group(self) -> bool {
        use PatternKind::*;
        matches!(self, Group | WindowGroup | GroupFilter | WindowGroupFilter)
    }

    pub fn is_filter(self) -> bool {
        use PatternKind::*;
        matches!(self, Filter | WindowFilter | GroupFilter | WindowGroupFilter)
    }

    pub fn is_reduce(self) -> bool {
        self == PatternKind::Reduce
    }

    /// The same kind with the filter component removed.
    pub fn without_filter(self) -> PatternKind {
        use PatternKind::*;
        match self {
            Filter => Map,
            WindowFilter => Window,
            GroupFilter => Group,
            WindowGroupFilter => WindowGroup,
            other => other,
        }
    }

    /// Elements read past the invocation's own range.
    ///
    /// A window of extent `w` looks `w - 1` elements ahead; a window+group
    /// invocation reads `w` elements past the end of its group.
    pub fn lookahead(self, w: usize) -> usize {
        use PatternKind::*;
        match self {
            Window | WindowFilter => w.saturating_sub(1),
            WindowGroup | WindowGroupFilter => w,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        use PatternKind::*;
        match self {
            Map => "map",
            Reduce => "reduce",
            Filter => "filter",
            Window => "window",
            Group => "group",
            WindowGroup => "window_group",
            WindowFilter => "window_filter",
            GroupFilter => "group_filter",
            WindowGroupFilter => "window_group_filter",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown pattern kind '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArgRole {
    Input,
    Output,
    InOut,
    Scalar,
    ReduceOut,
    Combine,
}

impl ArgRole {
    pub fn name(self) -> &'static str {
        match self {
            ArgRole::Input => "input",
            ArgRole::Output => "output",
            ArgRole::InOut => "inout",
            ArgRole::Scalar => "scalar",
            ArgRole::ReduceOut => "reduce_out",
            ArgRole::Combine => "combine",
        }
    }

    pub fn reads_vector(self) -> bool {
        matches!(self, ArgRole::Input | ArgRole::InOut)
    }

    pub fn writes(self) -> bool {
        matches!(self, ArgRole::Output | ArgRole::InOut | ArgRole::ReduceOut)
    }

    /// Roles that take part in per-element length accounting.
    pub fn is_per_element(self) -> bool {
        matches!(self, ArgRole::Input | ArgRole::Output | ArgRole::InOut)
    }
}

impl fmt::Display for ArgRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArgRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ArgRole::*;
        [Input, Output, InOut, Scalar, ReduceOut, Combine]
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown argument role '{s}'"))
    }
}

/// One argument of a stage: its role, element type and the host buffer it binds.
#[derive(Clone)]
pub struct ArgSpec {
    pub role: ArgRole,
    pub elem: ElemType,
    pub buffer: BufferId,
    /// Accumulator width in elements; only set for `ReduceOut`.
    pub reduce_width: Option<usize>,
    /// Identity value of a reduction accumulator (zeroes when absent).
    pub identity: Option<Vec<u8>>,
    /// Partial-result combiner; only set for `Combine`.
    pub combiner: Option<CombineFn>,
}

impl ArgSpec {
    fn with_role<T: Element>(role: ArgRole, buffer: BufferId) -> Self {
        Self {
            role,
            elem: ElemType::of::<T>(),
            buffer,
            reduce_width: None,
            identity: None,
            combiner: None,
        }
    }

    pub fn input<T: Element>(buffer: BufferId) -> Self {
        Self::with_role::<T>(ArgRole::Input, buffer)
    }

    pub fn output<T: Element>(buffer: BufferId) -> Self {
        Self::with_role::<T>(ArgRole::Output, buffer)
    }

    pub fn inout<T: Element>(buffer: BufferId) -> Self {
        Self::with_role::<T>(ArgRole::InOut, buffer)
    }

    pub fn scalar<T: Element>(buffer: BufferId) -> Self {
        Self::with_role::<T>(ArgRole::Scalar, buffer)
    }

    pub fn reduce_out<T: Element>(buffer: BufferId, width: usize) -> Self {
        Self {
            reduce_width: Some(width),
            ..Self::with_role::<T>(ArgRole::ReduceOut, buffer)
        }
    }

    /// A combiner for the reduction accumulator bound to `buffer`.
    pub fn combine<T: Element>(
        buffer: BufferId,
        f: impl Fn(&mut Args<'_>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            combiner: Some(Arc::new(f)),
            ..Self::with_role::<T>(ArgRole::Combine, buffer)
        }
    }

    pub fn with_identity<T: Element>(mut self, identity: &[T]) -> Self {
        self.identity = Some(to_bytes(identity));
        self
    }

    pub fn width(&self) -> usize {
        self.reduce_width.unwrap_or(1)
    }

    /// Identity bytes for a reduction accumulator.
    pub fn identity_bytes(&self) -> Vec<u8> {
        let len = self.width() * self.elem.size;
        match &self.identity {
            Some(id) if id.len() == len => id.clone(),
            _ => vec![0u8; len],
        }
    }
}

impl fmt::Debug for ArgSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ArgSpec")
            .field("role", &self.role)
            .field("elem", &self.elem.name)
            .field("buffer", &self.buffer)
            .field("reduce_width", &self.reduce_width)
            .finish()
    }
}

/// Result length of a pattern over `n` input elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputLength {
    Exact(usize),
    /// Filter-bearing kinds: known only after execution.
    DataDependent { upper_bound: usize },
    /// One logical reduction result.
    Reduced,
}

impl OutputLength {
    pub fn bound(self) -> usize {
        match self {
            OutputLength::Exact(n) | OutputLength::DataDependent { upper_bound: n } => n,
            OutputLength::Reduced => 1,
        }
    }
}

pub fn output_length(
    kind: PatternKind,
    n: usize,
    w: Option<usize>,
    g: Option<usize>,
    overlap_provided: bool,
) -> Result<OutputLength, PatternError> {
    if kind.is_reduce() {
        return Ok(OutputLength::Reduced);
    }
    let w = if kind.is_window() {
        match w {
            Some(w) if w >= 1 => w,
            _ => return Err(PatternError::MissingParameter { kind, param: "window" }),
        }
    } else {
        0
    };
    let g = if kind.is_group() {
        match g {
            Some(g) if g >= 1 => g,
            _ => return Err(PatternError::MissingParameter { kind, param: "group" }),
        }
    } else {
        1
    };
    if n % g != 0 {
        return Err(PatternError::GroupNotDivisible { n, g });
    }
    let base = match kind.without_filter() {
        PatternKind::Map => n,
        PatternKind::Group => n / g,
        PatternKind::Window | PatternKind::WindowGroup => {
            if overlap_provided {
                n / g
            } else if w > n {
                return Err(PatternError::WindowTooLarge { n, w });
            } else {
                (n - kind.lookahead(w)) / g
            }
        }
        _ => unreachable!("filter component removed"),
    };
    Ok(if kind.is_filter() {
        OutputLength::DataDependent { upper_bound: base }
    } else {
        OutputLength::Exact(base)
    })
}

pub fn validate_stage_args(
    kind: PatternKind,
    kernel: &KernelSpec,
    args: &[ArgSpec],
) -> Result<(), PatternError> {
    let violation = |index, reason| Err(PatternError::RoleViolation { index, reason });
    if args.is_empty() {
        return violation(0, "stage has no arguments");
    }
    if !args.iter().any(|a| a.role.reads_vector()) {
        return violation(0, "stage needs at least one input or inout vector");
    }
    for (i, a) in args.iter().enumerate() {
        if a.role == ArgRole::Combine {
            continue;
        }
        if args[..i]
            .iter()
            .any(|b| b.role != ArgRole::Combine && b.buffer == a.buffer)
        {
            return violation(i, "buffer bound twice in one stage; use an inout argument");
        }
    }

    if kind.is_reduce() {
        let outs: Vec<usize> = positions(args, ArgRole::ReduceOut);
        let combines: Vec<usize> = positions(args, ArgRole::Combine);
        if outs.len() != 1 {
            return violation(outs.get(1).copied().unwrap_or(0), "reduce needs exactly one reduce_out");
        }
        if combines.len() > 1 {
            return violation(combines[1], "reduce accepts at most one combine");
        }
        if let Some(i) = args
            .iter()
            .position(|a| matches!(a.role, ArgRole::Output | ArgRole::InOut))
        {
            return violation(i, "reduce stages write only their reduce_out");
        }
        let out = &args[outs[0]];
        if out.width() == 0 {
            return violation(outs[0], "reduce_out width must be >= 1");
        }
        match combines.first() {
            Some(&c) => {
                if args[c].buffer != out.buffer || args[c].elem != out.elem {
                    return violation(c, "combine must target the reduce_out buffer");
                }
                if args[c].combiner.is_none() {
                    return violation(c, "combine argument carries no function");
                }
            }
            None => {
                let inputs = positions(args, ArgRole::Input);
                let scalars = positions(args, ArgRole::Scalar);
                if out.width() != 1
                    || inputs.len() != 1
                    || !scalars.is_empty()
                    || args[inputs[0]].elem != out.elem
                {
                    return violation(
                        outs[0],
                        "without a combine argument the reduction must fold one input of its own type",
                    );
                }
            }
        }
        return Ok(());
    }

    if let Some(i) = args
        .iter()
        .position(|a| matches!(a.role, ArgRole::ReduceOut | ArgRole::Combine))
    {
        return violation(i, "reduce_out/combine only allowed on reduce stages");
    }
    if !args.iter().any(|a| matches!(a.role, ArgRole::Output | ArgRole::InOut)) {
        return violation(0, "stage produces no output");
    }
    if kind.is_window() || kind.is_group() {
        if let Some(i) = args.iter().position(|a| a.role == ArgRole::InOut) {
            return violation(i, "inout arguments are limited to map and filter stages");
        }
    }
    if kind.is_filter() && kernel.predicate.is_none() {
        return violation(0, "filter-bearing stage needs a predicate");
    }
    Ok(())
}

fn positions(args: &[ArgSpec], role: ArgRole) -> Vec<usize> {
    args.iter()
        .enumerate()
        .filter(|(_, a)| a.role == role)
        .map(|(i, _)| i)
        .collect()
}
