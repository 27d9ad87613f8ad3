use crate::buffers::{BufferId, HostBuffers};
use crate::patterns::{validate_stage_args, ArgRole, ArgSpec, KernelSpec, PatternError, PatternKind, PatternParams};

use super::PipelineError;

/// One stage: a pattern kind, its kernel and the buffers it binds.
#[derive(Clone, Debug)]
pub struct StageSpec {
    pub kind: PatternKind,
    pub kernel: KernelSpec,
    pub args: Vec<ArgSpec>,
    pub window: Option<usize>,
    pub group: Option<usize>,
    /// Host buffer holding the lookahead elements appended past the end of
    /// each window input, concatenated in argument order.
    pub overlap: Option<BufferId>,
}

impl StageSpec {
    pub fn new(kind: PatternKind, kernel: KernelSpec, args: Vec<ArgSpec>) -> Self {
        Self {
            kind,
            kernel,
            args,
            window: None,
            group: None,
            overlap: None,
        }
    }

    pub fn map(kernel: KernelSpec, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::Map, kernel, args)
    }

    pub fn reduce(kernel: KernelSpec, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::Reduce, kernel, args)
    }

    pub fn filter(kernel: KernelSpec, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::Filter, kernel, args)
    }

    pub fn window(kernel: KernelSpec, w: usize, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::Window, kernel, args).with_window(w)
    }

    pub fn group(kernel: KernelSpec, g: usize, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::Group, kernel, args).with_group(g)
    }

    pub fn window_group(kernel: KernelSpec, w: usize, g: usize, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::WindowGroup, kernel, args)
            .with_window(w)
            .with_group(g)
    }

    pub fn window_filter(kernel: KernelSpec, w: usize, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::WindowFilter, kernel, args).with_window(w)
    }

    pub fn group_filter(kernel: KernelSpec, g: usize, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::GroupFilter, kernel, args).with_group(g)
    }

    pub fn window_group_filter(kernel: KernelSpec, w: usize, g: usize, args: Vec<ArgSpec>) -> Self {
        Self::new(PatternKind::WindowGroupFilter, kernel, args)
            .with_window(w)
            .with_group(g)
    }

    pub fn with_window(mut self, w: usize) -> Self {
        self.window = Some(w);
        self
    }

    pub fn with_group(mut self, g: usize) -> Self {
        self.group = Some(g);
        self
    }

    pub fn with_overlap(mut self, buffer: BufferId) -> Self {
        self.overlap = Some(buffer);
        self
    }

    pub fn lookahead(&self) -> usize {
        self.kind.lookahead(self.window.unwrap_or(0))
    }

    /// Argument and parameter checks that do not depend on other stages.
    pub fn check(&self) -> Result<(), PipelineError> {
        validate_stage_args(self.kind, &self.kernel, &self.args)?;
        if self.kind.is_window() && !self.window.is_some_and(|w| w >= 1) {
            return Err(PatternError::MissingParameter {
                kind: self.kind,
                param: "window",
            }
            .into());
        }
        if self.kind.is_group() && !self.group.is_some_and(|g| g >= 1) {
            return Err(PatternError::MissingParameter {
                kind: self.kind,
                param: "group",
            }
            .into());
        }
        if self.overlap.is_some() && !self.kind.is_window() {
            return Err(PipelineError::InvalidOverlap {
                reason: "overlap vector on a stage without a window",
            });
        }
        Ok(())
    }

    /// Host-side parameters, reading the overlap vector from `bufs`.
    pub fn params(&self, bufs: &HostBuffers) -> Result<PatternParams, PipelineError> {
        let mut p = PatternParams::new(self.window, self.group);
        if let Some(ov) = self.overlap {
            let bytes = bufs.bytes(ov).ok_or(PipelineError::MissingBuffer(ov))?;
            p.overlap = Some(bytes.to_vec());
        }
        Ok(p)
    }

    /// Byte offset of argument `j`'s lookahead inside the overlap vector.
    pub fn overlap_offset(&self, j: usize) -> usize {
        let la = self.lookahead();
        self.args[..j]
            .iter()
            .filter(|a| a.role == ArgRole::Input)
            .map(|a| la * a.elem.size)
            .sum()
    }

    pub fn overlap_bytes(&self) -> usize {
        self.overlap_offset(self.args.len())
    }
}
