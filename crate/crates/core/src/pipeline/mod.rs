//! Pipelines of pattern stages: construction-time chain checks, buffer
//! domains, splitting into device-executable sub-pipelines and the host
//! composition used as a reference.

mod full;
mod oracle;
mod stage;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::buffers::{BufferId, HostBuffers};
use crate::hostrt::{self, ExecReport, HostError};
use crate::patterns::{ArgRole, ElemType, PatternError, PatternKind};
use crate::planner::PlanError;
use crate::codegen::{self, DeviceProgram};
use crate::simdev::{Device, DeviceConfig, DeviceError};

pub use full::{split_into_subpipelines, PipelineFull};
pub use oracle::{host_reference, run_stages_host};
pub use stage::StageSpec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Host(#[from] HostError),
    #[error("buffer {buffer} produced by stage {producer_stage} cannot feed a {consumer_kind} stage on the device")]
    InvalidChain {
        buffer: BufferId,
        producer_stage: usize,
        consumer_kind: PatternKind,
    },
    #[error("buffer {buffer}: {reason}")]
    LengthMismatch { buffer: BufferId, reason: String },
    #[error("buffer {0} is not produced by this pipeline")]
    UnknownBuffer(BufferId),
    #[error("buffer {0} is not present on the host")]
    MissingBuffer(BufferId),
    #[error("pipeline already executed")]
    AlreadyExecuted,
    #[error("pipeline not executed yet")]
    NotExecuted,
    #[error("buffer {0} was not fetched")]
    NotFetched(BufferId),
    #[error("buffer {buffer} already has a producer before stage {stage}")]
    DuplicateProducer { buffer: BufferId, stage: usize },
    #[error("buffer {buffer} holds {expected}, stage binds {got}")]
    TypeMismatch {
        buffer: BufferId,
        expected: String,
        got: String,
    },
    #[error("buffer {buffer} used both as a scalar and as a vector")]
    RoleConflict { buffer: BufferId },
    #[error("invalid overlap: {reason}")]
    InvalidOverlap { reason: &'static str },
}

/// Which elements of the base index space a buffer's elements stand for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    /// Base elements per buffer element.
    pub scale: usize,
    /// Stage whose filter compacted the buffer.
    pub filter: Option<usize>,
    /// A window without overlap shortened it.
    pub truncated: bool,
    pub reduced: bool,
}

impl Domain {
    pub const BASE: Domain = Domain {
        scale: 1,
        filter: None,
        truncated: false,
        reduced: false,
    };
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct BufInfo {
    pub elem: ElemType,
    pub scalar: bool,
    pub domain: Domain,
    pub producer: Option<usize>,
    /// Lookahead appended per DPU, and where it comes from: an overlap
    /// buffer and byte offset, or zero fill.
    pub ext: usize,
    pub ext_src: Option<Option<(BufferId, usize)>>,
}

/// Producer/consumer edges between stages.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainGraph {
    pub producer: BTreeMap<BufferId, usize>,
    pub consumers: BTreeMap<BufferId, Vec<usize>>,
}

/// A pipeline whose stages all run on the device in one program.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub(crate) length: usize,
    pub(crate) stages: Vec<StageSpec>,
    pub(crate) fetch_set: BTreeSet<BufferId>,
    pub(crate) executed: bool,
    pub(crate) graph: ChainGraph,
    pub(crate) info: BTreeMap<BufferId, BufInfo>,
    /// Input domain of each stage.
    pub(crate) stage_in: Vec<Domain>,
    /// Buffers read before any stage writes them, in first-use order.
    pub(crate) host_inputs: Vec<BufferId>,
    pub(crate) fetched: BTreeMap<BufferId, usize>,
}

impl Pipeline {
    pub fn new(length: usize) -> Self {
        Self {
            length,
            stages: Vec::new(),
            fetch_set: BTreeSet::new(),
            executed: false,
            graph: ChainGraph::default(),
            info: BTreeMap::new(),
            stage_in: Vec::new(),
            host_inputs: Vec::new(),
            fetched: BTreeMap::new(),
        }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn graph(&self) -> &ChainGraph {
        &self.graph
    }

    pub fn fetch_set(&self) -> &BTreeSet<BufferId> {
        &self.fetch_set
    }

    pub fn domain(&self, b: BufferId) -> Option<Domain> {
        self.info.get(&b).map(|i| i.domain)
    }

    pub(crate) fn set_length(&mut self, n: usize) {
        self.length = n;
    }

    /// Whether `stage` would be accepted, without adding it.
    pub fn check_stage(&self, stage: &StageSpec) -> Result<(), PipelineError> {
        self.clone().add_stage(stage.clone())
    }

    pub fn add_stage(&mut self, s: StageSpec) -> Result<(), PipelineError> {
        if self.executed {
            return Err(PipelineError::AlreadyExecuted);
        }
        s.check()?;
        let idx = self.stages.len();

        for a in &s.args {
            if !matches!(a.role, ArgRole::Input | ArgRole::InOut | ArgRole::Scalar) {
                continue;
            }
            let Some(&p) = self.graph.producer.get(&a.buffer) else {
                continue;
            };
            let d = self.info[&a.buffer].domain;
            let cut = self.stages[p].kind.is_reduce()
                || d.reduced
                || (d.filter.is_some() && !matches!(s.kind, PatternKind::Filter | PatternKind::Reduce))
                || d.truncated
                || s.kind.is_window()
                || a.role == ArgRole::Scalar;
            if cut {
                return Err(PipelineError::InvalidChain {
                    buffer: a.buffer,
                    producer_stage: p,
                    consumer_kind: s.kind,
                });
            }
        }

        for a in s.args.iter().filter(|a| a.role != ArgRole::Combine) {
            if let Some(info) = self.info.get(&a.buffer) {
                if info.elem != a.elem {
                    return Err(PipelineError::TypeMismatch {
                        buffer: a.buffer,
                        expected: info.elem.name.clone(),
                        got: a.elem.name.clone(),
                    });
                }
                if info.scalar != (a.role == ArgRole::Scalar) {
                    return Err(PipelineError::RoleConflict { buffer: a.buffer });
                }
            }
            if matches!(a.role, ArgRole::Output | ArgRole::ReduceOut) && self.info.contains_key(&a.buffer) {
                return Err(PipelineError::DuplicateProducer {
                    buffer: a.buffer,
                    stage: idx,
                });
            }
        }
        if s.overlap.is_some_and(|o| s.args.iter().any(|a| a.buffer == o)) {
            return Err(PipelineError::InvalidOverlap {
                reason: "overlap vector is also a stage argument",
            });
        }

        let mut din: Option<Domain> = None;
        for a in s.args.iter().filter(|a| a.role.reads_vector()) {
            let d = self.info.get(&a.buffer).map_or(Domain::BASE, |i| i.domain);
            match din {
                None => din = Some(d),
                Some(prev) if prev != d => {
                    return Err(PipelineError::LengthMismatch {
                        buffer: a.buffer,
                        reason: format!("stage {idx} mixes inputs of different lengths"),
                    })
                }
                _ => {}
            }
        }
        let din = din.unwrap_or(Domain::BASE);
        let mut dout = din;
        if s.kind.is_group() {
            dout.scale *= s.group.unwrap_or(1);
        }
        if s.kind.is_window() && s.overlap.is_none() {
            dout.truncated = true;
        }
        if s.kind.is_filter() {
            dout.filter = Some(idx);
        }

        let la = s.lookahead();
        let mut info = self.info.clone();
        let mut host_inputs = self.host_inputs.clone();
        for (j, a) in s.args.iter().enumerate() {
            let fresh = |scalar, domain, producer| BufInfo {
                elem: a.elem.clone(),
                scalar,
                domain,
                producer,
                ext: 0,
                ext_src: None,
            };
            match a.role {
                ArgRole::Input | ArgRole::InOut | ArgRole::Scalar => {
                    let scalar = a.role == ArgRole::Scalar;
                    if !info.contains_key(&a.buffer) {
                        host_inputs.push(a.buffer);
                        info.insert(a.buffer, fresh(scalar, Domain::BASE, None));
                    }
                    let e = info.get_mut(&a.buffer).expect("inserted");
                    if a.role == ArgRole::Input && s.kind.is_window() {
                        let src = s.overlap.map(|o| (o, s.overlap_offset(j)));
                        match e.ext_src {
                            Some(prev) if prev != src || e.ext != la => {
                                return Err(PipelineError::InvalidOverlap {
                                    reason: "a buffer read by two windows needs one lookahead and one overlap source",
                                })
                            }
                            _ => {}
                        }
                        e.ext = la;
                        e.ext_src = Some(src);
                    }
                    if a.role == ArgRole::InOut {
                        e.domain = dout;
                        e.producer = Some(idx);
                    }
                }
                ArgRole::Output => {
                    info.insert(a.buffer, fresh(false, dout, Some(idx)));
                }
                ArgRole::ReduceOut => {
                    let d = Domain {
                        reduced: true,
                        ..Domain::BASE
                    };
                    info.insert(a.buffer, fresh(false, d, Some(idx)));
                }
                ArgRole::Combine => {}
            }
        }
        for a in &s.args {
            match a.role {
                ArgRole::Input | ArgRole::Scalar => {
                    self.graph.consumers.entry(a.buffer).or_default().push(idx);
                }
                ArgRole::InOut => {
                    self.graph.consumers.entry(a.buffer).or_default().push(idx);
                    self.graph.producer.insert(a.buffer, idx);
                }
                ArgRole::Output | ArgRole::ReduceOut => {
                    self.graph.producer.insert(a.buffer, idx);
                }
                ArgRole::Combine => {}
            }
        }
        self.info = info;
        self.host_inputs = host_inputs;
        self.stage_in.push(din);
        self.stages.push(s);
        Ok(())
    }

    /// Marks a produced buffer for download after execution.
    pub fn fetch(&mut self, b: BufferId) -> Result<(), PipelineError> {
        if self.executed {
            return Err(PipelineError::AlreadyExecuted);
        }
        if !self.graph.producer.contains_key(&b) {
            return Err(PipelineError::UnknownBuffer(b));
        }
        self.fetch_set.insert(b);
        Ok(())
    }

    /// The device program this pipeline would run with `bufs` on `device`.
    pub fn compile(
        &self,
        bufs: &HostBuffers,
        device: &DeviceConfig,
        cpu_ratio: f64,
    ) -> Result<DeviceProgram, PipelineError> {
        Ok(codegen::generate(self, bufs, device, cpu_ratio)?.0)
    }

    pub fn execute(&mut self, dev: &mut Device, bufs: &mut HostBuffers) -> Result<ExecReport, PipelineError> {
        hostrt::execute_pipeline(self, dev, bufs)
    }

    /// Length of a fetched buffer after execution.
    pub fn get_length(&self, b: BufferId) -> Result<usize, PipelineError> {
        if !self.executed {
            return Err(PipelineError::NotExecuted);
        }
        self.fetched.get(&b).copied().ok_or(PipelineError::NotFetched(b))
    }
}
