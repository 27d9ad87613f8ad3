use std::collections::{BTreeMap, BTreeSet};

use crate::buffers::{BufferId, HostBuffers};
use crate::hostrt::{self, ExecReport};
use crate::patterns::ArgRole;
use crate::simdev::Device;

use super::{Pipeline, PipelineError, StageSpec};

/// Cuts `stages` into device-executable pipelines, starting a new one at
/// every stage the chain rule rejects. Buffers crossing a cut and buffers in
/// `fetch` are fetched by the pipeline that last writes them.
pub fn split_into_subpipelines(
    length: usize,
    stages: &[StageSpec],
    fetch: &BTreeSet<BufferId>,
) -> Result<Vec<Pipeline>, PipelineError> {
    let mut subs: Vec<Pipeline> = Vec::new();
    let mut cur = Pipeline::new(length);
    for s in stages {
        match cur.add_stage(s.clone()) {
            Ok(()) => {}
            Err(PipelineError::InvalidChain { .. }) if !cur.stages.is_empty() => {
                let done = std::mem::replace(&mut cur, Pipeline::new(0));
                subs.push(done);
                cur.add_stage(s.clone())?;
            }
            Err(e) => return Err(e),
        }
    }
    if !cur.stages.is_empty() {
        subs.push(cur);
    }

    for i in 0..subs.len() {
        let later_reads: BTreeSet<BufferId> = subs[i + 1..]
            .iter()
            .flat_map(|p| p.stages.iter())
            .flat_map(|s| s.args.iter().map(|a| a.buffer).chain(s.overlap))
            .collect();
        let produced: Vec<BufferId> = subs[i].graph.producer.keys().copied().collect();
        for b in produced {
            if fetch.contains(&b) || later_reads.contains(&b) {
                subs[i].fetch(b)?;
            }
        }
    }
    Ok(subs)
}

/// A pipeline of any stages; those that cannot chain on the device run as
/// consecutive device pipelines with a host round trip in between.
#[derive(Clone, Debug)]
pub struct PipelineFull {
    length: usize,
    stages: Vec<StageSpec>,
    fetch_set: BTreeSet<BufferId>,
    executed: bool,
    fetched: BTreeMap<BufferId, usize>,
}

impl PipelineFull {
    pub fn new(length: usize) -> Self {
        Self {
            length,
            stages: Vec::new(),
            fetch_set: BTreeSet::new(),
            executed: false,
            fetched: BTreeMap::new(),
        }
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn add_stage(&mut self, s: StageSpec) -> Result<(), PipelineError> {
        if self.executed {
            return Err(PipelineError::AlreadyExecuted);
        }
        s.check()?;
        for a in s
            .args
            .iter()
            .filter(|a| matches!(a.role, ArgRole::Output | ArgRole::ReduceOut))
        {
            let seen = self
                .stages
                .iter()
                .flat_map(|t| t.args.iter())
                .any(|b| b.buffer == a.buffer);
            if seen {
                return Err(PipelineError::DuplicateProducer {
                    buffer: a.buffer,
                    stage: self.stages.len(),
                });
            }
        }
        self.stages.push(s);
        Ok(())
    }

    pub fn fetch(&mut self, b: BufferId) -> Result<(), PipelineError> {
        if self.executed {
            return Err(PipelineError::AlreadyExecuted);
        }
        let produced = self
            .stages
            .iter()
            .flat_map(|s| s.args.iter())
            .any(|a| a.buffer == b && a.role.writes() && a.role != ArgRole::Combine);
        if !produced {
            return Err(PipelineError::UnknownBuffer(b));
        }
        self.fetch_set.insert(b);
        Ok(())
    }

    pub fn split(&self) -> Result<Vec<Pipeline>, PipelineError> {
        split_into_subpipelines(self.length, &self.stages, &self.fetch_set)
    }

    pub fn execute(&mut self, dev: &mut Device, bufs: &mut HostBuffers) -> Result<ExecReport, PipelineError> {
        if self.executed {
            return Err(PipelineError::AlreadyExecuted);
        }
        let subs = self.split()?;
        self.executed = true;
        let report = hostrt::run_subpipeline_chain(subs, dev, bufs)?;
        self.fetched = report
            .fetched
            .iter()
            .filter(|(b, _)| self.fetch_set.contains(b))
            .map(|(&b, &n)| (b, n))
            .collect();
        Ok(report)
    }

    pub fn get_length(&self, b: BufferId) -> Result<usize, PipelineError> {
        if !self.executed {
            return Err(PipelineError::NotExecuted);
        }
        self.fetched.get(&b).copied().ok_or(PipelineError::NotFetched(b))
    }
}
