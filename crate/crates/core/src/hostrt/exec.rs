use std::collections::BTreeMap;

use crate::buffers::{BufferId, HostBuffers};
use crate::codegen::{self, DeviceProgram, PostDirective};
use crate::patterns::{output_length, pad8, partial_combiner, ArgRole, PatternError};
use crate::pipeline::{Pipeline, PipelineError};
use crate::planner::{BufferClass, BufferLayout, LayoutPlan};
use crate::simdev::{CostModel, Device, DmaStats, RunOptions, XferMode};

use super::{
    combine_reduce_partials, compact_filter_output, run_cpu_leftover, ExecReport, GatherBlock, LeftoverResult,
    Timing,
};

fn check_host_inputs(p: &Pipeline, bufs: &HostBuffers) -> Result<(), PipelineError> {
    for &b in &p.host_inputs {
        let info = &p.info[&b];
        let host = bufs.get(b).ok_or(PipelineError::MissingBuffer(b))?;
        if host.elem != info.elem {
            return Err(PipelineError::TypeMismatch {
                buffer: b,
                expected: host.elem.name.clone(),
                got: info.elem.name.clone(),
            });
        }
        if !info.scalar && host.len() != p.length {
            return Err(PipelineError::LengthMismatch {
                buffer: b,
                reason: format!("holds {} elements, pipeline length is {}", host.len(), p.length),
            });
        }
    }
    for s in &p.stages {
        if let Some(ov) = s.overlap {
            let got = bufs.bytes(ov).ok_or(PipelineError::MissingBuffer(ov))?.len();
            let expected = s.overlap_bytes();
            if got != expected {
                return Err(PatternError::OverlapLength { expected, got }.into());
            }
        }
        for a in s.args.iter().filter(|a| a.role == ArgRole::ReduceOut) {
            let n = bufs.len(a.buffer).unwrap_or(0);
            if n != 0 && n != a.width() {
                return Err(PipelineError::LengthMismatch {
                    buffer: a.buffer,
                    reason: format!("initial value has {n} elements, reduction width is {}", a.width()),
                });
            }
        }
    }
    for (i, s) in p.stages.iter().enumerate() {
        let din = p.stage_in[i];
        if din.filter.is_none() {
            output_length(s.kind, p.length / din.scale.max(1), s.window, s.group, s.overlap.is_some())?;
        }
    }
    Ok(())
}

/// Per-DPU slice of a host input for one round, with its lookahead.
fn input_payloads(
    p: &Pipeline,
    bufs: &HostBuffers,
    plan: &LayoutPlan,
    bl: &BufferLayout,
    round: usize,
) -> Vec<Vec<u8>> {
    let info = &p.info[&bl.id];
    let host = bufs.bytes(bl.id).expect("checked");
    let size = bl.elem.size;
    let n = p.length;
    let k = plan.per_dpu;
    let overlap = info.ext_src.flatten().and_then(|(o, off)| bufs.bytes(o).map(|v| &v[off..]));
    (0..plan.n_dpus)
        .map(|d| {
            let start = round * plan.elements_per_round + d * k;
            let mut v = Vec::with_capacity(bl.bytes);
            v.extend_from_slice(&host[start * size..(start + k) * size]);
            for idx in start + k..start + k + bl.ext {
                if idx < n {
                    v.extend_from_slice(&host[idx * size..(idx + 1) * size]);
                } else if let Some(ov) = overlap {
                    let at = (idx - n) * size;
                    v.extend_from_slice(&ov[at..at + size]);
                } else {
                    v.extend(std::iter::repeat_n(0, size));
                }
            }
            v.resize(bl.bytes, 0);
            v
        })
        .collect()
}

fn counts(raw: &[u8], tasklets: usize) -> Vec<usize> {
    (0..tasklets)
        .map(|t| u64::from_le_bytes(raw[8 * t..8 * t + 8].try_into().expect("8 bytes")) as usize)
        .collect()
}

fn gather(
    dev: &mut Device,
    plan: &LayoutPlan,
    bl: &BufferLayout,
    round: usize,
    mode: XferMode,
    out: &mut Vec<GatherBlock>,
) -> Result<f64, PipelineError> {
    let n = plan.n_dpus;
    let t_count = plan.tasklets;
    let size = bl.elem.size;
    let q = bl.scale.max(1);
    let k_out = plan.per_dpu / q;
    let block = |dpu, tasklet, valid_count, capacity, payload| GatherBlock {
        round,
        dpu,
        tasklet,
        buffer: bl.id,
        valid_count,
        capacity,
        payload,
    };

    let mut time = 0.0;
    let heads = match bl.header {
        Some(h) => {
            let (t, raw) = dev.download(mode, h, &vec![8 * t_count; n])?;
            time += t;
            raw.iter().map(|r| counts(r, t_count)).collect()
        }
        None => Vec::new(),
    };

    match bl.class {
        BufferClass::Vector if !bl.filtered => {
            let (t, data) = dev.download(mode, bl.mram, &vec![pad8(k_out * size); n])?;
            time += t;
            for (d, mut v) in data.into_iter().enumerate() {
                v.truncate(k_out * size);
                out.push(block(d, 0, k_out, k_out, v));
            }
        }
        BufferClass::Vector => {
            let ranges: Vec<(usize, usize)> = (0..t_count)
                .map(|t| {
                    let (s, e) = plan.tasklet_range(t);
                    (s / q, (e - s) / q)
                })
                .collect();
            if mode == XferMode::Serial {
                let segments: Vec<Vec<(usize, usize)>> = heads
                    .iter()
                    .map(|c: &Vec<usize>| {
                        ranges
                            .iter()
                            .zip(c)
                            .map(|(&(off, cap), &cnt)| (bl.mram + off * size, pad8(cnt.min(cap) * size)))
                            .collect()
                    })
                    .collect();
                let (t, data) = dev.download_segments(mode, &segments)?;
                time += t;
                for (d, bytes) in data.into_iter().enumerate() {
                    let mut at = 0;
                    for (tk, &(_, len)) in segments[d].iter().enumerate() {
                        let cap = ranges[tk].1;
                        let mut v = bytes[at..at + len].to_vec();
                        v.resize(cap * size, 0);
                        at += len;
                        out.push(block(d, tk, heads[d][tk], cap, v));
                    }
                }
            } else {
                let (t, data) = dev.download(mode, bl.mram, &vec![pad8(k_out * size); n])?;
                time += t;
                for (d, v) in data.iter().enumerate() {
                    for (tk, &(off, cap)) in ranges.iter().enumerate() {
                        let payload = v[off * size..(off + cap) * size].to_vec();
                        out.push(block(d, tk, heads[d][tk], cap, payload));
                    }
                }
            }
        }
        BufferClass::Reduce => {
            let (t, data) = dev.download(mode, bl.mram, &vec![bl.bytes; n])?;
            time += t;
            let slot = pad8(bl.len * size);
            for (d, v) in data.iter().enumerate() {
                for tk in 0..t_count {
                    let payload = v[tk * slot..tk * slot + bl.len * size].to_vec();
                    out.push(block(d, tk, heads[d][tk], bl.len, payload));
                }
            }
        }
        BufferClass::Scalar => {}
    }
    Ok(time)
}

struct DeviceRun {
    blocks: BTreeMap<BufferId, Vec<GatherBlock>>,
    invocations: u64,
    dma: DmaStats,
}

fn run_rounds(
    p: &Pipeline,
    bufs: &HostBuffers,
    dev: &mut Device,
    program: &DeviceProgram,
    opts: &RunOptions,
    timing: &mut Timing,
) -> Result<DeviceRun, PipelineError> {
    let plan = &program.layout;
    let inputs: Vec<&BufferLayout> = p
        .host_inputs
        .iter()
        .filter_map(|&b| plan.buffer(b))
        .filter(|b| b.class == BufferClass::Vector)
        .collect();
    let fetched: Vec<&BufferLayout> = plan
        .buffers
        .iter()
        .filter(|b| p.fetch_set.contains(&b.id))
        .collect();
    let mut run = DeviceRun {
        blocks: BTreeMap::new(),
        invocations: 0,
        dma: DmaStats::default(),
    };
    for round in 0..plan.nr_rounds {
        for bl in &inputs {
            let payloads = input_payloads(p, bufs, plan, bl, round);
            timing.cpu_to_dpu_ns += dev.upload(opts.upload, bl.mram, &payloads)?;
        }
        let stats = dev.run_round(program, &p.stages, round)?;
        timing.kernel_ns += stats.kernel_ns;
        run.invocations += stats.invocations;
        run.dma.merge(&stats.dma);
        for bl in &fetched {
            let out = run.blocks.entry(bl.id).or_default();
            timing.dpu_to_cpu_ns += gather(dev, plan, bl, round, opts.gather, out)?;
        }
    }
    Ok(run)
}

fn assemble(
    p: &Pipeline,
    bufs: &HostBuffers,
    program: &DeviceProgram,
    bl: &BufferLayout,
    blocks: Vec<GatherBlock>,
    tail: Option<&Vec<u8>>,
    cost: &CostModel,
    timing: &mut Timing,
) -> Result<(Vec<u8>, usize), PipelineError> {
    let size = bl.elem.size;
    match bl.class {
        BufferClass::Reduce => {
            let stage = &p.stages[p.info[&bl.id].producer.expect("reduce output has a producer")];
            let comb = partial_combiner(&stage.kernel, &stage.args)?;
            let mut partials: Vec<Vec<u8>> = blocks
                .into_iter()
                .filter(|b| b.valid_count > 0)
                .map(|b| b.payload)
                .collect();
            partials.extend(tail.cloned());
            let merges = partials.len();
            let tree = combine_reduce_partials(partials, |mut a, b| {
                comb.combine(&mut a, &b)?;
                Ok::<_, PatternError>(a)
            })?;
            let width = bl.len;
            let init = bufs
                .bytes(bl.id)
                .filter(|v| v.len() == width * size)
                .map(<[u8]>::to_vec);
            let value = match (init, tree) {
                (Some(mut i), Some(t)) => {
                    comb.combine(&mut i, &t)?;
                    i
                }
                (Some(i), None) => i,
                (None, Some(t)) => t,
                (None, None) => {
                    let a = stage
                        .args
                        .iter()
                        .find(|a| a.role == ArgRole::ReduceOut)
                        .expect("reduce output");
                    a.identity_bytes()
                }
            };
            timing.host_post_ns += cost.host_invocations_ns(merges);
            Ok((value, width))
        }
        _ if bl.filtered => {
            let (mut bytes, mut n) = compact_filter_output(&blocks, size)?;
            if let Some(t) = tail {
                bytes.extend_from_slice(t);
                n += t.len() / size;
            }
            timing.host_post_ns += cost.host_copy_ns(bytes.len());
            Ok((bytes, n))
        }
        _ => {
            let mut bytes: Vec<u8> = Vec::with_capacity(blocks.iter().map(|b| b.payload.len()).sum());
            for b in &blocks {
                bytes.extend_from_slice(&b.payload);
            }
            let device_len = bytes.len() / size;
            if let Some(t) = tail {
                bytes.extend_from_slice(t);
            }
            for d in &program.post {
                if let PostDirective::Truncate { buffer, len } = d {
                    if *buffer == bl.id && device_len > *len {
                        bytes.truncate(len * size);
                    }
                }
            }
            let n = bytes.len() / size;
            Ok((bytes, n))
        }
    }
}

/// Runs one device pipeline end to end and writes fetched results to `bufs`.
pub fn execute_pipeline(p: &mut Pipeline, dev: &mut Device, bufs: &mut HostBuffers) -> Result<ExecReport, PipelineError> {
    if p.executed {
        return Err(PipelineError::AlreadyExecuted);
    }
    check_host_inputs(p, bufs)?;
    let opts = *dev.options();
    let cost = *dev.cost();
    let (program, _) = codegen::generate(p, bufs, dev.config(), opts.cpu_ratio)?;
    p.executed = true;

    let plan = &program.layout;
    dev.reset(plan.mram_used());
    let mut timing = Timing {
        overhead_ns: cost.overhead_ns(),
        ..Timing::default()
    };
    for bl in plan.buffers.iter().filter(|b| b.class == BufferClass::Scalar) {
        let mut bytes = bufs.bytes(bl.id).expect("checked").to_vec();
        bytes.resize(bl.bytes, 0);
        timing.cpu_to_dpu_ns += dev.upload(XferMode::Broadcast, bl.mram, &[bytes])?;
    }

    let task = codegen::t3_cpu_leftover(plan);
    let pr: &Pipeline = p;
    let br: &HostBuffers = bufs;
    let (device, left) = std::thread::scope(|sc| {
        let cost = &cost;
        let handle = task.map(|t| sc.spawn(move || run_cpu_leftover(pr, br, t, cost)));
        let device = run_rounds(pr, br, dev, &program, &opts, &mut timing);
        let left = handle.map(|h| h.join().expect("host tail panicked"));
        (device, left)
    });
    let mut device = device?;
    let left: LeftoverResult = left.transpose()?.unwrap_or_default();
    timing.kernel_ns = timing.kernel_ns.max(left.host_ns);

    let mut results = Vec::new();
    for bl in plan.buffers.iter().filter(|b| pr.fetch_set.contains(&b.id)) {
        let blocks = device.blocks.remove(&bl.id).unwrap_or_default();
        let tail = task.and_then(|_| left.outputs.get(&bl.id));
        let (bytes, n) = assemble(pr, br, &program, bl, blocks, tail, &cost, &mut timing)?;
        results.push((bl.id, bl.elem.clone(), bytes, n));
    }

    let mut fetched = BTreeMap::new();
    for (id, elem, bytes, n) in results {
        bufs.set_bytes(id, elem, bytes);
        fetched.insert(id, n);
    }
    p.fetched = fetched.clone();
    Ok(ExecReport {
        fetched,
        timing,
        rounds: plan.nr_rounds,
        elements_per_round: plan.elements_per_round,
        cpu_leftover: plan.cpu_leftover,
        subpipelines: 1,
        device_invocations: device.invocations,
        host_invocations: left.invocations,
        dma: device.dma,
    })
}
