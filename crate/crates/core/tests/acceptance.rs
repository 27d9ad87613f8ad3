//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Golden program texts live in `tests/golden`; regenerate them with
//! `UPDATE_GOLDEN=1 cargo test -p pimflow --test acceptance`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pimflow::patterns::{from_bytes, to_bytes};
use pimflow::pipeline::{host_reference, split_into_subpipelines};
use pimflow::planner::{filter_output_plan, mram_capacity, rounds_and_leftover, wram_element_count, FilterCursor};
use pimflow::simdev::SimConfig;
use pimflow::workloads::{build_workload, run_bench, BuiltWorkload, Workload, WorkloadSpec};
use pimflow::{
    emit_program_text, parse_program_text, ArgRole, ArgSpec, BufferId, CostModel, Device, DeviceConfig, HostBuffers,
    KernelSpec, PatternKind, Pipeline, PipelineError, PipelineFull, RunOptions, StageSpec, XferMode,
};

/// Criterion 1: wall-clock limit for the whole six-workload suite.
const SUITE_LIMIT_S: f64 = 60.0;
const SEEDS: u64 = 20;
const LAYOUT_CASES: usize = 10_000;
const LAYOUT_MAX_BUDGET: usize = 512;
const CONSERVATION_CASES: usize = 10_000;
const FILTER_CASES: usize = 1_000;
const MAX_CHAIN: usize = 4;
const MIN_ROUNDS: usize = 3;
/// Criterion 7: parallel-gather time must be at most this share of serial.
const GATHER_RATIO: f64 = 0.5;
const COST_DRAWS: usize = 100;

type Outcome = Result<String, String>;

fn pad8(n: usize) -> usize {
    n.div_ceil(8) * 8
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn device(cfg: DeviceConfig, cost: CostModel, gather: XferMode, parallel: bool) -> Device {
    let mut d = Device::new(cfg, cost).expect("valid device");
    d.set_options(RunOptions {
        gather,
        parallel,
        ..RunOptions::default()
    });
    d
}

fn input_of(b: &BuiltWorkload, role: ArgRole) -> Vec<u32> {
    let a = b.pipeline.stages()[0]
        .args
        .iter()
        .find(|a| a.role == role)
        .expect("argument present");
    b.bufs.read::<u32>(a.buffer).expect("host input")
}

/// Plain-Rust results of each workload, computed from the generated inputs.
fn expected_output(b: &BuiltWorkload) -> Vec<u32> {
    let stage = &b.pipeline.stages()[0];
    let inputs: Vec<Vec<u32>> = stage
        .args
        .iter()
        .filter(|a| a.role == ArgRole::Input)
        .map(|a| b.bufs.read::<u32>(a.buffer).unwrap())
        .collect();
    let x = &inputs[0];
    match b.spec.workload {
        Workload::Va => x.iter().zip(&inputs[1]).map(|(p, q)| p.wrapping_add(*q)).collect(),
        Workload::Sel => x.iter().copied().filter(|v| v % 2 == 0).collect(),
        Workload::Uni => {
            let mut out: Vec<u32> = Vec::new();
            for &v in x {
                if out.last() != Some(&v) {
                    out.push(v);
                }
            }
            out
        }
        Workload::Red => vec![x.iter().fold(0u32, |s, v| s.wrapping_add(*v))],
        Workload::Gemv => {
            let v = input_of(b, ArgRole::Scalar);
            let mut y = Vec::new();
            for row in x.chunks(v.len()) {
                let mut acc = 0u32;
                for j in 0..v.len() {
                    acc = acc.wrapping_add(row[j].wrapping_mul(v[j]));
                }
                y.push(acc);
            }
            y
        }
        Workload::HstS => {
            let bins = stage
                .args
                .iter()
                .find(|a| a.role == ArgRole::ReduceOut)
                .unwrap()
                .width();
            let mut h = vec![0u32; bins];
            for &v in x {
                h[v as usize % bins] += 1;
            }
            h
        }
    }
}

fn run_workload(b: &BuiltWorkload, cfg: DeviceConfig, gather: XferMode) -> Result<(Vec<u32>, usize), String> {
    let mut dev = device(cfg, CostModel::default(), gather, true);
    let mut p = b.pipeline.clone();
    let mut bufs = b.bufs.clone();
    let r = p.execute(&mut dev, &mut bufs).map_err(|e| e.to_string())?;
    Ok((bufs.read::<u32>(b.outputs[0]).unwrap(), r.rounds))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = DeviceConfig::default();
    let mut runs = 0;
    for w in Workload::ALL {
        for seed in 0..SEEDS {
            let spec = WorkloadSpec::new(w).with_seed(seed);
            let built = build_workload(&spec, &cfg).map_err(|e| e.to_string())?;
            let want = expected_output(&built);
            for gather in [XferMode::Parallel, XferMode::Serial] {
                let (got, _) = run_workload(&built, cfg, gather)?;
                ensure(got == want, || format!("{w} seed {seed} {gather}: output differs"))?;
                runs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < SUITE_LIMIT_S, || format!("suite took {secs:.1} s"))?;
    Ok(format!("{runs} runs bit-exact, {secs:.1} s"))
}

/// Largest count whose padded regions fit, found by scanning every count
/// from the budget down.
fn exhaustive_count(sizes: &[usize], budget: usize) -> Option<usize> {
    (1..=budget).rev().find(|&c| sizes.iter().map(|s| pad8(c * s)).sum::<usize>() <= budget)
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let mut checked = 0;
    for case in 0..LAYOUT_CASES {
        let n_args = r.gen_range(1..=5);
        let sizes: Vec<usize> = (0..n_args).map(|_| [1, 2, 4, 8][r.gen_range(0..4)]).collect();
        let budget = r.gen_range(0..=LAYOUT_MAX_BUDGET);
        let header = r.gen_range(0..=64);

        let want = exhaustive_count(&sizes, budget);
        match (wram_element_count(&sizes, budget), want) {
            (Ok(p), Some(c)) => {
                ensure(p.elems_per_block == c, || format!("case {case}: wram count {} vs {c}", p.elems_per_block))?;
                let mut at = 0;
                for (reg, s) in p.regions.iter().zip(&sizes) {
                    ensure(reg.offset == at && reg.padded == pad8(c * s), || format!("case {case}: wram region"))?;
                    ensure(reg.offset % 8 == 0, || format!("case {case}: unaligned wram offset"))?;
                    at += reg.padded;
                }
                let next: usize = sizes.iter().map(|s| pad8((c + 1) * s)).sum();
                ensure(next > budget, || format!("case {case}: wram count not maximal"))?;
            }
            (Err(_), None) => {}
            (got, want) => return Err(format!("case {case}: wram {got:?} vs oracle {want:?}")),
        }

        let h = pad8(header);
        let want = if budget > h { exhaustive_count(&sizes, budget - h) } else { None };
        match (mram_capacity(&sizes, budget, header), want) {
            (Ok(p), Some(c)) => {
                ensure(p.elems_per_dpu_per_round == c, || format!("case {case}: mram count"))?;
                ensure(p.header_bytes == h && p.count_header_offset == 0, || format!("case {case}: header"))?;
                let mut at = h;
                for (reg, s) in p.regions.iter().zip(&sizes) {
                    ensure(reg.offset == at && reg.padded == pad8(c * s), || format!("case {case}: mram region"))?;
                    ensure(reg.offset % 8 == 0, || format!("case {case}: unaligned mram offset"))?;
                    at += reg.padded;
                }
                ensure(at <= budget, || format!("case {case}: mram overflow"))?;
                let next: usize = h + sizes.iter().map(|s| pad8((c + 1) * s)).sum::<usize>();
                ensure(next > budget, || format!("case {case}: mram count not maximal"))?;
            }
            (Err(_), None) => {}
            (got, want) => return Err(format!("case {case}: mram {got:?} vs oracle {want:?}")),
        }
        checked += 1;
    }
    Ok(format!("{checked} tuples match the exhaustive search"))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    for case in 0..CONSERVATION_CASES {
        let total = r.gen_range(0..=10_000_000usize);
        let capacity = r.gen_range(0..=2_000_000usize);
        let n_dpus = r.gen_range(1..=64usize);
        let align = [1, 2, 4, 8, 16, 64][r.gen_range(0..6)];
        let s = rounds_and_leftover(total, capacity, n_dpus, align);
        ensure(s.elements_per_round * s.nr_rounds + s.cpu_leftover == total, || {
            format!("case {case}: {s:?} does not conserve {total}")
        })?;
        ensure(s.elements_per_round % (n_dpus * align) == 0, || format!("case {case}: round not aligned"))?;
        ensure(s.elements_per_round <= capacity.max(0), || format!("case {case}: round above capacity"))?;
        if s.nr_rounds > 0 {
            ensure(s.cpu_leftover < s.elements_per_round, || format!("case {case}: leftover fills a round"))?;
        }
    }
    Ok(format!("{CONSERVATION_CASES} tuples, zero violations"))
}

/// Replays a filter write schedule on byte arrays, copying the last 8 bytes
/// of every write to the cache start, and checks the kept elements end up
/// contiguous in MRAM.
fn replay_carry(size: usize, cap: usize, keeps: &[usize]) -> Result<(), String> {
    let mut cursor = FilterCursor::new(size);
    let cache_len = pad8(cap * size) + 8;
    let mut cache = vec![0u8; cache_len];
    let mut mram = vec![0xEEu8; keeps.iter().sum::<usize>() * size + 16];
    let mut expect = Vec::new();
    let mut last_end = 0;
    let mut tag = 1u8;
    for &k in keeps {
        let (base, _, append_at) = cursor.next_block();
        for i in 0..k {
            let at = append_at + i * size;
            for byte in &mut cache[at..at + size] {
                *byte = tag;
            }
            expect.extend(std::iter::repeat_n(tag, size));
            tag = tag.wrapping_add(1).max(1);
        }
        let w = cursor.commit(k);
        ensure(w.mram_offset == base && w.bytes % 8 == 0 && w.mram_offset % 8 == 0, || {
            format!("misaligned write {w:?}")
        })?;
        ensure(w.bytes <= cache_len, || format!("write {w:?} exceeds cache {cache_len}"))?;
        ensure(w.mram_offset + 8 >= last_end || w.bytes == 0, || format!("write {w:?} regresses"))?;
        if w.bytes > 0 {
            mram[w.mram_offset..w.mram_offset + w.bytes].copy_from_slice(&cache[..w.bytes]);
            cache.copy_within(w.bytes - 8..w.bytes, 0);
            last_end = w.mram_offset + w.bytes;
        }
    }
    ensure(mram[..expect.len()] == expect[..], || format!("size {size} cap {cap} keeps {keeps:?}"))
}

fn filter_case(r: &mut ChaCha8Rng, case: usize) -> Result<(), String> {
    let size = [1, 2, 4, 8][r.gen_range(0..4)];
    let elem = pimflow::ElemType::new(format!("u{}", size * 8), size).unwrap();
    let rate = [0usize, 1, 5, 9, 10][case % 5];
    let n = if r.gen_bool(0.2) { r.gen_range(0..64) } else { r.gen_range(0..=4096) };
    let mut bytes = vec![0u8; n * size];
    r.fill(&mut bytes[..]);
    let keep = move |b: &[u8]| {
        let mut v = [0u8; 8];
        v[..b.len()].copy_from_slice(b);
        (u64::from_le_bytes(v) % 10) < rate as u64
    };
    let expect: Vec<u8> = bytes.chunks(size).filter(|c| keep(c)).flatten().copied().collect();

    let mut bufs = HostBuffers::new();
    let x = bufs.insert_bytes(elem.clone(), bytes);
    let y = bufs.insert_bytes(elem.clone(), Vec::new());
    let arg = |role, buffer| ArgSpec {
        role,
        elem: elem.clone(),
        buffer,
        reduce_width: None,
        identity: None,
        combiner: None,
    };
    let mut p = Pipeline::new(n);
    p.add_stage(StageSpec::filter(
        KernelSpec::select("keep_rate", move |a| keep(a.bytes(0))),
        vec![arg(ArgRole::Output, y), arg(ArgRole::Input, x)],
    ))
    .map_err(|e| e.to_string())?;
    p.fetch(y).map_err(|e| e.to_string())?;

    let tasklets = r.gen_range(1..=16);
    let per_tasklet = [24, 32, 48, 64, 128, 512][r.gen_range(0..6)];
    let cfg = DeviceConfig {
        n_dpus: r.gen_range(1..=32),
        tasklets,
        wram_bytes: (16 << 10) + tasklets * per_tasklet,
        ..DeviceConfig::default()
    };
    let gather = if r.gen_bool(0.5) { XferMode::Serial } else { XferMode::Parallel };
    let mut dev = device(cfg, CostModel::default(), gather, true);
    let mut out = bufs.clone();
    p.execute(&mut dev, &mut out)
        .map_err(|e| format!("case {case}: {e}"))?;
    ensure(out.bytes(y) == Some(&expect[..]), || {
        format!("case {case}: size {size} rate {rate} n {n} {cfg:?} {gather}: output differs")
    })?;
    let len = p.get_length(y).map_err(|e| e.to_string())?;
    ensure(len * size == expect.len(), || format!("case {case}: get_length {len}"))
}

fn criterion_4() -> Outcome {
    let mut boundaries = 0;
    for size in [1, 2, 4, 8] {
        for cap in 1..=12 {
            for k1 in 0..=cap {
                for k2 in 0..=cap {
                    for k3 in [0, 1, cap] {
                        replay_carry(size, cap, &[k1, k2, k3])?;
                        boundaries += 2;
                    }
                }
            }
        }
    }
    ensure(filter_output_plan(4, &[3])[0].bytes == 16, || "3 kept u32 must write 16 bytes".into())?;
    let mut r = rng(4);
    for case in 0..FILTER_CASES {
        filter_case(&mut r, case)?;
    }
    Ok(format!("{FILTER_CASES} pipelines bit-exact, {boundaries} carry boundaries replayed"))
}

fn stage_for(kind: PatternKind, input: BufferId, output: BufferId, overlap: Option<BufferId>) -> StageSpec {
    let io = vec![ArgSpec::input::<u32>(input), ArgSpec::output::<u32>(output)];
    let sum_all = |a: &mut pimflow::Args<'_>| {
        let mut s = 0u32;
        for i in 0..a.len(0) {
            s = s.wrapping_add(a.at::<u32>(0, i));
        }
        a.set(1, s);
    };
    let s = match kind {
        PatternKind::Map => StageSpec::map(
            KernelSpec::new("affine", |a| {
                let v = a.get::<u32>(0).wrapping_mul(3).wrapping_add(1);
                a.set(1, v);
            }),
            io,
        ),
        PatternKind::Reduce => StageSpec::reduce(
            KernelSpec::new("sum", |a| {
                let v = a.get::<u32>(0).wrapping_add(a.get::<u32>(1));
                a.set(0, v);
            }),
            vec![ArgSpec::reduce_out::<u32>(output, 1), ArgSpec::input::<u32>(input)],
        ),
        PatternKind::Filter => StageSpec::filter(
            KernelSpec::new("copy", |a| {
                let v = a.get::<u32>(0);
                a.set(1, v);
            })
            .with_predicate(|a| a.get::<u32>(1) % 3 != 0),
            io,
        ),
        PatternKind::Window => StageSpec::window(KernelSpec::new("wsum", sum_all), 2, io),
        PatternKind::Group => StageSpec::group(
            KernelSpec::new("gxor", |a| {
                let v = a.at::<u32>(0, 0) ^ a.at::<u32>(0, 1);
                a.set(1, v);
            }),
            2,
            io,
        ),
        PatternKind::WindowGroup => StageSpec::window_group(KernelSpec::new("wgsum", sum_all), 2, 2, io),
        PatternKind::WindowFilter => StageSpec::window_filter(
            KernelSpec::new("first", |a| {
                let v = a.at::<u32>(0, 0);
                a.set(1, v);
            })
            .with_predicate(|a| a.at::<u32>(0, 0) != a.at::<u32>(0, 1)),
            2,
            io,
        ),
        PatternKind::GroupFilter => StageSpec::group_filter(
            KernelSpec::new("gsum", sum_all).with_predicate(|a| a.get::<u32>(1) % 2 == 1),
            2,
            io,
        ),
        PatternKind::WindowGroupFilter => StageSpec::window_group_filter(
            KernelSpec::new("wgfsum", sum_all).with_predicate(|a| a.get::<u32>(1) % 3 != 0),
            2,
            2,
            io,
        ),
    };
    match overlap {
        Some(o) if kind.is_window() => s.with_overlap(o),
        _ => s,
    }
}

fn chains(max_len: usize) -> Vec<Vec<PatternKind>> {
    let mut all = Vec::new();
    let mut frontier: Vec<Vec<PatternKind>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for c in &frontier {
            for k in PatternKind::ALL {
                let mut c = c.clone();
                c.push(k);
                next.push(c);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// `friendly` picks lengths divisible by every group product and always
/// supplies overlaps, so more chains get as far as comparing values.
fn chain_case(kinds: &[PatternKind], r: &mut ChaCha8Rng, friendly: bool) -> Result<bool, String> {
    let n = if friendly { 64 * r.gen_range(1..=16usize) } else { r.gen_range(0..=1024usize) };
    let x: Vec<u32> = (0..n).map(|_| r.gen_range(0..8)).collect();
    let mut bufs = HostBuffers::new();
    let mut cur = bufs.insert(&x);
    let mut stages = Vec::new();
    let mut outs = Vec::new();
    for &k in kinds {
        let out = bufs.declare::<u32>();
        let overlap = if k.is_window() && (friendly || r.gen_bool(0.5)) {
            let la = k.lookahead(2);
            let v: Vec<u32> = (0..la).map(|_| r.gen_range(0..8)).collect();
            Some(bufs.insert(&v))
        } else {
            None
        };
        stages.push(stage_for(k, cur, out, overlap));
        outs.push(out);
        cur = out;
    }

    let mut plain = Pipeline::new(n);
    let accepted = stages.iter().all(|s| plain.add_stage(s.clone()).is_ok());
    let fetch = outs.iter().copied().collect();
    let subs = split_into_subpipelines(n, &stages, &fetch).map_err(|e| format!("{kinds:?}: split {e}"))?;
    if accepted {
        ensure(subs.len() == 1, || format!("{kinds:?}: accepted chain split into {}", subs.len()))?;
    }

    let mut full = PipelineFull::new(n);
    for s in &stages {
        full.add_stage(s.clone()).map_err(|e| e.to_string())?;
    }
    for &o in &outs {
        full.fetch(o).map_err(|e| e.to_string())?;
    }
    let cfg = DeviceConfig {
        n_dpus: r.gen_range(1..=8),
        tasklets: r.gen_range(1..=11),
        ..DeviceConfig::default()
    };
    let gather = if r.gen_bool(0.5) { XferMode::Serial } else { XferMode::Parallel };
    let mut dev = device(cfg, CostModel::default(), gather, false);
    let mut got = bufs.clone();
    let res = full.execute(&mut dev, &mut got);
    match (host_reference(&stages, &bufs), res) {
        (Ok(want), Ok(_)) => {
            for &o in &outs {
                ensure(got.bytes(o) == want.bytes(o), || format!("{kinds:?} n={n}: buffer {o} differs"))?;
                ensure(full.get_length(o).ok() == want.len(o), || format!("{kinds:?}: length of {o}"))?;
            }
            Ok(true)
        }
        (Err(PipelineError::Pattern(a)), Err(PipelineError::Pattern(b))) if a == b => Ok(false),
        (want, got) => Err(format!("{kinds:?} n={n}: reference {:?} vs split {:?}", want.err(), got.err())),
    }
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let all = chains(MAX_CHAIN);
    let (mut ok, mut errs) = (0, 0);
    for kinds in &all {
        for friendly in [false, true] {
            if chain_case(kinds, &mut r, friendly)? {
                ok += 1;
            } else {
                errs += 1;
            }
        }
    }
    Ok(format!("{} chains, two inputs each: {ok} equal results, {errs} equal errors", all.len()))
}

fn criterion_6() -> Outcome {
    let mut rounds_seen = Vec::new();
    for w in Workload::ALL {
        let spec = WorkloadSpec::new(w).with_seed(6);
        let mut cfg = DeviceConfig::default();
        let built = build_workload(&spec, &cfg).map_err(|e| e.to_string())?;
        let used = built
            .pipeline
            .compile(&built.bufs, &cfg, 0.0)
            .map_err(|e| e.to_string())?
            .layout
            .mram_used();
        // Shrink until at least MIN_ROUNDS rounds are needed.
        let mut mram = pad8(used);
        loop {
            cfg.mram_bytes = mram;
            let plan = built.pipeline.compile(&built.bufs, &cfg, 0.0).map_err(|e| format!("{w}: {e}"))?;
            if plan.layout.nr_rounds >= MIN_ROUNDS {
                break;
            }
            mram = mram * 3 / 4 / 8 * 8;
        }
        let want = expected_output(&built);
        for gather in [XferMode::Parallel, XferMode::Serial] {
            let (got, rounds) = run_workload(&built, cfg, gather)?;
            ensure(rounds >= MIN_ROUNDS, || format!("{w}: {rounds} rounds"))?;
            ensure(got == want, || format!("{w} {gather}: output differs with {rounds} rounds"))?;
            rounds_seen.push(rounds);
        }
    }
    Ok(format!(
        "all six pass with rounds {}..={}",
        rounds_seen.iter().min().unwrap(),
        rounds_seen.iter().max().unwrap()
    ))
}

fn criterion_7() -> Outcome {
    let both = [XferMode::Serial, XferMode::Parallel];
    let mut ratios = Vec::new();
    for w in [Workload::Sel, Workload::Uni] {
        let r = run_bench(&WorkloadSpec::new(w), &SimConfig::default(), &both, true).map_err(|e| e.to_string())?;
        ensure(r.passed(), || format!("{w}: verdict {}", r.verdict))?;
        let ratio = r.timings["parallel"].total_ns / r.timings["serial"].total_ns;
        ensure(ratio <= GATHER_RATIO, || format!("{w}: parallel/serial = {ratio:.3}"))?;
        ratios.push(format!("{w} {ratio:.3}"));
    }

    let mut r = rng(7);
    let n = DeviceConfig::default().n_dpus;
    for draw in 0..COST_DRAWS {
        let mut c = CostModel::default();
        let bw = r.gen_range(0.05..20.0);
        c.serial_xfer.latency_ns = r.gen_range(0.0..50_000.0);
        c.serial_xfer.bytes_per_ns = bw;
        c.parallel_xfer.bytes_per_ns = bw;
        c.parallel_xfer.latency_ns = r.gen_range(0.0..=n as f64 * c.serial_xfer.latency_ns);
        c.parallel_xfer.lanes = r.gen_range(2..=64);
        let b = r.gen_range(8..1 << 20) / 8 * 8;
        let equal = vec![b; n];
        ensure(c.parallel_ns(&equal) < c.serial_ns(&equal), || {
            format!("draw {draw}: parallel not faster for equal payloads")
        })?;
        let bigger: Vec<usize> = equal.iter().map(|x| x + 8 * r.gen_range(0..64)).collect();
        ensure(c.parallel_ns(&bigger) >= c.parallel_ns(&equal), || format!("draw {draw}: parallel not monotone"))?;
        ensure(c.serial_ns(&bigger) >= c.serial_ns(&equal), || format!("draw {draw}: serial not monotone"))?;
        let mut wider = c;
        wider.parallel_xfer.lanes += r.gen_range(1..=16);
        ensure(wider.parallel_ns(&bigger) <= c.parallel_ns(&bigger), || {
            format!("draw {draw}: more lanes slowed parallel transfers")
        })?;
    }
    Ok(format!("{}; {COST_DRAWS} cost draws ordered and monotone", ratios.join(", ")))
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn golden_programs() -> Result<Vec<(String, String)>, String> {
    let cfg = DeviceConfig::default();
    let mut out = Vec::new();

    let n = 1 << 20;
    let a: Vec<u32> = (0..n as u32).collect();
    let mut bufs = HostBuffers::new();
    let ia = bufs.insert(&a);
    let ib = bufs.insert(&a);
    let c = bufs.declare::<u32>();
    let sum = bufs.declare::<u32>();
    let mut p = Pipeline::new(n);
    p.add_stage(StageSpec::map(
        KernelSpec::new("vecdot_mul", |x| {
            let v = x.get::<u32>(0).wrapping_mul(x.get::<u32>(1));
            x.set(2, v);
        }),
        vec![ArgSpec::input::<u32>(ia), ArgSpec::input::<u32>(ib), ArgSpec::output::<u32>(c)],
    ))
    .map_err(|e| e.to_string())?;
    p.add_stage(StageSpec::reduce(
        KernelSpec::new("vecdot_sum", |x| {
            let v = x.get::<u32>(0).wrapping_add(x.get::<u32>(1));
            x.set(0, v);
        }),
        vec![ArgSpec::reduce_out::<u32>(sum, 1), ArgSpec::input::<u32>(c)],
    ))
    .map_err(|e| e.to_string())?;
    p.fetch(sum).map_err(|e| e.to_string())?;
    let prog = p.compile(&bufs, &cfg, 0.0).map_err(|e| e.to_string())?;
    out.push(("vecdot".to_string(), emit_program_text(&prog)));

    for w in Workload::ALL {
        let built = build_workload(&WorkloadSpec::new(w), &cfg).map_err(|e| e.to_string())?;
        let prog = built.pipeline.compile(&built.bufs, &cfg, 0.0).map_err(|e| e.to_string())?;
        out.push((w.name().to_ascii_lowercase(), emit_program_text(&prog)));
    }
    Ok(out)
}

fn criterion_8() -> Outcome {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let dir = golden_dir();
    let programs = golden_programs()?;
    for (name, text) in &programs {
        let path = dir.join(format!("{name}.txt"));
        if update {
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            std::fs::write(&path, text).map_err(|e| e.to_string())?;
        }
        let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(&golden == text, || format!("{name}: program text differs from golden"))?;
        let parsed = parse_program_text(text).map_err(|e| format!("{name}: {e}"))?;
        ensure(emit_program_text(&parsed) == *text, || format!("{name}: parse round trip differs"))?;
        ensure(text.starts_with("DPU-PROGRAM v1\n"), || format!("{name}: header"))?;
    }
    Ok(format!("{} programs match goldens and round-trip", programs.len()))
}

fn criterion_9() -> Outcome {
    let both = [XferMode::Serial, XferMode::Parallel];
    let sim = SimConfig::default();
    for w in Workload::ALL {
        let spec = WorkloadSpec::new(w).with_seed(9);
        let mut texts = Vec::new();
        for parallel in [true, false, true] {
            let r = run_bench(&spec, &sim, &both, parallel).map_err(|e| e.to_string())?;
            texts.push(r.to_json());
        }
        ensure(texts.iter().all(|t| t == &texts[0]), || format!("{w}: report JSON differs between runs"))?;
    }
    let (a, b) = (to_bytes(&[1u32]), from_bytes::<u32>(&to_bytes(&[1u32])));
    ensure(a.len() == 4 && b == [1], || "byte helpers".into())?;
    Ok("report JSON identical across repeated, parallel and sequential runs".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence, six workloads", criterion_1),
        ("layout invariants vs exhaustive search", criterion_2),
        ("round and leftover conservation", criterion_3),
        ("filter compaction fidelity", criterion_4),
        ("split pipelines equal the host composition", criterion_5),
        ("multi-round correctness", criterion_6),
        ("gather strategy ordering", criterion_7),
        ("golden device program text", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} ({secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} ({secs:.1} s)", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
