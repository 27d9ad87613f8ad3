//! Per-DPU stage execution: WRAM block loop, DMA, kernel dispatch and the
//! filter write schedule.

use crate::codegen::DeviceProgram;
use crate::patterns::{pad8, ArgRole, Args, Slot};
use crate::planner::{FilterCursor, LayoutPlan, StageLayout};
use crate::pipeline::StageSpec;

use super::store::OutOfBounds;
use super::{DeviceConfig, DeviceError, DmaConfig, DpuRoundStats, DpuState};

pub(super) struct Ctx<'a> {
    pub program: &'a DeviceProgram,
    pub stages: &'a [StageSpec],
    pub round: usize,
    pub config: &'a DeviceConfig,
    pub default_cycles: u64,
}

fn mram_err(dpu: usize, (offset, len, limit): OutOfBounds) -> DeviceError {
    DeviceError::OutOfMram {
        dpu,
        offset,
        len,
        limit,
    }
}

fn wram_err(dpu: usize, (offset, len, limit): OutOfBounds) -> DeviceError {
    DeviceError::OutOfWram {
        dpu,
        offset,
        len,
        limit,
    }
}

struct Dpu<'a> {
    idx: usize,
    state: &'a mut DpuState,
    stats: DpuRoundStats,
    dma: DmaConfig,
}

impl Dpu<'_> {
    fn check(&self, mram: usize, wram: usize, len: usize) -> Result<(), DeviceError> {
        let a = self.dma.align;
        if mram % a != 0 || wram % a != 0 || len % 8 != 0 {
            return Err(DeviceError::AlignmentViolation {
                what: "DMA",
                offset: if mram % a != 0 { mram } else { wram },
                len,
            });
        }
        Ok(())
    }

    fn oob_mram(&self, e: OutOfBounds) -> DeviceError {
        mram_err(self.idx, e)
    }

    fn oob_wram(&self, e: OutOfBounds) -> DeviceError {
        wram_err(self.idx, e)
    }

    /// Copies `len` bytes in chunks of at most `dma.max`.
    fn transfer(&mut self, mram: usize, wram: usize, len: usize, to_wram: bool) -> Result<(), DeviceError> {
        self.check(mram, wram, len)?;
        let mut done = 0;
        while done < len {
            let c = (len - done).min(self.dma.max);
            debug_assert!(c >= self.dma.min && c % 8 == 0);
            let (m, w) = (mram + done, wram + done);
            let DpuState { mram: ms, wram: ws } = &mut *self.state;
            let res = if to_wram {
                match ms.read(m, c) {
                    Ok(src) => ws.write(w, src).map_err(|e| (false, e)),
                    Err(e) => Err((true, e)),
                }
            } else {
                match ws.read(w, c) {
                    Ok(src) => ms.write(m, src).map_err(|e| (true, e)),
                    Err(e) => Err((false, e)),
                }
            };
            if let Err((in_mram, e)) = res {
                return Err(if in_mram { self.oob_mram(e) } else { self.oob_wram(e) });
            }
            self.stats.dma.record(c);
            done += c;
        }
        Ok(())
    }

    fn read_count(&mut self, at: usize) -> Result<usize, DeviceError> {
        let idx = self.idx;
        let raw = self.state.mram.read(at, 8).map_err(|e| mram_err(idx, e))?;
        let v = u64::from_le_bytes(raw.try_into().expect("8 bytes"));
        self.stats.dma.record(8);
        Ok(v as usize)
    }

    fn write_count(&mut self, at: usize, count: usize) -> Result<(), DeviceError> {
        self.state
            .mram
            .write(at, &(count as u64).to_le_bytes())
            .map_err(|e| self.oob_mram(e))?;
        self.stats.dma.record(8);
        Ok(())
    }
}

pub(super) fn run_dpu(ctx: &Ctx<'_>, idx: usize, state: &mut DpuState) -> Result<DpuRoundStats, DeviceError> {
    let plan = &ctx.program.layout;
    let mut dpu = Dpu {
        idx,
        state,
        stats: DpuRoundStats::default(),
        dma: ctx.config.dma,
    };
    let usable = dpu.state.wram.limit();
    if plan.wram_shared + plan.tasklets * plan.wram_budget > usable {
        return Err(dpu.oob_wram((plan.wram_shared, plan.tasklets * plan.wram_budget, usable)));
    }
    let dpu_base = ctx.round * plan.elements_per_round + idx * plan.per_dpu;
    for (st, spec) in plan.stages.iter().zip(ctx.stages) {
        run_stage(&mut dpu, plan, st, spec, dpu_base, ctx.default_cycles)?;
    }
    Ok(dpu.stats)
}

fn header_of(plan: &LayoutPlan, st: &StageLayout, j: usize) -> Option<usize> {
    plan.buffer(st.args[j].buffer).and_then(|b| b.header)
}

fn run_stage(
    dpu: &mut Dpu<'_>,
    plan: &LayoutPlan,
    st: &StageLayout,
    spec: &StageSpec,
    dpu_base: usize,
    default_cycles: u64,
) -> Result<(), DeviceError> {
    let kind = st.kind;
    let filter = kind.is_filter();
    let reduce = kind.is_reduce();
    let g = if kind.is_group() { st.group } else { 1 };
    let la = st.lookahead;
    let q = st.in_scale;
    let win = g + la;
    let kernel = &spec.kernel;
    let cost = kernel.cost_hint.map_or(default_cycles, u64::from);
    let usable = dpu.state.wram.limit();
    let args = &st.args;

    for a in args.iter().filter(|a| a.role == ArgRole::Scalar) {
        dpu.transfer(a.mram, a.wram, pad8(a.count * a.elem.size), true)?;
    }
    let in_header = if st.in_filtered {
        let j = args
            .iter()
            .position(|a| a.role.reads_vector())
            .expect("stage has a vector input");
        header_of(plan, st, j)
    } else {
        None
    };
    let out_headers: Vec<Option<usize>> = (0..args.len())
        .map(|j| {
            let writes = match args[j].role {
                ArgRole::Output | ArgRole::InOut => filter,
                ArgRole::ReduceOut => true,
                _ => false,
            };
            if writes {
                header_of(plan, st, j)
            } else {
                None
            }
        })
        .collect();

    let mut slots = vec![Slot::new(0, 0, 1, false); args.len()];
    for t in 0..plan.tasklets {
        let (s, e) = plan.tasklet_range(t);
        let in_start = s / q;
        let in_len = match in_header {
            Some(h) => dpu.read_count(h + 8 * t)?,
            None => (e - s) / q,
        };
        let out_start = in_start / g;
        let tb = plan.wram_shared + t * plan.wram_budget;

        let mut cursors: Vec<Option<FilterCursor>> = args
            .iter()
            .map(|a| {
                (filter && matches!(a.role, ArgRole::Output | ArgRole::InOut))
                    .then(|| FilterCursor::new(a.elem.size))
            })
            .collect();
        for (j, a) in args.iter().enumerate() {
            if a.role == ArgRole::ReduceOut {
                let id = spec.args[j].identity_bytes();
                dpu.state
                    .wram
                    .write(tb + a.wram, &id)
                    .map_err(|e| dpu.oob_wram(e))?;
            }
        }

        let mut appends = vec![0usize; args.len()];
        let mut pos = 0;
        while pos < in_len {
            let blen = st.block.min(in_len - pos);
            let n_inv = blen / g;
            for a in args.iter() {
                let extra = match a.role {
                    ArgRole::Input => la,
                    ArgRole::InOut => 0,
                    _ => continue,
                };
                let size = a.elem.size;
                dpu.transfer(
                    a.mram + (in_start + pos) * size,
                    tb + a.wram,
                    pad8((blen + extra) * size),
                    true,
                )?;
            }
            for (j, c) in cursors.iter().enumerate() {
                if let Some(c) = c {
                    appends[j] = c.next_block().2;
                }
            }

            let inv_base = (dpu_base / q + in_start + pos) / g;
            let mut kept = 0usize;
            let idx = dpu.idx;
            let mem = dpu.state.wram.slice_mut(0, usable).map_err(|e| wram_err(idx, e))?;
            for i in 0..n_inv {
                for (j, a) in args.iter().enumerate() {
                    let size = a.elem.size;
                    slots[j] = match a.role {
                        ArgRole::Input => {
                            let len = if reduce { 1 } else { win };
                            Slot::new(tb + a.wram + i * g * size, len, size, false)
                        }
                        ArgRole::Output => {
                            let off = if filter {
                                tb + a.wram + appends[j] + kept * size
                            } else {
                                tb + a.wram + i * size
                            };
                            mem[off..off + size].fill(0);
                            Slot::new(off, 1, size, true)
                        }
                        ArgRole::InOut => {
                            let src = tb + a.wram + i * size;
                            if filter {
                                let off = tb + a.wram_out.unwrap_or(a.wram) + appends[j] + kept * size;
                                mem.copy_within(src..src + size, off);
                                Slot::new(off, 1, size, true)
                            } else {
                                Slot::new(src, 1, size, true)
                            }
                        }
                        ArgRole::Scalar => Slot::new(a.wram, a.count, size, false),
                        ArgRole::ReduceOut => Slot::new(tb + a.wram, a.count, size, true),
                        ArgRole::Combine => Slot::new(0, 0, size, false),
                    };
                }
                if st.limit.is_some_and(|l| inv_base + i >= l) {
                    continue;
                }
                let mut view = Args::new(mem, &slots);
                (kernel.apply)(&mut view);
                let keep = match (&kernel.predicate, filter) {
                    (Some(p), true) => p(&view),
                    _ => true,
                };
                if let Some(fault) = view.take_fault() {
                    return Err(DeviceError::KernelFault {
                        stage: st.index,
                        kernel: kernel.kernel_id.clone(),
                        dpu: dpu.idx,
                        fault,
                    });
                }
                dpu.stats.invocations += 1;
                dpu.stats.cycles += cost;
                if filter && keep {
                    kept += 1;
                }
            }

            for (j, a) in args.iter().enumerate() {
                let size = a.elem.size;
                match (a.role, &mut cursors[j]) {
                    (ArgRole::Output | ArgRole::InOut, Some(c)) => {
                        let w = c.commit(kept);
                        let cache = tb + a.wram_out.unwrap_or(a.wram);
                        let region = a.mram + out_start * size;
                        if w.bytes > 0 {
                            dpu.transfer(region + w.mram_offset, cache, w.bytes, false)?;
                            let idx = dpu.idx;
                            let m = dpu.state.wram.slice_mut(cache, w.bytes).map_err(|e| wram_err(idx, e))?;
                            m.copy_within(w.bytes - 8..w.bytes, 0);
                        }
                    }
                    (ArgRole::Output, None) => {
                        dpu.transfer(
                            a.mram + (in_start + pos) / g * size,
                            tb + a.wram,
                            pad8(n_inv * size),
                            false,
                        )?;
                    }
                    (ArgRole::InOut, None) => {
                        dpu.transfer(a.mram + (in_start + pos) * size, tb + a.wram, pad8(blen * size), false)?;
                    }
                    _ => {}
                }
            }
            pos += blen;
        }

        for (j, a) in args.iter().enumerate() {
            match a.role {
                ArgRole::ReduceOut => {
                    let bytes = pad8(a.count * a.elem.size);
                    dpu.transfer(a.mram + t * bytes, tb + a.wram, bytes, false)?;
                    if let Some(h) = out_headers[j] {
                        dpu.write_count(h + 8 * t, in_len)?;
                    }
                }
                ArgRole::Output | ArgRole::InOut => {
                    if let (Some(c), Some(h)) = (&cursors[j], out_headers[j]) {
                        dpu.write_count(h + 8 * t, c.kept_elems())?;
                    }
                }
                _ => {}
            }
        }
    }
    Ok(())
}
