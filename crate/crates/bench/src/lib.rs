//! Fixtures shared by the criterion benches.

use pimflow::planner::{ArgShape, BufferClass, BufferShape, PlanConfig, StageShape};
use pimflow::simdev::SimConfig;
use pimflow::workloads::{Workload, WorkloadSpec};
use pimflow::{ArgRole, BufferId, ElemType, PatternKind};

/// A workload sized for quick iterations: 4 DPUs, 4 Ki elements each.
pub fn small_spec(w: Workload) -> WorkloadSpec {
    let mut s = WorkloadSpec::new(w).with_dpus(4, 4096);
    s.gemv_rows_per_dpu = 64;
    s
}

pub fn small_config() -> SimConfig {
    let mut c = SimConfig::default();
    c.device.n_dpus = 4;
    c
}

/// A three-stage map/map/reduce chain over `u32`, as the planner sees it.
pub fn chain_shapes() -> (Vec<StageShape>, Vec<BufferShape>) {
    let u32t = ElemType::of::<u32>();
    let vec_buf = |id| BufferShape {
        id: BufferId(id),
        elem: u32t.clone(),
        class: BufferClass::Vector,
        scale: 1,
        ext: 0,
        filtered: false,
        len: 0,
    };
    let arg = |role, id| ArgShape {
        role,
        elem: u32t.clone(),
        buffer: BufferId(id),
        width: 1,
    };
    let stage = |kind, args| StageShape {
        kind,
        window: 0,
        group: 1,
        lookahead: 0,
        limit: None,
        in_scale: 1,
        in_filtered: false,
        args,
    };
    let stages = vec![
        stage(
            PatternKind::Map,
            vec![arg(ArgRole::Input, 0), arg(ArgRole::Input, 1), arg(ArgRole::Output, 2)],
        ),
        stage(PatternKind::Map, vec![arg(ArgRole::Input, 2), arg(ArgRole::Output, 3)]),
        stage(PatternKind::Reduce, vec![arg(ArgRole::ReduceOut, 4), arg(ArgRole::Input, 3)]),
    ];
    let mut buffers: Vec<BufferShape> = (0..4).map(vec_buf).collect();
    buffers.push(BufferShape {
        class: BufferClass::Reduce,
        len: 1,
        ..vec_buf(4)
    });
    (stages, buffers)
}

pub fn plan_config() -> PlanConfig {
    PlanConfig {
        n_dpus: 16,
        tasklets: 11,
        mram_bytes: 64 << 20,
        wram_bytes: 48 << 10,
        cpu_ratio: 0.0,
    }
}
