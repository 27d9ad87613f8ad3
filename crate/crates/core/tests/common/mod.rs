#![allow(dead_code)]

use pimflow::pipeline::host_reference;
use pimflow::{
    ArgSpec, ExecReport, BufferId, CostModel, Device, DeviceConfig, HostBuffers, KernelSpec, Pipeline, RunOptions, StageSpec,
    XferMode,
};

pub fn device(n_dpus: usize, tasklets: usize) -> Device {
    let cfg = DeviceConfig {
        n_dpus,
        tasklets,
        ..DeviceConfig::default()
    };
    Device::new(cfg, CostModel::default()).unwrap()
}

pub fn device_with(cfg: DeviceConfig, gather: XferMode, cpu_ratio: f64) -> Device {
    let mut d = Device::new(cfg, CostModel::default()).unwrap();
    d.set_options(RunOptions {
        gather,
        cpu_ratio,
        ..RunOptions::default()
    });
    d
}

pub fn add_kernel() -> KernelSpec {
    KernelSpec::new("add", |a| {
        let s = a.get::<u32>(0).wrapping_add(a.get::<u32>(1));
        a.set(2, s);
    })
}

pub fn mul_kernel() -> KernelSpec {
    KernelSpec::new("mul", |a| {
        let s = a.get::<u32>(0).wrapping_mul(a.get::<u32>(1));
        a.set(2, s);
    })
}

pub fn sum_kernel() -> KernelSpec {
    KernelSpec::new("sum", |a| {
        let s = a.get::<u32>(0).wrapping_add(a.get::<u32>(1));
        a.set(0, s);
    })
}

/// The two-stage dot product: `c = a * b`, `sum = Σ c`.
pub fn vecdot(a: &[u32], b: &[u32]) -> (Pipeline, HostBuffers, BufferId) {
    let mut bufs = HostBuffers::new();
    let ia = bufs.insert(a);
    let ib = bufs.insert(b);
    let c = bufs.declare::<u32>();
    let sum = bufs.declare::<u32>();
    let mut p = Pipeline::new(a.len());
    p.add_stage(StageSpec::map(
        mul_kernel(),
        vec![ArgSpec::input::<u32>(ia), ArgSpec::input::<u32>(ib), ArgSpec::output::<u32>(c)],
    ))
    .unwrap();
    p.add_stage(StageSpec::reduce(
        sum_kernel(),
        vec![ArgSpec::reduce_out::<u32>(sum, 1), ArgSpec::input::<u32>(c)],
    ))
    .unwrap();
    p.fetch(sum).unwrap();
    (p, bufs, sum)
}

/// Executes `p` and checks every fetched buffer against the host composition.
pub fn assert_matches_reference(mut p: Pipeline, bufs: &HostBuffers, dev: &mut Device) -> (HostBuffers, ExecReport) {
    let expected = host_reference(p.stages(), bufs).expect("reference runs");
    let mut got = bufs.clone();
    let report = p.execute(dev, &mut got).expect("device runs");
    for &b in p.fetch_set() {
        assert_eq!(got.bytes(b), expected.bytes(b), "buffer {b}");
        assert_eq!(p.get_length(b).unwrap(), expected.len(b).unwrap(), "length of {b}");
    }
    (got, report)
}
