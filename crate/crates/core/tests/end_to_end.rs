mod common;

use common::*;
use pimflow::patterns::from_bytes;
use pimflow::{ArgSpec, DeviceConfig, HostBuffers, KernelSpec, Pipeline, StageSpec, XferMode};

#[test]
fn vecdot_of_eight() {
    let a: Vec<u32> = (1..=8).collect();
    let b: Vec<u32> = (1..=8).rev().collect();
    let (mut p, mut bufs, sum) = vecdot(&a, &b);
    let mut dev = device(1, 1);
    p.execute(&mut dev, &mut bufs).unwrap();
    assert_eq!(bufs.read::<u32>(sum).unwrap(), vec![120]);
    assert_eq!(p.get_length(sum).unwrap(), 1);
}

#[test]
fn vecdot_across_geometries() {
    for n in [0usize, 1, 7, 64, 1000, 4099] {
        let a: Vec<u32> = (0..n as u32).map(|i| i.wrapping_mul(2654435761)).collect();
        let b: Vec<u32> = (0..n as u32).map(|i| i ^ 0x5555).collect();
        for (dpus, tasklets) in [(1, 1), (3, 2), (16, 11), (5, 24)] {
            for gather in [XferMode::Serial, XferMode::Parallel] {
                for ratio in [0.0, 0.3] {
                    let (p, bufs, _) = vecdot(&a, &b);
                    let cfg = DeviceConfig {
                        n_dpus: dpus,
                        tasklets,
                        ..DeviceConfig::default()
                    };
                    let mut dev = device_with(cfg, gather, ratio);
                    let (_, r) = assert_matches_reference(p, &bufs, &mut dev);
                    if ratio == 0.0 {
                        assert!(r.cpu_leftover < 2 * dpus, "n={n} leftover {}", r.cpu_leftover);
                        assert_eq!(r.device_invocations as usize, 2 * (n - r.cpu_leftover));
                    } else {
                        assert!(r.cpu_leftover as f64 >= 0.3 * n as f64);
                    }
                }
            }
        }
    }
}

fn filter_pipeline(x: &[u32], keep_mod: u32) -> (Pipeline, HostBuffers) {
    let mut bufs = HostBuffers::new();
    let ix = bufs.insert(x);
    let y = bufs.declare::<u32>();
    let mut p = Pipeline::new(x.len());
    p.add_stage(StageSpec::filter(
        KernelSpec::select("keep", move |a| a.get::<u32>(0) % keep_mod == 0),
        vec![ArgSpec::output::<u32>(y), ArgSpec::input::<u32>(ix)],
    ))
    .unwrap();
    p.fetch(y).unwrap();
    (p, bufs)
}

#[test]
fn filter_keep_even() {
    let x: Vec<u32> = (1..=8).collect();
    let (p, bufs) = filter_pipeline(&x, 2);
    let mut dev = device(1, 1);
    let (got, _) = assert_matches_reference(p, &bufs, &mut dev);
    let y = pimflow::BufferId(1);
    assert_eq!(got.read::<u32>(y).unwrap(), vec![2, 4, 6, 8]);
}

#[test]
fn filter_many_shapes() {
    for n in [3usize, 100, 5000] {
        let x: Vec<u32> = (0..n as u32).map(|i| i.wrapping_mul(0x9E3779B1) >> 7).collect();
        for m in [1, 2, 3, 1 << 30] {
            for (dpus, tasklets) in [(1, 1), (4, 3), (16, 11)] {
                for gather in [XferMode::Serial, XferMode::Parallel] {
                    let (p, bufs) = filter_pipeline(&x, m);
                    let cfg = DeviceConfig {
                        n_dpus: dpus,
                        tasklets,
                        ..DeviceConfig::default()
                    };
                    let mut dev = device_with(cfg, gather, 0.0);
                    assert_matches_reference(p, &bufs, &mut dev);
                }
            }
        }
    }
}

#[test]
fn window_group_and_chains() {
    let n = 4096;
    let x: Vec<u32> = (0..n as u32).map(|i| i.wrapping_mul(7919) % 1000).collect();
    let mut bufs = HostBuffers::new();
    let ix = bufs.insert(&x);
    let w = bufs.declare::<u32>();
    let g = bufs.declare::<u32>();
    let f = bufs.declare::<u32>();
    let s = bufs.declare::<u32>();
    let ov = bufs.insert(&[5u32, 6]);
    let mut p = Pipeline::new(n);
    p.add_stage(
        StageSpec::window(
            KernelSpec::new("win3", |a| {
                let v = a.at::<u32>(0, 0) + a.at::<u32>(0, 1) + a.at::<u32>(0, 2);
                a.set(1, v);
            }),
            3,
            vec![ArgSpec::input::<u32>(ix), ArgSpec::output::<u32>(w)],
        )
        .with_overlap(ov),
    )
    .unwrap();
    p.add_stage(StageSpec::group(
        KernelSpec::new("pair", |a| {
            let v = a.at::<u32>(0, 0).max(a.at::<u32>(0, 1));
            a.set(1, v);
        }),
        2,
        vec![ArgSpec::input::<u32>(w), ArgSpec::output::<u32>(g)],
    ))
    .unwrap();
    p.add_stage(StageSpec::filter(
        KernelSpec::select("odd", |a| a.get::<u32>(0) % 2 == 1),
        vec![ArgSpec::output::<u32>(f), ArgSpec::input::<u32>(g)],
    ))
    .unwrap();
    p.add_stage(StageSpec::reduce(
        sum_kernel(),
        vec![ArgSpec::reduce_out::<u32>(s, 1), ArgSpec::input::<u32>(f)],
    ))
    .unwrap();
    for b in [w, g, f, s] {
        p.fetch(b).unwrap();
    }
    for (dpus, tasklets, ratio) in [(1, 1, 0.0), (3, 5, 0.0), (16, 11, 0.25)] {
        let cfg = DeviceConfig {
            n_dpus: dpus,
            tasklets,
            ..DeviceConfig::default()
        };
        for gather in [XferMode::Serial, XferMode::Parallel] {
            let mut dev = device_with(cfg, gather, ratio);
            assert_matches_reference(p.clone(), &bufs, &mut dev);
        }
    }
}

#[test]
fn truncated_window_without_overlap() {
    for n in [2usize, 5, 97, 1024] {
        let x: Vec<u32> = (0..n as u32).map(|i| i * 3 + 1).collect();
        let mut bufs = HostBuffers::new();
        let ix = bufs.insert(&x);
        let y = bufs.declare::<u32>();
        let mut p = Pipeline::new(n);
        p.add_stage(StageSpec::window(
            KernelSpec::new("diff", |a| {
                let v = a.at::<u32>(0, 1).wrapping_sub(a.at::<u32>(0, 0));
                a.set(1, v);
            }),
            2,
            vec![ArgSpec::input::<u32>(ix), ArgSpec::output::<u32>(y)],
        ))
        .unwrap();
        p.fetch(y).unwrap();
        for (dpus, ratio) in [(1, 0.0), (4, 0.0), (4, 0.5)] {
            let cfg = DeviceConfig {
                n_dpus: dpus,
                tasklets: 3,
                ..DeviceConfig::default()
            };
            let mut dev = device_with(cfg, XferMode::Parallel, ratio);
            let (got, _) = assert_matches_reference(p.clone(), &bufs, &mut dev);
            assert_eq!(from_bytes::<u32>(got.bytes(y).unwrap()), vec![3; n - 1]);
        }
    }
}
