use std::time::Instant;

use pimflow::simdev::SimConfig;
use pimflow::workloads::{build_workload, loc_report, run_bench, BenchReport, Workload, WorkloadError, WorkloadSpec};
use pimflow::{DeviceConfig, Device, XferMode};

const BOTH: [XferMode; 2] = [XferMode::Serial, XferMode::Parallel];

fn small(w: Workload, seed: u64) -> WorkloadSpec {
    let mut s = WorkloadSpec::new(w).with_dpus(4, 2048).with_seed(seed);
    s.gemv_rows_per_dpu = 32;
    s.gemv_cols = 16;
    s.bins = 64;
    s
}

fn config(n_dpus: usize) -> SimConfig {
    let mut c = SimConfig::default();
    c.device.n_dpus = n_dpus;
    c
}

#[test]
fn all_workloads_pass_small() {
    for w in Workload::ALL {
        for seed in 0..3 {
            let r = run_bench(&small(w, seed), &config(4), &BOTH, true).unwrap();
            assert!(r.passed(), "{w} seed {seed}: {}", r.to_json());
            assert_eq!(r.timings.len(), 2);
        }
    }
}

#[test]
fn desk_scale_single_seed() {
    let t = Instant::now();
    for w in Workload::ALL {
        let r = run_bench(&WorkloadSpec::new(w), &SimConfig::default(), &BOTH, true).unwrap();
        assert!(r.passed(), "{w}");
        assert_eq!(r.timings["parallel"].rounds, 1);
    }
    eprintln!("desk scale: {:?}", t.elapsed());
}

fn run_on(built: &mut pimflow::workloads::BuiltWorkload) -> Vec<u32> {
    let mut dev = Device::new(DeviceConfig { n_dpus: 1, ..DeviceConfig::default() }, Default::default()).unwrap();
    let mut p = built.pipeline.clone();
    p.execute(&mut dev, &mut built.bufs).unwrap();
    built.bufs.read::<u32>(built.outputs[0]).unwrap()
}

#[test]
fn worked_examples() {
    let dev = DeviceConfig::default();
    let mut va = build_workload(&WorkloadSpec::new(Workload::Va).with_dpus(1, 8), &dev).unwrap();
    let ids: Vec<_> = va.bufs.ids().collect();
    va.bufs.write(ids[0], &(1..=8).collect::<Vec<u32>>());
    va.bufs.write(ids[1], &(1..=8).rev().collect::<Vec<u32>>());
    assert_eq!(run_on(&mut va), vec![9; 8]);

    let mut h = WorkloadSpec::new(Workload::HstS).with_dpus(1, 4);
    h.bins = 4;
    let mut hst = build_workload(&h, &dev).unwrap();
    let ids: Vec<_> = hst.bufs.ids().collect();
    hst.bufs.write(ids[0], &[0u32, 1, 1, 3]);
    assert_eq!(run_on(&mut hst), vec![1, 2, 0, 1]);

    let mut g = WorkloadSpec::new(Workload::Gemv).with_dpus(1, 0);
    g.gemv_rows_per_dpu = 2;
    g.gemv_cols = 2;
    let mut gemv = build_workload(&g, &dev).unwrap();
    let ids: Vec<_> = gemv.bufs.ids().collect();
    gemv.bufs.write(ids[0], &[1u32, 2, 3, 4]);
    gemv.bufs.write(ids[1], &[5u32, 6]);
    assert_eq!(run_on(&mut gemv), vec![17, 39]);

    let mut red = build_workload(&WorkloadSpec::new(Workload::Red).with_dpus(1, 64), &dev).unwrap();
    let ids: Vec<_> = red.bufs.ids().collect();
    red.bufs.write(ids[0], &[0u32; 64]);
    assert_eq!(run_on(&mut red), vec![0]);
}

#[test]
fn gemv_rejects_oversized_vector() {
    let mut s = small(Workload::Gemv, 0);
    s.gemv_cols = 8192;
    assert!(matches!(
        build_workload(&s, &DeviceConfig::default()),
        Err(WorkloadError::VectorTooLargeForWram { .. })
    ));
}

#[test]
fn parallel_gather_beats_serial_for_sel() {
    let r = run_bench(&small(Workload::Sel, 1), &config(16), &BOTH, false).unwrap();
    assert!(r.timings["parallel"].total_ns < r.timings["serial"].total_ns);
}

#[test]
fn report_json_round_trips() {
    let r = run_bench(&small(Workload::Uni, 2), &config(4), &BOTH, true).unwrap();
    let text = r.to_json();
    let back = BenchReport::from_json(&text).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.to_json(), text);
    assert!(text.contains("\"version\": 1"));
}

#[test]
fn loc_counts() {
    let rows = loc_report();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert!(row.framework_calls <= 5, "{:?}", row);
        if matches!(row.workload, Workload::Va | Workload::Red) {
            assert!(row.framework_calls <= 4);
        }
    }
    let loc: Vec<usize> = rows.iter().map(|r| r.reported_loc).collect();
    assert_eq!(loc, vec![6, 6, 6, 6, 9, 8]);
}

#[test]
fn verify_rejects_a_flipped_bit() {
    for w in Workload::ALL {
        let built = build_workload(&small(w, 1), &config(4).device).unwrap();
        let mut dev = Device::from_config(&config(4)).unwrap();
        let mut p = built.pipeline.clone();
        let mut bufs = built.bufs.clone();
        p.execute(&mut dev, &mut bufs).unwrap();
        assert!(built.verify(&bufs), "{w}");

        let out = built.outputs[0];
        let mut bytes = bufs.bytes(out).unwrap().to_vec();
        bytes[0] ^= 1;
        let elem = bufs.get(out).unwrap().elem.clone();
        bufs.set_bytes(out, elem, bytes);
        assert!(!built.verify(&bufs), "{w}");
    }
}
