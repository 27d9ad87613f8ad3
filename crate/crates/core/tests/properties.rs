mod common;

use proptest::prelude::*;

use pimflow::hostrt::{combine_reduce_partials, compact_filter_output, GatherBlock};
use pimflow::planner::{mram_capacity, rounds_and_leftover, wram_element_count, FilterCursor};
use pimflow::pipeline::host_reference;
use pimflow::{emit_program_text, parse_program_text, BufferId, DeviceConfig, XferMode};

fn pad8(n: usize) -> usize {
    n.div_ceil(8) * 8
}

fn sizes() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(prop::sample::select(vec![1usize, 2, 4, 8]), 1..6)
}

proptest! {
    #[test]
    fn wram_count_is_the_largest_that_fits(sizes in sizes(), budget in 0usize..4096) {
        let need = |c: usize| sizes.iter().map(|s| pad8(c * s)).sum::<usize>();
        match wram_element_count(&sizes, budget) {
            Ok(p) => {
                let c = p.elems_per_block;
                prop_assert!(c >= 1 && need(c) <= budget && need(c + 1) > budget);
                prop_assert!(p.regions.iter().all(|r| r.offset % 8 == 0 && r.padded % 8 == 0));
                let end = p.regions.last().map(|r| r.offset + r.padded).unwrap();
                prop_assert_eq!(end, need(c));
            }
            Err(_) => prop_assert!(need(1) > budget),
        }
    }

    #[test]
    fn mram_regions_follow_the_header(sizes in sizes(), budget in 0usize..1 << 16, header in 0usize..256) {
        if let Ok(p) = mram_capacity(&sizes, budget, header) {
            prop_assert_eq!(p.regions[0].offset, pad8(header));
            for w in p.regions.windows(2) {
                prop_assert_eq!(w[0].offset + w[0].padded, w[1].offset);
            }
            let end = p.regions.last().map(|r| r.offset + r.padded).unwrap();
            prop_assert!(end <= budget);
        }
    }

    #[test]
    fn rounds_conserve_elements(
        total in 0usize..1 << 24,
        capacity in 0usize..1 << 20,
        n_dpus in 1usize..128,
        align in prop::sample::select(vec![1usize, 2, 4, 8, 32]),
    ) {
        let s = rounds_and_leftover(total, capacity, n_dpus, align);
        prop_assert_eq!(s.nr_rounds * s.elements_per_round + s.cpu_leftover, total);
        prop_assert_eq!(s.elements_per_round % (n_dpus * align), 0);
    }

    #[test]
    fn filter_writes_stay_aligned_and_contiguous(
        size in prop::sample::select(vec![1usize, 2, 4, 8]),
        keeps in prop::collection::vec(0usize..40, 1..12),
    ) {
        let mut c = FilterCursor::new(size);
        let mut total = 0;
        for &k in &keeps {
            let (base, _, append_at) = c.next_block();
            prop_assert_eq!(base + append_at, total * size);
            let w = c.commit(k);
            total += k;
            prop_assert_eq!(w.mram_offset % 8, 0);
            prop_assert_eq!(w.bytes % 8, 0);
            if w.bytes > 0 {
                prop_assert_eq!(w.mram_offset + w.bytes, pad8(total * size));
            }
        }
        prop_assert_eq!(c.kept_elems(), total);
    }

    #[test]
    fn compaction_concatenates_valid_prefixes(
        blocks in prop::collection::vec((0usize..20, 0usize..20), 0..16),
        size in prop::sample::select(vec![1usize, 4, 8]),
    ) {
        let mut want = Vec::new();
        let gathered: Vec<GatherBlock> = blocks
            .iter()
            .enumerate()
            .map(|(i, &(valid, extra))| {
                let cap = valid + extra;
                let payload: Vec<u8> = (0..cap * size).map(|j| (i * 31 + j) as u8).collect();
                want.extend_from_slice(&payload[..valid * size]);
                GatherBlock { round: 0, dpu: i, tasklet: 0, buffer: BufferId(0), valid_count: valid, capacity: cap, payload }
            })
            .collect();
        let (bytes, n) = compact_filter_output(&gathered, size).unwrap();
        prop_assert_eq!(n * size, want.len());
        prop_assert_eq!(bytes, want);
    }

    #[test]
    fn combining_keeps_partial_order(parts in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..4), 0..40)) {
        let want: Vec<u8> = parts.concat();
        let got = combine_reduce_partials(parts.clone(), |mut a: Vec<u8>, b| {
            a.extend(b);
            Ok::<_, ()>(a)
        })
        .unwrap();
        prop_assert_eq!(got.unwrap_or_default(), want);
    }

    #[test]
    fn vecdot_matches_reference_on_any_geometry(
        a in prop::collection::vec(any::<u32>(), 0..700),
        n_dpus in 1usize..9,
        tasklets in 1usize..24,
        serial in any::<bool>(),
    ) {
        let b: Vec<u32> = a.iter().map(|x| x.rotate_left(7)).collect();
        let (mut p, bufs, sum) = common::vecdot(&a, &b);
        let cfg = DeviceConfig { n_dpus, tasklets, ..DeviceConfig::default() };
        let gather = if serial { XferMode::Serial } else { XferMode::Parallel };
        let mut dev = common::device_with(cfg, gather, 0.0);
        let want = host_reference(p.stages(), &bufs).unwrap();
        let mut got = bufs.clone();
        p.execute(&mut dev, &mut got).unwrap();
        prop_assert_eq!(got.bytes(sum), want.bytes(sum));
    }

    #[test]
    fn program_text_round_trips(n in 0usize..100_000, n_dpus in 1usize..64, tasklets in 1usize..24) {
        let a = vec![1u32; n];
        let (p, bufs, _) = common::vecdot(&a, &a);
        let cfg = DeviceConfig { n_dpus, tasklets, ..DeviceConfig::default() };
        let prog = p.compile(&bufs, &cfg, 0.0).unwrap();
        let text = emit_program_text(&prog);
        let back = parse_program_text(&text).unwrap();
        prop_assert_eq!(&back, &prog);
        prop_assert_eq!(emit_program_text(&back), text);
    }
}
