use cosmos_sim::controller::MemoryRequest;
use cosmos_sim::geometry::ArrayGeometry;
use cosmos_sim::sim::trace::{gen_trace, load_trace, write_trace, GenOptions, TracePattern};
use cosmos_sim::sim::trace_digest;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn million_line_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut t = 0u64;
    let requests: Vec<MemoryRequest> = (0..1_000_000u64)
        .map(|id| {
            t += rng.gen_range(0..5_000);
            let address = rng.gen_range(0..1u64 << 25) * 64;
            if rng.gen_bool(0.5) {
                MemoryRequest::read(id, t, address)
            } else {
                let mut d = vec![0u8; 64];
                rng.fill(&mut d[..]);
                MemoryRequest::write(id, t, address, d)
            }
        })
        .collect();
    let text = write_trace(&requests);
    let loaded = load_trace(&text, 64, 0).unwrap();
    assert!(loaded.warnings.is_empty());
    assert_eq!(loaded.requests.len(), requests.len());
    assert!(loaded.requests == requests, "round trip altered a request");
    assert_eq!(write_trace(&loaded.requests), text);
}

#[test]
fn generated_traces_are_reproducible() {
    let g = ArrayGeometry::cosmos_4bit();
    for pattern in [
        TracePattern::SaturateWrite,
        TracePattern::SaturateRead,
        TracePattern::Mixed { read_fraction: 0.67 },
        TracePattern::Random,
    ] {
        let a = gen_trace(pattern, 3_000, 17, &g, &GenOptions::default()).unwrap();
        let b = gen_trace(pattern, 3_000, 17, &g, &GenOptions::default()).unwrap();
        let c = gen_trace(pattern, 3_000, 18, &g, &GenOptions::default()).unwrap();
        assert_eq!(trace_digest(&a), trace_digest(&b));
        if !matches!(pattern, TracePattern::SaturateRead) {
            assert_ne!(trace_digest(&a), trace_digest(&c));
        }
        let reloaded = load_trace(&write_trace(&a), 64, 0).unwrap().requests;
        assert_eq!(trace_digest(&reloaded), trace_digest(&a));
    }
}

proptest! {
    #[test]
    fn mixed_read_count_is_exact(len in 1usize..2_000, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = ArrayGeometry::cosmos_8bit();
        let t = gen_trace(TracePattern::Mixed { read_fraction: frac }, len, seed, &g, &GenOptions::default()).unwrap();
        let reads = t.iter().filter(|r| r.data.is_none()).count();
        prop_assert_eq!(reads, (frac * len as f64).round() as usize);
        prop_assert!(t.windows(2).all(|w| w[0].arrival <= w[1].arrival));
    }
}
