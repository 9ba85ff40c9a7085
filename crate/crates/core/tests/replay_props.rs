use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrtwin_core::replay::{BufferConfig, ReplayBuffer, ReplayMode, Transition};

fn config(mode: ReplayMode, capacity: usize, beta1: f64) -> BufferConfig {
    BufferConfig { capacity, beta1, beta2: 0.4, mu: 0.95, eps2: 0.01, eps3: 0.001, mode }
}

fn tr(x: f64) -> Transition {
    Transition { state: vec![x], action: vec![x], reward: x, next_state: vec![x] }
}

#[derive(Debug, Clone)]
enum Op {
    Push,
    Sample(usize),
    Update(f64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Push),
        (1usize..6).prop_map(Op::Sample),
        (0.0f64..5.0).prop_map(Op::Update),
    ]
}

fn mode() -> impl Strategy<Value = ReplayMode> {
    prop_oneof![Just(ReplayMode::Uniform), Just(ReplayMode::Per), Just(ReplayMode::Fper)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn interleaved_operations_keep_the_buffer_consistent(
        mode in mode(),
        capacity in 1usize..12,
        beta1 in 0.0f64..1.0,
        ops in prop::collection::vec(op(), 1..80),
        seed in any::<u64>(),
    ) {
        let mut buf = ReplayBuffer::new(config(mode, capacity, beta1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pending = Vec::new();
        let mut pushes = 0usize;
        for o in ops {
            match o {
                Op::Push => {
                    buf.push(tr(pushes as f64));
                    pushes += 1;
                }
                Op::Sample(b) if !buf.is_empty() => {
                    let s = buf.sample(b, &mut rng).unwrap();
                    prop_assert_eq!(s.tickets.len(), b);
                    prop_assert!(s.weights.iter().all(|w| *w > 0.0 && *w <= 1.0 + 1e-12));
                    prop_assert!(s.probabilities.iter().all(|p| *p > 0.0 && *p <= 1.0 + 1e-12));
                    pending = s.tickets;
                }
                Op::Sample(_) => {}
                Op::Update(d) => {
                    let tds = vec![d; pending.len()];
                    buf.update_priorities(&pending, &tds);
                }
            }
            prop_assert_eq!(buf.len(), pushes.min(capacity));
            let mass: f64 = (0..buf.len()).map(|i| buf.entry(i).priority.powf(beta1)).sum();
            let root = buf.priority_mass();
            if mode != ReplayMode::Uniform {
                prop_assert!((mass - root).abs() <= 1e-9 * mass.max(1.0), "{} vs {}", mass, root);
            }
            if !buf.is_empty() {
                let total: f64 = (0..buf.len()).map(|i| buf.probability(i)).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn snapshot_round_trip_is_lossless(
        mode in mode(),
        n in 1usize..30,
        tds in prop::collection::vec(0.0f64..3.0, 4),
        seed in any::<u64>(),
    ) {
        let mut buf = ReplayBuffer::new(config(mode, 16, 0.6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            buf.push(tr(i as f64));
        }
        let s = buf.sample(4, &mut rng).unwrap();
        buf.update_priorities(&s.tickets, &tds);
        let restored = ReplayBuffer::from_bytes(&buf.to_bytes()).unwrap();
        prop_assert_eq!(restored.to_bytes(), buf.to_bytes());
        let mut a = buf;
        let mut b = restored;
        let mut ra = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut rb = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let sa = a.sample(5, &mut ra).unwrap();
        let sb = b.sample(5, &mut rb).unwrap();
        prop_assert_eq!(sa.tickets, sb.tickets);
        prop_assert_eq!(sa.weights, sb.weights);
    }

    #[test]
    fn fresher_entries_keep_more_priority(replays_a in 0u32..20, extra in 1u32..20, td in 0.1f64..5.0) {
        let mut buf = ReplayBuffer::new(config(ReplayMode::Fper, 2, 0.6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let prio_after = |buf: &mut ReplayBuffer, rng: &mut ChaCha8Rng, times: u32| {
            let mut last = Vec::new();
            for _ in 0..times.max(1) {
                last = buf.sample(1, rng).unwrap().tickets;
            }
            buf.update_priorities(&last, &[td]);
            buf.entry(last[0].index).priority
        };
        buf.push(tr(0.0));
        let fresh = prio_after(&mut buf, &mut rng, replays_a.max(1));
        let mut other = ReplayBuffer::new(config(ReplayMode::Fper, 2, 0.6)).unwrap();
        other.push(tr(0.0));
        let stale = prio_after(&mut other, &mut rng, replays_a.max(1) + extra);
        prop_assert!(stale < fresh);
    }
}
