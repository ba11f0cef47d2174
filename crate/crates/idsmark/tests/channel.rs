use idsmark::channel::{transmit, Event};
use idsmark::markov::{TransitionMatrix3, D3, I3, T};
use idsmark::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn noisy_a3() -> TransitionMatrix3 {
    TransitionMatrix3::new([[0.90, 0.05, 0.05], [0.80, 0.10, 0.10], [0.70, 0.15, 0.15]]).unwrap()
}

fn bits(n: usize, seed: u64) -> Vec<u8> {
    use rand::Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..=1) as u8).collect()
}

#[test]
fn noiseless_channel_is_the_identity() {
    let a3 = TransitionMatrix3::new([[1.0, 0.0, 0.0]; 3]).unwrap();
    let sent = bits(200, 1);
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let record = transmit(&a3, 0.0, 1, &sent, &mut rng).unwrap();
    assert_eq!(record.received, sent);
    assert_eq!(record.final_offset, 0);
    assert_eq!(record.drift, vec![0; 200]);
    assert_eq!(record.counts.transmissions, 200);
    assert_eq!(record.counts.substitutions, 0);
    assert_eq!(record.counts.deletions, 0);
    assert_eq!(record.counts.insertions, 0);
    assert!(record
        .steps
        .iter()
        .all(|s| s == &[Event::Transmit { substituted: false }]));
}

#[test]
fn substitutions_flip_bits_without_moving_them() {
    let a3 = TransitionMatrix3::new([[1.0, 0.0, 0.0]; 3]).unwrap();
    let sent = vec![0u8; 300];
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let record = transmit(&a3, 0.5, 1, &sent, &mut rng).unwrap();
    assert_eq!(record.received.len(), 300);
    let flips: usize = record.received.iter().map(|&b| b as usize).sum();
    assert_eq!(flips, record.counts.substitutions);
    assert!((50..250).contains(&flips), "suspicious flip count {flips}");
    assert!((record.realized_ps() - flips as f64 / 300.0).abs() < 1e-15);
}

#[test]
fn received_length_tracks_the_final_offset() {
    let sent = bits(400, 4);
    for seed in 0..20 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let record = transmit(&noisy_a3(), 0.05, 1, &sent, &mut rng).unwrap();
        assert_eq!(
            record.received.len() as i32,
            sent.len() as i32 + record.final_offset
        );
        assert_eq!(record.transmitted, sent);
        assert_eq!(record.drift.len(), sent.len());
        assert_eq!(record.steps.len(), sent.len());
    }
}

#[test]
fn drift_and_counts_recompute_from_the_event_log() {
    let sent = bits(500, 5);
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let record = transmit(&noisy_a3(), 0.1, 1, &sent, &mut rng).unwrap();

    let mut offset = 0i32;
    let mut emitted = 0usize;
    let (mut t, mut s, mut d, mut i) = (0usize, 0usize, 0usize, 0usize);
    for (n, step) in record.steps.iter().enumerate() {
        assert_eq!(record.drift[n], offset, "drift before step {n}");
        for event in step {
            match event {
                Event::Transmit { substituted } => {
                    t += 1;
                    s += usize::from(*substituted);
                    emitted += 1;
                    assert_eq!(event.state_index(), T);
                }
                Event::Delete => {
                    d += 1;
                    offset -= 1;
                    assert_eq!(event.state_index(), D3);
                }
                Event::Insert => {
                    i += 1;
                    offset += 1;
                    emitted += 1;
                    assert_eq!(event.state_index(), I3);
                }
            }
        }
    }
    assert_eq!(offset, record.final_offset);
    assert_eq!(emitted, record.received.len());
    assert_eq!(t, record.counts.transmissions);
    assert_eq!(s, record.counts.substitutions);
    assert_eq!(d, record.counts.deletions);
    assert_eq!(i, record.counts.insertions);
    assert_eq!(t + d, sent.len());
    assert!((record.realized_pd() - d as f64 / 500.0).abs() < 1e-15);
    assert!((record.realized_pi() - i as f64 / 500.0).abs() < 1e-15);
}

#[test]
fn each_step_is_inserts_then_one_resolution() {
    let sent = bits(500, 7);
    for i_m in [1usize, 2, 3] {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let record = transmit(&noisy_a3(), 0.1, i_m, &sent, &mut rng).unwrap();
        for step in &record.steps {
            let (head, tail) = step.split_at(step.len() - 1);
            assert!(head.len() <= i_m, "more than {i_m} insertions in one step");
            assert!(head.iter().all(|e| *e == Event::Insert));
            assert!(matches!(tail[0], Event::Transmit { .. } | Event::Delete));
        }
    }
}

#[test]
fn insertion_cap_binds_when_the_chain_loves_inserting() {
    // Insertion row almost surely re-inserts; without the cap, steps would
    // regularly carry long insertion bursts.
    let a3 =
        TransitionMatrix3::new([[0.6, 0.1, 0.3], [0.6, 0.1, 0.3], [0.01, 0.01, 0.98]]).unwrap();
    let sent = bits(300, 9);
    let mut rng = ChaCha12Rng::seed_from_u64(10);
    let record = transmit(&a3, 0.0, 1, &sent, &mut rng).unwrap();
    let max_run = record
        .steps
        .iter()
        .map(|s| s.iter().filter(|e| **e == Event::Insert).count())
        .max()
        .unwrap();
    assert_eq!(max_run, 1, "cap of one insertion per step must bind");
    assert!(
        record.counts.insertions > 20,
        "cap scenario should still insert often"
    );
}

#[test]
fn transmission_is_deterministic_for_a_fixed_seed() {
    let sent = bits(200, 11);
    let a = transmit(
        &noisy_a3(),
        0.1,
        1,
        &sent,
        &mut ChaCha12Rng::seed_from_u64(12),
    )
    .unwrap();
    let b = transmit(
        &noisy_a3(),
        0.1,
        1,
        &sent,
        &mut ChaCha12Rng::seed_from_u64(12),
    )
    .unwrap();
    assert_eq!(a.received, b.received);
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.drift, b.drift);
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    assert!(matches!(
        transmit(&noisy_a3(), -0.1, 1, &[0, 1], &mut rng),
        Err(Error::InvalidConfig(_))
    ));
    assert!(matches!(
        transmit(&noisy_a3(), 0.1, 0, &[0, 1], &mut rng),
        Err(Error::InvalidConfig(_))
    ));
    assert!(matches!(
        transmit(&noisy_a3(), 0.1, 1, &[], &mut rng),
        Err(Error::EmptyInput(_))
    ));
    assert!(matches!(
        transmit(&noisy_a3(), 0.1, 1, &[0, 2], &mut rng),
        Err(Error::InvalidBits(_))
    ));
}
