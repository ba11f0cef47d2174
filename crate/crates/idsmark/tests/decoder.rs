use idsmark::decoder::{
    build_window_table, decode, extract_path, forward_backward_dm1, forward_backward_fsmc,
    resynchronize, x_max_for_offset, DecoderKind, DriftLattice,
};
use idsmark::markov::{ChannelParams, TransitionMatrix3, D3, I3, T};
use idsmark::{Bit, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn hand_params() -> ChannelParams {
    ChannelParams {
        p_t: 0.8,
        p_s: 0.0,
        p_d: 0.1,
        p_i: 0.1,
        p_hat_t: 0.9,
        p_f: 0.2,
        i_m: 1,
    }
}

fn column(lattice: &DriftLattice, columns: &[Vec<f64>], n: usize) -> Vec<(i32, f64)> {
    columns[n]
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(s, v)| (lattice.drift_at(s), *v))
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn three_bit_instance_matches_hand_computed_columns() {
    let p = hand_params();
    let received: [Bit; 2] = [1, 0];
    let watermark: [Bit; 3] = [1, 1, 0];
    let lattice = forward_backward_dm1(&p, &received, &watermark).unwrap();

    assert_eq!(lattice.gamma(), 3);
    assert_eq!(lattice.x_max(), 5);

    assert_eq!(column(&lattice, &lattice.forward, 0), vec![(0, 1.0)]);
    assert_eq!(column(&lattice, &lattice.backward, 2), vec![(-1, 1.0)]);

    let f2 = column(&lattice, &lattice.forward, 1);
    let f2_expected = [(-1, 0.1 / 0.754), (0, 0.645 / 0.754), (1, 0.009 / 0.754)];
    assert_eq!(f2.len(), 3);
    for ((k, v), (ek, ev)) in f2.iter().zip(f2_expected) {
        assert_eq!(*k, ek);
        assert!(close(*v, ev, 1e-12), "forward drift {k}: {v} vs {ev}");
    }

    let b2 = column(&lattice, &lattice.backward, 1);
    let b2_expected = [(-2, 0.036 / 0.781), (-1, 0.645 / 0.781), (0, 0.1 / 0.781)];
    assert_eq!(b2.len(), 3);
    for ((k, v), (ek, ev)) in b2.iter().zip(b2_expected) {
        assert_eq!(*k, ek);
        assert!(close(*v, ev, 1e-12), "backward drift {k}: {v} vs {ev}");
    }

    let p2 = column(&lattice, &lattice.posterior, 1);
    assert_eq!(p2.len(), 2);
    assert_eq!(p2[0].0, -1);
    assert_eq!(p2[1].0, 0);
    assert!(close(p2[0].1, 0.5, 1e-12));
    assert!(close(p2[1].1, 0.5, 1e-12));
}

#[test]
fn three_bit_posteriors_agree_across_decoders() {
    // With three time steps every interior column sits next to a boundary,
    // so the three decoders reduce to the same first-order computation.
    let p = hand_params();
    let received: [Bit; 2] = [1, 0];
    let watermark: [Bit; 3] = [1, 1, 0];
    let a3 = TransitionMatrix3::new([[0.8, 0.1, 0.1], [0.7, 0.2, 0.1], [0.6, 0.2, 0.2]]).unwrap();

    let reference = forward_backward_dm1(&p, &received, &watermark).unwrap();
    for kind in [DecoderKind::Dm2, DecoderKind::Fsmc] {
        let lattice = decode(kind, &p, &a3, &received, &watermark).unwrap();
        for n in 0..3 {
            for s in 0..lattice.n_states() {
                assert!(
                    close(lattice.posterior[n][s], reference.posterior[n][s], 1e-12),
                    "{kind} posterior column {n} state {s}"
                );
            }
        }
    }
}

#[test]
fn window_table_matches_hand_expressions() {
    let a3 = TransitionMatrix3::new([[0.8, 0.1, 0.1], [0.7, 0.2, 0.1], [0.6, 0.2, 0.2]]).unwrap();
    let table = build_window_table(&a3, 1).unwrap();
    assert_eq!(table.i_m(), 1);

    // (coeff, ends_in_transmission) per cell, pairs ordered with the
    // transmission-ending sequence first in each interval.
    type Cell<'a> = (i32, i32, &'a [(f64, bool)]);
    let expected: [Cell; 9] = [
        (0, 0, &[(0.2, false)]),
        (0, 1, &[(0.7, true), (0.1 * 0.2 / 2.0, false)]),
        (0, 2, &[(0.1 * 0.6 / 2.0, true)]),
        (1, 0, &[(0.1, false), (0.2 * 0.2, false)]),
        (
            1,
            1,
            &[
                (0.8, true),
                (0.1 * 0.2 / 2.0, false),
                (0.2 * 0.7, true),
                (0.2 * 0.1 * 0.2 / 2.0, false),
            ],
        ),
        (
            1,
            2,
            &[(0.1 * 0.6 / 2.0, true), (0.2 * 0.1 * 0.6 / 2.0, true)],
        ),
        (2, 0, &[(0.6 * 0.1, false)]),
        (2, 1, &[(0.6 * 0.8, true), (0.6 * 0.1 * 0.2 / 2.0, false)]),
        (2, 2, &[(0.6 * 0.1 * 0.6 / 2.0, true)]),
    ];
    for (b1, b2, terms) in expected {
        let got = table.terms(b1, b2);
        assert_eq!(got.len(), terms.len(), "cell ({b1}, {b2}) term count");
        for (t, (coeff, flag)) in got.iter().zip(terms) {
            assert!(
                close(t.coeff, *coeff, 1e-15),
                "cell ({b1}, {b2}): {} vs {coeff}",
                t.coeff
            );
            assert_eq!(t.ends_in_transmission, *flag, "cell ({b1}, {b2}) flag");
        }
    }
    assert!(table.terms(3, 0).is_empty());
    assert!(table.terms(0, 3).is_empty());
    assert!(table.terms(-1, 1).is_empty());
}

#[test]
fn identical_rows_reduce_window_terms_to_independent_products() {
    // When every row of the matrix is the same, each term loses its
    // dependence on the first interval's opening event and becomes a plain
    // product of row entries over the remaining events.
    let row = [0.9, 0.06, 0.04];
    let a3 = TransitionMatrix3::new([row; 3]).unwrap();
    for i_m in [1usize, 2] {
        let table = build_window_table(&a3, i_m).unwrap();
        let sequences = |bits: usize| -> Vec<Vec<usize>> {
            let mut v = Vec::new();
            if bits >= 1 && bits - 1 <= i_m {
                let mut s = vec![I3; bits - 1];
                s.push(T);
                v.push(s);
            }
            if bits <= i_m {
                let mut s = vec![I3; bits];
                s.push(D3);
                v.push(s);
            }
            v
        };
        for b1 in 0..=i_m + 1 {
            for b2 in 0..=i_m + 1 {
                let mut expected = Vec::new();
                for s1 in sequences(b1) {
                    for s2 in sequences(b2) {
                        let inserts2 = s2.iter().filter(|&&e| e == I3).count();
                        let mut coeff = 0.5f64.powi(inserts2 as i32);
                        for &e in s1[1..].iter().chain(s2.iter()) {
                            coeff *= row[e];
                        }
                        expected.push((coeff, *s2.last().unwrap() == T));
                    }
                }
                let got = table.terms(b1 as i32, b2 as i32);
                assert_eq!(got.len(), expected.len(), "cell ({b1}, {b2})");
                for (t, (coeff, flag)) in got.iter().zip(expected) {
                    assert!(close(t.coeff, coeff, 1e-15), "cell ({b1}, {b2})");
                    assert_eq!(t.ends_in_transmission, flag);
                }
            }
        }
    }
}

#[test]
fn window_table_validates_its_inputs() {
    let a3 = TransitionMatrix3::new([[0.9, 0.05, 0.05]; 3]).unwrap();
    assert!(matches!(
        build_window_table(&a3, 0),
        Err(Error::InvalidConfig(_))
    ));
    let table = build_window_table(&a3, 2).unwrap();
    let p = hand_params();
    assert!(matches!(
        forward_backward_fsmc(&p, &table, &[1, 0], &[1, 1, 0]),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn lattice_width_scales_with_the_final_offset() {
    assert_eq!(x_max_for_offset(0), 5);
    assert_eq!(x_max_for_offset(-1), 5);
    assert_eq!(x_max_for_offset(2), 10);
    assert_eq!(x_max_for_offset(-5), 25);
    assert_eq!(x_max_for_offset(3), 15);

    let p = ChannelParams {
        p_t: 0.4,
        p_s: 0.0,
        p_d: 0.5,
        p_i: 0.05,
        p_hat_t: 0.45,
        p_f: 0.3,
        i_m: 1,
    };
    let watermark = vec![1, 0, 1, 0, 1, 0, 1];
    let lattice = forward_backward_dm1(&p, &[1, 0], &watermark).unwrap();
    assert_eq!(lattice.x_max(), 25);
    assert_eq!(lattice.n_states(), 51);
    assert_eq!(lattice.drift_at(0), -25);
    assert_eq!(lattice.drift_at(50), 25);
    assert_eq!(lattice.state_of(25), Some(50));
    assert_eq!(lattice.state_of(-26), None);
    assert_eq!(lattice.state_of(26), None);

    let same_length = forward_backward_dm1(&p, &[1, 0, 1], &[1, 0, 1]).unwrap();
    assert_eq!(same_length.x_max(), 5);
}

#[test]
fn noiseless_decoding_recovers_the_sent_bits_exactly() {
    let p = ChannelParams {
        p_t: 1.0,
        p_s: 0.0,
        p_d: 0.0,
        p_i: 0.0,
        p_hat_t: 1.0,
        p_f: 0.3125,
        i_m: 1,
    };
    let a3 = TransitionMatrix3::new([[1.0, 0.0, 0.0]; 3]).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(40);
    let watermark: Vec<Bit> = (0..60).map(|_| rng.random_range(0..=1) as Bit).collect();
    let sparse: Vec<Bit> = (0..60)
        .map(|_| u8::from(rng.random::<f64>() < 0.3))
        .collect();
    let received: Vec<Bit> = watermark.iter().zip(&sparse).map(|(w, s)| w ^ s).collect();

    for kind in DecoderKind::ALL {
        let lattice = decode(kind, &p, &a3, &received, &watermark).unwrap();
        for n in 0..lattice.gamma() {
            let col = column(&lattice, &lattice.posterior, n);
            assert_eq!(col, vec![(0, 1.0)], "{kind} column {n}");
        }
        let path = extract_path(&lattice, p.i_m);
        assert_eq!(path, vec![0; 60]);
        let resynced = resynchronize(&received, &path, 0).unwrap();
        assert_eq!(resynced, received, "{kind}");
    }
}

#[test]
fn path_extraction_ignores_posterior_column_scaling() {
    let p = hand_params();
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    let watermark: Vec<Bit> = (0..30).map(|_| rng.random_range(0..=1) as Bit).collect();
    let a3 = TransitionMatrix3::new([[0.85, 0.08, 0.07], [0.80, 0.12, 0.08], [0.75, 0.15, 0.10]])
        .unwrap();
    let record = idsmark::channel::transmit(&a3, 0.02, 1, &watermark, &mut rng).unwrap();

    let lattice = decode(DecoderKind::Dm1, &p, &a3, &record.received, &watermark).unwrap();
    let path = extract_path(&lattice, p.i_m);

    let mut scaled = lattice.clone();
    for (n, col) in scaled.posterior.iter_mut().enumerate() {
        let factor = 0.31 * (n % 7 + 1) as f64;
        for v in col.iter_mut() {
            *v *= factor;
        }
    }
    assert_eq!(extract_path(&scaled, p.i_m), path);
}

#[test]
fn a_single_deletion_is_localised_by_the_path() {
    let p = ChannelParams {
        p_t: 0.89,
        p_s: 0.0,
        p_d: 0.1,
        p_i: 0.01,
        p_hat_t: 0.9,
        p_f: 0.05,
        i_m: 1,
    };
    let watermark: Vec<Bit> = (0..20).map(|n| (n % 2 == 0) as Bit).collect();
    let mut received = watermark.clone();
    received.remove(5);

    let lattice = forward_backward_dm1(&p, &received, &watermark).unwrap();
    let path = extract_path(&lattice, p.i_m);
    assert_eq!(path[0], 0);
    assert_eq!(*path.last().unwrap(), -1);
    let drops: Vec<usize> = path
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0])
        .map(|(n, _)| n + 1)
        .collect();
    assert_eq!(drops.len(), 1, "path {path:?}");
    assert!(path.windows(2).all(|w| w[1] - w[0] <= 0), "path {path:?}");
    assert!(
        (4..=8).contains(&drops[0]),
        "deletion localised at {} in {path:?}",
        drops[0]
    );
}

#[test]
fn resynchronisation_rebuilds_known_alignments() {
    // Straight copy.
    assert_eq!(
        resynchronize(&[1, 0, 1], &[0, 0, 0], 0).unwrap(),
        vec![1, 0, 1]
    );
    // Deletion of bit 2: its slot reads as zero, later bits realign.
    assert_eq!(
        resynchronize(&[1, 0, 1], &[0, 0, -1, -1], -1).unwrap(),
        vec![1, 0, 0, 1]
    );
    // Insertion during step 2: the inserted bit is skipped entirely.
    assert_eq!(
        resynchronize(&[1, 1, 0, 1], &[0, 0, 1], 1).unwrap(),
        vec![1, 0, 1]
    );
    // Positions past the received end read as zero.
    assert_eq!(resynchronize(&[1], &[0, 0], 0).unwrap(), vec![1, 0]);
}

#[test]
fn resynchronisation_rejects_double_drops_but_accepts_the_fallback() {
    let err = resynchronize(&[1, 0], &[0, -2, -2], -2).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)));

    // The all-zero fallback path closes straight onto the final offset,
    // which may be several steps down; that jump is legal.
    let out = resynchronize(&[1, 0], &[0; 5], -3).unwrap();
    assert_eq!(out.len(), 5);
    assert_eq!(out[4], 0);
}

#[test]
fn impossible_instances_fail_instead_of_guessing() {
    // No deletions in the model, yet the received sequence is short.
    let p = ChannelParams {
        p_t: 0.9,
        p_s: 0.0,
        p_d: 0.0,
        p_i: 0.1,
        p_hat_t: 0.9,
        p_f: 0.2,
        i_m: 1,
    };
    let watermark = vec![1, 0, 1, 1];
    let err = forward_backward_dm1(&p, &[1, 0, 1], &watermark).unwrap_err();
    assert!(matches!(err, Error::DecoderFailure { .. }), "{err:?}");
}

#[test]
fn lattice_dump_has_one_row_per_pass_and_state() {
    let p = hand_params();
    let lattice = forward_backward_dm1(&p, &[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap();
    let mut buffer = Vec::new();
    lattice.dump_csv(&mut buffer).unwrap();
    let text = String::from_utf8(buffer).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pass,drift,t1,t2,t3,t4");
    assert_eq!(lines.len(), 1 + 3 * lattice.n_states());
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 2 + lattice.gamma());
    }
    assert!(lines[1].starts_with("forward,-5,"));
    assert!(lines.last().unwrap().starts_with("posterior,5,"));
}

#[test]
fn decoder_names_round_trip() {
    for kind in DecoderKind::ALL {
        assert_eq!(kind.name().parse::<DecoderKind>().unwrap(), kind);
        assert_eq!(kind.to_string(), kind.name());
    }
    assert!("dm3".parse::<DecoderKind>().is_err());
    assert!("DM1".parse::<DecoderKind>().is_err());
}
