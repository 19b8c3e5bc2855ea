use depevap::exact::{build_state, success_probability};
use depevap::lattice::decode_config;
use depevap::model::{BoundaryMode, ModelParams};
use depevap::seqgen::{apply_round, fidelity, local_channel, run_generation, JointState, Marker};

fn params(size: usize, p: f64, colored: bool) -> ModelParams {
    ModelParams::new(size, p, BoundaryMode::Reflecting, colored, 0).unwrap()
}

#[test]
fn channels_are_isometries_on_reachable_windows() {
    for p in [0.0, 0.25, 0.37, 0.5, 0.75, 1.0] {
        for colored in [true, false] {
            for marker in [Marker::E, Marker::F] {
                let ch = local_channel(marker, &params(5, p, colored), 3);
                assert!(ch.column_norms().iter().all(|n| (n - 1.0).abs() < 1e-12));
                assert!(ch.orthonormality_defect() < 1e-12);
            }
        }
    }
}

#[test]
fn generator_reproduces_exact_state() {
    for size in [3, 5] {
        for p in [0.3, 0.5, 0.8] {
            for colored in [true, false] {
                let pr = params(size, p, colored);
                let generated = run_generation(&pr, false).unwrap();
                let exact = build_state(&pr).unwrap();
                let f = fidelity(&generated.state, &exact).unwrap();
                assert!(f >= 1.0 - 1e-10, "L={size} p={p} colored={colored}: {f}");
                assert_eq!(generated.state.len(), exact.len());
                let s = success_probability(&pr).unwrap();
                assert!((generated.success_probability - s).abs() < 1e-12);
                for (config, _) in generated.state.configs().unwrap() {
                    decode_config(&config, &pr).unwrap();
                }
            }
        }
    }
}

#[test]
fn rounds_conserve_norm() {
    let pr = params(5, 0.5, true);
    let mut joint = JointState::initial(&pr).unwrap();
    for n in 1..=5 {
        joint = apply_round(&joint, n, &pr).unwrap();
        assert!((joint.norm_sq() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn first_round_branch_count() {
    // Round 1 at L=5 updates sites 2 and 4, both valleys: each has no-change or two deposits.
    let pr = params(5, 0.5, true);
    let joint = apply_round(&JointState::initial(&pr).unwrap(), 1, &pr).unwrap();
    assert_eq!(joint.entries.len(), 9);
}

#[test]
fn cooling_raises_success() {
    let pr = params(5, 0.8, true);
    let plain = run_generation(&pr, false).unwrap();
    let cooled = run_generation(&pr, true).unwrap();
    eprintln!(
        "success {} -> {}",
        plain.success_probability, cooled.success_probability
    );
    assert!(cooled.success_probability > plain.success_probability);
}

#[test]
fn fidelity_properties() {
    let a = build_state(&params(5, 0.5, true)).unwrap();
    let b = build_state(&params(5, 0.8, true)).unwrap();
    assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
    assert!(fidelity(&a, &build_state(&params(5, 0.5, false)).unwrap()).is_err());
}
