use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

use proptest::prelude::*;

use depevap::exact::{build_state, enumerate_bridge, SparseState};
use depevap::experiment::{ExperimentKind, ExperimentManifest};
use depevap::lattice::{
    canonical_key, decode_config, encode_trajectory, gauss_residual, key_to_config, zigzag_profile, Geometry,
};
use depevap::model::{
    advance_slice, event_distribution, stream_rng, BoundaryMode, ModelParams, Parity, SiteShape, Surface,
    TrajectoryRecord,
};
use depevap::scaling::{roughness, FreeKernel};

type Bridges = Vec<(TrajectoryRecord, f64)>;

type BridgeCache = HashMap<(usize, bool, bool), &'static Bridges>;

static BRIDGES: LazyLock<Mutex<BridgeCache>> = LazyLock::new(|| Mutex::new(HashMap::new()));

fn params(size: usize, colored: bool, absorbing: bool) -> ModelParams {
    let boundary = if absorbing {
        BoundaryMode::Absorbing
    } else {
        BoundaryMode::Reflecting
    };
    ModelParams::new(size, 0.6, boundary, colored, 1).unwrap()
}

/// Bridge trajectories at `p = 0.6`, enumerated once per parameter set.
fn bridges(size: usize, colored: bool, absorbing: bool) -> &'static Bridges {
    let mut cache = BRIDGES.lock().unwrap();
    cache
        .entry((size, colored, absorbing))
        .or_insert_with(|| Box::leak(Box::new(enumerate_bridge(&params(size, colored, absorbing)).unwrap())))
}

fn bridge_case() -> impl Strategy<Value = (ModelParams, &'static TrajectoryRecord)> {
    (
        prop::sample::select(vec![3usize, 5]),
        any::<bool>(),
        any::<bool>(),
        any::<prop::sample::Index>(),
    )
        .prop_map(|(size, colored, absorbing, index)| {
            let list = bridges(size, colored, absorbing);
            (params(size, colored, absorbing), &index.get(list).0)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn encode_then_decode_recovers_the_trajectory((params, traj) in bridge_case()) {
        let config = encode_trajectory(traj, &params).unwrap();
        let back = decode_config(&config, &params).unwrap();
        prop_assert_eq!(&back.profiles, &traj.profiles);
        prop_assert!((back.weight - traj.weight).abs() < 1e-12);
    }

    #[test]
    fn gauss_law_holds_at_every_vertex((params, traj) in bridge_case()) {
        let config = encode_trajectory(traj, &params).unwrap();
        let geometry = Geometry::new(params.size).unwrap();
        for &vertex in geometry.vertices() {
            prop_assert_eq!(gauss_residual(&config, vertex).unwrap(), 0);
        }
    }

    #[test]
    fn zigzag_rows_are_the_trajectory_profiles((params, traj) in bridge_case()) {
        let config = encode_trajectory(traj, &params).unwrap();
        for row in 1..=params.size {
            prop_assert_eq!(&zigzag_profile(&config, row).unwrap(), &traj.profiles[row]);
        }
    }

    #[test]
    fn canonical_key_round_trips((params, traj) in bridge_case()) {
        let config = encode_trajectory(traj, &params).unwrap();
        let key = canonical_key(&config, params.colored);
        let geometry = Geometry::new(params.size).unwrap();
        prop_assert_eq!(key.as_bytes().len(), geometry.key_len(params.colored));
        let back = key_to_config(&key, &params).unwrap();
        prop_assert_eq!(canonical_key(&back, params.colored), key);
    }

    #[test]
    fn single_spin_flip_is_rejected((params, traj) in bridge_case(), edge in any::<prop::sample::Index>()) {
        let mut config = encode_trajectory(traj, &params).unwrap();
        let k = edge.index(config.spins.len());
        config.spins[k] = !config.spins[k];
        prop_assert!(decode_config(&config, &params).is_err());
    }

    #[test]
    fn color_swap_preserves_weight((params, traj) in bridge_case()) {
        prop_assume!(params.colored);
        let config = encode_trajectory(traj, &params).unwrap();
        let swapped = config.swapped_colors();
        prop_assert_eq!(swapped.swapped_colors(), config.clone());
        let back = decode_config(&swapped, &params).unwrap();
        prop_assert!((back.weight - traj.weight).abs() < 1e-12);
    }

    #[test]
    fn branch_probabilities_sum_to_one(
        left_up in any::<bool>(),
        right_up in any::<bool>(),
        h in 0i32..6,
        p in 0.0f64..=1.0,
        colored in any::<bool>(),
        absorbing in any::<bool>(),
    ) {
        let shape = SiteShape::classify(if left_up { h + 1 } else { h - 1 }, h, if right_up { h + 1 } else { h - 1 });
        let mut params = params(5, colored, absorbing);
        params.p = p;
        let dist = event_distribution(shape, h, &params);
        prop_assert!((dist.total() - 1.0).abs() < 1e-12, "{:?} h={} total {}", shape, h, dist.total());
    }

    #[test]
    fn free_kernel_matches_slice_sampler(
        half in 2usize..16,
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
        slices in 1usize..60,
    ) {
        let mut params = params(2 * half + 1, false, false);
        params.p = p;
        let mut kernel = FreeKernel::new(&params).unwrap();
        let mut surface = Surface::horizon(params.size).unwrap();
        let mut rng_a = stream_rng(seed, 3);
        let mut rng_b = stream_rng(seed, 3);
        for t in 1..=slices {
            kernel.step(&mut rng_a);
            surface = advance_slice(&surface, Parity::for_slice(t), &mut rng_b, &params).0;
            let profile = kernel.profile();
            prop_assert_eq!(profile.heights(), surface.profile.heights());
        }
        prop_assert!(roughness(&kernel.profile()) >= 0.0);
    }

    #[test]
    fn manifest_toml_round_trips(
        kind in prop::sample::select(ExperimentKind::ALL.to_vec()),
        seed in any::<u64>(),
        samples in 1usize..1000,
        colored in any::<bool>(),
    ) {
        let mut manifest = ExperimentManifest::defaults(kind);
        manifest.seed = seed;
        manifest.samples = samples;
        manifest.colored = colored;
        let text = manifest.to_toml_string().unwrap();
        prop_assert_eq!(ExperimentManifest::from_toml_str(&text).unwrap(), manifest);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn state_bytes_round_trip(p in 0.05f64..0.95, colored in any::<bool>(), absorbing in any::<bool>()) {
        let mut params = params(3, colored, absorbing);
        params.p = p;
        let state = build_state(&params).unwrap();
        prop_assert!((state.norm() - 1.0).abs() < 1e-12);
        let back = SparseState::from_bytes(&state.to_bytes()).unwrap();
        prop_assert_eq!(back, state);
    }

    #[test]
    fn state_is_symmetric_under_color_swap(p in 0.05f64..0.95, absorbing in any::<bool>()) {
        let mut params = params(3, true, absorbing);
        params.p = p;
        let state = build_state(&params).unwrap();
        for (config, amplitude) in state.configs().unwrap() {
            let partner = state.get(&canonical_key(&config.swapped_colors(), true));
            prop_assert!((partner - amplitude).abs() < 1e-12);
        }
    }
}
