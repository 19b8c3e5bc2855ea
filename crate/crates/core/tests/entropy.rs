use depevap::entanglement::{
    entropy_dp, entropy_exact, entropy_formula, entropy_formula_with_unit, marginal_from_state, midcut_distribution,
    Bipartition, ColorUnit,
};
use depevap::exact::build_state;
use depevap::model::{BoundaryMode, ModelParams};

fn params(size: usize, p: f64, boundary: BoundaryMode, colored: bool) -> ModelParams {
    ModelParams::new(size, p, boundary, colored, 0).unwrap()
}

#[test]
fn svd_matches_formula_at_mid_cut() {
    for size in [3, 5] {
        for p in [0.25, 0.5, 0.8] {
            for boundary in [BoundaryMode::Reflecting, BoundaryMode::Absorbing] {
                let pr = params(size, p, boundary, true);
                let state = build_state(&pr).unwrap();
                let cut = pr.mid_cut();
                let exact = entropy_exact(&state, Bipartition::SpaceLike { cut_row: cut }).unwrap();
                let dist = midcut_distribution(&pr, cut).unwrap();
                let pairs = entropy_formula_with_unit(&dist, ColorUnit::Pairs);
                let blocks = entropy_formula_with_unit(&dist, ColorUnit::Blocks);
                eprintln!(
                    "L={size} p={p} {boundary}: svd={:.12} pairs={:.12} blocks={:.12} unc svd={:.12} formula={:.12}",
                    exact.s_total, pairs.s_total, blocks.s_total, exact.s_uncolored, pairs.s_uncolored
                );
                assert!((exact.s_uncolored - pairs.s_uncolored).abs() < 1e-9);
                assert!((exact.s_total - pairs.s_total).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn dp_marginal_matches_state_marginal() {
    for boundary in [BoundaryMode::Reflecting, BoundaryMode::Absorbing] {
        let pr = params(5, 0.6, boundary, true);
        let state = build_state(&pr).unwrap();
        for cut in 1..=5 {
            let from_state = marginal_from_state(&state, cut).unwrap();
            let dist = midcut_distribution(&pr, cut).unwrap();
            assert_eq!(from_state.len(), dist.table.len(), "cut {cut}");
            for (profile, w) in &from_state {
                assert!((w - dist.table[profile]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn uncolored_svd_matches_marginal_entropy() {
    for boundary in [BoundaryMode::Reflecting, BoundaryMode::Absorbing] {
        let pr = params(5, 0.5, boundary, false);
        let state = build_state(&pr).unwrap();
        let exact = entropy_exact(&state, Bipartition::SpaceLike { cut_row: 2 }).unwrap();
        let dp = entropy_dp(&pr, 2).unwrap();
        assert!((exact.s_total - dp.s_total).abs() < 1e-9);
        assert_eq!(dp.color_term, 0.0);
    }
}

#[test]
fn time_reversal_pairs_cuts() {
    let pr = params(5, 0.7, BoundaryMode::Reflecting, true);
    let state = build_state(&pr).unwrap();
    for c in 1..5 {
        let a = entropy_exact(&state, Bipartition::SpaceLike { cut_row: c }).unwrap();
        let b = entropy_exact(&state, Bipartition::SpaceLike { cut_row: 5 - c }).unwrap();
        let fa = entropy_formula(&midcut_distribution(&pr, c).unwrap());
        eprintln!("cut {c}: {} vs {} formula {}", a.s_total, b.s_total, fa.s_total);
    }
}

#[test]
fn colored_entropy_dominates_uncolored() {
    for boundary in [BoundaryMode::Reflecting, BoundaryMode::Absorbing] {
        for p in [0.25, 0.5, 0.8] {
            let colored = build_state(&params(5, p, boundary, true)).unwrap();
            let uncolored = build_state(&params(5, p, boundary, false)).unwrap();
            for cut in 1..=4 {
                let c = entropy_exact(&colored, Bipartition::SpaceLike { cut_row: cut }).unwrap();
                let u = entropy_exact(&uncolored, Bipartition::SpaceLike { cut_row: cut }).unwrap();
                assert!(c.s_total >= u.s_total - 1e-12);
                assert!((c.s_uncolored - u.s_total).abs() < 1e-9);
            }
        }
    }
}
