use depevap::exact::build_state;
use depevap::hamiltonian::{
    assemble_hamiltonian, enumerate_sector, expectation, sector_eigenpairs, sector_matrix, term_residuals, TermKind,
    SECTOR_LIMIT,
};
use depevap::model::{BoundaryMode, ModelParams};
use nalgebra::{DMatrix, SymmetricEigen};

fn params(size: usize, p: f64, colored: bool) -> ModelParams {
    ModelParams::new(size, p, BoundaryMode::Absorbing, colored, 0).unwrap()
}

#[test]
fn term_counts_at_l3() {
    let h = assemble_hamiltonian(&params(3, 0.5, true)).unwrap();
    let count = |f: fn(&TermKind) -> bool| h.terms.iter().filter(|t| f(&t.kind)).count();
    assert_eq!(count(|k| matches!(k, TermKind::Initial)), 4);
    assert_eq!(count(|k| matches!(k, TermKind::Final)), 4);
    assert_eq!(count(|k| matches!(k, TermKind::Left)), 4);
    assert_eq!(count(|k| matches!(k, TermKind::Right)), 4);
    assert_eq!(count(|k| matches!(k, TermKind::Gauss)), 4);
    assert_eq!(count(|k| matches!(k, TermKind::Color)), 4);
    assert_eq!(count(|k| matches!(k, TermKind::Update { .. })), 24);
    assert_eq!(h.terms.len(), 48);
    let u = assemble_hamiltonian(&params(3, 0.5, false)).unwrap();
    assert_eq!(u.terms.len(), 20 + 12);
}

#[test]
fn sector_dimensions_at_l3() {
    assert_eq!(enumerate_sector(&params(3, 0.5, true), SECTOR_LIMIT).unwrap().len(), 5);
    assert_eq!(enumerate_sector(&params(3, 0.5, false), SECTOR_LIMIT).unwrap().len(), 2);
}

#[test]
fn projector_terms_are_projectors() {
    for colored in [true, false] {
        let h = assemble_hamiltonian(&params(5, 0.37, colored)).unwrap();
        for term in &h.terms {
            assert!(term.asymmetry() < 1e-15, "{}", term.kind);
            assert!(term.eigenvalues().iter().all(|&v| v > -1e-12));
            if term.kind.is_projector() {
                assert!(term.idempotence_defect() < 1e-14, "{}", term.kind);
            }
        }
    }
}

#[test]
fn state_is_annihilated_term_by_term() {
    for size in [3, 5] {
        for p in [0.25, 0.5, 0.8] {
            for colored in [true, false] {
                let pr = params(size, p, colored);
                let h = assemble_hamiltonian(&pr).unwrap();
                let psi = build_state(&pr).unwrap();
                let residuals = term_residuals(&h, &psi).unwrap();
                let (worst, at) = residuals
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| (r, k))
                    .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
                assert!(
                    worst < 1e-10,
                    "L={size} p={p} colored={colored}: {} has {worst}",
                    h.terms[at].kind
                );
                assert!(expectation(&h, &psi).unwrap().abs() < 1e-10);
            }
        }
    }
}

#[test]
fn unique_zero_mode_matches_dense_oracle() {
    for size in [3, 5] {
        for p in [0.25, 0.5, 0.8] {
            for colored in [true, false] {
                let pr = params(size, p, colored);
                let h = assemble_hamiltonian(&pr).unwrap();
                let sector = enumerate_sector(&pr, SECTOR_LIMIT).unwrap();
                let rows = sector_matrix(&h, &sector).unwrap();
                let n = sector.len();
                let mut dense = DMatrix::<f64>::zeros(n, n);
                for (r, row) in rows.iter().enumerate() {
                    for &(c, v) in row {
                        dense[(r, c)] = v;
                    }
                }
                let mut want: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
                want.sort_by(f64::total_cmp);
                let spectrum = sector_eigenpairs(&h, 2, SECTOR_LIMIT).unwrap();
                let got = &spectrum.pairs.values;
                eprintln!(
                    "L={size} p={p} colored={colored} dim={n} low={:?}",
                    &want[..want.len().min(3)]
                );
                assert!(want[0].abs() < 1e-10);
                assert!(want[1] > 1e-6);
                assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9);
                let psi = build_state(&pr).unwrap();
                let x = sector.coordinates(&psi).unwrap();
                let overlap: f64 = x.iter().zip(&spectrum.pairs.vectors[0]).map(|(a, b)| a * b).sum();
                assert!((overlap.abs() - 1.0).abs() < 1e-9);
            }
        }
    }
}
