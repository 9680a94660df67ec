use num_complex::Complex64;
use specgap_core::eigen::eigh;
use specgap_core::model::{truncate, ExplicitBand, Lattice, OperatorSpec};
use specgap_core::truncation::{in_gap_eigenvalues, section_spectrum};

const GAP: (f64, f64) = (0.3249, 1.4608);

/// Full-line (1, 2, 3) chain with an isolated site of value `planted` spliced
/// in at site 0. The chain bond across the splice has length 2.
fn planted(value: f64) -> OperatorSpec {
    let chain = |s: i64| if s > 0 { s - 1 } else { s };
    ExplicitBand::new(Lattice::Full, 2, 5.0, move |i, j| {
        let z = if i == 0 || j == 0 {
            if i == j {
                value
            } else {
                0.0
            }
        } else {
            let (ci, cj) = (chain(i), chain(j));
            if ci == cj {
                [1.0, 2.0, 3.0][ci.rem_euclid(3) as usize]
            } else if (ci - cj).abs() == 1 {
                1.0
            } else {
                0.0
            }
        };
        Complex64::new(z, 0.0)
    })
    .into()
}

#[test]
fn planted_value_is_an_exact_section_eigenvalue() {
    let spec = planted(1.0);
    let dense = eigh(&truncate(&spec, 200).unwrap()).unwrap();
    assert!(dense.values().iter().any(|v| (v - 1.0).abs() < 1e-12));
    let band = section_spectrum(&spec, 200, &[]).unwrap();
    for (a, b) in band.values.iter().zip(dense.values()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn recovers_planted_eigenvalue() {
    let found = in_gap_eigenvalues(&planted(1.0), GAP, 2000).unwrap();
    assert_eq!(found.len(), 1, "{found:?}");
    assert!((found[0].value - 1.0).abs() < 1e-6);
    assert!(found[0].residual.unwrap() < 1e-6);
}

#[test]
fn recovers_eigenvalue_at_gap_center() {
    let center = 0.5 * (GAP.0 + GAP.1);
    let found = in_gap_eigenvalues(&planted(center), GAP, 2000).unwrap();
    assert_eq!(found.len(), 1, "{found:?}");
    assert!((found[0].value - center).abs() < 1e-6);
    assert!(found[0].gamma.abs() < 1e-10);
}

#[test]
fn empty_without_planted_site() {
    let spec: OperatorSpec =
        specgap_core::model::SchrodingerSpec::nearest_neighbour(vec![1.0, 2.0, 3.0], Lattice::Full).unwrap().into();
    assert!(in_gap_eigenvalues(&spec, GAP, 2000).unwrap().is_empty());
}
