use proptest::prelude::*;
use specgap_core::eigen::{eigh, singular_values, spectral_weights, HermitianMatrix};
use specgap_core::Complex64;

const TOL: f64 = 1e-9;

fn hermitian(max_order: usize) -> impl Strategy<Value = HermitianMatrix> {
    (1..=max_order).prop_flat_map(|n| {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), n * n).prop_map(move |raw| {
            HermitianMatrix::from_fn(n, |i, j| {
                let (a, b) = raw[i.min(j) * n + i.max(j)];
                match i.cmp(&j) {
                    std::cmp::Ordering::Equal => Complex64::new(a, 0.0),
                    std::cmp::Ordering::Less => Complex64::new(a, b),
                    std::cmp::Ordering::Greater => Complex64::new(a, -b),
                }
            })
            .unwrap()
        })
    })
}

fn pair(max_order: usize) -> impl Strategy<Value = (HermitianMatrix, HermitianMatrix)> {
    hermitian(max_order).prop_flat_map(|a| {
        let n = a.order();
        (Just(a), hermitian(n).prop_filter("same order", move |b| b.order() == n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weyl_inequality((a, b) in pair(10)) {
        let da = eigh(&a).unwrap();
        let db = eigh(&b).unwrap();
        let norm = eigh(&a.sub(&b).unwrap()).unwrap().spectral_norm();
        prop_assert!(norm <= a.sub(&b).unwrap().frobenius_norm() + TOL);
        for (x, y) in da.values().iter().zip(db.values()) {
            prop_assert!((x - y).abs() <= norm + TOL);
        }
    }

    #[test]
    fn cauchy_interlacing(a in hermitian(12)) {
        let n = a.order();
        let full = eigh(&a).unwrap();
        for m in 1..n {
            let part = eigh(&a.leading(m)).unwrap();
            for k in 1..=m {
                prop_assert!(part.top(k) <= full.top(k) + TOL);
                prop_assert!(part.top(k) >= full.top(k + n - m) - TOL);
            }
        }
    }

    #[test]
    fn singular_values_grow_with_section(a in hermitian(12)) {
        let n = a.order();
        let full = singular_values(&a).unwrap();
        for m in 1..n {
            let part = singular_values(&a.leading(m)).unwrap();
            for (s, t) in part.iter().zip(&full) {
                prop_assert!(s <= &(t + TOL));
            }
        }
    }

    #[test]
    fn weights_reproduce_diagonal(a in hermitian(12)) {
        let d = eigh(&a).unwrap();
        for i in 1..=a.order() {
            let w = spectral_weights(&d, i).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= TOL);
            prop_assert!(w.iter().all(|&x| (-TOL..=1.0 + TOL).contains(&x)));
            let c: f64 = w.iter().zip(d.values()).map(|(w, l)| w * l).sum();
            prop_assert!((c - a.get(i - 1, i - 1).re).abs() <= TOL);
        }
    }

    #[test]
    fn decomposition_reconstructs(a in hermitian(12)) {
        let d = eigh(&a).unwrap();
        let r = d.reconstruct().sub(&a).unwrap();
        prop_assert!(r.max_abs() <= 1e-10 * a.frobenius_norm().max(1.0));
    }
}
