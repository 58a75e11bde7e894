use boolgrow::boolfn::is_monotone;
use boolgrow::{CharPoly, Connective, FixedPointReport, Rational, TruthTable};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn monotone(k: usize) -> Vec<TruthTable> {
    (0..1u64 << (1 << k))
        .map(|w| TruthTable::from_word(k, w).unwrap())
        .filter(is_monotone)
        .collect()
}

fn grid() -> impl Iterator<Item = f64> {
    (0..=1000).map(|j| j as f64 / 1000.0)
}

proptest! {
    #[test]
    fn spectral_square_sum_is_one_sampled(k in 4usize..=5, w in any::<u64>()) {
        let w = if k == 5 { w & 0xffff_ffff } else { w & 0xffff };
        let c = Connective::from_word(k, w).unwrap();
        prop_assert!((c.spectral_profile().square_sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn endpoints_are_extreme_betas(k in 1usize..=5, w in any::<u64>()) {
        let w = w & if k == 5 { 0xffff_ffff } else { (1u64 << (1 << k)) - 1 };
        let poly = CharPoly::of(&TruthTable::from_word(k, w).unwrap());
        let at = |p: Rational| poly.eval(&p);
        let beta = |i: usize| {
            let b = poly.beta(i);
            Rational::new((*b.numer()).into(), (*b.denom()).into())
        };
        prop_assert_eq!(at(Rational::zero()), beta(0));
        prop_assert_eq!(at(Rational::one()), beta(k));
    }
}

#[test]
fn spectral_square_sum_is_one_exhaustive() {
    for k in 1..=3 {
        for w in 0..1u64 << (1 << k) {
            let c = Connective::from_word(k, w).unwrap();
            assert!(
                (c.spectral_profile().square_sum() - 1.0).abs() <= 1e-12,
                "k={k} w={w:#x}"
            );
        }
    }
}

#[test]
fn monotone_polynomials_are_nondecreasing() {
    for k in 1..=4 {
        for t in monotone(k) {
            let poly = CharPoly::of(&t);
            for p in grid() {
                let d: f64 = poly.deriv(&p);
                assert!(d >= -1e-12, "k={k} {t} p={p} A'={d}");
            }
        }
    }
}

#[test]
fn interior_fixed_points_agree_with_bracketing() {
    let tol = 1e-12;
    for k in 2..=4 {
        for t in monotone(k) {
            let poly = CharPoly::of(&t);
            let g = |p: f64| poly.eval(&p) - p;
            match poly.fixed_point(tol).unwrap() {
                FixedPointReport::Interior { s, .. } => {
                    assert!(g(s).abs() <= tol, "k={k} {t} residual {}", g(s));
                    // exactly one sign change on the grid, bracketing s
                    let pts: Vec<f64> = grid().filter(|&p| p > 0.0 && p < 1.0).collect();
                    let changes: Vec<(f64, f64)> = pts
                        .windows(2)
                        .filter(|w| g(w[0]) != 0.0 && g(w[1]) != 0.0 && (g(w[0]) > 0.0) != (g(w[1]) > 0.0))
                        .map(|w| (w[0], w[1]))
                        .collect();
                    let exact = pts.iter().any(|&p| g(p) == 0.0);
                    assert!(changes.len() + exact as usize >= 1, "k={k} {t}");
                    assert!(
                        changes.iter().all(|&(a, b)| a <= s && s <= b) || exact,
                        "k={k} {t} s={s} {changes:?}"
                    );
                }
                FixedPointReport::AboveEverywhere => {
                    assert!(grid().filter(|&p| p > 0.0 && p < 1.0).all(|p| g(p) > 0.0))
                }
                FixedPointReport::BelowEverywhere => {
                    assert!(grid().filter(|&p| p > 0.0 && p < 1.0).all(|p| g(p) < 0.0))
                }
                FixedPointReport::Identity => assert!(grid().all(|p| g(p).abs() < 1e-15)),
            }
        }
    }
}

/// Monotone `α` other than a projection: `β_1 > 0` iff `α ≥ x_i` for some `i` iff `A(p) > p` on
/// `(0, 1)`.
#[test]
fn positive_beta_one_characterizes_amplifiers_above_the_diagonal() {
    for k in 1..=4 {
        for t in monotone(k) {
            let poly = CharPoly::of(&t);
            let report = poly.fixed_point(1e-12).unwrap();
            if report == FixedPointReport::Identity {
                continue;
            }
            let beta1 = poly.counts()[1] > 0;
            let absorbs_projection = (0..k).any(|j| (0..t.len()).all(|a| (a >> j) & 1 == 0 || t.get(a)));
            let above = report == FixedPointReport::AboveEverywhere;
            assert_eq!(beta1, absorbs_projection, "k={k} {t}");
            assert_eq!(beta1, above, "k={k} {t} {report:?}");
        }
    }
}
