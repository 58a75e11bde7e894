use boolgrow::boolfn::classify;
use boolgrow::process::{
    initial_distribution, initial_general, monte_carlo_counts, scalar_trajectory, step_exact, support_closure,
};
use boolgrow::{Connective, Distribution, ProcessSpec, SupportSpec, TruthTable};
use std::collections::BTreeSet;

const PRESETS: &[&str] = &[
    "and2", "or2", "xor2", "and3", "xor3", "xnor3", "maj3", "mux", "slow3", "valiant4",
];
const SUPPORTS: &[&str] = &[
    "proj",
    "proj,neg",
    "proj,const0",
    "proj,const1",
    "proj,const0,const1",
    "proj,neg,const0,const1",
];

fn spec(n: usize, support: &str, alpha: &str) -> ProcessSpec {
    ProcessSpec::new(
        SupportSpec::parse(n, support).unwrap(),
        Connective::preset(alpha).unwrap(),
    )
}

fn specs(n: usize) -> impl Iterator<Item = ProcessSpec> {
    PRESETS
        .iter()
        .flat_map(move |a| SUPPORTS.iter().map(move |s| spec(n, s, a)))
}

fn trajectory(spec: &ProcessSpec, steps: usize) -> Vec<Distribution<f64>> {
    let mut out = vec![initial_distribution::<f64>(spec).unwrap()];
    for _ in 0..steps {
        let next = step_exact(out.last().unwrap(), &spec.alpha).unwrap();
        out.push(next);
    }
    out
}

#[test]
fn steps_conserve_mass() {
    for n in 1..=2 {
        for s in specs(n) {
            for pi in trajectory(&s, 8) {
                assert!(
                    pi.mass_drift() <= 1e-9,
                    "{s:?} i={} drift {}",
                    pi.iteration(),
                    pi.mass_drift()
                );
                assert!((pi.total() - 1.0).abs() <= 1e-12);
            }
        }
    }
    for a in ["maj3", "and3", "mux", "xor3"] {
        for pi in trajectory(&spec(3, "proj", a), 5) {
            assert!(pi.mass_drift() <= 1e-9, "{a} n=3 i={}", pi.iteration());
        }
    }
}

/// Every iterate stays inside each class that both the support and the connective belong to.
#[test]
fn iterates_stay_in_closed_classes() {
    for n in 1..=3 {
        for a in PRESETS {
            let alpha = Connective::preset(a).unwrap();
            if n == 3 && alpha.arity() > 3 {
                continue;
            }
            for s in SUPPORTS {
                let support = SupportSpec::parse(n, s).unwrap();
                let members: Vec<_> = support.members().unwrap().iter().map(classify).collect();
                let c = alpha.class();
                let mono = c.monotone && members.iter().all(|m| m.monotone);
                let lin = c.linear && members.iter().all(|m| m.linear);
                let sd = c.self_dual && members.iter().all(|m| m.self_dual);
                if !(mono || lin || sd) || (n == 3 && support.size() > 3) {
                    continue;
                }
                let mut pi = initial_general::<f64>(&support).unwrap();
                for _ in 0..4 {
                    pi = step_exact(&pi, &alpha).unwrap();
                    for f in pi.support() {
                        let p = classify(&TruthTable::from_word(n, f).unwrap());
                        assert!(!mono || p.monotone, "{a} {s} n={n} left monotone");
                        assert!(!lin || p.linear, "{a} {s} n={n} left linear");
                        assert!(!sd || p.self_dual, "{a} {s} n={n} left self-dual");
                    }
                }
            }
        }
    }
}

#[test]
fn marginals_follow_the_scalar_recurrence() {
    let mut checked = 0;
    let cases = specs(1).chain(specs(2)).map(|s| (s, 8)).chain(
        ["maj3", "and3", "mux", "slow3", "xnor3"]
            .iter()
            .map(|a| (spec(3, "proj", a), 5)),
    );
    for (s, steps) in cases {
        let poly = s.alpha.char_poly();
        let traj = trajectory(&s, steps);
        for x in 0..1usize << s.n() {
            let expected = scalar_trajectory(&poly, s.support.marginal(x), steps).unwrap();
            for (i, pi) in traj.iter().enumerate() {
                let got = pi.marginal(x);
                assert!(
                    (got - expected[i]).abs() <= 1e-9,
                    "{s:?} x={x} i={i}: {got} vs {}",
                    expected[i]
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

/// Per-function frequencies within 4σ of the exact law. With about 20 functions and a fixed seed,
/// the chance of a spurious 4σ excursion is below 0.2%.
#[test]
fn monte_carlo_matches_exact_within_four_sigma() {
    let n_samples = 100_000u64;
    for (support, alpha, depth) in [
        ("proj,const0,const1", "maj3", 6),
        ("proj,neg", "mux", 4),
        ("proj", "valiant4", 3),
    ] {
        let s = spec(2, support, alpha);
        let exact = trajectory(&s, depth).pop().unwrap();
        let counts = monte_carlo_counts(&s, depth, n_samples, 20_240_601).unwrap();
        let keys: BTreeSet<u64> = counts.keys().copied().chain(exact.support()).collect();
        for f in keys {
            let p = exact.get(f);
            let hat = counts.get(&f).copied().unwrap_or(0) as f64 / n_samples as f64;
            let sigma = (p * (1.0 - p) / n_samples as f64).sqrt();
            assert!(
                (hat - p).abs() <= 4.0 * sigma + 1e-12,
                "{alpha} {support} f={f:x}: {hat} vs {p} (sigma {sigma})"
            );
        }
    }
}

#[test]
fn closure_matches_exact_supports() {
    for s in specs(2) {
        let report = support_closure(&s).unwrap();
        let traj = trajectory(&s, report.closed_at.saturating_sub(1));
        let seen: BTreeSet<u64> = traj.iter().flat_map(|pi| pi.support()).collect();
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), report.union_support, "{s:?}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let s = spec(2, "proj,neg,const0,const1", "maj3");
    let mut a = initial_distribution::<f32>(&s).unwrap();
    let mut b = initial_distribution::<f64>(&s).unwrap();
    for _ in 0..10 {
        a = step_exact(&a, &s.alpha).unwrap();
        b = step_exact(&b, &s.alpha).unwrap();
    }
    for (f, p) in b.entries() {
        assert!((f64::from(a.get(*f)) - p).abs() < 1e-5);
    }
}
