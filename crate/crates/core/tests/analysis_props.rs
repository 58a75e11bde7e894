use boolgrow::analysis::{
    acceptance_matrix, empirical_convergence, limit_distribution, limit_in_closure, materialize, predict,
    theoretical_iterations, verify_all, verify_lemma, BoundTag, ConnectiveSet, Lemma, PredictionKind, SetDescriptor,
    TheoremTag,
};
use boolgrow::process::{distance, exact_trajectory};
use boolgrow::{Connective, Domain, Metric, ProcessSpec, SupportSpec};

fn spec(n: usize, support: &str, alpha: &str) -> ProcessSpec {
    ProcessSpec::new(
        SupportSpec::parse(n, support).unwrap(),
        Connective::preset(alpha).unwrap(),
    )
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn prediction_examples() {
    let p = predict(&spec(3, "proj", "maj3"));
    assert_eq!(
        p.kind,
        PredictionKind::Concentrated {
            set: SetDescriptor::Threshold { t: 2 }
        }
    );
    let p = predict(&spec(2, "proj,const0,const1", "maj3"));
    assert_eq!(
        p.kind,
        PredictionKind::UniformOnSet {
            set: SetDescriptor::Slice { m: 1 }
        }
    );
    let p = predict(&spec(2, "proj", "xnor3"));
    assert!(matches!(
        p.kind,
        PredictionKind::Alternating {
            even: SetDescriptor::LinearConstrained { .. },
            odd: SetDescriptor::LinearConstrained { .. }
        }
    ));
    let p = predict(&spec(2, "proj,neg", "maj3"));
    assert_eq!(
        p.kind,
        PredictionKind::UniformOnSet {
            set: SetDescriptor::SelfDual
        }
    );
    let p = predict(&spec(2, "proj", "mux"));
    assert_eq!(
        p.kind,
        PredictionKind::UniformOnSet {
            set: SetDescriptor::BiPreserving
        }
    );
    assert_eq!(p.theorem_tag, Some(TheoremTag::BiPreservingUniform));
}

#[test]
fn limit_examples() {
    let slice = limit_distribution::<f64>(
        &predict(&spec(2, "proj,const0,const1", "maj3")),
        &spec(2, "proj,const0,const1", "maj3"),
    )
    .unwrap();
    assert_eq!(slice.set_sizes(), (4, None));
    assert!(slice.even.entries().iter().all(|&(_, p)| p == 0.25));
    let sd = limit_distribution::<f64>(&predict(&spec(2, "proj,neg", "maj3")), &spec(2, "proj,neg", "maj3")).unwrap();
    assert_eq!(sd.set_sizes(), (4, None));
    let s = spec(3, "proj", "maj3");
    let point = limit_distribution::<f32>(&predict(&s), &s).unwrap();
    assert_eq!(point.even.entries().len(), 1);
    assert_eq!(point.even.entries()[0].1, 1.0f32);
}

#[test]
fn slice_and_self_dual_slice_counts() {
    for n in [2, 4] {
        let c = binomial(n, n / 2);
        let slice = materialize(&SetDescriptor::Slice { m: n / 2 }, Domain::General(n)).unwrap();
        assert_eq!(slice.len(), 1 << c, "n={n}");
        let sd = materialize(&SetDescriptor::SelfDualSlice, Domain::General(n)).unwrap();
        assert_eq!(sd.len(), 1 << (c / 2), "n={n}");
    }
}

#[test]
fn iteration_bound_examples() {
    let b = theoretical_iterations(&spec(4, "proj,neg,const0,const1", "xor2"), 1.0 / 16.0).unwrap();
    assert_eq!(b.bound_tag, BoundTag::LinearLog);
    assert!((b.value - 4.0).abs() < 1e-12 && !b.has_unknown_constant);

    // one constant: MAJ3 concentrates by amplification away from its fixed point
    let b = theoretical_iterations(&spec(2, "proj,const0", "maj3"), 1e-3).unwrap();
    assert_eq!(b.bound_tag, BoundTag::FixedPointMonotone);
    assert!((b.value - 24.0).abs() < 1e-12 && b.has_unknown_constant);
    assert!(b.fixed_point_gap.unwrap() >= 0.0);

    for n in [4, 8] {
        let b = theoretical_iterations(&spec(n, "proj", "slow3"), 1e-3).unwrap();
        assert_eq!(b.bound_tag, BoundTag::SlowMonotone);
        let expected = n as f64 / 2.0 * (n as f64).log2();
        assert!((b.value - expected).abs() < 1e-9 && b.has_unknown_constant);
    }
    let b = theoretical_iterations(&spec(3, "proj", "and3"), 1e-3).unwrap();
    assert_eq!(b.bound_tag, BoundTag::FastMonotone);
}

#[test]
fn convergence_examples() {
    let r = empirical_convergence(&spec(4, "proj,neg,const0,const1", "xor2"), 1.0 / 16.0, 8).unwrap();
    assert!(r.iterations_measured.unwrap() <= 4);
    let r = empirical_convergence(&spec(2, "proj,const0,const1", "maj3"), 1e-3, 30).unwrap();
    assert!(r.converged);
    // machine precision is reached by i = 7; past that the repelling marginal amplifies roundoff
    assert!(r.log_slope(0, 6).unwrap() < 0.0);
    assert!(r.trajectory[7] < 1e-15);
    let r = empirical_convergence(&spec(2, "proj,const0,const1", "maj3"), 1.1, 3).unwrap();
    assert_eq!(r.iterations_measured, Some(0));
    assert_eq!(r.to_csv().lines().next(), Some("i,distance,bound"));
}

/// `⌈2 log n / log k⌉ + 1` steps bring every linear process within `2^-n` of its limit, with no
/// additive constant, for every support variant.
#[test]
fn linear_bound_holds_without_constants() {
    let supports = [
        "proj",
        "proj,const0",
        "proj,const1",
        "proj,const0,const1",
        "proj,neg",
        "proj,neg,const0,const1",
    ];
    let connectives = [
        Connective::preset("xor2").unwrap(),
        Connective::from_word(2, 0x9).unwrap(),
        Connective::preset("xor3").unwrap(),
        Connective::preset("xnor3").unwrap(),
    ];
    for n in 2..=8 {
        for alpha in &connectives {
            for s in supports {
                let spec = ProcessSpec::new(SupportSpec::parse(n, s).unwrap(), alpha.clone());
                let pred = predict(&spec);
                let limit = limit_distribution::<f64>(&pred, &spec).unwrap();
                let k = alpha.arity() as f64;
                let i_star = (2.0 * (n as f64).log2() / k.log2()).ceil() as usize + 1;
                let mut at = None;
                exact_trajectory::<f64>(&spec, i_star, |pi| {
                    if pi.iteration() == i_star {
                        at = Some(distance(pi, limit.at(i_star), Metric::MaxAbs)?);
                    }
                    Ok(())
                })
                .unwrap();
                let d = at.unwrap();
                assert!(
                    d < 2f64.powi(-(n as i32)),
                    "n={n} {alpha:?} {s}: distance {d} at i={i_star}"
                );
            }
        }
    }
}

#[test]
fn predicted_limits_lie_in_the_closure() {
    for s in acceptance_matrix(3).unwrap() {
        assert!(limit_in_closure(&s).unwrap(), "{s:?}");
    }
}

#[test]
fn small_suite_passes() {
    let report = verify_all(2, 2).unwrap();
    assert!(report.iter().any(|r| r.lemma == "Bal"));
    for r in &report {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn perturbed_polynomial_fails_balance() {
    let maj3 = Connective::preset("maj3").unwrap();
    let pop = ConnectiveSet::from_connectives("maj3", &[maj3])
        .with_perturbed_counts(0, vec![0, 0, 2, 1])
        .unwrap();
    let r = verify_lemma(&Lemma::Bal, &pop).unwrap();
    assert!(!r.pass);
    assert!(r.witness.unwrap().contains("counts=[0, 0, 2, 1]"));
}

#[test]
fn slope_lemmas_ignore_constant_connectives() {
    let zero = Connective::from_word(3, 0).unwrap();
    let pop = ConnectiveSet::from_connectives("const0", &[zero]);
    for lemma in [Lemma::FastNFP, Lemma::SlowNFP] {
        let r = verify_lemma(&lemma, &pop).unwrap();
        assert_eq!(r.checked, 0);
        assert!(r.pass);
    }
}
