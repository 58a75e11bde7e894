//! Limit prediction, convergence measurement and the numerical lemma checks.
//!
//! [`predict`] walks a fixed decision tree over the structural properties of `α` and the support
//! of `μ`; every leaf names the result it rests on through a [`TheoremTag`]. Predictions are turned
//! into explicit uniform distributions by [`limit_distribution`] and compared against exact
//! iteration by [`empirical_convergence`].

use std::fmt;

use num_rational::Rational64;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{classify, is_monotone, is_self_dual, special, PropertySet, Special, TruthTable};
use crate::connective::{CharPoly, Connective, ConvergenceClass, FixedPointReport};
use crate::error::{Error, Result};
use crate::process::{
    distance, exact_trajectory, fmt17, initial_distribution, step_exact, support_closure, Distribution, Domain, Metric,
    ProcessSpec, SupportSpec, GENERAL_EXACT_MAX,
};
use crate::scalar::Real;
use crate::spectrum::{bound_constants, restriction_residual, savicky_predict, slice_spectrum, transform};

/// A set of functions on `n` variables, described structurally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "set")]
pub enum SetDescriptor {
    /// `{T_t}`; `T_0 ≡ 1`, `T_{n+1} ≡ 0`.
    Threshold {
        t: usize,
    },
    AllLinear,
    /// Linear functions meeting the given parity constraints: `c_0`, `⊕_{j≥1} c_j`, and their xor.
    LinearConstrained {
        const_term: Option<bool>,
        var_parity: Option<bool>,
        total_parity: Option<bool>,
    },
    SelfDual,
    AllFunctions,
    /// Slice functions `S_{m,n}`: 1 above weight `m`, 0 below, free at `m`.
    Slice {
        m: usize,
    },
    /// Self-dual members of `S_{n/2,n}`.
    SelfDualSlice,
    /// `f(0…0) = 0` and `f(1…1) = 1`.
    BiPreserving,
    ExplicitSet {
        ids: Vec<u64>,
    },
}

/// The result a prediction rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremTag {
    /// Linear connective; limit uniform on the support characters' common coset.
    LinearUniform,
    /// Linear connective of odd arity with constant 1; even and odd iterates split the support.
    LinearAlternating,
    /// Balanced nonlinear connective over the full initial set.
    FullSupportUniform,
    /// Self-dual nonlinear connective over projections and negations.
    SelfDualUniform,
    /// Monotone connective whose polynomial has no interior fixed point.
    MonotoneThreshold,
    /// Monotone unbalanced connective with an (irrational) interior fixed point.
    UnbalancedMonotoneThreshold,
    /// Balanced monotone connective when no input level sits at `½`.
    OddMajority,
    /// Balanced monotone connective, one constant, even `n`; the threshold comes from amplification.
    OneConstantConcentration,
    /// Balanced monotone connective, both constants, even `n`.
    SliceUniform,
    /// Balanced monotone connective, one constant, odd `n`.
    OneConstantSlice,
    /// Balanced monotone non-self-dual connective over projections, even `n`.
    ProjectionSlice,
    /// Monotone self-dual connective over projections, even `n`.
    SelfDualSlice,
    /// Bi-preserving selection-type connective over projections.
    BiPreservingUniform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PredictionKind {
    Concentrated { set: SetDescriptor },
    UniformOnSet { set: SetDescriptor },
    Alternating { even: SetDescriptor, odd: SetDescriptor },
    Unknown,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(flatten)]
    pub kind: PredictionKind,
    pub theorem_tag: Option<TheoremTag>,
}

impl Prediction {
    fn of(kind: PredictionKind, tag: TheoremTag) -> Self {
        Prediction {
            kind,
            theorem_tag: Some(tag),
        }
    }

    fn bare(kind: PredictionKind) -> Self {
        Prediction {
            kind,
            theorem_tag: None,
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self.kind, PredictionKind::Unknown | PredictionKind::Degenerate)
    }
}

pub fn predict(spec: &ProcessSpec) -> Prediction {
    let alpha = &spec.alpha;
    if alpha.is_degenerate() {
        return Prediction::bare(PredictionKind::Degenerate);
    }
    let class = alpha.class();
    let s = &spec.support;
    if class.linear {
        return predict_linear(spec);
    }
    if s.negations && s.const0 && s.const1 && class.balanced {
        return Prediction::of(
            PredictionKind::UniformOnSet {
                set: SetDescriptor::AllFunctions,
            },
            TheoremTag::FullSupportUniform,
        );
    }
    if s.negations && !s.const0 && !s.const1 && class.self_dual {
        return Prediction::of(
            PredictionKind::UniformOnSet {
                set: SetDescriptor::SelfDual,
            },
            TheoremTag::SelfDualUniform,
        );
    }
    if class.monotone && !s.negations {
        return predict_monotone(spec);
    }
    if !s.negations && !s.const0 && !s.const1 && generates_bi_preserving(alpha) && middle_marginals_reach_half(spec) {
        return Prediction::of(
            PredictionKind::UniformOnSet {
                set: SetDescriptor::BiPreserving,
            },
            TheoremTag::BiPreservingUniform,
        );
    }
    Prediction::bare(PredictionKind::Unknown)
}

/// Characters `w` (linear keys) on which every support member agrees, as `(w, value)`.
fn constant_characters(support: &SupportSpec) -> Vec<(u64, bool)> {
    let n = support.n;
    let ones = ((1u64 << n) - 1) << 1;
    let keys = support.keys(Domain::Linear(n)).expect("same arity");
    let inner = |f: u64, w: u64| (f & w).count_ones() % 2 == 1;
    [0u64, 1, ones, ones | 1]
        .into_iter()
        .filter_map(|w| {
            let v = inner(keys[0], w);
            keys.iter().all(|&f| inner(f, w) == v).then_some((w, v))
        })
        .collect()
}

fn predict_linear(spec: &ProcessSpec) -> Prediction {
    let k = spec.alpha.arity();
    let c = spec.alpha.linear_constant().expect("linear connective");
    let fixed = constant_characters(&spec.support);
    // sign bit of Δ_i(w) for |Δ_i(w)| = 1: b_{i+1} = (c ∧ w_0) ⊕ (k odd ∧ b_i)
    let bit_at = |w: u64, b0: bool, i: usize| (0..i).fold(b0, |b, _| (c && w & 1 == 1) ^ (k % 2 == 1 && b));
    let describe = |i: usize| {
        let mut d = (None, None, None);
        for &(w, b0) in &fixed {
            let b = bit_at(w, b0, i);
            match (w & 1 == 1, w >> 1 != 0) {
                (false, false) => {}
                (true, false) => d.0 = Some(b),
                (false, true) => d.1 = Some(b),
                (true, true) => d.2 = Some(b),
            }
        }
        if d == (None, None, None) {
            SetDescriptor::AllLinear
        } else {
            SetDescriptor::LinearConstrained {
                const_term: d.0,
                var_parity: d.1,
                total_parity: d.2,
            }
        }
    };
    let (even, odd) = (describe(2), describe(3));
    if even == odd {
        Prediction::of(PredictionKind::UniformOnSet { set: even }, TheoremTag::LinearUniform)
    } else {
        Prediction::of(PredictionKind::Alternating { even, odd }, TheoremTag::LinearAlternating)
    }
}

fn predict_monotone(spec: &ProcessSpec) -> Prediction {
    let alpha = &spec.alpha;
    let s = &spec.support;
    let n = s.n;
    let (c0, c1) = (s.const0 as usize, s.const1 as usize);
    let total = n + c0 + c1;
    let report = alpha.fixed_point(1e-14).expect("positive tolerance");
    let balanced = alpha.class().balanced;
    // limit of A^i(p_0) at each input weight: Some(bit) or None when p_0 sits on the fixed point
    let level = |w: usize| -> Option<bool> {
        let hits = w + c1;
        if hits == 0 {
            return Some(false);
        }
        if hits == total {
            return Some(true);
        }
        match report {
            FixedPointReport::BelowEverywhere => Some(false),
            FixedPointReport::AboveEverywhere => Some(true),
            FixedPointReport::Identity => Some(hits * 2 > total),
            FixedPointReport::Interior { s, .. } => {
                if balanced {
                    (2 * hits != total).then_some(2 * hits > total)
                } else {
                    Some(hits as f64 / total as f64 > s)
                }
            }
        }
    };
    let levels: Vec<Option<bool>> = (0..=n).map(level).collect();
    let one_constant = c0 + c1 == 1;
    if let Some(m) = levels.iter().position(Option::is_none) {
        let (set, tag) = if c0 + c1 == 2 {
            (SetDescriptor::Slice { m }, TheoremTag::SliceUniform)
        } else if one_constant {
            (SetDescriptor::Slice { m }, TheoremTag::OneConstantSlice)
        } else if alpha.class().self_dual {
            (SetDescriptor::SelfDualSlice, TheoremTag::SelfDualSlice)
        } else {
            (SetDescriptor::Slice { m }, TheoremTag::ProjectionSlice)
        };
        return Prediction::of(PredictionKind::UniformOnSet { set }, tag);
    }
    let t = levels.iter().position(|&v| v == Some(true)).unwrap_or(n + 1);
    let tag = match report {
        FixedPointReport::Interior { .. } if balanced && one_constant => TheoremTag::OneConstantConcentration,
        FixedPointReport::Interior { .. } if balanced => TheoremTag::OddMajority,
        FixedPointReport::Interior { .. } => TheoremTag::UnbalancedMonotoneThreshold,
        _ => TheoremTag::MonotoneThreshold,
    };
    Prediction::of(
        PredictionKind::Concentrated {
            set: SetDescriptor::Threshold { t },
        },
        tag,
    )
}

/// Whether composition trees of `α` over projections plausibly fill every bi-preserving function.
///
/// `α` must preserve both constants and escape every maximal subclone of the bi-preserving
/// functions: monotone, self-dual, affine, and the two 2-separating families (any two true points
/// share a 1, or any two false points share a 0). Balance is required for uniformity.
fn generates_bi_preserving(alpha: &Connective) -> bool {
    let c = alpha.class();
    if !(c.bi_preserving && c.balanced && !c.monotone && !c.self_dual && !c.linear) {
        return false;
    }
    let t = alpha.table();
    let all = t.len() - 1;
    let trues: Vec<usize> = (0..t.len()).filter(|&a| t.get(a)).collect();
    let falses: Vec<usize> = (0..t.len()).filter(|&a| !t.get(a)).collect();
    let one_separating = trues.iter().all(|&a| trues.iter().all(|&b| a & b != 0));
    let zero_separating = falses.iter().all(|&a| falses.iter().all(|&b| a | b != all));
    !one_separating && !zero_separating
}

/// Whether `A^i(w/n) → ½` for every weight `0 < w < n`, as uniformity on the bi-preserving
/// functions requires. Fails when `A(p) = p` (the selection connective) and `n > 2`.
fn middle_marginals_reach_half(spec: &ProcessSpec) -> bool {
    let poly = spec.alpha.char_poly();
    let n = spec.n();
    (1..n).all(|w| {
        let mut p = w as f64 / n as f64;
        for _ in 0..MARGINAL_ITERATIONS {
            p = poly.eval(&p);
        }
        (p - 0.5).abs() < 1e-9
    })
}

const MARGINAL_ITERATIONS: usize = 2000;

/// Iterations after which floating-point exact iteration stops being trustworthy.
///
/// When some input's initial marginal sits exactly on an interior fixed point `s` of `A` with
/// `A′(s) > 1`, roundoff along that marginal grows like `A′(s)^i` and eventually drives the
/// iterate off the invariant set. Returns the first `i` with `ε·A′(s)^i ≥` [`ROUNDOFF_VISIBLE`],
/// i.e. `⌊(log2 ROUNDOFF_VISIBLE − log2 ε) / log2 A′(s)⌋` for machine epsilon `ε` of `T`.
pub fn roundoff_horizon<T: Real>(spec: &ProcessSpec) -> Option<usize> {
    let poly = spec.alpha.char_poly();
    let s = poly.fixed_point(1e-15).ok()?.interior()?;
    let slope: f64 = poly.deriv(&s);
    if !(slope > 1.0) {
        return None;
    }
    let n = spec.n();
    let on_fixed_point = (0..1usize << n).any(|x| (spec.support.marginal(x) - s).abs() < 1e-12);
    let headroom = (ROUNDOFF_VISIBLE.log2() - T::epsilon().as_f64().log2()).max(0.0);
    on_fixed_point.then(|| (headroom / slope.log2()).floor() as usize)
}

/// Amplified roundoff at this size is comparable to the distances the checks resolve.
pub const ROUNDOFF_VISIBLE: f64 = 1e-6;

/// Uniform limit(s) materialized from a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitDistribution<T = f64> {
    pub even: Distribution<T>,
    /// Limit along odd iterations, for alternating processes.
    pub odd: Option<Distribution<T>>,
}

impl<T: Real> LimitDistribution<T> {
    /// Limit matching iteration `i`.
    pub fn at(&self, i: usize) -> &Distribution<T> {
        match &self.odd {
            Some(odd) if i % 2 == 1 => odd,
            _ => &self.even,
        }
    }

    /// Number of functions carrying mass, as `(even, odd)`.
    pub fn set_sizes(&self) -> (usize, Option<usize>) {
        (self.even.len(), self.odd.as_ref().map(Distribution::len))
    }
}

/// Largest `n` for enumerating general-domain sets by filtering all `2^(2^n)` functions.
pub const MATERIALIZE_MAX: usize = GENERAL_EXACT_MAX;

pub fn limit_distribution<T: Real>(pred: &Prediction, spec: &ProcessSpec) -> Result<LimitDistribution<T>> {
    let domain = spec.domain();
    match &pred.kind {
        PredictionKind::Unknown | PredictionKind::Degenerate => Err(Error::UnknownLimit),
        PredictionKind::Concentrated { set } | PredictionKind::UniformOnSet { set } => Ok(LimitDistribution {
            even: Distribution::uniform(domain, &materialize(set, domain)?)?,
            odd: None,
        }),
        PredictionKind::Alternating { even, odd } => Ok(LimitDistribution {
            even: Distribution::uniform(domain, &materialize(even, domain)?)?,
            odd: Some(Distribution::uniform(domain, &materialize(odd, domain)?)?),
        }),
    }
}

/// Function ids of a described set, sorted.
pub fn materialize(set: &SetDescriptor, domain: Domain) -> Result<Vec<u64>> {
    let n = domain.n();
    match (set, domain) {
        (SetDescriptor::ExplicitSet { ids }, _) => {
            let mut ids = ids.clone();
            if let Some(&bad) = ids.iter().find(|&&f| !domain.is_valid_key(f)) {
                return Err(Error::Invalid(format!("function id {bad:#x} outside {domain:?}")));
            }
            ids.sort_unstable();
            ids.dedup();
            Ok(ids)
        }
        (SetDescriptor::AllLinear, Domain::Linear(_)) => Ok((0..1u64 << (n + 1)).collect()),
        (
            SetDescriptor::LinearConstrained {
                const_term,
                var_parity,
                total_parity,
            },
            Domain::Linear(_),
        ) => Ok((0..1u64 << (n + 1))
            .filter(|&f| {
                let c = f & 1 == 1;
                let v = (f >> 1).count_ones() % 2 == 1;
                const_term.is_none_or(|b| b == c)
                    && var_parity.is_none_or(|b| b == v)
                    && total_parity.is_none_or(|b| b == (c ^ v))
            })
            .collect()),
        (SetDescriptor::Threshold { t }, Domain::General(_)) => Ok(vec![special(n, Special::Threshold(*t))?.id()]),
        (_, Domain::General(_)) => {
            if n > MATERIALIZE_MAX {
                return Err(Error::ArityCap {
                    n,
                    cap: MATERIALIZE_MAX,
                    what: "materializing a function family",
                });
            }
            let member = general_filter(set, n)?;
            Ok((0..1u64 << (1 << n))
                .filter(|&f| member(&TruthTable::from_word(n, f).expect("in range")))
                .collect())
        }
        _ => Err(Error::Domain(format!(
            "{set:?} is not a set of the {} domain",
            domain.name()
        ))),
    }
}

type Membership = Box<dyn Fn(&TruthTable) -> bool>;

fn general_filter(set: &SetDescriptor, n: usize) -> Result<Membership> {
    let in_slice = move |f: &TruthTable, m: usize| {
        (0..f.len()).all(|a| match (a.count_ones() as usize).cmp(&m) {
            std::cmp::Ordering::Less => !f.get(a),
            std::cmp::Ordering::Greater => f.get(a),
            std::cmp::Ordering::Equal => true,
        })
    };
    Ok(match *set {
        SetDescriptor::AllFunctions => Box::new(|_| true),
        SetDescriptor::SelfDual => Box::new(is_self_dual),
        SetDescriptor::Slice { m } => {
            if m > n {
                return Err(Error::Invalid(format!("slice level {m} above n = {n}")));
            }
            Box::new(move |f| in_slice(f, m))
        }
        SetDescriptor::SelfDualSlice => {
            if n % 2 == 1 {
                return Err(Error::OddArity {
                    n,
                    what: "self-dual slice",
                });
            }
            Box::new(move |f| in_slice(f, n / 2) && is_self_dual(f))
        }
        SetDescriptor::BiPreserving => Box::new(|f| !f.get(0) && f.get(f.len() - 1)),
        _ => return Err(Error::Domain(format!("{set:?} is not a general-domain family"))),
    })
}

/// Which iteration-count formula a bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundTag {
    /// `2 log n / log k`, linear connectives.
    LinearLog,
    /// `3 log n + c_α`, monotone without fixed point, fast class.
    FastMonotone,
    /// `n^(k−2)/(k−1) · (log n + log ε_0)`, monotone without fixed point, slow class.
    SlowMonotone,
    /// `k 2^k log n + c_α`, monotone with an interior fixed point.
    FixedPointMonotone,
    /// Smallest `i` meeting the explicit spectral condition for target `ε`.
    ExplicitSpectral,
    /// The explicit spectral condition carried over to a restricted family.
    SpectralCorollary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationBound {
    pub bound_tag: BoundTag,
    /// Bound on `i`; logs are base 2. Only the leading term when `has_unknown_constant`.
    pub value: f64,
    pub has_unknown_constant: bool,
    /// `min_j |s − j/n|` for fixed-point bounds.
    pub fixed_point_gap: Option<f64>,
}

pub fn theoretical_iterations(spec: &ProcessSpec, epsilon: f64) -> Result<IterationBound> {
    if !(epsilon > 0.0) {
        return Err(Error::Tolerance(epsilon));
    }
    let pred = predict(spec);
    let tag = pred.theorem_tag.ok_or(Error::UnknownLimit)?;
    let alpha = &spec.alpha;
    let n = spec.n() as f64;
    let k = alpha.arity();
    let log_n = n.log2();
    let plain = |bound_tag, value, flagged| IterationBound {
        bound_tag,
        value,
        has_unknown_constant: flagged,
        fixed_point_gap: None,
    };
    let spectral = |bound_tag, flagged| -> Result<IterationBound> {
        let value = if epsilon >= 1.0 {
            0.0
        } else {
            bound_constants(alpha, spec.n())?.savbounds_min_i(epsilon)?
        };
        Ok(plain(bound_tag, value, flagged))
    };
    use TheoremTag::*;
    match tag {
        LinearUniform | LinearAlternating => Ok(plain(BoundTag::LinearLog, 2.0 * log_n / (k as f64).log2(), false)),
        FullSupportUniform => spectral(BoundTag::ExplicitSpectral, false),
        SelfDualUniform | BiPreservingUniform | SliceUniform | OneConstantSlice | ProjectionSlice | SelfDualSlice => {
            spectral(BoundTag::SpectralCorollary, true)
        }
        MonotoneThreshold => match alpha.convergence_class() {
            ConvergenceClass::Slow => {
                let value = n.powi(k as i32 - 2) / (k as f64 - 1.0) * log_n;
                Ok(plain(BoundTag::SlowMonotone, value, true))
            }
            _ => Ok(plain(BoundTag::FastMonotone, 3.0 * log_n, true)),
        },
        UnbalancedMonotoneThreshold | OddMajority | OneConstantConcentration => {
            let s = alpha.fixed_point(1e-14)?.interior().ok_or(Error::UnknownLimit)?;
            let gap = (0..=spec.n())
                .map(|j| (s - j as f64 / n).abs())
                .fold(f64::INFINITY, f64::min);
            Ok(IterationBound {
                bound_tag: BoundTag::FixedPointMonotone,
                value: (k as f64) * (1u64 << k) as f64 * log_n,
                has_unknown_constant: true,
                fixed_point_gap: Some(gap),
            })
        }
    }
}

/// Distances from exact iterates to the predicted limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilon: f64,
    /// First `i` with `MaxAbs(π_i, π) < ε`.
    pub iterations_measured: Option<usize>,
    pub converged: bool,
    pub bound_value: Option<f64>,
    pub bound_tag: Option<BoundTag>,
    pub has_unknown_constant: bool,
    /// `MaxAbs(π_i, π)` for `i = 0..=max_i`.
    pub trajectory: Vec<f64>,
    /// Explicit per-iteration bound on the distance, where one exists.
    pub distance_bound: Vec<Option<f64>>,
    /// See [`roundoff_horizon`]; distances past it measure roundoff growth, not convergence.
    pub roundoff_horizon: Option<usize>,
}

impl ConvergenceReport {
    /// Rows `i,distance,bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,distance,bound\n");
        for (i, d) in self.trajectory.iter().enumerate() {
            let b = self
                .distance_bound
                .get(i)
                .copied()
                .flatten()
                .map(fmt17)
                .unwrap_or_default();
            out.push_str(&format!("{i},{},{b}\n", fmt17(*d)));
        }
        out
    }

    /// Least-squares slope of `log2 distance` against `i` over `[from, to]`, skipping zeros.
    pub fn log_slope(&self, from: usize, to: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .trajectory
            .iter()
            .enumerate()
            .skip(from)
            .take(to.saturating_sub(from) + 1)
            .filter(|(_, &d)| d > 0.0)
            .map(|(i, &d)| (i as f64, d.log2()))
            .collect();
        log_linear_slope(&pts)
    }
}

/// Least-squares slope through `(x, y)` points; `None` with fewer than two distinct `x`.
pub fn log_linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn empirical_convergence(spec: &ProcessSpec, epsilon: f64, max_i: usize) -> Result<ConvergenceReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Tolerance(epsilon));
    }
    let pred = predict(spec);
    let limit = limit_distribution::<f64>(&pred, spec)?;
    let mut trajectory = Vec::with_capacity(max_i + 1);
    exact_trajectory::<f64>(spec, max_i, |pi| {
        trajectory.push(distance(pi, limit.at(pi.iteration()), Metric::MaxAbs)?);
        Ok(())
    })?;
    let iterations_measured = trajectory.iter().position(|&d| d < epsilon);
    let bound = theoretical_iterations(spec, epsilon).ok();
    let distance_bound = distance_bounds(spec, &pred, max_i)?;
    Ok(ConvergenceReport {
        epsilon,
        iterations_measured,
        converged: iterations_measured.is_some(),
        bound_value: bound.as_ref().map(|b| b.value),
        bound_tag: bound.as_ref().map(|b| b.bound_tag),
        has_unknown_constant: bound.as_ref().is_some_and(|b| b.has_unknown_constant),
        trajectory,
        distance_bound,
        roundoff_horizon: roundoff_horizon::<f64>(spec),
    })
}

/// Per-iteration distance bounds: `max_{|Δ_0(w)| < 1} |Δ_0(w)|^(k^i)` for linear processes, the
/// spectral envelope for the full-support process, none otherwise.
fn distance_bounds(spec: &ProcessSpec, pred: &Prediction, max_i: usize) -> Result<Vec<Option<f64>>> {
    let k = spec.alpha.arity() as f64;
    match pred.theorem_tag {
        Some(TheoremTag::LinearUniform | TheoremTag::LinearAlternating) => {
            let delta = transform(&initial_distribution::<f64>(spec)?)?;
            let m = delta
                .values()
                .iter()
                .map(|v| v.abs())
                .filter(|&v| v < 1.0 - 1e-12)
                .fold(0.0, f64::max);
            Ok((0..=max_i)
                .map(|i| {
                    Some(if m == 0.0 {
                        0.0
                    } else {
                        (k.powi(i as i32) * m.ln()).exp()
                    })
                })
                .collect())
        }
        Some(TheoremTag::FullSupportUniform) => {
            let bc = bound_constants(&spec.alpha, spec.n())?;
            Ok((0..=max_i).map(|i| Some(bc.envelope_max(i as f64))).collect())
        }
        _ => Ok(vec![None; max_i + 1]),
    }
}

/// First `i ≤ max_i` with `A^i(p_0) < threshold`.
pub fn iterations_below(poly: &CharPoly, p0: f64, threshold: f64, max_i: usize) -> Option<usize> {
    let mut p = p0;
    for i in 0..=max_i {
        if p < threshold {
            return Some(i);
        }
        p = poly.eval(&p);
    }
    None
}

/// Whether the materialized limit lies inside the closure of the support.
pub fn limit_in_closure(spec: &ProcessSpec) -> Result<bool> {
    let limit = limit_distribution::<f64>(&predict(spec), spec)?;
    let closure = support_closure(spec)?;
    let inside = |d: &Distribution<f64>| {
        d.support()
            .iter()
            .all(|f| closure.union_support.binary_search(f).is_ok())
    };
    Ok(inside(&limit.even) && limit.odd.as_ref().is_none_or(inside))
}

// ---------------------------------------------------------------------------------------------
// Lemma checks

/// One connective as seen by the checks. The polynomial is stored separately from the table so a
/// perturbed polynomial can be injected as a negative control.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub table: TruthTable,
    pub class: PropertySet,
    pub poly: CharPoly,
}

impl Member {
    pub fn new(table: TruthTable) -> Self {
        Member {
            class: classify(&table),
            poly: CharPoly::of(&table),
            table,
        }
    }

    fn label(&self) -> String {
        format!(
            "k={} table={} counts={:?}",
            self.table.arity(),
            self.table.to_hex(),
            self.poly.counts()
        )
    }

    fn is_projection(&self) -> bool {
        let t = &self.table;
        (0..t.arity()).any(|j| (0..t.len()).all(|a| t.get(a) == ((a >> j) & 1 == 1)))
    }
}

/// A population of connectives to scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectiveSet {
    pub description: String,
    pub members: Vec<Member>,
}

/// Number of monotone 5-ary connectives.
pub const MONOTONE_5_COUNT: usize = 7581;

impl ConnectiveSet {
    pub fn from_connectives(description: impl Into<String>, cs: &[Connective]) -> Self {
        ConnectiveSet {
            description: description.into(),
            members: cs.iter().map(|c| Member::new(c.table().clone())).collect(),
        }
    }

    /// Every connective of arity `k ≤ 4`.
    pub fn all(k: usize) -> Result<Self> {
        if k == 0 || k > 4 {
            return Err(Error::ArityCap {
                n: k,
                cap: 4,
                what: "exhaustive connective populations",
            });
        }
        let members = (0..1u64 << (1 << k))
            .map(|w| Member::new(TruthTable::from_word(k, w).expect("in range")))
            .collect();
        Ok(ConnectiveSet {
            description: format!("all connectives, k={k}"),
            members,
        })
    }

    /// Monotone connectives of arity `k ≤ 5`: filtered from all tables for `k ≤ 4`, assembled as
    /// ordered pairs of 4-ary monotone cofactors for `k = 5`.
    pub fn monotone(k: usize) -> Result<Self> {
        let words = monotone_words(k)?;
        let members = words
            .into_iter()
            .map(|w| Member::new(TruthTable::from_word(k, w).expect("in range")))
            .collect();
        Ok(ConnectiveSet {
            description: format!("all monotone connectives, k={k}"),
            members,
        })
    }

    /// `count` monotone 5-ary connectives drawn without replacement from the full list.
    pub fn monotone5_sample(count: usize, seed: u64) -> Result<Self> {
        let words = monotone_words(5)?;
        let mut rng = Pcg64::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, words.len(), count.min(words.len())).into_vec();
        idx.sort_unstable();
        let members = idx
            .into_iter()
            .map(|i| Member::new(TruthTable::from_word(5, words[i]).expect("in range")))
            .collect();
        Ok(ConnectiveSet {
            description: format!("{count} sampled monotone connectives, k=5, seed={seed}"),
            members,
        })
    }

    /// Union of populations, descriptions joined.
    pub fn union(parts: Vec<ConnectiveSet>) -> Self {
        let description = parts
            .iter()
            .map(|p| p.description.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        ConnectiveSet {
            description,
            members: parts.into_iter().flat_map(|p| p.members).collect(),
        }
    }

    /// Replace member `index`'s polynomial counts, keeping its table and class.
    pub fn with_perturbed_counts(mut self, index: usize, counts: Vec<u64>) -> Result<Self> {
        let max = self.members.len();
        let m = self
            .members
            .get_mut(index)
            .ok_or(Error::IndexOutOfRange { index, max })?;
        m.poly = CharPoly::from_counts(counts)?;
        self.description.push_str(&format!(" (member {index} perturbed)"));
        Ok(self)
    }
}

fn monotone_words(k: usize) -> Result<Vec<u64>> {
    match k {
        1..=4 => Ok((0..1u64 << (1 << k))
            .filter(|&w| is_monotone(&TruthTable::from_word(k, w).expect("in range")))
            .collect()),
        5 => {
            let m4 = monotone_words(4)?;
            let mut out: Vec<u64> = m4
                .iter()
                .flat_map(|&lo| {
                    m4.iter()
                        .filter(move |&&hi| lo & !hi == 0)
                        .map(move |&hi| lo | hi << 16)
                })
                .collect();
            out.sort_unstable();
            Ok(out)
        }
        _ => Err(Error::ArityCap {
            n: k,
            cap: 5,
            what: "monotone connective enumeration",
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma")]
pub enum Lemma {
    /// `A(½) = ½` iff `α` is balanced.
    Bal,
    /// Interior fixed points of monotone non-projections are `½` or far from small-denominator rationals.
    Equiv { denominator_bound: u64 },
    /// `35/24 < A′(1−ε)` for `ε < 1/(k 2^(k+1))`, fast class.
    FastNFP,
    /// `1 + ε^k < A′(1−ε) ≤ (1−ε)^(k−2)(k(k−2)ε + 1)` for `ε < 1/k`, slow class.
    SlowNFP,
    /// `A(p) < (C(k,2) + 1)p²` when no argument alone forces `α`.
    Triv,
    /// `A′(s) ≥ 1 + (k−2)/2^(k−2)` at an interior fixed point.
    MinSlope,
    /// Transform of the uniform slice distribution equals the closed form.
    FourierSlice { n: usize },
    /// Restriction residual decays for a slice or bi-preserving process.
    Restriction { spec: ProcessSpec, i_max: usize },
    /// The tuple-sum recurrence reproduces the exact spectral step.
    SavickyRecurrence { spec: ProcessSpec },
    /// `Σ|S(t)|³ < 1 − 2^−k` for balanced nonlinear connectives.
    SpectralNorm,
}

impl Lemma {
    pub fn name(&self) -> &'static str {
        match self {
            Lemma::Bal => "Bal",
            Lemma::Equiv { .. } => "Equiv",
            Lemma::FastNFP => "FastNFP",
            Lemma::SlowNFP => "SlowNFP",
            Lemma::Triv => "Triv",
            Lemma::MinSlope => "MinSlope",
            Lemma::FourierSlice { .. } => "FourierSlice",
            Lemma::Restriction { .. } => "Restriction",
            Lemma::SavickyRecurrence { .. } => "SavickyRecurrence",
            Lemma::SpectralNorm => "SpectralNorm",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one check. A margin is nonnegative when the inequality holds with room to spare;
/// `witness` names the tightest case (the failing one when `pass` is false).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub lemma: String,
    pub population: String,
    /// Cases that met the hypotheses and were evaluated.
    pub checked: usize,
    pub pass: bool,
    pub worst_margin: Option<f64>,
    pub witness: Option<String>,
}

/// Tolerance on inequality margins.
pub const MARGIN_TOL: f64 = 1e-9;
/// Interior points per `ε`- or `p`-grid.
pub const GRID_POINTS: usize = 1000;

struct Case {
    margin: f64,
    witness: String,
}

fn aggregate(lemma: &Lemma, population: String, cases: Vec<Option<Case>>) -> CheckResult {
    let cases: Vec<Case> = cases.into_iter().flatten().collect();
    let worst = cases.iter().enumerate().fold(None::<usize>, |best, (i, c)| match best {
        Some(b) if cases[b].margin <= c.margin => Some(b),
        _ => Some(i),
    });
    CheckResult {
        lemma: lemma.name().into(),
        population,
        checked: cases.len(),
        pass: worst.is_none_or(|w| cases[w].margin >= -MARGIN_TOL),
        worst_margin: worst.map(|w| cases[w].margin),
        witness: worst.map(|w| cases[w].witness.clone()),
    }
}

/// Open grid `lo + (hi − lo)·j/(GRID_POINTS + 1)`, `j = 1..=GRID_POINTS`.
fn open_grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (1..=GRID_POINTS).map(move |j| lo + (hi - lo) * j as f64 / (GRID_POINTS + 1) as f64)
}

fn min_over(points: impl Iterator<Item = f64>, f: impl Fn(f64) -> f64) -> (f64, f64) {
    points
        .map(|x| (f(x), x))
        .fold((f64::INFINITY, f64::NAN), |acc, v| if v.0 < acc.0 { v } else { acc })
}

pub fn verify_lemma(which: &Lemma, population: &ConnectiveSet) -> Result<CheckResult> {
    let desc = population.description.clone();
    let per_member = |f: &(dyn Fn(&Member) -> Option<Case> + Sync)| -> Vec<Option<Case>> {
        population.members.par_iter().map(f).collect()
    };
    let cases = match which {
        Lemma::Bal => per_member(&check_bal),
        Lemma::Equiv { denominator_bound } => {
            let q = *denominator_bound;
            let outcomes: Vec<Result<Option<Case>>> =
                population.members.par_iter().map(|m| check_equiv(m, q)).collect();
            outcomes.into_iter().collect::<Result<_>>()?
        }
        Lemma::FastNFP => per_member(&check_fast_nfp),
        Lemma::SlowNFP => per_member(&check_slow_nfp),
        Lemma::Triv => per_member(&check_triv),
        Lemma::MinSlope => per_member(&check_min_slope),
        Lemma::SpectralNorm => per_member(&check_spectral_norm),
        Lemma::FourierSlice { n } => return check_fourier_slice(which, *n),
        Lemma::Restriction { spec, i_max } => return check_restriction(which, spec, *i_max),
        Lemma::SavickyRecurrence { spec } => return check_savicky(which, spec),
    };
    Ok(aggregate(which, desc, cases))
}

fn check_bal(m: &Member) -> Option<Case> {
    let half = Rational64::new(1, 2);
    let at_half: Rational64 = m.poly.eval(&half);
    let off = at_half - half;
    let off = (*off.numer() as f64 / *off.denom() as f64).abs();
    // balanced members need a zero gap, unbalanced ones a nonzero gap
    let margin = if m.class.balanced { -off } else { off };
    Some(Case {
        margin,
        witness: format!("{} balanced={} A(1/2)={at_half}", m.label(), m.class.balanced),
    })
}

/// `Σ c_i p^i (q−p)^(k−i) = p q^(k−1)`, exactly.
fn rational_fixed_point(poly: &CharPoly, p: i128, q: i128) -> Result<bool> {
    let k = poly.arity() as u32;
    let overflow = || Error::Invalid(format!("integer overflow checking {p}/{q} at k={k}"));
    let mut lhs: i128 = 0;
    for (i, &c) in poly.counts().iter().enumerate() {
        let t = p
            .checked_pow(i as u32)
            .and_then(|a| (q - p).checked_pow(k - i as u32).and_then(|b| a.checked_mul(b)))
            .and_then(|v| v.checked_mul(c as i128))
            .ok_or_else(overflow)?;
        lhs = lhs.checked_add(t).ok_or_else(overflow)?;
    }
    let rhs = q
        .checked_pow(k - 1)
        .and_then(|v| v.checked_mul(p))
        .ok_or_else(overflow)?;
    Ok(lhs == rhs)
}

fn check_equiv(m: &Member, qmax: u64) -> Result<Option<Case>> {
    if !m.class.monotone || m.is_projection() {
        return Ok(None);
    }
    let s = match m.poly.fixed_point(1e-15)? {
        FixedPointReport::Interior { s, .. } => s,
        _ => return Ok(None),
    };
    for q in 2..=qmax as i128 {
        for p in 1..q {
            if gcd(p, q) == 1 && 2 * p != q && rational_fixed_point(&m.poly, p, q)? {
                return Ok(Some(Case {
                    margin: -1.0,
                    witness: format!("{} has rational fixed point {p}/{q}", m.label()),
                }));
            }
        }
    }
    if (s - 0.5).abs() <= MARGIN_TOL {
        return Ok(Some(Case {
            margin: 0.5 - MARGIN_TOL,
            witness: format!("{} s=1/2", m.label()),
        }));
    }
    let (gap, p, q) = (2..=qmax)
        .flat_map(|q| (1..q).map(move |p| (p, q)))
        .map(|(p, q)| ((s - p as f64 / q as f64).abs(), p, q))
        .fold((f64::INFINITY, 0, 0), |acc, v| if v.0 < acc.0 { v } else { acc });
    Ok(Some(Case {
        margin: gap - MARGIN_TOL,
        witness: format!("{} s={} nearest {p}/{q} at {gap:.3e}", m.label(), fmt17(s)),
    }))
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Monotone and nonconstant (`β_0 = 0`, `β_k = 1`), `k > 2`, `A(p) < p` on `(0, 1)`. Returns
/// `(k, β_{k−1})`.
fn nfp_hypothesis(m: &Member) -> Option<(usize, Rational64)> {
    let k = m.table.arity();
    let c = m.poly.counts();
    if !m.class.monotone || k <= 2 || c[0] != 0 || c[k] != 1 {
        return None;
    }
    match m.poly.fixed_point(1e-15) {
        Ok(FixedPointReport::BelowEverywhere) => Some((k, m.poly.beta(k - 1))),
        _ => None,
    }
}

fn check_fast_nfp(m: &Member) -> Option<Case> {
    let (k, b) = nfp_hypothesis(m)?;
    if b > Rational64::new(k as i64 - 2, k as i64) {
        return None;
    }
    let eps_k = 1.0 / (k as f64 * (1u64 << (k + 1)) as f64);
    let (margin, eps) = min_over(open_grid(0.0, eps_k), |e| m.poly.deriv(&(1.0 - e)) - 35.0 / 24.0);
    Some(Case {
        margin,
        witness: format!("{} eps={eps:.6e} A'(1-eps)-35/24={margin:.6e}", m.label()),
    })
}

fn check_slow_nfp(m: &Member) -> Option<Case> {
    let (k, b) = nfp_hypothesis(m)?;
    if b != Rational64::new(k as i64 - 1, k as i64) {
        return None;
    }
    let kf = k as f64;
    let (margin, eps) = min_over(open_grid(0.0, 1.0 / kf), |e| {
        let d = m.poly.deriv(&(1.0 - e));
        let lower = d - (1.0 + e.powi(k as i32));
        let upper = (1.0 - e).powi(k as i32 - 2) * (kf * (kf - 2.0) * e + 1.0) - d;
        lower.min(upper)
    });
    Some(Case {
        margin,
        witness: format!("{} eps={eps:.6e} margin={margin:.6e}", m.label()),
    })
}

fn check_triv(m: &Member) -> Option<Case> {
    if !m.class.monotone || m.poly.counts().get(1).copied().unwrap_or(0) != 0 {
        return None;
    }
    let k = m.table.arity() as f64;
    let c = k * (k - 1.0) / 2.0 + 1.0;
    let (margin, p) = min_over(open_grid(0.0, 1.0), |p| c * p * p - m.poly.eval(&p));
    Some(Case {
        margin,
        witness: format!("{} p={p:.6e} margin={margin:.6e}", m.label()),
    })
}

fn check_min_slope(m: &Member) -> Option<Case> {
    if !m.class.monotone || m.is_projection() {
        return None;
    }
    let s = m.poly.fixed_point(1e-15).ok()?.interior()?;
    let k = m.table.arity() as i32;
    let bound = 1.0 + (k - 2) as f64 / 2f64.powi(k - 2);
    let slope: f64 = m.poly.deriv(&s);
    Some(Case {
        margin: slope - bound,
        witness: format!("{} s={} A'(s)={} bound={bound}", m.label(), fmt17(s), fmt17(slope)),
    })
}

fn check_spectral_norm(m: &Member) -> Option<Case> {
    if !m.class.balanced || m.class.linear {
        return None;
    }
    let profile = crate::connective::SpectralProfile::of(&m.table);
    let a = profile.a3();
    let limit = 1.0 - 0.5f64.powi(m.table.arity() as i32);
    Some(Case {
        margin: limit - a,
        witness: format!("{} a={} limit={limit}", m.label(), fmt17(a)),
    })
}

fn check_fourier_slice(which: &Lemma, n: usize) -> Result<CheckResult> {
    let domain = Domain::General(n);
    let set = materialize(&SetDescriptor::Slice { m: n / 2 }, domain)?;
    let measured = transform(&Distribution::<f64>::uniform(domain, &set)?)?;
    let claimed = slice_spectrum(n)?;
    let (diff, w) = measured
        .values()
        .iter()
        .zip(claimed.values())
        .enumerate()
        .map(|(w, (a, b))| ((a - b).abs(), w))
        .fold((0.0, 0), |acc, v| if v.0 > acc.0 { v } else { acc });
    Ok(CheckResult {
        lemma: which.name().into(),
        population: format!("uniform on S_({},{n}), {} functions", n / 2, set.len()),
        checked: measured.values().len(),
        pass: diff == 0.0,
        worst_margin: Some(-diff),
        witness: Some(format!("w={} |difference|={diff:e}", domain.format_key(w as u64))),
    })
}

/// Restriction pair `(low, high)` for the process's predicted limit family.
pub fn restriction_pair(spec: &ProcessSpec) -> Result<(TruthTable, TruthTable)> {
    let n = spec.n();
    match predict(spec).kind {
        PredictionKind::UniformOnSet {
            set: SetDescriptor::BiPreserving,
        } => Ok((special(n, Special::Kappa)?, special(n, Special::Eta)?)),
        PredictionKind::UniformOnSet {
            set: SetDescriptor::Slice { m },
        } if 2 * m == n => Ok((special(n, Special::Chi)?, special(n, Special::Upsilon)?)),
        PredictionKind::UniformOnSet {
            set: SetDescriptor::SelfDualSlice,
        } => Ok((special(n, Special::Chi)?, special(n, Special::Upsilon)?)),
        _ => Err(Error::Invalid(
            "restriction needs a middle-slice or bi-preserving process".into(),
        )),
    }
}

/// Residuals `max_w |Δ_i(w) − (−1)^⟨high,w⟩ Δ_i(w ∧ low)|` for `i = 0..=i_max`.
pub fn restriction_trajectory(spec: &ProcessSpec, i_max: usize) -> Result<Vec<f64>> {
    let (low, high) = restriction_pair(spec)?;
    let mut out = Vec::with_capacity(i_max + 1);
    exact_trajectory::<f64>(spec, i_max, |pi| {
        out.push(restriction_residual(&transform(pi)?, &low, &high)?);
        Ok(())
    })?;
    Ok(out)
}

/// Start of the window over which restriction residuals must not increase.
pub const RESTRICTION_WINDOW_START: usize = 5;
pub const RESTRICTION_TOL: f64 = 1e-6;

fn check_restriction(which: &Lemma, spec: &ProcessSpec, i_max: usize) -> Result<CheckResult> {
    let res = restriction_trajectory(spec, i_max)?;
    let last = *res.last().expect("i_max + 1 values");
    let mut margin = RESTRICTION_TOL - last;
    let mut witness = format!("residual at i={i_max} is {last:e}");
    for i in RESTRICTION_WINDOW_START.max(1)..=i_max {
        let (prev, cur) = (res[i - 1], res[i]);
        if i > RESTRICTION_WINDOW_START && (cur > prev || (prev > 0.0 && cur == prev)) {
            margin = margin.min(prev - cur).min(-f64::MIN_POSITIVE);
            witness = format!("residual rose or stalled at i={i}: {prev:e} -> {cur:e}");
            break;
        }
    }
    Ok(CheckResult {
        lemma: which.name().into(),
        population: format!(
            "{} n={} support={}",
            connective_label(&spec.alpha),
            spec.n(),
            spec.support.to_flags()
        ),
        checked: res.len(),
        pass: margin >= 0.0,
        worst_margin: Some(margin),
        witness: Some(witness),
    })
}

/// Iterates at which the recurrence is compared with the exact step.
pub const RECURRENCE_ITERATES: usize = 6;
/// Largest `|w|` compared.
pub const RECURRENCE_MAX_WEIGHT: usize = 3;

fn check_savicky(which: &Lemma, spec: &ProcessSpec) -> Result<CheckResult> {
    let n = spec.n();
    let mut pis = Vec::new();
    exact_trajectory::<f64>(spec, RECURRENCE_ITERATES - 1, |pi| {
        pis.push(pi.clone());
        Ok(())
    })?;
    let ws: Vec<TruthTable> = (0..1u64 << (1 << n))
        .map(|w| TruthTable::from_word(n, w).expect("in range"))
        .filter(|w| w.weight() <= RECURRENCE_MAX_WEIGHT)
        .collect();
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for pi in &pis {
        let next = transform(&step_exact(pi, &spec.alpha)?)?;
        for w in &ws {
            let d = (savicky_predict(pi, &spec.alpha, w)? - next.get(w.id())).abs();
            checked += 1;
            if d >= worst.0 {
                worst = (d, format!("i={} w={} |difference|={d:e}", pi.iteration(), w.to_hex()));
            }
        }
    }
    Ok(CheckResult {
        lemma: which.name().into(),
        population: format!(
            "{} n={n} support={}, iterates 0..{}, |w| <= {RECURRENCE_MAX_WEIGHT}",
            connective_label(&spec.alpha),
            spec.support.to_flags(),
            RECURRENCE_ITERATES - 1
        ),
        checked,
        pass: worst.0 <= MARGIN_TOL,
        worst_margin: Some(MARGIN_TOL - worst.0),
        witness: Some(worst.1),
    })
}

fn connective_label(c: &Connective) -> String {
    match c.name() {
        Some(name) => name.to_string(),
        None => format!("k={} table={}", c.arity(), c.table().to_hex()),
    }
}

/// Iterations run by the prediction cross-check.
pub const CROSS_CHECK_STEPS: usize = 60;
pub const CROSS_CHECK_TOL: f64 = 1e-6;

/// Presets and supports making up the prediction cross-check matrix.
pub fn acceptance_matrix(n_max: usize) -> Result<Vec<ProcessSpec>> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        let supports = [
            SupportSpec::projections(n),
            SupportSpec {
                const0: true,
                ..SupportSpec::projections(n)
            },
            SupportSpec {
                const1: true,
                ..SupportSpec::projections(n)
            },
            SupportSpec::projections(n).with_constants(),
            SupportSpec::projections(n).with_negations(),
            SupportSpec::full(n),
        ];
        for name in crate::connective::PRESETS {
            let alpha = Connective::preset(name)?;
            for s in supports {
                let spec = ProcessSpec::new(s, alpha.clone());
                if predict(&spec).is_known() && initial_distribution::<f64>(&spec).is_ok() {
                    out.push(spec);
                }
            }
        }
    }
    Ok(out)
}

/// Prediction against exact iteration, plus limit containment in the support closure.
pub fn cross_check(spec: &ProcessSpec) -> Result<CheckResult> {
    // stop before amplified roundoff dominates the distance
    let steps = roundoff_horizon::<f64>(spec).map_or(CROSS_CHECK_STEPS, |h| h.min(CROSS_CHECK_STEPS));
    let report = empirical_convergence(spec, CROSS_CHECK_TOL, steps)?;
    let tail = *report.trajectory.last().expect("nonempty");
    // alternating limits are compared per parity, so the last two iterates cover both halves
    let tail = report.trajectory.iter().rev().take(2).copied().fold(tail, f64::max);
    let contained = limit_in_closure(spec)?;
    let pred = predict(spec);
    Ok(CheckResult {
        lemma: "PredictionConsistency".into(),
        population: format!(
            "{} n={} support={}",
            connective_label(&spec.alpha),
            spec.n(),
            spec.support.to_flags()
        ),
        checked: report.trajectory.len(),
        pass: tail < CROSS_CHECK_TOL && contained,
        worst_margin: Some(CROSS_CHECK_TOL - tail),
        witness: Some(format!(
            "{:?} via {:?}; distance at i={steps} is {tail:e}; limit inside closure: {contained}",
            pred.kind, pred.theorem_tag
        )),
    })
}

/// Seed for the arity-5 monotone sample.
pub const SAMPLE_SEED: u64 = 2024;
pub const SAMPLE_SIZE: usize = 500;

/// Monotone connectives of arity `2..=k_max`, with the arity-5 level sampled.
pub fn monotone_population(k_max: usize) -> Result<ConnectiveSet> {
    let mut parts = Vec::new();
    for k in 1..=k_max.min(4) {
        parts.push(ConnectiveSet::monotone(k)?);
    }
    if k_max >= 5 {
        parts.push(ConnectiveSet::monotone5_sample(SAMPLE_SIZE, SAMPLE_SEED)?);
    }
    Ok(ConnectiveSet::union(parts))
}

/// Every lemma check, then the prediction cross-checks for `n ≤ n_max`.
pub fn verify_all(k_max: usize, n_max: usize) -> Result<Vec<CheckResult>> {
    if k_max == 0 || k_max > 5 {
        return Err(Error::ArityCap {
            n: k_max,
            cap: 5,
            what: "verify_all connective arity",
        });
    }
    let mut out = Vec::new();
    let all = ConnectiveSet::union((1..=k_max.min(4)).map(ConnectiveSet::all).collect::<Result<_>>()?);
    out.push(verify_lemma(&Lemma::Bal, &all)?);
    out.push(verify_lemma(&Lemma::SpectralNorm, &all)?);
    let mono = monotone_population(k_max)?;
    for lemma in [
        Lemma::Equiv { denominator_bound: 50 },
        Lemma::FastNFP,
        Lemma::SlowNFP,
        Lemma::Triv,
        Lemma::MinSlope,
    ] {
        out.push(verify_lemma(&lemma, &mono)?);
    }
    for n in (2..=n_max.min(4)).step_by(2) {
        out.push(verify_lemma(&Lemma::FourierSlice { n }, &mono)?);
    }
    if n_max >= 2 {
        let maj3 = Connective::preset("maj3")?;
        let slice = ProcessSpec::new(SupportSpec::projections(2).with_constants(), maj3.clone());
        out.push(verify_lemma(
            &Lemma::Restriction {
                spec: slice.clone(),
                i_max: 20,
            },
            &mono,
        )?);
        out.push(verify_lemma(&Lemma::SavickyRecurrence { spec: slice }, &mono)?);
        let full = ProcessSpec::new(SupportSpec::full(2), maj3);
        out.push(verify_lemma(&Lemma::SavickyRecurrence { spec: full }, &mono)?);
    }
    for spec in acceptance_matrix(n_max)? {
        out.push(cross_check(&spec)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, flags: &str, name: &str) -> ProcessSpec {
        ProcessSpec::new(SupportSpec::parse(n, flags).unwrap(), Connective::preset(name).unwrap())
    }

    #[test]
    fn monotone_counts() {
        let counts: Vec<usize> = (1..=5).map(|k| monotone_words(k).unwrap().len()).collect();
        assert_eq!(counts, vec![3, 6, 20, 168, MONOTONE_5_COUNT]);
    }

    #[test]
    fn linear_descriptors() {
        let p = predict(&spec(2, "proj", "xor2"));
        assert_eq!(
            p.kind,
            PredictionKind::UniformOnSet {
                set: SetDescriptor::LinearConstrained {
                    const_term: Some(false),
                    var_parity: Some(false),
                    total_parity: Some(false)
                }
            }
        );
        let p = predict(&spec(2, "proj,neg,const0,const1", "xor2"));
        assert_eq!(
            p.kind,
            PredictionKind::UniformOnSet {
                set: SetDescriptor::AllLinear
            }
        );
        let p = predict(&spec(2, "proj", "xnor3"));
        assert_eq!(p.theorem_tag, Some(TheoremTag::LinearAlternating));
    }

    #[test]
    fn bi_preserving_guard() {
        let mux = Connective::preset("mux").unwrap();
        assert!(generates_bi_preserving(&mux));
        assert_eq!(
            predict(&spec(2, "proj", "mux")).theorem_tag,
            Some(TheoremTag::BiPreservingUniform)
        );
        // A(p) = p keeps the weight-1 marginals at 1/3
        assert_eq!(predict(&spec(3, "proj", "mux")).kind, PredictionKind::Unknown);
        // A(p) = 2p − 3p² + 2p³ pulls every middle marginal to ½
        let pull = ProcessSpec::new(SupportSpec::projections(3), Connective::from_word(3, 0x9a).unwrap());
        assert_eq!(predict(&pull).theorem_tag, Some(TheoremTag::BiPreservingUniform));
    }

    #[test]
    fn horizon_only_on_repelling_marginals() {
        assert_eq!(
            roundoff_horizon::<f64>(&spec(2, "proj,const0,const1", "maj3")),
            Some(54)
        );
        assert_eq!(roundoff_horizon::<f32>(&spec(2, "proj,const0,const1", "maj3")), Some(5));
        assert_eq!(roundoff_horizon::<f64>(&spec(3, "proj", "maj3")), None);
        assert_eq!(roundoff_horizon::<f64>(&spec(2, "proj", "and3")), None);
    }

    #[test]
    fn rational_fixed_point_exact() {
        let maj = CharPoly::of(Connective::preset("maj3").unwrap().table());
        assert!(rational_fixed_point(&maj, 1, 2).unwrap());
        assert!(!rational_fixed_point(&maj, 1, 3).unwrap());
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((log_linear_slope(&pts).unwrap() + 2.0).abs() < 1e-12);
    }
}
