//! Connectives and their amplification polynomials.

use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::boolfn::{self, classify, PropertySet, TruthTable};
use crate::error::{Error, Result};
use crate::scalar::{from_u64, Real, Scalar};
use crate::spectrum::fwht_in_place;

/// Largest connective arity. The word composer keeps `2^k` cofactor masks.
pub const MAX_CONNECTIVE_ARITY: usize = 16;

/// The `α` of a growth process, with its classification computed once.
#[derive(Clone, PartialEq, Eq)]
pub struct Connective {
    table: TruthTable,
    class: PropertySet,
    name: Option<String>,
}

impl Connective {
    pub fn new(table: TruthTable) -> Result<Self> {
        let k = table.arity();
        if k > MAX_CONNECTIVE_ARITY {
            return Err(Error::ArityCap {
                n: k,
                cap: MAX_CONNECTIVE_ARITY,
                what: "connectives",
            });
        }
        let class = classify(&table);
        Ok(Connective {
            table,
            class,
            name: None,
        })
    }

    pub fn from_word(k: usize, word: u64) -> Result<Self> {
        Self::new(TruthTable::from_word(k, word)?)
    }

    pub fn from_fn(k: usize, f: impl FnMut(usize) -> bool) -> Result<Self> {
        Self::new(TruthTable::from_fn(k, f)?)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn arity(&self) -> usize {
        self.table.arity()
    }

    pub fn table(&self) -> &TruthTable {
        &self.table
    }

    pub fn class(&self) -> &PropertySet {
        &self.class
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// `k = 1`, or some argument is ignored. The limit theorems all assume neither.
    pub fn is_degenerate(&self) -> bool {
        self.arity() < 2 || !self.class.depends_on_all
    }

    pub fn dual(&self) -> Connective {
        Connective::new(boolfn::dual(&self.table)).expect("dual keeps the arity")
    }

    /// `c` with `α = c ⊕ ⊕_j x_j` over the arguments `α` depends on, when `α` is linear.
    pub fn linear_constant(&self) -> Option<bool> {
        boolfn::linear_coeffs(&self.table).map(|l| l.constant())
    }

    pub fn char_poly(&self) -> CharPoly {
        CharPoly::of(&self.table)
    }

    pub fn spectral_profile(&self) -> SpectralProfile {
        SpectralProfile::of(&self.table)
    }

    pub fn fixed_point(&self, tol: f64) -> Result<FixedPointReport> {
        self.char_poly().fixed_point(tol)
    }

    pub fn convergence_class(&self) -> ConvergenceClass {
        self.convergence_detail().class
    }

    pub fn convergence_detail(&self) -> ConvergenceDetail {
        let k = self.arity();
        let na = ConvergenceDetail {
            class: ConvergenceClass::NotApplicable,
            via_dual: false,
            beta_k1: None,
            beta_k2: None,
            warning: None,
        };
        if k < 2 || !self.class.monotone {
            return na;
        }
        let via_dual = match self.fixed_point(1e-12).expect("positive tolerance") {
            FixedPointReport::BelowEverywhere => false,
            FixedPointReport::AboveEverywhere => true,
            _ => return na,
        };
        let poly = if via_dual {
            self.dual().char_poly()
        } else {
            self.char_poly()
        };
        let b1 = poly.beta(k - 1);
        let b2 = poly.beta(k - 2);
        let slow_level = Rational64::new(k as i64 - 1, k as i64);
        let fast_level = Rational64::new(k as i64 - 2, k as i64);
        let class = if b1 == slow_level {
            ConvergenceClass::Slow
        } else if b1 <= fast_level {
            ConvergenceClass::Fast
        } else {
            ConvergenceClass::NotApplicable
        };
        let warning = ((b1 <= fast_level) != (b2 <= fast_level)).then(|| {
            format!(
                "beta_(k-1) = {b1} and beta_(k-2) = {b2} disagree on the fast-convergence test \
                 against {fast_level}; classified by beta_(k-1)"
            )
        });
        ConvergenceDetail {
            class,
            via_dual,
            beta_k1: Some(b1),
            beta_k2: Some(b2),
            warning,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let c = match name {
            "and2" => Self::from_word(2, 0x8),
            "or2" => Self::from_word(2, 0xe),
            "xor2" => Self::from_word(2, 0x6),
            "and3" => Self::from_word(3, 0x80),
            "xor3" => Self::from_word(3, 0x96),
            // x1 ⊕ x2 ⊕ x3 ⊕ 1
            "xnor3" => Self::from_word(3, 0x69),
            "maj3" => Self::from_word(3, 0xe8),
            // x1 ? x2 : x3
            "mux" => Self::from_word(3, 0xd8),
            // (x1 ∧ x2) ∨ (x1 ∧ x3), the slow-convergence example
            "slow3" => Self::from_word(3, 0xa8),
            "valiant4" => Self::from_fn(4, |a| a & 3 == 3 || a >> 2 == 3),
            _ => {
                return Err(Error::Parse(format!(
                    "unknown connective preset {name:?} (known: {})",
                    PRESETS.join(", ")
                )))
            }
        }?;
        Ok(c.with_name(name))
    }
}

pub const PRESETS: &[&str] = &[
    "and2", "or2", "xor2", "and3", "xor3", "xnor3", "maj3", "mux", "slow3", "valiant4",
];

impl fmt::Debug for Connective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(name) => write!(f, "Connective({name}: k={}, {})", self.arity(), self.table),
            None => write!(f, "Connective(k={}, {})", self.arity(), self.table),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ConnectiveRepr {
    arity: usize,
    truth_table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

impl Serialize for Connective {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConnectiveRepr {
            arity: self.arity(),
            truth_table: self.table.to_hex(),
            name: self.name.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Connective {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ConnectiveRepr::deserialize(d)?;
        let table = TruthTable::from_hex(repr.arity, &repr.truth_table).map_err(serde::de::Error::custom)?;
        let mut c = Connective::new(table).map_err(serde::de::Error::custom)?;
        c.name = repr.name;
        Ok(c)
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// `A(p) = Σ_i β_i·C(k,i)·p^i·(1-p)^(k-i)`, stored as the integer counts `β_i·C(k,i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharPoly {
    k: usize,
    counts: Vec<u64>,
}

impl CharPoly {
    pub fn of(table: &TruthTable) -> Self {
        let k = table.arity();
        let mut counts = vec![0u64; k + 1];
        for a in 0..table.len() {
            if table.get(a) {
                counts[a.count_ones() as usize] += 1;
            }
        }
        CharPoly { k, counts }
    }

    /// Build from raw counts. Used for negative controls; counts may be inconsistent with any table.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Invalid("need at least one coefficient".into()));
        }
        let k = counts.len() - 1;
        for (i, &c) in counts.iter().enumerate() {
            if c > binomial(k, i) {
                return Err(Error::Invalid(format!("count {c} exceeds C({k},{i})")));
            }
        }
        Ok(CharPoly { k, counts })
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn binomial(&self, i: usize) -> u64 {
        binomial(self.k, i)
    }

    pub fn beta(&self, i: usize) -> Rational64 {
        Rational64::new(self.counts[i] as i64, binomial(self.k, i) as i64)
    }

    pub fn beta_f64(&self, i: usize) -> f64 {
        self.counts[i] as f64 / binomial(self.k, i) as f64
    }

    /// `A(p)` over any scalar; exact for rational types.
    pub fn eval<T: Scalar>(&self, p: &T) -> T {
        let q = T::one() - p.clone();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .fold(T::zero(), |acc, (i, &c)| {
                acc + from_u64::<T>(c) * num_traits::pow(p.clone(), i) * num_traits::pow(q.clone(), self.k - i)
            })
    }

    /// `A'(p) = Σ_i c_i·(i·p^(i-1)(1-p)^(k-i) − (k-i)·p^i(1-p)^(k-i-1))`.
    pub fn deriv<T: Scalar>(&self, p: &T) -> T {
        let q = T::one() - p.clone();
        let k = self.k;
        let mut acc = T::zero();
        for (i, &c) in self.counts.iter().enumerate().filter(|(_, &c)| c != 0) {
            let c = from_u64::<T>(c);
            if i > 0 {
                let t = from_u64::<T>(i as u64) * num_traits::pow(p.clone(), i - 1) * num_traits::pow(q.clone(), k - i);
                acc = acc + c.clone() * t;
            }
            if i < k {
                let t = from_u64::<T>((k - i) as u64)
                    * num_traits::pow(p.clone(), i)
                    * num_traits::pow(q.clone(), k - i - 1);
                acc = acc - c * t;
            }
        }
        acc
    }

    /// `A(p)` for `order = 0`, `A'(p)` for `order = 1`.
    pub fn evaluate(&self, p: f64, order: u8) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Probability(p));
        }
        match order {
            0 => Ok(self.eval(&p)),
            1 => Ok(self.deriv(&p)),
            _ => Err(Error::Invalid(format!(
                "derivative order {order} not supported (0 or 1)"
            ))),
        }
    }

    pub fn fixed_point(&self, tol: f64) -> Result<FixedPointReport> {
        self.fixed_point_in::<f64>(tol)
    }

    /// Sign scan of `A(p) − p` on a 4096-point grid, then bisection on the first bracket.
    pub fn fixed_point_in<T: Real>(&self, tol: f64) -> Result<FixedPointReport> {
        if !(tol > 0.0) {
            return Err(Error::Tolerance(tol));
        }
        const GRID: usize = 4096;
        let gap = |p: T| self.eval(&p) - p;
        let at = |j: usize| T::of(j as f64 / GRID as f64);
        let gaps: Vec<T> = (1..GRID).map(|j| gap(at(j))).collect();
        if gaps.iter().all(|&g| g > T::zero()) {
            return Ok(FixedPointReport::AboveEverywhere);
        }
        if gaps.iter().all(|&g| g < T::zero()) {
            return Ok(FixedPointReport::BelowEverywhere);
        }
        if gaps.iter().all(|&g| g == T::zero()) {
            return Ok(FixedPointReport::Identity);
        }
        let mut prev = (0usize, gap(T::zero()));
        for (idx, &g) in gaps.iter().enumerate() {
            let j = idx + 1;
            if g == T::zero() {
                return Ok(FixedPointReport::Interior {
                    s: at(j).as_f64(),
                    residual: 0.0,
                });
            }
            if prev.1 != T::zero() && (g > T::zero()) != (prev.1 > T::zero()) {
                return Ok(self.bisect(at(prev.0), at(j), tol));
            }
            prev = (j, g);
        }
        // the sign changes only against an endpoint root, so the interior gap never vanishes
        let s = if gaps[0] > T::zero() {
            1.0 - 1.0 / GRID as f64
        } else {
            1.0 / GRID as f64
        };
        Ok(FixedPointReport::Interior {
            s,
            residual: (self.eval(&s) - s).abs(),
        })
    }

    fn bisect<T: Real>(&self, mut lo: T, mut hi: T, tol: f64) -> FixedPointReport {
        let gap = |p: T| self.eval(&p) - p;
        let lo_positive = gap(lo) > T::zero();
        let two = T::of(2.0);
        for _ in 0..200 {
            let mid = (lo + hi) / two;
            let g = gap(mid);
            if g.abs().as_f64() <= tol && (hi - lo).as_f64() < tol || g == T::zero() || mid <= lo || mid >= hi {
                return FixedPointReport::Interior {
                    s: mid.as_f64(),
                    residual: g.abs().as_f64(),
                };
            }
            if (g > T::zero()) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = (lo + hi) / two;
        FixedPointReport::Interior {
            s: mid.as_f64(),
            residual: gap(mid).abs().as_f64(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FixedPointReport {
    /// `A(p) > p` on `(0, 1)`.
    AboveEverywhere,
    /// `A(p) < p` on `(0, 1)`.
    BelowEverywhere,
    /// `A(p) = p` identically, e.g. a projection.
    Identity,
    Interior {
        s: f64,
        residual: f64,
    },
}

impl FixedPointReport {
    pub fn interior(&self) -> Option<f64> {
        match *self {
            FixedPointReport::Interior { s, .. } => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvergenceClass {
    Fast,
    Slow,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceDetail {
    pub class: ConvergenceClass,
    /// Computed on the dual connective because `A(p) > p`.
    pub via_dual: bool,
    pub beta_k1: Option<Rational64>,
    pub beta_k2: Option<Rational64>,
    /// Set when the `β_(k-1)` and `β_(k-2)` fast predicates disagree.
    pub warning: Option<String>,
}

/// `S(t) = 2^-k Σ_r (−1)^(⟨r,t⟩ + α(r))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    k: usize,
    s: Vec<f64>,
}

impl SpectralProfile {
    pub fn of(table: &TruthTable) -> Self {
        let k = table.arity();
        let mut s: Vec<f64> = (0..table.len())
            .map(|r| if table.get(r) { -1.0 } else { 1.0 })
            .collect();
        fwht_in_place(&mut s);
        let scale = 1.0 / table.len() as f64;
        s.iter_mut().for_each(|v| *v *= scale);
        SpectralProfile { k, s }
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }

    pub fn get(&self, t: usize) -> f64 {
        self.s[t]
    }

    /// `a = Σ_t |S(t)|³`.
    pub fn a3(&self) -> f64 {
        self.s.iter().map(|v| v.abs().powi(3)).sum()
    }

    /// `a_j(w) = Σ_{|t| = j} S(t)^d` with `d = |w|`.
    pub fn a_coeff(&self, j: usize, d: usize) -> f64 {
        self.s
            .iter()
            .enumerate()
            .filter(|(t, _)| t.count_ones() as usize == j)
            .map(|(_, v)| v.powi(d as i32))
            .sum()
    }

    /// `[a_1, …, a_k]` for weight `d`.
    pub fn a_weight(&self, d: usize) -> Vec<f64> {
        (1..=self.k).map(|j| self.a_coeff(j, d)).collect()
    }

    pub fn square_sum(&self) -> f64 {
        self.s.iter().map(|v| v * v).sum()
    }

    pub fn is_balanced_nonlinear(&self) -> bool {
        self.s[0] == 0.0 && self.s.iter().all(|v| v.abs() < 1.0)
    }
}
