//! Growth processes: initial distributions, exact iteration, support closure and sampling.
//!
//! Distributions are keyed by function id. In the general domain the id is the word-packed truth
//! table; in the linear domain it is the coefficient vector with `c_0` in bit 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, RngCore};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::{linear_coeffs, make_basis, table_mask, Basis, Composer, LinearFn, TruthTable, WORD_ARITY};
use crate::connective::{CharPoly, Connective};
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};
use crate::spectrum::fwht_in_place;

/// Largest `n` for exact iteration in the general domain (dense accumulator of `2^16` slots).
pub const GENERAL_EXACT_MAX: usize = 4;
/// Largest `n` for which any closed support family is allowed without restriction.
pub const GENERAL_DENSE_MAX: usize = 3;
/// Largest closed family size that unlocks `n = 4` in the general domain.
pub const FAMILY_CAP: u64 = 4096;
pub const LINEAR_EXACT_MAX: usize = 20;
/// Per-step work budget for exact iteration and closure.
pub const STEP_BUDGET: u128 = 100_000_000;
/// Largest closure the BFS will track.
pub const CLOSURE_CAP: usize = 1 << 16;

// First-argument blocks for the parallel general step. Fixed so the reduction order, and with it
// every rounding, is independent of the worker count.
const STEP_BLOCKS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    General(usize),
    Linear(usize),
}

impl Domain {
    pub fn n(&self) -> usize {
        match *self {
            Domain::General(n) | Domain::Linear(n) => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::General(_) => "general",
            Domain::Linear(_) => "linear",
        }
    }

    /// Number of bits in a key.
    pub fn key_bits(&self) -> usize {
        match *self {
            Domain::General(n) => 1 << n,
            Domain::Linear(n) => n + 1,
        }
    }

    /// Dense dimension `2^key_bits`, when it fits in memory terms.
    pub fn dense_len(&self) -> Option<usize> {
        let b = self.key_bits();
        (b <= 24).then(|| 1usize << b)
    }

    fn check(&self) -> Result<()> {
        match *self {
            Domain::General(n) if n == 0 || n > WORD_ARITY => Err(Error::ArityCap {
                n,
                cap: WORD_ARITY,
                what: "general-domain distributions",
            }),
            Domain::Linear(n) if n == 0 || n > LINEAR_EXACT_MAX => Err(Error::ArityCap {
                n,
                cap: LINEAR_EXACT_MAX,
                what: "linear-domain distributions",
            }),
            _ => Ok(()),
        }
    }

    pub fn is_valid_key(&self, key: u64) -> bool {
        match *self {
            Domain::General(n) => key & !table_mask(n) == 0,
            Domain::Linear(n) => key >> (n + 1) == 0,
        }
    }

    pub fn format_key(&self, key: u64) -> String {
        match *self {
            Domain::General(n) => TruthTable::from_word(n, key).expect("valid key").to_hex(),
            Domain::Linear(n) => LinearFn::new(n, key).expect("valid key").to_bits(),
        }
    }

    pub fn parse_key(&self, s: &str) -> Result<u64> {
        match *self {
            Domain::General(n) => Ok(TruthTable::from_hex(n, s)?.id()),
            Domain::Linear(n) => {
                let l = LinearFn::from_bits(s)?;
                if l.arity() != n {
                    return Err(Error::ArityMismatch {
                        expected: n,
                        found: l.arity(),
                    });
                }
                Ok(l.coeffs())
            }
        }
    }

    /// Value of function `key` at assignment `x`.
    pub fn eval(&self, key: u64, x: usize) -> bool {
        match *self {
            Domain::General(_) => (key >> x) & 1 == 1,
            Domain::Linear(_) => ((key & 1) as u32 + ((key >> 1) & x as u64).count_ones()) % 2 == 1,
        }
    }

    /// Linear key as a general key (for `n ≤ 6`).
    pub fn linear_to_general(n: usize, key: u64) -> u64 {
        let d = Domain::Linear(n);
        (0..1usize << n).fold(0, |acc, x| acc | ((d.eval(key, x) as u64) << x))
    }
}

/// Which members of `A_0` carry the uniform initial distribution. Projections are always in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSpec {
    pub n: usize,
    pub negations: bool,
    pub const0: bool,
    pub const1: bool,
}

impl SupportSpec {
    pub fn projections(n: usize) -> Self {
        SupportSpec {
            n,
            negations: false,
            const0: false,
            const1: false,
        }
    }

    pub fn full(n: usize) -> Self {
        SupportSpec {
            n,
            negations: true,
            const0: true,
            const1: true,
        }
    }

    pub fn with_constants(mut self) -> Self {
        self.const0 = true;
        self.const1 = true;
        self
    }

    pub fn with_negations(mut self) -> Self {
        self.negations = true;
        self
    }

    /// Comma list from `proj`, `neg`, `const0`, `const1`.
    pub fn parse(n: usize, flags: &str) -> Result<Self> {
        let mut s = SupportSpec::projections(n);
        for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match flag {
                "proj" => {}
                "neg" => s.negations = true,
                "const0" => s.const0 = true,
                "const1" => s.const1 = true,
                _ => return Err(Error::Parse(format!("unknown support flag {flag:?}"))),
            }
        }
        Ok(s)
    }

    pub fn to_flags(&self) -> String {
        let mut out = vec!["proj"];
        if self.negations {
            out.push("neg");
        }
        if self.const0 {
            out.push("const0");
        }
        if self.const1 {
            out.push("const1");
        }
        out.join(",")
    }

    fn basis(&self) -> Vec<Basis> {
        let mut out: Vec<Basis> = (1..=self.n).map(Basis::Projection).collect();
        if self.negations {
            out.extend((1..=self.n).map(Basis::NegProjection));
        }
        if self.const0 {
            out.push(Basis::Const0);
        }
        if self.const1 {
            out.push(Basis::Const1);
        }
        out
    }

    pub fn size(&self) -> usize {
        self.n * (1 + self.negations as usize) + self.const0 as usize + self.const1 as usize
    }

    pub fn members(&self) -> Result<Vec<TruthTable>> {
        self.basis().into_iter().map(|b| make_basis(self.n, b)).collect()
    }

    /// Member keys in `domain`, in basis order.
    pub fn keys(&self, domain: Domain) -> Result<Vec<u64>> {
        match domain {
            Domain::General(n) => {
                check_same_n(self.n, n)?;
                Ok(self.members()?.iter().map(TruthTable::id).collect())
            }
            Domain::Linear(n) => {
                check_same_n(self.n, n)?;
                Ok(self
                    .basis()
                    .into_iter()
                    .map(|b| match b {
                        Basis::Projection(j) => 1u64 << j,
                        Basis::NegProjection(j) => (1u64 << j) | 1,
                        Basis::Const0 => 0,
                        Basis::Const1 => 1,
                    })
                    .collect())
            }
        }
    }

    /// Display names aligned with [`SupportSpec::keys`].
    pub fn names(&self) -> Vec<String> {
        self.basis()
            .into_iter()
            .map(|b| match b {
                Basis::Projection(j) => format!("x{j}"),
                Basis::NegProjection(j) => format!("!x{j}"),
                Basis::Const0 => "0".into(),
                Basis::Const1 => "1".into(),
            })
            .collect()
    }

    /// `p_0(x)`: fraction of the support true at assignment `x`.
    pub fn marginal(&self, x: usize) -> f64 {
        let ones = x.count_ones() as usize;
        let mut hits = ones;
        if self.negations {
            hits += self.n - ones;
        }
        hits += self.const1 as usize;
        hits as f64 / self.size() as f64
    }
}

fn check_same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ArityMismatch { expected: a, found: b });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub support: SupportSpec,
    pub alpha: Connective,
}

impl ProcessSpec {
    pub fn new(support: SupportSpec, alpha: Connective) -> Self {
        ProcessSpec { support, alpha }
    }

    pub fn n(&self) -> usize {
        self.support.n
    }

    /// Linear when `α` is linear (every `A_0` member is linear), else general.
    pub fn domain(&self) -> Domain {
        if self.alpha.class().linear {
            Domain::Linear(self.n())
        } else {
            Domain::General(self.n())
        }
    }
}

/// Closed families the `n = 4` general domain may iterate inside, with their sizes at `n ≤ 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    All,
    Monotone,
    SelfDual,
    MonotoneSelfDual,
}

impl Family {
    /// Smallest closed family containing the process.
    pub fn of(spec: &ProcessSpec) -> Family {
        let c = spec.alpha.class();
        let s = &spec.support;
        let mono = c.monotone && !s.negations;
        let sd = c.self_dual && !s.const0 && !s.const1;
        match (mono, sd) {
            (true, true) => Family::MonotoneSelfDual,
            (true, false) => Family::Monotone,
            (false, true) => Family::SelfDual,
            _ => Family::All,
        }
    }

    pub fn size(&self, n: usize) -> Option<u64> {
        // Dedekind numbers and monotone self-dual counts
        const MONOTONE: [u64; 5] = [2, 3, 6, 20, 168];
        const MONO_SELF_DUAL: [u64; 5] = [0, 1, 2, 4, 12];
        match self {
            Family::All => (n <= 5).then(|| 1u64 << (1u64 << n).min(63)),
            Family::Monotone => MONOTONE.get(n).copied(),
            Family::SelfDual => (1..=6).contains(&n).then(|| 1u64 << (1u64 << (n - 1))),
            Family::MonotoneSelfDual => MONO_SELF_DUAL.get(n).copied(),
        }
    }
}

/// A probability vector `π_i`, stored sparse and sorted by key.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T = f64> {
    domain: Domain,
    entries: Vec<(u64, T)>,
    iteration: usize,
    mass_drift: f64,
}

impl<T: Real> Distribution<T> {
    /// Validating constructor. Duplicate keys are merged; zero entries dropped.
    pub fn from_entries(domain: Domain, entries: impl IntoIterator<Item = (u64, T)>, iteration: usize) -> Result<Self> {
        domain.check()?;
        let mut map: BTreeMap<u64, T> = BTreeMap::new();
        for (key, p) in entries {
            if !domain.is_valid_key(key) {
                return Err(Error::Domain(format!(
                    "key {key:#x} is not a {} key for n={}",
                    domain.name(),
                    domain.n()
                )));
            }
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(Error::Probability(p.as_f64()));
            }
            *map.entry(key).or_insert_with(T::zero) += p;
        }
        let entries: Vec<_> = map.into_iter().filter(|(_, p)| *p > T::zero()).collect();
        let total: f64 = entries.iter().map(|(_, p)| p.as_f64()).sum();
        // f32 inputs carry their own rounding
        let tol = 1e-9f64.max(64.0 * T::epsilon().as_f64());
        if (total - 1.0).abs() > tol {
            return Err(Error::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Distribution {
            domain,
            entries,
            iteration,
            mass_drift: 0.0,
        })
    }

    pub fn point_mass(domain: Domain, key: u64) -> Result<Self> {
        Self::from_entries(domain, [(key, T::one())], 0)
    }

    /// Uniform over `keys`; repeated keys get proportionally more mass.
    pub fn uniform(domain: Domain, keys: &[u64]) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::Invalid("uniform distribution over an empty set".into()));
        }
        let p = T::one() / T::of(keys.len() as f64);
        Self::from_entries(domain, keys.iter().map(|&k| (k, p)), 0)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn entries(&self) -> &[(u64, T)] {
        &self.entries
    }

    pub fn support(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn with_iteration(mut self, i: usize) -> Self {
        self.iteration = i;
        self
    }

    /// `|Σπ − 1|` measured before the last step's normalization.
    pub fn mass_drift(&self) -> f64 {
        self.mass_drift
    }

    pub fn get(&self, key: u64) -> T {
        match self.entries.binary_search_by_key(&key, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => T::zero(),
        }
    }

    pub fn total(&self) -> T {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// `Σ_{f(x) = 1} π(f)`.
    pub fn marginal(&self, x: usize) -> T {
        self.entries
            .iter()
            .filter(|(k, _)| self.domain.eval(*k, x))
            .map(|e| e.1)
            .sum()
    }

    pub fn cast<U: Real>(&self) -> Distribution<U> {
        Distribution {
            domain: self.domain,
            entries: self.entries.iter().map(|&(k, p)| (k, U::of(p.as_f64()))).collect(),
            iteration: self.iteration,
            mass_drift: self.mass_drift,
        }
    }

    /// Same distribution with keys re-expressed as truth tables.
    pub fn to_general(&self) -> Result<Distribution<T>> {
        match self.domain {
            Domain::General(_) => Ok(self.clone()),
            Domain::Linear(n) => {
                if n > WORD_ARITY {
                    return Err(Error::ArityCap {
                        n,
                        cap: WORD_ARITY,
                        what: "general-domain distributions",
                    });
                }
                let mut d = Distribution::from_entries(
                    Domain::General(n),
                    self.entries.iter().map(|&(k, p)| (Domain::linear_to_general(n, k), p)),
                    self.iteration,
                )?;
                d.mass_drift = self.mass_drift;
                Ok(d)
            }
        }
    }

    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            n: self.domain.n(),
            domain: self.domain.name().to_string(),
            iteration: self.iteration,
            entries: self
                .entries
                .iter()
                .map(|&(k, p)| SnapshotEntry {
                    key: self.domain.format_key(k),
                    p: p.as_f64(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        let domain = match s.domain.as_str() {
            "general" => Domain::General(s.n),
            "linear" => Domain::Linear(s.n),
            other => return Err(Error::Parse(format!("unknown domain {other:?}"))),
        };
        domain.check()?;
        let entries = s
            .entries
            .iter()
            .map(|e| Ok((domain.parse_key(&e.key)?, T::of(e.p))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(domain, entries, s.iteration)
    }

    /// `fn,p` rows; probabilities with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fn,p\n");
        for &(k, p) in &self.entries {
            out.push_str(&format!("{},{}\n", self.domain.format_key(k), fmt17(p.as_f64())));
        }
        out
    }

    pub fn from_csv(domain: Domain, iteration: usize, text: &str) -> Result<Self> {
        domain.check()?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "fn,p" => {}
            other => return Err(Error::Parse(format!("expected header fn,p, got {other:?}"))),
        }
        let mut entries = Vec::new();
        for line in lines {
            let (key, p) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad csv row {line:?}")))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad probability {p:?}")))?;
            entries.push((domain.parse_key(key.trim())?, T::of(p)));
        }
        Self::from_entries(domain, entries, iteration)
    }
}

/// Shortest exact decimal with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: usize,
    pub domain: String,
    pub iteration: usize,
    pub entries: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    #[serde(rename = "fn")]
    pub key: String,
    pub p: f64,
}

/// `π_0 = μ`, after checking the exact-iteration caps for the spec's domain.
pub fn initial_distribution<T: Real>(spec: &ProcessSpec) -> Result<Distribution<T>> {
    let domain = spec.domain();
    let n = spec.n();
    match domain {
        Domain::General(n) if n > GENERAL_DENSE_MAX => {
            let family = Family::of(spec);
            let fits = n <= GENERAL_EXACT_MAX && family.size(n).is_some_and(|s| s <= FAMILY_CAP);
            if !fits {
                return Err(Error::ArityCap {
                    n,
                    cap: GENERAL_DENSE_MAX,
                    what: "exact general-domain iteration (n = 4 needs a closed family of at most 4096 functions)",
                });
            }
        }
        Domain::Linear(n) if n > LINEAR_EXACT_MAX => {
            return Err(Error::ArityCap {
                n,
                cap: LINEAR_EXACT_MAX,
                what: "exact linear-domain iteration",
            });
        }
        _ => {}
    }
    if n == 0 {
        return Err(Error::ArityCap {
            n,
            cap: 1,
            what: "process variable count (at least 1)",
        });
    }
    Distribution::uniform(domain, &spec.support.keys(domain)?)
}

/// `μ` in the general domain, for any `n ≤ 6`; no exact-iteration cap.
pub fn initial_general<T: Real>(support: &SupportSpec) -> Result<Distribution<T>> {
    let domain = Domain::General(support.n);
    Distribution::uniform(domain, &support.keys(domain)?)
}

/// One exact step, `π'(f) = Σ_{α(g_1..g_k) = f} Π π(g_j)`.
///
/// The result is normalized; the pre-normalization `|Σ − 1|` is kept as [`Distribution::mass_drift`].
pub fn step_exact<T: Real>(pi: &Distribution<T>, alpha: &Connective) -> Result<Distribution<T>> {
    step_exact_with_budget(pi, alpha, STEP_BUDGET)
}

pub fn step_exact_with_budget<T: Real>(
    pi: &Distribution<T>,
    alpha: &Connective,
    budget: u128,
) -> Result<Distribution<T>> {
    let entries = match pi.domain {
        Domain::General(n) => step_general(pi, alpha, n, budget)?,
        Domain::Linear(n) => step_linear(pi, alpha, n, budget)?,
    };
    let total: T = entries.iter().map(|e| e.1).sum();
    let drift = (total.as_f64() - 1.0).abs();
    let entries = entries.into_iter().map(|(k, p)| (k, p / total)).collect();
    Ok(Distribution {
        domain: pi.domain,
        entries,
        iteration: pi.iteration + 1,
        mass_drift: drift,
    })
}

/// Tuple work of the cofactor fold over `m` support members.
fn general_work(m: usize, k: usize) -> u128 {
    (1..=k as u32)
        .map(|j| (m as u128).saturating_pow(j))
        .fold(0u128, u128::saturating_add)
}

fn cofactor_masks(alpha: &Connective, mask: u64) -> Vec<u64> {
    let t = alpha.table();
    (0..t.len()).map(|r| if t.get(r) { mask } else { 0 }).collect()
}

fn step_general<T: Real>(pi: &Distribution<T>, alpha: &Connective, n: usize, budget: u128) -> Result<Vec<(u64, T)>> {
    if n > GENERAL_EXACT_MAX {
        return Err(Error::ArityCap {
            n,
            cap: GENERAL_EXACT_MAX,
            what: "exact general-domain step",
        });
    }
    let k = alpha.arity();
    let m = pi.entries.len();
    let work = general_work(m, k);
    if work > budget {
        return Err(Error::Budget {
            required: work,
            budget,
            what: "general exact step",
        });
    }
    let size = 1usize << (1 << n);
    let ids: Vec<u64> = pi.entries.iter().map(|e| e.0).collect();
    let probs: Vec<T> = pi.entries.iter().map(|e| e.1).collect();
    let top = cofactor_masks(alpha, table_mask(n));
    let block = m.div_ceil(STEP_BLOCKS).max(1);
    let starts: Vec<usize> = (0..m).step_by(block).collect();
    let partials: Vec<Vec<T>> = starts
        .into_par_iter()
        .map(|start| {
            let mut acc = vec![T::zero(); size];
            let mut levels: Vec<Vec<u64>> = (0..=k).map(|j| vec![0u64; 1 << (k - j)]).collect();
            levels[0].copy_from_slice(&top);
            for i in start..(start + block).min(m) {
                fold_level(&mut levels, 0, ids[i]);
                descend(1, k, &mut levels, &ids, &probs, probs[i], &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![T::zero(); size];
    for part in &partials {
        for (t, &v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(total
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > T::zero())
        .map(|(f, p)| (f as u64, p))
        .collect())
}

#[inline]
fn fold_level(levels: &mut [Vec<u64>], level: usize, g: u64) {
    let (lo, hi) = levels.split_at_mut(level + 1);
    let src = &lo[level];
    for (c, d) in hi[0].iter_mut().enumerate() {
        *d = (src[2 * c] & !g) | (src[2 * c + 1] & g);
    }
}

fn descend<T: Real>(
    level: usize,
    k: usize,
    levels: &mut [Vec<u64>],
    ids: &[u64],
    probs: &[T],
    weight: T,
    acc: &mut [T],
) {
    if level == k {
        acc[levels[k][0] as usize] += weight;
        return;
    }
    if level + 1 == k {
        // innermost argument: the fold is a single select
        let (a, b) = (levels[level][0], levels[level][1]);
        for (&g, &p) in ids.iter().zip(probs) {
            acc[((a & !g) | (b & g)) as usize] += weight * p;
        }
        return;
    }
    for (&g, &p) in ids.iter().zip(probs) {
        fold_level(levels, level, g);
        descend(level + 1, k, levels, ids, probs, weight * p, acc);
    }
}

/// `(c, J)` with `α = c ⊕ ⊕_{j ∈ J} x_j`.
fn linear_form(alpha: &Connective) -> Result<(bool, usize)> {
    let l = linear_coeffs(alpha.table())
        .ok_or_else(|| Error::Domain("the linear domain needs a linear connective".into()))?;
    Ok((l.constant(), (l.coeffs() >> 1).count_ones() as usize))
}

fn step_linear<T: Real>(pi: &Distribution<T>, alpha: &Connective, n: usize, budget: u128) -> Result<Vec<(u64, T)>> {
    let (c, terms) = linear_form(alpha)?;
    let size = 1usize << (n + 1);
    let mut cur: Vec<(u64, T)> = vec![(0, T::one())];
    for _ in 0..terms {
        cur = xor_convolve(&cur, &pi.entries, size, budget)?;
    }
    if c {
        cur.iter_mut().for_each(|e| e.0 ^= 1);
        cur.sort_by_key(|e| e.0);
    }
    Ok(cur)
}

/// Sparse pairwise XOR convolution when cheap, FWHT otherwise.
///
/// On the FWHT path, entries not exceeding `64·ε` are treated as roundoff and dropped.
fn xor_convolve<T: Real>(a: &[(u64, T)], b: &[(u64, T)], size: usize, budget: u128) -> Result<Vec<(u64, T)>> {
    let pairwise = a.len() as u128 * b.len() as u128;
    let bits = size.trailing_zeros() as u128;
    let fwht_cost = 3 * size as u128 * bits.max(1);
    if pairwise <= fwht_cost.max(size as u128) {
        let mut acc = vec![T::zero(); size];
        for &(ka, pa) in a {
            for &(kb, pb) in b {
                acc[(ka ^ kb) as usize] += pa * pb;
            }
        }
        return Ok(acc
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > T::zero())
            .map(|(k, p)| (k as u64, p))
            .collect());
    }
    if fwht_cost > budget {
        return Err(Error::Budget {
            required: fwht_cost,
            budget,
            what: "linear exact step",
        });
    }
    let dense = |s: &[(u64, T)]| {
        let mut v = vec![T::zero(); size];
        for &(k, p) in s {
            v[k as usize] = p;
        }
        fwht_in_place(&mut v);
        v
    };
    let (mut fa, fb) = (dense(a), dense(b));
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    fwht_in_place(&mut fa);
    let scale = T::one() / T::of(size as f64);
    let floor = T::epsilon() * T::of(64.0);
    Ok(fa
        .into_iter()
        .enumerate()
        .map(|(k, v)| (k as u64, v * scale))
        .filter(|(_, p)| *p > floor)
        .collect())
}

#[derive(Debug, Clone)]
pub struct ExactRun<T = f64> {
    pub distribution: Distribution<T>,
    /// `mass_drift` of every step, in order.
    pub drifts: Vec<f64>,
}

impl<T> ExactRun<T> {
    pub fn max_drift(&self) -> f64 {
        self.drifts.iter().copied().fold(0.0, f64::max)
    }
}

pub fn iterate_exact<T: Real>(spec: &ProcessSpec, steps: usize) -> Result<ExactRun<T>> {
    exact_trajectory(spec, steps, |_| Ok(()))
}

/// Iterate from `π_0`, calling `visit` on `π_0, …, π_steps`.
pub fn exact_trajectory<T: Real>(
    spec: &ProcessSpec,
    steps: usize,
    mut visit: impl FnMut(&Distribution<T>) -> Result<()>,
) -> Result<ExactRun<T>> {
    let mut pi = initial_distribution::<T>(spec)?;
    visit(&pi)?;
    let mut drifts = Vec::with_capacity(steps);
    for _ in 0..steps {
        pi = step_exact(&pi, &spec.alpha)?;
        drifts.push(pi.mass_drift);
        visit(&pi)?;
    }
    Ok(ExactRun {
        distribution: pi,
        drifts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub domain: Domain,
    /// `∪ S_i` for `i < closed_at`.
    pub union_support: Vec<u64>,
    pub even_part: Vec<u64>,
    pub odd_part: Vec<u64>,
    /// First `i` with `S_i = S_j` for an earlier `j`.
    pub closed_at: usize,
    /// `j`, where the cycle `S_j … S_{closed_at − 1}` begins.
    pub cycle_start: usize,
    /// `S_0, …, S_{closed_at − 1}`.
    pub levels: Vec<Vec<u64>>,
}

impl ClosureReport {
    pub fn period(&self) -> usize {
        self.closed_at - self.cycle_start
    }

    /// Eventual sets: `S_i` for large even and odd `i`.
    pub fn limit_sets(&self) -> (Vec<u64>, Vec<u64>) {
        let at = |i: usize| {
            let p = self.period();
            let j = if i < self.cycle_start {
                i
            } else {
                self.cycle_start + (i - self.cycle_start) % p
            };
            self.levels[j].clone()
        };
        let big = 2 * (self.closed_at + 1);
        (at(big), at(big + 1))
    }
}

/// `S_0 = supp(μ)`, `S_{i+1} = α(S_i^k)`, until a set repeats.
pub fn support_closure(spec: &ProcessSpec) -> Result<ClosureReport> {
    let domain = spec.domain();
    let k = spec.alpha.arity();
    let start: BTreeSet<u64> = spec.support.keys(domain)?.into_iter().collect();
    let mut levels: Vec<Vec<u64>> = vec![start.into_iter().collect()];
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    seen.insert(levels[0].clone(), 0);
    loop {
        let cur = levels.last().expect("nonempty");
        let next = match domain {
            Domain::General(n) => {
                if n > GENERAL_EXACT_MAX {
                    return Err(Error::ArityCap {
                        n,
                        cap: GENERAL_EXACT_MAX,
                        what: "general-domain closure",
                    });
                }
                let work = general_work(cur.len(), k);
                if work > STEP_BUDGET {
                    return Err(Error::Budget {
                        required: work,
                        budget: STEP_BUDGET,
                        what: "closure step",
                    });
                }
                closure_step_general(cur, &spec.alpha, n)
            }
            Domain::Linear(n) => closure_step_linear(cur, &spec.alpha, n)?,
        };
        if next.len() > CLOSURE_CAP {
            return Err(Error::Budget {
                required: next.len() as u128,
                budget: CLOSURE_CAP as u128,
                what: "closure size",
            });
        }
        let i = levels.len();
        if let Some(&j) = seen.get(&next) {
            let mut union = BTreeSet::new();
            let mut even = BTreeSet::new();
            let mut odd = BTreeSet::new();
            for (idx, s) in levels.iter().enumerate() {
                union.extend(s.iter().copied());
                if idx % 2 == 0 {
                    even.extend(s.iter().copied())
                } else {
                    odd.extend(s.iter().copied())
                }
            }
            return Ok(ClosureReport {
                domain,
                union_support: union.into_iter().collect(),
                even_part: even.into_iter().collect(),
                odd_part: odd.into_iter().collect(),
                closed_at: i,
                cycle_start: j,
                levels,
            });
        }
        seen.insert(next.clone(), i);
        levels.push(next);
    }
}

fn closure_step_general(cur: &[u64], alpha: &Connective, n: usize) -> Vec<u64> {
    let k = alpha.arity();
    let mut hit = vec![false; 1usize << (1 << n)];
    let mut levels: Vec<Vec<u64>> = (0..=k).map(|j| vec![0u64; 1 << (k - j)]).collect();
    levels[0] = cofactor_masks(alpha, table_mask(n));
    fn walk(level: usize, k: usize, levels: &mut [Vec<u64>], cur: &[u64], hit: &mut [bool]) {
        if level == k {
            hit[levels[k][0] as usize] = true;
            return;
        }
        for &g in cur {
            fold_level(levels, level, g);
            walk(level + 1, k, levels, cur, hit);
        }
    }
    walk(0, k, &mut levels, cur, &mut hit);
    hit.iter()
        .enumerate()
        .filter(|(_, &h)| h)
        .map(|(f, _)| f as u64)
        .collect()
}

fn closure_step_linear(cur: &[u64], alpha: &Connective, n: usize) -> Result<Vec<u64>> {
    let (c, terms) = linear_form(alpha)?;
    let size = 1usize << (n + 1);
    let mut acc: Vec<u64> = vec![0];
    for _ in 0..terms {
        let work = acc.len() as u128 * cur.len() as u128;
        if work > STEP_BUDGET {
            return Err(Error::Budget {
                required: work,
                budget: STEP_BUDGET,
                what: "linear closure step",
            });
        }
        let mut hit = vec![false; size];
        for &a in &acc {
            for &b in cur {
                hit[(a ^ b) as usize] = true;
            }
        }
        acc = hit
            .iter()
            .enumerate()
            .filter(|(_, &h)| h)
            .map(|(f, _)| f as u64)
            .collect();
    }
    if c {
        acc.iter_mut().for_each(|k| *k ^= 1);
        acc.sort_unstable();
    }
    Ok(acc)
}

/// Index bits one bottom-table lookup may consume.
const TABLE_BITS: u32 = 18;

/// Random-formula sampler for one `(spec, depth)` pair.
///
/// When the support size is a power of two, the bottom `d_0` levels of the tree are replaced by a
/// lookup table indexed by the concatenated leaf choices, so leaves cost `log2 m` random bits each.
#[derive(Debug, Clone)]
pub struct FormulaSampler {
    n: usize,
    k: usize,
    depth: usize,
    mask: u64,
    members: Vec<u64>,
    names: Vec<String>,
    composer: Composer,
    alpha_name: String,
    table: Option<BottomTable>,
}

#[derive(Debug, Clone)]
struct BottomTable {
    depth: usize,
    leaf_bits: u32,
    index_bits: u32,
    entries: Vec<u64>,
}

struct BitSource<'a> {
    rng: &'a mut Pcg64,
    buf: u64,
    left: u32,
}

impl BitSource<'_> {
    fn take(&mut self, bits: u32) -> u64 {
        if self.left < bits {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let v = self.buf & ((1u64 << bits) - 1);
        self.buf = self.buf.checked_shr(bits).unwrap_or(0);
        self.left -= bits;
        v
    }
}

/// Independent stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> Pcg64 {
    Pcg64::new((u128::from(seed) << 64) | 0x9e37_79b9_7f4a_7c15, u128::from(index))
}

impl FormulaSampler {
    pub fn new(spec: &ProcessSpec, depth: usize) -> Result<Self> {
        let n = spec.n();
        if n == 0 || n > WORD_ARITY {
            return Err(Error::ArityCap {
                n,
                cap: WORD_ARITY,
                what: "formula sampling",
            });
        }
        let members = spec.support.keys(Domain::General(n))?;
        let k = spec.alpha.arity();
        let m = members.len();
        let mut sampler = FormulaSampler {
            n,
            k,
            depth,
            mask: table_mask(n),
            names: spec.support.names(),
            members,
            composer: Composer::new(spec.alpha.table()),
            alpha_name: spec.alpha.name().unwrap_or("alpha").to_string(),
            table: None,
        };
        if m >= 2 && m.is_power_of_two() && depth > 0 {
            let leaf_bits = m.trailing_zeros();
            let mut d0 = 0usize;
            while d0 < depth && (k as u64).pow(d0 as u32 + 1) * leaf_bits as u64 <= TABLE_BITS as u64 {
                d0 += 1;
            }
            if d0 > 0 {
                let leaves = k.pow(d0 as u32);
                let index_bits = leaves as u32 * leaf_bits;
                let entries = (0..1u64 << index_bits)
                    .map(|idx| sampler.decode_table(idx, d0, leaf_bits))
                    .collect();
                sampler.table = Some(BottomTable {
                    depth: d0,
                    leaf_bits,
                    index_bits,
                    entries,
                });
            }
        }
        Ok(sampler)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn decode_table(&self, idx: u64, d0: usize, leaf_bits: u32) -> u64 {
        let mut leaf = 0u32;
        let mut scratch = Vec::new();
        self.decode_rec(idx, d0, leaf_bits, &mut leaf, &mut scratch)
    }

    fn decode_rec(&self, idx: u64, level: usize, leaf_bits: u32, leaf: &mut u32, scratch: &mut Vec<u64>) -> u64 {
        if level == 0 {
            let choice = (idx >> (*leaf * leaf_bits)) & ((1u64 << leaf_bits) - 1);
            *leaf += 1;
            return self.members[choice as usize];
        }
        let args: Vec<u64> = (0..self.k)
            .map(|_| self.decode_rec(idx, level - 1, leaf_bits, leaf, scratch))
            .collect();
        self.composer.apply(&args, scratch) & self.mask
    }

    /// Sample `index` of the stream for `seed`, as a word-packed table.
    pub fn sample(&self, seed: u64, index: u64) -> u64 {
        let mut rng = sample_rng(seed, index);
        let mut bits = BitSource {
            rng: &mut rng,
            buf: 0,
            left: 0,
        };
        let mut scratch = Vec::new();
        self.eval(self.depth, &mut bits, &mut scratch)
    }

    fn eval(&self, level: usize, bits: &mut BitSource<'_>, scratch: &mut Vec<u64>) -> u64 {
        if let Some(t) = &self.table {
            if level == t.depth {
                return t.entries[bits.take(t.index_bits) as usize];
            }
        }
        if level == 0 {
            return self.members[bits.rng.random_range(0..self.members.len())];
        }
        let mut args = [0u64; 8];
        if self.k <= args.len() {
            for a in args.iter_mut().take(self.k) {
                *a = self.eval(level - 1, bits, scratch);
            }
            self.composer.apply(&args[..self.k], scratch) & self.mask
        } else {
            let args: Vec<u64> = (0..self.k).map(|_| self.eval(level - 1, bits, scratch)).collect();
            self.composer.apply(&args, scratch) & self.mask
        }
    }

    /// The formula behind [`FormulaSampler::sample`], drawn from the same stream.
    pub fn sample_tree(&self, seed: u64, index: u64) -> Result<(u64, String)> {
        let leaves = (self.k as u128).saturating_pow(self.depth as u32);
        if leaves > 1_000_000 {
            return Err(Error::Budget {
                required: leaves,
                budget: 1_000_000,
                what: "formula emission leaves",
            });
        }
        let mut rng = sample_rng(seed, index);
        let mut bits = BitSource {
            rng: &mut rng,
            buf: 0,
            left: 0,
        };
        let mut scratch = Vec::new();
        Ok(self.emit(self.depth, &mut bits, &mut scratch))
    }

    fn emit(&self, level: usize, bits: &mut BitSource<'_>, scratch: &mut Vec<u64>) -> (u64, String) {
        if let Some(t) = &self.table {
            if level == t.depth {
                let idx = bits.take(t.index_bits);
                let mut leaf = 0u32;
                return self.emit_table(idx, t.depth, t.leaf_bits, &mut leaf, scratch);
            }
        }
        if level == 0 {
            let i = bits.rng.random_range(0..self.members.len());
            return (self.members[i], self.names[i].clone());
        }
        let parts: Vec<(u64, String)> = (0..self.k).map(|_| self.emit(level - 1, bits, scratch)).collect();
        self.join(parts, scratch)
    }

    fn emit_table(
        &self,
        idx: u64,
        level: usize,
        leaf_bits: u32,
        leaf: &mut u32,
        scratch: &mut Vec<u64>,
    ) -> (u64, String) {
        if level == 0 {
            let choice = ((idx >> (*leaf * leaf_bits)) & ((1u64 << leaf_bits) - 1)) as usize;
            *leaf += 1;
            return (self.members[choice], self.names[choice].clone());
        }
        let parts: Vec<(u64, String)> = (0..self.k)
            .map(|_| self.emit_table(idx, level - 1, leaf_bits, leaf, scratch))
            .collect();
        self.join(parts, scratch)
    }

    fn join(&self, parts: Vec<(u64, String)>, scratch: &mut Vec<u64>) -> (u64, String) {
        let args: Vec<u64> = parts.iter().map(|p| p.0).collect();
        let f = self.composer.apply(&args, scratch) & self.mask;
        let inner: Vec<String> = parts.into_iter().map(|p| p.1).collect();
        (f, format!("{}({})", self.alpha_name, inner.join(",")))
    }
}

/// One random formula of the given depth; depth 0 draws from `μ`.
pub fn sample_formula(spec: &ProcessSpec, depth: usize, seed: u64) -> Result<TruthTable> {
    let s = FormulaSampler::new(spec, depth)?;
    TruthTable::from_word(s.n, s.sample(seed, 0))
}

// Samples per parallel work unit; the counts are integers, so the split never changes the result.
const MC_BLOCK: u64 = 4096;

/// Counts of each sampled function over `samples` independent streams.
pub fn monte_carlo_counts(spec: &ProcessSpec, depth: usize, samples: u64, seed: u64) -> Result<BTreeMap<u64, u64>> {
    if samples == 0 {
        return Err(Error::Invalid("monte carlo needs at least one sample".into()));
    }
    let sampler = FormulaSampler::new(spec, depth)?;
    let blocks: Vec<u64> = (0..samples.div_ceil(MC_BLOCK)).collect();
    let partial: Vec<HashMap<u64, u64>> = blocks
        .into_par_iter()
        .map(|b| {
            let mut counts = HashMap::new();
            for i in b * MC_BLOCK..((b + 1) * MC_BLOCK).min(samples) {
                *counts.entry(sampler.sample(seed, i)).or_insert(0u64) += 1;
            }
            counts
        })
        .collect();
    let mut out = BTreeMap::new();
    for part in partial {
        for (f, c) in part {
            *out.entry(f).or_insert(0) += c;
        }
    }
    Ok(out)
}

/// Empirical distribution of `samples` formulas of the given depth.
pub fn monte_carlo<T: Real>(spec: &ProcessSpec, depth: usize, samples: u64, seed: u64) -> Result<Distribution<T>> {
    let counts = monte_carlo_counts(spec, depth, samples, seed)?;
    let total = T::of(samples as f64);
    let d = Distribution::from_entries(
        Domain::General(spec.n()),
        counts.into_iter().map(|(f, c)| (f, T::of(c as f64) / total)),
        depth,
    )?;
    Ok(d)
}

/// `[p_0, A(p_0), A²(p_0), …]`, `iters + 1` values.
pub fn scalar_trajectory<T: Scalar>(poly: &CharPoly, p0: T, iters: usize) -> Result<Vec<T>> {
    if p0 < T::zero() || p0 > T::one() || p0.partial_cmp(&p0).is_none() {
        return Err(Error::Probability(p0.to_f64().unwrap_or(f64::NAN)));
    }
    let mut out = Vec::with_capacity(iters + 1);
    out.push(p0);
    for i in 0..iters {
        let next = poly.eval(&out[i]);
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    MaxAbs,
    TotalVariation,
}

pub fn distance<T: Real>(a: &Distribution<T>, b: &Distribution<T>, metric: Metric) -> Result<f64> {
    if a.domain != b.domain {
        return Err(Error::Domain(format!("{:?} vs {:?}", a.domain, b.domain)));
    }
    let (mut i, mut j) = (0, 0);
    let (ea, eb) = (&a.entries, &b.entries);
    let mut diffs = Vec::with_capacity(ea.len() + eb.len());
    while i < ea.len() || j < eb.len() {
        let d = match (ea.get(i), eb.get(j)) {
            (Some(x), Some(y)) if x.0 == y.0 => {
                i += 1;
                j += 1;
                x.1 - y.1
            }
            (Some(x), Some(y)) if x.0 < y.0 => {
                i += 1;
                x.1
            }
            (Some(x), None) => {
                i += 1;
                x.1
            }
            (_, Some(y)) => {
                j += 1;
                y.1
            }
            (None, None) => unreachable!(),
        };
        diffs.push(d.abs().as_f64());
    }
    Ok(match metric {
        Metric::MaxAbs => diffs.into_iter().fold(0.0, f64::max),
        Metric::TotalVariation => 0.5 * diffs.into_iter().sum::<f64>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{compose, special, Special};

    fn spec(n: usize, flags: &str, alpha: &str) -> ProcessSpec {
        ProcessSpec::new(
            SupportSpec::parse(n, flags).unwrap(),
            Connective::preset(alpha).unwrap(),
        )
    }

    #[test]
    fn initial_distributions() {
        let d = initial_distribution::<f64>(&spec(2, "proj", "maj3")).unwrap();
        assert_eq!(d.entries(), &[(0b1010, 0.5), (0b1100, 0.5)]);
        let d = initial_distribution::<f64>(&spec(2, "const0,const1", "maj3")).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.entries().iter().all(|e| e.1 == 0.25));
        let d = initial_distribution::<f64>(&spec(2, "neg,const0,const1", "maj3")).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.entries().iter().all(|e| (e.1 - 1.0 / 6.0).abs() < 1e-16));
        assert!(SupportSpec::parse(2, "proj,bogus").is_err());
    }

    #[test]
    fn caps() {
        assert!(initial_distribution::<f64>(&spec(4, "proj", "maj3")).is_ok());
        assert!(initial_distribution::<f64>(&spec(4, "neg", "maj3")).is_ok());
        let err = initial_distribution::<f64>(&spec(4, "proj", "mux")).unwrap_err();
        assert!(err.is_cap());
        assert!(initial_distribution::<f64>(&spec(5, "proj", "maj3"))
            .unwrap_err()
            .is_cap());
        assert!(initial_distribution::<f64>(&spec(20, "proj", "xor2")).is_ok());
        assert!(initial_distribution::<f64>(&spec(21, "proj", "xor2"))
            .unwrap_err()
            .is_cap());
    }

    #[test]
    fn step_examples() {
        let and2 = Connective::preset("and2").unwrap();
        let d = initial_distribution::<f64>(&spec(2, "proj", "maj3")).unwrap();
        let s = step_exact(&d, &and2).unwrap();
        assert_eq!(s.entries(), &[(0b1000, 0.5), (0b1010, 0.25), (0b1100, 0.25)]);
        assert_eq!(s.iteration(), 1);

        let maj3 = Connective::preset("maj3").unwrap();
        let f = special(3, Special::Kappa).unwrap();
        let point = Distribution::<f64>::point_mass(Domain::General(3), f.id()).unwrap();
        let s = step_exact(&point, &maj3).unwrap();
        assert_eq!(s.entries(), &[(f.id(), 1.0)]);

        let xor = spec(2, "proj", "xor2");
        let d = initial_distribution::<f64>(&xor).unwrap();
        assert_eq!(d.domain(), Domain::Linear(2));
        let s = step_exact(&d, &xor.alpha).unwrap();
        assert_eq!(s.entries(), &[(0, 0.5), (0b110, 0.5)]);
    }

    #[test]
    fn linear_step_rejects_nonlinear_alpha() {
        let d = initial_distribution::<f64>(&spec(2, "proj", "xor2")).unwrap();
        let err = step_exact(&d, &Connective::preset("maj3").unwrap()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn budget_error_reports_work() {
        let d = initial_distribution::<f64>(&spec(3, "proj", "maj3")).unwrap();
        let err = step_exact_with_budget(&d, &Connective::preset("maj3").unwrap(), 10).unwrap_err();
        assert!(matches!(err, Error::Budget { required: 39, .. }));
    }

    fn brute_step(pi: &Distribution<f64>, alpha: &Connective) -> BTreeMap<u64, f64> {
        let n = pi.domain().n();
        let k = alpha.arity();
        let e = pi.entries();
        let mut out = BTreeMap::new();
        let mut idx = vec![0usize; k];
        loop {
            let args: Vec<TruthTable> = idx.iter().map(|&i| TruthTable::from_word(n, e[i].0).unwrap()).collect();
            let f = compose(alpha.table(), &args).unwrap().id();
            let p: f64 = idx.iter().map(|&i| e[i].1).product();
            *out.entry(f).or_insert(0.0) += p;
            let mut j = 0;
            loop {
                if j == k {
                    return out;
                }
                idx[j] += 1;
                if idx[j] < e.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    #[test]
    fn step_matches_brute_force() {
        for alpha in ["and2", "maj3", "mux", "valiant4", "slow3"] {
            let s = spec(2, "neg,const0,const1", alpha);
            let mut d = initial_distribution::<f64>(&s).unwrap();
            for _ in 0..3 {
                let want = brute_step(&d, &s.alpha);
                let got = step_exact(&d, &s.alpha).unwrap();
                assert_eq!(got.support(), want.keys().copied().collect::<Vec<_>>());
                for (k, p) in want {
                    assert!((got.get(k) - p).abs() < 1e-13, "{alpha} {k:04b} {} {p}", got.get(k));
                }
                d = got;
            }
        }
    }

    #[test]
    fn iterate_zero_steps_is_initial() {
        let s = spec(2, "const0,const1", "maj3");
        let r = iterate_exact::<f64>(&s, 0).unwrap();
        assert_eq!(r.distribution, initial_distribution::<f64>(&s).unwrap());
        assert!(r.drifts.is_empty());
    }

    #[test]
    fn general_step_is_worker_count_independent() {
        let s = spec(3, "proj", "maj3");
        let d = iterate_exact::<f64>(&s, 2).unwrap().distribution;
        let run = |t: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| step_exact(&d, &s.alpha).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn closure_examples() {
        let c = support_closure(&spec(2, "proj", "xor2")).unwrap();
        // S_0 = {x1, x2}, S_1 = {0, x1⊕x2}, S_2 = {0}
        assert_eq!(c.levels[0], vec![0b010, 0b100]);
        assert_eq!(c.levels[1], vec![0, 0b110]);
        assert_eq!(c.union_support, vec![0, 0b010, 0b100, 0b110]);
        assert!(c.even_part.contains(&0b010) && c.odd_part.contains(&0b110));

        let c = support_closure(&spec(2, "const0,const1", "maj3")).unwrap();
        for f in [0b0000u64, 0b1000, 0b1010, 0b1100, 0b1110, 0b1111] {
            assert!(c.union_support.contains(&f), "missing {f:04b}");
        }
        let c = support_closure(&spec(1, "proj", "and2")).unwrap();
        assert!(c.union_support.contains(&0b10));
    }

    #[test]
    fn closure_matches_exact_support() {
        for (flags, alpha) in [
            ("const0,const1", "maj3"),
            ("neg", "maj3"),
            ("proj", "mux"),
            ("proj", "xnor3"),
        ] {
            let s = spec(2, flags, alpha);
            let c = support_closure(&s).unwrap();
            let mut seen = BTreeSet::new();
            exact_trajectory::<f64>(&s, c.closed_at - 1, |d| {
                seen.extend(d.support());
                Ok(())
            })
            .unwrap();
            assert_eq!(seen.into_iter().collect::<Vec<_>>(), c.union_support, "{flags} {alpha}");
        }
    }

    #[test]
    fn sampler_determinism_and_depth0() {
        let s = spec(2, "const0,const1", "maj3");
        let members = s.support.keys(Domain::General(2)).unwrap();
        for seed in 0..20 {
            let f = sample_formula(&s, 0, seed).unwrap();
            assert!(members.contains(&f.id()));
        }
        assert_eq!(sample_formula(&s, 7, 42).unwrap(), sample_formula(&s, 7, 42).unwrap());
    }

    #[test]
    fn emitted_formula_matches_sample() {
        for (flags, alpha, depth) in [
            ("const0,const1", "maj3", 3),
            ("neg,const0", "mux", 2),
            ("proj", "and2", 4),
        ] {
            let s = spec(2, flags, alpha);
            let sampler = FormulaSampler::new(&s, depth).unwrap();
            for seed in 0..10 {
                let (f, text) = sampler.sample_tree(seed, 3).unwrap();
                assert_eq!(f, sampler.sample(seed, 3));
                assert!(text.starts_with(alpha));
            }
        }
    }

    #[test]
    fn monte_carlo_point_mass_and_workers() {
        let s = spec(3, "proj", "maj3");
        let d = monte_carlo::<f64>(&s, 4, 1, 9).unwrap();
        assert_eq!(d.len(), 1);
        let run = |t: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| monte_carlo_counts(&s, 4, 10_000, 5).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn trajectory_examples() {
        let maj3 = Connective::preset("maj3").unwrap().char_poly();
        assert!(scalar_trajectory(&maj3, 0.5, 10).unwrap().iter().all(|&p| p == 0.5));
        let and2 = Connective::preset("and2").unwrap().char_poly();
        let t = scalar_trajectory(&and2, 0.9, 3).unwrap();
        let want = [0.9f64, 0.81, 0.6561, 0.43046721];
        for (a, b) in t.iter().zip(want) {
            assert!((*a - b).abs() < 1e-15);
        }
        let up = scalar_trajectory(&maj3, 2.0 / 3.0, 20).unwrap();
        assert!(up.windows(2).all(|w| w[1] > w[0] || w[1] == 1.0) && up[20] > 0.999);
        assert!(scalar_trajectory(&maj3, 1.5, 1).is_err());
        let exact = scalar_trajectory(&maj3, num_rational::Rational64::new(1, 3), 2).unwrap();
        assert_eq!(exact[1], num_rational::Rational64::new(7, 27));
    }

    #[test]
    fn distance_examples() {
        let dom = Domain::General(2);
        let a = Distribution::<f64>::point_mass(dom, 1).unwrap();
        let b = Distribution::<f64>::point_mass(dom, 2).unwrap();
        assert_eq!(distance(&a, &a, Metric::MaxAbs).unwrap(), 0.0);
        assert_eq!(distance(&a, &b, Metric::MaxAbs).unwrap(), 1.0);
        assert_eq!(distance(&a, &b, Metric::TotalVariation).unwrap(), 1.0);
        let u = Distribution::<f64>::uniform(dom, &[1, 2, 4, 8]).unwrap();
        assert_eq!(distance(&u, &a, Metric::MaxAbs).unwrap(), 0.75);
        let l = Distribution::<f64>::point_mass(Domain::Linear(2), 1).unwrap();
        assert!(distance(&a, &l, Metric::MaxAbs).is_err());
    }

    #[test]
    fn snapshot_and_csv_round_trip() {
        let s = spec(2, "const0,const1", "maj3");
        let d = iterate_exact::<f64>(&s, 3).unwrap().distribution;
        let json = serde_json::to_string(&d.to_snapshot()).unwrap();
        let back = Distribution::<f64>::from_snapshot(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.entries(), d.entries());
        assert_eq!(back.iteration(), 3);
        let csv = d.to_csv();
        assert!(csv.starts_with("fn,p\n"));
        let back = Distribution::<f64>::from_csv(d.domain(), 3, &csv).unwrap();
        assert_eq!(back.entries(), d.entries());

        let l = iterate_exact::<f64>(&spec(3, "const1", "xor2"), 2)
            .unwrap()
            .distribution;
        let snap = l.to_snapshot();
        assert_eq!(snap.domain, "linear");
        assert_eq!(snap.entries[0].key.len(), 4);
        assert_eq!(
            Distribution::<f64>::from_snapshot(&snap).unwrap().entries(),
            l.entries()
        );
    }

    #[test]
    fn invalid_distributions_rejected() {
        let dom = Domain::General(2);
        assert!(Distribution::<f64>::from_entries(dom, [(1, 0.5)], 0).is_err());
        assert!(Distribution::<f64>::from_entries(dom, [(1, 1.5), (2, -0.5)], 0).is_err());
        assert!(Distribution::<f64>::from_entries(dom, [(16, 1.0)], 0).is_err());
        assert!(Distribution::<f64>::from_entries(Domain::Linear(2), [(8, 1.0)], 0).is_err());
    }

    #[test]
    fn linear_general_views_agree() {
        // XOR3 over projections with n = 3, iterated in the linear domain and viewed as tables,
        // matches iterating the same connective over truth tables.
        let s = spec(3, "const1", "xor3");
        let lin = iterate_exact::<f64>(&s, 3).unwrap().distribution.to_general().unwrap();
        let mut gen = initial_general::<f64>(&s.support).unwrap();
        for _ in 0..3 {
            gen = step_exact(&gen, &s.alpha).unwrap();
        }
        assert_eq!(lin.support(), gen.support());
        assert!(distance(&lin, &gen, Metric::MaxAbs).unwrap() < 1e-15);
    }

    #[test]
    fn support_marginals() {
        let s = SupportSpec::parse(3, "neg,const1").unwrap();
        let d = initial_general::<f64>(&s).unwrap();
        for x in 0..8 {
            assert!((d.marginal(x) - s.marginal(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn fwht_path_matches_pairwise() {
        // n = 12 pushes the second step past the pairwise cost threshold
        let s = spec(12, "neg,const1", "xor3");
        let size = 1usize << 13;
        let mut d = initial_distribution::<f64>(&s).unwrap();
        let mut layer = d.entries().to_vec();
        for _ in 0..2 {
            d = step_exact(&d, &s.alpha).unwrap();
            let mut cur = vec![0.0; size];
            cur[0] = 1.0;
            for _ in 0..3 {
                let mut acc = vec![0.0; size];
                for (a, &p) in cur.iter().enumerate().filter(|e| *e.1 > 0.0) {
                    for &(b, q) in &layer {
                        acc[a ^ b as usize] += p * q;
                    }
                }
                cur = acc;
            }
            layer = (0..size)
                .filter(|&k| cur[k] > 0.0)
                .map(|k| ((k ^ 1) as u64, cur[k]))
                .collect();
            layer.sort_by_key(|e| e.0);
        }
        assert_eq!(d.support(), layer.iter().map(|e| e.0).collect::<Vec<_>>());
        for (k, p) in layer {
            assert!((d.get(k) - p).abs() < 1e-13);
        }
    }
}
