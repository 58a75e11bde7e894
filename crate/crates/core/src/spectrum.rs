//! Fourier coefficients of distributions over functions.
//!
//! `Δ(w) = Σ_g (−1)^⟨w,g⟩ π(g)`, where only the parity of `⟨w,g⟩ = |w ∧ g|` matters. Spectra
//! are dense: `2^(2^n)` coefficients in the general domain, `2^(n+1)` in the linear domain.

use std::ops::{Add, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolfn::TruthTable;
use crate::connective::{Connective, SpectralProfile};
use crate::error::{Error, Result};
use crate::process::{fmt17, Distribution, Domain, GENERAL_EXACT_MAX, LINEAR_EXACT_MAX};
use crate::scalar::Real;

// Below this length a butterfly stage is not worth splitting across workers.
const PAR_FWHT_MIN: usize = 1 << 16;

/// Unnormalized Walsh–Hadamard butterfly; `v.len()` must be a power of two.
///
/// Every butterfly is independent within a stage, so the parallel split never changes results.
pub fn fwht_in_place<T>(v: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Send + Sync,
{
    let len = v.len();
    assert!(len.is_power_of_two(), "transform length {len} is not a power of two");
    let mut h = 1;
    while h < len {
        let stage = |block: &mut [T]| {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        };
        if len >= PAR_FWHT_MIN {
            v.par_chunks_mut(2 * h).for_each(stage);
        } else {
            v.chunks_mut(2 * h).for_each(stage);
        }
        h *= 2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T = f64> {
    domain: Domain,
    values: Vec<T>,
    iteration: usize,
}

fn dense_len(domain: Domain) -> Result<usize> {
    match domain {
        Domain::General(n) if n > GENERAL_EXACT_MAX => Err(Error::ArityCap {
            n,
            cap: GENERAL_EXACT_MAX,
            what: "general-domain spectra",
        }),
        Domain::Linear(n) if n > LINEAR_EXACT_MAX => Err(Error::ArityCap {
            n,
            cap: LINEAR_EXACT_MAX,
            what: "linear-domain spectra",
        }),
        d => Ok(d.dense_len().expect("capped domains are dense")),
    }
}

impl<T: Real> Spectrum<T> {
    pub fn from_values(domain: Domain, values: Vec<T>, iteration: usize) -> Result<Self> {
        let len = dense_len(domain)?;
        if values.len() != len {
            return Err(Error::Domain(format!(
                "spectrum needs {len} values, got {}",
                values.len()
            )));
        }
        Ok(Spectrum {
            domain,
            values,
            iteration,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn get(&self, w: u64) -> T {
        self.values[w as usize]
    }

    /// `max_{w ≠ 0} |Δ(w)|`.
    pub fn max_nonzero(&self) -> f64 {
        self.values[1..].iter().map(|v| v.abs().as_f64()).fold(0.0, f64::max)
    }

    pub fn to_dump(&self) -> SpectrumDump {
        SpectrumDump {
            n: self.domain.n(),
            domain: self.domain.name().to_string(),
            iteration: self.iteration,
            entries: self
                .values
                .iter()
                .enumerate()
                .map(|(w, v)| DeltaEntry {
                    key: self.domain.format_key(w as u64),
                    delta: v.as_f64(),
                })
                .collect(),
        }
    }

    pub fn from_dump(dump: &SpectrumDump) -> Result<Self> {
        let domain = match dump.domain.as_str() {
            "general" => Domain::General(dump.n),
            "linear" => Domain::Linear(dump.n),
            other => return Err(Error::Parse(format!("unknown domain {other:?}"))),
        };
        let mut values = vec![T::zero(); dense_len(domain)?];
        for e in &dump.entries {
            values[domain.parse_key(&e.key)? as usize] = T::of(e.delta);
        }
        Self::from_values(domain, values, dump.iteration)
    }

    /// `w,delta` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fn,delta\n");
        for (w, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.domain.format_key(w as u64), fmt17(v.as_f64())));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDump {
    pub n: usize,
    pub domain: String,
    pub iteration: usize,
    pub entries: Vec<DeltaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    #[serde(rename = "fn")]
    pub key: String,
    pub delta: f64,
}

/// Fast transform of `π`.
pub fn transform<T: Real>(pi: &Distribution<T>) -> Result<Spectrum<T>> {
    let domain = pi.domain();
    let mut values = vec![T::zero(); dense_len(domain)?];
    for &(g, p) in pi.entries() {
        values[g as usize] = p;
    }
    fwht_in_place(&mut values);
    Ok(Spectrum {
        domain,
        values,
        iteration: pi.iteration(),
    })
}

/// Quadratic-time transform, the reference the butterfly is tested against.
pub fn transform_naive<T: Real>(pi: &Distribution<T>) -> Result<Spectrum<T>> {
    let domain = pi.domain();
    let len = dense_len(domain)?;
    let values = (0..len as u64)
        .map(|w| {
            pi.entries()
                .iter()
                .map(|&(g, p)| if (w & g).count_ones() % 2 == 0 { p } else { -p })
                .fold(T::zero(), |a, b| a + b)
        })
        .collect();
    Ok(Spectrum {
        domain,
        values,
        iteration: pi.iteration(),
    })
}

/// `π(g) = N^-1 Σ_w (−1)^⟨w,g⟩ Δ(w)`.
///
/// Entries within `N·ε` of zero are roundoff and dropped; a clearly negative entry is an error.
pub fn inverse<T: Real>(spec: &Spectrum<T>) -> Result<Distribution<T>> {
    let mut v = spec.values.clone();
    fwht_in_place(&mut v);
    let len = T::of(v.len() as f64);
    let floor = T::epsilon() * len;
    let mut entries = Vec::new();
    for (g, x) in v.into_iter().enumerate() {
        let p = x / len;
        if p < -T::of(1e-9) {
            return Err(Error::Invalid(format!(
                "spectrum inverts to a negative mass {p} at {g:#x}"
            )));
        }
        if p.abs() > floor {
            entries.push((g as u64, p));
        }
    }
    Distribution::from_entries(spec.domain, entries, spec.iteration)
}

/// `Δ'(w) = (−1)^(c·w_0) Δ(w)^k` in coefficient space, where `w_0` is the constant coefficient.
pub fn linear_step<T: Real>(spec: &Spectrum<T>, c: bool, k: usize) -> Result<Spectrum<T>> {
    if !matches!(spec.domain, Domain::Linear(_)) {
        return Err(Error::Domain("linear_step needs a linear-domain spectrum".into()));
    }
    let values = spec
        .values
        .iter()
        .enumerate()
        .map(|(w, &d)| {
            let v = d.powi(k as i32);
            if c && w & 1 == 1 {
                -v
            } else {
                v
            }
        })
        .collect();
    Ok(Spectrum {
        domain: spec.domain,
        values,
        iteration: spec.iteration + 1,
    })
}

/// How the condition "⟨f, χ_n⟩ ≠ 0" of the slice spectrum is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceReading {
    /// Integer overlap: `f ∧ χ_n ≠ 0`. This is the reading the uniform-slice limit satisfies.
    Overlap,
    /// Parity of the overlap.
    Parity,
}

/// Spectrum of the uniform distribution on the slice `S_{n/2,n}`.
pub fn slice_spectrum(n: usize) -> Result<Spectrum<f64>> {
    slice_spectrum_with(n, SliceReading::Overlap)
}

pub fn slice_spectrum_with(n: usize, reading: SliceReading) -> Result<Spectrum<f64>> {
    if n % 2 == 1 {
        return Err(Error::OddArity {
            n,
            what: "slice spectrum",
        });
    }
    let domain = Domain::General(n);
    let len = dense_len(domain)?;
    let chi = crate::boolfn::special(n, crate::boolfn::Special::Chi)?.id();
    let ups = crate::boolfn::special(n, crate::boolfn::Special::Upsilon)?.id();
    let values = (0..len as u64)
        .map(|f| {
            let overlap = (f & chi).count_ones();
            let vanishes = match reading {
                SliceReading::Overlap => overlap != 0,
                SliceReading::Parity => overlap % 2 == 1,
            };
            if vanishes {
                0.0
            } else if (f & ups).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(Spectrum {
        domain,
        values,
        iteration: 0,
    })
}

/// `max_w |Δ(w) − (−1)^⟨high,w⟩ Δ(w ∧ low)|`.
pub fn restriction_residual<T: Real>(spec: &Spectrum<T>, low: &TruthTable, high: &TruthTable) -> Result<f64> {
    let n = match spec.domain {
        Domain::General(n) => n,
        Domain::Linear(_) => return Err(Error::Domain("restriction needs a general-domain spectrum".into())),
    };
    for t in [low, high] {
        if t.arity() != n {
            return Err(Error::ArityMismatch {
                expected: n,
                found: t.arity(),
            });
        }
    }
    let (lo, hi) = (low.id(), high.id());
    Ok(spec
        .values
        .iter()
        .enumerate()
        .map(|(w, &d)| {
            let w = w as u64;
            let r = spec.values[(w & lo) as usize];
            let r = if (w & hi).count_ones().is_multiple_of(2) { r } else { -r };
            (d - r).abs().as_f64()
        })
        .fold(0.0, f64::max))
}

/// Budget on `(2^|w|)^k` tuple terms in [`savicky_terms`].
pub const SAVICKY_BUDGET: u128 = 10_000_000;

/// The two parts of the one-step spectral recurrence at `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SavickyTerms {
    /// `a_j(w)·Δ(w)^j` for `j = 0..=k`; the `j = 0` term is `S(0)^|w|`.
    pub leading: Vec<f64>,
    /// Every tuple with some `v_j ∉ {0, w}`.
    pub y: f64,
}

impl SavickyTerms {
    pub fn total(&self) -> f64 {
        self.leading.iter().sum::<f64>() + self.y
    }
}

/// Right-hand side of the recurrence `Δ'(w) = Σ_j a_j(w)Δ(w)^j + y(w)`, from `transform(π)`.
pub fn savicky_predict<T: Real>(pi: &Distribution<T>, alpha: &Connective, w: &TruthTable) -> Result<f64> {
    let spec = transform(pi)?;
    if w.id() == 0 {
        return Ok(1.0);
    }
    Ok(savicky_terms(&spec, &alpha.spectral_profile(), w)?.total())
}

/// `Δ'(w) = Σ_{v_1..v_k ⊆ w} Π_{a ∈ w} S(v_1(a)..v_k(a)) · Π_j Δ(v_j)`.
pub fn savicky_terms<T: Real>(spec: &Spectrum<T>, profile: &SpectralProfile, w: &TruthTable) -> Result<SavickyTerms> {
    let n = match spec.domain {
        Domain::General(n) => n,
        Domain::Linear(_) => return Err(Error::Domain("the recurrence needs a general-domain spectrum".into())),
    };
    if w.arity() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            found: w.arity(),
        });
    }
    let k = profile.arity();
    let points: Vec<usize> = (0..w.len()).filter(|&a| w.get(a)).collect();
    let d = points.len();
    let terms = (1u128 << d).saturating_pow(k as u32);
    if terms > SAVICKY_BUDGET {
        return Err(Error::Budget {
            required: terms,
            budget: SAVICKY_BUDGET,
            what: "recurrence tuple sum",
        });
    }
    let wid = w.id();
    // subsets of w as function ids, indexed by a d-bit mask over `points`
    let subsets: Vec<u64> = (0..1usize << d)
        .map(|m| {
            (0..d)
                .filter(|&b| (m >> b) & 1 == 1)
                .fold(0u64, |acc, b| acc | 1 << points[b])
        })
        .collect();
    let delta: Vec<f64> = subsets.iter().map(|&v| spec.get(v).as_f64()).collect();
    let full = (1usize << d) - 1;
    let mut leading = vec![0.0; k + 1];
    let mut y = 0.0;
    let mut choice = vec![0usize; k];
    loop {
        let mut coef = 1.0;
        for b in 0..d {
            let t = (0..k).fold(0usize, |acc, j| acc | (((choice[j] >> b) & 1) << j));
            coef *= profile.get(t);
            if coef == 0.0 {
                break;
            }
        }
        if coef != 0.0 {
            let prod: f64 = choice.iter().map(|&m| delta[m]).product();
            if choice.iter().all(|&m| m == 0 || m == full) {
                leading[choice.iter().filter(|&&m| m == full).count()] += coef * prod;
            } else {
                y += coef * prod;
            }
        }
        let mut j = 0;
        loop {
            if j == k {
                debug_assert_eq!(wid, subsets[full]);
                return Ok(SavickyTerms { leading, y });
            }
            choice[j] += 1;
            if choice[j] <= full {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
    }
}

/// Constants of the explicit decay bounds for a balanced nonlinear connective. Logs are base 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub k: usize,
    pub n: usize,
    /// `a = Σ_t |S(t)|³`.
    pub a: f64,
    /// `log(1/a)`.
    pub log_inv_a: f64,
    /// `I = n2^k log(1/a) + 2^(2n)(k+1)^(2^n) / log(1/a)`.
    pub big_i: f64,
}

pub fn bound_constants(alpha: &Connective, n: usize) -> Result<BoundConstants> {
    let profile = alpha.spectral_profile();
    let a = profile.a3();
    if !profile.is_balanced_nonlinear() || a >= 1.0 {
        return Err(Error::NotBalancedNonlinear { a });
    }
    let k = alpha.arity();
    let l = (1.0 / a).log2();
    let e = ((k + 1) as f64).powf((1u64 << n) as f64);
    let big_i = n as f64 * (1u64 << k) as f64 * l + (1u64 << (2 * n)) as f64 * e / l;
    Ok(BoundConstants {
        k,
        n,
        a,
        log_inv_a: l,
        big_i,
    })
}

impl BoundConstants {
    /// `i_d = n2^k log(1/a) + Σ_{j=3}^d (k+1)^j j / log(1/a)`.
    pub fn i_d(&self, d: usize) -> f64 {
        let base = self.n as f64 * (1u64 << self.k) as f64 * self.log_inv_a;
        base + (3..=d)
            .map(|j| ((self.k + 1) as f64).powi(j as i32) * j as f64 / self.log_inv_a)
            .sum::<f64>()
    }

    /// `log2 b_d(i)`: `b_2 = 1`, `b_d(i) = (i − i_2 + 2)^((k+1)^(d−3))`. Infinite where the base is
    /// not positive, since the bound says nothing there.
    pub fn log2_b_d(&self, d: usize, i: f64) -> f64 {
        if d <= 2 {
            return 0.0;
        }
        let base = i - self.i_d(2) + 2.0;
        if base <= 0.0 {
            return f64::INFINITY;
        }
        ((self.k + 1) as f64).powi(d as i32 - 3) * base.log2()
    }

    pub fn b_d(&self, d: usize, i: f64) -> f64 {
        self.log2_b_d(d, i).exp2()
    }

    /// `a^(i − i_d) b_d(i)`, evaluated in log space.
    pub fn envelope(&self, d: usize, i: f64) -> f64 {
        ((i - self.i_d(d)) * self.a.log2() + self.log2_b_d(d, i)).exp2()
    }

    /// Largest envelope over `2 ≤ d ≤ 2^n`.
    pub fn envelope_max(&self, i: f64) -> f64 {
        (2..=1usize << self.n).map(|d| self.envelope(d, i)).fold(0.0, f64::max)
    }

    /// `i − [log c / log a + log(i − I + 2)(k+1)^(2^n) / log(1/a) + I]`; nonnegative iff `i` satisfies
    /// the explicit convergence condition for target `c`.
    pub fn savbounds_gap(&self, i: f64, c: f64) -> f64 {
        let e = ((self.k + 1) as f64).powf((1u64 << self.n) as f64);
        let t = i - self.big_i + 2.0;
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        i - (c.log2() / self.a.log2() + t.log2() * e / self.log_inv_a + self.big_i)
    }

    /// Smallest integer `i ≥ I` meeting the condition.
    ///
    /// The gap is convex in `i`, so once it turns nonnegative it stays so: doubling finds a bracket
    /// and bisection the first integer inside it.
    pub fn savbounds_min_i(&self, c: f64) -> Result<f64> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Invalid(format!("target c must lie in (0, 1), got {c}")));
        }
        let start = self.big_i.ceil();
        let ok = |t: f64| self.savbounds_gap(start + t, c) >= 0.0;
        if ok(0.0) {
            return Ok(start);
        }
        let mut hi = 1.0f64;
        while !ok(hi) {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Invalid("explicit bound did not close".into()));
            }
        }
        let mut lo = hi / 2.0;
        if hi == 1.0 {
            lo = 0.0;
        }
        while hi - lo > 1.0 {
            let mid = ((lo + hi) / 2.0).floor();
            if ok(mid) {
                hi = mid
            } else {
                lo = mid
            }
        }
        Ok(start + hi)
    }
}
