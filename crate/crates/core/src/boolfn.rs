//! Truth-table representation of Boolean functions.
//!
//! An `n`-adic function is a vector of `2^n` bits. Bit `a` holds `f(a)`, where the assignment
//! index is `a = Σ_j x_j·2^(j-1)`, so `x_1` is the least significant bit. For `n ≤ 6` the whole
//! table fits in one `u64` word, which the iteration code uses directly as a function id.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest arity a [`TruthTable`] may store.
pub const MAX_ARITY: usize = 24;

/// Largest arity whose table fits in a single `u64` word.
pub const WORD_ARITY: usize = 6;

/// Word-packed truth table of an `n ≤ 6` function (or a linear coefficient vector).
pub type FnId = u64;

/// Mask of the `2^n` valid bits of a word-packed table.
#[inline]
pub fn table_mask(n: usize) -> u64 {
    debug_assert!(n <= WORD_ARITY);
    if n == WORD_ARITY {
        u64::MAX
    } else {
        (1u64 << (1u32 << n)) - 1
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TruthTable {
    n: usize,
    words: Vec<u64>,
}

impl TruthTable {
    fn word_count(n: usize) -> usize {
        if n <= WORD_ARITY {
            1
        } else {
            1 << (n - WORD_ARITY)
        }
    }

    fn check_arity(n: usize) -> Result<()> {
        if n == 0 || n > MAX_ARITY {
            return Err(Error::ArityCap {
                n,
                cap: MAX_ARITY,
                what: "truth tables (1..=24)",
            });
        }
        Ok(())
    }

    /// The constant-0 function.
    pub fn zero(n: usize) -> Result<Self> {
        Self::check_arity(n)?;
        Ok(TruthTable {
            n,
            words: vec![0; Self::word_count(n)],
        })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut t = Self::zero(n)?;
        for a in 0..t.len() {
            if f(a) {
                t.set(a, true);
            }
        }
        Ok(t)
    }

    /// Build from a word-packed table; bits above `2^n` must be clear.
    pub fn from_word(n: usize, word: FnId) -> Result<Self> {
        Self::check_arity(n)?;
        if n > WORD_ARITY {
            return Err(Error::ArityCap {
                n,
                cap: WORD_ARITY,
                what: "word-packed tables",
            });
        }
        if word & !table_mask(n) != 0 {
            return Err(Error::Parse(format!("word {word:#x} has bits beyond 2^{n}")));
        }
        Ok(TruthTable { n, words: vec![word] })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    /// Number of assignments, `2^n`.
    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Word-packed id. Panics for `n > 6`.
    pub fn id(&self) -> FnId {
        assert!(self.n <= WORD_ARITY, "word-packed id needs n <= 6, got {}", self.n);
        self.words[0]
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, a: usize) -> bool {
        (self.words[a >> 6] >> (a & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, a: usize, v: bool) {
        let bit = 1u64 << (a & 63);
        if v {
            self.words[a >> 6] |= bit;
        } else {
            self.words[a >> 6] &= !bit;
        }
    }

    /// Number of true assignments.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn tail_mask(&self) -> u64 {
        if self.n < WORD_ARITY {
            table_mask(self.n)
        } else {
            u64::MAX
        }
    }

    fn zip(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::ArityMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| op(a, b)).collect();
        Ok(TruthTable { n: self.n, words })
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a | b)
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a ^ b)
    }

    pub fn complement(&self) -> Self {
        let mask = self.tail_mask();
        TruthTable {
            n: self.n,
            words: self.words.iter().map(|w| !w & mask).collect(),
        }
    }

    /// Pointwise `self ≤ other`.
    pub fn leq(&self, other: &Self) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::ArityMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self.words.iter().zip(&other.words).all(|(&a, &b)| a & !b == 0))
    }

    /// Lowercase hex, least significant nibble first. An `n = 3` table is two characters.
    pub fn to_hex(&self) -> String {
        let nibbles = (self.len() / 4).max(1);
        (0..nibbles)
            .map(|i| {
                let v = (self.words[i / 16] >> (4 * (i % 16))) & 0xf;
                char::from_digit(v as u32, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(n: usize, s: &str) -> Result<Self> {
        let mut t = Self::zero(n)?;
        let nibbles = (t.len() / 4).max(1);
        if s.len() != nibbles {
            return Err(Error::Parse(format!(
                "hex table for n={n} needs {nibbles} characters, got {}",
                s.len()
            )));
        }
        for (i, c) in s.chars().enumerate() {
            let v = c
                .to_digit(16)
                .filter(|_| !c.is_ascii_uppercase())
                .ok_or_else(|| Error::Parse(format!("bad hex digit {c:?}")))? as u64;
            t.words[i / 16] |= v << (4 * (i % 16));
        }
        if t.words[0] & !t.tail_mask() != 0 {
            return Err(Error::Parse(format!("hex {s:?} sets bits beyond 2^{n}")));
        }
        Ok(t)
    }
}

impl fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruthTable(n={}, {})", self.n, self.to_hex())
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    n: usize,
    table: String,
}

impl Serialize for TruthTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            n: self.n,
            table: self.to_hex(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TruthTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = TableRepr::deserialize(d)?;
        TruthTable::from_hex(repr.n, &repr.table).map_err(serde::de::Error::custom)
    }
}

/// Members of the initial set `A_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `x_j`, 1-based.
    Projection(usize),
    /// `x̄_j`, 1-based.
    NegProjection(usize),
    Const0,
    Const1,
}

pub fn make_basis(n: usize, kind: Basis) -> Result<TruthTable> {
    let check = |j: usize| {
        if j == 0 || j > n {
            Err(Error::IndexOutOfRange { index: j, max: n })
        } else {
            Ok(j - 1)
        }
    };
    match kind {
        Basis::Projection(j) => {
            let j = check(j)?;
            TruthTable::from_fn(n, |a| (a >> j) & 1 == 1)
        }
        Basis::NegProjection(j) => {
            let j = check(j)?;
            TruthTable::from_fn(n, |a| (a >> j) & 1 == 0)
        }
        Basis::Const0 => TruthTable::zero(n),
        Basis::Const1 => Ok(TruthTable::zero(n)?.complement()),
    }
}

/// Named functions used by the limit theorems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Special {
    /// `T_t`: true iff at least `t` inputs are true. `T_0 ≡ 1`, `T_{n+1} ≡ 0`.
    Threshold(usize),
    /// `χ_n`: true iff exactly `n/2` inputs are true.
    Chi,
    /// `υ_n`: true iff more than `n/2` inputs are true.
    Upsilon,
    /// `η_n`: conjunction of all inputs.
    Eta,
    /// `κ_n`: disjunction minus conjunction.
    Kappa,
}

pub fn special(n: usize, kind: Special) -> Result<TruthTable> {
    let w = |a: usize| a.count_ones() as usize;
    match kind {
        Special::Threshold(t) => {
            if t > n + 1 {
                return Err(Error::ThresholdRange { t, max: n + 1 });
            }
            TruthTable::from_fn(n, |a| w(a) >= t)
        }
        Special::Chi | Special::Upsilon => {
            if n % 2 == 1 {
                return Err(Error::OddArity { n, what: "chi/upsilon" });
            }
            if kind == Special::Chi {
                TruthTable::from_fn(n, |a| w(a) == n / 2)
            } else {
                TruthTable::from_fn(n, |a| w(a) > n / 2)
            }
        }
        Special::Eta => TruthTable::from_fn(n, |a| w(a) == n),
        Special::Kappa => TruthTable::from_fn(n, |a| w(a) > 0 && w(a) < n),
    }
}

/// Structural classification of a function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySet {
    pub monotone: bool,
    pub balanced: bool,
    pub linear: bool,
    pub self_dual: bool,
    pub bi_preserving: bool,
    /// `Some(t)` iff the function is exactly `T_t`.
    pub threshold_index: Option<usize>,
    /// Lowest `m` for which the function is a slice function of `S_{m,n}`.
    pub slice_level: Option<usize>,
    pub depends_on_all: bool,
}

pub fn is_monotone(f: &TruthTable) -> bool {
    (0..f.len()).all(|a| !f.get(a) || (0..f.arity()).all(|j| (a >> j) & 1 == 1 || f.get(a | (1 << j))))
}

pub fn is_self_dual(f: &TruthTable) -> bool {
    let top = f.len() - 1;
    (0..f.len()).all(|a| f.get(a) != f.get(top ^ a))
}

pub fn depends_on(f: &TruthTable, j: usize) -> bool {
    (0..f.len()).any(|a| f.get(a) != f.get(a ^ (1 << j)))
}

pub fn classify(f: &TruthTable) -> PropertySet {
    let n = f.arity();
    let wt = |a: usize| a.count_ones() as usize;
    let threshold_index = (0..=n + 1).find(|&t| (0..f.len()).all(|a| f.get(a) == (wt(a) >= t)));
    let slice_level = (0..=n).find(|&m| {
        (0..f.len()).all(|a| match wt(a).cmp(&m) {
            std::cmp::Ordering::Greater => f.get(a),
            std::cmp::Ordering::Less => !f.get(a),
            std::cmp::Ordering::Equal => true,
        })
    });
    PropertySet {
        monotone: is_monotone(f),
        balanced: 2 * f.weight() == f.len(),
        linear: linear_coeffs(f).is_some(),
        self_dual: is_self_dual(f),
        bi_preserving: !f.get(0) && f.get(f.len() - 1),
        threshold_index,
        slice_level,
        depends_on_all: (0..n).all(|j| depends_on(f, j)),
    }
}

/// Word-level evaluator of a fixed connective on word-packed argument tables.
///
/// Folds the `2^k` constant cofactors of `α` one argument at a time:
/// `h'[c] = (h[2c] & !g) | (h[2c+1] & g)`.
#[derive(Debug, Clone)]
pub(crate) struct Composer {
    cofactors: Vec<u64>,
    small: Option<SmallForm>,
}

/// `k ≤ 3` connectives split on `x_1` into two binary operators.
#[derive(Debug, Clone, Copy)]
enum SmallForm {
    One { tt: u8 },
    Two { tt: u8 },
    Three { low: u8, high: u8 },
}

#[inline]
fn binop(tt: u8, a: u64, b: u64) -> u64 {
    // tt bit (x + 2y) = op(x, y)
    match tt & 0xf {
        0x0 => 0,
        0x1 => !(a | b),
        0x2 => a & !b,
        0x3 => !b,
        0x4 => !a & b,
        0x5 => !a,
        0x6 => a ^ b,
        0x7 => !(a & b),
        0x8 => a & b,
        0x9 => !(a ^ b),
        0xa => a,
        0xb => a | !b,
        0xc => b,
        0xd => !a | b,
        0xe => a | b,
        _ => u64::MAX,
    }
}

impl Composer {
    pub(crate) fn new(alpha: &TruthTable) -> Self {
        let k = alpha.arity();
        let cofactors = (0..alpha.len())
            .map(|r| if alpha.get(r) { u64::MAX } else { 0 })
            .collect();
        let bits = |r: &[usize]| {
            r.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &r)| acc | ((alpha.get(r) as u8) << i))
        };
        let small = match k {
            1 => Some(SmallForm::One { tt: bits(&[0, 1]) }),
            2 => Some(SmallForm::Two {
                tt: bits(&[0, 1, 2, 3]),
            }),
            3 => Some(SmallForm::Three {
                low: bits(&[0, 2, 4, 6]),
                high: bits(&[1, 3, 5, 7]),
            }),
            _ => None,
        };
        Composer { cofactors, small }
    }

    /// Unmasked result; callers mask to `2^n` bits.
    #[inline]
    pub(crate) fn apply(&self, args: &[u64], scratch: &mut Vec<u64>) -> u64 {
        match self.small {
            Some(SmallForm::One { tt }) => match tt & 3 {
                0 => 0,
                1 => !args[0],
                2 => args[0],
                _ => u64::MAX,
            },
            Some(SmallForm::Two { tt }) => binop(tt, args[0], args[1]),
            Some(SmallForm::Three { low, high }) => {
                let g = args[0];
                (binop(low, args[1], args[2]) & !g) | (binop(high, args[1], args[2]) & g)
            }
            None => {
                scratch.clear();
                scratch.extend_from_slice(&self.cofactors);
                let mut len = scratch.len();
                for &g in args {
                    len /= 2;
                    for c in 0..len {
                        scratch[c] = (scratch[2 * c] & !g) | (scratch[2 * c + 1] & g);
                    }
                }
                scratch[0]
            }
        }
    }
}

/// `α(g_1, …, g_k)` evaluated pointwise.
pub fn compose(alpha: &TruthTable, args: &[TruthTable]) -> Result<TruthTable> {
    let k = alpha.arity();
    if args.len() != k {
        return Err(Error::ArityMismatch {
            expected: k,
            found: args.len(),
        });
    }
    let n = args[0].arity();
    if let Some(bad) = args.iter().find(|g| g.arity() != n) {
        return Err(Error::ArityMismatch {
            expected: n,
            found: bad.arity(),
        });
    }
    let composer = Composer::new(alpha);
    let mut out = TruthTable::zero(n)?;
    let mask = out.tail_mask();
    let mut scratch = Vec::new();
    let mut words = Vec::with_capacity(k);
    for i in 0..out.words.len() {
        words.clear();
        words.extend(args.iter().map(|g| g.words[i]));
        out.words[i] = composer.apply(&words, &mut scratch) & mask;
    }
    Ok(out)
}

/// Parity of `⟨f, g⟩ = Σ_a f(a)g(a)`. Only the parity ever enters `(-1)^⟨f,g⟩`.
pub fn parity_inner(f: &TruthTable, g: &TruthTable) -> Result<bool> {
    let both = f.and(g)?;
    Ok(both.weight() % 2 == 1)
}

/// `f^d(x) = ¬f(x̄)`.
pub fn dual(f: &TruthTable) -> TruthTable {
    let top = f.len() - 1;
    let mut d = TruthTable::zero(f.arity()).expect("arity already validated");
    for a in 0..f.len() {
        d.set(a, !f.get(top ^ a));
    }
    d
}

/// `f ↦ f(x)·x_{n+1} ∨ ¬f(x̄)·x̄_{n+1}`: a bijection from `n`-adic functions onto
/// `(n+1)`-adic self-dual functions.
pub fn self_dual_extend(f: &TruthTable) -> Result<TruthTable> {
    let n = f.arity();
    let top = f.len() - 1;
    TruthTable::from_fn(n + 1, |a| {
        let low = a & top;
        if a > top {
            f.get(low)
        } else {
            !f.get(top ^ low)
        }
    })
}

/// Affine function `c_0 ⊕ c_1x_1 ⊕ … ⊕ c_nx_n`; bit `j` of `coeffs` is `c_j`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearFn {
    n: usize,
    coeffs: u64,
}

/// Largest arity of a [`LinearFn`].
pub const LINEAR_MAX_ARITY: usize = 62;

impl LinearFn {
    pub fn new(n: usize, coeffs: u64) -> Result<Self> {
        if n == 0 || n > LINEAR_MAX_ARITY {
            return Err(Error::ArityCap {
                n,
                cap: LINEAR_MAX_ARITY,
                what: "linear functions",
            });
        }
        if coeffs >> (n + 1) != 0 {
            return Err(Error::Parse(format!(
                "coefficient vector {coeffs:#b} longer than n+1={}",
                n + 1
            )));
        }
        Ok(LinearFn { n, coeffs })
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> u64 {
        self.coeffs
    }

    pub fn constant(&self) -> bool {
        self.coeffs & 1 == 1
    }

    /// `c_0c_1…c_n` as a bit string.
    pub fn to_bits(&self) -> String {
        (0..=self.n)
            .map(|j| if (self.coeffs >> j) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn from_bits(s: &str) -> Result<Self> {
        if s.len() < 2 {
            return Err(Error::Parse(format!("linear coefficient string {s:?} too short")));
        }
        let mut coeffs = 0u64;
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => coeffs |= 1 << j,
                _ => return Err(Error::Parse(format!("bad coefficient character {c:?}"))),
            }
        }
        LinearFn::new(s.len() - 1, coeffs)
    }

    pub fn eval(&self, a: usize) -> bool {
        let vars = (self.coeffs >> 1) & (a as u64);
        (self.coeffs & 1 == 1) ^ (vars.count_ones() % 2 == 1)
    }
}

impl fmt::Debug for LinearFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearFn({})", self.to_bits())
    }
}

pub fn linear_coeffs(f: &TruthTable) -> Option<LinearFn> {
    let n = f.arity();
    if n > LINEAR_MAX_ARITY {
        return None;
    }
    let c0 = f.get(0);
    let mut coeffs = c0 as u64;
    for j in 0..n {
        if f.get(1 << j) != c0 {
            coeffs |= 1 << (j + 1);
        }
    }
    let l = LinearFn { n, coeffs };
    (0..f.len()).all(|a| f.get(a) == l.eval(a)).then_some(l)
}

pub fn linear_to_tt(l: &LinearFn) -> Result<TruthTable> {
    TruthTable::from_fn(l.arity(), |a| l.eval(a))
}
