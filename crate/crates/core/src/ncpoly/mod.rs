//! Noncommutative *-polynomials in `m` letters.
//!
//! A polynomial is a finite complex-linear combination of words in the letters
//! `x1, …, xm` and their adjoints. Terms are kept in a `BTreeMap` keyed by
//! [`Word`], whose ordering is graded lexicographic, so every value of
//! [`NCPolynomial`] is already in canonical form: one term per word, no exact
//! zero coefficients, deterministic iteration order.

mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use parse::parse;

/// A single generator or its adjoint. `index` is zero-based; it is rendered
/// one-based (`x1`, `x2`, …) in text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub index: usize,
    pub adjoint: bool,
}

impl Letter {
    pub const fn new(index: usize, adjoint: bool) -> Self {
        Letter { index, adjoint }
    }

    pub const fn star(self) -> Self {
        Letter {
            index: self.index,
            adjoint: !self.adjoint,
        }
    }
}

/// A finite product of letters, read left to right as a matrix product.
/// The empty word is the unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn unit() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reverse the word and flip every adjoint flag.
    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.star()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One term `coefficient · word`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coefficient: Complex64,
    pub word: Word,
}

/// A noncommutative *-polynomial in canonical form.
#[derive(Clone, Debug, PartialEq)]
pub struct NCPolynomial {
    arity: usize,
    terms: BTreeMap<Word, Complex64>,
}

impl NCPolynomial {
    /// The zero polynomial in `arity` letters.
    pub fn zero(arity: usize) -> Self {
        assert!(arity >= 1, "arity must be at least 1");
        NCPolynomial {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(arity: usize) -> Self {
        Self::constant(arity, Complex64::new(1.0, 0.0))
    }

    pub fn constant(arity: usize, c: Complex64) -> Self {
        let mut p = Self::zero(arity);
        p.add_term(Word::unit(), c);
        p
    }

    /// The polynomial consisting of a single letter.
    pub fn letter(arity: usize, index: usize, adjoint: bool) -> Result<Self> {
        if index >= arity {
            return Err(Error::LetterOutOfRange {
                index: index + 1,
                arity,
            });
        }
        let mut p = Self::zero(arity);
        p.add_term(Word(vec![Letter::new(index, adjoint)]), Complex64::new(1.0, 0.0));
        Ok(p)
    }

    pub fn from_terms<I>(arity: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Word, Complex64)>,
    {
        let mut p = Self::zero(arity);
        for (w, c) in terms {
            if let Some(l) = w.letters().iter().find(|l| l.index >= arity) {
                return Err(Error::LetterOutOfRange {
                    index: l.index + 1,
                    arity,
                });
            }
            p.add_term(w, c);
        }
        Ok(p)
    }

    /// Accumulate `c · word`, dropping the term if it cancels to exactly zero.
    pub fn add_term(&mut self, word: Word, c: Complex64) {
        debug_assert!(word.letters().iter().all(|l| l.index < self.arity));
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.terms.entry(word);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == Complex64::new(0.0, 0.0) {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Length of the longest word; zero for constants and for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().map(|(w, c)| Monomial {
            coefficient: *c,
            word: w.clone(),
        })
    }

    pub fn coefficient(&self, word: &Word) -> Complex64 {
        self.terms.get(word).copied().unwrap_or_default()
    }

    /// Rebuild the term map. Values are canonical by construction, so this is
    /// the identity; it exists so canonicalization can be tested as a property.
    pub fn canonical(&self) -> Self {
        let mut p = Self::zero(self.arity);
        for (w, c) in &self.terms {
            p.add_term(w.clone(), *c);
        }
        p
    }

    /// Conjugate coefficients, reverse words, flip adjoint flags.
    pub fn adjoint(&self) -> Self {
        let mut p = Self::zero(self.arity);
        for (w, c) in &self.terms {
            p.add_term(w.adjoint(), c.conj());
        }
        p
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.adjoint() == *self
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = Self::zero(self.arity);
        for (w, c) in &self.terms {
            p.add_term(w.clone(), c * s);
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.arity);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Σ |c_w|·len(w): a Lipschitz constant for `M ↦ q(M)` on tuples of
    /// contractions, measured in the maximum of the letterwise operator norms.
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|(w, c)| c.norm() * w.len() as f64)
            .sum()
    }

    /// Σ |c_w|, an upper bound for ‖q(M)‖ over contractive tuples.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// Stable short identifier derived from the canonical text.
    pub fn hash_hex(&self) -> String {
        let text = format!("{}|{}", self.arity, self);
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    fn check_same_arity(&self, other: &Self) {
        assert_eq!(
            self.arity, other.arity,
            "polynomial arithmetic requires equal arity"
        );
    }
}

impl Add for &NCPolynomial {
    type Output = NCPolynomial;
    fn add(self, rhs: &NCPolynomial) -> NCPolynomial {
        self.check_same_arity(rhs);
        let mut p = self.clone();
        for (w, c) in &rhs.terms {
            p.add_term(w.clone(), *c);
        }
        p
    }
}

impl Sub for &NCPolynomial {
    type Output = NCPolynomial;
    fn sub(self, rhs: &NCPolynomial) -> NCPolynomial {
        self.check_same_arity(rhs);
        let mut p = self.clone();
        for (w, c) in &rhs.terms {
            p.add_term(w.clone(), -c);
        }
        p
    }
}

impl Mul for &NCPolynomial {
    type Output = NCPolynomial;
    fn mul(self, rhs: &NCPolynomial) -> NCPolynomial {
        self.check_same_arity(rhs);
        let mut p = NCPolynomial::zero(self.arity);
        for (wa, ca) in &self.terms {
            for (wb, cb) in &rhs.terms {
                p.add_term(wa.concat(wb), ca * cb);
            }
        }
        p
    }
}

impl Neg for &NCPolynomial {
    type Output = NCPolynomial;
    fn neg(self) -> NCPolynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_letter(arity: usize, l: Letter) -> String {
    let mut s = if arity == 1 {
        "x".to_string()
    } else {
        format!("x{}", l.index + 1)
    };
    if l.adjoint {
        s.push('\'');
    }
    s
}

fn fmt_word(arity: usize, w: &Word) -> String {
    let mut parts: Vec<String> = Vec::new();
    let letters = w.letters();
    let mut i = 0;
    while i < letters.len() {
        let mut j = i + 1;
        while j < letters.len() && letters[j] == letters[i] {
            j += 1;
        }
        let run = j - i;
        let base = fmt_letter(arity, letters[i]);
        if run == 1 {
            parts.push(base);
        } else {
            parts.push(format!("{base}^{run}"));
        }
        i = j;
    }
    parts.join("*")
}

impl fmt::Display for NCPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut out = String::new();
        for (idx, (w, c)) in self.terms.iter().enumerate() {
            // Split into a sign and a body whose coefficient is "positive".
            let (negative, coeff): (bool, Option<String>) = if c.im == 0.0 {
                let m = c.re.abs();
                let lit = if w.is_empty() || m != 1.0 {
                    Some(fmt_real(m))
                } else {
                    None
                };
                (c.re.is_sign_negative(), lit)
            } else if c.re == 0.0 {
                (c.im.is_sign_negative(), Some(format!("{}i", fmt_real(c.im.abs()))))
            } else {
                let sign = if c.im.is_sign_negative() { '-' } else { '+' };
                (
                    false,
                    Some(format!("({}{}{}i)", fmt_real(c.re), sign, fmt_real(c.im.abs()))),
                )
            };
            let body = match (coeff, w.is_empty()) {
                (Some(k), true) => k,
                (Some(k), false) => format!("{}*{}", k, fmt_word(self.arity, w)),
                (None, _) => fmt_word(self.arity, w),
            };
            match (idx, negative) {
                (0, false) => out.push_str(&body),
                (0, true) => {
                    out.push('-');
                    out.push_str(&body);
                }
                (_, false) => {
                    out.push_str(" + ");
                    out.push_str(&body);
                }
                (_, true) => {
                    out.push_str(" - ");
                    out.push_str(&body);
                }
            }
        }
        f.write_str(&out)
    }
}

/// `q_n(x) = Σ_{j=1..n} x*^j x^j + (1 − x x*)`.
///
/// Its maximal norm over contractions is `n + 1`, reached by the forward shift
/// on `C^{n+1}` and by no matrix of smaller size.
pub fn qn_family(n: usize) -> Result<NCPolynomial> {
    if n == 0 {
        return Err(Error::InvalidArgument("q_n requires n >= 1".into()));
    }
    let x = Letter::new(0, false);
    let xs = Letter::new(0, true);
    let one = Complex64::new(1.0, 0.0);
    let mut p = NCPolynomial::one(1);
    p.add_term(Word(vec![x, xs]), -one);
    for j in 1..=n {
        let mut letters = vec![xs; j];
        letters.extend(std::iter::repeat_n(x, j));
        p.add_term(Word(letters), one);
    }
    Ok(p)
}

/// Partial sum `Σ_{n=1..N} 2^{-n} q_n / (n+1)` of a series whose norm is 1 but
/// is never attained on a finite-dimensional contraction.
pub fn qn_series_truncation(terms: usize) -> Result<NCPolynomial> {
    if terms == 0 {
        return Err(Error::InvalidArgument(
            "series truncation requires N >= 1".into(),
        ));
    }
    let mut acc = NCPolynomial::zero(1);
    for n in 1..=terms {
        let w = 0.5f64.powi(n as i32) / (n as f64 + 1.0);
        acc = &acc + &qn_family(n)?.scale(Complex64::new(w, 0.0));
    }
    Ok(acc)
}

/// Mass of the omitted tail, `Σ_{n>N} 2^{-n} = 2^{-N}`, which bounds the norm
/// of the remainder of the series on contractions.
pub fn series_tail_mass(terms: usize) -> f64 {
    0.5f64.powi(terms as i32)
}

/// All words of length at most `degree` in `arity` letters and their adjoints,
/// in canonical order.
pub fn all_words(arity: usize, degree: usize) -> Vec<Word> {
    let alphabet: Vec<Letter> = (0..arity)
        .flat_map(|i| [Letter::new(i, false), Letter::new(i, true)])
        .collect();
    let mut out = vec![Word::unit()];
    let mut frontier = vec![Word::unit()];
    for _ in 0..degree {
        let mut next = Vec::with_capacity(frontier.len() * alphabet.len());
        for w in &frontier {
            for &l in &alphabet {
                let mut v = w.0.clone();
                v.push(l);
                next.push(Word(v));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.sort();
    out
}

/// A polynomial with standard complex Gaussian coefficients on every word of
/// length at most `degree`, each word kept with probability `density`. The
/// top-degree part is never empty.
pub fn random_polynomial<R: Rng + ?Sized>(
    arity: usize,
    degree: usize,
    density: f64,
    rng: &mut R,
) -> NCPolynomial {
    let mut p = NCPolynomial::zero(arity);
    let words = all_words(arity, degree);
    let mut gauss = || -> f64 { StandardNormal.sample(rng) };
    let mut top: Vec<&Word> = Vec::new();
    let mut keep = Vec::with_capacity(words.len());
    for w in &words {
        keep.push(gauss().abs() < density * 3.0);
        if w.len() == degree {
            top.push(w);
        }
    }
    for (w, k) in words.iter().zip(keep) {
        if k {
            p.add_term(w.clone(), Complex64::new(gauss(), gauss()));
        }
    }
    if p.degree() < degree {
        let idx = (gauss().abs() * 1e6) as usize % top.len();
        p.add_term(top[idx].clone(), Complex64::new(gauss(), gauss()));
    }
    p
}
