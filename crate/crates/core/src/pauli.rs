//! Pauli-string operator algebra.
//!
//! Every Hamiltonian and observable in the crate is an [`OperatorSum`]: a
//! linear combination of [`PauliString`]s over `n_sites` qubits. Operators are
//! applied to [`StateVector`]s matrix-free by bit manipulation; [`to_dense`]
//! exists only as an oracle for small systems.
//!
//! Conventions: `Z|0> = +|0>`, `Z|1> = -|1>`, and qubit 0 is the least
//! significant bit of a basis-state index.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix used by every oracle path.
pub type DMat = DMatrix<Complex64>;

/// Coefficients below this magnitude are dropped by [`OperatorSum::simplify`].
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Largest qubit count accepted by [`to_dense`].
pub const DENSE_QUBIT_LIMIT: usize = 14;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Single-site product `self * other` as `(i^k, result)`; `None` is the identity.
    fn mul(self, other: Pauli) -> (u8, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (X, X) | (Y, Y) | (Z, Z) => (0, None),
            (X, Y) => (1, Some(Z)),
            (Y, X) => (3, Some(Z)),
            (Y, Z) => (1, Some(X)),
            (Z, Y) => (3, Some(X)),
            (Z, X) => (1, Some(Y)),
            (X, Z) => (3, Some(Y)),
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// A coefficient times a tensor product of single-site Paulis. Identity sites
/// are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub coeff: Complex64,
    ops: BTreeMap<usize, Pauli>,
}

impl PauliString {
    pub fn identity(coeff: impl Into<Complex64>) -> Self {
        Self {
            coeff: coeff.into(),
            ops: BTreeMap::new(),
        }
    }

    /// Builds `coeff * P_{s0} P_{s1} ...`. Repeated sites are multiplied in
    /// order, so `[(0, X), (0, Y)]` yields `i Z_0`.
    pub fn new(coeff: impl Into<Complex64>, ops: &[(usize, Pauli)]) -> Self {
        let mut out = Self::identity(coeff);
        for &(site, p) in ops {
            out = pauli_mul(&out, &Self::single(site, p));
        }
        out
    }

    pub fn single(site: usize, p: Pauli) -> Self {
        let mut ops = BTreeMap::new();
        ops.insert(site, p);
        Self {
            coeff: Complex64::new(1.0, 0.0),
            ops,
        }
    }

    pub fn ops(&self) -> &BTreeMap<usize, Pauli> {
        &self.ops
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.ops.keys().next_back().copied()
    }

    pub fn scaled(&self, factor: impl Into<Complex64>) -> Self {
        Self {
            coeff: self.coeff * factor.into(),
            ops: self.ops.clone(),
        }
    }

    pub fn with_coeff(&self, coeff: impl Into<Complex64>) -> Self {
        Self {
            coeff: coeff.into(),
            ops: self.ops.clone(),
        }
    }

    pub fn dagger(&self) -> Self {
        Self {
            coeff: self.coeff.conj(),
            ops: self.ops.clone(),
        }
    }

    /// Two Pauli strings commute iff they differ non-trivially on an even
    /// number of sites.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let clashes = self
            .ops
            .iter()
            .filter(|(site, p)| other.ops.get(site).is_some_and(|q| q != *p))
            .count();
        clashes % 2 == 0
    }

    /// Relabels sites through `f`; `f` must be injective on the support.
    pub fn map_sites(&self, f: impl Fn(usize) -> usize) -> Self {
        Self {
            coeff: self.coeff,
            ops: self.ops.iter().map(|(&s, &p)| (f(s), p)).collect(),
        }
    }

    /// `(x_mask, z_mask, phase)` with `self = phase * X^x Z^z`.
    pub fn masks(&self) -> (u64, u64, Complex64) {
        let (mut x, mut z, mut n_y) = (0u64, 0u64, 0u8);
        for (&site, &p) in &self.ops {
            let bit = 1u64 << site;
            match p {
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    n_y = (n_y + 1) % 4;
                }
            }
        }
        (x, z, self.coeff * i_pow(n_y))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:+.6}{:+.6}i)", self.coeff.re, self.coeff.im)?;
        if self.ops.is_empty() {
            return write!(f, " I");
        }
        for (site, p) in &self.ops {
            write!(f, " {}{}", p.letter(), site)?;
        }
        Ok(())
    }
}

/// Product of two Pauli strings with the accumulated phase.
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> PauliString {
    let mut ops = a.ops.clone();
    let mut k = 0u8;
    for (&site, &q) in &b.ops {
        match ops.get(&site).copied() {
            None => {
                ops.insert(site, q);
            }
            Some(p) => {
                let (phase, r) = p.mul(q);
                k = (k + phase) % 4;
                match r {
                    Some(r) => {
                        ops.insert(site, r);
                    }
                    None => {
                        ops.remove(&site);
                    }
                }
            }
        }
    }
    PauliString {
        coeff: a.coeff * b.coeff * i_pow(k),
        ops,
    }
}

impl Mul for &PauliString {
    type Output = PauliString;
    fn mul(self, rhs: &PauliString) -> PauliString {
        pauli_mul(self, rhs)
    }
}

/// A linear combination of Pauli strings on `n_sites` qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSum {
    n_sites: usize,
    terms: Vec<PauliString>,
}

impl OperatorSum {
    pub fn zero(n_sites: usize) -> Self {
        Self {
            n_sites,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(n_sites: usize, terms: Vec<PauliString>) -> Result<Self> {
        if n_sites == 0 || n_sites > 64 {
            return Err(Error::InvalidArgument(format!(
                "n_sites must be in 1..=64, got {n_sites}"
            )));
        }
        if let Some(bad) = terms
            .iter()
            .filter_map(|t| t.max_site())
            .find(|&s| s >= n_sites)
        {
            return Err(Error::DimensionMismatch {
                expected: n_sites,
                found: bad + 1,
            });
        }
        Ok(Self { n_sites, terms })
    }

    /// Appends a term. Panics when the term touches a site outside the register.
    pub fn push(&mut self, term: PauliString) {
        if let Some(s) = term.max_site() {
            assert!(s < self.n_sites, "site {s} out of range for {} qubits", self.n_sites);
        }
        self.terms.push(term);
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges equal strings, drops coefficients below [`PRUNE_THRESHOLD`] and
    /// sorts terms by their site map.
    pub fn simplify(&self) -> Self {
        let mut merged: BTreeMap<Vec<(usize, Pauli)>, Complex64> = BTreeMap::new();
        for t in &self.terms {
            let key: Vec<(usize, Pauli)> = t.ops.iter().map(|(&s, &p)| (s, p)).collect();
            *merged.entry(key).or_default() += t.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= PRUNE_THRESHOLD)
            .map(|(key, coeff)| PauliString {
                coeff,
                ops: key.into_iter().collect(),
            })
            .collect();
        Self {
            n_sites: self.n_sites,
            terms,
        }
    }

    pub fn scaled(&self, factor: impl Into<Complex64>) -> Self {
        let f = factor.into();
        Self {
            n_sites: self.n_sites,
            terms: self.terms.iter().map(|t| t.scaled(f)).collect(),
        }
    }

    pub fn dagger(&self) -> Self {
        Self {
            n_sites: self.n_sites,
            terms: self.terms.iter().map(PauliString::dagger).collect(),
        }
    }

    pub fn map_sites(&self, f: impl Fn(usize) -> usize) -> Self {
        Self {
            n_sites: self.n_sites,
            terms: self.terms.iter().map(|t| t.map_sites(&f)).collect(),
        }
    }

    /// Operator product `self * other`, simplified.
    pub fn product(&self, other: &OperatorSum) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zero(self.n_sites);
        for a in &self.terms {
            for b in &other.terms {
                out.terms.push(pauli_mul(a, b));
            }
        }
        Ok(out.simplify())
    }

    /// Largest imaginary part among simplified coefficients. Pauli strings are
    /// Hermitian, so a simplified sum is Hermitian iff this vanishes.
    pub fn hermiticity_defect(&self) -> f64 {
        self.simplify()
            .terms
            .iter()
            .map(|t| t.coeff.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Sum of coefficient magnitudes; an upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }

    /// True when every pair of terms commutes.
    pub fn terms_commute(&self) -> bool {
        self.terms
            .iter()
            .enumerate()
            .all(|(i, a)| self.terms[i + 1..].iter().all(|b| a.commutes_with(b)))
    }

    /// Largest coefficient magnitude of `simplify(self - other)`.
    pub fn max_difference(&self, other: &OperatorSum) -> f64 {
        (self.clone() - other.clone())
            .simplify()
            .terms
            .iter()
            .map(|t| t.coeff.norm())
            .fold(0.0, f64::max)
    }

    /// Pre-processes the sum for repeated matrix-free application.
    pub fn compile(&self) -> CompiledOperator {
        CompiledOperator::new(self)
    }

    fn check_same(&self, other: &OperatorSum) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: other.n_sites,
            });
        }
        Ok(())
    }
}

impl Add for OperatorSum {
    type Output = OperatorSum;
    fn add(mut self, rhs: OperatorSum) -> OperatorSum {
        assert_eq!(self.n_sites, rhs.n_sites, "operator sums on different registers");
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for OperatorSum {
    type Output = OperatorSum;
    fn sub(self, rhs: OperatorSum) -> OperatorSum {
        self + rhs.scaled(-1.0)
    }
}

impl Neg for OperatorSum {
    type Output = OperatorSum;
    fn neg(self) -> OperatorSum {
        self.scaled(-1.0)
    }
}

impl fmt::Display for OperatorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// `simplify(ab - ba)`. Commuting string pairs cancel exactly; anticommuting
/// pairs contribute `2ab`.
pub fn commutator(a: &OperatorSum, b: &OperatorSum) -> Result<OperatorSum> {
    a.check_same(b)?;
    let mut out = OperatorSum::zero(a.n_sites);
    for s in &a.terms {
        for t in &b.terms {
            if !s.commutes_with(t) {
                out.terms.push(pauli_mul(s, t).scaled(2.0));
            }
        }
    }
    Ok(out.simplify())
}

/// Dense matrix of `op` in the computational basis.
pub fn to_dense(op: &OperatorSum) -> Result<DMat> {
    if op.n_sites > DENSE_QUBIT_LIMIT {
        return Err(Error::SizeGuard {
            what: "to_dense",
            n_sites: op.n_sites,
            limit: DENSE_QUBIT_LIMIT,
        });
    }
    let dim = 1usize << op.n_sites;
    let mut m = DMat::zeros(dim, dim);
    for t in &op.terms {
        let (x, z, c) = t.masks();
        for b in 0..dim as u64 {
            let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[((b ^ x) as usize, b as usize)] += c * sign;
        }
    }
    Ok(m)
}

/// `op |psi>` without forming a matrix.
pub fn apply_to_state(op: &OperatorSum, psi: &StateVector) -> Result<StateVector> {
    if op.n_sites != psi.n_sites {
        return Err(Error::DimensionMismatch {
            expected: op.n_sites,
            found: psi.n_sites,
        });
    }
    let compiled = op.compile();
    let mut out = vec![Complex64::new(0.0, 0.0); psi.amps.len()];
    compiled.apply_into(&psi.amps, &mut out);
    Ok(StateVector {
        n_sites: psi.n_sites,
        amps: out,
    })
}

#[derive(Clone, Debug)]
struct FlipGroup {
    x: u64,
    /// `(z_mask, phase-adjusted coefficient)`
    diag: Vec<(u64, Complex64)>,
}

/// An [`OperatorSum`] grouped by bit-flip pattern for fast repeated matvecs.
#[derive(Clone, Debug)]
pub struct CompiledOperator {
    n_sites: usize,
    groups: Vec<FlipGroup>,
}

impl CompiledOperator {
    fn new(op: &OperatorSum) -> Self {
        let mut by_flip: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
        for t in &op.simplify().terms {
            let (x, z, c) = t.masks();
            by_flip.entry(x).or_default().push((z, c));
        }
        Self {
            n_sites: op.n_sites,
            groups: by_flip
                .into_iter()
                .map(|(x, diag)| FlipGroup { x, diag })
                .collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn is_zero(&self) -> bool {
        self.groups.is_empty()
    }

    /// `out = op * input`. Each output amplitude is accumulated independently,
    /// so the result does not depend on any partitioning of the index range.
    pub fn apply_into(&self, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), 1 << self.n_sites);
        debug_assert_eq!(out.len(), input.len());
        for (b, slot) in out.iter_mut().enumerate() {
            let b = b as u64;
            let mut acc = Complex64::new(0.0, 0.0);
            for g in &self.groups {
                let src = b ^ g.x;
                let mut w = Complex64::new(0.0, 0.0);
                for &(z, c) in &g.diag {
                    if (src & z).count_ones() % 2 == 0 {
                        w += c;
                    } else {
                        w -= c;
                    }
                }
                acc += w * input[src as usize];
            }
            *slot = acc;
        }
    }
}

/// Amplitudes over the `2^n_sites` computational basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amps(n_sites: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_sites == 0 || n_sites > 40 || amps.len() != 1usize << n_sites {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes do not match {} qubits",
                amps.len(),
                n_sites
            )));
        }
        Ok(Self { n_sites, amps })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_sites} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::from_amps(n_sites, amps)
    }

    /// Product state from per-qubit `(amp0, amp1)` pairs, qubit 0 first.
    pub fn product(qubits: &[(Complex64, Complex64)]) -> Result<Self> {
        let n = qubits.len();
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for &(a0, a1) in qubits.iter().rev() {
            // qubit q is bit q: the earliest qubit ends up least significant
            let mut next = Vec::with_capacity(amps.len() * 2);
            for &a in &amps {
                next.push(a * a0);
                next.push(a * a1);
            }
            amps = next;
        }
        Self::from_amps(n, amps)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|`
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm()
    }

    /// `alpha * self + beta * other`
    pub fn combine(&self, alpha: Complex64, other: &StateVector, beta: Complex64) -> Result<Self> {
        if self.n_sites != other.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: other.n_sites,
            });
        }
        Ok(Self {
            n_sites: self.n_sites,
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub fn to_column(&self) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_column_slice(&self.amps)
    }

    pub fn from_column(n_sites: usize, v: &nalgebra::DVector<Complex64>) -> Result<Self> {
        Self::from_amps(n_sites, v.iter().copied().collect())
    }
}
