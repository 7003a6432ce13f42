//! Measured quantities: expectation values, half-ladder entanglement, the odd
//! observable series and prethermal plateau detection.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{CompiledOperator, OperatorSum, StateVector};

/// Largest tolerated imaginary part of an expectation value.
pub const EXPECTATION_IMAG_TOLERANCE: f64 = 1e-10;

/// `O^s_norm` is reported missing when `|<O_odd(mT)>|` falls below this.
pub const NORMALIZATION_GUARD: f64 = 1e-6;

/// Observables recorded at one sample time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub m: usize,
    pub t: f64,
    /// Offset within the period, `t - m T`.
    pub offset: f64,
    pub o_odd: f64,
    pub o_odd2: f64,
    /// Half-ladder entanglement entropy in nats.
    pub s_ent: f64,
    pub energy_density: f64,
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
}

/// `<psi| op |psi>` for Hermitian `op`.
pub fn expectation(op: &OperatorSum, psi: &StateVector) -> Result<f64> {
    if op.n_sites() != psi.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: psi.n_sites(),
            found: op.n_sites(),
        });
    }
    expectation_compiled(&op.compile(), psi)
}

/// [`expectation`] for an operator compiled once and reused.
pub fn expectation_compiled(op: &CompiledOperator, psi: &StateVector) -> Result<f64> {
    if op.n_sites() != psi.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: psi.n_sites(),
            found: op.n_sites(),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); psi.amps().len()];
    op.apply_into(psi.amps(), &mut out);
    let value: Complex64 = psi.amps().iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
    if value.im.abs() > EXPECTATION_IMAG_TOLERANCE * value.norm().max(1.0) {
        return Err(Error::NonHermitian { imag: value.im });
    }
    Ok(value.re)
}

/// `<psi| d0 |psi> / n_spins`
pub fn energy_density(psi: &StateVector, d0: &OperatorSum, n_spins: usize) -> Result<f64> {
    if n_spins == 0 {
        return Err(Error::InvalidArgument("n_spins must be positive".into()));
    }
    Ok(expectation(d0, psi)? / n_spins as f64)
}

/// Von Neumann entropy (nats) of qubits `[0, cut)`.
pub fn entanglement_entropy(psi: &StateVector, cut: usize) -> Result<f64> {
    let n = psi.n_sites();
    if cut == 0 || cut >= n {
        return Err(Error::InvalidArgument(format!(
            "cut must lie in (0, {n}), got {cut}"
        )));
    }
    let deviation = (psi.norm() - 1.0).abs();
    if deviation > 1e-8 {
        return Err(Error::NotNormalized { deviation });
    }
    let rows = 1usize << cut;
    let cols = 1usize << (n - cut);
    // column-major: entry (low, high) sits at low + rows * high = basis index
    let m = DMatrix::from_column_slice(rows, cols, psi.amps());
    let entropy = m
        .singular_values()
        .iter()
        .map(|s| s * s)
        .filter(|&p| p > 1e-14)
        .map(|p| -p * p.ln())
        .sum::<f64>();
    Ok(entropy.max(0.0))
}

/// `(L ln 2 - 1) / 2`
pub fn page_value(l: usize) -> f64 {
    (l as f64 * std::f64::consts::LN_2 - 1.0) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OddObservable {
    /// `S^x_{L/2-1} - S^x_{L/2}`
    Upper,
    /// `sigma^y_{L/2-1} - sigma^y_{L/2}`
    Lower,
}

impl OddObservable {
    pub fn value(self, r: &TrajectoryRecord) -> f64 {
        match self {
            OddObservable::Upper => r.o_odd,
            OddObservable::Lower => r.o_odd2,
        }
    }
}

/// Per-period values of an odd observable at `mT` and `mT + T/2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OddSeries {
    pub m: Vec<usize>,
    pub at_period: Vec<f64>,
    pub at_half: Vec<f64>,
    /// `O(mT) + O(mT + T/2)`
    pub symmetric: Vec<f64>,
    /// `symmetric / |O(mT)|`, `None` below [`NORMALIZATION_GUARD`].
    pub normalized: Vec<Option<f64>>,
}

impl OddSeries {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

fn offset_matches(offset: f64, target: f64, half_period: f64) -> bool {
    (offset - target).abs() <= 1e-9 * half_period.max(1.0)
}

/// Pairs the samples at offsets `0` and `half_period` of every period.
pub fn paired_samples(
    traj: &[TrajectoryRecord],
    half_period: f64,
) -> Result<Vec<(&TrajectoryRecord, &TrajectoryRecord)>> {
    let mut at_zero: BTreeMap<usize, &TrajectoryRecord> = BTreeMap::new();
    let mut at_half: BTreeMap<usize, &TrajectoryRecord> = BTreeMap::new();
    for r in traj {
        if offset_matches(r.offset, 0.0, half_period) {
            at_zero.insert(r.m, r);
        } else if offset_matches(r.offset, half_period, half_period) {
            at_half.insert(r.m, r);
        }
    }
    let mut out = Vec::with_capacity(at_zero.len());
    for (m, zero) in &at_zero {
        let half = at_half
            .get(m)
            .ok_or(Error::MissingOffset { offset: half_period })?;
        out.push((*zero, *half));
    }
    if out.is_empty() && !traj.is_empty() {
        return Err(Error::MissingOffset { offset: 0.0 });
    }
    Ok(out)
}

pub fn odd_observable_series(
    traj: &[TrajectoryRecord],
    half_period: f64,
    which: OddObservable,
) -> Result<OddSeries> {
    let mut s = OddSeries::default();
    for (zero, half) in paired_samples(traj, half_period)? {
        let (a, b) = (which.value(zero), which.value(half));
        let sym = a + b;
        s.m.push(zero.m);
        s.at_period.push(a);
        s.at_half.push(b);
        s.symmetric.push(sym);
        s.normalized.push((a.abs() >= NORMALIZATION_GUARD).then(|| sym / a.abs()));
    }
    Ok(s)
}

/// Outcome of [`plateau_detect`]; indices refer to the input series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plateau {
    /// Samples `start..=end` lie in windows with small slope.
    Found { start: usize, end: usize },
    NoneFound,
    /// The series is identically zero; the whole range is returned.
    Degenerate { start: usize, end: usize },
}

impl Plateau {
    pub fn range(&self) -> Option<(usize, usize)> {
        match *self {
            Plateau::Found { start, end } | Plateau::Degenerate { start, end } => Some((start, end)),
            Plateau::NoneFound => None,
        }
    }

    /// Number of samples covered, zero when none was found.
    pub fn len(&self) -> usize {
        self.range().map_or(0, |(a, b)| b - a + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Least-squares slope per sample of `ys` against `0, 1, 2, ...`.
pub fn window_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Sliding-window plateau search: the plateau starts at the first window
/// whose least-squares slope (per sample) is below `slope_tol` in magnitude
/// and ends with the last window of that contiguous run.
pub fn plateau_detect(series: &[f64], window: usize, slope_tol: f64) -> Result<Plateau> {
    if window < 2 {
        return Err(Error::InvalidArgument(format!("window must be >= 2, got {window}")));
    }
    if series.len() < 3 * window {
        return Err(Error::InvalidArgument(format!(
            "series of length {} is shorter than three windows of {window}",
            series.len()
        )));
    }
    if series.iter().all(|&v| v == 0.0) {
        return Ok(Plateau::Degenerate {
            start: 0,
            end: series.len() - 1,
        });
    }
    let flat: Vec<bool> = series
        .windows(window)
        .map(|w| window_slope(w).abs() < slope_tol)
        .collect();
    let Some(first) = flat.iter().position(|&f| f) else {
        return Ok(Plateau::NoneFound);
    };
    let run = flat[first..].iter().take_while(|&&f| f).count();
    Ok(Plateau::Found {
        start: first,
        end: first + run - 1 + window - 1,
    })
}

/// Mean of `values[start..=end]`.
pub fn window_mean(values: &[f64], start: usize, end: usize) -> f64 {
    let slice = &values[start..=end];
    slice.iter().sum::<f64>() / slice.len() as f64
}
