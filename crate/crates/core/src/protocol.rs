//! Piecewise-constant drives.

use crate::error::{Error, Result};
use crate::pauli::OperatorSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    /// Part of the strong drive `H_0(t)`; frozen out in the interaction picture.
    Resonant,
    /// Part of the weak drive `V(t)`.
    Weak,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub hamiltonian: OperatorSum,
    pub duration: f64,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn new(hamiltonian: OperatorSum, duration: f64, kind: SegmentKind) -> Self {
        Self {
            hamiltonian,
            duration,
            kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveProtocol {
    segments: Vec<Segment>,
    period: f64,
}

impl DriveProtocol {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidArgument("protocol needs at least one segment".into()))?;
        let n = first.hamiltonian.n_sites();
        for s in &segments {
            if s.hamiltonian.n_sites() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.hamiltonian.n_sites(),
                });
            }
            if !(s.duration.is_finite() && s.duration >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "segment duration must be non-negative, got {}",
                    s.duration
                )));
            }
        }
        let period = segments.iter().map(|s| s.duration).sum();
        Ok(Self { segments, period })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_sites(&self) -> usize {
        self.segments[0].hamiltonian.n_sites()
    }

    /// Start times of every segment within one period.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                start
            })
            .collect()
    }

    /// Index of the segment active at `t` (taken modulo the period).
    pub fn segment_at(&self, t: f64) -> usize {
        let t = t.rem_euclid(self.period);
        let mut end = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            end += s.duration;
            if t < end {
                return i;
            }
        }
        self.segments.len() - 1
    }
}
