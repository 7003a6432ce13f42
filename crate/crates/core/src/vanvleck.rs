//! Van Vleck high-frequency expansion of the interaction-picture drive.
//!
//! In the interaction picture the resonant propagator is frozen whenever the
//! weak drive acts, so over the base period `P = 2T` the drive is
//!
//! ```text
//! H_int(t) = sum_w chi_w(t) A_w,    A_w = U_0(t_w)^dagger V_w U_0(t_w)
//! ```
//!
//! with window indicators `chi_w`. Every Fourier component, effective term and
//! kick is then a fixed combination of the `A_w`, their commutators and nested
//! commutators, with scalar weights. The weights come either from truncated
//! Fourier sums or exactly from integrals of the piecewise-linear profiles
//! `k_w(t)`, the zero-mean antiderivatives of `chi_w - d_w / P`.
//!
//! With `H(t) = sum_m V_m e^{-i m w t}`, `w = 2 pi / P`:
//!
//! ```text
//! D^[1] = sum_{m != 0} [V_{-m}, V_m] / (2 m w)
//! D^[2] = -sum_{m != 0} [V_m, [V_{-m}, V_0]] / (2 m^2 w^2)
//!         + sum_{m, m' != 0, m + m' != 0} [V_m, [V_{m'}, V_{-m-m'}]] / (3 m m' w^2)
//! K^[1] = i sum_{m != 0} V_m e^{-i m w t} / (m w)
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::dense::{commutator, dense_exp, expm_hermitian};
use crate::error::{Error, Result};
use crate::ladder::{build_protocol, LadderConfig};
use crate::pauli::{to_dense, DMat};
use crate::protocol::{DriveProtocol, SegmentKind};
use crate::propagator::{dense_evolution_operator, u0_at};

/// Dense van Vleck constructions refuse more qubits than this.
pub const VANVLECK_QUBITS: usize = 12;

/// Default Fourier cutoff of the truncated route.
pub const DEFAULT_M_MAX: usize = 64;

/// Default bound on the Fourier tail `sum_{|m| > m_max} |V_m| / (|m| w)`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Interval of the base period on which the weak drive acts with a frozen
/// resonant propagator.
#[derive(Clone, Debug)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    /// `U_0^dagger V U_0` on this window.
    pub op: DMat,
}

impl Window {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Fourier data of the interaction-picture drive over its base period.
#[derive(Clone, Debug)]
pub struct FourierTable {
    windows: Vec<Window>,
    base_period: f64,
    m_max: usize,
    breakpoints: Vec<f64>,
    profile_means: Vec<f64>,
    pairs: OnceLock<Vec<Vec<DMat>>>,
}

impl FourierTable {
    /// Builds the windows from `n_base` periods of `protocol`, accumulating
    /// the resonant segments into `U_0`.
    pub fn from_protocol(protocol: &DriveProtocol, n_base: usize, m_max: usize) -> Result<Self> {
        let n = protocol.n_sites();
        if n > VANVLECK_QUBITS {
            return Err(Error::SizeGuard {
                what: "FourierTable",
                n_sites: n,
                limit: VANVLECK_QUBITS,
            });
        }
        if n_base == 0 {
            return Err(Error::InvalidArgument("n_base must be positive".into()));
        }
        let dim = 1usize << n;
        let mut u0 = DMat::identity(dim, dim);
        let mut windows = Vec::new();
        let mut t = 0.0;
        for _ in 0..n_base {
            for seg in protocol.segments() {
                match seg.kind {
                    SegmentKind::Resonant => {
                        u0 = dense_exp(&seg.hamiltonian, seg.duration)? * u0;
                    }
                    SegmentKind::Weak => {
                        if seg.duration > 0.0 && !seg.hamiltonian.is_empty() {
                            let v = to_dense(&seg.hamiltonian)?;
                            windows.push(Window {
                                start: t,
                                end: t + seg.duration,
                                op: u0.adjoint() * v * &u0,
                            });
                        }
                    }
                }
                t += seg.duration;
            }
        }
        Self::from_windows(windows, t, m_max)
    }

    /// The ladder drive over its base period `2T`.
    pub fn ladder(cfg: &LadderConfig) -> Result<Self> {
        Self::from_protocol(&build_protocol(cfg)?, 2, DEFAULT_M_MAX)
    }

    pub fn from_windows(windows: Vec<Window>, base_period: f64, m_max: usize) -> Result<Self> {
        if !(base_period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "base period must be positive, got {base_period}"
            )));
        }
        let mut dim = None;
        for w in &windows {
            if !(0.0 <= w.start && w.start <= w.end && w.end <= base_period) {
                return Err(Error::InvalidArgument(format!(
                    "window [{}, {}] outside [0, {base_period}]",
                    w.start, w.end
                )));
            }
            let d = w.op.nrows();
            if *dim.get_or_insert(d) != d || w.op.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap_or(d),
                    found: d,
                });
            }
        }
        let mut breakpoints = vec![0.0, base_period];
        for w in &windows {
            breakpoints.push(w.start);
            breakpoints.push(w.end);
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * base_period);
        let profile_means = windows
            .iter()
            .map(|w| {
                let d = w.duration();
                (d * d / 2.0 + d * (base_period - w.end)) / base_period - d / 2.0
            })
            .collect();
        Ok(Self {
            windows,
            base_period,
            m_max,
            breakpoints,
            profile_means,
            pairs: OnceLock::new(),
        })
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn base_period(&self) -> f64 {
        self.base_period
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn with_m_max(mut self, m_max: usize) -> Self {
        self.m_max = m_max;
        self
    }

    /// Angular frequency `2 pi / P` of the base period.
    pub fn frequency(&self) -> f64 {
        2.0 * PI / self.base_period
    }

    fn dim(&self) -> usize {
        self.windows.first().map_or(1, |w| w.op.nrows())
    }

    fn zero(&self) -> DMat {
        DMat::zeros(self.dim(), self.dim())
    }

    /// `(1/P) int_w e^{i m w t} dt`
    pub fn window_coefficient(&self, w: usize, m: i64) -> Complex64 {
        let win = &self.windows[w];
        if m == 0 {
            return c(win.duration() / self.base_period);
        }
        let k = m as f64 * self.frequency();
        let diff = Complex64::from_polar(1.0, k * win.end) - Complex64::from_polar(1.0, k * win.start);
        diff / (Complex64::new(0.0, k) * self.base_period)
    }

    /// `V_m = (1/P) int_0^P H_int(t) e^{i m w t} dt`
    pub fn component(&self, m: i64) -> DMat {
        let mut out = self.zero();
        for (i, w) in self.windows.iter().enumerate() {
            out += &w.op * self.window_coefficient(i, m);
        }
        out
    }

    /// `V_m` for `|m| <= m_max`.
    pub fn components(&self) -> BTreeMap<i64, DMat> {
        let m = self.m_max as i64;
        (-m..=m).map(|k| (k, self.component(k))).collect()
    }

    /// `H_int(t)` for `t` taken modulo the base period.
    pub fn drive_at(&self, t: f64) -> DMat {
        let t = t.rem_euclid(self.base_period);
        let mut out = self.zero();
        for w in &self.windows {
            if w.start <= t && t < w.end {
                out += &w.op;
            }
        }
        out
    }

    fn indicator(&self, w: usize, t: f64) -> f64 {
        let win = &self.windows[w];
        let t = t.rem_euclid(self.base_period);
        if win.start <= t && t < win.end {
            1.0
        } else {
            0.0
        }
    }

    /// Zero-mean antiderivative of `chi_w - d_w / P`; continuous and periodic.
    pub fn profile(&self, w: usize, t: f64) -> f64 {
        let win = &self.windows[w];
        let t = t.rem_euclid(self.base_period);
        let d = win.duration();
        (t - win.start).clamp(0.0, d) - d * t / self.base_period - self.profile_means[w]
    }

    /// `int_lo^hi f` split at the window boundaries; exact for piecewise
    /// polynomials of degree <= 9.
    fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut cuts = vec![lo];
        cuts.extend(self.breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wgt) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                total += wgt * half * f(mid + half * x);
            }
        }
        total
    }

    fn mean(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.integrate(0.0, self.base_period, f) / self.base_period
    }

    /// `[A_i, A_j]` for all window pairs, computed once.
    fn pair_commutators(&self) -> &[Vec<DMat>] {
        self.pairs.get_or_init(|| self.compute_pair_commutators())
    }

    fn compute_pair_commutators(&self) -> Vec<Vec<DMat>> {
        let n = self.windows.len();
        let mut out = vec![vec![self.zero(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let cm = commutator(&self.windows[i].op, &self.windows[j].op);
                out[j][i] = -&cm;
                out[i][j] = cm;
            }
        }
        out
    }

    /// `sum_i [A_i, sum_{jl} w_ijl [A_j, A_l]]`
    fn nested(&self, weights: &[Vec<Vec<Complex64>>]) -> DMat {
        let pairs = self.pair_commutators();
        let n = self.windows.len();
        let mut out = self.zero();
        for i in 0..n {
            let mut inner = self.zero();
            for j in 0..n {
                for l in 0..n {
                    if j != l && weights[i][j][l] != c(0.0) {
                        inner += &pairs[j][l] * weights[i][j][l];
                    }
                }
            }
            out += commutator(&self.windows[i].op, &inner);
        }
        out
    }

    fn first_order_weights(&self, route: Route) -> Vec<Vec<Complex64>> {
        let n = self.windows.len();
        let mut s = vec![vec![c(0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                s[i][j] = match route {
                    Route::Exact => {
                        let w = &self.windows[j];
                        let integral = self.integrate(w.start, w.end, |t| self.profile(i, t));
                        Complex64::new(0.0, 0.5 * integral / self.base_period)
                    }
                    Route::Truncated(m_max) => {
                        let omega = self.frequency();
                        (1..=m_max as i64)
                            .map(|m| {
                                let mf = m as f64 * omega;
                                (self.window_coefficient(i, -m) * self.window_coefficient(j, m)
                                    - self.window_coefficient(i, m) * self.window_coefficient(j, -m))
                                    / (2.0 * mf)
                            })
                            .sum()
                    }
                };
            }
        }
        s
    }

    fn second_order_weights(&self, route: Route) -> Vec<Vec<Vec<Complex64>>> {
        let n = self.windows.len();
        let p = self.base_period;
        let mut w = vec![vec![vec![c(0.0); n]; n]; n];
        match route {
            Route::Exact => {
                let mut pair_mean = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        pair_mean[i][j] = self.mean(|t| self.profile(i, t) * self.profile(j, t));
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let win = &self.windows[l];
                            let triple = self.integrate(win.start, win.end, |t| {
                                self.profile(i, t) * self.profile(j, t)
                            }) / p;
                            w[i][j][l] =
                                c(-pair_mean[i][j] * win.duration() / p / 6.0 - triple / 3.0);
                        }
                    }
                }
            }
            Route::Truncated(m_max) => {
                let m = m_max as i64;
                let omega = self.frequency();
                let coeff: Vec<Vec<Complex64>> = (0..n)
                    .map(|k| (-2 * m..=2 * m).map(|q| self.window_coefficient(k, q)).collect())
                    .collect();
                let at = |k: usize, q: i64| coeff[k][(q + 2 * m) as usize];
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            let mut acc = c(0.0);
                            for a in (-m..=m).filter(|&a| a != 0) {
                                let af = a as f64 * omega;
                                acc -= at(i, a) * at(j, -a) * at(l, 0) / (2.0 * af * af);
                                for b in (-m..=m).filter(|&b| b != 0 && a + b != 0) {
                                    if (a + b).abs() > m {
                                        continue;
                                    }
                                    let bf = b as f64 * omega;
                                    acc += at(i, a) * at(j, b) * at(l, -a - b) / (3.0 * af * bf);
                                }
                            }
                            w[i][j][l] = acc;
                        }
                    }
                }
            }
        }
        w
    }

    /// Order-`order` van Vleck term by the chosen route.
    pub fn effective_term(&self, order: usize, route: Route) -> Result<DMat> {
        match order {
            0 => Ok(self.component(0)),
            1 => {
                let s = self.first_order_weights(route);
                let pairs = self.pair_commutators();
                let mut out = self.zero();
                for i in 0..self.windows.len() {
                    for j in 0..self.windows.len() {
                        if i != j {
                            out += &pairs[i][j] * s[i][j];
                        }
                    }
                }
                Ok(out)
            }
            2 => Ok(self.nested(&self.second_order_weights(route))),
            _ => Err(Error::InvalidArgument(format!(
                "van Vleck order must be 0, 1 or 2, got {order}"
            ))),
        }
    }

    /// Upper bound on `sum_{|m| > m_max} |V_m| / (|m| w)` from
    /// `|c_w(m)| <= 2 / (|m| w P)` and `sum_{m > M} 1/m^2 <= 1/M`.
    pub fn tail_estimate(&self, m_max: usize) -> f64 {
        let omega = self.frequency();
        let total: f64 = self.windows.iter().map(|w| w.op.norm()).sum();
        4.0 * total / (omega * omega * self.base_period * m_max.max(1) as f64)
    }

    /// Smallest cutoff whose [`tail_estimate`](Self::tail_estimate) is below `tolerance`.
    pub fn required_cutoff(&self, tolerance: f64) -> f64 {
        self.tail_estimate(1) / tolerance
    }

    /// `K^[order](t)`, Hermitian, with the frame rotation `e^{-i K}`.
    pub fn kick(&self, t: f64, order: usize, route: Route) -> Result<DMat> {
        match (order, route) {
            (1, Route::Exact) => {
                let mut out = self.zero();
                for (i, w) in self.windows.iter().enumerate() {
                    out += &w.op * c(self.profile(i, t));
                }
                Ok(out)
            }
            (1, Route::Truncated(m_max)) => {
                let omega = self.frequency();
                let mut out = self.zero();
                for m in (-(m_max as i64)..=m_max as i64).filter(|&m| m != 0) {
                    let phase = Complex64::from_polar(1.0, -(m as f64) * omega * t);
                    let factor = Complex64::new(0.0, 1.0) * phase / (m as f64 * omega);
                    out += self.component(m) * factor;
                }
                Ok(out)
            }
            (2, route) => {
                let weights = self.second_kick_weights(t, route);
                let pairs = self.pair_commutators();
                let mut out = self.zero();
                for i in 0..self.windows.len() {
                    for j in 0..self.windows.len() {
                        if i != j {
                            out += &pairs[i][j] * weights[i][j];
                        }
                    }
                }
                Ok(out)
            }
            _ => Err(Error::InvalidArgument(format!(
                "kick order must be 1 or 2, got {order}"
            ))),
        }
    }

    /// Weights of `[A_i, A_j]` in `K^[2](t)`.
    fn second_kick_weights(&self, t: f64, route: Route) -> Vec<Vec<Complex64>> {
        let n = self.windows.len();
        let p = self.base_period;
        let mut out = vec![vec![c(0.0); n]; n];
        match route {
            Route::Exact => {
                // K^[2] = (i/2) sum_ij q_ij [A_i, A_j], q_ij the zero-mean
                // antiderivative of the oscillating part of k_i (chi_j + d_j/P)
                let t = t.rem_euclid(p);
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let dj = self.windows[j].duration() / p;
                        let g = |s: f64| self.profile(i, s) * (self.indicator(j, s) + dj);
                        let g_mean = self.mean(g);
                        let osc = |s: f64| g(s) - g_mean;
                        let q_mean = self.integrate(0.0, p, |s| (p - s) * osc(s)) / p;
                        let q = self.integrate(0.0, t, osc) - q_mean;
                        out[i][j] = Complex64::new(0.0, 0.5 * q);
                    }
                }
            }
            Route::Truncated(m_max) => {
                let m = m_max as i64;
                let omega = self.frequency();
                let iu = Complex64::new(0.0, 1.0);
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let kappa = |q: i64| iu * self.window_coefficient(i, q) / (q as f64 * omega);
                        let mut acc = c(0.0);
                        for pp in (-m..=m).filter(|&pp| pp != 0) {
                            let mut f = iu * kappa(pp) * self.window_coefficient(j, 0);
                            for a in (-m..=m).filter(|&a| a != 0) {
                                let b = pp - a;
                                if b == 0 || b.abs() > m {
                                    continue;
                                }
                                f += 0.5 * iu * kappa(a) * self.window_coefficient(j, b);
                            }
                            let phase = Complex64::from_polar(1.0, -(pp as f64) * omega * t);
                            acc += iu * f * phase / (pp as f64 * omega);
                        }
                        out[i][j] = acc;
                    }
                }
            }
        }
        out
    }

    /// `|int_0^P K^[order](t) dt|` by composite Gauss-Legendre quadrature
    /// aligned with the window boundaries, using at least `min_nodes` nodes.
    pub fn kick_gauge_residual(&self, order: usize, min_nodes: usize) -> Result<f64> {
        let n_intervals = self.breakpoints.len() - 1;
        let per = min_nodes.div_ceil(n_intervals * GAUSS_NODES.len()).max(1);
        let mut acc = self.zero();
        for pair in self.breakpoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let h = (b - a) / per as f64;
            for k in 0..per {
                let lo = a + k as f64 * h;
                let (mid, half) = (lo + 0.5 * h, 0.5 * h);
                for (x, wgt) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                    acc += self.kick(mid + half * x, order, Route::Exact)? * c(wgt * half);
                }
            }
        }
        Ok(crate::dense::spectral_norm(&acc))
    }
}

/// How the scalar weights of the expansion are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Closed-form time integrals; equivalent to an infinite Fourier cutoff.
    Exact,
    /// Fourier sums truncated at `|m| <= m_max`.
    Truncated(usize),
}

/// `V_m` of the ladder drive over the base period `2T`.
pub fn fourier_component(cfg: &LadderConfig, m: i64) -> Result<DMat> {
    Ok(FourierTable::ladder(cfg)?.component(m))
}

/// Order-`order` effective term with an infinite Fourier cutoff.
pub fn vv_effective_term(table: &FourierTable, order: usize) -> Result<DMat> {
    table.effective_term(order, Route::Exact)
}

/// Order-`order` effective term from Fourier sums truncated at the table's
/// `m_max`; fails when the tail estimate exceeds `tolerance`.
pub fn vv_effective_term_truncated(table: &FourierTable, order: usize, tolerance: f64) -> Result<DMat> {
    if order > 0 {
        check_cutoff(table, tolerance)?;
    }
    table.effective_term(order, Route::Truncated(table.m_max()))
}

fn check_cutoff(table: &FourierTable, tolerance: f64) -> Result<()> {
    let tail = table.tail_estimate(table.m_max());
    if tail > tolerance {
        return Err(Error::CutoffInsufficient {
            m_max: table.m_max(),
            tail,
            tolerance,
        });
    }
    Ok(())
}

/// `K^[order](t)` with an infinite Fourier cutoff.
pub fn kick_operator(table: &FourierTable, t: f64, order: usize) -> Result<DMat> {
    table.kick(t, order, Route::Exact)
}

/// `K^[order](t)` from truncated Fourier sums; fails like
/// [`vv_effective_term_truncated`].
pub fn kick_operator_truncated(table: &FourierTable, t: f64, order: usize, tolerance: f64) -> Result<DMat> {
    check_cutoff(table, tolerance)?;
    table.kick(t, order, Route::Truncated(table.m_max()))
}

/// `D_n = sum_{i <= n} D^[i]`.
pub fn build_dn(cfg: &LadderConfig, n: usize) -> Result<DMat> {
    dn_from_table(&FourierTable::ladder(cfg)?, n)
}

pub fn dn_from_table(table: &FourierTable, n: usize) -> Result<DMat> {
    if n > 2 {
        return Err(Error::InvalidArgument(format!(
            "van Vleck order must be 0, 1 or 2, got {n}"
        )));
    }
    let mut d = table.effective_term(0, Route::Exact)?;
    for order in 1..=n {
        d += table.effective_term(order, Route::Exact)?;
    }
    Ok(d)
}

/// `K_n(t) = sum_{1 <= i <= n} K^[i](t)`.
pub fn kick_sum(table: &FourierTable, t: f64, n: usize) -> Result<DMat> {
    let dim = table.dim();
    let mut k = DMat::zeros(dim, dim);
    for order in 1..=n.min(2) {
        k += table.kick(t, order, Route::Exact)?;
    }
    Ok(k)
}

/// `|| e^{-i K_n(0)} e^{-i D_n 2T} e^{i K_n(0)} - U_int(2T, 0) ||` for the ladder.
pub fn framed_propagator_error(cfg: &LadderConfig, n: usize) -> Result<f64> {
    let table = FourierTable::ladder(cfg)?;
    let protocol = build_protocol(cfg)?;
    let period = table.base_period();
    let exact = u0_at(cfg, period)?.adjoint() * dense_evolution_operator(&protocol, 0.0, period)?;
    let rot = expm_hermitian(&kick_sum(&table, 0.0, n)?, 1.0);
    let approx = &rot * expm_hermitian(&dn_from_table(&table, n)?, period) * rot.adjoint();
    Ok(crate::dense::spectral_norm(&(approx - exact)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::spectral_norm;
    use crate::ladder::{build_x_operator, closed_form_d0};
    use crate::pauli::{OperatorSum, Pauli, PauliString};
    use crate::protocol::Segment;

    fn hermiticity(m: &DMat) -> f64 {
        spectral_norm(&(m - m.adjoint()))
    }

    fn toy_protocol(ops: &[(OperatorSum, f64)]) -> DriveProtocol {
        DriveProtocol::new(
            ops.iter()
                .map(|(h, d)| Segment::new(h.clone(), *d, SegmentKind::Weak))
                .collect(),
        )
        .unwrap()
    }

    fn qubit_op(coeff: f64, p: Pauli) -> OperatorSum {
        OperatorSum::from_terms(1, vec![PauliString::new(coeff, &[(0, p)])]).unwrap()
    }

    #[test]
    fn single_window_scalar_integral() {
        let t = 0.8;
        let h = qubit_op(0.7, Pauli::X) + qubit_op(-0.2, Pauli::Z);
        let p = toy_protocol(&[(h.clone(), t / 2.0), (OperatorSum::zero(1), t / 2.0)]);
        let table = FourierTable::from_protocol(&p, 2, 8).unwrap();
        let hd = to_dense(&h).unwrap();
        for m in -3i64..=3 {
            // (1/2T) int_0^{T/2} e^{i m pi t / T} dt
            let expected = if m == 0 {
                c(0.25)
            } else {
                let k = m as f64 * PI / t;
                (Complex64::from_polar(1.0, k * t / 2.0) - 1.0) / (Complex64::new(0.0, k) * 2.0 * t)
            };
            // the second period repeats the window at [T, 3T/2]
            let second = Complex64::from_polar(1.0, m as f64 * PI);
            let vm = table.component(m);
            assert!((vm - &hd * (expected * (1.0 + second))).norm() < 1e-14, "m = {m}");
        }
    }

    #[test]
    fn conjugate_pairing() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let table = FourierTable::ladder(&cfg).unwrap();
        for m in 1..=6 {
            let diff = table.component(-m) - table.component(m).adjoint();
            assert!(spectral_norm(&diff) < 1e-12);
        }
    }

    #[test]
    fn zeroth_order_matches_closed_form() {
        for (la, lb) in [(0.5, 0.5), (1.0, 1.0), (0.8, 1.2)] {
            let cfg = LadderConfig::reference(4, 8.0 * PI).with_lambdas(la, lb);
            let d0 = build_dn(&cfg, 0).unwrap();
            let closed = to_dense(&closed_form_d0(&cfg).unwrap()).unwrap();
            assert!(spectral_norm(&(d0 - closed)) < 1e-10, "lambdas ({la}, {lb})");
        }
    }

    #[test]
    fn static_drive_has_no_corrections() {
        let h = qubit_op(0.4, Pauli::X) + qubit_op(0.9, Pauli::Y);
        let p = toy_protocol(&[(h.clone(), 0.3), (h, 0.5)]);
        let table = FourierTable::from_protocol(&p, 1, 16).unwrap();
        for order in [1, 2] {
            assert!(vv_effective_term(&table, order).unwrap().norm() < 1e-13);
            for t in [0.0, 0.17, 0.55] {
                assert!(kick_operator(&table, t, order).unwrap().norm() < 1e-13);
            }
        }
    }

    #[test]
    fn effective_terms_are_hermitian() {
        let cfg = LadderConfig::reference(4, 8.0 * PI).with_lambdas(0.8, 1.2);
        let table = FourierTable::ladder(&cfg).unwrap();
        for order in 0..=2 {
            assert!(hermiticity(&vv_effective_term(&table, order).unwrap()) < 1e-10);
        }
        for t in [0.1, 0.33] {
            for order in [1, 2] {
                assert!(hermiticity(&kick_operator(&table, t, order).unwrap()) < 1e-10);
            }
        }
    }

    fn random_hermitian(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DMat {
        use rand::Rng;
        let m = DMat::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&m + m.adjoint()) * c(0.5)
    }

    /// Three windows of random two-qubit operators over a base period `p`.
    fn generic_table(p: f64) -> FourierTable {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spans = [(0.05, 0.3), (0.3, 0.45), (0.6, 0.95)];
        let windows = spans
            .iter()
            .map(|&(a, b)| Window {
                start: a * p,
                end: b * p,
                op: random_hermitian(4, &mut rng) * c(4.0),
            })
            .collect();
        FourierTable::from_windows(windows, p, DEFAULT_M_MAX).unwrap()
    }

    #[test]
    fn truncated_route_converges_to_exact() {
        let table = generic_table(0.5);
        for order in [1, 2] {
            let exact = vv_effective_term(&table, order).unwrap();
            let scale = spectral_norm(&exact);
            assert!(scale > 1e-2, "order {order} vanishes: {scale}");
            let err = |m: usize| {
                spectral_norm(&(table.effective_term(order, Route::Truncated(m)).unwrap() - &exact)) / scale
            };
            let (coarse, fine) = (err(16), err(64));
            assert!(fine < coarse / 2.0, "order {order}: {coarse} -> {fine}");
            assert!(fine < 1e-2, "order {order}: {fine}");
        }
        for t in [0.0, 0.13, 0.37] {
            for order in [1, 2] {
                let exact = kick_operator(&table, t, order).unwrap();
                let approx = table.kick(t, order, Route::Truncated(64)).unwrap();
                assert!(spectral_norm(&(approx - &exact)) / spectral_norm(&exact) < 2e-2, "kick {order} at {t}");
            }
        }
        // the ladder's nonzero second order agrees as well
        let cfg = LadderConfig::reference(4, 8.0 * PI).with_lambdas(0.8, 1.2);
        let ladder = FourierTable::ladder(&cfg).unwrap();
        let exact = vv_effective_term(&ladder, 2).unwrap();
        let approx = ladder.effective_term(2, Route::Truncated(64)).unwrap();
        assert!(spectral_norm(&(approx - &exact)) / spectral_norm(&exact) < 1e-3);
    }

    #[test]
    fn ladder_first_order_vanishes() {
        for (la, lb) in [(0.5, 0.5), (0.8, 1.2)] {
            let cfg = LadderConfig::reference(4, 8.0 * PI).with_lambdas(la, lb);
            let table = FourierTable::ladder(&cfg).unwrap();
            assert!(spectral_norm(&vv_effective_term(&table, 1).unwrap()) < 1e-12);
            assert!(spectral_norm(&table.effective_term(1, Route::Truncated(64)).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn truncated_route_reports_insufficient_cutoff() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let table = FourierTable::ladder(&cfg).unwrap();
        assert!(matches!(
            vv_effective_term_truncated(&table, 1, DEFAULT_TAIL_TOLERANCE),
            Err(Error::CutoffInsufficient { m_max: 64, .. })
        ));
        assert!(vv_effective_term_truncated(&table, 0, DEFAULT_TAIL_TOLERANCE).is_ok());
        let loose = table.tail_estimate(64) * 1.01;
        assert!(vv_effective_term_truncated(&table, 1, loose).is_ok());
        assert!(table.required_cutoff(DEFAULT_TAIL_TOLERANCE) > 1e9);
    }

    #[test]
    fn frequency_scaling() {
        let (a, b) = (generic_table(0.5), generic_table(0.25));
        for (order, factor) in [(1, 2.0), (2, 4.0)] {
            let na = spectral_norm(&vv_effective_term(&a, order).unwrap());
            let nb = spectral_norm(&vv_effective_term(&b, order).unwrap());
            assert!((na / nb / factor - 1.0).abs() < 1e-10, "order {order}: {}", na / nb);
        }
        let base = LadderConfig::reference(4, 8.0 * PI).with_lambdas(0.8, 1.2);
        let doubled = LadderConfig { omega: 16.0 * PI, ..base };
        let na = spectral_norm(&(build_dn(&base, 2).unwrap() - build_dn(&base, 0).unwrap()));
        let nb = spectral_norm(&(build_dn(&doubled, 2).unwrap() - build_dn(&doubled, 0).unwrap()));
        assert!((na / nb / 4.0 - 1.0).abs() < 0.1, "{}", na / nb);
    }

    #[test]
    fn kick_gauge_and_periodicity() {
        let cfg = LadderConfig::reference(4, 8.0 * PI).with_lambdas(0.8, 1.2);
        let table = FourierTable::ladder(&cfg).unwrap();
        for order in [1, 2] {
            assert!(table.kick_gauge_residual(order, 400).unwrap() < 1e-9);
            let start = kick_operator(&table, 0.0, order).unwrap();
            let end = kick_operator(&table, table.base_period(), order).unwrap();
            assert!((start - end).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetry_action_on_components() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let table = FourierTable::ladder(&cfg).unwrap();
        let x = build_x_operator(&cfg).unwrap();
        let g = crate::ladder::build_mirror_unitary(4).unwrap();
        let g_int = u0_at(&cfg, cfg.period() / 2.0).unwrap().adjoint() * g;
        for m in -4i64..=4 {
            let vm = table.component(m);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!(spectral_norm(&(&x * &vm * x.adjoint() - &vm * c(sign))) < 1e-9);
            let phase = Complex64::from_polar(1.0, -PI * m as f64 / 2.0);
            assert!(spectral_norm(&(&g_int * &vm * g_int.adjoint() - &vm * phase)) < 1e-9);
        }
    }

    #[test]
    fn dn_commutes_with_symmetries() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let x = build_x_operator(&cfg).unwrap();
        let g = crate::ladder::build_mirror_unitary(4).unwrap();
        let g_int = u0_at(&cfg, cfg.period() / 2.0).unwrap().adjoint() * g;
        for n in 0..=2 {
            let d = build_dn(&cfg, n).unwrap();
            assert!(spectral_norm(&commutator(&x, &d)) < 1e-8);
            assert!(spectral_norm(&commutator(&g_int, &d)) < 1e-8);
        }
    }

    fn frame_error(cfg: &LadderConfig, n: usize) -> f64 {
        framed_propagator_error(cfg, n).unwrap()
    }

    #[test]
    fn second_order_improves_two_period_propagator() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let e0 = frame_error(&cfg, 0);
        let e1 = frame_error(&cfg, 1);
        let e2 = frame_error(&cfg, 2);
        assert!(e1 < e0 && e2 < e1, "{e0} {e1} {e2}");
        let omega_tilde = cfg.omega / (2.0 * cfg.j_prime());
        assert!(e2 * omega_tilde < e0, "{e0} {e2} {omega_tilde}");
    }

    #[test]
    fn expansion_error_falls_faster_with_each_order() {
        let errors = |omega: f64| {
            let cfg = LadderConfig::reference(4, omega).with_lambdas(0.8, 1.2);
            [frame_error(&cfg, 0), frame_error(&cfg, 1), frame_error(&cfg, 2)]
        };
        let (lo, hi) = (errors(16.0 * PI), errors(32.0 * PI));
        let rates: Vec<f64> = (0..3).map(|n| (lo[n] / hi[n]).log2()).collect();
        assert!(rates[0] > 1.0 && rates[1] > rates[0] + 0.5 && rates[2] > rates[1] + 0.5, "{rates:?}");
    }
}
