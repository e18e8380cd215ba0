//! Frequency response: gain, continuous phase, change rates, peak gain and the
//! change-rate integral relations for minimum-phase functions.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::quad::integrate;
use crate::rational::RationalTF;

/// Frequency response at one point together with its four change rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqSample {
    pub omega: f64,
    /// `ln |f(jw)|`.
    pub gain_log: f64,
    /// Continuous phase anchored at `w = 0`.
    pub phase: f64,
    /// Derivative of `gain_log` in `w`.
    pub gain_cr: f64,
    /// Derivative of `phase` in `w`.
    pub phase_cr: f64,
    /// Derivative of `ln |f(s + jw)|` in `s` at `s = 0`.
    pub sigma_gain_cr: f64,
    /// Derivative of the phase of `f(s + jw)` in `s` at `s = 0`.
    pub sigma_phase_cr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakKind {
    UniqueAtZero,
    UniquePositive,
    Multiple,
    /// `|f(jw)|` is constant; every frequency is a peak.
    Dense,
    /// The supremum is approached only as `w -> inf`.
    AtInfinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peak_gain: f64,
    /// Nonnegative peak frequencies in ascending order.
    pub peaks: Vec<f64>,
    pub kind: PeakKind,
    /// True when the limit at infinity also reaches the peak gain.
    pub at_infinity: bool,
}

impl PeakSet {
    pub fn is_unique(&self) -> bool {
        matches!(self.kind, PeakKind::UniqueAtZero | PeakKind::UniquePositive)
    }
}

fn jw(omega: f64) -> Complex64 {
    Complex64::new(0.0, omega)
}

fn check_axis_point(f: &RationalTF, omega: f64) -> Result<()> {
    let s = jw(omega);
    let tol = f.tolerances();
    if f.is_zero() || f.zeros().iter().any(|z| (z.value - s).norm() <= tol.axis_band(s.norm())) {
        return Err(Error::ZeroOnAxis(omega));
    }
    if f.poles().iter().any(|p| (p.value - s).norm() <= tol.axis_band(s.norm())) {
        return Err(Error::PoleEvaluation(s));
    }
    Ok(())
}

/// Phase derivative `Re(f'/f)(jw)`.
fn phase_rate(f: &RationalTF, omega: f64) -> f64 {
    f.log_derivative(jw(omega)).re
}

fn lowest_nonzero(p: &Polynomial) -> (usize, f64) {
    p.coeffs()
        .iter()
        .enumerate()
        .find(|(_, c)| **c != 0.0)
        .map(|(k, c)| (k, *c))
        .unwrap_or((0, 0.0))
}

/// Phase just right of the origin: `0` or `pi` from the sign of the low-order
/// coefficient ratio, plus `m * pi/2` for a net root of order `m` at the origin.
fn origin_anchor(f: &RationalTF) -> (f64, i64) {
    let (kz, cz) = lowest_nonzero(f.num());
    let (kp, cp) = lowest_nonzero(f.den());
    let base = if cz / cp > 0.0 { 0.0 } else { PI };
    let m = kz as i64 - kp as i64;
    (base, m)
}

struct PhaseTracker<'a> {
    f: &'a RationalTF,
    roots: Vec<Complex64>,
    w: f64,
    theta: f64,
    rate: f64,
    h: f64,
}

impl<'a> PhaseTracker<'a> {
    fn new(f: &'a RationalTF) -> Self {
        let mut roots = f.zeros().expanded();
        roots.extend(f.poles().expanded());
        let scale = roots
            .iter()
            .map(|r| r.norm())
            .filter(|&m| m > 0.0)
            .fold(f64::INFINITY, f64::min);
        let scale = if scale.is_finite() { scale } else { 1.0 };
        let (base, m) = origin_anchor(f);
        let mut t = Self {
            f,
            roots,
            w: 0.0,
            theta: base,
            rate: 0.0,
            h: scale / 8.0,
        };
        if m == 0 {
            t.rate = phase_rate(f, 0.0);
        } else {
            // Start just off the origin, on the branch fixed by the local power law.
            let w0 = 1e-9 * scale;
            let target = base + m as f64 * FRAC_PI_2;
            let raw = f.eval_unchecked(jw(w0)).arg();
            t.w = w0;
            t.theta = raw + TAU * ((target - raw) / TAU).round();
            t.rate = phase_rate(f, w0);
        }
        t
    }

    fn step_cap(&self) -> f64 {
        let s = jw(self.w);
        let d = self
            .roots
            .iter()
            .map(|r| (r - s).norm())
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            0.5 * d.max(1e-12 * (1.0 + self.w))
        } else {
            f64::INFINITY
        }
    }

    fn advance_to(&mut self, target: f64) {
        while self.w < target {
            let mut h = self.h.min(self.step_cap()).min(target - self.w);
            let floor = 1e-13 * (1.0 + self.w);
            loop {
                let wn = if h >= target - self.w { target } else { self.w + h };
                let rn = phase_rate(self.f, wn);
                let pred = self.theta + (wn - self.w) * 0.5 * (self.rate + rn);
                let raw = self.f.eval_unchecked(jw(wn)).arg();
                let cand = raw + TAU * ((pred - raw) / TAU).round();
                let smooth = (cand - self.theta).abs() <= FRAC_PI_2 && (cand - pred).abs() <= 0.25;
                if smooth || h <= floor {
                    self.w = wn;
                    self.theta = cand;
                    self.rate = rn;
                    self.h = (2.0 * h).max(floor);
                    break;
                }
                h *= 0.5;
            }
        }
    }
}

/// Continuous phase at each requested frequency.
pub fn phase_sweep(f: &RationalTF, omegas: &[f64]) -> Result<Vec<f64>> {
    for &w in omegas {
        if !w.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite frequency {w}")));
        }
        check_axis_point(f, w)?;
    }
    let mut order: Vec<usize> = (0..omegas.len()).collect();
    order.sort_by(|&a, &b| omegas[a].abs().total_cmp(&omegas[b].abs()));
    let mut tracker = PhaseTracker::new(f);
    let anchor = origin_anchor(f).0;
    let mut out = vec![0.0; omegas.len()];
    for k in order {
        let w = omegas[k];
        tracker.advance_to(w.abs());
        out[k] = if w >= 0.0 {
            tracker.theta
        } else {
            2.0 * anchor - tracker.theta
        };
    }
    Ok(out)
}

/// `(ln |f(jw)|, continuous phase)`.
pub fn gain_phase(f: &RationalTF, omega: f64) -> Result<(f64, f64)> {
    let phase = phase_sweep(f, &[omega])?[0];
    Ok((f.eval_unchecked(jw(omega)).norm().ln(), phase))
}

fn sample_with_phase(f: &RationalTF, omega: f64, phase: f64) -> FreqSample {
    let h = f.log_derivative(jw(omega));
    FreqSample {
        omega,
        gain_log: f.eval_unchecked(jw(omega)).norm().ln(),
        phase,
        gain_cr: -h.im,
        phase_cr: h.re,
        sigma_gain_cr: h.re,
        sigma_phase_cr: h.im,
    }
}

pub fn change_rates(f: &RationalTF, omega: f64) -> Result<FreqSample> {
    let (_, phase) = gain_phase(f, omega)?;
    Ok(sample_with_phase(f, omega, phase))
}

/// Samples over a frequency grid sharing one phase continuation.
pub fn sweep(f: &RationalTF, omegas: &[f64]) -> Result<Vec<FreqSample>> {
    let phases = phase_sweep(f, omegas)?;
    Ok(omegas
        .iter()
        .zip(phases)
        .map(|(&w, p)| sample_with_phase(f, w, p))
        .collect())
}

/// `f(sigma + jw)`.
pub fn eval_offset(f: &RationalTF, sigma: f64, omega: f64) -> Result<Complex64> {
    f.eval(Complex64::new(sigma, omega))
}

/// `|p(jw)|^2` as a polynomial in `W = w^2`.
fn squared_magnitude(p: &Polynomial) -> Polynomial {
    let (re, im) = p.on_imag_axis();
    let sq = &(&re * &re) + &(&im * &im);
    Polynomial::new(sq.coeffs().iter().step_by(2).copied().collect())
}

/// Peak gain over the imaginary axis and every frequency attaining it.
///
/// Stationary points of `|f(jw)|^2 = N(W)/D(W)` are the positive real roots of
/// `N'D - ND'`; these, together with `W = 0` and the limit at infinity, are the
/// only candidates.
pub fn linf_norm_and_peaks(f: &RationalTF) -> Result<PeakSet> {
    let tol = f.tolerances();
    if f.poles().on_axis(tol).next().is_some() {
        return Err(Error::PoleOnAxis);
    }
    if f.is_zero() {
        return Ok(PeakSet {
            peak_gain: 0.0,
            peaks: vec![0.0],
            kind: PeakKind::Dense,
            at_infinity: true,
        });
    }
    let n = squared_magnitude(f.num());
    let d = squared_magnitude(f.den());
    let a = &n.derivative() * &d;
    let b = &n * &d.derivative();
    let r = &a - &b;
    let scale = a.max_abs_coeff().max(b.max_abs_coeff());

    let gain = |w: f64| f.eval_unchecked(jw(w)).norm();
    if r.max_abs_coeff() <= 1e-11 * scale {
        return Ok(PeakSet {
            peak_gain: gain(0.0),
            peaks: vec![0.0],
            kind: PeakKind::Dense,
            at_infinity: true,
        });
    }

    let mut cands = vec![0.0];
    if r.degree() >= 1 {
        for root in r.roots(tol)?.iter() {
            let z = root.value;
            if z.im.abs() <= 1e-6 * (1.0 + z.re.abs()) && z.re > 0.0 {
                let big = r.polish_real_root(z.re);
                if big > 0.0 {
                    cands.push(big.sqrt());
                }
            }
        }
    }
    let limit = if f.num().degree() == f.den().degree() {
        (f.num().leading() / f.den().leading()).abs()
    } else {
        0.0
    };

    let gains: Vec<f64> = cands.iter().map(|&w| gain(w)).collect();
    let finite_max = gains.iter().copied().fold(0.0, f64::max);
    let peak_gain = finite_max.max(limit);
    let floor = peak_gain * (1.0 - tol.peak);
    let mut peaks: Vec<f64> = cands
        .iter()
        .zip(&gains)
        .filter(|(_, g)| **g >= floor)
        .map(|(w, _)| *w)
        .collect();
    peaks.sort_by(f64::total_cmp);
    peaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * (1.0 + y.abs()));
    let at_infinity = limit >= floor;

    let kind = match (peaks.len(), at_infinity) {
        (0, _) => PeakKind::AtInfinity,
        (1, false) if peaks[0] == 0.0 => PeakKind::UniqueAtZero,
        (1, false) => PeakKind::UniquePositive,
        _ => PeakKind::Multiple,
    };
    Ok(PeakSet {
        peak_gain,
        peaks,
        kind,
        at_infinity,
    })
}

/// Analytic phase change rate and the two integral expressions for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrIntegrals {
    pub lhs: f64,
    /// Principal-value integral of the gain change rate.
    pub rhs1: f64,
    /// Integral of the log gain, present when `|f(jw_p)|` is a unit peak.
    pub rhs2: Option<f64>,
}

pub(crate) fn require_minimum_phase(f: &RationalTF) -> Result<()> {
    let tol = f.tolerances();
    if !f.is_proper() {
        return Err(Error::NotMinimumPhase("function is not proper".into()));
    }
    if !f.is_stable() {
        return Err(Error::NotMinimumPhase("pole in the closed right half-plane".into()));
    }
    if f.is_zero() {
        return Err(Error::NotMinimumPhase("zero function".into()));
    }
    let bad = f
        .zeros()
        .iter()
        .any(|z| z.value.re >= -tol.axis_band(z.value.norm()));
    if bad {
        return Err(Error::NotMinimumPhase("zero in the closed right half-plane".into()));
    }
    Ok(())
}

const QUAD_TOL: f64 = 1e-11;

/// Integral over `[lo, inf)` via `w = 1/u`.
fn tail<F: Fn(f64) -> f64>(g: F, lo: f64) -> f64 {
    integrate(
        |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                g(1.0 / u) / (u * u)
            }
        },
        0.0,
        1.0 / lo,
        QUAD_TOL,
        1e-12,
    )
    .value
}

/// `(2/pi) PV int_0^inf w A'(w) / (w^2 - w_p^2) dw`.
fn cr_integral_rhs1(f: &RationalTF, omega_p: f64) -> f64 {
    let gain_cr = |w: f64| -f.log_derivative(jw(w)).im;
    let wp = omega_p.abs();
    if wp == 0.0 {
        let g = |w: f64| if w == 0.0 { 0.0 } else { gain_cr(w) / w };
        let head = integrate(g, 0.0, 1.0, QUAD_TOL, 1e-12).value;
        return 2.0 / PI * (head + tail(g, 1.0));
    }
    // w / (w^2 - wp^2) = [1/(w - wp) + 1/(w + wp)] / 2; the first term is singular.
    let smooth = |w: f64| w * gain_cr(w) / (w + wp);
    let at_wp = smooth(wp);
    let near = integrate(
        |w: f64| {
            if w == wp {
                0.0
            } else {
                (smooth(w) - at_wp) / (w - wp)
            }
        },
        0.0,
        2.0 * wp,
        QUAD_TOL,
        1e-12,
    )
    .value;
    let far = tail(|w: f64| w * gain_cr(w) / (w * w - wp * wp), 2.0 * wp);
    2.0 / PI * (near + far)
}

/// `(2/pi) int_0^inf A(w) (w^2 + w_p^2) / (w^2 - w_p^2)^2 dw` for a unit peak at `w_p`.
pub fn cr_integral_rhs2(f: &RationalTF, omega_p: f64) -> Result<f64> {
    require_minimum_phase(f)?;
    let wp = omega_p.abs();
    let at_peak = f.eval_jw(wp)?.norm();
    let peaks = linf_norm_and_peaks(f)?;
    let tol = f.tolerances();
    if (at_peak - 1.0).abs() > 1e-8 || peaks.peak_gain > at_peak * (1.0 + tol.peak) {
        return Err(Error::NotNormalizedPeak(at_peak));
    }
    let log_gain = |w: f64| f.eval_unchecked(jw(w)).norm().ln();
    let kernel = |w: f64| {
        let d = w * w - wp * wp;
        if d == 0.0 {
            0.0
        } else {
            log_gain(w) * (w * w + wp * wp) / (d * d)
        }
    };
    let value = if wp == 0.0 {
        integrate(kernel, 0.0, 1.0, QUAD_TOL, 1e-12).value + tail(kernel, 1.0)
    } else {
        integrate(kernel, 0.0, wp, QUAD_TOL, 1e-12).value
            + integrate(kernel, wp, 2.0 * wp, QUAD_TOL, 1e-12).value
            + tail(kernel, 2.0 * wp)
    };
    Ok(2.0 / PI * value)
}

/// Compare the analytic phase change rate at `w_p` with both integral relations.
pub fn cr_integral_check(f: &RationalTF, omega_p: f64) -> Result<CrIntegrals> {
    require_minimum_phase(f)?;
    let lhs = phase_rate(f, omega_p);
    let rhs1 = cr_integral_rhs1(f, omega_p);
    let rhs2 = match cr_integral_rhs2(f, omega_p) {
        Ok(v) => Some(v),
        Err(Error::NotNormalizedPeak(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CrIntegrals { lhs, rhs1, rhs2 })
}
