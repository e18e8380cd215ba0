//! Pole-location classification, the parity interlacing property, class
//! membership, Nyquist crossing counts and the marginal-stability certificate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{linf_norm_and_peaks, PeakKind, PeakSet};
use crate::poly::RootSet;
use crate::rational::{closed_loop_poles, RationalTF};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityKind {
    ExponentiallyStable,
    ExponentiallyUnstable,
    MarginallyStable,
    PolynomiallyUnstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisPole {
    pub omega: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub kind: StabilityKind,
    /// Frequency of the only axis mode when the configuration is single-mode marginal.
    pub single_mode: Option<f64>,
    pub axis_poles: Vec<AxisPole>,
    pub n_orhp: usize,
}

/// Classify a root configuration by half-plane, using the axis band of `tol`.
pub fn classify_roots(roots: &RootSet, tol: &Tolerances) -> StabilityVerdict {
    let n_orhp = roots.count_right(tol);
    let axis_poles: Vec<AxisPole> = roots
        .on_axis(tol)
        .map(|r| AxisPole {
            omega: r.value.im,
            multiplicity: r.multiplicity,
        })
        .collect();
    let kind = if n_orhp > 0 {
        StabilityKind::ExponentiallyUnstable
    } else if axis_poles.is_empty() {
        StabilityKind::ExponentiallyStable
    } else if axis_poles.iter().all(|p| p.multiplicity == 1) {
        StabilityKind::MarginallyStable
    } else {
        StabilityKind::PolynomiallyUnstable
    };
    let single_mode = if kind == StabilityKind::MarginallyStable {
        match axis_poles.as_slice() {
            [p] if p.omega == 0.0 => Some(0.0),
            [a, b] if a.omega != 0.0 && (a.omega + b.omega).abs() <= tol.axis_band(a.omega.abs()) => {
                Some(a.omega.abs())
            }
            _ => None,
        }
    } else {
        None
    };
    StabilityVerdict {
        kind,
        single_mode,
        axis_poles,
        n_orhp,
    }
}

pub fn classify_poles(f: &RationalTF) -> StabilityVerdict {
    classify_roots(f.poles(), f.tolerances())
}

/// Parity interlacing: between consecutive real zeros in the closed right
/// half-plane, with infinity appended for strictly proper `g`, the number of real
/// poles in the closed right half-plane must be even.
pub fn pip_check(g: &RationalTF) -> bool {
    let tol = g.tolerances();
    let real_nonneg = |rs: &RootSet| -> Vec<(f64, usize)> {
        rs.iter()
            .filter(|r| r.value.im == 0.0 && r.value.re >= -tol.axis_band(r.value.re.abs()))
            .map(|r| (r.value.re.max(0.0), r.multiplicity))
            .collect()
    };
    let mut zeros: Vec<f64> = real_nonneg(g.zeros()).into_iter().map(|z| z.0).collect();
    if g.is_strictly_proper() {
        zeros.push(f64::INFINITY);
    }
    zeros.sort_by(f64::total_cmp);
    let poles = real_nonneg(g.poles());
    zeros.windows(2).all(|w| {
        let count: usize = poles
            .iter()
            .filter(|(p, _)| *p > w[0] && *p < w[1])
            .map(|(_, m)| m)
            .sum();
        count % 2 == 0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", content = "n", rename_all = "snake_case")]
pub enum Subclass {
    /// Unique peak at the origin.
    Zero(usize),
    /// Unique peak at a positive frequency.
    Sharp(usize),
    /// Several equal peaks; one at the origin for `n = 1`.
    Dagger(usize),
    Other,
}

impl std::fmt::Display for Subclass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subclass::Zero(n) => write!(f, "G_{n}0"),
            Subclass::Sharp(n) => write!(f, "G_{n}sharp"),
            Subclass::Dagger(n) => write!(f, "G_{n}dagger"),
            Subclass::Other => write!(f, "other"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMembership {
    pub in_g: bool,
    /// Unstable poles counted with multiplicity.
    pub n: usize,
    pub pip: bool,
    pub subclass: Subclass,
    pub peaks: Option<PeakSet>,
    /// Why `in_g` is false, when it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub fn class_membership(g: &RationalTF) -> ClassMembership {
    let verdict = classify_poles(g);
    let n = verdict.n_orhp + verdict.axis_poles.iter().map(|p| p.multiplicity).sum::<usize>();
    let pip = pip_check(g);
    let reason = if !g.is_strictly_proper() || g.is_zero() {
        Some("not strictly proper".to_string())
    } else if !verdict.axis_poles.is_empty() {
        Some("pole on the imaginary axis".to_string())
    } else if verdict.n_orhp == 0 {
        Some("no unstable poles".to_string())
    } else {
        None
    };
    let in_g = reason.is_none();
    let peaks = linf_norm_and_peaks(g).ok();
    let subclass = match (&peaks, in_g && pip) {
        (Some(p), true) => match p.kind {
            PeakKind::UniqueAtZero => Subclass::Zero(n),
            PeakKind::UniquePositive => Subclass::Sharp(n),
            PeakKind::Multiple if !p.at_infinity => {
                let has_zero = p.peaks.first() == Some(&0.0);
                match n {
                    1 if has_zero => Subclass::Dagger(1),
                    2 => Subclass::Dagger(2),
                    _ => Subclass::Other,
                }
            }
            _ => Subclass::Other,
        },
        _ => Subclass::Other,
    };
    ClassMembership {
        in_g,
        n,
        pip,
        subclass,
        peaks,
        reason,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub omega: f64,
    pub re: f64,
    /// `+1` when the curve crosses upward, `-1` downward.
    pub direction: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NyquistCrossings {
    pub epsilon: f64,
    pub nu_plus: usize,
    pub nu_minus: usize,
    pub nu_o: i64,
    /// Transverse crossings of `(1, inf)` at `w >= 0`; those at `w > 0` count twice.
    pub crossing_freqs: Vec<Crossing>,
    /// Frequencies where the curve passes through the critical point `1`.
    pub critical: Vec<f64>,
}

/// Half-width of the band around `Re L = 1` treated as passing through the critical point.
const CRITICAL_BAND: f64 = 1e-7;

/// Count transverse crossings of `(1, inf)` by the curve `L(jw + eps)`.
///
/// With `L(s + eps) = n(s)/d(s)`, the imaginary part of `L` vanishes exactly at
/// the real roots of `Im(n(jw) conj(d(jw)))`, so crossings come from polynomial
/// roots rather than a frequency grid.
pub fn nyquist_crossings(l: &RationalTF, epsilon: f64) -> Result<NyquistCrossings> {
    let tol = l.tolerances();
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if !l.is_strictly_proper() {
        return Err(Error::InvalidInput("loop function must be strictly proper".into()));
    }
    let blocked = l
        .poles()
        .iter()
        .any(|p| p.value.re > -tol.axis_band(p.value.norm()) && p.value.re <= epsilon + tol.axis_band(p.value.norm()));
    if blocked {
        return Err(Error::HypothesisViolated(format!(
            "pole of L within {epsilon} of the imaginary axis"
        )));
    }
    let mut out = NyquistCrossings {
        epsilon,
        nu_plus: 0,
        nu_minus: 0,
        nu_o: 0,
        crossing_freqs: Vec::new(),
        critical: Vec::new(),
    };
    if l.is_zero() {
        return Ok(out);
    }

    let (nr, ni) = l.num().shift(epsilon).on_imag_axis();
    let (dr, di) = l.den().shift(epsilon).on_imag_axis();
    let im = &(&ni * &dr) - &(&nr * &di);
    if im.is_zero() || im.degree() == 0 {
        return Ok(out);
    }
    let dim = im.derivative();
    let roots = im.roots(tol)?;
    for root in roots.iter() {
        let z = root.value;
        if z.im.abs() > 1e-6 * (1.0 + z.re.abs()) || z.re < -tol.axis_band(z.re.abs()) {
            continue;
        }
        let w = if z.re.abs() <= tol.axis_band(0.0) && root.multiplicity % 2 == 1 && z.im == 0.0 {
            0.0
        } else {
            im.polish_real_root(z.re).max(0.0)
        };
        let value = l.eval_unchecked(Complex64::new(epsilon, w));
        let re = value.re;
        if (re - 1.0).abs() <= CRITICAL_BAND * (1.0 + re.abs()) {
            out.critical.push(w);
            continue;
        }
        if re < 1.0 {
            continue;
        }
        let slope = dim.eval(w);
        let scale = dim.abs_eval(w.abs());
        if root.multiplicity > 1 || slope.abs() <= tol.trans * scale {
            return Err(Error::TangentialCrossing { omega: w, epsilon });
        }
        let direction = if slope > 0.0 { 1 } else { -1 };
        let weight = if w == 0.0 { 1 } else { 2 };
        if direction > 0 {
            out.nu_plus += weight;
        } else {
            out.nu_minus += weight;
        }
        out.crossing_freqs.push(Crossing { omega: w, re, direction });
    }
    out.crossing_freqs.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    out.critical.sort_by(f64::total_cmp);
    out.nu_o = out.nu_plus as i64 - out.nu_minus as i64;
    Ok(out)
}

/// Contour offset small enough that no open-loop pole or closed-loop root lies
/// between the axis and `Re s = eps`.
pub fn default_epsilon(l: &RationalTF) -> Result<f64> {
    let tol = l.tolerances();
    if let Some(eps) = tol.epsilon {
        return Ok(eps);
    }
    let cl = closed_loop_poles(l)?;
    let mut eps: f64 = 1e-3;
    for r in cl.iter().chain(l.poles().iter()) {
        let re = r.value.re.abs();
        if re > tol.axis_band(r.value.norm()) {
            eps = eps.min(0.5 * re);
        }
    }
    Ok(eps)
}

/// Crossing count at the default offset, retried a decade lower on a tangential contact.
pub fn nyquist_auto(l: &RationalTF) -> Result<NyquistCrossings> {
    let eps = default_epsilon(l)?;
    match nyquist_crossings(l, eps) {
        Err(Error::TangentialCrossing { .. }) => nyquist_crossings(l, eps / 10.0),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Certificate {
    /// Upward crossing of the critical point with a positive phase change rate.
    CertifiedIia,
    /// Downward crossing with a negative phase change rate.
    CertifiedIib,
    Refuted(String),
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        !matches!(self, Certificate::Refuted(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCertificate {
    pub certificate: Certificate,
    pub omega_c: f64,
    pub n: usize,
    pub phase_cr: f64,
    pub nu_o_zero: Option<i64>,
    /// Offset counts at the default offset and one decade below.
    pub perturbed: Vec<NyquistCrossings>,
}

/// Certify that the positive feedback loop `L` is single-mode marginally stable at `w_c`.
pub fn marginal_stability_certificate(l: &RationalTF, omega_c: f64) -> Result<MarginalCertificate> {
    let tol = l.tolerances();
    let wc = omega_c.abs();
    let s = Complex64::new(0.0, wc);
    let h = l.log_derivative(s);
    if !h.is_finite() || h.im.abs() > 1e-7 {
        return Err(Error::HypothesisViolated(format!(
            "gain change rate {:.3e} at w_c is not zero",
            -h.im
        )));
    }
    let open = classify_poles(l);
    if !open.axis_poles.is_empty() {
        return Err(Error::HypothesisViolated("loop has poles on the imaginary axis".into()));
    }
    let n = open.n_orhp;
    let phase_cr = h.re;
    let mut cert = MarginalCertificate {
        certificate: Certificate::Refuted(String::new()),
        omega_c: wc,
        n,
        phase_cr,
        nu_o_zero: None,
        perturbed: Vec::new(),
    };
    let refute = |mut c: MarginalCertificate, why: &str| {
        c.certificate = Certificate::Refuted(why.to_string());
        Ok(c)
    };

    let value = l.eval_unchecked(s);
    if (value - 1.0).norm() > 1e-7 {
        return refute(cert, "L(j w_c) differs from 1");
    }
    let dl = l.num().derivative().eval_complex(s) / l.den().eval_complex(s)
        - value * l.den().derivative().eval_complex(s) / l.den().eval_complex(s);
    if dl.norm() <= 1e-9 {
        return refute(cert, "L'(j w_c) vanishes");
    }
    if phase_cr.abs() <= 1e-9 {
        return refute(cert, "phase change rate vanishes: double axis pole");
    }
    let cl = closed_loop_poles(l)?;
    let closed = classify_roots(&cl, tol);
    let expected_axis = if wc <= tol.axis_band(0.0) { 1 } else { 2 };
    let axis_ok = closed.axis_poles.len() == expected_axis
        && closed.axis_poles.iter().all(|p| {
            p.multiplicity == 1 && (p.omega.abs() - wc).abs() <= 1e-6 * (1.0 + wc)
        });
    if !axis_ok {
        return refute(cert, "closed-loop axis roots are not exactly the simple mode at w_c");
    }

    let nu0 = nyquist_crossings(l, 0.0)?.nu_o;
    cert.nu_o_zero = Some(nu0);
    let n_c = expected_axis as i64;
    let certificate = if phase_cr > 0.0 && nu0 == n as i64 - n_c {
        Certificate::CertifiedIia
    } else if phase_cr < 0.0 && nu0 == n as i64 {
        Certificate::CertifiedIib
    } else {
        Certificate::Refuted(format!(
            "Nyquist count {nu0} does not match n = {n} with phase change rate {phase_cr:.6}"
        ))
    };

    if let Ok(eps) = default_epsilon(l) {
        for e in [eps, eps / 10.0] {
            if let Ok(c) = nyquist_crossings(l, e) {
                cert.perturbed.push(c);
            }
        }
    }

    if certificate.is_certified() {
        let single = closed.kind == StabilityKind::MarginallyStable
            && closed
                .single_mode
                .is_some_and(|w| (w - wc).abs() <= 1e-6 * (1.0 + wc));
        if !single {
            cert.certificate =
                Certificate::Refuted("closed-loop classification disagrees with the count".into());
            return Ok(cert);
        }
    }
    cert.certificate = certificate;
    Ok(cert)
}

/// With `|L(j w_c)| = ||L|| = 1`, all closed-loop poles in the closed left half-plane
/// force a nonnegative phase change rate at `w_c`.
pub fn clhp_necessity_check(l: &RationalTF, omega_c: f64) -> Result<bool> {
    let tol = l.tolerances();
    let at = l.eval_jw(omega_c)?.norm();
    let peaks = linf_norm_and_peaks(l)?;
    if (at - 1.0).abs() > tol.peak || peaks.peak_gain > 1.0 + tol.peak {
        return Err(Error::HypothesisViolated(format!(
            "|L(j w_c)| = {at} is not the unit peak gain"
        )));
    }
    Ok(l.log_derivative(Complex64::new(0.0, omega_c)).re >= -1e-9)
}
