//! Robust instability radius: lower bounds, exactness certificates, all-pass
//! stabilizer synthesis and strict stabilization by small perturbation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::linf_norm_and_peaks;
use crate::poly::RootSet;
use crate::rational::{closed_loop_poles_pair, RationalTF};
use crate::stability::{
    class_membership, marginal_stability_certificate, ClassMembership, MarginalCertificate, Subclass,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Reciprocal of the peak gain.
    pub rho_p: f64,
    /// Reciprocal of the DC gain, only for an odd number of unstable poles.
    pub rho_o: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizerKind {
    Constant,
    FirstOrderAllpass,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stabilizer {
    pub delta: RationalTF,
    pub kind: StabilizerKind,
    pub hinf_norm: f64,
    /// Closed-loop roots of the positive feedback of the plant and `delta`.
    pub cl_poles: RootSet,
    /// Frequency at which `delta` inverts the plant.
    pub omega: f64,
    /// All-pass corner `a` for first-order stabilizers.
    pub a: Option<f64>,
    /// Perturbation size for perturbed stabilizers.
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Exactness {
    Exact { value: f64 },
    StrictGap,
    Undecided { reason: String },
}

/// Filtered plant used to isolate one peak of a multi-peak system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NotchCheck {
    pub eta: f64,
    pub omega: f64,
    pub filtered_subclass: Subclass,
    pub filtered_margin: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RirReport {
    pub bounds: Bounds,
    pub class: ClassMembership,
    pub exactness: Exactness,
    /// Left minus right side of the governing inequality.
    pub margin: f64,
    /// Peak frequency the verdict refers to.
    pub omega_p: Option<f64>,
    pub stabilizer: Option<Stabilizer>,
    pub strict_stabilizer: Option<Stabilizer>,
    pub certificate: Option<MarginalCertificate>,
    pub notch: Option<NotchCheck>,
}

fn jw(omega: f64) -> Complex64 {
    Complex64::new(0.0, omega)
}

fn in_g(g: &RationalTF) -> Result<ClassMembership> {
    let class = class_membership(g);
    match &class.reason {
        Some(why) => Err(Error::NotInG(why.clone())),
        None => Ok(class),
    }
}

pub fn rir_bounds(g: &RationalTF) -> Result<Bounds> {
    let class = in_g(g)?;
    bounds_for(g, &class)
}

fn bounds_for(g: &RationalTF, class: &ClassMembership) -> Result<Bounds> {
    let peak = match &class.peaks {
        Some(p) => p.peak_gain,
        None => linf_norm_and_peaks(g)?.peak_gain,
    };
    let dc = g.eval_unchecked(jw(0.0)).norm();
    let rho_o = (class.n % 2 == 1 && dc > 0.0).then(|| 1.0 / dc);
    Ok(Bounds {
        rho_p: 1.0 / peak,
        rho_o,
    })
}

/// `(theta'_g(w), sin(theta_g(w)) / w)`; the ratio is zero at `w = 0`.
pub fn phase_terms(g: &RationalTF, omega: f64) -> Result<(f64, f64)> {
    let v = g.eval_jw(omega)?;
    let rate = g.log_derivative(jw(omega)).re;
    let ratio = if omega == 0.0 {
        0.0
    } else {
        (v.im / v.norm()) / omega
    };
    Ok((rate, ratio))
}

/// Margin of the single-peak stabilizability inequality at `w`.
fn peak_margin(g: &RationalTF, omega: f64) -> Result<(f64, f64)> {
    let (rate, ratio) = phase_terms(g, omega)?;
    Ok((rate - ratio.abs(), ratio.abs()))
}

/// Stable `delta` of norm `1/|g(jw)|` with `delta(jw) g(jw) = 1`: a constant when
/// the phase of `g(jw)` is a multiple of `pi`, otherwise a first-order all-pass.
pub fn synthesize_at(g: &RationalTF, omega: f64) -> Result<Stabilizer> {
    let w = omega.abs();
    let v = g.eval_jw(w)?;
    if v.norm() == 0.0 {
        return Err(Error::ZeroOnAxis(w));
    }
    let k = 1.0 / v.norm();
    let theta = v.arg();
    let tol = *g.tolerances();
    let (delta, kind, a) = if w == 0.0 || theta.sin().abs() <= 1e-10 {
        let c = if theta.cos() > 0.0 { k } else { -k };
        (RationalTF::constant_with(c, tol), StabilizerKind::Constant, None)
    } else if theta > 0.0 {
        let a = w / (theta / 2.0).tan();
        let f = RationalTF::new(vec![k * a, -k], vec![a, 1.0])?.with_tolerances(tol);
        (f, StabilizerKind::FirstOrderAllpass, Some(a))
    } else {
        let a = w * (-theta / 2.0).tan();
        let f = RationalTF::new(vec![-k * a, k], vec![a, 1.0])?.with_tolerances(tol);
        (f, StabilizerKind::FirstOrderAllpass, Some(a))
    };
    let cl_poles = closed_loop_poles_pair(g, &delta)?;
    Ok(Stabilizer {
        delta,
        kind,
        hinf_norm: k,
        cl_poles,
        omega: w,
        a,
        epsilon: None,
    })
}

/// Peak frequency and margin that govern stabilizability of `g` at norm `1/||g||`.
fn governing_peak(g: &RationalTF, class: &ClassMembership) -> Result<Option<(f64, f64, f64)>> {
    let peaks = match &class.peaks {
        Some(p) => p,
        None => return Ok(None),
    };
    let pick = |ws: &mut dyn Iterator<Item = f64>| -> Result<Option<(f64, f64, f64)>> {
        let mut best: Option<(f64, f64, f64)> = None;
        for w in ws {
            let (m, rhs) = peak_margin(g, w)?;
            if best.map_or(true, |b| m > b.1) {
                best = Some((w, m, rhs));
            }
        }
        Ok(best)
    };
    match class.subclass {
        Subclass::Zero(1) | Subclass::Dagger(1) => pick(&mut std::iter::once(0.0)),
        Subclass::Sharp(2) => pick(&mut peaks.peaks.iter().copied()),
        Subclass::Dagger(2) => pick(&mut peaks.peaks.iter().copied().filter(|w| *w > 0.0)),
        _ => Ok(None),
    }
}

/// First-order all-pass (or constant) stabilizer certified to single-mode
/// marginally stabilize `g` at norm `1/||g||`.
pub fn synthesize_marginal_stabilizer(g: &RationalTF) -> Result<Stabilizer> {
    let class = in_g(g)?;
    if !class.pip {
        return Err(Error::PipFailed);
    }
    let (w, margin, rhs) = governing_peak(g, &class)?.ok_or_else(|| Error::ConditionFailed {
        margin: f64::NAN,
    })?;
    if margin <= g.tolerances().cond_band(rhs) {
        return Err(Error::ConditionFailed { margin });
    }
    let st = synthesize_at(g, w)?;
    let cert = marginal_stability_certificate(&g.mul(&st.delta)?, w)?;
    if !cert.certificate.is_certified() {
        return Err(Error::HypothesisViolated(format!(
            "synthesized stabilizer not certified: {:?}",
            cert.certificate
        )));
    }
    Ok(st)
}

/// Outcome of the perturbation search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbOutcome {
    pub stabilizer: Stabilizer,
    pub epsilon: f64,
    pub delta1: RationalTF,
    /// True when a fallback direction was needed.
    pub retried: bool,
}

const EPS_GRID: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

fn fallback_directions() -> Vec<RationalTF> {
    vec![
        RationalTF::constant(1.0),
        RationalTF::new(vec![1.0], vec![1.0, 1.0]).expect("static direction"),
        RationalTF::new(vec![1.0, 2.0], vec![1.0, 1.0]).expect("static direction"),
    ]
}

/// Closed-loop roots if `delta` strictly stabilizes `g` without unstable cancellation.
fn strictly_stabilizes(g: &RationalTF, delta: &RationalTF) -> Option<RootSet> {
    let tol = g.tolerances();
    if !delta.is_stable() || !delta.is_proper() {
        return None;
    }
    let cancels = g.poles().iter().any(|p| {
        p.value.re >= -tol.axis_band(p.value.norm())
            && delta
                .zeros()
                .iter()
                .any(|z| (z.value - p.value).norm() <= tol.gcd_radius(p.value.norm()))
    });
    if cancels {
        return None;
    }
    let cl = closed_loop_poles_pair(g, delta).ok()?;
    let strict = cl
        .iter()
        .all(|r| r.value.re < -tol.axis_band(r.value.norm()));
    strict.then_some(cl)
}

fn normalized(delta1: &RationalTF, scale: f64) -> Result<RationalTF> {
    if !delta1.is_proper() || !delta1.is_stable() {
        return Err(Error::InvalidInput("perturbation direction must be stable and proper".into()));
    }
    let n = linf_norm_and_peaks(delta1)?.peak_gain;
    if n == 0.0 {
        return Err(Error::InvalidInput("perturbation direction is zero".into()));
    }
    Ok(delta1.scale(scale / n))
}

fn perturbed(g: &RationalTF, delta0: &Stabilizer, d1: &RationalTF, eps: f64) -> Option<Stabilizer> {
    let delta = delta0.delta.add(&d1.scale(eps)).ok()?;
    let cl_poles = strictly_stabilizes(g, &delta)?;
    let hinf_norm = linf_norm_and_peaks(&delta).ok()?.peak_gain;
    Some(Stabilizer {
        delta,
        kind: StabilizerKind::Perturbed,
        hinf_norm,
        cl_poles,
        omega: delta0.omega,
        a: delta0.a,
        epsilon: Some(eps),
    })
}

/// Search `delta0 + eps * delta1` over `eps = +-10^-k`, `k = 2..8`, for one
/// direction, with `delta1` rescaled to the norm of `delta0`.
pub fn perturb_with(g: &RationalTF, delta0: &Stabilizer, delta1: &RationalTF) -> Result<PerturbOutcome> {
    let scale = if delta0.hinf_norm > 0.0 { delta0.hinf_norm } else { 1.0 };
    let d1 = normalized(delta1, scale)?;
    for &m in &EPS_GRID {
        for eps in [m, -m] {
            if let Some(st) = perturbed(g, delta0, &d1, eps) {
                return Ok(PerturbOutcome {
                    stabilizer: st,
                    epsilon: eps,
                    delta1: d1,
                    retried: false,
                });
            }
        }
    }
    Err(Error::SearchExhausted)
}

/// Turn a marginal stabilizer into a strict one by a small stable perturbation.
///
/// The given direction (default `1`) is tried first, then `1/(s+1)` and
/// `(2s+1)/(s+1)`.
pub fn perturb_to_strict(
    g: &RationalTF,
    delta0: &Stabilizer,
    delta1: Option<&RationalTF>,
) -> Result<PerturbOutcome> {
    let tol = g.tolerances();
    let cl = closed_loop_poles_pair(g, &delta0.delta)?;
    if cl.iter().any(|r| r.value.re > tol.axis_band(r.value.norm())) {
        return Err(Error::HypothesisViolated(
            "closed loop with the seed perturbation has poles in the open right half-plane".into(),
        ));
    }
    if strictly_stabilizes(g, &delta0.delta).is_some() {
        return Ok(PerturbOutcome {
            stabilizer: Stabilizer {
                cl_poles: cl,
                ..delta0.clone()
            },
            epsilon: 0.0,
            delta1: RationalTF::constant(0.0),
            retried: false,
        });
    }
    let mut dirs = fallback_directions();
    if let Some(d) = delta1 {
        dirs.insert(0, d.clone());
    }
    for (k, d) in dirs.iter().enumerate() {
        match perturb_with(g, delta0, d) {
            Ok(mut out) => {
                out.retried = k > 0;
                return Ok(out);
            }
            Err(Error::SearchExhausted) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SearchExhausted)
}

/// Borderline cases: exact when strict stabilizers approach `rho_p` as `eps -> 0`
/// along one fixed direction, which closes the sandwich constructively.
fn resolve_borderline(g: &RationalTF, omega: f64, rho_p: f64) -> Option<(Stabilizer, Stabilizer)> {
    let delta0 = synthesize_at(g, omega).ok()?;
    for d in fallback_directions() {
        let d1 = normalized(&d, delta0.hinf_norm).ok()?;
        for sign in [1.0, -1.0] {
            let mut last = None;
            let all = [1e-2, 1e-3, 1e-4].iter().all(|&m| {
                match perturbed(g, &delta0, &d1, sign * m) {
                    Some(st) if st.hinf_norm / rho_p - 1.0 <= 2.0 * m => {
                        last = Some(st);
                        true
                    }
                    _ => false,
                }
            });
            if all {
                return Some((delta0, last?));
            }
        }
    }
    None
}

fn undecided(reason: &str) -> Exactness {
    Exactness::Undecided {
        reason: reason.to_string(),
    }
}

fn base_report(bounds: Bounds, class: ClassMembership) -> RirReport {
    RirReport {
        bounds,
        class,
        exactness: undecided("no applicable condition"),
        margin: f64::NAN,
        omega_p: None,
        stabilizer: None,
        strict_stabilizer: None,
        certificate: None,
        notch: None,
    }
}

/// Decide a single governing inequality: certify and stabilize when it holds
/// strictly, report a strict gap when it fails strictly, otherwise try the
/// constructive resolution.
fn decide(g: &RationalTF, report: &mut RirReport, omega: f64, margin: f64, rhs: f64) -> Result<()> {
    let band = g.tolerances().cond_band(rhs);
    report.margin = margin;
    report.omega_p = Some(omega);
    let rho_p = report.bounds.rho_p;
    if margin > band {
        let st = synthesize_at(g, omega)?;
        let cert = marginal_stability_certificate(&g.mul(&st.delta)?, omega)?;
        if !cert.certificate.is_certified() {
            report.exactness = undecided("synthesized stabilizer failed the marginal-stability certificate");
            report.certificate = Some(cert);
            report.stabilizer = Some(st);
            return Ok(());
        }
        report.exactness = Exactness::Exact { value: rho_p };
        report.strict_stabilizer = perturb_to_strict(g, &st, None).ok().map(|o| o.stabilizer);
        report.certificate = Some(cert);
        report.stabilizer = Some(st);
    } else if margin < -band {
        report.exactness = Exactness::StrictGap;
    } else if let Some((st, strict)) = resolve_borderline(g, omega, rho_p) {
        report.exactness = Exactness::Exact { value: rho_p };
        report.stabilizer = Some(st);
        report.strict_stabilizer = Some(strict);
    } else {
        report.exactness = undecided("borderline: margin within the strictness band");
    }
    Ok(())
}

/// Exactness of the peak-gain bound, dispatched on the subclass of `g`.
pub fn exact_rir_certificate(g: &RationalTF) -> Result<RirReport> {
    let class = in_g(g)?;
    if !class.pip {
        return Err(Error::PipFailed);
    }
    let bounds = bounds_for(g, &class)?;
    let subclass = class.subclass;
    let mut report = base_report(bounds, class);
    match subclass {
        Subclass::Zero(1) => {
            let (m, rhs) = peak_margin(g, 0.0)?;
            decide(g, &mut report, 0.0, m, rhs)?;
        }
        Subclass::Sharp(2) => {
            let class = report.class.clone();
            if let Some((w, m, rhs)) = governing_peak(g, &class)? {
                decide(g, &mut report, w, m, rhs)?;
            }
        }
        Subclass::Sharp(1) => {
            let peak = 1.0 / bounds.rho_p;
            report.margin = g.eval_unchecked(jw(0.0)).norm() - peak;
            report.omega_p = report.class.peaks.as_ref().and_then(|p| p.peaks.first().copied());
            report.exactness = Exactness::StrictGap;
        }
        Subclass::Dagger(_) => return multi_peak_certificate(g),
        Subclass::Zero(2) => {
            report.omega_p = Some(0.0);
            report.exactness = undecided("G_2^0: exactness is an open problem");
        }
        Subclass::Zero(_) | Subclass::Sharp(_) => {
            report.exactness = undecided("no exactness condition for three or more unstable poles");
        }
        Subclass::Other => {
            report.exactness = undecided("peak structure outside the single- and multi-peak classes");
        }
    }
    Ok(report)
}

/// Inverse notch filters isolating one peak: `(eta s + 1)/(s + 1)` at the origin and
/// `(eta s^2 + s + eta w^2)/(s^2 + s + w^2)` at `w > 0`.
pub fn notch_filter(eta: f64, omega: f64) -> Result<RationalTF> {
    if omega == 0.0 {
        RationalTF::new(vec![1.0, eta], vec![1.0, 1.0])
    } else {
        let w2 = omega * omega;
        RationalTF::new(vec![eta * w2, 1.0, eta], vec![w2, 1.0, 1.0])
    }
}

fn notch_check(g: &RationalTF, omega: f64, margin: f64, n: usize) -> Result<NotchCheck> {
    let eta = (1.0 - margin / 4.0).clamp(0.9, 1.0 - 1e-6);
    let filtered = g.mul(&notch_filter(eta, omega)?)?;
    let class = class_membership(&filtered);
    let (m, _) = peak_margin(&filtered, omega)?;
    let expected = if omega == 0.0 { Subclass::Zero(n) } else { Subclass::Sharp(n) };
    let peak_ok = class
        .peaks
        .as_ref()
        .is_some_and(|p| p.peaks.len() == 1 && (p.peaks[0] - omega).abs() <= 1e-6 * (1.0 + omega));
    Ok(NotchCheck {
        eta,
        omega,
        filtered_subclass: class.subclass,
        filtered_margin: m,
        consistent: class.subclass == expected && peak_ok && m > 0.0,
    })
}

/// Exactness for systems with several equal peaks: the single-peak inequality at
/// the origin (one unstable pole) or at the best positive peak (two).
pub fn multi_peak_certificate(g: &RationalTF) -> Result<RirReport> {
    let class = in_g(g)?;
    let n = match class.subclass {
        Subclass::Dagger(n) => n,
        _ => return Err(Error::NotDagger),
    };
    if !class.pip {
        return Err(Error::PipFailed);
    }
    let bounds = bounds_for(g, &class)?;
    let peak = governing_peak(g, &class)?;
    let mut report = base_report(bounds, class);
    let Some((w, m, rhs)) = peak else {
        report.exactness = undecided("no positive peak frequency");
        return Ok(report);
    };
    decide(g, &mut report, w, m, rhs)?;
    if matches!(report.exactness, Exactness::Exact { .. }) && m > 0.0 {
        report.notch = Some(notch_check(g, w, m, n)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondOrderClass {
    NotInG,
    G10,
    G2Zero,
    G2Sharp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderRecord {
    pub p: f64,
    pub q: f64,
    pub class: SecondOrderClass,
    pub omega_p: Option<f64>,
    /// Sigma-gain change rate at the origin, `-p/q`.
    pub m_zero: f64,
    /// Sigma-gain change rate at the positive peak, `-2/p`.
    pub m_peak: Option<f64>,
    /// `|sin(theta_g(w_p)) / w_p| = 2 / sqrt(4q - p^2)` at a positive peak.
    pub sin_ratio: Option<f64>,
    pub rho_p: Option<f64>,
    pub rho_o: Option<f64>,
    pub exactness: Option<Exactness>,
}

/// Closed-form analysis of `g = 1/(s^2 + p s + q)`.
pub fn second_order_closed_form(p: f64, q: f64) -> Result<SecondOrderRecord> {
    if q == 0.0 || !p.is_finite() || !q.is_finite() {
        return Err(Error::InvalidInput("second-order family requires finite p and q != 0".into()));
    }
    let mut rec = SecondOrderRecord {
        p,
        q,
        class: SecondOrderClass::NotInG,
        omega_p: None,
        m_zero: -p / q,
        m_peak: None,
        sin_ratio: None,
        rho_p: None,
        rho_o: None,
        exactness: None,
    };
    if q < 0.0 {
        rec.class = SecondOrderClass::G10;
        rec.omega_p = Some(0.0);
        rec.rho_p = Some(q.abs());
        rec.rho_o = Some(q.abs());
        rec.exactness = Some(if p >= 0.0 {
            Exactness::Exact { value: q.abs() }
        } else {
            Exactness::StrictGap
        });
    } else if p < 0.0 && 2.0 * q > p * p {
        let big = q - p * p / 2.0;
        let rho = p.abs() * (q - p * p / 4.0).sqrt();
        rec.class = SecondOrderClass::G2Sharp;
        rec.omega_p = Some(big.sqrt());
        rec.m_peak = Some(-2.0 / p);
        rec.sin_ratio = Some(2.0 / (4.0 * q - p * p).sqrt());
        rec.rho_p = Some(rho);
        rec.exactness = Some(Exactness::Exact { value: rho });
    } else if p < 0.0 {
        rec.class = SecondOrderClass::G2Zero;
        rec.omega_p = Some(0.0);
        rec.rho_p = Some(q.abs());
        rec.exactness = Some(undecided("G_2^0: exactness is an open problem"));
    }
    Ok(rec)
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::{change_rates, gain_phase};
    use crate::stability::{classify_roots, Certificate, StabilityKind};

    fn tf(num: &[f64], den: &[f64]) -> RationalTF {
        RationalTF::new(num.to_vec(), den.to_vec()).unwrap()
    }

    fn second(p: f64, q: f64) -> RationalTF {
        tf(&[1.0], &[q, p, 1.0])
    }

    #[test]
    fn bounds_examples() {
        let b = rir_bounds(&second(1.0, -1.0)).unwrap();
        assert!((b.rho_o.unwrap() - 1.0).abs() < 1e-14);
        assert!((b.rho_p - 1.0).abs() < 1e-12);
        let b = rir_bounds(&second(-1.0, 1.0)).unwrap();
        assert!((b.rho_p - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(b.rho_o, None);
        assert!(matches!(rir_bounds(&second(1.0, 1.0)), Err(Error::NotInG(_))));
    }

    #[test]
    fn allpass_stabilizer_for_unstable_pair() {
        let g = second(-1.0, 1.0);
        let st = synthesize_marginal_stabilizer(&g).unwrap();
        assert_eq!(st.kind, StabilizerKind::FirstOrderAllpass);
        let (_, theta) = gain_phase(&g, 1.0 / 2f64.sqrt()).unwrap();
        assert!((theta - 0.955316618124509).abs() < 1e-12);
        assert!((st.a.unwrap() - 1.0 / 2f64.sqrt() / (theta / 2.0).tan()).abs() < 1e-12);
        assert!((st.a.unwrap() - 1.3660254).abs() < 1e-6);
        assert!((st.hinf_norm - 3f64.sqrt() / 2.0).abs() < 1e-12);
        let norm = linf_norm_and_peaks(&st.delta).unwrap().peak_gain;
        assert!((norm - st.hinf_norm).abs() < 1e-10);
    }

    #[test]
    fn phase_matching_at_peak() {
        let g = second(-1.0, 1.0);
        let st = synthesize_marginal_stabilizer(&g).unwrap();
        let l = g.mul(&st.delta).unwrap().eval_jw(st.omega).unwrap();
        assert!((l - 1.0).norm() < 1e-9);
    }

    #[test]
    fn constant_stabilizer_at_origin() {
        let g = second(1.0, -1.0);
        let st = synthesize_marginal_stabilizer(&g).unwrap();
        assert_eq!(st.kind, StabilizerKind::Constant);
        assert!((st.delta.eval_unchecked(jw(0.0)) + 1.0).norm() < 1e-14);
        let v = classify_roots(&st.cl_poles, g.tolerances());
        assert_eq!(v.single_mode, Some(0.0));
    }

    #[test]
    fn condition_failure_reports_margin() {
        let g = second(-1.0, -1.0);
        match synthesize_marginal_stabilizer(&g) {
            Err(Error::ConditionFailed { margin }) => assert!((margin + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certificate_examples() {
        let r = exact_rir_certificate(&second(1.0, -1.0)).unwrap();
        assert_eq!(r.exactness, Exactness::Exact { value: r.bounds.rho_p });
        assert!((r.bounds.rho_p - 1.0).abs() < 1e-12);

        let r = exact_rir_certificate(&second(-1.0, 1.0)).unwrap();
        assert!(matches!(r.exactness, Exactness::Exact { .. }));
        assert!((r.omega_p.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let c = r.certificate.unwrap();
        assert_eq!(c.certificate, Certificate::CertifiedIia);

        let r = exact_rir_certificate(&second(-2.0, 1.0)).unwrap();
        assert!(matches!(r.exactness, Exactness::Undecided { .. }));

        let r = exact_rir_certificate(&second(-1.0, -1.0)).unwrap();
        assert_eq!(r.exactness, Exactness::StrictGap);
    }

    #[test]
    fn boundary_resolved_by_perturbation() {
        let g = second(0.0, -2.0);
        let r = exact_rir_certificate(&g).unwrap();
        assert_eq!(r.exactness, Exactness::Exact { value: 2.0 });
        let strict = r.strict_stabilizer.unwrap();
        assert!(strict.hinf_norm <= 2.0 * 1.02);
    }

    #[test]
    fn pip_failure() {
        let g = tf(&[-1.0, 1.0], &[-2.0, -1.0, 1.0]);
        assert_eq!(exact_rir_certificate(&g).unwrap_err(), Error::PipFailed);
    }

    #[test]
    fn perturbation_strictly_stabilizes() {
        let g = second(-1.0, 1.0);
        let st = synthesize_marginal_stabilizer(&g).unwrap();
        let out = perturb_to_strict(&g, &st, None).unwrap();
        let v = classify_roots(&out.stabilizer.cl_poles, g.tolerances());
        assert_eq!(v.kind, StabilityKind::ExponentiallyStable);
        let rho = 3f64.sqrt() / 2.0;
        let eps = out.epsilon.abs();
        assert!(out.stabilizer.hinf_norm <= rho * (1.0 + 2.0 * eps * (1.0 / rho)));
    }

    #[test]
    fn strict_seed_is_returned_unchanged() {
        let g = tf(&[1.0], &[-1.0, 1.0]);
        let st = synthesize_at(&g, 0.0).unwrap();
        let mut seed = st.clone();
        seed.delta = RationalTF::constant(-2.0);
        seed.hinf_norm = 2.0;
        let out = perturb_to_strict(&g, &seed, None).unwrap();
        assert_eq!(out.epsilon, 0.0);
        assert_eq!(out.stabilizer.delta, seed.delta);
    }

    #[test]
    fn adversarial_direction_falls_back() {
        let g = second(-1.0, 1.0);
        let st = synthesize_marginal_stabilizer(&g).unwrap();
        let w2 = st.omega * st.omega;
        // Vanishes at the closed-loop axis mode, so it cannot move those roots.
        let d1 = tf(&[w2, 0.0, 1.0], &[1.0, 2.0, 1.0]);
        assert_eq!(perturb_with(&g, &st, &d1).unwrap_err(), Error::SearchExhausted);
        let out = perturb_to_strict(&g, &st, Some(&d1)).unwrap();
        assert!(out.retried);
    }

    #[test]
    fn closed_forms_match_pipeline() {
        for (p, q) in [(1.0, -1.0), (-1.0, 1.0), (-2.0, 1.0), (-0.3, 2.5), (2.0, -0.5)] {
            let rec = second_order_closed_form(p, q).unwrap();
            let g = second(p, q);
            assert!((change_rates(&g, 0.0).unwrap().sigma_gain_cr - rec.m_zero).abs() < 1e-9);
            let b = rir_bounds(&g).unwrap();
            assert!((b.rho_p - rec.rho_p.unwrap()).abs() < 1e-9);
            if let Some(w) = rec.omega_p.filter(|w| *w > 0.0) {
                let s = change_rates(&g, w).unwrap();
                assert!((s.sigma_gain_cr - rec.m_peak.unwrap()).abs() < 1e-9);
                let (_, ratio) = phase_terms(&g, w).unwrap();
                assert!((ratio.abs() - rec.sin_ratio.unwrap()).abs() < 1e-9);
            }
        }
        assert_eq!(second_order_closed_form(1.0, 1.0).unwrap().class, SecondOrderClass::NotInG);
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_phase(PI), PI);
    }
}
