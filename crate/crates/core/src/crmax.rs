//! Phase change-rate maximization under a phase constraint at one frequency:
//! closed-form suprema, attaining all-pass functions, the supporting
//! inequalities, and brute-force sweeps that confirm the suprema.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{gain_phase, linf_norm_and_peaks, require_minimum_phase};
use crate::rational::RationalTF;
use crate::rir::wrap_phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ApFirst,
    ApSecondReal,
    ApSecondComplex,
    ApProduct,
    MinPhase,
    Delay,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ap_first" | "first" => Ok(Family::ApFirst),
            "ap_second_real" | "second_real" => Ok(Family::ApSecondReal),
            "ap_second_complex" | "second_complex" => Ok(Family::ApSecondComplex),
            "ap_product" | "product" => Ok(Family::ApProduct),
            "minphase" | "min_phase" => Ok(Family::MinPhase),
            "delay" => Ok(Family::Delay),
            other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::ApFirst => "ap_first",
            Family::ApSecondReal => "ap_second_real",
            Family::ApSecondComplex => "ap_second_complex",
            Family::ApProduct => "ap_product",
            Family::MinPhase => "minphase",
            Family::Delay => "delay",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrMaxProblem {
    pub omega_p: f64,
    /// Required phase at `omega_p`, in `(-pi, pi]`.
    pub theta_p: f64,
    pub family: Family,
}

impl CrMaxProblem {
    pub fn new(omega_p: f64, theta_p: f64, family: Family) -> Result<Self> {
        if !omega_p.is_finite() || omega_p < 0.0 {
            return Err(Error::DomainViolation(format!("omega_p = {omega_p} must be finite and nonnegative")));
        }
        if !theta_p.is_finite() || theta_p <= -PI || theta_p > PI {
            return Err(Error::DomainViolation(format!("theta_p = {theta_p} outside (-pi, pi]")));
        }
        Ok(Self {
            omega_p,
            theta_p,
            family,
        })
    }
}

/// `sup theta_f'(w_p)` over stable real-rational `f` with `theta_f(w_p) = theta_p`.
pub fn closed_form_sup(prob: &CrMaxProblem) -> f64 {
    if prob.omega_p == 0.0 {
        0.0
    } else {
        -(prob.theta_p.sin() / prob.omega_p).abs()
    }
}

/// Unit-gain stable all-pass functions built from first- and second-order factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AllpassDescriptor {
    Unit,
    /// `(a - s)/(a + s)`
    First { a: f64 },
    /// `(s^2 - b s + a)/(s^2 + b s + a)`
    Second { a: f64, b: f64 },
    Product { factors: Vec<AllpassDescriptor> },
    Negated { inner: Box<AllpassDescriptor> },
}

impl AllpassDescriptor {
    pub fn negated(self) -> Self {
        AllpassDescriptor::Negated { inner: Box::new(self) }
    }

    /// Sigma-gain change rate at `w`, equal to the phase change rate.
    pub fn allpass_cr(&self, omega: f64) -> f64 {
        match self {
            AllpassDescriptor::Unit => 0.0,
            AllpassDescriptor::First { a } => first_cr(*a, omega),
            AllpassDescriptor::Second { a, b } => second_cr(*a, *b, omega),
            AllpassDescriptor::Product { factors } => factors.iter().map(|f| f.allpass_cr(omega)).sum(),
            AllpassDescriptor::Negated { inner } => inner.allpass_cr(omega),
        }
    }

    /// Phase at `w`, wrapped to `(-pi, pi]`.
    pub fn phase(&self, omega: f64) -> f64 {
        wrap_phase(self.raw_phase(omega))
    }

    fn raw_phase(&self, omega: f64) -> f64 {
        match self {
            AllpassDescriptor::Unit => 0.0,
            AllpassDescriptor::First { a } => first_phase(*a, omega),
            AllpassDescriptor::Second { a, b } => second_phase(*a, *b, omega),
            AllpassDescriptor::Product { factors } => factors.iter().map(|f| f.raw_phase(omega)).sum(),
            AllpassDescriptor::Negated { inner } => inner.raw_phase(omega) + PI,
        }
    }

    pub fn to_rtf(&self) -> Result<RationalTF> {
        match self {
            AllpassDescriptor::Unit => Ok(RationalTF::constant(1.0)),
            AllpassDescriptor::First { a } => RationalTF::new(vec![*a, -1.0], vec![*a, 1.0]),
            AllpassDescriptor::Second { a, b } => RationalTF::new(vec![*a, -*b, 1.0], vec![*a, *b, 1.0]),
            AllpassDescriptor::Product { factors } => factors
                .iter()
                .try_fold(RationalTF::constant(1.0), |acc, f| acc.mul(&f.to_rtf()?)),
            AllpassDescriptor::Negated { inner } => Ok(inner.to_rtf()?.neg()),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            AllpassDescriptor::Unit => 0,
            AllpassDescriptor::First { .. } => 1,
            AllpassDescriptor::Second { .. } => 2,
            AllpassDescriptor::Product { factors } => factors.iter().map(|f| f.order()).sum(),
            AllpassDescriptor::Negated { inner } => inner.order(),
        }
    }
}

fn first_cr(a: f64, w: f64) -> f64 {
    -2.0 * a / (w * w + a * a)
}

fn first_phase(a: f64, w: f64) -> f64 {
    -2.0 * (w / a).atan()
}

fn second_cr(a: f64, b: f64, w: f64) -> f64 {
    let al = a - w * w;
    -(2.0 * al * b + 4.0 * w * w * b) / (al * al + b * b * w * w)
}

fn second_phase(a: f64, b: f64, w: f64) -> f64 {
    -2.0 * (b * w).atan2(a - w * w)
}

/// Attaining function: a constant `+-1` when `sin(theta_p) = 0`, otherwise the
/// first-order all-pass `(a - s)/(a + s)` or its negation.
pub fn attain_sup(prob: &CrMaxProblem) -> Result<AllpassDescriptor> {
    let (w, th) = (prob.omega_p, prob.theta_p);
    if th == 0.0 || th.sin().abs() <= 1e-12 && th.cos() > 0.0 {
        return Ok(AllpassDescriptor::Unit);
    }
    if th.sin().abs() <= 1e-12 {
        return Ok(AllpassDescriptor::Unit.negated());
    }
    if w == 0.0 {
        return Err(Error::NoAttainment);
    }
    if th < 0.0 {
        Ok(AllpassDescriptor::First {
            a: w / (-th / 2.0).tan(),
        })
    } else {
        Ok(AllpassDescriptor::First {
            a: w * (th / 2.0).tan(),
        }
        .negated())
    }
}

/// `(sum sin(t_i), -|sin(sum t_i)|)` for angles in `[-pi, 0]`.
pub fn sine_sum_bound(thetas: &[f64]) -> Result<(f64, f64)> {
    if let Some(t) = thetas.iter().find(|t| !(-PI..=0.0).contains(*t)) {
        return Err(Error::DomainViolation(format!("angle {t} outside [-pi, 0]")));
    }
    let lhs = thetas.iter().map(|t| t.sin()).sum();
    let rhs = -thetas.iter().sum::<f64>().sin().abs();
    Ok((lhs, rhs))
}

/// `(theta_f'(w_p), -|theta_f(w_p)/w_p|)` for minimum-phase `f` peaking at `w_p`;
/// the bound is `0` at `w_p = 0`.
pub fn minphase_bound_check(f: &RationalTF, omega_p: f64) -> Result<(f64, f64)> {
    require_minimum_phase(f)?;
    let tol = f.tolerances();
    let peak = linf_norm_and_peaks(f)?.peak_gain;
    let gain = f.eval_jw(omega_p)?.norm();
    if (peak - gain) > tol.peak * peak.max(f64::MIN_POSITIVE) {
        return Err(Error::PeakMismatch { gain, peak });
    }
    let (_, theta) = gain_phase(f, omega_p)?;
    if theta <= -PI || theta > PI {
        return Err(Error::DomainViolation(format!("phase {theta} at the peak outside (-pi, pi]")));
    }
    let lhs = f.log_derivative(Complex64::new(0.0, omega_p)).re;
    let rhs = if omega_p == 0.0 {
        0.0
    } else {
        -(theta / omega_p).abs()
    };
    Ok((lhs, rhs))
}

/// Phase change rates of the pure delay `e^{-Ls}` with `L = theta_p/w_p` and
/// of the best rational all-pass meeting the same phase.
pub fn delay_comparison(omega_p: f64, theta_p: f64) -> Result<(f64, f64)> {
    if !(omega_p > 0.0 && omega_p.is_finite()) || !(theta_p > 0.0 && theta_p < PI) {
        return Err(Error::DomainViolation(format!(
            "delay comparison needs w_p > 0 and theta_p in (0, pi), got ({omega_p}, {theta_p})"
        )));
    }
    Ok((-theta_p / omega_p, -theta_p.sin() / omega_p))
}

/// Split a stable all-pass `f` into `k * descriptor` with `k > 0` by pairing
/// its poles; zeros are their mirror images.
pub fn factor_allpass(f: &RationalTF) -> Result<(f64, AllpassDescriptor)> {
    if !f.is_stable() || !f.is_proper() || f.is_zero() {
        return Err(Error::InvalidInput("all-pass must be stable, proper and nonzero".into()));
    }
    let tol = f.tolerances();
    let poles = f.poles();
    let zeros = f.zeros();
    if poles.count() != zeros.count() {
        return Err(Error::InvalidInput("not all-pass: pole and zero counts differ".into()));
    }
    for p in poles.iter() {
        let mirror = -p.value.conj();
        let hit = zeros
            .iter()
            .any(|z| z.multiplicity == p.multiplicity && (z.value - mirror).norm() <= tol.cluster_radius(mirror.norm()));
        if !hit {
            return Err(Error::InvalidInput("not all-pass: zero set is not the mirror of the pole set".into()));
        }
    }
    let mut factors = Vec::new();
    for p in poles.iter() {
        if p.value.im < 0.0 {
            continue;
        }
        for _ in 0..p.multiplicity {
            if p.value.im == 0.0 {
                factors.push(AllpassDescriptor::First { a: -p.value.re });
            } else {
                factors.push(AllpassDescriptor::Second {
                    a: p.value.norm_sqr(),
                    b: -2.0 * p.value.re,
                });
            }
        }
    }
    let desc = match factors.len() {
        0 => AllpassDescriptor::Unit,
        1 => factors.pop().expect("one factor"),
        _ => AllpassDescriptor::Product { factors },
    };
    // Compare at a point where neither side vanishes.
    let s = Complex64::new(0.0, 1.0 + poles.iter().map(|r| r.value.norm()).fold(0.0, f64::max));
    let ratio = f.eval_unchecked(s) / desc.to_rtf()?.eval_unchecked(s);
    let k = ratio.norm();
    Ok(if ratio.re >= 0.0 {
        (k, desc)
    } else {
        (k, desc.negated())
    })
}

/// Sweep resolution for [`brute_force_sup`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Evaluations per structure; each free parameter gets `budget^(1/d)` points.
    pub budget: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            budget: 1_000_000,
            lo: 1e-3,
            hi: 1e3,
        }
    }
}

impl GridSpec {
    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }

    fn axis(&self, dims: usize) -> Vec<f64> {
        let n = ((self.budget as f64).powf(1.0 / dims.max(1) as f64).floor() as usize).max(8);
        let (l0, l1) = (self.lo.ln(), self.hi.ln());
        (0..n)
            .map(|k| (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrMaxResult {
    pub supremum: f64,
    pub attained_by: Option<AllpassDescriptor>,
    pub oracle_best: f64,
    pub oracle_argmax: Vec<f64>,
    pub oracle_best_descriptor: AllpassDescriptor,
    /// Best value after Newton refinement of the phase constraint (first order only).
    pub polished: Option<f64>,
    /// Resolution allowance for `oracle_best <= supremum + slack`.
    pub slack: f64,
    pub phase_tol: f64,
    pub feasible: usize,
    pub evaluated: usize,
}

impl CrMaxResult {
    pub fn gap(&self) -> f64 {
        self.supremum - self.oracle_best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    F,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Poles {
    Any,
    Real,
    Complex,
}

struct Candidate {
    value: f64,
    desc: AllpassDescriptor,
    params: Vec<f64>,
}

fn better(x: Option<Candidate>, y: Option<Candidate>) -> Option<Candidate> {
    match (x, y) {
        (Some(a), Some(b)) => Some(if b.value > a.value { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn pole_ok(a: f64, b: f64, kind: Poles) -> bool {
    match kind {
        Poles::Any => true,
        Poles::Real => b * b >= 4.0 * a,
        Poles::Complex => b * b < 4.0 * a,
    }
}

fn assemble(mut factors: Vec<AllpassDescriptor>, negate: bool) -> AllpassDescriptor {
    let d = if factors.len() == 1 {
        factors.pop().expect("one factor")
    } else {
        AllpassDescriptor::Product { factors }
    };
    if negate {
        d.negated()
    } else {
        d
    }
}

/// Last first-order factor meeting a residual phase `target`: `(a, negated)`.
fn complete_first(target: f64, w: f64) -> Option<(f64, bool)> {
    let (neg, t) = if target < 0.0 { (false, target) } else { (true, target - PI) };
    if t <= -PI || t >= 0.0 {
        return None;
    }
    let a = w / (-t / 2.0).tan();
    (a.is_finite() && a > 0.0).then_some((a, neg))
}

/// Last second-order factor with fixed `a` meeting a residual phase `target`,
/// for the plain and negated sign: `b` or `None`.
fn complete_second(target: f64, a: f64, w: f64, kind: Poles) -> [Option<f64>; 2] {
    let alpha = a - w * w;
    [false, true].map(|neg| {
        let t = wrap_phase(target - if neg { PI } else { 0.0 });
        let psi = (-t / 2.0).rem_euclid(PI);
        if (psi - PI / 2.0).abs() < 1e-15 {
            return None;
        }
        let b = alpha * psi.tan() / w;
        (b.is_finite() && b > 0.0 && pole_ok(a, b, kind)).then_some(b)
    })
}

const MAX_DIMS: usize = 8;

/// Enumerate a factor structure: all but the last factor are gridded, the
/// last one is solved from the phase constraint so every candidate is feasible.
fn sweep_structure(
    w: f64,
    theta: f64,
    structure: &[Factor],
    kind: Poles,
    grid: &GridSpec,
) -> (Option<Candidate>, usize) {
    let (last, rest) = structure.split_last().expect("nonempty structure");
    let dims: usize = rest.iter().map(|f| if *f == Factor::F { 1 } else { 2 }).sum::<usize>()
        + usize::from(*last == Factor::S);
    assert!(dims <= MAX_DIMS);
    let axis = grid.axis(dims);
    let n = axis.len();
    let total = n.pow(dims as u32);
    let first: Vec<(f64, f64)> = axis.iter().map(|&a| (first_phase(a, w), first_cr(a, w))).collect();
    let second: Vec<Option<(f64, f64)>> = if rest.contains(&Factor::S) {
        (0..n * n)
            .map(|k| {
                let (a, b) = (axis[k % n], axis[k / n]);
                pole_ok(a, b, kind).then(|| (second_phase(a, b, w), second_cr(a, b, w)))
            })
            .collect()
    } else {
        Vec::new()
    };
    let value_at = |mut idx: usize| -> Option<f64> {
        let (mut phase, mut cr) = (0.0, 0.0);
        for f in rest {
            let (p, c) = match f {
                Factor::F => {
                    let e = first[idx % n];
                    idx /= n;
                    e
                }
                Factor::S => {
                    let e = second[idx % (n * n)]?;
                    idx /= n * n;
                    e
                }
            };
            phase += p;
            cr += c;
        }
        let target = wrap_phase(theta - phase);
        match last {
            Factor::F => complete_first(target, w).map(|(a, _)| cr + first_cr(a, w)),
            Factor::S => {
                let a = axis[idx % n];
                complete_second(target, a, w, kind)
                    .iter()
                    .flatten()
                    .map(|&b| cr + second_cr(a, b, w))
                    .reduce(f64::max)
            }
        }
    };
    let best = (0..total)
        .into_par_iter()
        .filter_map(|idx| value_at(idx).map(|v| (v, idx)))
        .reduce_with(|x, y| if y.0 > x.0 { y } else { x });
    let candidate = best.and_then(|(_, mut idx)| {
        let mut params = [0.0; MAX_DIMS];
        for p in params.iter_mut().take(dims) {
            *p = axis[idx % n];
            idx /= n;
        }
        complete(w, theta, rest, *last, kind, &params[..dims])
    });
    (candidate, total)
}

fn complete(w: f64, theta: f64, rest: &[Factor], last: Factor, kind: Poles, params: &[f64]) -> Option<Candidate> {
    let mut factors = Vec::with_capacity(rest.len() + 1);
    let mut it = params.iter().copied();
    let (mut phase, mut cr) = (0.0, 0.0);
    for f in rest {
        match f {
            Factor::F => {
                let a = it.next()?;
                phase += first_phase(a, w);
                cr += first_cr(a, w);
                factors.push(AllpassDescriptor::First { a });
            }
            Factor::S => {
                let (a, b) = (it.next()?, it.next()?);
                if !pole_ok(a, b, kind) {
                    return None;
                }
                phase += second_phase(a, b, w);
                cr += second_cr(a, b, w);
                factors.push(AllpassDescriptor::Second { a, b });
            }
        }
    }
    let target = wrap_phase(theta - phase);
    let mut best: Option<Candidate> = None;
    let mut push = |value: f64, factor: AllpassDescriptor, neg: bool, extra: f64| {
        let mut fs = factors.clone();
        fs.push(factor);
        let mut p = params.to_vec();
        p.push(extra);
        let c = Candidate {
            value,
            desc: assemble(fs, neg),
            params: p,
        };
        best = better(best.take(), Some(c));
    };
    match last {
        Factor::F => {
            let (a, neg) = complete_first(target, w)?;
            push(cr + first_cr(a, w), AllpassDescriptor::First { a }, neg, a);
        }
        Factor::S => {
            let a = it.next()?;
            for (k, b) in complete_second(target, a, w, kind).into_iter().enumerate() {
                if let Some(b) = b {
                    push(cr + second_cr(a, b, w), AllpassDescriptor::Second { a, b }, k == 1, b);
                }
            }
        }
    }
    best
}

fn structures(family: Family) -> Result<(Vec<Vec<Factor>>, Poles)> {
    use Factor::{F, S};
    Ok(match family {
        Family::ApSecondReal => (vec![vec![S]], Poles::Real),
        Family::ApSecondComplex => (vec![vec![S]], Poles::Complex),
        Family::ApProduct => (
            vec![
                vec![F, F],
                vec![F, F, F],
                vec![F, F, F, F],
                vec![F, S],
                vec![F, F, S],
                vec![S, S],
            ],
            Poles::Any,
        ),
        _ => {
            return Err(Error::InvalidInput(format!(
                "brute-force sweep not available for family {family}"
            )))
        }
    })
}

/// Independent grid oracle for the supremum of the phase change rate over one
/// all-pass family.
pub fn brute_force_sup(prob: &CrMaxProblem, grid: &GridSpec) -> Result<CrMaxResult> {
    let (w, theta) = (prob.omega_p, prob.theta_p);
    let supremum = closed_form_sup(prob);
    let attained_by = attain_sup(prob).ok();
    let phase_tol = 1e-3 * w.min(1.0);
    if prob.family == Family::ApFirst {
        return first_order_sweep(prob, grid, supremum, attained_by, phase_tol);
    }
    if w == 0.0 {
        return Err(Error::DomainViolation("higher-order sweeps need w_p > 0".into()));
    }
    let (shapes, kind) = structures(prob.family)?;
    let mut best = None;
    let mut evaluated = 0;
    for shape in &shapes {
        let (b, n) = sweep_structure(w, theta, shape, kind, grid);
        best = better(best, b);
        evaluated += n;
    }
    let best = best.ok_or(Error::EmptyFeasibleSet)?;
    Ok(CrMaxResult {
        supremum,
        attained_by,
        oracle_best: best.value,
        oracle_argmax: best.params,
        oracle_best_descriptor: best.desc,
        polished: None,
        slack: 1e-9 * (1.0 + supremum.abs()),
        phase_tol: 0.0,
        feasible: evaluated,
        evaluated,
    })
}

fn first_order_sweep(
    prob: &CrMaxProblem,
    grid: &GridSpec,
    supremum: f64,
    attained_by: Option<AllpassDescriptor>,
    phase_tol: f64,
) -> Result<CrMaxResult> {
    let (w, theta) = (prob.omega_p, prob.theta_p);
    let axis = grid.axis(1);
    let tol = if w == 0.0 { 1e-12 } else { phase_tol };
    let hits: Vec<(f64, f64, bool)> = axis
        .par_iter()
        .flat_map_iter(|&a| {
            [false, true].into_iter().filter_map(move |neg| {
                let ph = wrap_phase(first_phase(a, w) + if neg { PI } else { 0.0 });
                (wrap_phase(ph - theta).abs() <= tol).then(|| (first_cr(a, w), a, neg))
            })
        })
        .collect();
    let (value, a, neg) = hits
        .iter()
        .copied()
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .ok_or(Error::EmptyFeasibleSet)?;
    let polished = (w > 0.0).then(|| {
        let a = polish_first(a, w, theta, neg);
        first_cr(a, w)
    });
    let desc = AllpassDescriptor::First { a };
    Ok(CrMaxResult {
        supremum,
        attained_by,
        oracle_best: value,
        oracle_argmax: vec![a],
        oracle_best_descriptor: if neg { desc.negated() } else { desc },
        polished,
        slack: if w == 0.0 { 2.0 / grid.hi } else { tol / w },
        phase_tol: tol,
        feasible: hits.len(),
        evaluated: 2 * axis.len(),
    })
}

/// Newton iteration in `ln a` on the phase constraint of a first-order all-pass.
fn polish_first(a0: f64, w: f64, theta: f64, neg: bool) -> f64 {
    let mut t = a0.ln();
    for _ in 0..50 {
        let a = t.exp();
        let r = wrap_phase(first_phase(a, w) + if neg { PI } else { 0.0 } - theta);
        if r.abs() < 1e-15 {
            break;
        }
        let x = w / a;
        let slope = 2.0 * x / (1.0 + x * x);
        t -= r / slope;
    }
    t.exp()
}
