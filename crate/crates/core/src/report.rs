//! Machine-readable output: JSON reports rounded to 12 significant digits and
//! CSV curve tables headed by the tolerances in effect.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::crmax::{CrMaxProblem, CrMaxResult};
use crate::error::Result;
use crate::freq::sweep;
use crate::poly::RootSet;
use crate::rational::RationalTF;
use crate::rir::{Exactness, PerturbOutcome, RirReport, SecondOrderRecord, Stabilizer};
use crate::stability::NyquistCrossings;
use crate::tolerance::Tolerances;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Round every float in a JSON tree; non-finite values become `null`.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_json).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn roots_json(roots: &RootSet) -> Value {
    Value::Array(roots.expanded().iter().map(complex_json).collect())
}

fn complex_json(z: &Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn tf_json(f: &RationalTF) -> Value {
    json!({ "num": f.num().coeffs(), "den": f.den().coeffs() })
}

pub fn stabilizer_json(s: &Stabilizer) -> Value {
    let mut m = Map::new();
    m.insert("num".into(), json!(s.delta.num().coeffs()));
    m.insert("den".into(), json!(s.delta.den().coeffs()));
    m.insert("kind".into(), to_value(&s.kind));
    m.insert("hinf_norm".into(), json!(s.hinf_norm));
    m.insert("omega".into(), json!(s.omega));
    m.insert("a".into(), s.a.map_or(Value::Null, |a| json!(a)));
    m.insert("epsilon".into(), s.epsilon.map_or(Value::Null, |e| json!(e)));
    m.insert("closed_loop_poles".into(), roots_json(&s.cl_poles));
    Value::Object(m)
}

fn exactness_json(e: &Exactness) -> Value {
    to_value(e)
}

/// JSON of the `analyze` command.
pub fn analyze_json(g: &RationalTF, r: &RirReport) -> Value {
    let peaks = r.class.peaks.as_ref();
    let class = json!({
        "in_g": r.class.in_g,
        "n": r.class.n,
        "pip": r.class.pip,
        "subclass": r.class.subclass.to_string(),
        "peak_gain": peaks.map(|p| p.peak_gain),
        "peaks": peaks.map(|p| p.peaks.clone()).unwrap_or_default(),
    });
    let poles = r
        .stabilizer
        .as_ref()
        .map_or(Value::Array(vec![]), |s| roots_json(&s.cl_poles));
    let notch = r.notch.as_ref().map_or(Value::Null, |n| {
        json!({
            "eta": n.eta,
            "omega": n.omega,
            "filtered_subclass": n.filtered_subclass.to_string(),
            "filtered_margin": n.filtered_margin,
            "consistent": n.consistent,
        })
    });
    round_json(json!({
        "system": tf_json(g),
        "bounds": { "rho_p": r.bounds.rho_p, "rho_o": r.bounds.rho_o },
        "class": class,
        "exactness": exactness_json(&r.exactness),
        "margin": finite(r.margin),
        "omega_p": r.omega_p,
        "stabilizer": r.stabilizer.as_ref().map_or(Value::Null, stabilizer_json),
        "strict_stabilizer": r.strict_stabilizer.as_ref().map_or(Value::Null, stabilizer_json),
        "closed_loop_poles": poles,
        "notch": notch,
    }))
}

/// JSON of the `stabilize` command.
pub fn stabilize_json(g: &RationalTF, marginal: &Stabilizer, strict: &PerturbOutcome) -> Value {
    round_json(json!({
        "system": tf_json(g),
        "stabilizer": stabilizer_json(marginal),
        "strict": {
            "stabilizer": stabilizer_json(&strict.stabilizer),
            "epsilon": strict.epsilon,
            "delta1": tf_json(&strict.delta1),
            "retried": strict.retried,
        },
    }))
}

/// JSON of the `crmax` command.
pub fn crmax_json(prob: &CrMaxProblem, r: &CrMaxResult) -> Value {
    round_json(json!({
        "omega_p": prob.omega_p,
        "theta_p": prob.theta_p,
        "family": prob.family.to_string(),
        "closed_form": r.supremum,
        "oracle_best": r.oracle_best,
        "argmax": r.oracle_argmax,
        "gap": r.gap(),
        "polished": r.polished,
        "slack": r.slack,
        "feasible": r.feasible,
        "evaluated": r.evaluated,
        "best_allpass": to_value(&r.oracle_best_descriptor),
        "attained_by": r.attained_by.as_ref().map_or(Value::Null, to_value),
    }))
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

fn tolerance_header(tol: &Tolerances) -> String {
    let eps = tol.epsilon.map_or("auto".to_string(), |e| format!("{e:e}"));
    format!(
        "# tolerances: root={:e} cluster={:e} axis={:e} gcd={:e} peak={:e} cond={:e} trans={:e} epsilon={eps}\n",
        tol.root, tol.cluster, tol.axis, tol.gcd, tol.peak, tol.cond, tol.trans
    )
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{}", round_sig(x))
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

/// Logarithmically spaced frequencies on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Gain, phase and change-rate table.
pub fn bode_csv(f: &RationalTF, omegas: &[f64]) -> Result<String> {
    let rows = sweep(f, omegas)?;
    let mut out = tolerance_header(f.tolerances());
    out.push_str("omega,gain_log,phase,gain_cr,phase_cr,sigma_gain_cr,sigma_phase_cr\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(r.omega),
            num(r.gain_log),
            num(r.phase),
            num(r.gain_cr),
            num(r.phase_cr),
            num(r.sigma_gain_cr),
            num(r.sigma_phase_cr)
        );
    }
    Ok(out)
}

/// Offset Nyquist curve `L(jw + eps)` with the crossing summary as header comments.
pub fn nyquist_csv(l: &RationalTF, counts: &NyquistCrossings, omegas: &[f64]) -> String {
    let mut out = tolerance_header(l.tolerances());
    let _ = writeln!(
        out,
        "# epsilon={} nu_plus={} nu_minus={} nu_o={}",
        num(counts.epsilon),
        counts.nu_plus,
        counts.nu_minus,
        counts.nu_o
    );
    for c in &counts.crossing_freqs {
        let _ = writeln!(out, "# crossing omega={} re={} direction={}", num(c.omega), num(c.re), c.direction);
    }
    out.push_str("omega,re,im\n");
    for &w in omegas {
        let v = l.eval_unchecked(Complex64::new(counts.epsilon, w));
        let _ = writeln!(out, "{},{},{}", num(w), num(v.re), num(v.im));
    }
    out
}

fn exactness_tag(e: &Option<Exactness>) -> &'static str {
    match e {
        Some(Exactness::Exact { .. }) => "exact",
        Some(Exactness::StrictGap) => "strict_gap",
        Some(Exactness::Undecided { .. }) => "undecided",
        None => "not_in_g",
    }
}

/// Closed-form table of the second-order family.
pub fn sweep2nd_csv(records: &[SecondOrderRecord], tol: &Tolerances) -> String {
    let mut out = tolerance_header(tol);
    out.push_str("p,q,class,omega_p,m_zero,m_peak,sin_ratio,rho_p,rho_o,exactness\n");
    for r in records {
        let class = serde_json::to_value(r.class)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            num(r.p),
            num(r.q),
            class,
            opt(r.omega_p),
            num(r.m_zero),
            opt(r.m_peak),
            opt(r.sin_ratio),
            opt(r.rho_p),
            opt(r.rho_o),
            exactness_tag(&r.exactness)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1234567890123456), 0.123456789012);
        assert_eq!(round_sig(-98765.43210987654), -98765.4321099);
        assert_eq!(round_sig(0.0), 0.0);
        let v = round_json(json!({"x": [1.00000000000004, f64::NAN], "k": 3}));
        assert_eq!(v, json!({"x": [1.0, null], "k": 3}));
    }

    #[test]
    fn bode_header_and_rows() {
        let f = RationalTF::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let csv = bode_csv(&f, &[0.5, 1.0]).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert!(lines[0].starts_with("# tolerances:"));
        assert_eq!(lines.len(), 4);
        let row: Vec<f64> = lines[3].split(',').map(|x| x.parse().unwrap()).collect();
        assert!((row[2] + std::f64::consts::FRAC_PI_4).abs() < 1e-11);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-2, 1e2, 5);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[4] - 1e2).abs() < 1e-12);
        assert!((g[2] - 1.0).abs() < 1e-14);
    }
}
