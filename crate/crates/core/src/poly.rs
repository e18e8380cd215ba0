//! Real-coefficient univariate polynomials and their roots.
//!
//! Coefficients are stored in ascending order: `coeffs[k]` multiplies `s^k`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

/// Relative size below which a leading coefficient produced by cancellation is treated as zero.
const CANCEL_EPS: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given roots; complex roots must come with their conjugates.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(1.0 / self.leading())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `sum |c_k| |z|^k`, the natural scale for backward-error estimates at `z`.
    pub fn abs_eval(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// Taylor shift: the polynomial `q(s) = p(s + h)`.
    pub fn shift(&self, h: f64) -> Self {
        let mut c = self.coeffs.clone();
        let n = c.len();
        // Repeated synthetic division by (s - h).
        for i in 0..n {
            for k in (i..n - 1).rev() {
                c[k] += h * c[k + 1];
            }
        }
        Self::new(c)
    }

    /// Substitute `s = jw`, returning the real and imaginary parts as polynomials in `w`.
    pub fn on_imag_axis(&self) -> (Self, Self) {
        let mut re = vec![0.0; self.coeffs.len()];
        let mut im = vec![0.0; self.coeffs.len()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            // j^k cycles through 1, j, -1, -j.
            match k % 4 {
                0 => re[k] = c,
                1 => im[k] = c,
                2 => re[k] = -c,
                _ => im[k] = -c,
            }
        }
        (Self::new(re), Self::new(im))
    }

    /// Newton iteration on a real root estimate, keeping only steps that shrink `|p|`.
    pub fn polish_real_root(&self, mut x: f64) -> f64 {
        let dp = self.derivative();
        let mut fx = self.eval(x).abs();
        for _ in 0..8 {
            let d = dp.eval(x);
            if d == 0.0 {
                break;
            }
            let next = x - self.eval(x) / d;
            let fnext = self.eval(next).abs();
            if next.is_finite() && fnext < fx {
                x = next;
                fx = fnext;
            } else {
                break;
            }
        }
        x
    }

    /// Roots of the polynomial, with multiplicities and conjugate symmetry enforced.
    pub fn roots(&self, tol: &Tolerances) -> Result<RootSet> {
        poly_roots(self, tol)
    }

    fn trim_cancellation(mut coeffs: Vec<f64>, scale: f64) -> Self {
        let floor = CANCEL_EPS * scale;
        while let Some(&c) = coeffs.last() {
            if c.abs() <= floor {
                coeffs.pop();
            } else {
                break;
            }
        }
        Self::new(coeffs)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k] += c;
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            out[k] += sign * c;
        }
        let scale = self.max_abs_coeff().max(other.max_abs_coeff());
        Self::trim_cancellation(out, scale)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 if a == 1.0 => write!(f, "s")?,
                1 => write!(f, "{a}s")?,
                _ if a == 1.0 => write!(f, "s^{k}")?,
                _ => write!(f, "{a}s^{k}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Root>,
    /// Largest coefficient-scaled backward error `|p(z)| / sum |c_k||z|^k` over the roots.
    pub residual: f64,
}

impl RootSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sum of multiplicities.
    pub fn count(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    /// Every root repeated according to its multiplicity.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .flat_map(|r| std::iter::repeat(r.value).take(r.multiplicity))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter()
    }

    /// Roots with `Re > band(|z|)`, counted with multiplicity.
    pub fn count_right(&self, tol: &Tolerances) -> usize {
        self.roots
            .iter()
            .filter(|r| r.value.re > tol.axis_band(r.value.norm()))
            .map(|r| r.multiplicity)
            .sum()
    }

    pub fn on_axis<'a>(&'a self, tol: &'a Tolerances) -> impl Iterator<Item = &'a Root> + 'a {
        self.roots
            .iter()
            .filter(move |r| r.value.re.abs() <= tol.axis_band(r.value.norm()))
    }

    /// Largest real part, or `-inf` for an empty set.
    pub fn max_re(&self) -> f64 {
        self.roots
            .iter()
            .map(|r| r.value.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Roots of a real polynomial via the eigenvalues of its balanced companion matrix.
pub fn poly_roots(p: &Polynomial, tol: &Tolerances) -> Result<RootSet> {
    if p.is_zero() || p.degree() == 0 {
        return Err(Error::InvalidInput(
            "root finding requires degree at least 1".into(),
        ));
    }
    if p.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
    }

    let zeros_at_origin = p.coeffs.iter().take_while(|&&c| c == 0.0).count();
    let reduced = Polynomial::new(p.coeffs[zeros_at_origin..].to_vec()).monic();
    let n = reduced.degree();

    let mut raw: Vec<Complex64> = Vec::with_capacity(p.degree());
    if n == 1 {
        raw.push(Complex64::new(-reduced.coeffs[0], 0.0));
    } else if n > 1 {
        // The QR iteration can stall on symmetric root patterns; a shifted origin breaks them.
        let radius = reduced.coeffs[..n]
            .iter()
            .map(|c| c.abs().powf(1.0 / n as f64))
            .fold(1e-3, f64::max);
        let eigs = [0.0, 0.37 * radius, -0.53 * radius]
            .iter()
            .find_map(|&h| companion_eigenvalues(&reduced.shift(h)).map(|zs| (h, zs)));
        let (h, zs) = eigs.ok_or_else(|| {
            Error::NonConvergence(format!("QR iteration failed for degree {n}"))
        })?;
        for z in zs {
            raw.push(polish(&reduced, z + h));
        }
    }

    let residual = raw
        .iter()
        .map(|z| backward_error(&reduced, *z))
        .fold(0.0, f64::max);
    let mut roots = cluster(raw, tol);
    roots = enforce_conjugates(roots, tol);
    if zeros_at_origin > 0 {
        roots.push(Root {
            value: Complex64::new(0.0, 0.0),
            multiplicity: zeros_at_origin,
        });
    }
    roots.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });

    if !(residual <= tol.root * (1.0 + p.max_abs_coeff())) {
        return Err(Error::NonConvergence(format!(
            "root residual {residual:.3e} exceeds tolerance"
        )));
    }
    Ok(RootSet { roots, residual })
}

fn companion_eigenvalues(monic: &Polynomial) -> Option<Vec<Complex64>> {
    let n = monic.degree();
    let lead = monic.coeffs[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -monic.coeffs[i] / lead;
    }
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut m);
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

pub(crate) fn backward_error(p: &Polynomial, z: Complex64) -> f64 {
    let scale = p.abs_eval(z.norm());
    if scale == 0.0 {
        0.0
    } else {
        p.eval_complex(z).norm() / scale
    }
}

/// Newton steps on `z`, each kept only when it lowers the residual.
fn polish(p: &Polynomial, mut z: Complex64) -> Complex64 {
    let dp = p.derivative();
    let mut fz = p.eval_complex(z).norm();
    for _ in 0..3 {
        let d = dp.eval_complex(z);
        if d.norm() == 0.0 {
            break;
        }
        let next = z - p.eval_complex(z) / d;
        let fnext = p.eval_complex(next).norm();
        if next.is_finite() && fnext < fz {
            z = next;
            fz = fnext;
        } else {
            break;
        }
    }
    z
}

pub(crate) fn cluster(raw: Vec<Complex64>, tol: &Tolerances) -> Vec<Root> {
    let mut used = vec![false; raw.len()];
    let mut out = Vec::new();
    for i in 0..raw.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![raw[i]];
        let radius = tol.cluster_radius(raw[i].norm());
        for j in i + 1..raw.len() {
            if !used[j] && (raw[j] - raw[i]).norm() <= radius {
                used[j] = true;
                members.push(raw[j]);
            }
        }
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        out.push(Root {
            value: mean,
            multiplicity: members.len(),
        });
    }
    out
}

fn enforce_conjugates(roots: Vec<Root>, tol: &Tolerances) -> Vec<Root> {
    let mut real = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for r in roots {
        if r.value.im.abs() <= tol.cluster_radius(r.value.norm()) {
            real.push(Root {
                value: Complex64::new(r.value.re, 0.0),
                ..r
            });
        } else if r.value.im > 0.0 {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }

    let mut out = real;
    let mut taken = vec![false; lower.len()];
    for u in upper {
        let best = lower
            .iter()
            .enumerate()
            .filter(|(k, l)| !taken[*k] && l.multiplicity == u.multiplicity)
            .min_by(|(_, a), (_, b)| {
                (a.value.conj() - u.value)
                    .norm()
                    .total_cmp(&(b.value.conj() - u.value).norm())
            })
            .map(|(k, _)| k);
        match best {
            Some(k) => {
                taken[k] = true;
                let z = (u.value + lower[k].value.conj()) / 2.0;
                out.push(Root { value: z, ..u });
                out.push(Root {
                    value: z.conj(),
                    ..u
                });
            }
            None => out.push(Root {
                value: Complex64::new(u.value.re, 0.0),
                ..u
            }),
        }
    }
    for (k, l) in lower.into_iter().enumerate() {
        if !taken[k] {
            out.push(Root {
                value: Complex64::new(l.value.re, 0.0),
                ..l
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn close(a: Complex64, b: Complex64, eps: f64) -> bool {
        (a - b).norm() <= eps
    }

    #[test]
    fn trims_leading_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
    }

    #[test]
    fn complex_pair_roots() {
        let rs = Polynomial::new(vec![1.0, -1.0, 1.0]).roots(&tol()).unwrap();
        let h = 3f64.sqrt() / 2.0;
        assert_eq!(rs.count(), 2);
        assert!(rs.iter().all(|r| r.multiplicity == 1));
        let v = rs.expanded();
        assert!(v.iter().any(|z| close(*z, Complex64::new(0.5, h), 1e-12)));
        assert!(v.iter().any(|z| close(*z, Complex64::new(0.5, -h), 1e-12)));
        assert_eq!(v[0], v[1].conj());
    }

    #[test]
    fn double_root_at_origin() {
        let rs = Polynomial::new(vec![0.0, 0.0, 1.0]).roots(&tol()).unwrap();
        assert_eq!(rs.roots.len(), 1);
        assert_eq!(rs.roots[0].multiplicity, 2);
        assert_eq!(rs.roots[0].value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn golden_ratio_roots() {
        let rs = Polynomial::new(vec![-1.0, 1.0, 1.0]).roots(&tol()).unwrap();
        let s5 = 5f64.sqrt();
        let v = rs.expanded();
        assert!(close(v[0], Complex64::new((-1.0 - s5) / 2.0, 0.0), 1e-13));
        assert!(close(v[1], Complex64::new((-1.0 + s5) / 2.0, 0.0), 1e-13));
    }

    #[test]
    fn repeated_nonzero_root() {
        let p = Polynomial::from_roots(&[Complex64::new(-2.0, 0.0), Complex64::new(-2.0, 0.0)]);
        let rs = p.roots(&tol()).unwrap();
        assert_eq!(rs.roots.len(), 1);
        assert_eq!(rs.roots[0].multiplicity, 2);
        assert!(close(rs.roots[0].value, Complex64::new(-2.0, 0.0), 1e-7));
    }

    #[test]
    fn constant_has_no_roots() {
        assert!(Polynomial::constant(3.0).roots(&tol()).is_err());
    }

    #[test]
    fn arithmetic() {
        let a = Polynomial::new(vec![1.0, 1.0]);
        let b = Polynomial::new(vec![-1.0, 1.0]);
        assert_eq!((&a * &b).coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!((&a - &a), Polynomial::zero());
        assert_eq!((&a + &b).coeffs(), &[0.0, 2.0]);
        assert_eq!(a.derivative().coeffs(), &[1.0]);
    }

    #[test]
    fn shift_matches_substitution() {
        let p = Polynomial::new(vec![1.0, -3.0, 0.5, 2.0]);
        let q = p.shift(0.7);
        for x in [-1.3, 0.0, 0.4, 2.2] {
            assert!((q.eval(x) - p.eval(x + 0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn even_quartic_with_symmetric_roots() {
        let p = Polynomial::new(vec![82.59293554057041, 0.0, 9.868255120130783, 0.0, 1.0]);
        let r = p.roots(&Tolerances::default()).unwrap();
        assert_eq!(r.count(), 4);
        for z in r.expanded() {
            assert!(p.eval_complex(z).norm() < 1e-9);
        }
    }

    #[test]
    fn imaginary_axis_split() {
        let p = Polynomial::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let (re, im) = p.on_imag_axis();
        let w = 0.83;
        let z = p.eval_complex(Complex64::new(0.0, w));
        assert!((re.eval(w) - z.re).abs() < 1e-12);
        assert!((im.eval(w) - z.im).abs() < 1e-12);
    }

    fn root_strategy() -> impl Strategy<Value = Vec<Complex64>> {
        // Well separated roots on a lattice: reals and conjugate pairs.
        prop::collection::btree_set((-6i32..=6, 0i32..=5), 1..=6).prop_map(|cells| {
            let mut roots = Vec::new();
            for (re, im) in cells {
                let z = Complex64::new(re as f64 * 0.7 + 0.1, im as f64 * 0.6);
                if im == 0 {
                    roots.push(z);
                } else {
                    roots.push(z);
                    roots.push(z.conj());
                }
            }
            roots
        })
    }

    proptest! {
        #[test]
        fn round_trip_coefficients(roots in root_strategy(), lead in 0.5f64..4.0) {
            prop_assume!(roots.len() <= 12);
            let p = Polynomial::from_roots(&roots).scale(lead);
            let rs = p.roots(&tol()).unwrap();
            prop_assert_eq!(rs.count(), p.degree());
            let q = Polynomial::from_roots(&rs.expanded()).scale(lead);
            let scale = p.max_abs_coeff();
            for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-8 * scale);
            }
        }

        #[test]
        fn roots_closed_under_conjugation(coeffs in prop::collection::vec(-5.0f64..5.0, 2..10)) {
            let p = Polynomial::new(coeffs);
            prop_assume!(p.degree() >= 1 && p.leading().abs() > 1e-2);
            if let Ok(rs) = p.roots(&tol()) {
                prop_assert_eq!(rs.count(), p.degree());
                for r in rs.iter() {
                    let mate = rs.iter().find(|o| o.value == r.value.conj());
                    prop_assert!(mate.is_some());
                    prop_assert_eq!(mate.unwrap().multiplicity, r.multiplicity);
                }
            }
        }

        #[test]
        fn product_degree_adds(a in prop::collection::vec(0.1f64..3.0, 1..6), b in prop::collection::vec(0.1f64..3.0, 1..6)) {
            let p = Polynomial::new(a);
            let q = Polynomial::new(b);
            prop_assert_eq!((&p * &q).degree(), p.degree() + q.degree());
        }
    }
}
