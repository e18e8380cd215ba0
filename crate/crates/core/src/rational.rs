//! Coprime rational transfer functions `num(s) / den(s)` with cached poles and zeros.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{backward_error, cluster, Polynomial, Root, RootSet};
use crate::tolerance::Tolerances;

/// Wire form of a transfer function: ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfSpec {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// A real-rational function stored in coprime form with a monic denominator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TfSpec", into = "TfSpec")]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
    zeros: RootSet,
    poles: RootSet,
    tol: Tolerances,
}

impl PartialEq for RationalTF {
    fn eq(&self, other: &Self) -> bool {
        self.num == other.num && self.den == other.den
    }
}

impl TryFrom<TfSpec> for RationalTF {
    type Error = Error;
    fn try_from(spec: TfSpec) -> Result<Self> {
        RationalTF::new(spec.num, spec.den)
    }
}

impl From<RationalTF> for TfSpec {
    fn from(f: RationalTF) -> Self {
        TfSpec {
            num: f.num.coeffs().to_vec(),
            den: f.den.coeffs().to_vec(),
        }
    }
}

impl RationalTF {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        Self::from_polys(Polynomial::new(num), Polynomial::new(den), Tolerances::default())
    }

    pub fn from_polys(num: Polynomial, den: Polynomial, tol: Tolerances) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("denominator is identically zero".into()));
        }
        if num.coeffs().iter().chain(den.coeffs()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        let zeros = roots_or_empty(&num, &tol)?;
        let poles = roots_or_empty(&den, &tol)?;
        Self::assemble(num, zeros, den, poles, tol)
    }

    pub fn constant(c: f64) -> Self {
        Self::constant_with(c, Tolerances::default())
    }

    pub fn constant_with(c: f64, tol: Tolerances) -> Self {
        Self {
            num: Polynomial::constant(c),
            den: Polynomial::constant(1.0),
            zeros: RootSet::empty(),
            poles: RootSet::empty(),
            tol,
        }
    }

    /// `k * prod(s - z) / prod(s - p)`; complex entries must come in conjugate pairs.
    pub fn from_zpk(zeros: &[Complex64], poles: &[Complex64], k: f64) -> Result<Self> {
        let tol = Tolerances::default();
        let num = Polynomial::from_roots(zeros).scale(k);
        let den = Polynomial::from_roots(poles);
        Self::assemble(num, zeros.to_vec(), den, poles.to_vec(), tol)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// Cancel numerator and denominator roots that agree within the gcd radius.
    fn assemble(
        num: Polynomial,
        zeros: Vec<Complex64>,
        den: Polynomial,
        poles: Vec<Complex64>,
        tol: Tolerances,
    ) -> Result<Self> {
        if num.is_zero() {
            return Ok(Self::constant_with(0.0, tol));
        }
        let mut taken = vec![false; poles.len()];
        let mut kept_zeros = Vec::with_capacity(zeros.len());
        let mut cancelled = false;
        for z in zeros {
            let radius = tol.gcd_radius(z.norm());
            let hit = poles
                .iter()
                .enumerate()
                .filter(|(k, p)| !taken[*k] && (**p - z).norm() <= radius)
                .min_by(|(_, a), (_, b)| (**a - z).norm().total_cmp(&(**b - z).norm()))
                .map(|(k, _)| k);
            match hit {
                Some(k) => {
                    taken[k] = true;
                    cancelled = true;
                }
                None => kept_zeros.push(z),
            }
        }
        let kept_poles: Vec<Complex64> = poles
            .iter()
            .zip(&taken)
            .filter(|(_, t)| !**t)
            .map(|(p, _)| *p)
            .collect();

        let gain = num.leading() / den.leading();
        let (num, den) = if cancelled {
            (
                Polynomial::from_roots(&kept_zeros).scale(gain),
                Polynomial::from_roots(&kept_poles),
            )
        } else {
            (num.scale(1.0 / den.leading()), den.monic())
        };
        let zeros = root_set(&num, kept_zeros, &tol);
        let poles = root_set(&den, kept_poles, &tol);
        Ok(Self {
            num,
            den,
            zeros,
            poles,
            tol,
        })
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn zeros(&self) -> &RootSet {
        &self.zeros
    }

    pub fn poles(&self) -> &RootSet {
        &self.poles
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn spec(&self) -> TfSpec {
        self.clone().into()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_constant(&self) -> bool {
        self.num.degree() == 0 && self.den.degree() == 0
    }

    pub fn is_proper(&self) -> bool {
        self.num.degree() <= self.den.degree() || self.num.is_zero()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// Stable means every pole lies left of the axis band.
    pub fn is_stable(&self) -> bool {
        self.poles
            .iter()
            .all(|r| r.value.re < -self.tol.axis_band(r.value.norm()))
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let radius = self.tol.axis_band(s.norm());
        if self.poles.iter().any(|p| (p.value - s).norm() <= radius) {
            return Err(Error::PoleEvaluation(s));
        }
        Ok(self.eval_unchecked(s))
    }

    /// Evaluation without the pole-proximity test.
    pub fn eval_unchecked(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    pub fn eval_jw(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    /// Logarithmic derivative `f'(s) / f(s) = num'/num - den'/den`.
    pub fn log_derivative(&self, s: Complex64) -> Complex64 {
        self.num.derivative().eval_complex(s) / self.num.eval_complex(s)
            - self.den.derivative().eval_complex(s) / self.den.eval_complex(s)
    }

    pub fn derivative(&self) -> Result<Self> {
        let num = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        let den = &self.den * &self.den;
        let poles: Vec<Complex64> = self
            .poles
            .expanded()
            .into_iter()
            .flat_map(|p| [p, p])
            .collect();
        let zeros = roots_or_empty(&num, &self.tol)?;
        Self::assemble(num, zeros, den, poles, self.tol)
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::constant_with(0.0, self.tol);
        }
        Self {
            num: self.num.scale(c),
            ..self.clone()
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::constant_with(0.0, self.tol));
        }
        let num = &self.num * &other.num;
        let den = &self.den * &other.den;
        let mut zeros = self.zeros.expanded();
        zeros.extend(other.zeros.expanded());
        let mut poles = self.poles.expanded();
        poles.extend(other.poles.expanded());
        Self::assemble(num, zeros, den, poles, self.tol)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        let den = &self.den * &other.den;
        let mut poles = self.poles.expanded();
        poles.extend(other.poles.expanded());
        let zeros = roots_or_empty(&num, &self.tol)?;
        Self::assemble(num, zeros, den, poles, self.tol)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// `1 / f`.
    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::InvalidInput("reciprocal of the zero function".into()));
        }
        Self::assemble(
            self.den.clone(),
            self.poles.expanded(),
            self.num.clone(),
            self.zeros.expanded(),
            self.tol,
        )
    }
}

fn roots_or_empty(p: &Polynomial, tol: &Tolerances) -> Result<Vec<Complex64>> {
    if p.degree() == 0 {
        Ok(Vec::new())
    } else {
        Ok(p.roots(tol)?.expanded())
    }
}

fn root_set(p: &Polynomial, values: Vec<Complex64>, tol: &Tolerances) -> RootSet {
    let mut roots: Vec<Root> = cluster(values, tol);
    for r in &mut roots {
        if r.value.im.abs() <= tol.cluster_radius(r.value.norm()) {
            r.value.im = 0.0;
        }
    }
    roots.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    let residual = roots
        .iter()
        .map(|r| backward_error(p, r.value))
        .fold(0.0, f64::max);
    RootSet { roots, residual }
}

/// Roots of `den_L - num_L`, the characteristic polynomial of the positive feedback loop.
pub fn closed_loop_poles(l: &RationalTF) -> Result<RootSet> {
    characteristic_roots(&(&l.den - &l.num), &l.tol)
}

/// Closed-loop roots of the positive feedback of `g` and `delta` without cancelling
/// common factors, so hidden unstable modes stay visible.
pub fn closed_loop_poles_pair(g: &RationalTF, delta: &RationalTF) -> Result<RootSet> {
    let chr = &(&g.den * &delta.den) - &(&g.num * &delta.num);
    characteristic_roots(&chr, &g.tol)
}

fn characteristic_roots(chr: &Polynomial, tol: &Tolerances) -> Result<RootSet> {
    if chr.is_zero() {
        return Err(Error::DegenerateLoop);
    }
    if chr.degree() == 0 {
        return Ok(RootSet::empty());
    }
    chr.roots(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tf(num: &[f64], den: &[f64]) -> RationalTF {
        RationalTF::new(num.to_vec(), den.to_vec()).unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn product_without_cancellation() {
        let a = 0.8;
        let g = tf(&[1.0], &[1.0, 1.0]);
        let f = tf(&[a, -1.0], &[a, 1.0]);
        let p = g.mul(&f).unwrap();
        assert_eq!(p.num().degree(), 1);
        assert_eq!(p.den().degree(), 2);
        let s = c(0.3, 1.1);
        let expected = (a - s) / ((s + 1.0) * (a + s));
        assert!(rel(p.eval(s).unwrap(), expected) < 1e-14);
    }

    #[test]
    fn additive_inverse_is_zero() {
        let f = tf(&[2.0, 1.0], &[1.0, 3.0, 1.0]);
        assert!(f.add(&f.neg()).unwrap().is_zero());
    }

    #[test]
    fn exact_cancellation() {
        let a = tf(&[-1.0, 1.0], &[1.0, 1.0]);
        let b = tf(&[1.0], &[-1.0, 1.0]);
        let p = a.mul(&b).unwrap();
        assert_eq!(p, tf(&[1.0], &[1.0, 1.0]));
        assert_eq!(p.poles().count(), 1);
        assert_eq!(p.zeros().count(), 0);
    }

    #[test]
    fn evaluation_examples() {
        let f = tf(&[1.0], &[1.0, -1.0, 1.0]);
        let s = c(0.0, 1.0 / 2f64.sqrt());
        let expected = 1.0 / c(0.5, -1.0 / 2f64.sqrt());
        assert!(rel(f.eval(s).unwrap(), expected) < 1e-14);
        let ap = tf(&[1.7, -1.0], &[1.7, 1.0]);
        assert_eq!(ap.eval(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(RationalTF::constant(1.0).eval(c(3.0, -2.0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn evaluation_at_pole_fails() {
        let f = tf(&[1.0], &[-1.0, 1.0]);
        assert!(matches!(f.eval(c(1.0, 0.0)), Err(Error::PoleEvaluation(_))));
    }

    #[test]
    fn denominators_are_monic() {
        let f = tf(&[2.0], &[4.0, 2.0]);
        assert_eq!(f.den().leading(), 1.0);
        assert_eq!(f.num().coeffs(), &[1.0]);
    }

    #[test]
    fn derivative_examples() {
        let f = tf(&[1.0], &[-1.0, 1.0]).derivative().unwrap();
        assert_eq!(f.num().coeffs(), &[-1.0]);
        assert_eq!(f.den().coeffs(), &[1.0, -2.0, 1.0]);

        let a = 2.5;
        let d = tf(&[a, -1.0], &[a, 1.0]).derivative().unwrap();
        let s = c(0.4, 0.9);
        let expected = -2.0 * a / ((a + s) * (a + s));
        assert!(rel(d.eval(s).unwrap(), expected) < 1e-13);
        assert_eq!(d.den().degree(), 2);

        assert!(RationalTF::constant(4.0).derivative().unwrap().is_zero());
    }

    #[test]
    fn closed_loop_examples() {
        assert_eq!(closed_loop_poles(&RationalTF::constant(3.0)).unwrap().count(), 0);
        assert!(matches!(
            closed_loop_poles(&RationalTF::constant(1.0)),
            Err(Error::DegenerateLoop)
        ));
        let rs = closed_loop_poles(&tf(&[2.0], &[1.0, 1.0])).unwrap();
        assert!((rs.roots[0].value - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let f: RationalTF = serde_json::from_str(r#"{"num":[1],"den":[1,-1,1]}"#).unwrap();
        assert_eq!(f.poles().count(), 2);
        let back = serde_json::to_string(&f).unwrap();
        assert_eq!(back, r#"{"num":[1.0],"den":[1.0,-1.0,1.0]}"#);
        assert!(serde_json::from_str::<RationalTF>(r#"{"num":[1],"den":[0]}"#).is_err());
    }

    fn random_tf(rng: &mut ChaCha8Rng) -> RationalTF {
        let nd = rng.gen_range(1..=4);
        let nn = rng.gen_range(0..=nd);
        let num: Vec<f64> = (0..=nn).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut den: Vec<f64> = (0..nd).map(|_| rng.gen_range(-2.0..2.0)).collect();
        den.push(1.0);
        tf(&num, &den)
    }

    fn random_point(rng: &mut ChaCha8Rng) -> Complex64 {
        c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
    }

    #[test]
    fn arithmetic_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let a = random_tf(&mut rng);
            let b = random_tf(&mut rng);
            let sum = a.add(&b).unwrap();
            let prod = a.mul(&b).unwrap();
            let sc = a.scale(-1.7);
            for _ in 0..100 {
                let s = random_point(&mut rng);
                let (Ok(va), Ok(vb)) = (a.eval(s), b.eval(s)) else { continue };
                if va.norm() > 1e6 || vb.norm() > 1e6 {
                    continue;
                }
                let tol = 1e-10 * (1.0 + va.norm() + vb.norm()).powi(2);
                assert!((sum.eval_unchecked(s) - (va + vb)).norm() <= tol);
                assert!((prod.eval_unchecked(s) - va * vb).norm() <= tol);
                assert!((sc.eval_unchecked(s) - va * -1.7).norm() <= tol);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let f = random_tf(&mut rng);
            let d = f.derivative().unwrap();
            for _ in 0..20 {
                let s = random_point(&mut rng);
                let near_pole = f.poles().iter().any(|p| (p.value - s).norm() < 0.2);
                if near_pole {
                    continue;
                }
                let h = 1e-5;
                let fd = (f.eval_unchecked(s + h) - f.eval_unchecked(s - h)) / (2.0 * h);
                let an = d.eval_unchecked(s);
                assert!((fd - an).norm() <= 1e-6 * (1.0 + an.norm()), "{fd} vs {an}");
            }
        }
    }

    proptest! {
        #[test]
        fn product_evaluates_as_product(
            n1 in prop::collection::vec(-3.0f64..3.0, 1..4),
            d1 in prop::collection::vec(-3.0f64..3.0, 1..4),
            n2 in prop::collection::vec(-3.0f64..3.0, 1..4),
            d2 in prop::collection::vec(-3.0f64..3.0, 1..4),
            re in -2.0f64..2.0, im in -2.0f64..2.0,
        ) {
            let mk = |n: &[f64], d: &[f64]| {
                let mut d = d.to_vec();
                d.push(1.0);
                RationalTF::new(n.to_vec(), d)
            };
            let (Ok(f), Ok(g)) = (mk(&n1, &d1), mk(&n2, &d2)) else { return Ok(()) };
            let s = c(re, im);
            let (Ok(a), Ok(b)) = (f.eval(s), g.eval(s)) else { return Ok(()) };
            prop_assume!(a.norm() < 1e4 && b.norm() < 1e4 && a.norm() > 1e-4 && b.norm() > 1e-4);
            let p = f.mul(&g).unwrap();
            let v = p.eval_unchecked(s);
            prop_assert!(rel(v, a * b) < 1e-9);
        }

        #[test]
        fn closed_loop_scale_invariant(
            n in prop::collection::vec(-3.0f64..3.0, 1..3),
            d in prop::collection::vec(-3.0f64..3.0, 2..4),
            k in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0],
        ) {
            let mut dm = d.clone();
            dm.push(1.0);
            let Ok(l) = RationalTF::new(n.clone(), dm.clone()) else { return Ok(()) };
            let Ok(ls) = RationalTF::new(
                n.iter().map(|x| x * k).collect(),
                dm.iter().map(|x| x * k).collect(),
            ) else { return Ok(()) };
            let (Ok(a), Ok(b)) = (closed_loop_poles(&l), closed_loop_poles(&ls)) else { return Ok(()) };
            prop_assert_eq!(a.count(), b.count());
            let (mut va, mut vb) = (a.expanded(), b.expanded());
            let key = |z: &Complex64, w: &Complex64| z.re.total_cmp(&w.re).then(z.im.total_cmp(&w.im));
            va.sort_by(key);
            vb.sort_by(key);
            for (x, y) in va.iter().zip(&vb) {
                prop_assert!((x - y).norm() < 1e-6 * (1.0 + x.norm()));
            }
        }
    }
}
