//! Numerical tolerances shared by every stage of the analysis.
//!
//! Tolerances that depend on a root magnitude are applied as `tol * (1 + |r|)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Maximum backward error accepted from the root finder.
    pub root: f64,
    /// Radius for merging roots into one root of higher multiplicity.
    pub cluster: f64,
    /// Half-width of the band treated as the imaginary axis.
    pub axis: f64,
    /// Radius for cancelling a numerator root against a denominator root.
    pub gcd: f64,
    /// Relative gain difference under which two gain maxima count as equal peaks.
    pub peak: f64,
    /// Dead band separating strict inequalities from borderline cases.
    pub cond: f64,
    /// Minimum relative slope of a transverse Nyquist crossing.
    pub trans: f64,
    /// Fixed contour offset for the perturbed Nyquist count; chosen adaptively when absent.
    pub epsilon: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            root: 1e-10,
            cluster: 1e-7,
            axis: 1e-8,
            gcd: 1e-7,
            peak: 1e-5,
            cond: 1e-7,
            trans: 1e-9,
            epsilon: None,
        }
    }
}

impl Tolerances {
    pub fn axis_band(&self, magnitude: f64) -> f64 {
        self.axis * (1.0 + magnitude)
    }

    pub fn cluster_radius(&self, magnitude: f64) -> f64 {
        self.cluster * (1.0 + magnitude)
    }

    pub fn gcd_radius(&self, magnitude: f64) -> f64 {
        self.gcd * (1.0 + magnitude)
    }

    /// Dead band for comparing `lhs > rhs`.
    pub fn cond_band(&self, rhs: f64) -> f64 {
        self.cond * (1.0 + rhs.abs())
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("root", self.root),
            ("cluster", self.cluster),
            ("axis", self.axis),
            ("gcd", self.gcd),
            ("peak", self.peak),
            ("cond", self.cond),
            ("trans", self.trans),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0 && v < 1.0) {
                return Err(format!("tolerance `{name}` must lie in (0, 1), got {v}"));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
                return Err(format!("epsilon must lie in (0, 1), got {eps}"));
            }
        }
        Ok(())
    }
}
