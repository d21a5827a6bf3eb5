use std::fmt;
use std::sync::Arc;

use crate::growth_spaces::Mesh;

type Eval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Locally integrable function used as the density of a measure term.
///
/// Carries the quadrature hints the pairing needs: jump/kink locations,
/// points toward which the integrand must be graded, and polynomial growth.
#[derive(Clone)]
pub struct Density {
    name: String,
    eval: Eval,
    breakpoints: Vec<f64>,
    singular: Vec<f64>,
    growth: f64,
    support: Option<(f64, f64)>,
    mesh: Option<Mesh>,
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("name", &self.name)
            .field("breakpoints", &self.breakpoints)
            .field("singular", &self.singular)
            .field("growth", &self.growth)
            .field("support", &self.support)
            .finish()
    }
}

impl Density {
    /// Density from a closure with polynomial growth `|g(x)| <= C (1 + |x|)^growth`.
    pub fn from_fn<F>(name: impl Into<String>, growth: f64, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            breakpoints: Vec::new(),
            singular: Vec::new(),
            growth,
            support: None,
            mesh: None,
        }
    }

    pub fn with_breakpoints(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(pts);
        self
    }

    pub fn with_singular(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.singular.extend(pts);
        self
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    pub fn with_mesh(mut self, mesh: Mesh) -> Self {
        self.mesh = Some(mesh);
        self
    }

    pub fn one() -> Self {
        Self::from_fn("one", 0.0, |_| 1.0)
    }

    pub fn heaviside() -> Self {
        Self::from_fn("heaviside", 0.0, |x| if x >= 0.0 { 1.0 } else { 0.0 })
            .with_breakpoints([0.0])
            .with_support(0.0, f64::INFINITY)
    }

    pub fn sgn() -> Self {
        Self::from_fn("sgn", 0.0, |x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .with_breakpoints([0.0])
    }

    /// Indicator of `[a, b]`.
    pub fn indicator(a: f64, b: f64) -> Self {
        Self::from_fn(format!("indicator({a},{b})"), 0.0, move |x| {
            if x >= a && x <= b {
                1.0
            } else {
                0.0
            }
        })
        .with_support(a, b)
    }

    /// `|x|^a`, locally integrable for `a > -1`.
    pub fn abs_pow(a: f64) -> Self {
        Self::from_fn(format!("abs_pow({a})"), a.max(0.0), move |x| {
            if x == 0.0 {
                if a > 0.0 {
                    0.0
                } else if a == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                x.abs().powf(a)
            }
        })
        .with_singular([0.0])
    }

    /// `|x|^a (c_0 + c_1 x + c_2 x^2 + ...)`.
    pub fn abs_pow_poly(a: f64, coeffs: Vec<f64>) -> Self {
        let deg = coeffs.len().saturating_sub(1) as f64;
        let label = coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let base = Self::abs_pow(a);
        let g = Arc::clone(&base.eval);
        Self::from_fn(format!("abs_pow_poly({a};{label})"), a.max(0.0) + deg, move |x| {
            let p = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
            if p == 0.0 {
                0.0
            } else {
                g(x) * p
            }
        })
        .with_singular([0.0])
    }

    /// `|x|^a sin(|x|^-b)`, locally integrable for `a > -1`.
    pub fn abs_pow_sin(a: f64, b: f64) -> Self {
        Self::from_fn(format!("abs_pow_sin({a},{b})"), a.max(0.0), move |x| {
            let r = x.abs();
            if r == 0.0 {
                0.0
            } else {
                r.powf(a) * r.powf(-b).sin()
            }
        })
        .with_singular([0.0])
    }

    /// `x sin(1/x)`.
    pub fn x_sin_inv() -> Self {
        let mut d = Self::abs_pow_sin(1.0, 1.0);
        d.name = "x_sin_inv".into();
        d
    }

    pub fn gaussian() -> Self {
        Self::from_fn("gaussian", 0.0, |x| (-x * x).exp())
    }

    /// `c + cos x`.
    pub fn cos_plus(c: f64) -> Self {
        Self::from_fn(format!("cos_plus({c})"), 0.0, move |x| c + x.cos())
    }

    pub fn sin() -> Self {
        Self::from_fn("sin", 0.0, f64::sin)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn support(&self) -> (f64, f64) {
        self.support.unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
    }

    pub fn mesh(&self) -> Option<Mesh> {
        self.mesh
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        assert_eq!(Density::heaviside().eval(0.0), 1.0);
        assert_eq!(Density::heaviside().eval(-1e-300), 0.0);
        assert_eq!(Density::sgn().eval(-2.0), -1.0);
        assert!((Density::abs_pow(0.5).eval(-4.0) - 2.0).abs() < 1e-15);
        assert!(Density::abs_pow(-0.5).eval(0.0).is_infinite());
        let p = Density::abs_pow_poly(0.5, vec![1.0, 0.0, 1.0]);
        assert!((p.eval(2.0) - 2f64.sqrt() * 5.0).abs() < 1e-14);
        assert_eq!(p.growth(), 2.5);
        let s = Density::x_sin_inv();
        assert!((s.eval(-0.5) - 0.5 * 2f64.sin()).abs() < 1e-15);
        assert!((Density::cos_plus(2.0).eval(0.0) - 3.0).abs() < 1e-15);
    }
}
