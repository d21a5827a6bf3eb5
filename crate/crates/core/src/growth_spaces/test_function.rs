use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Eval1 = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;

/// Declared decay at infinity, used to size evaluation windows and to check
/// compatibility with the growth of the distribution paired against it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayClass {
    /// Vanishes outside `[lo, hi]`.
    CompactSupport { lo: f64, hi: f64 },
    /// Bounded by `C exp(-((x - center) / width)^2)` with polynomial factors.
    Gaussian { center: f64, width: f64 },
    /// Bounded by `C (1 + |x|)^-power`.
    RationalDecay { power: f64 },
}

impl DecayClass {
    /// Interval outside which the function is zero or negligible (below ~1e-17 relative).
    pub fn window(&self) -> (f64, f64) {
        match *self {
            DecayClass::CompactSupport { lo, hi } => (lo, hi),
            DecayClass::Gaussian { center, width } => (center - 6.5 * width, center + 6.5 * width),
            DecayClass::RationalDecay { power } => {
                let r = 1e6f64.powf(1.0 / power.max(1.0));
                (-r, r)
            }
        }
    }

    /// Whether the function kills polynomial growth of the given degree.
    pub fn dominates_polynomial(&self, degree: f64) -> bool {
        match *self {
            DecayClass::CompactSupport { .. } | DecayClass::Gaussian { .. } => true,
            DecayClass::RationalDecay { power } => power > degree + 1.0,
        }
    }

    fn map_affine(&self, x0: f64, eps: f64) -> Self {
        match *self {
            DecayClass::CompactSupport { lo, hi } => DecayClass::CompactSupport {
                lo: x0 + eps * lo,
                hi: x0 + eps * hi,
            },
            DecayClass::Gaussian { center, width } => DecayClass::Gaussian {
                center: x0 + eps * center,
                width: eps * width,
            },
            DecayClass::RationalDecay { power } => DecayClass::RationalDecay { power },
        }
    }
}

/// Uniform mesh `origin + k * step` between whose nodes a function is polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub origin: f64,
    pub step: f64,
}

#[derive(Clone)]
enum Repr {
    OneD(Eval1),
    Tensor(Box<TestFunction>, Box<TestFunction>),
}

/// Smooth test function with derivative evaluators up to `max_order`.
///
/// One-dimensional functions carry an evaluator `(x, k) -> psi^(k)(x)`;
/// two-dimensional ones are tensor products of two 1-D factors.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    max_order: usize,
    decay: DecayClass,
    mesh: Option<Mesh>,
    repr: Repr,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("dimension", &self.dimension())
            .field("max_order", &self.max_order)
            .field("decay", &self.decay)
            .field("mesh", &self.mesh)
            .finish()
    }
}

/// Physicists' Hermite polynomial `H_k(x)`.
fn hermite(k: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = 2.0 * x * h1 - 2.0 * j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `d^k/dx^k exp(-x^2) = (-1)^k H_k(x) exp(-x^2)`.
fn gaussian_deriv(x: f64, k: usize) -> f64 {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hermite(k, x) * (-x * x).exp()
}

impl TestFunction {
    /// General 1-D test function from an evaluator `(x, k) -> psi^(k)(x)`.
    pub fn from_fn<F>(name: impl Into<String>, max_order: usize, decay: DecayClass, eval: F) -> Self
    where
        F: Fn(f64, usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            max_order,
            decay,
            mesh: None,
            repr: Repr::OneD(Arc::new(eval)),
        }
    }

    /// Declares that the function is polynomial between the nodes of `mesh`.
    pub fn with_mesh(mut self, mesh: Mesh) -> Self {
        self.mesh = Some(mesh);
        self
    }

    /// `exp(-x^2)`.
    pub fn gaussian() -> Self {
        Self::from_fn(
            "gaussian",
            8,
            DecayClass::Gaussian {
                center: 0.0,
                width: 1.0,
            },
            gaussian_deriv,
        )
    }

    /// `x exp(-x^2) = -(1/2) d/dx exp(-x^2)`.
    pub fn x_gaussian() -> Self {
        Self::from_fn(
            "x_gaussian",
            7,
            DecayClass::Gaussian {
                center: 0.0,
                width: 1.0,
            },
            |x, k| -0.5 * gaussian_deriv(x, k + 1),
        )
    }

    /// `exp(-1 / (1 - t^2))` with `t = (x - c) / w`, supported on `[a, b]`.
    pub fn bump(a: f64, b: f64) -> Self {
        let c = 0.5 * (a + b);
        let w = 0.5 * (b - a);
        Self::from_fn(
            format!("bump[{a},{b}]"),
            2,
            DecayClass::CompactSupport { lo: a, hi: b },
            move |x, k| {
                let t = (x - c) / w;
                if t.abs() >= 1.0 {
                    return 0.0;
                }
                let s = 1.0 - t * t;
                let e = (-1.0 / s).exp();
                let g1 = -2.0 * t / (s * s);
                let v = match k {
                    0 => e,
                    1 => g1 * e,
                    2 => {
                        let g2 = -2.0 * (1.0 + 3.0 * t * t) / (s * s * s);
                        (g2 + g1 * g1) * e
                    }
                    _ => f64::NAN,
                };
                v / w.powi(k as i32)
            },
        )
    }

    /// `(1 + x^2)^-1`.
    pub fn lorentzian() -> Self {
        Self::from_fn(
            "lorentzian",
            2,
            DecayClass::RationalDecay { power: 2.0 },
            |x, k| {
                let q = 1.0 + x * x;
                match k {
                    0 => 1.0 / q,
                    1 => -2.0 * x / (q * q),
                    2 => (6.0 * x * x - 2.0) / (q * q * q),
                    _ => f64::NAN,
                }
            },
        )
    }

    /// Tensor product `psi(x1) chi(x2)` of two 1-D functions.
    pub fn tensor(a: TestFunction, b: TestFunction) -> Result<Self> {
        if a.dimension() != 1 || b.dimension() != 1 {
            return Err(Error::InvalidInput(
                "tensor factors must be one-dimensional".into(),
            ));
        }
        Ok(Self {
            name: format!("{}*{}", a.name, b.name),
            max_order: a.max_order.min(b.max_order),
            decay: a.decay,
            mesh: None,
            repr: Repr::Tensor(Box::new(a), Box::new(b)),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        match self.repr {
            Repr::OneD(_) => 1,
            Repr::Tensor(..) => 2,
        }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn decay(&self) -> DecayClass {
        self.decay
    }

    pub fn mesh(&self) -> Option<Mesh> {
        self.mesh
    }

    /// Effective support of a 1-D function (or of each factor).
    pub fn window(&self) -> (f64, f64) {
        match &self.repr {
            Repr::OneD(_) => self.decay.window(),
            Repr::Tensor(a, b) => {
                let (a0, a1) = a.window();
                let (b0, b1) = b.window();
                (a0.min(b0), a1.max(b1))
            }
        }
    }

    /// Per-axis windows (one entry per dimension).
    pub fn windows(&self) -> Vec<(f64, f64)> {
        match &self.repr {
            Repr::OneD(_) => vec![self.decay.window()],
            Repr::Tensor(a, b) => vec![a.window(), b.window()],
        }
    }

    /// `psi(x)` for a 1-D function.
    pub fn value(&self, x: f64) -> f64 {
        self.deriv(x, 0).unwrap_or(f64::NAN)
    }

    /// `psi^(k)(x)` for a 1-D function.
    pub fn deriv(&self, x: f64, k: usize) -> Result<f64> {
        if k > self.max_order {
            return Err(Error::OrderTooHigh {
                requested: k,
                available: self.max_order,
            });
        }
        match &self.repr {
            Repr::OneD(f) => Ok(f(x, k)),
            Repr::Tensor(..) => Err(Error::DimensionMismatch { expected: 2, got: 1 }),
        }
    }

    /// `d^alpha psi(x)` at a point of matching dimension.
    pub fn eval(&self, x: &[f64], alpha: &[usize]) -> Result<f64> {
        let dim = self.dimension();
        if x.len() != dim || alpha.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        match &self.repr {
            Repr::OneD(_) => self.deriv(x[0], alpha[0]),
            Repr::Tensor(a, b) => {
                let total: usize = alpha.iter().sum();
                if total > self.max_order {
                    return Err(Error::OrderTooHigh {
                        requested: total,
                        available: self.max_order,
                    });
                }
                Ok(a.deriv(x[0], alpha[0])? * b.deriv(x[1], alpha[1])?)
            }
        }
    }

    /// `x -> eps^-1 psi((x - x0) / eps)`, the test function that realizes
    /// `<f(x0 + eps .), psi>` as `<f, .>` in one dimension.
    pub fn rescaled(&self, x0: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::EpsilonNonpositive(eps));
        }
        let f = self.one_d()?;
        let mesh = self.mesh.map(|m| Mesh {
            origin: x0 + eps * m.origin,
            step: eps * m.step,
        });
        Ok(Self {
            name: format!("{}@({x0},{eps})", self.name),
            max_order: self.max_order,
            decay: self.decay.map_affine(x0, eps),
            mesh,
            repr: Repr::OneD(Arc::new(move |x, k| {
                f((x - x0) / eps, k) / eps.powi(k as i32 + 1)
            })),
        })
    }

    /// `x -> psi(a x)` (no prefactor).
    pub fn compose_scale(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidInput(format!("scale must be positive, got {a}")));
        }
        let f = self.one_d()?;
        let mesh = self.mesh.map(|m| Mesh {
            origin: m.origin / a,
            step: m.step / a,
        });
        Ok(Self {
            name: format!("{}(x*{a})", self.name),
            max_order: self.max_order,
            decay: self.decay.map_affine(0.0, 1.0 / a),
            mesh,
            repr: Repr::OneD(Arc::new(move |x, k| f(a * x, k) * a.powi(k as i32))),
        })
    }

    /// `x -> psi(x - c)`.
    pub fn translated(&self, c: f64) -> Result<Self> {
        let f = self.one_d()?;
        let mesh = self.mesh.map(|m| Mesh {
            origin: m.origin + c,
            step: m.step,
        });
        Ok(Self {
            name: format!("{}(x-{c})", self.name),
            max_order: self.max_order,
            decay: self.decay.map_affine(c, 1.0),
            mesh,
            repr: Repr::OneD(Arc::new(move |x, k| f(x - c, k))),
        })
    }

    fn one_d(&self) -> Result<Eval1> {
        match &self.repr {
            Repr::OneD(f) => Ok(Arc::clone(f)),
            Repr::Tensor(..) => Err(Error::DimensionMismatch { expected: 1, got: 2 }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &TestFunction, x: f64, k: usize) -> f64 {
        let h = 1e-5;
        (f.deriv(x + h, k).unwrap() - f.deriv(x - h, k).unwrap()) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for f in [
            TestFunction::gaussian(),
            TestFunction::x_gaussian(),
            TestFunction::bump(-1.0, 1.0),
            TestFunction::bump(1.0, 3.0),
            TestFunction::lorentzian(),
        ] {
            for x in [-0.7, -0.2, 0.1, 0.55, 1.6, 2.2] {
                for k in 0..2 {
                    let exact = f.deriv(x, k + 1).unwrap();
                    let approx = fd(&f, x, k);
                    assert!(
                        (exact - approx).abs() < 1e-6,
                        "{} x={x} k={k}: {exact} {approx}",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn x_gaussian_values() {
        let f = TestFunction::x_gaussian();
        assert!((f.value(0.5) - 0.5 * (-0.25f64).exp()).abs() < 1e-15);
        assert!((f.deriv(0.0, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_limits() {
        let b = TestFunction::bump(-1.0, 1.0);
        assert!(matches!(b.deriv(0.0, 3), Err(Error::OrderTooHigh { .. })));
    }

    #[test]
    fn rescaling() {
        let g = TestFunction::gaussian();
        let s = g.rescaled(1.0, 0.5).unwrap();
        assert!((s.value(1.25) - 2.0 * g.value(0.5)).abs() < 1e-15);
        assert!((s.deriv(1.25, 1).unwrap() - 4.0 * g.deriv(0.5, 1).unwrap()).abs() < 1e-14);
        assert!(g.rescaled(0.0, 0.0).is_err());
        let c = g.compose_scale(2.0).unwrap();
        assert!((c.value(0.3) - g.value(0.6)).abs() < 1e-15);
        let t = TestFunction::bump(-1.0, 1.0).translated(2.0).unwrap();
        assert_eq!(t.window(), (1.0, 3.0));
    }

    #[test]
    fn tensor_products() {
        let t = TestFunction::tensor(TestFunction::gaussian(), TestFunction::bump(-1.0, 1.0)).unwrap();
        assert_eq!(t.dimension(), 2);
        let v = t.eval(&[0.3, 0.2], &[1, 0]).unwrap();
        let expected =
            TestFunction::gaussian().deriv(0.3, 1).unwrap() * TestFunction::bump(-1.0, 1.0).value(0.2);
        assert!((v - expected).abs() < 1e-15);
        assert!(t.deriv(0.0, 0).is_err());
        assert!(TestFunction::tensor(t.clone(), TestFunction::gaussian()).is_err());
    }
}
