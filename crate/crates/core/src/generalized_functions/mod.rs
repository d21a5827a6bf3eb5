//! Distributions stored as `gamma + sum_k d^k mu_k` with each `mu_k` a density,
//! a finite atomic measure or a Cantor measure, and their pairings with test functions.

mod density;
mod small_balls;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::growth_spaces::{DecayClass, TestFunction};
use crate::quadrature::{integrate, Partition, QuadOptions};

pub use density::Density;
pub use small_balls::{
    certify_point_value, density_point_check, small_ball_mass, DensityPointReport, PointValueCertificate,
    ScaleDispersion, ShrinkingFamily, TermCertificate, DEFAULT_SLACK,
};

/// Generation depth of the Cantor Stieltjes sums (`2^depth` cells of width `3^-depth`).
pub const CANTOR_DEPTH: u32 = 16;

/// Base measure of a term.
#[derive(Debug, Clone)]
pub enum MeasureBase {
    /// `g(x) dx`.
    Density(Density),
    /// `sum_i w_i delta_{x_i}`.
    Atomic(Vec<(f64, f64)>),
    /// Cantor measure carried by the affine image `lo + width * C` of the middle-thirds set.
    Cantor { lo: f64, width: f64 },
}

impl MeasureBase {
    /// Signed mass of the closed interval `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.interval_integral(a, b, false)
    }

    /// Total-variation mass of the closed interval `[a, b]`.
    pub fn variation(&self, a: f64, b: f64) -> f64 {
        self.interval_integral(a, b, true)
    }

    fn interval_integral(&self, a: f64, b: f64, absolute: bool) -> f64 {
        if !(b >= a) {
            return 0.0;
        }
        match self {
            MeasureBase::Density(g) => {
                let (lo, hi) = g.support();
                let (a, b) = (a.max(lo), b.min(hi));
                if !(b > a) {
                    return 0.0;
                }
                let pieces = Partition::new(a, b)
                    .breakpoints(g.breakpoints().iter().copied())
                    .singular(g.singular_points().iter().copied())
                    .uniform(4)
                    .pieces();
                let opts = QuadOptions {
                    rel_tol: 1e-11,
                    abs_tol: 1e-300,
                    ..QuadOptions::default()
                };
                if absolute {
                    integrate(|x| g.eval(x).abs(), &pieces, opts).value
                } else {
                    integrate(|x| g.eval(x), &pieces, opts).value
                }
            }
            MeasureBase::Atomic(atoms) => atoms
                .iter()
                .filter(|(x, _)| *x >= a && *x <= b)
                .map(|(_, w)| if absolute { w.abs() } else { *w })
                .sum(),
            MeasureBase::Cantor { lo, width } => {
                let cdf = |x: f64| cantor_cdf((x - lo) / width);
                cdf(b) - cdf(a)
            }
        }
    }

    fn label(&self) -> String {
        match self {
            MeasureBase::Density(g) => g.name().to_string(),
            MeasureBase::Atomic(atoms) => format!("atomic[{}]", atoms.len()),
            MeasureBase::Cantor { lo, width } => format!("cantor[{lo},{width}]"),
        }
    }
}

/// `weight * d^order mu`.
#[derive(Debug, Clone)]
pub struct MeasureTerm {
    pub base: MeasureBase,
    pub order: usize,
    pub weight: Complex64,
}

impl MeasureTerm {
    pub fn new(base: MeasureBase, order: usize, weight: Complex64) -> Self {
        Self { base, order, weight }
    }

    pub fn label(&self) -> String {
        if self.order == 0 {
            self.base.label()
        } else {
            format!("d^{}[{}]", self.order, self.base.label())
        }
    }
}

/// One-dimensional distribution `gamma + sum_k weight_k d^{order_k} mu_k`.
#[derive(Debug, Clone)]
pub struct GeneralizedFunction {
    name: String,
    gamma: Complex64,
    terms: Vec<MeasureTerm>,
}

impl GeneralizedFunction {
    pub fn zero(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            gamma: Complex64::new(0.0, 0.0),
            terms: Vec::new(),
        }
    }

    pub fn constant(gamma: Complex64) -> Self {
        Self {
            gamma,
            ..Self::zero(format!("const({gamma})"))
        }
    }

    pub fn with_gamma(mut self, gamma: Complex64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_term(mut self, term: MeasureTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Regular distribution `g(x) dx`.
    pub fn density(g: Density) -> Self {
        let name = g.name().to_string();
        Self::zero(name).with_term(MeasureTerm::new(
            MeasureBase::Density(g),
            0,
            Complex64::new(1.0, 0.0),
        ))
    }

    /// `d^order delta_{x0}`.
    pub fn delta_derivative(x0: f64, order: usize) -> Self {
        let name = match order {
            0 => format!("delta({x0})"),
            _ => format!("delta^({order})({x0})"),
        };
        Self::zero(name).with_term(MeasureTerm::new(
            MeasureBase::Atomic(vec![(x0, 1.0)]),
            order,
            Complex64::new(1.0, 0.0),
        ))
    }

    pub fn delta(x0: f64) -> Self {
        Self::delta_derivative(x0, 0)
    }

    /// Cantor measure on `[0, 1]`.
    pub fn cantor() -> Self {
        Self::zero("cantor").with_term(MeasureTerm::new(
            MeasureBase::Cantor { lo: 0.0, width: 1.0 },
            0,
            Complex64::new(1.0, 0.0),
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    pub fn terms(&self) -> &[MeasureTerm] {
        &self.terms
    }

    /// Largest derivative order among the terms.
    pub fn order(&self) -> usize {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }

    /// `a f + b g`.
    pub fn linear_combination(a: Complex64, f: &Self, b: Complex64, g: &Self) -> Self {
        let scale = |c: Complex64, terms: &[MeasureTerm]| {
            terms
                .iter()
                .map(move |t| MeasureTerm {
                    weight: c * t.weight,
                    ..t.clone()
                })
                .collect::<Vec<_>>()
        };
        let mut terms = scale(a, &f.terms);
        terms.extend(scale(b, &g.terms));
        Self {
            name: format!("({a})*{}+({b})*{}", f.name, g.name),
            gamma: a * f.gamma + b * g.gamma,
            terms,
        }
    }

    /// Signed mass `f([a, b])` for an order-0 distribution.
    pub fn interval_mass(&self, a: f64, b: f64) -> Result<Complex64> {
        if self.order() > 0 {
            return Err(Error::InvalidInput(format!(
                "`{}` is not a measure (order {})",
                self.name,
                self.order()
            )));
        }
        let mut total = self.gamma * (b - a).max(0.0);
        for t in &self.terms {
            total += t.weight * t.base.mass(a, b);
        }
        Ok(total)
    }
}

/// `<f, psi>` with default quadrature options.
pub fn pair(f: &GeneralizedFunction, psi: &TestFunction) -> Result<Complex64> {
    pair_with(f, psi, QuadOptions::default())
}

/// `<f, psi> = gamma int psi + sum_k weight_k (-1)^{order_k} int d^{order_k} psi dmu_k`.
pub fn pair_with(f: &GeneralizedFunction, psi: &TestFunction, opts: QuadOptions) -> Result<Complex64> {
    if psi.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: psi.dimension(),
        });
    }
    let order = f.order();
    if order > psi.max_order() {
        return Err(Error::OrderTooHigh {
            requested: order,
            available: psi.max_order(),
        });
    }
    let mut total = Complex64::new(0.0, 0.0);
    if f.gamma != Complex64::new(0.0, 0.0) {
        check_growth(psi, 0.0, "constant")?;
        let (a, b) = psi.window();
        total += f.gamma * density_integral(&Density::one(), psi, 0, a, b, opts)?;
    }
    for t in &f.terms {
        let sign = if t.order % 2 == 0 { 1.0 } else { -1.0 };
        let v = match &t.base {
            MeasureBase::Density(g) => {
                check_growth(psi, g.growth(), g.name())?;
                let (w0, w1) = psi.window();
                let (s0, s1) = g.support();
                density_integral(g, psi, t.order, w0.max(s0), w1.min(s1), opts)?
            }
            MeasureBase::Atomic(atoms) => {
                let mut s = 0.0;
                for (x, w) in atoms {
                    s += w * psi.deriv(*x, t.order)?;
                }
                s
            }
            MeasureBase::Cantor { lo, width } => cantor_integral(psi, t.order, *lo, *width)?,
        };
        total += t.weight * sign * v;
    }
    Ok(total)
}

/// `<f(x0 + eps x), psi(x)>`, computed as `<f, eps^-1 psi((. - x0) / eps)>`.
pub fn pair_scaled(f: &GeneralizedFunction, x0: f64, eps: f64, psi: &TestFunction) -> Result<Complex64> {
    if !(eps > 0.0) {
        return Err(Error::EpsilonNonpositive(eps));
    }
    pair(f, &psi.rescaled(x0, eps)?)
}

fn check_growth(psi: &TestFunction, degree: f64, what: &str) -> Result<()> {
    if psi.decay().dominates_polynomial(degree) {
        Ok(())
    } else {
        Err(Error::GrowthMismatch(format!(
            "`{}` ({:?}) against `{what}` growing like |x|^{degree}",
            psi.name(),
            psi.decay()
        )))
    }
}

fn density_integral(
    g: &Density,
    psi: &TestFunction,
    k: usize,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let mut p = Partition::new(a, b)
        .breakpoints(g.breakpoints().iter().copied())
        .singular(g.singular_points().iter().copied());
    let mut meshed = false;
    for m in [psi.mesh(), g.mesh()].into_iter().flatten() {
        p = p.mesh(m.origin, m.step);
        meshed = true;
    }
    if !meshed {
        p = p.uniform(8);
    }
    // Validate the order once so the integrand can unwrap.
    psi.deriv(0.5 * (a + b), k)?;
    let r = integrate(
        |x| {
            let v = g.eval(x);
            if v == 0.0 {
                0.0
            } else {
                v * psi.deriv(x, k).unwrap_or(f64::NAN)
            }
        },
        &p.pieces(),
        opts,
    );
    Ok(r.value)
}

/// `int d^k psi dC` for the Cantor measure on `lo + width * [0, 1]`: midpoint sums over
/// the `2^CANTOR_DEPTH` generation cells, skipping cells outside the window of `psi`.
fn cantor_integral(psi: &TestFunction, k: usize, lo: f64, width: f64) -> Result<f64> {
    psi.deriv(lo, k)?;
    let (w0, w1) = match psi.decay() {
        DecayClass::CompactSupport { lo, hi } => (lo, hi),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    };
    fn walk(psi: &TestFunction, k: usize, a: f64, w: f64, mass: f64, depth: u32, win: (f64, f64)) -> f64 {
        if a + w < win.0 || a > win.1 {
            return 0.0;
        }
        if depth == 0 {
            return mass * psi.deriv(a + 0.5 * w, k).unwrap_or(f64::NAN);
        }
        let t = w / 3.0;
        walk(psi, k, a, t, 0.5 * mass, depth - 1, win)
            + walk(psi, k, a + 2.0 * t, t, 0.5 * mass, depth - 1, win)
    }
    Ok(walk(psi, k, lo, width, 1.0, CANTOR_DEPTH, (w0, w1)))
}

/// Cantor function on `[0, 1]` (0 below, 1 above), from the ternary expansion.
pub fn cantor_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut t = x;
    let mut value = 0.0;
    let mut bit = 0.5;
    for _ in 0..64 {
        t *= 3.0;
        let d = t.floor();
        t -= d;
        if d >= 2.0 {
            value += bit;
        } else if d >= 1.0 {
            return value + bit;
        }
        bit *= 0.5;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_interval;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn delta_pairings() {
        let g = TestFunction::gaussian();
        assert_eq!(pair(&GeneralizedFunction::delta(0.0), &g).unwrap(), c(1.0));
        let xg = TestFunction::x_gaussian();
        let d1 = pair(&GeneralizedFunction::delta_derivative(0.0, 1), &xg).unwrap();
        assert!((d1 - c(-1.0)).norm() < 1e-15);
        let bump = TestFunction::bump(-1.0, 1.0);
        assert!(matches!(
            pair(&GeneralizedFunction::delta_derivative(0.0, 3), &bump),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn odd_density_cancels() {
        let v = pair(
            &GeneralizedFunction::density(Density::sgn()),
            &TestFunction::gaussian(),
        )
        .unwrap();
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn growth_mismatch() {
        let f = GeneralizedFunction::density(Density::abs_pow_poly(0.0, vec![0.0, 0.0, 1.0]));
        assert!(matches!(
            pair(&f, &TestFunction::lorentzian()),
            Err(Error::GrowthMismatch(_))
        ));
        assert!(pair(&f, &TestFunction::gaussian()).is_ok());
    }

    #[test]
    fn integration_by_parts() {
        // g(x) = x^2: <d g, psi> = -int g psi' must equal int g' psi = int 2x psi.
        let g = Density::abs_pow_poly(0.0, vec![0.0, 0.0, 1.0]);
        let f =
            GeneralizedFunction::zero("dg").with_term(MeasureTerm::new(MeasureBase::Density(g), 1, c(1.0)));
        for psi in [
            TestFunction::gaussian(),
            TestFunction::x_gaussian(),
            TestFunction::bump(1.0, 3.0),
        ] {
            let lhs = pair(&f, &psi).unwrap().re;
            let (a, b) = psi.window();
            let rhs = integrate_interval(|x| 2.0 * x * psi.value(x), a, b).value;
            assert!((lhs - rhs).abs() < 1e-9, "{}: {lhs} {rhs}", psi.name());
        }
    }

    #[test]
    fn linearity() {
        let f = GeneralizedFunction::density(Density::abs_pow(0.5));
        let g = GeneralizedFunction::delta_derivative(0.3, 1).with_gamma(Complex64::new(0.0, 2.0));
        let (a, b) = (Complex64::new(1.5, -0.5), Complex64::new(-2.0, 0.25));
        let h = GeneralizedFunction::linear_combination(a, &f, b, &g);
        let psi = TestFunction::x_gaussian();
        let lhs = pair(&h, &psi).unwrap();
        let rhs = a * pair(&f, &psi).unwrap() + b * pair(&g, &psi).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn scaled_pairings() {
        let g = TestFunction::gaussian();
        for eps in [0.5, 0.01, 1e-4] {
            let d = pair_scaled(&GeneralizedFunction::delta(0.0), 0.0, eps, &g).unwrap();
            assert_eq!(d.re * eps, 1.0);
            let h = pair_scaled(&GeneralizedFunction::density(Density::heaviside()), 0.0, eps, &g).unwrap();
            assert!((h.re - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-9);
        }
        assert!(matches!(
            pair_scaled(&GeneralizedFunction::delta(0.0), 0.0, 0.0, &g),
            Err(Error::EpsilonNonpositive(_))
        ));
        // |x|^{1/2} is homogeneous: the normalized pairing is the limit integral at every scale.
        let limit = 2.0 * integrate_interval(|x| x.sqrt() * (-x * x).exp(), 0.0, 7.0).value;
        let f = GeneralizedFunction::density(Density::abs_pow(0.5));
        for eps in [0.1, 1e-3] {
            let v = pair_scaled(&f, 0.0, eps, &g).unwrap().re / eps.sqrt();
            assert!((v - limit).abs() < 1e-8 * limit);
        }
    }

    #[test]
    fn far_field_decay() {
        // Mass at distance 1 from the origin: the scaled pairing decays faster than any power.
        let f = GeneralizedFunction::delta(1.0).with_term(MeasureTerm::new(
            MeasureBase::Density(Density::indicator(-3.0, -1.0)),
            0,
            c(1.0),
        ));
        let g = TestFunction::gaussian();
        let eps = [0.4, 0.3, 0.2, 0.15];
        for k in 1..=4 {
            let ck = eps
                .iter()
                .map(|e| pair_scaled(&f, 0.0, *e, &g).unwrap().norm() / e.powi(k))
                .fold(0.0, f64::max);
            assert!(ck.is_finite() && ck < 10.0, "k={k}: {ck}");
        }
    }

    #[test]
    fn cantor_measure() {
        assert_eq!(cantor_cdf(1.0 / 3.0), 0.5);
        assert!((cantor_cdf(0.25) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cantor_cdf(2.0 / 3.0), 0.5);
        let f = GeneralizedFunction::cantor();
        // Symmetry about 1/2 gives int x dC = 1/2 and int x^2 dC = 3/8.
        let poly = |p: i32| {
            TestFunction::from_fn(
                "x^p",
                1,
                DecayClass::CompactSupport { lo: -1.0, hi: 2.0 },
                move |x, k| match k {
                    0 => x.powi(p),
                    _ => p as f64 * x.powi(p - 1),
                },
            )
        };
        assert!((pair(&f, &poly(1)).unwrap().re - 0.5).abs() < 1e-12);
        assert!((pair(&f, &poly(2)).unwrap().re - 0.375).abs() < 1e-12);
        assert!((pair(&f, &TestFunction::gaussian()).unwrap().re - 0.0).abs() > 0.1);
    }
}
