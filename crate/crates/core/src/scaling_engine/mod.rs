//! Scaling functions built from two-scale filters by the cascade algorithm,
//! stored as tables on the dyadic grid `i / 2^J` of their support `[0, N-1]`.

mod filter;

pub use filter::{FilterBank, BUILTIN_FILTERS, FILTER_TOL};

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default dyadic depth `J` (grid spacing `2^-J`).
pub const DEFAULT_DEPTH: u32 = 10;
/// Default cascade iteration cap.
pub const DEFAULT_ITERATIONS: usize = 60;
/// Fixed-point tolerance of the cascade iteration.
pub const TOL_CASCADE: f64 = 1e-8;
/// Partition-of-unity tolerance.
pub const TOL_POU: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOptions {
    pub depth: u32,
    pub iterations: usize,
    pub tol: f64,
    /// When false, invalid filters and non-convergence are tolerated and
    /// reported through [`CascadeReport`] instead of returned as errors.
    pub strict: bool,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self {
            depth: DEFAULT_DEPTH,
            iterations: DEFAULT_ITERATIONS,
            tol: TOL_CASCADE,
            strict: true,
        }
    }
}

impl CascadeOptions {
    pub fn with_depth(depth: u32) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }
}

/// How the dyadic table is interpolated between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Right-continuous steps; exact for the Haar box function.
    PiecewiseConstant,
    Linear,
}

/// Provenance of a derivative table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    /// Differentiated two-scale recursion (exact on dyadic nodes).
    Cascade,
    /// Centered finite differences of the value table; approximate.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeReport {
    pub iterations: usize,
    pub last_change: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct DerivativeTable {
    values: Vec<f64>,
    source: DerivativeSource,
}

/// Orthonormal scaling function of a compactly supported MRA.
///
/// Immutable once built; dimension 2 is the tensor product of the 1-D table.
#[derive(Debug, Clone)]
pub struct ScalingFunction {
    filter: FilterBank,
    dimension: usize,
    depth: u32,
    values: Vec<f64>,
    derivative: Option<DerivativeTable>,
    regularity: usize,
    interpolation: Interpolation,
    report: CascadeReport,
}

impl ScalingFunction {
    /// Runs the cascade iteration `phi_{n+1}(x) = sqrt(2) sum_k h_k phi_n(2x - k)`
    /// on the dyadic table until successive iterates agree within `opts.tol`.
    pub fn cascade_build(filter: &FilterBank, opts: CascadeOptions) -> Result<Self> {
        if opts.depth < 4 || opts.depth > 20 {
            return Err(Error::InvalidInput(format!(
                "dyadic depth must lie in 4..=20, got {}",
                opts.depth
            )));
        }
        if opts.iterations == 0 {
            return Err(Error::InvalidInput("cascade needs at least one iteration".into()));
        }
        if opts.strict {
            filter.validate()?;
        } else if filter.len() < 2 {
            return Err(Error::InvalidFilter {
                name: filter.name().to_string(),
                reason: "filter needs at least two taps".into(),
            });
        }

        let h = filter.coefficients();
        let support = filter.support_len();
        let scale = 1usize << opts.depth;
        let len = support * scale + 1;

        let mut table = match integer_node_values(h, 1.0, Normalization::Sum) {
            Some(ints) if !filter.is_haar() => seed_linear(&ints, scale, len),
            _ => seed_box(scale, len),
        };

        let mut next = vec![0.0; len];
        let mut report = CascadeReport {
            iterations: 0,
            last_change: f64::INFINITY,
            converged: false,
        };
        for it in 1..=opts.iterations {
            apply_two_scale(h, 1.0, scale, &table, &mut next);
            let mass: f64 = next.iter().sum::<f64>() / scale as f64;
            if mass.is_finite() && mass != 0.0 && mass != 1.0 {
                next.iter_mut().for_each(|v| *v /= mass);
            }
            let change = table
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            std::mem::swap(&mut table, &mut next);
            report.iterations = it;
            report.last_change = change;
            if change <= opts.tol {
                report.converged = true;
                break;
            }
        }
        if !report.converged && opts.strict {
            return Err(Error::NonConvergent {
                iterations: report.iterations,
                last_change: report.last_change,
            });
        }

        let regularity = if opts.strict || report.converged {
            filter.certified_regularity()
        } else {
            0
        };
        let derivative = (regularity >= 1).then(|| derivative_table(h, scale, &table, opts.tol));
        let interpolation = if filter.is_haar() {
            Interpolation::PiecewiseConstant
        } else {
            Interpolation::Linear
        };

        Ok(Self {
            filter: filter.clone(),
            dimension: 1,
            depth: opts.depth,
            values: table,
            derivative,
            regularity,
            interpolation,
            report,
        })
    }

    /// Cascade build with default options.
    pub fn from_filter(filter: &FilterBank) -> Result<Self> {
        Self::cascade_build(filter, CascadeOptions::default())
    }

    /// Built-in filter by name, default options.
    pub fn builtin(name: &str) -> Result<Self> {
        Self::from_filter(&FilterBank::builtin(name)?)
    }

    /// Tensor-product scaling function `Phi(x1, x2) = phi(x1) phi(x2)`.
    pub fn tensorize(&self) -> Result<Self> {
        if self.dimension != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dimension,
            });
        }
        let mut out = self.clone();
        out.dimension = 2;
        Ok(out)
    }

    pub fn filter(&self) -> &FilterBank {
        &self.filter
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Nodes per unit length, `2^J`.
    pub fn nodes_per_unit(&self) -> usize {
        1usize << self.depth
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.nodes_per_unit() as f64
    }

    /// Right end `N-1` of the support along each axis.
    pub fn support_len(&self) -> usize {
        self.filter.support_len()
    }

    pub fn regularity(&self) -> usize {
        self.regularity
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn cascade_report(&self) -> CascadeReport {
        self.report
    }

    pub fn derivative_source(&self) -> Option<DerivativeSource> {
        self.derivative.as_ref().map(|d| d.source)
    }

    /// Values on the dyadic nodes `i / 2^J`, `i = 0..=(N-1) 2^J`.
    pub fn table(&self) -> &[f64] {
        &self.values
    }

    /// One-dimensional factor `phi(x)`: zero outside the support, interpolated inside.
    pub fn phi(&self, x: f64) -> f64 {
        interpolate(&self.values, self.nodes_per_unit(), self.interpolation, x)
    }

    /// One-dimensional derivative `phi^(order)(x)`.
    pub fn phi_deriv(&self, x: f64, order: usize) -> Result<f64> {
        match order {
            0 => Ok(self.phi(x)),
            _ if order > self.regularity => Err(Error::OrderTooHigh {
                requested: order,
                available: self.regularity,
            }),
            1 => {
                let d = self
                    .derivative
                    .as_ref()
                    .expect("regularity >= 1 implies a derivative table");
                Ok(interpolate(
                    &d.values,
                    self.nodes_per_unit(),
                    Interpolation::Linear,
                    x,
                ))
            }
            _ => unreachable!("regularity is certified at most 1"),
        }
    }

    /// `Phi(x)` for a point of matching dimension.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(x.iter().map(|&xi| self.phi(xi)).product())
    }

    /// `d^alpha Phi(x)` for a multi-index `alpha` with `|alpha| <= r`.
    pub fn eval_deriv(&self, x: &[f64], order: &[usize]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(order.len())?;
        let total: usize = order.iter().sum();
        if total > self.regularity {
            return Err(Error::OrderTooHigh {
                requested: total,
                available: self.regularity,
            });
        }
        x.iter()
            .zip(order)
            .map(|(&xi, &k)| self.phi_deriv(xi, k))
            .product()
    }

    /// `sup |phi(x) - sqrt(2) sum_k h_k phi(2x - k)|` over the dyadic nodes.
    pub fn two_scale_residual(&self) -> f64 {
        let mut next = vec![0.0; self.values.len()];
        apply_two_scale(
            self.filter.coefficients(),
            1.0,
            self.nodes_per_unit(),
            &self.values,
            &mut next,
        );
        self.values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `sup |sum_m phi(x - m) - 1|` over `samples` equispaced points of `[0, 1)`.
    pub fn partition_of_unity_deviation(&self, samples: usize) -> f64 {
        let reach = self.support_len() as i64 + 2;
        (0..samples)
            .map(|s| {
                let x = s as f64 / samples as f64;
                let sum: f64 = (-reach..=reach).map(|m| self.phi(x - m as f64)).sum();
                (sum - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Riemann sum of the table, `2^-J sum_i phi(i 2^-J)` (per axis, multiplied out).
    pub fn integral(&self) -> f64 {
        let one_d = self.values.iter().sum::<f64>() / self.nodes_per_unit() as f64;
        one_d.powi(self.dimension as i32)
    }

    /// Quadrature Gram values `<phi, phi(. - m)>` for `m = 0..=N` (1-D factor).
    ///
    /// Dyadic Riemann sums at depths `J`, `J-1`, `J-2` (subsampled from the same
    /// table) combined by Aitken extrapolation; the raw sums converge only like
    /// `2^{-1.9 J}` for the rougher filters.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.filter.len();
        (0..=n)
            .map(|m| {
                let s0 = self.gram_riemann(m, 2);
                let s1 = self.gram_riemann(m, 1);
                let s2 = self.gram_riemann(m, 0);
                let (d1, d2) = (s1 - s0, s2 - s1);
                let ratio = d2 / d1;
                if d2.abs() > 1e-15 && ratio.is_finite() && ratio > 0.0 && ratio < 1.0 {
                    s2 - d2 * d2 / (d2 - d1)
                } else {
                    s2
                }
            })
            .collect()
    }

    /// `2^-j sum_i phi(x_i) phi(x_i - m)` on the grid of depth `j = J - coarsen`.
    pub fn gram_riemann(&self, m: usize, coarsen: u32) -> f64 {
        let scale = self.nodes_per_unit();
        let stride = 1usize << coarsen;
        let shift = m * scale;
        let s: f64 = self
            .values
            .iter()
            .skip(shift)
            .step_by(stride)
            .zip(self.values.iter().step_by(stride))
            .map(|(a, b)| a * b)
            .sum();
        s * stride as f64 / scale as f64
    }

    /// Largest deviation of `<Phi, Phi(. - m)>` from `delta_{m,0}` over `|m| <= N`.
    pub fn orthonormality_check(&self) -> f64 {
        let g = self.gram();
        let delta = |m: usize| if m == 0 { 1.0 } else { 0.0 };
        match self.dimension {
            1 => g
                .iter()
                .enumerate()
                .map(|(m, v)| (v - delta(m)).abs())
                .fold(0.0, f64::max),
            _ => {
                let mut worst = 0.0_f64;
                for (a, ga) in g.iter().enumerate() {
                    for (b, gb) in g.iter().enumerate() {
                        worst = worst.max((ga * gb - delta(a) * delta(b)).abs());
                    }
                }
                worst
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dimension {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dimension,
                got,
            })
        }
    }
}

fn interpolate(values: &[f64], scale: usize, mode: Interpolation, x: f64) -> f64 {
    let last = values.len() - 1;
    let t = x * scale as f64;
    if !(t >= 0.0 && t <= last as f64) {
        return 0.0;
    }
    let i = t.floor() as usize;
    match mode {
        Interpolation::PiecewiseConstant => {
            if i >= last {
                values[last]
            } else {
                values[i]
            }
        }
        Interpolation::Linear => {
            if i >= last {
                return values[last];
            }
            let f = t - i as f64;
            values[i] + f * (values[i + 1] - values[i])
        }
    }
}

/// One sweep of the two-scale operator on a dyadic table, scaled by `factor`
/// (`factor = 2^k` for the `k`-th derivative).
fn apply_two_scale(h: &[f64], factor: f64, scale: usize, table: &[f64], out: &mut [f64]) {
    let len = table.len() as i64;
    let step = scale as i64;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, hk) in h.iter().enumerate() {
            let idx = 2 * i as i64 - k as i64 * step;
            if (0..len).contains(&idx) {
                acc += hk * table[idx as usize];
            }
        }
        *o = factor * SQRT_2 * acc;
    }
}

#[derive(Clone, Copy)]
enum Normalization {
    /// `sum_k v_k = 1`
    Sum,
    /// `sum_k k v_k = -1`, the derivative of the first-moment identity.
    FirstMoment,
}

/// Values at integer nodes `0..=N-1`: the eigenvector of `M_ij = sqrt(2) h_{2i-j}`
/// for eigenvalue `1 / factor`, normalized. `None` if the system is singular.
fn integer_node_values(h: &[f64], factor: f64, norm: Normalization) -> Option<Vec<f64>> {
    let n = h.len();
    let coef = |idx: i64| {
        if (0..n as i64).contains(&idx) {
            h[idx as usize]
        } else {
            0.0
        }
    };
    let mut a = DMatrix::from_fn(n, n, |i, j| factor * SQRT_2 * coef(2 * i as i64 - j as i64));
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    let last = n - 1;
    for j in 0..n {
        a[(last, j)] = match norm {
            Normalization::Sum => 1.0,
            Normalization::FirstMoment => j as f64,
        };
    }
    let mut b = DVector::zeros(n);
    b[last] = match norm {
        Normalization::Sum => 1.0,
        Normalization::FirstMoment => -1.0,
    };
    let v = a.lu().solve(&b)?;
    v.iter()
        .all(|x| x.is_finite())
        .then(|| v.iter().copied().collect())
}

fn seed_linear(ints: &[f64], scale: usize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let k = i / scale;
            let f = (i % scale) as f64 / scale as f64;
            let a = ints.get(k).copied().unwrap_or(0.0);
            let b = ints.get(k + 1).copied().unwrap_or(0.0);
            a + f * (b - a)
        })
        .collect()
}

fn seed_box(scale: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| if i < scale { 1.0 } else { 0.0 }).collect()
}

/// First-derivative table by the differentiated two-scale recursion, falling
/// back to centered differences of `values` when the recursion is unusable.
fn derivative_table(h: &[f64], scale: usize, values: &[f64], tol: f64) -> DerivativeTable {
    if let Some(ints) = integer_node_values(h, 2.0, Normalization::FirstMoment) {
        let len = values.len();
        let mut table = vec![0.0; len];
        for (k, v) in ints.iter().enumerate() {
            if k * scale < len {
                table[k * scale] = *v;
            }
        }
        // Fill level j from level j-1: nodes at odd multiples of 2^-j.
        let depth = scale.trailing_zeros();
        for j in 1..=depth {
            let stride = scale >> j;
            let mut i = stride;
            while i < len {
                let mut acc = 0.0;
                for (k, hk) in h.iter().enumerate() {
                    let idx = 2 * i as i64 - (k * scale) as i64;
                    if (0..len as i64).contains(&idx) {
                        acc += hk * table[idx as usize];
                    }
                }
                table[i] = 2.0 * SQRT_2 * acc;
                i += 2 * stride;
            }
        }
        let mut check = vec![0.0; len];
        apply_two_scale(h, 2.0, scale, &table, &mut check);
        let peak = table.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let residual = table
            .iter()
            .zip(&check)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= tol * peak {
            return DerivativeTable {
                values: table,
                source: DerivativeSource::Cascade,
            };
        }
    }
    let dx = 1.0 / scale as f64;
    let n = values.len();
    let fd = (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { values[i - 1] };
            let right = if i + 1 == n { 0.0 } else { values[i + 1] };
            (right - left) / (2.0 * dx)
        })
        .collect();
    DerivativeTable {
        values: fd,
        source: DerivativeSource::FiniteDifference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(name: &str) -> ScalingFunction {
        ScalingFunction::builtin(name).unwrap()
    }

    #[test]
    fn haar_is_box_function() {
        let sf = ScalingFunction::cascade_build(&FilterBank::haar(), CascadeOptions::with_depth(8)).unwrap();
        let t = sf.table();
        assert_eq!(t.len(), 257);
        assert!(t[..256].iter().all(|&v| v == 1.0));
        assert_eq!(t[256], 0.0);
        assert_eq!(sf.phi(0.5), 1.0);
        assert_eq!(sf.phi(0.0), 1.0);
        assert_eq!(sf.phi(0.999_999), 1.0);
        assert_eq!(sf.phi(1.0), 0.0);
        assert_eq!(sf.phi(2.0), 0.0);
        assert_eq!(sf.phi(-1e-9), 0.0);
        assert_eq!(sf.regularity(), 0);
    }

    #[test]
    fn daubechies_fixed_point() {
        for name in ["d4", "d6", "d8"] {
            let sf = d(name);
            assert!(sf.cascade_report().converged);
            assert!(sf.two_scale_residual() <= TOL_CASCADE, "{name}");
            assert!(sf.partition_of_unity_deviation(1000) <= TOL_POU, "{name}");
            assert!((sf.integral() - 1.0).abs() < 1e-6, "{name}");
        }
        let d4 = d("d4");
        let ints: f64 = (0..=3).map(|m| d4.phi(m as f64)).sum();
        assert!((ints - 1.0).abs() < 1e-8);
        // phi(1) = (1 + sqrt3)/2, phi(2) = (1 - sqrt3)/2 for D4
        assert!((d4.phi(1.0) - (1.0 + 3f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((d4.phi(2.0) - (1.0 - 3f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn support_is_exact() {
        let d6 = d("d6");
        assert_eq!(d6.phi(5.0000001), 0.0);
        assert_eq!(d6.phi(-0.0000001), 0.0);
        assert_eq!(d6.phi_deriv(5.5, 1).unwrap(), 0.0);
        assert_eq!(d6.phi_deriv(-2.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn orthonormality() {
        assert!(d("haar").orthonormality_check() < 1e-12);
        let d4 = ScalingFunction::cascade_build(&FilterBank::daubechies4(), CascadeOptions::with_depth(10))
            .unwrap();
        assert!(d4.orthonormality_check() <= 1e-6);

        let mut c = FilterBank::daubechies4().coefficients().to_vec();
        c[0] += 0.01;
        let bad = FilterBank::new_unchecked("d4-perturbed", c);
        assert!(ScalingFunction::from_filter(&bad).is_err());
        let opts = CascadeOptions {
            strict: false,
            ..CascadeOptions::default()
        };
        let sf = ScalingFunction::cascade_build(&bad, opts).unwrap();
        assert!(sf.orthonormality_check() > 1e-3);
    }

    #[test]
    fn derivative_orders() {
        let haar = d("haar");
        assert!(matches!(haar.phi_deriv(0.3, 1), Err(Error::OrderTooHigh { .. })));
        let d4 = d("d4");
        assert!(matches!(d4.phi_deriv(1.3, 1), Err(Error::OrderTooHigh { .. })));

        for name in ["d6", "d8"] {
            let sf = d(name);
            assert_eq!(sf.regularity(), 1);
            assert_eq!(sf.derivative_source(), Some(DerivativeSource::Cascade));
            assert!(matches!(sf.phi_deriv(1.0, 2), Err(Error::OrderTooHigh { .. })));
        }
    }

    #[test]
    fn derivative_integrates_back_to_phi() {
        // Trapezoid integral of the derivative table must reproduce the value table.
        for name in ["d6", "d8"] {
            let sf = d(name);
            let h = sf.spacing();
            let t = sf.table();
            let mut acc = 0.0;
            let mut worst = 0.0_f64;
            for (i, ti) in t.iter().enumerate().skip(1) {
                let a = sf.phi_deriv((i - 1) as f64 * h, 1).unwrap();
                let b = sf.phi_deriv(i as f64 * h, 1).unwrap();
                acc += 0.5 * h * (a + b);
                worst = worst.max((acc - ti).abs());
            }
            assert!(worst < 1e-3, "{name}: {worst}");
        }
    }

    #[test]
    fn finite_differences_approach_derivative() {
        // phi' of D6 is only barely continuous, so centered differences converge slowly;
        // the error must still shrink under refinement.
        let x = 2.5;
        let err = |depth: u32| {
            let sf =
                ScalingFunction::cascade_build(&FilterBank::daubechies6(), CascadeOptions::with_depth(depth))
                    .unwrap();
            let s = sf.nodes_per_unit();
            let i = (x * s as f64) as usize;
            let t = sf.table();
            let fd = (t[i + 1] - t[i - 1]) * s as f64 / 2.0;
            (fd - sf.phi_deriv(x, 1).unwrap()).abs()
        };
        let (e10, e14) = (err(10), err(14));
        assert!(e14 < e10, "{e10} {e14}");
        let d8 = d("d8");
        let t = d8.table();
        let i = 2 * d8.nodes_per_unit() + d8.nodes_per_unit() / 2;
        let fd = (t[i + 1] - t[i - 1]) * d8.nodes_per_unit() as f64 / 2.0;
        assert!((fd - d8.phi_deriv(2.5, 1).unwrap()).abs() < 5e-2);
    }

    #[test]
    fn tensor_product() {
        let haar2 = d("haar").tensorize().unwrap();
        assert_eq!(haar2.eval(&[0.5, 0.5]).unwrap(), 1.0);
        let d4_2 = d("d4").tensorize().unwrap();
        assert_eq!(d4_2.eval(&[1.2, 3.5]).unwrap(), 0.0);
        assert_eq!(d4_2.eval(&[1.2, -0.5]).unwrap(), 0.0);
        assert!((d4_2.integral() - 1.0).abs() < 1e-5);
        assert!(d4_2.tensorize().is_err());
        assert!(d4_2.eval(&[1.0]).is_err());
        assert!(d4_2.orthonormality_check() < 1e-6);
    }

    #[test]
    fn rejects_bad_options() {
        let f = FilterBank::daubechies4();
        assert!(ScalingFunction::cascade_build(&f, CascadeOptions::with_depth(3)).is_err());
        let opts = CascadeOptions {
            iterations: 0,
            ..CascadeOptions::default()
        };
        assert!(ScalingFunction::cascade_build(&f, opts).is_err());
    }
}
