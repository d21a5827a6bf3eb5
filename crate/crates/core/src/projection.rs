//! Multiresolution projections `(q_{lambda,z} f)(x) = <f(y), q_{lambda,z}(x, y)>`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sci;
use crate::generalized_functions::{pair, pair_scaled, Density, GeneralizedFunction};
use crate::growth_spaces::{DecayClass, Mesh, TestFunction};
use crate::kernel::{mesh_pieces, ReproducingKernel};
use crate::quadrature::{integrate, QuadOptions};

/// `(q_{lambda,z} f)(x)` by pairing `f` with the kernel row `y -> q_{lambda,z}(x, y)`.
pub fn project_at(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    lambda: f64,
    z: f64,
    x: f64,
) -> Result<Complex64> {
    pair(f, &k.kernel_row(lambda, z, x))
}

/// The same value through the rescaled pairing `<f(x + 2^-lambda y), phi_lambda(y)>`
/// with the unit-mass slice `phi_lambda(y) = q0(2^lambda x + z, 2^lambda x + z + y)`.
pub fn project_at_rescaled(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    lambda: f64,
    z: f64,
    x: f64,
) -> Result<Complex64> {
    pair_scaled(f, x, (-lambda).exp2(), &k.kernel_slice(lambda, z, x))
}

/// Test function `y -> 2^lambda phi(2^lambda y + z - m)`.
fn atom(k: &ReproducingKernel, lambda: f64, z: f64, m: i64) -> TestFunction {
    let s = lambda.exp2();
    let sf = k.shared();
    let len = k.support_len();
    let shift = z - m as f64;
    TestFunction::from_fn(
        format!("phi[{lambda},{z},{m}]"),
        k.regularity(),
        DecayClass::CompactSupport {
            lo: (m as f64 - z) / s,
            hi: (m as f64 + len - z) / s,
        },
        move |y, d| sf.phi_deriv(s * y + shift, d).unwrap_or(f64::NAN) * s.powi(d as i32 + 1),
    )
    .with_mesh(Mesh {
        origin: -z / s,
        step: k.scaling_function().spacing() / s,
    })
}

/// Expansion coefficients `c_m = <f, 2^lambda phi(2^lambda . + z - m)>` for `m` in `lo..=hi`.
pub fn coefficients(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    lambda: f64,
    z: f64,
    lo: i64,
    hi: i64,
) -> Result<Vec<Complex64>> {
    (lo..=hi)
        .into_par_iter()
        .map(|m| pair(f, &atom(k, lambda, z, m)))
        .collect()
}

/// `(q_{lambda,z} f)(x) = sum_m phi(2^lambda x + z - m) c_m`, the coefficient form.
pub fn project_at_coefficients(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    lambda: f64,
    z: f64,
    x: f64,
) -> Result<Complex64> {
    let t = lambda.exp2() * x + z;
    let (lo, hi) = k.lattice_range(t);
    let c = coefficients(k, f, lambda, z, lo, hi)?;
    Ok((lo..=hi)
        .zip(c)
        .map(|(m, cm)| cm * k.scaling_function().phi(t - m as f64))
        .sum())
}

/// `q_{lambda,z} f` on `[a, b]` as a density (zero outside), from its lattice coefficients.
/// Requires real values.
pub fn projected_density(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    lambda: f64,
    z: f64,
    window: (f64, f64),
) -> Result<Density> {
    let s = lambda.exp2();
    let (a, b) = window;
    let len = k.support_len();
    let lo = (s * a + z - len).floor() as i64;
    let hi = (s * b + z).ceil() as i64;
    let c = coefficients(k, f, lambda, z, lo, hi)?;
    if let Some(bad) = c.iter().find(|v| v.im != 0.0) {
        return Err(Error::InvalidInput(format!(
            "projection of `{}` is complex ({bad}); densities are real",
            f.name()
        )));
    }
    let c: Arc<Vec<f64>> = Arc::new(c.iter().map(|v| v.re).collect());
    let sf = k.shared();
    let spacing = sf.spacing();
    Ok(
        Density::from_fn(format!("q[{lambda},{z}]{}", f.name()), 0.0, move |x| {
            if x < a || x > b {
                return 0.0;
            }
            let t = s * x + z;
            let (m0, m1) = ((t - len).ceil() as i64, t.floor() as i64);
            (m0.max(lo)..=m1.min(hi))
                .map(|m| sf.phi(t - m as f64) * c[(m - lo) as usize])
                .sum()
        })
        .with_support(a, b)
        .with_mesh(Mesh {
            origin: -z / s,
            step: spacing / s,
        }),
    )
}

/// Values `(q_lambda f)(x0)` along a grid of scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSequence {
    pub f: String,
    pub x0: f64,
    pub z: f64,
    pub lambdas: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `|v_k - v_{k-1}|`, zero for the first entry.
    pub differences: Vec<f64>,
}

impl ProjectionSequence {
    /// `lambda,re,im,abs_diff` rows with fixed float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,re,im,abs_diff\n");
        for ((l, v), d) in self.lambdas.iter().zip(&self.values).zip(&self.differences) {
            out.push_str(&format!("{},{},{},{}\n", sci(*l), sci(v.re), sci(v.im), sci(*d)));
        }
        out
    }

    /// Whether `|v - target|` is non-increasing over the last `n` entries.
    pub fn decreasing_error(&self, target: Complex64, n: usize) -> bool {
        let errs: Vec<f64> = self.values.iter().map(|v| (v - target).norm()).collect();
        let start = errs.len().saturating_sub(n);
        errs[start..].windows(2).all(|w| w[1] <= w[0])
    }
}

/// `(q_{lambda,z} f)(x0)` for each `lambda` (strictly increasing).
pub fn expansion_sequence(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    x0: f64,
    z: f64,
    lambdas: &[f64],
) -> Result<ProjectionSequence> {
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "scale grid must be strictly increasing".into(),
        ));
    }
    let values = lambdas
        .par_iter()
        .map(|&l| project_at(k, f, l, z, x0))
        .collect::<Result<Vec<_>>>()?;
    if let Some(v) = values.iter().find(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite projection value {v}")));
    }
    let differences = std::iter::once(0.0)
        .chain(values.windows(2).map(|w| (w[1] - w[0]).norm()))
        .collect();
    Ok(ProjectionSequence {
        f: f.name().to_string(),
        x0,
        z,
        lambdas: lambdas.to_vec(),
        values,
        differences,
    })
}

/// `max |q_lambda(q_lambda f) - q_lambda f|` over `samples`, with `q_lambda f`
/// resampled on `window`.
pub fn idempotence_check(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    lambda: f64,
    window: (f64, f64),
    samples: &[f64],
) -> Result<f64> {
    nesting_check(k, f, lambda, lambda, window, samples)
}

/// `max |q_lambda(q_fine f) - q_lambda f|` over `samples` for `lambda <= fine`.
pub fn nesting_check(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    lambda: f64,
    fine: f64,
    window: (f64, f64),
    samples: &[f64],
) -> Result<f64> {
    if fine < lambda {
        return Err(Error::InvalidInput(format!("nesting needs {lambda} <= {fine}")));
    }
    let once = projected_density(k, f, lambda, 0.0, window)?;
    let inner = GeneralizedFunction::density(projected_density(k, f, fine, 0.0, window)?);
    samples
        .par_iter()
        .map(|&x| Ok((project_at_coefficients(k, &inner, lambda, 0.0, x)?.re - once.eval(x)).abs()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Both sides of `(q_j delta)(0) = 2^j sum_m phi(m)^2 = 2^j sum_m F^(2 pi m)`, `F = phi^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonCheck {
    pub j: i32,
    /// `2^j sum_m phi(m)^2`.
    pub lattice_side: f64,
    /// `2^j (2 pi)^-1 sum_m (phi^ * phi^)(2 pi m)` from the discrete spectrum of the table.
    pub spectral_side: f64,
    pub relative_difference: f64,
}

/// Evaluates `(q_j delta)(0)` by the lattice sum and by Poisson summation of the
/// self-convolved spectrum `phi^ * phi^` (FFT of the zero-padded dyadic table).
pub fn delta_expansion_poisson_check(k: &ReproducingKernel, j: i32) -> PoissonCheck {
    let sf = k.scaling_function();
    let scale = 2f64.powi(j);
    let len = sf.support_len() as i64;
    let lattice: f64 = (0..=len).map(|m| sf.phi(m as f64).powi(2)).sum();

    let table = sf.table();
    let per_unit = sf.nodes_per_unit();
    let h = sf.spacing();
    let p = (4 * table.len()).next_power_of_two().max(2 * per_unit);
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(p);
    let inverse = planner.plan_fft_inverse(p);

    // Spectrum phi^(xi_k) ~ h sum_i phi_i exp(-i xi_k x_i), xi_k = 2 pi k / (p h).
    let mut spectrum: Vec<Complex64> = (0..p)
        .map(|i| Complex64::new(table.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    forward.process(&mut spectrum);
    spectrum.iter_mut().for_each(|v| *v *= h);

    // Circular convolution of the spectrum with itself on the frequency grid.
    let mut back = spectrum.clone();
    inverse.process(&mut back);
    back.iter_mut()
        .for_each(|v| *v = (*v / p as f64) * (*v / p as f64));
    forward.process(&mut back);
    let d_xi = 2.0 * std::f64::consts::PI / (p as f64 * h);
    let conv: Vec<Complex64> = back.iter().map(|v| v * p as f64 * d_xi).collect();

    // xi = 2 pi m sits at index m p h = m p / 2^J; sum over the Nyquist band.
    let stride = p / per_unit;
    let half = per_unit / 2;
    let mut sum = Complex64::new(0.0, 0.0);
    for m in -(half as i64) + 1..half as i64 {
        let idx = (m * stride as i64).rem_euclid(p as i64) as usize;
        sum += conv[idx];
    }
    let spectral = sum.re / (2.0 * std::f64::consts::PI);
    let (a, b) = (scale * lattice, scale * spectral);
    PoissonCheck {
        j,
        lattice_side: a,
        spectral_side: b,
        relative_difference: (a - b).abs() / a.abs(),
    }
}

/// `<q_{lambda,z} f, psi>` and `<f, q_{lambda,z} psi>`.
pub fn dual_pairing_check(
    k: &ReproducingKernel,
    f: &GeneralizedFunction,
    psi: &TestFunction,
    lambda: f64,
    z: f64,
) -> Result<(f64, f64)> {
    let s = lambda.exp2();
    let (a, b) = psi.window();
    let len = k.support_len() / s;
    let qf = projected_density(k, f, lambda, z, (a - len, b + len))?;
    let lhs = integrate(
        |x| qf.eval(x) * psi.value(x),
        &mesh_pieces(a, b, qf.mesh()),
        QuadOptions::default(),
    )
    .value;
    let rhs = pair(f, &k.project_test_function(s, z, psi)?)?.re;
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformSweepRow {
    pub lambda: f64,
    pub z: f64,
    /// `sup |q_{lambda,z} psi - psi|` on the grid.
    pub sup_error: f64,
}

/// Sup-grid distance between `q_{lambda,z} psi` and `psi` for every `(lambda, z)`.
pub fn uniform_convergence_sweep(
    k: &ReproducingKernel,
    psi: &TestFunction,
    lambdas: &[f64],
    zs: &[f64],
    grid_points: usize,
) -> Result<Vec<UniformSweepRow>> {
    let (a, b) = psi.window();
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| a + (b - a) * i as f64 / (grid_points - 1).max(1) as f64)
        .collect();
    let mut rows = Vec::new();
    for &lambda in lambdas {
        for &z in zs {
            let q = k.project_test_function(lambda.exp2(), z, psi)?;
            let sup_error = grid
                .par_iter()
                .map(|&x| (q.value(x) - psi.value(x)).abs())
                .reduce(|| 0.0, f64::max);
            rows.push(UniformSweepRow { lambda, z, sup_error });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_interval;

    fn kernel(name: &str) -> ReproducingKernel {
        ReproducingKernel::builtin(name).unwrap()
    }

    #[test]
    fn haar_closed_forms() {
        let k = kernel("haar");
        let one = GeneralizedFunction::density(Density::one());
        let h = GeneralizedFunction::density(Density::heaviside());
        let delta = GeneralizedFunction::delta(0.0);
        for lambda in [0.0, 1.0, 3.0, 6.0] {
            for x in [0.0, 0.3, -1.7] {
                assert!((project_at(&k, &one, lambda, 0.0, x).unwrap().re - 1.0).abs() < 1e-12);
            }
            assert!((project_at(&k, &h, lambda, 0.0, 0.0).unwrap().re - 1.0).abs() < 1e-12);
            let inside = 0.7 * (-lambda).exp2();
            let d = project_at(&k, &delta, lambda, 0.0, inside).unwrap().re;
            assert_eq!(d, lambda.exp2());
        }
    }

    #[test]
    fn haar_projection_is_cell_average() {
        let k = kernel("haar");
        let g = Density::gaussian();
        let f = GeneralizedFunction::density(g.clone());
        for (lambda, cell) in [(2.0_f64, 3i32), (5.0, -7)] {
            let w = (-lambda).exp2();
            let (a, b) = (cell as f64 * w, (cell + 1) as f64 * w);
            let avg = integrate_interval(|x| g.eval(x), a, b).value / w;
            let v = project_at(&k, &f, lambda, 0.0, a).unwrap().re;
            assert!((v - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_paths_agree() {
        let fs = [
            GeneralizedFunction::density(Density::x_sin_inv()),
            GeneralizedFunction::density(Density::cos_plus(2.0)),
            GeneralizedFunction::delta(0.01),
            GeneralizedFunction::delta_derivative(0.02, 1),
        ];
        let k = kernel("d6");
        for f in &fs {
            for (lambda, z, x) in [(3.0, 0.0, 0.0), (5.5, 0.3, 0.37), (8.0, 0.7, -0.01)] {
                let a = project_at(&k, f, lambda, z, x).unwrap();
                let b = project_at_rescaled(&k, f, lambda, z, x).unwrap();
                let c = project_at_coefficients(&k, f, lambda, z, x).unwrap();
                let scale = a.norm().max(1.0);
                assert!((a - b).norm() <= 1e-8 * scale, "{} {lambda}: {a} {b}", f.name());
                assert!((a - c).norm() <= 1e-8 * scale, "{} {lambda}: {a} {c}", f.name());
            }
        }
    }

    #[test]
    fn gaussian_converges_at_a_point() {
        let k = kernel("d6");
        let f = GeneralizedFunction::density(Density::gaussian());
        let lambdas: Vec<f64> = (0..=12).map(f64::from).collect();
        let seq = expansion_sequence(&k, &f, 0.0, 0.0, &lambdas).unwrap();
        let last = seq.values.last().unwrap();
        assert!((last.re - 1.0).abs() < 1e-3);
        assert!(seq.to_csv().lines().count() == 14);
    }

    #[test]
    fn haar_sgn_sequence_is_constant() {
        let k = kernel("haar");
        let f = GeneralizedFunction::density(Density::sgn());
        let lambdas: Vec<f64> = (0..=6).map(f64::from).collect();
        let seq = expansion_sequence(&k, &f, 0.0, 0.0, &lambdas).unwrap();
        assert!(seq.values.iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        assert!(expansion_sequence(&k, &f, 0.0, 0.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn projection_laws() {
        let samples: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let haar = kernel("haar");
        let h = GeneralizedFunction::density(Density::heaviside());
        assert!(idempotence_check(&haar, &h, 2.0, (-3.0, 3.0), &samples).unwrap() < 1e-10);
        let g = GeneralizedFunction::density(Density::gaussian());
        assert!(nesting_check(&haar, &g, 2.0, 4.0, (-7.0, 7.0), &samples).unwrap() < 1e-10);
        let d4 = kernel("d4");
        assert!(idempotence_check(&d4, &g, 4.0, (-7.0, 7.0), &samples).unwrap() < 1e-4);
    }

    #[test]
    fn poisson_sides() {
        for name in ["haar", "d4", "d6"] {
            let k = kernel(name);
            for j in 0..3 {
                let p = delta_expansion_poisson_check(&k, j);
                assert!(p.relative_difference < 2e-2, "{name} {j}: {p:?}");
                let next = delta_expansion_poisson_check(&k, j + 1);
                assert!((next.lattice_side / p.lattice_side - 2.0).abs() < 1e-12);
            }
        }
        let haar = delta_expansion_poisson_check(&kernel("haar"), 3);
        assert_eq!(haar.lattice_side, 8.0);
    }

    #[test]
    fn dual_pairing() {
        let k = kernel("d6");
        let f = GeneralizedFunction::density(Density::cos_plus(2.0));
        for psi in [TestFunction::gaussian(), TestFunction::bump(1.0, 3.0)] {
            let (lhs, rhs) = dual_pairing_check(&k, &f, &psi, 3.0, 0.3).unwrap();
            assert!((lhs - rhs).abs() < 1e-6, "{}: {lhs} {rhs}", psi.name());
        }
    }

    #[test]
    fn uniform_in_translation() {
        let k = kernel("d6");
        let rows = uniform_convergence_sweep(
            &k,
            &TestFunction::gaussian(),
            &[0.0, 2.0, 4.0, 6.0, 8.0],
            &[0.0, 0.3, 0.7],
            801,
        )
        .unwrap();
        let at = |l: f64| {
            rows.iter()
                .filter(|r| r.lambda == l)
                .map(|r| r.sup_error)
                .collect::<Vec<_>>()
        };
        let first = at(0.0).into_iter().fold(0.0, f64::max);
        let last = at(8.0);
        let worst = last.iter().copied().fold(0.0, f64::max);
        assert!(worst < 1e-2 * first, "{first} {worst}");
        assert!(worst <= 2.0 * last[0]);
    }
}
