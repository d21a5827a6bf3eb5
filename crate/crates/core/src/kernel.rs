//! Reproducing kernel `q0(x, y) = sum_m phi(x - m) phi(y - m)` of `V_0`, its
//! dilated and translated versions, and projections of test functions.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth_spaces::{DecayClass, GrowthWeight, Mesh, TestFunction};
use crate::quadrature::{integrate, Partition, QuadOptions};
use crate::scaling_engine::{Interpolation, ScalingFunction};

/// Above this scale, projections of test functions use a moment expansion of the
/// inner integrals instead of quadrature on the dyadic table.
pub const TAYLOR_SCALE: f64 = 1e3;
/// Largest number of lattice coefficients precomputed for a projected test function.
pub const EAGER_COEFFICIENTS: usize = 1 << 14;

const TAYLOR_TERMS: usize = 4;

/// Kernel of the orthogonal projection onto `V_0` of a compactly supported MRA.
///
/// Dimension 2 is the tensor product of the 1-D kernel.
#[derive(Debug, Clone)]
pub struct ReproducingKernel {
    sf: Arc<ScalingFunction>,
}

/// Envelope against which kernel decay is measured.
#[derive(Debug, Clone)]
pub enum Envelope {
    /// `exp(-M(l |x - y|))`.
    Exponential(GrowthWeight),
    /// `(1 + |x - y|)^-l`.
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFit {
    /// Smallest `C` with `|d q0(x, y)| <= C envelope(x - y)` on the sample.
    pub constant: f64,
    pub argmax: (f64, f64),
    pub samples: usize,
}

impl ReproducingKernel {
    pub fn new(sf: ScalingFunction) -> Self {
        Self { sf: Arc::new(sf) }
    }

    pub fn from_shared(sf: Arc<ScalingFunction>) -> Self {
        Self { sf }
    }

    /// Kernel of a built-in filter at the default dyadic depth.
    pub fn builtin(name: &str) -> Result<Self> {
        Ok(Self::new(ScalingFunction::builtin(name)?))
    }

    pub fn scaling_function(&self) -> &ScalingFunction {
        &self.sf
    }

    pub fn shared(&self) -> Arc<ScalingFunction> {
        Arc::clone(&self.sf)
    }

    pub fn dimension(&self) -> usize {
        self.sf.dimension()
    }

    pub fn regularity(&self) -> usize {
        self.sf.regularity()
    }

    /// Support length `N - 1` of `phi`; the kernel vanishes for `|x - y|` beyond it.
    pub fn support_len(&self) -> f64 {
        self.sf.support_len() as f64
    }

    /// Integers `m` for which `phi(x - m)` can be non-zero.
    pub fn lattice_range(&self, x: f64) -> (i64, i64) {
        lattice_range(self.support_len(), x)
    }

    /// 1-D kernel `sum_m phi(x - m) phi(y - m)`.
    pub fn q0_1d(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = self.lattice_range(x);
        (lo..=hi)
            .map(|m| {
                let m = m as f64;
                self.sf.phi(x - m) * self.sf.phi(y - m)
            })
            .sum()
    }

    /// 1-D `d^a/dx^a d^b/dy^b q0(x, y)`.
    pub fn q0_deriv_1d(&self, x: f64, y: f64, a: usize, b: usize) -> Result<f64> {
        let r = self.regularity();
        if a.max(b) > r {
            return Err(Error::OrderTooHigh {
                requested: a.max(b),
                available: r,
            });
        }
        let (lo, hi) = self.lattice_range(x);
        let mut s = 0.0;
        for m in lo..=hi {
            let m = m as f64;
            s += self.sf.phi_deriv(x - m, a)? * self.sf.phi_deriv(y - m, b)?;
        }
        Ok(s)
    }

    /// `q0(x, y)` at points of the kernel's dimension.
    pub fn q0(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let zeros = vec![0; self.dimension()];
        self.q0_deriv(x, y, &zeros, &zeros)
    }

    /// `d^alpha_x d^beta_y q0(x, y)`.
    pub fn q0_deriv(&self, x: &[f64], y: &[f64], alpha: &[usize], beta: &[usize]) -> Result<f64> {
        let n = self.dimension();
        for len in [x.len(), y.len(), alpha.len(), beta.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        let r = self.regularity();
        let (ax, by) = (alpha.iter().sum::<usize>(), beta.iter().sum::<usize>());
        if ax.max(by) > r {
            return Err(Error::OrderTooHigh {
                requested: ax.max(by),
                available: r,
            });
        }
        (0..n)
            .map(|i| self.q0_deriv_1d(x[i], y[i], alpha[i], beta[i]))
            .product()
    }

    /// `q_{lambda,z}(x, y) = 2^{n lambda} q0(2^lambda x + z, 2^lambda y + z)`.
    pub fn q_lambda_z(&self, lambda: f64, z: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.dimension();
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let s = lambda.exp2();
        let map = |p: &[f64]| p.iter().zip(z).map(|(pi, zi)| s * pi + zi).collect::<Vec<_>>();
        let (xs, ys) = (map(x), map(y));
        Ok(s.powi(n as i32) * self.q0(&xs, &ys)?)
    }

    /// 1-D `q_{lambda,z}(x, y)`.
    pub fn q_lambda_z_1d(&self, lambda: f64, z: f64, x: f64, y: f64) -> f64 {
        let s = lambda.exp2();
        s * self.q0_1d(s * x + z, s * y + z)
    }

    /// Smallest `C` such that `|d^a_x d^b_y q0(x, y)| <= C envelope(x - y)` on the sample.
    pub fn decay_envelope_fit(
        &self,
        envelope: &Envelope,
        l: u32,
        orders: (usize, usize),
        sample: &[(f64, f64)],
    ) -> Result<EnvelopeFit> {
        let mut best = EnvelopeFit {
            constant: 0.0,
            argmax: (0.0, 0.0),
            samples: sample.len(),
        };
        for &(x, y) in sample {
            let v = self.q0_deriv_1d(x, y, orders.0, orders.1)?.abs();
            let d = (x - y).abs();
            let inv_env = match envelope {
                Envelope::Exponential(m) => m.eval(l as f64 * d).exp(),
                Envelope::Polynomial => (1.0 + d).powi(l as i32),
            };
            let c = v * inv_env;
            if c > best.constant {
                best.constant = c;
                best.argmax = (x, y);
            }
        }
        Ok(best)
    }

    /// `max_x |int q0(x, y) y^k dy - x^k|` over the sample, by quadrature on the dyadic mesh.
    pub fn polynomial_reproduction_residual(&self, k: u32, xs: &[f64]) -> f64 {
        xs.par_iter()
            .map(|&x| {
                let row = self.kernel_row(0.0, 0.0, x);
                let (a, b) = row.window();
                let pieces = mesh_pieces(a, b, row.mesh());
                let r = integrate(
                    |y| row.value(y) * y.powi(k as i32),
                    &pieces,
                    QuadOptions {
                        rel_tol: 1e-13,
                        ..QuadOptions::default()
                    },
                );
                (r.value - x.powi(k as i32)).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `y -> q_{lambda,z}(x, y)` as a compactly supported test function.
    pub fn kernel_row(&self, lambda: f64, z: f64, x: f64) -> TestFunction {
        let s = lambda.exp2();
        let big_x = s * x + z;
        let (lo, hi) = self.lattice_range(big_x);
        let len = self.support_len();
        let sf = self.shared();
        let spacing = sf.spacing();
        TestFunction::from_fn(
            format!("q[{lambda},{z}]({x},.)"),
            self.regularity(),
            DecayClass::CompactSupport {
                lo: (lo as f64 - z) / s,
                hi: (hi as f64 + len - z) / s,
            },
            move |y, k| {
                let big_y = s * y + z;
                let mut acc = 0.0;
                for m in lo..=hi {
                    let m = m as f64;
                    let a = sf.phi(big_x - m);
                    if a != 0.0 {
                        acc += a * sf.phi_deriv(big_y - m, k).unwrap_or(f64::NAN);
                    }
                }
                acc * s.powi(k as i32 + 1)
            },
        )
        .with_mesh(Mesh {
            origin: -z / s,
            step: spacing / s,
        })
    }

    /// `y -> q0(2^lambda x0 + z, 2^lambda x0 + z + y)`, a bump of unit integral whose
    /// rescaling by `2^-lambda` about `x0` is the kernel row at `x0`.
    pub fn kernel_slice(&self, lambda: f64, z: f64, x0: f64) -> TestFunction {
        let big_x = lambda.exp2() * x0 + z;
        let (lo, hi) = self.lattice_range(big_x);
        let len = self.support_len();
        let sf = self.shared();
        let spacing = sf.spacing();
        TestFunction::from_fn(
            format!("slice[{lambda},{z}]({x0})"),
            self.regularity(),
            DecayClass::CompactSupport {
                lo: lo as f64 - big_x,
                hi: hi as f64 + len - big_x,
            },
            move |y, k| {
                let mut acc = 0.0;
                for m in lo..=hi {
                    let m = m as f64;
                    let a = sf.phi(big_x - m);
                    if a != 0.0 {
                        acc += a * sf.phi_deriv(big_x + y - m, k).unwrap_or(f64::NAN);
                    }
                }
                acc
            },
        )
        .with_mesh(Mesh {
            origin: (big_x / spacing).round() * spacing - big_x,
            step: spacing,
        })
    }

    /// `u -> int s q0(c + s u, c + s x) psi(x) dx`.
    ///
    /// With `s = 2^lambda`, `c = z` this is `q_{lambda,z} psi`. Each lattice term
    /// factors as `phi(c + s u - m) I_m` with `I_m = int phi(v) psi((v + m - c) / s) dv`,
    /// computed on the dyadic table. For `s >= TAYLOR_SCALE` the inner integrals use
    /// the moments of `phi` (truncation error of order `s^-4`) and only values are available.
    pub fn project_test_function(&self, s: f64, c: f64, psi: &TestFunction) -> Result<TestFunction> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "projection scale must be positive, got {s}"
            )));
        }
        if psi.dimension() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: psi.dimension(),
            });
        }
        let len = self.support_len();
        let (w0, w1) = psi.window();
        let decay = match psi.decay() {
            DecayClass::CompactSupport { lo, hi } => DecayClass::CompactSupport {
                lo: lo - len / s,
                hi: hi + len / s,
            },
            other => other,
        };
        let name = format!("P[{s},{c}]{}", psi.name());
        let sf = self.shared();
        let reg = self.regularity();
        let spacing = sf.spacing();

        let m_lo = (c + s * w0 - len).floor();
        let m_hi = (c + s * w1).ceil();
        let count = m_hi - m_lo + 1.0;
        if s < TAYLOR_SCALE && count <= EAGER_COEFFICIENTS as f64 {
            let m0 = m_lo as i64;
            let coeffs: Vec<f64> = (0..count as usize)
                .into_par_iter()
                .map(|i| {
                    let shift = (m0 + i as i64) as f64 - c;
                    inner_integral(&sf, |v| psi.value((v + shift) / s))
                })
                .collect();
            let coeffs = Arc::new(coeffs);
            let f = move |u: f64, k: usize| {
                let a = c + s * u;
                let (lo, hi) = lattice_range(len, a);
                let mut acc = 0.0;
                for m in lo.max(m0)..=hi.min(m0 + coeffs.len() as i64 - 1) {
                    let p = sf.phi_deriv(a - m as f64, k).unwrap_or(f64::NAN);
                    acc += p * coeffs[(m - m0) as usize];
                }
                acc * s.powi(k as i32)
            };
            return Ok(TestFunction::from_fn(name, reg, decay, f).with_mesh(Mesh {
                origin: -c / s,
                step: spacing / s,
            }));
        }

        let psi = psi.clone();
        if s < TAYLOR_SCALE {
            let f = move |u: f64, k: usize| {
                let a = c + s * u;
                let a0 = a - a.floor();
                let mut acc = 0.0;
                let mut j = 0.0;
                while j <= len {
                    let t = a0 + j;
                    let p = sf.phi_deriv(t, k).unwrap_or(f64::NAN);
                    if p != 0.0 {
                        acc += p * inner_integral(&sf, |v| psi.value(u + (v - t) / s));
                    }
                    j += 1.0;
                }
                acc * s.powi(k as i32)
            };
            return Ok(TestFunction::from_fn(name, reg, decay, f).with_mesh(Mesh {
                origin: -c / s,
                step: spacing / s,
            }));
        }

        let terms = TAYLOR_TERMS.min(psi.max_order() + 1);
        let weights: Vec<f64> = (0..terms)
            .map(|p| {
                let fact: f64 = (1..=p).map(|i| i as f64).product();
                inner_integral(&sf, |v| v.powi(p as i32)) / (fact * s.powi(p as i32))
            })
            .collect();
        let f = move |u: f64, _k: usize| {
            let a = c + s * u;
            let a0 = a - a.floor();
            let mut acc = 0.0;
            let mut j = 0.0;
            while j <= len {
                let t = a0 + j;
                let p = sf.phi(t);
                if p != 0.0 {
                    let at = u - t / s;
                    let inner: f64 = weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * psi.deriv(at, q).unwrap_or(f64::NAN))
                        .sum();
                    acc += p * inner;
                }
                j += 1.0;
            }
            acc
        };
        Ok(TestFunction::from_fn(name, 0, decay, f))
    }
}

fn lattice_range(len: f64, x: f64) -> (i64, i64) {
    ((x - len).ceil() as i64, x.floor() as i64)
}

/// `int phi(v) g(v) dv` for the interpolated table, two-point Gauss on each dyadic
/// cell (exact when `g` is cubic on the cell).
fn inner_integral<G: Fn(f64) -> f64>(sf: &ScalingFunction, g: G) -> f64 {
    let table = sf.table();
    let h = sf.spacing();
    let d = 0.5 / 3f64.sqrt();
    let (t0, t1) = (0.5 - d, 0.5 + d);
    let linear = sf.interpolation() == Interpolation::Linear;
    let mut acc = 0.0;
    for (i, w) in table.windows(2).enumerate() {
        let (p0, p1) = if linear {
            (w[0] + t0 * (w[1] - w[0]), w[0] + t1 * (w[1] - w[0]))
        } else {
            (w[0], w[0])
        };
        if p0 == 0.0 && p1 == 0.0 {
            continue;
        }
        let x = i as f64;
        acc += p0 * g((x + t0) * h) + p1 * g((x + t1) * h);
    }
    0.5 * h * acc
}

/// Quadrature pieces for `[a, b]` honouring an optional polynomial mesh.
pub(crate) fn mesh_pieces(a: f64, b: f64, mesh: Option<Mesh>) -> Vec<(f64, f64)> {
    let p = Partition::new(a, b);
    match mesh {
        Some(m) => p.mesh(m.origin, m.step).pieces(),
        None => p.uniform(8).pieces(),
    }
}
