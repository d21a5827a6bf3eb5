//! Growth weights, test functions and their weighted sup-seminorms.

mod test_function;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub use test_function::{DecayClass, Mesh, TestFunction};

/// Largest half-width the automatic grid grows to.
pub const MAX_GRID_RADIUS: f64 = 512.0;
/// Weighted values at the grid edge must fall below this fraction of the maximum.
pub const EDGE_FRACTION: f64 = 1e-3;

const POINTS_PER_WINDOW: f64 = 8192.0;
const MAX_POINTS_1D: usize = 1 << 21;
const POINTS_2D: usize = 401;

/// Growth weight `M` entering `exp(M(l |x|))`.
#[derive(Clone)]
pub enum GrowthWeight {
    /// `M(t) = t^p`, `p >= 1`.
    Power { p: f64 },
    /// Arbitrary `M`, used to probe the axioms.
    Custom {
        name: String,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for GrowthWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthWeight::Power { p } => write!(f, "GrowthWeight::Power {{ p: {p} }}"),
            GrowthWeight::Custom { name, .. } => write!(f, "GrowthWeight::Custom({name})"),
        }
    }
}

impl GrowthWeight {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "weight exponent must be >= 1, got {p}"
            )));
        }
        Ok(GrowthWeight::Power { p })
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: impl Into<String>, eval: F) -> Self {
        GrowthWeight::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// `M(t)` for `t >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            GrowthWeight::Power { p } => t.abs().powf(*p),
            GrowthWeight::Custom { eval, .. } => eval(t.abs()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GrowthWeight::Power { p } => format!("t^{p}"),
            GrowthWeight::Custom { name, .. } => name.clone(),
        }
    }
}

/// Which weighted sup-seminorm to evaluate.
#[derive(Debug, Clone)]
pub enum Seminorm {
    /// `sup exp(M(l|x|)) |d^a phi(x)|`.
    Nu(GrowthWeight),
    /// `sup (1 + |x|)^l |d^a phi(x)|`.
    Rho,
}

impl Seminorm {
    fn weight(&self, radius: f64, l: u32) -> f64 {
        match self {
            Seminorm::Nu(m) => m.eval(l as f64 * radius).exp(),
            Seminorm::Rho => (1.0 + radius).powi(l as i32),
        }
    }

    fn label(&self) -> String {
        match self {
            Seminorm::Nu(m) => format!("nu[{}]", m.label()),
            Seminorm::Rho => "rho".into(),
        }
    }
}

/// Grid on which a supremum was taken: `points` nodes per axis on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub dimension: usize,
}

impl GridSpec {
    pub fn uniform(lo: f64, hi: f64, points: usize) -> Self {
        Self {
            lo,
            hi,
            points: points.max(2),
            dimension: 1,
        }
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeminormReport {
    pub seminorm: String,
    pub r: usize,
    pub l: u32,
    pub value: f64,
    /// Location of the supremum (first coordinate in 2-D).
    pub argmax: f64,
    pub grid: GridSpec,
}

/// `nu_{r,l}(phi)` with an automatically sized grid.
pub fn nu_seminorm(phi: &TestFunction, m: &GrowthWeight, r: usize, l: u32) -> Result<SeminormReport> {
    seminorm(phi, &Seminorm::Nu(m.clone()), r, l, None)
}

/// `rho_{r,l}(phi)` with an automatically sized grid.
pub fn rho_seminorm(phi: &TestFunction, r: usize, l: u32) -> Result<SeminormReport> {
    seminorm(phi, &Seminorm::Rho, r, l, None)
}

/// Weighted supremum over `|alpha| <= r`. With `grid = None` the grid starts at the
/// function's window and doubles until the weighted edge values are below
/// `EDGE_FRACTION` of the maximum; it fails if they grow instead.
pub fn seminorm(
    phi: &TestFunction,
    kind: &Seminorm,
    r: usize,
    l: u32,
    grid: Option<GridSpec>,
) -> Result<SeminormReport> {
    if r > phi.max_order() {
        return Err(Error::OrderTooHigh {
            requested: r,
            available: phi.max_order(),
        });
    }
    if let Some(g) = grid {
        return Ok(sup_on_grid(phi, kind, r, l, &g).report(kind, r, l, g));
    }

    let (lo, hi) = phi.window();
    let width = (hi - lo).max(1e-12);
    let compact = matches!(phi.decay(), DecayClass::CompactSupport { .. }) && phi.dimension() == 1;
    let mut radius = (lo.abs().max(hi.abs()) + 1.0).min(16.0);
    let mut previous_edge: Option<f64> = None;
    loop {
        let g = if compact {
            grid_for(lo, hi, width, phi.dimension())
        } else {
            grid_for(-radius, radius, width, phi.dimension())
        };
        let s = sup_on_grid(phi, kind, r, l, &g);
        if !s.max.is_finite() {
            return Err(Error::DivergentSeminorm { radius, edge: s.edge });
        }
        if compact || s.edge <= EDGE_FRACTION * s.max {
            return Ok(s.report(kind, r, l, g));
        }
        if let Some(prev) = previous_edge {
            if s.edge >= prev {
                return Err(Error::DivergentSeminorm { radius, edge: s.edge });
            }
        }
        if radius >= MAX_GRID_RADIUS {
            return Ok(s.report(kind, r, l, g));
        }
        previous_edge = Some(s.edge);
        radius = (2.0 * radius).min(MAX_GRID_RADIUS);
    }
}

fn grid_for(lo: f64, hi: f64, window: f64, dimension: usize) -> GridSpec {
    let points = if dimension == 1 {
        (((hi - lo) / window * POINTS_PER_WINDOW) as usize + 1).clamp(1025, MAX_POINTS_1D)
    } else {
        POINTS_2D
    };
    GridSpec {
        lo,
        hi,
        points,
        dimension,
    }
}

struct Sup {
    max: f64,
    argmax: f64,
    edge: f64,
}

impl Sup {
    fn report(self, kind: &Seminorm, r: usize, l: u32, grid: GridSpec) -> SeminormReport {
        SeminormReport {
            seminorm: kind.label(),
            r,
            l,
            value: self.max,
            argmax: self.argmax,
            grid,
        }
    }
}

fn multi_indices(dimension: usize, r: usize) -> Vec<Vec<usize>> {
    match dimension {
        1 => (0..=r).map(|a| vec![a]).collect(),
        _ => (0..=r)
            .flat_map(|a| (0..=r - a).map(move |b| vec![a, b]))
            .collect(),
    }
}

fn weighted_max(phi: &TestFunction, kind: &Seminorm, l: u32, alphas: &[Vec<usize>], x: &[f64]) -> f64 {
    let radius = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let w = kind.weight(radius, l);
    alphas
        .iter()
        .map(|a| phi.eval(x, a).map(f64::abs).unwrap_or(f64::NAN))
        .fold(0.0, |m: f64, v| m.max(v * w))
}

fn sup_on_grid(phi: &TestFunction, kind: &Seminorm, r: usize, l: u32, g: &GridSpec) -> Sup {
    let alphas = multi_indices(phi.dimension(), r);
    let n = g.points;
    let edge_band = (n / 20).max(1);
    let f1 = |x: f64| weighted_max(phi, kind, l, &alphas, &[x]);
    let (values, at): (Vec<f64>, Vec<(usize, usize)>) = if phi.dimension() == 1 {
        (0..n).into_par_iter().map(|i| (f1(g.node(i)), (i, 0))).unzip()
    } else {
        (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                (
                    weighted_max(phi, kind, l, &alphas, &[g.node(i), g.node(j)]),
                    (i, j),
                )
            })
            .unzip()
    };
    let mut max = 0.0;
    let mut best = 0;
    let mut edge: f64 = 0.0;
    for (k, (&v, &(i, j))) in values.iter().zip(&at).enumerate() {
        if v > max {
            max = v;
            best = k;
        }
        let near_edge = |t: usize| t < edge_band || t >= n - edge_band;
        if near_edge(i) || (phi.dimension() == 2 && near_edge(j)) {
            edge = edge.max(v);
        }
    }
    let mut argmax = g.node(at[best].0);
    if phi.dimension() == 1 && max > 0.0 {
        // Golden-section polish between the neighbours of the best node.
        let h = g.step();
        let (x, v) = golden_max(f1, (argmax - h).max(g.lo), (argmax + h).min(g.hi));
        if v > max {
            max = v;
            argmax = x;
        }
    }
    Sup { max, argmax, edge }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Positive parts of the violations of the weight axioms on a sampled grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxiomViolations {
    /// `M(t) + M(s) <= M(t + s)`.
    pub superadditivity: f64,
    /// `M(t + s) <= M(2t) + M(2s)`.
    pub doubling: f64,
    /// `M(t x) + M(s x) <= M((t + s) x)`.
    pub scaled_superadditivity: f64,
}

impl AxiomViolations {
    pub fn max(&self) -> f64 {
        self.superadditivity
            .max(self.doubling)
            .max(self.scaled_superadditivity)
    }
}

/// Checks the weight axioms on the `points x points` grid of `[0, t_max]^2`,
/// and the scaled form for dilations `x` in `{1/4, 1/2, 2, 4}`.
pub fn weight_axiom_check(m: &GrowthWeight, t_max: f64, points: usize) -> AxiomViolations {
    let points = points.max(2);
    let ts: Vec<f64> = (0..points)
        .map(|i| t_max * i as f64 / (points - 1) as f64)
        .collect();
    let mut v = AxiomViolations {
        superadditivity: 0.0,
        doubling: 0.0,
        scaled_superadditivity: 0.0,
    };
    // Relative slack absorbs rounding where equality holds (M(t) = t).
    let excess = |lhs: f64, rhs: f64| {
        let d = lhs - rhs;
        if d > 1e-12 * (1.0 + rhs.abs()) {
            d
        } else {
            0.0
        }
    };
    for &t in &ts {
        for &s in &ts {
            v.superadditivity = v
                .superadditivity
                .max(excess(m.eval(t) + m.eval(s), m.eval(t + s)));
            v.doubling = v
                .doubling
                .max(excess(m.eval(t + s), m.eval(2.0 * t) + m.eval(2.0 * s)));
            for x in [0.25, 0.5, 2.0, 4.0] {
                v.scaled_superadditivity = v
                    .scaled_superadditivity
                    .max(excess(m.eval(t * x) + m.eval(s * x), m.eval((t + s) * x)));
            }
        }
    }
    v
}

/// Largest seminorm over a family, with the report of the maximizing member.
pub fn bounded_family_seminorm_sweep(
    family: &[TestFunction],
    kind: &Seminorm,
    r: usize,
    l: u32,
) -> Result<(usize, SeminormReport)> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let reports = family
        .iter()
        .map(|phi| seminorm(phi, kind, r, l, None))
        .collect::<Result<Vec<_>>>()?;
    let (i, best) = reports
        .into_iter()
        .enumerate()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .expect("family is non-empty");
    Ok((i, best))
}

/// Largest ratio of `|phi|` to its declared envelope on `[-radius, radius]`;
/// bounded (and zero outside a compact support) when the declared class is honest.
pub fn decay_envelope_ratio(phi: &TestFunction, radius: f64, points: usize) -> Result<f64> {
    if phi.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: phi.dimension(),
        });
    }
    let g = GridSpec::uniform(-radius, radius, points);
    let mut worst: f64 = 0.0;
    for i in 0..g.points {
        let x = g.node(i);
        let v = phi.value(x).abs();
        let ratio = match phi.decay() {
            DecayClass::CompactSupport { lo, hi } => {
                if x < lo || x > hi {
                    if v > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    v
                }
            }
            // Half the Gaussian exponent leaves room for polynomial factors.
            DecayClass::Gaussian { center, width } => v * (0.5 * ((x - center) / width).powi(2)).exp(),
            DecayClass::RationalDecay { power } => v * (1.0 + x.abs()).powf(power),
        };
        worst = worst.max(ratio);
    }
    Ok(worst)
}
