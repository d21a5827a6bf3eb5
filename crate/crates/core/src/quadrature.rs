//! Globally adaptive Gauss-Kronrod (G7/K15) quadrature over a list of pieces,
//! with geometric grading toward declared singular points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Relative tolerance used by pairings.
pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Hard cap on integrand evaluations per integral.
pub const DEFAULT_MAX_EVALS: usize = 1 << 20;
/// Number of geometric levels laid toward a singular point.
pub const GRADING_LEVELS: usize = 60;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: 1e-15,
            max_evals: DEFAULT_MAX_EVALS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// Estimate of the integral of `|f|`, the scale for the relative tolerance.
    pub abs_integral: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    abs: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    let value = if value.is_finite() { value } else { 0.0 };
    Segment {
        a,
        b,
        value,
        abs: (abs * h).abs(),
        error: if error.is_finite() { error } else { f64::MAX },
    }
}

/// Integrates `f` over the union of `pieces`, bisecting the worst segment until the
/// summed error estimate is below `max(abs_tol, rel_tol * integral of |f|)` or the
/// evaluation budget is spent.
pub fn integrate<F: Fn(f64) -> f64>(f: F, pieces: &[(f64, f64)], opts: QuadOptions) -> QuadResult {
    let mut heap = BinaryHeap::with_capacity(pieces.len() * 2);
    let mut evals = 0;
    for &(a, b) in pieces {
        if b > a {
            heap.push(gk15(&f, a, b));
            evals += 15;
        }
    }
    let totals = |heap: &BinaryHeap<Segment>| {
        heap.iter().fold((0.0, 0.0, 0.0), |(v, e, s), seg| {
            (v + seg.value, e + seg.error, s + seg.abs)
        })
    };
    let (_, mut error, mut abs) = totals(&heap);
    let mut converged = false;
    loop {
        if error <= opts.abs_tol.max(opts.rel_tol * abs) {
            converged = true;
            break;
        }
        if evals + 30 > opts.max_evals {
            break;
        }
        let Some(worst) = heap.pop() else {
            converged = true;
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Cannot split further; keep its estimate and stop refining it.
            heap.push(Segment { error: 0.0, ..worst });
            error -= worst.error;
            continue;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evals += 30;
        error += left.error + right.error - worst.error;
        abs += left.abs + right.abs - worst.abs;
        heap.push(left);
        heap.push(right);
        if heap.len() % 4096 == 0 {
            // Re-sum to keep running totals from drifting.
            (_, error, abs) = totals(&heap);
        }
    }
    let (value, error, abs) = totals(&heap);
    QuadResult {
        value,
        error,
        abs_integral: abs,
        evaluations: evals,
        converged: converged || error <= opts.abs_tol.max(opts.rel_tol * abs),
    }
}

/// Partition of `[a, b]` into quadrature pieces.
#[derive(Debug, Clone)]
pub struct Partition {
    a: f64,
    b: f64,
    points: Vec<f64>,
    singular: Vec<f64>,
}

/// Mesh nodes beyond this count are thinned to keep the initial heap bounded.
const MAX_MESH_NODES: usize = 1 << 17;

impl Partition {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            points: Vec::new(),
            singular: Vec::new(),
        }
    }

    /// Adds breakpoints where the integrand may be non-smooth.
    pub fn breakpoints(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.points.extend(pts);
        self
    }

    /// Adds the nodes `origin + k * step` inside `[a, b]`.
    pub fn mesh(mut self, origin: f64, step: f64) -> Self {
        if !(step > 0.0) || !step.is_finite() {
            return self;
        }
        let mut step = step;
        while (self.b - self.a) / step > MAX_MESH_NODES as f64 {
            step *= 2.0;
        }
        let k0 = ((self.a - origin) / step).ceil();
        let k1 = ((self.b - origin) / step).floor();
        let mut k = k0;
        while k <= k1 {
            self.points.push(origin + k * step);
            k += 1.0;
        }
        self
    }

    /// Splits `[a, b]` into `n` equal pieces.
    pub fn uniform(mut self, n: usize) -> Self {
        let w = (self.b - self.a) / n as f64;
        self.points.extend((1..n).map(|i| self.a + i as f64 * w));
        self
    }

    /// Declares points toward which pieces are graded geometrically.
    pub fn singular(mut self, pts: impl IntoIterator<Item = f64>) -> Self {
        self.singular.extend(pts);
        self
    }

    pub fn pieces(&self) -> Vec<(f64, f64)> {
        let (a, b) = (self.a, self.b);
        if !(b > a) {
            return Vec::new();
        }
        let mut pts: Vec<f64> = std::iter::once(a)
            .chain(self.points.iter().copied().filter(|p| *p > a && *p < b))
            .chain(self.singular.iter().copied().filter(|p| *p > a && *p < b))
            .chain(std::iter::once(b))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut out = Vec::with_capacity(pts.len() + 2 * GRADING_LEVELS);
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let at_lo = self.singular.contains(&lo);
            let at_hi = self.singular.contains(&hi);
            match (at_lo, at_hi) {
                (false, false) => out.push((lo, hi)),
                (true, false) => grade_from(lo, hi, &mut out),
                (false, true) => grade_from(hi, lo, &mut out),
                (true, true) => {
                    let mid = 0.5 * (lo + hi);
                    grade_from(lo, mid, &mut out);
                    grade_from(hi, mid, &mut out);
                }
            }
        }
        out
    }
}

/// Pieces of the interval between `s` (singular) and `t`, shrinking by half toward `s`.
fn grade_from(s: f64, t: f64, out: &mut Vec<(f64, f64)>) {
    let w = t - s;
    let mut outer = t;
    for k in 1..=GRADING_LEVELS {
        let inner = s + w * 0.5f64.powi(k as i32);
        if inner == outer {
            break;
        }
        out.push(if w > 0.0 { (inner, outer) } else { (outer, inner) });
        outer = inner;
    }
    out.push(if w > 0.0 { (s, outer) } else { (outer, s) });
}

/// Convenience: adaptive integral of `f` over `[a, b]` with default options.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> QuadResult {
    integrate(
        f,
        &Partition::new(a, b).uniform(8).pieces(),
        QuadOptions::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate_interval(|x| 3.0 * x * x - 2.0 * x + 1.0, -1.0, 2.0);
        assert!((r.value - 9.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn graded_singularity() {
        // int_0^1 x^{-1/2} = 2
        let pieces = Partition::new(0.0, 1.0).singular([0.0]).pieces();
        let r = integrate(|x: f64| x.powf(-0.5), &pieces, QuadOptions::default());
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);

        // Interior singular point: int_{-1}^{1} |x|^{-1/2} = 4
        let pieces = Partition::new(-1.0, 1.0).singular([0.0]).pieces();
        let r = integrate(|x: f64| x.abs().powf(-0.5), &pieces, QuadOptions::default());
        assert!((r.value - 4.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn odd_integrand_cancels() {
        let pieces = Partition::new(-2.0, 2.0).breakpoints([0.0]).pieces();
        let r = integrate(
            |x: f64| x.signum() * (-x * x).exp(),
            &pieces,
            QuadOptions::default(),
        );
        assert!(r.value.abs() < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn oscillatory_near_zero() {
        // int_0^1 x sin(1/x) dx = int_1^inf sin(u)/u^3 du, reference by oscillatory quadrature.
        let pieces = Partition::new(0.0, 1.0).singular([0.0]).pieces();
        let r = integrate(|x: f64| x * (1.0 / x).sin(), &pieces, QuadOptions::default());
        let exact = 0.378_530_017_124_161_3;
        assert!((r.value - exact).abs() < 1e-7, "{} vs {exact}", r.value);
    }

    #[test]
    fn mesh_nodes_are_breakpoints() {
        let p = Partition::new(0.0, 1.0).mesh(0.0, 0.25).pieces();
        assert_eq!(p, vec![(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]);
    }

    #[test]
    fn budget_is_respected() {
        let opts = QuadOptions {
            max_evals: 300,
            ..QuadOptions::default()
        };
        let pieces = Partition::new(1e-6, 1.0).pieces();
        let r = integrate(|x: f64| (1.0 / (x * x)).sin(), &pieces, opts);
        assert!(r.evaluations <= 300);
        assert!(!r.converged);
    }
}
