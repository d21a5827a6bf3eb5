use mrdist_core::asymptotics::{
    homogeneous_density, qbc2_pipeline, qbth2_check, qbth3_equivalence, OmegaConvention, SlowlyVarying,
};
use mrdist_core::catalog;
use mrdist_core::kernel::ReproducingKernel;
use mrdist_core::quadrature::{integrate, Partition, QuadOptions};

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[test]
fn projected_pairings_match_direct_ones() {
    let k = ReproducingKernel::builtin("d6").unwrap();
    let battery = catalog::battery("default4").unwrap();
    let eps = log_grid(1e-2, 1e-1, 5);
    for (spec, alpha) in [("delta", -1.0), ("heaviside", 0.0), ("abs_pow(0.5)", 0.5)] {
        let f = catalog::distribution(spec).unwrap();
        let r = qbth3_equivalence(&k, &f, 0.0, &eps, &battery, alpha, SlowlyVarying::Constant).unwrap();
        assert!(r.pass);
    }
}

#[test]
fn projected_limit_of_root_times_polynomial() {
    let k = ReproducingKernel::builtin("d6").unwrap();
    let f = catalog::distribution("abs_pow_poly(0.5;1,0,1)").unwrap();
    let g = catalog::distribution("abs_pow(0.5)").unwrap();
    let lambdas: Vec<f64> = (4..=12).map(f64::from).collect();
    let r = qbth2_check(&k, &f, &g, 0.0, &lambdas, 0.5, SlowlyVarying::Constant).unwrap();
    assert!(r.pass);

    let sf = k.scaling_function();
    let (lo, hi) = (-(sf.support_len() as f64), sf.support_len() as f64);
    let pieces = Partition::new(lo, hi).singular([0.0]).uniform(64).pieces();
    let c = integrate(
        |u| u.abs().sqrt() * k.q0_1d(0.0, u),
        &pieces,
        QuadOptions::default(),
    )
    .value;
    let last = r.normalized.last().unwrap().re;
    assert!((last - c).abs() <= 5e-2 * c.abs());
}

#[test]
fn density_of_inverse_root_measure() {
    let k = ReproducingKernel::builtin("d4").unwrap();
    let mu = catalog::distribution("abs_pow(-0.5)").unwrap();
    let battery = catalog::battery("default4").unwrap();
    let eps = log_grid(1e-3, 1e-1, 7);
    let r = qbc2_pipeline(
        &k,
        &mu,
        0.0,
        0.5,
        &eps,
        &battery,
        SlowlyVarying::Constant,
        OmegaConvention::UnitBall,
    )
    .unwrap();
    let expected = homogeneous_density(1.0, 0.5, OmegaConvention::UnitBall);
    assert!((r.theta - expected).abs() <= 5e-2 * expected);
}
