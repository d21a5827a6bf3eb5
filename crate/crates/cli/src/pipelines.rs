use mrdist_core::asymptotics::{
    alpha_density, qbc2_pipeline, qbth2_check, qbth3_equivalence, quasi_fit, QuasiOptions, SLOPE_TOL,
    VANISH_REL,
};
use mrdist_core::generalized_functions::{
    density_point_check, GeneralizedFunction, MeasureBase, ShrinkingFamily,
};
use mrdist_core::kernel::ReproducingKernel;
use mrdist_core::projection::{
    delta_expansion_poisson_check, expansion_sequence, idempotence_check, project_at, projected_density,
};
use mrdist_core::scaling_engine::{CascadeOptions, ScalingFunction};
use mrdist_core::Error;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::config::{DensityMode, Experiment, Pipeline};
use crate::report::{num, nums, Check, Outcome, Table};

/// A numerical failure together with the criterion it breaks.
#[derive(Debug, Clone)]
pub struct Failure {
    pub criterion: String,
    pub error: Error,
}

trait At<T> {
    fn at(self, stage: &str) -> Result<T, Failure>;
}

impl<T> At<T> for mrdist_core::Result<T> {
    fn at(self, stage: &str) -> Result<T, Failure> {
        self.map_err(|error| {
            let criterion = match &error {
                Error::HypothesisFailed { clause, .. } => clause.clone(),
                Error::InconsistentDegree { .. } => "slope_spread".into(),
                Error::AllPairingsVanish => "pairings_vanish".into(),
                Error::NegativeMeasure { .. } => "negative_measure".into(),
                _ => stage.into(),
            };
            Failure { criterion, error }
        })
    }
}

type Step = Result<(), Failure>;

pub fn execute(exp: &Experiment, out: &mut Outcome) -> Step {
    match exp.pipeline {
        Pipeline::Info => info(exp, out),
        Pipeline::Project => project(exp, out),
        Pipeline::Converge => converge(exp, out),
        Pipeline::Quasi => quasi(exp, out),
        Pipeline::Qbth3 => qbth3(exp, out),
        Pipeline::Density => density(exp, out),
        Pipeline::DeltaPoisson => delta_poisson(exp, out),
    }
}

fn scaling_function(exp: &Experiment) -> Result<ScalingFunction, Failure> {
    let opts = exp
        .depth
        .map_or_else(CascadeOptions::default, CascadeOptions::with_depth);
    ScalingFunction::cascade_build(&exp.filter, opts).at("cascade")
}

fn kernel(exp: &Experiment) -> Result<ReproducingKernel, Failure> {
    Ok(ReproducingKernel::new(scaling_function(exp)?))
}

/// The configured distribution, replaced by `q_lambda f` near `x0` when requested.
fn subject(exp: &Experiment, k: &ReproducingKernel) -> Result<GeneralizedFunction, Failure> {
    let f = exp.distribution.clone().expect("validated");
    match exp.project_lambda {
        None => Ok(f),
        Some(lambda) => {
            let reach = 8.0 + k.support_len() / lambda.exp2();
            let window = (exp.x0 - reach, exp.x0 + reach);
            let name = format!("q_{lambda}({})", f.name());
            let d = projected_density(k, &f, lambda, exp.z, window).at("projection")?;
            Ok(GeneralizedFunction::density(d).with_name(name))
        }
    }
}

/// `g(x0)` when `f = gamma + g dx` with a single density term.
fn density_value(f: &GeneralizedFunction, x0: f64) -> Option<f64> {
    match f.terms() {
        [t] if t.order == 0 && t.weight.im == 0.0 && f.gamma().im == 0.0 => match &t.base {
            MeasureBase::Density(g) => Some(f.gamma().re + t.weight.re * g.eval(x0)),
            _ => None,
        },
        _ => None,
    }
}

fn info(exp: &Experiment, out: &mut Outcome) -> Step {
    let sf = scaling_function(exp)?;
    let report = sf.cascade_report();
    let shaped = if exp.dimension == 2 {
        sf.tensorize().at("tensorize")?
    } else {
        sf.clone()
    };
    let orth = shaped.orthonormality_check();
    let two_scale = sf.two_scale_residual();
    let pou = sf.partition_of_unity_deviation(1024);

    let mut phi = Table::new("phi.csv", &["x", "phi"]);
    let steps = sf.support_len() * 64;
    for i in 0..=steps {
        let x = i as f64 / 64.0;
        phi.row(&[x, sf.phi(x)]);
    }
    out.tables.push(phi);

    out.put("dimension", Value::from(exp.dimension));
    out.put("depth", Value::from(sf.depth()));
    out.put("support_len", Value::from(sf.support_len()));
    out.put("regularity", Value::from(sf.regularity()));
    out.put("cascade_iterations", Value::from(report.iterations));
    out.put("cascade_converged", Value::Bool(report.converged));
    out.put("integral", num(shaped.integral()));
    out.put("orthonormality", num(orth));
    out.put("two_scale_residual", num(two_scale));
    out.put("partition_of_unity", num(pou));

    let t = &exp.tol;
    out.checks.push(Check::at_most(
        "orthonormality",
        orth,
        t.orthonormality.unwrap_or(1e-6),
    ));
    out.checks.push(Check::at_most(
        "two_scale",
        two_scale,
        t.two_scale.unwrap_or(1e-8),
    ));
    out.checks.push(Check::at_most(
        "partition_of_unity",
        pou,
        t.partition_of_unity.unwrap_or(1e-6),
    ));

    let degrees = t.reproduction_degrees.clone().unwrap_or_default();
    if exp.dimension == 1 && (!degrees.is_empty() || t.witness_degree.is_some()) {
        let k = ReproducingKernel::new(sf);
        let (lo, hi, n) = exp.x.as_ref().map_or((0.0, 4.0, 401), |x| (x.lo, x.hi, x.points));
        let xs: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let top = degrees
            .iter()
            .copied()
            .chain(t.witness_degree)
            .max()
            .expect("non-empty");
        let residuals: Vec<f64> = (0..=top)
            .map(|d| k.polynomial_reproduction_residual(d, &xs))
            .collect();
        let mut table = Table::new("reproduction.csv", &["degree", "residual"]);
        for (d, r) in residuals.iter().enumerate() {
            table.row(&[d as f64, *r]);
        }
        out.tables.push(table);
        out.put("reproduction_residuals", nums(&residuals));
        for d in degrees {
            let bound = t.reproduction.unwrap_or(1e-5);
            out.checks.push(Check::at_most(
                format!("reproduction_degree_{d}"),
                residuals[d as usize],
                bound,
            ));
        }
        if let Some(w) = t.witness_degree {
            let min = t.witness_min.unwrap_or(1e-2);
            out.checks.push(Check::at_least(
                format!("witness_degree_{w}"),
                residuals[w as usize],
                min,
            ));
        }
    }
    Ok(())
}

fn project(exp: &Experiment, out: &mut Outcome) -> Step {
    let k = kernel(exp)?;
    let f = subject(exp, &k)?;
    let span = exp.x.as_ref().expect("validated");
    let xs: Vec<f64> = (0..span.points)
        .map(|i| span.lo + (span.hi - span.lo) * i as f64 / (span.points - 1) as f64)
        .collect();
    let mut table = Table::new("project.csv", &["lambda", "x", "re", "im"]);
    let mut peak = 0.0f64;
    for &lambda in &exp.lambdas {
        let values = xs
            .par_iter()
            .map(|&x| project_at(&k, &f, lambda, exp.z, x))
            .collect::<mrdist_core::Result<Vec<_>>>()
            .at("projection")?;
        for (x, v) in xs.iter().zip(&values) {
            table.row(&[lambda, *x, v.re, v.im]);
            peak = peak.max(v.norm());
        }
    }
    out.tables.push(table);
    out.put("points", Value::from(xs.len() * exp.lambdas.len()));
    out.put("max_abs_value", num(peak));
    out.checks.push(Check::finite("values_finite", peak));
    if let Some(tol) = exp.tol.idempotence {
        let lambda = *exp.lambdas.last().expect("validated");
        let reach = k.support_len() / lambda.exp2();
        let window = (span.lo - reach, span.hi + reach);
        let defect = idempotence_check(&k, &f, lambda, window, &xs).at("idempotence")?;
        out.put("idempotence_defect", num(defect));
        out.checks.push(Check::at_most("idempotence", defect, tol));
    }
    Ok(())
}

fn converge(exp: &Experiment, out: &mut Outcome) -> Step {
    let k = kernel(exp)?;
    let f = subject(exp, &k)?;
    let seq = expansion_sequence(&k, &f, exp.x0, exp.z, &exp.lambdas).at("projection")?;
    let target = exp.tol.target.or_else(|| density_value(&f, exp.x0));
    let errors: Vec<f64> = match target {
        Some(t) => seq.values.iter().map(|v| (v - t).norm()).collect(),
        None => Vec::new(),
    };

    let mut table = Table::new("converge.csv", &["lambda", "re", "im", "abs_diff", "abs_error"]);
    for (i, ((l, v), d)) in seq
        .lambdas
        .iter()
        .zip(&seq.values)
        .zip(&seq.differences)
        .enumerate()
    {
        table.row(&[*l, v.re, v.im, *d, errors.get(i).copied().unwrap_or(f64::NAN)]);
    }
    out.tables.push(table);

    let last = *seq.values.last().expect("validated");
    out.put("x0", num(exp.x0));
    out.put("z", num(exp.z));
    out.put("final_re", num(last.re));
    out.put("final_im", num(last.im));
    out.put("target", target.map_or(Value::Null, num));
    out.checks.push(Check::finite("final_value", last.norm()));
    if target.is_some() {
        let bound = exp.tol.final_error.unwrap_or(1e-3);
        out.checks.push(Check::at_most(
            "final_error",
            *errors.last().expect("non-empty"),
            bound,
        ));
        if let Some(n) = exp.tol.monotone_last {
            out.checks.push(Check::monotone("monotone_error", &errors, n));
        }
    }
    Ok(())
}

fn battery_header(prefix: &str, n: usize, parts: &[&str]) -> Vec<String> {
    let mut h = vec![prefix.to_string()];
    for i in 0..n {
        for p in parts {
            h.push(format!("psi{i}_{p}"));
        }
    }
    h
}

fn quasi(exp: &Experiment, out: &mut Outcome) -> Step {
    let k = kernel(exp)?;
    let f = subject(exp, &k)?;
    let t = &exp.tol;
    let opts = QuasiOptions {
        slope_tol: t.slope_tol.unwrap_or(SLOPE_TOL),
        vanish_rel: VANISH_REL,
    };
    out.put("subject", Value::String(f.name().into()));
    out.put("battery", Value::String(exp.battery_name.clone()));
    out.put("slowly_varying", Value::String(exp.slowly_varying.label()));
    let fit = quasi_fit(&f, exp.x0, &exp.eps, &exp.battery, exp.slowly_varying, opts).at("quasi_fit")?;

    let mut table = Table::with_header(
        "quasi.csv",
        battery_header("eps", fit.battery.len(), &["re", "im"]),
    );
    for (i, e) in fit.eps.iter().enumerate() {
        let mut row = vec![*e];
        for m in &fit.battery {
            row.extend([m.pairings[i].re, m.pairings[i].im]);
        }
        table.row(&row);
    }
    out.tables.push(table);

    out.put("alpha_hat", num(fit.alpha_hat));
    out.put("slope_spread", num(fit.slope_spread));
    let members = fit
        .battery
        .iter()
        .map(|m| {
            let mut o = Map::new();
            o.insert("name".into(), Value::String(m.name.clone()));
            o.insert("used".into(), Value::Bool(m.used));
            o.insert("slope".into(), m.slope.map_or(Value::Null, num));
            o.insert("g_re".into(), num(m.g.re));
            o.insert("g_im".into(), num(m.g.im));
            o.insert("residuals".into(), nums(&m.residuals));
            Value::Object(o)
        })
        .collect();
    out.put("members", Value::Array(members));
    let homogeneity = fit
        .homogeneity
        .iter()
        .map(|h| {
            let mut o = Map::new();
            o.insert("dilation".into(), num(h.dilation));
            o.insert("max_deviation".into(), num(h.max_deviation));
            Value::Object(o)
        })
        .collect();
    out.put("homogeneity", Value::Array(homogeneity));

    out.checks
        .push(Check::at_most("slope_spread", fit.slope_spread, opts.slope_tol));
    for h in &fit.homogeneity {
        let name = format!("homogeneity_{}", h.dilation);
        out.checks.push(Check::at_most(
            name,
            h.max_deviation,
            t.homogeneity.unwrap_or(5e-2),
        ));
    }
    if let Some(expected) = t.expected_alpha {
        let err = (fit.alpha_hat - expected).abs();
        out.checks
            .push(Check::at_most("alpha", err, t.alpha_tol.unwrap_or(0.02)));
    }

    if let Some(g) = &exp.limit {
        let alpha = exp.alpha.unwrap_or(fit.alpha_hat);
        let l = exp.slowly_varying;
        let r = qbth2_check(&k, &f, g, exp.x0, &exp.lambdas, alpha, l).at("qbth2")?;
        let mut table = Table::new(
            "qbth2.csv",
            &[
                "lambda",
                "qf_re",
                "qf_im",
                "qg_re",
                "qg_im",
                "residual",
                "normalized_re",
                "normalized_im",
            ],
        );
        for i in 0..r.lambdas.len() {
            let (qf, qg, nf) = (r.projected_f[i], r.projected_g[i], r.normalized[i]);
            table.row(&[
                r.lambdas[i],
                qf.re,
                qf.im,
                qg.re,
                qg.im,
                r.residuals[i],
                nf.re,
                nf.im,
            ]);
        }
        out.tables.push(table);

        let lambda = *r.lambdas.last().expect("validated");
        let eps = (-lambda).exp2();
        let limit_constant = (r.projected_g.last().expect("validated") / (eps.powf(alpha) * l.eval(eps))).re;
        let normalized = r.normalized.last().expect("validated").re;
        let final_residual = *r.residuals.last().expect("validated");
        out.put("qbth2_alpha", num(alpha));
        out.put("qbth2_final_residual", num(final_residual));
        out.put("qbth2_normalized", num(normalized));
        out.put("qbth2_limit_constant", num(limit_constant));
        out.checks.push(Check::at_most(
            "qbth2_final",
            final_residual,
            t.qbth2_final.unwrap_or(0.1),
        ));
        out.checks.push(Check::monotone(
            "qbth2_monotone",
            &r.residuals,
            t.qbth2_monotone.unwrap_or(4),
        ));
        let rel = (normalized - limit_constant).abs() / limit_constant.abs();
        out.checks
            .push(Check::at_most("qbth2_limit", rel, t.limit_rel.unwrap_or(5e-2)));
    }
    Ok(())
}

fn qbth3(exp: &Experiment, out: &mut Outcome) -> Step {
    let k = kernel(exp)?;
    let f = subject(exp, &k)?;
    let (alpha, source) = match exp.alpha {
        Some(a) => (a, "config"),
        None => {
            let fit = quasi_fit(
                &f,
                exp.x0,
                &exp.fit_eps,
                &exp.battery,
                exp.slowly_varying,
                QuasiOptions::default(),
            )
            .at("quasi_fit")?;
            (fit.alpha_hat, "quasi_fit")
        }
    };
    out.put("alpha", num(alpha));
    out.put("alpha_source", Value::String(source.into()));
    let r =
        qbth3_equivalence(&k, &f, exp.x0, &exp.eps, &exp.battery, alpha, exp.slowly_varying).at("qbth3")?;

    let header = battery_header(
        "eps",
        r.battery.len(),
        &["direct_re", "direct_im", "projected_re", "projected_im"],
    );
    let mut header = header;
    header.push("relative_error".into());
    let mut table = Table::with_header("qbth3.csv", header);
    for row in &r.rows {
        let mut cells = vec![row.eps];
        for (d, p) in row.direct.iter().zip(&row.projected) {
            cells.extend([d.re, d.im, p.re, p.im]);
        }
        cells.push(row.relative_error);
        table.row(&cells);
    }
    out.tables.push(table);
    out.put(
        "battery",
        Value::Array(r.battery.iter().cloned().map(Value::String).collect()),
    );
    out.put("max_relative_error", num(r.max_relative_error));
    out.put("o_bound", num(r.o_bound));
    out.checks.push(Check::at_most(
        "qbth3_equivalence",
        r.max_relative_error,
        exp.tol.qbth3_rel.unwrap_or(5e-2),
    ));
    out.checks.push(Check::finite("o_bound", r.o_bound));
    Ok(())
}

fn density(exp: &Experiment, out: &mut Outcome) -> Step {
    let f = exp.distribution.as_ref().expect("validated");
    let t = &exp.tol;
    match exp.density_mode.expect("validated") {
        DensityMode::Points => {
            let balls =
                density_point_check(f, exp.x0, &exp.eps, ShrinkingFamily::Balls).at("density_points")?;
            let intervals = ShrinkingFamily::Intervals {
                regularity: exp.regularity,
                samples: exp.samples,
                seed: exp.seed,
            };
            let rects = density_point_check(f, exp.x0, &exp.eps, intervals).at("density_points")?;
            let mut table = Table::new("points.csv", &["family", "eps", "min", "max", "mean"]);
            for (label, r) in [("balls", &balls), ("intervals", &rects)] {
                for s in &r.scales {
                    table.labeled_row(label, &[s.eps, s.min, s.max, s.mean]);
                }
                let mut o = Map::new();
                o.insert("gamma_hat".into(), num(r.gamma_hat));
                o.insert("dispersion".into(), num(r.dispersion));
                o.insert("max_abs_ratio".into(), num(r.max_abs_ratio));
                out.put(label, Value::Object(o));
            }
            out.tables.push(table);
            if let Some(b) = t.balls_max_ratio {
                out.checks
                    .push(Check::at_most("balls_max_ratio", balls.max_abs_ratio, b));
            }
            if let Some(b) = t.intervals_min_dispersion {
                out.checks
                    .push(Check::at_least("intervals_dispersion", rects.dispersion, b));
            }
            if let Some(b) = t.intervals_max_dispersion {
                out.checks
                    .push(Check::at_most("intervals_dispersion", rects.dispersion, b));
            }
        }
        mode => {
            let alpha = exp.alpha.expect("validated");
            let l = exp.slowly_varying;
            let r = alpha_density(f, exp.x0, alpha, l, &exp.eps, exp.omega).at("alpha_density")?;
            let mut table = Table::new("density.csv", &["eps", "mass", "ratio"]);
            for ((e, m), q) in r.eps.iter().zip(&r.masses).zip(&r.ratios) {
                table.row(&[*e, *m, *q]);
            }
            out.tables.push(table);
            out.put("omega_alpha", num(r.omega_alpha));
            out.put("theta_hat", num(r.theta_hat));
            out.put("oscillation", num(r.oscillation));
            if let Some(b) = t.max_oscillation {
                out.checks.push(Check::at_most("oscillation", r.oscillation, b));
            }
            if let Some(b) = t.min_oscillation {
                out.checks.push(Check::at_least("oscillation", r.oscillation, b));
            }
            if mode == DensityMode::Alpha {
                let k = kernel(exp)?;
                let c =
                    qbc2_pipeline(&k, f, exp.x0, alpha, &exp.eps, &exp.battery, l, exp.omega).at("qbc2")?;
                out.put("mass_slope", num(c.mass_slope));
                out.put("ell", num(c.ell));
                out.put("limit_deviation", num(c.limit_deviation));
                out.put("theta", num(c.theta));
                out.put("theta_direct", num(c.theta_direct));
                let rel = (c.theta_direct - c.theta).abs() / c.theta.abs();
                out.checks.push(Check::at_most(
                    "density_agreement",
                    rel,
                    t.density_rel.unwrap_or(5e-2),
                ));
            }
        }
    }
    Ok(())
}

fn delta_poisson(exp: &Experiment, out: &mut Outcome) -> Step {
    let k = kernel(exp)?;
    let mut table = Table::new(
        "poisson.csv",
        &["j", "lattice", "spectral", "relative_difference"],
    );
    let bound = exp.tol.poisson_rel.unwrap_or(2e-2);
    let mut worst = 0.0f64;
    for &j in &exp.j {
        let p = delta_expansion_poisson_check(&k, j);
        table.row(&[j as f64, p.lattice_side, p.spectral_side, p.relative_difference]);
        worst = worst.max(p.relative_difference);
        out.checks.push(Check::at_most(
            format!("poisson_j{j}"),
            p.relative_difference,
            bound,
        ));
    }
    out.tables.push(table);
    out.put("max_relative_difference", num(worst));
    Ok(())
}
