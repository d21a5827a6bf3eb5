//! Experiment configuration: TOML schema and validation.

use std::path::{Path, PathBuf};

use mrdist_core::asymptotics::{OmegaConvention, SlowlyVarying};
use mrdist_core::catalog;
use mrdist_core::generalized_functions::GeneralizedFunction;
use mrdist_core::growth_spaces::TestFunction;
use mrdist_core::scaling_engine::FilterBank;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Info,
    Project,
    Converge,
    Quasi,
    Qbth3,
    Density,
    DeltaPoisson,
}

impl Pipeline {
    pub const ALL: [Pipeline; 7] = [
        Pipeline::Info,
        Pipeline::Project,
        Pipeline::Converge,
        Pipeline::Quasi,
        Pipeline::Qbth3,
        Pipeline::Density,
        Pipeline::DeltaPoisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Info => "info",
            Pipeline::Project => "project",
            Pipeline::Converge => "converge",
            Pipeline::Quasi => "quasi",
            Pipeline::Qbth3 => "qbth3",
            Pipeline::Density => "density",
            Pipeline::DeltaPoisson => "delta-poisson",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: String,
    pub pipeline: Option<String>,
    pub mra: MraSection,
    pub distribution: Option<DistributionSection>,
    #[serde(default)]
    pub point: PointSection,
    #[serde(default)]
    pub grids: GridSection,
    pub battery: Option<String>,
    pub density: Option<DensitySection>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MraSection {
    pub filter: String,
    pub depth: Option<u32>,
    #[serde(default = "one")]
    pub dimension: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    pub spec: String,
    /// Replace the distribution by its projection `q_lambda f` before running.
    pub project_lambda: Option<f64>,
    /// Quasiasymptotic limit placed at `x0`, compared through projections.
    pub limit: Option<String>,
    pub alpha: Option<f64>,
    pub slowly_varying: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub z: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Linear { start: f64, stop: f64, step: f64 },
    Log { lo: f64, hi: f64, points: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lambdas: Option<Grid>,
    pub eps: Option<Grid>,
    pub fit_eps: Option<Grid>,
    pub x: Option<Span>,
    pub j: Option<Vec<i32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    Alpha,
    Ratios,
    Points,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaName {
    UnitBall,
    Printed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub mode: DensityMode,
    pub omega: Option<OmegaName>,
    pub regularity: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub orthonormality: Option<f64>,
    pub two_scale: Option<f64>,
    pub partition_of_unity: Option<f64>,
    pub reproduction: Option<f64>,
    pub reproduction_degrees: Option<Vec<u32>>,
    pub witness_degree: Option<u32>,
    pub witness_min: Option<f64>,
    pub idempotence: Option<f64>,
    pub target: Option<f64>,
    pub final_error: Option<f64>,
    pub monotone_last: Option<usize>,
    pub expected_alpha: Option<f64>,
    pub alpha_tol: Option<f64>,
    pub slope_tol: Option<f64>,
    pub homogeneity: Option<f64>,
    pub qbth2_final: Option<f64>,
    pub qbth2_monotone: Option<usize>,
    pub limit_rel: Option<f64>,
    pub qbth3_rel: Option<f64>,
    pub density_rel: Option<f64>,
    pub max_oscillation: Option<f64>,
    pub min_oscillation: Option<f64>,
    pub balls_max_ratio: Option<f64>,
    pub intervals_min_dispersion: Option<f64>,
    pub intervals_max_dispersion: Option<f64>,
    pub poisson_rel: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// A validated experiment with every catalog name resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub pipeline: Pipeline,
    pub filter: FilterBank,
    pub depth: Option<u32>,
    pub dimension: usize,
    pub distribution: Option<GeneralizedFunction>,
    pub distribution_spec: Option<String>,
    pub project_lambda: Option<f64>,
    pub limit: Option<GeneralizedFunction>,
    pub alpha: Option<f64>,
    pub slowly_varying: SlowlyVarying,
    pub x0: f64,
    pub z: f64,
    pub lambdas: Vec<f64>,
    pub eps: Vec<f64>,
    pub fit_eps: Vec<f64>,
    pub x: Option<Span>,
    pub j: Vec<i32>,
    pub battery_name: String,
    pub battery: Vec<TestFunction>,
    pub density_mode: Option<DensityMode>,
    pub omega: OmegaConvention,
    pub regularity: f64,
    pub samples: usize,
    pub seed: u64,
    pub tol: Tolerances,
    pub out_dir: PathBuf,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn expand(grid: &Grid, what: &str) -> Result<Vec<f64>, CliError> {
    let values = match grid {
        Grid::List(v) => v.clone(),
        Grid::Linear { start, stop, step } => {
            if !(*step > 0.0) || !(stop >= start) {
                return Err(bad(format!("grid `{what}` needs start <= stop and step > 0")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + step * i as f64).collect()
        }
        Grid::Log { lo, hi, points } => {
            if !(*lo > 0.0) || !(hi > lo) || *points < 2 {
                return Err(bad(format!("grid `{what}` needs 0 < lo < hi and points >= 2")));
            }
            (0..*points)
                .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (*points - 1) as f64).exp())
                .collect()
        }
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad(format!("grid `{what}` must be non-empty and finite")));
    }
    Ok(values)
}

fn lambda_grid(raw: &RawConfig) -> Result<Vec<f64>, CliError> {
    let l = raw
        .grids
        .lambdas
        .as_ref()
        .ok_or_else(|| bad("`grids.lambdas` is required"))?;
    let l = expand(l, "lambdas")?;
    if l.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(bad("`grids.lambdas` must be strictly increasing"));
    }
    if l.iter().any(|v| v.abs() > 60.0) {
        return Err(bad("`grids.lambdas` entries must lie in [-60, 60]"));
    }
    Ok(l)
}

fn eps_grid(grid: Option<&Grid>, what: &str) -> Result<Option<Vec<f64>>, CliError> {
    grid.map(|g| {
        let e = expand(g, what)?;
        if e.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(bad(format!("`grids.{what}` entries must lie in (0, 1)")));
        }
        Ok(e)
    })
    .transpose()
}

fn resolved<T>(r: mrdist_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| bad(e.to_string()))
}

impl Experiment {
    pub fn load(path: &Path, pipeline: Pipeline, out: Option<&Path>) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, pipeline, out)
    }

    pub fn parse(text: &str, pipeline: Pipeline, out: Option<&Path>) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        if let Some(p) = &raw.pipeline {
            if p != pipeline.name() {
                return Err(bad(format!(
                    "config is for pipeline `{p}`, not `{}`",
                    pipeline.name()
                )));
            }
        }
        if raw.name.is_empty() || raw.name.contains(['/', '\\']) {
            return Err(bad("`name` must be a non-empty plain identifier"));
        }

        let filter = resolved(catalog::filter(&raw.mra.filter))?;
        if let Some(d) = raw.mra.depth {
            if !(4..=14).contains(&d) {
                return Err(bad("`mra.depth` must lie in 4..=14"));
            }
        }
        match (raw.mra.dimension, pipeline) {
            (1, _) | (2, Pipeline::Info) => {}
            (d, _) => {
                return Err(bad(format!(
                    "dimension {d} is not supported by `{}`",
                    pipeline.name()
                )))
            }
        }

        let dist = raw.distribution.as_ref();
        let distribution = dist
            .map(|d| resolved(catalog::distribution(&d.spec)))
            .transpose()?;
        let limit = dist
            .and_then(|d| d.limit.as_ref())
            .map(|s| resolved(catalog::distribution(s)))
            .transpose()?;
        let slowly_varying = match dist.and_then(|d| d.slowly_varying.as_ref()) {
            Some(s) => resolved(catalog::slowly_varying(s))?,
            None => SlowlyVarying::Constant,
        };
        let battery_name = raw.battery.clone().unwrap_or_else(|| "default4".into());
        let battery = resolved(catalog::battery(&battery_name))?;
        if !raw.point.x0.is_finite() || !raw.point.z.is_finite() {
            return Err(bad("`point` coordinates must be finite"));
        }

        let needs_distribution = !matches!(pipeline, Pipeline::Info | Pipeline::DeltaPoisson);
        if needs_distribution && distribution.is_none() {
            return Err(bad(format!(
                "`{}` needs a [distribution] section",
                pipeline.name()
            )));
        }
        if let Some(p) = dist.and_then(|d| d.project_lambda) {
            if !p.is_finite() || p.abs() > 30.0 {
                return Err(bad("`distribution.project_lambda` must lie in [-30, 30]"));
            }
            if distribution.as_ref().is_some_and(|f| f.order() > 0) {
                return Err(bad("`distribution.project_lambda` needs a measure (order 0)"));
            }
        }

        let mut lambdas = Vec::new();
        let mut eps = eps_grid(raw.grids.eps.as_ref(), "eps")?.unwrap_or_default();
        let fit_eps = eps_grid(raw.grids.fit_eps.as_ref(), "fit_eps")?
            .unwrap_or_else(|| (0..7).map(|i| 10f64.powf(-3.0 + i as f64 / 3.0)).collect());
        let mut j = Vec::new();
        let mut density_mode = None;
        match pipeline {
            Pipeline::Info => {}
            Pipeline::Project => {
                lambdas = lambda_grid(&raw)?;
                if raw.grids.x.is_none() {
                    return Err(bad("`project` needs `grids.x`"));
                }
            }
            Pipeline::Converge => lambdas = lambda_grid(&raw)?,
            Pipeline::Quasi => {
                if eps.is_empty() {
                    return Err(bad("`quasi` needs `grids.eps`"));
                }
                if limit.is_some() {
                    lambdas = lambda_grid(&raw)?;
                }
            }
            Pipeline::Qbth3 => {
                if eps.is_empty() {
                    return Err(bad("`qbth3` needs `grids.eps`"));
                }
            }
            Pipeline::Density => {
                let section = raw
                    .density
                    .as_ref()
                    .ok_or_else(|| bad("`density` needs a [density] section"))?;
                density_mode = Some(section.mode);
                if eps.is_empty() {
                    return Err(bad("`density` needs `grids.eps`"));
                }
                if section.mode != DensityMode::Points && !dist.and_then(|d| d.alpha).is_some_and(|a| a > 0.0)
                {
                    return Err(bad("`density` needs a positive `distribution.alpha`"));
                }
                if distribution.as_ref().is_some_and(|f| f.order() > 0) {
                    return Err(bad("`density` needs a measure (order 0)"));
                }
            }
            Pipeline::DeltaPoisson => {
                j = raw
                    .grids
                    .j
                    .clone()
                    .ok_or_else(|| bad("`delta-poisson` needs `grids.j`"))?;
                if j.is_empty() || j.iter().any(|v| !(-20..=20).contains(v)) {
                    return Err(bad("`grids.j` entries must lie in -20..=20"));
                }
            }
        }
        eps.sort_by(|a, b| b.total_cmp(a));
        if let Some(x) = &raw.grids.x {
            if !(x.hi > x.lo) || x.points < 2 || !x.lo.is_finite() || !x.hi.is_finite() {
                return Err(bad("`grids.x` needs lo < hi and points >= 2"));
            }
        }

        let ds = raw.density.as_ref();
        let regularity = ds.and_then(|d| d.regularity).unwrap_or(0.5);
        if !(regularity > 0.0 && regularity <= 1.0) {
            return Err(bad("`density.regularity` must lie in (0, 1]"));
        }
        let out_dir = match (out, &raw.output) {
            (Some(o), _) => o.to_path_buf(),
            (None, Some(o)) => o.dir.clone(),
            (None, None) => PathBuf::from("out").join(&raw.name),
        };

        Ok(Experiment {
            name: raw.name.clone(),
            pipeline,
            filter,
            depth: raw.mra.depth,
            dimension: raw.mra.dimension,
            distribution,
            distribution_spec: dist.map(|d| d.spec.clone()),
            project_lambda: dist.and_then(|d| d.project_lambda),
            limit,
            alpha: dist.and_then(|d| d.alpha),
            slowly_varying,
            x0: raw.point.x0,
            z: raw.point.z,
            lambdas,
            eps,
            fit_eps,
            x: raw.grids.x.clone(),
            j,
            battery_name,
            battery,
            density_mode,
            omega: match ds.and_then(|d| d.omega) {
                Some(OmegaName::Printed) => OmegaConvention::Printed,
                _ => OmegaConvention::UnitBall,
            },
            regularity,
            samples: ds.and_then(|d| d.samples).unwrap_or(64).max(2),
            seed: ds.and_then(|d| d.seed).unwrap_or(0),
            tol: raw.tolerances,
            out_dir,
        })
    }
}
