//! Named filters, distributions, test-function batteries and slowly varying models.

use crate::asymptotics::{default_battery, SlowlyVarying};
use crate::error::{Error, Result};
use crate::generalized_functions::{Density, GeneralizedFunction};
use crate::growth_spaces::TestFunction;
use crate::scaling_engine::FilterBank;

pub const FILTERS: &[&str] = &["haar", "d4", "d6", "d8"];

pub const DISTRIBUTIONS: &[&str] = &[
    "one",
    "heaviside",
    "sgn",
    "indicator(a,b)",
    "abs_pow(a)",
    "abs_pow_poly(a;c0,c1,...)",
    "abs_pow_sin(a,b)",
    "x_sin_inv",
    "gaussian",
    "cos_plus(c)",
    "sin",
    "delta",
    "delta(x0)",
    "delta_prime",
    "delta_prime(x0)",
    "cantor",
];

pub const BATTERIES: &[&str] = &["default4", "gaussian"];

pub const SLOWLY_VARYING: &[&str] = &["constant", "log_power(beta)"];

pub fn filter(name: &str) -> Result<FilterBank> {
    FilterBank::builtin(name.trim())
}

/// Splits `name(args)` into the name and its argument text.
fn split_call(spec: &str) -> Result<(&str, Option<&str>)> {
    let spec = spec.trim();
    match spec.find('(') {
        None => Ok((spec, None)),
        Some(open) => {
            let inner = spec[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::UnknownName(spec.to_string()))?;
            Ok((spec[..open].trim(), Some(inner)))
        }
    }
}

fn numbers(text: &str, sep: char) -> Result<Vec<f64>> {
    text.split(sep)
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("`{}` is not a number", t.trim())))
        })
        .collect()
}

fn args<const N: usize>(spec: &str, inner: Option<&str>) -> Result<[f64; N]> {
    let vals = match inner {
        Some(t) if !t.trim().is_empty() => numbers(t, ',')?,
        _ => Vec::new(),
    };
    vals.try_into().map_err(|v: Vec<f64>| {
        Error::InvalidInput(format!("`{spec}` takes {N} argument(s), got {}", v.len()))
    })
}

/// Parses a distribution from its catalog form, e.g. `abs_pow(0.5)` or `abs_pow_poly(0.5;1,0,1)`.
pub fn distribution(spec: &str) -> Result<GeneralizedFunction> {
    let (name, inner) = split_call(spec)?;
    let dens = |d: Density| Ok(GeneralizedFunction::density(d));
    match (name, inner) {
        ("one", None) => dens(Density::one()),
        ("heaviside", None) => dens(Density::heaviside()),
        ("sgn", None) => dens(Density::sgn()),
        ("x_sin_inv", None) => dens(Density::x_sin_inv()),
        ("gaussian", None) => dens(Density::gaussian()),
        ("sin", None) => dens(Density::sin()),
        ("cantor", None) => Ok(GeneralizedFunction::cantor()),
        ("delta", None) => Ok(GeneralizedFunction::delta(0.0)),
        ("delta_prime", None) => Ok(GeneralizedFunction::delta_derivative(0.0, 1)),
        ("delta", Some(_)) => {
            let [x0] = args(spec, inner)?;
            Ok(GeneralizedFunction::delta(x0))
        }
        ("delta_prime", Some(_)) => {
            let [x0] = args(spec, inner)?;
            Ok(GeneralizedFunction::delta_derivative(x0, 1))
        }
        ("indicator", Some(_)) => {
            let [a, b] = args(spec, inner)?;
            if !(a < b) {
                return Err(Error::InvalidInput(format!("empty interval in `{spec}`")));
            }
            dens(Density::indicator(a, b))
        }
        ("abs_pow", Some(_)) => {
            let [a] = args(spec, inner)?;
            check_integrable(spec, a)?;
            dens(Density::abs_pow(a))
        }
        ("abs_pow_sin", Some(_)) => {
            let [a, b] = args(spec, inner)?;
            check_integrable(spec, a)?;
            dens(Density::abs_pow_sin(a, b))
        }
        ("cos_plus", Some(_)) => {
            let [c] = args(spec, inner)?;
            dens(Density::cos_plus(c))
        }
        ("abs_pow_poly", Some(t)) => {
            let (a, coeffs) = t
                .split_once(';')
                .ok_or_else(|| Error::InvalidInput(format!("`{spec}` needs `a;c0,c1,...`")))?;
            let [a] = args(spec, Some(a))?;
            check_integrable(spec, a)?;
            dens(Density::abs_pow_poly(a, numbers(coeffs, ',')?))
        }
        _ => Err(Error::UnknownName(spec.trim().to_string())),
    }
}

fn check_integrable(spec: &str, a: f64) -> Result<()> {
    if a > -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("`{spec}` is not locally integrable")))
    }
}

pub fn battery(name: &str) -> Result<Vec<TestFunction>> {
    match name.trim() {
        "default4" => Ok(default_battery()),
        "gaussian" => Ok(vec![TestFunction::gaussian()]),
        other => Err(Error::UnknownName(other.to_string())),
    }
}

pub fn slowly_varying(spec: &str) -> Result<SlowlyVarying> {
    match split_call(spec)? {
        ("constant", None) => Ok(SlowlyVarying::Constant),
        ("log_power", inner @ Some(_)) => {
            let [beta] = args(spec, inner)?;
            Ok(SlowlyVarying::LogPower { beta })
        }
        _ => Err(Error::UnknownName(spec.trim().to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generalized_functions::pair;

    #[test]
    fn listing_names_resolve() {
        for f in FILTERS {
            filter(f).unwrap();
        }
        for name in [
            "one",
            "heaviside",
            "sgn",
            "x_sin_inv",
            "gaussian",
            "sin",
            "delta",
            "delta_prime",
            "cantor",
        ] {
            assert!(DISTRIBUTIONS.contains(&name));
            distribution(name).unwrap();
        }
        for b in BATTERIES {
            assert!(!battery(b).unwrap().is_empty());
        }
        assert_eq!(battery("default4").unwrap().len(), 4);
    }

    #[test]
    fn parameterized_entries() {
        let psi = TestFunction::gaussian();
        let pi = std::f64::consts::PI;
        let v = pair(&distribution("cos_plus(2)").unwrap(), &psi).unwrap().re;
        assert!((v - (2.0 * pi.sqrt() + pi.sqrt() * (-0.25f64).exp())).abs() < 1e-9);

        // int |x|^a e^{-x^2} dx = Gamma((a + 1) / 2)
        let poly = distribution(" abs_pow_poly(0.5; 1, 0, 1) ").unwrap();
        let oracle = statrs::function::gamma::gamma(0.75) + statrs::function::gamma::gamma(1.75);
        assert!((pair(&poly, &psi).unwrap().re - oracle).abs() < 1e-8);

        let d = distribution("delta(0.25)").unwrap();
        assert!((pair(&d, &psi).unwrap().re - (-0.0625f64).exp()).abs() < 1e-15);
        assert_eq!(
            slowly_varying("log_power(2)").unwrap(),
            SlowlyVarying::LogPower { beta: 2.0 }
        );
        assert_eq!(slowly_varying("constant").unwrap(), SlowlyVarying::Constant);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            filter("d5"),
            Err(Error::InvalidFilter { .. }) | Err(Error::UnknownName(_))
        ));
        assert!(matches!(distribution("lorentz"), Err(Error::UnknownName(_))));
        assert!(distribution("abs_pow(-1)").is_err());
        assert!(distribution("abs_pow(1,2)").is_err());
        assert!(distribution("abs_pow(x)").is_err());
        assert!(distribution("indicator(1,0)").is_err());
        assert!(distribution("abs_pow(0.5").is_err());
        assert!(battery("default5").is_err());
        assert!(slowly_varying("log_power").is_err());
    }
}
