//! Two-scale filters.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance on the filter invariants (sum and shift orthonormality).
pub const FILTER_TOL: f64 = 1e-12;

/// Names of the built-in filters, in catalog order.
pub const BUILTIN_FILTERS: [&str; 4] = ["haar", "d4", "d6", "d8"];

// Minimum-phase Daubechies filters computed by spectral factorization at 40 digits.
const D4: [f64; 4] = [
    0.482_962_913_144_534_143_37,
    0.836_516_303_737_807_905_58,
    0.224_143_868_042_013_381_03,
    -0.129_409_522_551_260_381_17,
];
const D6: [f64; 6] = [
    0.332_670_552_950_082_616,
    0.806_891_509_311_092_576_49,
    0.459_877_502_118_491_570_1,
    -0.135_011_020_010_254_588_7,
    -0.085_441_273_882_026_661_693,
    0.035_226_291_885_709_536_603,
];
const D8: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];

/// Low-pass coefficients `h_0..h_{N-1}` of a two-scale relation
/// `phi(x) = sqrt(2) * sum_k h_k phi(2x - k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    name: String,
    coefficients: Vec<f64>,
}

impl FilterBank {
    /// Builds a filter and checks the sum and shift-orthonormality invariants.
    pub fn new(name: impl Into<String>, coefficients: Vec<f64>) -> Result<Self> {
        let filter = Self::new_unchecked(name, coefficients);
        filter.validate()?;
        Ok(filter)
    }

    /// Builds a filter without validating it. Used to study perturbed filters.
    pub fn new_unchecked(name: impl Into<String>, coefficients: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            coefficients,
        }
    }

    pub fn haar() -> Self {
        Self::new_unchecked("haar", vec![1.0 / SQRT_2, 1.0 / SQRT_2])
    }

    pub fn daubechies4() -> Self {
        Self::new_unchecked("d4", D4.to_vec())
    }

    pub fn daubechies6() -> Self {
        Self::new_unchecked("d6", D6.to_vec())
    }

    pub fn daubechies8() -> Self {
        Self::new_unchecked("d8", D8.to_vec())
    }

    /// Looks up a built-in filter by (case-insensitive) name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "d2" => Ok(Self::haar()),
            "d4" => Ok(Self::daubechies4()),
            "d6" => Ok(Self::daubechies6()),
            "d8" => Ok(Self::daubechies8()),
            _ => Err(Error::UnknownName(name.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Right end of the support `[0, N-1]` of the scaling function.
    pub fn support_len(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn is_haar(&self) -> bool {
        self.coefficients.len() == 2
    }

    /// Certified Hölder-type regularity used to gate derivative evaluation.
    pub fn certified_regularity(&self) -> usize {
        if self.coefficients.len() >= 6 {
            1
        } else {
            0
        }
    }

    /// Largest polynomial degree reproduced by integer translates (`N/2 - 1`).
    pub fn polynomial_exactness(&self) -> usize {
        (self.coefficients.len() / 2).saturating_sub(1)
    }

    /// `|sum h_k - sqrt(2)|`.
    pub fn sum_defect(&self) -> f64 {
        (self.coefficients.iter().sum::<f64>() - SQRT_2).abs()
    }

    /// `max_m |sum_k h_k h_{k+2m} - delta_{m,0}|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let h = &self.coefficients;
        let n = h.len() as isize;
        let mut worst = 0.0_f64;
        let mut m = 0isize;
        while 2 * m < n {
            let s: f64 = (0..n)
                .filter(|k| k + 2 * m < n)
                .map(|k| h[k as usize] * h[(k + 2 * m) as usize])
                .sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
            m += 1;
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() < 2 || !self.coefficients.len().is_multiple_of(2) {
            return Err(self.invalid("filter length must be even and at least 2"));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(self.invalid("non-finite coefficient"));
        }
        let sum = self.sum_defect();
        if sum > FILTER_TOL {
            return Err(self.invalid(&format!("coefficient sum differs from sqrt(2) by {sum:.3e}")));
        }
        let ortho = self.orthonormality_defect();
        if ortho > FILTER_TOL {
            return Err(self.invalid(&format!("shift orthonormality defect {ortho:.3e}")));
        }
        Ok(())
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidFilter {
            name: self.name.clone(),
            reason: reason.to_string(),
        }
    }
}

impl fmt::Display for FilterBank {
    /// Plain-text form: a name line followed by one coefficient per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.name)?;
        for c in &self.coefficients {
            writeln!(f, "{c:e}")?;
        }
        Ok(())
    }
}

impl FromStr for FilterBank {
    type Err = Error;

    /// Parses the plain-text filter format. Blank lines and `#` comments are skipped.
    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let name = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("filter file is empty".into()))?
            .to_string();
        let coefficients = lines
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad coefficient `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FilterBank::new(name, coefficients)
    }
}
