//! Fixed float formatting shared by every CSV and JSON writer.

/// Scientific notation with 12 significant digits; `-0` is printed as `0`.
pub fn sci(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}
