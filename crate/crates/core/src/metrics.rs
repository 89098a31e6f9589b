//! Error metrics.

/// Root-mean-square of `errors`; zero for an empty sequence.
pub fn rmse(errors: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = errors.into_iter().fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Tip displacement, in micrometres, of a bending segment of `length_mm`
/// whose angle is off by `angle_deg`: the arc length `θ·L`.
pub fn tip_error_um(angle_deg: f64, length_mm: f64) -> f64 {
    angle_deg.to_radians() * length_mm * 1000.0
}
