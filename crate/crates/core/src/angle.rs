use std::f64::consts::{PI, TAU};

/// Wraps an angle to `(-pi, pi]`.
#[inline]
pub fn wrap(theta: f64) -> f64 {
    let mut t = theta % TAU;
    if t > PI {
        t -= TAU;
    } else if t <= -PI {
        t += TAU;
    }
    t
}

/// Geodesic distance on the unit circle, in `[0, pi]`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}
