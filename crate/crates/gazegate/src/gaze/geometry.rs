//! Spherical geometry on the gaze sphere.

use super::GazePoint;

/// Largest representable polar angle strictly below 180 degrees. Clamping
/// targets this value so the half-open domain `[0, 180)` is preserved.
pub const MAX_POLAR: f64 = f64::from_bits(0x4066_7FFF_FFFF_FFFF);

/// Unit vector for a gaze point; azimuth `x` rotates about the polar axis,
/// polar angle `y` measures from the north pole.
pub fn unit_vector(p: GazePoint) -> [f64; 3] {
    let az = p.x.to_radians();
    let pol = p.y.to_radians();
    let (sin_pol, cos_pol) = pol.sin_cos();
    let (sin_az, cos_az) = az.sin_cos();
    [sin_pol * cos_az, sin_pol * sin_az, cos_pol]
}

/// Great-circle angular distance between two gaze points, in degrees,
/// always in `[0, 180]`.
///
/// Uses the `atan2(|u x v|, u . v)` form, which stays accurate for nearly
/// coincident and nearly antipodal points where `acos` loses precision.
pub fn angular_distance(a: GazePoint, b: GazePoint) -> f64 {
    let u = unit_vector(a);
    let v = unit_vector(b);
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    let cross = (cx * cx + cy * cy + cz * cz).sqrt();
    cross.atan2(dot).to_degrees()
}

/// Wraps an azimuth into `[0, 360)`.
pub fn wrap_azimuth(x: f64) -> f64 {
    let r = x.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Clamps a polar angle into `[0, 180)`; values at or above 180 land on
/// [`MAX_POLAR`], the largest representable value below 180.
pub fn clamp_polar(y: f64) -> f64 {
    if y < 0.0 {
        0.0
    } else if y >= 180.0 {
        MAX_POLAR
    } else {
        y
    }
}

/// Shortest signed azimuth difference `to - from`, wrapped into `[-180, 180)`.
pub fn wrap_signed_delta(delta: f64) -> f64 {
    let r = (delta + 180.0).rem_euclid(360.0);
    let r = if r >= 360.0 { 0.0 } else { r };
    r - 180.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> GazePoint {
        GazePoint::new(x, y)
    }

    #[test]
    fn quarter_turn_on_equator_is_ninety_degrees() {
        assert!((angular_distance(p(0.0, 90.0), p(90.0, 90.0)) - 90.0).abs() < 1e-12);
    }

    #[test]
    fn antipodal_equator_points_are_180_apart() {
        assert!((angular_distance(p(0.0, 90.0), p(180.0, 90.0)) - 180.0).abs() < 1e-12);
    }

    #[test]
    fn distance_to_self_is_zero() {
        assert_eq!(angular_distance(p(123.4, 56.7), p(123.4, 56.7)), 0.0);
    }

    #[test]
    fn wraps_across_the_azimuth_seam() {
        // 359.5 and 0.5 on the equator are 1 degree apart, not 359.
        assert!((angular_distance(p(359.5, 90.0), p(0.5, 90.0)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pole_collapses_azimuth() {
        // At the pole every azimuth names the same point.
        assert!(angular_distance(p(0.0, 0.0), p(270.0, 0.0)) < 1e-12);
    }

    #[test]
    fn small_separations_keep_precision() {
        let d = angular_distance(p(10.0, 90.0), p(10.0 + 1e-7, 90.0));
        assert!((d - 1e-7).abs() < 1e-13, "d = {d}");
    }

    #[test]
    fn max_polar_is_just_below_180() {
        assert!(MAX_POLAR < 180.0);
        assert_eq!(f64::from_bits(MAX_POLAR.to_bits() + 1), 180.0);
    }

    #[test]
    fn wrap_azimuth_covers_edge_cases() {
        assert_eq!(wrap_azimuth(360.5), 0.5);
        assert_eq!(wrap_azimuth(-0.5), 359.5);
        assert_eq!(wrap_azimuth(720.0), 0.0);
        // A tiny negative input rounds to 360 under rem_euclid; must wrap to 0.
        let w = wrap_azimuth(-1e-300);
        assert!((0.0..360.0).contains(&w));
        assert_eq!(w, 0.0);
    }

    #[test]
    fn clamp_polar_respects_half_open_domain() {
        assert_eq!(clamp_polar(-3.0), 0.0);
        assert_eq!(clamp_polar(180.0), MAX_POLAR);
        assert_eq!(clamp_polar(185.0), MAX_POLAR);
        assert_eq!(clamp_polar(179.5), 179.5);
    }

    #[test]
    fn signed_delta_takes_the_short_way() {
        assert!((wrap_signed_delta(350.0) - -10.0).abs() < 1e-12);
        assert!((wrap_signed_delta(-350.0) - 10.0).abs() < 1e-12);
        assert_eq!(wrap_signed_delta(180.0), -180.0);
        assert_eq!(wrap_signed_delta(0.0), 0.0);
    }
}
