//! Rectangular areas of interest on the equirectangular domain.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::gaze::GazePoint;

/// An axis-aligned rectangular area of interest, in degrees.
///
/// Containment is min-edge inclusive, max-edge exclusive, so AOIs that
/// tile the domain assign every point to exactly one tile. Boxes may not
/// wrap across the azimuth seam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub id: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Aoi {
    pub fn new(
        id: impl Into<String>,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    ) -> Result<Self, EvalError> {
        let aoi = Aoi { id: id.into(), x_min, x_max, y_min, y_max };
        aoi.validate()?;
        Ok(aoi)
    }

    /// Checks the box invariants; used directly when an [`Aoi`] arrives
    /// through deserialization instead of [`Aoi::new`].
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |reason: String| {
            Err(EvalError::InvalidAoi { id: self.id.clone(), reason })
        };
        for (name, v) in [
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("y_min", self.y_min),
            ("y_max", self.y_max),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} = {v} is not finite"));
            }
        }
        if self.x_min >= self.x_max {
            return fail(format!("x_min {} must be < x_max {}", self.x_min, self.x_max));
        }
        if self.y_min >= self.y_max {
            return fail(format!("y_min {} must be < y_max {}", self.y_min, self.y_max));
        }
        if self.x_min < 0.0 || self.x_max > 360.0 {
            return fail(format!(
                "x range [{}, {}] exceeds the [0, 360] domain",
                self.x_min, self.x_max
            ));
        }
        if self.y_min < 0.0 || self.y_max > 180.0 {
            return fail(format!(
                "y range [{}, {}] exceeds the [0, 180] domain",
                self.y_min, self.y_max
            ));
        }
        Ok(())
    }

    /// Min-edges inclusive, max-edges exclusive.
    pub fn contains(&self, point: GazePoint) -> bool {
        self.x_min <= point.x
            && point.x < self.x_max
            && self.y_min <= point.y
            && point.y < self.y_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment_is_half_open() {
        let aoi = Aoi::new("a", 10.0, 20.0, 30.0, 40.0).unwrap();
        assert!(aoi.contains(GazePoint::new(10.0, 30.0)));
        assert!(aoi.contains(GazePoint::new(19.999, 39.999)));
        assert!(!aoi.contains(GazePoint::new(20.0, 35.0)));
        assert!(!aoi.contains(GazePoint::new(15.0, 40.0)));
        assert!(!aoi.contains(GazePoint::new(9.999, 35.0)));
    }

    #[test]
    fn tiling_assigns_each_point_once() {
        // 4 x 2 tiling of the full domain.
        let mut tiles = Vec::new();
        for i in 0..4 {
            for j in 0..2 {
                tiles.push(
                    Aoi::new(
                        format!("t{i}{j}"),
                        90.0 * i as f64,
                        90.0 * (i + 1) as f64,
                        90.0 * j as f64,
                        90.0 * (j + 1) as f64,
                    )
                    .unwrap(),
                );
            }
        }
        for &(x, y) in &[(0.0, 0.0), (89.9, 89.9), (90.0, 90.0), (359.9, 179.9), (180.0, 0.0)] {
            let hits = tiles.iter().filter(|t| t.contains(GazePoint::new(x, y))).count();
            assert_eq!(hits, 1, "point ({x}, {y})");
        }
    }

    #[test]
    fn degenerate_and_out_of_domain_boxes_are_rejected() {
        assert!(Aoi::new("a", 10.0, 10.0, 0.0, 5.0).is_err());
        assert!(Aoi::new("a", 20.0, 10.0, 0.0, 5.0).is_err());
        assert!(Aoi::new("a", 0.0, 5.0, 7.0, 3.0).is_err());
        assert!(Aoi::new("a", -1.0, 5.0, 0.0, 5.0).is_err());
        assert!(Aoi::new("a", 350.0, 361.0, 0.0, 5.0).is_err());
        assert!(Aoi::new("a", 0.0, 5.0, 0.0, 180.5).is_err());
        assert!(Aoi::new("a", 0.0, f64::NAN, 0.0, 5.0).is_err());
        // Full-domain box is the largest legal AOI.
        assert!(Aoi::new("all", 0.0, 360.0, 0.0, 180.0).is_ok());
    }
}
