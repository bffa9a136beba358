use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Position3D;

/// A storage rack, axis-aligned, standing on the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rack {
    pub x: f64,
    pub y: f64,
    pub length_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
}

impl Rack {
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.x && x <= self.x + self.length_m && y >= self.y && y <= self.y + self.depth_m
    }

    /// Distance from (x, y) to the rack footprint; 0 inside.
    pub fn distance_xy(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x - x).max(x - (self.x + self.length_m)).max(0.0);
        let dy = (self.y - y).max(y - (self.y + self.depth_m)).max(0.0);
        dx.hypot(dy)
    }

    /// Uniform point inside the rack volume.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Position3D {
        Position3D::new(
            self.x + rng.gen::<f64>() * self.length_m,
            self.y + rng.gen::<f64>() * self.depth_m,
            rng.gen::<f64>() * self.height_m,
        )
    }
}

/// Hall geometry and the named waypoint sets.
///
/// Waypoints are 2D; device heights come from the fleet description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Floorplan {
    pub width_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
    pub gnb: [f64; 3],
    /// Trailer dock.
    pub p1: Vec<[f64; 2]>,
    /// Palletizer, pallet side.
    pub p2: Vec<[f64; 2]>,
    /// Palletizer, parcel side.
    pub p3: Vec<[f64; 2]>,
    /// Rack access points.
    pub p4: Vec<[f64; 2]>,
    /// Worker entrances.
    pub p5: Vec<[f64; 2]>,
    pub racks: Vec<Rack>,
}

/// Maximum distance between a rack access point and the nearest rack face.
pub const RACK_ACCESS_REACH_M: f64 = 1.5;

impl Floorplan {
    pub fn gnb_position(&self) -> Position3D {
        Position3D::new(self.gnb[0], self.gnb[1], self.gnb[2])
    }

    pub fn contains(&self, p: &Position3D) -> bool {
        (0.0..=self.width_m).contains(&p.x)
            && (0.0..=self.depth_m).contains(&p.y)
            && (0.0..=self.height_m).contains(&p.z)
    }

    pub fn points(set: &[[f64; 2]], z: f64) -> Vec<Position3D> {
        set.iter().map(|p| Position3D::new(p[0], p[1], z)).collect()
    }

    /// Checks geometry; errors carry the offending field path.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |path: String, msg: String| Err((path, msg));
        for (name, v) in [("width_m", self.width_m), ("depth_m", self.depth_m), ("height_m", self.height_m)] {
            if !(v.is_finite() && v > 0.0) {
                return err(format!("floorplan.{name}"), format!("must be positive, got {v}"));
            }
        }
        let gnb = self.gnb_position();
        if !self.contains(&gnb) {
            return err("floorplan.gnb".into(), format!("{:?} lies outside the hall", self.gnb));
        }
        for (name, set) in [("p1", &self.p1), ("p2", &self.p2), ("p3", &self.p3), ("p4", &self.p4), ("p5", &self.p5)] {
            if set.is_empty() {
                return err(format!("floorplan.{name}"), "needs at least one point".into());
            }
            for (i, p) in set.iter().enumerate() {
                if !self.contains(&Position3D::new(p[0], p[1], 0.0)) {
                    return err(format!("floorplan.{name}[{i}]"), format!("{p:?} lies outside the hall"));
                }
                if self.racks.iter().any(|r| r.contains_xy(p[0], p[1])) {
                    return err(format!("floorplan.{name}[{i}]"), format!("{p:?} lies inside a rack"));
                }
            }
        }
        for (i, p) in self.p4.iter().enumerate() {
            let reach = self.racks.iter().map(|r| r.distance_xy(p[0], p[1])).fold(f64::INFINITY, f64::min);
            if reach > RACK_ACCESS_REACH_M {
                return err(
                    format!("floorplan.p4[{i}]"),
                    format!("{p:?} is {reach:.2} m from the nearest rack face"),
                );
            }
        }
        if self.racks.is_empty() {
            return err("floorplan.racks".into(), "needs at least one rack".into());
        }
        for (i, r) in self.racks.iter().enumerate() {
            let far = Position3D::new(r.x + r.length_m, r.y + r.depth_m, r.height_m);
            let near = Position3D::new(r.x, r.y, 0.0);
            if r.length_m <= 0.0 || r.depth_m <= 0.0 || r.height_m <= 0.0 || !self.contains(&near) || !self.contains(&far) {
                return err(format!("floorplan.racks[{i}]"), "rack must have positive size and fit in the hall".into());
            }
        }
        Ok(())
    }
}
