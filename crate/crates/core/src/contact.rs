//! Parametric 2-D obstacles, penetration queries, linear penalty contact,
//! and the force-sensor model.

use crate::geom::{closest_point_on_segment, segment_closest_points, Vec2};
use crate::hand_model::FingerName;
use serde::{Deserialize, Serialize};

/// Penalty stiffness surrogate for rigid objects (bar, basket handle), N/m.
pub const RIGID_STIFFNESS: f64 = 1e5;

/// Penalty stiffness for soft objects (sponge), N/m.
pub const SPONGE_STIFFNESS: f64 = 2e3;

fn default_stiffness() -> f64 {
    RIGID_STIFFNESS
}

/// A 2-D object cross-section with a linear contact stiffness.
///
/// Externally tagged in JSON, e.g.
/// `{"disk": {"center": [0.1, 0.03], "radius": 0.015, "contact_stiffness": 2e3}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectShape {
    Disk {
        center: Vec2,
        radius: f64,
        #[serde(default = "default_stiffness")]
        contact_stiffness: f64,
    },
    /// Solid half-space on the opposite side of `normal`; the boundary line
    /// passes through `origin` and `normal` points out of the material.
    HalfPlane {
        origin: Vec2,
        normal: Vec2,
        #[serde(default = "default_stiffness")]
        contact_stiffness: f64,
    },
    Capsule {
        a: Vec2,
        b: Vec2,
        radius: f64,
        #[serde(default = "default_stiffness")]
        contact_stiffness: f64,
    },
}

impl ObjectShape {
    pub fn disk(center: Vec2, radius: f64, contact_stiffness: f64) -> Self {
        ObjectShape::Disk { center, radius, contact_stiffness }
    }

    pub fn half_plane(origin: Vec2, normal: Vec2, contact_stiffness: f64) -> Self {
        let normal = normal.normalized().expect("half-plane normal must be nonzero");
        ObjectShape::HalfPlane { origin, normal, contact_stiffness }
    }

    pub fn capsule(a: Vec2, b: Vec2, radius: f64, contact_stiffness: f64) -> Self {
        ObjectShape::Capsule { a, b, radius, contact_stiffness }
    }

    pub fn contact_stiffness(&self) -> f64 {
        match *self {
            ObjectShape::Disk { contact_stiffness, .. }
            | ObjectShape::HalfPlane { contact_stiffness, .. }
            | ObjectShape::Capsule { contact_stiffness, .. } => contact_stiffness,
        }
    }
}

/// Signed distance from `point` to the shape boundary: negative inside,
/// positive outside, zero on the boundary. Exact for all three shapes.
pub fn signed_distance(shape: &ObjectShape, point: Vec2) -> f64 {
    match *shape {
        ObjectShape::Disk { center, radius, .. } => (point - center).norm() - radius,
        ObjectShape::HalfPlane { origin, normal, .. } => {
            let n = normal.normalized().unwrap_or(Vec2::new(0.0, 1.0));
            (point - origin).dot(n)
        }
        ObjectShape::Capsule { a, b, radius, .. } => {
            (point - closest_point_on_segment(point, a, b)).norm() - radius
        }
    }
}

/// Outward unit normal of the shape at (or nearest to) `point`.
pub fn outward_normal(shape: &ObjectShape, point: Vec2) -> Vec2 {
    match *shape {
        ObjectShape::Disk { center, .. } => {
            (point - center).normalized().unwrap_or(Vec2::new(0.0, 1.0))
        }
        ObjectShape::HalfPlane { normal, .. } => normal.normalized().unwrap_or(Vec2::new(0.0, 1.0)),
        ObjectShape::Capsule { a, b, .. } => {
            let q = closest_point_on_segment(point, a, b);
            (point - q).normalized().unwrap_or((b - a).perp().normalized().unwrap_or(Vec2::new(0.0, 1.0)))
        }
    }
}

/// A penalty contact at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactPoint {
    /// Location of the contact on the penetrating body, m.
    pub point: Vec2,
    /// Penetration depth, m (> 0).
    pub penetration: f64,
    /// Outward unit normal of the shape at the contact.
    pub normal: Vec2,
    /// Penalty force magnitude: contact_stiffness * penetration, N.
    pub force: f64,
}

/// Linear penalty contact at a probe point: `None` when the point is on or
/// outside the boundary, so the force is continuous through zero.
pub fn contact_force(shape: &ObjectShape, point: Vec2) -> Option<ContactPoint> {
    let d = signed_distance(shape, point);
    if d >= 0.0 {
        return None;
    }
    let penetration = -d;
    Some(ContactPoint {
        point,
        penetration,
        normal: outward_normal(shape, point),
        force: shape.contact_stiffness() * penetration,
    })
}

/// Deepest penetration of the segment `[a, b]` into the shape, if any.
///
/// The reported point is the deepest material point of the segment and the
/// normal points out of the shape at that point.
pub fn link_penetration(shape: &ObjectShape, a: Vec2, b: Vec2) -> Option<ContactPoint> {
    match *shape {
        ObjectShape::Disk { center, radius, contact_stiffness } => {
            let p = closest_point_on_segment(center, a, b);
            let d = (p - center).norm() - radius;
            if d >= 0.0 {
                return None;
            }
            let normal = (p - center)
                .normalized()
                .unwrap_or((b - a).perp().normalized().unwrap_or(Vec2::new(0.0, 1.0)));
            Some(ContactPoint {
                point: p,
                penetration: -d,
                normal,
                force: contact_stiffness * -d,
            })
        }
        ObjectShape::HalfPlane { .. } => {
            // Distance is linear along the segment; the deepest point is an
            // endpoint.
            let (da, db) = (signed_distance(shape, a), signed_distance(shape, b));
            let (p, d) = if da <= db { (a, da) } else { (b, db) };
            if d >= 0.0 {
                return None;
            }
            Some(ContactPoint {
                point: p,
                penetration: -d,
                normal: outward_normal(shape, p),
                force: shape.contact_stiffness() * -d,
            })
        }
        ObjectShape::Capsule { a: ca, b: cb, radius, contact_stiffness } => {
            let (p, q) = segment_closest_points(a, b, ca, cb);
            let d = (p - q).norm() - radius;
            if d >= 0.0 {
                return None;
            }
            let normal = (p - q)
                .normalized()
                .unwrap_or((cb - ca).perp().normalized().unwrap_or(Vec2::new(0.0, 1.0)));
            Some(ContactPoint {
                point: p,
                penetration: -d,
                normal,
                force: contact_stiffness * -d,
            })
        }
    }
}

/// A shape placed in the hand plane, optionally restricted to a subset of
/// fingers (palm sensor sites see every obstacle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub shape: ObjectShape,
    /// Fingers whose links this obstacle can touch; `None` means all.
    #[serde(default)]
    pub fingers: Option<Vec<FingerName>>,
}

impl Obstacle {
    pub fn for_all(shape: ObjectShape) -> Self {
        Obstacle { shape, fingers: None }
    }

    pub fn for_fingers(shape: ObjectShape, fingers: &[FingerName]) -> Self {
        Obstacle { shape, fingers: Some(fingers.to_vec()) }
    }

    pub fn applies_to(&self, finger: FingerName) -> bool {
        match &self.fingers {
            None => true,
            Some(list) => list.contains(&finger),
        }
    }
}

/// Where a sensor sits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorSite {
    Fingertip(FingerName),
    Palm(usize),
}

/// One force-sensor sample, clamped to the sensor ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorReading {
    pub site: SensorSite,
    /// N, clamped to [0, sensor_max].
    pub force: f64,
    /// Set iff the raw force exceeded sensor_max.
    pub saturated: bool,
}

fn clamp_reading(site: SensorSite, raw: f64, sensor_max: f64) -> SensorReading {
    SensorReading {
        site,
        force: raw.clamp(0.0, sensor_max),
        saturated: raw > sensor_max,
    }
}

/// Total penalty force at a palm sensor site from every obstacle, N.
pub fn palm_site_force(obstacles: &[Obstacle], site: Vec2) -> f64 {
    obstacles
        .iter()
        .filter_map(|o| contact_force(&o.shape, site))
        .map(|c| c.force)
        .sum()
}

/// Builds the 10 sensor readings: five fingertip sensors (summed normal
/// force on each distal link) followed by the palm sensors.
///
/// `distal_forces` is indexed by [`FingerName::index`].
pub fn read_sensors(
    distal_forces: &[f64; 5],
    obstacles: &[Obstacle],
    palm_sites: &[Vec2],
    sensor_max: f64,
) -> Vec<SensorReading> {
    let mut out = Vec::with_capacity(5 + palm_sites.len());
    for name in FingerName::ALL {
        out.push(clamp_reading(
            SensorSite::Fingertip(name),
            distal_forces[name.index()],
            sensor_max,
        ));
    }
    for (i, &site) in palm_sites.iter().enumerate() {
        out.push(clamp_reading(
            SensorSite::Palm(i),
            palm_site_force(obstacles, site),
            sensor_max,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn disk(r: f64) -> ObjectShape {
        ObjectShape::disk(Vec2::ZERO, r, 1e4)
    }

    #[test]
    fn signed_distance_examples() {
        let d = disk(0.02);
        assert_relative_eq!(signed_distance(&d, Vec2::new(0.03, 0.0)), 0.01, max_relative = 1e-12);
        assert_relative_eq!(signed_distance(&d, Vec2::new(0.01, 0.0)), -0.01, max_relative = 1e-12);

        // Solid y <= 0, boundary through the origin.
        let hp = ObjectShape::half_plane(Vec2::ZERO, Vec2::new(0.0, 1.0), 1e5);
        assert_eq!(signed_distance(&hp, Vec2::new(5.0, 0.0)), 0.0);
        assert_eq!(signed_distance(&hp, Vec2::new(1.0, -0.3)), -0.3);

        let cap = ObjectShape::capsule(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 0.5, 1e5);
        assert_relative_eq!(signed_distance(&cap, Vec2::new(0.0, 2.0)), 1.5, max_relative = 1e-12);
        assert_relative_eq!(signed_distance(&cap, Vec2::new(2.0, 0.0)), 0.5, max_relative = 1e-12);
        assert_relative_eq!(signed_distance(&cap, Vec2::new(0.3, 0.1)), -0.4, max_relative = 1e-12);
    }

    #[test]
    fn contact_force_examples() {
        let d = disk(0.02);
        let c = contact_force(&d, Vec2::new(0.019, 0.0)).unwrap();
        assert_relative_eq!(c.force, 10.0, max_relative = 1e-9);
        assert_relative_eq!(c.penetration, 0.001, max_relative = 1e-9);
        assert_relative_eq!(c.normal.x, 1.0, max_relative = 1e-12);

        assert!(contact_force(&d, Vec2::new(0.02, 0.0)).is_none());

        let sponge = ObjectShape::half_plane(Vec2::ZERO, Vec2::new(0.0, 1.0), SPONGE_STIFFNESS);
        let c = contact_force(&sponge, Vec2::new(0.0, -0.005)).unwrap();
        assert_relative_eq!(c.force, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn contact_force_is_continuous_at_boundary() {
        let d = disk(0.02);
        for eps in [1e-4, 1e-6, 1e-8, 1e-10] {
            let c = contact_force(&d, Vec2::new(0.02 - eps, 0.0)).unwrap();
            assert!(c.force <= 1e4 * eps * 1.0001);
        }
    }

    #[test]
    fn link_penetration_picks_deepest_point() {
        let hp = ObjectShape::half_plane(Vec2::ZERO, Vec2::new(0.0, 1.0), 1e3);
        let c = link_penetration(&hp, Vec2::new(0.0, 0.01), Vec2::new(0.1, -0.02)).unwrap();
        assert_relative_eq!(c.penetration, 0.02, max_relative = 1e-12);
        assert_eq!(c.point, Vec2::new(0.1, -0.02));

        let d = ObjectShape::disk(Vec2::new(0.0, 0.05), 0.03, 1e3);
        let c = link_penetration(&d, Vec2::new(-0.1, 0.03), Vec2::new(0.1, 0.03)).unwrap();
        assert_relative_eq!(c.penetration, 0.01, max_relative = 1e-9);
        assert_relative_eq!(c.point.x, 0.0, epsilon = 1e-12);

        assert!(link_penetration(&d, Vec2::new(-0.1, 0.0), Vec2::new(0.1, 0.0)).is_none());
    }

    #[test]
    fn sensor_routing_and_clamp() {
        let sites: Vec<Vec2> = (0..5).map(|i| Vec2::new(0.01 * i as f64, 0.0)).collect();

        let readings = read_sensors(&[0.0; 5], &[], &sites, 500.0);
        assert_eq!(readings.len(), 10);
        assert!(readings.iter().all(|r| r.force == 0.0 && !r.saturated));

        let mut forces = [0.0; 5];
        forces[FingerName::Index.index()] = 12.0;
        let readings = read_sensors(&forces, &[], &sites, 500.0);
        assert_eq!(readings[FingerName::Index.index()].force, 12.0);
        assert_eq!(readings.iter().filter(|r| r.force != 0.0).count(), 1);

        forces[FingerName::Index.index()] = 800.0;
        let readings = read_sensors(&forces, &[], &sites, 500.0);
        let r = &readings[FingerName::Index.index()];
        assert_eq!(r.force, 500.0);
        assert!(r.saturated);
        assert!(!readings[0].saturated);
    }

    #[test]
    fn palm_sensors_see_half_plane() {
        let sites = vec![Vec2::new(0.01, 0.0), Vec2::new(0.03, 0.0)];
        let hp = Obstacle::for_all(ObjectShape::half_plane(
            Vec2::new(0.0, 0.002),
            Vec2::new(0.0, 1.0),
            1e4,
        ));
        let readings = read_sensors(&[0.0; 5], &[hp], &sites, 500.0);
        assert_relative_eq!(readings[5].force, 20.0, max_relative = 1e-9);
        assert_relative_eq!(readings[6].force, 20.0, max_relative = 1e-9);
    }

    proptest! {
        // |grad(distance)| = 1 away from the center singularity, by central
        // finite differences.
        #[test]
        fn disk_distance_gradient_is_unit(
            x in -0.1f64..0.1,
            y in -0.1f64..0.1,
        ) {
            let p = Vec2::new(x, y);
            prop_assume!(p.norm() > 5e-3);
            let shape = disk(0.02);
            let h = 1e-6;
            let gx = (signed_distance(&shape, p + Vec2::new(h, 0.0))
                - signed_distance(&shape, p - Vec2::new(h, 0.0))) / (2.0 * h);
            let gy = (signed_distance(&shape, p + Vec2::new(0.0, h))
                - signed_distance(&shape, p - Vec2::new(0.0, h))) / (2.0 * h);
            let norm = (gx * gx + gy * gy).sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-6, "|grad| = {norm}");
        }

        #[test]
        fn sensor_never_exceeds_max(raw in -50.0f64..2000.0) {
            let mut forces = [0.0; 5];
            forces[0] = raw;
            let readings = read_sensors(&forces, &[], &[], 500.0);
            prop_assert!(readings[0].force <= 500.0 && readings[0].force >= 0.0);
            prop_assert_eq!(readings[0].saturated, raw > 500.0);
        }
    }
}
