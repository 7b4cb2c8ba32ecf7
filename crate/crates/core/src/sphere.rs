//! Geometry of the unit sphere S²: points, geodesic and chordal distances,
//! spherical caps and mesh norms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular tolerance for boundary membership of a cap.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Minimum geodesic separation for two points to count as distinct.
pub const DISTINCT_TOL: f64 = 1e-10;

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SurfacePoint {
    pub const NORTH: SurfacePoint = SurfacePoint {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };
    pub const SOUTH: SurfacePoint = SurfacePoint {
        x: 0.0,
        y: 0.0,
        z: -1.0,
    };

    /// Normalizes `(x, y, z)` onto the sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid(format!(
                "cannot normalize ({x}, {y}, {z}) onto the sphere"
            )));
        }
        Ok(SurfacePoint {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Point with colatitude `theta` and azimuth `phi` in the global frame.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        SurfacePoint {
            x: st * cp,
            y: st * sp,
            z: ct,
        }
    }

    #[inline]
    pub fn dot(&self, other: &SurfacePoint) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm_defect(&self) -> f64 {
        (self.dot(self) - 1.0).abs()
    }
}

/// Great-circle distance `arccos(p·q)`, evaluated as `2 arcsin(|p − q|/2)`
/// to stay accurate for nearby points.
#[inline]
pub fn geodesic_distance(p: &SurfacePoint, q: &SurfacePoint) -> f64 {
    chord_to_geodesic(chord_distance(p, q))
}

/// Area `2π(1 − cos θ)` of a cap of geodesic radius `θ`.
#[inline]
pub fn zone_area(theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    4.0 * PI * s * s
}

/// Inverse of [`zone_area`] on `[0, 4π]`.
#[inline]
pub fn zone_radius(area: f64) -> f64 {
    2.0 * (area / (4.0 * PI)).clamp(0.0, 1.0).sqrt().asin()
}

#[inline]
pub fn chord_to_geodesic(c: f64) -> f64 {
    2.0 * (0.5 * c).min(1.0).asin()
}

/// Euclidean distance `|p − q| = √(2 − 2 p·q)` between two unit vectors.
#[inline]
pub fn chord_distance(p: &SurfacePoint, q: &SurfacePoint) -> f64 {
    let (dx, dy, dz) = (p.x - q.x, p.y - q.y, p.z - q.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// The open spherical cap `{p : dist(center, p) < radius}`.
///
/// A cap carries an orthonormal local frame whose third axis is the center.
/// Local colatitude/azimuth `(θ, φ)` are measured in that frame; for a cap
/// centred at the north pole the frame is the identity, so local and global
/// spherical coordinates coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCap {
    center: SurfacePoint,
    radius: f64,
    // columns: e1, e2, center
    frame: [[f64; 3]; 3],
}

impl SphericalCap {
    pub fn new(center: SurfacePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < PI) {
            return Err(Error::invalid(format!(
                "cap radius {radius} must lie strictly inside (0, π)"
            )));
        }
        let center = SurfacePoint::new(center.x, center.y, center.z)?;
        Ok(SphericalCap {
            center,
            radius,
            frame: rotation_from_north(&center),
        })
    }

    /// Cap of the given radius centred at the north pole.
    pub fn north(radius: f64) -> Result<Self> {
        Self::new(SurfacePoint::NORTH, radius)
    }

    pub fn center(&self) -> SurfacePoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Surface area `2π(1 − cos θ_c)`.
    pub fn area(&self) -> f64 {
        zone_area(self.radius)
    }

    /// Open-cap membership; points on the rim are excluded.
    pub fn contains(&self, p: &SurfacePoint) -> bool {
        let d = geodesic_distance(&self.center, p);
        d < self.radius && !self.on_boundary(p)
    }

    pub fn on_boundary(&self, p: &SurfacePoint) -> bool {
        (geodesic_distance(&self.center, p) - self.radius).abs() <= BOUNDARY_TOL
    }

    /// Maps local `(θ, φ)` to a point on the sphere.
    pub fn point_at(&self, theta: f64, phi: f64) -> SurfacePoint {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let local = [st * cp, st * sp, ct];
        let f = &self.frame;
        SurfacePoint {
            x: f[0][0] * local[0] + f[0][1] * local[1] + f[0][2] * local[2],
            y: f[1][0] * local[0] + f[1][1] * local[1] + f[1][2] * local[2],
            z: f[2][0] * local[0] + f[2][1] * local[1] + f[2][2] * local[2],
        }
    }

    /// Local `(θ, φ)` of a point, with φ in `[0, 2π)`.
    pub fn local_coords(&self, p: &SurfacePoint) -> (f64, f64) {
        let f = &self.frame;
        let lx = f[0][0] * p.x + f[1][0] * p.y + f[2][0] * p.z;
        let ly = f[0][1] * p.x + f[1][1] * p.y + f[2][1] * p.z;
        let theta = geodesic_distance(&self.center, p);
        let mut phi = ly.atan2(lx);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi -= 2.0 * PI;
        }
        (theta, phi)
    }
}

/// Rotation matrix taking the north pole to `c` (Rodrigues form).
fn rotation_from_north(c: &SurfacePoint) -> [[f64; 3]; 3] {
    if c.z <= -1.0 + 1e-15 {
        return [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
    }
    // v = ẑ × c
    let (vx, vy) = (-c.y, c.x);
    let k = 1.0 / (1.0 + c.z);
    [
        [1.0 - k * vy * vy, k * vx * vy, c.x],
        [k * vx * vy, 1.0 - k * vx * vx, c.y],
        [-c.x, -c.y, c.z],
    ]
}

/// Interior set X₁ (inside the cap) and boundary set X₂ (on the rim).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointSet {
    pub interior: Vec<SurfacePoint>,
    pub boundary: Vec<SurfacePoint>,
}

impl PointSet {
    pub fn new(interior: Vec<SurfacePoint>, boundary: Vec<SurfacePoint>) -> Self {
        PointSet { interior, boundary }
    }

    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points, interior first.
    pub fn iter(&self) -> impl Iterator<Item = &SurfacePoint> {
        self.interior.iter().chain(self.boundary.iter())
    }

    /// Checks membership and pairwise distinctness.
    pub fn validate(&self, cap: &SphericalCap) -> Result<()> {
        if let Some(i) = self.interior.iter().position(|p| !cap.contains(p)) {
            return Err(Error::invalid(format!(
                "interior point {i} is not strictly inside the cap"
            )));
        }
        if let Some(i) = self.boundary.iter().position(|p| !cap.on_boundary(p)) {
            return Err(Error::invalid(format!(
                "boundary point {i} is not on the cap boundary"
            )));
        }
        let all: Vec<_> = self.iter().copied().collect();
        for i in 0..all.len() {
            for j in 0..i {
                if geodesic_distance(&all[i], &all[j]) <= DISTINCT_TOL {
                    return Err(Error::DuplicatePoints {
                        first: j,
                        second: i,
                        chord: chord_distance(&all[i], &all[j]),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Resolution of the `(θ, φ)` sample used to estimate interior mesh norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshSampling {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl MeshSampling {
    pub const MIN: MeshSampling = MeshSampling {
        n_theta: 200,
        n_phi: 600,
    };
}

impl Default for MeshSampling {
    fn default() -> Self {
        MeshSampling {
            n_theta: 400,
            n_phi: 1200,
        }
    }
}

/// Cell-midpoint sample of the cap used by [`mesh_norm_interior`].
pub fn mesh_sample_points(cap: &SphericalCap, sampling: MeshSampling) -> Vec<SurfacePoint> {
    let dt = cap.radius() / sampling.n_theta as f64;
    let dp = 2.0 * PI / sampling.n_phi as f64;
    let mut out = Vec::with_capacity(sampling.n_theta * sampling.n_phi);
    for i in 0..sampling.n_theta {
        let theta = (i as f64 + 0.5) * dt;
        for j in 0..sampling.n_phi {
            out.push(cap.point_at(theta, (j as f64 + 0.5) * dp));
        }
    }
    out
}

/// Local mesh norm `h_{X₁,Ω}`: the largest distance from a sampled cap point
/// to its nearest interior point.
///
/// The sup is taken over a deterministic midpoint sample, so the result is a
/// lower bound that converges as `sampling` refines.
pub fn mesh_norm_interior(
    points: &PointSet,
    cap: &SphericalCap,
    sampling: MeshSampling,
) -> Result<f64> {
    if points.interior.is_empty() {
        return Err(Error::EmptyPointSet("interior"));
    }
    if sampling.n_theta < MeshSampling::MIN.n_theta || sampling.n_phi < MeshSampling::MIN.n_phi {
        return Err(Error::invalid(format!(
            "mesh-norm sampling {}x{} is below the minimum {}x{}",
            sampling.n_theta,
            sampling.n_phi,
            MeshSampling::MIN.n_theta,
            MeshSampling::MIN.n_phi
        )));
    }
    let samples = mesh_sample_points(cap, sampling);
    Ok(fill_distance(&samples, &points.interior, &cap.center()))
}

/// `max_s min_p dist(s, p)` over explicit sample and data sets.
///
/// Data points are sorted by distance to `anchor`; the reverse triangle
/// inequality `dist(s, p) ≥ |dist(s, a) − dist(p, a)|` prunes the scan.
pub fn fill_distance(
    samples: &[SurfacePoint],
    data: &[SurfacePoint],
    anchor: &SurfacePoint,
) -> f64 {
    let mut keyed: Vec<(f64, SurfacePoint)> = data
        .iter()
        .map(|p| (geodesic_distance(anchor, p), *p))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radii: Vec<f64> = keyed.iter().map(|k| k.0).collect();

    let mut worst = 0.0_f64;
    for s in samples {
        let rs = geodesic_distance(anchor, s);
        let start = radii.partition_point(|&r| r < rs);
        let mut best_chord = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut up = start;
        let mut down = start;
        loop {
            let up_ok = up < keyed.len() && keyed[up].0 - rs < best;
            let down_ok = down > 0 && rs - keyed[down - 1].0 < best;
            if !up_ok && !down_ok {
                break;
            }
            if up_ok {
                let c = chord_distance(s, &keyed[up].1);
                if c < best_chord {
                    best_chord = c;
                    best = chord_to_geodesic(c);
                }
                up += 1;
            }
            if down_ok {
                let c = chord_distance(s, &keyed[down - 1].1);
                if c < best_chord {
                    best_chord = c;
                    best = chord_to_geodesic(c);
                }
                down -= 1;
            }
        }
        worst = worst.max(best);
    }
    worst
}

/// Boundary mesh norm `h_{X₂,∂Ω}`: half the largest gap between adjacent
/// boundary points, measured as arc length along the rim circle.
pub fn mesh_norm_boundary(points: &PointSet, cap: &SphericalCap) -> Result<f64> {
    if points.boundary.is_empty() {
        return Err(Error::EmptyPointSet("boundary"));
    }
    let mut az: Vec<f64> = points
        .boundary
        .iter()
        .map(|p| cap.local_coords(p).1)
        .collect();
    az.sort_by(f64::total_cmp);
    let mut gap = az[0] + 2.0 * PI - az[az.len() - 1];
    for w in az.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    Ok(0.5 * gap * cap.radius().sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> SurfacePoint {
        SurfacePoint::new(x, y, z).unwrap()
    }

    #[test]
    fn geodesic_special_cases() {
        let n = SurfacePoint::NORTH;
        assert_eq!(geodesic_distance(&n, &n), 0.0);
        assert!((geodesic_distance(&n, &p(1.0, 0.0, 0.0)) - PI / 2.0).abs() < 1e-15);
        assert!((geodesic_distance(&n, &SurfacePoint::SOUTH) - PI).abs() < 1e-15);
    }

    #[test]
    fn geodesic_clamps_rounding() {
        // a dot product a hair above 1 must not produce NaN
        let q = SurfacePoint {
            x: 0.0,
            y: 0.0,
            z: 1.0 + 1e-16,
        };
        assert_eq!(geodesic_distance(&SurfacePoint::NORTH, &q), 0.0);
        assert_eq!(chord_distance(&SurfacePoint::NORTH, &q), 0.0);
    }

    #[test]
    fn chord_special_cases() {
        let a = p(0.3, -0.2, 0.9);
        assert_eq!(chord_distance(&a, &a), 0.0);
        let b = p(-0.3, 0.2, -0.9);
        assert!((chord_distance(&a, &b) - 2.0).abs() < 1e-15);
        let c = SurfacePoint::from_spherical(PI / 3.0, 0.7);
        assert!((chord_distance(&SurfacePoint::NORTH, &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn new_normalizes_and_rejects_zero() {
        let a = p(3.0, 4.0, 12.0);
        assert!(a.norm_defect() < 1e-15);
        assert!(SurfacePoint::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cap_rejects_bad_radius() {
        assert!(SphericalCap::north(0.0).is_err());
        assert!(SphericalCap::north(PI).is_err());
        assert!(SphericalCap::north(-1.0).is_err());
        assert!(SphericalCap::north(1.0).is_ok());
    }

    #[test]
    fn cap_membership() {
        let cap = SphericalCap::north(PI / 3.0).unwrap();
        assert!(cap.contains(&SurfacePoint::NORTH));
        let rim = cap.point_at(PI / 3.0, 1.0);
        assert!(cap.on_boundary(&rim));
        assert!(!cap.contains(&rim));
        assert!(!cap.contains(&SurfacePoint::SOUTH));
    }

    #[test]
    fn north_frame_is_identity() {
        let cap = SphericalCap::north(1.0).unwrap();
        let q = cap.point_at(0.4, 2.1);
        let r = SurfacePoint::from_spherical(0.4, 2.1);
        assert_eq!(q, r);
    }

    #[test]
    fn rotated_cap_frame() {
        for c in [p(1.0, 0.0, 0.0), p(0.2, -0.5, 0.3), SurfacePoint::SOUTH] {
            let cap = SphericalCap::new(c, 0.8).unwrap();
            assert!(geodesic_distance(&cap.point_at(0.0, 0.0), &c) < 1e-7);
            let q = cap.point_at(0.5, 1.3);
            assert!(q.norm_defect() < 1e-14);
            assert!((geodesic_distance(&q, &c) - 0.5).abs() < 1e-12);
            let (t, ph) = cap.local_coords(&q);
            assert!((t - 0.5).abs() < 1e-12 && (ph - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_norm_single_center_point() {
        let cap = SphericalCap::north(PI / 3.0).unwrap();
        let x = PointSet::new(vec![SurfacePoint::NORTH], vec![]);
        let h = mesh_norm_interior(&x, &cap, MeshSampling::default()).unwrap();
        assert!((h - PI / 3.0).abs() / (PI / 3.0) < 0.01);
        assert!(h <= PI / 3.0);
    }

    #[test]
    fn mesh_norm_of_sample_set_is_zero() {
        let cap = SphericalCap::north(PI / 3.0).unwrap();
        let samples = mesh_sample_points(&cap, MeshSampling::MIN);
        let x = PointSet::new(samples, vec![]);
        assert_eq!(
            mesh_norm_interior(&x, &cap, MeshSampling::MIN).unwrap(),
            0.0
        );
    }

    #[test]
    fn mesh_norm_errors() {
        let cap = SphericalCap::north(PI / 3.0).unwrap();
        assert!(matches!(
            mesh_norm_interior(&PointSet::default(), &cap, MeshSampling::default()),
            Err(Error::EmptyPointSet(_))
        ));
        let x = PointSet::new(vec![SurfacePoint::NORTH], vec![]);
        let coarse = MeshSampling {
            n_theta: 10,
            n_phi: 10,
        };
        assert!(mesh_norm_interior(&x, &cap, coarse).is_err());
        assert!(mesh_norm_boundary(&x, &cap).is_err());
    }

    #[test]
    fn fill_distance_matches_brute_force() {
        let cap = SphericalCap::north(1.0).unwrap();
        let data: Vec<_> = (0..37)
            .map(|k| cap.point_at(0.9 * ((k * 7919) % 101) as f64 / 101.0, k as f64 * 0.61))
            .collect();
        let samples = mesh_sample_points(
            &cap,
            MeshSampling {
                n_theta: 30,
                n_phi: 60,
            },
        );
        let brute = samples
            .iter()
            .map(|s| {
                data.iter()
                    .map(|d| geodesic_distance(s, d))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        let fast = fill_distance(&samples, &data, &cap.center());
        assert_eq!(fast, brute);
    }

    fn equispaced_rim(cap: &SphericalCap, k: usize) -> Vec<SurfacePoint> {
        (0..k)
            .map(|j| cap.point_at(cap.radius(), 2.0 * PI * j as f64 / k as f64))
            .collect()
    }

    #[test]
    fn boundary_mesh_norm_values() {
        let cap = SphericalCap::north(PI / 3.0).unwrap();
        let h100 =
            mesh_norm_boundary(&PointSet::new(vec![], equispaced_rim(&cap, 100)), &cap).unwrap();
        assert!((h100 - 0.0272).abs() < 5e-5);
        let h200 =
            mesh_norm_boundary(&PointSet::new(vec![], equispaced_rim(&cap, 200)), &cap).unwrap();
        assert!((h200 - 0.0136).abs() < 5e-5);

        let eq = SphericalCap::north(PI / 2.0).unwrap();
        let h4 = mesh_norm_boundary(&PointSet::new(vec![], equispaced_rim(&eq, 4)), &eq).unwrap();
        assert!((h4 - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_mesh_norm_closed_form() {
        for &radius in &[0.3, PI / 3.0, 2.0] {
            let cap = SphericalCap::north(radius).unwrap();
            for k in [1usize, 3, 17, 100, 801] {
                let h = mesh_norm_boundary(&PointSet::new(vec![], equispaced_rim(&cap, k)), &cap)
                    .unwrap();
                let exact = PI * radius.sin() / k as f64;
                assert!((h - exact).abs() <= 1e-12 * exact.max(1.0), "{radius} {k}");
            }
        }
    }

    #[test]
    fn validate_detects_duplicates_and_misplacement() {
        let cap = SphericalCap::north(1.0).unwrap();
        let a = cap.point_at(0.3, 0.2);
        let b = cap.point_at(1.0, 0.2);
        assert!(PointSet::new(vec![a], vec![b]).validate(&cap).is_ok());
        assert!(matches!(
            PointSet::new(vec![a, a], vec![b]).validate(&cap),
            Err(Error::DuplicatePoints { .. })
        ));
        assert!(PointSet::new(vec![b], vec![]).validate(&cap).is_err());
        assert!(PointSet::new(vec![], vec![a]).validate(&cap).is_err());
    }

    fn unit() -> impl Strategy<Value = SurfacePoint> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| SurfacePoint::new(x, y, z).unwrap())
    }

    proptest! {
        #[test]
        fn geodesic_is_a_metric(a in unit(), b in unit(), c in unit()) {
            let ab = geodesic_distance(&a, &b);
            prop_assert_eq!(ab, geodesic_distance(&b, &a));
            prop_assert!((0.0..=PI).contains(&ab));
            prop_assert!(ab <= geodesic_distance(&a, &c) + geodesic_distance(&c, &b) + 1e-12);
        }

        #[test]
        fn chord_matches_geodesic(a in unit(), b in unit()) {
            let c = chord_distance(&a, &b);
            let g = geodesic_distance(&a, &b);
            prop_assert!((c * c - (2.0 - 2.0 * g.cos())).abs() < 1e-12);
        }

        #[test]
        fn adding_points_never_increases_mesh_norm(extra in proptest::collection::vec((0.0f64..1.0, 0.0f64..(2.0 * PI)), 1..5)) {
            let cap = SphericalCap::north(1.0).unwrap();
            let base: Vec<_> = (0..12).map(|k| cap.point_at(0.5 + 0.04 * k as f64, 0.5 * k as f64)).collect();
            let h0 = mesh_norm_interior(&PointSet::new(base.clone(), vec![]), &cap, MeshSampling::MIN).unwrap();
            let mut more = base;
            more.extend(extra.iter().map(|&(t, p)| cap.point_at(t * 0.99, p)));
            let h1 = mesh_norm_interior(&PointSet::new(more, vec![]), &cap, MeshSampling::MIN).unwrap();
            prop_assert!(h1 <= h0);
        }
    }
}
