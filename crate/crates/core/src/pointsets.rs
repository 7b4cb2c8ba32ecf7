//! Deterministic point sets on a spherical cap: collar-based equal-area
//! interior points, equispaced rim points and the midpoint evaluation grid.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sphere::{
    chord_to_geodesic, zone_area, zone_radius, PointSet, SphericalCap, SurfacePoint,
};

/// Ratio of the ideal region width to the collar width. Values below 1 give
/// fewer, wider collars.
pub const DEFAULT_COLLAR_DENSITY: f64 = 0.9;

/// Minimum geodesic separation accepted from the interior generator.
const MIN_SEPARATION: f64 = 1e-8;

/// One ring of the interior partition: the zone `theta_lo..theta_hi` holds
/// `count` regions of equal area and its points sit on the mid colatitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collar {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub count: usize,
    /// Azimuthal offset in units of the in-ring spacing.
    pub offset: f64,
}

impl Collar {
    pub fn theta(&self) -> f64 {
        0.5 * (self.theta_lo + self.theta_hi)
    }

    pub fn area(&self) -> f64 {
        zone_area(self.theta_hi) - zone_area(self.theta_lo)
    }
}

/// Collar layout for `m` points; the center point is implicit (a polar
/// region of one region's area) and is not part of the returned collars.
pub fn collar_layout(cap: &SphericalCap, m: usize, density: f64) -> Result<Vec<Collar>> {
    if m == 0 {
        return Err(Error::invalid("interior point count must be at least 1"));
    }
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::invalid(format!(
            "collar density {density} must be positive"
        )));
    }
    if m == 1 {
        return Ok(Vec::new());
    }
    let region = cap.area() / m as f64;
    let theta_of_area = zone_radius;
    let theta0 = theta_of_area(region);
    let span = cap.radius() - theta0;
    let n_collars = ((density * span / region.sqrt()).round() as usize).max(1);

    // ideal budgets from equal-width zones
    let width = span / n_collars as f64;
    let ideal: Vec<f64> = (0..n_collars)
        .map(|k| {
            let lo = theta0 + k as f64 * width;
            let hi = if k + 1 == n_collars {
                cap.radius()
            } else {
                lo + width
            };
            (zone_area(hi) - zone_area(lo)) / region
        })
        .collect();
    let budgets = largest_remainder(&ideal, m - 1);

    // refit zone boundaries so every region has exactly `region` area
    let mut collars = Vec::with_capacity(n_collars);
    let mut covered = region;
    let mut lo = theta0;
    for (k, &count) in budgets.iter().enumerate() {
        covered += count as f64 * region;
        let hi = if k + 1 == n_collars {
            cap.radius()
        } else {
            theta_of_area(covered).min(cap.radius())
        };
        if count > 0 {
            collars.push(Collar {
                theta_lo: lo,
                theta_hi: hi,
                count,
                offset: if collars.len() % 2 == 1 { 0.5 } else { 0.0 },
            });
        }
        lo = hi;
    }
    Ok(collars)
}

/// Integer apportionment of `total` proportional to `weights`.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Lower bound on the geodesic separation of the points a layout produces.
fn layout_separation(collars: &[Collar]) -> f64 {
    let mut sep = f64::INFINITY;
    let mut prev = 0.0;
    for c in collars {
        let t = c.theta();
        sep = sep.min(t - prev);
        prev = t;
        if c.count > 1 {
            let dphi = 2.0 * PI / c.count as f64;
            sep = sep.min(chord_to_geodesic(2.0 * t.sin() * (0.5 * dphi).sin()));
        }
    }
    sep
}

/// `m` quasi-uniform points strictly inside the cap.
pub fn generate_cap_points(cap: &SphericalCap, m: usize) -> Result<Vec<SurfacePoint>> {
    generate_cap_points_with(cap, m, DEFAULT_COLLAR_DENSITY)
}

pub fn generate_cap_points_with(
    cap: &SphericalCap,
    m: usize,
    density: f64,
) -> Result<Vec<SurfacePoint>> {
    let collars = collar_layout(cap, m, density)?;
    let sep = layout_separation(&collars);
    if sep < MIN_SEPARATION {
        return Err(Error::invalid(format!(
            "cap of radius {} is too small to separate {m} points (separation {sep:e})",
            cap.radius()
        )));
    }
    let mut points = Vec::with_capacity(m);
    points.push(cap.center());
    for c in &collars {
        let theta = c.theta();
        let step = 2.0 * PI / c.count as f64;
        points.extend((0..c.count).map(|j| cap.point_at(theta, (j as f64 + c.offset) * step)));
    }
    debug_assert_eq!(points.len(), m);
    Ok(points)
}

/// `k` points on the rim at local azimuths `2πj/k`.
pub fn generate_boundary_points(cap: &SphericalCap, k: usize) -> Result<Vec<SurfacePoint>> {
    if k == 0 {
        return Err(Error::invalid("boundary point count must be at least 1"));
    }
    Ok((0..k)
        .map(|j| cap.point_at(cap.radius(), 2.0 * PI * j as f64 / k as f64))
        .collect())
}

/// Interior and boundary sets for one experiment.
pub fn generate_point_set(
    cap: &SphericalCap,
    interior: usize,
    boundary: usize,
) -> Result<PointSet> {
    let interior = if interior == 0 {
        Vec::new()
    } else {
        generate_cap_points(cap, interior)?
    };
    let boundary = if boundary == 0 {
        Vec::new()
    } else {
        generate_boundary_points(cap, boundary)?
    };
    Ok(PointSet::new(interior, boundary))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode {
    pub theta: f64,
    pub phi: f64,
    pub point: SurfacePoint,
}

/// Longitude–latitude grid of cell midpoints covering the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    pub nodes: Vec<GridNode>,
    /// `Δθ·Δφ` of one cell.
    pub cell_weight: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub cap_area: f64,
}

impl EvaluationGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Midpoint-rule area of the cap, `Σ Δθ·Δφ·sinθ`.
    pub fn quadrature_area(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| self.cell_weight * n.theta.sin())
            .sum()
    }
}

/// Grid with nodes at `θ_i = (i−½)θ_c/n_theta`, `φ_j = (j−½)2π/n_phi`.
pub fn generate_eval_grid(
    cap: &SphericalCap,
    n_theta: usize,
    n_phi: usize,
) -> Result<EvaluationGrid> {
    if n_theta == 0 || n_phi == 0 {
        return Err(Error::invalid("evaluation grid needs positive dimensions"));
    }
    let dt = cap.radius() / n_theta as f64;
    let dp = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    for i in 1..=n_theta {
        let theta = (i as f64 - 0.5) * dt;
        for j in 1..=n_phi {
            let phi = (j as f64 - 0.5) * dp;
            nodes.push(GridNode {
                theta,
                phi,
                point: cap.point_at(theta, phi),
            });
        }
    }
    Ok(EvaluationGrid {
        nodes,
        cell_weight: (cap.radius() * 2.0 * PI) / (n_theta * n_phi) as f64,
        n_theta,
        n_phi,
        cap_area: cap.area(),
    })
}

/// Writes `x,y,z,kind` rows (interior first). Coordinates use shortest
/// round-trip formatting so the file reads back bit-exactly.
pub fn write_points_csv<W: Write>(mut out: W, points: &PointSet) -> Result<()> {
    writeln!(out, "x,y,z,kind")?;
    for p in &points.interior {
        writeln!(out, "{:?},{:?},{:?},interior", p.x, p.y, p.z)?;
    }
    for p in &points.boundary {
        writeln!(out, "{:?},{:?},{:?},boundary", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn read_points_csv<R: BufRead>(input: R) -> Result<PointSet> {
    let mut set = PointSet::default();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with('x')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected x,y,z,kind", n + 1)));
        }
        let coord = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))
        };
        // stored coordinates are already unit length; keep them bit-exact
        let p = SurfacePoint {
            x: coord(fields[0])?,
            y: coord(fields[1])?,
            z: coord(fields[2])?,
        };
        if p.norm_defect() > 1e-12 {
            return Err(Error::Parse(format!(
                "line {}: point is not on the unit sphere",
                n + 1
            )));
        }
        match fields[3] {
            "interior" => set.interior.push(p),
            "boundary" => set.boundary.push(p),
            other => {
                return Err(Error::Parse(format!(
                    "line {}: unknown kind {other:?}",
                    n + 1
                )))
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{geodesic_distance, mesh_norm_boundary, mesh_norm_interior, MeshSampling};

    fn reference_cap() -> SphericalCap {
        SphericalCap::north(PI / 3.0).unwrap()
    }

    #[test]
    fn single_point_is_center() {
        let cap = SphericalCap::new(SurfacePoint::new(1.0, 1.0, 0.0).unwrap(), 0.5).unwrap();
        let pts = generate_cap_points(&cap, 1).unwrap();
        assert_eq!(pts, vec![cap.center()]);
    }

    #[test]
    fn zero_counts_are_rejected() {
        let cap = reference_cap();
        assert!(generate_cap_points(&cap, 0).is_err());
        assert!(generate_boundary_points(&cap, 0).is_err());
        assert!(generate_eval_grid(&cap, 0, 5).is_err());
        assert!(generate_eval_grid(&cap, 5, 0).is_err());
    }

    #[test]
    fn exact_counts_and_membership() {
        let cap = reference_cap();
        for m in 1..=5000 {
            let pts = generate_cap_points(&cap, m).unwrap();
            assert_eq!(pts.len(), m);
            if m % 97 == 0 || m < 40 {
                assert!(pts.iter().all(|p| cap.contains(p)), "m = {m}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cap = reference_cap();
        assert_eq!(
            generate_cap_points(&cap, 777).unwrap(),
            generate_cap_points(&cap, 777).unwrap()
        );
    }

    #[test]
    fn collar_areas_match_budgets() {
        let cap = reference_cap();
        for m in [2, 3, 10, 500, 1000, 4000] {
            let region = cap.area() / m as f64;
            let collars = collar_layout(&cap, m, DEFAULT_COLLAR_DENSITY).unwrap();
            assert_eq!(collars.iter().map(|c| c.count).sum::<usize>() + 1, m);
            for c in &collars {
                assert!(
                    (c.area() - c.count as f64 * region).abs() < 1e-10,
                    "m = {m}"
                );
            }
        }
    }

    #[test]
    fn minimum_separation() {
        let cap = reference_cap();
        for m in [2, 5, 17, 100, 500, 1000] {
            let pts = generate_cap_points(&cap, m).unwrap();
            let bound = 0.3 * (cap.area() / m as f64).sqrt();
            let mut min = f64::INFINITY;
            for i in 0..pts.len() {
                for j in 0..i {
                    min = min.min(geodesic_distance(&pts[i], &pts[j]));
                }
            }
            assert!(min >= bound, "m = {m}: {min} < {bound}");
        }
    }

    #[test]
    fn tiny_cap_is_rejected() {
        let cap = SphericalCap::north(1e-9).unwrap();
        assert!(generate_cap_points(&cap, 50).is_err());
    }

    #[test]
    fn reference_mesh_norm_magnitude() {
        let cap = reference_cap();
        let set = PointSet::new(generate_cap_points(&cap, 500).unwrap(), vec![]);
        let h = mesh_norm_interior(&set, &cap, MeshSampling::default()).unwrap();
        assert!(h > 0.0733 / 1.3 && h < 0.0733 * 1.3, "h = {h}");
    }

    #[test]
    fn doubling_shrinks_mesh_norm() {
        let cap = reference_cap();
        let h: Vec<f64> = [500, 1000, 2000]
            .iter()
            .map(|&m| {
                let set = PointSet::new(generate_cap_points(&cap, m).unwrap(), vec![]);
                mesh_norm_interior(&set, &cap, MeshSampling::MIN).unwrap()
            })
            .collect();
        for w in h.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.25..=1.65).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn boundary_points_on_equator() {
        let cap = SphericalCap::north(PI / 2.0).unwrap();
        let pts = generate_boundary_points(&cap, 4).unwrap();
        let expect = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
        ];
        for (p, e) in pts.iter().zip(expect) {
            for (a, b) in p.to_array().iter().zip(e) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boundary_mesh_norms_match_table() {
        let cap = reference_cap();
        for (k, h_expect, tol) in [(100, 0.0272, 5e-5), (800, 0.0034, 5e-5)] {
            let set = PointSet::new(vec![], generate_boundary_points(&cap, k).unwrap());
            assert!(set.boundary.iter().all(|p| cap.on_boundary(p)));
            let h = mesh_norm_boundary(&set, &cap).unwrap();
            assert!((h - h_expect).abs() < tol, "{k}: {h}");
        }
    }

    #[test]
    fn eval_grid_reference() {
        let cap = reference_cap();
        let g = generate_eval_grid(&cap, 67, 200).unwrap();
        assert_eq!(g.len(), 13400);
        let dtheta = (PI / 3.0 / 67.0).to_degrees();
        assert!((dtheta - 0.8955).abs() < 1e-4);
        assert!(((2.0 * PI / 200.0).to_degrees() - 1.8).abs() < 1e-12);
        assert!(g.nodes.iter().all(|n| cap.contains(&n.point)));
        assert!((g.cell_weight - 2.0 * PI * PI / (3.0 * 13400.0)).abs() < 1e-18);
        let area = g.quadrature_area();
        assert!((area - PI).abs() / PI < 1e-3);
    }

    #[test]
    fn eval_grid_single_node() {
        let cap = reference_cap();
        let g = generate_eval_grid(&cap, 1, 1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.nodes[0].theta, PI / 6.0);
        assert_eq!(g.nodes[0].phi, PI);
    }

    #[test]
    fn grid_nodes_avoid_collocation_points() {
        let cap = reference_cap();
        let set = generate_point_set(&cap, 1000, 200).unwrap();
        let g = generate_eval_grid(&cap, 67, 200).unwrap();
        let closest = g
            .nodes
            .iter()
            .flat_map(|n| set.iter().map(move |p| geodesic_distance(&n.point, p)))
            .fold(f64::INFINITY, f64::min);
        assert!(closest > 1e-8);
    }

    #[test]
    fn csv_round_trip() {
        let cap = SphericalCap::new(SurfacePoint::new(0.3, 0.1, 0.8).unwrap(), 0.9).unwrap();
        let set = generate_point_set(&cap, 123, 17).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &set).unwrap();
        let back = read_points_csv(buf.as_slice()).unwrap();
        assert_eq!(back, set);
        assert!(back.validate(&cap).is_ok());
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(read_points_csv("x,y,z,kind\n1,0,0,middle\n".as_bytes()).is_err());
        assert!(read_points_csv("x,y,z,kind\n1,0\n".as_bytes()).is_err());
        assert!(read_points_csv("x,y,z,kind\n2,0,0,interior\n".as_bytes()).is_err());
    }
}
