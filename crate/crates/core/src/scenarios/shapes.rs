//! Signed-distance shapes on the periodic box.
//!
//! Distances are negative inside a region. Periodicity is handled by the
//! minimum-image convention along every axis.

use crate::spectral::Grid;

/// Wraps `d` into `[-l/2, l/2)`.
pub fn min_image(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Height field `y = h(x)`, piecewise linear through `points` and periodic
/// in `x` with the box length.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightProfile {
    points: Vec<[f64; 2]>,
}

impl HeightProfile {
    /// `points` must have strictly increasing `x`.
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self, String> {
        if points.is_empty() {
            return Err("height profile needs at least one point".into());
        }
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err("height profile points must be finite".into());
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err("height profile x coordinates must increase".into());
        }
        Ok(Self { points })
    }

    pub fn flat(height: f64) -> Self {
        Self {
            points: vec![[0.0, height]],
        }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn max_height(&self) -> f64 {
        self.points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Segments of the periodic polyline, replicated one period either side.
    fn segments(&self, period: f64) -> Vec<([f64; 2], [f64; 2])> {
        let n = self.points.len();
        let mut segs = Vec::with_capacity(3 * n);
        for shift in [-period, 0.0, period] {
            for i in 0..n {
                let a = self.points[i];
                let (b, wrap) = if i + 1 < n {
                    (self.points[i + 1], 0.0)
                } else {
                    (self.points[0], period)
                };
                segs.push(([a[0] + shift, a[1]], [b[0] + shift + wrap, b[1]]));
            }
        }
        segs
    }

    /// `h(x)` with periodic linear interpolation.
    pub fn height(&self, x: f64, period: f64) -> f64 {
        let x = x.rem_euclid(period);
        for (a, b) in self.segments(period) {
            if a[0] <= x && x <= b[0] && b[0] > a[0] {
                let t = (x - a[0]) / (b[0] - a[0]);
                return a[1] + t * (b[1] - a[1]);
            }
        }
        self.points[0][1]
    }

    /// Signed distance to the curve, positive above it.
    pub fn signed_distance(&self, x: f64, y: f64, period: f64) -> f64 {
        let x = x.rem_euclid(period);
        let mut best = f64::INFINITY;
        for (a, b) in self.segments(period) {
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let t = (((x - a[0]) * dx + (y - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            let (px, py) = (a[0] + t * dx, a[1] + t * dy);
            best = best.min(((x - px).powi(2) + (y - py).powi(2)).sqrt());
        }
        if y >= self.height(x, period) {
            best
        } else {
            -best
        }
    }
}

/// A region of the box described by its signed distance.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Ball (interval in 1D, disk in 2D).
    Disk {
        center: [f64; 3],
        radius: f64,
    },
    /// Axis-aligned box `lo ≤ x < hi` (periodic).
    Rect {
        lo: [f64; 3],
        hi: [f64; 3],
    },
    /// `lo ≤ x_axis < hi`, unbounded along the other axes.
    Slab {
        axis: usize,
        lo: f64,
        hi: f64,
    },
    /// 2D solid layer `floor ≤ y ≤ h(x)`.
    Substrate {
        floor: f64,
        profile: HeightProfile,
    },
    Union(Vec<Region>),
}

impl Region {
    pub fn signed_distance(&self, grid: &Grid, x: [f64; 3]) -> f64 {
        let dim = grid.dim();
        let l = grid.lengths();
        match self {
            Region::Disk { center, radius } => {
                let mut r2 = 0.0;
                for a in 0..dim {
                    r2 += min_image(x[a] - center[a], l[a]).powi(2);
                }
                r2.sqrt() - radius
            }
            Region::Rect { lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for a in 0..dim {
                    let c = 0.5 * (lo[a] + hi[a]);
                    let e = 0.5 * (hi[a] - lo[a]);
                    let p = min_image(x[a] - c, l[a]).abs() - e;
                    outside += p.max(0.0).powi(2);
                    inside = inside.max(p);
                }
                outside.sqrt() + inside.min(0.0)
            }
            Region::Slab { axis, lo, hi } => {
                let c = 0.5 * (lo + hi);
                min_image(x[*axis] - c, l[*axis]).abs() - 0.5 * (hi - lo)
            }
            Region::Substrate { floor, profile } => {
                let ly = l[1];
                let mid = 0.5 * (floor + profile.max_height());
                let y = mid + min_image(x[1] - mid, ly);
                profile.signed_distance(x[0], y, l[0]).max(floor - y)
            }
            Region::Union(parts) => parts
                .iter()
                .map(|p| p.signed_distance(grid, x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn check(&self, grid: &Grid) -> Result<(), String> {
        let dim = grid.dim();
        match self {
            Region::Disk { radius, .. } if !(*radius > 0.0) => Err("disk radius must be positive".into()),
            Region::Rect { lo, hi } if (0..dim).any(|a| !(hi[a] > lo[a])) => {
                Err("rect needs hi > lo on every axis".into())
            }
            Region::Slab { axis, lo, hi } => {
                if *axis >= dim {
                    Err(format!("slab axis {axis} exceeds dimension {dim}"))
                } else if !(hi > lo) {
                    Err("slab needs hi > lo".into())
                } else {
                    Ok(())
                }
            }
            Region::Substrate { floor, profile } => {
                if dim != 2 {
                    Err("substrate shapes are 2D only".into())
                } else if profile.points().iter().any(|p| p[1] <= *floor) {
                    Err("substrate surface must lie above its floor".into())
                } else {
                    Ok(())
                }
            }
            Region::Union(parts) => parts.iter().try_for_each(|p| p.check(grid)),
            _ => Ok(()),
        }
    }
}

/// Initial region of one phase.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Region(Region),
    /// Everything not claimed by another phase.
    Rest,
}

impl ShapeSpec {
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        Self::Region(Region::Disk {
            center: [center[0], center[1], 0.0],
            radius,
        })
    }

    pub fn half_plane_substrate(floor: f64, profile: HeightProfile) -> Self {
        Self::Region(Region::Substrate { floor, profile })
    }

    /// The droplet disk; list the substrate before it so the overlap goes
    /// to the solid.
    pub fn droplet_on_substrate(center: [f64; 2], radius: f64) -> Self {
        Self::circle(center, radius)
    }

    /// Substrate with a rectangular seed pillar of half-width `half_width`
    /// rising to `top` under the droplet.
    pub fn wire_seed(floor: f64, surface: f64, center_x: f64, half_width: f64, top: f64) -> Self {
        let mut parts = vec![Region::Substrate {
            floor,
            profile: HeightProfile::flat(surface),
        }];
        if top > surface && half_width > 0.0 {
            parts.push(Region::Rect {
                lo: [center_x - half_width, floor, 0.0],
                hi: [center_x + half_width, top, 0.0],
            });
        }
        Self::Region(Region::Union(parts))
    }

    pub(crate) fn check(&self, grid: &Grid) -> Result<(), String> {
        match self {
            Self::Region(r) => r.check(grid),
            Self::Rest => Ok(()),
        }
    }
}

/// Signed distances of every phase at one point. Earlier phases take
/// priority where regions overlap; `Rest` is the complement of the others.
pub(crate) fn phase_distances(grid: &Grid, shapes: &[ShapeSpec], x: [f64; 3], out: &mut [f64]) {
    let mut claimed = f64::INFINITY;
    for (k, s) in shapes.iter().enumerate() {
        if let ShapeSpec::Region(r) = s {
            // Region minus the union of earlier regions.
            let raw = r.signed_distance(grid, x);
            out[k] = raw.max(-claimed);
            claimed = claimed.min(raw);
        }
    }
    for (k, s) in shapes.iter().enumerate() {
        if matches!(s, ShapeSpec::Rest) {
            out[k] = -claimed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_image_wraps() {
        assert!((min_image(0.9, 1.0) + 0.1).abs() < 1e-12);
        assert_eq!(min_image(-0.3, 1.0), -0.3);
    }

    #[test]
    fn disk_distance_is_periodic() {
        let g = Grid::cube(2, 8, 1.0).unwrap();
        let d = Region::Disk {
            center: [0.05, 0.5, 0.0],
            radius: 0.1,
        };
        assert!((d.signed_distance(&g, [0.95, 0.5, 0.0]) - 0.0).abs() < 1e-12);
        assert!((d.signed_distance(&g, [0.05, 0.5, 0.0]) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn rect_distance() {
        let g = Grid::cube(2, 8, 1.0).unwrap();
        let r = Region::Rect {
            lo: [0.25, 0.25, 0.0],
            hi: [0.75, 0.75, 0.0],
        };
        assert!((r.signed_distance(&g, [0.5, 0.5, 0.0]) + 0.25).abs() < 1e-12);
        assert!((r.signed_distance(&g, [0.5, 0.8, 0.0]) - 0.05).abs() < 1e-12);
        assert!((r.signed_distance(&g, [0.8, 0.8, 0.0]) - 0.05 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn profile_distance_and_height() {
        let p = HeightProfile::new(vec![[0.0, 0.2], [0.5, 0.4]]).unwrap();
        assert!((p.height(0.25, 1.0) - 0.3).abs() < 1e-12);
        assert!((p.height(0.75, 1.0) - 0.3).abs() < 1e-12);
        let flat = HeightProfile::flat(0.3);
        assert!((flat.signed_distance(0.4, 0.5, 1.0) - 0.2).abs() < 1e-12);
        assert!((flat.signed_distance(0.4, 0.1, 1.0) + 0.2).abs() < 1e-12);
        assert!(HeightProfile::new(vec![[0.5, 0.1], [0.2, 0.1]]).is_err());
    }

    #[test]
    fn priority_and_rest() {
        let g = Grid::cube(2, 8, 1.0).unwrap();
        let shapes = [
            ShapeSpec::circle([0.5, 0.5], 0.2),
            ShapeSpec::circle([0.7, 0.5], 0.2),
            ShapeSpec::Rest,
        ];
        let mut d = [0.0; 3];
        phase_distances(&g, &shapes, [0.6, 0.5, 0.0], &mut d);
        // Inside both disks: phase 0 owns the point.
        assert!(d[0] < 0.0 && d[1] > 0.0 && d[2] > 0.0);
        phase_distances(&g, &shapes, [0.85, 0.5, 0.0], &mut d);
        assert!(d[0] > 0.0 && d[1] < 0.0 && d[2] > 0.0);
        phase_distances(&g, &shapes, [0.1, 0.1, 0.0], &mut d);
        assert!(d[0] > 0.0 && d[1] > 0.0 && d[2] < 0.0);
        // On the boundary between the two disks the rest stays far away.
        phase_distances(&g, &shapes, [0.7, 0.5, 0.0], &mut d);
        assert!((d[2] - 0.2).abs() < 1e-12);
    }
}
