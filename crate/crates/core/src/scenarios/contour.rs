//! Periodic marching squares and polyline geometry.

use std::collections::HashMap;

use super::shapes::min_image;
use crate::spectral::{Field, Grid};

/// Connected piece of a level set. Points are unwrapped (consecutive points
/// are nearest periodic images), so a curve winding around the torus ends
/// one period away from where it started.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    /// Net periodic shift between the last and first point (non-zero for
    /// curves that wrap around the box).
    pub winding: [i64; 2],
    /// Box lengths.
    pub period: [f64; 2],
}

impl Polyline {
    /// Arc length including the closing segment.
    pub fn length(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let mut total: f64 = self
            .points
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum();
        if self.closed {
            let (a, b) = (self.points[n - 1], self.points[0]);
            let dx = min_image(b[0] - a[0], self.period[0]);
            let dy = min_image(b[1] - a[1], self.period[1]);
            total += (dx * dx + dy * dy).sqrt();
        }
        total
    }

    /// Absolute enclosed area (shoelace), for closed non-winding curves.
    pub fn area(&self) -> f64 {
        let n = self.points.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.points[i];
            let b = self.points[(i + 1) % n];
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s.abs()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    /// Mean distance from `center`.
    pub fn mean_radius(&self, center: [f64; 2]) -> f64 {
        let n = self.points.len().max(1) as f64;
        self.points.iter().map(|p| dist(*p, center)).sum::<f64>() / n
    }

    /// `(min, max)` distance from `center`.
    pub fn radius_range(&self, center: [f64; 2]) -> (f64, f64) {
        self.points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            let d = dist(*p, center);
            (lo.min(d), hi.max(d))
        })
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Edge of the sample lattice: `(i, j, axis)` joins `(i, j)` to its
/// neighbour along `axis`.
type EdgeId = (usize, usize, u8);

/// Marching-squares contour of a 2D field at `level`, with linear
/// interpolation along grid lines. Saddle cells are resolved with the
/// average of the four corners.
pub fn extract_contour(field: &Field, level: f64) -> Vec<Polyline> {
    let grid = field.grid();
    assert_eq!(grid.dim(), 2, "extract_contour expects a 2D field");
    let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
    let v = field.values();
    let at = |i: usize, j: usize| v[(i % nx) * ny + (j % ny)];

    let mut links: HashMap<EdgeId, Vec<EdgeId>> = HashMap::new();
    let mut link = |a: EdgeId, b: EdgeId| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for i in 0..nx {
        for j in 0..ny {
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let mut code = 0;
            for (b, &val) in c.iter().enumerate() {
                if val > level {
                    code |= 1 << b;
                }
            }
            if code == 0 || code == 15 {
                continue;
            }
            // Cell edges: bottom (i,j)->(i+1,j), right (i+1,j)->(i+1,j+1),
            // top (i,j+1)->(i+1,j+1), left (i,j)->(i,j+1).
            let bottom = (i, j, 0);
            let right = ((i + 1) % nx, j, 1);
            let top = (i, (j + 1) % ny, 0);
            let left = (i, j, 1);
            let center_above = c.iter().sum::<f64>() / 4.0 > level;
            match code {
                1 | 14 => link(left, bottom),
                2 | 13 => link(bottom, right),
                3 | 12 => link(left, right),
                4 | 11 => link(right, top),
                6 | 9 => link(bottom, top),
                7 | 8 => link(left, top),
                5 => {
                    // Corners 0 and 2 above.
                    if center_above {
                        link(left, top);
                        link(bottom, right);
                    } else {
                        link(left, bottom);
                        link(right, top);
                    }
                }
                10 => {
                    // Corners 1 and 3 above.
                    if center_above {
                        link(left, bottom);
                        link(right, top);
                    } else {
                        link(left, top);
                        link(bottom, right);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let point = |e: EdgeId| -> [f64; 2] {
        let (i, j, axis) = e;
        let (hx, hy) = (grid.spacing(0), grid.spacing(1));
        let a = at(i, j);
        let b = if axis == 0 { at(i + 1, j) } else { at(i, j + 1) };
        let t = if b != a { (level - a) / (b - a) } else { 0.5 };
        if axis == 0 {
            [(i as f64 + t) * hx, j as f64 * hy]
        } else {
            [i as f64 * hx, (j as f64 + t) * hy]
        }
    };

    let mut keys: Vec<EdgeId> = links.keys().copied().collect();
    keys.sort_unstable();
    let mut visited: HashMap<EdgeId, bool> = HashMap::new();
    let mut out = Vec::new();
    let [lx, ly] = [grid.lengths()[0], grid.lengths()[1]];
    for &start in &keys {
        if visited.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut prev = start;
        let mut cur = links[&start][0];
        let mut closed = false;
        loop {
            if cur == start {
                closed = true;
                break;
            }
            if visited.contains_key(&cur) {
                break;
            }
            visited.insert(cur, true);
            chain.push(cur);
            let nb = &links[&cur];
            let next = nb.iter().copied().find(|&n| n != prev).unwrap_or(prev);
            // Degree-2 nodes whose both links go to `prev` close a 2-cycle.
            if next == prev && nb.len() < 2 {
                break;
            }
            prev = cur;
            cur = next;
        }
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(chain.len());
        for e in chain {
            let p = point(e);
            match pts.last() {
                None => pts.push(p),
                Some(&q) => pts.push([q[0] + min_image(p[0] - q[0], lx), q[1] + min_image(p[1] - q[1], ly)]),
            }
        }
        let (first, last) = (pts[0], *pts.last().unwrap());
        let gap = [
            last[0] + min_image(first[0] - last[0], lx) - first[0],
            last[1] + min_image(first[1] - last[1], ly) - first[1],
        ];
        let winding = [(gap[0] / lx).round() as i64, (gap[1] / ly).round() as i64];
        out.push(Polyline {
            points: pts,
            closed,
            winding,
            period: [lx, ly],
        });
    }
    out
}

/// Contours of every `axis`-normal slice of a 3D field.
pub fn extract_contour_slices(field: &Field, level: f64, axis: usize) -> Vec<Vec<Polyline>> {
    let grid = field.grid();
    assert_eq!(grid.dim(), 3, "slices expect a 3D field");
    let keep: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let slice_grid = Grid::new(
        &[grid.sizes()[keep[0]], grid.sizes()[keep[1]]],
        &[grid.lengths()[keep[0]], grid.lengths()[keep[1]]],
    )
    .expect("slice of a valid grid");
    (0..grid.sizes()[axis])
        .map(|s| {
            let slice = Field::from_fn_indexed(slice_grid, |idx| {
                let mut full = [0usize; 3];
                full[axis] = s;
                full[keep[0]] = idx[0];
                full[keep[1]] = idx[1];
                field.values()[grid.ravel(full)]
            });
            extract_contour(&slice, level)
        })
        .collect()
}

/// Algebraic least-squares circle fit; returns `(center, radius)`.
pub fn fit_circle(points: &[[f64; 2]]) -> Option<([f64; 2], f64)> {
    if points.len() < 3 {
        return None;
    }
    let c = {
        let n = points.len() as f64;
        let s = points.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
        [s[0] / n, s[1] / n]
    };
    // Minimize Σ (x² + y² + D x + E y + F)² in centred coordinates.
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut r = nalgebra::Vector3::<f64>::zeros();
    for p in points {
        let (x, y) = (p[0] - c[0], p[1] - c[1]);
        let row = nalgebra::Vector3::new(x, y, 1.0);
        m += row * row.transpose();
        r -= row * (x * x + y * y);
    }
    let sol = m.lu().solve(&r)?;
    let (cx, cy) = (-0.5 * sol[0], -0.5 * sol[1]);
    let rad2 = cx * cx + cy * cy - sol[2];
    (rad2 > 0.0).then(|| ([cx + c[0], cy + c[1]], rad2.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn saturated_field_has_no_contour() {
        let g = Grid::cube(2, 16, 1.0).unwrap();
        assert!(extract_contour(&Field::constant(g, 1.0), 0.5).is_empty());
        assert!(extract_contour(&Field::constant(g, 0.0), 0.5).is_empty());
    }

    #[test]
    fn cone_gives_circle() {
        let g = Grid::cube(2, 64, 1.0).unwrap();
        // Linear in the distance, so the interpolated contour is exact up to
        // the chord error.
        let f = Field::from_fn(g, |x| 0.5 + 0.3 - ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt());
        let c = extract_contour(&f, 0.5);
        assert_eq!(c.len(), 1);
        assert!(c[0].closed);
        assert_eq!(c[0].winding, [0, 0]);
        let r = c[0].mean_radius([0.5, 0.5]);
        assert!((r - 0.3).abs() < 1.0 / 64.0);
        assert!((c[0].length() / (2.0 * PI * 0.3) - 1.0).abs() < 0.02);
        assert!((c[0].area() / (PI * 0.09) - 1.0).abs() < 0.01);
    }

    #[test]
    fn wrapping_circle_is_unwrapped() {
        let g = Grid::cube(2, 64, 1.0).unwrap();
        let f = Field::from_fn(g, |x| {
            let dx = min_image(x[0] - 0.02, 1.0);
            let dy = min_image(x[1] - 0.97, 1.0);
            0.5 + 0.2 - (dx * dx + dy * dy).sqrt()
        });
        let c = extract_contour(&f, 0.5);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].winding, [0, 0]);
        let center = c[0].centroid();
        assert!((c[0].mean_radius(center) - 0.2).abs() < 1.0 / 64.0);
    }

    #[test]
    fn band_winds_around_box() {
        let g = Grid::cube(2, 32, 1.0).unwrap();
        let f = Field::from_fn(g, |x| if (x[1] - 0.5).abs() < 0.2 { 1.0 } else { 0.0 });
        let c = extract_contour(&f, 0.5);
        assert_eq!(c.len(), 2);
        for p in &c {
            assert_eq!(p.winding[0].abs(), 1);
            assert!((p.length() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_fit_recovers_arc() {
        let pts: Vec<[f64; 2]> = (0..50)
            .map(|i| {
                let t = 0.2 + 2.0 * i as f64 / 49.0;
                [0.3 + 0.25 * t.cos(), 0.4 + 0.25 * t.sin()]
            })
            .collect();
        let (c, r) = fit_circle(&pts).unwrap();
        assert!((c[0] - 0.3).abs() < 1e-10 && (c[1] - 0.4).abs() < 1e-10);
        assert!((r - 0.25).abs() < 1e-10);
    }
}
