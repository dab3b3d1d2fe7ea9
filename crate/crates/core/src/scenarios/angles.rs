//! Triple-junction and contact-angle measurements on 2D states.

use std::f64::consts::{PI, TAU};

use super::contour::{extract_contour, fit_circle};
use super::ScenarioError;
use crate::solver::PhaseState;
use crate::spectral::Field;

/// Periodic bilinear interpolation of a 2D field.
pub fn sample_bilinear(field: &Field, x: f64, y: f64) -> f64 {
    let g = field.grid();
    let (nx, ny) = (g.sizes()[0], g.sizes()[1]);
    let fx = (x / g.spacing(0)).rem_euclid(nx as f64);
    let fy = (y / g.spacing(1)).rem_euclid(ny as f64);
    let (i0, j0) = (fx.floor() as usize % nx, fy.floor() as usize % ny);
    let (tx, ty) = (fx - fx.floor(), fy - fy.floor());
    let (i1, j1) = ((i0 + 1) % nx, (j0 + 1) % ny);
    let v = field.values();
    let at = |i: usize, j: usize| v[i * ny + j];
    (1.0 - tx) * (1.0 - ty) * at(i0, j0)
        + tx * (1.0 - ty) * at(i1, j0)
        + (1.0 - tx) * ty * at(i0, j1)
        + tx * ty * at(i1, j1)
}

fn check_2d(state: &PhaseState) -> Result<(), ScenarioError> {
    if state.grid().dim() != 2 {
        return Err(ScenarioError::NotTwoDimensional);
    }
    Ok(())
}

/// Candidate triple junctions: local maxima of `min_k u_k` over the three
/// phases with value at least `¼`, at least `separation` apart, strongest
/// first. Positions are refined by a weighted centroid over the 3×3
/// neighbourhood.
pub fn find_junctions(state: &PhaseState, phases: [usize; 3], separation: f64) -> Result<Vec<[f64; 2]>, ScenarioError> {
    check_2d(state)?;
    let g = *state.grid();
    let (nx, ny) = (g.sizes()[0], g.sizes()[1]);
    let (hx, hy) = (g.spacing(0), g.spacing(1));
    let [a, b, c] = phases.map(|k| state.field(k).values());
    let m = |i: usize, j: usize| {
        let idx = (i % nx) * ny + (j % ny);
        a[idx].min(b[idx]).min(c[idx])
    };
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let v = m(i, j);
            if v < 0.25 {
                continue;
            }
            let mut is_max = true;
            for di in [nx - 1, 0, 1] {
                for dj in [ny - 1, 0, 1] {
                    if (di, dj) != (0, 0) && m(i + di, j + dj) > v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                cands.push((v, i, j));
            }
        }
    }
    cands.sort_by(|p, q| q.0.total_cmp(&p.0).then((p.1, p.2).cmp(&(q.1, q.2))));
    let mut found: Vec<[f64; 2]> = Vec::new();
    for (_, i, j) in cands {
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for (di, oi) in [(nx - 1, -1.0), (0, 0.0), (1, 1.0)] {
            for (dj, oj) in [(ny - 1, -1.0), (0, 0.0), (1, 1.0)] {
                let w = (m(i + di, j + dj) - 0.2).max(0.0);
                sw += w;
                sx += w * oi;
                sy += w * oj;
            }
        }
        let p = [(i as f64 + sx / sw) * hx, (j as f64 + sy / sw) * hy];
        let far = found.iter().all(|q| {
            let dx = super::shapes::min_image(p[0] - q[0], g.lengths()[0]);
            let dy = super::shapes::min_image(p[1] - q[1], g.lengths()[1]);
            (dx * dx + dy * dy).sqrt() >= separation
        });
        if far {
            found.push(p);
        }
    }
    Ok(found)
}

/// Strongest triple junction.
pub fn locate_junction(state: &PhaseState, phases: [usize; 3]) -> Result<[f64; 2], ScenarioError> {
    find_junctions(state, phases, 0.0)?
        .first()
        .copied()
        .ok_or(ScenarioError::NoJunction)
}

/// Interface directions and sector angles around one junction.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionAngles {
    pub center: [f64; 2],
    /// `(phase_i, phase_j, direction)` for each interface, direction in
    /// `[0, 2π)`, sorted by direction.
    pub interfaces: Vec<(usize, usize, f64)>,
    /// `(phase, opening angle)` for each sector, same order as the
    /// interfaces (sector `k` lies between interfaces `k` and `k + 1`).
    pub sectors: Vec<(usize, f64)>,
}

impl JunctionAngles {
    pub fn sector_of(&self, phase: usize) -> Option<f64> {
        self.sectors.iter().find(|s| s.0 == phase).map(|s| s.1)
    }
}

/// Angular positions of the dominant-phase transitions on a circle.
fn transitions(state: &PhaseState, phases: [usize; 3], center: [f64; 2], radius: f64) -> Vec<(usize, usize, f64)> {
    const SAMPLES: usize = 1440;
    let values = |t: f64| -> [f64; 3] {
        let (x, y) = (center[0] + radius * t.cos(), center[1] + radius * t.sin());
        phases.map(|k| sample_bilinear(state.field(k), x, y))
    };
    let dominant = |v: &[f64; 3]| (0..3).max_by(|&p, &q| v[p].total_cmp(&v[q])).unwrap();
    let mut out = Vec::new();
    let mut prev_t = 0.0;
    let mut prev = values(0.0);
    for s in 1..=SAMPLES {
        let t = TAU * s as f64 / SAMPLES as f64;
        let cur = values(t);
        let (dp, dc) = (dominant(&prev), dominant(&cur));
        if dp != dc {
            // Root of u_dp - u_dc between the two samples.
            let f0 = prev[dp] - prev[dc];
            let f1 = cur[dp] - cur[dc];
            let w = if f0 != f1 { f0 / (f0 - f1) } else { 0.5 };
            let angle = (prev_t + w * (t - prev_t)).rem_euclid(TAU);
            out.push((phases[dp], phases[dc], angle));
        }
        prev = cur;
        prev_t = t;
    }
    out
}

/// Measures the junction angles. Interface directions are taken from the
/// chord between the crossings at radii `4ε` and `6ε` (so an error in the
/// junction position cancels to first order); sectors are the angular gaps
/// between consecutive directions and sum to `2π` by construction.
pub fn measure_angles(
    state: &PhaseState,
    phases: [usize; 3],
    center: [f64; 2],
) -> Result<JunctionAngles, ScenarioError> {
    let eps = state.epsilon();
    measure_angles_between(state, phases, center, 4.0 * eps, 6.0 * eps)
}

/// [`measure_angles`] with the chord taken between the crossings at radii
/// `inner` and `outer` from the junction.
pub fn measure_angles_between(
    state: &PhaseState,
    phases: [usize; 3],
    center: [f64; 2],
    r_inner: f64,
    r_outer: f64,
) -> Result<JunctionAngles, ScenarioError> {
    check_2d(state)?;
    if !(r_inner > 0.0 && r_outer > r_inner) {
        return Err(ScenarioError::BadSetup("need 0 < inner < outer radius".into()));
    }
    let inner = transitions(state, phases, center, r_inner);
    let outer = transitions(state, phases, center, r_outer);
    if inner.len() != 3 || outer.len() != 3 {
        return Err(ScenarioError::NoJunction);
    }
    let mut interfaces = Vec::with_capacity(3);
    for &(p, q, t4) in &inner {
        let &(_, _, t6) = outer
            .iter()
            .find(|o| (o.0 == p && o.1 == q) || (o.0 == q && o.1 == p))
            .ok_or(ScenarioError::NoJunction)?;
        let p4 = [r_inner * t4.cos(), r_inner * t4.sin()];
        let p6 = [r_outer * t6.cos(), r_outer * t6.sin()];
        let dir = (p6[1] - p4[1]).atan2(p6[0] - p4[0]).rem_euclid(TAU);
        interfaces.push((p.min(q), p.max(q), dir));
    }
    interfaces.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut sectors = Vec::with_capacity(3);
    for k in 0..3 {
        let a0 = interfaces[k].2;
        let a1 = if k + 1 < 3 {
            interfaces[k + 1].2
        } else {
            interfaces[0].2 + TAU
        };
        let mid = 0.5 * (a0 + a1);
        let r = 0.5 * (r_inner + r_outer);
        let (x, y) = (center[0] + r * mid.cos(), center[1] + r * mid.sin());
        let phase = *phases
            .iter()
            .max_by(|&&p, &&q| sample_bilinear(state.field(p), x, y).total_cmp(&sample_bilinear(state.field(q), x, y)))
            .unwrap();
        sectors.push((phase, a1 - a0));
    }
    Ok(JunctionAngles {
        center,
        interfaces,
        sectors,
    })
}

/// Expected sector angles from the Herring balance
/// `σ_12 n_12 + σ_13 n_13 + σ_23 n_23 = 0`: the sector of phase `i` is
/// `π - β_i` where `β_i` is the triangle angle opposite the tension of the
/// interface not touching phase `i`.
pub fn herring_sectors(sigma12: f64, sigma13: f64, sigma23: f64) -> Option<[f64; 3]> {
    let angle = |opp: f64, a: f64, b: f64| {
        let c = (a * a + b * b - opp * opp) / (2.0 * a * b);
        (-1.0..=1.0).contains(&c).then(|| c.acos())
    };
    // Triangle with sides σ_12, σ_13, σ_23; the angle between the tension
    // vectors bounding phase i is π minus the triangle angle between them.
    let b1 = angle(sigma23, sigma12, sigma13)?;
    let b2 = angle(sigma13, sigma12, sigma23)?;
    let b3 = angle(sigma12, sigma13, sigma23)?;
    Some([PI - b1, PI - b2, PI - b3])
}

/// Droplet contact angle on a flat solid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactAngle {
    /// Angle through the liquid, radians.
    pub theta: f64,
    /// Height of the solid surface (half level of the solid).
    pub surface: f64,
    pub center: [f64; 2],
    pub radius: f64,
    /// Max over min distance of the fitted arc points to the fitted center.
    pub circularity: f64,
    pub arc_points: usize,
}

/// Fits a circle to the liquid half-level contour above `surface + 3ε` and
/// intersects it with the solid surface line. The surface height is the
/// median height of the upper solid half-level contour.
pub fn measure_contact_angle(state: &PhaseState, solid: usize, liquid: usize) -> Result<ContactAngle, ScenarioError> {
    check_2d(state)?;
    let eps = state.epsilon();
    let solid_pts: Vec<[f64; 2]> = extract_contour(state.field(solid), 0.5)
        .into_iter()
        .flat_map(|p| p.points)
        .map(|p| [p[0], p[1].rem_euclid(state.grid().lengths()[1])])
        .collect();
    if solid_pts.is_empty() {
        return Err(ScenarioError::NoInterface("solid"));
    }
    let mean_y = solid_pts.iter().map(|p| p[1]).sum::<f64>() / solid_pts.len() as f64;
    let mut upper: Vec<f64> = solid_pts.iter().map(|p| p[1]).filter(|&y| y >= mean_y).collect();
    upper.sort_by(f64::total_cmp);
    let surface = upper[upper.len() / 2];

    let liquid_contours = extract_contour(state.field(liquid), 0.5);
    let contour = liquid_contours
        .iter()
        .max_by_key(|p| p.points.len())
        .ok_or(ScenarioError::NoInterface("liquid"))?;
    let arc: Vec<[f64; 2]> = contour
        .points
        .iter()
        .copied()
        .filter(|p| p[1] > surface + 3.0 * eps)
        .collect();
    let (center, radius) = fit_circle(&arc).ok_or(ScenarioError::NoInterface("liquid arc"))?;
    let (lo, hi) = arc.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
        let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
        (lo.min(d), hi.max(d))
    });
    let cos = ((surface - center[1]) / radius).clamp(-1.0, 1.0);
    Ok(ContactAngle {
        theta: cos.acos(),
        surface,
        center,
        radius,
        circularity: hi / lo,
        arc_points: arc.len(),
    })
}
