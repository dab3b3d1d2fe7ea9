//! One-dimensional interface metrics along grid lines.

use crate::spectral::Field;

/// Samples of `field` along the grid line through lattice index `at`
/// parallel to `axis`.
pub fn grid_line(field: &Field, axis: usize, at: [usize; 3]) -> Vec<f64> {
    let g = field.grid();
    (0..g.sizes()[axis])
        .map(|i| {
            let mut idx = at;
            idx[axis] = i;
            field.values()[g.ravel(idx)]
        })
        .collect()
}

/// Positions where the periodic samples cross `level`, by linear
/// interpolation. Each entry is `(position, rising)`.
pub fn level_crossings(values: &[f64], spacing: f64, level: f64) -> Vec<(f64, bool)> {
    let n = values.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (values[i], values[(i + 1) % n]);
        if (a - level) * (b - level) < 0.0 || (a == level && b != level) {
            let t = (level - a) / (b - a);
            out.push(((i as f64 + t) * spacing, b > a));
        }
    }
    out
}

/// Distance between the `lo` and `hi` crossings of the transition through
/// the half-level crossing closest to `near` (10%–90% rise width for
/// `lo = 0.1`, `hi = 0.9`).
pub fn rise_width(values: &[f64], spacing: f64, near: f64, lo: f64, hi: f64) -> Option<f64> {
    let n = values.len();
    let period = n as f64 * spacing;
    let dist = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(period);
        d.min(period - d)
    };
    let half = level_crossings(values, spacing, 0.5);
    let &(center, rising) = half.iter().min_by(|a, b| dist(a.0, near).total_cmp(&dist(b.0, near)))?;
    let closest = |level: f64| {
        level_crossings(values, spacing, level)
            .into_iter()
            .filter(|c| c.1 == rising)
            .map(|c| c.0)
            .min_by(|a, b| dist(*a, center).total_cmp(&dist(*b, center)))
    };
    Some(dist(closest(lo)?, closest(hi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::optimal_profile;
    use crate::spectral::Grid;

    #[test]
    fn optimal_profile_width() {
        let eps = 1.0 / 128.0;
        let g = Grid::new(&[1024], &[1.0]).unwrap();
        let f = Field::from_fn(g, |x| optimal_profile(((x[0] - 0.5).abs() - 0.25) / eps));
        let line = grid_line(&f, 0, [0, 0, 0]);
        let w = rise_width(&line, g.spacing(0), 0.25, 0.1, 0.9).unwrap();
        // q(s) = 0.9 at s = -2 atanh(0.8).
        let expected = 4.0 * (0.8f64).atanh() * eps;
        assert!((w - expected).abs() < 1e-2 * expected, "{w} vs {expected}");
        let crossings = level_crossings(&line, g.spacing(0), 0.5);
        assert_eq!(crossings.len(), 2);
        assert!(crossings[0].1 && !crossings[1].1);
    }
}
