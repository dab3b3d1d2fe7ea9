//! Double-well potential, optimal profile, and surface-tension / mobility
//! algebra.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

/// Relative tolerance for additivity checks on supplied per-phase values.
pub const ADDITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("need at least 2 phases (got {0})")]
    TooFewPhases(usize),
    #[error("pairwise matrix must be {n}x{n}")]
    Shape { n: usize },
    #[error("entry ({i},{j}) = {value} is negative or not finite")]
    BadEntry { i: usize, j: usize, value: f64 },
    #[error("matrix is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("diagonal entry {0} is not zero")]
    NonZeroDiagonal(usize),
    #[error("triangle inequality fails: σ_{i}{k} > σ_{i}{j} + σ_{j}{k}")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("per-phase values do not add up to pair ({i},{j})")]
    NotAdditive { i: usize, j: usize },
    #[error("decomposition requires exactly 3 phases (got {0})")]
    NeedThreePhases(usize),
    #[error("zero-mobility pattern is contradictory")]
    Inconsistent,
    #[error("general mobility matrix is not positive semi-definite on the partition subspace (min eigenvalue {0:e})")]
    NotSemiDefinite(f64),
    #[error("general mobilities need every pairwise mobility positive")]
    ZeroGeneralMobility,
    #[error("no wetting equilibrium: |σ_SV - σ_LS| > σ_VL")]
    NoWettingEquilibrium,
}

/// `W(s) = ½ s² (1-s)²`.
pub fn well_value(s: f64) -> f64 {
    let t = s * (1.0 - s);
    0.5 * t * t
}

/// `W'(s) = s (1-s) (1-2s)`.
pub fn well_derivative(s: f64) -> f64 {
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

/// `√(2W(s)) = |s (1-s)|`, total on the real line.
pub fn sqrt_two_well(s: f64) -> f64 {
    (s * (1.0 - s)).abs()
}

/// Solution of `q' = -√(2W(q))`, `q(0) = ½`: `q(s) = (1 - tanh(s/2)) / 2`.
pub fn optimal_profile(s: f64) -> f64 {
    0.5 * (1.0 - (0.5 * s).tanh())
}

/// `q'(s) = -¼ sech²(s/2)`.
pub fn optimal_profile_slope(s: f64) -> f64 {
    let c = (0.5 * s).cosh();
    -0.25 / (c * c)
}

/// `c_W = ∫₀¹ √(2W(s)) ds = 1/6`.
pub fn profile_constant() -> f64 {
    1.0 / 6.0
}

fn validate_pairwise(matrix: &DMatrix<f64>) -> Result<usize, ModelError> {
    let n = matrix.nrows();
    if n < 2 {
        return Err(ModelError::TooFewPhases(n));
    }
    if matrix.ncols() != n {
        return Err(ModelError::Shape { n });
    }
    for i in 0..n {
        if matrix[(i, i)] != 0.0 {
            return Err(ModelError::NonZeroDiagonal(i));
        }
        for j in 0..n {
            let v = matrix[(i, j)];
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::BadEntry { i, j, value: v });
            }
            if v != matrix[(j, i)] {
                return Err(ModelError::NotSymmetric { i, j });
            }
        }
    }
    Ok(n)
}

/// Builds a symmetric matrix from its upper triangle in row order, e.g.
/// `[x12, x13, x23]` for three phases.
pub fn symmetric_from_pairs(n: usize, pairs: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    if pairs.len() != n * (n - 1) / 2 {
        return Err(ModelError::Shape { n });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut it = pairs.iter();
    for i in 0..n {
        for j in i + 1..n {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Upper triangle of a symmetric matrix in row order.
pub fn pairs_of(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// How strictly the triangle inequality is enforced on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriangleCheck {
    #[default]
    Strict,
    Skip,
}

/// Pairwise surface tensions with their per-phase additive decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionSet {
    pairwise: DMatrix<f64>,
    per_phase: Vec<f64>,
}

impl TensionSet {
    /// Validates `pairwise` and decomposes it (two or three phases).
    pub fn new(pairwise: DMatrix<f64>, check: TriangleCheck) -> Result<Self, ModelError> {
        let n = validate_pairwise(&pairwise)?;
        if check == TriangleCheck::Strict {
            check_triangle(&pairwise)?;
        }
        let per_phase = match n {
            // Any split works for two phases; the symmetric one is used.
            2 => vec![0.5 * pairwise[(0, 1)]; 2],
            3 => additive_decompose(&pairwise)?.to_vec(),
            _ => return Err(ModelError::NeedThreePhases(n)),
        };
        Ok(Self { pairwise, per_phase })
    }

    /// Three-phase set from `(σ12, σ13, σ23)`.
    pub fn from_pairs3(pairs: [f64; 3]) -> Result<Self, ModelError> {
        Self::new(symmetric_from_pairs(3, &pairs)?, TriangleCheck::Strict)
    }

    pub fn two_phase(sigma: f64) -> Result<Self, ModelError> {
        Self::new(symmetric_from_pairs(2, &[sigma])?, TriangleCheck::Strict)
    }

    /// Any number of phases from explicit per-phase tensions `σ_ij = σ_i + σ_j`.
    pub fn from_per_phase(per_phase: Vec<f64>) -> Result<Self, ModelError> {
        let n = per_phase.len();
        if n < 2 {
            return Err(ModelError::TooFewPhases(n));
        }
        if let Some(i) = per_phase.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ModelError::BadEntry {
                i,
                j: i,
                value: per_phase[i],
            });
        }
        let pairwise = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { per_phase[i] + per_phase[j] });
        Ok(Self { pairwise, per_phase })
    }

    /// Pairwise matrix together with per-phase values that must reproduce it.
    pub fn with_per_phase(pairwise: DMatrix<f64>, per_phase: Vec<f64>) -> Result<Self, ModelError> {
        let n = validate_pairwise(&pairwise)?;
        check_triangle(&pairwise)?;
        if per_phase.len() != n {
            return Err(ModelError::Shape { n });
        }
        for i in 0..n {
            for j in i + 1..n {
                let target = pairwise[(i, j)];
                let sum = per_phase[i] + per_phase[j];
                if (sum - target).abs() > ADDITIVITY_TOL * target.abs().max(f64::MIN_POSITIVE) {
                    return Err(ModelError::NotAdditive { i, j });
                }
            }
        }
        Ok(Self { pairwise, per_phase })
    }

    pub fn n_phases(&self) -> usize {
        self.per_phase.len()
    }

    pub fn pairwise(&self) -> &DMatrix<f64> {
        &self.pairwise
    }

    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pairwise[(i, j)]
    }

    pub fn per_phase(&self) -> &[f64] {
        &self.per_phase
    }
}

fn check_triangle(m: &DMatrix<f64>) -> Result<(), ModelError> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || j == k || i == k {
                    continue;
                }
                let lhs = m[(i, k)];
                let rhs = m[(i, j)] + m[(j, k)];
                if lhs > rhs * (1.0 + 1e-12) {
                    return Err(ModelError::TriangleViolation { i, j, k });
                }
            }
        }
    }
    Ok(())
}

/// `σ_i = ½(σ_ij + σ_ik - σ_jk)` for three phases.
pub fn additive_decompose(t: &DMatrix<f64>) -> Result<[f64; 3], ModelError> {
    if t.nrows() != 3 || t.ncols() != 3 {
        return Err(ModelError::NeedThreePhases(t.nrows()));
    }
    let mut out = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let s = 0.5 * (t[(i, j)] + t[(i, k)] - t[(j, k)]);
        if s < -1e-12 {
            return Err(ModelError::TriangleViolation { i: j, j: i, k });
        }
        out[i] = s.max(0.0);
    }
    Ok(out)
}

/// Outcome of decomposing pairwise mobilities.
#[derive(Debug, Clone, PartialEq)]
pub enum HarmonicDecomposition {
    /// Per-phase `m_i ≥ 0` with `1/m_ij = 1/m_i + 1/m_j`.
    Additive(Vec<f64>),
    NotAdditive,
}

/// Solves `1/m_ij = 1/m_i + 1/m_j` for three phases (`1/0 = +∞`).
///
/// When a phase is forced to zero mobility and the other two are only
/// coupled through one pair, they are split equally.
pub fn harmonic_decompose(m: &DMatrix<f64>) -> Result<HarmonicDecomposition, ModelError> {
    if m.nrows() != 3 || m.ncols() != 3 {
        return Err(ModelError::NeedThreePhases(m.nrows()));
    }
    validate_pairwise(m)?;
    let zeros: Vec<(usize, usize)> = [(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .filter(|&(i, j)| m[(i, j)] == 0.0)
        .collect();
    match zeros.len() {
        0 => {
            let mut per = vec![0.0; 3];
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                let r = 0.5 * (1.0 / m[(i, j)] + 1.0 / m[(i, k)] - 1.0 / m[(j, k)]);
                // r = 0 would need an infinite per-phase mobility.
                if r <= 1e-12 * (1.0 / m[(i, j)]) {
                    return Ok(HarmonicDecomposition::NotAdditive);
                }
                per[i] = 1.0 / r;
            }
            Ok(HarmonicDecomposition::Additive(per))
        }
        1 => Err(ModelError::Inconsistent),
        2 => {
            // The phase shared by both zero pairs is frozen.
            let shared = [0, 1, 2]
                .into_iter()
                .find(|&p| zeros.iter().all(|&(i, j)| i == p || j == p))
                .ok_or(ModelError::Inconsistent)?;
            let (j, k) = ((shared + 1) % 3, (shared + 2) % 3);
            let mut per = vec![0.0; 3];
            per[j] = 2.0 * m[(j, k)];
            per[k] = 2.0 * m[(j, k)];
            Ok(HarmonicDecomposition::Additive(per))
        }
        _ => Ok(HarmonicDecomposition::Additive(vec![0.0; 3])),
    }
}

/// Pairwise mobilities and the metric used by the gradient flow.
#[derive(Debug, Clone, PartialEq)]
pub enum MobilitySet {
    /// Per-phase `m_i ≥ 0`; zeros freeze a phase.
    HarmonicallyAdditive { per_phase: Vec<f64> },
    /// Metric matrix `A_ij = -1/m_ij` (zero diagonal), positive semi-definite
    /// on `(1,…,1)^⊥`.
    General {
        pairwise: DMatrix<f64>,
        metric: DMatrix<f64>,
    },
}

impl MobilitySet {
    pub fn from_per_phase(per_phase: Vec<f64>) -> Result<Self, ModelError> {
        if per_phase.len() < 2 {
            return Err(ModelError::TooFewPhases(per_phase.len()));
        }
        if let Some(i) = per_phase.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ModelError::BadEntry {
                i,
                j: i,
                value: per_phase[i],
            });
        }
        Ok(Self::HarmonicallyAdditive { per_phase })
    }

    pub fn two_phase(m: f64) -> Result<Self, ModelError> {
        Self::from_per_phase(vec![2.0 * m, 2.0 * m])
    }

    /// Classifies a pairwise matrix: harmonically additive when possible
    /// (three phases), general otherwise.
    pub fn from_pairwise(pairwise: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = validate_pairwise(&pairwise)?;
        if n == 2 {
            return Self::two_phase(pairwise[(0, 1)]);
        }
        if n == 3 {
            if let HarmonicDecomposition::Additive(per) = harmonic_decompose(&pairwise)? {
                return Ok(Self::HarmonicallyAdditive { per_phase: per });
            }
        }
        Self::general(pairwise)
    }

    /// `(m12, m13, m23)`.
    pub fn from_pairs3(pairs: [f64; 3]) -> Result<Self, ModelError> {
        Self::from_pairwise(symmetric_from_pairs(3, &pairs)?)
    }

    /// Forces the general (non-additive) metric `A_ij = -1/m_ij`.
    pub fn general(pairwise: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = validate_pairwise(&pairwise)?;
        let mut metric = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    if pairwise[(i, j)] == 0.0 {
                        return Err(ModelError::ZeroGeneralMobility);
                    }
                    metric[(i, j)] = -1.0 / pairwise[(i, j)];
                }
            }
        }
        let min_eig = restricted_eigenvalues(&metric)
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let scale = metric.amax();
        if min_eig < -1e-10 * scale.max(1.0) {
            return Err(ModelError::NotSemiDefinite(min_eig));
        }
        Ok(Self::General { pairwise, metric })
    }

    pub fn n_phases(&self) -> usize {
        match self {
            Self::HarmonicallyAdditive { per_phase } => per_phase.len(),
            Self::General { pairwise, .. } => pairwise.nrows(),
        }
    }

    /// Pairwise mobility `m_ij`.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        match self {
            Self::HarmonicallyAdditive { per_phase } => {
                let (a, b) = (per_phase[i], per_phase[j]);
                if a == 0.0 || b == 0.0 {
                    0.0
                } else {
                    a * b / (a + b)
                }
            }
            Self::General { pairwise, .. } => pairwise[(i, j)],
        }
    }

    pub fn per_phase(&self) -> Option<&[f64]> {
        match self {
            Self::HarmonicallyAdditive { per_phase } => Some(per_phase),
            Self::General { .. } => None,
        }
    }

    pub fn is_frozen(&self, k: usize) -> bool {
        matches!(self, Self::HarmonicallyAdditive { per_phase } if per_phase[k] == 0.0)
    }
}

/// Orthonormal basis of `(1,…,1)^⊥` as columns of an `n × (n-1)` matrix.
pub fn partition_subspace_basis(n: usize) -> DMatrix<f64> {
    // Helmert basis.
    let mut b = DMatrix::zeros(n, n - 1);
    for c in 0..n - 1 {
        let m = (c + 1) as f64;
        let norm = (m * (m + 1.0)).sqrt();
        for r in 0..=c {
            b[(r, c)] = 1.0 / norm;
        }
        b[(c + 1, c)] = -m / norm;
    }
    b
}

/// Eigenvalues of `metric` restricted to `(1,…,1)^⊥`.
pub fn restricted_eigenvalues(metric: &DMatrix<f64>) -> Vec<f64> {
    let b = partition_subspace_basis(metric.nrows());
    let restricted = b.transpose() * metric * &b;
    SymmetricEigen::new(restricted).eigenvalues.iter().cloned().collect()
}

/// Young contact angle `θ = arccos((σ_SV - σ_LS)/σ_VL)`.
pub fn young_angle(sigma_sv: f64, sigma_ls: f64, sigma_vl: f64) -> Result<f64, ModelError> {
    let c = (sigma_sv - sigma_ls) / sigma_vl;
    if !(sigma_vl > 0.0) || !c.is_finite() || c.abs() > 1.0 + 1e-15 {
        return Err(ModelError::NoWettingEquilibrium);
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}
