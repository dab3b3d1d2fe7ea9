//! Periodic grids, discrete Fourier transforms and the diagonal inversion of
//! the semi-implicit operator `Id - c (Δ - α/ε² Id)`.
//!
//! Transforms use the synthesis convention `u(x) = Σ_k c_k exp(2iπ ξ_k·x)` with
//! `ξ_k = (k_1/L_1, …, k_d/L_d)`: the forward transform carries the `1/ΠK`
//! factor, the inverse is an unscaled sum. Storage is row-major with the last
//! axis contiguous and frequencies in standard DFT order (negative frequencies
//! in the upper half, the Nyquist index `K/2` mapped to `-K/2`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use thiserror::Error;

use crate::par;

/// Smallest accepted sample count per axis.
pub const MIN_SAMPLES: usize = 4;

/// Imaginary residue above this fraction of the signal scale is an error.
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid dimension must be 1, 2 or 3 (got {0})")]
    BadDimension(usize),
    #[error("axis {axis}: need at least {MIN_SAMPLES} samples (got {size})")]
    TooFewSamples { axis: usize, size: usize },
    #[error("axis {axis}: length must be finite and positive (got {length})")]
    BadLength { axis: usize, length: f64 },
    #[error("grid sample count overflows the address space")]
    TooLarge,
    #[error("field has {got} samples, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field is defined on a different grid")]
    GridMismatch,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("inverse transform left imaginary residue {residue:e} relative to scale {scale:e}")]
    ImaginaryResidueTooLarge { residue: f64, scale: f64 },
}

/// Uniform periodic lattice on `[0, L_1) × … × [0, L_d)`.
///
/// Unused trailing axes are stored with one sample and unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    sizes: [usize; 3],
    lengths: [f64; 3],
}

impl Grid {
    pub fn new(sizes: &[usize], lengths: &[f64]) -> Result<Self, SpectralError> {
        let dim = sizes.len();
        if !(1..=3).contains(&dim) || lengths.len() != dim {
            return Err(SpectralError::BadDimension(dim));
        }
        let mut s = [1usize; 3];
        let mut l = [1.0f64; 3];
        let mut total: usize = 1;
        for axis in 0..dim {
            if sizes[axis] < MIN_SAMPLES {
                return Err(SpectralError::TooFewSamples {
                    axis,
                    size: sizes[axis],
                });
            }
            if !(lengths[axis].is_finite() && lengths[axis] > 0.0) {
                return Err(SpectralError::BadLength {
                    axis,
                    length: lengths[axis],
                });
            }
            total = total.checked_mul(sizes[axis]).ok_or(SpectralError::TooLarge)?;
            s[axis] = sizes[axis];
            l[axis] = lengths[axis];
        }
        // Complex work buffers need 16 bytes per sample.
        if total.checked_mul(16).is_none_or(|b| b > isize::MAX as usize) {
            return Err(SpectralError::TooLarge);
        }
        Ok(Self {
            dim,
            sizes: s,
            lengths: l,
        })
    }

    /// `K^dim` samples on the cube of side `length`.
    pub fn cube(dim: usize, samples: usize, length: f64) -> Result<Self, SpectralError> {
        Self::new(&vec![samples; dim], &vec![length; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    /// `h_α = L_α / K_α`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// `|Q| = Π L_α`.
    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Multi-index of a flat (row-major) index.
    pub fn unravel(&self, mut index: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..3).rev() {
            out[axis] = index % self.sizes[axis];
            index /= self.sizes[axis];
        }
        out
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.sizes[1] + idx[1]) * self.sizes[2] + idx[2]
    }

    /// Sample position `x_k = (k_1 h_1, …)`; unused axes report 0.
    pub fn position(&self, index: usize) -> [f64; 3] {
        let idx = self.unravel(index);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = idx[axis] as f64 * self.spacing(axis);
        }
        x
    }

    /// Signed frequency index of DFT slot `i` on `axis`, in `[-K/2, K/2-1]`.
    pub fn frequency(&self, axis: usize, i: usize) -> i64 {
        let k = self.sizes[axis];
        if 2 * i < k {
            i as i64
        } else {
            i as i64 - k as i64
        }
    }

    /// `|ξ_k|²` for the flat spectral index.
    pub fn xi_squared(&self, index: usize) -> f64 {
        let idx = self.unravel(index);
        (0..self.dim)
            .map(|a| {
                let xi = self.frequency(a, idx[a]) as f64 / self.lengths[a];
                xi * xi
            })
            .sum()
    }
}

/// Real samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f` at every grid position.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64 + Sync + Send) -> Self {
        let mut values = vec![0.0; grid.len()];
        par::for_each_mut(&mut values, |i, v| *v = f(grid.position(i)));
        Self { grid, values }
    }

    /// Like [`Field::from_fn`] but passes lattice indices.
    pub fn from_fn_indexed(grid: Grid, f: impl Fn([usize; 3]) -> f64 + Sync + Send) -> Self {
        let mut values = vec![0.0; grid.len()];
        par::for_each_mut(&mut values, |i, v| *v = f(grid.unravel(i)));
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Rectangle-rule integral `Σ u_k · Π h_α` (spectrally exact for
    /// band-limited periodic data).
    pub fn integral(&self) -> f64 {
        let v = &self.values;
        par::sum(v.len(), |i| v[i]) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i].abs()).max(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Discrete Fourier coefficients of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }
}

/// Cached FFT plans and the Laplacian symbol for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    symbol: Vec<f64>,
    mirror: Vec<usize>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = (0..grid.dim)
            .map(|a| planner.plan_fft(grid.sizes[a], FftDirection::Forward))
            .collect();
        let inverse = (0..grid.dim)
            .map(|a| planner.plan_fft(grid.sizes[a], FftDirection::Inverse))
            .collect();
        let symbol = laplacian_symbol(&grid);
        let mut mirror = vec![0usize; grid.len()];
        par::for_each_mut(&mut mirror, |i, m| {
            let idx = grid.unravel(i);
            let mut neg = [0usize; 3];
            for a in 0..3 {
                neg[a] = (grid.sizes[a] - idx[a]) % grid.sizes[a];
            }
            *m = grid.ravel(neg);
        });
        Self {
            grid,
            forward,
            inverse,
            symbol,
            mirror,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Per-mode Laplacian eigenvalues `-4π²|ξ_k|²`.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn check(&self, grid: &Grid) {
        assert_eq!(*grid, self.grid, "field grid does not match the spectral plan");
    }

    pub fn forward(&self, f: &Field) -> SpectralField {
        self.check(&f.grid);
        let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        let scale = 1.0 / self.grid.len() as f64;
        par::for_each_mut(&mut buf, |_, c| *c *= scale);
        SpectralField {
            grid: self.grid,
            coeffs: buf,
        }
    }

    pub fn inverse(&self, s: &SpectralField) -> Result<Field, SpectralError> {
        self.check(&s.grid);
        let mut buf = s.coeffs.clone();
        self.transform(&mut buf, &self.inverse);
        let values = take_real(&buf)?;
        Ok(Field::from_raw(self.grid, values))
    }

    /// Solves `(Id - c(Δ - α/ε² Id)) v = rhs` by dividing each coefficient by
    /// `1 + c(4π²|ξ_k|² + α/ε²)`.
    pub fn solve_semi_implicit(&self, rhs: &Field, c: f64, alpha: f64, epsilon: f64) -> Field {
        self.check(&rhs.grid);
        if c == 0.0 {
            return rhs.clone();
        }
        let shift = alpha / (epsilon * epsilon);
        let mut s = self.forward(rhs);
        let sym = &self.symbol;
        par::for_each_mut(&mut s.coeffs, |i, z| *z /= 1.0 + c * (shift - sym[i]));
        self.inverse(&s)
            .expect("diagonal real-even multiplier preserves conjugate symmetry")
    }

    /// Two independent semi-implicit solves sharing one complex transform
    /// pair: `rhs_a + i rhs_b` is transformed once and the two real spectra
    /// are separated through conjugate symmetry.
    pub fn solve_semi_implicit_pair(
        &self,
        (rhs_a, c_a): (&Field, f64),
        (rhs_b, c_b): (&Field, f64),
        alpha: f64,
        epsilon: f64,
    ) -> (Field, Field) {
        self.check(&rhs_a.grid);
        self.check(&rhs_b.grid);
        let shift = alpha / (epsilon * epsilon);
        let mut buf: Vec<Complex64> = rhs_a
            .values
            .iter()
            .zip(&rhs_b.values)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        self.transform(&mut buf, &self.forward);
        let scale = 1.0 / self.grid.len() as f64;
        let sym = &self.symbol;
        let mirror = &self.mirror;
        let packed = buf;
        let mut out = vec![Complex64::new(0.0, 0.0); packed.len()];
        par::for_each_mut(&mut out, |i, y| {
            let z = packed[i];
            let zm = packed[mirror[i]].conj();
            let da = 1.0 / (1.0 + c_a * (shift - sym[i]));
            let db = 1.0 / (1.0 + c_b * (shift - sym[i]));
            *y = ((z + zm) * da + (z - zm) * db) * (0.5 * scale);
        });
        self.transform(&mut out, &self.inverse);
        let a = out.iter().map(|z| z.re).collect();
        let b = out.iter().map(|z| z.im).collect();
        (Field::from_raw(self.grid, a), Field::from_raw(self.grid, b))
    }

    /// `∫_Q |∇u|²` evaluated spectrally (`= -∫ u Δu` on the periodic box).
    pub fn dirichlet_energy(&self, u: &Field) -> f64 {
        let s = self.forward(u);
        let sym = &self.symbol;
        let c = &s.coeffs;
        par::sum(c.len(), |i| -sym[i] * c[i].norm_sqr()) * self.grid.volume()
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let mut scratch_lines = Vec::new();
        for axis in 0..self.grid.dim {
            let n = self.grid.sizes[axis];
            let stride: usize = self.grid.sizes[axis + 1..].iter().product();
            let plan = &plans[axis];
            if stride == 1 {
                fft_rows(buf, n, plan);
                continue;
            }
            // Gather the lines along `axis` into contiguous rows, transform, scatter back.
            scratch_lines.resize(buf.len(), Complex64::new(0.0, 0.0));
            {
                let src: &[Complex64] = buf;
                par::for_each_chunk_mut(&mut scratch_lines, n, |line, row| {
                    let outer = line / stride;
                    let inner = line % stride;
                    let base = outer * n * stride + inner;
                    for (j, r) in row.iter_mut().enumerate() {
                        *r = src[base + j * stride];
                    }
                });
            }
            fft_rows(&mut scratch_lines, n, plan);
            let lines: &[Complex64] = &scratch_lines;
            par::for_each_mut(buf, |idx, v| {
                let inner = idx % stride;
                let j = (idx / stride) % n;
                let outer = idx / (stride * n);
                *v = lines[(outer * stride + inner) * n + j];
            });
        }
    }
}

fn fft_rows(buf: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    let rows_per_task = (4096 / n).max(1);
    par::for_each_chunk_mut(buf, rows_per_task * n, |_, chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(chunk, &mut scratch);
    });
}

fn take_real(buf: &[Complex64]) -> Result<Vec<f64>, SpectralError> {
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for z in buf {
        max_re = max_re.max(z.re.abs());
        max_im = max_im.max(z.im.abs());
    }
    let scale = max_re.max(max_im);
    if scale > 0.0 && max_im > IMAGINARY_RESIDUE_LIMIT * scale {
        return Err(SpectralError::ImaginaryResidueTooLarge { residue: max_im, scale });
    }
    Ok(buf.iter().map(|z| z.re).collect())
}

/// Laplacian eigenvalue `-4π²|ξ_k|²` for every spectral index (zero at `k = 0`).
pub fn laplacian_symbol(grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    par::for_each_mut(&mut out, |i, s| *s = -4.0 * PI * PI * grid.xi_squared(i));
    out
}

/// One-off forward transform; build a [`Spectral`] to reuse plans.
pub fn forward_transform(f: &Field) -> SpectralField {
    Spectral::new(f.grid).forward(f)
}

/// One-off inverse transform; build a [`Spectral`] to reuse plans.
pub fn inverse_transform(s: &SpectralField) -> Result<Field, SpectralError> {
    Spectral::new(s.grid).inverse(s)
}

pub fn solve_semi_implicit(rhs: &Field, c: f64, alpha: f64, epsilon: f64) -> Field {
    Spectral::new(rhs.grid).solve_semi_implicit(rhs, c, alpha, epsilon)
}
