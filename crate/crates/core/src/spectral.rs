//! Real periodic fields on the cube [0, 2π)³ and their Fourier coefficients.
//!
//! Coefficients are normalized so that the constant field 1 has coefficient 1
//! at k = 0, i.e. `f(x) = Σ_k f̂_k e^{ik·x}`. Storage is the full complex
//! lattice in FFT order; real fields keep Hermitian symmetry.
//!
//! Modes with a Nyquist component (|k_j| = n/2) have no conjugate partner on
//! the lattice, so every odd or direction-dependent multiplier (derivatives,
//! Leray projector) sets them to zero.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

pub type C64 = Complex64;
pub const I: C64 = C64::new(0.0, 1.0);

/// Spectral coefficients of one real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    n: usize,
    pub coef: Vec<C64>,
}

/// Three components of a vector field.
pub type Vector = [Field; 3];

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field { n, coef: vec![C64::new(0.0, 0.0); n * n * n] }
    }

    pub fn from_coef(n: usize, coef: Vec<C64>) -> Result<Self> {
        if coef.len() != n * n * n {
            return Err(Error::SizeMismatch { expected: n * n * n, found: coef.len() });
        }
        Ok(Field { n, coef })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self, a: f64) -> Field {
        Field { n: self.n, coef: self.coef.iter().map(|c| c * a).collect() }
    }

    pub fn scale_mut(&mut self, a: f64) {
        self.coef.iter_mut().for_each(|c| *c *= a);
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &Field) {
        debug_assert_eq!(self.n, other.n);
        self.coef.iter_mut().zip(&other.coef).for_each(|(c, o)| *c += o * a);
    }

    pub fn add(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Linear combination Σ a_j f_j of fields on the same grid.
    pub fn combine(terms: &[(f64, &Field)]) -> Field {
        let mut out = Field::zeros(terms[0].1.n);
        for (a, f) in terms {
            out.axpy(*a, f);
        }
        out
    }

    /// Coefficient norm (Σ |f̂_k|²)^{1/2}, equal to the root-mean-square of f.
    pub fn norm(&self) -> f64 {
        self.coef.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> C64 {
        self.coef[0]
    }
}

pub fn vzeros(n: usize) -> Vector {
    [Field::zeros(n), Field::zeros(n), Field::zeros(n)]
}

pub fn vscale(v: &Vector, a: f64) -> Vector {
    [v[0].scale(a), v[1].scale(a), v[2].scale(a)]
}

pub fn vadd(a: &Vector, b: &Vector) -> Vector {
    [a[0].add(&b[0]), a[1].add(&b[1]), a[2].add(&b[2])]
}

pub fn vsub(a: &Vector, b: &Vector) -> Vector {
    [a[0].sub(&b[0]), a[1].sub(&b[1]), a[2].sub(&b[2])]
}

/// Σ a_j v_j for vector fields.
pub fn vcombine(terms: &[(f64, &Vector)]) -> Vector {
    std::array::from_fn(|c| {
        let parts: Vec<(f64, &Field)> = terms.iter().map(|(a, v)| (*a, &v[c])).collect();
        Field::combine(&parts)
    })
}

pub fn vnorm(v: &[Field]) -> f64 {
    v.iter().map(|f| f.norm().powi(2)).sum::<f64>().sqrt()
}

/// Lattice of wavenumbers and FFT plans for an n³ grid.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    dealias_fraction: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kvec: Arc<Vec<[f64; 3]>>,
    nyquist: Arc<Vec<bool>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("dealias_fraction", &self.dealias_fraction)
            .finish()
    }
}

impl Grid {
    /// Grid with the default 2/3 dealiasing rule.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_dealias(n, 2.0 / 3.0)
    }

    pub fn with_dealias(n: usize, dealias_fraction: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and at least 8, got {n}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dealias fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let total = n * n * n;
        let mut kvec = Vec::with_capacity(total);
        let mut nyquist = Vec::with_capacity(total);
        for idx in 0..total {
            let k = Self::index_to_k(n, idx);
            nyquist.push(k.iter().any(|&kj| kj == (n / 2) as i32));
            kvec.push([k[0] as f64, k[1] as f64, k[2] as f64]);
        }
        Ok(Grid {
            n,
            dealias_fraction,
            fft,
            ifft,
            kvec: Arc::new(kvec),
            nyquist: Arc::new(nyquist),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Largest |k_j| kept by [`Grid::dealias`].
    pub fn cutoff(&self) -> i32 {
        (self.dealias_fraction * (self.n / 2) as f64 + 1e-12).floor() as i32
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    fn index_to_k(n: usize, idx: usize) -> [i32; 3] {
        let wrap = |i: usize| if i <= n / 2 { i as i32 } else { i as i32 - n as i32 };
        [wrap(idx / (n * n)), wrap((idx / n) % n), wrap(idx % n)]
    }

    /// Integer wavenumber stored at a flat index.
    pub fn k_of(&self, idx: usize) -> [i32; 3] {
        Self::index_to_k(self.n, idx)
    }

    pub fn kvec(&self, idx: usize) -> [f64; 3] {
        self.kvec[idx]
    }

    /// Flat index of the wavenumber k (components taken modulo n).
    pub fn index_of(&self, k: [i32; 3]) -> usize {
        let n = self.n as i32;
        let w = |kj: i32| kj.rem_euclid(n) as usize;
        (w(k[0]) * self.n + w(k[1])) * self.n + w(k[2])
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        self.nyquist[idx]
    }

    /// True when every |k_j| is within the dealiasing cutoff.
    pub fn in_band(&self, idx: usize) -> bool {
        let c = self.cutoff() as f64;
        self.kvec[idx].iter().all(|kj| kj.abs() <= c)
    }

    pub fn k2(&self, idx: usize) -> f64 {
        let k = self.kvec[idx];
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.n != self.n {
            return Err(Error::GridMismatch { expected: self.n, found: f.n });
        }
        Ok(())
    }

    fn check_vec(&self, v: &[Field]) -> Result<()> {
        v.iter().try_for_each(|f| self.check(f))
    }

    /// Physical coordinates x_j = 2π i_j / n of a flat sample index.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let h = self.spacing();
        [(idx / (n * n)) as f64 * h, ((idx / n) % n) as f64 * h, (idx % n) as f64 * h]
    }

    /// Samples a function on the grid points.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64 + Sync) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|idx| f(self.position(idx))).collect()
    }

    // ---- transforms ----

    fn fft3(&self, buf: &mut [C64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.ifft } else { &self.fft };
        // last axis is contiguous
        plan.process(buf);
        // middle axis: transpose each n×n slab
        buf.par_chunks_mut(n * n).for_each(|slab| {
            transpose_square(slab, n);
            plan.process(slab);
            transpose_square(slab, n);
        });
        // first axis: view as n × n² and transpose
        let nn = n * n;
        let mut tmp = vec![C64::new(0.0, 0.0); buf.len()];
        for i0 in 0..n {
            for r in 0..nn {
                tmp[r * n + i0] = buf[i0 * nn + r];
            }
        }
        tmp.par_chunks_mut(n).for_each(|line| plan.process(line));
        for i0 in 0..n {
            for r in 0..nn {
                buf[i0 * nn + r] = tmp[r * n + i0];
            }
        }
    }

    /// Physical samples (row-major, x₁ slowest) to spectral coefficients.
    pub fn forward(&self, samples: &[f64]) -> Result<Field> {
        if samples.len() != self.len() {
            return Err(Error::SizeMismatch { expected: self.len(), found: samples.len() });
        }
        let mut buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.fft3(&mut buf, false);
        let s = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        Ok(Field { n: self.n, coef: buf })
    }

    /// Spectral coefficients to real physical samples.
    pub fn inverse(&self, f: &Field) -> Result<Vec<f64>> {
        self.check(f)?;
        let mut buf = f.coef.clone();
        self.fft3(&mut buf, true);
        Ok(buf.into_iter().map(|c| c.re).collect())
    }

    pub fn forward_many(&self, samples: &[Vec<f64>]) -> Result<Vec<Field>> {
        samples.par_iter().map(|s| self.forward(s)).collect()
    }

    pub fn inverse_many(&self, fields: &[&Field]) -> Result<Vec<Vec<f64>>> {
        fields.par_iter().map(|f| self.inverse(f)).collect()
    }

    // ---- multipliers ----

    fn map_modes(&self, f: &Field, m: impl Fn(usize, C64) -> C64 + Sync) -> Field {
        let coef = f.coef.par_iter().enumerate().map(|(idx, &c)| m(idx, c)).collect();
        Field { n: self.n, coef }
    }

    fn derivative(&self, f: &Field, axis: usize) -> Field {
        self.map_modes(f, |idx, c| {
            if self.nyquist[idx] {
                C64::new(0.0, 0.0)
            } else {
                I * self.kvec[idx][axis] * c
            }
        })
    }

    /// Multiplier i k.
    pub fn grad(&self, f: &Field) -> Result<Vector> {
        self.check(f)?;
        Ok(std::array::from_fn(|j| self.derivative(f, j)))
    }

    /// Multiplier i k·.
    pub fn div(&self, v: &[Field]) -> Result<Field> {
        self.check_vec(v)?;
        let coef = (0..self.len())
            .into_par_iter()
            .map(|idx| {
                if self.nyquist[idx] {
                    return C64::new(0.0, 0.0);
                }
                let k = self.kvec[idx];
                I * (k[0] * v[0].coef[idx] + k[1] * v[1].coef[idx] + k[2] * v[2].coef[idx])
            })
            .collect();
        Ok(Field { n: self.n, coef })
    }

    /// Multiplier i k×.
    pub fn curl(&self, v: &[Field]) -> Result<Vector> {
        self.check_vec(v)?;
        let d = |f: &Field, j: usize| self.derivative(f, j);
        Ok([
            d(&v[2], 1).sub(&d(&v[1], 2)),
            d(&v[0], 2).sub(&d(&v[2], 0)),
            d(&v[1], 0).sub(&d(&v[0], 1)),
        ])
    }

    /// Multiplier −|k|².
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        Ok(self.map_modes(f, |idx, c| -self.k2(idx) * c))
    }

    pub fn vlaplacian(&self, v: &[Field]) -> Result<Vector> {
        Ok([self.laplacian(&v[0])?, self.laplacian(&v[1])?, self.laplacian(&v[2])?])
    }

    /// Δ⁻¹ with the k = 0 coefficient set to zero.
    pub fn inverse_laplacian(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        Ok(self.map_modes(f, |idx, c| {
            let k2 = self.k2(idx);
            if k2 == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                -c / k2
            }
        }))
    }

    pub fn vinverse_laplacian(&self, v: &[Field]) -> Result<Vector> {
        Ok([
            self.inverse_laplacian(&v[0])?,
            self.inverse_laplacian(&v[1])?,
            self.inverse_laplacian(&v[2])?,
        ])
    }

    /// Projection onto divergence-free fields, Id − k̂⊗k̂ (identity at k = 0).
    pub fn leray(&self, v: &[Field]) -> Result<Vector> {
        self.check_vec(v)?;
        let mut out = vzeros(self.n);
        let cols: Vec<[C64; 3]> = (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let w = [v[0].coef[idx], v[1].coef[idx], v[2].coef[idx]];
                if self.nyquist[idx] {
                    return [C64::new(0.0, 0.0); 3];
                }
                let k2 = self.k2(idx);
                if k2 == 0.0 {
                    return w;
                }
                let k = self.kvec[idx];
                let kw = (k[0] * w[0] + k[1] * w[1] + k[2] * w[2]) / k2;
                [w[0] - k[0] * kw, w[1] - k[1] * kw, w[2] - k[2] * kw]
            })
            .collect();
        for (idx, c) in cols.into_iter().enumerate() {
            for j in 0..3 {
                out[j].coef[idx] = c[j];
            }
        }
        Ok(out)
    }

    fn positive(b: f64) -> Result<()> {
        if b > 0.0 && b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("Helmholtz coefficient must be positive, got {b}")))
        }
    }

    /// (Id − bΔ)⁻¹, multiplier 1/(1 + b|k|²).
    pub fn helmholtz_inverse(&self, f: &Field, b: f64) -> Result<Field> {
        Self::positive(b)?;
        self.check(f)?;
        Ok(self.map_modes(f, |idx, c| c / (1.0 + b * self.k2(idx))))
    }

    /// bΔ/(1 − bΔ), multiplier −b|k|²/(1 + b|k|²).
    pub fn helmholtz_ratio(&self, f: &Field, b: f64) -> Result<Field> {
        Self::positive(b)?;
        self.check(f)?;
        Ok(self.map_modes(f, |idx, c| {
            let bk2 = b * self.k2(idx);
            -bk2 / (1.0 + bk2) * c
        }))
    }

    /// (Id − bΔ), multiplier 1 + b|k|².
    pub fn helmholtz(&self, f: &Field, b: f64) -> Result<Field> {
        self.check(f)?;
        Ok(self.map_modes(f, |idx, c| (1.0 + b * self.k2(idx)) * c))
    }

    pub fn vhelmholtz_inverse(&self, v: &[Field], b: f64) -> Result<Vector> {
        Ok([
            self.helmholtz_inverse(&v[0], b)?,
            self.helmholtz_inverse(&v[1], b)?,
            self.helmholtz_inverse(&v[2], b)?,
        ])
    }

    pub fn vhelmholtz_ratio(&self, v: &[Field], b: f64) -> Result<Vector> {
        Ok([
            self.helmholtz_ratio(&v[0], b)?,
            self.helmholtz_ratio(&v[1], b)?,
            self.helmholtz_ratio(&v[2], b)?,
        ])
    }

    pub fn vhelmholtz(&self, v: &[Field], b: f64) -> Result<Vector> {
        Ok([self.helmholtz(&v[0], b)?, self.helmholtz(&v[1], b)?, self.helmholtz(&v[2], b)?])
    }

    /// Zeroes every coefficient with some |k_j| beyond the cutoff.
    pub fn dealias(&self, f: &Field) -> Field {
        let c = self.cutoff() as f64;
        self.map_modes(f, |idx, v| {
            if self.kvec[idx].iter().any(|kj| kj.abs() > c) {
                C64::new(0.0, 0.0)
            } else {
                v
            }
        })
    }

    pub fn dealias_mut(&self, f: &mut Field) {
        let c = self.cutoff() as f64;
        f.coef.par_iter_mut().enumerate().for_each(|(idx, v)| {
            if self.kvec[idx].iter().any(|kj| kj.abs() > c) {
                *v = C64::new(0.0, 0.0);
            }
        });
    }

    /// Forward transform followed by dealiasing, used for pseudo-spectral products.
    pub fn project(&self, samples: &[f64]) -> Result<Field> {
        let mut f = self.forward(samples)?;
        self.dealias_mut(&mut f);
        Ok(f)
    }

    pub fn project_many(&self, samples: &[Vec<f64>]) -> Result<Vec<Field>> {
        samples.par_iter().map(|s| self.project(s)).collect()
    }

    /// Coefficients of the real part of the represented function,
    /// (f̂_k + conj f̂_{−k})/2.
    pub fn real_part(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let n = self.n as i32;
        Ok(self.map_modes(f, |idx, c| {
            let k = self.k_of(idx);
            let m = self.index_of([(-k[0]).rem_euclid(n), (-k[1]).rem_euclid(n), (-k[2]).rem_euclid(n)]);
            0.5 * (c + f.coef[m].conj())
        }))
    }

    /// Discrete Sobolev norm (Σ_k (1+|k|²)^σ |f̂_k|²)^{1/2} over all given components.
    pub fn hsigma_norm(&self, fields: &[Field], sigma: f64) -> f64 {
        let mut acc = 0.0;
        for f in fields {
            acc += f
                .coef
                .par_iter()
                .enumerate()
                .map(|(idx, c)| (1.0 + self.k2(idx)).powf(sigma) * c.norm_sqr())
                .sum::<f64>();
        }
        acc.sqrt()
    }

    /// Root-mean-square of physical samples; equals the coefficient norm by Parseval.
    pub fn rms(samples: &[f64]) -> f64 {
        (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt()
    }

    /// Physical-space pointwise cross product a × b of sampled vectors.
    pub fn cross_samples(a: &[Vec<f64>], b: &[Vec<f64>]) -> [Vec<f64>; 3] {
        let len = a[0].len();
        let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for p in 0..len {
            out[0][p] = a[1][p] * b[2][p] - a[2][p] * b[1][p];
            out[1][p] = a[2][p] * b[0][p] - a[0][p] * b[2][p];
            out[2][p] = a[0][p] * b[1][p] - a[1][p] * b[0][p];
        }
        out
    }

    /// Dealiased spectral cross product of two spectral vector fields.
    pub fn cross(&self, a: &[Field], b: &[Field]) -> Result<Vector> {
        let pa = self.inverse_many(&[&a[0], &a[1], &a[2]])?;
        let pb = self.inverse_many(&[&b[0], &b[1], &b[2]])?;
        let c = Self::cross_samples(&pa, &pb);
        let f = self.project_many(&c)?;
        let mut it = f.into_iter();
        Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
    }

    /// Dealiased spectral product of two scalar fields.
    pub fn product(&self, a: &Field, b: &Field) -> Result<Field> {
        let p = self.inverse_many(&[a, b])?;
        let s: Vec<f64> = p[0].iter().zip(&p[1]).map(|(x, y)| x * y).collect();
        self.project(&s)
    }
}

fn transpose_square(m: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            m.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_cosine_coefficients() {
        let g = Grid::new(8).unwrap();
        let one = g.forward(&vec![1.0; g.len()]).unwrap();
        assert!((one.coef[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(one.coef[1..].iter().all(|c| c.norm() < 1e-15));

        let cos = g.forward(&g.sample(|x| x[0].cos())).unwrap();
        for (idx, c) in cos.coef.iter().enumerate() {
            let k = g.k_of(idx);
            let expect = if k == [1, 0, 0] || k == [-1, 0, 0] { 0.5 } else { 0.0 };
            assert!((c - C64::new(expect, 0.0)).norm() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn axis_ordering_matches_positions() {
        let g = Grid::new(8).unwrap();
        let f = g.forward(&g.sample(|x| (2.0 * x[1] - x[2]).sin())).unwrap();
        let i = g.index_of([0, 2, -1]);
        assert!((f.coef[i] - C64::new(0.0, -0.5)).norm() < 1e-14);
        assert_eq!(g.k_of(i), [0, 2, -1]);
    }

    #[test]
    fn helmholtz_factors() {
        let g = Grid::new(8).unwrap();
        let f = g.forward(&g.sample(|x| x[2].cos() + 3.0)).unwrap();
        let h = g.helmholtz_inverse(&f, 1.0).unwrap();
        let r = g.helmholtz_ratio(&f, 1.0).unwrap();
        let i1 = g.index_of([0, 0, 1]);
        assert!((h.coef[i1] - f.coef[i1] * 0.5).norm() < 1e-15);
        assert!((r.coef[i1] + f.coef[i1] * 0.5).norm() < 1e-15);
        assert!((h.coef[0] - f.coef[0]).norm() < 1e-15);
        assert!(r.coef[0].norm() < 1e-15);
        assert!(g.helmholtz_inverse(&f, 0.0).is_err());
        assert!(g.helmholtz_ratio(&f, -1.0).is_err());
    }

    #[test]
    fn laplacian_of_single_mode() {
        let g = Grid::new(8).unwrap();
        let f = g.forward(&g.sample(|x| (x[0] + 2.0 * x[1] - x[2]).cos())).unwrap();
        let l = g.laplacian(&f).unwrap();
        for (a, b) in l.coef.iter().zip(&f.coef) {
            assert!((a + b * 6.0).norm() < 1e-14);
        }
    }

    #[test]
    fn dealias_cutoff_at_sixteen() {
        let g = Grid::new(16).unwrap();
        assert_eq!(g.cutoff(), 5);
        let f = g.forward(&g.sample(|x| (5.0 * x[0]).cos() + (6.0 * x[1]).sin())).unwrap();
        let d = g.dealias(&f);
        assert!((d.coef[g.index_of([5, 0, 0])] - C64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(d.coef[g.index_of([0, 6, 0])].norm() == 0.0);
        assert_eq!(g.dealias(&d), d);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(15).is_err());
        assert!(Grid::new(6).is_err());
        let g8 = Grid::new(8).unwrap();
        let f = Field::zeros(10);
        assert!(matches!(g8.laplacian(&f), Err(Error::GridMismatch { .. })));
        assert!(matches!(g8.forward(&[0.0; 7]), Err(Error::SizeMismatch { .. })));
    }
}
