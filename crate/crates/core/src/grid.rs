//! Uniform periodic grid on the unit torus [0,1)² and real scalar fields on it.
//!
//! Nodes are cell-centered: node (i₁, i₂) sits at ((i₁+½)h, (i₂+½)h) with
//! h = 1/N. Cell centering keeps prescribed point sources away from nodes
//! (a vertex lattice puts half-integer coordinates exactly on nodes), and
//! costs nothing spectrally: the DFT of cell-centered samples differs from
//! the vertex-centered one only by per-axis unit-modulus phases, which
//! cancel identically for every diagonal-symbol operator.
//!
//! Storage is row-major with the second coordinate outermost:
//! `values[i2 * n + i1] = u(x1_i1, x2_i2)`. Quadrature is the midpoint rule
//! h²·Σ, exact for band-limited integrands.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct GridInner {
    n: usize,
    h: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// −4π²(k₁²+k₂²) per spectral bin, same layout as field values.
    lap_symbol: Vec<f64>,
    /// 2π·k per axis bin, with the Nyquist bin forced to zero (first
    /// derivatives only; the Laplacian keeps its full symbol).
    wave: Vec<f64>,
    /// e^(−iπk/N) per axis bin (signed k): converts the plain DFT of
    /// cell-centered samples into true trigonometric coefficients.
    phase: Vec<Complex<f64>>,
}

/// Shared handle to an N×N periodic grid. Cheap to clone.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.0.n == other.0.n
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({}x{})", self.0.n, self.0.n)
    }
}

/// Signed integer frequency for a DFT bin index.
#[inline]
pub fn bin_to_freq(bin: usize, n: usize) -> i64 {
    if bin < n / 2 {
        bin as i64
    } else {
        bin as i64 - n as i64
    }
}

impl Grid {
    /// Build an N×N grid. N must be even and at least 8.
    pub fn new(n: usize) -> Result<Grid> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidResolution { n });
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let h = 1.0 / n as f64;

        let mut wave = vec![0.0; n];
        let mut phase = vec![Complex::new(1.0, 0.0); n];
        for bin in 0..n {
            let k = bin_to_freq(bin, n);
            wave[bin] = if bin == n / 2 { 0.0 } else { 2.0 * PI * k as f64 };
            let ang = -PI * k as f64 / n as f64;
            phase[bin] = Complex::new(ang.cos(), ang.sin());
        }
        let mut lap_symbol = vec![0.0; n * n];
        for b2 in 0..n {
            let k2 = bin_to_freq(b2, n) as f64;
            for b1 in 0..n {
                let k1 = bin_to_freq(b1, n) as f64;
                lap_symbol[b2 * n + b1] = -4.0 * PI * PI * (k1 * k1 + k2 * k2);
            }
        }
        Ok(Grid(Arc::new(GridInner {
            n,
            h,
            fwd,
            inv,
            lap_symbol,
            wave,
            phase,
        })))
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn h(&self) -> f64 {
        self.0.h
    }

    pub fn num_nodes(&self) -> usize {
        self.0.n * self.0.n
    }

    /// Coordinates of node (i1, i2).
    #[inline]
    pub fn node(&self, i1: usize, i2: usize) -> [f64; 2] {
        [
            (i1 as f64 + 0.5) * self.0.h,
            (i2 as f64 + 0.5) * self.0.h,
        ]
    }

    pub(crate) fn lap_symbol(&self) -> &[f64] {
        &self.0.lap_symbol
    }

    pub(crate) fn wave(&self) -> &[f64] {
        &self.0.wave
    }

    /// In-place 2D FFT over rows then columns.
    fn fft2(&self, data: &mut [Complex<f64>], forward: bool) {
        let n = self.0.n;
        let plan = if forward { &self.0.fwd } else { &self.0.inv };
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        transpose_square(data, n);
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        transpose_square(data, n);
    }
}

fn transpose_square(data: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Real scalar field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: &Grid) -> RealField {
        RealField {
            grid: grid.clone(),
            values: vec![0.0; grid.num_nodes()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> RealField {
        RealField {
            grid: grid.clone(),
            values: vec![c; grid.num_nodes()],
        }
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> f64) -> RealField {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for i2 in 0..n {
            for i1 in 0..n {
                let [x1, x2] = grid.node(i1, i2);
                values.push(f(x1, x2));
            }
        }
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<RealField> {
        if values.len() != grid.num_nodes() {
            return Err(Error::InvalidParameter(format!(
                "value buffer has {} entries, grid needs {}",
                values.len(),
                grid.num_nodes()
            )));
        }
        Ok(RealField {
            grid: grid.clone(),
            values,
        })
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> RealField {
        assert_same_grid(self, other);
        RealField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_in_place(&mut self, other: &RealField) {
        assert_same_grid(self, other);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    /// self ← self + alpha · other
    pub fn axpy(&mut self, alpha: f64, other: &RealField) {
        assert_same_grid(self, other);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        for a in self.values.iter_mut() {
            *a *= alpha;
        }
    }

    pub fn add_scalar_in_place(&mut self, c: f64) {
        for a in self.values.iter_mut() {
            *a += c;
        }
    }

    /// Pointwise clamp from above: self ← min(self, bound).
    pub fn clamp_above_in_place(&mut self, bound: &RealField) {
        assert_same_grid(self, bound);
        for (a, b) in self.values.iter_mut().zip(&bound.values) {
            if *a > *b {
                *a = *b;
            }
        }
    }

    /// L² inner product with grid quadrature weights.
    pub fn dot(&self, other: &RealField) -> f64 {
        assert_same_grid(self, other);
        let w = self.grid.h() * self.grid.h();
        w * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
    }

    /// Quadrature of the field: h²·Σ values.
    pub fn integrate(&self) -> f64 {
        let w = self.grid.h() * self.grid.h();
        w * self.values.iter().sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Lᵠ norm for q ≥ 1, or the sup norm for q = ∞.
    pub fn lq_norm(&self, q: f64) -> f64 {
        assert!(q >= 1.0, "lq_norm needs q >= 1, got {q}");
        if q.is_infinite() {
            return self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        }
        let w = self.grid.h() * self.grid.h();
        let s: f64 = self.values.iter().map(|&v| v.abs().powf(q)).sum();
        (w * s).powf(1.0 / q)
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.lq_norm(f64::INFINITY)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// True trigonometric coefficients of the interpolating Fourier sum.
    pub fn spectrum(&self) -> FieldSpectrum {
        let g = &self.grid;
        let n = g.n();
        let mut coef: Vec<Complex<f64>> = self
            .values
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .collect();
        g.fft2(&mut coef, true);
        let scale = 1.0 / (n * n) as f64;
        let phase = &g.0.phase;
        for b2 in 0..n {
            for b1 in 0..n {
                coef[b2 * n + b1] *= phase[b1] * phase[b2] * scale;
            }
        }
        FieldSpectrum {
            grid: g.clone(),
            coef,
        }
    }
}

fn assert_same_grid(a: &RealField, b: &RealField) {
    assert!(
        a.grid == b.grid,
        "fields on different grids: {} vs {}",
        a.grid.n(),
        b.grid.n()
    );
}

impl std::ops::Add for &RealField {
    type Output = RealField;
    fn add(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl std::ops::Sub for &RealField {
    type Output = RealField;
    fn sub(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl std::ops::Mul<f64> for &RealField {
    type Output = RealField;
    fn mul(self, rhs: f64) -> RealField {
        self.map(|v| v * rhs)
    }
}

/// Fourier-side view of a field: true coefficients û_k with
/// u(x) = Σ_k û_k e^(2πik·x), bins in the same layout as node values.
pub struct FieldSpectrum {
    grid: Grid,
    coef: Vec<Complex<f64>>,
}

impl FieldSpectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coef(&self) -> &[Complex<f64>] {
        &self.coef
    }

    pub fn coef_mut(&mut self) -> &mut [Complex<f64>] {
        &mut self.coef
    }

    /// Evaluate the Fourier sum back on the grid nodes.
    pub fn inverse(&self) -> RealField {
        let g = &self.grid;
        let n = g.n();
        let mut buf = self.coef.clone();
        let phase = &g.0.phase;
        for b2 in 0..n {
            for b1 in 0..n {
                buf[b2 * n + b1] *= (phase[b1] * phase[b2]).conj();
            }
        }
        g.fft2(&mut buf, false);
        RealField {
            grid: g.clone(),
            values: buf.iter().map(|c| c.re).collect(),
        }
    }

    /// Multiply by the Laplacian symbol −4π²|k|².
    pub fn laplacian(&self) -> FieldSpectrum {
        self.apply_real_symbol(|sym, _, _| sym)
    }

    /// Multiply by the squared Laplacian symbol (4π²|k|²)².
    pub fn bilaplacian(&self) -> FieldSpectrum {
        self.apply_real_symbol(|sym, _, _| sym * sym)
    }

    fn apply_real_symbol(&self, f: impl Fn(f64, i64, i64) -> f64) -> FieldSpectrum {
        let g = &self.grid;
        let n = g.n();
        let lap = g.lap_symbol();
        let mut coef = self.coef.clone();
        for b2 in 0..n {
            let k2 = bin_to_freq(b2, n);
            for b1 in 0..n {
                let k1 = bin_to_freq(b1, n);
                let idx = b2 * n + b1;
                coef[idx] *= f(lap[idx], k1, k2);
            }
        }
        FieldSpectrum {
            grid: g.clone(),
            coef,
        }
    }

    /// Both first derivatives (∂₁u, ∂₂u), Nyquist modes dropped.
    pub fn gradient(&self) -> (FieldSpectrum, FieldSpectrum) {
        let g = &self.grid;
        let n = g.n();
        let wave = g.wave();
        let mut c1 = self.coef.clone();
        let mut c2 = self.coef.clone();
        for b2 in 0..n {
            let w2 = wave[b2];
            for b1 in 0..n {
                let w1 = wave[b1];
                let idx = b2 * n + b1;
                let v = self.coef[idx];
                c1[idx] = Complex::new(-w1 * v.im, w1 * v.re);
                c2[idx] = Complex::new(-w2 * v.im, w2 * v.re);
            }
        }
        (
            FieldSpectrum {
                grid: g.clone(),
                coef: c1,
            },
            FieldSpectrum {
                grid: g.clone(),
                coef: c2,
            },
        )
    }
}

/// Random real field with Fourier support in |k₁|,|k₂| ≤ kmax (k=0 excluded),
/// normalized to unit L² norm. Deterministic given the RNG state.
pub fn band_limited_noise<R: Rng>(grid: &Grid, kmax: usize, rng: &mut R) -> RealField {
    let n = grid.n();
    assert!(kmax >= 1 && kmax < n / 2, "kmax must satisfy 1 <= kmax < N/2");
    let mut field = RealField::zeros(grid);
    // Sum of real cos/sin modes keeps everything manifestly real.
    let mut modes: Vec<(i64, i64, f64, f64)> = Vec::new();
    let km = kmax as i64;
    for k2 in -km..=km {
        for k1 in -km..=km {
            // Half-space to avoid double counting (k and −k give one real mode).
            if (k1, k2) == (0, 0) || k2 < 0 || (k2 == 0 && k1 < 0) {
                continue;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            modes.push((k1, k2, a, b));
        }
    }
    let h = grid.h();
    for i2 in 0..n {
        let x2 = (i2 as f64 + 0.5) * h;
        for i1 in 0..n {
            let x1 = (i1 as f64 + 0.5) * h;
            let mut v = 0.0;
            for &(k1, k2, a, b) in &modes {
                let ang = 2.0 * PI * (k1 as f64 * x1 + k2 as f64 * x2);
                v += a * ang.cos() + b * ang.sin();
            }
            field.values[i2 * n + i1] = v;
        }
    }
    let norm = field.l2_norm();
    if norm > 0.0 {
        field.scale_in_place(1.0 / norm);
    }
    field
}

/// Spectrally interpolate a field onto a finer grid (zero padding).
/// The coarse Nyquist bins are dropped; the smooth fields this gets applied
/// to carry only rounding-level content there.
pub fn refine_to(field: &RealField, fine: &Grid) -> RealField {
    let nc = field.grid().n();
    let nf = fine.n();
    assert!(nf >= nc, "refine_to needs a finer target grid");
    if nf == nc {
        return field.clone();
    }
    let spec = field.spectrum();
    let mut coef = vec![Complex::new(0.0, 0.0); nf * nf];
    for b2 in 0..nc {
        let k2 = bin_to_freq(b2, nc);
        if k2 == -(nc as i64) / 2 {
            continue;
        }
        let f2 = if k2 >= 0 { k2 as usize } else { (k2 + nf as i64) as usize };
        for b1 in 0..nc {
            let k1 = bin_to_freq(b1, nc);
            if k1 == -(nc as i64) / 2 {
                continue;
            }
            let f1 = if k1 >= 0 { k1 as usize } else { (k1 + nf as i64) as usize };
            coef[f2 * nf + f1] = spec.coef[b2 * nc + b1];
        }
    }
    FieldSpectrum {
        grid: fine.clone(),
        coef,
    }
    .inverse()
}
