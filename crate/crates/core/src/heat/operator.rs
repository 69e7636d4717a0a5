//! Heat kernels at a fixed time, in the form every evaluation path consumes.
//!
//! Grid kernels factor over axes, so they are stored as one row per axis:
//! a circulant row on periodic axes (applied with FFTs) and a banded Toeplitz
//! row on open axes. Open axes extend fields by their end values, so each
//! cell also carries the kernel mass lying beyond either end of the grid.
//! Graph kernels are dense.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::gaussian;
use super::spectral::{self, DenseEigen};
use crate::error::{Error, Result};
use crate::space::Axis;
use crate::sum::{self, NeumaierSum};

/// Spectral kernel entries above this (negative) value are clamped to zero.
pub const NEGATIVE_CLAMP: f64 = -1e-12;

/// How a Gaussian is discretised on an open axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discretization {
    /// Sampled at cell centres.
    Point,
    /// Averaged over source and target cells, exact for cellwise-constant fields.
    #[default]
    CellAverage,
}

#[derive(Clone)]
struct Circulant {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// DFT of `row * h`, divided by `n` (real because the row is even).
    spectrum: Vec<f64>,
}

impl std::fmt::Debug for Circulant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Circulant")
            .field("len", &self.spectrum.len())
            .finish()
    }
}

#[derive(Debug, Clone)]
struct Tails {
    left: Vec<f64>,
    right: Vec<f64>,
}

/// Kernel along one grid axis.
#[derive(Debug, Clone)]
pub struct AxisKernel {
    axis: Axis,
    /// Density at index offset `m`: `0..n` on periodic axes, `0..=reach` on open ones.
    row: Vec<f64>,
    /// Offsets beyond `reach` are skipped in pair sums.
    reach: usize,
    circulant: Option<Circulant>,
    tails: Option<Tails>,
}

impl AxisKernel {
    /// Free-space Gaussian on an open axis.
    pub fn gaussian(axis: Axis, t: f64, disc: Discretization) -> Self {
        let n = axis.cells;
        let h = axis.spacing();
        let reach = gaussian::reach(t, h).min(n - 1);
        let row: Vec<f64> = (0..=reach)
            .map(|m| match disc {
                Discretization::Point => gaussian::density(t, m as f64 * h),
                Discretization::CellAverage => gaussian::cell_average(t, h, m as f64 * h),
            })
            .collect();
        let a = axis.origin;
        let b = axis.origin + axis.length;
        let mut left = vec![0.0; n];
        let mut right = vec![0.0; n];
        for i in 0..n {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            match disc {
                Discretization::Point => {
                    let x = axis.coord(i);
                    left[i] = gaussian::upper_mass(t, x - a);
                    right[i] = gaussian::upper_mass(t, b - x);
                }
                Discretization::CellAverage => {
                    left[i] = gaussian::cell_mass_left_of(t, lo, hi, a);
                    right[i] = gaussian::cell_mass_right_of(t, lo, hi, b);
                }
            }
        }
        AxisKernel {
            axis,
            row,
            reach,
            circulant: None,
            tails: Some(Tails { left, right }),
        }
    }

    /// Gaussian summed over `images` periods on each side.
    pub fn image_sum(axis: Axis, t: f64, images: usize) -> Self {
        let h = axis.spacing();
        let row = symmetric_row(axis.cells, |m| {
            gaussian::periodic_density(t, axis.length, images, m as f64 * h)
        });
        Self::periodic(axis, t, row)
    }

    /// Fourier expansion with `modes` real modes.
    pub fn fourier(axis: Axis, t: f64, modes: usize) -> Result<Self> {
        let n = axis.cells;
        let omitted = spectral::first_omitted_frequency(n, modes);
        let lam_o = spectral::fourier_eigenvalue(omitted as i64, axis.length);
        spectral::check_truncation(t, 0.0, Some(lam_o))?;
        let mut row = fourier_row(axis, modes, |lam| (-lam * t).exp());
        for v in row.iter_mut() {
            if *v < 0.0 {
                if *v > NEGATIVE_CLAMP {
                    *v = 0.0;
                } else {
                    return Err(Error::SpectralTruncationInsufficient {
                        t,
                        detail: format!("kernel entry {v:.3e} is negative"),
                    });
                }
            }
        }
        Ok(Self::periodic(axis, t, row))
    }

    /// Row of `Δ p_t` for a Fourier basis (no clamping: the row changes sign).
    pub fn fourier_laplacian(axis: Axis, t: f64, modes: usize) -> Self {
        let row = fourier_row(axis, modes, |lam| -lam * (-lam * t).exp());
        Self::periodic(axis, t, row)
    }

    fn periodic(axis: Axis, t: f64, row: Vec<f64>) -> Self {
        let n = axis.cells;
        let h = axis.spacing();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut buf: Vec<Complex<f64>> = row.iter().map(|v| Complex::new(v * h, 0.0)).collect();
        forward.process(&mut buf);
        let spectrum = buf.iter().map(|c| c.re / n as f64).collect();
        AxisKernel {
            axis,
            row,
            reach: gaussian::reach(t, h).min(n / 2),
            circulant: Some(Circulant {
                forward,
                inverse,
                spectrum,
            }),
            tails: None,
        }
    }

    pub fn axis(&self) -> &Axis {
        &self.axis
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Density between indices `i` and `j`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let m = i.abs_diff(j);
        if self.axis.periodic {
            self.row[m.min(self.axis.cells - m)]
        } else if m <= self.reach {
            self.row[m]
        } else {
            0.0
        }
    }

    /// Kernel mass beyond the lower and upper ends for cell `i` (open axes).
    pub fn tail(&self, i: usize) -> (f64, f64) {
        self.tails
            .as_ref()
            .map_or((0.0, 0.0), |t| (t.left[i], t.right[i]))
    }

    /// Applies the axis kernel to one line of values.
    pub fn apply_line(&self, input: &[f64], out: &mut [f64]) {
        let n = self.axis.cells;
        if let Some(c) = &self.circulant {
            let mut buf: Vec<Complex<f64>> = input.iter().map(|v| Complex::new(*v, 0.0)).collect();
            c.forward.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&c.spectrum) {
                *b *= *s;
            }
            c.inverse.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o = b.re;
            }
            return;
        }
        let h = self.axis.spacing();
        let r = self.reach;
        let tails = self.tails.as_ref().expect("open axis has tails");
        let (first, last) = (input[0], input[n - 1]);
        sum::fill_rows(out, |i| {
            let mut acc = NeumaierSum::new();
            for j in i.saturating_sub(r)..=(i + r).min(n - 1) {
                acc.add(self.row[i.abs_diff(j)] * h * input[j]);
            }
            acc.add(tails.left[i] * first);
            acc.add(tails.right[i] * last);
            acc.value()
        });
    }

    /// Neighbours of `i` within the cutoff, as `(j, density)`; every index
    /// appears once.
    fn neighbours(&self, i: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = self.axis.cells;
        if self.axis.periodic {
            if 2 * self.reach + 1 >= n {
                out.extend((0..n).map(|j| (j, self.entry(i, j))));
            } else {
                let r = self.reach as isize;
                for m in -r..=r {
                    let j = (i as isize + m).rem_euclid(n as isize) as usize;
                    out.push((j, self.row[m.unsigned_abs()]));
                }
            }
        } else {
            let r = self.reach;
            for j in i.saturating_sub(r)..=(i + r).min(n - 1) {
                out.push((j, self.row[i.abs_diff(j)]));
            }
        }
    }

    fn bytes(&self) -> usize {
        8 * (self.row.len() + self.circulant.as_ref().map_or(0, |c| c.spectrum.len()))
            + self.tails.as_ref().map_or(0, |t| 16 * t.left.len())
    }
}

/// Builds an even row of length `n` from offsets `0..=n/2`.
fn symmetric_row(n: usize, f: impl Fn(usize) -> f64 + Sync) -> Vec<f64> {
    let half = sum::map_indices(n / 2 + 1, f);
    (0..n).map(|m| half[m.min(n - m)]).collect()
}

/// `(1/L) Σ_k c(λ_k) cos(2π k m / n)` over the kept frequencies.
fn fourier_row(axis: Axis, modes: usize, coeff: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = axis.cells;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (bin, k) in spectral::fourier_bins(n, modes) {
        buf[bin] = Complex::new(
            coeff(spectral::fourier_eigenvalue(k, axis.length)) / axis.length,
            0.0,
        );
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let half: Vec<f64> = buf[..=n / 2].iter().map(|c| c.re).collect();
    (0..n).map(|m| half[m.min(n - m)]).collect()
}

/// Product of axis kernels on a grid (row-major, last axis fastest).
#[derive(Debug, Clone)]
pub struct SeparableKernel {
    axes: Vec<AxisKernel>,
    strides: Vec<usize>,
    len: usize,
}

impl SeparableKernel {
    pub fn new(axes: Vec<AxisKernel>) -> Self {
        let mut strides = vec![1; axes.len()];
        let mut len = 1;
        for a in (0..axes.len()).rev() {
            strides[a] = len;
            len *= axes[a].axis.cells;
        }
        SeparableKernel { axes, strides, len }
    }

    pub fn axes(&self) -> &[AxisKernel] {
        &self.axes
    }

    /// Same kernel with axis `a` replaced.
    pub fn with_axis(&self, a: usize, k: AxisKernel) -> Self {
        let mut axes = self.axes.clone();
        axes[a] = k;
        SeparableKernel {
            axes,
            strides: self.strides.clone(),
            len: self.len,
        }
    }

    #[inline]
    fn index(&self, i: usize, a: usize) -> usize {
        (i / self.strides[a]) % self.axes[a].axis.cells
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        (0..self.axes.len())
            .map(|a| self.axes[a].entry(self.index(x, a), self.index(y, a)))
            .product()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut data = f.to_vec();
        for a in 0..self.axes.len() {
            data = self.apply_axis(a, &data);
        }
        data
    }

    fn apply_axis(&self, a: usize, data: &[f64]) -> Vec<f64> {
        let ax = &self.axes[a];
        let n = ax.axis.cells;
        let stride = self.strides[a];
        let lines = self.len / n;
        let base = |l: usize| (l / stride) * n * stride + l % stride;
        if lines == 1 {
            let mut out = vec![0.0; n];
            ax.apply_line(data, &mut out);
            return out;
        }
        let results: Vec<Vec<f64>> = sum::map_indices(lines, |l| {
            let b = base(l);
            let line: Vec<f64> = (0..n).map(|k| data[b + k * stride]).collect();
            let mut out = vec![0.0; n];
            ax.apply_line(&line, &mut out);
            out
        });
        let mut out = vec![0.0; self.len];
        for (l, line) in results.iter().enumerate() {
            let b = base(l);
            for (k, v) in line.iter().enumerate() {
                out[b + k * stride] = *v;
            }
        }
        out
    }

    /// `Σ_x w Σ_y p(x, y) w φ(x, y)` over pairs within the cutoff. On a single
    /// open axis, points beyond the ends take the end values, so the exterior
    /// is folded in through `φ(i, 0)` and `φ(i, n - 1)`.
    fn pair_sum<F>(&self, weight: f64, phi: F) -> Result<(f64, u64)>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let open = self.axes.iter().filter(|a| !a.axis.periodic).count();
        if open > 0 && self.axes.len() > 1 {
            return Err(Error::UnsupportedGeometry(
                "pair sums on multi-axis open grids are not supported".into(),
            ));
        }
        let dim = self.axes.len();
        let value = sum::sum_rows(self.len, |x, acc| {
            let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
            for (a, l) in lists.iter_mut().enumerate() {
                self.axes[a].neighbours(self.index(x, a), l);
            }
            let mut row = NeumaierSum::new();
            if dim == 1 {
                for &(y, p) in &lists[0] {
                    row.add(p * weight * phi(x, y));
                }
                if open == 1 {
                    let n = self.len;
                    let (tl, tr) = self.axes[0].tail(x);
                    row.add(tl * (phi(x, 0) + phi(0, x)));
                    row.add(tr * (phi(x, n - 1) + phi(n - 1, x)));
                }
            } else {
                let mut pos = vec![0usize; dim];
                'outer: loop {
                    let mut y = 0;
                    let mut p = 1.0;
                    for a in 0..dim {
                        let (j, d) = lists[a][pos[a]];
                        y += j * self.strides[a];
                        p *= d;
                    }
                    row.add(p * weight * phi(x, y));
                    for a in (0..dim).rev() {
                        pos[a] += 1;
                        if pos[a] < lists[a].len() {
                            continue 'outer;
                        }
                        pos[a] = 0;
                    }
                    break;
                }
            }
            acc.add(weight * row.value());
        });
        Ok((value, self.pair_count()))
    }

    pub fn pair_count(&self) -> u64 {
        let per_point: u64 = self
            .axes
            .iter()
            .map(|a| {
                let n = a.axis.cells as u64;
                (2 * a.reach as u64 + 1).min(n)
            })
            .product();
        per_point * self.len as u64
    }
}

/// Dense kernel from eigenpairs, materialised or streamed row by row.
#[derive(Debug, Clone)]
pub struct DenseKernel {
    t: f64,
    eigen: Arc<DenseEigen>,
    weights: Vec<f64>,
    matrix: Option<Vec<f64>>,
}

impl DenseKernel {
    pub fn new(
        eigen: Arc<DenseEigen>,
        weights: Vec<f64>,
        t: f64,
        materialise: bool,
    ) -> Result<Self> {
        let ground = eigen.eigenvalues.first().copied().unwrap_or(0.0);
        spectral::check_truncation(t, ground, eigen.omitted)?;
        let mut k = DenseKernel {
            t,
            eigen,
            weights,
            matrix: None,
        };
        let n = k.eigen.points;
        let rows: Vec<Vec<f64>> = sum::map_indices(n, |x| k.compute_row(x));
        let mut worst = 0.0f64;
        for r in &rows {
            worst = worst.min(r.iter().copied().fold(0.0, f64::min));
        }
        if worst <= NEGATIVE_CLAMP {
            return Err(Error::SpectralTruncationInsufficient {
                t,
                detail: format!("kernel entry {worst:.3e} is negative"),
            });
        }
        if materialise {
            k.matrix = Some(rows.concat());
        }
        Ok(k)
    }

    fn compute_row(&self, x: usize) -> Vec<f64> {
        let n = self.eigen.points;
        let decay: Vec<f64> = self
            .eigen
            .eigenvalues
            .iter()
            .map(|l| (-l * self.t).exp())
            .collect();
        (0..n)
            .map(|y| {
                // same operand order for (x, y) and (y, x): exactly symmetric
                let (a, b) = (x.min(y), x.max(y));
                let v: f64 = decay
                    .iter()
                    .enumerate()
                    .map(|(i, d)| {
                        let phi = self.eigen.mode(i);
                        d * phi[a] * phi[b]
                    })
                    .sum();
                if v < 0.0 && v > NEGATIVE_CLAMP {
                    0.0
                } else {
                    v
                }
            })
            .collect()
    }

    fn row(&self, x: usize) -> std::borrow::Cow<'_, [f64]> {
        let n = self.eigen.points;
        match &self.matrix {
            Some(m) => std::borrow::Cow::Borrowed(&m[x * n..(x + 1) * n]),
            None => std::borrow::Cow::Owned(self.compute_row(x)),
        }
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        match &self.matrix {
            Some(m) => m[x * self.eigen.points + y],
            None => self.compute_row(x)[y],
        }
    }

    pub fn is_materialised(&self) -> bool {
        self.matrix.is_some()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        sum::fill_rows(&mut out, |x| {
            let row = self.row(x);
            row.iter()
                .zip(f)
                .zip(&self.weights)
                .map(|((p, v), w)| p * v * w)
                .collect::<NeumaierSum>()
                .value()
        });
        out
    }

    fn pair_sum<F>(&self, phi: F) -> (f64, u64)
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let n = self.eigen.points;
        let value = sum::sum_rows(n, |x, acc| {
            let row = self.row(x);
            let mut r = NeumaierSum::new();
            for y in 0..n {
                r.add(row[y] * self.weights[y] * phi(x, y));
            }
            acc.add(self.weights[x] * r.value());
        });
        (value, (n * n) as u64)
    }

    pub fn bytes(&self) -> usize {
        self.matrix.as_ref().map_or(0, |m| 8 * m.len())
    }
}

#[derive(Debug, Clone)]
pub enum KernelOp {
    Separable(SeparableKernel),
    Dense(DenseKernel),
}

impl KernelOp {
    /// Kernel density `p_t(x, y)`.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        match self {
            KernelOp::Separable(k) => k.entry(x, y),
            KernelOp::Dense(k) => k.entry(x, y),
        }
    }

    /// `(h_t f)(x) = Σ_y p_t(x, y) f(y) w(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        match self {
            KernelOp::Separable(k) => k.apply(f),
            KernelOp::Dense(k) => k.apply(f),
        }
    }

    /// Weighted double sum `Σ_{x,y} w(x) p_t(x, y) w(y) φ(x, y)` and the
    /// number of pairs visited. Requires uniform weights on grids.
    pub fn pair_sum<F>(&self, cell_volume: f64, phi: F) -> Result<(f64, u64)>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        match self {
            KernelOp::Separable(k) => k.pair_sum(cell_volume, phi),
            KernelOp::Dense(k) => Ok(k.pair_sum(phi)),
        }
    }

    pub fn pair_count(&self) -> u64 {
        match self {
            KernelOp::Separable(k) => k.pair_count(),
            KernelOp::Dense(k) => (k.eigen.points * k.eigen.points) as u64,
        }
    }

    pub fn bytes(&self) -> usize {
        match self {
            KernelOp::Separable(k) => k.axes.iter().map(AxisKernel::bytes).sum(),
            KernelOp::Dense(k) => k.bytes(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_axis(n: usize) -> Axis {
        Axis {
            origin: 0.0,
            length: 1.0,
            cells: n,
            periodic: true,
        }
    }

    #[test]
    fn circulant_apply_matches_direct() {
        let ax = circle_axis(64);
        let k = AxisKernel::image_sum(ax, 0.003, gaussian::default_images(0.003, 1.0));
        let f: Vec<f64> = (0..64).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut fast = vec![0.0; 64];
        k.apply_line(&f, &mut fast);
        let h = ax.spacing();
        for i in 0..64 {
            let direct: f64 = (0..64).map(|j| k.entry(i, j) * h * f[j]).sum();
            assert!((fast[i] - direct).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn image_sum_and_fourier_rows_agree() {
        let ax = circle_axis(128);
        let t = 0.01;
        let a = AxisKernel::image_sum(ax, t, gaussian::default_images(t, 1.0));
        let b = AxisKernel::fourier(ax, t, 128).unwrap();
        for m in 0..128 {
            let (x, y) = (a.entry(0, m), b.entry(0, m));
            assert!((x - y).abs() <= 1e-10 * x, "{m}: {x} vs {y}");
        }
    }

    #[test]
    fn fourier_truncation_is_reported() {
        let ax = circle_axis(32);
        assert!(matches!(
            AxisKernel::fourier(ax, 1e-5, 32),
            Err(Error::SpectralTruncationInsufficient { .. })
        ));
    }

    #[test]
    fn open_axis_preserves_constants() {
        let ax = Axis {
            origin: -1.0,
            length: 2.0,
            cells: 200,
            periodic: false,
        };
        for disc in [Discretization::Point, Discretization::CellAverage] {
            let k = AxisKernel::gaussian(ax, 0.02, disc);
            let mut out = vec![0.0; 200];
            k.apply_line(&vec![3.0; 200], &mut out);
            // midpoint sampling leaves an O(h²) defect near the ends
            let tol = if disc == Discretization::CellAverage {
                1e-13
            } else {
                1e-4
            };
            assert!(out.iter().all(|v| (v - 3.0).abs() < tol), "{disc:?}");
        }
    }

    #[test]
    fn separable_apply_on_torus_matches_entries() {
        let ax = circle_axis(8);
        let t = 0.05;
        let k1 = AxisKernel::image_sum(ax, t, gaussian::default_images(t, 1.0));
        let k = SeparableKernel::new(vec![k1.clone(), k1]);
        let f: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let out = k.apply(&f);
        let w = ax.spacing() * ax.spacing();
        for x in [0, 9, 63] {
            let direct: f64 = (0..64).map(|y| k.entry(x, y) * w * f[y]).sum();
            assert!((out[x] - direct).abs() < 1e-12);
        }
        // full pair sum of φ = 1 is the total mass
        let (s, _) = k.pair_sum(w, |_, _| 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }
}
