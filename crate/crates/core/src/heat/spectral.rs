//! Eigenpairs of the heat generator.
//!
//! Flat circles and tori use sampled Fourier modes, which are exactly
//! orthonormal for the grid weights and are applied through FFTs. Weighted
//! graphs use a dense eigendecomposition of the generalised problem
//! `L φ = λ W φ`, with `L` the combinatorial Laplacian and `W` the vertex
//! weights, so that `Δf(x) = w(x)⁻¹ Σ_y w_xy (f(y) - f(x))` has spectrum `-λ`.
//!
//! Dense eigenpairs can be persisted to an `HBK1` sidecar: the four magic
//! bytes followed by little-endian doubles `N, M, λ[0..M), φ` with `φ` stored
//! column-major (`N` rows, `M` columns).

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::space::{Geometry, MetricMeasureSpace};

pub const SIDECAR_MAGIC: &[u8; 4] = b"HBK1";

/// `e^{-λ t}` above this (relative to the ground mode) means the kept modes
/// cannot represent the kernel at time `t`.
pub const TRUNCATION_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralBasis {
    /// Fourier modes on each periodic axis; `modes[a]` real modes kept on axis `a`.
    Fourier {
        modes: Vec<usize>,
    },
    Dense(DenseEigen),
}

/// Dense eigenpairs, orthonormal in `Σ_x φ_i(x) φ_j(x) w(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEigen {
    pub points: usize,
    pub eigenvalues: Vec<f64>,
    /// Column-major `points x eigenvalues.len()`.
    pub modes: Vec<f64>,
    /// Smallest eigenvalue that was dropped, when known.
    pub omitted: Option<f64>,
}

impl SpectralBasis {
    /// Fourier basis with `modes` per axis (default: all grid modes).
    pub fn fourier(space: &MetricMeasureSpace, modes: Option<usize>) -> Result<Self> {
        if !space.is_closed() {
            return Err(Error::UnsupportedGeometry(
                "Fourier eigenpairs need a circle or torus".into(),
            ));
        }
        let mut per_axis = Vec::new();
        for axis in space.axes() {
            let m = modes.unwrap_or(axis.cells);
            if m == 0 || m > axis.cells || (m < axis.cells && m.is_multiple_of(2)) {
                return Err(Error::InvalidArgument(format!(
                    "Fourier mode count must be odd and <= {} or equal to it (got {m})",
                    axis.cells
                )));
            }
            per_axis.push(m);
        }
        Ok(SpectralBasis::Fourier { modes: per_axis })
    }

    /// Eigenpairs of the weighted graph Laplacian, keeping the lowest `modes`.
    pub fn graph(space: &MetricMeasureSpace, modes: Option<usize>) -> Result<Self> {
        Ok(SpectralBasis::Dense(DenseEigen::graph_laplacian(
            space, modes,
        )?))
    }

    pub fn mode_count(&self) -> usize {
        match self {
            SpectralBasis::Fourier { modes } => modes.iter().product(),
            SpectralBasis::Dense(d) => d.eigenvalues.len(),
        }
    }
}

/// Frequencies kept by an `m`-mode Fourier basis on `n` cells, as
/// `(fft bin, integer frequency)` pairs.
pub fn fourier_bins(n: usize, m: usize) -> Vec<(usize, i64)> {
    let mut out = vec![(0, 0)];
    let full = m == n;
    let kmax = if full { (n - 1) / 2 } else { (m - 1) / 2 };
    for k in 1..=kmax {
        out.push((k, k as i64));
        out.push((n - k, -(k as i64)));
    }
    if full && n.is_multiple_of(2) {
        out.push((n / 2, (n / 2) as i64));
    }
    out
}

/// First frequency not represented by an `m`-mode basis on `n` cells.
pub fn first_omitted_frequency(n: usize, m: usize) -> usize {
    if m == n {
        n / 2 + 1
    } else {
        (m - 1) / 2 + 1
    }
}

/// Eigenvalue `(2πk/L)²` of frequency `k` on a circle of length `L`.
#[inline]
pub fn fourier_eigenvalue(k: i64, length: f64) -> f64 {
    let w = 2.0 * PI * k as f64 / length;
    w * w
}

/// Errors when `e^{-λ t}` of the first dropped mode exceeds the tolerance.
pub fn check_truncation(t: f64, ground: f64, omitted: Option<f64>) -> Result<()> {
    if let Some(lo) = omitted {
        let ratio = (-(lo - ground) * t).exp();
        if ratio > TRUNCATION_TOLERANCE {
            return Err(Error::SpectralTruncationInsufficient {
                t,
                detail: format!("first dropped mode has e^(-λt) ratio {ratio:.3e}"),
            });
        }
    }
    Ok(())
}

impl DenseEigen {
    pub fn graph_laplacian(space: &MetricMeasureSpace, modes: Option<usize>) -> Result<Self> {
        let adjacency = space.adjacency().ok_or_else(|| {
            Error::UnsupportedGeometry("graph Laplacian needs a weighted graph".into())
        })?;
        let n = space.len();
        let m = modes.unwrap_or(n);
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "mode count {m} not in 1..={n}"
            )));
        }
        let w = space.weights();
        let inv_sqrt: Vec<f64> = w.iter().map(|x| 1.0 / x.sqrt()).collect();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for (x, nbrs) in adjacency.iter().enumerate() {
            for &(y, c) in nbrs {
                s[(x, y)] -= c * inv_sqrt[x] * inv_sqrt[y];
                s[(x, x)] += c * inv_sqrt[x] * inv_sqrt[x];
            }
        }
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut eigenvalues = Vec::with_capacity(m);
        let mut data = Vec::with_capacity(n * m);
        for &c in order.iter().take(m) {
            eigenvalues.push(eig.eigenvalues[c].max(0.0));
            let col = eig.eigenvectors.column(c);
            // fix the sign so the largest entry is positive
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            data.extend(col.iter().zip(&inv_sqrt).map(|(v, s)| sign * v * s));
        }
        let omitted = order.get(m).map(|&c| eig.eigenvalues[c]);
        Ok(DenseEigen {
            points: n,
            eigenvalues,
            modes: data,
            omitted,
        })
    }

    /// Materialises the real Fourier basis of a circle grid.
    pub fn from_fourier(space: &MetricMeasureSpace, modes: Option<usize>) -> Result<Self> {
        let (length, n) = match space.geometry() {
            Geometry::CircleGrid { length, cells } => (*length, *cells),
            _ => {
                return Err(Error::UnsupportedGeometry(
                    "dense Fourier basis is built for circles only".into(),
                ))
            }
        };
        let m = modes.unwrap_or(n);
        let bins = fourier_bins(n, m);
        let mut eigenvalues = Vec::with_capacity(m);
        let mut data = Vec::with_capacity(n * m);
        let x = |i: usize| i as f64 * length / n as f64;
        let mut push = |lam: f64, f: &dyn Fn(f64) -> f64| {
            eigenvalues.push(lam);
            data.extend((0..n).map(|i| f(x(i))));
        };
        let c0 = 1.0 / length.sqrt();
        let c1 = (2.0 / length).sqrt();
        for &(_, k) in &bins {
            let lam = fourier_eigenvalue(k, length);
            let w = 2.0 * PI * k as f64 / length;
            if k == 0 {
                push(lam, &|_| c0);
            } else if k > 0 && n % 2 == 0 && k as usize == n / 2 {
                push(lam, &|x| c0 * (w * x).cos());
            } else if k > 0 {
                push(lam, &|x| c1 * (w * x).cos());
            } else {
                push(lam, &|x| c1 * (-w * x).sin());
            }
        }
        let omitted = Some(fourier_eigenvalue(
            first_omitted_frequency(n, m) as i64,
            length,
        ));
        Ok(DenseEigen {
            points: n,
            eigenvalues,
            modes: data,
            omitted,
        })
    }

    #[inline]
    pub fn mode(&self, i: usize) -> &[f64] {
        &self.modes[i * self.points..(i + 1) * self.points]
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(4 + 8 * (2 + self.eigenvalues.len() + self.modes.len()));
        buf.extend_from_slice(SIDECAR_MAGIC);
        buf.extend_from_slice(&(self.points as f64).to_le_bytes());
        buf.extend_from_slice(&(self.eigenvalues.len() as f64).to_le_bytes());
        for v in self.eigenvalues.iter().chain(&self.modes) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn read_sidecar(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::decode_sidecar(&bytes)
    }

    pub fn decode_sidecar(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..4] != SIDECAR_MAGIC {
            return Err(Error::Sidecar("missing HBK1 magic".into()));
        }
        let body = &bytes[4..];
        if !body.len().is_multiple_of(8) {
            return Err(Error::Sidecar(
                "payload is not a whole number of doubles".into(),
            ));
        }
        let doubles: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let as_count = |v: f64, what: &str| -> Result<usize> {
            if v.fract() == 0.0 && (1.0..1e9).contains(&v) {
                Ok(v as usize)
            } else {
                Err(Error::Sidecar(format!(
                    "{what} = {v} is not a positive integer"
                )))
            }
        };
        let n = as_count(doubles[0], "N")?;
        let m = as_count(doubles[1], "M")?;
        if m > n {
            return Err(Error::Sidecar(format!("M = {m} exceeds N = {n}")));
        }
        if doubles.len() != 2 + m + n * m {
            return Err(Error::Sidecar(format!(
                "expected {} doubles, found {}",
                2 + m + n * m,
                doubles.len()
            )));
        }
        let eigenvalues = doubles[2..2 + m].to_vec();
        let modes = doubles[2 + m..].to_vec();
        // conservative stand-in for the unknown first dropped eigenvalue
        let omitted = if m < n {
            eigenvalues.last().copied()
        } else {
            None
        };
        Ok(DenseEigen {
            points: n,
            eigenvalues,
            modes,
            omitted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::build(Geometry::CircleGrid {
            length: 1.0,
            cells: n,
        })
        .unwrap()
    }

    fn gram(space: &MetricMeasureSpace, d: &DenseEigen) -> f64 {
        let m = d.eigenvalues.len();
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                let ip: f64 = d
                    .mode(a)
                    .iter()
                    .zip(d.mode(b))
                    .zip(space.weights())
                    .map(|((x, y), w)| x * y * w)
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    #[test]
    fn fourier_bins_count_modes() {
        assert_eq!(fourier_bins(8, 8).len(), 8);
        assert_eq!(fourier_bins(9, 9).len(), 9);
        assert_eq!(fourier_bins(16, 5).len(), 5);
        assert_eq!(first_omitted_frequency(8, 8), 5);
        assert_eq!(first_omitted_frequency(16, 5), 3);
    }

    #[test]
    fn dense_fourier_is_orthonormal() {
        let s = circle(16);
        let d = DenseEigen::from_fourier(&s, None).unwrap();
        assert_eq!(d.eigenvalues.len(), 16);
        assert!(gram(&s, &d) < 1e-13);
    }

    #[test]
    fn graph_eigenpairs_are_weighted_orthonormal() {
        let edges = vec![
            (0, 1, 1.0),
            (1, 2, 2.0),
            (2, 3, 0.5),
            (3, 0, 1.0),
            (0, 2, 0.3),
        ];
        let s = MetricMeasureSpace::build(Geometry::WeightedGraph {
            edges,
            vertex_weights: vec![1.0, 0.5, 2.0, 1.5],
        })
        .unwrap();
        let d = DenseEigen::graph_laplacian(&s, None).unwrap();
        assert!(gram(&s, &d) < 1e-12);
        assert!(d.eigenvalues[0].abs() < 1e-12);
        assert!(d.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        // ground mode is constant 1/sqrt(total mass)
        let c = 1.0 / s.total_mass().sqrt();
        assert!(d.mode(0).iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn sidecar_round_trip_and_rejects() {
        let s = circle(8);
        let d = DenseEigen::from_fourier(&s, Some(5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("circle.hbk");
        d.write_sidecar(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"HBK1");
        assert_eq!(f64::from_le_bytes(bytes[4..12].try_into().unwrap()), 8.0);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 5.0);
        let back = DenseEigen::read_sidecar(&p).unwrap();
        assert_eq!(back.eigenvalues, d.eigenvalues);
        assert_eq!(back.modes, d.modes);
        assert!(DenseEigen::decode_sidecar(b"HBK2aaaaaaaaaaaaaaaa").is_err());
        assert!(DenseEigen::decode_sidecar(&bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn truncation_check() {
        assert!(check_truncation(1e-2, 0.0, Some(1e4)).is_ok());
        assert!(matches!(
            check_truncation(1e-4, 0.0, Some(1e4)),
            Err(Error::SpectralTruncationInsufficient { .. })
        ));
        assert!(check_truncation(1e-9, 0.0, None).is_ok());
    }
}
