//! Heat kernels `p_t(x, y)` and the heat flow `h_t` on a discrete space.
//!
//! Three backends cross-check each other: the free-space Gaussian on open
//! grids, the image sum on circles and tori, and spectral expansions (Fourier
//! modes on circles and tori, dense eigenpairs on graphs).

pub mod gaussian;
pub mod operator;
pub mod spectral;
pub mod validate;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

pub use operator::{AxisKernel, Discretization, KernelOp, SeparableKernel};
pub use spectral::{DenseEigen, SpectralBasis};

use crate::error::{Error, Result};
use crate::space::{Geometry, MetricMeasureSpace, ScalarField};
use crate::sum::NeumaierSum;

/// Default byte budget for cached kernels.
pub const DEFAULT_CACHE_BYTES: usize = 2 << 30;

/// Margin, in units of `√t`, within which fields on open grids must be constant.
pub const WINDOW_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// `(4πt)^{-n/2} exp(-d²/4t)` on open grids.
    ClosedForm {
        discretization: Discretization,
    },
    /// Periodised Gaussian; `images` per side per axis (default from `t`).
    ImageSum {
        images: Option<usize>,
    },
    Spectral(SpectralBasis),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::ClosedForm { .. } => "closed-form",
            Backend::ImageSum { .. } => "image-sum",
            Backend::Spectral(_) => "spectral",
        }
    }
}

#[derive(Debug, Default)]
struct KernelCache {
    entries: HashMap<u64, Arc<KernelOp>>,
    bytes: usize,
}

/// Evaluates heat kernels on one space. Immutable apart from its cache.
#[derive(Debug)]
pub struct HeatEngine<'a> {
    space: &'a MetricMeasureSpace,
    backend: Backend,
    dense: Option<Arc<DenseEigen>>,
    cache: RwLock<KernelCache>,
    cache_budget: usize,
    pair_budget: Option<u64>,
}

impl<'a> HeatEngine<'a> {
    pub fn new(space: &'a MetricMeasureSpace, backend: Backend) -> Result<Self> {
        let mut dense = None;
        match (&backend, space.geometry()) {
            (
                Backend::ClosedForm { .. },
                Geometry::LineGrid { .. } | Geometry::EuclideanGrid { .. },
            ) => {}
            (
                Backend::ImageSum { .. },
                Geometry::CircleGrid { .. } | Geometry::TorusGrid { .. },
            ) => {}
            (Backend::Spectral(SpectralBasis::Fourier { modes }), _) if space.is_closed() => {
                if modes.len() != space.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "Fourier basis has {} axes, space has {}",
                        modes.len(),
                        space.dim()
                    )));
                }
            }
            (Backend::Spectral(SpectralBasis::Dense(d)), _) => {
                if d.points != space.len() {
                    return Err(Error::LengthMismatch {
                        got: d.points,
                        expected: space.len(),
                    });
                }
                dense = Some(Arc::new(d.clone()));
            }
            (b, g) => {
                return Err(Error::UnsupportedBackend(format!(
                    "{} backend on a {} geometry",
                    b.name(),
                    g.name()
                )))
            }
        }
        Ok(HeatEngine {
            space,
            backend,
            dense,
            cache: RwLock::new(KernelCache::default()),
            cache_budget: DEFAULT_CACHE_BYTES,
            pair_budget: None,
        })
    }

    /// Closed-form Gaussian with cell-averaged discretisation.
    pub fn closed_form(space: &'a MetricMeasureSpace) -> Result<Self> {
        Self::new(
            space,
            Backend::ClosedForm {
                discretization: Discretization::CellAverage,
            },
        )
    }

    pub fn image_sum(space: &'a MetricMeasureSpace) -> Result<Self> {
        Self::new(space, Backend::ImageSum { images: None })
    }

    /// Full spectral basis: Fourier on circles and tori, eigenpairs on graphs.
    pub fn spectral(space: &'a MetricMeasureSpace) -> Result<Self> {
        let basis = if space.adjacency().is_some() {
            SpectralBasis::graph(space, None)?
        } else {
            SpectralBasis::fourier(space, None)?
        };
        Self::new(space, Backend::Spectral(basis))
    }

    pub fn with_cache_budget(mut self, bytes: usize) -> Self {
        self.cache_budget = bytes;
        self
    }

    /// Caps the number of kernel pairs a double sum may visit.
    pub fn with_pair_budget(mut self, pairs: u64) -> Self {
        self.pair_budget = Some(pairs);
        self
    }

    pub fn check_pairs(&self, op: &KernelOp) -> Result<()> {
        match self.pair_budget {
            Some(budget) if op.pair_count() > budget => Err(Error::PairBudgetExceeded {
                pairs: op.pair_count(),
                budget,
            }),
            _ => Ok(()),
        }
    }

    pub fn space(&self) -> &'a MetricMeasureSpace {
        self.space
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.backend, Backend::Spectral(_))
    }

    /// Kernel operator at time `t`, from the cache when possible.
    pub fn operator(&self, t: f64) -> Result<Arc<KernelOp>> {
        check_time(t)?;
        let key = t.to_bits();
        if let Some(op) = self
            .cache
            .read()
            .expect("kernel cache lock")
            .entries
            .get(&key)
        {
            return Ok(Arc::clone(op));
        }
        let op = Arc::new(self.build(t)?);
        let mut cache = self.cache.write().expect("kernel cache lock");
        if let Some(existing) = cache.entries.get(&key) {
            return Ok(Arc::clone(existing));
        }
        let bytes = op.bytes();
        if cache.bytes + bytes <= self.cache_budget {
            cache.bytes += bytes;
            cache.entries.insert(key, Arc::clone(&op));
        }
        Ok(op)
    }

    fn build(&self, t: f64) -> Result<KernelOp> {
        let axes = self.space.axes();
        match &self.backend {
            Backend::ClosedForm { discretization } => {
                Ok(KernelOp::Separable(SeparableKernel::new(
                    axes.iter()
                        .map(|a| AxisKernel::gaussian(*a, t, *discretization))
                        .collect(),
                )))
            }
            Backend::ImageSum { images } => Ok(KernelOp::Separable(SeparableKernel::new(
                axes.iter()
                    .map(|a| {
                        let k = images.unwrap_or_else(|| gaussian::default_images(t, a.length));
                        AxisKernel::image_sum(*a, t, k)
                    })
                    .collect(),
            ))),
            Backend::Spectral(SpectralBasis::Fourier { modes }) => {
                let ks = axes
                    .iter()
                    .zip(modes)
                    .map(|(a, m)| AxisKernel::fourier(*a, t, *m))
                    .collect::<Result<Vec<_>>>()?;
                Ok(KernelOp::Separable(SeparableKernel::new(ks)))
            }
            Backend::Spectral(SpectralBasis::Dense(_)) => {
                let eigen = Arc::clone(self.dense.as_ref().expect("dense eigenpairs"));
                let n = self.space.len();
                let bytes = 8 * n * n;
                let used = self.cache.read().expect("kernel cache lock").bytes;
                let materialise = used + bytes <= self.cache_budget;
                Ok(KernelOp::Dense(operator::DenseKernel::new(
                    eigen,
                    self.space.weights().to_vec(),
                    t,
                    materialise,
                )?))
            }
        }
    }

    /// Kernel density `p_t(x, y)` as used by the heat flow.
    pub fn kernel(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        Ok(self.operator(t)?.entry(x, y))
    }

    /// `(4πt)^{-n/2} exp(-d²/4t)`, the continuum density the grid kernels model.
    pub fn continuum_density(&self, t: f64, d: f64) -> f64 {
        gaussian::density_nd(self.space.dim().max(1), t, d)
    }

    pub fn heat_apply(&self, t: f64, f: &ScalarField) -> Result<ScalarField> {
        f.check_len(self.space)?;
        Ok(ScalarField::new(self.heat_apply_values(t, f.values())?))
    }

    pub fn heat_apply_values(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.space.len() {
            return Err(Error::LengthMismatch {
                got: f.len(),
                expected: self.space.len(),
            });
        }
        Ok(self.operator(t)?.apply(f))
    }

    /// `Δ h_t f` from the spectral data.
    pub fn laplacian_heat_apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        check_time(t)?;
        match &self.backend {
            Backend::Spectral(SpectralBasis::Fourier { modes }) => {
                let op = self.operator(t)?;
                let KernelOp::Separable(sep) = op.as_ref() else {
                    unreachable!("Fourier kernels are separable")
                };
                let mut out = vec![0.0; f.len()];
                for (a, ax) in sep.axes().iter().enumerate() {
                    let lap = AxisKernel::fourier_laplacian(*ax.axis(), t, modes[a]);
                    let part = sep.with_axis(a, lap).apply(f);
                    for (o, p) in out.iter_mut().zip(part) {
                        *o += p;
                    }
                }
                Ok(out)
            }
            Backend::Spectral(SpectralBasis::Dense(_)) => {
                let eigen = self.dense.as_ref().expect("dense eigenpairs");
                let w = self.space.weights();
                let mut out = vec![0.0; f.len()];
                for (i, lam) in eigen.eigenvalues.iter().enumerate() {
                    let phi = eigen.mode(i);
                    let c: f64 = phi
                        .iter()
                        .zip(f)
                        .zip(w)
                        .map(|((p, v), w)| p * v * w)
                        .collect::<NeumaierSum>()
                        .value();
                    let c = -lam * (-lam * t).exp() * c;
                    for (o, p) in out.iter_mut().zip(phi) {
                        *o += c * p;
                    }
                }
                Ok(out)
            }
            b => Err(Error::UnsupportedBackend(format!(
                "the {} backend has no spectral Laplacian",
                b.name()
            ))),
        }
    }

    /// One-dimensional continuum density at separation `z`, for engines that
    /// have one (Gaussian on a line, image sum on a circle).
    pub fn line_density(&self, t: f64, z: f64) -> Option<f64> {
        match (&self.backend, self.space.geometry()) {
            (Backend::ClosedForm { .. }, Geometry::LineGrid { .. }) => {
                Some(gaussian::density(t, z))
            }
            (Backend::ImageSum { images }, Geometry::CircleGrid { length, .. }) => {
                let k = images.unwrap_or_else(|| gaussian::default_images(t, *length));
                Some(gaussian::periodic_density(t, *length, k, z))
            }
            _ => None,
        }
    }

    /// Window margin `6√t` on open geometries, zero on closed ones.
    pub fn margin(&self, t: f64) -> f64 {
        if self.space.is_grid() && !self.space.is_closed() {
            WINDOW_SIGMAS * t.sqrt()
        } else {
            0.0
        }
    }

    /// Requires `f` to be constant within the window margin of each end of a line.
    pub fn check_window(&self, f: &[f64], t: f64) -> Result<()> {
        let margin = self.margin(t);
        if margin == 0.0 {
            return Ok(());
        }
        let axes = self.space.axes();
        if axes.len() != 1 {
            return Ok(());
        }
        let ax = axes[0];
        let n = ax.cells;
        let (a, b) = (ax.origin, ax.origin + ax.length);
        for i in 0..n {
            let x = ax.coord(i);
            let bad = (x - a < margin && f[i] != f[0]) || (b - x < margin && f[i] != f[n - 1]);
            if bad {
                return Err(Error::WindowViolation { margin });
            }
        }
        Ok(())
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::build(Geometry::CircleGrid {
            length: 1.0,
            cells: n,
        })
        .unwrap()
    }

    #[test]
    fn closed_form_diagonal() {
        let s = MetricMeasureSpace::build(Geometry::LineGrid {
            start: -1.0,
            end: 1.0,
            cells: 64,
        })
        .unwrap();
        let e = HeatEngine::new(
            &s,
            Backend::ClosedForm {
                discretization: Discretization::Point,
            },
        )
        .unwrap();
        assert!((e.kernel(0.5, 3, 3).unwrap() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((e.continuum_density(2.0, 0.0) - 1.0 / (8.0 * PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn image_sum_matches_spectral_on_circle() {
        let s = circle(256);
        let a = HeatEngine::image_sum(&s).unwrap();
        let b = HeatEngine::spectral(&s).unwrap();
        for &t in &[1e-4, 1e-3, 0.01, 0.1, 1.0] {
            let scale = a.kernel(t, 0, 0).unwrap();
            for y in [0, 1, 17, 128] {
                let (u, v) = (a.kernel(t, 0, y).unwrap(), b.kernel(t, 0, y).unwrap());
                assert!((u - v).abs() <= 1e-10 * scale, "t={t} y={y}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn constants_and_eigenfunctions() {
        let s = circle(128);
        let e = HeatEngine::spectral(&s).unwrap();
        let one = e.heat_apply_values(0.01, &vec![2.5; 128]).unwrap();
        assert!(one.iter().all(|v| (v - 2.5).abs() < 1e-10));
        let phi: Vec<f64> = (0..128)
            .map(|i| (2.0 * PI * s.coord0(i)).cos() * 2f64.sqrt())
            .collect();
        let out = e.heat_apply_values(0.01, &phi).unwrap();
        let decay = (-(2.0 * PI).powi(2) * 0.01).exp();
        for (o, p) in out.iter().zip(&phi) {
            assert!((o - decay * p).abs() < 1e-10);
        }
    }

    #[test]
    fn semigroup_on_circle() {
        let s = circle(256);
        let e = HeatEngine::image_sum(&s).unwrap();
        let f: Vec<f64> = (0..256).map(|i| ((i * 13) % 7) as f64).collect();
        let twice = e
            .heat_apply_values(0.01, &e.heat_apply_values(0.01, &f).unwrap())
            .unwrap();
        let once = e.heat_apply_values(0.02, &f).unwrap();
        for (a, b) in twice.iter().zip(&once) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn bad_time_and_backend() {
        let s = circle(16);
        let e = HeatEngine::image_sum(&s).unwrap();
        assert_eq!(
            e.kernel(0.0, 0, 0).unwrap_err(),
            Error::NonPositiveTime(0.0)
        );
        assert_eq!(
            e.kernel(-1.0, 0, 0).unwrap_err(),
            Error::NonPositiveTime(-1.0)
        );
        assert!(matches!(
            HeatEngine::closed_form(&s),
            Err(Error::UnsupportedBackend(_))
        ));
    }

    #[test]
    fn spectral_laplacian_of_eigenfunction() {
        let s = circle(64);
        let e = HeatEngine::spectral(&s).unwrap();
        let phi: Vec<f64> = (0..64).map(|i| (4.0 * PI * s.coord0(i)).sin()).collect();
        let lam = (4.0 * PI).powi(2);
        let out = e.laplacian_heat_apply(0.003, &phi).unwrap();
        let c = -lam * (-lam * 0.003f64).exp();
        for (o, p) in out.iter().zip(&phi) {
            assert!((o - c * p).abs() < 1e-9, "{o} vs {}", c * p);
        }
    }

    #[test]
    fn graph_kernel_is_symmetric_and_conservative() {
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
        let e = HeatEngine::spectral(&s).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(e.kernel(0.3, x, y).unwrap(), e.kernel(0.3, y, x).unwrap());
            }
        }
        let out = e.heat_apply_values(0.3, &[1.0; 4]).unwrap();
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12));
        // streamed rows give the same answer
        let f = [1.0, -2.0, 0.5, 3.0];
        let streamed = HeatEngine::spectral(&s).unwrap().with_cache_budget(0);
        let a = e.heat_apply_values(0.3, &f).unwrap();
        let b = streamed.heat_apply_values(0.3, &f).unwrap();
        assert_eq!(a, b);
    }
}
