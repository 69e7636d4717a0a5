//! The nonlocal heat-kernel functionals, each evaluated along at least two
//! independent paths where the identities allow it.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::calculus;
use crate::error::{Error, Result};
use crate::heat::{check_time, HeatEngine};
use crate::space::{IndicatorSet, MetricMeasureSpace, ScalarField};
use crate::sum::{self, NeumaierSum};

/// Header of the per-sample CSV log.
pub const CSV_HEADER: &str = "functional,geometry,N,p,t,path,value,seconds,pairs";

/// Steps per `√τ` in the blow-up quadrature.
const BLOWUP_STEPS_PER_SIGMA: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Path {
    DoubleSum,
    HeatApply,
    GradientPairing,
    LaplacianPairing,
}

impl Path {
    pub fn name(self) -> &'static str {
        match self {
            Path::DoubleSum => "double-sum",
            Path::HeatApply => "heat-apply",
            Path::GradientPairing => "gradient-pairing",
            Path::LaplacianPairing => "laplacian-pairing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalSample {
    pub t: f64,
    pub value: f64,
    pub path: Path,
    pub seconds: f64,
    pub pairs: u64,
}

impl FunctionalSample {
    /// One CSV row; `seconds` is written as 0 when `timing` is off so logs
    /// are byte-reproducible.
    pub fn csv_row(
        &self,
        functional: &str,
        geometry: &str,
        n: usize,
        p: f64,
        timing: bool,
    ) -> String {
        let mut s = String::new();
        let seconds = if timing { self.seconds } else { 0.0 };
        let _ = write!(
            s,
            "{functional},{geometry},{n},{p},{},{},{},{seconds},{}",
            self.t,
            self.path.name(),
            self.value,
            self.pairs
        );
        s
    }
}

/// Samples of one functional at one `t`, one per evaluation path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub samples: Vec<FunctionalSample>,
}

impl Evaluation {
    pub fn value(&self, path: Path) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| s.path == path)
            .map(|s| s.value)
    }

    /// Value of the first (preferred) path.
    pub fn primary(&self) -> f64 {
        self.samples[0].value
    }

    /// Largest pairwise relative disagreement between paths.
    pub fn path_spread(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.samples {
            for b in &self.samples {
                let scale = a.value.abs().max(b.value.abs());
                if scale > 0.0 {
                    worst = worst.max((a.value - b.value).abs() / scale);
                }
            }
        }
        worst
    }
}

fn timed(t: f64, path: Path, f: impl FnOnce() -> Result<(f64, u64)>) -> Result<FunctionalSample> {
    let start = Instant::now();
    let (value, pairs) = f()?;
    Ok(FunctionalSample {
        t,
        value,
        path,
        seconds: start.elapsed().as_secs_f64(),
        pairs,
    })
}

fn cell_volume(space: &MetricMeasureSpace) -> f64 {
    space.weights()[0]
}

fn inner(space: &MetricMeasureSpace, f: &[f64], g: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(space.weights())
        .map(|((a, b), w)| a * b * w)
        .collect::<NeumaierSum>()
        .value()
}

/// `Σ_{x,y} p_t(x, y) φ(x, y) w(x) w(y)` with the engine's cutoff and pair budget.
fn double_sum<F>(engine: &HeatEngine, t: f64, phi: F) -> Result<(f64, u64)>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let op = engine.operator(t)?;
    engine.check_pairs(&op)?;
    op.pair_sum(cell_volume(engine.space()), phi)
}

/// `t^{-p/2} ∬ p_t(x, y) |f(x) - f(y)|^p`. On closed spaces with `p = 2` the
/// heat-apply path `2 t^{-1} ∫ (f - h_t f) f` is added.
pub fn sobolev_functional(
    engine: &HeatEngine,
    f: &ScalarField,
    p: f64,
    t: f64,
) -> Result<Evaluation> {
    check_time(t)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent p = {p} must be >= 1"
        )));
    }
    let space = engine.space();
    f.check_len(space)?;
    let v = f.values();
    engine.check_window(v, t)?;
    let scale = t.powf(-p / 2.0);
    let ds = timed(t, Path::DoubleSum, || {
        let (s, pairs) = if p == 1.0 {
            double_sum(engine, t, |x, y| (v[x] - v[y]).abs())?
        } else if p == 2.0 {
            double_sum(engine, t, |x, y| (v[x] - v[y]) * (v[x] - v[y]))?
        } else {
            double_sum(engine, t, |x, y| (v[x] - v[y]).abs().powf(p))?
        };
        Ok((s * scale, pairs))
    })?;
    let mut samples = vec![ds];
    if p == 2.0 && engine.margin(t) == 0.0 {
        samples.push(timed(t, Path::HeatApply, || {
            let hf = engine.heat_apply_values(t, v)?;
            let diff: Vec<f64> = v.iter().zip(&hf).map(|(a, b)| a - b).collect();
            Ok((2.0 * inner(space, &diff, v) * scale, space.len() as u64))
        })?);
    }
    Ok(Evaluation { samples })
}

/// `t^{-1/2} ∬ p_t(x, y) |f(x) - f(y)|`.
pub fn bv_functional(engine: &HeatEngine, f: &ScalarField, t: f64) -> Result<FunctionalSample> {
    Ok(sobolev_functional(engine, f, 1.0, t)?.samples[0])
}

/// `∬ p_t |χ_E(x) - χ_E(y)|` by the double sum and as `2 ∫ (χ_E - h_t χ_E) χ_E`.
pub fn set_functional(engine: &HeatEngine, e: &IndicatorSet, t: f64) -> Result<Evaluation> {
    check_time(t)?;
    let space = engine.space();
    let chi = e.indicator();
    chi.check_len(space)?;
    let v = chi.values();
    engine.check_window(v, t)?;
    let ds = timed(t, Path::DoubleSum, || {
        double_sum(engine, t, |x, y| {
            if e.contains(x) != e.contains(y) {
                1.0
            } else {
                0.0
            }
        })
    })?;
    let ha = timed(t, Path::HeatApply, || {
        let h = engine.heat_apply_values(t, v)?;
        let diff: Vec<f64> = v.iter().zip(&h).map(|(a, b)| a - b).collect();
        Ok((2.0 * inner(space, &diff, v), space.len() as u64))
    })?;
    Ok(Evaluation {
        samples: vec![ha, ds],
    })
}

/// `t^{-1/2} ∫ (f - h_t f) g`, also as `½ t^{-1/2} ∬ p_t (f(x) - f(y))(g(x) - g(y))`.
pub fn jump_functional(
    engine: &HeatEngine,
    f: &ScalarField,
    g: &ScalarField,
    t: f64,
) -> Result<Evaluation> {
    check_time(t)?;
    let space = engine.space();
    f.check_len(space)?;
    g.check_len(space)?;
    let (fv, gv) = (f.values(), g.values());
    engine.check_window(fv, t)?;
    engine.check_window(gv, t)?;
    let scale = 1.0 / t.sqrt();
    let ha = timed(t, Path::HeatApply, || {
        let h = engine.heat_apply_values(t, fv)?;
        let diff: Vec<f64> = fv.iter().zip(&h).map(|(a, b)| a - b).collect();
        Ok((inner(space, &diff, gv) * scale, space.len() as u64))
    })?;
    let ds = timed(t, Path::DoubleSum, || {
        let (s, pairs) = double_sum(engine, t, |x, y| (fv[x] - fv[y]) * (gv[x] - gv[y]))?;
        Ok((0.5 * s * scale, pairs))
    })?;
    Ok(Evaluation {
        samples: vec![ha, ds],
    })
}

/// `g_t(E, F) = √8 t ∫ ∇h_{t²}χ_E · ∇h_{t²}χ_F`.
///
/// The Laplacian pairing uses `∫ ∇h_s u · ∇h_s v = -∫ v Δh_{2s} u`: spectrally
/// on spectral engines, and through the cell edges of both sets where a
/// one-dimensional closed-form density exists. The gradient pairing uses
/// symmetric differences on grids. The Laplacian path comes first when present.
pub fn polarization_g(
    engine: &HeatEngine,
    e: &IndicatorSet,
    f: &IndicatorSet,
    t: f64,
) -> Result<Evaluation> {
    check_time(t)?;
    let space = engine.space();
    let tau = t * t;
    let (ce, cf) = (e.indicator(), f.indicator());
    ce.check_len(space)?;
    cf.check_len(space)?;
    engine.check_window(ce.values(), tau)?;
    engine.check_window(cf.values(), tau)?;
    let k = 8f64.sqrt() * t;
    let mut samples = Vec::new();

    if engine.is_spectral() {
        samples.push(timed(t, Path::LaplacianPairing, || {
            let lap = engine.laplacian_heat_apply(2.0 * tau, ce.values())?;
            Ok((-k * inner(space, cf.values(), &lap), space.len() as u64))
        })?);
    } else if engine.line_density(tau, 0.0).is_some() {
        samples.push(timed(t, Path::LaplacianPairing, || {
            let ee = calculus::cell_edges(space, e.membership())?;
            let fe = calculus::cell_edges(space, f.membership())?;
            let mut acc = NeumaierSum::new();
            for a in &ee {
                for b in &fe {
                    let p = engine
                        .line_density(2.0 * tau, a.location - b.location)
                        .expect("line density");
                    acc.add(f64::from(a.orientation * b.orientation) * p);
                }
            }
            Ok((k * acc.value(), (ee.len() * fe.len()) as u64))
        })?);
    }

    if space.is_grid() {
        samples.push(timed(t, Path::GradientPairing, || {
            let u = engine.heat_apply_values(tau, ce.values())?;
            let v = engine.heat_apply_values(tau, cf.values())?;
            let gu = calculus::symmetric_gradient(space, &u)?;
            let gv = calculus::symmetric_gradient(space, &v)?;
            let mut acc = NeumaierSum::new();
            for (a, b) in gu.iter().zip(&gv) {
                acc.add(inner(space, a, b));
            }
            Ok((k * acc.value(), space.len() as u64))
        })?);
    }
    if samples.is_empty() {
        return Err(Error::UnsupportedBackend(
            "polarization needs a grid or a spectral engine".into(),
        ));
    }
    Ok(Evaluation { samples })
}

/// Korevaar–Schoen energy `∫ ⨍_{B_r(x)} |f(x) - f(y)|^p / r^p dm(y) dm(x)`.
pub fn ks_functional(space: &MetricMeasureSpace, f: &ScalarField, p: f64, r: f64) -> Result<f64> {
    f.check_len(space)?;
    let spacing = space.spacing().unwrap_or(1.0);
    if !(r > spacing) {
        return Err(Error::RadiusBelowResolution { radius: r, spacing });
    }
    let v = f.values();
    let w = space.weights();
    let rp = r.powf(p);
    Ok(sum::sum_rows(space.len(), |x, acc| {
        let mut ball = NeumaierSum::new();
        let mut inner = NeumaierSum::new();
        for y in 0..space.len() {
            if space.dist(x, y) < r {
                ball.add(w[y]);
                inner.add((v[x] - v[y]).abs().powf(p) * w[y]);
            }
        }
        acc.add(w[x] * inner.value() / (rp * ball.value()));
    }))
}

/// `t h_{t²}|∇h_{t²}χ_E|(x)` at the cell edge of `E` nearest to `x`.
pub fn blowup_profile(engine: &HeatEngine, e: &IndicatorSet, x: f64, t: f64) -> Result<f64> {
    let space = engine.space();
    let ax = one_axis(space)?;
    let edges = calculus::cell_edges(space, e.membership())?;
    let nearest = edges
        .iter()
        .map(|j| (ax.coord_delta(j.location, x), j.location))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match nearest {
        Some((d, loc)) if d <= ax.spacing() => blowup_profile_at(engine, e, loc, t),
        _ => Err(Error::NotAJumpPoint(x)),
    }
}

fn one_axis(space: &MetricMeasureSpace) -> Result<crate::space::Axis> {
    match space.axes() {
        [ax] => Ok(*ax),
        _ => Err(Error::UnsupportedGeometry(
            "blow-up profiles are computed on one-dimensional grids".into(),
        )),
    }
}

/// `t h_{t²}|∇h_{t²}χ_E|(x)` at an arbitrary `x`.
///
/// With a closed-form line density the gradient is the exact sum of kernels
/// centred at the cell edges of `E`, and the outer heat flow is a trapezoid
/// rule with step `√τ / 20` over `±13.6 √τ` (a full period on a short circle).
/// Otherwise the gradient is a symmetric difference of the discrete flow and
/// the result is interpolated linearly to `x`.
pub fn blowup_profile_at(engine: &HeatEngine, e: &IndicatorSet, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let space = engine.space();
    let ax = one_axis(space)?;
    let tau = t * t;
    let chi = e.indicator();
    chi.check_len(space)?;
    engine.check_window(chi.values(), tau)?;

    if engine.line_density(tau, 0.0).is_some() {
        let edges = calculus::cell_edges(space, e.membership())?;
        let density = |z: f64| engine.line_density(tau, z).expect("line density");
        let grad = |y: f64| -> f64 {
            edges
                .iter()
                .map(|j| f64::from(j.orientation) * density(y - j.location))
                .sum::<f64>()
        };
        let sigma = tau.sqrt();
        let step = sigma / BLOWUP_STEPS_PER_SIGMA;
        let half_width = (4.0 * crate::heat::gaussian::CUTOFF_EXPONENT).sqrt() * sigma;
        let (lo, count) = if ax.periodic && 2.0 * half_width >= ax.length {
            let m = (ax.length / step).ceil() as usize;
            (x - 0.5 * ax.length, m)
        } else {
            let m = (half_width / step).ceil() as usize;
            (x - m as f64 * step, 2 * m + 1)
        };
        let h = if ax.periodic && 2.0 * half_width >= ax.length {
            ax.length / count as f64
        } else {
            step
        };
        let mut acc = NeumaierSum::new();
        for k in 0..count {
            let y = lo + k as f64 * h;
            // endpoints carry negligible weight (or wrap exactly on a circle)
            acc.add(density(x - y) * grad(y).abs());
        }
        return Ok(t * acc.value() * h);
    }

    let u = engine.heat_apply_values(tau, chi.values())?;
    let slope = calculus::discrete_slope(space, &u)?;
    let v = engine.heat_apply_values(tau, &slope)?;
    Ok(t * interpolate(&ax, &v, x))
}

/// Linear interpolation of grid values at coordinate `x`.
fn interpolate(ax: &crate::space::Axis, v: &[f64], x: f64) -> f64 {
    let n = ax.cells;
    let h = ax.spacing();
    let offset = if ax.periodic { 0.0 } else { 0.5 };
    let u = (x - ax.origin) / h - offset;
    if ax.periodic {
        let u = u.rem_euclid(n as f64);
        let i = u.floor() as usize % n;
        let a = u - u.floor();
        (1.0 - a) * v[i] + a * v[(i + 1) % n]
    } else {
        let u = u.clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let a = u - i as f64;
        (1.0 - a) * v[i] + a * v[i + 1]
    }
}
