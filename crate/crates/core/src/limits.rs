//! Geometric t-ladders, small-time extrapolation and verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::FunctionalSample;
use crate::space::MetricMeasureSpace;
use crate::special::gamma;
use crate::sum;

/// Smallest `√(kernel time)` allowed, in grid spacings.
pub const GUARD_CELLS: f64 = 10.0;
/// Relative spread below which samples are treated as constant.
pub const CONSTANT_RANGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Ladder {
    pub fn new(t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::NonPositiveTime(t0));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ladder ratio {ratio} must lie in (0, 1)"
            )));
        }
        if !(4..=64).contains(&count) {
            return Err(Error::InvalidArgument(format!(
                "ladder count {count} must lie in 4..=64"
            )));
        }
        Ok(Self { t0, ratio, count })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count)
            .map(|j| self.t0 * self.ratio.powi(j as i32))
            .collect()
    }

    pub fn t_min(&self) -> f64 {
        self.t0 * self.ratio.powi(self.count as i32 - 1)
    }
}

/// Requires `√(kernel time) ≥ 10 h` at the smallest `t` of a ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionGuard {
    /// Grid spacing `h`.
    pub spacing: f64,
    /// Extent the spacing was derived from (`h = extent / cells`).
    pub extent: f64,
    /// The kernel runs at `t²` rather than `t` (polarization, blow-up).
    pub squared: bool,
}

impl ResolutionGuard {
    /// `None` for graphs, which have no spacing.
    pub fn for_space(space: &MetricMeasureSpace, squared: bool) -> Option<Self> {
        let ax = space
            .axes()
            .iter()
            .max_by(|a, b| a.spacing().total_cmp(&b.spacing()))?;
        Some(Self {
            spacing: ax.spacing(),
            extent: ax.length,
            squared,
        })
    }

    pub fn kernel_time(&self, t: f64) -> f64 {
        if self.squared {
            t * t
        } else {
            t
        }
    }

    /// Fewest cells along the extent that admit kernel time `t`.
    pub fn min_cells(&self, t: f64) -> usize {
        (GUARD_CELLS * self.extent / self.kernel_time(t).sqrt()).ceil() as usize
    }

    pub fn check(&self, t: f64) -> Result<()> {
        let scale = self.kernel_time(t).sqrt();
        if scale < GUARD_CELLS * self.spacing {
            return Err(Error::ResolutionGuardViolated {
                scale,
                spacing: self.spacing,
                min_cells: self.min_cells(t),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Constant,
    AffineInT,
    AffineInSqrtT,
}

/// Pass/fail record for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub scenario: String,
    pub limit_estimate: f64,
    pub target: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    /// Relative error against `target`, absolute when the target is zero.
    pub fn new(scenario: impl Into<String>, estimate: f64, target: f64, tolerance: f64) -> Self {
        let err = if target == 0.0 {
            estimate.abs()
        } else {
            ((estimate - target) / target).abs()
        };
        Self {
            scenario: scenario.into(),
            limit_estimate: estimate,
            target,
            rel_err: err,
            tolerance,
            pass: err <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCurve {
    /// Sorted by descending `t`.
    pub samples: Vec<FunctionalSample>,
    pub model: Option<Model>,
    pub limit_estimate: f64,
    pub limit_stderr: f64,
    pub target: Option<f64>,
    pub verdict: Option<Verdict>,
}

impl ConvergenceCurve {
    pub fn new(mut samples: Vec<FunctionalSample>) -> Self {
        samples.sort_by(|a, b| b.t.total_cmp(&a.t));
        Self {
            samples,
            model: None,
            limit_estimate: f64::NAN,
            limit_stderr: f64::NAN,
            target: None,
            verdict: None,
        }
    }

    /// Attaches a target and records the verdict for the current estimate.
    pub fn judge(&mut self, scenario: &str, target: f64, tolerance: f64) -> &Verdict {
        self.target = Some(target);
        self.verdict.insert(Verdict::new(
            scenario,
            self.limit_estimate,
            target,
            tolerance,
        ))
    }
}

/// Evaluates `eval` at every ladder time, in parallel across `t`.
pub fn sweep_map<T, F>(ladder: &Ladder, guard: Option<&ResolutionGuard>, eval: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    if let Some(g) = guard {
        g.check(ladder.t_min())?;
    }
    let ts = ladder.times();
    sum::map_indices(ts.len(), |j| eval(ts[j]))
        .into_iter()
        .collect()
}

pub fn sweep<F>(
    ladder: &Ladder,
    guard: Option<&ResolutionGuard>,
    eval: F,
) -> Result<ConvergenceCurve>
where
    F: Fn(f64) -> Result<FunctionalSample> + Sync,
{
    Ok(ConvergenceCurve::new(sweep_map(ladder, guard, eval)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub model: Model,
    pub intercept: f64,
    pub slope: f64,
    pub stderr: f64,
    pub residual: f64,
}

fn fit_affine(xs: &[f64], ys: &[f64], model: Model) -> Fit {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let var_a = rss / dof * (1.0 / n + xm * xm / sxx);
    Fit {
        model,
        intercept,
        slope,
        stderr: var_a.sqrt(),
        residual: rss.sqrt(),
    }
}

/// Fits `a + b t` and `a + b √t` to the smallest `⌈k/2⌉` samples and keeps the
/// one with the smaller residual norm.
pub fn fit_limit(ts: &[f64], values: &[f64]) -> Result<Fit> {
    if ts.len() != values.len() {
        return Err(Error::LengthMismatch {
            got: values.len(),
            expected: ts.len(),
        });
    }
    if ts.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "{} samples, need at least 4",
            ts.len()
        )));
    }
    if ts.iter().all(|&t| t == ts[0]) {
        return Err(Error::DegenerateFit("all samples share one t".into()));
    }
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    order.truncate(ts.len().div_ceil(2));
    let t: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    if t.iter().all(|&s| s == t[0]) {
        return Err(Error::DegenerateFit("fit window shares one t".into()));
    }

    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let scale = lo.abs().max(hi.abs());
    if hi - lo <= CONSTANT_RANGE * scale || scale == 0.0 {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let rss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let dof = (y.len() as f64 - 1.0).max(1.0);
        return Ok(Fit {
            model: Model::Constant,
            intercept: mean,
            slope: 0.0,
            stderr: (rss / dof / y.len() as f64).sqrt(),
            residual: rss.sqrt(),
        });
    }
    let sqrt_t: Vec<f64> = t.iter().map(|s| s.sqrt()).collect();
    let linear = fit_affine(&t, &y, Model::AffineInT);
    let root = fit_affine(&sqrt_t, &y, Model::AffineInSqrtT);
    Ok(if root.residual < linear.residual {
        root
    } else {
        linear
    })
}

/// Fills the model, limit estimate and standard error of `curve`.
pub fn extrapolate(mut curve: ConvergenceCurve) -> Result<ConvergenceCurve> {
    let ts: Vec<f64> = curve.samples.iter().map(|s| s.t).collect();
    let vs: Vec<f64> = curve.samples.iter().map(|s| s.value).collect();
    let fit = fit_limit(&ts, &vs)?;
    curve.model = Some(fit.model);
    curve.limit_estimate = fit.intercept;
    curve.limit_stderr = fit.stderr;
    Ok(curve)
}

/// Inputs of a small-time limit target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TargetKind {
    /// `K_p Ch_p(f)`.
    Sobolev {
        p: f64,
        energy: f64,
    },
    /// `(2/√π) |Df|(X)`.
    Bv {
        variation: f64,
    },
    /// `(1/√π) Σ` over shared jumps of the oriented jump products.
    JumpPairing {
        pairing: f64,
    },
    Blowup,
}

/// `K_p = 2^p Γ((p+1)/2) / √π`.
pub fn sobolev_constant(p: f64) -> f64 {
    2f64.powf(p) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

pub fn target_constant(kind: TargetKind) -> Result<f64> {
    let rpi = 1.0 / std::f64::consts::PI.sqrt();
    Ok(match kind {
        TargetKind::Sobolev { p, energy } => {
            if !(p >= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "exponent p = {p} must be >= 1"
                )));
            }
            sobolev_constant(p) * energy
        }
        TargetKind::Bv { variation } => 2.0 * rpi * variation,
        TargetKind::JumpPairing { pairing } => rpi * pairing,
        TargetKind::Blowup => rpi / 8f64.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::Path;
    use crate::space::Geometry;
    use std::f64::consts::PI;

    fn sample(t: f64, value: f64) -> FunctionalSample {
        FunctionalSample {
            t,
            value,
            path: Path::DoubleSum,
            seconds: 0.0,
            pairs: 0,
        }
    }

    #[test]
    fn ladder_times() {
        let l = Ladder::new(1e-2, 0.5, 6).unwrap();
        let ts = l.times();
        assert_eq!(ts[0], 1e-2);
        assert!((ts[5] - 3.125e-4).abs() < 1e-18);
        assert!(Ladder::new(1e-2, 0.5, 3).is_err());
        assert!(Ladder::new(1e-2, 1.5, 6).is_err());
        assert!(Ladder::new(0.0, 0.5, 6).is_err());
    }

    #[test]
    fn guard_rejects_fine_times() {
        let s = MetricMeasureSpace::build(Geometry::CircleGrid {
            length: 1.0,
            cells: 256,
        })
        .unwrap();
        let g = ResolutionGuard::for_space(&s, false).unwrap();
        match g.check(1e-6) {
            Err(Error::ResolutionGuardViolated { min_cells, .. }) => assert_eq!(min_cells, 10_000),
            other => panic!("{other:?}"),
        }
        assert!(g.check(1e-2).is_ok());
        let sq = ResolutionGuard::for_space(&s, true).unwrap();
        assert!(sq.check(1e-2).is_err());
    }

    #[test]
    fn constant_samples() {
        let ts = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
        let fit = fit_limit(&ts, &[3.0; 4]).unwrap();
        assert_eq!(fit.model, Model::Constant);
        assert_eq!(fit.intercept, 3.0);
        assert_eq!(fit.stderr, 0.0);
    }

    #[test]
    fn affine_recovery() {
        let ts: Vec<f64> = Ladder::new(1e-2, 0.5, 8).unwrap().times();
        let vs: Vec<f64> = ts.iter().map(|t| 2.0 + 5.0 * t).collect();
        let fit = fit_limit(&ts, &vs).unwrap();
        assert_eq!(fit.model, Model::AffineInT);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
    }

    #[test]
    fn model_selection_under_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ts: Vec<f64> = Ladder::new(1e-2, 0.5, 8).unwrap().times();
        for (model, f) in [
            (
                Model::AffineInT,
                Box::new(|t: f64| 1.5 - 3.0 * t) as Box<dyn Fn(f64) -> f64>,
            ),
            (
                Model::AffineInSqrtT,
                Box::new(|t: f64| 1.5 + 0.7 * t.sqrt()),
            ),
        ] {
            let vs: Vec<f64> = ts
                .iter()
                .map(|&t| f(t) + 1e-10 * rng.gen_range(-1.0..1.0))
                .collect();
            let fit = fit_limit(&ts, &vs).unwrap();
            assert_eq!(fit.model, model);
            assert!((fit.intercept - 1.5).abs() < 1e-8);
            assert!(fit.stderr >= 0.0);
        }
    }

    #[test]
    fn degenerate_fit() {
        assert!(matches!(
            fit_limit(&[0.1; 4], &[1.0, 2.0, 3.0, 4.0]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn extrapolate_sorts_descending() {
        let curve = ConvergenceCurve::new(vec![
            sample(1e-3, 1.0),
            sample(1e-2, 1.0),
            sample(1e-4, 1.0),
            sample(1e-1, 1.0),
        ]);
        assert_eq!(curve.samples[0].t, 1e-1);
        let mut c = extrapolate(curve).unwrap();
        assert_eq!(c.limit_estimate, 1.0);
        assert!(c.judge("x", 1.0, 1e-3).pass);
    }

    #[test]
    fn constants() {
        let k = |p| target_constant(TargetKind::Sobolev { p, energy: 1.0 }).unwrap();
        assert!((k(2.0) - 2.0).abs() < 1e-13);
        assert!((k(1.0) - 2.0 / PI.sqrt()).abs() < 1e-13);
        assert!((k(4.0) - 12.0).abs() < 1e-12);
        assert!((k(3.0) - 8.0 / PI.sqrt()).abs() < 1e-13);
        assert!(
            (target_constant(TargetKind::Blowup).unwrap() - 0.199_471_140_200_716_35).abs() < 1e-15
        );
        assert!(
            (target_constant(TargetKind::Bv { variation: 4.0 }).unwrap() - 4.513_516_668).abs()
                < 1e-8
        );
    }
}
