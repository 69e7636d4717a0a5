//! Reference values computed without the main evaluation paths.
//!
//! Nothing here touches the kernel cache, the cutoff or the compensated
//! accumulators, so agreement with [`crate::functionals`] is evidence.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::heat::{check_time, HeatEngine};
use crate::space::{ClosedForm, Geometry, MetricMeasureSpace};

/// Largest space accepted by [`pair_enumeration`].
pub const MAX_ENUMERATION_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    ErfcClosedForm,
    Quadrature10x,
    CrossEngine,
    PairEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    pub method: OracleMethod,
    /// Absolute error bound.
    pub bound: f64,
}

impl OracleValue {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.bound
    }
}

/// `∬ p_t |χ(x) - χ(y)|` for a half-line in ℝ: `2 √(t/π)`.
pub fn halfline_bv_exact(t: f64) -> Result<OracleValue> {
    check_time(t)?;
    let value = 2.0 * (t / std::f64::consts::PI).sqrt();
    Ok(OracleValue {
        value,
        method: OracleMethod::ErfcClosedForm,
        bound: 1e-15 * value,
    })
}

fn trapezoid(g: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| g(a + i as f64 * h)).sum();
    h * (0.5 * (g(a) + g(b)) + inner)
}

/// `∫_a^b |f'|^p` by the trapezoid rule on `10 cells` and `20 cells` intervals,
/// Richardson-corrected. The bound is the step-halving difference.
pub fn quadrature_energy(
    form: &ClosedForm,
    p: f64,
    a: f64,
    b: f64,
    cells: usize,
) -> Result<OracleValue> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent p = {p} must be >= 1"
        )));
    }
    if !(b > a) {
        return Err(Error::NonPositiveLength(b - a));
    }
    let g = |x: f64| form.derivative(x).abs().powf(p);
    let n = 10 * cells.max(1);
    let coarse = trapezoid(&g, a, b, n);
    let fine = trapezoid(&g, a, b, 2 * n);
    let value = (4.0 * fine - coarse) / 3.0;
    let floor = 4.0 * f64::EPSILON * n as f64 * value.abs();
    Ok(OracleValue {
        value,
        method: OracleMethod::Quadrature10x,
        bound: (value - fine).abs().max(floor).max(f64::MIN_POSITIVE),
    })
}

/// Agreement of `⟨h_t f, f⟩` between two engines on the same space.
pub fn cross_engine(
    reference: &HeatEngine,
    other: &HeatEngine,
    f: &[f64],
    t: f64,
) -> Result<OracleValue> {
    let space = reference.space();
    let pairing = |e: &HeatEngine| -> Result<f64> {
        let h = e.heat_apply_values(t, f)?;
        Ok(h.iter()
            .zip(f)
            .zip(space.weights())
            .map(|((a, b), w)| a * b * w)
            .sum())
    };
    let (a, b) = (pairing(reference)?, pairing(other)?);
    Ok(OracleValue {
        value: a,
        method: OracleMethod::CrossEngine,
        bound: (a - b).abs().max(f64::EPSILON * a.abs()),
    })
}

/// Inputs to [`pair_enumeration`], with the same normalisation as the
/// corresponding functional.
#[derive(Debug, Clone, Copy)]
pub enum PairFunctional<'a> {
    /// `t^{-p/2} ∬ p_t |f(x) - f(y)|^p`
    Sobolev { f: &'a [f64], p: f64 },
    /// `∬ p_t |χ_E(x) - χ_E(y)|`
    Set { membership: &'a [bool] },
    /// `½ t^{-1/2} ∬ p_t (f(x) - f(y))(g(x) - g(y))`
    Jump { f: &'a [f64], g: &'a [f64] },
}

/// Exhaustive `O(N²)` evaluation with an independently built kernel and plain
/// summation. Circle and torus grids use a point-sampled image sum; graphs use
/// a scaling-and-squaring matrix exponential.
pub fn pair_enumeration(
    space: &MetricMeasureSpace,
    functional: PairFunctional,
    t: f64,
) -> Result<OracleValue> {
    check_time(t)?;
    let n = space.len();
    if n > MAX_ENUMERATION_POINTS {
        return Err(Error::SpaceTooLarge(n));
    }
    let len = match functional {
        PairFunctional::Sobolev { f, .. } => f.len(),
        PairFunctional::Set { membership } => membership.len(),
        PairFunctional::Jump { f, g } => {
            if g.len() != f.len() {
                return Err(Error::LengthMismatch {
                    got: g.len(),
                    expected: f.len(),
                });
            }
            f.len()
        }
    };
    if len != n {
        return Err(Error::LengthMismatch {
            got: len,
            expected: n,
        });
    }
    let kernel = brute_kernel(space, t)?;
    let w = space.weights();
    let (term, scale): (Box<dyn Fn(usize, usize) -> f64>, f64) = match functional {
        PairFunctional::Sobolev { f, p } => (
            Box::new(move |x, y| (f[x] - f[y]).abs().powf(p)),
            t.powf(-p / 2.0),
        ),
        PairFunctional::Set { membership } => (
            Box::new(move |x, y| f64::from(u8::from(membership[x] != membership[y]))),
            1.0,
        ),
        PairFunctional::Jump { f, g } => (
            Box::new(move |x, y| (f[x] - f[y]) * (g[x] - g[y])),
            0.5 / t.sqrt(),
        ),
    };
    let mut sum = 0.0;
    let mut abs = 0.0;
    for x in 0..n {
        for y in 0..n {
            let v = kernel[x * n + y] * term(x, y) * w[x] * w[y];
            sum += v;
            abs += v.abs();
        }
    }
    let value = sum * scale;
    // naive summation error plus the kernel's own relative accuracy
    let bound = (n * n) as f64 * f64::EPSILON * abs * scale + 1e-13 * abs * scale;
    Ok(OracleValue {
        value,
        method: OracleMethod::PairEnumeration,
        bound: bound.max(f64::MIN_POSITIVE),
    })
}

/// Row-major `N × N` kernel matrix.
fn brute_kernel(space: &MetricMeasureSpace, t: f64) -> Result<Vec<f64>> {
    let n = space.len();
    match space.geometry() {
        Geometry::CircleGrid { length, .. } | Geometry::TorusGrid { length, .. } => {
            let l = *length;
            let dim = space.dim();
            let images = (8.0 * t.sqrt() / l).ceil() as i64 + 3;
            let g = |z: f64| -> f64 {
                (-images..=images)
                    .map(|k| {
                        let d = z + k as f64 * l;
                        (-d * d / (4.0 * t)).exp()
                    })
                    .sum::<f64>()
                    / (4.0 * std::f64::consts::PI * t).sqrt()
            };
            let coords: Vec<Vec<f64>> = (0..n).map(|i| space.coords(i)).collect();
            let mut k = vec![0.0; n * n];
            for x in 0..n {
                for y in 0..n {
                    k[x * n + y] = (0..dim).map(|a| g(coords[x][a] - coords[y][a])).product();
                }
            }
            Ok(k)
        }
        Geometry::WeightedGraph { .. } => graph_kernel(space, t),
        _ => Err(Error::UnsupportedGeometry(
            "pair enumeration needs a circle, torus or graph".into(),
        )),
    }
}

/// `W^{-1/2} exp(-t W^{-1/2} L W^{-1/2}) W^{-1/2}` by Taylor scaling and squaring.
fn graph_kernel(space: &MetricMeasureSpace, t: f64) -> Result<Vec<f64>> {
    use nalgebra::DMatrix;
    let n = space.len();
    let adjacency = space
        .adjacency()
        .ok_or_else(|| Error::UnsupportedGeometry("not a graph".into()))?;
    let s: Vec<f64> = space.weights().iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (x, nbrs) in adjacency.iter().enumerate() {
        for &(y, c) in nbrs {
            a[(x, y)] += c * t * s[x] * s[y];
            a[(x, x)] -= c * t * s[x] * s[x];
        }
    }
    let norm = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    a /= 2f64.powi(squarings);
    let mut e = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &a / k as f64;
        e += &term;
    }
    for _ in 0..squarings {
        e = &e * &e;
    }
    let mut k = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            k[x * n + y] = s[x] * e[(x, y)] * s[y];
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals;
    use crate::space::{IndicatorSet, ScalarField};
    use std::f64::consts::PI;

    #[test]
    fn halfline_values() {
        let v = halfline_bv_exact(0.01).unwrap();
        assert!((v.value - 0.112_837_916_709_551_26).abs() < 1e-16);
        assert!((halfline_bv_exact(1.0).unwrap().value - 2.0 / PI.sqrt()).abs() < 1e-15);
        assert!(halfline_bv_exact(0.0).is_err());
    }

    #[test]
    fn quadrature_of_sine() {
        let s = ClosedForm::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        };
        let two = quadrature_energy(&s, 2.0, 0.0, 1.0, 256).unwrap();
        assert!((two.value - 2.0 * PI * PI).abs() < 1e-9, "{two:?}");
        let one = quadrature_energy(&s, 1.0, 0.0, 1.0, 256).unwrap();
        assert!((one.value - 4.0).abs() < 1e-9, "{one:?}");
        let c = quadrature_energy(&ClosedForm::Constant(3.0), 2.0, 0.0, 1.0, 16).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.bound > 0.0);
    }

    #[test]
    fn enumeration_matches_functionals() {
        let s = MetricMeasureSpace::build(Geometry::CircleGrid {
            length: 1.0,
            cells: 128,
        })
        .unwrap();
        let e = HeatEngine::image_sum(&s).unwrap();
        let t = 1e-2;
        let f = ScalarField::from_closed_form(
            &s,
            &ClosedForm::Sine {
                amplitude: 1.0,
                frequency: 1.0,
            },
        );
        let main = functionals::sobolev_functional(&e, &f, 2.0, t)
            .unwrap()
            .primary();
        let o = pair_enumeration(
            &s,
            PairFunctional::Sobolev {
                f: f.values(),
                p: 2.0,
            },
            t,
        )
        .unwrap();
        assert!((main - o.value).abs() <= 1e-12 * o.value, "{main} vs {o:?}");

        let arc = IndicatorSet::from_intervals(&s, &[(0.1, 0.45)]).unwrap();
        let ev = functionals::set_functional(&e, &arc, t).unwrap();
        let o = pair_enumeration(
            &s,
            PairFunctional::Set {
                membership: arc.membership(),
            },
            t,
        )
        .unwrap();
        for sample in &ev.samples {
            assert!(
                (sample.value - o.value).abs() <= 1e-12 * o.value,
                "{sample:?} vs {o:?}"
            );
        }

        let zero = vec![0.0; 128];
        let z = pair_enumeration(&s, PairFunctional::Sobolev { f: &zero, p: 2.0 }, t).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn enumeration_on_graph_matches_spectral_engine() {
        let n = 12;
        let edges: Vec<(usize, usize, f64)> = (0..n)
            .map(|i| (i, (i + 1) % n, 1.0 + 0.1 * i as f64))
            .collect();
        let s = MetricMeasureSpace::build(Geometry::WeightedGraph {
            edges,
            vertex_weights: (0..n).map(|i| 1.0 + 0.05 * i as f64).collect(),
        })
        .unwrap();
        let e = HeatEngine::spectral(&s).unwrap();
        let f: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let g: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let t = 0.3;
        let main = functionals::jump_functional(
            &e,
            &ScalarField::new(f.clone()),
            &ScalarField::new(g.clone()),
            t,
        )
        .unwrap();
        let o = pair_enumeration(&s, PairFunctional::Jump { f: &f, g: &g }, t).unwrap();
        for sample in &main.samples {
            assert!(
                (sample.value - o.value).abs() < 1e-10 * o.value.abs().max(1.0),
                "{sample:?} vs {o:?}"
            );
        }
    }

    #[test]
    fn enumeration_rejects_large_spaces() {
        let s = MetricMeasureSpace::build(Geometry::CircleGrid {
            length: 1.0,
            cells: 1024,
        })
        .unwrap();
        let zero = vec![0.0; 1024];
        assert_eq!(
            pair_enumeration(&s, PairFunctional::Sobolev { f: &zero, p: 2.0 }, 0.01).unwrap_err(),
            Error::SpaceTooLarge(1024)
        );
    }
}
