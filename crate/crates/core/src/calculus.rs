//! Reference Sobolev and BV quantities: slopes, Cheeger energies, total
//! variation, perimeters and the jump data of piecewise-constant fields.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{IndicatorSet, Jump, MetricMeasureSpace, PiecewiseConstant, ScalarField};
use crate::sum::NeumaierSum;

/// Levels used by the sampled coarea sweep.
pub const COAREA_LEVELS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMethod {
    Oracle,
    DiscreteSlope,
    Coarea,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub p: f64,
    pub value: f64,
    pub method: EnergyMethod,
}

/// Jump set of a one-dimensional piecewise-constant field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpData {
    pub jumps: Vec<Jump>,
}

impl JumpData {
    pub fn points(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.location).collect()
    }

    pub fn total_variation(&self) -> f64 {
        self.jumps.iter().map(Jump::size).sum()
    }

    /// `Σ (f^∨ - f^∧)(g^∨ - g^∧) ν_f ν_g` over jump points shared with `other`.
    pub fn shared_pairing(&self, other: &JumpData) -> f64 {
        let mut s = 0.0;
        for a in &self.jumps {
            for b in &other.jumps {
                if a.location == b.location {
                    s += a.size() * b.size() * f64::from(a.orientation * b.orientation);
                }
            }
        }
        s
    }
}

/// One-sided limits and orientations at every breakpoint with a nonzero jump.
pub fn jump_data(f: &PiecewiseConstant) -> Result<JumpData> {
    if f.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::UnsortedBreakpoints);
    }
    let mut jumps = Vec::new();
    for (k, &location) in f.breakpoints.iter().enumerate() {
        let (left, right) = f.one_sided(k);
        if left == right {
            continue;
        }
        jumps.push(Jump {
            location,
            lower: left.min(right),
            upper: left.max(right),
            orientation: if right > left { 1 } else { -1 },
        });
    }
    Ok(JumpData { jumps })
}

/// Symmetric difference quotients `(f_{i+1} - f_{i-1}) / 2h` along each axis.
/// Periodic axes wrap; open axes repeat their end values.
pub fn symmetric_gradient(space: &MetricMeasureSpace, f: &[f64]) -> Result<Vec<Vec<f64>>> {
    if !space.is_grid() {
        return Err(Error::NoDerivativeSource);
    }
    if f.len() != space.len() {
        return Err(Error::LengthMismatch {
            got: f.len(),
            expected: space.len(),
        });
    }
    let strides = space.strides();
    Ok(space
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            let n = ax.cells;
            let s = strides[a];
            let h = ax.spacing();
            (0..f.len())
                .map(|i| {
                    let k = space.axis_index(i, a);
                    let base = i - k * s;
                    let (lo, hi) = if ax.periodic {
                        ((k + n - 1) % n, (k + 1) % n)
                    } else {
                        (k.saturating_sub(1), (k + 1).min(n - 1))
                    };
                    (f[base + hi * s] - f[base + lo * s]) / (2.0 * h)
                })
                .collect()
        })
        .collect())
}

/// Pointwise slope `|∇f|` from symmetric differences.
pub fn discrete_slope(space: &MetricMeasureSpace, f: &[f64]) -> Result<Vec<f64>> {
    let g = symmetric_gradient(space, f)?;
    Ok((0..f.len())
        .map(|i| g.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect())
}

/// `Ch_p(f) = ∫ |∇f|^p dm`, from the slope oracle when present, otherwise
/// from symmetric differences on grids.
pub fn cheeger_energy(space: &MetricMeasureSpace, f: &ScalarField, p: f64) -> Result<EnergyReport> {
    let method = if f.slope().is_some() {
        EnergyMethod::Oracle
    } else if space.is_grid() {
        EnergyMethod::DiscreteSlope
    } else {
        return Err(Error::NoDerivativeSource);
    };
    cheeger_energy_with(space, f, p, method)
}

pub fn cheeger_energy_with(
    space: &MetricMeasureSpace,
    f: &ScalarField,
    p: f64,
    method: EnergyMethod,
) -> Result<EnergyReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent p = {p} must be >= 1"
        )));
    }
    f.check_len(space)?;
    let integrate = |slope: &[f64]| -> f64 {
        slope
            .iter()
            .zip(space.weights())
            .map(|(s, w)| s.powf(p) * w)
            .collect::<NeumaierSum>()
            .value()
    };
    let value = match method {
        EnergyMethod::Oracle => integrate(f.slope().ok_or(Error::NoDerivativeSource)?),
        EnergyMethod::DiscreteSlope => integrate(&discrete_slope(space, f.values())?),
        EnergyMethod::Coarea => {
            if p != 1.0 {
                return Err(Error::InvalidArgument(
                    "the coarea method needs p = 1".into(),
                ));
            }
            coarea_total_variation(space, f.values(), COAREA_LEVELS)?
        }
    };
    Ok(EnergyReport { p, value, method })
}

fn one_dimensional(space: &MetricMeasureSpace) -> Result<(usize, bool)> {
    match space.axes() {
        [ax] => Ok((ax.cells, ax.periodic)),
        _ => Err(Error::UnsupportedGeometry(
            "total variation is computed on one-dimensional grids".into(),
        )),
    }
}

/// `Σ |f(x_{i+1}) - f(x_i)|`, wrapping on a circle.
pub fn total_variation(space: &MetricMeasureSpace, f: &ScalarField) -> Result<EnergyReport> {
    f.check_len(space)?;
    let (n, periodic) = one_dimensional(space)?;
    let v = f.values();
    let mut acc: NeumaierSum = (1..n).map(|i| (v[i] - v[i - 1]).abs()).collect();
    if periodic {
        acc.add((v[0] - v[n - 1]).abs());
    }
    Ok(EnergyReport {
        p: 1.0,
        value: acc.value(),
        method: EnergyMethod::DiscreteSlope,
    })
}

/// Total variation of a piecewise-constant field: the sum of its jumps.
pub fn total_variation_piecewise(f: &PiecewiseConstant) -> Result<EnergyReport> {
    Ok(EnergyReport {
        p: 1.0,
        value: jump_data(f)?.total_variation(),
        method: EnergyMethod::Oracle,
    })
}

/// Number of membership changes along a one-dimensional grid.
fn boundary_count(member: impl Fn(usize) -> bool, n: usize, periodic: bool) -> usize {
    let mut c = (1..n).filter(|&i| member(i) != member(i - 1)).count();
    if periodic && member(0) != member(n - 1) {
        c += 1;
    }
    c
}

/// `∫ Per({f > s}) ds` by a midpoint sweep over `levels` levels spanning the
/// sample range.
pub fn coarea_total_variation(space: &MetricMeasureSpace, f: &[f64], levels: usize) -> Result<f64> {
    let (n, periodic) = one_dimensional(space)?;
    if f.len() != n {
        return Err(Error::LengthMismatch {
            got: f.len(),
            expected: n,
        });
    }
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || levels == 0 {
        return Ok(0.0);
    }
    let ds = (hi - lo) / levels as f64;
    let counts = crate::sum::map_indices(levels, |k| {
        let s = lo + (k as f64 + 0.5) * ds;
        boundary_count(|i| f[i] > s, n, periodic) as f64
    });
    Ok(counts
        .iter()
        .map(|c| c * ds)
        .collect::<NeumaierSum>()
        .value())
}

/// `∫ Per({f > s}) ds` as a finite sum over the levels of a piecewise-constant field.
pub fn coarea_piecewise(f: &PiecewiseConstant) -> Result<f64> {
    let jd = jump_data(f)?;
    let mut values = f.values.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut acc = NeumaierSum::new();
    for w in values.windows(2) {
        let s = 0.5 * (w[0] + w[1]);
        let per = jd
            .jumps
            .iter()
            .filter(|j| j.lower <= s && s < j.upper)
            .count();
        acc.add(per as f64 * (w[1] - w[0]));
    }
    Ok(acc.value())
}

/// Perimeter `|Dχ_E|(X)`: the jump count in one dimension, or the boundary
/// edge length of a cell union on a two-dimensional torus.
pub fn perimeter(space: &MetricMeasureSpace, e: &IndicatorSet) -> Result<f64> {
    if let Some(b) = e.boundary() {
        return Ok(b.perimeter);
    }
    let axes = space.axes();
    if axes.len() == 2 && space.is_closed() && e.len() == space.len() {
        let strides = space.strides();
        let mut edges = 0.0;
        for i in 0..space.len() {
            for a in 0..2 {
                let k = space.axis_index(i, a);
                let next = i - k * strides[a] + ((k + 1) % axes[a].cells) * strides[a];
                if e.contains(i) != e.contains(next) {
                    // an edge normal to axis a has the other axis' spacing as length
                    edges += axes[1 - a].spacing();
                }
            }
        }
        return Ok(edges);
    }
    Err(Error::NoBoundaryOracle)
}

/// Cell edges of a one-dimensional grid set where membership changes, with
/// the orientation of the change.
pub fn cell_edges(space: &MetricMeasureSpace, member: &[bool]) -> Result<Vec<Jump>> {
    let ax = match space.axes() {
        [ax] => *ax,
        _ => {
            return Err(Error::UnsupportedGeometry(
                "cell edges are listed on one-dimensional grids".into(),
            ))
        }
    };
    let n = ax.cells;
    let h = ax.spacing();
    let edge = |i: usize| -> Jump {
        let right = member[i];
        let location = if ax.periodic {
            ((i as f64 - 0.5) * h).rem_euclid(ax.length)
        } else {
            ax.origin + i as f64 * h
        };
        Jump {
            location,
            lower: 0.0,
            upper: 1.0,
            orientation: if right { 1 } else { -1 },
        }
    };
    let start = if ax.periodic { 0 } else { 1 };
    Ok((start..n)
        .filter(|&i| member[i] != member[(i + n - 1) % n])
        .map(edge)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{ClosedForm, Geometry};
    use std::f64::consts::PI;

    fn circle(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::build(Geometry::CircleGrid {
            length: 1.0,
            cells: n,
        })
        .unwrap()
    }

    fn sine() -> ClosedForm {
        ClosedForm::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        }
    }

    #[test]
    fn sine_energies() {
        let s = circle(2048);
        let f = ScalarField::from_closed_form(&s, &sine());
        let e2 = cheeger_energy(&s, &f, 2.0).unwrap();
        assert_eq!(e2.method, EnergyMethod::Oracle);
        assert!((e2.value / (2.0 * PI * PI) - 1.0).abs() < 1e-6);
        let e1 = cheeger_energy(&s, &f, 1.0).unwrap();
        assert!((e1.value / 4.0 - 1.0).abs() < 1e-6, "{}", e1.value);
        let plain = ScalarField::new(f.values().to_vec());
        let d2 = cheeger_energy(&s, &plain, 2.0).unwrap();
        assert_eq!(d2.method, EnergyMethod::DiscreteSlope);
        assert!((d2.value / (2.0 * PI * PI) - 1.0).abs() < 1e-5);
        let c = cheeger_energy(&s, &ScalarField::constant(&s, 3.0), 2.0).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn sine_total_variation_and_coarea() {
        let s = circle(2048);
        let f = ScalarField::from_closed_form(&s, &sine());
        let tv = total_variation(&s, &f).unwrap().value;
        assert!((tv - 4.0).abs() < 1e-6);
        let co = coarea_total_variation(&s, f.values(), COAREA_LEVELS).unwrap();
        assert!((co - tv).abs() < 1e-4, "{co} vs {tv}");
    }

    #[test]
    fn jump_data_examples() {
        let f =
            PiecewiseConstant::from_intervals(None, &[(0.0, 2.0, 1.0), (1.0, 3.0, 1.0)]).unwrap();
        let jd = jump_data(&f).unwrap();
        assert_eq!(jd.points(), vec![0.0, 1.0, 2.0, 3.0]);
        assert!(jd.jumps.iter().all(|j| j.size() == 1.0));
        let o: Vec<i8> = jd.jumps.iter().map(|j| j.orientation).collect();
        assert_eq!(o, vec![1, 1, -1, -1]);
        assert_eq!(jd.total_variation(), coarea_piecewise(&f).unwrap());

        let two = PiecewiseConstant::on_line(vec![0.2, 0.7], vec![0.0, 2.0, 0.0]).unwrap();
        assert!(jump_data(&two)
            .unwrap()
            .jumps
            .iter()
            .all(|j| j.size() == 2.0));

        let bad = PiecewiseConstant {
            breakpoints: vec![1.0, 0.5],
            values: vec![0.0, 1.0, 0.0],
            period: None,
        };
        assert_eq!(jump_data(&bad).unwrap_err(), Error::UnsortedBreakpoints);
    }

    #[test]
    fn staircase_total_variation() {
        let f = PiecewiseConstant::on_line(vec![0.1, 0.4, 0.6], vec![0.0, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(total_variation_piecewise(&f).unwrap().value, 1.0);
        assert!((coarea_piecewise(&f).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perimeters() {
        let line = MetricMeasureSpace::build(Geometry::LineGrid {
            start: -8.0,
            end: 8.0,
            cells: 256,
        })
        .unwrap();
        let half = IndicatorSet::from_intervals(&line, &[(0.0, f64::INFINITY)]).unwrap();
        assert_eq!(perimeter(&line, &half).unwrap(), 1.0);

        let s = circle(64);
        let arc = IndicatorSet::from_intervals(&s, &[(0.0, 0.5)]).unwrap();
        assert_eq!(perimeter(&s, &arc).unwrap(), 2.0);
        assert_eq!(perimeter(&s, &arc.complement()).unwrap(), 2.0);

        let torus = MetricMeasureSpace::build(Geometry::TorusGrid {
            length: 1.0,
            cells: 32,
            dim: 2,
        })
        .unwrap();
        let sq = IndicatorSet::from_cells(&torus, |x| x[0] < 0.25 && x[1] < 0.25);
        assert!((perimeter(&torus, &sq).unwrap() - 1.0).abs() < 1e-12);
        assert!((perimeter(&torus, &sq.complement()).unwrap() - 1.0).abs() < 1e-12);

        let bare = IndicatorSet::from_membership(vec![true; 64]);
        assert_eq!(perimeter(&s, &bare).unwrap_err(), Error::NoBoundaryOracle);
    }

    #[test]
    fn cell_edges_on_circle_and_line() {
        let s = circle(8);
        let e = IndicatorSet::from_intervals(&s, &[(0.0, 0.5)]).unwrap();
        let edges = cell_edges(&s, e.membership()).unwrap();
        let locs: Vec<f64> = edges.iter().map(|j| j.location).collect();
        assert_eq!(locs, vec![0.9375, 0.4375]);
        assert_eq!(edges[0].orientation, 1);
        assert_eq!(edges[1].orientation, -1);

        let line = MetricMeasureSpace::build(Geometry::LineGrid {
            start: -1.0,
            end: 1.0,
            cells: 8,
        })
        .unwrap();
        let h = IndicatorSet::from_intervals(&line, &[(0.0, f64::INFINITY)]).unwrap();
        let edges = cell_edges(&line, h.membership()).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].location, 0.0);
    }
}
