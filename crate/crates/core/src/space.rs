//! Discrete metric measure spaces approximating flat model spaces, plus the
//! field and set types sampled on them.
//!
//! Grids are uniform. Open axes (line segments, Euclidean boxes) carry
//! cell-centred points `a + (i + 1/2) h`; periodic axes (circle, torus) carry
//! vertex points `i h`, each owning the cell `[x_i - h/2, x_i + h/2)`. Every
//! point's weight is its cell volume.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells per grid axis.
pub const MIN_CELLS: usize = 4;
const TRIANGLE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    LineGrid {
        start: f64,
        end: f64,
        cells: usize,
    },
    CircleGrid {
        length: f64,
        cells: usize,
    },
    TorusGrid {
        length: f64,
        cells: usize,
        dim: usize,
    },
    EuclideanGrid {
        lower: Vec<f64>,
        upper: Vec<f64>,
        cells: Vec<usize>,
    },
    /// Vertices `0..vertex_weights.len()`, undirected edges `(u, v, w)` with
    /// conductance `w > 0`. Distances are hop counts.
    WeightedGraph {
        edges: Vec<(usize, usize, f64)>,
        vertex_weights: Vec<f64>,
    },
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::LineGrid { .. } => "line",
            Geometry::CircleGrid { .. } => "circle",
            Geometry::TorusGrid { .. } => "torus",
            Geometry::EuclideanGrid { .. } => "box",
            Geometry::WeightedGraph { .. } => "graph",
        }
    }
}

/// One uniform grid axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub length: f64,
    pub cells: usize,
    pub periodic: bool,
}

impl Axis {
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length / self.cells as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        let h = self.spacing();
        if self.periodic {
            self.origin + i as f64 * h
        } else {
            self.origin + (i as f64 + 0.5) * h
        }
    }

    /// Distance between two indices along this axis.
    #[inline]
    pub fn delta(&self, i: usize, j: usize) -> f64 {
        let m = i.abs_diff(j);
        let m = if self.periodic {
            m.min(self.cells - m)
        } else {
            m
        };
        m as f64 * self.spacing()
    }

    /// Distance between two coordinates along this axis.
    #[inline]
    pub fn coord_delta(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.periodic {
            let r = d.rem_euclid(self.length);
            r.min(self.length - r)
        } else {
            d
        }
    }
}

#[derive(Debug, Clone)]
struct GraphData {
    adjacency: Vec<Vec<(usize, f64)>>,
    hops: Vec<u32>,
}

/// A finite metric measure space. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    geometry: Geometry,
    axes: Vec<Axis>,
    strides: Vec<usize>,
    weights: Vec<f64>,
    graph: Option<GraphData>,
    len: usize,
}

impl MetricMeasureSpace {
    /// Builds and validates a space from its geometry descriptor.
    pub fn build(geometry: Geometry) -> Result<Self> {
        let (axes, graph, weights) = match &geometry {
            Geometry::LineGrid { start, end, cells } => {
                check_cells(*cells)?;
                let len = end - start;
                check_length(len)?;
                (
                    vec![Axis {
                        origin: *start,
                        length: len,
                        cells: *cells,
                        periodic: false,
                    }],
                    None,
                    None,
                )
            }
            Geometry::CircleGrid { length, cells } => {
                check_cells(*cells)?;
                check_length(*length)?;
                (
                    vec![Axis {
                        origin: 0.0,
                        length: *length,
                        cells: *cells,
                        periodic: true,
                    }],
                    None,
                    None,
                )
            }
            Geometry::TorusGrid { length, cells, dim } => {
                check_cells(*cells)?;
                check_length(*length)?;
                if *dim == 0 {
                    return Err(Error::InvalidSpace("torus dimension must be >= 1".into()));
                }
                let axis = Axis {
                    origin: 0.0,
                    length: *length,
                    cells: *cells,
                    periodic: true,
                };
                (vec![axis; *dim], None, None)
            }
            Geometry::EuclideanGrid {
                lower,
                upper,
                cells,
            } => {
                if lower.is_empty() || lower.len() != upper.len() || lower.len() != cells.len() {
                    return Err(Error::InvalidSpace(
                        "box bounds and cell counts must have equal nonzero length".into(),
                    ));
                }
                let mut axes = Vec::with_capacity(lower.len());
                for ((lo, hi), n) in lower.iter().zip(upper).zip(cells) {
                    check_cells(*n)?;
                    check_length(hi - lo)?;
                    axes.push(Axis {
                        origin: *lo,
                        length: hi - lo,
                        cells: *n,
                        periodic: false,
                    });
                }
                (axes, None, None)
            }
            Geometry::WeightedGraph {
                edges,
                vertex_weights,
            } => {
                let g = build_graph(edges, vertex_weights.len())?;
                (Vec::new(), Some(g), Some(vertex_weights.clone()))
            }
        };

        let (strides, len) = strides_for(&axes);
        let len = if graph.is_some() {
            weights.as_ref().map_or(0, Vec::len)
        } else {
            len
        };
        let weights = weights.unwrap_or_else(|| {
            let vol: f64 = axes.iter().map(Axis::spacing).product();
            vec![vol; len]
        });

        let space = MetricMeasureSpace {
            geometry,
            axes,
            strides,
            weights,
            graph,
            len,
        };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<()> {
        if self.len < 2 {
            return Err(Error::InvalidSpace(
                "space needs at least two points".into(),
            ));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidSpace(format!(
                "weight {w} is not strictly positive"
            )));
        }
        if !self.total_mass().is_finite() {
            return Err(Error::InvalidSpace("total mass is not finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d157);
        for _ in 0..TRIANGLE_SAMPLES {
            let i = rng.gen_range(0..self.len);
            let j = rng.gen_range(0..self.len);
            let k = rng.gen_range(0..self.len);
            let dij = self.dist(i, j);
            if self.dist(i, i) != 0.0 || (dij - self.dist(j, i)).abs() > 1e-12 * (1.0 + dij) {
                return Err(Error::InvalidSpace(format!(
                    "metric not symmetric at ({i}, {j})"
                )));
            }
            if dij > self.dist(i, k) + self.dist(k, j) + 1e-12 * (1.0 + dij) {
                return Err(Error::InvalidSpace(format!(
                    "triangle inequality fails at ({i}, {j}, {k})"
                )));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Grid axes; empty for graphs.
    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn is_grid(&self) -> bool {
        !self.axes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// True when every axis is periodic (circle, torus).
    pub fn is_closed(&self) -> bool {
        self.is_grid() && self.axes.iter().all(|a| a.periodic)
    }

    /// Largest grid spacing; `None` for graphs.
    pub fn spacing(&self) -> Option<f64> {
        self.axes.iter().map(Axis::spacing).reduce(f64::max)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        crate::sum::compensated(&self.weights)
    }

    /// Analytic volume of the continuum geometry (vertex weight sum for graphs).
    pub fn analytic_volume(&self) -> f64 {
        match &self.geometry {
            Geometry::WeightedGraph { vertex_weights, .. } => vertex_weights.iter().sum(),
            _ => self.axes.iter().map(|a| a.length).product(),
        }
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Multi-index of a point (row-major, last axis fastest).
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (a, s) in self.strides.iter().enumerate() {
            idx[a] = i / s;
            i %= s;
        }
        idx
    }

    #[inline]
    pub fn axis_index(&self, i: usize, axis: usize) -> usize {
        (i / self.strides[axis]) % self.axes[axis].cells
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        (0..self.axes.len())
            .map(|a| self.axes[a].coord(self.axis_index(i, a)))
            .collect()
    }

    /// Coordinate along the first axis.
    #[inline]
    pub fn coord0(&self, i: usize) -> f64 {
        self.axes[0].coord(self.axis_index(i, 0))
    }

    /// Geodesic distance between two points.
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if let Some(g) = &self.graph {
            return g.hops[i * self.len + j] as f64;
        }
        if self.axes.len() == 1 {
            return self.axes[0].delta(i, j);
        }
        let mut s = 0.0;
        for a in 0..self.axes.len() {
            let d = self.axes[a].delta(self.axis_index(i, a), self.axis_index(j, a));
            s += d * d;
        }
        s.sqrt()
    }

    /// Distance from a point to an arbitrary coordinate tuple.
    pub fn dist_to_coords(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, axis) in self.axes.iter().enumerate() {
            let d = axis.coord_delta(axis.coord(self.axis_index(i, a)), x[a]);
            s += d * d;
        }
        s.sqrt()
    }

    pub fn diameter(&self) -> f64 {
        match &self.geometry {
            Geometry::WeightedGraph { .. } => {
                let g = self.graph.as_ref().expect("graph data");
                g.hops.iter().copied().max().unwrap_or(0) as f64
            }
            _ => self
                .axes
                .iter()
                .map(|a| {
                    let l = if a.periodic { a.length / 2.0 } else { a.length };
                    l * l
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Measure of the open ball `{y : d(x, y) < r}`.
    pub fn ball_mass(&self, center: usize, r: f64) -> f64 {
        let mut acc = crate::sum::NeumaierSum::new();
        for j in 0..self.len {
            if self.dist(center, j) < r {
                acc.add(self.weights[j]);
            }
        }
        acc.value()
    }

    /// Graph adjacency `(neighbour, conductance)`; `None` for grids.
    pub fn adjacency(&self) -> Option<&[Vec<(usize, f64)>]> {
        self.graph.as_ref().map(|g| g.adjacency.as_slice())
    }

    /// Index of the grid point nearest to `x` (per axis rounding).
    pub fn nearest_point(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for (a, axis) in self.axes.iter().enumerate() {
            let h = axis.spacing();
            let u = if axis.periodic {
                ((x[a] - axis.origin) / h)
                    .round()
                    .rem_euclid(axis.cells as f64)
            } else {
                ((x[a] - axis.origin) / h - 0.5)
                    .round()
                    .clamp(0.0, (axis.cells - 1) as f64)
            };
            idx += u as usize * self.strides[a];
        }
        idx
    }
}

fn check_cells(n: usize) -> Result<()> {
    if n < MIN_CELLS {
        Err(Error::ResolutionTooSmall {
            got: n,
            min: MIN_CELLS,
        })
    } else {
        Ok(())
    }
}

fn check_length(l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveLength(l))
    }
}

fn strides_for(axes: &[Axis]) -> (Vec<usize>, usize) {
    let mut strides = vec![1; axes.len()];
    let mut total = 1;
    for a in (0..axes.len()).rev() {
        strides[a] = total;
        total *= axes[a].cells;
    }
    (strides, total)
}

fn build_graph(edges: &[(usize, usize, f64)], n: usize) -> Result<GraphData> {
    let mut adjacency = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidSpace(format!("edge ({u}, {v}) out of range")));
        }
        if u == v {
            return Err(Error::InvalidSpace(format!("self-loop at {u}")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidSpace(format!(
                "edge ({u}, {v}) has weight {w}"
            )));
        }
        adjacency[u].push((v, w));
        adjacency[v].push((u, w));
    }
    let mut hops = vec![u32::MAX; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        hops[s * n + s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = hops[s * n + u];
            for &(v, _) in &adjacency[u] {
                if hops[s * n + v] == u32::MAX {
                    hops[s * n + v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    if hops.contains(&u32::MAX) {
        return Err(Error::InvalidSpace("graph is not connected".into()));
    }
    Ok(GraphData { adjacency, hops })
}

/// Parses the `u v w` edge-list format (0-based vertices, `w > 0`). Blank
/// lines and `#` comments are ignored.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad =
            || Error::InvalidSpace(format!("edge list line {}: expected `u v w`", lineno + 1));
        if parts.len() != 3 {
            return Err(bad());
        }
        let u = parts[0].parse().map_err(|_| bad())?;
        let v = parts[1].parse().map_err(|_| bad())?;
        let w: f64 = parts[2].parse().map_err(|_| bad())?;
        if !(w > 0.0) {
            return Err(Error::InvalidSpace(format!(
                "edge list line {}: weight must be positive",
                lineno + 1
            )));
        }
        edges.push((u, v, w));
    }
    Ok(edges)
}

/// Real values on the points of a space, with an optional pointwise slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    slope: Option<Vec<f64>>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        ScalarField {
            values,
            slope: None,
        }
    }

    /// Attaches a slope oracle `|∇f|`; every entry must be nonnegative.
    pub fn with_slope(mut self, slope: Vec<f64>) -> Result<Self> {
        if slope.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                got: slope.len(),
                expected: self.values.len(),
            });
        }
        if slope.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument(
                "slope oracle must be nonnegative".into(),
            ));
        }
        self.slope = Some(slope);
        Ok(self)
    }

    pub fn from_fn(space: &MetricMeasureSpace, f: impl Fn(&[f64]) -> f64) -> Self {
        ScalarField::new((0..space.len()).map(|i| f(&space.coords(i))).collect())
    }

    pub fn constant(space: &MetricMeasureSpace, c: f64) -> Self {
        ScalarField::new(vec![c; space.len()])
    }

    /// Samples a closed form along the first axis and attaches its slope.
    pub fn from_closed_form(space: &MetricMeasureSpace, form: &ClosedForm) -> Self {
        let xs: Vec<f64> = (0..space.len()).map(|i| space.coord0(i)).collect();
        let values = xs.iter().map(|&x| form.value(x)).collect();
        let slope = xs.iter().map(|&x| form.derivative(x).abs()).collect();
        ScalarField {
            values,
            slope: Some(slope),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slope(&self) -> Option<&[f64]> {
        self.slope.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarField {
            values: self.values.iter().map(|v| c * v).collect(),
            slope: self
                .slope
                .as_ref()
                .map(|s| s.iter().map(|v| c.abs() * v).collect()),
        }
    }

    pub fn check_len(&self, space: &MetricMeasureSpace) -> Result<()> {
        if self.values.len() == space.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                got: self.values.len(),
                expected: space.len(),
            })
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Closed-form one-dimensional profiles with exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClosedForm {
    Constant(f64),
    /// `amplitude * sin(2π frequency x)`
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    /// `clamp(x, lower, upper)`
    Ramp {
        lower: f64,
        upper: f64,
    },
}

impl ClosedForm {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ClosedForm::Constant(c) => c,
            ClosedForm::Sine {
                amplitude,
                frequency,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * x).sin(),
            ClosedForm::Ramp { lower, upper } => x.clamp(lower, upper),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ClosedForm::Constant(_) => 0.0,
            ClosedForm::Sine {
                amplitude,
                frequency,
            } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                amplitude * w * (w * x).cos()
            }
            ClosedForm::Ramp { lower, upper } => {
                if x > lower && x < upper {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A jump of a one-dimensional piecewise-constant function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub location: f64,
    pub lower: f64,
    pub upper: f64,
    /// Sign of (right value - left value): the one-dimensional polar vector.
    pub orientation: i8,
}

impl Jump {
    pub fn size(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Piecewise-constant function of one variable.
///
/// On a line, `values` has one more entry than `breakpoints`:
/// `values[0]` left of the first breakpoint, `values[k]` on
/// `[breakpoints[k-1], breakpoints[k])`. With a `period`, the function lives
/// on `[0, period)`, `values[k]` holds on `[breakpoints[k], breakpoints[k+1])`
/// and the last piece wraps around to the first breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub period: Option<f64>,
}

impl PiecewiseConstant {
    pub fn on_line(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let pc = PiecewiseConstant {
            breakpoints,
            values,
            period: None,
        };
        pc.check()?;
        Ok(pc)
    }

    pub fn on_circle(period: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let pc = PiecewiseConstant {
            breakpoints,
            values,
            period: Some(period),
        };
        pc.check()?;
        Ok(pc)
    }

    /// Sum of indicator functions of intervals `[a, b)`, each weighted by a
    /// height. On a circle the intervals are arcs taken modulo the period.
    pub fn from_intervals(period: Option<f64>, intervals: &[(f64, f64, f64)]) -> Result<Self> {
        let mut events: Vec<(f64, f64)> = Vec::new();
        let mut base = 0.0;
        for &(a, b, height) in intervals {
            if !(b > a) {
                return Err(Error::InvalidArgument(format!("empty interval [{a}, {b})")));
            }
            match period {
                None => {
                    if a.is_finite() {
                        events.push((a, height));
                    } else {
                        base += height;
                    }
                    if b.is_finite() {
                        events.push((b, -height));
                    }
                }
                Some(l) => {
                    if b - a >= l {
                        base += height;
                        continue;
                    }
                    let a0 = a.rem_euclid(l);
                    let b0 = b.rem_euclid(l);
                    events.push((a0, height));
                    events.push((b0, -height));
                    if b0 <= a0 {
                        base += height;
                    }
                }
            }
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut deltas: Vec<f64> = Vec::new();
        for (x, d) in events {
            match breakpoints.last() {
                Some(&last) if last == x => *deltas.last_mut().unwrap() += d,
                _ => {
                    breakpoints.push(x);
                    deltas.push(d);
                }
            }
        }
        let mut values = Vec::with_capacity(breakpoints.len() + 1);
        let mut v = base;
        if period.is_none() {
            values.push(v);
        }
        for d in &deltas {
            v += d;
            values.push(v);
        }
        if values.is_empty() {
            values.push(base);
        }
        let mut pc = PiecewiseConstant {
            breakpoints,
            values,
            period,
        };
        pc.merge_flat();
        pc.check()?;
        Ok(pc)
    }

    fn merge_flat(&mut self) {
        let mut bp = Vec::new();
        let mut vals = Vec::new();
        match self.period {
            None => {
                vals.push(self.values[0]);
                for (k, &b) in self.breakpoints.iter().enumerate() {
                    let v = self.values[k + 1];
                    if v != *vals.last().unwrap() {
                        bp.push(b);
                        vals.push(v);
                    }
                }
            }
            Some(_) => {
                let n = self.breakpoints.len();
                for k in 0..n {
                    let prev = self.values[(k + n - 1) % n];
                    if self.values[k] != prev {
                        bp.push(self.breakpoints[k]);
                        vals.push(self.values[k]);
                    }
                }
                if vals.is_empty() {
                    vals.push(self.values[0]);
                }
            }
        }
        self.breakpoints = bp;
        self.values = vals;
    }

    fn check(&self) -> Result<()> {
        if self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::UnsortedBreakpoints);
        }
        let expected = match self.period {
            None => self.breakpoints.len() + 1,
            Some(l) => {
                if !(l > 0.0) {
                    return Err(Error::NonPositiveLength(l));
                }
                if self.breakpoints.iter().any(|b| *b < 0.0 || *b >= l) {
                    return Err(Error::InvalidArgument(
                        "periodic breakpoints must lie in [0, period)".into(),
                    ));
                }
                self.breakpoints.len().max(1)
            }
        };
        if self.values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} values for {} breakpoints",
                self.breakpoints.len()
            )));
        }
        Ok(())
    }

    /// Value at `x` (right-continuous).
    pub fn eval(&self, x: f64) -> f64 {
        match self.period {
            None => {
                let k = self.breakpoints.partition_point(|b| *b <= x);
                self.values[k]
            }
            Some(l) => {
                if self.breakpoints.is_empty() {
                    return self.values[0];
                }
                let x = x.rem_euclid(l);
                let k = self.breakpoints.partition_point(|b| *b <= x);
                let n = self.breakpoints.len();
                self.values[(k + n - 1) % n]
            }
        }
    }

    /// One-sided values `(left, right)` at breakpoint `k`.
    pub fn one_sided(&self, k: usize) -> (f64, f64) {
        match self.period {
            None => (self.values[k], self.values[k + 1]),
            Some(_) => {
                let n = self.breakpoints.len();
                (self.values[(k + n - 1) % n], self.values[k])
            }
        }
    }

    pub fn sample(&self, space: &MetricMeasureSpace) -> Result<ScalarField> {
        if space.dim() != 1 {
            return Err(Error::UnsupportedGeometry(
                "piecewise-constant fields live on one-dimensional grids".into(),
            ));
        }
        Ok(ScalarField::new(
            (0..space.len())
                .map(|i| self.eval(space.coord0(i)))
                .collect(),
        ))
    }
}

/// Exact boundary of a one-dimensional set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOracle {
    pub perimeter: f64,
    pub jumps: Vec<Jump>,
}

/// Membership of each point in a set `E`, with an optional exact boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    membership: Vec<bool>,
    boundary: Option<BoundaryOracle>,
}

impl IndicatorSet {
    pub fn from_membership(membership: Vec<bool>) -> Self {
        IndicatorSet {
            membership,
            boundary: None,
        }
    }

    /// Union of intervals `[a, b)` on a line or arcs on a circle. Infinite
    /// endpoints are allowed on a line (half-lines).
    pub fn from_intervals(space: &MetricMeasureSpace, intervals: &[(f64, f64)]) -> Result<Self> {
        let period = match space.geometry() {
            Geometry::LineGrid { .. } => None,
            Geometry::CircleGrid { length, .. } => Some(*length),
            _ => {
                return Err(Error::UnsupportedGeometry(
                    "interval sets need a line or circle grid".into(),
                ))
            }
        };
        let tagged: Vec<(f64, f64, f64)> = intervals.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        let raw = PiecewiseConstant::from_intervals(period, &tagged)?;
        // union: clip heights to {0, 1}
        let clipped = PiecewiseConstant {
            values: raw
                .values
                .iter()
                .map(|v| if *v > 0.0 { 1.0 } else { 0.0 })
                .collect(),
            ..raw
        };
        let mut pc = clipped;
        pc.merge_flat();
        let membership = (0..space.len())
            .map(|i| pc.eval(space.coord0(i)) > 0.5)
            .collect();
        let jumps = crate::calculus::jump_data(&pc)?.jumps;
        Ok(IndicatorSet {
            membership,
            boundary: Some(BoundaryOracle {
                perimeter: jumps.len() as f64,
                jumps,
            }),
        })
    }

    /// Union of grid cells selected by a predicate on point coordinates.
    pub fn from_cells(space: &MetricMeasureSpace, pred: impl Fn(&[f64]) -> bool) -> Self {
        IndicatorSet::from_membership((0..space.len()).map(|i| pred(&space.coords(i))).collect())
    }

    pub fn membership(&self) -> &[bool] {
        &self.membership
    }

    pub fn boundary(&self) -> Option<&BoundaryOracle> {
        self.boundary.as_ref()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.membership[i]
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn indicator(&self) -> ScalarField {
        ScalarField::new(
            self.membership
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
    }

    pub fn measure(&self, space: &MetricMeasureSpace) -> f64 {
        self.membership
            .iter()
            .zip(space.weights())
            .filter(|(b, _)| **b)
            .map(|(_, w)| *w)
            .collect::<crate::sum::NeumaierSum>()
            .value()
    }

    /// Complement `X \ E`; boundary orientations flip.
    pub fn complement(&self) -> Self {
        IndicatorSet {
            membership: self.membership.iter().map(|b| !b).collect(),
            boundary: self.boundary.as_ref().map(|b| BoundaryOracle {
                perimeter: b.perimeter,
                jumps: b
                    .jumps
                    .iter()
                    .map(|j| Jump {
                        orientation: -j.orientation,
                        ..*j
                    })
                    .collect(),
            }),
        }
    }
}
