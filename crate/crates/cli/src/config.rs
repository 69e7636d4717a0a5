//! Experiment configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use heatbv_core::heat::{Backend, HeatEngine};
use heatbv_core::limits::Ladder;
use heatbv_core::space::{
    parse_edge_list, ClosedForm, Geometry, IndicatorSet, MetricMeasureSpace, PiecewiseConstant,
    ScalarField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ValidateKernel,
    Sobolev,
    Bv,
    Perimeter,
    Jump,
    Polarization,
    Blowup,
    Membership,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Defaults to the config file stem.
    pub name: Option<String>,
    /// Relative paths resolve against the config file's directory.
    pub output: PathBuf,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Record wall-clock seconds in `samples.csv`. Off keeps the file byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_p")]
    pub p: f64,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub engine: EngineSpec,
    pub sweep: SweepSpec,
    pub field: Option<FieldSpec>,
    pub second_field: Option<FieldSpec>,
    pub set: Option<SetSpec>,
    pub second_set: Option<SetSpec>,
    /// Evaluation point for `blowup`.
    pub point: Option<f64>,
    /// Expected behaviour for `membership`.
    pub expect: Option<Membership>,
}

fn default_tolerance() -> f64 {
    0.01
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    /// Korevaar–Schoen energy stays bounded as the radius halves.
    Bounded,
    /// It at least doubles per halving.
    Diverges,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometrySpec {
    Line {
        start: f64,
        end: f64,
        cells: usize,
    },
    Circle {
        length: f64,
        cells: usize,
    },
    Torus {
        length: f64,
        cells: usize,
        dim: usize,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        cells: Vec<usize>,
    },
    Graph {
        /// `[u, v, w]` triples.
        #[serde(default)]
        edges: Vec<(usize, usize, f64)>,
        /// Whitespace-separated `u v w` lines, `#` comments.
        edge_file: Option<PathBuf>,
        /// Defaults to unit weights.
        vertex_weights: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendSpec {
    /// Closed form on lines and boxes, image sum on circles and tori, spectral on graphs.
    #[default]
    Auto,
    ClosedForm,
    ImageSum,
    Spectral,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    #[serde(default)]
    pub backend: BackendSpec,
    /// Spectral modes kept (all when absent).
    pub modes: Option<usize>,
    pub pair_budget: Option<u64>,
    pub cache_bytes: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Largest time (largest radius for `membership`).
    pub t0: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_ratio() -> f64 {
    0.5
}

fn default_count() -> usize {
    6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    Ramp {
        lower: f64,
        upper: f64,
    },
    /// Sum of `height · χ_[a, b)` over `[a, b, height]` triples.
    Steps {
        intervals: Vec<(f64, f64, f64)>,
    },
    /// Raw per-point values.
    Values {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    /// Union of `[a, b]` pairs; `inf` is allowed on lines.
    pub intervals: Vec<(f64, f64)>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        if let GeometrySpec::Graph {
            edge_file: Some(f), ..
        } = &mut cfg.geometry
        {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("experiment")
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 0.1) {
            bail!("tolerance {} must lie in (0, 0.1]", self.tolerance);
        }
        if !(self.p >= 1.0) {
            bail!("p = {} must be >= 1", self.p);
        }
        let need = |present: bool, what: &str| -> Result<()> {
            if !present {
                bail!("scenario {:?} needs {what}", self.scenario);
            }
            Ok(())
        };
        match self.scenario {
            Scenario::ValidateKernel => {}
            Scenario::Sobolev | Scenario::Membership => {
                need(self.field.is_some(), "a [field] section")?
            }
            Scenario::Bv => need(
                self.field.is_some() || self.set.is_some(),
                "a [field] or [set] section",
            )?,
            Scenario::Perimeter => need(self.set.is_some(), "a [set] section")?,
            Scenario::Jump => {
                need(self.field.is_some(), "a [field] section")?;
                need(self.second_field.is_some(), "a [second_field] section")?;
            }
            Scenario::Polarization => {
                need(self.set.is_some(), "a [set] section")?;
                need(self.second_set.is_some(), "a [second_set] section")?;
            }
            Scenario::Blowup => {
                need(self.set.is_some(), "a [set] section")?;
                need(self.point.is_some(), "a `point` key")?;
            }
        }
        if self.scenario == Scenario::Membership {
            need(self.expect.is_some(), "an `expect` key")?;
        }
        Ok(())
    }

    pub fn ladder(&self) -> Result<Ladder> {
        Ok(Ladder::new(
            self.sweep.t0,
            self.sweep.ratio,
            self.sweep.count,
        )?)
    }

    pub fn build_space(&self) -> Result<MetricMeasureSpace> {
        let geometry = match &self.geometry {
            GeometrySpec::Line { start, end, cells } => Geometry::LineGrid {
                start: *start,
                end: *end,
                cells: *cells,
            },
            GeometrySpec::Circle { length, cells } => Geometry::CircleGrid {
                length: *length,
                cells: *cells,
            },
            GeometrySpec::Torus { length, cells, dim } => Geometry::TorusGrid {
                length: *length,
                cells: *cells,
                dim: *dim,
            },
            GeometrySpec::Box {
                lower,
                upper,
                cells,
            } => Geometry::EuclideanGrid {
                lower: lower.clone(),
                upper: upper.clone(),
                cells: cells.clone(),
            },
            GeometrySpec::Graph {
                edges,
                edge_file,
                vertex_weights,
            } => {
                let mut edges = edges.clone();
                if let Some(f) = edge_file {
                    let text = std::fs::read_to_string(f)
                        .with_context(|| format!("reading {}", f.display()))?;
                    edges.extend(parse_edge_list(&text)?);
                }
                let n = edges
                    .iter()
                    .map(|&(u, v, _)| u.max(v) + 1)
                    .max()
                    .unwrap_or(0);
                Geometry::WeightedGraph {
                    vertex_weights: vertex_weights.clone().unwrap_or_else(|| vec![1.0; n]),
                    edges,
                }
            }
        };
        Ok(MetricMeasureSpace::build(geometry)?)
    }

    pub fn build_engine<'a>(&self, space: &'a MetricMeasureSpace) -> Result<HeatEngine<'a>> {
        let backend = match (self.engine.backend, &self.geometry) {
            (BackendSpec::Auto, GeometrySpec::Line { .. } | GeometrySpec::Box { .. })
            | (BackendSpec::ClosedForm, _) => Backend::ClosedForm {
                discretization: Default::default(),
            },
            (BackendSpec::Auto, GeometrySpec::Circle { .. } | GeometrySpec::Torus { .. })
            | (BackendSpec::ImageSum, _) => Backend::ImageSum { images: None },
            (BackendSpec::Auto, GeometrySpec::Graph { .. }) | (BackendSpec::Spectral, _) => {
                let basis = if space.is_grid() {
                    heatbv_core::heat::spectral::SpectralBasis::fourier(space, self.engine.modes)?
                } else {
                    heatbv_core::heat::spectral::SpectralBasis::graph(space, self.engine.modes)?
                };
                Backend::Spectral(basis)
            }
        };
        let mut engine = HeatEngine::new(space, backend)?;
        if let Some(b) = self.engine.pair_budget {
            engine = engine.with_pair_budget(b);
        }
        if let Some(b) = self.engine.cache_bytes {
            engine = engine.with_cache_budget(b);
        }
        Ok(engine)
    }
}

fn period(space: &MetricMeasureSpace) -> Result<Option<f64>> {
    match space.geometry() {
        Geometry::LineGrid { .. } => Ok(None),
        Geometry::CircleGrid { length, .. } => Ok(Some(*length)),
        _ => bail!("step fields and interval sets need a line or circle"),
    }
}

impl FieldSpec {
    pub fn closed_form(&self) -> Option<ClosedForm> {
        match *self {
            FieldSpec::Constant { value } => Some(ClosedForm::Constant(value)),
            FieldSpec::Sine {
                amplitude,
                frequency,
            } => Some(ClosedForm::Sine {
                amplitude,
                frequency,
            }),
            FieldSpec::Ramp { lower, upper } => Some(ClosedForm::Ramp { lower, upper }),
            _ => None,
        }
    }

    pub fn piecewise(&self, space: &MetricMeasureSpace) -> Result<Option<PiecewiseConstant>> {
        match self {
            FieldSpec::Steps { intervals } => Ok(Some(PiecewiseConstant::from_intervals(
                period(space)?,
                intervals,
            )?)),
            _ => Ok(None),
        }
    }

    pub fn build(&self, space: &MetricMeasureSpace) -> Result<ScalarField> {
        if let Some(form) = self.closed_form() {
            return Ok(ScalarField::from_closed_form(space, &form));
        }
        match self {
            FieldSpec::Steps { .. } => Ok(self.piecewise(space)?.expect("steps").sample(space)?),
            FieldSpec::Values { values } => {
                let f = ScalarField::new(values.clone());
                f.check_len(space)?;
                Ok(f)
            }
            _ => unreachable!(),
        }
    }
}

impl SetSpec {
    pub fn build(&self, space: &MetricMeasureSpace) -> Result<IndicatorSet> {
        Ok(IndicatorSet::from_intervals(space, &self.intervals)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_has_position() {
        let err =
            toml::from_str::<ExperimentConfig>("scenario = \"bv\"\noutput = [1,\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn minimal_config() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
scenario = "bv"
output = "out"
[geometry]
kind = "circle"
length = 1.0
cells = 64
[sweep]
t0 = 1e-2
[set]
intervals = [[0.0, 0.5]]
"#,
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::Bv);
        assert_eq!(cfg.sweep.count, 6);
        cfg.validate().unwrap();
    }
}
