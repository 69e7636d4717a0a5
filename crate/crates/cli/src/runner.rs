//! Scenario execution: sweeps, verdicts and output files.

use std::fs;
use std::path::Path as FsPath;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use heatbv_core::calculus::{self, jump_data, JumpData};
use heatbv_core::functionals::{self, Evaluation, FunctionalSample, Path, CSV_HEADER};
use heatbv_core::heat::validate::{
    validate_axioms, validate_gaussian_bounds, AXIOM_TOLERANCE, BOUND_BUDGET,
};
use heatbv_core::heat::HeatEngine;
use heatbv_core::limits::{
    extrapolate, sweep_map, target_constant, ConvergenceCurve, ResolutionGuard, TargetKind, Verdict,
};
use heatbv_core::oracle::quadrature_energy;
use heatbv_core::space::{IndicatorSet, MetricMeasureSpace};

use crate::config::{ExperimentConfig, FieldSpec, Membership, Scenario};
use crate::svg::{self, Plot};

/// Result of one run, already written to the output directory.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

struct Csv {
    rows: Vec<String>,
    functional: &'static str,
    geometry: &'static str,
    n: usize,
    p: f64,
    timing: bool,
}

impl Csv {
    fn push(&mut self, s: &FunctionalSample) {
        self.rows
            .push(s.csv_row(self.functional, self.geometry, self.n, self.p, self.timing));
    }

    fn text(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let space = cfg.build_space()?;
    let engine = cfg.build_engine(&space)?;
    fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating {}", cfg.output.display()))?;
    let mut csv = Csv {
        rows: Vec::new(),
        functional: functional_name(cfg.scenario),
        geometry: space.geometry().name(),
        n: space.len(),
        p: cfg.p,
        timing: cfg.timing,
    };
    let (verdicts, plot) = match cfg.scenario {
        Scenario::ValidateKernel => validate_kernel(cfg, &engine)?,
        Scenario::Membership => membership(cfg, &space, &mut csv)?,
        _ => limit_scenario(cfg, &engine, &mut csv)?,
    };
    write_outputs(&cfg.output, &csv, &verdicts, &plot)?;
    Ok(Outcome { verdicts })
}

/// Runs only the kernel validation for the config's geometry and engine.
pub fn run_validation(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    cfg.scenario = Scenario::ValidateKernel;
    run(&cfg)
}

fn functional_name(s: Scenario) -> &'static str {
    match s {
        Scenario::ValidateKernel => "kernel",
        Scenario::Sobolev => "sobolev",
        Scenario::Bv => "bv",
        Scenario::Perimeter => "set",
        Scenario::Jump => "jump",
        Scenario::Polarization => "polarization",
        Scenario::Blowup => "blowup",
        Scenario::Membership => "ks",
    }
}

fn write_outputs(dir: &FsPath, csv: &Csv, verdicts: &[Verdict], plot: &Plot) -> Result<()> {
    let write = |name: &str, body: &str| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    write("samples.csv", &csv.text())?;
    write("verdict.json", &serde_json::to_string_pretty(verdicts)?)?;
    write("curve.svg", &svg::render(plot))?;
    Ok(())
}

fn guard(cfg: &ExperimentConfig, space: &MetricMeasureSpace) -> Option<ResolutionGuard> {
    let squared = matches!(cfg.scenario, Scenario::Polarization | Scenario::Blowup);
    ResolutionGuard::for_space(space, squared)
}

/// `∫ |f'|^p` over the first axis for closed-form fields.
fn closed_form_energy(space: &MetricMeasureSpace, field: &FieldSpec, p: f64) -> Result<f64> {
    let Some(form) = field.closed_form() else {
        bail!("the target needs a closed-form field (constant, sine or ramp)");
    };
    let [ax] = space.axes() else {
        bail!("closed-form energies are computed on one-dimensional grids");
    };
    Ok(quadrature_energy(&form, p, ax.origin, ax.origin + ax.length, ax.cells)?.value)
}

fn boundary_jumps(set: &IndicatorSet) -> Result<JumpData> {
    let b = set
        .boundary()
        .context("set has no exact boundary description")?;
    Ok(JumpData {
        jumps: b.jumps.clone(),
    })
}

fn limit_scenario(
    cfg: &ExperimentConfig,
    engine: &HeatEngine,
    csv: &mut Csv,
) -> Result<(Vec<Verdict>, Plot)> {
    let space = engine.space();
    let ladder = cfg.ladder()?;
    let g = guard(cfg, space);
    let field = |spec: &Option<FieldSpec>| spec.as_ref().expect("validated").build(space);
    let set =
        |spec: &Option<crate::config::SetSpec>| spec.as_ref().expect("validated").build(space);

    // (evaluation at t, preferred path, divide by √t for the curve, target)
    type Eval<'e> = Box<dyn Fn(f64) -> heatbv_core::Result<Evaluation> + Sync + 'e>;
    let (eval, preferred, per_root_t, target): (Eval, Vec<Path>, bool, f64) = match cfg.scenario {
        Scenario::Sobolev => {
            let spec = cfg.field.as_ref().expect("validated");
            let energy = closed_form_energy(space, spec, cfg.p)?;
            let f = field(&cfg.field)?;
            let p = cfg.p;
            (
                Box::new(move |t| functionals::sobolev_functional(engine, &f, p, t)),
                vec![Path::DoubleSum],
                false,
                target_constant(TargetKind::Sobolev { p, energy })?,
            )
        }
        Scenario::Bv => {
            if let Some(spec) = &cfg.field {
                let variation = match spec.piecewise(space)? {
                    Some(pc) => calculus::total_variation_piecewise(&pc)?.value,
                    None => closed_form_energy(space, spec, 1.0)?,
                };
                let f = spec.build(space)?;
                (
                    Box::new(move |t| {
                        Ok(Evaluation {
                            samples: vec![functionals::bv_functional(engine, &f, t)?],
                        })
                    }),
                    vec![Path::DoubleSum],
                    false,
                    target_constant(TargetKind::Bv { variation })?,
                )
            } else {
                let e = set(&cfg.set)?;
                let variation = calculus::perimeter(space, &e)?;
                let chi = e.indicator();
                (
                    Box::new(move |t| {
                        Ok(Evaluation {
                            samples: vec![functionals::bv_functional(engine, &chi, t)?],
                        })
                    }),
                    vec![Path::DoubleSum],
                    false,
                    target_constant(TargetKind::Bv { variation })?,
                )
            }
        }
        Scenario::Perimeter => {
            let e = set(&cfg.set)?;
            let variation = calculus::perimeter(space, &e)?;
            (
                Box::new(move |t| functionals::set_functional(engine, &e, t)),
                vec![Path::HeatApply],
                true,
                target_constant(TargetKind::Bv { variation })?,
            )
        }
        Scenario::Jump => {
            let (fs, gs) = (
                cfg.field.as_ref().expect("validated"),
                cfg.second_field.as_ref().expect("validated"),
            );
            let (Some(fp), Some(gp)) = (fs.piecewise(space)?, gs.piecewise(space)?) else {
                bail!("the jump scenario needs step fields");
            };
            let pairing = jump_data(&fp)?.shared_pairing(&jump_data(&gp)?);
            let (f, g) = (fp.sample(space)?, gp.sample(space)?);
            (
                Box::new(move |t| functionals::jump_functional(engine, &f, &g, t)),
                vec![Path::HeatApply],
                false,
                target_constant(TargetKind::JumpPairing { pairing })?,
            )
        }
        Scenario::Polarization => {
            let (e, f) = (set(&cfg.set)?, set(&cfg.second_set)?);
            let pairing = boundary_jumps(&e)?.shared_pairing(&boundary_jumps(&f)?);
            (
                Box::new(move |t| functionals::polarization_g(engine, &e, &f, t)),
                vec![Path::LaplacianPairing, Path::GradientPairing],
                false,
                target_constant(TargetKind::JumpPairing { pairing })?,
            )
        }
        Scenario::Blowup => {
            let e = set(&cfg.set)?;
            let x = cfg.point.expect("validated");
            (
                Box::new(move |t| {
                    let start = std::time::Instant::now();
                    let value = functionals::blowup_profile(engine, &e, x, t)?;
                    Ok(Evaluation {
                        samples: vec![FunctionalSample {
                            t,
                            value,
                            path: Path::HeatApply,
                            seconds: start.elapsed().as_secs_f64(),
                            pairs: 0,
                        }],
                    })
                }),
                vec![Path::HeatApply],
                false,
                target_constant(TargetKind::Blowup)?,
            )
        }
        Scenario::ValidateKernel | Scenario::Membership => unreachable!(),
    };

    let evals = sweep_map(&ladder, g.as_ref(), eval)?;
    let mut curve_samples = Vec::new();
    let mut spread = 0.0f64;
    for ev in &evals {
        for s in &ev.samples {
            csv.push(s);
        }
        spread = spread.max(ev.path_spread());
        let mut chosen = preferred
            .iter()
            .find_map(|p| ev.samples.iter().find(|s| s.path == *p))
            .copied()
            .unwrap_or(ev.samples[0]);
        if per_root_t {
            chosen.value /= chosen.t.sqrt();
        }
        curve_samples.push(chosen);
    }
    let mut curve = extrapolate(ConvergenceCurve::new(curve_samples))?;
    let mut verdicts = vec![curve.judge(cfg.name(), target, cfg.tolerance).clone()];
    let multi_path = evals.iter().any(|e| e.samples.len() > 1);
    if multi_path && space.is_closed() && cfg.scenario != Scenario::Polarization {
        let mut v = Verdict::new(format!("{}/path-agreement", cfg.name()), spread, 0.0, 1e-8);
        v.pass = spread <= 1e-8;
        verdicts.push(v);
    }
    let plot = Plot {
        title: format!("{} ({})", cfg.name(), functional_name(cfg.scenario)),
        points: curve.samples.iter().map(|s| (s.t, s.value)).collect(),
        target: Some(target),
        limit: Some(curve.limit_estimate),
        x_label: "t".into(),
    };
    Ok((verdicts, plot))
}

fn membership(
    cfg: &ExperimentConfig,
    space: &MetricMeasureSpace,
    csv: &mut Csv,
) -> Result<(Vec<Verdict>, Plot)> {
    let f = cfg.field.as_ref().expect("validated").build(space)?;
    let radii = cfg.ladder()?.times();
    let values = heatbv_core::sum::map_indices(radii.len(), |j| {
        let start = std::time::Instant::now();
        functionals::ks_functional(space, &f, cfg.p, radii[j])
            .map(|v| (v, start.elapsed().as_secs_f64()))
    })
    .into_iter()
    .collect::<heatbv_core::Result<Vec<_>>>()?;
    for (r, (v, secs)) in radii.iter().zip(&values) {
        csv.push(&FunctionalSample {
            t: *r,
            value: *v,
            path: Path::DoubleSum,
            seconds: *secs,
            pairs: 0,
        });
    }
    // growth exponent per step: ks(ρ r) / ks(r) = ρ^{-exponent}
    let step = (1.0 / cfg.sweep.ratio).ln();
    let exponents: Vec<f64> = values
        .windows(2)
        .map(|w| (w[1].0 / w[0].0).ln() / step)
        .collect();
    let expect = cfg.expect.expect("validated");
    let (estimate, target, pass) = match expect {
        Membership::Bounded => {
            let worst = exponents.iter().fold(0.0f64, |a, e| a.max(e.abs()));
            (worst, 0.0, worst <= cfg.tolerance)
        }
        Membership::Diverges => {
            let least = exponents.iter().copied().fold(f64::INFINITY, f64::min);
            (least, 1.0, least >= 1.0)
        }
    };
    let mut v = Verdict::new(cfg.name(), estimate, target, cfg.tolerance);
    v.pass = pass;
    let plot = Plot {
        title: format!("{} (Korevaar-Schoen energy)", cfg.name()),
        points: radii
            .iter()
            .zip(&values)
            .map(|(r, (v, _))| (*r, *v))
            .collect(),
        target: None,
        limit: None,
        x_label: "r".into(),
    };
    Ok((vec![v], plot))
}

#[derive(Serialize)]
struct KernelReport<'a> {
    axioms: &'a heatbv_core::heat::validate::AxiomReport,
    gaussian_bounds: Option<&'a heatbv_core::heat::validate::GaussianBoundsReport>,
}

fn validate_kernel(cfg: &ExperimentConfig, engine: &HeatEngine) -> Result<(Vec<Verdict>, Plot)> {
    let ts = cfg.ladder()?.times();
    let axioms = validate_axioms(engine, &ts)?;
    let worst = |e: &heatbv_core::heat::validate::AxiomEntry| {
        let mut w = e
            .mass_defect
            .max(e.self_adjoint_defect)
            .max(e.max_principle_defect)
            .max(e.symmetry_defect);
        if e.semigroup_judged {
            w = w.max(e.semigroup_defect);
        }
        w
    };
    let defect = axioms.entries.iter().map(worst).fold(0.0, f64::max);
    let mut a = Verdict::new(
        format!("{}/axioms", cfg.name()),
        defect,
        0.0,
        AXIOM_TOLERANCE,
    );
    a.pass = axioms.pass;
    let mut verdicts = vec![a];
    let bounds = if engine.space().is_grid() {
        let r = validate_gaussian_bounds(engine, &ts, &[0.5, 1.0, 2.0])?;
        let largest = r.c1_lower.max(r.c1_upper).max(r.c3);
        let mut v = Verdict::new(
            format!("{}/gaussian-bounds", cfg.name()),
            largest,
            BOUND_BUDGET,
            BOUND_BUDGET,
        );
        v.rel_err = largest / BOUND_BUDGET;
        v.pass = r.pass;
        verdicts.push(v);
        Some(r)
    } else {
        None
    };
    let report = KernelReport {
        axioms: &axioms,
        gaussian_bounds: bounds.as_ref(),
    };
    fs::write(
        cfg.output.join("kernel_report.json"),
        serde_json::to_string_pretty(&report)?,
    )
    .context("writing kernel_report.json")?;
    let plot = Plot {
        title: format!("{} (largest axiom defect)", cfg.name()),
        points: axioms.entries.iter().map(|e| (e.t, worst(e))).collect(),
        target: Some(AXIOM_TOLERANCE),
        limit: None,
        x_label: "t".into(),
    };
    Ok((verdicts, plot))
}
