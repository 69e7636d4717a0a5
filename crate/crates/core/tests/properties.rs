use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;

use heatbv_core::calculus;
use heatbv_core::functionals;
use heatbv_core::heat::HeatEngine;
use heatbv_core::limits::{extrapolate, sweep, Ladder};
use heatbv_core::oracle::{self, PairFunctional};
use heatbv_core::space::{
    ClosedForm, Geometry, IndicatorSet, MetricMeasureSpace, PiecewiseConstant, ScalarField,
};

fn circle(cells: usize) -> MetricMeasureSpace {
    MetricMeasureSpace::build(Geometry::CircleGrid { length: 1.0, cells }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn torus_metric_axioms(a in 0usize..256, b in 0usize..256, c in 0usize..256) {
        let s = MetricMeasureSpace::build(Geometry::TorusGrid { length: 1.0, cells: 16, dim: 2 }).unwrap();
        prop_assert_eq!(s.dist(a, b), s.dist(b, a));
        prop_assert_eq!(s.dist(a, a), 0.0);
        prop_assert!(s.dist(a, c) <= s.dist(a, b) + s.dist(b, c) + 1e-15);
    }

    #[test]
    fn ball_mass_is_monotone(x in 0usize..200, r in 0.001f64..0.6, dr in 0.0f64..0.2) {
        let s = circle(200);
        prop_assert!(s.ball_mass(x, r) <= s.ball_mass(x, r + dr));
    }

    #[test]
    fn jump_functional_scaling(c in -5.0f64..5.0, a in 0.0f64..0.5, len in 0.05f64..0.45) {
        let s = circle(512);
        let e = HeatEngine::image_sum(&s).unwrap();
        let f = IndicatorSet::from_intervals(&s, &[(a, a + len)]).unwrap().indicator();
        let g = ScalarField::from_closed_form(&s, &ClosedForm::Sine { amplitude: 1.0, frequency: 2.0 });
        let t = 1e-3;
        let base = functionals::jump_functional(&e, &f, &g, t).unwrap();
        let scaled = functionals::jump_functional(&e, &f.scaled(c), &g, t).unwrap();
        for (x, y) in base.samples.iter().zip(&scaled.samples) {
            prop_assert!((y.value - c * x.value).abs() <= 1e-12 * (1.0 + x.value.abs() * c.abs()));
        }
    }

    #[test]
    fn set_and_bv_functionals_agree(a in 0.0f64..1.0, len in 0.05f64..0.9, t in 1e-4f64..1e-2) {
        let s = circle(1024);
        let e = HeatEngine::image_sum(&s).unwrap();
        let set = IndicatorSet::from_intervals(&s, &[(a, a + len)]).unwrap();
        let ev = functionals::set_functional(&e, &set, t).unwrap();
        prop_assert!(ev.path_spread() < 1e-8);
        let bv = functionals::bv_functional(&e, &set.indicator(), t).unwrap().value;
        prop_assert!((bv * t.sqrt() - ev.primary()).abs() <= 1e-10 * ev.primary());
    }

    #[test]
    fn enumeration_certifies_double_sums(p in 1.0f64..4.0, t in 1e-3f64..5e-2, freq in 1u32..4) {
        let s = circle(128);
        let e = HeatEngine::image_sum(&s).unwrap();
        let f = ScalarField::from_closed_form(&s, &ClosedForm::Sine { amplitude: 1.0, frequency: f64::from(freq) });
        let main = functionals::sobolev_functional(&e, &f, p, t).unwrap().primary();
        let o = oracle::pair_enumeration(&s, PairFunctional::Sobolev { f: f.values(), p }, t).unwrap();
        prop_assert!((main - o.value).abs() <= 1e-12 * o.value.abs() + o.bound, "{} vs {:?}", main, o);
    }
}

#[test]
fn space_examples() {
    let c = circle(4);
    assert_eq!(c.len(), 4);
    assert!(c.weights().iter().all(|&w| w == 0.25));
    assert_eq!(c.dist(0, 2), 0.5);
    let line = MetricMeasureSpace::build(Geometry::LineGrid {
        start: 0.0,
        end: 1.0,
        cells: 4,
    })
    .unwrap();
    assert_relative_eq!(line.total_mass(), 1.0);
    let torus = MetricMeasureSpace::build(Geometry::TorusGrid {
        length: 1.0,
        cells: 16,
        dim: 2,
    })
    .unwrap();
    assert_eq!(torus.len(), 256);
    let far = torus.nearest_point(&[0.5, 0.5]);
    assert_relative_eq!(torus.dist(0, far), 2f64.sqrt() / 2.0, epsilon = 1e-12);

    let square = MetricMeasureSpace::build(Geometry::EuclideanGrid {
        lower: vec![0.0, 0.0],
        upper: vec![1.0, 1.0],
        cells: vec![50, 50],
    })
    .unwrap();
    let mid = square.nearest_point(&[0.5, 0.5]);
    let expected = PI * 0.09;
    // boundary band of two cells around the circle of radius 0.3
    let band = 2.0 * PI * 0.3 * 2.0 * 0.02;
    assert!((square.ball_mass(mid, 0.3) - expected).abs() <= band);
}

#[test]
fn layer_cake_for_a_staircase() {
    let s = circle(2048);
    let e = HeatEngine::image_sum(&s).unwrap();
    let pc = PiecewiseConstant::from_intervals(
        Some(1.0),
        &[(0.1, 0.8, 1.0), (0.2, 0.6, 0.5), (0.3, 0.4, 2.0)],
    )
    .unwrap();
    let f = pc.sample(&s).unwrap();
    let mut levels: Vec<f64> = pc.values.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    for &t in &[1e-2, 1e-3] {
        let bv = functionals::bv_functional(&e, &f, t).unwrap().value * t.sqrt();
        let mut cake = 0.0;
        for w in levels.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let set = IndicatorSet::from_membership(f.values().iter().map(|&v| v > mid).collect());
            cake += functionals::set_functional(&e, &set, t).unwrap().primary() * (w[1] - w[0]);
        }
        assert!((bv - cake).abs() <= 1e-9 * bv, "t={t}: {bv} vs {cake}");
    }
}

#[test]
fn ramp_on_the_line_matches_second_moment() {
    let s = MetricMeasureSpace::build(Geometry::LineGrid {
        start: -8.0,
        end: 8.0,
        cells: 4096,
    })
    .unwrap();
    let e = HeatEngine::closed_form(&s).unwrap();
    let ramp = ClosedForm::Ramp {
        lower: -2.0,
        upper: 2.0,
    };
    let f = ScalarField::from_closed_form(&s, &ramp);
    let energy = oracle::quadrature_energy(&ramp, 2.0, -8.0, 8.0, 4096)
        .unwrap()
        .value;
    let h = 16.0 / 4096.0;
    for &t in &[1e-2, 4e-3, 1.6e-3] {
        let v = functionals::sobolev_functional(&e, &f, 2.0, t)
            .unwrap()
            .primary();
        // cell averaging adds h²/6 to the kernel's second moment 2t
        let grid = 2.0 * energy * h * h / (12.0 * t);
        assert!(
            (v - 2.0 * energy - grid).abs() <= 2.0 * t.sqrt(),
            "t={t}: {v} vs {}",
            2.0 * energy
        );
    }
}

#[test]
fn constant_curve_on_the_half_line() {
    let s = MetricMeasureSpace::build(Geometry::LineGrid {
        start: -8.0,
        end: 8.0,
        cells: 4096,
    })
    .unwrap();
    let e = HeatEngine::closed_form(&s).unwrap();
    let chi = IndicatorSet::from_intervals(&s, &[(0.0, f64::INFINITY)])
        .unwrap()
        .indicator();
    let ladder = Ladder::new(1e-2, 0.5, 6).unwrap();
    let curve = sweep(&ladder, None, |t| functionals::bv_functional(&e, &chi, t)).unwrap();
    for s in &curve.samples {
        assert!((s.value - 2.0 / PI.sqrt()).abs() < 1e-12);
    }
    let curve = extrapolate(curve).unwrap();
    assert!((curve.limit_estimate - 2.0 / PI.sqrt()).abs() < 1e-12);
}

#[test]
fn coarea_matches_total_variation() {
    let s = circle(4096);
    let f = ScalarField::from_closed_form(
        &s,
        &ClosedForm::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        },
    );
    let tv = calculus::total_variation(&s, &f).unwrap().value;
    let co = calculus::coarea_total_variation(&s, f.values(), calculus::COAREA_LEVELS).unwrap();
    assert!((tv - 4.0).abs() < 1e-3);
    assert!((co - tv).abs() < 1e-3 * tv);
}

#[test]
fn sine_limit_matches_quadrature() {
    let s = circle(2048);
    let e = HeatEngine::image_sum(&s).unwrap();
    let f = ScalarField::from_closed_form(
        &s,
        &ClosedForm::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        },
    );
    let ladder = Ladder::new(1e-2, 0.5, 6).unwrap();
    let curve = sweep(&ladder, None, |t| {
        Ok(functionals::sobolev_functional(&e, &f, 2.0, t)?.samples[0])
    })
    .unwrap();
    let est = extrapolate(curve).unwrap().limit_estimate;
    assert!((est - 4.0 * PI * PI).abs() < 5e-3 * 4.0 * PI * PI);
}
