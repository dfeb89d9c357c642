use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::*;
use crate::frontend::{parse, parse_expr};
use crate::semantics::GlobalState;

fn system(vars: &[&str], rhs: &[&str]) -> FlowSystem {
    FlowSystem::new(
        vars.iter().map(|s| s.to_string()).collect(),
        rhs.iter().map(|s| parse_expr(s).unwrap()).collect(),
        Valuation::new(),
    )
}

fn single(var: &str, iv: Interval) -> BoxMap {
    [(var.to_string(), iv)].into()
}

fn hull_of(segs: &[FlowpipeSegment], var: &str) -> Interval {
    segs.iter().map(|s| s.values[var]).reduce(|a, b| a.hull(&b)).unwrap()
}

#[test]
fn constant_rate_matches_closed_form() {
    let segs = compute_flowpipes(&system(&["temp"], &["-1"]), &single("temp", Interval::point(20.0)), 0.5, 3.0)
        .unwrap();
    assert_eq!(segs.len(), 6);
    for seg in &segs {
        let (a, b) = (seg.span.lo, seg.span.hi);
        let got = seg.values["temp"];
        assert!((got.lo - (20.0 - b)).abs() <= 1e-9 && (got.hi - (20.0 - a)).abs() <= 1e-9);
        assert!(got.lo <= 20.0 - b && got.hi >= 20.0 - a);
    }
}

#[test]
fn exponential_range_is_tight_at_fine_steps() {
    let segs = compute_flowpipes(&system(&["x"], &["x"]), &single("x", Interval::point(1.0)), 0.01, 0.5).unwrap();
    assert_eq!(segs.len(), 50);
    let hull = hull_of(&segs, "x");
    let exact = (1.0f64, 0.5f64.exp());
    assert!(hull.lo <= exact.0 && hull.hi >= exact.1);
    let hausdorff = (exact.0 - hull.lo).max(hull.hi - exact.1);
    assert!(hausdorff < 1e-3, "{hausdorff}");
    for seg in &segs {
        let (a, b) = (seg.span.lo, seg.span.hi);
        assert!(seg.values["x"].lo <= a.exp() && seg.values["x"].hi >= b.exp());
        assert!(seg.values["x"].hi - b.exp() < 1e-6 && a.exp() - seg.values["x"].lo < 1e-6);
    }
}

#[test]
fn linear_with_interval_offset_and_decay() {
    // x' = -2x + 1 from [0, 1]: x(t) = 1/2 + (x0 - 1/2) e^(-2t).
    let segs =
        compute_flowpipes(&system(&["x"], &["-2 * x + 1"]), &single("x", Interval::closed(0.0, 1.0)), 0.25, 1.0)
            .unwrap();
    for seg in &segs {
        for x0 in [0.0, 0.3, 1.0] {
            for t in [seg.span.lo, seg.span.mid(), seg.span.hi] {
                let exact = 0.5 + (x0 - 0.5) * (-2.0 * t).exp();
                assert!(seg.values["x"].contains(exact), "{t} {x0}");
            }
        }
    }
}

fn rk4(f: impl Fn(f64) -> f64, x0: f64, t: f64) -> f64 {
    let n = (t / 1e-3).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut x = x0;
    for _ in 0..n {
        let k1 = f(x);
        let k2 = f(x + h / 2.0 * k1);
        let k3 = f(x + h / 2.0 * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

#[test]
fn nonlinear_monte_carlo_has_no_escapes() {
    let segs = compute_flowpipes(&system(&["x"], &["-(x * x)"]), &single("x", Interval::closed(1.0, 2.0)), 0.1, 2.0)
        .unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut escapes = 0;
    for _ in 0..1000 {
        let x0: f64 = rng.gen_range(1.0..=2.0);
        for seg in &segs {
            for t in [seg.span.mid(), seg.span.hi] {
                if !seg.values["x"].contains(rk4(|x| -x * x, x0, t)) {
                    escapes += 1;
                }
            }
        }
    }
    assert_eq!(escapes, 0);
}

#[test]
fn coupled_rotation_stays_enclosed() {
    let segs = compute_flowpipes(
        &system(&["x", "y"], &["y", "-x"]),
        &[("x".to_string(), Interval::closed(0.9, 1.0)), ("y".to_string(), Interval::point(0.0))].into(),
        0.1,
        1.0,
    )
    .unwrap();
    for seg in &segs {
        let t = seg.span.hi;
        for x0 in [0.9, 1.0] {
            assert!(seg.values["x"].contains(x0 * t.cos()));
            assert!(seg.values["y"].contains(-x0 * t.sin()));
        }
    }
}

#[test]
fn divergent_system_reports_enclosure_failure() {
    let r = compute_flowpipes(&system(&["x"], &["x * x"]), &single("x", Interval::point(1.0)), 0.5, 2.0);
    assert!(matches!(r, Err(FlowError::EnclosureFailure(_))), "{r:?}");
}

#[test]
fn invariant_trimming_examples() {
    let inv = parse_expr("temp >= 18").unwrap();
    let none = Valuation::new();
    let b = trim_box(&single("temp", Interval::closed(17.5, 18.5)), &inv, &none).unwrap().unwrap();
    assert_eq!(b["temp"], Interval::closed(18.0, 18.5));
    assert!(trim_box(&single("temp", Interval::closed(16.0, 17.0)), &inv, &none).unwrap().is_none());
    let b0 = single("temp", Interval::closed(16.0, 17.0));
    assert_eq!(trim_box(&b0, &Expr::Bool(true), &none).unwrap().unwrap(), b0);
    // Disjunctions are only checked for satisfiability.
    let or = parse_expr("temp < 16.5 || temp > 30").unwrap();
    assert_eq!(trim_box(&b0, &or, &none).unwrap().unwrap(), b0);
    // Mirrored atoms and chained bounds.
    let both = parse_expr("18 <= temp && temp < 19").unwrap();
    let t = trim_box(&single("temp", Interval::closed(17.0, 20.0)), &both, &none).unwrap().unwrap();
    assert_eq!(t["temp"], Interval::closed(18.0, 19.0));
}

#[test]
fn invariant_keeps_time_connected_prefix() {
    let segs = compute_flowpipes(&system(&["temp"], &["-1"]), &single("temp", Interval::point(20.0)), 0.5, 3.0)
        .unwrap();
    let kept = intersect_invariant(&segs, &parse_expr("temp >= 18").unwrap(), &Valuation::new()).unwrap();
    assert_eq!(kept.len(), 5);
    assert_eq!(kept[4].values["temp"], Interval::point(18.0));
}

#[test]
fn guard_window_examples() {
    let segs = compute_flowpipes(&system(&["temp"], &["-1"]), &single("temp", Interval::point(20.0)), 0.5, 3.0)
        .unwrap();
    let none = Valuation::new();
    let g = guard_window("hws", &segs, &parse_expr("temp > 18 && temp < 19").unwrap(), &none, 0.0).unwrap();
    let w = g.window.unwrap();
    assert_eq!((w.lo, w.hi), (1.0, 2.0));
    let g = guard_window("hws", &segs, &parse_expr("temp > 100").unwrap(), &none, 0.0).unwrap();
    assert!(g.window.is_none() && !g.may_leave);
    let g = guard_window("hws", &segs, &parse_expr("temp > 19.9").unwrap(), &none, 4.0).unwrap();
    assert_eq!(g.window.unwrap().lo, 4.0);
}

#[test]
fn hull_over_intersecting_segments() {
    let segs = vec![
        FlowpipeSegment {
            span: Interval::half_open(0.0, 0.5),
            values: single("temp", Interval::closed(19.0, 19.5)),
        },
        FlowpipeSegment {
            span: Interval::closed(0.5, 1.0),
            values: single("temp", Interval::closed(18.5, 19.0)),
        },
    ];
    assert_eq!(hull_over(&segs, &Interval::closed(0.2, 0.7)).unwrap()["temp"], Interval::closed(18.5, 19.5));
    assert_eq!(hull_over(&segs, &Interval::half_open(0.0, 0.5)).unwrap()["temp"], Interval::closed(19.0, 19.5));
}

fn heater_state() -> (Program, GlobalState) {
    let src = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/heater.hrebeca"));
    let p = Program::new(parse(src).unwrap()).unwrap();
    let s = p.make_initial_state().unwrap();
    (p, s)
}

#[test]
fn update_physical_rebecs_over_a_window() {
    let (p, s) = heater_state();
    let mut cache = FlowCache::new();
    let ps = update_physical_rebecs(&p, &s.ps, &Interval::half_open(1.0, 2.0), 0.5, 3.0, &mut cache)
        .unwrap()
        .unwrap();
    assert_eq!(ps["hws"].vars["temp"], Value::Real(Interval::closed(18.0, 19.0)));
    update_physical_rebecs(&p, &s.ps, &Interval::half_open(0.5, 1.0), 0.5, 3.0, &mut cache).unwrap();
    assert_eq!((cache.misses, cache.hits), (1, 1));
    assert!(matches!(
        update_physical_rebecs(&p, &s.ps, &Interval::closed(3.0, 4.0), 0.5, 3.0, &mut cache),
        Err(FlowError::CoverageGap(_))
    ));
}

#[test]
fn idle_mode_keeps_values() {
    let (p, mut s) = heater_state();
    s.ps.get_mut("hws").unwrap().mode = NONE_MODE.to_string();
    let mut cache = FlowCache::new();
    let ps = update_physical_rebecs(&p, &s.ps, &Interval::half_open(1.0, 1.5), 0.5, 3.0, &mut cache)
        .unwrap()
        .unwrap();
    assert_eq!(ps, s.ps);
    assert!(cache.is_empty());
}

#[test]
fn relative_window_clamps_at_zero() {
    let r = relative_window(&Interval::half_open(1.8, 2.3), &Interval::half_open(1.5, 2.0));
    assert_eq!(r.lo, 0.0);
    assert!((r.hi - 0.8).abs() < 1e-12);
}

proptest! {
    #[test]
    fn halving_step_never_widens(
        rate in -3.0f64..3.0,
        a in -2.0f64..2.0,
        lo in -5.0f64..5.0,
        w in 0.0f64..2.0,
        k in 1u32..5,
        t0 in 0.0f64..1.9,
        dt in 0.0f64..1.0,
    ) {
        let gamma = 0.5f64.powi(k as i32);
        let horizon = 2.0;
        let init = single("x", Interval::closed(lo, lo + w));
        let window = Interval::closed(t0, (t0 + dt).min(horizon));
        for sys in [system(&["x"], &[&format!("{rate}")]), system(&["x"], &[&format!("{a} * x + {rate}")])] {
            let coarse = compute_flowpipes(&sys, &init, gamma, horizon).unwrap();
            let fine = compute_flowpipes(&sys, &init, gamma / 2.0, horizon).unwrap();
            let hc = hull_over(&coarse, &window).unwrap()["x"];
            let hf = hull_over(&fine, &window).unwrap()["x"];
            prop_assert!(hc.encloses(&hf, 1e-9), "{} vs {}", hc, hf);
        }
    }

    #[test]
    fn trimming_is_contracting_and_idempotent(
        lo in -10.0f64..10.0,
        w in 0.0f64..10.0,
        c in -10.0f64..10.0,
        d in 0.0f64..5.0,
    ) {
        let inv = parse_expr(&format!("x >= {c} && x <= {} + y", c + d)).unwrap();
        let b: BoxMap = [("x".to_string(), Interval::closed(lo, lo + w)), ("y".to_string(), Interval::closed(0.0, 1.0))].into();
        if let Some(t) = trim_box(&b, &inv, &Valuation::new()).unwrap() {
            for (k, v) in &t {
                prop_assert!(b[k].contains_interval(v));
            }
            prop_assert_eq!(trim_box(&t, &inv, &Valuation::new()).unwrap(), Some(t.clone()));
        }
    }
}
