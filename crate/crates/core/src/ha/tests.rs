use super::*;
use crate::frontend::parse;
use crate::reach::{analyze, AnalysisConfig};

const HEATER: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/heater.hrebeca"));

fn heater() -> Program {
    Program::new(parse(HEATER).unwrap()).unwrap()
}

fn program(src: &str) -> Program {
    Program::new(parse(src).unwrap()).unwrap()
}

fn explored() -> HybridAutomaton {
    let mut ha = translate(&heater()).unwrap();
    reach_ha(&mut ha, 3.0, 200, 0.5).unwrap();
    ha
}

fn expanded(ha: &HybridAutomaton) -> Vec<usize> {
    (0..ha.location_count()).filter(|&id| ha.jumps[id].is_some()).collect()
}

#[test]
fn initial_location_is_urgent_with_constructors() {
    let mut ha = translate(&heater()).unwrap();
    assert!(ha.is_urgent(0).unwrap());
    let l0 = ha.location(0);
    assert_eq!(l0.ps["hws"].stmts.len(), 2);
    assert_eq!(l0.rs["a"].stmts.len(), 1);
    assert!(l0.es.is_empty());
    let (_, init) = ha.initial();
    assert!(init.values().all(|iv| *iv == crate::interval::Interval::point(0.0)));
    assert!(init.contains_key("hws.temp") && init.contains_key("c.t"));
    assert_eq!(ha.flows(0).unwrap(), vec![(URG.to_string(), Expr::Int(1))]);
    assert_eq!(expr_to_string(&ha.invariant(0).unwrap()), "urg <= 0");
}

#[test]
fn delay_creates_resume_event_with_timer() {
    let mut ha = explored();
    let id = expanded(&ha)
        .into_iter()
        .find(|&id| {
            let l = ha.location(id);
            l.es.len() == 1 && matches!(l.es[0].event, Event::Resume { .. }) && l.rs.values().all(|r| r.mailbox.is_empty())
        })
        .expect("a location waiting only for a resume");
    assert!(!ha.is_urgent(id).unwrap());
    let timer = ha.location(id).es[0].timer.clone();
    assert!(ha.flows(id).unwrap().contains(&(timer.clone(), Expr::Int(1))));
    assert!(expr_to_string(&ha.invariant(id).unwrap()).contains(&format!("{timer} < 0.4")));
    let guards: Vec<String> = ha.jumps(id).unwrap().iter().map(|j| expr_to_string(&j.guard)).collect();
    assert!(guards.contains(&format!("{timer} >= 0.2")));
}

#[test]
fn conditional_on_float_gives_paired_jumps() {
    let mut ha = explored();
    let id = expanded(&ha)
        .into_iter()
        .find(|&id| ha.jumps[id].as_ref().unwrap().iter().any(|j| j.label == "c then"))
        .unwrap();
    let guards: Vec<String> = ha.jumps(id).unwrap().iter().filter(|j| j.label.starts_with("c ")).map(|j| expr_to_string(&j.guard)).collect();
    assert_eq!(guards, ["c.t < 18.5", "c.t >= 18.5"]);
}

#[test]
fn effect_rules() {
    let ha = explored();
    let suspended = (0..ha.location_count()).map(|id| ha.location(id)).find(|l| l.rs["a"].suspended).unwrap();
    let resumed = effect(&Event::Resume { rebec: "a".into() }, suspended).unwrap();
    assert!(!resumed.rs["a"].suspended);
    let notify = HaMessage {
        sender: "c".into(),
        server: "notify".into(),
        mode: None,
        params: Vec::new(),
    };
    let l0 = ha.location(0);
    let sent = effect(&Event::Transfer { target: "a".into(), message: notify.clone() }, l0).unwrap();
    assert_eq!(sent.rs["a"].mailbox.last(), Some(&notify));
    let phys = effect(&Event::Transfer { target: "hws".into(), message: notify.clone() }, l0).unwrap();
    assert_eq!(phys.ps["hws"].mailbox, vec![notify.clone()]);
    assert_eq!(phys.ps["hws"].mode, l0.ps["hws"].mode);
    assert!(effect(&Event::Resume { rebec: "zz".into() }, l0).is_err());
}

#[test]
fn reactive_only_model_has_only_urgency_flows() {
    let p = program("reactiveclass A { statevars { float f; int n; } msgsrv A() { n = 1; } } main { A a():(); }");
    let mut ha = translate(&p).unwrap();
    assert_eq!(ha.explore().unwrap(), 2);
    assert_eq!(ha.flows(0).unwrap(), vec![(URG.to_string(), Expr::Int(1))]);
    assert_eq!(ha.flows(1).unwrap(), vec![(TIME.to_string(), Expr::Int(1))]);
    assert_eq!(ha.location(1).rs["a"].ints["n"], 1);
}

const RAMP: &str = "physicalclass P { statevars { real x; } msgsrv P() { setmode(up); } \
    mode up { inv(x <= 6) { x' = 1; } guard(x >= 5) { setmode(still); } } \
    mode still { inv(true) { x' = 0; } guard(false) { } } } main { P p():(); }";

#[test]
fn zero_flow_location_keeps_its_box() {
    let p = program(
        "physicalclass P { statevars { real x; } msgsrv P() { setmode(still); } \
         mode still { inv(true) { x' = 0; } guard(false) { } } } main { P p():(); }",
    );
    let mut ha = translate(&p).unwrap();
    let r = reach_ha(&mut ha, 2.0, 10, 0.5).unwrap();
    let timed: Vec<usize> = r.reached.keys().copied().filter(|&id| !ha.is_urgent(id).unwrap()).collect();
    assert_eq!(timed.len(), 1);
    for b in &r.reached[&timed[0]] {
        assert_eq!(b["p.x"], crate::interval::Interval::point(0.0));
    }
}

#[test]
fn guard_crossing_time() {
    let mut ha = translate(&program(RAMP)).unwrap();
    let r = reach_ha(&mut ha, 10.0, 20, 0.5).unwrap();
    let entries: Vec<&crate::flowpipe::BoxMap> = r
        .reached
        .iter()
        .filter(|(id, _)| ha.location(**id).ps["p"].mode == "none")
        .flat_map(|(_, b)| b)
        // Constructor locations are also idle, at time zero.
        .filter(|b| b[TIME].hi > 0.0)
        .collect();
    assert!(!entries.is_empty());
    let time = entries.iter().map(|b| b[TIME]).reduce(|a, b| a.hull(&b)).unwrap();
    let x = entries.iter().map(|b| b["p.x"]).reduce(|a, b| a.hull(&b)).unwrap();
    assert!(x.contains(5.0) && x.lo >= 5.0 && x.hi <= 6.0);
    // The guard holds on true times [5, 6]; boxes are one step wide.
    assert!(time.contains(5.0) && time.contains(6.0));
    assert!(time.lo >= 4.5 - 1e-9 && time.hi <= 6.5 + 1e-9);
}

#[test]
fn heater_containment_and_negative_control() {
    let p = heater();
    let mut ha = translate(&p).unwrap();
    let reach = reach_ha(&mut ha, 2.0, 200, 0.5).unwrap();
    let tts = analyze(&p, &AnalysisConfig::new(2.0, 10, 0.5)).unwrap();
    let report = check_containment(&ha, &reach, &tts.states);
    assert_eq!(report.checked, tts.states.len());
    assert!(report.is_clean(), "{:?}", report.violations);

    let mut inflated = tts.states.clone();
    let last = inflated.len() - 1;
    inflated[last]
        .ps
        .get_mut("hws")
        .unwrap()
        .vars
        .insert("temp".into(), Value::Real(crate::interval::Interval::closed(-100.0, 100.0)));
    let report = check_containment(&ha, &reach, &inflated);
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].var.as_deref(), Some("temp"));

    assert_eq!(check_containment(&ha, &reach, &[]), ContainmentReport::default());
}

#[test]
fn on_mode_retrigger_unreachable_before_two_seconds() {
    let p = heater();
    let mut ha = translate(&p).unwrap();
    let reach = reach_ha(&mut ha, 2.0, 200, 0.5).unwrap();
    let on_trigger = p.trigger("hws", "on");
    let off_trigger = p.trigger("hws", "off");
    // The constructor's tail `setmode(off)` equals the on trigger, so only
    // locations reached after time has passed count.
    let timed: Vec<&HaLocation> = reach
        .reached
        .iter()
        .filter(|(_, boxes)| boxes.iter().any(|b| b[TIME].hi > 0.0))
        .map(|(&id, _)| ha.location(id))
        .collect();
    assert!(timed.iter().all(|l| l.ps["hws"].stmts != on_trigger));
    assert!(timed.iter().any(|l| l.ps["hws"].stmts == off_trigger));
}

#[test]
fn structural_properties() {
    let mut ha = explored();
    let reach = reach_ha(&mut ha, 3.0, 200, 0.5).unwrap();
    for (&id, boxes) in &reach.reached {
        if ha.is_urgent(id).unwrap() {
            assert!(boxes.iter().all(|b| b[URG] == crate::interval::Interval::point(0.0)));
        }
    }
    for id in expanded(&ha) {
        let l = ha.location(id).clone();
        let mut timers: Vec<&str> = l.timers().collect();
        let n = timers.len();
        timers.sort();
        timers.dedup();
        assert_eq!(timers.len(), n);
        let js = ha.jumps(id).unwrap();
        assert!(js.iter().all(|j| j.urgent) || js.iter().all(|j| !j.urgent));
    }
}

#[test]
fn translation_is_deterministic_and_exports() {
    let mut a = translate(&heater()).unwrap();
    let mut b = translate(&heater()).unwrap();
    reach_ha(&mut a, 2.0, 200, 0.5).unwrap();
    reach_ha(&mut b, 2.0, 200, 0.5).unwrap();
    let (ja, jb) = (a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(ja, jb);
    assert!(!ja["locations"].as_array().unwrap().is_empty());
    assert!(ja["jumps"].as_array().unwrap().iter().any(|j| j["guard"] == "c.t < 18.5"));
}

#[test]
fn location_budget() {
    let mut ha = translate(&heater()).unwrap().with_budget(5);
    assert_eq!(ha.explore(), Err(HaError::StateExplosionBudget(5)));
}
