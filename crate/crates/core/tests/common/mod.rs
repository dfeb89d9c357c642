//! Random small models and the semantic property checks run over them.

#![allow(dead_code)]

use std::fmt::Write as _;

use hrebeca_core::frontend::ast::{StmtKind, TimeBounds};
use hrebeca_core::frontend::parse;
use hrebeca_core::interval::{compare, Interval, TriBool, Value};
use hrebeca_core::reach::{analyze, AnalysisConfig};
use hrebeca_core::semantics::{GlobalState, Message, NtpRule, Program, TIME_EPS};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

const HORIZON: f64 = 2.0;
const NTP_BUDGET: usize = 400;
const WALK_LIMIT: usize = 120;

fn bounds(rng: &mut StdRng) -> (f64, f64) {
    let lo = [0, 1, 3, 5][rng.gen_range(0..4)];
    let hi = lo + [0, 2, 5][rng.gen_range(0..3)];
    (lo as f64 / 10.0, hi as f64 / 10.0)
}

/// What a handler may use.
#[derive(Clone, Copy)]
struct Ctx<'a> {
    targets: &'a [&'a str],
    in_go: bool,
    ints: bool,
    delays: bool,
}

fn simple_stmt(rng: &mut StdRng, cx: Ctx) -> String {
    let t = cx.targets.choose(rng).unwrap();
    let (a, b) = bounds(rng);
    let mut options = vec![
        format!("f = f + {};", [0.5, 1.0][rng.gen_range(0..2)]),
        format!("f = f - {};", [0.5, 1.0][rng.gen_range(0..2)]),
        format!("{t}.tick() after({}, {});", a.max(0.1), b.max(0.1)),
        format!("{t}.go(f) after({a}, {b});"),
        format!("{t}.tick();"),
    ];
    if cx.ints {
        options.push("n = n + 1;".into());
        options.push("n = n - 1;".into());
    }
    if cx.in_go {
        options.push("f = v;".into());
    }
    if cx.delays {
        options.push(format!("delay({a}, {b});"));
    }
    options.swap_remove(rng.gen_range(0..options.len()))
}

fn stmt(rng: &mut StdRng, cx: Ctx) -> String {
    if rng.gen_bool(0.3) {
        let cond = if !cx.ints || rng.gen_bool(0.7) {
            format!("f < {}", [0.5, 1.0, 1.5][rng.gen_range(0..3)])
        } else {
            format!("n > {}", rng.gen_range(0..2))
        };
        let then = simple_stmt(rng, cx);
        let other = if rng.gen_bool(0.5) { simple_stmt(rng, cx) } else { String::new() };
        format!("if ({cond}) {{ {then} }} else {{ {other} }}")
    } else {
        simple_stmt(rng, cx)
    }
}

fn body(rng: &mut StdRng, cx: Ctx) -> String {
    let k = rng.gen_range(0..=3);
    (0..k).map(|_| stmt(rng, cx)).collect::<Vec<_>>().join(" ")
}

/// At most two rebecs, at most three top-level statements per handler.
/// The second rebec, when present, may be a physical ramp that reports
/// its variable to the first one.
pub fn random_model(rng: &mut StdRng) -> String {
    let two = rng.gen_bool(0.7);
    let physical = two && rng.gen_bool(0.35);
    let mut src = String::new();
    let peer_targets: &[&str] = if two { &["self", "peer"] } else { &["self"] };
    let ctor_body = |rng: &mut StdRng| -> String {
        // Constructors stay deterministic: no conditionals, no delays.
        let k = rng.gen_range(0..=2);
        let cx = Ctx { targets: peer_targets, in_go: false, ints: true, delays: false };
        (0..k).map(|_| simple_stmt(rng, cx)).collect::<Vec<_>>().join(" ")
    };
    let known = if two { format!("{} peer;", if physical { "P1" } else { "C1" }) } else { String::new() };
    let c0_ctor = ctor_body(rng);
    let _ = write!(
        src,
        "reactiveclass C0(4) {{ knownrebecs {{ {known} }} statevars {{ int n; float f; }} \
         msgsrv C0() {{ {c0_ctor} }} msgsrv go(float v) {{ {} }} msgsrv tick() {{ {} }} }}\n",
        body(rng, Ctx { targets: peer_targets, in_go: true, ints: true, delays: true }),
        body(rng, Ctx { targets: peer_targets, in_go: false, ints: true, delays: true }),
    );
    if two && !physical {
        let c1_ctor = ctor_body(rng);
        let _ = write!(
            src,
            "reactiveclass C1(4) {{ knownrebecs {{ C0 peer; }} statevars {{ int n; float f; }} \
             msgsrv C1() {{ {c1_ctor} }} msgsrv go(float v) {{ {} }} msgsrv tick() {{ {} }} }}\n",
            body(rng, Ctx { targets: &["self", "peer"], in_go: true, ints: true, delays: true }),
            body(rng, Ctx { targets: &["self", "peer"], in_go: false, ints: true, delays: true }),
        );
    }
    if physical {
        let lo = [0.5, 1.0][rng.gen_range(0..2)];
        let _ = write!(
            src,
            "physicalclass P1(4) {{ knownrebecs {{ C0 peer; }} statevars {{ real x; float f; }} \
             msgsrv P1() {{ x = 0; setmode(run); }} msgsrv go(float v) {{ {} }} msgsrv tick() {{ {} }} \
             mode run {{ inv(x <= 3) {{ x' = 1; }} guard(x >= {lo} && x <= {}) {{ peer.go(x); setmode(idle); }} }} \
             mode idle {{ inv(true) {{ x' = 0; }} guard(false) {{ }} }} }}\n",
            // Physical classes have no integers and cannot delay.
            body(rng, Ctx { targets: &["self", "peer"], in_go: true, ints: false, delays: false }),
            body(rng, Ctx { targets: &["self", "peer"], in_go: false, ints: false, delays: false }),
            lo + 1.0,
        );
    }
    src.push_str(match (two, physical) {
        (false, _) => "main { C0 r0():(); }",
        (true, false) => "main { C0 r0(r1):(); C1 r1(r0):(); }",
        (true, true) => "main { C0 r0(p1):(); P1 p1(r0):(); }",
    });
    src
}

#[derive(Debug, Default, Clone)]
pub struct PropertyReport {
    pub models: usize,
    /// Models whose analysis stopped on a budget or mailbox overflow.
    pub skipped: usize,
    pub quiescence: (usize, Vec<String>),
    pub conservation: (usize, Vec<String>),
    pub postpone: (usize, Vec<String>),
    pub conditional: (usize, Vec<String>),
    pub monotonicity: (usize, Vec<String>),
}

impl PropertyReport {
    pub fn suites(&self) -> [(&'static str, &(usize, Vec<String>)); 5] {
        [
            ("quiescence", &self.quiescence),
            ("mailbox conservation", &self.conservation),
            ("postpone coverage", &self.postpone),
            ("conditional completeness", &self.conditional),
            ("GT monotonicity", &self.monotonicity),
        ]
    }

    pub fn violations(&self) -> usize {
        self.suites().iter().map(|(_, s)| s.1.len()).sum()
    }
}

fn fail(suite: &mut (usize, Vec<String>), ok: bool, msg: impl FnOnce() -> String) {
    suite.0 += 1;
    if !ok && suite.1.len() < 20 {
        suite.1.push(msg());
    } else if !ok {
        suite.1.push(String::new());
    }
}

fn random_interval(rng: &mut StdRng, lo: f64, hi: f64) -> Interval {
    let a = rng.gen_range(lo..hi);
    let w = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..1.5) };
    Interval::closed(a, a + w)
}

/// Moves `s` to a random global time and widens float variables, so that
/// arrivals, resumes and conditionals meet their interesting cases.
fn perturb(program: &Program, s: &GlobalState, rng: &mut StdRng) -> GlobalState {
    let mut t = s.clone();
    let lo = rng.gen_range(0.0..2.5);
    let w = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..1.0) };
    t.gt = if w == 0.0 { Interval::point(lo) } else { Interval::new(lo, lo + w, true, rng.gen_bool(0.2)) };
    for r in t.rs.values_mut() {
        if let Some(Value::Real(_)) = r.vars.get("f") {
            r.vars.insert("f".into(), Value::Real(random_interval(rng, -0.5, 2.0)));
        }
    }
    if rng.gen_bool(0.5) {
        let x = program.order.choose(rng).unwrap().clone();
        let server = ["go", "tick"][rng.gen_range(0..2)];
        let mut params = hrebeca_core::interval::Valuation::new();
        if server == "go" {
            params.insert("v".into(), Value::Real(random_interval(rng, -0.5, 2.0)));
        }
        let mut m = Message::new(x.clone(), server, params, Interval::point(0.0), TimeBounds::new(0.0, 0.0));
        let a = rng.gen_range(0.0..3.0);
        m.arrival = Interval::new(a, a + rng.gen_range(0.0..1.5), rng.gen_bool(0.8), rng.gen_bool(0.5));
        if let Some(mb) = t.mailbox_mut(&x) {
            if mb.len() < 4 {
                mb.push(m);
            }
        }
    }
    t
}

fn head_kind(s: &GlobalState, x: &str) -> Option<StmtKind> {
    s.stmts(x).and_then(|st| st.first()).map(|h| h.kind.clone())
}

/// Postponed window must be exactly the uncovered rest `[GT.high, a.high)`.
fn covers(a: &Interval, gt: &Interval, postponed: Option<&Interval>) -> bool {
    match postponed {
        None => a.hi <= gt.hi + TIME_EPS,
        Some(p) => {
            p.lo == gt.hi && p.hi == a.hi && p.hi_closed == a.hi_closed && p.lo_closed == !gt.hi_closed && gt.hi < a.hi
        }
    }
}

fn check_rules(program: &Program, s: &GlobalState, succ: &[(GlobalState, NtpRule)], rep: &mut PropertyReport) {
    let count = s.message_count() as i64;
    for (t, rule) in succ {
        fail(&mut rep.monotonicity, t.gt == s.gt, || format!("NTP step changed GT {} -> {}", s.gt, t.gt));
        let x = rule.rebec();
        let expected = match rule {
            NtpRule::Take { .. } => -1,
            NtpRule::Exec { .. } => match head_kind(s, x) {
                Some(StmtKind::Send { .. } | StmtKind::SendSetMode { .. }) => 1,
                _ => 0,
            },
            _ => 0,
        };
        let delta = t.message_count() as i64 - count;
        fail(&mut rep.conservation, delta == expected, || format!("{rule:?}: count changed by {delta}"));
    }
    for (_, rule) in succ {
        match rule {
            NtpRule::Take { rebec, index } => {
                let a = s.mailbox(rebec).unwrap()[*index].arrival;
                let p = succ.iter().find_map(|(t, r)| match r {
                    NtpRule::PostponeMessage { rebec: y, index: j } if y == rebec && j == index => {
                        Some(t.mailbox(rebec).unwrap()[*index].arrival)
                    }
                    _ => None,
                });
                fail(&mut rep.postpone, covers(&a, &s.gt, p.as_ref()), || {
                    format!("arrival {a} at GT {} postponed to {p:?}", s.gt)
                });
            }
            NtpRule::Resume { rebec } => {
                let a = s.rs[rebec].resume.as_ref().unwrap().window;
                let p = succ.iter().find_map(|(t, r)| match r {
                    NtpRule::PostponeResume { rebec: y } if y == rebec => {
                        Some(t.rs[rebec].resume.as_ref().unwrap().window)
                    }
                    _ => None,
                });
                fail(&mut rep.postpone, covers(&a, &s.gt, p.as_ref()), || {
                    format!("resume {a} at GT {} postponed to {p:?}", s.gt)
                });
            }
            _ => {}
        }
    }
    for x in &program.order {
        let Some(StmtKind::If { cond, .. }) = head_kind(s, x) else { continue };
        if s.rs.get(x).is_some_and(|r| r.resume.is_some()) {
            continue;
        }
        let branches: Vec<bool> = succ
            .iter()
            .filter_map(|(_, r)| match r {
                NtpRule::Exec { rebec, branch: Some(b) } if rebec == x => Some(*b),
                _ => None,
            })
            .collect();
        let sigma = s.vars(x).unwrap();
        let Ok(verdict) = compare(&cond, sigma) else { continue };
        let want = if verdict == TriBool::Mixed { 2 } else { 1 };
        fail(&mut rep.conditional, branches.len() == want, || {
            format!("{x}: {verdict:?} gave {} successors", branches.len())
        });
        // Every point of the box must pick a branch that is present.
        for k in 0..=4 {
            let point = sigma
                .iter()
                .map(|(n, v)| {
                    let v = match v {
                        Value::Real(iv) if iv.width().is_finite() => {
                            Value::Real(Interval::point(iv.lo + iv.width() * k as f64 / 4.0))
                        }
                        other => *other,
                    };
                    (n.clone(), v)
                })
                .collect();
            if let Ok(TriBool::AllTrue | TriBool::AllFalse) = compare(&cond, &point) {
                let b = compare(&cond, &point).unwrap() == TriBool::AllTrue;
                fail(&mut rep.conditional, branches.contains(&b), || format!("{x}: point branch {b} missing"));
            }
        }
    }
}

/// Walks the non-time-progressing steps from `s`, checking every rule
/// application, then checks that the closure is quiescent.
fn walk(program: &Program, s: &GlobalState, rep: &mut PropertyReport) {
    let mut stack = vec![s.clone()];
    let mut seen = std::collections::HashSet::new();
    while let Some(cur) = stack.pop() {
        if seen.len() >= WALK_LIMIT || !seen.insert(cur.clone()) {
            continue;
        }
        let Ok(succ) = program.ntp_successors(&cur) else { return };
        check_rules(program, &cur, &succ, rep);
        stack.extend(succ.into_iter().map(|(t, _)| t));
    }
    if let Ok(closed) = program.execute_ntp(s) {
        for c in &closed {
            let ok = program.is_quiescent(c) && program.ntp_successors(c).is_ok_and(|v| v.is_empty());
            fail(&mut rep.quiescence, ok, || format!("closure state at GT {} is not quiescent", c.gt));
        }
    }
}

pub fn check_model(src: &str, rng: &mut StdRng, rep: &mut PropertyReport) {
    rep.models += 1;
    let model = parse(src).unwrap_or_else(|e| panic!("generated model rejected: {e}\n{src}"));
    let program = Program::new(model).unwrap().with_ntp_budget(NTP_BUDGET);
    let Ok(init) = program.make_initial_state() else {
        rep.skipped += 1;
        return;
    };
    let mut cfg = AnalysisConfig::new(HORIZON, 4, 0.5);
    cfg.ntp_budget = NTP_BUDGET;
    let mut probes = vec![init.clone()];
    match analyze(&program, &cfg) {
        Ok(r) => {
            // An initial state that is not yet closed is stored as a root
            // (alone when its closure is an endless zero-time loop); every
            // other stored state comes out of a closure.
            for s in &r.states {
                if *s == init {
                    continue;
                }
                let ok = program.is_quiescent(s) && program.ntp_successors(s).is_ok_and(|v| v.is_empty());
                fail(&mut rep.quiescence, ok, || format!("stored state at GT {} is not quiescent", s.gt));
                fail(&mut rep.monotonicity, s.gt.lo >= -TIME_EPS && s.gt.hi <= HORIZON + TIME_EPS, || {
                    format!("GT {} outside [0, {HORIZON}]", s.gt)
                });
            }
            // An edge may end in a stored state that encloses the actual
            // successor; its GT then starts earlier but still reaches past
            // the source's lower bound.
            for e in &r.edges {
                let (a, b) = (&r.states[e.from].gt, &r.states[e.to].gt);
                let ok = b.lo >= a.lo - TIME_EPS || (e.to < e.from && b.hi >= a.lo);
                fail(&mut rep.monotonicity, ok, || {
                    format!("{} edge s{} -> s{} lowers GT {a} -> {b}", e.label.as_str(), e.from, e.to)
                });
            }
            probes.extend(r.states.choose_multiple(rng, 3).cloned());
        }
        Err(_) => rep.skipped += 1,
    }
    walk(&program, &init, rep);
    for p in &probes {
        let q = perturb(&program, p, rng);
        walk(&program, &q, rep);
    }
}

pub fn run_suite(models: usize, seed: u64) -> PropertyReport {
    use rand::SeedableRng;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rep = PropertyReport::default();
    for _ in 0..models {
        let src = random_model(&mut rng);
        check_model(&src, &mut rng, &mut rep);
    }
    rep
}
