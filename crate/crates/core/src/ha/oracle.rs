//! Flowpipe reachability on the automaton and the containment check
//! against states of the direct analysis.

use std::collections::{BTreeMap, VecDeque};

use super::{Event, HaError, HaLocation, HybridAutomaton, TIME, URG};
use crate::flowpipe::{compute_flowpipes, intersect_invariant, trim_box, BoxMap, FlowSystem};
use crate::frontend::ast::Expr;
use crate::interval::{eval_interval, Interval, Valuation, Value};
use crate::semantics::{GlobalState, Program, RebecId};

/// Reached boxes per location. Boxes include `time`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HaReach {
    pub reached: BTreeMap<usize, Vec<BoxMap>>,
    /// Some queue item was cut by the jump bound.
    pub cut: bool,
    pub dequeued: usize,
}

impl HaReach {
    pub fn box_count(&self) -> usize {
        self.reached.values().map(Vec::len).sum()
    }
}

fn box_within(inner: &BoxMap, outer: &BoxMap) -> bool {
    inner.len() == outer.len()
        && inner
            .iter()
            .all(|(k, v)| outer.get(k).is_some_and(|o| o.closure().contains_interval(&v.closure())))
}

fn valuation(b: &BoxMap) -> Valuation {
    b.iter().map(|(k, v)| (k.clone(), Value::Real(*v))).collect()
}

/// Segments of location `id` from `init` over `horizon`, trimmed by the
/// invariant. Urgent locations admit no time passage.
fn flowpipe(ha: &mut HybridAutomaton, id: usize, init: &BoxMap, gamma: f64, horizon: f64) -> Result<Vec<BoxMap>, HaError> {
    let inv = ha.invariant(id)?;
    if ha.is_urgent(id)? {
        return Ok(trim_box(init, &inv, &Valuation::new())?.into_iter().collect());
    }
    let flows = ha.flows(id)?;
    let (vars, rhs): (Vec<String>, Vec<Expr>) = flows.into_iter().unzip();
    let inputs: Valuation = init
        .iter()
        .filter(|(k, _)| !vars.contains(k))
        .map(|(k, v)| (k.clone(), Value::Real(*v)))
        .collect();
    let moving: BoxMap = vars.iter().map(|v| (v.clone(), init[v])).collect();
    let sys = FlowSystem::new(vars, rhs, inputs.clone());
    let segments = compute_flowpipes(&sys, &moving, gamma, horizon)?;
    let segments = intersect_invariant(&segments, &inv, &inputs)?;
    Ok(segments
        .into_iter()
        .map(|seg| {
            let mut b: BoxMap = init.clone();
            b.extend(seg.values);
            b
        })
        .collect())
}

/// Bounded flowpipe reachability: each reached box is intersected with
/// the guard of every outgoing jump, reset, and queued unless already
/// covered by a reached or queued box of the target location.
pub fn reach_ha(ha: &mut HybridAutomaton, delta: f64, jumps: usize, gamma: f64) -> Result<HaReach, HaError> {
    let mut out = HaReach::default();
    let mut seen: BTreeMap<usize, Vec<BoxMap>> = BTreeMap::new();
    let (l0, init) = ha.initial();
    let init = init.clone();
    seen.entry(l0).or_default().push(init.clone());
    let mut queue = VecDeque::from([(l0, init, 0.0, jumps)]);
    while let Some((id, v, t, j)) = queue.pop_front() {
        out.dequeued += 1;
        let segments = flowpipe(ha, id, &v, gamma, (delta - t).max(0.0))?;
        out.reached.entry(id).or_default().extend(segments.iter().cloned());
        if j == 0 {
            out.cut |= !ha.jumps(id)?.is_empty();
            continue;
        }
        let outgoing = ha.jumps(id)?.to_vec();
        for jump in &outgoing {
            let target_vars = ha.variables(jump.target);
            for f in &segments {
                let Some(fg) = trim_box(f, &jump.guard, &Valuation::new())? else {
                    continue;
                };
                let sigma = valuation(&fg);
                let mut fr = BoxMap::new();
                for var in &target_vars {
                    let iv = match jump.reset.iter().find(|(r, _)| r == var) {
                        Some((_, e)) => eval_interval(e, &sigma)?.closure(),
                        None => fg.get(var).copied().unwrap_or(Interval::point(0.0)),
                    };
                    fr.insert(var.clone(), iv);
                }
                fr.insert(URG.to_string(), Interval::point(0.0));
                if fr[TIME].lo > delta {
                    continue;
                }
                let known = seen.entry(jump.target).or_default();
                if known.iter().any(|b| box_within(&fr, b)) {
                    continue;
                }
                known.push(fr.clone());
                let start = fr[TIME].lo;
                queue.push_back((jump.target, fr, start, j - 1));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index of the offending analysed state.
    pub state: usize,
    pub rebec: Option<RebecId>,
    pub var: Option<String>,
    pub tts: Option<Interval>,
    /// Hull of the matching automaton boxes, when any matched.
    pub ha: Option<Interval>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContainmentReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ContainmentReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

type MsgKey = (String, String, Option<String>, Vec<(String, i64)>);

fn ha_mailbox(l: &HaLocation, x: &str) -> Vec<MsgKey> {
    let local = l.rs.get(x).map(|r| &r.mailbox).unwrap_or_else(|| &l.ps[x].mailbox);
    let mut keys: Vec<MsgKey> = local.iter().map(|m| m.key()).collect();
    keys.extend(l.es.iter().filter_map(|e| match &e.event {
        Event::Transfer { target, message } if target == x => Some(message.key()),
        _ => None,
    }));
    keys.sort();
    keys
}

fn tts_mailbox(s: &GlobalState, x: &str) -> Vec<MsgKey> {
    let mut keys: Vec<MsgKey> = s.mailbox(x).into_iter().flatten().map(|m| m.discrete_key()).collect();
    keys.sort();
    keys
}

fn ints_of(vars: &Valuation) -> BTreeMap<String, i64> {
    vars.iter().filter_map(|(k, v)| v.as_int().map(|i| (k.clone(), i))).collect()
}

/// Discrete part of the state mapping: variables, statements, suspension
/// and mailbox contents, where a message not yet in an automaton mailbox
/// must be pending as a transfer.
fn discrete_match(l: &HaLocation, s: &GlobalState) -> bool {
    let rs_ok = s.rs.iter().all(|(x, r)| {
        let Some(h) = l.rs.get(x) else { return false };
        ints_of(&r.vars) == h.ints
            && r.stmts == h.stmts
            && r.resume.is_some() == h.suspended
            && (!h.suspended
                || l.es.iter().any(|e| matches!(&e.event, Event::Resume { rebec } if rebec == x)))
            && tts_mailbox(s, x) == ha_mailbox(l, x)
    });
    rs_ok
        && s.ps.iter().all(|(x, p)| {
            let Some(h) = l.ps.get(x) else { return false };
            ints_of(&p.vars) == h.ints && p.stmts == h.stmts && p.mode == h.mode && tts_mailbox(s, x) == ha_mailbox(l, x)
        })
}

fn physical_vars(program: &Program, s: &GlobalState) -> Vec<(RebecId, String, Interval)> {
    let mut out = Vec::new();
    for (x, p) in &s.ps {
        for v in program.real_vars(x) {
            if let Some(val) = p.vars.get(v) {
                out.push((x.clone(), v.clone(), val.as_interval()));
            }
        }
    }
    out
}

const TOLERANCE: f64 = 1e-9;

/// For every state, some reached automaton box of a matching location,
/// overlapping the state's global time, must contain all physical
/// variable intervals. When no single box does, the hull of all matching
/// boxes is accepted: the state's time interval may span several segments.
pub fn check_containment(ha: &HybridAutomaton, reach: &HaReach, states: &[GlobalState]) -> ContainmentReport {
    let mut report = ContainmentReport::default();
    let matching: Vec<(usize, &Vec<BoxMap>)> = reach.reached.iter().map(|(id, b)| (*id, b)).collect();
    for (i, s) in states.iter().enumerate() {
        report.checked += 1;
        let gt = s.gt.closure();
        let candidates: Vec<&BoxMap> = matching
            .iter()
            .filter(|(id, _)| discrete_match(ha.location(*id), s))
            .flat_map(|(_, boxes)| boxes.iter())
            .filter(|b| b[TIME].closure().overlaps(&gt))
            .collect();
        if candidates.is_empty() {
            report.violations.push(Violation {
                state: i,
                rebec: None,
                var: None,
                tts: None,
                ha: None,
                reason: "no matching automaton location at this time".into(),
            });
            continue;
        }
        let vars = physical_vars(ha.program(), s);
        let key = |x: &str, v: &str| format!("{x}.{v}");
        let single = candidates
            .iter()
            .any(|b| vars.iter().all(|(x, v, iv)| b[&key(x, v)].encloses(iv, TOLERANCE)));
        if single {
            continue;
        }
        for (x, v, iv) in &vars {
            let hull = candidates.iter().map(|b| b[&key(x, v)]).reduce(|a, b| a.hull(&b)).unwrap();
            if !hull.encloses(iv, TOLERANCE) {
                report.violations.push(Violation {
                    state: i,
                    rebec: Some(x.clone()),
                    var: Some(v.clone()),
                    tts: Some(*iv),
                    ha: Some(hull),
                    reason: "interval escapes the automaton boxes".into(),
                });
                break;
            }
        }
    }
    report
}
