//! Bounded reachability over the timed transition system: a breadth-first
//! loop of time progression, physical update, trigger branching and
//! non-time-progressing closure, with containment-based deduplication.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::flowpipe::{guard_window, trim_box, update_physical_rebecs, FlowCache, FlowError};
use crate::frontend::ast::{Expr, Stmt, TimeBounds, NONE_MODE};
use crate::interval::{compare, EvalError, Interval, Valuation, Value};
use crate::semantics::{
    events, progress_time, sort_collapse, EventKind, EventTime, GlobalState, Message, Program, RebecId,
    SemanticsError, TIME_EPS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("time horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("step size must be positive and finite, got {0}")]
    StepSize(f64),
    #[error("jump depth must be at least 1")]
    JumpDepth,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("unsafe predicate: {0}")]
    Unsafe(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Time horizon.
    pub delta: f64,
    /// Maximum number of time-progress rounds along any path.
    pub jumps: usize,
    /// Flowpipe step size.
    pub gamma: f64,
    pub ntp_budget: usize,
    /// Predicate over qualified `rebec.var` names.
    pub unsafe_pred: Option<Expr>,
}

impl AnalysisConfig {
    pub fn new(delta: f64, jumps: usize, gamma: f64) -> Self {
        Self {
            delta,
            jumps,
            gamma,
            ntp_budget: crate::semantics::DEFAULT_NTP_BUDGET,
            unsafe_pred: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(ConfigError::Horizon(self.delta));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ConfigError::StepSize(self.gamma));
        }
        if self.jumps == 0 {
            return Err(ConfigError::JumpDepth);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Ntp,
    Tp,
    Trigger,
}

impl EdgeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Ntp => "NTP",
            EdgeLabel::Tp => "TP",
            EdgeLabel::Trigger => "trigger",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub states: Vec<GlobalState>,
    pub edges: BTreeSet<Edge>,
    /// Index into `states`.
    pub unsafe_witness: Option<usize>,
    /// No queue item was cut by the jump bound.
    pub exhausted: bool,
    /// States dropped because a stored state contained them.
    pub merged: usize,
    pub elapsed: Duration,
}

type MessageKey = (String, String, Option<String>, Vec<(String, i64)>);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RebecKey {
    ints: Vec<(String, i64)>,
    stmts: Vec<Arc<Stmt>>,
    resume: Option<TimeBounds>,
    mailbox: Vec<MessageKey>,
    mode: Option<String>,
}

/// Everything of a state that is compared for equality during dedup.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct DiscreteKey(Vec<(RebecId, RebecKey)>);

fn ints(vars: &Valuation) -> Vec<(String, i64)> {
    vars.iter().filter_map(|(k, v)| v.as_int().map(|i| (k.clone(), i))).collect()
}

fn mailbox_key(mb: &[Message]) -> Vec<MessageKey> {
    mb.iter().map(Message::discrete_key).collect()
}

fn discrete_key(s: &GlobalState) -> DiscreteKey {
    let rs = s.rs.iter().map(|(x, r)| {
        (
            x.clone(),
            RebecKey {
                ints: ints(&r.vars),
                stmts: r.stmts.clone(),
                resume: r.resume.as_ref().map(|res| res.delay),
                mailbox: mailbox_key(&r.mailbox),
                mode: None,
            },
        )
    });
    let ps = s.ps.iter().map(|(x, p)| {
        (
            x.clone(),
            RebecKey {
                ints: ints(&p.vars),
                stmts: p.stmts.clone(),
                resume: None,
                mailbox: mailbox_key(&p.mailbox),
                mode: Some(p.mode.clone()),
            },
        )
    });
    DiscreteKey(rs.chain(ps).collect())
}

fn within(inner: &Interval, outer: &Interval) -> bool {
    outer.closure().contains_interval(&inner.closure())
}

fn vars_within(inner: &Valuation, outer: &Valuation) -> bool {
    inner.iter().all(|(k, v)| match (v, outer.get(k)) {
        (Value::Real(a), Some(Value::Real(b))) => within(a, b),
        (Value::Int(a), Some(Value::Int(b))) => a == b,
        _ => false,
    })
}

fn mailbox_within(inner: &[Message], outer: &[Message]) -> bool {
    inner.len() == outer.len()
        && inner
            .iter()
            .zip(outer)
            .all(|(a, b)| within(&a.arrival, &b.arrival) && vars_within(&a.params, &b.params))
}

/// Every interval of `s` lies in the closure of the matching interval of
/// `t`. Both states must share a discrete key.
fn contained(s: &GlobalState, t: &GlobalState) -> bool {
    if !within(&s.gt, &t.gt) {
        return false;
    }
    let rs_ok = s.rs.iter().all(|(x, r)| {
        let o = &t.rs[x];
        vars_within(&r.vars, &o.vars)
            && mailbox_within(&r.mailbox, &o.mailbox)
            && match (&r.resume, &o.resume) {
                (Some(a), Some(b)) => within(&a.window, &b.window),
                (None, None) => true,
                _ => false,
            }
    });
    rs_ok
        && s.ps.iter().all(|(x, p)| {
            let o = &t.ps[x];
            vars_within(&p.vars, &o.vars)
                && mailbox_within(&p.mailbox, &o.mailbox)
                && within(&p.origin.time, &o.origin.time)
                && p.origin.values.iter().all(|(v, iv)| o.origin.values.get(v).is_some_and(|b| within(iv, b)))
        })
}

/// State store with containment-based deduplication.
#[derive(Debug, Default)]
pub struct StateStore {
    pub states: Vec<GlobalState>,
    index: HashMap<DiscreteKey, Vec<usize>>,
}

impl StateStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `s` unless a stored state with the same discrete parts
    /// contains it. Returns the id of the new or containing state and
    /// whether it was inserted.
    pub fn insert(&mut self, s: GlobalState) -> (usize, bool) {
        let key = discrete_key(&s);
        let bucket = self.index.entry(key).or_default();
        if let Some(&id) = bucket.iter().find(|&&id| contained(&s, &self.states[id])) {
            return (id, false);
        }
        let id = self.states.len();
        bucket.push(id);
        self.states.push(s);
        (id, true)
    }
}

/// The first state in which `pred` may hold.
pub fn check_unsafe(states: &[GlobalState], pred: &Expr) -> Result<Option<usize>, EvalError> {
    for (i, s) in states.iter().enumerate() {
        if compare(pred, &s.qualified_valuation())?.possible() {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

struct Driver<'a> {
    program: &'a Program,
    cfg: &'a AnalysisConfig,
    cache: FlowCache,
}

impl Driver<'_> {
    fn next_gt(&mut self, s: &GlobalState) -> Result<Interval, ReachError> {
        let mut windows = Vec::new();
        for (x, p) in &s.ps {
            if p.mode == NONE_MODE {
                continue;
            }
            let class = self.program.class_of(x).expect("physical rebec has a class");
            let mode = class.mode(&p.mode).expect("mode was checked");
            let pipes = self.cache.pipes(self.program, x, p, self.cfg.gamma, self.cfg.delta)?;
            let reals = self.program.real_vars(x);
            let inputs: Valuation = p.vars.iter().filter(|(k, _)| !reals.contains(k)).map(|(k, v)| (k.clone(), *v)).collect();
            let gw = guard_window(x, &pipes, &mode.guard, &inputs, p.origin.time.lo)?;
            if let Some(w) = gw.window {
                windows.push((x.clone(), w));
            }
        }
        let gt = s.gt;
        let mut ev: Vec<EventTime> = events(s, &windows).into_iter().filter(|e| e.value > gt.lo + TIME_EPS).collect();
        ev.push(EventTime::new(gt.hi + self.cfg.gamma, EventKind::StepPad, None));
        ev.push(EventTime::new(self.cfg.delta, EventKind::HorizonPad, None));
        let ev = sort_collapse(ev);
        let t3 = ev[0].value;
        let t4 = ev.get(1).map_or(t3, |e| e.value);
        let next = progress_time(gt.lo, gt.hi, t3, t4)?;
        Ok(next.intersect(&Interval::closed(0.0, self.cfg.delta)).unwrap_or(Interval::point(self.cfg.delta)))
    }

    /// The advanced state plus one trigger copy per physical rebec whose
    /// guard may hold.
    fn successors(&mut self, s: &GlobalState) -> Result<Vec<(GlobalState, EdgeLabel)>, ReachError> {
        let gt = self.next_gt(s)?;
        let Some(ps) = update_physical_rebecs(self.program, &s.ps, &gt, self.cfg.gamma, self.cfg.delta, &mut self.cache)?
        else {
            return Ok(Vec::new());
        };
        let advanced = GlobalState { rs: s.rs.clone(), ps, gt };
        let mut out = Vec::new();
        for (x, p) in &advanced.ps {
            if p.mode == NONE_MODE {
                continue;
            }
            let mode = self.program.class_of(x).and_then(|c| c.mode(&p.mode)).expect("mode was checked");
            let reals = self.program.real_vars(x);
            let values = reals.iter().map(|v| (v.clone(), p.vars[v].as_interval())).collect();
            let inputs: Valuation = p.vars.iter().filter(|(k, _)| !reals.contains(k)).map(|(k, v)| (k.clone(), *v)).collect();
            let Some(trimmed) = trim_box(&values, &mode.guard, &inputs)? else {
                continue;
            };
            let mut copy = advanced.clone();
            let q = copy.ps.get_mut(x).unwrap();
            for (v, iv) in trimmed {
                q.vars.insert(v, Value::Real(iv));
            }
            q.stmts = self.program.trigger(x, &q.mode);
            q.mode = NONE_MODE.to_string();
            q.restart_flow(gt, reals);
            out.push((copy, EdgeLabel::Trigger));
        }
        out.insert(0, (advanced, EdgeLabel::Tp));
        Ok(out)
    }
}

/// Explores the reachable states of `program` up to time `cfg.delta` and
/// `cfg.jumps` time-progress rounds.
pub fn analyze(program: &Program, cfg: &AnalysisConfig) -> Result<ReachResult, ReachError> {
    cfg.validate()?;
    let start = Instant::now();
    let program = &program.clone().with_ntp_budget(cfg.ntp_budget);
    let mut driver = Driver {
        program,
        cfg,
        cache: FlowCache::new(),
    };
    let mut store = StateStore::new();
    let mut edges = BTreeSet::new();
    let mut queue = VecDeque::new();
    let mut exhausted = true;
    let mut merged = 0;

    let init = program.make_initial_state()?;
    let seeds = program.execute_ntp(&init)?;
    let root = (!seeds.contains(&init)).then(|| store.insert(init.clone()).0);
    for seed in seeds {
        let (id, fresh) = store.insert(seed);
        if let Some(r) = root {
            edges.insert(Edge { from: r, to: id, label: EdgeLabel::Ntp });
        }
        if fresh {
            queue.push_back((id, cfg.jumps));
        }
    }

    while let Some((id, depth)) = queue.pop_front() {
        let s = store.states[id].clone();
        if s.gt.lo >= cfg.delta - TIME_EPS {
            continue;
        }
        if depth == 0 {
            exhausted = false;
            continue;
        }
        for (v, label) in driver.successors(&s)? {
            for q in program.execute_ntp(&v)? {
                let (to, fresh) = store.insert(q);
                edges.insert(Edge { from: id, to, label });
                if fresh {
                    queue.push_back((to, depth - 1));
                } else {
                    merged += 1;
                }
            }
        }
    }

    let unsafe_witness = match &cfg.unsafe_pred {
        Some(pred) => check_unsafe(&store.states, pred)?,
        None => None,
    };
    Ok(ReachResult {
        states: store.states,
        edges,
        unsafe_witness,
        exhausted,
        merged,
        elapsed: start.elapsed(),
    })
}
