//! Translation of a model into a monolithic hybrid automaton, used as an
//! independent oracle for the timed-transition-system analysis.
//!
//! Locations are built on demand from the initial one. A location is
//! urgent when some rebec can take a message or execute a statement;
//! time only passes in the others.

mod oracle;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::flowpipe::FlowError;
use crate::frontend::ast::{BinOp, ClassKind, Expr, Stmt, StmtKind, TimeBounds, Type, NONE_MODE};
use crate::frontend::print::expr_to_string;
use crate::interval::{compare, eval_expr, EvalError, TriBool, Valuation, Value};
use crate::semantics::{Program, RebecId, SemanticsError};

pub use oracle::{check_containment, reach_ha, ContainmentReport, HaReach, Violation};

pub const DEFAULT_LOCATION_BUDGET: usize = 100_000;
pub const URG: &str = "urg";
pub const TIME: &str = "time";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HaError {
    #[error("more than {0} locations")]
    StateExplosionBudget(usize),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A message without timing; float arguments live in continuous variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HaMessage {
    pub sender: RebecId,
    pub server: String,
    pub mode: Option<String>,
    pub params: Vec<(String, i64)>,
}

impl HaMessage {
    pub fn key(&self) -> (String, String, Option<String>, Vec<(String, i64)>) {
        (self.sender.clone(), self.server.clone(), self.mode.clone(), self.params.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Transfer { target: RebecId, message: HaMessage },
    Resume { rebec: RebecId },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PendingEvent {
    pub delay: TimeBounds,
    pub event: Event,
    pub timer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HaReactive {
    pub ints: BTreeMap<String, i64>,
    pub mailbox: Vec<HaMessage>,
    pub stmts: Vec<Arc<Stmt>>,
    pub suspended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HaPhysical {
    pub ints: BTreeMap<String, i64>,
    pub mailbox: Vec<HaMessage>,
    pub stmts: Vec<Arc<Stmt>>,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HaLocation {
    pub rs: BTreeMap<RebecId, HaReactive>,
    pub ps: BTreeMap<RebecId, HaPhysical>,
    pub es: Vec<PendingEvent>,
}

struct LocalMut<'a> {
    ints: &'a mut BTreeMap<String, i64>,
    mailbox: &'a mut Vec<HaMessage>,
    stmts: &'a mut Vec<Arc<Stmt>>,
}

impl HaLocation {
    fn local_mut(&mut self, x: &str) -> LocalMut<'_> {
        if let Some(r) = self.rs.get_mut(x) {
            LocalMut {
                ints: &mut r.ints,
                mailbox: &mut r.mailbox,
                stmts: &mut r.stmts,
            }
        } else {
            let p = self.ps.get_mut(x).expect("rebec exists");
            LocalMut {
                ints: &mut p.ints,
                mailbox: &mut p.mailbox,
                stmts: &mut p.stmts,
            }
        }
    }

    fn ints(&self, x: &str) -> &BTreeMap<String, i64> {
        self.rs.get(x).map(|r| &r.ints).unwrap_or_else(|| &self.ps[x].ints)
    }

    fn acquire_timer(&self) -> String {
        (0..)
            .map(|i| format!("timer{i}"))
            .find(|t| self.es.iter().all(|e| &e.timer != t))
            .unwrap()
    }

    pub fn timers(&self) -> impl Iterator<Item = &str> {
        self.es.iter().map(|e| e.timer.as_str())
    }
}

impl fmt::Display for HaLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| {
            let s = if first { "" } else { "; " };
            first = false;
            write!(f, "{s}")
        };
        for (x, p) in &self.ps {
            sep(f)?;
            write!(f, "{x}[{}] q={} st={}", p.mode, p.mailbox.len(), p.stmts.len())?;
        }
        for (x, r) in &self.rs {
            sep(f)?;
            write!(f, "{x} q={} st={}", r.mailbox.len(), r.stmts.len())?;
            if r.suspended {
                write!(f, " suspended")?;
            }
            for (k, v) in &r.ints {
                write!(f, " {k}={v}")?;
            }
        }
        for e in &self.es {
            sep(f)?;
            match &e.event {
                Event::Transfer { target, message } => write!(f, "Transfer({target}, {})", message.server)?,
                Event::Resume { rebec } => write!(f, "Resume({rebec})")?,
            }
            write!(f, " by {} in [{}, {}]", e.timer, e.delay.low.0, e.delay.high.0)?;
        }
        Ok(())
    }
}

/// `source --guard / reset--> target`. Resets are simultaneous; `urg` is
/// zeroed on every jump.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub source: usize,
    pub target: usize,
    pub guard: Expr,
    pub reset: Vec<(String, Expr)>,
    pub urgent: bool,
    pub label: String,
}

struct Step {
    target: HaLocation,
    guard: Expr,
    reset: Vec<(String, Expr)>,
    label: String,
}

impl Step {
    fn new(target: HaLocation, label: impl Into<String>) -> Self {
        Self {
            target,
            guard: Expr::Bool(true),
            reset: Vec::new(),
            label: label.into(),
        }
    }
}

fn arcs(stmts: &[Stmt]) -> Vec<Arc<Stmt>> {
    stmts.iter().cloned().map(Arc::new).collect()
}

/// Local names of `x` made global: known discrete values become
/// constants, everything else `x.name`.
fn qualify(e: &Expr, x: &str, ints: &BTreeMap<String, i64>) -> Expr {
    e.map_vars(&mut |v| match ints.get(v) {
        Some(i) => Expr::Int(*i),
        None => Expr::Var(format!("{x}.{v}")),
    })
}

fn int_valuation(ints: &BTreeMap<String, i64>) -> Valuation {
    ints.iter().map(|(k, v)| (k.clone(), Value::Int(*v))).collect()
}

/// Applies a fired pending event: a resume clears the suspension flag, a
/// transfer appends the message to the target's mailbox.
pub fn effect(ev: &Event, l: &HaLocation) -> Result<HaLocation, HaError> {
    let mut out = l.clone();
    match ev {
        Event::Resume { rebec } => {
            out.rs
                .get_mut(rebec)
                .ok_or_else(|| SemanticsError::UnknownRebec(rebec.clone()))?
                .suspended = false;
        }
        Event::Transfer { target, message } => {
            if !out.rs.contains_key(target) && !out.ps.contains_key(target) {
                return Err(SemanticsError::UnknownRebec(target.clone()).into());
            }
            out.local_mut(target).mailbox.push(message.clone());
        }
    }
    Ok(out)
}

/// The hybrid automaton of a model, expanded lazily.
#[derive(Debug, Clone)]
pub struct HybridAutomaton {
    program: Program,
    locations: Vec<HaLocation>,
    index: HashMap<HaLocation, usize>,
    jumps: Vec<Option<Vec<Jump>>>,
    /// Continuous model variables plus `urg` and `time`, without timers.
    base_vars: Vec<String>,
    initial_box: BTreeMap<String, crate::interval::Interval>,
    pub budget: usize,
}

/// Builds the automaton's initial location; the rest is generated on
/// demand by [`HybridAutomaton::jumps`] or [`HybridAutomaton::explore`].
pub fn translate(program: &Program) -> Result<HybridAutomaton, HaError> {
    use crate::interval::Interval;
    let model = program.model.clone();
    let mut base_vars = vec![URG.to_string(), TIME.to_string()];
    let mut initial_box = BTreeMap::new();
    let mut l0 = HaLocation {
        rs: BTreeMap::new(),
        ps: BTreeMap::new(),
        es: Vec::new(),
    };
    for inst in &model.main {
        let x = &inst.name;
        let class = program.class_of(x).expect("instance class was checked");
        let mut ints = BTreeMap::new();
        for v in &class.state_vars {
            match v.ty {
                Type::Int => {
                    ints.insert(v.name.clone(), 0);
                }
                _ => base_vars.push(format!("{x}.{}", v.name)),
            }
        }
        for server in &class.msg_servers {
            for p in server.params.iter().filter(|p| p.ty != Type::Int) {
                let name = format!("{x}.{}", p.name);
                if !base_vars.contains(&name) {
                    base_vars.push(name);
                }
            }
        }
        let ctor = class.constructor().expect("constructor was checked");
        for (p, arg) in ctor.params.iter().zip(&inst.args) {
            let v = eval_expr(arg, &Valuation::new())?;
            match (p.ty, v) {
                (Type::Int, Value::Int(i)) => {
                    ints.insert(p.name.clone(), i);
                }
                (_, v) => {
                    initial_box.insert(format!("{x}.{}", p.name), v.as_interval().closure());
                }
            }
        }
        let stmts = program.body(x, &class.name);
        match class.kind {
            ClassKind::Reactive => {
                l0.rs.insert(
                    x.clone(),
                    HaReactive {
                        ints,
                        mailbox: Vec::new(),
                        stmts,
                        suspended: false,
                    },
                );
            }
            ClassKind::Physical => {
                l0.ps.insert(
                    x.clone(),
                    HaPhysical {
                        ints,
                        mailbox: Vec::new(),
                        stmts,
                        mode: NONE_MODE.to_string(),
                    },
                );
            }
        }
    }
    for v in &base_vars {
        initial_box.entry(v.clone()).or_insert(Interval::point(0.0));
    }
    let mut ha = HybridAutomaton {
        program: program.clone(),
        locations: Vec::new(),
        index: HashMap::new(),
        jumps: Vec::new(),
        base_vars,
        initial_box,
        budget: DEFAULT_LOCATION_BUDGET,
    };
    ha.intern(l0)?;
    Ok(ha)
}

impl HybridAutomaton {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn initial(&self) -> (usize, &BTreeMap<String, crate::interval::Interval>) {
        (0, &self.initial_box)
    }

    pub fn location(&self, id: usize) -> &HaLocation {
        &self.locations[id]
    }

    pub fn location_count(&self) -> usize {
        self.locations.len()
    }

    /// Variables of location `id`: the base variables and its timers.
    pub fn variables(&self, id: usize) -> Vec<String> {
        let mut vars = self.base_vars.clone();
        vars.extend(self.locations[id].timers().map(str::to_string));
        vars
    }

    fn intern(&mut self, l: HaLocation) -> Result<usize, HaError> {
        if let Some(&id) = self.index.get(&l) {
            return Ok(id);
        }
        if self.locations.len() >= self.budget {
            return Err(HaError::StateExplosionBudget(self.budget));
        }
        let id = self.locations.len();
        self.index.insert(l.clone(), id);
        self.locations.push(l);
        self.jumps.push(None);
        Ok(id)
    }

    /// Outgoing jumps of `id`, generating target locations as needed.
    pub fn jumps(&mut self, id: usize) -> Result<&[Jump], HaError> {
        if self.jumps[id].is_none() {
            let l = self.locations[id].clone();
            let mut steps = self.urgent_steps(&l)?;
            let urgent = !steps.is_empty();
            if !urgent {
                steps = self.timed_steps(&l);
            }
            let mut out = Vec::with_capacity(steps.len());
            for step in steps {
                let target = self.intern(step.target)?;
                out.push(Jump {
                    source: id,
                    target,
                    guard: step.guard,
                    reset: step.reset,
                    urgent,
                    label: step.label,
                });
            }
            self.jumps[id] = Some(out);
        }
        Ok(self.jumps[id].as_deref().unwrap())
    }

    pub fn is_urgent(&mut self, id: usize) -> Result<bool, HaError> {
        Ok(self.jumps(id)?.iter().any(|j| j.urgent))
    }

    /// Expands every location reachable through the discrete structure.
    pub fn explore(&mut self) -> Result<usize, HaError> {
        let mut next = 0;
        while next < self.locations.len() {
            self.jumps(next)?;
            next += 1;
        }
        Ok(self.locations.len())
    }

    fn urgent_steps(&self, l: &HaLocation) -> Result<Vec<Step>, HaError> {
        let mut out = Vec::new();
        let idle: Vec<(&RebecId, bool, &Vec<HaMessage>)> = l
            .rs
            .iter()
            .filter(|(_, r)| !r.suspended)
            .map(|(x, r)| (x, r.stmts.is_empty(), &r.mailbox))
            .chain(l.ps.iter().map(|(x, p)| (x, p.stmts.is_empty(), &p.mailbox)))
            .collect();
        for (x, no_stmts, mailbox) in idle {
            if !no_stmts {
                out.extend(self.exec_head(l, x)?);
                continue;
            }
            for (i, m) in mailbox.iter().enumerate() {
                if mailbox[..i].contains(m) {
                    continue;
                }
                let mut t = l.clone();
                let local = t.local_mut(x);
                local.mailbox.remove(i);
                match &m.mode {
                    Some(mode) => {
                        t.ps.get_mut(x).expect("set-mode targets are physical").mode = mode.clone();
                    }
                    None => {
                        local.ints.extend(m.params.iter().cloned());
                        *local.stmts = self.program.body(x, &m.server);
                    }
                }
                out.push(Step::new(t, format!("{x} takes {}", m.server)));
            }
        }
        Ok(out)
    }

    fn exec_head(&self, l: &HaLocation, x: &str) -> Result<Vec<Step>, HaError> {
        let mut t = l.clone();
        let ints = l.ints(x).clone();
        let head = {
            let local = t.local_mut(x);
            local.stmts.remove(0)
        };
        let mut step = Step::new(t, format!("{x} executes"));
        match &head.kind {
            StmtKind::Assign { var, value } => {
                if ints.contains_key(var) {
                    let v = eval_expr(value, &int_valuation(&ints))?
                        .as_int()
                        .ok_or_else(|| HaError::Unsupported(format!("non-integer value for `{var}`")))?;
                    step.target.local_mut(x).ints.insert(var.clone(), v);
                } else {
                    step.reset.push((format!("{x}.{var}"), qualify(value, x, &ints)));
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let branch = |mut target: HaLocation, body: &[Stmt]| {
                    let local = target.local_mut(x);
                    let rest = std::mem::take(local.stmts);
                    *local.stmts = arcs(body);
                    local.stmts.extend(rest);
                    target
                };
                if cond.vars().iter().all(|v| ints.contains_key(v)) {
                    let holds = compare(cond, &int_valuation(&ints))? == TriBool::AllTrue;
                    let body = if holds { then_branch } else { else_branch };
                    step.target = branch(step.target, body);
                } else {
                    let g = qualify(cond, x, &ints);
                    let mut other = Step::new(branch(step.target.clone(), else_branch), format!("{x} else"));
                    other.guard = g.negate();
                    step.target = branch(step.target, then_branch);
                    step.guard = g;
                    step.label = format!("{x} then");
                    return Ok(vec![step, other]);
                }
            }
            StmtKind::Delay(delay) => {
                let r = step
                    .target
                    .rs
                    .get_mut(x)
                    .ok_or_else(|| HaError::Unsupported(format!("delay in physical rebec `{x}`")))?;
                r.suspended = true;
                let timer = step.target.acquire_timer();
                step.reset.push((timer.clone(), Expr::float(0.0)));
                step.target.es.push(PendingEvent {
                    delay: *delay,
                    event: Event::Resume { rebec: x.to_string() },
                    timer,
                });
            }
            StmtKind::Send {
                target,
                message,
                args,
                after,
            } => {
                let y = self.program.resolve(x, target)?;
                let server = self
                    .program
                    .class_of(&y)
                    .and_then(|c| c.server(message))
                    .ok_or_else(|| HaError::Unsupported(format!("unknown server `{message}`")))?;
                let mut params = Vec::new();
                for (p, arg) in server.params.iter().zip(args) {
                    if p.ty == Type::Int {
                        let v = eval_expr(arg, &int_valuation(&ints))?
                            .as_int()
                            .ok_or_else(|| HaError::Unsupported(format!("non-integer argument `{}`", p.name)))?;
                        params.push((p.name.clone(), v));
                    } else {
                        step.reset.push((format!("{y}.{}", p.name), qualify(arg, x, &ints)));
                    }
                }
                params.sort();
                let m = HaMessage {
                    sender: x.to_string(),
                    server: message.clone(),
                    mode: None,
                    params,
                };
                Self::deliver(&mut step, y, m, *after);
            }
            StmtKind::SetMode { mode } => {
                step.target
                    .ps
                    .get_mut(x)
                    .ok_or_else(|| HaError::Unsupported(format!("setmode in reactive rebec `{x}`")))?
                    .mode = mode.clone();
            }
            StmtKind::SendSetMode { target, mode, after } => {
                let y = self.program.resolve(x, target)?;
                let m = HaMessage {
                    sender: x.to_string(),
                    server: crate::frontend::ast::SET_MODE.to_string(),
                    mode: Some(mode.clone()),
                    params: Vec::new(),
                };
                Self::deliver(&mut step, y, m, *after);
            }
        }
        Ok(vec![step])
    }

    fn deliver(step: &mut Step, y: RebecId, m: HaMessage, after: TimeBounds) {
        if after.is_zero() {
            step.target.local_mut(&y).mailbox.push(m);
        } else {
            let timer = step.target.acquire_timer();
            step.reset.push((timer.clone(), Expr::float(0.0)));
            step.target.es.push(PendingEvent {
                delay: after,
                event: Event::Transfer { target: y, message: m },
                timer,
            });
        }
    }

    fn timed_steps(&self, l: &HaLocation) -> Vec<Step> {
        let mut out = Vec::new();
        for (x, p) in &l.ps {
            if p.mode == NONE_MODE || !p.mailbox.is_empty() || !p.stmts.is_empty() {
                continue;
            }
            let Some(mode) = self.program.class_of(x).and_then(|c| c.mode(&p.mode)) else {
                continue;
            };
            let mut t = l.clone();
            let q = t.ps.get_mut(x).unwrap();
            q.stmts = self.program.trigger(x, &p.mode);
            q.mode = NONE_MODE.to_string();
            let mut step = Step::new(t, format!("{x} leaves {}", p.mode));
            step.guard = qualify(&mode.guard, x, &p.ints);
            out.push(step);
        }
        for (i, e) in l.es.iter().enumerate() {
            let mut t = l.clone();
            t.es.remove(i);
            let t = effect(&e.event, &t).expect("event targets exist");
            let label = match &e.event {
                Event::Resume { rebec } => format!("resume {rebec}"),
                Event::Transfer { target, message } => format!("deliver {} to {target}", message.server),
            };
            let mut step = Step::new(t, label);
            step.guard = Expr::binary(BinOp::Ge, Expr::var(&e.timer), Expr::float(e.delay.low.0));
            out.push(step);
        }
        out
    }

    /// Right-hand sides of the non-zero flows of location `id`.
    pub fn flows(&mut self, id: usize) -> Result<Vec<(String, Expr)>, HaError> {
        if self.is_urgent(id)? {
            return Ok(vec![(URG.to_string(), Expr::Int(1))]);
        }
        let l = &self.locations[id];
        let mut out = vec![(TIME.to_string(), Expr::Int(1))];
        for (x, p) in &l.ps {
            if p.mode == NONE_MODE {
                continue;
            }
            let mode = self.program.class_of(x).and_then(|c| c.mode(&p.mode)).expect("mode was checked");
            for v in self.program.real_vars(x) {
                if let Some(rhs) = mode.flow_of(v) {
                    out.push((format!("{x}.{v}"), qualify(rhs, x, &p.ints)));
                }
            }
        }
        out.extend(l.timers().map(|t| (t.to_string(), Expr::Int(1))));
        Ok(out)
    }

    pub fn invariant(&mut self, id: usize) -> Result<Expr, HaError> {
        if self.is_urgent(id)? {
            return Ok(Expr::binary(BinOp::Le, Expr::var(URG), Expr::Int(0)));
        }
        let l = &self.locations[id];
        let mut parts = Vec::new();
        for (x, p) in &l.ps {
            if let Some(mode) = self.program.class_of(x).and_then(|c| c.mode(&p.mode)) {
                parts.push(qualify(&mode.invariant, x, &p.ints));
            }
        }
        for e in &l.es {
            parts.push(Expr::binary(BinOp::Lt, Expr::var(&e.timer), Expr::float(e.delay.high.0)));
        }
        Ok(parts
            .into_iter()
            .reduce(|a, b| Expr::binary(BinOp::And, a, b))
            .unwrap_or(Expr::Bool(true)))
    }

    /// The expanded part of the automaton as a JSON document.
    pub fn to_json(&mut self) -> Result<Json, HaError> {
        let mut locations = Vec::new();
        let mut jumps = Vec::new();
        for id in 0..self.locations.len() {
            let Some(js) = self.jumps[id].clone() else { continue };
            let flows: serde_json::Map<String, Json> = self
                .flows(id)?
                .into_iter()
                .map(|(v, e)| (v, Json::String(expr_to_string(&e))))
                .collect();
            locations.push(json!({
                "id": id,
                "urgent": self.is_urgent(id)?,
                "state": self.locations[id].to_string(),
                "variables": self.variables(id),
                "flows": flows,
                "invariant": expr_to_string(&self.invariant(id)?),
            }));
            for j in js {
                jumps.push(json!({
                    "source": j.source,
                    "target": j.target,
                    "label": j.label,
                    "guard": expr_to_string(&j.guard),
                    "reset": j.reset.iter().map(|(v, e)| json!([v, expr_to_string(e)])).collect::<Vec<_>>(),
                }));
            }
        }
        Ok(json!({
            "variables": self.base_vars,
            "initial": 0,
            "locations": locations,
            "jumps": jumps,
        }))
    }
}

#[cfg(test)]
mod tests;
