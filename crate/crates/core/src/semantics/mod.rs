//! Timed-transition-system semantics: states and the non-time-progressing
//! rules (take, postpone, resume, statement execution), their closure, and
//! the global-time machinery used by the reachability driver.

mod state;
mod time;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::frontend::ast::{ClassDecl, ClassKind, Model, Stmt, StmtKind, Type, NONE_MODE, SELF};
use crate::frontend::{static_check, Diagnostic};
use crate::interval::{compare, eval_expr, EvalError, Interval, TriBool, Valuation, Value};

pub use state::{FlowOrigin, GlobalState, Message, PhysicalState, ReactiveState, RebecId, Resume};
pub use time::{events, progress_time, sort_collapse, EventKind, EventTime, TIME_EPS};

pub const DEFAULT_NTP_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("model has {} static check violation(s)", .0.len())]
    InvalidModel(Vec<Diagnostic>),
    #[error("unknown rebec `{0}`")]
    UnknownRebec(String),
    #[error("rebec `{0}` is busy or suspended")]
    NotQuiescent(RebecId),
    #[error("message has not arrived yet for `{0}`")]
    NotYetArrived(RebecId),
    #[error("rebec `{0}` is not suspended")]
    NotSuspended(RebecId),
    #[error("resume of `{0}` is not due")]
    NotDue(RebecId),
    #[error("rebec `{0}` has no statement to execute")]
    NoStatement(RebecId),
    #[error("mailbox of `{0}` overflows")]
    MailboxOverflow(RebecId),
    #[error("constructor of `{0}` branches on an interval")]
    NondeterministicConstructor(RebecId),
    #[error("more than {0} rule applications without quiescence")]
    NtpBudgetExceeded(usize),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("in rebec `{rebec}`: {source}")]
    Eval {
        rebec: RebecId,
        #[source]
        source: EvalError,
    },
}

/// Which rule produced a successor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NtpRule {
    Take { rebec: RebecId, index: usize },
    PostponeMessage { rebec: RebecId, index: usize },
    Resume { rebec: RebecId },
    PostponeResume { rebec: RebecId },
    Exec { rebec: RebecId, branch: Option<bool> },
}

impl NtpRule {
    pub fn rebec(&self) -> &str {
        match self {
            NtpRule::Take { rebec, .. }
            | NtpRule::PostponeMessage { rebec, .. }
            | NtpRule::Resume { rebec }
            | NtpRule::PostponeResume { rebec }
            | NtpRule::Exec { rebec, .. } => rebec,
        }
    }
}

#[derive(Debug, Clone)]
struct RebecInfo {
    class: usize,
    /// Local known-rebec name -> instance.
    known: BTreeMap<String, RebecId>,
}

/// A checked model prepared for execution.
#[derive(Debug, Clone)]
pub struct Program {
    pub model: Arc<Model>,
    /// Instances in instantiation order.
    pub order: Vec<RebecId>,
    info: BTreeMap<RebecId, RebecInfo>,
    bodies: BTreeMap<(usize, String), Vec<Arc<Stmt>>>,
    triggers: BTreeMap<(usize, String), Vec<Arc<Stmt>>>,
    real_vars: Vec<Vec<String>>,
    pub ntp_budget: usize,
}

fn arcs(stmts: &[Stmt]) -> Vec<Arc<Stmt>> {
    stmts.iter().cloned().map(Arc::new).collect()
}

/// The message can already have arrived at the start of `gt`. At a single
/// instant an open lower end (left by a postponement) has not.
fn has_arrived(window: &Interval, gt: &Interval) -> bool {
    if window.lo < gt.lo - TIME_EPS {
        return true;
    }
    (window.lo - gt.lo).abs() <= TIME_EPS && (window.lo_closed || gt.width() > TIME_EPS)
}

/// The window pushed past the current global time: `[GT.high, t4)`.
fn postponed(window: &Interval, gt: &Interval) -> Option<Interval> {
    (gt.hi < window.hi - TIME_EPS).then(|| Interval::new(gt.hi, window.hi, !gt.hi_closed, window.hi_closed))
}

impl Program {
    pub fn new(model: Model) -> Result<Self, SemanticsError> {
        let diags = static_check(&model);
        if !diags.is_empty() {
            return Err(SemanticsError::InvalidModel(diags));
        }
        let mut info = BTreeMap::new();
        let mut order = Vec::new();
        for inst in &model.main {
            let class = model.classes.iter().position(|c| c.name == inst.class).unwrap();
            let known = model.classes[class]
                .known_rebecs
                .iter()
                .zip(&inst.known)
                .map(|(k, target)| (k.name.clone(), target.clone()))
                .collect();
            order.push(inst.name.clone());
            info.insert(inst.name.clone(), RebecInfo { class, known });
        }
        let mut bodies = BTreeMap::new();
        let mut triggers = BTreeMap::new();
        let mut real_vars = Vec::new();
        for (i, c) in model.classes.iter().enumerate() {
            for m in &c.msg_servers {
                bodies.insert((i, m.name.clone()), arcs(&m.body));
            }
            for m in &c.modes {
                triggers.insert((i, m.name.clone()), arcs(&m.trigger));
            }
            real_vars.push(c.real_vars().map(|v| v.name.clone()).collect());
        }
        Ok(Self {
            model: Arc::new(model),
            order,
            info,
            bodies,
            triggers,
            real_vars,
            ntp_budget: DEFAULT_NTP_BUDGET,
        })
    }

    pub fn with_ntp_budget(mut self, budget: usize) -> Self {
        self.ntp_budget = budget;
        self
    }

    fn info(&self, x: &str) -> Result<&RebecInfo, SemanticsError> {
        self.info.get(x).ok_or_else(|| SemanticsError::UnknownRebec(x.to_string()))
    }

    pub fn class_of(&self, x: &str) -> Option<&ClassDecl> {
        self.info.get(x).map(|i| &self.model.classes[i.class])
    }

    pub fn is_physical(&self, x: &str) -> bool {
        self.class_of(x).is_some_and(|c| c.kind == ClassKind::Physical)
    }

    pub fn real_vars(&self, x: &str) -> &[String] {
        self.info.get(x).map(|i| self.real_vars[i.class].as_slice()).unwrap_or(&[])
    }

    /// Statements of a message server of `x`'s class.
    pub fn body(&self, x: &str, server: &str) -> Vec<Arc<Stmt>> {
        let class = self.info[x].class;
        self.bodies.get(&(class, server.to_string())).cloned().unwrap_or_default()
    }

    /// Trigger statements of mode `mode` of `x`'s class.
    pub fn trigger(&self, x: &str, mode: &str) -> Vec<Arc<Stmt>> {
        let class = self.info[x].class;
        self.triggers.get(&(class, mode.to_string())).cloned().unwrap_or_default()
    }

    /// Resolves a send target seen from `x`.
    pub fn resolve(&self, x: &str, target: &str) -> Result<RebecId, SemanticsError> {
        if target == SELF {
            return Ok(x.to_string());
        }
        self.info(x)?
            .known
            .get(target)
            .cloned()
            .ok_or_else(|| SemanticsError::UnknownRebec(target.to_string()))
    }

    fn eval(&self, x: &str, e: &crate::frontend::Expr, sigma: &Valuation) -> Result<Value, SemanticsError> {
        eval_expr(e, sigma).map_err(|source| SemanticsError::Eval {
            rebec: x.to_string(),
            source,
        })
    }

    fn cond(&self, x: &str, e: &crate::frontend::Expr, sigma: &Valuation) -> Result<TriBool, SemanticsError> {
        compare(e, sigma).map_err(|source| SemanticsError::Eval {
            rebec: x.to_string(),
            source,
        })
    }

    fn zero_valuation(class: &ClassDecl) -> Valuation {
        class
            .state_vars
            .iter()
            .map(|v| {
                let val = match v.ty {
                    Type::Int => Value::Int(0),
                    _ => Value::Real(Interval::point(0.0)),
                };
                (v.name.clone(), val)
            })
            .collect()
    }

    /// Zero-initialised state, then constructors run in instantiation order
    /// at global time `[0, 0]`.
    pub fn make_initial_state(&self) -> Result<GlobalState, SemanticsError> {
        let gt = Interval::point(0.0);
        let mut s = GlobalState {
            rs: BTreeMap::new(),
            ps: BTreeMap::new(),
            gt,
        };
        for x in &self.order {
            let class = self.class_of(x).unwrap();
            let vars = Self::zero_valuation(class);
            match class.kind {
                ClassKind::Reactive => {
                    s.rs.insert(
                        x.clone(),
                        ReactiveState {
                            vars,
                            mailbox: Vec::new(),
                            stmts: Vec::new(),
                            resume: None,
                        },
                    );
                }
                ClassKind::Physical => {
                    let mut p = PhysicalState {
                        vars,
                        mailbox: Vec::new(),
                        stmts: Vec::new(),
                        mode: NONE_MODE.to_string(),
                        origin: FlowOrigin {
                            time: gt,
                            values: BTreeMap::new(),
                        },
                    };
                    p.restart_flow(gt, self.real_vars(x));
                    s.ps.insert(x.clone(), p);
                }
            }
        }
        for inst in &self.model.main {
            let x = &inst.name;
            let class = self.class_of(x).unwrap();
            let ctor = class.constructor().unwrap();
            let mut bound = Valuation::new();
            for (p, arg) in ctor.params.iter().zip(&inst.args) {
                let v = self.eval(x, arg, &Valuation::new())?;
                bound.insert(p.name.clone(), coerce(p.ty, v));
            }
            let stmts = self.body(x, &class.name);
            if let Some(r) = s.rs.get_mut(x) {
                r.vars.extend(bound);
                r.stmts = stmts;
            } else if let Some(p) = s.ps.get_mut(x) {
                p.vars.extend(bound);
                p.stmts = stmts;
            }
            loop {
                let busy = s.stmts(x).is_some_and(|st| !st.is_empty());
                let suspended = s.rs.get(x).is_some_and(|r| r.resume.is_some());
                if !busy || suspended {
                    break;
                }
                let mut next = self.exec_statement(&s, x)?;
                if next.len() != 1 {
                    return Err(SemanticsError::NondeterministicConstructor(x.clone()));
                }
                s = next.pop().unwrap();
            }
        }
        Ok(s)
    }

    /// Take rule for the message at `index` of `x`'s mailbox: the consume
    /// successor, plus the postpone successor when the arrival window
    /// extends past `GT.high`.
    pub fn apply_take_message(
        &self,
        s: &GlobalState,
        x: &str,
        index: usize,
    ) -> Result<Vec<GlobalState>, SemanticsError> {
        Ok(self.take_successors(s, x, index)?.into_iter().map(|(g, _)| g).collect())
    }

    fn take_successors(
        &self,
        s: &GlobalState,
        x: &str,
        index: usize,
    ) -> Result<Vec<(GlobalState, NtpRule)>, SemanticsError> {
        let idle = s.stmts(x).ok_or_else(|| SemanticsError::UnknownRebec(x.to_string()))?.is_empty()
            && s.rs.get(x).is_none_or(|r| r.resume.is_none());
        if !idle {
            return Err(SemanticsError::NotQuiescent(x.to_string()));
        }
        let msg = s
            .mailbox(x)
            .and_then(|mb| mb.get(index))
            .ok_or_else(|| SemanticsError::PreconditionViolated(format!("no message {index} for `{x}`")))?
            .clone();
        if !has_arrived(&msg.arrival, &s.gt) {
            return Err(SemanticsError::NotYetArrived(x.to_string()));
        }
        let mut out = Vec::with_capacity(2);
        let mut consumed = s.clone();
        consumed.mailbox_mut(x).unwrap().remove(index);
        if let Some(p) = consumed.ps.get_mut(x) {
            if let Some(mode) = &msg.mode {
                p.mode = mode.clone();
                p.restart_flow(s.gt, self.real_vars(x));
            } else {
                p.vars.extend(msg.params.clone());
                p.stmts = self.body(x, &msg.server);
            }
        } else if let Some(r) = consumed.rs.get_mut(x) {
            r.vars.extend(msg.params.clone());
            r.stmts = self.body(x, &msg.server);
        }
        out.push((
            consumed,
            NtpRule::Take {
                rebec: x.to_string(),
                index,
            },
        ));
        if let Some(window) = postponed(&msg.arrival, &s.gt) {
            let mut later = s.clone();
            later.mailbox_mut(x).unwrap()[index].arrival = window;
            out.push((
                later,
                NtpRule::PostponeMessage {
                    rebec: x.to_string(),
                    index,
                },
            ));
        }
        Ok(out)
    }

    /// Resume rule, plus the postpone successor when the resume window
    /// extends past `GT.high`.
    pub fn apply_resume(&self, s: &GlobalState, x: &str) -> Result<Vec<GlobalState>, SemanticsError> {
        Ok(self.resume_successors(s, x)?.into_iter().map(|(g, _)| g).collect())
    }

    fn resume_successors(&self, s: &GlobalState, x: &str) -> Result<Vec<(GlobalState, NtpRule)>, SemanticsError> {
        let r = s.rs.get(x).ok_or_else(|| SemanticsError::NotSuspended(x.to_string()))?;
        let res = r.resume.as_ref().ok_or_else(|| SemanticsError::NotSuspended(x.to_string()))?;
        if !has_arrived(&res.window, &s.gt) {
            return Err(SemanticsError::NotDue(x.to_string()));
        }
        let mut out = Vec::with_capacity(2);
        let mut resumed = s.clone();
        resumed.rs.get_mut(x).unwrap().resume = None;
        out.push((resumed, NtpRule::Resume { rebec: x.to_string() }));
        if let Some(window) = postponed(&res.window, &s.gt) {
            let mut later = s.clone();
            later.rs.get_mut(x).unwrap().resume.as_mut().unwrap().window = window;
            out.push((later, NtpRule::PostponeResume { rebec: x.to_string() }));
        }
        Ok(out)
    }

    /// Executes the head statement of `x`.
    pub fn exec_statement(&self, s: &GlobalState, x: &str) -> Result<Vec<GlobalState>, SemanticsError> {
        Ok(self.exec_successors(s, x)?.into_iter().map(|(g, _)| g).collect())
    }

    fn exec_successors(&self, s: &GlobalState, x: &str) -> Result<Vec<(GlobalState, NtpRule)>, SemanticsError> {
        let stmts = s.stmts(x).ok_or_else(|| SemanticsError::UnknownRebec(x.to_string()))?;
        if s.rs.get(x).is_some_and(|r| r.resume.is_some()) {
            return Err(SemanticsError::NotQuiescent(x.to_string()));
        }
        let head = stmts.first().ok_or_else(|| SemanticsError::NoStatement(x.to_string()))?.clone();
        let mut next = s.clone();
        pop_head(&mut next, x);
        let sigma = s.vars(x).unwrap();
        let exec = |g: GlobalState| {
            vec![(
                g,
                NtpRule::Exec {
                    rebec: x.to_string(),
                    branch: None,
                },
            )]
        };
        match &head.kind {
            StmtKind::Assign { var, value } => {
                let v = self.eval(x, value, sigma)?;
                let class = self.class_of(x).unwrap();
                let ty = class
                    .var(var)
                    .map(|d| d.ty)
                    .or_else(|| match sigma.get(var) {
                        Some(Value::Int(_)) => Some(Type::Int),
                        _ => Some(Type::Float),
                    })
                    .unwrap();
                let v = coerce(ty, v);
                if let Some(r) = next.rs.get_mut(x) {
                    r.vars.insert(var.clone(), v);
                } else if let Some(p) = next.ps.get_mut(x) {
                    p.vars.insert(var.clone(), v);
                    if ty == Type::Real {
                        p.restart_flow(s.gt, self.real_vars(x));
                    }
                }
                Ok(exec(next))
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let verdict = self.cond(x, cond, sigma)?;
                let mut out = Vec::with_capacity(2);
                for (taken, branch) in [(true, then_branch), (false, else_branch)] {
                    let possible = match verdict {
                        TriBool::AllTrue => taken,
                        TriBool::AllFalse => !taken,
                        TriBool::Mixed => true,
                    };
                    if possible {
                        let mut g = next.clone();
                        prepend(&mut g, x, arcs(branch));
                        out.push((
                            g,
                            NtpRule::Exec {
                                rebec: x.to_string(),
                                branch: Some(taken),
                            },
                        ));
                    }
                }
                Ok(out)
            }
            StmtKind::Delay(b) => {
                let r = next
                    .rs
                    .get_mut(x)
                    .ok_or_else(|| SemanticsError::PreconditionViolated(format!("delay in physical rebec `{x}`")))?;
                r.resume = Some(Resume {
                    window: s.gt.add(&Interval::closed(b.low.0, b.high.0)),
                    insertion: s.gt,
                    delay: *b,
                });
                Ok(exec(next))
            }
            StmtKind::Send {
                target,
                message,
                args,
                after,
            } => {
                let y = self.resolve(x, target)?;
                let server = self.class_of(&y).unwrap().server(message).unwrap();
                let mut params = Valuation::new();
                for (p, a) in server.params.iter().zip(args) {
                    params.insert(p.name.clone(), coerce(p.ty, self.eval(x, a, sigma)?));
                }
                let msg = Message::new(x, message.clone(), params, s.gt, *after);
                self.deliver(&mut next, &y, msg)?;
                Ok(exec(next))
            }
            StmtKind::SendSetMode { target, mode, after } => {
                let y = self.resolve(x, target)?;
                let msg = Message::set_mode(x, mode.clone(), s.gt, *after);
                self.deliver(&mut next, &y, msg)?;
                Ok(exec(next))
            }
            StmtKind::SetMode { mode } => {
                let p = next
                    .ps
                    .get_mut(x)
                    .ok_or_else(|| SemanticsError::PreconditionViolated(format!("setmode in reactive rebec `{x}`")))?;
                p.mode = mode.clone();
                p.restart_flow(s.gt, self.real_vars(x));
                Ok(exec(next))
            }
        }
    }

    fn deliver(&self, s: &mut GlobalState, y: &str, msg: Message) -> Result<(), SemanticsError> {
        let cap = self.class_of(y).unwrap().mailbox_capacity;
        let mb = s.mailbox_mut(y).ok_or_else(|| SemanticsError::UnknownRebec(y.to_string()))?;
        if mb.len() >= cap {
            return Err(SemanticsError::MailboxOverflow(y.to_string()));
        }
        mb.push(msg);
        Ok(())
    }

    /// Every enabled non-time-progressing step, probing rebecs in
    /// instantiation order.
    pub fn ntp_successors(&self, s: &GlobalState) -> Result<Vec<(GlobalState, NtpRule)>, SemanticsError> {
        let mut out = Vec::new();
        for x in &self.order {
            let suspended = s.rs.get(x).and_then(|r| r.resume.as_ref());
            let stmts = s.stmts(x).unwrap();
            if let Some(res) = suspended {
                if has_arrived(&res.window, &s.gt) {
                    out.extend(self.resume_successors(s, x)?);
                }
            } else if !stmts.is_empty() {
                out.extend(self.exec_successors(s, x)?);
            } else {
                let mailbox = s.mailbox(x).unwrap();
                for (i, m) in mailbox.iter().enumerate() {
                    if has_arrived(&m.arrival, &s.gt) {
                        out.extend(self.take_successors(s, x, i)?);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn is_quiescent(&self, s: &GlobalState) -> bool {
        self.order.iter().all(|x| {
            if let Some(res) = s.rs.get(x).and_then(|r| r.resume.as_ref()) {
                return !has_arrived(&res.window, &s.gt);
            }
            s.stmts(x).unwrap().is_empty() && s.mailbox(x).unwrap().iter().all(|m| !has_arrived(&m.arrival, &s.gt))
        })
    }

    /// All quiescent states reachable from `s` by non-time-progressing steps.
    pub fn execute_ntp(&self, s: &GlobalState) -> Result<BTreeSet<GlobalState>, SemanticsError> {
        let mut out = BTreeSet::new();
        let mut visited: HashSet<GlobalState> = HashSet::new();
        let mut stack = vec![s.clone()];
        visited.insert(s.clone());
        let mut applications = 0usize;
        while let Some(cur) = stack.pop() {
            let succ = self.ntp_successors(&cur)?;
            if succ.is_empty() {
                out.insert(cur);
                continue;
            }
            for (next, _) in succ {
                applications += 1;
                if applications > self.ntp_budget {
                    return Err(SemanticsError::NtpBudgetExceeded(self.ntp_budget));
                }
                if !visited.contains(&next) {
                    visited.insert(next.clone());
                    stack.push(next);
                }
            }
        }
        Ok(out)
    }
}

fn coerce(ty: Type, v: Value) -> Value {
    match (ty, v) {
        (Type::Int, v) => v,
        (_, Value::Int(i)) => Value::Real(Interval::point(i as f64)),
        (_, v) => v,
    }
}

fn pop_head(s: &mut GlobalState, x: &str) {
    if let Some(r) = s.rs.get_mut(x) {
        r.stmts.remove(0);
    } else if let Some(p) = s.ps.get_mut(x) {
        p.stmts.remove(0);
    }
}

fn prepend(s: &mut GlobalState, x: &str, mut front: Vec<Arc<Stmt>>) {
    let stmts = match s.rs.get_mut(x) {
        Some(r) => &mut r.stmts,
        None => &mut s.ps.get_mut(x).unwrap().stmts,
    };
    front.append(stmts);
    *stmts = front;
}

#[cfg(test)]
mod tests;
