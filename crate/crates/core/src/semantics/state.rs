use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::frontend::ast::{Stmt, TimeBounds};
use crate::interval::{Interval, Valuation, Value};

pub type RebecId = String;

/// A message in a mailbox. `insertion` and `after` keep the send-time
/// bookkeeping; `arrival` may later be narrowed by postponement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    pub sender: RebecId,
    pub server: String,
    /// Target mode of a `SetMode` message.
    pub mode: Option<String>,
    pub params: Valuation,
    pub arrival: Interval,
    pub insertion: Interval,
    pub after: TimeBounds,
}

impl Message {
    /// Builds a message sent during `insertion`; arrival is `insertion + after`.
    pub fn new(
        sender: impl Into<RebecId>,
        server: impl Into<String>,
        params: Valuation,
        insertion: Interval,
        after: TimeBounds,
    ) -> Self {
        let arrival = insertion.add(&Interval::closed(after.low.0, after.high.0));
        Self {
            sender: sender.into(),
            server: server.into(),
            mode: None,
            params,
            arrival,
            insertion,
            after,
        }
    }

    pub fn set_mode(
        sender: impl Into<RebecId>,
        mode: impl Into<String>,
        insertion: Interval,
        after: TimeBounds,
    ) -> Self {
        let mut m = Self::new(
            sender,
            crate::frontend::ast::SET_MODE,
            Valuation::new(),
            insertion,
            after,
        );
        m.mode = Some(mode.into());
        m
    }

    pub fn is_set_mode(&self) -> bool {
        self.mode.is_some()
    }

    /// Discrete identity of the message: everything except time windows
    /// and continuous parameter values.
    pub fn discrete_key(&self) -> (String, String, Option<String>, Vec<(String, i64)>) {
        let ints = self
            .params
            .iter()
            .filter_map(|(k, v)| v.as_int().map(|i| (k.clone(), i)))
            .collect();
        (self.sender.clone(), self.server.clone(), self.mode.clone(), ints)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mode {
            Some(m) => write!(f, "SetMode({m})")?,
            None => {
                write!(f, "{}(", self.server)?;
                for (i, (k, v)) in self.params.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}={v}")?;
                }
                write!(f, ")")?;
            }
        }
        write!(f, " from {} @ {}", self.sender, self.arrival)
    }
}

/// Pending resumption of a suspended reactive rebec.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Resume {
    pub window: Interval,
    pub insertion: Interval,
    pub delay: TimeBounds,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReactiveState {
    pub vars: Valuation,
    pub mailbox: Vec<Message>,
    pub stmts: Vec<Arc<Stmt>>,
    pub resume: Option<Resume>,
}

/// Where the current continuous evolution of a physical rebec started:
/// the global-time window and the values of its real variables there.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowOrigin {
    pub time: Interval,
    pub values: BTreeMap<String, Interval>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhysicalState {
    pub vars: Valuation,
    pub mailbox: Vec<Message>,
    pub stmts: Vec<Arc<Stmt>>,
    pub mode: String,
    pub origin: FlowOrigin,
}

impl PhysicalState {
    /// Restarts the flow at `gt` from the given real-variable values.
    pub fn restart_flow(&mut self, gt: Interval, real_vars: &[String]) {
        let values = real_vars
            .iter()
            .filter_map(|v| match self.vars.get(v) {
                Some(Value::Real(iv)) => Some((v.clone(), *iv)),
                _ => None,
            })
            .collect();
        self.origin = FlowOrigin { time: gt, values };
    }
}

/// The record `(RS, PS, GT)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalState {
    pub rs: BTreeMap<RebecId, ReactiveState>,
    pub ps: BTreeMap<RebecId, PhysicalState>,
    pub gt: Interval,
}

impl GlobalState {
    pub fn message_count(&self) -> usize {
        self.rs.values().map(|r| r.mailbox.len()).sum::<usize>()
            + self.ps.values().map(|p| p.mailbox.len()).sum::<usize>()
    }

    pub fn mailbox(&self, x: &str) -> Option<&Vec<Message>> {
        self.rs
            .get(x)
            .map(|r| &r.mailbox)
            .or_else(|| self.ps.get(x).map(|p| &p.mailbox))
    }

    pub fn mailbox_mut(&mut self, x: &str) -> Option<&mut Vec<Message>> {
        match self.rs.get_mut(x) {
            Some(r) => Some(&mut r.mailbox),
            None => self.ps.get_mut(x).map(|p| &mut p.mailbox),
        }
    }

    pub fn vars(&self, x: &str) -> Option<&Valuation> {
        self.rs
            .get(x)
            .map(|r| &r.vars)
            .or_else(|| self.ps.get(x).map(|p| &p.vars))
    }

    pub fn stmts(&self, x: &str) -> Option<&Vec<Arc<Stmt>>> {
        self.rs
            .get(x)
            .map(|r| &r.stmts)
            .or_else(|| self.ps.get(x).map(|p| &p.stmts))
    }

    /// All variables of all rebecs, qualified as `rebec.var`.
    pub fn qualified_valuation(&self) -> Valuation {
        let mut out = Valuation::new();
        let locals = self
            .rs
            .iter()
            .map(|(x, r)| (x, &r.vars))
            .chain(self.ps.iter().map(|(x, p)| (x, &p.vars)));
        for (x, vars) in locals {
            for (v, val) in vars {
                out.insert(format!("{x}.{v}"), *val);
            }
        }
        out
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GT = {}", self.gt)?;
        for (x, p) in &self.ps {
            write!(f, "  {x} [{}]", p.mode)?;
            for (v, val) in &p.vars {
                write!(f, " {v}={val}")?;
            }
            if !p.stmts.is_empty() {
                write!(f, " ({} stmts)", p.stmts.len())?;
            }
            writeln!(f)?;
            for m in &p.mailbox {
                writeln!(f, "    {m}")?;
            }
        }
        for (x, r) in &self.rs {
            write!(f, "  {x}")?;
            for (v, val) in &r.vars {
                write!(f, " {v}={val}")?;
            }
            if !r.stmts.is_empty() {
                write!(f, " ({} stmts)", r.stmts.len())?;
            }
            if let Some(res) = &r.resume {
                write!(f, " resume@{}", res.window)?;
            }
            writeln!(f)?;
            for m in &r.mailbox {
                writeln!(f, "    {m}")?;
            }
        }
        Ok(())
    }
}
