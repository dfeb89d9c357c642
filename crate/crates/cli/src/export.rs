//! JSON and DOT renderings of a reachability result.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hrebeca_core::frontend::print::stmt_to_string;
use hrebeca_core::interval::{Interval, Value};
use hrebeca_core::reach::ReachResult;
use hrebeca_core::semantics::{GlobalState, Message};
use serde::{Deserialize, Serialize};

use crate::RunReport;

/// `[lo, hi, loClosed, hiClosed]`, endpoints as shortest round-trip decimals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalDoc(pub String, pub String, pub bool, pub bool);

impl From<&Interval> for IntervalDoc {
    fn from(iv: &Interval) -> Self {
        IntervalDoc(iv.lo.to_string(), iv.hi.to_string(), iv.lo_closed, iv.hi_closed)
    }
}

impl IntervalDoc {
    pub fn to_interval(&self) -> Result<Interval, std::num::ParseFloatError> {
        Ok(Interval::new(self.0.parse()?, self.1.parse()?, self.2, self.3))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueDoc {
    Int(i64),
    Real(IntervalDoc),
}

impl From<&Value> for ValueDoc {
    fn from(v: &Value) -> Self {
        match v {
            Value::Int(i) => ValueDoc::Int(*i),
            Value::Real(iv) => ValueDoc::Real(iv.into()),
        }
    }
}

fn values(vars: &BTreeMap<String, Value>) -> BTreeMap<String, ValueDoc> {
    vars.iter().map(|(k, v)| (k.clone(), v.into())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageDoc {
    pub sender: String,
    pub server: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub params: BTreeMap<String, ValueDoc>,
    pub arrival: IntervalDoc,
}

impl From<&Message> for MessageDoc {
    fn from(m: &Message) -> Self {
        MessageDoc {
            sender: m.sender.clone(),
            server: m.server.clone(),
            mode: m.mode.clone(),
            params: values(&m.params),
            arrival: (&m.arrival).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebecDoc {
    /// Present for physical rebecs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub vars: BTreeMap<String, ValueDoc>,
    pub stmts: Vec<String>,
    pub mailbox: Vec<MessageDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume: Option<IntervalDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDoc {
    pub id: usize,
    pub gt: IntervalDoc,
    pub rebecs: BTreeMap<String, RebecDoc>,
}

impl StateDoc {
    fn new(id: usize, s: &GlobalState) -> Self {
        let mut rebecs = BTreeMap::new();
        for (x, r) in &s.rs {
            rebecs.insert(
                x.clone(),
                RebecDoc {
                    mode: None,
                    vars: values(&r.vars),
                    stmts: r.stmts.iter().map(|st| stmt_to_string(st)).collect(),
                    mailbox: r.mailbox.iter().map(MessageDoc::from).collect(),
                    resume: r.resume.as_ref().map(|res| (&res.window).into()),
                },
            );
        }
        for (x, p) in &s.ps {
            rebecs.insert(
                x.clone(),
                RebecDoc {
                    mode: Some(p.mode.clone()),
                    vars: values(&p.vars),
                    stmts: p.stmts.iter().map(|st| stmt_to_string(st)).collect(),
                    mailbox: p.mailbox.iter().map(MessageDoc::from).collect(),
                    resume: None,
                },
            );
        }
        StateDoc {
            id,
            gt: (&s.gt).into(),
            rebecs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: usize,
    pub to: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigDoc {
    pub model: String,
    pub time_horizon: f64,
    pub jump_depth: usize,
    pub step_size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unsafe_predicate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub config: ConfigDoc,
    pub states: Vec<StateDoc>,
    pub edges: Vec<EdgeDoc>,
    pub report: RunReport,
}

impl Document {
    pub fn new(config: ConfigDoc, r: &ReachResult, report: RunReport) -> Self {
        Document {
            config,
            states: r.states.iter().enumerate().map(|(i, s)| StateDoc::new(i, s)).collect(),
            edges: r
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    from: e.from,
                    to: e.to,
                    label: e.label.as_str().to_string(),
                })
                .collect(),
            report,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn node_label(id: usize, s: &GlobalState) -> String {
    let mut label = format!("s{id}\nGT = {}", s.gt);
    for (x, p) in &s.ps {
        let _ = write!(label, "\n{x}: {}", p.mode);
        for (v, val) in &p.vars {
            if matches!(val, Value::Real(_)) {
                let _ = write!(label, " {v}={val}");
            }
        }
    }
    label
}

/// One node per state in id order, then edges in `(from, to, label)` order.
pub fn to_dot(r: &ReachResult) -> String {
    let mut out = String::from("digraph reach {\n  node [shape=box, fontname=\"monospace\"];\n");
    for (i, s) in r.states.iter().enumerate() {
        let extra = if r.unsafe_witness == Some(i) { ", color=red" } else { "" };
        let _ = writeln!(out, "  s{i} [label=\"{}\"{extra}];", escape(&node_label(i, s)));
    }
    for e in &r.edges {
        let _ = writeln!(out, "  s{} -> s{} [label=\"{}\"];", e.from, e.to, e.label.as_str());
    }
    out.push_str("}\n");
    out
}
