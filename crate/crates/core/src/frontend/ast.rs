//! Abstract syntax of Hybrid Rebeca models.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

/// Source position of a syntax element.
///
/// Positions never take part in structural equality, ordering or hashing:
/// two ASTs that differ only in layout compare equal, which is what both the
/// printer round-trip and the state-space deduplication need.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for Span {}
impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Span {
    fn cmp(&self, _: &Self) -> Ordering {
        Ordering::Equal
    }
}
impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A float literal with total ordering so that ASTs can be hashed and sorted.
#[derive(Debug, Clone, Copy)]
pub struct Lit(pub f64);

impl PartialEq for Lit {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Lit {}
impl PartialOrd for Lit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Lit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl Hash for Lit {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Int,
    Float,
    Real,
}

impl Type {
    pub fn keyword(self) -> &'static str {
        match self {
            Type::Int => "int",
            Type::Float => "float",
            Type::Real => "real",
        }
    }

    pub fn is_continuous(self) -> bool {
        !matches!(self, Type::Int)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
    Eq,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Ne => "!=",
            BinOp::Eq => "==",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Ne | BinOp::Eq
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// The comparison obtained by swapping the operands (`a < b` iff `b > a`).
    pub fn mirrored(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }

    /// The comparison holding exactly when `self` does not.
    pub fn negated(self) -> Option<BinOp> {
        Some(match self {
            BinOp::Lt => BinOp::Ge,
            BinOp::Le => BinOp::Gt,
            BinOp::Gt => BinOp::Le,
            BinOp::Ge => BinOp::Lt,
            BinOp::Eq => BinOp::Ne,
            BinOp::Ne => BinOp::Eq,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Int(i64),
    Float(Lit),
    Bool(bool),
    Var(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn float(v: f64) -> Expr {
        Expr::Float(Lit(v))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    /// Free variables, in sorted order.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) => {}
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expr::Var(v) => v == name,
            Expr::Neg(e) | Expr::Not(e) => e.mentions(name),
            Expr::Binary(_, a, b) => a.mentions(name) || b.mentions(name),
            Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) => false,
        }
    }

    /// True for expressions whose top-level operator yields a truth value.
    pub fn is_boolean(&self) -> bool {
        match self {
            Expr::Bool(_) | Expr::Not(_) => true,
            Expr::Binary(op, _, _) => op.is_comparison() || op.is_logical(),
            _ => false,
        }
    }

    /// Rewrites every variable through `f`; `f` may replace a variable by an
    /// arbitrary expression (e.g. a constant for a known discrete value).
    pub fn map_vars(&self, f: &mut impl FnMut(&str) -> Expr) -> Expr {
        match self {
            Expr::Var(v) => f(v),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map_vars(f))),
            Expr::Not(e) => Expr::Not(Box::new(e.map_vars(f))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f)))
            }
            other => other.clone(),
        }
    }

    /// Logical negation pushed down to the atoms (De Morgan, flipped
    /// comparisons), so that the result stays trimmable atom by atom.
    pub fn negate(&self) -> Expr {
        match self {
            Expr::Bool(b) => Expr::Bool(!b),
            Expr::Not(e) => (**e).clone(),
            Expr::Binary(BinOp::And, a, b) => Expr::binary(BinOp::Or, a.negate(), b.negate()),
            Expr::Binary(BinOp::Or, a, b) => Expr::binary(BinOp::And, a.negate(), b.negate()),
            Expr::Binary(op, a, b) if op.is_comparison() => {
                Expr::Binary(op.negated().unwrap(), a.clone(), b.clone())
            }
            other => Expr::not(other.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeBounds {
    pub low: Lit,
    pub high: Lit,
}

impl TimeBounds {
    pub fn new(low: f64, high: f64) -> Self {
        Self {
            low: Lit(low),
            high: Lit(high),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.low.0 == 0.0 && self.high.0 == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Self {
            kind,
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StmtKind {
    Assign {
        var: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    Delay(TimeBounds),
    /// `target.message(args) after(lo, hi);` with `after(0, 0)` when omitted.
    Send {
        target: String,
        message: String,
        args: Vec<Expr>,
        after: TimeBounds,
    },
    SetMode {
        mode: String,
    },
    /// `target.SetMode(mode) after(lo, hi);`
    SendSetMode {
        target: String,
        mode: String,
        after: TimeBounds,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassKind {
    Reactive,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KnownRebec {
    pub class: String,
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub ty: Type,
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MsgServer {
    pub name: String,
    pub params: Vec<VarDecl>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Flow {
    pub var: String,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeDecl {
    pub name: String,
    pub invariant: Expr,
    pub flows: Vec<Flow>,
    pub guard: Expr,
    pub trigger: Vec<Stmt>,
    pub span: Span,
}

impl ModeDecl {
    pub fn flow_of(&self, var: &str) -> Option<&Expr> {
        self.flows.iter().find(|f| f.var == var).map(|f| &f.rhs)
    }
}

pub const DEFAULT_MAILBOX_CAPACITY: usize = 10;
pub const NONE_MODE: &str = "none";
pub const SET_MODE: &str = "SetMode";
pub const SELF: &str = "self";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassDecl {
    pub name: String,
    pub kind: ClassKind,
    pub mailbox_capacity: usize,
    pub known_rebecs: Vec<KnownRebec>,
    pub state_vars: Vec<VarDecl>,
    pub msg_servers: Vec<MsgServer>,
    pub modes: Vec<ModeDecl>,
    pub span: Span,
}

impl ClassDecl {
    pub fn server(&self, name: &str) -> Option<&MsgServer> {
        self.msg_servers.iter().find(|m| m.name == name)
    }

    pub fn constructor(&self) -> Option<&MsgServer> {
        self.server(&self.name)
    }

    pub fn mode(&self, name: &str) -> Option<&ModeDecl> {
        self.modes.iter().find(|m| m.name == name)
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    pub fn has_mode(&self, name: &str) -> bool {
        name == NONE_MODE || self.mode(name).is_some()
    }

    pub fn real_vars(&self) -> impl Iterator<Item = &VarDecl> {
        self.state_vars.iter().filter(|v| v.ty == Type::Real)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceDecl {
    pub class: String,
    pub name: String,
    pub known: Vec<String>,
    pub args: Vec<Expr>,
    pub span: Span,
}

/// A parsed model. Classes are kept in source order; instances in
/// instantiation order, which fixes the constructor execution order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Model {
    pub classes: Vec<ClassDecl>,
    pub main: Vec<InstanceDecl>,
}

impl Model {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn reactive_classes(&self) -> impl Iterator<Item = &ClassDecl> {
        self.classes.iter().filter(|c| c.kind == ClassKind::Reactive)
    }

    pub fn physical_classes(&self) -> impl Iterator<Item = &ClassDecl> {
        self.classes.iter().filter(|c| c.kind == ClassKind::Physical)
    }

    pub fn instance(&self, name: &str) -> Option<&InstanceDecl> {
        self.main.iter().find(|i| i.name == name)
    }

    /// Class of the named instance.
    pub fn class_of(&self, instance: &str) -> Option<&ClassDecl> {
        self.instance(instance).and_then(|i| self.class(&i.class))
    }
}
