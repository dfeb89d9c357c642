//! Static well-formedness checks run after parsing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    UnknownClass,
    UnknownRebec,
    UnknownServer,
    UnknownVariable,
    UnknownMode,
    ArityMismatch,
    TypeViolation,
    MissingConstructor,
    NegativeDelay,
    DuplicateName,
    NoInstances,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.span, self.kind, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ETy {
    Int,
    Num,
    Bool,
}

struct Scope<'a> {
    class: &'a ClassDecl,
    vars: BTreeMap<&'a str, Type>,
}

impl<'a> Scope<'a> {
    fn new(class: &'a ClassDecl, params: &'a [VarDecl]) -> Self {
        let mut vars: BTreeMap<&str, Type> =
            class.state_vars.iter().map(|v| (v.name.as_str(), v.ty)).collect();
        for p in params {
            vars.insert(p.name.as_str(), p.ty);
        }
        Self { class, vars }
    }
}

struct Checker<'a> {
    model: &'a Model,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn report(&mut self, kind: DiagnosticKind, span: Span, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            kind,
            span,
            message: message.into(),
        });
    }

    fn expr(&mut self, e: &Expr, scope: &Scope, span: Span) -> Option<ETy> {
        use DiagnosticKind::*;
        match e {
            Expr::Int(_) => Some(ETy::Int),
            Expr::Float(_) => Some(ETy::Num),
            Expr::Bool(_) => Some(ETy::Bool),
            Expr::Var(v) => match scope.vars.get(v.as_str()) {
                Some(Type::Int) => Some(ETy::Int),
                Some(_) => Some(ETy::Num),
                None => {
                    self.report(UnknownVariable, span, format!("unknown variable `{v}`"));
                    None
                }
            },
            Expr::Neg(inner) => {
                let t = self.expr(inner, scope, span)?;
                if t == ETy::Bool {
                    self.report(TypeViolation, span, "unary minus applied to a condition");
                    return None;
                }
                Some(t)
            }
            Expr::Not(inner) => {
                let t = self.expr(inner, scope, span)?;
                if t != ETy::Bool {
                    self.report(TypeViolation, span, "`!` applied to a number");
                    return None;
                }
                Some(ETy::Bool)
            }
            Expr::Binary(op, a, b) => {
                let ta = self.expr(a, scope, span);
                let tb = self.expr(b, scope, span);
                let (ta, tb) = (ta?, tb?);
                if op.is_logical() {
                    if ta != ETy::Bool || tb != ETy::Bool {
                        self.report(TypeViolation, span, format!("operands of `{}` must be conditions", op.symbol()));
                        return None;
                    }
                    return Some(ETy::Bool);
                }
                if ta == ETy::Bool || tb == ETy::Bool {
                    self.report(TypeViolation, span, format!("operands of `{}` must be numbers", op.symbol()));
                    return None;
                }
                if op.is_comparison() {
                    Some(ETy::Bool)
                } else if ta == ETy::Int && tb == ETy::Int {
                    Some(ETy::Int)
                } else {
                    Some(ETy::Num)
                }
            }
        }
    }

    fn expect_bool(&mut self, e: &Expr, scope: &Scope, span: Span, what: &str) {
        if let Some(t) = self.expr(e, scope, span) {
            if t != ETy::Bool {
                self.report(DiagnosticKind::TypeViolation, span, format!("{what} must be a condition"));
            }
        }
    }

    fn expect_num(&mut self, e: &Expr, scope: &Scope, span: Span, what: &str) -> Option<ETy> {
        let t = self.expr(e, scope, span)?;
        if t == ETy::Bool {
            self.report(DiagnosticKind::TypeViolation, span, format!("{what} must be a number"));
            return None;
        }
        Some(t)
    }

    fn bounds(&mut self, b: &TimeBounds, span: Span, what: &str) {
        let (lo, hi) = (b.low.0, b.high.0);
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            self.report(
                DiagnosticKind::NegativeDelay,
                span,
                format!("{what}({lo}, {hi}) needs 0 <= lower <= upper"),
            );
        }
    }

    /// Class of a send target seen from `class`.
    fn target_class(&mut self, class: &'a ClassDecl, target: &str, span: Span) -> Option<&'a ClassDecl> {
        if target == SELF {
            return Some(class);
        }
        match class.known_rebecs.iter().find(|k| k.name == target) {
            Some(k) => self.model.class(&k.class),
            None => {
                self.report(DiagnosticKind::UnknownRebec, span, format!("`{target}` is not a known rebec"));
                None
            }
        }
    }

    fn stmts(&mut self, stmts: &[Stmt], scope: &Scope<'a>) {
        for s in stmts {
            self.stmt(s, scope);
        }
    }

    fn stmt(&mut self, s: &Stmt, scope: &Scope<'a>) {
        use DiagnosticKind::*;
        let class = scope.class;
        match &s.kind {
            StmtKind::Assign { var, value } => {
                let vt = self.expect_num(value, scope, s.span, "assigned value");
                match scope.vars.get(var.as_str()) {
                    None => self.report(UnknownVariable, s.span, format!("unknown variable `{var}`")),
                    Some(Type::Int) if vt == Some(ETy::Num) => {
                        self.report(TypeViolation, s.span, format!("non-integer value assigned to int `{var}`"))
                    }
                    _ => {}
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expect_bool(cond, scope, s.span, "condition");
                self.stmts(then_branch, scope);
                self.stmts(else_branch, scope);
            }
            StmtKind::Delay(b) => {
                self.bounds(b, s.span, "delay");
                if class.kind == ClassKind::Physical {
                    self.report(TypeViolation, s.span, "delay is only allowed in reactive classes");
                }
            }
            StmtKind::Send {
                target,
                message,
                args,
                after,
            } => {
                self.bounds(after, s.span, "after");
                let arg_types: Vec<_> = args
                    .iter()
                    .map(|a| self.expect_num(a, scope, s.span, "message argument"))
                    .collect();
                let Some(tc) = self.target_class(class, target, s.span) else {
                    return;
                };
                let Some(server) = tc.server(message) else {
                    self.report(UnknownServer, s.span, format!("class `{}` has no message server `{message}`", tc.name));
                    return;
                };
                if server.params.len() != args.len() {
                    self.report(
                        ArityMismatch,
                        s.span,
                        format!("`{message}` takes {} arguments, {} given", server.params.len(), args.len()),
                    );
                    return;
                }
                for (p, t) in server.params.iter().zip(arg_types) {
                    if p.ty == Type::Int && t == Some(ETy::Num) {
                        self.report(TypeViolation, s.span, format!("non-integer argument for int parameter `{}`", p.name));
                    }
                }
            }
            StmtKind::SetMode { mode } => {
                if class.kind != ClassKind::Physical {
                    self.report(TypeViolation, s.span, "setmode is only allowed in physical classes");
                } else if !class.has_mode(mode) {
                    self.report(UnknownMode, s.span, format!("class `{}` has no mode `{mode}`", class.name));
                }
            }
            StmtKind::SendSetMode { target, mode, after } => {
                self.bounds(after, s.span, "after");
                let Some(tc) = self.target_class(class, target, s.span) else {
                    return;
                };
                if tc.kind != ClassKind::Physical {
                    self.report(TypeViolation, s.span, format!("`{target}` is not a physical rebec"));
                } else if !tc.has_mode(mode) {
                    self.report(UnknownMode, s.span, format!("class `{}` has no mode `{mode}`", tc.name));
                }
            }
        }
    }

    fn class(&mut self, c: &'a ClassDecl) {
        use DiagnosticKind::*;
        let mut names = BTreeSet::new();
        for k in &c.known_rebecs {
            if !names.insert(k.name.as_str()) {
                self.report(DuplicateName, k.span, format!("duplicate name `{}`", k.name));
            }
            if self.model.class(&k.class).is_none() {
                self.report(UnknownClass, k.span, format!("unknown class `{}`", k.class));
            }
        }
        for v in &c.state_vars {
            if !names.insert(v.name.as_str()) || v.name == SELF {
                self.report(DuplicateName, v.span, format!("duplicate name `{}`", v.name));
            }
            match (c.kind, v.ty) {
                (ClassKind::Reactive, Type::Real) => {
                    self.report(TypeViolation, v.span, format!("real variable `{}` in reactive class", v.name))
                }
                (ClassKind::Physical, Type::Int) => {
                    self.report(TypeViolation, v.span, format!("int variable `{}` in physical class", v.name))
                }
                _ => {}
            }
        }
        if c.constructor().is_none() {
            self.report(MissingConstructor, c.span, format!("class `{}` has no constructor", c.name));
        }
        let mut servers = BTreeSet::new();
        for m in &c.msg_servers {
            if !servers.insert(m.name.as_str()) || m.name == SET_MODE {
                self.report(DuplicateName, m.span, format!("duplicate message server `{}`", m.name));
            }
            let mut pnames = BTreeSet::new();
            for p in &m.params {
                if !pnames.insert(p.name.as_str()) || c.var(&p.name).is_some() {
                    self.report(TypeViolation, p.span, format!("parameter `{}` shadows another name", p.name));
                }
                if p.ty == Type::Real {
                    self.report(TypeViolation, p.span, "message parameters cannot be real");
                }
                if c.kind == ClassKind::Physical && p.ty == Type::Int {
                    self.report(TypeViolation, p.span, format!("int parameter `{}` in physical class", p.name));
                }
            }
            let scope = Scope::new(c, &m.params);
            self.stmts(&m.body, &scope);
        }
        let mut modes = BTreeSet::new();
        for m in &c.modes {
            if !modes.insert(m.name.as_str()) || m.name == NONE_MODE {
                self.report(DuplicateName, m.span, format!("duplicate mode `{}`", m.name));
            }
            let scope = Scope::new(c, &[]);
            self.expect_bool(&m.invariant, &scope, m.span, "invariant");
            self.expect_bool(&m.guard, &scope, m.span, "guard");
            let mut seen = BTreeSet::new();
            for f in &m.flows {
                match c.var(&f.var) {
                    Some(v) if v.ty == Type::Real => {
                        if !seen.insert(f.var.as_str()) {
                            self.report(TypeViolation, f.span, format!("second flow for `{}`", f.var));
                        }
                    }
                    Some(_) => self.report(TypeViolation, f.span, format!("flow for non-real variable `{}`", f.var)),
                    None => self.report(UnknownVariable, f.span, format!("unknown variable `{}`", f.var)),
                }
                self.expect_num(&f.rhs, &scope, f.span, "flow right-hand side");
            }
            for v in c.real_vars() {
                if !seen.contains(v.name.as_str()) {
                    self.report(TypeViolation, m.span, format!("mode `{}` has no flow for `{}`", m.name, v.name));
                }
            }
            self.stmts(&m.trigger, &scope);
        }
    }

    fn main(&mut self) {
        use DiagnosticKind::*;
        let m = self.model;
        if m.main.is_empty() {
            self.report(NoInstances, Span::default(), "main block declares no instances");
        }
        let mut names = BTreeSet::new();
        for i in &m.main {
            if !names.insert(i.name.as_str()) || i.name == SELF {
                self.report(DuplicateName, i.span, format!("duplicate instance `{}`", i.name));
            }
        }
        for i in &m.main {
            let Some(c) = m.class(&i.class) else {
                self.report(UnknownClass, i.span, format!("unknown class `{}`", i.class));
                continue;
            };
            if c.known_rebecs.len() != i.known.len() {
                self.report(
                    ArityMismatch,
                    i.span,
                    format!("`{}` expects {} known rebecs, {} given", c.name, c.known_rebecs.len(), i.known.len()),
                );
            } else {
                for (k, arg) in c.known_rebecs.iter().zip(&i.known) {
                    match m.instance(arg) {
                        None => self.report(UnknownRebec, i.span, format!("no instance named `{arg}`")),
                        Some(target) if target.class != k.class => self.report(
                            TypeViolation,
                            i.span,
                            format!("`{arg}` is a `{}`, expected `{}`", target.class, k.class),
                        ),
                        _ => {}
                    }
                }
            }
            let Some(ctor) = c.constructor() else { continue };
            if ctor.params.len() != i.args.len() {
                self.report(
                    ArityMismatch,
                    i.span,
                    format!("constructor of `{}` takes {} arguments, {} given", c.name, ctor.params.len(), i.args.len()),
                );
                continue;
            }
            let empty = ClassDecl {
                state_vars: Vec::new(),
                ..c.clone()
            };
            let scope = Scope::new(&empty, &[]);
            for (p, a) in ctor.params.iter().zip(&i.args) {
                let t = self.expect_num(a, &scope, i.span, "constructor argument");
                if p.ty == Type::Int && t == Some(ETy::Num) {
                    self.report(TypeViolation, i.span, format!("non-integer argument for int parameter `{}`", p.name));
                }
            }
        }
    }
}

/// All well-formedness violations of the model, in discovery order.
pub fn static_check(model: &Model) -> Vec<Diagnostic> {
    let mut ck = Checker {
        model,
        diags: Vec::new(),
    };
    let mut names = BTreeSet::new();
    for c in &model.classes {
        if !names.insert(c.name.as_str()) {
            ck.report(DiagnosticKind::DuplicateName, c.span, format!("duplicate class `{}`", c.name));
        }
    }
    for c in &model.classes {
        ck.class(c);
    }
    ck.main();
    ck.diags
}
