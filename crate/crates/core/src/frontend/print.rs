//! Pretty-printer producing source text that re-parses to the same AST.

use std::fmt::Write;

use super::ast::*;

fn is_atomic(e: &Expr) -> bool {
    matches!(e, Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Var(_))
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(i) => write!(out, "{i}").unwrap(),
        Expr::Float(l) => write!(out, "{:?}", l.0).unwrap(),
        Expr::Bool(b) => write!(out, "{b}").unwrap(),
        Expr::Var(v) => out.push_str(v),
        Expr::Neg(inner) | Expr::Not(inner) => {
            out.push(if matches!(e, Expr::Neg(_)) { '-' } else { '!' });
            write_operand(out, inner, matches!(**inner, Expr::Neg(_) | Expr::Not(_)));
        }
        Expr::Binary(op, a, b) => {
            write_operand(out, a, false);
            write!(out, " {} ", op.symbol()).unwrap();
            write_operand(out, b, false);
        }
    }
}

fn write_operand(out: &mut String, e: &Expr, bare_unary: bool) {
    if is_atomic(e) || bare_unary {
        write_expr(out, e);
    } else {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn bounds(b: &TimeBounds) -> String {
    format!("({}, {})", num(b.low.0), num(b.high.0))
}

fn after(b: &TimeBounds) -> String {
    if b.is_zero() {
        String::new()
    } else {
        format!(" after{}", bounds(b))
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub fn stmt_to_string(s: &Stmt) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, 0);
    out.trim_end().to_string()
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in stmts {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Assign { var, value } => {
            writeln!(out, "{var} = {};", expr_to_string(value)).unwrap();
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            write!(out, "if ({}) ", expr_to_string(cond)).unwrap();
            write_block(out, then_branch, depth);
            if !else_branch.is_empty() {
                out.push_str(" else ");
                write_block(out, else_branch, depth);
            }
            out.push('\n');
        }
        StmtKind::Delay(b) => writeln!(out, "delay{};", bounds(b)).unwrap(),
        StmtKind::Send {
            target,
            message,
            args,
            after: a,
        } => {
            let args: Vec<_> = args.iter().map(expr_to_string).collect();
            writeln!(out, "{target}.{message}({}){};", args.join(", "), after(a)).unwrap();
        }
        StmtKind::SetMode { mode } => writeln!(out, "setmode({mode});").unwrap(),
        StmtKind::SendSetMode {
            target,
            mode,
            after: a,
        } => writeln!(out, "{target}.{SET_MODE}({mode}){};", after(a)).unwrap(),
    }
}

fn write_class(out: &mut String, c: &ClassDecl) {
    let kw = match c.kind {
        ClassKind::Reactive => "reactiveclass",
        ClassKind::Physical => "physicalclass",
    };
    writeln!(out, "{kw} {}({}) {{", c.name, c.mailbox_capacity).unwrap();
    out.push_str("  knownrebecs {\n");
    for k in &c.known_rebecs {
        writeln!(out, "    {} {};", k.class, k.name).unwrap();
    }
    out.push_str("  }\n  statevars {\n");
    for v in &c.state_vars {
        writeln!(out, "    {} {};", v.ty.keyword(), v.name).unwrap();
    }
    out.push_str("  }\n");
    for m in &c.msg_servers {
        let params: Vec<_> = m
            .params
            .iter()
            .map(|p| format!("{} {}", p.ty.keyword(), p.name))
            .collect();
        write!(out, "  msgsrv {}({}) ", m.name, params.join(", ")).unwrap();
        write_block(out, &m.body, 1);
        out.push('\n');
    }
    for m in &c.modes {
        writeln!(out, "  mode {} {{", m.name).unwrap();
        writeln!(out, "    inv({}) {{", expr_to_string(&m.invariant)).unwrap();
        for f in &m.flows {
            writeln!(out, "      {}' = {};", f.var, expr_to_string(&f.rhs)).unwrap();
        }
        out.push_str("    }\n");
        write!(out, "    guard({}) ", expr_to_string(&m.guard)).unwrap();
        write_block(out, &m.trigger, 2);
        out.push_str("\n  }\n");
    }
    out.push_str("}\n\n");
}

pub fn print_model(m: &Model) -> String {
    let mut out = String::new();
    for c in &m.classes {
        write_class(&mut out, c);
    }
    out.push_str("main {\n");
    for i in &m.main {
        let args: Vec<_> = i.args.iter().map(expr_to_string).collect();
        writeln!(
            out,
            "  {} {}({}):({});",
            i.class,
            i.name,
            i.known.join(", "),
            args.join(", ")
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
