//! Recursive-descent parser.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::FrontendError;

pub const KEYWORDS: &[&str] = &[
    "reactiveclass",
    "physicalclass",
    "main",
    "knownrebecs",
    "statevars",
    "msgsrv",
    "mode",
    "inv",
    "guard",
    "if",
    "else",
    "delay",
    "setmode",
    "after",
    "int",
    "float",
    "real",
    "true",
    "false",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Accept `rebec.var` as a single variable name (predicates over a whole model).
    qualified_vars: bool,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    pub fn new(src: &str) -> PResult<Self> {
        Ok(Self {
            toks: tokenize(src)?,
            pos: 0,
            qualified_vars: false,
        })
    }

    pub fn with_qualified_vars(mut self) -> Self {
        self.qualified_vars = true;
        self
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(FrontendError::syntax(
            self.span(),
            format!("expected {expected}, found {}", self.peek().describe()),
        ))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if *self.peek() == t {
            Ok(self.bump().span)
        } else {
            self.error(&t.describe())
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => self.error("an identifier"),
        }
    }

    pub fn finish(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    pub fn model(&mut self) -> PResult<Model> {
        let mut model = Model::default();
        loop {
            if self.at_keyword("reactiveclass") {
                model.classes.push(self.class(ClassKind::Reactive)?);
            } else if self.at_keyword("physicalclass") {
                model.classes.push(self.class(ClassKind::Physical)?);
            } else {
                break;
            }
        }
        if model.classes.is_empty() {
            return self.error("`reactiveclass` or `physicalclass`");
        }
        self.expect_keyword("main")?;
        self.expect(Tok::LBrace)?;
        while *self.peek() != Tok::RBrace {
            model.main.push(self.instance()?);
        }
        self.expect(Tok::RBrace)?;
        self.finish()?;
        Ok(model)
    }

    fn class(&mut self, kind: ClassKind) -> PResult<ClassDecl> {
        let span = self.bump().span;
        let (name, _) = self.ident()?;
        let mut mailbox_capacity = DEFAULT_MAILBOX_CAPACITY;
        if self.eat(&Tok::LParen) {
            match self.peek().clone() {
                Tok::Int(n) if n > 0 => {
                    self.bump();
                    mailbox_capacity = n as usize;
                }
                _ => return self.error("a positive mailbox capacity"),
            }
            self.expect(Tok::RParen)?;
        }
        self.expect(Tok::LBrace)?;
        let mut class = ClassDecl {
            name,
            kind,
            mailbox_capacity,
            known_rebecs: Vec::new(),
            state_vars: Vec::new(),
            msg_servers: Vec::new(),
            modes: Vec::new(),
            span,
        };
        if self.at_keyword("knownrebecs") {
            self.bump();
            self.expect(Tok::LBrace)?;
            while *self.peek() != Tok::RBrace {
                let (class_name, span) = self.ident()?;
                let (name, _) = self.ident()?;
                self.expect(Tok::Semi)?;
                class.known_rebecs.push(KnownRebec {
                    class: class_name,
                    name,
                    span,
                });
            }
            self.expect(Tok::RBrace)?;
        }
        if self.at_keyword("statevars") {
            self.bump();
            self.expect(Tok::LBrace)?;
            while *self.peek() != Tok::RBrace {
                let decl = self.var_decl()?;
                self.expect(Tok::Semi)?;
                class.state_vars.push(decl);
            }
            self.expect(Tok::RBrace)?;
        }
        loop {
            if self.at_keyword("msgsrv") {
                class.msg_servers.push(self.msg_server()?);
            } else if kind == ClassKind::Physical && self.at_keyword("mode") {
                class.modes.push(self.mode()?);
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(class)
    }

    fn ty(&mut self) -> PResult<Type> {
        let ty = match self.peek() {
            Tok::Ident(s) if s == "int" => Type::Int,
            Tok::Ident(s) if s == "float" => Type::Float,
            Tok::Ident(s) if s == "real" => Type::Real,
            _ => return self.error("a type (`int`, `float` or `real`)"),
        };
        self.bump();
        Ok(ty)
    }

    fn var_decl(&mut self) -> PResult<VarDecl> {
        let span = self.span();
        let ty = self.ty()?;
        let (name, _) = self.ident()?;
        Ok(VarDecl { ty, name, span })
    }

    fn msg_server(&mut self) -> PResult<MsgServer> {
        let span = self.bump().span;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.var_decl()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let body = self.block()?;
        Ok(MsgServer {
            name,
            params,
            body,
            span,
        })
    }

    fn mode(&mut self) -> PResult<ModeDecl> {
        let span = self.bump().span;
        let (name, _) = self.ident()?;
        self.expect(Tok::LBrace)?;
        self.expect_keyword("inv")?;
        self.expect(Tok::LParen)?;
        let invariant = self.expr()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let mut flows = Vec::new();
        while *self.peek() != Tok::RBrace {
            let (var, span) = self.ident()?;
            self.expect(Tok::Prime)?;
            self.expect(Tok::Assign)?;
            let rhs = self.expr()?;
            self.expect(Tok::Semi)?;
            flows.push(Flow { var, rhs, span });
        }
        self.expect(Tok::RBrace)?;
        self.expect_keyword("guard")?;
        self.expect(Tok::LParen)?;
        let guard = self.expr()?;
        self.expect(Tok::RParen)?;
        let trigger = self.block()?;
        self.expect(Tok::RBrace)?;
        Ok(ModeDecl {
            name,
            invariant,
            flows,
            guard,
            trigger,
            span,
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            out.push(self.stmt()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    /// A braced block or a single statement.
    fn branch(&mut self) -> PResult<Vec<Stmt>> {
        if *self.peek() == Tok::LBrace {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        let v = match *self.peek() {
            Tok::Int(i) => i as f64,
            Tok::Float(f) => f,
            _ => return self.error("a numeric constant"),
        };
        self.bump();
        Ok(if neg { -v } else { v })
    }

    fn bounds(&mut self) -> PResult<TimeBounds> {
        self.expect(Tok::LParen)?;
        let lo = self.number()?;
        self.expect(Tok::Comma)?;
        let hi = self.number()?;
        self.expect(Tok::RParen)?;
        Ok(TimeBounds::new(lo, hi))
    }

    pub fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = if self.at_keyword("if") {
            self.bump();
            self.expect(Tok::LParen)?;
            let cond = self.expr()?;
            self.expect(Tok::RParen)?;
            let then_branch = self.branch()?;
            let else_branch = if self.at_keyword("else") {
                self.bump();
                self.branch()?
            } else {
                Vec::new()
            };
            return Ok(Stmt {
                kind: StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                },
                span,
            });
        } else if self.at_keyword("delay") {
            self.bump();
            let b = self.bounds()?;
            StmtKind::Delay(b)
        } else if self.at_keyword("setmode") {
            self.bump();
            self.expect(Tok::LParen)?;
            let (mode, _) = self.mode_name()?;
            self.expect(Tok::RParen)?;
            StmtKind::SetMode { mode }
        } else {
            let (first, _) = self.ident()?;
            match self.peek() {
                Tok::Assign => {
                    self.bump();
                    let value = self.expr()?;
                    StmtKind::Assign { var: first, value }
                }
                Tok::Dot => {
                    self.bump();
                    let message = match self.peek().clone() {
                        Tok::Ident(s) if s == SET_MODE => {
                            self.bump();
                            s
                        }
                        _ => self.ident()?.0,
                    };
                    self.expect(Tok::LParen)?;
                    let kind = if message == SET_MODE {
                        let (mode, _) = self.mode_name()?;
                        self.expect(Tok::RParen)?;
                        let after = self.after()?;
                        StmtKind::SendSetMode {
                            target: first,
                            mode,
                            after,
                        }
                    } else {
                        let mut args = Vec::new();
                        if *self.peek() != Tok::RParen {
                            loop {
                                args.push(self.expr()?);
                                if !self.eat(&Tok::Comma) {
                                    break;
                                }
                            }
                        }
                        self.expect(Tok::RParen)?;
                        let after = self.after()?;
                        StmtKind::Send {
                            target: first,
                            message,
                            args,
                            after,
                        }
                    };
                    kind
                }
                _ => return self.error("`=` or `.`"),
            }
        };
        self.expect(Tok::Semi)?;
        Ok(Stmt { kind, span })
    }

    fn mode_name(&mut self) -> PResult<(String, Span)> {
        self.ident()
    }

    fn after(&mut self) -> PResult<TimeBounds> {
        if self.at_keyword("after") {
            self.bump();
            self.bounds()
        } else {
            Ok(TimeBounds::zero())
        }
    }

    fn instance(&mut self) -> PResult<InstanceDecl> {
        let span = self.span();
        let (class, _) = self.ident()?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut known = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                known.push(self.ident()?.0);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.eat(&Tok::Colon);
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Semi)?;
        Ok(InstanceDecl {
            class,
            name,
            known,
            args,
            span,
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.eq_expr()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.eq_expr()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn eq_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.rel_expr()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                _ => break,
            };
            self.bump();
            let rhs = self.rel_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => break,
            };
            self.bump();
            let rhs = self.add_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Star) {
            let rhs = self.unary()?;
            lhs = Expr::binary(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Bang) {
            return Ok(Expr::not(self.unary()?));
        }
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Float(f) => {
                self.bump();
                Ok(Expr::float(f))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let (mut name, _) = self.ident()?;
                if self.qualified_vars && *self.peek() == Tok::Dot {
                    if let Tok::Ident(_) = self.peek_at(1) {
                        self.bump();
                        let (field, _) = self.ident()?;
                        name = format!("{name}.{field}");
                    }
                }
                Ok(Expr::Var(name))
            }
            _ => self.error("an expression"),
        }
    }
}
