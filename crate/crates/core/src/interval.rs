//! Interval arithmetic with openness flags and outward rounding, plus
//! interval evaluation of model expressions.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::frontend::ast::{BinOp, Expr};

/// A real interval between two endpoints, each of which may be open or closed.
#[derive(Debug, Clone, Copy)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lo
            .total_cmp(&other.lo)
            .then(self.hi.total_cmp(&other.hi))
            .then(self.lo_closed.cmp(&other.lo_closed))
            .then(self.hi_closed.cmp(&other.hi_closed))
    }
}
impl Hash for Interval {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.lo.to_bits().hash(state);
        self.hi.to_bits().hash(state);
        self.lo_closed.hash(state);
        self.hi_closed.hash(state);
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// `a + b` rounded towards negative infinity.
fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let err = a.mul_add(b, -p);
    // Below the normal range the fma residual is no longer exact.
    if err < 0.0 || p.abs() < f64::MIN_POSITIVE {
        p.next_down()
    } else {
        p
    }
}

fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    let err = a.mul_add(b, -p);
    if err > 0.0 || p.abs() < f64::MIN_POSITIVE {
        p.next_up()
    } else {
        p
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        debug_assert!(lo <= hi, "malformed interval [{lo}, {hi}]");
        Self {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    pub fn point(a: f64) -> Self {
        Self::new(a, a, true, true)
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    /// `[lo, hi)`
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, false)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }

    pub fn entire() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY, false, false)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            self.lo + (self.hi - self.lo) / 2.0
        } else if self.lo.is_finite() {
            self.lo
        } else if self.hi.is_finite() {
            self.hi
        } else {
            0.0
        }
    }

    pub fn closure(&self) -> Self {
        Self::closed(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo < x || (self.lo_closed && self.lo == x))
            && (x < self.hi || (self.hi_closed && self.hi == x))
    }

    /// Set inclusion `other ⊆ self`, honouring openness.
    pub fn contains_interval(&self, other: &Interval) -> bool {
        if other.is_empty() {
            return true;
        }
        let lo_ok = self.lo < other.lo || (self.lo == other.lo && (self.lo_closed || !other.lo_closed));
        let hi_ok = other.hi < self.hi || (self.hi == other.hi && (self.hi_closed || !other.hi_closed));
        lo_ok && hi_ok
    }

    /// Inclusion of closures with an absolute tolerance.
    pub fn encloses(&self, other: &Interval, tol: f64) -> bool {
        self.lo - tol <= other.lo && other.hi <= self.hi + tol
    }

    /// True when the two intervals share at least one point.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.intersect(other).is_some()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_closed) = match self.lo.total_cmp(&other.lo) {
            Ordering::Greater => (self.lo, self.lo_closed),
            Ordering::Less => (other.lo, other.lo_closed),
            Ordering::Equal => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.total_cmp(&other.hi) {
            Ordering::Less => (self.hi, self.hi_closed),
            Ordering::Greater => (other.hi, other.hi_closed),
            Ordering::Equal => (self.hi, self.hi_closed && other.hi_closed),
        };
        let r = Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        };
        (!r.is_empty()).then_some(r)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.total_cmp(&other.lo) {
            Ordering::Less => (self.lo, self.lo_closed),
            Ordering::Greater => (other.lo, other.lo_closed),
            Ordering::Equal => (self.lo, self.lo_closed || other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.total_cmp(&other.hi) {
            Ordering::Greater => (self.hi, self.hi_closed),
            Ordering::Less => (other.hi, other.hi_closed),
            Ordering::Equal => (self.hi, self.hi_closed || other.hi_closed),
        };
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, other.lo),
            hi: add_up(self.hi, other.hi),
            lo_closed: self.lo_closed && other.lo_closed,
            hi_closed: self.hi_closed && other.hi_closed,
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
            lo_closed: self.hi_closed,
            hi_closed: self.lo_closed,
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let a = [(self.lo, self.lo_closed), (self.hi, self.hi_closed)];
        let b = [(other.lo, other.lo_closed), (other.hi, other.hi_closed)];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut lo_closed = false;
        let mut hi_closed = false;
        for &(x, xc) in &a {
            for &(y, yc) in &b {
                // A closed zero factor attains the product 0 regardless of the other end.
                let closed = (xc && yc) || (x == 0.0 && xc) || (y == 0.0 && yc);
                let pd = mul_down(x, y);
                let pu = mul_up(x, y);
                if pd < lo {
                    lo = pd;
                    lo_closed = closed;
                } else if pd == lo {
                    lo_closed |= closed;
                }
                if pu > hi {
                    hi = pu;
                    hi_closed = closed;
                } else if pu == hi {
                    hi_closed |= closed;
                }
            }
        }
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    pub fn scale(&self, k: f64) -> Interval {
        self.mul(&Interval::point(k))
    }

    /// Widens both ends outward by `ulps` units in the last place.
    pub fn inflate_ulps(&self, ulps: u32) -> Interval {
        let mut r = *self;
        for _ in 0..ulps {
            r.lo = r.lo.next_down();
            r.hi = r.hi.next_up();
        }
        r
    }

    /// Widens both ends by an absolute amount.
    pub fn inflate(&self, eps: f64) -> Interval {
        Interval {
            lo: add_down(self.lo, -eps),
            hi: add_up(self.hi, eps),
            ..*self
        }
    }
}

/// A variable value: integers stay discrete, everything else is an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Real(Interval),
}

impl Value {
    pub fn as_interval(&self) -> Interval {
        match self {
            Value::Int(i) => Interval::point(*i as f64),
            Value::Real(iv) => *iv,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Real(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(iv) => write!(f, "{iv}"),
        }
    }
}

pub type Valuation = BTreeMap<String, Value>;

/// Verdict of a condition over a box of values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriBool {
    AllTrue,
    AllFalse,
    Mixed,
}

impl TriBool {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TriBool::AllTrue
        } else {
            TriBool::AllFalse
        }
    }

    pub fn not(self) -> Self {
        match self {
            TriBool::AllTrue => TriBool::AllFalse,
            TriBool::AllFalse => TriBool::AllTrue,
            TriBool::Mixed => TriBool::Mixed,
        }
    }

    pub fn and(self, other: Self) -> Self {
        match (self, other) {
            (TriBool::AllFalse, _) | (_, TriBool::AllFalse) => TriBool::AllFalse,
            (TriBool::AllTrue, x) | (x, TriBool::AllTrue) => x,
            _ => TriBool::Mixed,
        }
    }

    pub fn or(self, other: Self) -> Self {
        self.not().and(other.not()).not()
    }

    /// Some point may satisfy the condition.
    pub fn possible(self) -> bool {
        self != TriBool::AllFalse
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("expression `{0}` is not boolean")]
    NonBooleanExpression(String),
    #[error("expression `{0}` is not arithmetic")]
    NonArithmeticExpression(String),
    #[error("integer overflow")]
    IntegerOverflow,
}

fn lookup<'a>(sigma: &'a Valuation, name: &str) -> Result<&'a Value, EvalError> {
    sigma
        .get(name)
        .ok_or_else(|| EvalError::UnknownVariable(name.to_string()))
}

/// Interval evaluation of an arithmetic expression. Pure integer
/// expressions stay discrete.
pub fn eval_expr(e: &Expr, sigma: &Valuation) -> Result<Value, EvalError> {
    match e {
        Expr::Int(i) => Ok(Value::Int(*i)),
        Expr::Float(l) => Ok(Value::Real(Interval::point(l.0))),
        Expr::Var(v) => lookup(sigma, v).copied(),
        Expr::Neg(inner) => Ok(match eval_expr(inner, sigma)? {
            Value::Int(i) => Value::Int(i.checked_neg().ok_or(EvalError::IntegerOverflow)?),
            Value::Real(iv) => Value::Real(iv.neg()),
        }),
        Expr::Binary(op, a, b) if op.is_arithmetic() => {
            let a = eval_expr(a, sigma)?;
            let b = eval_expr(b, sigma)?;
            if let (Value::Int(x), Value::Int(y)) = (a, b) {
                let r = match op {
                    BinOp::Add => x.checked_add(y),
                    BinOp::Sub => x.checked_sub(y),
                    _ => x.checked_mul(y),
                };
                return r.map(Value::Int).ok_or(EvalError::IntegerOverflow);
            }
            let (x, y) = (a.as_interval(), b.as_interval());
            Ok(Value::Real(match op {
                BinOp::Add => x.add(&y),
                BinOp::Sub => x.sub(&y),
                _ => x.mul(&y),
            }))
        }
        _ => Err(EvalError::NonArithmeticExpression(
            crate::frontend::print::expr_to_string(e),
        )),
    }
}

/// Interval evaluation to an [`Interval`] regardless of discreteness.
pub fn eval_interval(e: &Expr, sigma: &Valuation) -> Result<Interval, EvalError> {
    eval_expr(e, sigma).map(|v| v.as_interval())
}

/// Decides `d op 0` for every point `d` of the interval.
fn compare_zero(op: BinOp, d: &Interval) -> TriBool {
    let all_neg = d.hi < 0.0 || (d.hi == 0.0 && !d.hi_closed);
    let all_nonpos = d.hi <= 0.0;
    let all_pos = d.lo > 0.0 || (d.lo == 0.0 && !d.lo_closed);
    let all_nonneg = d.lo >= 0.0;
    let verdict = |all: bool, none: bool| {
        if all {
            TriBool::AllTrue
        } else if none {
            TriBool::AllFalse
        } else {
            TriBool::Mixed
        }
    };
    match op {
        BinOp::Lt => verdict(all_neg, all_nonneg),
        BinOp::Le => verdict(all_nonpos, all_pos),
        BinOp::Gt => verdict(all_pos, all_nonpos),
        BinOp::Ge => verdict(all_nonneg, all_neg),
        BinOp::Eq => verdict(d.lo == 0.0 && d.hi == 0.0, !d.contains(0.0)),
        BinOp::Ne => verdict(!d.contains(0.0), d.lo == 0.0 && d.hi == 0.0),
        _ => unreachable!("not a comparison"),
    }
}

/// Three-valued evaluation of a condition over the box `sigma`.
pub fn compare(e: &Expr, sigma: &Valuation) -> Result<TriBool, EvalError> {
    match e {
        Expr::Bool(b) => Ok(TriBool::from_bool(*b)),
        Expr::Not(inner) => Ok(compare(inner, sigma)?.not()),
        Expr::Binary(BinOp::And, a, b) => {
            let l = compare(a, sigma)?;
            if l == TriBool::AllFalse {
                return Ok(l);
            }
            Ok(l.and(compare(b, sigma)?))
        }
        Expr::Binary(BinOp::Or, a, b) => {
            let l = compare(a, sigma)?;
            if l == TriBool::AllTrue {
                return Ok(l);
            }
            Ok(l.or(compare(b, sigma)?))
        }
        Expr::Binary(op, a, b) if op.is_comparison() => {
            let l = eval_expr(a, sigma)?;
            let r = eval_expr(b, sigma)?;
            if let (Value::Int(x), Value::Int(y)) = (l, r) {
                let holds = match op {
                    BinOp::Lt => x < y,
                    BinOp::Le => x <= y,
                    BinOp::Gt => x > y,
                    BinOp::Ge => x >= y,
                    BinOp::Eq => x == y,
                    _ => x != y,
                };
                return Ok(TriBool::from_bool(holds));
            }
            let d = l.as_interval().sub(&r.as_interval());
            Ok(compare_zero(*op, &d))
        }
        _ => Err(EvalError::NonBooleanExpression(
            crate::frontend::print::expr_to_string(e),
        )),
    }
}
