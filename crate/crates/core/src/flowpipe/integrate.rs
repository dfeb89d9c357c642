//! Validated enclosures of ODE solutions over interval boxes.
//!
//! Three tiers, picked per system:
//! * constant right-hand sides: exact affine propagation;
//! * decoupled scalar linear `x' = a*x + b` with point `a`: closed form,
//!   extremes taken at the corners of `(x0, b, t)`;
//! * anything else: interval Taylor steps (mean-value form plus a Lagrange
//!   remainder bounded on a Picard a-priori enclosure).

use std::collections::BTreeMap;

use super::FlowError;
use crate::frontend::ast::{BinOp, Expr};
use crate::interval::{eval_interval, Interval, Valuation, Value};

pub type BoxMap = BTreeMap<String, Interval>;

/// ODEs `vars[i]' = rhs[i]`, with `inputs` held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSystem {
    pub vars: Vec<String>,
    pub rhs: Vec<Expr>,
    pub inputs: Valuation,
}

/// Enclosure of every trajectory over a slice of time relative to the
/// start of the pipeline. Spans are `[a, b)` except the last, `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowpipeSegment {
    pub span: Interval,
    pub values: BoxMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Constant,
    Linear,
    Nonlinear,
}

const MAX_BISECTIONS: u32 = 14;
const PICARD_ITERATIONS: usize = 30;

impl FlowSystem {
    pub fn new(vars: Vec<String>, rhs: Vec<Expr>, inputs: Valuation) -> Self {
        Self { vars, rhs, inputs }
    }

    fn is_var(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v == name)
    }

    /// `(a, b)` with `e = a*x + b` where neither depends on a system variable.
    fn affine_in(&self, e: &Expr, x: &str) -> Result<Option<(Interval, Interval)>, FlowError> {
        let zero = Interval::point(0.0);
        Ok(match e {
            Expr::Var(v) if v == x => Some((Interval::point(1.0), zero)),
            Expr::Var(v) if self.is_var(v) => None,
            Expr::Int(_) | Expr::Float(_) | Expr::Var(_) => Some((zero, eval_interval(e, &self.inputs)?)),
            Expr::Neg(a) => self.affine_in(a, x)?.map(|(a, b)| (a.neg(), b.neg())),
            Expr::Binary(BinOp::Add, l, r) | Expr::Binary(BinOp::Sub, l, r) => {
                let (Some((a1, b1)), Some((a2, b2))) = (self.affine_in(l, x)?, self.affine_in(r, x)?) else {
                    return Ok(None);
                };
                if matches!(e, Expr::Binary(BinOp::Add, ..)) {
                    Some((a1.add(&a2), b1.add(&b2)))
                } else {
                    Some((a1.sub(&a2), b1.sub(&b2)))
                }
            }
            Expr::Binary(BinOp::Mul, l, r) => {
                let (Some((a1, b1)), Some((a2, b2))) = (self.affine_in(l, x)?, self.affine_in(r, x)?) else {
                    return Ok(None);
                };
                let is_zero = |iv: &Interval| iv.lo == 0.0 && iv.hi == 0.0;
                if is_zero(&a1) {
                    Some((b1.mul(&a2), b1.mul(&b2)))
                } else if is_zero(&a2) {
                    Some((a1.mul(&b2), b1.mul(&b2)))
                } else {
                    None
                }
            }
            _ => None,
        })
    }

    /// Per-variable `(a, b)` coefficients when the system is decoupled linear.
    fn linear_coefficients(&self) -> Result<Option<Vec<(Interval, Interval)>>, FlowError> {
        let mut out = Vec::with_capacity(self.vars.len());
        for (x, e) in self.vars.iter().zip(&self.rhs) {
            match self.affine_in(e, x)? {
                Some((a, b)) if a.is_point() && a.lo.is_finite() => out.push((a, b)),
                _ => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    pub fn tier(&self) -> Result<Tier, FlowError> {
        let constant = self
            .rhs
            .iter()
            .all(|e| e.vars().iter().all(|v| !self.is_var(v)));
        if constant {
            return Ok(Tier::Constant);
        }
        Ok(match self.linear_coefficients()? {
            Some(_) => Tier::Linear,
            None => Tier::Nonlinear,
        })
    }

    fn valuation(&self, values: &[Interval]) -> Valuation {
        let mut sigma = self.inputs.clone();
        for (v, iv) in self.vars.iter().zip(values) {
            sigma.insert(v.clone(), Value::Real(*iv));
        }
        sigma
    }

    fn field(&self, values: &[Interval]) -> Result<Vec<Interval>, FlowError> {
        let sigma = self.valuation(values);
        self.rhs
            .iter()
            .map(|e| eval_interval(e, &sigma).map(|iv| iv.closure()).map_err(FlowError::from))
            .collect()
    }
}

/// Segment spans for a horizon: `max(1, ceil(horizon / gamma))` slices.
fn spans(gamma: f64, horizon: f64) -> Vec<(f64, f64)> {
    let n = ((horizon / gamma) - 1e-9).ceil().max(1.0) as usize;
    (0..n)
        .map(|k| {
            let a = k as f64 * gamma;
            let b = if k + 1 == n { horizon.max(a) } else { (k + 1) as f64 * gamma };
            (a, b)
        })
        .collect()
}

fn span_interval(a: f64, b: f64, last: bool) -> Interval {
    if last || a == b {
        Interval::closed(a, b)
    } else {
        Interval::half_open(a, b)
    }
}

/// `exp(x)` for a point argument, widened to a guaranteed enclosure.
fn exp_enclosure(x: f64) -> Interval {
    if x == 0.0 {
        return Interval::point(1.0);
    }
    let e = x.exp();
    Interval::closed(e.next_down().next_down().max(0.0), e.next_up().next_up())
}

fn div_point(x: &Interval, d: f64) -> Interval {
    let (a, b) = (x.lo / d, x.hi / d);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Interval::closed(lo.next_down(), hi.next_up())
}

/// Enclosure of `x0*e^(a t) + b (e^(a t) - 1)/a` at a single time `t`.
fn linear_at(a: f64, x0: &Interval, b: &Interval, t: f64) -> Interval {
    if a == 0.0 {
        return x0.add(&b.mul(&Interval::point(t)));
    }
    let e = exp_enclosure(a * t);
    let g = div_point(&e.sub(&Interval::point(1.0)), a);
    x0.mul(&e).add(&b.mul(&g))
}

/// Enclosure over `t` in `[ta, tb]`: the solution is increasing in `x0`
/// and `b` and monotone in `t`, so the corners bound it.
fn linear_over(a: f64, x0: &Interval, b: &Interval, ta: f64, tb: f64) -> Interval {
    let low_corner = (Interval::point(x0.lo), Interval::point(b.lo));
    let high_corner = (Interval::point(x0.hi), Interval::point(b.hi));
    let lo = linear_at(a, &low_corner.0, &low_corner.1, ta)
        .lo
        .min(linear_at(a, &low_corner.0, &low_corner.1, tb).lo);
    let hi = linear_at(a, &high_corner.0, &high_corner.1, ta)
        .hi
        .max(linear_at(a, &high_corner.0, &high_corner.1, tb).hi);
    Interval::closed(lo, hi)
}

/// d e / d x, lightly simplified.
pub fn derivative(e: &Expr, x: &str) -> Expr {
    let zero = Expr::Int(0);
    let is_zero = |e: &Expr| matches!(e, Expr::Int(0)) || matches!(e, Expr::Float(l) if l.0 == 0.0);
    let is_one = |e: &Expr| matches!(e, Expr::Int(1)) || matches!(e, Expr::Float(l) if l.0 == 1.0);
    match e {
        Expr::Var(v) if v == x => Expr::Int(1),
        Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Var(_) => zero,
        Expr::Neg(a) => {
            let d = derivative(a, x);
            if is_zero(&d) {
                zero
            } else {
                Expr::Neg(Box::new(d))
            }
        }
        Expr::Not(_) => zero,
        Expr::Binary(op, a, b) => {
            let (da, db) = (derivative(a, x), derivative(b, x));
            match op {
                BinOp::Add | BinOp::Sub => match (is_zero(&da), is_zero(&db)) {
                    (true, true) => zero,
                    (false, true) => da,
                    (true, false) if *op == BinOp::Add => db,
                    (true, false) => Expr::Neg(Box::new(db)),
                    _ => Expr::binary(*op, da, db),
                },
                BinOp::Mul => {
                    let term = |d: Expr, other: &Expr| {
                        if is_zero(&d) {
                            None
                        } else if is_one(&d) {
                            Some(other.clone())
                        } else {
                            Some(Expr::binary(BinOp::Mul, d, other.clone()))
                        }
                    };
                    match (term(da, b), term(db, a)) {
                        (None, None) => zero,
                        (Some(t), None) | (None, Some(t)) => t,
                        (Some(l), Some(r)) => Expr::binary(BinOp::Add, l, r),
                    }
                }
                _ => zero,
            }
        }
    }
}

struct Taylor<'a> {
    sys: &'a FlowSystem,
    jacobian: Vec<Vec<Expr>>,
}

impl<'a> Taylor<'a> {
    fn new(sys: &'a FlowSystem) -> Self {
        let jacobian = sys
            .rhs
            .iter()
            .map(|e| sys.vars.iter().map(|v| derivative(e, v)).collect())
            .collect();
        Self { sys, jacobian }
    }

    fn jacobian_at(&self, values: &[Interval]) -> Result<Vec<Vec<Interval>>, FlowError> {
        let sigma = self.sys.valuation(values);
        self.jacobian
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| eval_interval(e, &sigma).map(|iv| iv.closure()).map_err(FlowError::from))
                    .collect()
            })
            .collect()
    }

    /// A box `B` with `x0 + [0,h] F(B) ⊆ B`, if Picard iteration finds one.
    fn a_priori(&self, x0: &[Interval], h: f64) -> Result<Option<Vec<Interval>>, FlowError> {
        let th = Interval::closed(0.0, h);
        let picard = |b: &[Interval]| -> Result<Vec<Interval>, FlowError> {
            let f = self.sys.field(b)?;
            Ok(x0.iter().zip(&f).map(|(x, fi)| x.add(&th.mul(fi)).closure()).collect())
        };
        let mut b = picard(x0)?;
        for _ in 0..PICARD_ITERATIONS {
            b = b
                .iter()
                .map(|iv| iv.inflate(0.1 * iv.width() + 1e-12 * (1.0 + iv.lo.abs().max(iv.hi.abs()))))
                .collect();
            let next = picard(&b)?;
            if next.iter().any(|iv| !iv.lo.is_finite() || !iv.hi.is_finite()) {
                return Ok(None);
            }
            if next.iter().zip(&b).all(|(n, bi)| bi.contains_interval(n)) {
                // One more contraction keeps the enclosure valid and tighter.
                let tighter = picard(&next)?;
                return Ok(Some(tighter.iter().zip(&next).map(|(t, n)| t.intersect(n).unwrap_or(*n)).collect()));
            }
            b = b.iter().zip(&next).map(|(bi, n)| bi.hull(n)).collect();
        }
        Ok(None)
    }

    /// One step of length `h`: `(box over [0,h], box at h)`.
    fn step(&self, x0: &[Interval], h: f64) -> Result<Option<(Vec<Interval>, Vec<Interval>)>, FlowError> {
        let Some(b) = self.a_priori(x0, h)? else {
            return Ok(None);
        };
        let n = x0.len();
        let hi = Interval::point(h);
        let fb = self.sys.field(&b)?;
        let jb = self.jacobian_at(&b)?;
        // x'' = J(x) f(x), bounded over the a-priori box.
        let second: Vec<Interval> = (0..n)
            .map(|i| (0..n).fold(Interval::point(0.0), |acc, k| acc.add(&jb[i][k].mul(&fb[k]))))
            .collect();
        let xhat: Vec<Interval> = x0.iter().map(|x| Interval::point(x.mid())).collect();
        let fhat = self.sys.field(&xhat)?;
        let j0 = self.jacobian_at(x0)?;
        let half_h2 = hi.mul(&hi).mul(&Interval::point(0.5));
        let mut end = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = xhat[i].add(&hi.mul(&fhat[i]));
            for k in 0..n {
                let identity = if i == k { 1.0 } else { 0.0 };
                let a = Interval::point(identity).add(&hi.mul(&j0[i][k]));
                acc = acc.add(&a.mul(&x0[k].closure().sub(&xhat[k])));
            }
            acc = acc.add(&half_h2.mul(&second[i])).closure();
            end.push(acc.intersect(&b[i]).unwrap_or(b[i]));
        }
        Ok(Some((b, end)))
    }
}

/// Enclosures of all trajectories from `init` over `[0, horizon]`, sliced
/// into `gamma`-sized segments.
pub fn compute_flowpipes(
    sys: &FlowSystem,
    init: &BoxMap,
    gamma: f64,
    horizon: f64,
) -> Result<Vec<FlowpipeSegment>, FlowError> {
    if !(gamma > 0.0 && gamma.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(FlowError::InvalidArgument(format!("gamma={gamma}, horizon={horizon}")));
    }
    let x0: Vec<Interval> = sys
        .vars
        .iter()
        .map(|v| {
            init.get(v)
                .map(|iv| iv.closure())
                .ok_or_else(|| FlowError::InvalidArgument(format!("no initial value for `{v}`")))
        })
        .collect::<Result<_, _>>()?;
    let slices = spans(gamma, horizon);
    let count = slices.len();
    let pack = |values: &[Interval], k: usize, (a, b): (f64, f64)| FlowpipeSegment {
        span: span_interval(a, b, k + 1 == count),
        values: sys.vars.iter().cloned().zip(values.iter().copied()).collect(),
    };
    match sys.tier()? {
        Tier::Constant => {
            let rates = sys.field(&x0)?;
            Ok(slices
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| {
                    let t = Interval::closed(a, b);
                    let values: Vec<_> = x0.iter().zip(&rates).map(|(x, c)| x.add(&c.mul(&t)).closure()).collect();
                    pack(&values, k, (a, b))
                })
                .collect())
        }
        Tier::Linear => {
            let coeffs = sys.linear_coefficients()?.unwrap();
            Ok(slices
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| {
                    let values: Vec<_> = x0
                        .iter()
                        .zip(&coeffs)
                        .map(|(x, (ca, cb))| linear_over(ca.lo, x, cb, a, b))
                        .collect();
                    pack(&values, k, (a, b))
                })
                .collect())
        }
        Tier::Nonlinear => {
            let taylor = Taylor::new(sys);
            let mut current = x0;
            let mut out = Vec::with_capacity(count);
            for (k, &(a, b)) in slices.iter().enumerate() {
                let mut hull: Option<Vec<Interval>> = None;
                let mut t = a;
                let mut h = b - a;
                let mut depth = 0;
                if h == 0.0 {
                    hull = Some(current.clone());
                }
                while t < b {
                    h = h.min(b - t);
                    match taylor.step(&current, h)? {
                        Some((seg, end)) => {
                            hull = Some(match hull {
                                None => seg,
                                Some(prev) => prev.iter().zip(&seg).map(|(p, s)| p.hull(s)).collect(),
                            });
                            current = end;
                            t += h;
                            if depth > 0 && (b - t) > 2.0 * h {
                                h *= 2.0;
                                depth -= 1;
                            }
                        }
                        None => {
                            depth += 1;
                            if depth > MAX_BISECTIONS {
                                return Err(FlowError::EnclosureFailure(format!(
                                    "a-priori enclosure did not converge at t={t}"
                                )));
                            }
                            h /= 2.0;
                        }
                    }
                }
                out.push(pack(&hull.unwrap(), k, (a, b)));
            }
            Ok(out)
        }
    }
}
