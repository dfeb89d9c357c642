//! Flowpipe construction for physical rebecs and the operations the
//! reachability loop needs on top of it: invariant trimming, guard windows
//! and advancing physical state to a new global-time interval.

mod integrate;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::frontend::ast::{BinOp, Expr, ModeDecl, NONE_MODE};
use crate::interval::{compare, eval_interval, EvalError, Interval, TriBool, Valuation, Value};
use crate::semantics::{FlowOrigin, PhysicalState, Program, RebecId, TIME_EPS};

pub use integrate::{compute_flowpipes, derivative, BoxMap, FlowSystem, FlowpipeSegment, Tier};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("enclosure failure: {0}")]
    EnclosureFailure(String),
    #[error("flowpipe does not cover relative time {0}")]
    CoverageGap(Interval),
    #[error("invalid flowpipe request: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn conjuncts<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::Binary(BinOp::And, a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        _ => out.push(e),
    }
}

fn valuation_of(values: &BoxMap, inputs: &Valuation) -> Valuation {
    let mut sigma = inputs.clone();
    for (k, v) in values {
        sigma.insert(k.clone(), Value::Real(*v));
    }
    sigma
}

/// Narrows `values` to the closure of the part satisfying `cond`.
/// Atoms of the form `v op e` (or `e op v`) over a box variable `v` are
/// used for contraction; anything else only has to be satisfiable.
/// Returns `None` when no point of the box can satisfy `cond`.
pub fn trim_box(values: &BoxMap, cond: &Expr, inputs: &Valuation) -> Result<Option<BoxMap>, FlowError> {
    let mut atoms = Vec::new();
    conjuncts(cond, &mut atoms);
    let mut out = values.clone();
    for _ in 0..16 {
        let mut changed = false;
        for atom in &atoms {
            let Expr::Binary(op, l, r) = atom else { continue };
            if !op.is_comparison() || *op == BinOp::Ne {
                continue;
            }
            let oriented = match (l.as_ref(), r.as_ref()) {
                (Expr::Var(v), other) if out.contains_key(v) && !other.mentions(v) => Some((v, *op, other)),
                (other, Expr::Var(v)) if out.contains_key(v) && !other.mentions(v) => Some((v, op.mirrored(), other)),
                _ => None,
            };
            let Some((v, op, other)) = oriented else { continue };
            let bound = eval_interval(other, &valuation_of(&out, inputs))?.closure();
            let cur = out[v].closure();
            let (lo, hi) = match op {
                BinOp::Lt | BinOp::Le => (cur.lo, cur.hi.min(bound.hi)),
                BinOp::Gt | BinOp::Ge => (cur.lo.max(bound.lo), cur.hi),
                _ => (cur.lo.max(bound.lo), cur.hi.min(bound.hi)),
            };
            if lo > hi {
                return Ok(None);
            }
            let next = Interval::closed(lo, hi);
            if next != out[v] {
                changed |= next != cur;
                out.insert(v.clone(), next);
            }
        }
        if !changed {
            break;
        }
    }
    if compare(cond, &valuation_of(&out, inputs))? == TriBool::AllFalse {
        return Ok(None);
    }
    Ok(Some(out))
}

/// Trims every segment by `inv`, stopping at the first infeasible one.
pub fn intersect_invariant(
    segments: &[FlowpipeSegment],
    inv: &Expr,
    inputs: &Valuation,
) -> Result<Vec<FlowpipeSegment>, FlowError> {
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        match trim_box(&seg.values, inv, inputs)? {
            Some(values) => out.push(FlowpipeSegment {
                span: seg.span,
                values,
            }),
            None => break,
        }
    }
    Ok(out)
}

/// Global-time window during which the guard may hold.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardWindow {
    pub rebec: RebecId,
    /// Hull of the absolute spans of segments where the guard is possible.
    pub window: Option<Interval>,
    /// The guard is possible on the last segment of the pipe.
    pub may_leave: bool,
}

pub fn guard_window(
    rebec: &str,
    segments: &[FlowpipeSegment],
    guard: &Expr,
    inputs: &Valuation,
    start: f64,
) -> Result<GuardWindow, FlowError> {
    let mut window: Option<Interval> = None;
    let mut last = false;
    for (i, seg) in segments.iter().enumerate() {
        if compare(guard, &valuation_of(&seg.values, inputs))?.possible() {
            let abs = seg.span.add(&Interval::point(start));
            window = Some(window.map_or(abs, |w| w.hull(&abs)));
            last = i + 1 == segments.len();
        }
    }
    Ok(GuardWindow {
        rebec: rebec.to_string(),
        window,
        may_leave: last,
    })
}

/// Hull of the boxes of segments whose span meets `rel`.
pub fn hull_over(segments: &[FlowpipeSegment], rel: &Interval) -> Option<BoxMap> {
    let mut acc: Option<BoxMap> = None;
    for seg in segments.iter().filter(|s| s.span.intersect(rel).is_some()) {
        acc = Some(match acc {
            None => seg.values.clone(),
            Some(mut a) => {
                for (k, v) in &seg.values {
                    a.entry(k.clone()).and_modify(|x| *x = x.hull(v)).or_insert(*v);
                }
                a
            }
        });
    }
    acc
}

/// The ODE system of `mode` for a rebec with valuation `vars`: real
/// variables evolve, everything else is a constant input.
pub fn mode_system(mode: &ModeDecl, real_vars: &[String], vars: &Valuation) -> FlowSystem {
    let inputs = vars
        .iter()
        .filter(|(k, _)| !real_vars.contains(k))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    let rhs = real_vars
        .iter()
        .map(|v| mode.flow_of(v).cloned().unwrap_or(Expr::Int(0)))
        .collect();
    FlowSystem::new(real_vars.to_vec(), rhs, inputs)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    rebec: RebecId,
    mode: String,
    origin: FlowOrigin,
    inputs: Valuation,
    gamma: u64,
    horizon: u64,
}

/// Invariant-trimmed flowpipes, memoised by everything they depend on.
#[derive(Debug, Default)]
pub struct FlowCache {
    map: HashMap<CacheKey, Arc<Vec<FlowpipeSegment>>>,
    pub hits: usize,
    pub misses: usize,
}

impl FlowCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Pipes of physical rebec `x` in state `p`, from its flow origin up to
    /// global time `delta`, trimmed by the mode invariant.
    pub fn pipes(
        &mut self,
        program: &Program,
        x: &str,
        p: &PhysicalState,
        gamma: f64,
        delta: f64,
    ) -> Result<Arc<Vec<FlowpipeSegment>>, FlowError> {
        let class = program
            .class_of(x)
            .ok_or_else(|| FlowError::InvalidArgument(format!("unknown rebec `{x}`")))?;
        let mode = class
            .mode(&p.mode)
            .ok_or_else(|| FlowError::InvalidArgument(format!("`{x}` has no mode `{}`", p.mode)))?;
        let sys = mode_system(mode, program.real_vars(x), &p.vars);
        let horizon = (delta - p.origin.time.lo).max(0.0);
        let key = CacheKey {
            rebec: x.to_string(),
            mode: p.mode.clone(),
            origin: p.origin.clone(),
            inputs: sys.inputs.clone(),
            gamma: gamma.to_bits(),
            horizon: horizon.to_bits(),
        };
        if let Some(hit) = self.map.get(&key) {
            self.hits += 1;
            return Ok(hit.clone());
        }
        self.misses += 1;
        let raw = compute_flowpipes(&sys, &p.origin.values, gamma, horizon)?;
        let trimmed = Arc::new(intersect_invariant(&raw, &mode.invariant, &sys.inputs)?);
        self.map.insert(key, trimmed.clone());
        Ok(trimmed)
    }
}

/// `gt` relative to the origin window: `[gt.lo - origin.hi, gt.hi - origin.lo]`
/// clamped at zero.
pub fn relative_window(gt: &Interval, origin: &Interval) -> Interval {
    let r = gt.sub(origin);
    if r.lo < 0.0 {
        Interval::new(0.0, r.hi.max(0.0), true, r.hi_closed || r.hi <= 0.0)
    } else {
        r
    }
}

/// Advances every physical rebec of `ps` to global time `gt`. Returns
/// `None` when some rebec cannot satisfy its invariant anywhere in `gt`.
pub fn update_physical_rebecs(
    program: &Program,
    ps: &BTreeMap<RebecId, PhysicalState>,
    gt: &Interval,
    gamma: f64,
    delta: f64,
    cache: &mut FlowCache,
) -> Result<Option<BTreeMap<RebecId, PhysicalState>>, FlowError> {
    let mut out = ps.clone();
    for (x, p) in out.iter_mut() {
        if p.mode == NONE_MODE {
            continue;
        }
        let segments = cache.pipes(program, x, p, gamma, delta)?;
        let rel = relative_window(gt, &p.origin.time);
        let covered = (delta - p.origin.time.lo).max(0.0);
        if rel.hi > covered + TIME_EPS {
            return Err(FlowError::CoverageGap(rel));
        }
        let Some(values) = hull_over(&segments, &rel) else {
            return Ok(None);
        };
        for (v, iv) in values {
            p.vars.insert(v, Value::Real(iv));
        }
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests;
