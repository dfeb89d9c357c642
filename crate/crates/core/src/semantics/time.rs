//! Event-time set and global-time progression.

use super::state::{GlobalState, RebecId};
use super::SemanticsError;
use crate::interval::Interval;

/// Absolute tolerance used when comparing time points.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    MessageArrivalLow,
    MessageArrivalHigh,
    ResumeLow,
    ResumeHigh,
    GuardWindowLow,
    GuardWindowHigh,
    StepPad,
    HorizonPad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTime {
    pub value: f64,
    pub kind: EventKind,
    pub source: Option<RebecId>,
}

impl EventTime {
    pub fn new(value: f64, kind: EventKind, source: Option<RebecId>) -> Self {
        Self {
            value,
            kind,
            source,
        }
    }
}

/// Collects arrival and resume bounds of `s` plus caller-supplied guard
/// windows, sorted ascending with (near-)duplicates collapsed.
pub fn events(s: &GlobalState, guard_windows: &[(RebecId, Interval)]) -> Vec<EventTime> {
    let mut out = Vec::new();
    let mailboxes = s
        .rs
        .iter()
        .map(|(x, r)| (x, &r.mailbox))
        .chain(s.ps.iter().map(|(x, p)| (x, &p.mailbox)));
    for (x, mailbox) in mailboxes {
        for m in mailbox {
            out.push(EventTime::new(m.arrival.lo, EventKind::MessageArrivalLow, Some(x.clone())));
            out.push(EventTime::new(m.arrival.hi, EventKind::MessageArrivalHigh, Some(x.clone())));
        }
    }
    for (x, r) in &s.rs {
        if let Some(res) = &r.resume {
            out.push(EventTime::new(res.window.lo, EventKind::ResumeLow, Some(x.clone())));
            out.push(EventTime::new(res.window.hi, EventKind::ResumeHigh, Some(x.clone())));
        }
    }
    for (x, w) in guard_windows {
        out.push(EventTime::new(w.lo, EventKind::GuardWindowLow, Some(x.clone())));
        out.push(EventTime::new(w.hi, EventKind::GuardWindowHigh, Some(x.clone())));
    }
    sort_collapse(out)
}

pub fn sort_collapse(mut ev: Vec<EventTime>) -> Vec<EventTime> {
    ev.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut out: Vec<EventTime> = Vec::with_capacity(ev.len());
    for e in ev {
        match out.last() {
            Some(last) if (e.value - last.value).abs() <= TIME_EPS => {}
            _ => out.push(e),
        }
    }
    out
}

/// The next global-time interval from `GT = [t1, t2)` and the two smallest
/// event times `t3 <= t4`.
pub fn progress_time(t1: f64, t2: f64, t3: f64, t4: f64) -> Result<Interval, SemanticsError> {
    if !(t1 <= t2 && t3 <= t4 && t3 >= t1) {
        return Err(SemanticsError::PreconditionViolated(format!(
            "progressTime({t1}, {t2}, {t3}, {t4})"
        )));
    }
    let (lo, hi) = if t3 < t2 {
        (t3, t2 + (t3 - t1))
    } else if t3 > t2 {
        (t2, t3)
    } else {
        (t3, t4)
    };
    // A degenerate result is the single instant `lo`.
    Ok(if lo < hi {
        Interval::half_open(lo, hi)
    } else {
        Interval::point(lo)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_split_examples() {
        assert_eq!(progress_time(0.0, 1.0, 1.0, 2.0).unwrap(), Interval::half_open(1.0, 2.0));
        let r = progress_time(1.0, 2.0, 1.3, 2.5).unwrap();
        assert_eq!(r, Interval::half_open(1.3, 2.0 + (1.3 - 1.0)));
        assert!((r.hi - 2.3).abs() < 1e-12);
        assert_eq!(progress_time(0.0, 1.0, 3.0, 5.0).unwrap(), Interval::half_open(1.0, 3.0));
        assert!(progress_time(1.0, 2.0, 0.5, 3.0).is_err());
    }
}
