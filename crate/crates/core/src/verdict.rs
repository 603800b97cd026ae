//! Four-state results for asymptotic questions.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::rational::round12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Proved,
    Refuted,
    Evidence,
    Inconclusive,
}

/// Which way the numerical evidence points, relative to the claim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    For,
    Against,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub claim: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub method: String,
    pub depth: usize,
    pub trace: Vec<f64>,
    pub payload: BTreeMap<String, Value>,
}

impl Verdict {
    fn base(claim: &str, status: Status, method: &str) -> Verdict {
        Verdict {
            claim: claim.to_string(),
            status,
            direction: None,
            method: method.to_string(),
            depth: 0,
            trace: vec![],
            payload: BTreeMap::new(),
        }
    }

    pub fn proved(claim: &str, method: &str) -> Verdict {
        Verdict::base(claim, Status::Proved, method)
    }

    pub fn refuted(claim: &str, method: &str) -> Verdict {
        Verdict::base(claim, Status::Refuted, method)
    }

    pub fn evidence(claim: &str, direction: Direction, method: &str, trace: Vec<f64>) -> Verdict {
        let mut v = Verdict::base(claim, Status::Evidence, method);
        v.direction = Some(direction);
        v.trace = trace.into_iter().map(round12).collect();
        v
    }

    pub fn inconclusive(claim: &str, reason: &str) -> Verdict {
        let mut v = Verdict::base(claim, Status::Inconclusive, "none");
        v.payload.insert("reason".into(), Value::from(reason));
        v
    }

    pub fn with_depth(mut self, depth: usize) -> Verdict {
        self.depth = depth;
        self
    }

    pub fn with_trace(mut self, trace: Vec<f64>) -> Verdict {
        self.trace = trace.into_iter().map(round12).collect();
        self
    }

    pub fn note(mut self, key: &str, value: impl Into<Value>) -> Verdict {
        self.payload.insert(key.to_string(), value.into());
        self
    }

    pub fn is_proved(&self) -> bool {
        self.status == Status::Proved
    }

    pub fn is_refuted(&self) -> bool {
        self.status == Status::Refuted
    }

    pub fn is_definitive(&self) -> bool {
        matches!(self.status, Status::Proved | Status::Refuted)
    }

    /// Proved or evidenced in favour of the claim.
    pub fn leans_true(&self) -> bool {
        self.is_proved() || (self.status == Status::Evidence && self.direction == Some(Direction::For))
    }

    /// Proved or evidenced against the claim.
    pub fn leans_false(&self) -> bool {
        self.is_refuted() || (self.status == Status::Evidence && self.direction == Some(Direction::Against))
    }

    /// Definitive verdicts on the same claim that disagree.
    pub fn contradicts(&self, o: &Verdict) -> bool {
        self.claim == o.claim
            && ((self.is_proved() && o.is_refuted()) || (self.is_refuted() && o.is_proved()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contradiction_needs_same_claim() {
        let a = Verdict::proved("uniquely ergodic", "degree test");
        let b = Verdict::refuted("uniquely ergodic", "degree test");
        let c = Verdict::refuted("thin", "ratio");
        assert!(a.contradicts(&b));
        assert!(!a.contradicts(&c));
        let e = Verdict::evidence("x", Direction::Against, "trace", vec![1.0 / 3.0]);
        assert!(e.leans_false());
        assert_eq!(e.trace[0], 0.333333333333);
        let s = serde_json::to_value(&e).unwrap();
        assert_eq!(s["status"], "evidence");
        assert_eq!(s["direction"], "against");
    }
}
