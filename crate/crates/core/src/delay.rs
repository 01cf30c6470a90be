//! Censored stochastic feedback delays.
//!
//! Feedback for a duel played at round `s` becomes visible at round
//! `s + D_s`, but only if `D_s ≤ M`; anything slower is lost for good.
//! The observation probability `ρ = P(D ≤ M)` is computed in closed form
//! and drives the inverse-probability weights.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Delay distribution, always supported on `{1, 2, …}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayKind {
    /// `P(D = k) = p (1 − p)^{k−1}`.
    Geometric { p: f64 },
    /// `D = c` always.
    Constant { c: u32 },
    /// Feedback arrives in the next round.
    None,
}

/// A delay distribution together with its censoring threshold `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    kind: DelayKind,
    threshold: u32,
    rho: f64,
}

impl DelayModel {
    pub fn new(kind: DelayKind, threshold: u32) -> Result<Self> {
        if threshold == 0 {
            return Err(invalid("delay threshold M must be positive"));
        }
        let rho = match kind {
            DelayKind::Geometric { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(invalid(format!("geometric parameter must lie in (0, 1], got {p}")));
                }
                1.0 - (1.0 - p).powi(threshold as i32)
            }
            DelayKind::Constant { c } => {
                if c == 0 {
                    return Err(invalid("constant delay must be at least 1"));
                }
                if c <= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            DelayKind::None => 1.0,
        };
        if !(rho > 0.0) {
            return Err(invalid(format!(
                "observation probability is zero under {kind:?} with M = {threshold}"
            )));
        }
        Ok(Self { kind, threshold, rho })
    }

    pub fn kind(&self) -> DelayKind {
        self.kind
    }

    /// The censoring threshold `M`.
    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    /// `ρ = P(D ≤ M)`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sample_delay(&self, rng: &mut impl Rng) -> u32 {
        match self.kind {
            DelayKind::Geometric { p } => {
                // rand_distr counts failures before the first success
                let failures = Geometric::new(p).expect("validated at construction").sample(rng);
                u32::try_from(failures.saturating_add(1)).unwrap_or(u32::MAX)
            }
            DelayKind::Constant { c } => c,
            DelayKind::None => 1,
        }
    }
}

/// `ω_{s,t} = 1{D ≤ min(M, t − s)} / ρ`.
///
/// Zero whenever the feedback has not arrived by round `t` or is censored.
pub fn ipw_weight(s: usize, t: usize, delay: u32, threshold: u32, rho: f64) -> f64 {
    if t <= s {
        return 0.0;
    }
    let window = (threshold as usize).min(t - s);
    if (delay as usize) <= window {
        1.0 / rho
    } else {
        0.0
    }
}

/// One played duel whose feedback is in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelRecord {
    /// Round the duel was played.
    pub round: usize,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// `1{first ≻ second}`, drawn at play time.
    pub preference: bool,
    pub delay: u32,
    pub delivered: bool,
}

impl DuelRecord {
    pub fn arrival_round(&self) -> usize {
        self.round + self.delay as usize
    }
}

/// Undelivered duels, in play order.
#[derive(Debug, Clone, Default)]
pub struct PendingQueue {
    records: VecDeque<DuelRecord>,
}

impl PendingQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: DuelRecord) {
        self.records.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DuelRecord> {
        self.records.iter()
    }

    /// Delivers every record with `s + D ≤ t` and `D ≤ M`, and drops
    /// censored records (`D > M`) once `t > s + M`.
    pub fn poll(&mut self, t: usize, threshold: u32) -> Vec<DuelRecord> {
        let m = threshold as usize;
        let mut delivered = Vec::new();
        self.records.retain_mut(|r| {
            let censored = r.delay as usize > m;
            if censored {
                t <= r.round + m
            } else if r.arrival_round() <= t {
                r.delivered = true;
                delivered.push(r.clone());
                false
            } else {
                true
            }
        });
        delivered
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use std::collections::BTreeSet;

    fn record(round: usize, delay: u32) -> DuelRecord {
        DuelRecord {
            round,
            first: vec![1.0],
            second: vec![0.0],
            preference: true,
            delay,
            delivered: false,
        }
    }

    #[test]
    fn degenerate_delays() {
        let mut rng = stream_rng(0, Stream::Delay, 0);
        let c = DelayModel::new(DelayKind::Constant { c: 3 }, 5).unwrap();
        let g = DelayModel::new(DelayKind::Geometric { p: 1.0 }, 1).unwrap();
        let n = DelayModel::new(DelayKind::None, 1).unwrap();
        for _ in 0..100 {
            assert_eq!(c.sample_delay(&mut rng), 3);
            assert_eq!(g.sample_delay(&mut rng), 1);
            assert_eq!(n.sample_delay(&mut rng), 1);
        }
    }

    #[test]
    fn geometric_first_mass() {
        let model = DelayModel::new(DelayKind::Geometric { p: 0.5 }, 3).unwrap();
        let mut rng = stream_rng(1, Stream::Delay, 0);
        let n = 100_000;
        let ones = (0..n).filter(|_| model.sample_delay(&mut rng) == 1).count() as f64 / n as f64;
        let sd = (0.25 / n as f64).sqrt();
        assert!((ones - 0.5).abs() < 3.0 * sd, "{ones}");
    }

    #[test]
    fn rho_closed_forms() {
        let r = |p, m| DelayModel::new(DelayKind::Geometric { p }, m).unwrap().rho();
        assert!((r(0.5, 1) - 0.5).abs() < 1e-15);
        assert!((r(0.5, 2) - 0.75).abs() < 1e-15);
        let pmf_sum: f64 = (1..=5).map(|k| 0.3 * 0.7f64.powi(k - 1)).sum();
        assert!((r(0.3, 5) - pmf_sum).abs() < 1e-14);
        assert_eq!(DelayModel::new(DelayKind::None, 4).unwrap().rho(), 1.0);
        assert_eq!(DelayModel::new(DelayKind::Constant { c: 2 }, 2).unwrap().rho(), 1.0);
    }

    #[test]
    fn invalid_models() {
        assert!(DelayModel::new(DelayKind::Constant { c: 4 }, 3).is_err());
        assert!(DelayModel::new(DelayKind::Geometric { p: 0.0 }, 3).is_err());
        assert!(DelayModel::new(DelayKind::Geometric { p: 1.5 }, 3).is_err());
        assert!(DelayModel::new(DelayKind::None, 0).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(ipw_weight(1, 5, 2, 3, 0.5), 2.0);
        assert_eq!(ipw_weight(4, 5, 2, 3, 0.5), 0.0);
        assert_eq!(ipw_weight(1, 100, 4, 3, 0.5), 0.0);
        assert_eq!(ipw_weight(3, 3, 1, 3, 0.5), 0.0);
    }

    #[test]
    fn poll_arrival_boundaries() {
        let mut q = PendingQueue::new();
        q.push(record(1, 2));
        assert!(q.poll(2, 3).is_empty());
        let got = q.poll(3, 3);
        assert_eq!(got.len(), 1);
        assert!(got[0].delivered);
        assert!(q.poll(3, 3).is_empty());
        assert!(q.is_empty());
    }

    #[test]
    fn censored_records_are_dropped_after_window() {
        let mut q = PendingQueue::new();
        q.push(record(1, 5));
        for t in 1..=4 {
            assert!(q.poll(t, 3).is_empty());
            assert_eq!(q.len(), 1);
        }
        assert!(q.poll(5, 3).is_empty());
        assert!(q.is_empty());
    }

    #[test]
    fn union_of_polls_is_exactly_uncensored_set() {
        let model = DelayModel::new(DelayKind::Geometric { p: 0.3 }, 4).unwrap();
        let mut rng = stream_rng(4, Stream::Delay, 0);
        let mut q = PendingQueue::new();
        let mut expected = BTreeSet::new();
        let mut got = BTreeSet::new();
        let horizon = 1000;
        for s in 1..=horizon {
            got.extend(q.poll(s, 4).into_iter().map(|r| r.round));
            let d = model.sample_delay(&mut rng);
            if d <= 4 {
                expected.insert(s);
            }
            q.push(record(s, d));
        }
        for t in horizon + 1..=horizon + 5 {
            got.extend(q.poll(t, 4).into_iter().map(|r| r.round));
        }
        assert_eq!(got, expected);
        assert!(q.is_empty());
    }
}
