//! Exact outcome distribution of the random-access procedure for tiny
//! instances, by walking the whole probability tree of preamble picks and
//! backoff outcomes. Shared by several test targets.

use std::collections::{BTreeMap, HashMap};

use nrslice::rach::{simulate_rach, RachConfig, UeState};
use nrslice::SimTime;

/// Marginal outcomes compared against the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    /// Number of blocked UEs.
    Blocked(u32),
    /// Attempts UE 0 made, and whether it got through.
    Ue0Attempts(u32, bool),
    /// Access delay of UE 0 in nanoseconds; only when it succeeded.
    Ue0Delay(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Ue {
    attempts: u32,
    /// `None` once finished.
    next: Option<u64>,
    succeeded_at: Option<u64>,
}

type Joint = (u32, u32, bool, Option<u64>);

pub struct Oracle<'c> {
    cfg: &'c RachConfig,
    n: u32,
    memo: HashMap<Vec<Ue>, Vec<(Joint, f64)>>,
}

impl<'c> Oracle<'c> {
    pub fn new(cfg: &'c RachConfig, n: u32) -> Self {
        Oracle { cfg, n, memo: HashMap::new() }
    }

    /// Exact probability of every [`Outcome`] with everybody arriving at t = 0.
    pub fn marginals(&mut self) -> BTreeMap<Outcome, f64> {
        let first = self.cfg.pattern.next_at_or_after(SimTime::ZERO).0;
        let start: Vec<Ue> = (0..self.n).map(|_| Ue { attempts: 0, next: Some(first), succeeded_at: None }).collect();
        let joint = self.solve(start);
        let mut out = BTreeMap::new();
        for ((blocked, a0, ok0, done0), p) in joint {
            *out.entry(Outcome::Blocked(blocked)).or_insert(0.0) += p;
            *out.entry(Outcome::Ue0Attempts(a0, ok0)).or_insert(0.0) += p;
            if let Some(t) = done0 {
                let delay = t + self.cfg.rar_processing_delay.0 - first;
                *out.entry(Outcome::Ue0Delay(delay)).or_insert(0.0) += p;
            }
        }
        out
    }

    /// Distribution of the next occasion after a collision at `t`.
    fn backoff_targets(&self, t: u64) -> Vec<(u64, f64)> {
        // the eligible instant is t + W + k ns with k uniform on 1..=BI
        let bi = self.cfg.backoff_indicator.0;
        let lo = t + self.cfg.rar_window.0;
        if bi == 0 {
            return vec![(self.cfg.pattern.next_at_or_after(SimTime(lo)).0, 1.0)];
        }
        let mut out = Vec::new();
        let mut e = lo + 1;
        while e <= lo + bi {
            let occ = self.cfg.pattern.next_at_or_after(SimTime(e)).0;
            let last = occ.min(lo + bi);
            out.push((occ, (last - e + 1) as f64 / bi as f64));
            e = last + 1;
        }
        out
    }

    fn solve(&mut self, state: Vec<Ue>) -> Vec<(Joint, f64)> {
        if let Some(r) = self.memo.get(&state) {
            return r.clone();
        }
        let Some(t) = state.iter().filter_map(|u| u.next).min() else {
            let blocked = state.iter().filter(|u| u.succeeded_at.is_none()).count() as u32;
            let u0 = &state[0];
            let r = vec![((blocked, u0.attempts, u0.succeeded_at.is_some(), u0.succeeded_at), 1.0)];
            self.memo.insert(state, r.clone());
            return r;
        };
        let here: Vec<usize> = (0..state.len()).filter(|&i| state[i].next == Some(t)).collect();
        let pool = self.cfg.num_preambles as usize;
        let combos = pool.pow(here.len() as u32);
        let p_combo = 1.0 / combos as f64;
        let targets = self.backoff_targets(t);
        let mut acc: HashMap<Joint, f64> = HashMap::new();

        for c in 0..combos {
            let mut picks = Vec::with_capacity(here.len());
            let mut x = c;
            for _ in &here {
                picks.push(x % pool);
                x /= pool;
            }
            let mut after = state.clone();
            let mut retrying = Vec::new();
            for (j, &i) in here.iter().enumerate() {
                let ue = &mut after[i];
                ue.attempts += 1;
                ue.next = None;
                if picks.iter().filter(|&&p| p == picks[j]).count() == 1 {
                    ue.succeeded_at = Some(t);
                } else if ue.attempts < self.cfg.preamble_trans_max {
                    retrying.push(i);
                }
            }
            // every combination of backoff targets for the UEs that retry
            let mut branches: Vec<(Vec<Ue>, f64)> = vec![(after, p_combo)];
            for &i in &retrying {
                let mut next_branches = Vec::new();
                for (s, p) in &branches {
                    for &(occ, q) in &targets {
                        let mut s2 = s.clone();
                        s2[i].next = Some(occ);
                        next_branches.push((s2, p * q));
                    }
                }
                branches = next_branches;
            }
            for (s, p) in branches {
                for (k, q) in self.solve(s) {
                    *acc.entry(k).or_insert(0.0) += p * q;
                }
            }
        }
        let mut r: Vec<(Joint, f64)> = acc.into_iter().collect();
        r.sort_by(|a, b| a.0.cmp(&b.0));
        self.memo.insert(state, r.clone());
        r
    }
}

/// Empirical frequencies of every [`Outcome`] over `seeds`.
pub fn empirical(cfg: &RachConfig, n: u32, seeds: std::ops::Range<u64>) -> BTreeMap<Outcome, f64> {
    let total = (seeds.end - seeds.start) as f64;
    let mut out = BTreeMap::new();
    for seed in seeds {
        let r = simulate_rach(n, None, cfg, seed).expect("valid config");
        *out.entry(Outcome::Blocked(r.blocked() as u32)).or_insert(0.0) += 1.0;
        let u0 = &r.ues[0];
        let ok = u0.state == UeState::Succeeded;
        *out.entry(Outcome::Ue0Attempts(u0.attempts, ok)).or_insert(0.0) += 1.0;
        if ok {
            let d = u0.success_time.unwrap() - u0.first_tx_time.unwrap();
            *out.entry(Outcome::Ue0Delay(d.0)).or_insert(0.0) += 1.0;
        }
    }
    out.values_mut().for_each(|v| *v /= total);
    out
}

/// Outcomes whose empirical frequency lies more than three standard errors
/// from the exact probability, as `(outcome, exact, empirical)`.
pub fn mismatches(exact: &BTreeMap<Outcome, f64>, seen: &BTreeMap<Outcome, f64>, samples: f64) -> Vec<(Outcome, f64, f64)> {
    let mut keys: Vec<Outcome> = exact.keys().chain(seen.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|k| {
            let p = exact.get(&k).copied().unwrap_or(0.0);
            let f = seen.get(&k).copied().unwrap_or(0.0);
            let se = (p * (1.0 - p) / samples).sqrt();
            // a category of probability zero must never be observed
            let ok = if p < 1e-12 { f == 0.0 } else { (f - p).abs() <= 3.0 * se + 1e-12 };
            (!ok).then_some((k, p, f))
        })
        .collect()
}

/// Configuration with the given pattern index and small-instance knobs.
pub fn small_config(index: u32, preambles: u32, max_attempts: u32) -> RachConfig {
    let mut cfg = RachConfig::with_index(index).expect("builtin index");
    cfg.num_preambles = preambles;
    cfg.preamble_trans_max = max_attempts;
    cfg
}

/// `(pattern index, arrivals, preambles, max attempts)` instances checked
/// against the simulator.
pub const CASES: &[(u32, u32, u32, u32)] = &[
    (16, 3, 2, 3),
    (16, 4, 3, 3),
    (19, 4, 2, 2),
    (19, 3, 3, 3),
    (22, 2, 1, 3),
    (22, 4, 3, 1),
];

pub const ORACLE_SEEDS: u64 = 10_000;
