//! Per-agent record of recent immediate contacts.

use alloc::vec;
use alloc::vec::Vec;

const EMPTY: u64 = u64::MAX;

/// Latest immediate contact between every pair of agents, kept for
/// `retention` ticks. Pairs live in the upper triangle of a dense matrix, so
/// recording is O(1) and an agent's peers are one row plus one column.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactLog {
    n: usize,
    retention: u64,
    ticks: Vec<u64>,
    distances: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoggedContact {
    pub peer: usize,
    pub tick: u64,
    pub distance: f64,
}

impl ContactLog {
    pub fn new(n: usize, retention: u64) -> Self {
        ContactLog { n, retention, ticks: vec![EMPTY; n * n], distances: vec![0.0; n * n] }
    }

    pub fn retention(&self) -> u64 {
        self.retention
    }

    /// Records a symmetric contact, replacing any older entry for the pair.
    pub fn record(&mut self, i: usize, j: usize, tick: u64, distance: f64) {
        let k = self.slot(i, j);
        self.ticks[k] = tick;
        self.distances[k] = distance;
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * self.n + b
    }

    /// Drops entries more than `retention` ticks older than `now`.
    pub fn prune(&mut self, now: u64) -> usize {
        let Some(cutoff) = now.checked_sub(self.retention) else {
            return 0;
        };
        let mut dropped = 0;
        for t in &mut self.ticks {
            if *t != EMPTY && *t < cutoff {
                *t = EMPTY;
                dropped += 1;
            }
        }
        dropped
    }

    /// Contacts of `agent`, ordered by peer index.
    pub fn contacts_of(&self, agent: usize) -> impl Iterator<Item = LoggedContact> + '_ {
        (0..self.n).filter(move |&peer| peer != agent).filter_map(move |peer| {
            let k = self.slot(agent, peer);
            let tick = self.ticks[k];
            (tick != EMPTY).then(|| LoggedContact { peer, tick, distance: self.distances[k] })
        })
    }

    pub fn oldest_tick(&self) -> Option<u64> {
        self.ticks.iter().copied().filter(|&t| t != EMPTY).min()
    }
}
