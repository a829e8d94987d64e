//! Event queue and message routing: latency, loss, partitions and the
//! per-round unreachable set.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{BetaModel, LatencyModel, NetConfig, NodeId};

/// Total order of events: time, then class, then sender, then insertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventKey {
    pub time: u64,
    pub class: u8,
    pub sender: NodeId,
    pub seq: u64,
}

struct Queued<T> {
    key: EventKey,
    item: T,
}

impl<T> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl<T> Eq for Queued<T> {}

impl<T> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Queued<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

pub struct EventQueue<T> {
    heap: BinaryHeap<Reverse<Queued<T>>>,
    seq: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }
}

impl<T> EventQueue<T> {
    pub fn push(&mut self, time: u64, class: u8, sender: NodeId, item: T) -> EventKey {
        let key = EventKey {
            time,
            class,
            sender,
            seq: self.seq,
        };
        self.seq += 1;
        self.heap.push(Reverse(Queued { key, item }));
        key
    }

    pub fn pop(&mut self) -> Option<(EventKey, T)> {
        self.heap.pop().map(|Reverse(q)| (q.key, q.item))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Per-copy accounting. Every copy handed to the network ends up in exactly
/// one of the last five buckets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTotals {
    /// Protocol messages originated (a broadcast counts once).
    pub originated: u64,
    pub intents: u64,
    pub confirms: u64,
    pub blocks: u64,
    pub enrollments: u64,
    pub sync: u64,
    /// Point-to-point copies handed to the network.
    pub copies_sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub filtered: u64,
    pub unreachable: u64,
    pub in_flight: u64,
}

/// What happens to one copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Deliver(u64),
    Dropped,
    Filtered,
    Unreachable,
}

pub struct Network {
    cfg: NetConfig,
    rng: ChaCha8Rng,
    per_link: BTreeMap<(NodeId, NodeId), u64>,
    honest: Vec<NodeId>,
    honest_set: BTreeSet<NodeId>,
    population: u32,
    round: u64,
    offline: BTreeSet<NodeId>,
    sticky_drawn: bool,
    miss: BTreeMap<NodeId, BTreeSet<NodeId>>,
    /// Sum over rounds of the measured unreachable fraction.
    pub unreachable_fraction_sum: f64,
    pub unreachable_samples: u64,
    pub totals: MessageTotals,
}

impl Network {
    /// `honest` lists the nodes eligible to be unreachable; fractions are
    /// taken relative to `population`.
    pub fn new(cfg: NetConfig, rng: ChaCha8Rng, honest: Vec<NodeId>, population: u32) -> Self {
        let per_link = match &cfg.latency {
            LatencyModel::PerLink { links, .. } => links.iter().map(|l| ((l.0, l.1), l.2)).collect(),
            _ => BTreeMap::new(),
        };
        Network {
            honest_set: honest.iter().copied().collect(),
            honest,
            per_link,
            cfg,
            rng,
            population,
            round: 0,
            offline: BTreeSet::new(),
            sticky_drawn: false,
            miss: BTreeMap::new(),
            unreachable_fraction_sum: 0.0,
            unreachable_samples: 0,
            totals: MessageTotals::default(),
        }
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// Unreachable receivers per draw: a β share of the whole population,
    /// taken from the honest nodes.
    fn miss_count(&self) -> usize {
        (self.cfg.beta * self.population as f64).round() as usize
    }

    /// A uniformly random set of `miss_count` honest nodes other than
    /// `exclude`. A fixed size keeps the unreachable share of any committee
    /// slot exactly β.
    fn draw_subset(&mut self, exclude: Option<NodeId>) -> BTreeSet<NodeId> {
        let k = self.miss_count();
        if k == 0 {
            return BTreeSet::new();
        }
        let pool: Vec<NodeId> = self.honest.iter().copied().filter(|&id| Some(id) != exclude).collect();
        pool.choose_multiple(&mut self.rng, k.min(pool.len())).copied().collect()
    }

    /// Closes the per-sender sample of the round that just ended.
    pub fn end_round(&mut self) {
        if self.cfg.beta_model == BetaModel::PerSender && !self.miss.is_empty() {
            let k = self.miss.len() as f64;
            let sum: f64 = self.miss.values().map(|m| m.len() as f64).sum();
            self.unreachable_fraction_sum += sum / k / self.population as f64;
            self.unreachable_samples += 1;
        }
        self.miss.clear();
    }

    pub fn begin_round(&mut self, round: u64) {
        self.end_round();
        self.round = round;
        match self.cfg.beta_model {
            BetaModel::PerSender => {}
            BetaModel::NodeOffline => {
                self.offline = self.draw_subset(None);
            }
            BetaModel::NodeOfflineSticky => {
                if !self.sticky_drawn {
                    self.offline = self.draw_subset(None);
                    self.sticky_drawn = true;
                }
            }
        }
        if self.cfg.beta_model != BetaModel::PerSender {
            self.unreachable_fraction_sum += self.offline.len() as f64 / self.population as f64;
            self.unreachable_samples += 1;
        }
    }

    pub fn is_offline(&self, id: NodeId) -> bool {
        self.offline.contains(&id)
    }

    pub fn is_honest(&self, id: NodeId) -> bool {
        self.honest_set.contains(&id)
    }

    fn latency(&mut self, from: NodeId, to: NodeId) -> u64 {
        match &self.cfg.latency {
            LatencyModel::Constant { ms } => *ms,
            LatencyModel::Uniform { min_ms, max_ms } => {
                let (a, b) = (*min_ms, *max_ms);
                self.rng.gen_range(a..=b)
            }
            LatencyModel::PerLink { default_ms, .. } => *self.per_link.get(&(from, to)).unwrap_or(default_ms),
        }
    }

    fn partitioned(&self, from: NodeId, to: NodeId) -> bool {
        self.cfg
            .partitions
            .iter()
            .any(|p| (p.from_round..=p.to_round).contains(&self.round) && p.group_of(from) != p.group_of(to))
    }

    fn misses(&mut self, from: NodeId, to: NodeId) -> bool {
        match self.cfg.beta_model {
            BetaModel::PerSender => {
                if !self.miss.contains_key(&from) {
                    let set = self.draw_subset(Some(from));
                    self.miss.insert(from, set);
                }
                self.miss[&from].contains(&to)
            }
            _ => self.offline.contains(&to),
        }
    }

    /// Routes one copy sent at `now`. `round_bound` copies are subject to
    /// the unreachable model; sync traffic is not.
    pub fn route(&mut self, from: NodeId, to: NodeId, now: u64, round_bound: bool) -> Route {
        let cut = round_bound && self.misses(from, to);
        self.route_with(from, to, now, cut)
    }

    /// Routes a reply to a broadcast of `to`. The link is cut exactly when
    /// `from` was cut off from `to`'s broadcasts this round.
    pub fn route_reply(&mut self, from: NodeId, to: NodeId, now: u64) -> Route {
        let cut = self.misses(to, from);
        self.route_with(from, to, now, cut)
    }

    fn route_with(&mut self, from: NodeId, to: NodeId, now: u64, cut: bool) -> Route {
        self.totals.copies_sent += 1;
        let r = if self.partitioned(from, to) {
            Route::Filtered
        } else if cut {
            Route::Unreachable
        } else if self.cfg.drop_prob > 0.0 && self.rng.gen::<f64>() < self.cfg.drop_prob {
            Route::Dropped
        } else {
            Route::Deliver(now + self.latency(from, to))
        };
        match r {
            Route::Filtered => self.totals.filtered += 1,
            Route::Unreachable => self.totals.unreachable += 1,
            Route::Dropped => self.totals.dropped += 1,
            Route::Deliver(_) => self.totals.in_flight += 1,
        }
        r
    }

    /// Records that an in-flight copy reached its receiver.
    pub fn delivered(&mut self) {
        self.totals.in_flight -= 1;
        self.totals.delivered += 1;
    }

    /// Mean measured unreachable fraction per round.
    pub fn mean_unreachable(&self) -> f64 {
        if self.unreachable_samples == 0 {
            0.0
        } else {
            self.unreachable_fraction_sum / self.unreachable_samples as f64
        }
    }
}
