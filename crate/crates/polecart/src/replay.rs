//! Experience storage and sampling: no replay, uniform replay, and
//! prioritized replay over a sum tree.
//!
//! Priorities live in the tree already raised to the priority exponent, so a
//! leaf holds `(|td| + eps)^alpha` and sampling probabilities are exactly
//! leaf / root. New experiences enter at the current maximum leaf priority
//! (1 when the buffer is empty) so each is learned from at least once.

use rand::Rng;

use crate::env::Action;
use crate::error::{Error, Result};

/// One stored experience.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; 4],
    pub action: Action,
    pub reward: f64,
    pub next_state: [f64; 4],
    /// Episode ended on this transition (limit breach or step cap); the
    /// learning target must not bootstrap past it.
    pub terminal: bool,
}

/// How experiences are stored and drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayStrategy {
    /// Keep only the latest transition; learning is purely online.
    NoReplay,
    /// Fixed-size ring, batches drawn uniformly with replacement.
    Uniform,
    /// Fixed-size ring, batches drawn proportionally to priority with
    /// importance-sampling weights.
    Prioritized,
}

/// Prioritization knobs: `exponent` is the priority exponent, `epsilon` the
/// additive floor that keeps zero-error transitions sampleable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerParams {
    pub exponent: f64,
    pub epsilon: f64,
}

impl Default for PerParams {
    fn default() -> Self {
        PerParams {
            exponent: 0.6,
            epsilon: 1e-5,
        }
    }
}

/// A batch handed to the learner. The three vectors share one length; for
/// non-prioritized strategies every weight is 1, for prioritized ones the
/// batch maximum is normalized to 1.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub transitions: Vec<Transition>,
    pub indices: Vec<usize>,
    pub is_weights: Vec<f64>,
}

impl SampledBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Complete binary tree of priority partial sums over a power-of-two leaf
/// span. Parents are recomputed as the exact sum of their children on every
/// update, so internal nodes never drift from the leaves: a full rebuild
/// reproduces the root bit for bit.
#[derive(Debug, Clone)]
pub struct SumTree {
    /// Leaf slots actually in use.
    leaves: usize,
    /// Power-of-two span backing the heap layout.
    span: usize,
    sums: Vec<f64>,
    maxes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: usize) -> Self {
        assert!(leaves >= 1);
        let span = leaves.next_power_of_two();
        SumTree {
            leaves,
            span,
            sums: vec![0.0; 2 * span],
            maxes: vec![0.0; 2 * span],
        }
    }

    pub fn len(&self) -> usize {
        self.leaves
    }

    pub fn is_empty(&self) -> bool {
        self.leaves == 0
    }

    /// Sets leaf `index` to `value` and refreshes the path to the root.
    pub fn set(&mut self, index: usize, value: f64) {
        assert!(index < self.leaves, "leaf {index} out of range");
        assert!(value >= 0.0 && value.is_finite());
        let mut node = self.span + index;
        self.sums[node] = value;
        self.maxes[node] = value;
        while node > 1 {
            node /= 2;
            self.sums[node] = self.sums[2 * node] + self.sums[2 * node + 1];
            self.maxes[node] = self.maxes[2 * node].max(self.maxes[2 * node + 1]);
        }
    }

    pub fn value(&self, index: usize) -> f64 {
        assert!(index < self.leaves);
        self.sums[self.span + index]
    }

    /// Sum of all leaf priorities.
    pub fn total(&self) -> f64 {
        self.sums[1]
    }

    /// Largest leaf priority currently stored.
    pub fn max_leaf(&self) -> f64 {
        self.maxes[1]
    }

    /// Walks from the root to the leaf owning mass point `point`. Points are
    /// expected in `[0, total)`; anything at or beyond the total resolves to
    /// the last positive leaf because descent never enters a zero branch.
    pub fn locate(&self, point: f64) -> usize {
        debug_assert!(self.total() > 0.0);
        let mut node = 1;
        let mut point = point;
        while node < self.span {
            let left = 2 * node;
            if point < self.sums[left] || self.sums[left + 1] == 0.0 {
                node = left;
            } else {
                point -= self.sums[left];
                node = left + 1;
            }
        }
        node - self.span
    }

    /// Root recomputed from scratch; used to cross-check the incremental
    /// maintenance.
    pub fn rebuilt_total(&self) -> f64 {
        let mut level: Vec<f64> = self.sums[self.span..2 * self.span].to_vec();
        while level.len() > 1 {
            level = level.chunks(2).map(|pair| pair[0] + pair[1]).collect();
        }
        level[0]
    }
}

/// Experience store for one training run.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    strategy: ReplayStrategy,
    capacity: usize,
    slots: Vec<Transition>,
    cursor: usize,
    per: PerParams,
    tree: Option<SumTree>,
}

impl ReplayBuffer {
    /// `capacity` is forced to 1 for [`ReplayStrategy::NoReplay`].
    pub fn new(strategy: ReplayStrategy, capacity: usize, per: PerParams) -> Self {
        assert!(capacity >= 1);
        let capacity = match strategy {
            ReplayStrategy::NoReplay => 1,
            _ => capacity,
        };
        let tree = match strategy {
            ReplayStrategy::Prioritized => Some(SumTree::new(capacity)),
            _ => None,
        };
        ReplayBuffer {
            strategy,
            capacity,
            slots: Vec::with_capacity(capacity.min(4096)),
            cursor: 0,
            per,
            tree,
        }
    }

    pub fn strategy(&self) -> ReplayStrategy {
        self.strategy
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.slots.get(index)
    }

    /// Raw (already exponentiated) priority of a slot; `None` for
    /// non-prioritized strategies.
    pub fn raw_priority(&self, index: usize) -> Option<f64> {
        self.tree.as_ref().map(|t| t.value(index))
    }

    /// Stores a transition, overwriting the oldest entry once full.
    pub fn push(&mut self, transition: Transition) {
        let index = self.cursor;
        if self.slots.len() < self.capacity {
            self.slots.push(transition);
        } else {
            self.slots[index] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;

        if let Some(tree) = self.tree.as_mut() {
            let max = tree.max_leaf();
            let priority = if max > 0.0 { max } else { 1.0 };
            tree.set(index, priority);
        }
    }

    /// Draws a batch of `n` transitions.
    ///
    /// Uniform: independent draws with replacement, unit weights. NoReplay:
    /// the single stored transition repeated. Prioritized: stratified
    /// proportional sampling (the total mass split into `n` equal segments,
    /// one point per segment) with weights `(1 / (size * P(i)))^beta`
    /// normalized by the batch maximum.
    pub fn sample<R: Rng>(&self, n: usize, beta: f64, rng: &mut R) -> Result<SampledBatch> {
        assert!(n >= 1);
        if self.slots.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        match self.strategy {
            ReplayStrategy::NoReplay => {
                let index = (self.cursor + self.capacity - 1) % self.capacity;
                Ok(SampledBatch {
                    transitions: vec![self.slots[index]; n],
                    indices: vec![index; n],
                    is_weights: vec![1.0; n],
                })
            }
            ReplayStrategy::Uniform => {
                let indices: Vec<usize> =
                    (0..n).map(|_| rng.gen_range(0..self.slots.len())).collect();
                Ok(SampledBatch {
                    transitions: indices.iter().map(|&i| self.slots[i]).collect(),
                    indices,
                    is_weights: vec![1.0; n],
                })
            }
            ReplayStrategy::Prioritized => {
                let tree = self.tree.as_ref().expect("prioritized buffer has a tree");
                let total = tree.total();
                debug_assert!(total > 0.0);
                let segment = total / n as f64;
                let mut indices = Vec::with_capacity(n);
                for k in 0..n {
                    let offset: f64 = rng.gen();
                    let point = (k as f64 + offset) * segment;
                    indices.push(tree.locate(point));
                }
                let size = self.slots.len() as f64;
                let mut weights: Vec<f64> = indices
                    .iter()
                    .map(|&i| {
                        let prob = tree.value(i) / total;
                        (1.0 / (size * prob)).powf(beta)
                    })
                    .collect();
                let max_w = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for w in &mut weights {
                    *w /= max_w;
                }
                Ok(SampledBatch {
                    transitions: indices.iter().map(|&i| self.slots[i]).collect(),
                    indices,
                    is_weights: weights,
                })
            }
        }
    }

    /// Reassigns priorities `(|td| + eps)^alpha` for the given slots.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        if self.strategy != ReplayStrategy::Prioritized {
            return Err(Error::NotPrioritized);
        }
        if indices.len() != td_errors.len() {
            return Err(Error::LengthMismatch("indices vs td_errors"));
        }
        let tree = self.tree.as_mut().expect("prioritized buffer has a tree");
        for (&index, &td) in indices.iter().zip(td_errors) {
            let priority = (td.abs() + self.per.epsilon).powf(self.per.exponent);
            tree.set(index, priority);
        }
        Ok(())
    }

    /// Direct access to the priority tree, for diagnostics.
    pub fn tree(&self) -> Option<&SumTree> {
        self.tree.as_ref()
    }
}

/// Linear annealing of the importance-sampling exponent from `beta0` at
/// step 0 up to 1 at `t_final`.
pub fn anneal_beta(beta0: f64, t: u64, t_final: u64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&beta0) && beta0 > 0.0);
    debug_assert!(t_final >= 1);
    let frac = t as f64 / t_final as f64;
    (beta0 + (1.0 - beta0) * frac).min(1.0)
}
