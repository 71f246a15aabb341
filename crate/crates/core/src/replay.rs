//! Ring-buffer experience storage with uniform minibatch sampling.
//!
//! Grids are kept as 8-bit category codes and decoded on sampling.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{SemanticGrid, PALETTE};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_framed, write_framed};
use crate::nn::Tensor;
use crate::scalar::Scalar;

pub const REPLAY_FORMAT: &str = "hugdrl.replay";

/// One stored step. `action` is the executed action, so a guided step
/// stores the human's action and `intervention` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<u8>,
    pub action: f64,
    pub reward: f64,
    pub done: bool,
    pub next_state: Vec<u8>,
    pub intervention: bool,
}

impl Transition {
    pub fn new(state: &SemanticGrid, action: f64, reward: f64, done: bool, next: &SemanticGrid, intervention: bool) -> Self {
        Self {
            state: state.codes.clone(),
            action,
            reward,
            done,
            next_state: next.codes.clone(),
            intervention,
        }
    }
}

/// A decoded minibatch. Grids are `[n, 1, rows, cols]`.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub states: Tensor<T>,
    pub actions: Vec<T>,
    pub rewards: Vec<T>,
    pub dones: Vec<T>,
    pub next_states: Tensor<T>,
    pub flags: Vec<bool>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn from_transitions(rows: usize, cols: usize, items: &[&Transition]) -> Result<Self> {
        let n = items.len();
        let decode = |codes: &[u8], out: &mut Vec<T>| out.extend(codes.iter().map(|&c| T::of(PALETTE[c as usize])));
        let mut s = Vec::with_capacity(n * rows * cols);
        let mut s2 = Vec::with_capacity(n * rows * cols);
        for t in items {
            decode(&t.state, &mut s);
            decode(&t.next_state, &mut s2);
        }
        Ok(Self {
            states: Tensor::new(vec![n, 1, rows, cols], s)?,
            actions: items.iter().map(|t| T::of(t.action)).collect(),
            rewards: items.iter().map(|t| T::of(t.reward)).collect(),
            dones: items.iter().map(|t| if t.done { T::one() } else { T::zero() }).collect(),
            next_states: Tensor::new(vec![n, 1, rows, cols], s2)?,
            flags: items.iter().map(|t| t.intervention).collect(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    rows: usize,
    cols: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, rows: usize, cols: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, rows, cols, items: Vec::new(), cursor: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Stored transition `i`, oldest first.
    pub fn get(&self, i: usize) -> Option<&Transition> {
        if i >= self.items.len() {
            return None;
        }
        let start = if self.items.len() == self.capacity { self.cursor } else { 0 };
        self.items.get((start + i) % self.capacity)
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        let cells = self.rows * self.cols;
        if t.state.len() != cells || t.next_state.len() != cells {
            return Err(Error::Shape(format!("transition grids must have {cells} cells")));
        }
        if !(0.0..=1.0).contains(&t.action) {
            return Err(Error::Config(format!("stored action {} outside [0, 1]", t.action)));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// `n` uniform draws with replacement, as storage indices.
    pub fn sample_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < n || n == 0 {
            return Err(Error::InsufficientData { have: self.items.len(), need: n.max(1) });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self.sample_indices(n, rng)?.into_iter().map(|i| self.items[i].clone()).collect())
    }

    pub fn sample_batch<T: Scalar, R: Rng>(&self, n: usize, rng: &mut R) -> Result<Batch<T>> {
        let idx = self.sample_indices(n, rng)?;
        let items: Vec<&Transition> = idx.iter().map(|&i| &self.items[i]).collect();
        Batch::from_transitions(self.rows, self.cols, &items)
    }

    pub fn flagged(&self) -> usize {
        self.items.iter().filter(|t| t.intervention).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = ReplayBody {
            capacity: self.capacity,
            rows: self.rows,
            cols: self.cols,
            cursor: self.cursor,
            items: self
                .items
                .iter()
                .map(|t| StoredTransition {
                    state: hex::encode(&t.state),
                    action: t.action,
                    reward: t.reward,
                    done: t.done,
                    next_state: hex::encode(&t.next_state),
                    intervention: t.intervention,
                })
                .collect(),
        };
        write_framed(path, REPLAY_FORMAT, &body)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body: ReplayBody = read_framed(path, REPLAY_FORMAT)?;
        let bad = |reason: String| Error::Checkpoint { path: path.to_path_buf(), reason };
        if body.items.len() > body.capacity || body.cursor >= body.capacity.max(1) {
            return Err(bad("inconsistent ring state".into()));
        }
        let mut items = Vec::with_capacity(body.items.len());
        for s in body.items {
            let decode = |h: &str| hex::decode(h).map_err(|e| bad(e.to_string()));
            items.push(Transition {
                state: decode(&s.state)?,
                action: s.action,
                reward: s.reward,
                done: s.done,
                next_state: decode(&s.next_state)?,
                intervention: s.intervention,
            });
        }
        Ok(Self { capacity: body.capacity, rows: body.rows, cols: body.cols, items, cursor: body.cursor })
    }
}

#[derive(Serialize, Deserialize)]
struct StoredTransition {
    state: String,
    action: f64,
    reward: f64,
    done: bool,
    next_state: String,
    intervention: bool,
}

#[derive(Serialize, Deserialize)]
struct ReplayBody {
    capacity: usize,
    rows: usize,
    cols: usize,
    cursor: usize,
    items: Vec<StoredTransition>,
}
