//! TD3 actor-critic with the human-guidance variants.
//!
//! All four variants share critic learning; they differ only in the actor
//! gradient:
//!
//! | variant | policy-gradient term | imitation term on guided rows |
//! |---------|----------------------|-------------------------------|
//! | `Hug`     | every row          | adaptive weight `ω_I`          |
//! | `IaRl`    | unguided rows only | fixed weight                   |
//! | `HiRl`    | every row          | none                           |
//! | `Vanilla` | every row          | none                           |

pub mod local_optimum;
mod train;

use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::GridSpec;
use crate::error::{Error, Result};
use crate::imitation::{regress, DemoDataset};
use crate::nn::{Adam, Head, InputShape, Network, NetworkSpec, Tensor, Want};
use crate::replay::Batch;
use crate::scalar::Scalar;

pub use train::{train_run, EpisodeRecord, Flow, NoHooks, RunArtifact, RunHooks, TickReport, TrainOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Hug,
    IaRl,
    HiRl,
    Vanilla,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Hug, Variant::IaRl, Variant::HiRl, Variant::Vanilla];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hug => "hug",
            Variant::IaRl => "iarl",
            Variant::HiRl => "hirl",
            Variant::Vanilla => "vanilla",
        }
    }

    /// Whether the variant takes guidance at all.
    pub fn guided(self) -> bool {
        self != Variant::Vanilla
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}; expected hug, iarl, hirl or vanilla")))
    }
}

/// Conv tower and dense widths shared by actor, critics and imitation nets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub conv_features: Vec<usize>,
    pub kernel: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl Layout {
    pub fn full() -> Self {
        Self {
            conv_features: vec![6, 16],
            kernel: 6,
            actor_hidden: vec![256, 128, 64],
            critic_hidden: vec![256, 256, 256],
        }
    }

    pub fn compact() -> Self {
        Self { conv_features: vec![4, 8], kernel: 3, actor_hidden: vec![64, 32], critic_hidden: vec![64, 64] }
    }

    fn input(grid: &GridSpec) -> InputShape {
        InputShape { channels: 1, height: grid.rows, width: grid.cols }
    }

    pub fn actor_spec(&self, grid: &GridSpec) -> NetworkSpec {
        NetworkSpec {
            input: Self::input(grid),
            conv_features: self.conv_features.clone(),
            kernel: self.kernel,
            extra_inputs: 0,
            hidden: self.actor_hidden.clone(),
            outputs: 1,
            head: Head::Logistic,
        }
    }

    pub fn critic_spec(&self, grid: &GridSpec) -> NetworkSpec {
        NetworkSpec {
            input: Self::input(grid),
            conv_features: self.conv_features.clone(),
            kernel: self.kernel,
            extra_inputs: 1,
            hidden: self.critic_hidden.clone(),
            outputs: 1,
            head: Head::Linear,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: u64,
    /// Exploration noise standard deviation, action units.
    pub sigma: f64,
    /// Clip `c` on the injected noise.
    pub noise_clip: f64,
    /// Noise multiplier at the first and last step of the run.
    pub noise_start: f64,
    pub noise_end: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    /// Per-episode decay base `λ` of the adaptive guidance weight.
    pub lambda: f64,
    /// Imitation weight of the intervention-aided baseline.
    pub omega_fixed: f64,
    /// Exponents in the guidance weight are capped here to keep it finite.
    pub omega_exponent_cap: f64,
    pub max_steps: u64,
    pub max_episodes: u64,
    pub replay_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.001,
            policy_delay: 2,
            sigma: 0.2,
            noise_clip: 0.1,
            noise_start: 1.0,
            noise_end: 0.01,
            actor_lr: 5e-4,
            critic_lr: 2e-4,
            batch_size: 128,
            lambda: 0.995,
            omega_fixed: 1.0,
            omega_exponent_cap: 50.0,
            max_steps: 50_000,
            max_episodes: 500,
            replay_capacity: 384_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda must lie in (0, 1)");
        }
        if self.policy_delay == 0 {
            return bad("policy delay must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("replay must hold at least one minibatch");
        }
        if self.sigma < 0.0 || self.noise_clip < 0.0 || self.omega_fixed < 0.0 {
            return bad("noise and weights must be non-negative");
        }
        Ok(())
    }
}

/// Losses and diagnostics of one learning step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: (f64, f64),
    pub actor_loss: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Agent<T> {
    pub variant: Variant,
    pub cfg: AgentConfig,
    pub actor: Network<T>,
    pub critic1: Network<T>,
    pub critic2: Network<T>,
    pub actor_target: Network<T>,
    pub critic1_target: Network<T>,
    pub critic2_target: Network<T>,
    pub actor_adam: Adam<T>,
    pub critic1_adam: Adam<T>,
    pub critic2_adam: Adam<T>,
    /// Environment steps taken so far; drives noise annealing.
    pub step: u64,
    /// Episode index `k` of the guidance-weight decay.
    pub episode: u64,
    pub critic_updates: u64,
    rng: ChaCha8Rng,
}

fn seed_of(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt
}

impl<T: Scalar> Agent<T> {
    pub fn new(variant: Variant, cfg: AgentConfig, layout: &Layout, grid: &GridSpec, seed: u64) -> Result<Self> {
        Self::from_specs(variant, cfg, layout.actor_spec(grid), layout.critic_spec(grid), seed)
    }

    pub fn from_specs(variant: Variant, cfg: AgentConfig, actor: NetworkSpec, critic: NetworkSpec, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if actor.outputs != 1 || critic.outputs != 1 || critic.extra_inputs != 1 || actor.input != critic.input {
            return Err(Error::Config("actor must map a state to one action and critics take (state, action)".into()));
        }
        let actor = Network::he_init(actor, seed_of(seed, 1))?;
        let critic1 = Network::he_init(critic.clone(), seed_of(seed, 2))?;
        let critic2 = Network::he_init(critic, seed_of(seed, 3))?;
        Ok(Self {
            variant,
            cfg,
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor_adam: Adam::new(&actor),
            critic1_adam: Adam::new(&critic1),
            critic2_adam: Adam::new(&critic2),
            actor,
            critic1,
            critic2,
            step: 0,
            episode: 0,
            critic_updates: 0,
            rng: ChaCha8Rng::seed_from_u64(seed_of(seed, 4)),
        })
    }

    /// Current exploration standard deviation, annealed linearly over `max_steps`.
    pub fn noise_std(&self) -> f64 {
        let frac = (self.step as f64 / self.cfg.max_steps.max(1) as f64).min(1.0);
        self.cfg.sigma * (self.cfg.noise_start + (self.cfg.noise_end - self.cfg.noise_start) * frac)
    }

    /// `μ(s)` for a single state `[1, 1, rows, cols]` (or flat row).
    pub fn policy(&self, state: &Tensor<T>) -> Result<f64> {
        Ok(self.actor.predict(state, None)?.data()[0].as_f64())
    }

    /// `clip(μ(s) + clip(ε, −c, c), 0, 1)`; `explore = false` returns `μ(s)`.
    pub fn select_action(&mut self, state: &Tensor<T>, explore: bool) -> Result<f64> {
        let mu = self.policy(state)?;
        if !explore {
            return Ok(mu);
        }
        let std = self.noise_std();
        let eps = if std > 0.0 {
            Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?.sample(&mut self.rng)
        } else {
            0.0
        };
        Ok(perturb(mu, eps, self.cfg.noise_clip))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn column(values: &[T]) -> Result<Tensor<T>> {
        Tensor::new(vec![values.len(), 1], values.to_vec())
    }

    /// `y_i = r_i + γ(1 − d_i) min_j Q'_j(s'_i, μ'(s'_i))`.
    pub fn critic_target(&self, batch: &Batch<T>) -> Result<Vec<T>> {
        let next_mu = self.actor_target.predict(&batch.next_states, None)?;
        let q1 = self.critic1_target.predict(&batch.next_states, Some(&next_mu))?;
        let q2 = self.critic2_target.predict(&batch.next_states, Some(&next_mu))?;
        let gamma = T::of(self.cfg.gamma);
        Ok((0..batch.len())
            .map(|i| {
                let q = q1.data()[i].min(q2.data()[i]);
                batch.rewards[i] + gamma * (T::one() - batch.dones[i]) * q
            })
            .collect())
    }

    /// One Adam step on each critic towards the shared target; returns both MSE losses.
    pub fn critic_update(&mut self, batch: &Batch<T>) -> Result<(f64, f64)> {
        let y = self.critic_target(batch)?;
        let actions = Self::column(&batch.actions)?;
        let lr = self.cfg.critic_lr;
        let l1 = critic_step(&mut self.critic1, &mut self.critic1_adam, batch, &actions, &y, lr)?;
        let l2 = critic_step(&mut self.critic2, &mut self.critic2_adam, batch, &actions, &y, lr)?;
        self.critic_updates += 1;
        Ok((l1, l2))
    }

    /// `λ^k (max(sup_{I=1} exp(Q1(s,a) − Q1(s,μ(s))), 1) − 1)`, 0 without guided rows.
    pub fn compute_omega(&self, batch: &Batch<T>) -> Result<f64> {
        let rows: Vec<usize> = (0..batch.len()).filter(|&i| batch.flags[i]).collect();
        if rows.is_empty() {
            return Ok(0.0);
        }
        let states = select_rows(&batch.states, &rows)?;
        let actions = Self::column(&rows.iter().map(|&i| batch.actions[i]).collect::<Vec<_>>())?;
        let mu = self.actor.predict(&states, None)?;
        let q_human = self.critic1.predict(&states, Some(&actions))?;
        let q_policy = self.critic1.predict(&states, Some(&mu))?;
        let advantages: Vec<f64> =
            q_human.data().iter().zip(q_policy.data()).map(|(h, p)| (*h - *p).as_f64()).collect();
        Ok(omega_from_advantages(&advantages, self.cfg.lambda, self.episode, self.cfg.omega_exponent_cap))
    }

    /// Guidance weight and Q-term masking for this variant on `batch`.
    pub fn actor_weights(&self, batch: &Batch<T>) -> Result<(f64, bool)> {
        Ok(match self.variant {
            Variant::Hug => (self.compute_omega(batch)?, false),
            Variant::IaRl => (self.cfg.omega_fixed, true),
            Variant::HiRl | Variant::Vanilla => (0.0, false),
        })
    }

    /// Actor loss and its parameter gradient for weight `omega`. Rows with
    /// `I = 1` add `ω (μ(s) − a)²`; `mask_guided` drops their `−Q1(s, μ(s))` term.
    pub fn actor_gradient(&self, batch: &Batch<T>, omega: f64, mask_guided: bool) -> Result<(f64, Vec<Tensor<T>>)> {
        let n = batch.len();
        let (mu, tape) = self.actor.forward(&batch.states, None)?;
        let (q, q_tape) = self.critic1.forward(&batch.states, Some(&mu))?;
        let dq = self
            .critic1
            .backward_with(&q_tape, &Tensor::filled(vec![n, 1], T::one()), Want::EXTRA)?
            .extra
            .expect("critic has an action input");
        let inv_n = T::one() / T::of(n as f64);
        let two_omega = T::of(2.0 * omega);
        let mut upstream = Vec::with_capacity(n);
        let mut loss = T::zero();
        for i in 0..n {
            let guided = batch.flags[i];
            let mut g = T::zero();
            if !(mask_guided && guided) {
                g = -dq.data()[i];
                loss -= q.data()[i];
            }
            if guided && omega != 0.0 {
                let diff = mu.data()[i] - batch.actions[i];
                g += two_omega * diff;
                loss += T::of(omega) * diff * diff;
            }
            upstream.push(g * inv_n);
        }
        let grads = self.actor.backward_with(&tape, &Self::column(&upstream)?, Want::PARAMS)?;
        let loss = (loss * inv_n).as_f64();
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("actor loss {loss}")));
        }
        Ok((loss, grads.params))
    }

    /// The loss [`Agent::actor_gradient`] differentiates, by forward passes only.
    pub fn actor_loss(&self, batch: &Batch<T>, omega: f64, mask_guided: bool) -> Result<f64> {
        let mu = self.actor.predict(&batch.states, None)?;
        let q = self.critic1.predict(&batch.states, Some(&mu))?;
        let mut loss = 0.0;
        for i in 0..batch.len() {
            let guided = batch.flags[i];
            if !(mask_guided && guided) {
                loss -= q.data()[i].as_f64();
            }
            if guided && omega != 0.0 {
                loss += omega * (mu.data()[i] - batch.actions[i]).as_f64().powi(2);
            }
        }
        Ok(loss / batch.len() as f64)
    }

    /// One Adam step on the actor with the variant's gradient. Returns `(loss, ω)`.
    pub fn actor_update(&mut self, batch: &Batch<T>) -> Result<(f64, f64)> {
        let (omega, mask_guided) = self.actor_weights(batch)?;
        let (loss, grads) = self.actor_gradient(batch, omega, mask_guided)?;
        self.actor_adam.step(&mut self.actor, &grads, self.cfg.actor_lr)?;
        Ok((loss, omega))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.cfg.tau;
        self.actor_target.polyak_update(&self.actor, tau)?;
        self.critic1_target.polyak_update(&self.critic1, tau)?;
        self.critic2_target.polyak_update(&self.critic2, tau)
    }

    /// Critic step, plus actor and target updates every `policy_delay` critic steps.
    pub fn learn(&mut self, batch: &Batch<T>) -> Result<UpdateStats> {
        let critic_loss = self.critic_update(batch)?;
        let mut stats = UpdateStats { critic_loss, ..Default::default() };
        if self.critic_updates % self.cfg.policy_delay == 0 {
            let (loss, omega) = self.actor_update(batch)?;
            self.soft_update_targets()?;
            stats.actor_loss = Some(loss);
            stats.omega = (self.variant == Variant::Hug).then_some(omega);
        }
        Ok(stats)
    }

    /// Supervised regression of the actor onto demonstrations; targets are re-synced afterwards.
    pub fn pretrain_actor(&mut self, demos: &DemoDataset, epochs: usize, lr: f64, batch_size: usize) -> Result<f64> {
        if demos.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if epochs == 0 {
            return Ok(f64::NAN);
        }
        let mut adam = Adam::new(&self.actor);
        let loss = regress(&mut self.actor, &mut adam, demos, epochs, lr, batch_size, &mut self.rng)?;
        self.actor_target.copy_from(&self.actor)?;
        Ok(loss)
    }

    /// Writes the six networks into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, net) in self.networks() {
            net.save(&dir.join(format!("{name}.json")))?;
        }
        Ok(())
    }

    /// Restores networks written by [`Agent::save`]; optimizer state starts fresh.
    pub fn load(&mut self, dir: &Path) -> Result<()> {
        let actor_spec = self.actor.spec().clone();
        let critic_spec = self.critic1.spec().clone();
        self.actor = Network::load(&dir.join("actor.json"), &actor_spec)?;
        self.actor_target = Network::load(&dir.join("actor_target.json"), &actor_spec)?;
        self.critic1 = Network::load(&dir.join("critic1.json"), &critic_spec)?;
        self.critic2 = Network::load(&dir.join("critic2.json"), &critic_spec)?;
        self.critic1_target = Network::load(&dir.join("critic1_target.json"), &critic_spec)?;
        self.critic2_target = Network::load(&dir.join("critic2_target.json"), &critic_spec)?;
        self.actor_adam = Adam::new(&self.actor);
        self.critic1_adam = Adam::new(&self.critic1);
        self.critic2_adam = Adam::new(&self.critic2);
        Ok(())
    }

    pub fn networks(&self) -> [(&'static str, &Network<T>); 6] {
        [
            ("actor", &self.actor),
            ("critic1", &self.critic1),
            ("critic2", &self.critic2),
            ("actor_target", &self.actor_target),
            ("critic1_target", &self.critic1_target),
            ("critic2_target", &self.critic2_target),
        ]
    }

    /// Largest parameter difference across all six networks.
    pub fn max_param_diff(&self, other: &Self) -> f64 {
        self.networks()
            .iter()
            .zip(other.networks().iter())
            .map(|((_, a), (_, b))| a.max_param_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `clip(μ + clip(ε, −c, c), 0, 1)`.
pub fn perturb(mu: f64, eps: f64, clip: f64) -> f64 {
    (mu + eps.clamp(-clip, clip)).clamp(0.0, 1.0)
}

/// Guidance weight from per-row advantages `Q1(s,a) − Q1(s,μ(s))` of guided rows.
pub fn omega_from_advantages(advantages: &[f64], lambda: f64, episode: u64, exponent_cap: f64) -> f64 {
    if advantages.is_empty() {
        return 0.0;
    }
    let sup = advantages.iter().map(|a| a.min(exponent_cap).exp()).fold(f64::NEG_INFINITY, f64::max);
    lambda.powf(episode as f64) * (sup.max(1.0) - 1.0)
}

fn critic_step<T: Scalar>(
    net: &mut Network<T>,
    adam: &mut Adam<T>,
    batch: &Batch<T>,
    actions: &Tensor<T>,
    y: &[T],
    lr: f64,
) -> Result<f64> {
    let n = batch.len();
    let (q, tape) = net.forward(&batch.states, Some(actions))?;
    let scale = T::of(2.0 / n as f64);
    let mut loss = T::zero();
    let mut upstream = Vec::with_capacity(n);
    for (qi, yi) in q.data().iter().zip(y) {
        let d = *qi - *yi;
        loss += d * d;
        upstream.push(scale * d);
    }
    let loss = loss.as_f64() / n as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("critic loss {loss}")));
    }
    let grads = net.backward_with(&tape, &Tensor::new(vec![n, 1], upstream)?, Want::PARAMS)?;
    adam.step(net, &grads.params, lr)?;
    Ok(loss)
}

fn select_rows<T: Scalar>(t: &Tensor<T>, rows: &[usize]) -> Result<Tensor<T>> {
    let mut shape = t.shape().to_vec();
    shape[0] = rows.len();
    let mut data = Vec::with_capacity(rows.len() * t.row_len());
    for &r in rows {
        data.extend_from_slice(t.row(r));
    }
    Tensor::new(shape, data)
}
