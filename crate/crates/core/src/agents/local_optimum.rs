//! One-step task with two reward peaks, used to show how guided fine-tuning
//! escapes the basin a pretrained actor sits in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig, Variant};
use crate::env::SemanticGrid;
use crate::error::{Error, Result};
use crate::imitation::{DemoDataset, Provenance};
use crate::nn::{Head, NetworkSpec, Tensor};
use crate::replay::{ReplayBuffer, Transition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BimodalTask {
    pub inferior: f64,
    pub superior: f64,
    pub inferior_height: f64,
    pub superior_height: f64,
    pub width: f64,
}

impl Default for BimodalTask {
    fn default() -> Self {
        Self { inferior: 0.25, superior: 0.75, inferior_height: 1.0, superior_height: 4.0, width: 0.15 }
    }
}

impl BimodalTask {
    pub fn reward(&self, a: f64) -> f64 {
        let bump = |c: f64, h: f64| h * (-((a - c) / self.width).powi(2)).exp();
        bump(self.inferior, self.inferior_height) + bump(self.superior, self.superior_height)
    }

    /// Actions past the valley between the peaks belong to the superior basin.
    pub fn in_superior_basin(&self, a: f64) -> bool {
        (a - self.superior).abs() < (a - self.inferior).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalOptimumConfig {
    pub task: BimodalTask,
    pub agent: AgentConfig,
    /// Critic-only steps on uniformly random actions, mapping both peaks and the valley.
    pub warmup_steps: u64,
    pub finetune_steps: u64,
    /// Guidance is available during the first this many fine-tuning steps.
    pub guided_steps: u64,
    /// Chance the human takes over on a step inside the guidance window.
    pub takeover_prob: f64,
    pub human_sd: f64,
    /// One-step trials grouped into an episode for the guidance-weight decay.
    pub steps_per_episode: u64,
}

impl Default for LocalOptimumConfig {
    fn default() -> Self {
        Self {
            task: BimodalTask::default(),
            agent: AgentConfig {
                actor_lr: 1e-3,
                critic_lr: 1e-3,
                batch_size: 64,
                max_steps: 3000,
                replay_capacity: 10_000,
                ..AgentConfig::default()
            },
            warmup_steps: 2000,
            finetune_steps: 1000,
            guided_steps: 600,
            takeover_prob: 0.8,
            human_sd: 0.03,
            steps_per_episode: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalOptimumOutcome {
    pub pretrained_action: f64,
    pub final_action: f64,
    pub superior: bool,
}

const STATE: [u8; 1] = [1];

fn state() -> SemanticGrid {
    SemanticGrid { rows: 1, cols: 1, codes: STATE.to_vec() }
}

/// Actor pretrained onto the inferior peak, critics fitted to random actions
/// while the actor stays put. Shared by every variant so they fine-tune the same agent.
pub fn pretrained_agent(cfg: &LocalOptimumConfig, seed: u64) -> Result<Agent<f64>> {
    let actor = NetworkSpec::mlp(1, vec![16], 1, Head::Logistic);
    let critic = NetworkSpec { extra_inputs: 1, ..NetworkSpec::mlp(1, vec![32, 32], 1, Head::Linear) };
    let mut agent = Agent::from_specs(Variant::Vanilla, cfg.agent.clone(), actor, critic, seed)?;
    let mut demos = DemoDataset::new(1, 1);
    demos.push(&state(), cfg.task.inferior, Provenance::VanillaDemo)?;
    agent.pretrain_actor(&demos, 500, 1e-2, 1)?;
    let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity, 1, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11);
    let s = state();
    for _ in 0..cfg.warmup_steps {
        let a = rng.random::<f64>();
        buffer.push(Transition::new(&s, a, cfg.task.reward(a), true, &s, false))?;
        if buffer.len() >= cfg.agent.batch_size {
            let batch = buffer.sample_batch(cfg.agent.batch_size, &mut rng)?;
            agent.critic_update(&batch)?;
        }
    }
    agent.critic1_target.copy_from(&agent.critic1)?;
    agent.critic2_target.copy_from(&agent.critic2)?;
    Ok(agent)
}

/// One trial; `forced` replaces the policy action and says whether to flag it.
fn step(agent: &mut Agent<f64>, buffer: &mut ReplayBuffer, cfg: &LocalOptimumConfig, forced: Option<(f64, bool)>) -> Result<()> {
    let s = state();
    let x = Tensor::new(vec![1, 1, 1, 1], s.values())?;
    let a_drl = agent.select_action(&x, true)?;
    let (a, flag) = forced.unwrap_or((a_drl, false));
    buffer.push(Transition::new(&s, a, cfg.task.reward(a), true, &s, flag))?;
    agent.step += 1;
    if buffer.len() >= cfg.agent.batch_size {
        let batch = buffer.sample_batch(cfg.agent.batch_size, agent.rng())?;
        agent.learn(&batch)?;
    }
    Ok(())
}

/// Fine-tunes the pretrained agent as `variant` with a human who steers to the superior peak.
pub fn local_optimum_run(variant: Variant, cfg: &LocalOptimumConfig, seed: u64) -> Result<LocalOptimumOutcome> {
    if !(0.0..=1.0).contains(&cfg.takeover_prob) {
        return Err(Error::Config("takeover probability must lie in [0, 1]".into()));
    }
    let mut agent = pretrained_agent(cfg, seed)?;
    let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity, 1, 1)?;
    let x = Tensor::new(vec![1, 1, 1, 1], state().values())?;
    let pretrained_action = agent.policy(&x)?;
    agent.variant = variant;
    agent.episode = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let hand = Normal::new(0.0, cfg.human_sd).map_err(|e| Error::Config(e.to_string()))?;
    for t in 0..cfg.finetune_steps {
        agent.episode = t / cfg.steps_per_episode.max(1);
        let takeover = variant.guided() && t < cfg.guided_steps && rng.random::<f64>() < cfg.takeover_prob;
        let human = takeover.then(|| ((cfg.task.superior + hand.sample(&mut rng)).clamp(0.0, 1.0), true));
        step(&mut agent, &mut buffer, cfg, human)?;
    }
    let final_action = agent.policy(&x)?;
    Ok(LocalOptimumOutcome { pretrained_action, final_action, superior: cfg.task.in_superior_basin(final_action) })
}
