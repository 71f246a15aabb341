use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::Agent;
use crate::env::{DrivingEnv, RewardComponents, SemanticGrid, Termination, WorldState};
use crate::error::Result;
use crate::harness::MetricRow;
use crate::guidance::{arbitrate, Guide, GuidanceSource, GuidanceTrace, Schedule};
use crate::nn::Tensor;
use crate::replay::{ReplayBuffer, Transition};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Written into every metric row.
    pub run_id: String,
    pub seed: u64,
    /// Episode `e` resets the environment with `env_seed + e`.
    pub env_seed: u64,
    pub schedule: Schedule,
    /// Run learning updates; `false` is evaluation.
    pub learn: bool,
    /// Add exploration noise to the policy action.
    pub explore: bool,
    /// Episodes in this call; `None` uses the agent's episode cutoff.
    pub episodes: Option<u64>,
    /// Write metrics, guidance trace and checkpoints here.
    pub out_dir: Option<PathBuf>,
    pub checkpoint_every: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            seed: 0,
            env_seed: 0,
            schedule: Schedule::Continuous,
            learn: true,
            explore: true,
            episodes: None,
            out_dir: None,
            checkpoint_every: None,
        }
    }
}

impl TrainOptions {
    pub fn eval(env_seed: u64, episodes: u64) -> Self {
        Self {
            env_seed,
            schedule: Schedule::Never,
            learn: false,
            explore: false,
            episodes: Some(episodes),
            ..Self::default()
        }
    }
}

/// Per-episode metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Sum of unshaped step rewards.
    pub reward: f64,
    pub shaped_reward: f64,
    pub mean_step_reward: f64,
    pub steps: u64,
    pub guided_steps: u64,
    pub cause: Termination,
    pub mean_yaw_rate: f64,
    pub mean_lat_accel: f64,
    pub mean_critic_loss: Option<f64>,
    pub mean_omega: Option<f64>,
}

impl EpisodeRecord {
    pub fn success(&self) -> bool {
        self.cause == Termination::Success
    }
}

/// Everything one control tick did, for live observers.
#[derive(Clone, Debug)]
pub struct TickReport<'a> {
    pub episode: u64,
    pub step: u64,
    /// World the decision was made in.
    pub world: &'a WorldState,
    pub action: f64,
    pub guided: bool,
    pub reward: f64,
    pub components: RewardComponents,
    pub episode_reward: f64,
    pub cause: Termination,
}

pub enum Flow {
    Continue,
    Stop,
}

/// Callbacks into a running loop; the defaults do nothing.
pub trait RunHooks {
    fn on_tick(&mut self, _tick: &TickReport<'_>) -> Flow {
        Flow::Continue
    }

    fn on_episode(&mut self, _record: &EpisodeRecord) {}
}

pub struct NoHooks;

impl RunHooks for NoHooks {}

#[derive(Clone, Debug, Default)]
pub struct RunArtifact {
    pub records: Vec<EpisodeRecord>,
    pub metrics_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub wall_seconds: f64,
    pub stopped: bool,
}

fn state_tensor<T: Scalar>(g: &SemanticGrid) -> Result<Tensor<T>> {
    Tensor::new(vec![1, 1, g.rows, g.cols], g.values().into_iter().map(T::of).collect())
}

/// Runs episodes: guidance arbitration, environment step, replay push, a
/// critic update per step once the buffer holds a minibatch, and the delayed
/// actor update. Stops at the episode or global step cutoff.
pub fn train_run<T: Scalar, S: GuidanceSource>(
    agent: &mut Agent<T>,
    env: &mut DrivingEnv,
    guide: &mut Guide<S>,
    buffer: &mut ReplayBuffer,
    opts: &TrainOptions,
    hooks: &mut dyn RunHooks,
) -> Result<RunArtifact> {
    let started = Instant::now();
    let mut art = RunArtifact::default();
    let mut metrics = None;
    let mut trace = None;
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        let m = dir.join("metrics.csv");
        let mut w = BufWriter::new(File::create(&m)?);
        writeln!(w, "{}", MetricRow::HEADER)?;
        metrics = Some(w);
        art.metrics_path = Some(m);
        let t = dir.join("guidance.csv");
        trace = Some(GuidanceTrace::new(BufWriter::new(File::create(&t)?))?);
        art.trace_path = Some(t);
    }
    let episodes = opts.episodes.unwrap_or(agent.cfg.max_episodes);
    let batch_size = agent.cfg.batch_size;
    'episodes: for e in 0..episodes {
        if opts.learn && agent.step >= agent.cfg.max_steps {
            break;
        }
        let mut state = env.reset(opts.env_seed.wrapping_add(e))?;
        guide.begin_episode(env.world());
        let allowed = agent.variant.guided() && opts.schedule.allows(e);
        let mut rec = EpisodeRecord {
            episode: e,
            reward: 0.0,
            shaped_reward: 0.0,
            mean_step_reward: 0.0,
            steps: 0,
            guided_steps: 0,
            cause: Termination::None,
            mean_yaw_rate: 0.0,
            mean_lat_accel: 0.0,
            mean_critic_loss: None,
            mean_omega: None,
        };
        let (mut critic_sum, mut critic_n, mut omega_sum, mut omega_n) = (0.0, 0u64, 0.0, 0u64);
        loop {
            let s = state_tensor::<T>(&state)?;
            let a_drl = agent.select_action(&s, opts.explore)?;
            let event = guide.tick(rec.steps, env.world(), allowed);
            let engaged = event.as_ref().is_some_and(|ev| ev.engaged);
            let (action, flag) = arbitrate(a_drl, event.as_ref(), engaged);
            let decided_in = env.world().clone();
            let out = env.step(action)?;
            if let (Some(t), Some(ev)) = (trace.as_mut(), event.as_ref()) {
                t.record(e, ev, action)?;
            }
            rec.steps += 1;
            rec.guided_steps += u64::from(flag);
            rec.reward += out.reward;
            rec.shaped_reward += out.shaped_reward();
            let (yaw, lat) = env.world().dynamics_metrics();
            rec.mean_yaw_rate += yaw;
            rec.mean_lat_accel += lat;
            if opts.learn {
                buffer.push(Transition::new(&state, action, out.shaped_reward(), out.terminal(), &out.next_state, flag))?;
                agent.step += 1;
                if buffer.len() >= batch_size {
                    let batch = buffer.sample_batch::<T, _>(batch_size, agent.rng())?;
                    let stats = agent.learn(&batch)?;
                    critic_sum += 0.5 * (stats.critic_loss.0 + stats.critic_loss.1);
                    critic_n += 1;
                    if let Some(w) = stats.omega {
                        omega_sum += w;
                        omega_n += 1;
                    }
                }
            }
            let flow = hooks.on_tick(&TickReport {
                episode: e,
                step: rec.steps - 1,
                world: &decided_in,
                action,
                guided: flag,
                reward: out.reward,
                components: out.components.clone(),
                episode_reward: rec.reward,
                cause: out.cause,
            });
            if matches!(flow, Flow::Stop) {
                art.stopped = true;
                break 'episodes;
            }
            if out.terminal() {
                rec.cause = out.cause;
                break;
            }
            // The step budget can end an episode early; its cause stays `none`.
            if opts.learn && agent.step >= agent.cfg.max_steps {
                break;
            }
            state = out.next_state;
        }
        let n = rec.steps as f64;
        rec.mean_step_reward = rec.reward / n;
        rec.mean_yaw_rate /= n;
        rec.mean_lat_accel /= n;
        rec.mean_critic_loss = (critic_n > 0).then(|| critic_sum / critic_n as f64);
        rec.mean_omega = (omega_n > 0).then(|| omega_sum / omega_n as f64);
        if opts.learn {
            agent.episode += 1;
        }
        if let Some(w) = metrics.as_mut() {
            writeln!(w, "{}", MetricRow::new(&opts.run_id, opts.seed, rec.clone()).csv_row())?;
        }
        if let (Some(dir), Some(every)) = (&opts.out_dir, opts.checkpoint_every) {
            if every > 0 && (e + 1) % every == 0 {
                let path = dir.join("checkpoints").join(format!("episode-{:04}", e + 1));
                agent.save(&path)?;
                art.checkpoints.push(path);
            }
        }
        hooks.on_episode(&rec);
        art.records.push(rec);
    }
    if let Some(mut w) = metrics {
        w.flush()?;
    }
    if let Some(t) = trace {
        t.into_inner().flush()?;
    }
    art.wall_seconds = started.elapsed().as_secs_f64();
    Ok(art)
}
