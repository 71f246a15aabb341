//! Experiment orchestration: run configuration, seeded training and imitation
//! runs, metric files, manifests, evaluation and summaries.

mod evaluate;
mod experiment;
mod summary;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{train_run, Agent, AgentConfig, EpisodeRecord, Layout, RunArtifact, RunHooks, TrainOptions, Variant};
use crate::env::{DrivingEnv, EnvConfig, GridSpec, ScenarioSpec, ShapingScheme, Termination};
use crate::error::{Error, Result};
use crate::guidance::{DetectorConfig, Guide, GuidanceSource, NoGuidance, Oracle, OracleConfig, Proficiency, Schedule};
use crate::imitation::{collect_demos, dagger_train, train_il, DaggerReport, DemoDataset, ImitationConfig};
use crate::nn::Network;
use crate::replay::ReplayBuffer;

pub use evaluate::{evaluate_policy, load_policy, ActorPolicy, ConstantPolicy, EvalConfig, EvalReport, Policy, ScenarioEval};
pub use experiment::{run_experiment, CellResult, ExperimentId, ExperimentSpec, PolicyKind, FINE_TUNE_EPISODES, FINE_TUNE_GUIDED};
pub use summary::{cell_of, episodes_to_threshold, median, summarize, summarize_files, CellStats, MeanSd, RunSummary, Summary};

/// Independent streams drawn from one run seed.
pub mod stream {
    pub const AGENT: u64 = 1;
    pub const ENV: u64 = 2;
    pub const ORACLE: u64 = 3;
    pub const SCHEDULE: u64 = 4;
    pub const DEMOS: u64 = 5;
    pub const IMITATION: u64 = 6;
}

/// SplitMix64 of `seed` offset by `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One metric-file row: an episode of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub seed: u64,
    pub record: EpisodeRecord,
}

impl MetricRow {
    pub const HEADER: &'static str = "run_id,seed,episode,reward,mean_step_reward,steps,guided_steps,success,cause,mean_yaw_rate,mean_lat_accel,shaped_reward,critic_loss,omega";

    pub fn new(run_id: &str, seed: u64, record: EpisodeRecord) -> Self {
        Self { run_id: run_id.to_string(), seed, record }
    }

    pub fn csv_row(&self) -> String {
        let r = &self.record;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:?}"));
        format!(
            "{},{},{},{:?},{:?},{},{},{},{},{:?},{:?},{:?},{},{}",
            self.run_id,
            self.seed,
            r.episode,
            r.reward,
            r.mean_step_reward,
            r.steps,
            r.guided_steps,
            u8::from(r.success()),
            r.cause.as_str(),
            r.mean_yaw_rate,
            r.mean_lat_accel,
            r.shaped_reward,
            opt(r.mean_critic_loss),
            opt(r.mean_omega),
        )
    }

    /// Parses one data line, checking the row invariants.
    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(format!("expected 14 fields, found {}", f.len()));
        }
        fn num<T: FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("bad {what} {s:?}"))
        }
        let opt = |s: &str, what: &str| if s.is_empty() { Ok(None) } else { num::<f64>(s, what).map(Some) };
        let cause = Termination::from_str(f[8]).map_err(|e| e.to_string())?;
        let success = match f[7] {
            "0" => false,
            "1" => true,
            s => return Err(format!("bad success flag {s:?}")),
        };
        let record = EpisodeRecord {
            episode: num(f[2], "episode")?,
            reward: num(f[3], "reward")?,
            mean_step_reward: num(f[4], "mean step reward")?,
            steps: num(f[5], "steps")?,
            guided_steps: num(f[6], "guided steps")?,
            cause,
            mean_yaw_rate: num(f[9], "yaw rate")?,
            mean_lat_accel: num(f[10], "lateral acceleration")?,
            shaped_reward: num(f[11], "shaped reward")?,
            mean_critic_loss: opt(f[12], "critic loss")?,
            mean_omega: opt(f[13], "omega")?,
        };
        if record.steps == 0 {
            return Err("episode length must be at least 1".into());
        }
        if success != record.success() {
            return Err(format!("success flag {} disagrees with cause {}", u8::from(success), f[8]));
        }
        if record.guided_steps > record.steps {
            return Err("more guided steps than steps".into());
        }
        Ok(Self { run_id: f[0].to_string(), seed: num(f[1], "seed")?, record })
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let fail = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    let header = lines.next().transpose()?;
    if header.as_deref() != Some(MetricRow::HEADER) {
        return Err(fail("missing metric header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        rows.push(MetricRow::parse(&line).map_err(|e| fail(format!("line {}: {e}", i + 2)))?);
    }
    Ok(rows)
}

/// Named starting points for [`RunConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full grid and networks, 500 episodes.
    Paper,
    /// Reduced grid and compact networks for a desktop CPU.
    Desk,
    /// Smallest grid and networks, short runs; used by the acceptance suite.
    Ci,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
            Profile::Ci => "ci",
        }
    }

    pub fn config(self) -> RunConfig {
        let base = RunConfig::default();
        match self {
            Profile::Paper => base,
            Profile::Desk => RunConfig {
                agent: AgentConfig { batch_size: 32, max_episodes: 150, replay_capacity: 100_000, ..base.agent },
                env: EnvConfig { grid: GridSpec::reduced(40, 15), ..base.env },
                layout: Layout::compact(),
                imitation: ImitationConfig { batch_size: 32, lr: 5e-4, epochs: 20, ..base.imitation },
                ..base
            },
            Profile::Ci => RunConfig {
                agent: AgentConfig { batch_size: 32, max_episodes: 40, max_steps: 8000, replay_capacity: 20_000, ..base.agent },
                env: EnvConfig { grid: GridSpec::reduced(20, 9), ..base.env },
                layout: Layout { conv_features: vec![4], kernel: 3, actor_hidden: vec![32], critic_hidden: vec![32] },
                imitation: ImitationConfig { batch_size: 32, lr: 1e-3, epochs: 20, demo_episodes: 5, dagger_episodes: 10, ..base.imitation },
                preinit: PreinitConfig { episodes: 3, ..base.preinit },
                eval: EvalConfig { spawn_dx: vec![-0.5, 0.0, 0.5], spawn_dy: vec![0.0], seeds: vec![0] },
                ..base
            },
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Profile::Paper, Profile::Desk, Profile::Ci]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown profile {s:?}; expected paper, desk or ci")))
    }
}

/// Supervised actor pre-initialisation from oracle driving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreinitConfig {
    pub episodes: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for PreinitConfig {
    fn default() -> Self {
        Self { episodes: 10, epochs: 20, lr: 5e-4, batch_size: 32 }
    }
}

/// Reward level that counts as "learned": the mean step reward averaged over
/// the last `window` episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub mean_step_reward: f64,
    pub window: usize,
    /// Episodes at the end of a run that make up its final reward.
    pub final_window: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { mean_step_reward: -0.5, window: 10, final_window: 50 }
    }
}

/// Everything a run needs besides its [`RunSpec`]. Stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub agent: AgentConfig,
    pub env: EnvConfig,
    pub layout: Layout,
    pub detector: DetectorConfig,
    pub proficient: OracleConfig,
    pub non_proficient: OracleConfig,
    pub imitation: ImitationConfig,
    pub preinit: PreinitConfig,
    pub threshold: ThresholdConfig,
    pub eval: EvalConfig,
    /// Directory of `scenario_<id>.toml` files; built-ins when absent.
    pub scenario_dir: Option<PathBuf>,
    pub checkpoint_every: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            env: EnvConfig::default(),
            layout: Layout::full(),
            detector: DetectorConfig::default(),
            proficient: OracleConfig::proficient(),
            non_proficient: OracleConfig::non_proficient(),
            imitation: ImitationConfig::default(),
            preinit: PreinitConfig::default(),
            threshold: ThresholdConfig::default(),
            eval: EvalConfig::default(),
            scenario_dir: None,
            checkpoint_every: None,
        }
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.env.validate()?;
        self.detector.validate()?;
        self.proficient.validate()?;
        self.non_proficient.validate()?;
        self.imitation.validate()?;
        self.eval.validate()?;
        if self.threshold.window == 0 || self.threshold.final_window == 0 || self.preinit.batch_size == 0 {
            return Err(Error::Config("threshold window and pre-init batch must be positive".into()));
        }
        Ok(())
    }

    pub fn oracle(&self, p: Proficiency) -> &OracleConfig {
        match p {
            Proficiency::Proficient => &self.proficient,
            Proficiency::NonProficient => &self.non_proficient,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies a TOML document on top of `base`; keys it leaves out keep their base values.
    pub fn layered(base: &RunConfig, text: &str) -> Result<Self> {
        let mut value = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        let over: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut value, over);
        let cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, base: &RunConfig) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::layered(base, &text).map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn scenario(&self, id: u8) -> Result<ScenarioSpec> {
        let s = ScenarioSpec::resolve(id, self.scenario_dir.as_deref())?;
        s.validate()?;
        Ok(s)
    }

    pub fn make_env(&self, scenario: u8, shaping: u8, seed: u64) -> Result<DrivingEnv> {
        let mut env_cfg = self.env.clone();
        env_cfg.shaping.scheme = ShapingScheme::from_index(shaping)?;
        DrivingEnv::new(self.scenario(scenario)?, env_cfg, seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceKind {
    Oracle,
    Live,
    None,
}

impl FromStr for GuidanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "live" => Ok(Self::Live),
            "none" => Ok(Self::None),
            _ => Err(Error::Config(format!("unknown guidance {s:?}; expected oracle, live or none"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    Continuous,
    Intermittent,
    /// Guidance only in the first this many episodes.
    Leading(u64),
}

impl GuidanceMode {
    pub fn tag(self) -> String {
        match self {
            Self::Continuous => "continuous".into(),
            Self::Intermittent => "intermittent".into(),
            Self::Leading(n) => format!("leading{n}"),
        }
    }

    pub fn schedule(self, seed: u64) -> Schedule {
        match self {
            Self::Continuous => Schedule::Continuous,
            Self::Intermittent => Schedule::intermittent(derive_seed(seed, stream::SCHEDULE)),
            Self::Leading(episodes) => Schedule::Leading { episodes },
        }
    }
}

impl FromStr for GuidanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Self::Continuous),
            "intermittent" => Ok(Self::Intermittent),
            _ => s
                .strip_prefix("leading")
                .and_then(|n| n.parse().ok())
                .map(Self::Leading)
                .ok_or_else(|| Error::Config(format!("unknown guidance mode {s:?}"))),
        }
    }
}

pub fn proficiency_tag(p: Proficiency) -> &'static str {
    match p {
        Proficiency::Proficient => "proficient",
        Proficiency::NonProficient => "non-proficient",
    }
}

/// One training run: a single (variant, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub variant: Variant,
    pub scenario: u8,
    pub guidance: GuidanceKind,
    pub mode: GuidanceMode,
    pub proficiency: Proficiency,
    pub seed: u64,
    pub shaping: u8,
    pub preinit: bool,
    /// Episode budget; the agent's episode cutoff when absent.
    pub episodes: Option<u64>,
    /// Start from these saved networks instead of a fresh agent.
    pub init_checkpoint: Option<PathBuf>,
}

impl RunSpec {
    pub fn new(variant: Variant, seed: u64) -> Self {
        Self {
            variant,
            scenario: 0,
            guidance: GuidanceKind::Oracle,
            mode: GuidanceMode::Intermittent,
            proficiency: Proficiency::Proficient,
            seed,
            shaping: 0,
            preinit: true,
            episodes: None,
            init_checkpoint: None,
        }
    }

    /// Everything but the seed, as a file-name-safe tag.
    pub fn cell(&self) -> String {
        let guidance = match self.guidance {
            GuidanceKind::Oracle => format!("{}-{}", self.mode.tag(), proficiency_tag(self.proficiency)),
            GuidanceKind::Live => format!("{}-live", self.mode.tag()),
            GuidanceKind::None => "unguided".into(),
        };
        let init = if self.init_checkpoint.is_some() {
            "finetune"
        } else if self.preinit {
            "preinit"
        } else {
            "cold"
        };
        format!("{}-s{}-{}-sh{}-{}", self.variant.name(), self.scenario, guidance, self.shaping, init)
    }

    pub fn run_id(&self) -> String {
        format!("{}-seed{}", self.cell(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario > 5 {
            return Err(Error::Config(format!("scenario must be 0–5, got {}", self.scenario)));
        }
        ShapingScheme::from_index(self.shaping)?;
        if self.episodes == Some(0) {
            return Err(Error::Config("episode budget must be positive".into()));
        }
        Ok(())
    }
}

/// Written next to the metric file of every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub spec: RunSpec,
    pub config: RunConfig,
    pub metrics: Option<PathBuf>,
    pub guidance_trace: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: Option<PathBuf>,
    pub episodes: u64,
    pub steps: u64,
    pub wall_seconds: f64,
    pub stopped: bool,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(Self::FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(Self::FILE);
        serde_json::from_slice(&fs::read(&path)?).map_err(|e| Error::Format { path, reason: e.to_string() })
    }

    /// Every file the manifest points at exists.
    pub fn files_exist(&self) -> bool {
        let files = self.metrics.iter().chain(&self.guidance_trace);
        let dirs = self.checkpoints.iter().chain(&self.final_checkpoint);
        files.chain(dirs).all(|p| p.exists())
    }
}

pub struct TrainingOutcome {
    pub agent: Agent<f64>,
    pub artifact: RunArtifact,
    pub manifest: Manifest,
}

fn missing_checkpoint(dir: &Path) -> Error {
    Error::Checkpoint { path: dir.to_path_buf(), reason: "no saved networks here".into() }
}

/// Builds the agent for `spec`: fresh, pre-initialised from oracle demos, or loaded.
pub fn prepare_agent(cfg: &RunConfig, spec: &RunSpec, episodes: u64) -> Result<Agent<f64>> {
    let agent_cfg = AgentConfig { max_episodes: episodes, ..cfg.agent.clone() };
    let mut agent = Agent::new(spec.variant, agent_cfg, &cfg.layout, &cfg.env.grid, derive_seed(spec.seed, stream::AGENT))?;
    if let Some(dir) = &spec.init_checkpoint {
        if !dir.join("actor.json").is_file() {
            return Err(missing_checkpoint(dir));
        }
        agent.load(dir)?;
    } else if spec.preinit {
        let demos = demonstrations(cfg, spec.scenario, cfg.preinit.episodes, spec.seed)?;
        let p = &cfg.preinit;
        agent.pretrain_actor(&demos, p.epochs, p.lr, p.batch_size)?;
    }
    Ok(agent)
}

/// Proficient-oracle demonstrations on `scenario`.
pub fn demonstrations(cfg: &RunConfig, scenario: u8, episodes: usize, seed: u64) -> Result<DemoDataset> {
    let mut env = cfg.make_env(scenario, 0, seed)?;
    let mut oracle = Oracle::new(cfg.proficient.clone(), derive_seed(seed, stream::ORACLE))?;
    Ok(collect_demos(&mut env, &mut oracle, &cfg.imitation, episodes, derive_seed(seed, stream::DEMOS))?.dataset)
}

/// Trains one cell with an explicit guidance source.
pub fn run_training_with<S: GuidanceSource>(
    cfg: &RunConfig,
    spec: &RunSpec,
    out_dir: Option<&Path>,
    source: S,
    hooks: &mut dyn RunHooks,
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    spec.validate()?;
    let episodes = spec.episodes.unwrap_or(cfg.agent.max_episodes);
    let mut agent = prepare_agent(cfg, spec, episodes)?;
    let mut env = cfg.make_env(spec.scenario, spec.shaping, derive_seed(spec.seed, stream::ENV))?;
    let mut guide = Guide::new(source, cfg.detector.clone())?;
    let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity, cfg.env.grid.rows, cfg.env.grid.cols)?;
    let run_id = spec.run_id();
    let opts = TrainOptions {
        run_id: run_id.clone(),
        seed: spec.seed,
        env_seed: derive_seed(spec.seed, stream::ENV),
        schedule: spec.mode.schedule(spec.seed),
        learn: true,
        explore: true,
        episodes: Some(episodes),
        out_dir: out_dir.map(Path::to_path_buf),
        checkpoint_every: cfg.checkpoint_every,
    };
    let artifact = train_run(&mut agent, &mut env, &mut guide, &mut buffer, &opts, hooks)?;
    let final_checkpoint = match out_dir {
        Some(dir) => {
            let path = dir.join("final");
            agent.save(&path)?;
            Some(path)
        }
        None => None,
    };
    let manifest = Manifest {
        run_id,
        spec: spec.clone(),
        config: cfg.clone(),
        metrics: artifact.metrics_path.clone(),
        guidance_trace: artifact.trace_path.clone(),
        checkpoints: artifact.checkpoints.clone(),
        final_checkpoint,
        episodes: artifact.records.len() as u64,
        steps: agent.step,
        wall_seconds: artifact.wall_seconds,
        stopped: artifact.stopped,
    };
    if let Some(dir) = out_dir {
        manifest.save(dir)?;
    }
    Ok(TrainingOutcome { agent, artifact, manifest })
}

/// Trains one cell with the scripted oracle, or without guidance.
pub fn run_training(cfg: &RunConfig, spec: &RunSpec, out_dir: Option<&Path>, hooks: &mut dyn RunHooks) -> Result<TrainingOutcome> {
    match spec.guidance {
        GuidanceKind::Oracle => {
            let oracle = Oracle::new(cfg.oracle(spec.proficiency).clone(), derive_seed(spec.seed, stream::ORACLE))?;
            run_training_with(cfg, spec, out_dir, oracle, hooks)
        }
        GuidanceKind::None => run_training_with(cfg, spec, out_dir, NoGuidance, hooks),
        GuidanceKind::Live => Err(Error::Config("live guidance needs a session; start it with `serve`".into())),
    }
}

/// A network trained by imitation, with the data it saw.
pub struct ImitationOutcome {
    pub actor: Network<f64>,
    pub dataset: DemoDataset,
    pub loss: f64,
    pub dagger: Option<DaggerReport>,
}

fn fresh_actor(cfg: &RunConfig, seed: u64) -> Result<Network<f64>> {
    Network::he_init(cfg.layout.actor_spec(&cfg.env.grid), derive_seed(seed, stream::AGENT))
}

fn save_imitation(out: &ImitationOutcome, dir: Option<&Path>) -> Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        out.actor.save(&dir.join("actor.json"))?;
        out.dataset.save(&dir.join("demos.csv"))?;
    }
    Ok(())
}

/// Vanilla imitation: oracle demonstrations, label balancing, regression.
pub fn run_vanilla_il(cfg: &RunConfig, scenario: u8, seed: u64, out_dir: Option<&Path>) -> Result<ImitationOutcome> {
    cfg.validate()?;
    let dataset = demonstrations(cfg, scenario, cfg.imitation.demo_episodes, seed)?;
    let mut actor = fresh_actor(cfg, seed)?;
    let loss = train_il(&dataset, &mut actor, &cfg.imitation, derive_seed(seed, stream::IMITATION))?;
    let out = ImitationOutcome { actor, dataset, loss, dagger: None };
    save_imitation(&out, out_dir)?;
    Ok(out)
}

/// DAgger started from the vanilla imitation policy and its demonstrations.
pub fn run_dagger(cfg: &RunConfig, scenario: u8, seed: u64, out_dir: Option<&Path>) -> Result<ImitationOutcome> {
    let base = run_vanilla_il(cfg, scenario, seed, None)?;
    let mut actor = base.actor;
    let mut env = cfg.make_env(scenario, 0, derive_seed(seed, stream::ENV))?;
    let mut oracle = Oracle::new(cfg.proficient.clone(), derive_seed(seed, stream::ORACLE))?;
    let (dataset, report) = dagger_train(&mut env, &mut oracle, &mut actor, base.dataset, &cfg.imitation, derive_seed(seed, stream::IMITATION))?;
    let loss = crate::imitation::dataset_loss(&actor, &dataset)?;
    let out = ImitationOutcome { actor, dataset, loss, dagger: Some(report) };
    save_imitation(&out, out_dir)?;
    Ok(out)
}

#[cfg(test)]
mod tests;
