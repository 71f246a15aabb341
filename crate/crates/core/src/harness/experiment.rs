use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_policy, load_policy, EvalReport};
use super::summary::summarize_files;
use super::{merge, run_training, GuidanceKind, GuidanceMode, Manifest, Profile, RunConfig, RunSpec};
use crate::agents::NoHooks;
use crate::agents::Variant;
use crate::error::{Error, Result};
use crate::guidance::Proficiency;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            "F" => Ok(Self::F),
            _ => Err(Error::Config(format!("unknown experiment {s:?}; expected A–F"))),
        }
    }
}

/// A trained driving policy: one of the four agents or an imitation learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "hug")]
    Hug,
    #[serde(rename = "iarl")]
    IaRl,
    #[serde(rename = "hirl")]
    HiRl,
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "vanilla-il")]
    VanillaIl,
    #[serde(rename = "dagger")]
    Dagger,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [Self::Hug, Self::IaRl, Self::HiRl, Self::Vanilla, Self::VanillaIl, Self::Dagger];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hug => "hug",
            Self::IaRl => "iarl",
            Self::HiRl => "hirl",
            Self::Vanilla => "vanilla",
            Self::VanillaIl => "vanilla-il",
            Self::Dagger => "dagger",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Self::Hug => Some(Variant::Hug),
            Self::IaRl => Some(Variant::IaRl),
            Self::HiRl => Some(Variant::HiRl),
            Self::Vanilla => Some(Variant::Vanilla),
            Self::VanillaIl | Self::Dagger => None,
        }
    }
}

impl From<Variant> for PolicyKind {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Hug => Self::Hug,
            Variant::IaRl => Self::IaRl,
            Variant::HiRl => Self::HiRl,
            Variant::Vanilla => Self::Vanilla,
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

/// One experiment of the six-experiment matrix, expanded over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub policies: Vec<PolicyKind>,
    pub scenarios: Vec<u8>,
    pub seeds: Vec<u64>,
    /// Episodes per training run; the profile's cutoff when absent.
    pub episodes: Option<u64>,
    pub modes: Vec<GuidanceMode>,
    pub proficiencies: Vec<Proficiency>,
    pub shaping: Vec<u8>,
    pub preinit: Vec<bool>,
    /// D: saved agent (or a directory with one per variant). F: root holding `<policy>/seed<k>/`.
    pub checkpoint: Option<PathBuf>,
    pub profile: Profile,
    /// TOML layered on top of the profile.
    pub config: Option<PathBuf>,
}

/// Fine-tuning protocol: guidance in the first 10 of 30 episodes.
pub const FINE_TUNE_EPISODES: u64 = 30;
pub const FINE_TUNE_GUIDED: u64 = 10;

impl ExperimentSpec {
    /// The matrix row for `id`, ten seeds, desk profile.
    pub fn template(id: ExperimentId) -> Self {
        use ExperimentId::*;
        let base = Self {
            id,
            policies: vec![PolicyKind::Hug],
            scenarios: vec![0],
            seeds: (0..10).collect(),
            episodes: None,
            modes: vec![GuidanceMode::Intermittent],
            proficiencies: vec![Proficiency::Proficient],
            shaping: vec![0],
            preinit: vec![true],
            checkpoint: None,
            profile: Profile::Desk,
            config: None,
        };
        match id {
            A => Self { policies: vec![PolicyKind::Hug, PolicyKind::IaRl, PolicyKind::HiRl, PolicyKind::Vanilla], ..base },
            B => Self { modes: vec![GuidanceMode::Continuous, GuidanceMode::Intermittent], shaping: vec![1], ..base },
            C => Self {
                modes: vec![GuidanceMode::Continuous],
                proficiencies: vec![Proficiency::Proficient, Proficiency::NonProficient],
                shaping: vec![1],
                ..base
            },
            D => Self {
                policies: vec![PolicyKind::Hug, PolicyKind::IaRl, PolicyKind::HiRl],
                episodes: Some(FINE_TUNE_EPISODES),
                modes: vec![GuidanceMode::Leading(FINE_TUNE_GUIDED)],
                preinit: vec![false],
                ..base
            },
            E => Self { preinit: vec![true, false], shaping: vec![0, 1, 2], ..base },
            F => Self {
                policies: PolicyKind::ALL.to_vec(),
                scenarios: vec![1, 2, 3, 4, 5],
                seeds: (0..5).collect(),
                modes: vec![],
                proficiencies: vec![],
                shaping: vec![],
                preinit: vec![],
                ..base
            },
        }
    }

    /// Parses a TOML spec; keys it leaves out come from the template of its `id`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let over: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let id = over
            .get("id")
            .and_then(toml::Value::as_str)
            .ok_or_else(|| Error::Config("experiment spec needs an `id`".into()))?;
        let mut value = toml::Value::try_from(Self::template(id.parse()?)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut value, over);
        let spec: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The profile with the optional config file layered on top.
    pub fn run_config(&self) -> Result<RunConfig> {
        let base = self.profile.config();
        match &self.config {
            Some(p) => RunConfig::load(p, &base),
            None => Ok(base),
        }
    }

    /// Checks the spec against its row of the experiment matrix.
    pub fn validate(&self) -> Result<()> {
        use ExperimentId::*;
        let bad = |msg: &str| Err(Error::Config(format!("experiment {}: {msg}", self.id)));
        if self.seeds.is_empty() || self.policies.is_empty() {
            return bad("needs at least one seed and one policy");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.episodes == Some(0) {
            return bad("episode budget must be positive");
        }
        if self.id == F {
            if self.scenarios.is_empty() || self.scenarios.iter().any(|s| !(1..=5).contains(s)) {
                return bad("evaluates on scenarios 1–5 only");
            }
            if self.checkpoint.is_none() {
                return bad("needs a checkpoint root");
            }
            return Ok(());
        }
        if self.scenarios != [0] {
            return bad("trains on scenario 0");
        }
        if self.proficiencies.is_empty() || self.modes.is_empty() || self.shaping.is_empty() || self.preinit.is_empty() {
            return bad("needs at least one mode, proficiency, shaping scheme and pre-init setting");
        }
        if self.shaping.iter().any(|&s| s > 2) {
            return bad("shaping schemes are 0, 1 and 2");
        }
        let drl: Vec<Variant> = self.policies.iter().filter_map(|p| p.variant()).collect();
        if drl.len() != self.policies.len() {
            return bad("imitation policies only take part in evaluation");
        }
        let only_hug = self.policies == [PolicyKind::Hug];
        let plain_modes = self.modes.iter().all(|m| matches!(m, GuidanceMode::Continuous | GuidanceMode::Intermittent));
        match self.id {
            A => {
                if self.modes != [GuidanceMode::Intermittent] || self.shaping != [0] || self.preinit != [true] {
                    return bad("cold start with pre-init, intermittent guidance, no shaping");
                }
            }
            B => {
                if !only_hug || !plain_modes || self.shaping != [1] || self.preinit != [true] {
                    return bad("Hug-DRL only, continuous and/or intermittent guidance, shaping scheme 1, pre-init");
                }
            }
            C => {
                if !only_hug || !plain_modes || self.shaping != [1] || self.preinit != [true] {
                    return bad("Hug-DRL only, proficiency presets compared, shaping scheme 1, pre-init");
                }
            }
            D => {
                if drl.iter().any(|v| *v == Variant::Vanilla) {
                    return bad("compares the guided variants only");
                }
                if self.modes != [GuidanceMode::Leading(FINE_TUNE_GUIDED)] || self.episodes != Some(FINE_TUNE_EPISODES) {
                    return bad("fine-tunes for 30 episodes with guidance in the first 10");
                }
                if self.shaping != [0] || self.preinit != [false] {
                    return bad("no shaping and no pre-init when fine-tuning");
                }
                if self.checkpoint.is_none() {
                    return bad("needs a pretrained checkpoint");
                }
            }
            E => {
                if !only_hug || self.modes != [GuidanceMode::Intermittent] {
                    return bad("Hug-DRL only, intermittent guidance");
                }
            }
            F => unreachable!(),
        }
        Ok(())
    }

    /// Pre-init and shaping pairs to run. E crosses pre-init ablation with
    /// no shaping and shaping ablation with pre-init, as the matrix lists them.
    fn init_shaping_pairs(&self) -> Vec<(bool, u8)> {
        if self.id != ExperimentId::E {
            return self.preinit.iter().flat_map(|&p| self.shaping.iter().map(move |&s| (p, s))).collect();
        }
        let mut pairs: Vec<(bool, u8)> = Vec::new();
        for &p in &self.preinit {
            for &s in &self.shaping {
                if (p || s == 0) && !pairs.contains(&(p, s)) {
                    pairs.push((p, s));
                }
            }
        }
        pairs
    }

    /// Every training run of the experiment, seeds innermost.
    pub fn training_runs(&self) -> Result<Vec<RunSpec>> {
        if self.id == ExperimentId::F {
            return Ok(Vec::new());
        }
        let mut runs = Vec::new();
        for policy in &self.policies {
            let variant = policy.variant().expect("validated");
            let init = match (&self.checkpoint, self.id) {
                (Some(root), ExperimentId::D) => Some(fine_tune_source(root, variant)?),
                _ => None,
            };
            for &mode in &self.modes {
                for &prof in &self.proficiencies {
                    for (preinit, shaping) in self.init_shaping_pairs() {
                        for &seed in &self.seeds {
                            runs.push(RunSpec {
                                variant,
                                scenario: 0,
                                guidance: if variant.guided() { GuidanceKind::Oracle } else { GuidanceKind::None },
                                mode,
                                proficiency: prof,
                                seed,
                                shaping,
                                preinit,
                                episodes: self.episodes,
                                init_checkpoint: init.clone(),
                            });
                        }
                    }
                }
            }
        }
        runs.sort_by_key(RunSpec::run_id);
        runs.dedup_by_key(|r| r.run_id());
        Ok(runs)
    }
}

/// `root/<variant>` when it holds saved networks, else `root` itself.
fn fine_tune_source(root: &Path, variant: Variant) -> Result<PathBuf> {
    let per_variant = root.join(variant.name());
    for dir in [per_variant, root.to_path_buf()] {
        if dir.join("actor.json").is_file() {
            return Ok(dir);
        }
    }
    Err(Error::Checkpoint { path: root.to_path_buf(), reason: format!("no saved networks for {}", variant.name()) })
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub run_id: String,
    pub dir: PathBuf,
    pub manifest: Option<Manifest>,
    pub eval: Option<EvalReport>,
    /// A complete earlier run was found and reused.
    pub resumed: bool,
}

fn run_cell(cfg: &RunConfig, spec: &RunSpec, out_root: &Path) -> Result<CellResult> {
    let run_id = spec.run_id();
    let dir = out_root.join(&run_id);
    if let Ok(m) = Manifest::load(&dir) {
        if !m.stopped && m.files_exist() && m.spec == *spec && m.config == *cfg {
            return Ok(CellResult { run_id, dir, manifest: Some(m), eval: None, resumed: true });
        }
    }
    let outcome = run_training(cfg, spec, Some(&dir), &mut NoHooks)?;
    log::info!("{run_id}: {} episodes in {:.1}s", outcome.manifest.episodes, outcome.manifest.wall_seconds);
    Ok(CellResult { run_id, dir, manifest: Some(outcome.manifest), eval: None, resumed: false })
}

/// Runs every cell, `jobs` at a time, then writes `experiment.toml`,
/// the summaries, and for F the evaluation table into `out_root`.
pub fn run_experiment(spec: &ExperimentSpec, out_root: &Path, jobs: usize) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let cfg = spec.run_config()?;
    fs::create_dir_all(out_root)?;
    fs::write(out_root.join("experiment.toml"), spec.to_toml()?)?;
    fs::write(out_root.join("config.toml"), cfg.to_toml()?)?;
    if spec.id == ExperimentId::F {
        return run_evaluation(spec, &cfg, out_root);
    }
    let runs = spec.training_runs()?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<CellResult>>>> = Mutex::new((0..runs.len()).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= runs.len() {
            break;
        }
        let r = run_cell(&cfg, &runs[i], out_root);
        slots.lock().expect("no worker panicked")[i] = Some(r);
    };
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, runs.len().max(1)) {
            s.spawn(worker);
        }
    });
    let results: Vec<CellResult> = slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect::<Result<_>>()?;
    let files: Vec<PathBuf> = results.iter().filter_map(|c| c.manifest.as_ref()?.metrics.clone()).collect();
    summarize_files(&files, &cfg.threshold)?.write(out_root)?;
    Ok(results)
}

fn run_evaluation(spec: &ExperimentSpec, cfg: &RunConfig, out_root: &Path) -> Result<Vec<CellResult>> {
    let root = spec.checkpoint.as_ref().expect("validated");
    let mut results = Vec::new();
    let mut table = format!("{}\n", EvalReport::HEADER);
    for policy in &spec.policies {
        for &seed in &spec.seeds {
            let dir = root.join(policy.name()).join(format!("seed{seed}"));
            let mut p = load_policy(&dir, cfg)?;
            let run_id = format!("{}-seed{seed}", policy.name());
            let report = evaluate_policy(&mut p, &run_id, cfg, &spec.scenarios)?;
            for row in report.csv_rows() {
                table.push_str(&row);
                table.push('\n');
            }
            results.push(CellResult { run_id, dir, manifest: None, eval: Some(report), resumed: false });
        }
    }
    fs::write(out_root.join("eval.csv"), table)?;
    Ok(results)
}
