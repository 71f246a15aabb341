use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hugdrl::agents::{NoHooks, Variant};
use hugdrl::env::write_catalog;
use hugdrl::guidance::{Oracle, Proficiency};
use hugdrl::harness::{
    demonstrations, derive_seed, evaluate_policy, load_policy, run_dagger, run_experiment, run_training, run_vanilla_il, stream,
    summarize_files, EvalReport, ExperimentSpec, GuidanceKind, GuidanceMode, Policy, Profile, RunConfig, RunSpec,
};
use hugdrl::imitation::{dataset_loss, train_il, DemoDataset};
use hugdrl::{Error, Network};
use hugdrl_session::{apply_start, ServeConfig, Server};

const OUT_ENV: &str = "HUGDRL_OUT";

#[derive(Parser)]
#[command(name = "hugdrl", version, about = "Human-guided TD3 on a lane-change simulator")]
struct Cli {
    /// Root for run outputs when --out is not given.
    #[arg(long, global = true, env = OUT_ENV, default_value = "runs")]
    out_root: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Base settings: paper, desk or ci.
    #[arg(long, default_value = "desk")]
    profile: Profile,
    /// TOML file layered over the profile.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> hugdrl::Result<RunConfig> {
        let base = self.profile.config();
        match &self.config {
            Some(p) => RunConfig::load(p, &base),
            None => Ok(base),
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value = "hug")]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    scenario: u8,
    /// continuous, intermittent or leadingN.
    #[arg(long, default_value = "intermittent")]
    mode: GuidanceMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    shaping: u8,
    #[arg(long, default_value = "proficient", value_parser = parse_proficiency)]
    proficiency: Proficiency,
    #[arg(long)]
    no_preinit: bool,
    /// Episode budget; the profile's cutoff otherwise.
    #[arg(long)]
    episodes: Option<u64>,
    /// Start from saved networks.
    #[arg(long)]
    init_checkpoint: Option<PathBuf>,
}

impl RunArgs {
    fn spec(&self, guidance: GuidanceKind) -> hugdrl::Result<RunSpec> {
        let mut s = RunSpec::new(self.variant, self.seed);
        s.scenario = self.scenario;
        s.guidance = guidance;
        s.mode = self.mode;
        s.proficiency = self.proficiency;
        s.shaping = self.shaping;
        s.preinit = !self.no_preinit;
        s.episodes = self.episodes;
        s.init_checkpoint = self.init_checkpoint.clone();
        s.validate()?;
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one agent.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// oracle or none; live guidance runs under `serve`.
        #[arg(long, default_value = "oracle")]
        guidance: GuidanceKind,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noise-free rollouts of a saved actor (or the scripted driver) over scenarios.
    Eval {
        /// Directory holding actor.json.
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Evaluate the proficient scripted driver instead.
        #[arg(long, conflicts_with = "checkpoint")]
        oracle: bool,
        /// Range or list, e.g. 1-5 or 1,3.
        #[arg(long, default_value = "1-5", value_parser = parse_scenarios)]
        scenarios: Scenarios,
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment matrix from a spec file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record scripted-driver demonstrations.
    DemoCollect {
        #[arg(long, default_value_t = 0)]
        scenario: u8,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Behaviour cloning from demonstrations.
    IlTrain {
        /// demos.csv to train on; collected fresh when absent.
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        scenario: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DAgger starting from a behaviour-cloned policy.
    DaggerTrain {
        #[arg(long, default_value_t = 0)]
        scenario: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve live sessions on ws://HOST:PORT/session.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Multiple of real time; 0 runs unpaced.
        #[arg(long, default_value_t = 1.0)]
        pacing: f64,
        /// Broadcast every n-th tick.
        #[arg(long, default_value_t = 1)]
        decimation: u64,
        #[arg(long, default_value = "session")]
        session_id: String,
        /// Start a run straight away instead of waiting for start_run.
        #[arg(long)]
        autostart: bool,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Per-run and per-cell statistics from metric files.
    Summarize {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in scenarios as editable TOML files.
    Scenarios {
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
}

fn parse_proficiency(s: &str) -> Result<Proficiency, String> {
    match s {
        "proficient" => Ok(Proficiency::Proficient),
        "non-proficient" => Ok(Proficiency::NonProficient),
        _ => Err(format!("expected proficient or non-proficient, got {s:?}")),
    }
}

#[derive(Clone, Debug)]
struct Scenarios(Vec<u8>);

fn parse_scenarios(s: &str) -> Result<Scenarios, String> {
    let mut ids = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let bad = |_| format!("bad scenario list {s:?}");
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u8, u8) = (a.parse().map_err(bad)?, b.parse().map_err(bad)?);
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                ids.extend(a..=b);
            }
            None => ids.push(part.parse().map_err(bad)?),
        }
    }
    Ok(Scenarios(ids))
}

fn write_report(report: &EvalReport, dir: &Path) -> hugdrl::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = format!("{}\n", EvalReport::HEADER);
    for row in report.csv_rows() {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(dir.join("eval.csv"), text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let root = cli.out_root;
    match cli.cmd {
        Cmd::Train { run, guidance, cfg, out } => {
            if guidance == GuidanceKind::Live {
                return Err("live guidance needs a session: use `hugdrl serve`".into());
            }
            let cfg = cfg.load()?;
            let spec = run.spec(guidance)?;
            let dir = out.unwrap_or_else(|| root.join(spec.run_id()));
            let outcome = run_training(&cfg, &spec, Some(&dir), &mut NoHooks)?;
            let recs = &outcome.artifact.records;
            let guided: u64 = recs.iter().map(|r| r.guided_steps).sum();
            let successes = recs.iter().filter(|r| r.success()).count();
            println!("{}: {} episodes, {} steps, {guided} guided, {successes} successes", spec.run_id(), recs.len(), outcome.manifest.steps);
            println!("wrote {}", dir.display());
        }
        Cmd::Eval { checkpoint, oracle: _, scenarios, name, cfg, out } => {
            let cfg = cfg.load()?;
            let (mut policy, default_name, default_out): (Box<dyn Policy>, String, PathBuf) = match checkpoint {
                Some(dir) => {
                    let name = dir.file_name().map_or("policy".into(), |n| n.to_string_lossy().into_owned());
                    (Box::new(load_policy(&dir, &cfg)?), name, dir.join("eval"))
                }
                None => {
                    let o = Oracle::new(cfg.proficient.clone(), derive_seed(0, stream::ORACLE))?;
                    (Box::new(o), "oracle".into(), root.join("eval-oracle"))
                }
            };
            let name = name.unwrap_or(default_name);
            let report = evaluate_policy(policy.as_mut(), &name, &cfg, &scenarios.0)?;
            let dir = out.unwrap_or(default_out);
            write_report(&report, &dir)?;
            for s in &report.scenarios {
                println!("scenario {}: {}/{} successes, {} collisions, {} offroad", s.scenario, s.successes, s.rollouts, s.collisions, s.offroads);
            }
            println!("aggregate success rate {:.3}", report.aggregate_success_rate());
            println!("wrote {}", dir.join("eval.csv").display());
        }
        Cmd::Experiment { spec, jobs, out } => {
            let spec = ExperimentSpec::load(&spec)?;
            let dir = out.unwrap_or_else(|| root.join(format!("experiment-{}", spec.id)));
            let cells = run_experiment(&spec, &dir, jobs.max(1))?;
            let resumed = cells.iter().filter(|c| c.resumed).count();
            println!("experiment {}: {} runs ({resumed} reused)", spec.id, cells.len());
            println!("wrote {}", dir.display());
        }
        Cmd::DemoCollect { scenario, episodes, seed, cfg, out } => {
            let cfg = cfg.load()?;
            let ds = demonstrations(&cfg, scenario, episodes.unwrap_or(cfg.imitation.demo_episodes), seed)?;
            let dir = out.unwrap_or_else(|| root.join(format!("demos-s{scenario}-seed{seed}")));
            fs::create_dir_all(&dir)?;
            ds.save(&dir.join("demos.csv"))?;
            println!("{} samples; wrote {}", ds.len(), dir.join("demos.csv").display());
        }
        Cmd::IlTrain { demos, scenario, seed, cfg, out } => {
            let cfg = cfg.load()?;
            let dir = out.unwrap_or_else(|| root.join(format!("vanilla-il-s{scenario}-seed{seed}")));
            let loss = match demos {
                Some(path) => {
                    let ds = DemoDataset::load(&path)?;
                    let mut actor = Network::he_init(cfg.layout.actor_spec(&cfg.env.grid), derive_seed(seed, stream::AGENT))?;
                    train_il(&ds, &mut actor, &cfg.imitation, derive_seed(seed, stream::IMITATION))?;
                    fs::create_dir_all(&dir)?;
                    actor.save(&dir.join("actor.json"))?;
                    dataset_loss(&actor, &ds)?
                }
                None => run_vanilla_il(&cfg, scenario, seed, Some(&dir))?.loss,
            };
            println!("final loss {loss:.6}; wrote {}", dir.display());
        }
        Cmd::DaggerTrain { scenario, seed, cfg, out } => {
            let cfg = cfg.load()?;
            let dir = out.unwrap_or_else(|| root.join(format!("dagger-s{scenario}-seed{seed}")));
            let outcome = run_dagger(&cfg, scenario, seed, Some(&dir))?;
            println!("{} samples, final loss {:.6}; wrote {}", outcome.dataset.len(), outcome.loss, dir.display());
        }
        Cmd::Serve { port, host, pacing, decimation, session_id, autostart, run, cfg } => {
            let cfg = cfg.load()?;
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let server = Server::bind(ServeConfig { addr, session_id, pacing, decimation, ..ServeConfig::default() })?;
            println!("listening on {}", server.url());
            let base = run.spec(GuidanceKind::Live)?;
            let mut first = autostart;
            loop {
                let spec = if first {
                    first = false;
                    base.clone()
                } else {
                    println!("waiting for start_run");
                    let Some(p) = server.wait_for_start(None) else { continue };
                    match apply_start(&base, &p) {
                        Ok(s) => s,
                        Err(e) => {
                            log::warn!("rejected start_run: {e}");
                            continue;
                        }
                    }
                };
                let dir = root.join("sessions").join(spec.run_id());
                println!("running {}", spec.run_id());
                match server.run(&cfg, &spec, Some(&dir)) {
                    Ok(o) => println!("{}: {} episodes{}", spec.run_id(), o.artifact.records.len(), if o.manifest.stopped { " (stopped)" } else { "" }),
                    Err(e) => log::error!("run failed: {e}"),
                }
            }
        }
        Cmd::Summarize { metrics, cfg, out } => {
            let cfg = cfg.load()?;
            let summary = summarize_files(&metrics, &cfg.threshold)?;
            let dir = out.unwrap_or_else(|| root.clone());
            summary.write(&dir)?;
            print!("{}", summary.cells_csv());
        }
        Cmd::Scenarios { out } => {
            write_catalog(&out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(Error::Config(_) | Error::Format { .. }) = e.downcast_ref::<Error>() {
                return ExitCode::from(2);
            }
            ExitCode::FAILURE
        }
    }
}
