use std::path::Path;

use super::*;
use crate::agents::{EpisodeRecord, Flow, NoHooks, TickReport};

fn tiny() -> RunConfig {
    let mut c = Profile::Ci.config();
    c.env.grid = GridSpec::reduced(12, 8);
    c.layout = Layout { conv_features: vec![3], kernel: 3, actor_hidden: vec![16], critic_hidden: vec![16] };
    c.agent.batch_size = 16;
    c.agent.max_episodes = 3;
    c.agent.max_steps = 100_000;
    c.agent.replay_capacity = 5000;
    c.preinit = PreinitConfig { episodes: 1, epochs: 2, lr: 1e-3, batch_size: 16 };
    c.imitation.demo_episodes = 1;
    c.imitation.dagger_episodes = 2;
    c.imitation.epochs = 2;
    c.imitation.batch_size = 16;
    c
}

fn record(episode: u64, mean_step_reward: f64, steps: u64, cause: Termination) -> EpisodeRecord {
    EpisodeRecord {
        episode,
        reward: mean_step_reward * steps as f64,
        shaped_reward: mean_step_reward * steps as f64,
        mean_step_reward,
        steps,
        guided_steps: 0,
        cause,
        mean_yaw_rate: 0.0,
        mean_lat_accel: 0.0,
        mean_critic_loss: None,
        mean_omega: None,
    }
}

#[test]
fn derived_seeds_differ_across_streams_and_seeds() {
    let mut all: Vec<u64> = (0..50).flat_map(|s| (1..=6).map(move |k| derive_seed(s, k))).collect();
    let n = all.len();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), n);
    assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
}

#[test]
fn metric_rows_round_trip_through_csv() {
    let mut r = record(4, -0.4375, 120, Termination::Success);
    r.guided_steps = 17;
    r.mean_yaw_rate = 0.1 + 0.2;
    r.mean_critic_loss = Some(1.0 / 3.0);
    let row = MetricRow::new("hug-s0-x-seed3", 3, r);
    let back = MetricRow::parse(&row.csv_row()).unwrap();
    assert_eq!(back, row);
    let unset = MetricRow::new("vanilla-seed0", 0, record(0, -1.0, 9, Termination::Offroad));
    assert_eq!(MetricRow::parse(&unset.csv_row()).unwrap(), unset);
}

#[test]
fn metric_rows_reject_broken_invariants() {
    let good = MetricRow::new("r", 0, record(0, -0.5, 10, Termination::Success)).csv_row();
    let zero_len = good.replacen(",10,0,1,", ",0,0,1,", 1);
    assert!(MetricRow::parse(&zero_len).unwrap_err().contains("length"));
    let lying = good.replacen(",1,success,", ",0,success,", 1);
    assert!(MetricRow::parse(&lying).unwrap_err().contains("disagrees"));
    let failed_success = good.replacen(",1,success,", ",1,collision,", 1);
    assert!(MetricRow::parse(&failed_success).is_err());
    assert!(MetricRow::parse("a,b,c").is_err());
}

#[test]
fn read_metrics_names_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let good = MetricRow::new("r", 0, record(0, -0.5, 10, Termination::Timeout)).csv_row();
    std::fs::write(&path, format!("{}\n{good}\nnot,a,row\n", MetricRow::HEADER)).unwrap();
    let err = read_metrics(&path).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
    std::fs::write(&path, format!("{good}\n")).unwrap();
    assert!(read_metrics(&path).unwrap_err().to_string().contains("header"));
}

#[test]
fn profiles_validate_and_parse() {
    for p in [Profile::Paper, Profile::Desk, Profile::Ci] {
        p.config().validate().unwrap();
        assert_eq!(p.name().parse::<Profile>().unwrap(), p);
    }
    let paper = Profile::Paper.config();
    assert_eq!((paper.env.grid.rows, paper.env.grid.cols), (80, 45));
    assert_eq!(paper.agent.batch_size, 128);
    assert_eq!(paper.agent.max_episodes, 500);
    assert!("laptop".parse::<Profile>().is_err());
}

#[test]
fn run_config_round_trips_through_toml() {
    let cfg = Profile::Desk.config();
    let text = cfg.to_toml().unwrap();
    assert_eq!(RunConfig::layered(&RunConfig::default(), &text).unwrap(), cfg);
}

#[test]
fn layered_config_overrides_only_named_keys() {
    let base = Profile::Ci.config();
    let cfg = RunConfig::layered(&base, "[agent]\nactor_lr = 0.001\n[env.weights]\nfail = 20.0\n").unwrap();
    assert_eq!(cfg.agent.actor_lr, 1e-3);
    assert_eq!(cfg.env.weights.fail, 20.0);
    assert_eq!(cfg.agent.critic_lr, base.agent.critic_lr);
    assert_eq!(cfg.env.grid, base.env.grid);
    assert!(RunConfig::layered(&base, "typo = 1\n").is_err());
    assert!(RunConfig::layered(&base, "[agent]\nbatch_size = 0\n").is_err());
}

#[test]
fn run_ids_encode_every_axis_but_stay_csv_safe() {
    let mut s = RunSpec::new(Variant::Hug, 4);
    assert_eq!(s.run_id(), "hug-s0-intermittent-proficient-sh0-preinit-seed4");
    s.proficiency = Proficiency::NonProficient;
    s.mode = GuidanceMode::Leading(10);
    s.preinit = false;
    s.shaping = 2;
    assert_eq!(s.cell(), "hug-s0-leading10-non-proficient-sh2-cold");
    s.guidance = GuidanceKind::None;
    assert_eq!(summary::cell_of(&s.run_id()), "hug-s0-unguided-sh2-cold");
    assert!(!s.run_id().contains(','));
}

#[test]
fn guidance_modes_parse() {
    assert_eq!("continuous".parse::<GuidanceMode>().unwrap(), GuidanceMode::Continuous);
    assert_eq!("intermittent".parse::<GuidanceMode>().unwrap(), GuidanceMode::Intermittent);
    assert_eq!("leading10".parse::<GuidanceMode>().unwrap(), GuidanceMode::Leading(10));
    assert!("sometimes".parse::<GuidanceMode>().is_err());
    assert_eq!("none".parse::<GuidanceKind>().unwrap(), GuidanceKind::None);
}

#[test]
fn live_guidance_needs_a_session() {
    let mut s = RunSpec::new(Variant::Hug, 0);
    s.guidance = GuidanceKind::Live;
    assert!(matches!(run_training(&tiny(), &s, None, &mut NoHooks), Err(Error::Config(_))));
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = RunSpec::new(Variant::Hug, 11);
    spec.mode = GuidanceMode::Continuous;
    let a = run_training(&tiny(), &spec, Some(&dir.path().join("a")), &mut NoHooks).unwrap();
    let b = run_training(&tiny(), &spec, Some(&dir.path().join("b")), &mut NoHooks).unwrap();
    for f in ["metrics.csv", "guidance.csv", "final/actor.json", "final/critic2_target.json"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    assert_eq!(a.artifact.records, b.artifact.records);
    assert!(a.artifact.records.iter().any(|r| r.guided_steps > 0));
}

#[test]
fn manifest_points_at_existing_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.checkpoint_every = Some(1);
    let out = run_training(&cfg, &RunSpec::new(Variant::IaRl, 2), Some(dir.path()), &mut NoHooks).unwrap();
    let m = Manifest::load(dir.path()).unwrap();
    assert_eq!(m, out.manifest);
    assert!(m.files_exist());
    assert_eq!(m.checkpoints.len(), 3);
    assert_eq!(m.config, cfg);
    let rows = read_metrics(m.metrics.as_ref().unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.run_id == m.run_id && r.seed == 2));
}

#[test]
fn leading_schedule_stops_guidance_after_its_episodes() {
    let mut spec = RunSpec::new(Variant::Hug, 5);
    spec.mode = GuidanceMode::Leading(2);
    spec.preinit = false;
    spec.episodes = Some(6);
    let out = run_training(&tiny(), &spec, None, &mut NoHooks).unwrap();
    let recs = &out.artifact.records;
    assert_eq!(recs.len(), 6);
    assert!(recs[..2].iter().any(|r| r.guided_steps > 0));
    assert!(recs[2..].iter().all(|r| r.guided_steps == 0));
}

#[test]
fn unguided_variant_never_sees_guidance() {
    let mut spec = RunSpec::new(Variant::Vanilla, 1);
    spec.mode = GuidanceMode::Continuous;
    let out = run_training(&tiny(), &spec, None, &mut NoHooks).unwrap();
    assert!(out.artifact.records.iter().all(|r| r.guided_steps == 0));
}

#[test]
fn preinit_moves_the_actor_and_checkpoints_load() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let mut cold = RunSpec::new(Variant::Hug, 3);
    cold.preinit = false;
    let warm = RunSpec { preinit: true, ..cold.clone() };
    let a = prepare_agent(&cfg, &cold, 1).unwrap();
    let b = prepare_agent(&cfg, &warm, 1).unwrap();
    assert!(a.actor.max_param_diff(&b.actor) > 0.0);
    assert_eq!(a.critic1.max_param_diff(&b.critic1), 0.0);
    b.save(dir.path()).unwrap();
    let loaded = prepare_agent(&cfg, &RunSpec { init_checkpoint: Some(dir.path().to_path_buf()), ..cold.clone() }, 1).unwrap();
    assert_eq!(loaded.actor.max_param_diff(&b.actor), 0.0);
    let missing = RunSpec { init_checkpoint: Some(dir.path().join("nope")), ..cold };
    assert!(matches!(prepare_agent(&cfg, &missing, 1), Err(Error::Checkpoint { .. })));
}

struct StopAt(u64);

impl RunHooks for StopAt {
    fn on_tick(&mut self, t: &TickReport<'_>) -> Flow {
        if t.step + 1 >= self.0 {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }
}

#[test]
fn stopped_runs_are_marked_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_training(&tiny(), &RunSpec::new(Variant::Hug, 0), Some(dir.path()), &mut StopAt(5)).unwrap();
    assert!(out.manifest.stopped);
    assert_eq!(out.manifest.steps, 5);
}

#[test]
fn experiment_templates_follow_the_matrix() {
    for id in [ExperimentId::A, ExperimentId::B, ExperimentId::C, ExperimentId::E] {
        ExperimentSpec::template(id).validate().unwrap();
    }
    assert!(ExperimentSpec::template(ExperimentId::D).validate().is_err(), "D needs a checkpoint");
    assert!(ExperimentSpec::template(ExperimentId::F).validate().is_err(), "F needs a checkpoint root");
    let a = ExperimentSpec::template(ExperimentId::A);
    let runs = a.training_runs().unwrap();
    assert_eq!(runs.len(), 4 * 10);
    assert!(runs.iter().all(|r| r.scenario == 0 && r.shaping == 0 && r.preinit && r.mode == GuidanceMode::Intermittent));
    assert_eq!(runs.iter().filter(|r| r.variant == Variant::Vanilla && r.guidance == GuidanceKind::None).count(), 10);
}

#[test]
fn experiment_specs_off_the_matrix_are_rejected() {
    let a = ExperimentSpec::template(ExperimentId::A);
    assert!(ExperimentSpec { shaping: vec![1], ..a.clone() }.validate().is_err());
    assert!(ExperimentSpec { scenarios: vec![2], ..a.clone() }.validate().is_err());
    assert!(ExperimentSpec { modes: vec![GuidanceMode::Continuous], ..a.clone() }.validate().is_err());
    assert!(ExperimentSpec { seeds: vec![1, 1], ..a.clone() }.validate().is_err());
    assert!(ExperimentSpec { policies: vec![PolicyKind::Dagger], ..a.clone() }.validate().is_err());
    let b = ExperimentSpec::template(ExperimentId::B);
    assert!(ExperimentSpec { policies: vec![PolicyKind::IaRl], ..b }.validate().is_err());
    let d = ExperimentSpec { checkpoint: Some("ck".into()), ..ExperimentSpec::template(ExperimentId::D) };
    d.validate().unwrap();
    assert!(ExperimentSpec { episodes: Some(20), ..d.clone() }.validate().is_err());
    assert!(ExperimentSpec { policies: vec![PolicyKind::Vanilla], ..d.clone() }.validate().is_err());
    assert!(ExperimentSpec { preinit: vec![true], ..d }.validate().is_err());
    let f = ExperimentSpec { checkpoint: Some("ck".into()), ..ExperimentSpec::template(ExperimentId::F) };
    f.validate().unwrap();
    assert!(ExperimentSpec { scenarios: vec![0, 1], ..f }.validate().is_err());
}

#[test]
fn ablation_pairs_match_the_matrix_rows() {
    let e = ExperimentSpec { seeds: vec![0], ..ExperimentSpec::template(ExperimentId::E) };
    let mut pairs: Vec<(bool, u8)> = e.training_runs().unwrap().iter().map(|r| (r.preinit, r.shaping)).collect();
    pairs.sort_unstable();
    assert_eq!(pairs, vec![(false, 0), (true, 0), (true, 1), (true, 2)]);
}

#[test]
fn experiment_spec_toml_fills_from_the_template() {
    let spec = ExperimentSpec::from_toml("id = \"A\"\nseeds = [3, 4]\nepisodes = 7\nprofile = \"ci\"\n").unwrap();
    assert_eq!(spec.seeds, vec![3, 4]);
    assert_eq!(spec.episodes, Some(7));
    assert_eq!(spec.profile, Profile::Ci);
    assert_eq!(spec.policies.len(), 4);
    let back = ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap();
    assert_eq!(back, spec);
    assert!(ExperimentSpec::from_toml("seeds = [1]\n").is_err());
    assert!(ExperimentSpec::from_toml("id = \"A\"\nshaping = [2]\n").is_err());
    assert!(ExperimentSpec::from_toml("id = \"A\"\nseed = [2]\n").is_err());
}

fn write_config(dir: &Path, cfg: &RunConfig) -> std::path::PathBuf {
    let p = dir.join("tiny.toml");
    cfg.save(&p).unwrap();
    p
}

#[test]
fn fine_tuning_experiment_needs_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        checkpoint: Some(dir.path().join("absent")),
        seeds: vec![0],
        config: Some(write_config(dir.path(), &tiny())),
        ..ExperimentSpec::template(ExperimentId::D)
    };
    assert!(matches!(run_experiment(&spec, &dir.path().join("out"), 1), Err(Error::Checkpoint { .. })));
}

#[test]
fn fine_tuning_experiment_guides_only_the_first_ten_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let pretrained = run_training(&cfg, &RunSpec::new(Variant::Hug, 9), None, &mut NoHooks).unwrap().agent;
    pretrained.save(&dir.path().join("ck").join("hug")).unwrap();
    let spec = ExperimentSpec {
        policies: vec![PolicyKind::Hug],
        checkpoint: Some(dir.path().join("ck")),
        seeds: vec![0],
        config: Some(write_config(dir.path(), &cfg)),
        ..ExperimentSpec::template(ExperimentId::D)
    };
    let cells = run_experiment(&spec, &dir.path().join("out"), 1).unwrap();
    assert_eq!(cells.len(), 1);
    let rows = read_metrics(cells[0].manifest.as_ref().unwrap().metrics.as_ref().unwrap()).unwrap();
    assert_eq!(rows.len(), 30);
    assert!(rows[..10].iter().any(|r| r.record.guided_steps > 0));
    assert!(rows[10..].iter().all(|r| r.record.guided_steps == 0));
    assert!(dir.path().join("out").join("summary_cells.csv").is_file());
}

#[test]
fn experiments_resume_completed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        policies: vec![PolicyKind::Hug, PolicyKind::Vanilla],
        seeds: vec![0, 1],
        episodes: Some(2),
        config: Some(write_config(dir.path(), &tiny())),
        ..ExperimentSpec::template(ExperimentId::A)
    };
    let out = dir.path().join("out");
    let first = run_experiment(&spec, &out, 2).unwrap();
    assert_eq!(first.len(), 4);
    assert!(first.iter().all(|c| !c.resumed));
    let summary = std::fs::read(out.join("summary_runs.csv")).unwrap();
    let second = run_experiment(&spec, &out, 1).unwrap();
    assert!(second.iter().all(|c| c.resumed));
    assert_eq!(std::fs::read(out.join("summary_runs.csv")).unwrap(), summary);
}

#[test]
fn evaluation_experiment_performs_no_updates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { eval: EvalConfig { spawn_dx: vec![0.0], spawn_dy: vec![0.0], seeds: vec![0] }, ..tiny() };
    let agent = run_training(&cfg, &RunSpec::new(Variant::Hug, 0), None, &mut NoHooks).unwrap().agent;
    let ck = dir.path().join("ck").join("hug").join("seed0");
    agent.save(&ck).unwrap();
    let before = std::fs::read(ck.join("actor.json")).unwrap();
    let spec = ExperimentSpec {
        policies: vec![PolicyKind::Hug],
        seeds: vec![0],
        scenarios: vec![1, 2],
        checkpoint: Some(dir.path().join("ck")),
        config: Some(write_config(dir.path(), &cfg)),
        ..ExperimentSpec::template(ExperimentId::F)
    };
    let cells = run_experiment(&spec, &dir.path().join("out"), 1).unwrap();
    assert_eq!(std::fs::read(ck.join("actor.json")).unwrap(), before);
    let report = cells[0].eval.as_ref().unwrap();
    assert_eq!(report.scenarios.len(), 2);
    assert!(report.scenarios.iter().all(|s| s.rollouts == 1));
    let table = std::fs::read_to_string(dir.path().join("out").join("eval.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(manifest_free(&dir.path().join("out")));
}

fn manifest_free(dir: &Path) -> bool {
    !dir.join(Manifest::FILE).exists()
}

#[test]
fn straight_policy_finishes_the_empty_road_without_yaw() {
    let cfg = Profile::Ci.config();
    let report = evaluate_policy(&mut ConstantPolicy(0.5), "straight", &cfg, &[1]).unwrap();
    let s = &report.scenarios[0];
    assert_eq!(s.rollouts, cfg.eval.rollouts());
    assert_eq!(s.success_rate, 1.0);
    assert_eq!(s.mean_yaw_rate, 0.0);
    assert_eq!(s.mean_lat_accel, 0.0);
}

#[test]
fn hard_left_policy_never_succeeds() {
    let cfg = Profile::Ci.config();
    let report = evaluate_policy(&mut ConstantPolicy(0.0), "left", &cfg, &[1, 2, 3, 4, 5]).unwrap();
    assert_eq!(report.aggregate_success_rate(), 0.0);
    assert_eq!(report.scenarios[0].offroads, report.scenarios[0].rollouts);
}

#[test]
fn the_oracle_drives_the_evaluation_suite() {
    let cfg = Profile::Ci.config();
    let mut oracle = Oracle::new(cfg.proficient.clone(), 0).unwrap();
    let report = evaluate_policy(&mut oracle, "oracle", &cfg, &[1, 2, 3, 4, 5]).unwrap();
    assert_eq!(report.aggregate_success_rate(), 1.0, "{report:?}");
}

#[test]
fn aggregate_success_pools_rollouts() {
    let ev = |scenario, rollouts, successes| ScenarioEval {
        scenario,
        rollouts,
        successes,
        collisions: rollouts - successes,
        offroads: 0,
        timeouts: 0,
        success_rate: successes as f64 / rollouts as f64,
        mean_yaw_rate: 0.0,
        mean_lat_accel: 0.0,
    };
    let r = EvalReport { policy: "p".into(), scenarios: vec![ev(1, 4, 4), ev(2, 6, 0)] };
    assert_eq!(r.aggregate_success_rate(), 0.4);
    assert_eq!(r.csv_rows()[0], "p,1,4,4,0,0,0,1.0,0.0,0.0");
}

#[test]
fn missing_policy_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_policy(dir.path(), &tiny()), Err(Error::Checkpoint { .. })));
}

#[test]
fn mean_and_sample_sd() {
    let one = MeanSd::of(&[2.5]);
    assert_eq!((one.mean, one.sd), (2.5, 0.0));
    let two = MeanSd::of(&[1.0, 3.0]);
    assert_eq!(two.mean, 2.0);
    assert!((two.sd - 2f64.sqrt()).abs() < 1e-15);
    assert!(MeanSd::of(&[]).mean.is_nan());
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
}

#[test]
fn threshold_uses_the_trailing_window() {
    let recs: Vec<EpisodeRecord> = [-1.0, -0.4, -0.4, -0.9].iter().enumerate().map(|(i, &m)| record(i as u64, m, 10, Termination::Offroad)).collect();
    let t = |w, v| ThresholdConfig { mean_step_reward: v, window: w, final_window: 2 };
    // Window 2: means -0.7, -0.4, -0.65.
    assert_eq!(episodes_to_threshold(&recs, &t(2, -0.5)), Some(3));
    assert_eq!(episodes_to_threshold(&recs, &t(1, -0.5)), Some(2));
    assert_eq!(episodes_to_threshold(&recs, &t(4, -0.5)), None);
    assert_eq!(episodes_to_threshold(&recs[..1], &t(2, -2.0)), None);
    let s = RunSummary::from_records("x-seed0", 0, &recs, &t(2, -0.5));
    assert_eq!(s.final_step_reward, -0.65);
    assert_eq!(s.censored_threshold(), 3);
    let never = RunSummary::from_records("x-seed0", 0, &recs, &t(4, -0.5));
    assert_eq!(never.censored_threshold(), 5);
}

#[test]
fn summaries_group_runs_by_cell() {
    let mut rows = Vec::new();
    for (seed, m) in [(0u64, -1.0), (1, -3.0)] {
        rows.push(MetricRow::new(&format!("hug-a-seed{seed}"), seed, record(0, m, 4, Termination::Success)));
    }
    rows.push(MetricRow::new("vanilla-a-seed0", 0, record(0, -2.0, 4, Termination::Offroad)));
    let t = ThresholdConfig::default();
    let s = summarize(&rows, &t);
    assert_eq!(s.runs.len(), 3);
    let hug = &s.cells["hug-a"];
    assert_eq!(hug.runs, 2);
    assert_eq!(hug.mean_step_reward.mean, -2.0);
    assert!((hug.mean_step_reward.sd - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(hug.success_rate.mean, 1.0);
    assert_eq!(s.cells["vanilla-a"].mean_step_reward.sd, 0.0);
    let mut shuffled = rows.clone();
    shuffled.reverse();
    let again = summarize(&shuffled, &t);
    assert_eq!(again.runs_csv(), s.runs_csv());
    assert_eq!(again.cells_csv(), s.cells_csv());
}

#[test]
fn imitation_runs_save_loadable_policies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let il = run_vanilla_il(&cfg, 0, 1, Some(&dir.path().join("il"))).unwrap();
    assert!(il.loss.is_finite());
    let loaded = load_policy(&dir.path().join("il"), &cfg).unwrap();
    assert_eq!(loaded.net.max_param_diff(&il.actor), 0.0);
    let dagger = run_dagger(&cfg, 0, 1, Some(&dir.path().join("dagger"))).unwrap();
    let report = dagger.dagger.unwrap();
    assert_eq!(report.sizes.len(), 2);
    assert!(dagger.dataset.len() >= il.dataset.len());
    assert!(DemoDataset::load(&dir.path().join("dagger").join("demos.csv")).is_ok());
}
