//! Acceptance suite. Prints one PASS/FAIL line per criterion and writes the
//! same lines to `acceptance.txt` under the cargo test temp dir.
//!
//! Exact criteria (gradients, loss formulas, reduction identity, local
//! optimum, detector, determinism) fail the test. Learning-outcome criteria
//! are measured and reported; set `HUGDRL_ACCEPTANCE_STRICT=1` to make them
//! fail it as well. `HUGDRL_ACCEPTANCE_PROFILE=desk` trains at desk scale
//! instead of the CI profile.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hugdrl::agents::local_optimum::{local_optimum_run, LocalOptimumConfig};
use hugdrl::agents::{train_run, Agent, AgentConfig, NoHooks, TrainOptions, Variant};
use hugdrl::env::{DrivingEnv, WorldState};
use hugdrl::guidance::{
    ActivationRule, DetectorConfig, Guide, GuidanceSource, NoGuidance, Oracle, Proficiency, Schedule, Source, REFERENCE_DT,
};
use hugdrl::harness::{
    evaluate_policy, run_dagger, run_training, run_vanilla_il, ActorPolicy, GuidanceKind, Profile, RunConfig, RunSpec, RunSummary,
};
use hugdrl::nn::{Head, InputShape, Network, NetworkSpec, Tensor};
use hugdrl::replay::{Batch, ReplayBuffer};

struct Report {
    lines: Vec<String>,
    hard_failures: Vec<String>,
    soft_failures: Vec<String>,
}

impl Report {
    fn record(&mut self, name: &str, pass: bool, exact: bool, detail: String) {
        let line = format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
        if !pass {
            if exact {
                self.hard_failures.push(name.to_string());
            } else {
                self.soft_failures.push(name.to_string());
            }
        }
        self.lines.push(line);
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Central difference with a kink guard: coordinates where the one-sided
/// slopes disagree sit on a ReLU or max-pool switch and are not differentiable.
fn central(f: &mut dyn FnMut(f64) -> f64, x: f64, h: f64) -> Option<f64> {
    let (fp, f0, fm) = (f(x + h), f(x), f(x - h));
    let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
    if rel_err(fwd, bwd) > 1e-2 && (fwd - bwd).abs() > 1e-6 {
        return None;
    }
    Some((fp - fm) / (2.0 * h))
}

// ---------------------------------------------------------------- gradients

struct GradStats {
    cases: usize,
    coords: usize,
    kinks: usize,
    worst: f64,
}

fn random_spec(rng: &mut ChaCha8Rng) -> NetworkSpec {
    loop {
        let conv = rng.random_range(0..3usize);
        let spec = NetworkSpec {
            input: InputShape { channels: rng.random_range(1..3), height: rng.random_range(5..11), width: rng.random_range(5..11) },
            conv_features: (0..conv).map(|_| rng.random_range(1..4)).collect(),
            kernel: rng.random_range(1..4),
            extra_inputs: rng.random_range(0..3),
            hidden: (0..rng.random_range(0..3)).map(|_| rng.random_range(1..7)).collect(),
            outputs: rng.random_range(1..3),
            head: if rng.random_bool(0.5) { Head::Logistic } else { Head::Linear },
        };
        if Network::<f64>::he_init(spec.clone(), 0).is_ok() {
            return spec;
        }
    }
}

fn network_gradient_case(rng: &mut ChaCha8Rng, case: u64, st: &mut GradStats) {
    let h = 1e-5;
    let spec = random_spec(rng);
    let mut net = Network::<f64>::he_init(spec.clone(), case).unwrap();
    let n = rng.random_range(1..4);
    let x = random_tensor(rng, vec![n, spec.input.channels, spec.input.height, spec.input.width]);
    let extra = (spec.extra_inputs > 0).then(|| random_tensor(rng, vec![n, spec.extra_inputs]));
    let up = random_tensor(rng, vec![n, spec.outputs]);
    let (_, tape) = net.forward(&x, extra.as_ref()).unwrap();
    let g = net.backward(&tape, &up).unwrap();
    let objective = |net: &Network<f64>, x: &Tensor<f64>, e: Option<&Tensor<f64>>| -> f64 {
        net.predict(x, e).unwrap().data().iter().zip(up.data()).map(|(p, q)| p * q).sum()
    };
    let check = |analytic: f64, numeric: Option<f64>, st: &mut GradStats| match numeric {
        None => st.kinks += 1,
        Some(fd) => {
            st.coords += 1;
            if analytic.abs() > 1e-9 || fd.abs() > 1e-9 {
                st.worst = st.worst.max(rel_err(analytic, fd));
            }
        }
    };
    for p in 0..net.params().len() {
        for j in 0..net.params()[p].len() {
            let orig = net.params()[p].data()[j];
            let fd = central(
                &mut |v| {
                    net.params_mut()[p].data_mut()[j] = v;
                    let y = objective(&net, &x, extra.as_ref());
                    net.params_mut()[p].data_mut()[j] = orig;
                    y
                },
                orig,
                h,
            );
            check(g.params[p].data()[j], fd, st);
        }
    }
    let gx = g.input.expect("input gradient");
    for j in 0..x.len() {
        let fd = central(
            &mut |v| {
                let mut xv = x.clone();
                xv.data_mut()[j] = v;
                objective(&net, &xv, extra.as_ref())
            },
            x.data()[j],
            h,
        );
        check(gx.data()[j], fd, st);
    }
    if let Some(e) = &extra {
        let ge = g.extra.clone().expect("extra gradient");
        for j in 0..e.len() {
            let fd = central(
                &mut |v| {
                    let mut ev = e.clone();
                    ev.data_mut()[j] = v;
                    objective(&net, &x, Some(&ev))
                },
                e.data()[j],
                h,
            );
            check(ge.data()[j], fd, st);
        }
    }
    st.cases += 1;
}

fn conv_agent(seed: u64) -> Agent<f64> {
    let grid = hugdrl::env::GridSpec::reduced(6, 5);
    let layout = hugdrl::agents::Layout { conv_features: vec![2], kernel: 2, actor_hidden: vec![5], critic_hidden: vec![4] };
    Agent::new(Variant::Hug, AgentConfig::default(), &layout, &grid, seed).unwrap()
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Batch<f64> {
    let mut t = || {
        Tensor::new(vec![n, 1, 6, 5], (0..n * 30).map(|_| hugdrl::env::PALETTE[rng.random_range(0..6)]).collect()).unwrap()
    };
    let (states, next_states) = (t(), t());
    Batch {
        states,
        next_states,
        actions: (0..n).map(|_| rng.random()).collect(),
        rewards: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        dones: (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect(),
        flags: (0..n).map(|_| rng.random_bool(0.5)).collect(),
    }
}

fn actor_loss_case(rng: &mut ChaCha8Rng, case: u64, st: &mut GradStats) {
    let h = 1e-5;
    let mut a = conv_agent(case);
    let b = random_batch(rng, 1 + case as usize % 4);
    // Even cases: the policy-gradient loss alone; odd: a fixed guidance weight, masked every other time.
    let (omega, mask) = if case % 2 == 0 { (0.0, false) } else { (rng.random_range(0.1..3.0), case % 4 == 3) };
    let (_, grads) = a.actor_gradient(&b, omega, mask).unwrap();
    let analytic: Vec<f64> = grads.iter().flat_map(|t| t.data().to_vec()).collect();
    let mut idx = 0;
    for p in 0..a.actor.params().len() {
        for j in 0..a.actor.params()[p].len() {
            let orig = a.actor.params()[p].data()[j];
            let fd = central(
                &mut |v| {
                    a.actor.params_mut()[p].data_mut()[j] = v;
                    let l = a.actor_loss(&b, omega, mask).unwrap();
                    a.actor.params_mut()[p].data_mut()[j] = orig;
                    l
                },
                orig,
                h,
            );
            match fd {
                None => st.kinks += 1,
                Some(fd) => {
                    st.coords += 1;
                    if analytic[idx].abs() > 1e-9 || fd.abs() > 1e-9 {
                        st.worst = st.worst.max(rel_err(analytic[idx], fd));
                    }
                }
            }
            idx += 1;
        }
    }
    st.cases += 1;
}

fn gradient_suite(r: &mut Report) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut layers = GradStats { cases: 0, coords: 0, kinks: 0, worst: 0.0 };
    for case in 0..100 {
        network_gradient_case(&mut rng, case, &mut layers);
    }
    let mut losses = GradStats { cases: 0, coords: 0, kinks: 0, worst: 0.0 };
    for case in 0..100 {
        actor_loss_case(&mut rng, case, &mut losses);
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = layers.cases >= 100 && losses.cases >= 100 && layers.worst < 1e-4 && losses.worst < 1e-4 && secs < 60.0;
    r.record(
        "gradient suite",
        pass,
        true,
        format!(
            "{} network cases ({} coords, {} kinks skipped) worst rel err {:.2e}; {} actor-loss cases ({} coords, {} kinks) worst {:.2e}; tol 1e-4; {secs:.1} s (limit 60 s)",
            layers.cases, layers.coords, layers.kinks, layers.worst, losses.cases, losses.coords, losses.kinks, losses.worst
        ),
    );
}

// ------------------------------------------------------------ loss oracles

const K: usize = 3;

struct Lin {
    w: [f64; K],
    b: f64,
    v: [f64; K],
    u: f64,
    c: f64,
}

impl Lin {
    fn mu(&self, s: &[f64]) -> f64 {
        sigmoid((0..K).map(|j| self.w[j] * s[j]).sum::<f64>() + self.b)
    }

    /// Critic two has its bias shifted by `dc`.
    fn q(&self, s: &[f64], a: f64, dc: f64) -> f64 {
        (0..K).map(|j| self.v[j] * s[j]).sum::<f64>() + self.u * a + self.c + dc
    }
}

const SHIFT: f64 = 0.5;

fn set_linear(net: &mut Network<f64>, weights: &[f64], bias: f64) {
    let p = net.params_mut();
    p[0].data_mut().copy_from_slice(weights);
    p[1].data_mut()[0] = bias;
}

fn linear_agent(variant: Variant, l: &Lin) -> Agent<f64> {
    let actor = NetworkSpec::mlp(K, vec![], 1, Head::Logistic);
    let critic = NetworkSpec { extra_inputs: 1, ..NetworkSpec::mlp(K, vec![], 1, Head::Linear) };
    let mut a = Agent::from_specs(variant, AgentConfig { omega_fixed: 1.3, ..AgentConfig::default() }, actor, critic, 1).unwrap();
    set_linear(&mut a.actor, &l.w, l.b);
    let mut cw = l.v.to_vec();
    cw.push(l.u);
    set_linear(&mut a.critic1, &cw, l.c);
    set_linear(&mut a.critic2, &cw, l.c + SHIFT);
    // Targets lag the online nets: scale their weights.
    let mut tw = l.w.map(|x| 0.9 * x).to_vec();
    set_linear(&mut a.actor_target, &tw, l.b - 0.2);
    tw = cw.iter().map(|x| 1.1 * x).collect();
    set_linear(&mut a.critic1_target, &tw, l.c);
    set_linear(&mut a.critic2_target, &tw, l.c - 0.3);
    a
}

type Row = ([f64; K], f64, f64, bool, bool);

fn batch_of(rows: &[Row]) -> Batch<f64> {
    let n = rows.len();
    let flat = |f: &dyn Fn(&Row) -> [f64; K]| Tensor::new(vec![n, K], rows.iter().flat_map(f).collect()).unwrap();
    Batch {
        states: flat(&|r| r.0),
        actions: rows.iter().map(|r| r.1).collect(),
        rewards: rows.iter().map(|r| r.2).collect(),
        dones: rows.iter().map(|r| if r.3 { 1.0 } else { 0.0 }).collect(),
        next_states: flat(&|r| r.0.map(|x| 0.5 * x + 0.1)),
        flags: rows.iter().map(|r| r.4).collect(),
    }
}

fn loss_oracles(r: &mut Report) {
    let l = Lin { w: [0.7, -1.2, 0.4], b: 0.1, v: [0.3, -0.2, 0.5], u: 1.7, c: -0.4 };
    // Target nets as set in `linear_agent`.
    let lt = Lin { w: l.w.map(|x| 0.9 * x), b: l.b - 0.2, v: l.v.map(|x| 1.1 * x), u: 1.1 * l.u, c: 1.1 * 0.0 + l.c };
    let rows: [Row; 4] = [
        ([0.2, 0.4, 0.0], 0.3, 1.0, false, true),
        ([1.0, 0.0, 0.6], 0.9, -0.5, true, false),
        ([0.4, 0.8, 0.2], 0.1, 0.25, false, true),
        ([0.0, 0.6, 1.0], 0.55, 0.0, false, false),
    ];
    let mut worst: f64 = 0.0;
    let mut checks = 0usize;
    let mut note = |x: f64, y: f64| {
        worst = worst.max((x - y).abs());
        checks += 1;
    };
    for n in 1..=4 {
        let b = batch_of(&rows[..n]);
        let gamma = AgentConfig::default().gamma;
        // Critic targets: r + γ(1-d) min(Q1', Q2') at the target actor's action.
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                let s2 = b.next_states.row(i);
                let m = lt.mu(s2);
                let q1 = lt.q(s2, m, 0.0);
                let q2 = lt.q(s2, m, -0.3);
                b.rewards[i] + gamma * (1.0 - b.dones[i]) * q1.min(q2)
            })
            .collect();
        let mut a = linear_agent(Variant::Hug, &l);
        for (x, y) in a.critic_target(&b).unwrap().iter().zip(&targets) {
            note(*x, *y);
        }
        // Critic losses: mean squared TD error of each online critic.
        let (mut l1, mut l2) = (0.0, 0.0);
        for (i, t) in targets.iter().enumerate() {
            let s = b.states.row(i);
            l1 += (l.q(s, b.actions[i], 0.0) - t).powi(2) / n as f64;
            l2 += (l.q(s, b.actions[i], SHIFT) - t).powi(2) / n as f64;
        }
        let (c1, c2) = a.critic_update(&b).unwrap();
        note(c1, l1);
        note(c2, l2);
        // Guidance weight: λ^k (max(sup_I exp(Q1(s,a) - Q1(s,μ(s))), 1) - 1).
        for k in [0u64, 3, 40] {
            let mut h = linear_agent(Variant::Hug, &l);
            h.episode = k;
            let mut sup = f64::NEG_INFINITY;
            for i in (0..n).filter(|&i| b.flags[i]) {
                let s = b.states.row(i);
                sup = sup.max((l.q(s, b.actions[i], 0.0) - l.q(s, l.mu(s), 0.0)).exp());
            }
            let expected = if sup.is_finite() { h.cfg.lambda.powi(k as i32) * (sup.max(1.0) - 1.0) } else { 0.0 };
            note(h.compute_omega(&b).unwrap(), expected);
        }
        // Actor gradients of the three guided variants with the weight each picks.
        for variant in [Variant::Hug, Variant::IaRl, Variant::HiRl, Variant::Vanilla] {
            let mut v = linear_agent(variant, &l);
            v.episode = 2;
            let (omega, mask) = match variant {
                Variant::Hug => {
                    let mut sup = f64::NEG_INFINITY;
                    for i in (0..n).filter(|&i| b.flags[i]) {
                        let s = b.states.row(i);
                        sup = sup.max((l.q(s, b.actions[i], 0.0) - l.q(s, l.mu(s), 0.0)).exp());
                    }
                    (if sup.is_finite() { v.cfg.lambda.powi(2) * (sup.max(1.0) - 1.0) } else { 0.0 }, false)
                }
                Variant::IaRl => (1.3, true),
                _ => (0.0, false),
            };
            let (w, m) = v.actor_weights(&b).unwrap();
            note(w, omega);
            assert_eq!(m, mask);
            let mut loss = 0.0;
            let mut g = [0.0; K + 1];
            for i in 0..n {
                let s = b.states.row(i);
                let mu = l.mu(s);
                let guided = b.flags[i];
                let q_term = !(mask && guided);
                if q_term {
                    loss -= l.q(s, mu, 0.0) / n as f64;
                }
                if guided {
                    loss += omega * (mu - b.actions[i]).powi(2) / n as f64;
                }
                let dl_dmu = if q_term { -l.u } else { 0.0 } + if guided { 2.0 * omega * (mu - b.actions[i]) } else { 0.0 };
                let dz = dl_dmu * mu * (1.0 - mu) / n as f64;
                for j in 0..K {
                    g[j] += dz * s[j];
                }
                g[K] += dz;
            }
            let (got_loss, got) = v.actor_gradient(&b, w, m).unwrap();
            note(got_loss, loss);
            for (x, y) in got.iter().flat_map(|t| t.data().to_vec()).zip(g) {
                note(x, y);
            }
        }
    }
    r.record("loss-formula oracles", worst <= 1e-10, true, format!("{checks} quantities on 1-4 row batches, max abs diff {worst:.2e} (tol 1e-10)"));
}

// ------------------------------------------------------- reduction identity

fn reduction_identity(r: &mut Report, cfg: &RunConfig) {
    let run = |variant: Variant, guide: &mut dyn FnMut(&mut Agent<f64>, &mut DrivingEnv, &mut ReplayBuffer, &TrainOptions) -> u64| {
        let mut env = cfg.make_env(0, 0, 5).unwrap();
        let mut agent_cfg = cfg.agent.clone();
        agent_cfg.max_steps = 1000;
        let mut agent = Agent::new(variant, agent_cfg, &cfg.layout, &cfg.env.grid, 11).unwrap();
        let mut buffer = ReplayBuffer::new(cfg.agent.replay_capacity, cfg.env.grid.rows, cfg.env.grid.cols).unwrap();
        let opts = TrainOptions { env_seed: 5, episodes: Some(10_000), ..TrainOptions::default() };
        let guided = guide(&mut agent, &mut env, &mut buffer, &opts);
        (agent, guided)
    };
    let mut unguided = |agent: &mut Agent<f64>, env: &mut DrivingEnv, buffer: &mut ReplayBuffer, opts: &TrainOptions| {
        let mut g = Guide::new(NoGuidance, cfg.detector.clone()).unwrap();
        let art = train_run(agent, env, &mut g, buffer, opts, &mut NoHooks).unwrap();
        art.records.iter().map(|r| r.guided_steps).sum()
    };
    let (hug, hg) = run(Variant::Hug, &mut unguided);
    let (van, _) = run(Variant::Vanilla, &mut unguided);
    let mut gated = |agent: &mut Agent<f64>, env: &mut DrivingEnv, buffer: &mut ReplayBuffer, opts: &TrainOptions| {
        let mut g = Guide::new(Oracle::new(cfg.proficient.clone(), 3).unwrap(), cfg.detector.clone()).unwrap();
        let opts = TrainOptions { schedule: Schedule::Never, ..opts.clone() };
        let art = train_run(agent, env, &mut g, buffer, &opts, &mut NoHooks).unwrap();
        art.records.iter().map(|r| r.guided_steps).sum()
    };
    let (closed, cg) = run(Variant::Hug, &mut gated);
    let d1 = hug.max_param_diff(&van);
    let d2 = closed.max_param_diff(&van);
    let pass = hug.step == 1000 && van.step == 1000 && hg == 0 && cg == 0 && d1 == 0.0 && d2 == 0.0;
    r.record(
        "reduction identity",
        pass,
        true,
        format!("1000 steps, max abs param diff Hug(no guidance) vs Vanilla {d1:e}, Hug(oracle, closed schedule) vs Vanilla {d2:e} (must be 0)"),
    );
}

// ---------------------------------------------------------------- detector

#[derive(Clone, Copy)]
enum Sym {
    Hold,
    Tiny,
    Small,
    Big,
    Centre,
    Lost,
}

const SYMS: [Sym; 6] = [Sym::Hold, Sym::Tiny, Sym::Small, Sym::Big, Sym::Centre, Sym::Lost];

struct Scripted {
    samples: Vec<Option<f64>>,
    at: usize,
}

impl GuidanceSource for Scripted {
    fn kind(&self) -> Source {
        Source::Oracle
    }

    fn begin_episode(&mut self, _: &WorldState) {}

    fn sample(&mut self, _: &WorldState) -> Option<f64> {
        let s = self.samples[self.at];
        self.at += 1;
        s
    }
}

fn positions(cfg: &DetectorConfig, syms: &[Sym]) -> Vec<Option<f64>> {
    let per_tick = |d: f64| d * cfg.dt / REFERENCE_DT;
    let mut p = 0.5;
    syms.iter()
        .map(|s| {
            p = match s {
                Sym::Hold | Sym::Lost => p,
                Sym::Tiny => p + per_tick(0.5 * cfg.eps2),
                Sym::Small => p + per_tick(0.5 * (cfg.eps1 + cfg.eps2)),
                Sym::Big => p + per_tick(3.0 * cfg.eps1),
                Sym::Centre => 0.5,
            };
            (!matches!(s, Sym::Lost)).then_some(p)
        })
        .collect()
}

/// Reference flags straight from the activation and termination rules.
fn reference(cfg: &DetectorConfig, trace: &[Option<f64>]) -> Vec<bool> {
    let n = (cfg.t_n / cfg.dt).round() as usize;
    let (mut on, mut prev, mut rates): (bool, Option<f64>, Vec<f64>) = (false, None, Vec::new());
    let mut out = Vec::new();
    for s in trace {
        let Some(x) = *s else {
            on = false;
            rates.clear();
            out.push(false);
            continue;
        };
        let rate = prev.map_or(0.0, |p: f64| (x - p).abs() * REFERENCE_DT / cfg.dt);
        prev = Some(x);
        rates.push(rate);
        let quiet = rates.len() >= n && rates[rates.len() - n..].iter().all(|&d| d < cfg.eps2);
        on = match cfg.rule {
            ActivationRule::Derivative => (on || rate > cfg.eps1) && !quiet,
            ActivationRule::Angle { degrees } => ((x - 0.5) * 2.0 * cfg.lock_deg).abs() > degrees || (on && !quiet),
        };
        out.push(on);
    }
    out
}

fn detector(r: &mut Report, world: &WorldState) {
    let derivative = DetectorConfig::default();
    let angle = DetectorConfig { rule: ActivationRule::Angle { degrees: 10.0 }, ..DetectorConfig::default() };
    let run = |cfg: &DetectorConfig, trace: &[Option<f64>]| -> Vec<bool> {
        let mut g = Guide::new(Scripted { samples: trace.to_vec(), at: 0 }, cfg.clone()).unwrap();
        g.begin_episode(world);
        (0..trace.len()).map(|k| g.tick(k as u64, world, true).is_some_and(|e| e.engaged)).collect()
    };
    // Hand-written trace: one jump, then holding; at 20 Hz the 0.2 s window is 4 ticks.
    let jump = [Some(0.5), Some(0.5), Some(0.6), Some(0.6), Some(0.6), Some(0.6), Some(0.6), Some(0.6)];
    let crafted = run(&derivative, &jump) == [false, false, true, true, true, true, false, false];
    let window = derivative.window();
    // Exhaustive traces up to length 7 over six input kinds, both rules.
    let mut traces = 0usize;
    let mut mismatches = 0usize;
    let mut transitions = BTreeMap::new();
    for cfg in [&derivative, &angle] {
        for len in 1..=7u32 {
            for code in 0..6usize.pow(len) {
                let syms: Vec<Sym> = (0..len).map(|i| SYMS[code / 6usize.pow(i) % 6]).collect();
                let trace = positions(cfg, &syms);
                let got = run(cfg, &trace);
                let want = reference(cfg, &trace);
                traces += 1;
                if got != want {
                    mismatches += 1;
                }
                let mut prev = false;
                for (s, on) in syms.iter().zip(&got) {
                    *transitions.entry((matches!(cfg.rule, ActivationRule::Angle { .. }), *s as u8, prev, *on)).or_insert(0usize) += 1;
                    prev = *on;
                }
            }
        }
    }
    // Which (rule, input kind, from, to) classes the rules allow for these inputs.
    // The first sample has no rate, so any kind can leave guidance off there.
    // Every move is rightward, so a big step is always past 10 degrees.
    let possible = |angle: bool, s: Sym, from: bool, to: bool| -> bool {
        match (angle, s) {
            (_, Sym::Lost) => !to,
            (false, Sym::Hold | Sym::Tiny | Sym::Small) if !from => !to,
            (false, Sym::Small | Sym::Big) if from => to,
            (true, Sym::Small) if from => to,
            (true, Sym::Big) => to,
            (true, Sym::Centre) if !from => !to,
            _ => true,
        }
    };
    let mut expected = Vec::new();
    for angle in [false, true] {
        for s in SYMS {
            for from in [false, true] {
                for to in [false, true] {
                    if possible(angle, s, from, to) {
                        expected.push((angle, s as u8, from, to));
                    }
                }
            }
        }
    }
    let uncovered = expected.iter().filter(|k| !transitions.contains_key(k)).count();
    let forbidden = transitions.keys().filter(|k| !expected.contains(k)).count();
    let pass = crafted && mismatches == 0 && uncovered == 0 && forbidden == 0 && window == 4;
    r.record(
        "intervention detector",
        pass,
        true,
        format!(
            "hand trace disengages after {window} quiet ticks: {crafted}; {traces} exhaustive traces vs reference, {mismatches} mismatches; {} of {} reachable transition classes covered, {forbidden} forbidden ones seen",
            expected.len() - uncovered,
            expected.len()
        ),
    );
}

// ---------------------------------------------------------- local optimum

fn local_optimum(r: &mut Report) {
    let cfg = LocalOptimumConfig::default();
    let (mut hug_sup, mut hirl_inf, mut pre_inf) = (0, 0, 0);
    for seed in 0..10 {
        let hug = local_optimum_run(Variant::Hug, &cfg, seed).unwrap();
        let hirl = local_optimum_run(Variant::HiRl, &cfg, seed).unwrap();
        hug_sup += usize::from(hug.superior);
        hirl_inf += usize::from(!hirl.superior);
        pre_inf += usize::from(!cfg.task.in_superior_basin(hug.pretrained_action));
    }
    r.record(
        "fine-tuning local optimum",
        hug_sup >= 8 && hirl_inf >= 8,
        true,
        format!("pretrained in inferior basin {pre_inf}/10; after fine-tuning Hug superior {hug_sup}/10, HI-RL inferior {hirl_inf}/10 (need >= 8 each)"),
    );
}

// -------------------------------------------------------------- training

struct Trained {
    summary: RunSummary,
    actor: Network<f64>,
}

fn train(cfg: &RunConfig, variant: Variant, seed: u64, proficiency: Proficiency, preinit: bool) -> Trained {
    let mut spec = RunSpec::new(variant, seed);
    spec.proficiency = proficiency;
    spec.preinit = preinit;
    if variant == Variant::Vanilla {
        spec.guidance = GuidanceKind::None;
    }
    let out = run_training(cfg, &spec, None, &mut NoHooks).unwrap();
    let summary = RunSummary::from_records(&spec.run_id(), seed, &out.artifact.records, &cfg.threshold);
    Trained { summary, actor: out.agent.actor }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn threshold_of(t: &Trained) -> f64 {
    t.summary.censored_threshold() as f64
}

fn learning_criteria(r: &mut Report, cfg: &RunConfig, strict: bool) {
    let seeds: Vec<u64> = (0..10).collect();
    let budget = cfg.agent.max_episodes;
    let t0 = Instant::now();
    let mut runs: BTreeMap<(&str, u64), Trained> = BTreeMap::new();
    for &s in &seeds {
        runs.insert(("hug", s), train(cfg, Variant::Hug, s, Proficiency::Proficient, true));
        runs.insert(("iarl", s), train(cfg, Variant::IaRl, s, Proficiency::Proficient, true));
        runs.insert(("hirl", s), train(cfg, Variant::HiRl, s, Proficiency::Proficient, true));
        runs.insert(("vanilla", s), train(cfg, Variant::Vanilla, s, Proficiency::Proficient, true));
        runs.insert(("hug-np", s), train(cfg, Variant::Hug, s, Proficiency::NonProficient, true));
    }
    for s in 0..5 {
        runs.insert(("hug-cold", s), train(cfg, Variant::Hug, s, Proficiency::Proficient, false));
    }
    let runs = &runs;
    let col = |name: &'static str, ss: &[u64]| -> Vec<&Trained> { ss.iter().map(|s| &runs[&(name, *s)]).collect() };
    let med = |name: &'static str, ss: &[u64]| median(col(name, ss).into_iter().map(threshold_of).collect());

    // Training ordering.
    let (mh, mv) = (med("hug", &seeds), med("vanilla", &seeds));
    let mut beats = Vec::new();
    for base in ["iarl", "hirl", "vanilla"] {
        let n = seeds.iter().filter(|s| runs[&("hug", **s)].summary.final_step_reward >= runs[&(base, **s)].summary.final_step_reward).count();
        beats.push((base, n));
    }
    let finals = |name: &'static str| {
        let v: Vec<f64> = col(name, &seeds).iter().map(|t| t.summary.final_step_reward).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let pass = mh < mv && beats.iter().all(|(_, n)| *n >= 7);
    r.record(
        "training ordering",
        pass,
        strict,
        format!(
            "median episodes to mean step reward >= {} (trailing {}; never reached = {}): Hug {mh} vs Vanilla {mv}; Hug final >= baseline in {} seeds (need 7/10 each); mean final step reward hug {:.3} iarl {:.3} hirl {:.3} vanilla {:.3}",
            cfg.threshold.mean_step_reward,
            cfg.threshold.window,
            budget + 1,
            beats.iter().map(|(b, n)| format!("{b} {n}/10")).collect::<Vec<_>>().join(", "),
            finals("hug"),
            finals("iarl"),
            finals("hirl"),
            finals("vanilla")
        ),
    );

    // Proficiency robustness.
    let wins = seeds.iter().filter(|s| threshold_of(&runs[&("hug-np", **s)]) < threshold_of(&runs[&("vanilla", **s)])).count();
    r.record(
        "proficiency robustness",
        wins >= 7,
        strict,
        format!("non-proficient Hug reaches the threshold in fewer episodes than Vanilla in {wins}/10 seeds (need 7); median {} vs {mv}", med("hug-np", &seeds)),
    );

    // Pre-initialisation ablation.
    let five: Vec<u64> = (0..5).collect();
    let (mp, mc) = (med("hug", &five), med("hug-cold", &five));
    r.record(
        "pre-initialisation ablation",
        mp < mc,
        strict,
        format!("median episodes to threshold over 5 paired seeds: pre-init {mp} vs none {mc}"),
    );

    // Evaluation ordering.
    let scenarios = [1u8, 2, 3, 4, 5];
    let mut rates = BTreeMap::new();
    let pooled = |reports: Vec<hugdrl::harness::EvalReport>| {
        let n: usize = reports.iter().flat_map(|r| &r.scenarios).map(|s| s.rollouts).sum();
        let k: usize = reports.iter().flat_map(|r| &r.scenarios).map(|s| s.successes).sum();
        k as f64 / n as f64
    };
    for name in ["hug", "iarl", "hirl", "vanilla"] {
        let reports = five
            .iter()
            .map(|s| evaluate_policy(&mut ActorPolicy { net: runs[&(name, *s)].actor.clone() }, name, cfg, &scenarios).unwrap())
            .collect();
        rates.insert(name, pooled(reports));
    }
    let il: Vec<_> = five
        .iter()
        .map(|s| {
            let actor = run_vanilla_il(cfg, 0, *s, None).unwrap().actor;
            evaluate_policy(&mut ActorPolicy { net: actor }, "vanilla-il", cfg, &scenarios).unwrap()
        })
        .collect();
    rates.insert("vanilla-il", pooled(il));
    let dagger: Vec<_> = five
        .iter()
        .map(|s| {
            let actor = run_dagger(cfg, 0, *s, None).unwrap().actor;
            evaluate_policy(&mut ActorPolicy { net: actor }, "dagger", cfg, &scenarios).unwrap()
        })
        .collect();
    rates.insert("dagger", pooled(dagger));
    let hug = rates["hug"];
    let pass = rates.values().all(|&x| hug >= x);
    r.record(
        "evaluation ordering",
        pass,
        strict,
        format!(
            "aggregate success over scenarios 1-5, 5 training seeds, {} rollouts per scenario and seed: {}",
            cfg.eval.rollouts(),
            rates.iter().map(|(k, v)| format!("{k} {v:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );
    let _ = writeln!(std::io::stdout().lock(), "  (training runs took {:.0} s)", t0.elapsed().as_secs_f64());
}

// ------------------------------------------------------------ determinism

fn determinism(r: &mut Report, cfg: &RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = RunSpec::new(Variant::Hug, 8);
    spec.episodes = Some(4);
    spec.mode = hugdrl::harness::GuidanceMode::Continuous;
    let mut same = true;
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = run_training(cfg, &spec, Some(&dir.path().join(run)), &mut NoHooks).unwrap();
        let report = evaluate_policy(&mut ActorPolicy { net: out.agent.actor }, "hug", cfg, &[1, 2]).unwrap();
        reports.push(report.csv_rows());
    }
    for f in ["metrics.csv", "guidance.csv", "final/actor.json", "final/critic1.json"] {
        same &= fs::read(dir.path().join("a").join(f)).unwrap() == fs::read(dir.path().join("b").join(f)).unwrap();
    }
    let eval_same = reports[0] == reports[1];
    r.record(
        "determinism",
        same && eval_same,
        true,
        format!("repeated train: metric, guidance and checkpoint files byte-identical {same}; repeated eval rows identical {eval_same}"),
    );
}

#[test]
fn acceptance() {
    let profile: Profile = std::env::var("HUGDRL_ACCEPTANCE_PROFILE").ok().map_or(Profile::Ci, |p| p.parse().unwrap());
    let strict = std::env::var("HUGDRL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let cfg = profile.config();
    let mut r = Report { lines: Vec::new(), hard_failures: Vec::new(), soft_failures: Vec::new() };
    let _ = writeln!(std::io::stdout().lock(), "acceptance ({} profile)", profile.name());
    gradient_suite(&mut r);
    loss_oracles(&mut r);
    reduction_identity(&mut r, &cfg);
    local_optimum(&mut r);
    let env = cfg.make_env(0, 0, 0).unwrap();
    detector(&mut r, env.world());
    determinism(&mut r, &cfg);
    learning_criteria(&mut r, &cfg, strict);
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance.txt");
    let _ = fs::write(&path, r.lines.join("\n") + "\n");
    let _ = writeln!(std::io::stdout().lock(), "report written to {}", path.display());
    assert!(r.hard_failures.is_empty(), "exact criteria failed: {:?}", r.hard_failures);
    if strict {
        assert!(r.soft_failures.is_empty(), "criteria failed: {:?}", r.soft_failures);
    }
}
