//! Supervised imitation: noise-augmented behaviour cloning and DAgger.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{DrivingEnv, SemanticGrid, PALETTE};
use crate::error::{Error, Result};
use crate::guidance::Oracle;
use crate::nn::{Adam, Network, Tensor, Want};
use crate::scalar::Scalar;

pub const DEMO_FORMAT: &str = "hugdrl.demos";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    VanillaDemo,
    DaggerRound(u32),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::VanillaDemo => f.write_str("vanilla-demo"),
            Provenance::DaggerRound(n) => write!(f, "dagger-round-{n}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "vanilla-demo" {
            return Ok(Provenance::VanillaDemo);
        }
        s.strip_prefix("dagger-round-")
            .and_then(|n| n.parse().ok())
            .map(Provenance::DaggerRound)
            .ok_or_else(|| Error::Config(format!("unknown provenance {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoSample {
    pub state: Vec<u8>,
    pub label: f64,
    pub provenance: Provenance,
}

/// Labelled states for supervised regression.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoDataset {
    pub rows: usize,
    pub cols: usize,
    pub samples: Vec<DemoSample>,
}

impl DemoDataset {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, state: &SemanticGrid, label: f64, provenance: Provenance) -> Result<()> {
        if state.rows != self.rows || state.cols != self.cols {
            return Err(Error::Shape(format!("demo grid {}×{} in a {}×{} dataset", state.rows, state.cols, self.rows, self.cols)));
        }
        if !(0.0..=1.0).contains(&label) {
            return Err(Error::Config(format!("demo label {label} outside [0, 1]")));
        }
        self.samples.push(DemoSample { state: state.codes.clone(), label, provenance });
        Ok(())
    }

    pub fn extend(&mut self, other: &DemoDataset) -> Result<()> {
        if other.rows != self.rows || other.cols != self.cols {
            return Err(Error::Shape("datasets differ in grid shape".into()));
        }
        self.samples.extend(other.samples.iter().cloned());
        Ok(())
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Decoded `[n, 1, rows, cols]` states and `[n, 1]` labels for `indices`.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut x = Vec::with_capacity(indices.len() * self.rows * self.cols);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = &self.samples[i];
            x.extend(s.state.iter().map(|&c| T::of(PALETTE[c as usize])));
            y.push(T::of(s.label));
        }
        Ok((Tensor::new(vec![indices.len(), 1, self.rows, self.cols], x)?, Tensor::new(vec![indices.len(), 1], y)?))
    }

    /// Header line, then one `grid-hex,label,provenance` row per sample.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{DEMO_FORMAT} v1 rows={} cols={}", self.rows, self.cols)?;
        for s in &self.samples {
            writeln!(out, "{},{:?},{}", hex::encode(&s.state), s.label, s.provenance)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let dims = match fields.as_slice() {
            [DEMO_FORMAT, "v1", r, c] => r.strip_prefix("rows=").zip(c.strip_prefix("cols=")),
            _ => None,
        };
        let (rows, cols) = dims
            .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let mut ds = DemoDataset::new(rows, cols);
        for (n, line) in lines.enumerate() {
            let line = line?;
            let row = || bad(format!("row {}: {line:?}", n + 1));
            let mut parts = line.split(',');
            let (Some(g), Some(l), Some(p), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(row());
            };
            let state = hex::decode(g).map_err(|_| row())?;
            let label: f64 = l.parse().map_err(|_| row())?;
            if state.len() != rows * cols || state.iter().any(|&c| c as usize >= PALETTE.len()) || !(0.0..=1.0).contains(&label) {
                return Err(row());
            }
            ds.samples.push(DemoSample { state, label, provenance: p.parse().map_err(|_| row())? });
        }
        Ok(ds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImitationConfig {
    pub lr: f64,
    /// SD of the Gaussian noise added to executed actions while collecting demos.
    pub augmentation_sd: f64,
    pub batch_size: usize,
    /// Passes over the dataset per training call.
    pub epochs: usize,
    pub demo_episodes: usize,
    pub dagger_episodes: usize,
    /// Agent weight in round `n` is `1 − beta_base^n`.
    pub beta_base: f64,
    /// Label histogram bins for balancing; odd so one bin is centred on 0.5.
    pub balance_bins: usize,
    /// The centre bin keeps at most this multiple of the mean occupied-bin count.
    pub balance_cap: f64,
}

impl Default for ImitationConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            augmentation_sd: 0.1,
            batch_size: 128,
            epochs: 50,
            demo_episodes: 20,
            dagger_episodes: 50,
            beta_base: 0.5,
            balance_bins: 21,
            balance_cap: 3.0,
        }
    }
}

impl ImitationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta_base) {
            return Err(Error::Config("beta_base must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.balance_bins == 0 || self.augmentation_sd < 0.0 || self.balance_cap <= 0.0 {
            return Err(Error::Config("imitation batch, bins and cap must be positive".into()));
        }
        Ok(())
    }

    /// Agent share of the blended action in DAgger round `n`.
    pub fn beta(&self, round: u32) -> f64 {
        1.0 - self.beta_base.powi(round as i32)
    }
}

/// Mean squared error of `net` over the whole dataset.
pub fn dataset_loss<T: Scalar>(net: &Network<T>, ds: &DemoDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let idx: Vec<usize> = (0..ds.len()).collect();
    for chunk in idx.chunks(256) {
        let (x, y) = ds.batch::<T>(chunk)?;
        let p = net.predict(&x, None)?;
        total += p.data().iter().zip(y.data()).map(|(a, b)| (*a - *b).as_f64().powi(2)).sum::<f64>();
    }
    Ok(total / ds.len() as f64)
}

/// Minibatch Adam on `mean((net(s) − y)²)`. Returns the mean minibatch loss of the last epoch.
pub fn regress<T: Scalar, R: Rng>(
    net: &mut Network<T>,
    adam: &mut Adam<T>,
    ds: &DemoDataset,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut last = f64::NAN;
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let (x, y) = ds.batch::<T>(chunk)?;
            let (p, tape) = net.forward(&x, None)?;
            let n = chunk.len() as f64;
            let mut loss = 0.0;
            let upstream: Vec<T> = p
                .data()
                .iter()
                .zip(y.data())
                .map(|(a, b)| {
                    let d = *a - *b;
                    loss += d.as_f64().powi(2);
                    T::of(2.0 / n) * d
                })
                .collect();
            let loss = loss / n;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("imitation loss {loss}")));
            }
            let grads = net.backward_with(&tape, &Tensor::new(vec![chunk.len(), 1], upstream)?, Want::PARAMS)?;
            adam.step(net, &grads.params, lr)?;
            sum += loss;
            batches += 1;
        }
        last = sum / batches as f64;
    }
    Ok(last)
}

fn state_tensor<T: Scalar>(g: &SemanticGrid) -> Result<Tensor<T>> {
    Tensor::new(vec![1, 1, g.rows, g.cols], g.values().into_iter().map(T::of).collect())
}

/// Oracle demonstrations with noise-injected execution.
#[derive(Clone, Debug)]
pub struct Demonstrations {
    pub dataset: DemoDataset,
    /// Actions actually executed, aligned with the dataset rows.
    pub executed: Vec<f64>,
}

/// Drives `episodes` episodes with the oracle in full control. Each step
/// executes the oracle's action plus Gaussian noise but stores the clean action.
pub fn collect_demos(env: &mut DrivingEnv, oracle: &mut Oracle, cfg: &ImitationConfig, episodes: usize, seed: u64) -> Result<Demonstrations> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.augmentation_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut dataset = DemoDataset::new(env.cfg.grid.rows, env.cfg.grid.cols);
    let mut executed = Vec::new();
    for e in 0..episodes {
        let mut state = env.reset(seed.wrapping_add(e as u64))?;
        oracle.reset(env.world());
        loop {
            let label = oracle.command(env.world());
            let eps = if cfg.augmentation_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let a = (label + eps).clamp(0.0, 1.0);
            dataset.push(&state, label, Provenance::VanillaDemo)?;
            executed.push(a);
            let out = env.step(a)?;
            if out.terminal() {
                break;
            }
            state = out.next_state;
        }
    }
    Ok(Demonstrations { dataset, executed })
}

/// Subsamples the label bin containing 0.5 down to `cap × mean occupied-bin count`.
pub fn balance_labels<R: Rng>(ds: &DemoDataset, bins: usize, cap: f64, rng: &mut R) -> DemoDataset {
    let bin = |l: f64| ((l * bins as f64) as usize).min(bins - 1);
    let centre = bin(0.5);
    let mut counts = vec![0usize; bins];
    for s in &ds.samples {
        counts[bin(s.label)] += 1;
    }
    let occupied = counts.iter().filter(|&&c| c > 0).count().max(1);
    let limit = (cap * ds.len() as f64 / occupied as f64).floor() as usize;
    if counts[centre] <= limit {
        return ds.clone();
    }
    let mut centre_rows: Vec<usize> = (0..ds.len()).filter(|&i| bin(ds.samples[i].label) == centre).collect();
    centre_rows.shuffle(rng);
    let mut keep = vec![true; ds.len()];
    for &i in &centre_rows[limit..] {
        keep[i] = false;
    }
    DemoDataset {
        rows: ds.rows,
        cols: ds.cols,
        samples: ds.samples.iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s.clone()).collect(),
    }
}

/// Balances the labels and regresses `net` onto them.
pub fn train_il<T: Scalar>(ds: &DemoDataset, net: &mut Network<T>, cfg: &ImitationConfig, seed: u64) -> Result<f64> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let balanced = balance_labels(ds, cfg.balance_bins, cfg.balance_cap, &mut rng);
    let mut adam = Adam::new(net);
    regress(net, &mut adam, &balanced, cfg.epochs, cfg.lr, cfg.batch_size, &mut rng)
}

/// `β·a_agent + (1 − β)·a_human`.
pub fn dagger_blend(a_agent: f64, a_human: f64, beta: f64) -> f64 {
    beta * a_agent + (1.0 - beta) * a_human
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DaggerReport {
    /// Dataset size after each round.
    pub sizes: Vec<usize>,
    /// Steps of each round where the oracle took part.
    pub guided_steps: Vec<usize>,
    pub outcomes: Vec<crate::env::Termination>,
}

/// DAgger rounds: the agent drives; whenever the oracle wants to act it
/// shares authority by `dagger_blend` and its own action is recorded. The
/// network is retrained on the aggregate after every round.
pub fn dagger_train<T: Scalar>(
    env: &mut DrivingEnv,
    oracle: &mut Oracle,
    net: &mut Network<T>,
    mut dataset: DemoDataset,
    cfg: &ImitationConfig,
    seed: u64,
) -> Result<(DemoDataset, DaggerReport)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::new(net);
    let mut report = DaggerReport::default();
    for round in 0..cfg.dagger_episodes {
        let beta = cfg.beta(round as u32);
        let mut state = env.reset(seed.wrapping_add(round as u64))?;
        oracle.reset(env.world());
        let mut guided = 0;
        let cause = loop {
            let a_agent = net.predict(&state_tensor(&state)?, None)?.data()[0].as_f64();
            let a_human = oracle.observe(env.world());
            let a = if oracle.intent() {
                dataset.push(&state, a_human, Provenance::DaggerRound(round as u32))?;
                guided += 1;
                dagger_blend(a_agent, a_human, beta)
            } else {
                a_agent
            };
            let out = env.step(a)?;
            if out.terminal() {
                break out.cause;
            }
            state = out.next_state;
        };
        if !dataset.is_empty() {
            regress(net, &mut adam, &dataset, cfg.epochs, cfg.lr, cfg.batch_size, &mut rng)?;
        }
        report.sizes.push(dataset.len());
        report.guided_steps.push(guided);
        report.outcomes.push(cause);
    }
    Ok((dataset, report))
}
