use std::collections::HashMap;

use super::grid::{GridSpec, SemanticGrid};
use super::world::ShapingConfig;
use crate::error::Result;
use crate::nn::{Adam, Head, InputShape, Network, NetworkSpec, Tensor, Want};

/// Running mean and standard deviation (Welford).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Population standard deviation; 0 with fewer than two samples.
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / self.count as f64).sqrt()
        }
    }
}

/// `r_episode · min(max(1 + (err − mean)/std, 1), cap)`, modulation 1 when `std` is 0.
pub fn novelty_bonus(r_episode: f64, err: f64, mean: f64, std: f64, cap: f64) -> f64 {
    let modulation = if std > 0.0 { (1.0 + (err - mean) / std).max(1.0).min(cap) } else { 1.0 };
    r_episode * modulation
}

/// Episodic visit counts over position bins; `1/√n` after counting the visit.
#[derive(Clone, Debug, Default)]
pub struct EpisodicCounts {
    bins: HashMap<(i64, i64), u32>,
    bin: (f64, f64),
}

impl EpisodicCounts {
    pub fn new(bin_length: f64, bin_width: f64) -> Self {
        Self { bins: HashMap::new(), bin: (bin_length, bin_width) }
    }

    pub fn visit(&mut self, x: f64, y: f64) -> f64 {
        let key = ((y / self.bin.0).floor() as i64, (x / self.bin.1).floor() as i64);
        let n = self.bins.entry(key).or_insert(0);
        *n += 1;
        1.0 / (*n as f64).sqrt()
    }

    pub fn clear(&mut self) {
        self.bins.clear();
    }
}

/// Novelty bonus state: a fixed random embedding, a trainable predictor of it,
/// running statistics of the prediction error and episodic visit counts.
pub struct NoveltyState {
    fixed: Network<f64>,
    trained: Network<f64>,
    adam: Adam<f64>,
    pub stats: RunningStats,
    pub counts: EpisodicCounts,
    lr: f64,
    cap: f64,
}

impl NoveltyState {
    pub fn new(grid: &GridSpec, cfg: &ShapingConfig, seed: u64) -> Result<Self> {
        let spec = NetworkSpec {
            input: InputShape { channels: 1, height: grid.rows, width: grid.cols },
            conv_features: cfg.novelty_conv.clone(),
            kernel: cfg.novelty_kernel,
            extra_inputs: 0,
            hidden: vec![],
            outputs: cfg.novelty_embedding,
            head: Head::Linear,
        };
        let fixed = Network::he_init(spec.clone(), seed ^ 0x6e67_7566)?;
        let trained = Network::he_init(spec, seed ^ 0x6e67_7574)?;
        let adam = Adam::new(&trained);
        Ok(Self {
            fixed,
            trained,
            adam,
            stats: RunningStats::default(),
            counts: EpisodicCounts::new(cfg.novelty_bin.0, cfg.novelty_bin.1),
            lr: cfg.novelty_lr,
            cap: cfg.novelty_cap,
        })
    }

    pub fn begin_episode(&mut self) {
        self.counts.clear();
    }

    /// Bonus for arriving at `grid` with the ego at `(x, y)`; trains the predictor one step.
    pub fn bonus(&mut self, grid: &SemanticGrid, x: f64, y: f64) -> Result<f64> {
        let input = Tensor::new(vec![1, 1, grid.rows, grid.cols], grid.values())?;
        let target = self.fixed.predict(&input, None)?;
        let (pred, tape) = self.trained.forward(&input, None)?;
        let diff: Vec<f64> = pred.data().iter().zip(target.data()).map(|(p, t)| p - t).collect();
        let err = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        let n = diff.len() as f64;
        let upstream = Tensor::new(pred.shape().to_vec(), diff.iter().map(|d| 2.0 * d / n).collect())?;
        let grads = self.trained.backward_with(&tape, &upstream, Want::PARAMS)?;
        self.adam.step(&mut self.trained, &grads.params, self.lr)?;

        let r_episode = self.counts.visit(x, y);
        let out = novelty_bonus(r_episode, err, self.stats.mean, self.stats.std(), self.cap);
        self.stats.push(err);
        Ok(out)
    }
}
