//! Evaluator backends: a tabular benchmark of ground-truth accuracies and a
//! synthetic supernet simulator. Both expose mini-batch rewards; the synthetic
//! backend also produces per-architecture output vectors for distance-based
//! tree learning.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{encode, enumerate, Architecture, EncodingKind, Enumeration, SearchSpace};
use crate::space::{SpaceError, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("malformed benchmark: {0}")]
    Schema(String),
    #[error("benchmark does not cover architecture {0}")]
    Coverage(String),
    #[error("evaluator does not provide output vectors")]
    OutputsUnavailable,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("cannot read benchmark: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of one mini-batch evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    /// Reward in [0, 1].
    pub accuracy: f64,
    /// Optional B×C row-stochastic output matrix.
    pub outputs: Option<Vec<Vec<f64>>>,
    /// Optional cost in MFLOPs.
    pub flops: Option<f64>,
}

/// Linear warm-up ramp: 0 at t=0, 1 from t_ramp onward. t_ramp <= 0 disables it.
pub fn ramp(t: f64, t_ramp: f64) -> f64 {
    if t_ramp <= 0.0 {
        1.0
    } else {
        (t / t_ramp).min(1.0)
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Common interface over evaluation backends.
///
/// `t` is training progress in [0, 1]; rewards scale with `ramp(t, t_ramp)`
/// and carry Gaussian mini-batch noise of width `sigma_acc`.
pub trait Evaluator {
    fn space(&self) -> &SearchSpace;

    /// Noisy mini-batch reward at progress `t`.
    fn evaluate(
        &self,
        arch: &Architecture,
        t: f64,
        rng: &mut dyn RngCore,
    ) -> Result<EvalOutcome, EvalError>;

    /// B×C row-stochastic output matrix at progress `t`, if the backend has one.
    fn output_vectors(
        &self,
        arch: &Architecture,
        batch_size: usize,
        t: f64,
    ) -> Result<Vec<Vec<f64>>, EvalError>;

    /// Noise-free, ramp-free accuracy in [0, 1]; defines the ground-truth order.
    fn clean_accuracy(&self, arch: &Architecture) -> Result<f64, EvalError>;
}

/// One benchmark table entry. Accuracy is in percent, as published tables are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BenchmarkFile {
    space: String,
    records: BTreeMap<String, BenchRecord>,
}

/// Exhaustive ground-truth table over an enumerable space.
#[derive(Debug, Clone)]
pub struct TabularBenchmark {
    space_id: String,
    space: SearchSpace,
    enumeration: Enumeration,
    records: Vec<BenchRecord>,
    /// 1-based rank per canonical index; ties broken by lower index.
    ranks: Vec<usize>,
    sigma_acc: f64,
    t_ramp: f64,
}

impl TabularBenchmark {
    /// Builds a benchmark from per-digit-string records, requiring exact
    /// coverage of the space.
    pub fn from_records(
        space_id: &str,
        space: &SearchSpace,
        records: &BTreeMap<String, BenchRecord>,
    ) -> Result<Self, EvalError> {
        let enumeration = enumerate(space, DEFAULT_ENUMERATION_CAP)?;
        let mut by_index: Vec<Option<BenchRecord>> = vec![None; enumeration.len()];
        for (digits, record) in records {
            let arch = Architecture::from_digits(digits)
                .map_err(|e| EvalError::Schema(format!("bad record key \"{digits}\": {e}")))?;
            let idx = enumeration
                .index_of(&arch)
                .ok_or_else(|| EvalError::Schema(format!("record \"{digits}\" not in space")))?;
            if by_index[idx].is_some() {
                return Err(EvalError::Schema(format!("duplicate record \"{digits}\"")));
            }
            by_index[idx] = Some(record.clone());
        }
        let mut table = Vec::with_capacity(enumeration.len());
        for (idx, slot) in by_index.into_iter().enumerate() {
            match slot {
                Some(r) => table.push(r),
                None => {
                    return Err(EvalError::Coverage(
                        enumeration.arch_at(idx).to_string(),
                    ))
                }
            }
        }
        let ranks = rank_by_accuracy(&table);
        Ok(TabularBenchmark {
            space_id: space_id.to_string(),
            space: space.clone(),
            enumeration,
            records: table,
            ranks,
            sigma_acc: 0.0,
            t_ramp: 0.0,
        })
    }

    pub fn from_json(text: &str, space: &SearchSpace) -> Result<Self, EvalError> {
        let file: BenchmarkFile = serde_json::from_str(text)
            .map_err(|e| EvalError::Schema(format!("malformed benchmark JSON: {e}")))?;
        Self::from_records(&file.space, space, &file.records)
    }

    pub fn to_json(&self) -> String {
        let records: BTreeMap<String, BenchRecord> = self
            .enumeration
            .iter()
            .zip(&self.records)
            .map(|(a, r)| (a.to_digits(), r.clone()))
            .collect();
        let file = BenchmarkFile {
            space: self.space_id.clone(),
            records,
        };
        serde_json::to_string_pretty(&file).expect("benchmark serialization cannot fail")
    }

    /// Sets mini-batch noise width and reward ramp; both default to off.
    pub fn with_noise(mut self, sigma_acc: f64, t_ramp: f64) -> Self {
        self.sigma_acc = sigma_acc;
        self.t_ramp = t_ramp;
        self
    }

    pub fn space_id(&self) -> &str {
        &self.space_id
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn enumeration(&self) -> &Enumeration {
        &self.enumeration
    }

    pub fn record(&self, index: usize) -> &BenchRecord {
        &self.records[index]
    }

    pub fn rank_of_index(&self, index: usize) -> usize {
        self.ranks[index]
    }

    pub fn rank_of(&self, arch: &Architecture) -> Option<usize> {
        self.enumeration.index_of(arch).map(|i| self.ranks[i])
    }

    /// Canonical index of the rank-1 architecture.
    pub fn best_index(&self) -> usize {
        self.ranks.iter().position(|&r| r == 1).expect("rank 1 exists")
    }

    fn index_of(&self, arch: &Architecture) -> Result<usize, EvalError> {
        self.enumeration
            .index_of(arch)
            .ok_or_else(|| EvalError::Coverage(arch.to_string()))
    }
}

/// 1-based ranks by accuracy descending, lower index winning ties.
fn rank_by_accuracy(records: &[BenchRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b]
            .acc
            .partial_cmp(&records[a].acc)
            .expect("accuracies are finite")
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0; records.len()];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    ranks
}

/// Loads a benchmark JSON file and checks it covers the space exactly.
pub fn load_benchmark(path: &Path, space: &SearchSpace) -> Result<TabularBenchmark, EvalError> {
    let text = std::fs::read_to_string(path)?;
    TabularBenchmark::from_json(&text, space)
}

impl Evaluator for TabularBenchmark {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(
        &self,
        arch: &Architecture,
        t: f64,
        rng: &mut dyn RngCore,
    ) -> Result<EvalOutcome, EvalError> {
        let idx = self.index_of(arch)?;
        let record = &self.records[idx];
        let clean = record.acc / 100.0;
        let noise = if self.sigma_acc > 0.0 {
            Normal::new(0.0, self.sigma_acc)
                .expect("positive sigma")
                .sample(rng)
        } else {
            0.0
        };
        Ok(EvalOutcome {
            accuracy: clamp01(clean * ramp(t, self.t_ramp) + noise),
            outputs: None,
            flops: record.flops,
        })
    }

    fn output_vectors(
        &self,
        _arch: &Architecture,
        _batch_size: usize,
        _t: f64,
    ) -> Result<Vec<Vec<f64>>, EvalError> {
        // The table format stores no logits, so learned trees over a tabular
        // backend fall back to encoding distances.
        Err(EvalError::OutputsUnavailable)
    }

    fn clean_accuracy(&self, arch: &Architecture) -> Result<f64, EvalError> {
        Ok(self.records[self.index_of(arch)?].acc / 100.0)
    }
}

/// Knobs of the synthetic supernet. Defaults give a CIFAR-10-shaped simulator
/// with non-additive node interactions and noise that anneals with progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Output classes C.
    pub classes: usize,
    /// Latent embedding dimension of z(a).
    pub latent_dim: usize,
    /// Mini-batch reward noise width.
    pub sigma_acc: f64,
    /// Reward ramp length; see [`ramp`].
    pub t_ramp: f64,
    /// Fraction of node pairs given a pairwise interaction term.
    pub interaction_density: f64,
    /// Magnitude of interaction coefficients relative to the linear part.
    pub interaction_scale: f64,
    /// Strength of a symmetric quadratic over the latent embedding; adds
    /// dense joint structure that is a function of z(a), so output distances
    /// reflect it. Zero disables it.
    pub quad_scale: f64,
    /// Output-logit noise at t=0; decays linearly to 0 at t=1.
    pub noise_scale: f64,
    /// Gain applied to output logits before softmax.
    pub logit_gain: f64,
    /// Spread of fixed per-sample logit offsets (simulated validation inputs).
    pub sample_spread: f64,
    /// Weight of an architecture's quality score on each sample's true-class
    /// logit. Accurate architectures then produce visibly more confident
    /// outputs, as trained-supernet validation outputs do. Zero disables it.
    pub confidence_gain: f64,
    /// Width of a per-architecture reward distortion that anneals linearly
    /// with t, standing in for weight-sharing misranking early in supernet
    /// training. Zero disables it.
    pub bias_scale: f64,
    /// Fraction of the distortion that never anneals away: weight sharing
    /// misranks architectures even in a fully trained supernet.
    pub bias_floor: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            classes: 10,
            latent_dim: 8,
            sigma_acc: 0.02,
            t_ramp: 0.4,
            interaction_density: 0.3,
            interaction_scale: 0.4,
            quad_scale: 0.0,
            noise_scale: 1.0,
            logit_gain: 1.0,
            sample_spread: 0.2,
            confidence_gain: 0.0,
            bias_scale: 0.0,
            bias_floor: 0.0,
        }
    }
}

/// Simulated supernet: quality is a logistic of a sparse quadratic over
/// one-hot features whose linear part is aligned with the latent projection,
/// so output-space distance carries quality signal once noise anneals.
#[derive(Debug, Clone)]
pub struct SyntheticSupernet {
    config: SyntheticConfig,
    space: SearchSpace,
    /// Latent projection Φ, latent_dim rows of one_hot_len columns.
    projection: Vec<Vec<f64>>,
    /// Linear feature coefficients Φᵀw, so the linear part equals w·z(a).
    linear: Vec<f64>,
    /// Sparse pairwise terms (feature, feature, coefficient).
    interactions: Vec<(usize, usize, f64)>,
    /// Symmetric latent quadratic, pre-scaled; empty when quad_scale is 0.
    latent_quad: Vec<Vec<f64>>,
    /// Output head M, classes rows of latent_dim columns.
    head: Vec<Vec<f64>>,
    /// Normalizes the linear part to roughly unit variance across the space.
    lin_scale: f64,
}

const SAMPLE_SALT: u64 = 0x5eed_0f5a_3b9a_c001;
const NOISE_SALT: u64 = 0x5eed_0f5a_3b9a_c002;
const BIAS_SALT: u64 = 0x5eed_0f5a_3b9a_c003;
const QUAD_SALT: u64 = 0x5eed_0f5a_3b9a_c004;

fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    *state = z ^ (z >> 31);
}

/// Folds the given parts into one seed via splitmix64. Order sensitive, so
/// (run seed, salt) streams never collide with (salt, run seed) streams.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        state ^= p;
        splitmix64(&mut state);
    }
    state
}

fn arch_key(arch: &Architecture) -> u64 {
    let mut state = 0x1337_c0de_u64;
    for &op in &arch.ops {
        state ^= op as u64;
        splitmix64(&mut state);
    }
    state
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

impl SyntheticSupernet {
    pub fn new(space: &SearchSpace, config: SyntheticConfig) -> Self {
        let feat_len = space.one_hot_len();
        let d = config.latent_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

        let col_std = 1.0 / (feat_len as f64).sqrt();
        let projection: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..feat_len).map(|_| std_normal.sample(&mut rng) * col_std).collect())
            .collect();
        let w: Vec<f64> = (0..d).map(|_| std_normal.sample(&mut rng)).collect();
        let linear: Vec<f64> = (0..feat_len)
            .map(|f| (0..d).map(|k| projection[k][f] * w[k]).sum())
            .collect();

        let mut interactions = Vec::new();
        let n = space.num_nodes();
        let mut offsets = vec![0usize; n];
        let mut acc = 0;
        for i in 0..n {
            offsets[i] = acc;
            acc += space.arity(i);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(config.interaction_density) {
                    let oi = rng.gen_range(0..space.arity(i));
                    let oj = rng.gen_range(0..space.arity(j));
                    let coef = std_normal.sample(&mut rng) * config.interaction_scale;
                    interactions.push((offsets[i] + oi, offsets[j] + oj, coef));
                }
            }
        }

        // Orthonormal head columns make M an isometry on the latent space
        // (for latent_dim <= classes), so output distances track ||z - z'||.
        let c = config.classes;
        let mut cols: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..c).map(|_| std_normal.sample(&mut rng)).collect())
            .collect();
        for j in 0..d.min(c) {
            for k in 0..j {
                let dot: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                let prev = cols[k].clone();
                for (x, y) in cols[j].iter_mut().zip(&prev) {
                    *x -= dot * y;
                }
            }
            let norm: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-9 {
                for x in cols[j].iter_mut() {
                    *x /= norm;
                }
            }
        }
        let head: Vec<Vec<f64>> = (0..c).map(|ci| (0..d).map(|k| cols[k][ci]).collect()).collect();

        // Var of the linear part is ~ n·d/feat_len under the draws above.
        let lin_var = n as f64 * d as f64 / feat_len as f64;
        let lin_scale = 1.0 / lin_var.sqrt().max(1e-12);

        // Separate stream so turning the quadratic on or off leaves every
        // other draw untouched. 3/d roughly standardizes z'Az across archs.
        let latent_quad = if config.quad_scale != 0.0 {
            let mut qrng = ChaCha8Rng::seed_from_u64(mix_seed(&[config.seed, QUAD_SALT]));
            let scale = config.quad_scale * 3.0 / d as f64;
            let mut a = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in i..d {
                    let v = std_normal.sample(&mut qrng) * scale;
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
            a
        } else {
            Vec::new()
        };

        SyntheticSupernet {
            config,
            space: space.clone(),
            projection,
            linear,
            interactions,
            latent_quad,
            head,
            lin_scale,
        }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    fn features(&self, arch: &Architecture) -> Result<Vec<f64>, EvalError> {
        Ok(encode(&self.space, arch, EncodingKind::OneHot, false)?)
    }

    /// Latent embedding z(a) = Φ·φ(a).
    pub fn embedding(&self, arch: &Architecture) -> Result<Vec<f64>, EvalError> {
        let phi = self.features(arch)?;
        Ok(self
            .projection
            .iter()
            .map(|row| row.iter().zip(&phi).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Pre-logistic quality score: linear part plus feature and latent
    /// interactions. Unbounded, roughly unit scale.
    fn score(&self, arch: &Architecture) -> Result<f64, EvalError> {
        let phi = self.features(arch)?;
        let lin: f64 = self
            .linear
            .iter()
            .zip(&phi)
            .map(|(c, f)| c * f)
            .sum::<f64>()
            * self.lin_scale;
        let quad: f64 = self
            .interactions
            .iter()
            .map(|&(p, q, c)| c * phi[p] * phi[q])
            .sum();
        let mut raw = lin + quad;
        if !self.latent_quad.is_empty() {
            let z: Vec<f64> = self
                .projection
                .iter()
                .map(|row| row.iter().zip(&phi).map(|(a, b)| a * b).sum())
                .collect();
            raw += self
                .latent_quad
                .iter()
                .zip(&z)
                .map(|(row, &zi)| zi * row.iter().zip(&z).map(|(a, &zj)| a * zj).sum::<f64>())
                .sum::<f64>();
        }
        Ok(raw)
    }

    /// Base quality q(a) in (0, 1), deterministic given the seed.
    pub fn quality(&self, arch: &Architecture) -> Result<f64, EvalError> {
        Ok(1.0 / (1.0 + (-self.score(arch)?).exp()))
    }

    /// Logit noise magnitude at progress t; non-increasing, zero at t=1.
    pub fn eta(&self, t: f64) -> f64 {
        self.config.noise_scale * (1.0 - t.clamp(0.0, 1.0))
    }

    /// Deterministic per-architecture reward distortion at progress t. Fades
    /// linearly toward bias_floor at t=1, so rewards misrank architectures
    /// the way a weight-sharing supernet does, worst while under-trained.
    pub fn distortion(&self, arch: &Architecture, t: f64) -> f64 {
        if self.config.bias_scale == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
            self.config.seed,
            BIAS_SALT,
            arch_key(arch),
        ]));
        let u: f64 = rng.gen_range(-1.0..1.0);
        let fade = (1.0 - t.clamp(0.0, 1.0)).max(self.config.bias_floor);
        self.config.bias_scale * u * fade
    }
}

impl Evaluator for SyntheticSupernet {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(
        &self,
        arch: &Architecture,
        t: f64,
        rng: &mut dyn RngCore,
    ) -> Result<EvalOutcome, EvalError> {
        let q = self.quality(arch)? + self.distortion(arch, t);
        let noise = if self.config.sigma_acc > 0.0 {
            Normal::new(0.0, self.config.sigma_acc)
                .expect("positive sigma")
                .sample(rng)
        } else {
            0.0
        };
        let flops = self.space.cost(arch).ok();
        Ok(EvalOutcome {
            accuracy: clamp01(q * ramp(t, self.config.t_ramp) + noise),
            outputs: None,
            flops,
        })
    }

    fn output_vectors(
        &self,
        arch: &Architecture,
        batch_size: usize,
        t: f64,
    ) -> Result<Vec<Vec<f64>>, EvalError> {
        let z = self.embedding(arch)?;
        let raw = if self.config.confidence_gain != 0.0 {
            self.score(arch)?
        } else {
            0.0
        };
        let eta = self.eta(t);
        let key = arch_key(arch);
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut rows = Vec::with_capacity(batch_size);
        for b in 0..batch_size {
            // Per-sample offset is shared across architectures; row noise is
            // keyed by (seed, arch, sample, t) so outputs are call-order free.
            let mut sample_rng =
                ChaCha8Rng::seed_from_u64(mix_seed(&[self.config.seed, SAMPLE_SALT, b as u64]));
            let mut noise_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
                self.config.seed,
                NOISE_SALT,
                key,
                b as u64,
                t.to_bits(),
            ]));
            let mut logits: Vec<f64> = self
                .head
                .iter()
                .map(|row| {
                    let mz: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
                    let u = std_normal.sample(&mut sample_rng) * self.config.sample_spread;
                    let xi = std_normal.sample(&mut noise_rng);
                    self.config.logit_gain * (mz + u) + eta * xi
                })
                .collect();
            // The sample's true class: better architectures put more mass on
            // it, so output distances reflect quality differences too.
            let label = sample_rng.gen_range(0..logits.len());
            logits[label] += self.config.logit_gain * self.config.confidence_gain * raw;
            softmax_in_place(&mut logits);
            rows.push(logits);
        }
        Ok(rows)
    }

    fn clean_accuracy(&self, arch: &Architecture) -> Result<f64, EvalError> {
        self.quality(arch)
    }
}
