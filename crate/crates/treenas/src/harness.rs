//! Experiment orchestration: single search runs, multi-seed strategy
//! comparisons, and pre-train budget sweeps, together with the serialized
//! records and CSV tables they produce.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{build_matrix, encoding_matrix, DistanceError, Measure};
use crate::eval::{
    load_benchmark, mix_seed, EvalError, Evaluator, SyntheticConfig, SyntheticSupernet,
    TabularBenchmark,
};
use crate::hierarchy::{
    accuracy_partition_tree, agglomerative, default_tree, export_tree, random_tree, HierarchyError,
    Linkage, SearchTree,
};
use crate::presets;
use crate::sampler::{Sampler, SamplerError, ScheduleKind, TemperatureSchedule};
use crate::space::{
    enumerate, Architecture, EncodingKind, Enumeration, SearchSpace, SpaceError,
    DEFAULT_ENUMERATION_CAP,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Search strategy. Flat strategies sample the space directly over the whole
/// budget; tree strategies pre-train, build a hierarchy, then run tree search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    Independent,
    Boltzmann,
    MctsDefault,
    MctsDefaultReg,
    MctsRandom,
    MctsAccPartition,
    MctsLearned,
    MctsLearnedZeroCost,
}

impl Strategy {
    pub const ALL: [Strategy; 9] = [
        Strategy::Uniform,
        Strategy::Independent,
        Strategy::Boltzmann,
        Strategy::MctsDefault,
        Strategy::MctsDefaultReg,
        Strategy::MctsRandom,
        Strategy::MctsAccPartition,
        Strategy::MctsLearned,
        Strategy::MctsLearnedZeroCost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Independent => "independent",
            Strategy::Boltzmann => "boltzmann",
            Strategy::MctsDefault => "mcts_default",
            Strategy::MctsDefaultReg => "mcts_default_reg",
            Strategy::MctsRandom => "mcts_random",
            Strategy::MctsAccPartition => "mcts_acc_partition",
            Strategy::MctsLearned => "mcts_learned",
            Strategy::MctsLearnedZeroCost => "mcts_learned_zero_cost",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        Strategy::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_flat(self) -> bool {
        matches!(
            self,
            Strategy::Uniform | Strategy::Independent | Strategy::Boltzmann
        )
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Strategy::MctsLearned | Strategy::MctsLearnedZeroCost)
    }
}

/// Reward backend: a benchmark table or the synthetic supernet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluatorSpec {
    Tabular {
        /// Preset name or path to a benchmark JSON file.
        benchmark: String,
    },
    Synthetic {
        #[serde(flatten, default)]
        config: SyntheticConfig,
    },
}

impl EvaluatorSpec {
    /// Synthetic backend with default parameters.
    pub fn default_synthetic() -> EvaluatorSpec {
        EvaluatorSpec::Synthetic {
            config: SyntheticConfig::default(),
        }
    }
}

fn d_total_steps() -> u64 {
    10_000
}
fn d_pretrain_frac() -> f64 {
    0.40
}
fn d_warmup_frac() -> f64 {
    0.25
}
fn d_measure() -> Measure {
    Measure::Kl
}
fn d_linkage() -> Linkage {
    Linkage::Average
}
fn d_schedule() -> TemperatureSchedule {
    // Horizon 0 means "fill in from the phase length at run time".
    TemperatureSchedule::linear(0.02, 0.0025, 0)
}
fn d_beta() -> f64 {
    0.95
}
fn d_lambda() -> f64 {
    0.5
}
fn d_beta_reg() -> f64 {
    0.99
}
fn d_sigma_acc() -> f64 {
    0.02
}
fn d_t_ramp() -> f64 {
    0.4
}
fn d_k_final() -> usize {
    5
}
fn d_final_evals() -> usize {
    1
}
fn d_batch_size() -> usize {
    8
}
fn d_encoding() -> EncodingKind {
    EncodingKind::OneHot
}
fn d_budget_lower_frac() -> f64 {
    0.9
}

/// Everything one search run needs. Serializable so results carry their own
/// provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Preset name ("pooling", "bench_macro") or path to a space JSON file.
    pub space: String,
    pub evaluator: EvaluatorSpec,
    pub strategy: Strategy,
    #[serde(default = "d_total_steps")]
    pub total_steps: u64,
    #[serde(default = "d_pretrain_frac")]
    pub pretrain_frac: f64,
    #[serde(default = "d_warmup_frac")]
    pub warmup_frac: f64,
    #[serde(default = "d_measure")]
    pub measure: Measure,
    #[serde(default = "d_linkage")]
    pub linkage: Linkage,
    #[serde(default = "d_schedule")]
    pub schedule: TemperatureSchedule,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_beta_reg")]
    pub beta_reg: f64,
    /// Evaluation noise; applies to tabular lookups and overrides the
    /// synthetic config's own value.
    #[serde(default = "d_sigma_acc")]
    pub sigma_acc: f64,
    #[serde(default = "d_t_ramp")]
    pub t_ramp: f64,
    #[serde(default = "d_k_final")]
    pub k_final: usize,
    /// Reward draws averaged per candidate when scoring the final selection;
    /// stands in for a full validation pass over each finalist.
    #[serde(default = "d_final_evals")]
    pub final_evals: usize,
    /// Temperature for the final candidate draws. None reuses the schedule's
    /// end temperature; a warmer value spreads the draws over more of the
    /// believed-best region instead of collapsing onto one architecture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select_temp: Option<f64>,
    /// Rows per output matrix when building learned trees.
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default = "d_encoding")]
    pub encoding: EncodingKind,
    #[serde(default)]
    pub encoding_weighted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_mflops: Option<f64>,
    #[serde(default = "d_budget_lower_frac")]
    pub budget_lower_frac: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Minimal config with paper-shaped defaults for everything else.
    pub fn new(space: &str, evaluator: EvaluatorSpec, strategy: Strategy) -> Self {
        RunConfig {
            space: space.to_string(),
            evaluator,
            strategy,
            total_steps: d_total_steps(),
            pretrain_frac: d_pretrain_frac(),
            warmup_frac: d_warmup_frac(),
            measure: d_measure(),
            linkage: d_linkage(),
            schedule: d_schedule(),
            beta: d_beta(),
            lambda: d_lambda(),
            beta_reg: d_beta_reg(),
            sigma_acc: d_sigma_acc(),
            t_ramp: d_t_ramp(),
            k_final: d_k_final(),
            final_evals: d_final_evals(),
            select_temp: None,
            batch_size: d_batch_size(),
            encoding: d_encoding(),
            encoding_weighted: false,
            budget_mflops: None,
            budget_lower_frac: d_budget_lower_frac(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.space.is_empty() {
            return bad("space must be a preset name or file path".into());
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive".into());
        }
        if !(self.pretrain_frac >= 0.0 && self.warmup_frac >= 0.0) {
            return bad("phase fractions must be nonnegative".into());
        }
        if self.pretrain_frac + self.warmup_frac > 1.0 + 1e-12 {
            return bad(format!(
                "phase fractions sum to {} > 1",
                self.pretrain_frac + self.warmup_frac
            ));
        }
        self.schedule.validate()?;
        for (name, v) in [("beta", self.beta), ("beta_reg", self.beta_reg)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return bad(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if self.sigma_acc < 0.0 {
            return bad(format!("sigma_acc must be nonnegative, got {}", self.sigma_acc));
        }
        if !(0.0..=1.0).contains(&self.t_ramp) {
            return bad(format!("t_ramp must lie in [0, 1], got {}", self.t_ramp));
        }
        if self.k_final == 0 {
            return bad("k_final must be at least 1".into());
        }
        if self.final_evals == 0 {
            return bad("final_evals must be at least 1".into());
        }
        if let Some(temp) = self.select_temp {
            if !(temp > 0.0) {
                return bad(format!("select_temp must be positive, got {temp}"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.budget_mflops.is_some() && !(self.budget_lower_frac > 0.0 && self.budget_lower_frac <= 1.0) {
            return bad(format!(
                "budget_lower_frac must lie in (0, 1], got {}",
                self.budget_lower_frac
            ));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        HarnessError::InvalidConfig(format!("config file {}: {e}", path.display()))
    })?;
    let config: RunConfig = serde_json::from_str(&text)?;
    Ok(config)
}

/// One evaluated step of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub arch: String,
    /// Observed (noisy, progress-ramped) reward in [0, 1].
    pub reward: f64,
    /// Ground-truth accuracy of the best architecture evaluated so far, in
    /// the backend's native units (percent for tables).
    pub best_acc: f64,
    pub best_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalPick {
    pub arch: String,
    /// Selection-time evaluation score, native units.
    pub score: f64,
}

/// Full result of one run: per-step series, built tree, final selection, and
/// a config echo. Byte-identical across invocations for a fixed (config,
/// seed), except for `wall_time_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub seed: u64,
    pub steps: Vec<StepLog>,
    /// Newick export of the built hierarchy, for tree strategies.
    pub tree: Option<String>,
    pub final_selection: Vec<FinalPick>,
    pub final_arch: Option<String>,
    /// Ground-truth accuracy of the selected architecture, native units.
    pub final_acc: Option<f64>,
    pub final_rank: Option<usize>,
    /// Evaluate calls made inside the step loops.
    pub evals: u64,
    /// Budget-filter rejections, counted separately from evals.
    pub rejections: u64,
    pub error: Option<String>,
    pub wall_time_ms: f64,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<RunRecord, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Serialization with the wall-time field zeroed; equal for reruns of the
    /// same (config, seed).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.wall_time_ms = 0.0;
        serde_json::to_string(&c).expect("record serialization cannot fail")
    }

    /// Per-step CSV of the searched series.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("step,arch,reward,best_acc,best_rank\n");
        for s in &self.steps {
            let rank = s.best_rank.map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.step, s.arch, s.reward, s.best_acc, rank
            ));
        }
        out
    }
}

pub fn resolve_space(id: &str) -> Result<SearchSpace, HarnessError> {
    if let Some(space) = presets::space_by_name(id) {
        return Ok(space);
    }
    let text = std::fs::read_to_string(id)
        .map_err(|e| HarnessError::InvalidConfig(format!("space \"{id}\": {e}")))?;
    Ok(SearchSpace::from_json(&text)?)
}

enum Backend {
    Tabular(TabularBenchmark),
    Synthetic {
        net: SyntheticSupernet,
        clean: Vec<f64>,
        ranks: Vec<usize>,
    },
}

impl Backend {
    fn evaluator(&self) -> &dyn Evaluator {
        match self {
            Backend::Tabular(b) => b,
            Backend::Synthetic { net, .. } => net,
        }
    }

    /// Ground-truth accuracy in native units: table percent, or the synthetic
    /// latent quality.
    fn clean_display(&self, idx: usize) -> f64 {
        match self {
            Backend::Tabular(b) => b.record(idx).acc,
            Backend::Synthetic { clean, .. } => clean[idx],
        }
    }

    fn rank(&self, idx: usize) -> usize {
        match self {
            Backend::Tabular(b) => b.rank_of_index(idx),
            Backend::Synthetic { ranks, .. } => ranks[idx],
        }
    }

    fn display_scale(&self) -> f64 {
        match self {
            Backend::Tabular(_) => 100.0,
            Backend::Synthetic { .. } => 1.0,
        }
    }
}

struct RunContext {
    config: RunConfig,
    space: SearchSpace,
    en: Enumeration,
    backend: Backend,
}

impl RunContext {
    fn build(config: &RunConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let space = resolve_space(&config.space)?;
        let backend = match &config.evaluator {
            EvaluatorSpec::Tabular { benchmark } => {
                let bench = match presets::benchmark_by_name(benchmark) {
                    Some(b) => b,
                    None => load_benchmark(Path::new(benchmark), &space)?,
                };
                if bench.space() != &space {
                    return Err(HarnessError::InvalidConfig(format!(
                        "benchmark \"{benchmark}\" does not cover space \"{}\"",
                        config.space
                    )));
                }
                Backend::Tabular(bench.with_noise(config.sigma_acc, config.t_ramp))
            }
            EvaluatorSpec::Synthetic { config: synth } => {
                // Per-seed landscape: same config and seed always rebuild the
                // same ground truth; different run seeds get fresh landscapes.
                let mut cfg = synth.clone();
                cfg.seed = mix_seed(&[synth.seed, config.seed]);
                cfg.sigma_acc = config.sigma_acc;
                cfg.t_ramp = config.t_ramp;
                let net = SyntheticSupernet::new(&space, cfg);
                let en = enumerate(&space, DEFAULT_ENUMERATION_CAP)?;
                let mut clean = Vec::with_capacity(en.len());
                for arch in en.iter() {
                    clean.push(net.quality(arch)?);
                }
                let mut order: Vec<usize> = (0..clean.len()).collect();
                order.sort_by(|&a, &b| {
                    clean[b]
                        .partial_cmp(&clean[a])
                        .expect("qualities are finite")
                        .then(a.cmp(&b))
                });
                let mut ranks = vec![0usize; clean.len()];
                for (pos, &idx) in order.iter().enumerate() {
                    ranks[idx] = pos + 1;
                }
                Backend::Synthetic { net, clean, ranks }
            }
        };
        let en = enumerate(&space, DEFAULT_ENUMERATION_CAP)?;
        Ok(RunContext {
            config: config.clone(),
            space,
            en,
            backend,
        })
    }

    fn execute(&self) -> RunRecord {
        let start = Instant::now();
        let cfg = &self.config;
        let mut record = RunRecord {
            config: cfg.clone(),
            seed: cfg.seed,
            steps: Vec::with_capacity(cfg.total_steps as usize),
            tree: None,
            final_selection: Vec::new(),
            final_arch: None,
            final_acc: None,
            final_rank: None,
            evals: 0,
            rejections: 0,
            error: None,
            wall_time_ms: 0.0,
        };
        if let Err(e) = self.phases(&mut record) {
            record.error = Some(e.to_string());
        }
        record.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        record
    }

    fn observe(
        &self,
        record: &mut RunRecord,
        best: &mut Option<(usize, f64)>,
        step: u64,
        idx: usize,
        reward: f64,
    ) {
        let clean = self.backend.clean_display(idx);
        // Ties keep the earlier architecture; the series stays monotone.
        if best.map_or(true, |(_, b)| clean > b) {
            *best = Some((idx, clean));
        }
        let (best_idx, best_acc) = best.expect("just set");
        record.steps.push(StepLog {
            step,
            arch: self.en.arch_at(idx).to_string(),
            reward,
            best_acc,
            best_rank: Some(self.backend.rank(best_idx)),
        });
        record.evals += 1;
    }

    fn draw(
        &self,
        sampler: &Sampler,
        step: u64,
        temp: f64,
        rng: &mut ChaCha8Rng,
        rejections: &mut u64,
    ) -> Result<Architecture, SamplerError> {
        match self.config.budget_mflops {
            Some(budget) => {
                let (arch, attempts) = sampler.sample_within_budget(
                    step,
                    temp,
                    budget,
                    self.config.budget_lower_frac,
                    rng,
                )?;
                *rejections += attempts as u64 - 1;
                Ok(arch)
            }
            None => sampler.sample(step, temp, rng),
        }
    }

    fn build_tree(&self, t_pre: f64, rng_seed: u64) -> Result<SearchTree, HarnessError> {
        let cfg = &self.config;
        match cfg.strategy {
            Strategy::MctsDefault | Strategy::MctsDefaultReg => Ok(default_tree(&self.space)?),
            Strategy::MctsRandom => Ok(random_tree(&self.space, rng_seed)?),
            Strategy::MctsAccPartition => Ok(accuracy_partition_tree(
                &self.space,
                self.backend.evaluator(),
            )?),
            Strategy::MctsLearned => {
                let evaluator = self.backend.evaluator();
                match evaluator.output_vectors(self.en.arch_at(0), cfg.batch_size, t_pre) {
                    Ok(first) => {
                        let mut outputs = Vec::with_capacity(self.en.len());
                        outputs.push(first);
                        for arch in self.en.iter().skip(1) {
                            outputs.push(evaluator.output_vectors(arch, cfg.batch_size, t_pre)?);
                        }
                        let d = build_matrix(&outputs, cfg.measure)?;
                        Ok(agglomerative(&d, cfg.linkage))
                    }
                    Err(EvalError::OutputsUnavailable) => {
                        let d =
                            encoding_matrix(&self.space, cfg.encoding, cfg.encoding_weighted)?;
                        Ok(agglomerative(&d, cfg.linkage))
                    }
                    Err(e) => Err(e.into()),
                }
            }
            Strategy::MctsLearnedZeroCost => {
                let d = encoding_matrix(&self.space, cfg.encoding, cfg.encoding_weighted)?;
                Ok(agglomerative(&d, cfg.linkage))
            }
            _ => unreachable!("flat strategies build no tree"),
        }
    }

    fn phases(&self, record: &mut RunRecord) -> Result<(), HarnessError> {
        let cfg = &self.config;
        let s_total = cfg.total_steps;
        let (pre, warm) = phase_lengths(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut schedule = cfg.schedule;
        if matches!(schedule.kind, ScheduleKind::Linear) && schedule.horizon == 0 {
            schedule.horizon = if cfg.strategy.is_flat() {
                s_total
            } else {
                s_total - pre
            };
        }
        let evaluator = self.backend.evaluator();
        let mut best: Option<(usize, f64)> = None;
        let scale = self.backend.display_scale();

        let finals: Vec<(Architecture, f64)> = if cfg.strategy.is_flat() {
            let mut sampler = match cfg.strategy {
                Strategy::Uniform => Sampler::uniform(&self.space)?,
                Strategy::Independent => Sampler::independent(&self.space, cfg.beta)?,
                Strategy::Boltzmann => Sampler::boltzmann(&self.space, cfg.beta)?,
                _ => unreachable!(),
            };
            // For memoryless uniform search, the believed best is the best
            // single observation; track it here.
            let mut observed: BTreeMap<usize, f64> = BTreeMap::new();
            for step in 0..s_total {
                let t = step as f64 / s_total as f64;
                let temp = schedule.temperature(step);
                let arch = self.draw(&sampler, step, temp, &mut rng, &mut record.rejections)?;
                let outcome = evaluator.evaluate(&arch, t, &mut rng)?;
                sampler.update(&arch, &outcome)?;
                let idx = self.en.index_of(&arch).expect("sampled from own space");
                if cfg.strategy == Strategy::Uniform {
                    let slot = observed.entry(idx).or_insert(f64::NEG_INFINITY);
                    if outcome.accuracy > *slot {
                        *slot = outcome.accuracy;
                    }
                }
                self.observe(record, &mut best, step, idx, outcome.accuracy);
            }
            if cfg.strategy == Strategy::Uniform {
                let mut tops: Vec<(usize, f64)> = observed.into_iter().collect();
                tops.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1)
                        .expect("rewards are finite")
                        .then(a.0.cmp(&b.0))
                });
                tops.truncate(cfg.k_final);
                let val_eval = MeanEval { inner: evaluator, draws: cfg.final_evals };
                let mut scored = Vec::with_capacity(tops.len());
                for (idx, _) in tops {
                    let arch = self.en.arch_at(idx).clone();
                    let outcome = val_eval.evaluate(&arch, 1.0, &mut rng)?;
                    scored.push((idx, arch, outcome.accuracy));
                }
                scored.sort_by(|a, b| {
                    b.2.partial_cmp(&a.2)
                        .expect("rewards are finite")
                        .then(a.0.cmp(&b.0))
                });
                scored.into_iter().map(|(_, a, s)| (a, s)).collect()
            } else {
                sampler.select_final(
                    &MeanEval { inner: evaluator, draws: cfg.final_evals },
                    cfg.k_final,
                    cfg.select_temp.unwrap_or_else(|| schedule.temperature(u64::MAX)),
                    &mut rng,
                )?
            }
        } else {
            let uniform = Sampler::uniform(&self.space)?;
            for step in 0..pre {
                let t = step as f64 / s_total as f64;
                let arch = self.draw(&uniform, step, 1.0, &mut rng, &mut record.rejections)?;
                let outcome = evaluator.evaluate(&arch, t, &mut rng)?;
                let idx = self.en.index_of(&arch).expect("sampled from own space");
                self.observe(record, &mut best, step, idx, outcome.accuracy);
            }
            let t_pre = pre as f64 / s_total as f64;
            let tree = self.build_tree(t_pre, cfg.seed)?;
            record.tree = Some(export_tree(&tree));
            let regularize =
                matches!(cfg.strategy, Strategy::MctsDefaultReg).then_some(cfg.beta_reg);
            let mut sampler = Sampler::mcts(
                &self.space,
                tree,
                cfg.lambda,
                cfg.beta,
                regularize,
                pre + warm,
            )?;
            for step in pre..s_total {
                let t = step as f64 / s_total as f64;
                let temp = schedule.temperature(step - pre);
                let arch = self.draw(&sampler, step, temp, &mut rng, &mut record.rejections)?;
                let outcome = evaluator.evaluate(&arch, t, &mut rng)?;
                sampler.update(&arch, &outcome)?;
                let idx = self.en.index_of(&arch).expect("sampled from own space");
                self.observe(record, &mut best, step, idx, outcome.accuracy);
            }
            sampler.select_final(
                &MeanEval { inner: evaluator, draws: cfg.final_evals },
                cfg.k_final,
                cfg.select_temp.unwrap_or_else(|| schedule.temperature(u64::MAX)),
                &mut rng,
            )?
        };

        record.final_selection = finals
            .iter()
            .map(|(arch, score)| FinalPick {
                arch: arch.to_string(),
                score: score * scale,
            })
            .collect();
        if let Some((arch, _)) = finals.first() {
            let idx = self.en.index_of(arch).expect("selected from own space");
            record.final_arch = Some(arch.to_string());
            record.final_acc = Some(self.backend.clean_display(idx));
            record.final_rank = Some(self.backend.rank(idx));
        }
        Ok(())
    }
}

/// Averages several reward draws per evaluation: the desk-scale stand-in for
/// scoring final candidates on a full validation set instead of a mini-batch.
struct MeanEval<'a> {
    inner: &'a dyn Evaluator,
    draws: usize,
}

impl Evaluator for MeanEval<'_> {
    fn space(&self) -> &SearchSpace {
        self.inner.space()
    }

    fn evaluate(
        &self,
        arch: &Architecture,
        t: f64,
        rng: &mut dyn rand::RngCore,
    ) -> Result<crate::eval::EvalOutcome, EvalError> {
        let mut out = self.inner.evaluate(arch, t, rng)?;
        let mut sum = out.accuracy;
        for _ in 1..self.draws {
            sum += self.inner.evaluate(arch, t, rng)?.accuracy;
        }
        out.accuracy = sum / self.draws.max(1) as f64;
        Ok(out)
    }

    fn output_vectors(
        &self,
        arch: &Architecture,
        batch_size: usize,
        t: f64,
    ) -> Result<Vec<Vec<f64>>, EvalError> {
        self.inner.output_vectors(arch, batch_size, t)
    }

    fn clean_accuracy(&self, arch: &Architecture) -> Result<f64, EvalError> {
        self.inner.clean_accuracy(arch)
    }
}

fn phase_lengths(cfg: &RunConfig) -> (u64, u64) {
    let s = cfg.total_steps as f64;
    let pre = (s * cfg.pretrain_frac).floor() as u64;
    let warm = (s * cfg.warmup_frac).floor() as u64;
    (pre, warm)
}

/// Executes one search run. Configuration and setup errors surface as `Err`;
/// failures after stepping begins return a partial record with its `error`
/// marker set.
pub fn run(config: &RunConfig) -> Result<RunRecord, HarnessError> {
    let ctx = RunContext::build(config)?;
    Ok(ctx.execute())
}

/// Builds the search tree a config's strategy would use without running the
/// search. Learned trees read output vectors at the configured pre-train
/// progress, so the result matches the tree an actual run would build.
pub fn build_strategy_tree(config: &RunConfig) -> Result<SearchTree, HarnessError> {
    config.validate()?;
    if config.strategy.is_flat() {
        return Err(HarnessError::InvalidConfig(format!(
            "strategy {} does not use a tree",
            config.strategy.name()
        )));
    }
    let ctx = RunContext::build(config)?;
    let (pre, _) = phase_lengths(config);
    let t_pre = pre as f64 / config.total_steps as f64;
    ctx.build_tree(t_pre, config.seed)
}

/// One strategy's row in a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub strategy: String,
    pub best_acc: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub best_rank: Option<usize>,
    pub mean_rank: Option<f64>,
    pub seeds: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub rows: Vec<CompareRow>,
    pub records: Vec<RunRecord>,
}

pub const COMPARE_CSV_HEADER: &str = "strategy,best_acc,mean_acc,std_acc,best_rank,mean_rank";

impl CompareSummary {
    pub fn csv(&self) -> String {
        let mut out = String::from(COMPARE_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row_csv(&row.strategy, row));
        }
        out
    }

    /// Fixed-width text table mirroring the CSV, with failures called out.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>9} {:>17} {:>9} {:>10}\n",
            "strategy", "best_acc", "mean_acc", "best_rank", "mean_rank"
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>9.3} {:>9.3} +/- {:<5.3} {:>9} {:>10.1}",
                row.strategy,
                row.best_acc,
                row.mean_acc,
                row.std_acc,
                row.best_rank.map(|r| r.to_string()).unwrap_or_default(),
                row.mean_rank.unwrap_or(f64::NAN),
            ));
            if row.failures > 0 {
                out.push_str(&format!("  [{} of {} seeds failed]", row.failures, row.seeds));
            }
            out.push('\n');
        }
        out
    }
}

fn row_csv(label: &str, row: &CompareRow) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        label,
        row.best_acc,
        row.mean_acc,
        row.std_acc,
        row.best_rank.map(|r| r.to_string()).unwrap_or_default(),
        row.mean_rank.map(|r| r.to_string()).unwrap_or_default(),
    )
}

fn summarize(strategy: &str, records: &[RunRecord], seeds: u64) -> CompareRow {
    let mut accs = Vec::new();
    let mut ranks = Vec::new();
    let mut failures = 0;
    for rec in records {
        if rec.error.is_some() {
            failures += 1;
        } else if let (Some(acc), Some(rank)) = (rec.final_acc, rec.final_rank) {
            accs.push(acc);
            ranks.push(rank);
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    let mean_acc = mean(&accs);
    let std_acc = if accs.len() < 2 {
        0.0
    } else {
        let m = mean_acc;
        (accs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (accs.len() - 1) as f64).sqrt()
    };
    CompareRow {
        strategy: strategy.to_string(),
        best_acc: accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean_acc,
        std_acc,
        best_rank: ranks.iter().min().copied(),
        mean_rank: if ranks.is_empty() {
            None
        } else {
            Some(ranks.iter().sum::<usize>() as f64 / ranks.len() as f64)
        },
        seeds,
        failures,
    }
}

/// Runs every config over `seeds_per_config` seeds (base seed + offset) and
/// aggregates per-strategy statistics. All configs must share the space and
/// evaluator so accuracies and ranks are comparable.
pub fn compare(
    configs: &[RunConfig],
    seeds_per_config: u64,
) -> Result<CompareSummary, HarnessError> {
    if configs.is_empty() {
        return Err(HarnessError::InvalidConfig("no configs to compare".into()));
    }
    if seeds_per_config == 0 {
        return Err(HarnessError::InvalidConfig(
            "seeds_per_config must be at least 1".into(),
        ));
    }
    for cfg in configs {
        cfg.validate()?;
        if cfg.space != configs[0].space || cfg.evaluator != configs[0].evaluator {
            return Err(HarnessError::InvalidConfig(
                "compare requires all configs to share space and evaluator".into(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(configs.len());
    let mut records = Vec::with_capacity(configs.len() * seeds_per_config as usize);
    for cfg in configs {
        let mut these = Vec::with_capacity(seeds_per_config as usize);
        for offset in 0..seeds_per_config {
            let mut c = cfg.clone();
            c.seed = cfg.seed + offset;
            these.push(run(&c)?);
        }
        rows.push(summarize(cfg.strategy.name(), &these, seeds_per_config));
        records.extend(these);
    }
    Ok(CompareSummary { rows, records })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub pretrain_steps: u64,
    pub row: CompareRow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
    pub records: Vec<RunRecord>,
}

impl SweepSummary {
    pub fn csv(&self) -> String {
        let mut out =
            String::from("pretrain_steps,best_acc,mean_acc,std_acc,best_rank,mean_rank\n");
        for p in &self.points {
            out.push_str(&row_csv(&p.pretrain_steps.to_string(), &p.row));
        }
        out
    }
}

/// Re-runs a learned-tree config with the pre-train budget swept over `grid`
/// (absolute steps out of the same total). The warm-up/search split keeps its
/// configured proportions over the remaining steps.
pub fn sweep_pretrain_budget(
    config: &RunConfig,
    grid: &[u64],
    seeds_per_point: u64,
) -> Result<SweepSummary, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::InvalidConfig("empty pre-train grid".into()));
    }
    if seeds_per_point == 0 {
        return Err(HarnessError::InvalidConfig(
            "seeds_per_point must be at least 1".into(),
        ));
    }
    if !config.strategy.is_learned() {
        return Err(HarnessError::InvalidConfig(format!(
            "pre-train sweep needs a learned-tree strategy, got {}",
            config.strategy.name()
        )));
    }
    config.validate()?;
    let mut points = Vec::with_capacity(grid.len());
    let mut records = Vec::new();
    for &steps in grid {
        if steps > config.total_steps {
            return Err(HarnessError::InvalidConfig(format!(
                "grid point {steps} exceeds total_steps {}",
                config.total_steps
            )));
        }
        let mut c = config.clone();
        c.pretrain_frac = steps as f64 / config.total_steps as f64;
        let rest = 1.0 - c.pretrain_frac;
        let wf = config.warmup_frac;
        let sf = (1.0 - config.pretrain_frac - config.warmup_frac).max(0.0);
        c.warmup_frac = if wf + sf > 0.0 { rest * wf / (wf + sf) } else { 0.0 };
        let mut these = Vec::with_capacity(seeds_per_point as usize);
        for offset in 0..seeds_per_point {
            let mut cs = c.clone();
            cs.seed = c.seed + offset;
            these.push(run(&cs)?);
        }
        points.push(SweepPoint {
            pretrain_steps: steps,
            row: summarize(config.strategy.name(), &these, seeds_per_point),
        });
        records.extend(these);
    }
    Ok(SweepSummary { points, records })
}

/// Exact one-sided sign test: probability of at least `wins` successes in `n`
/// fair coin flips.
pub fn sign_test_p(wins: u64, n: u64) -> f64 {
    assert!(wins <= n, "wins cannot exceed trials");
    let binom = |n: u64, k: u64| -> f64 {
        let k = k.min(n - k);
        let mut c = 1.0f64;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        c
    };
    let mut tail = 0.0;
    for k in wins..=n {
        tail += binom(n, k);
    }
    tail / 2f64.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::parse_tree;
    use crate::presets::pooling_benchmark;
    use crate::space::Architecture;

    fn pooling_tabular(strategy: Strategy) -> RunConfig {
        let mut cfg = RunConfig::new(
            "pooling",
            EvaluatorSpec::Tabular {
                benchmark: "pooling".into(),
            },
            strategy,
        );
        cfg.total_steps = 200;
        cfg.sigma_acc = 0.01;
        cfg
    }

    fn macro_tabular(strategy: Strategy) -> RunConfig {
        let mut cfg = RunConfig::new(
            "bench_macro",
            EvaluatorSpec::Tabular {
                benchmark: "bench_macro".into(),
            },
            strategy,
        );
        cfg.total_steps = 300;
        cfg.sigma_acc = 0.01;
        cfg
    }

    #[test]
    fn minimal_config_json_fills_defaults() {
        let text = r#"{
            "space": "pooling",
            "evaluator": {"kind": "tabular", "benchmark": "pooling"},
            "strategy": "mcts_learned"
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.total_steps, 10_000);
        assert_eq!(cfg.beta, 0.95);
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.measure, Measure::Kl);
        assert_eq!(cfg.linkage, Linkage::Average);
        assert_eq!(cfg.k_final, 5);
        assert_eq!(cfg.seed, 0);
        assert_eq!((cfg.pretrain_frac, cfg.warmup_frac), (0.40, 0.25));
        cfg.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn synthetic_spec_json_round_trip() {
        let text = r#"{
            "space": "bench_macro",
            "evaluator": {"kind": "synthetic", "seed": 9, "interaction_scale": 0.5},
            "strategy": "uniform"
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        match &cfg.evaluator {
            EvaluatorSpec::Synthetic { config } => {
                assert_eq!(config.seed, 9);
                assert_eq!(config.interaction_scale, 0.5);
                assert_eq!(config.classes, 10);
            }
            _ => panic!("expected synthetic spec"),
        }
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = pooling_tabular(Strategy::Uniform);
        cfg.pretrain_frac = 0.8;
        cfg.warmup_frac = 0.3;
        assert!(matches!(
            cfg.validate(),
            Err(HarnessError::InvalidConfig(_))
        ));
        let mut cfg = pooling_tabular(Strategy::Uniform);
        cfg.total_steps = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = pooling_tabular(Strategy::Uniform);
        cfg.k_final = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = pooling_tabular(Strategy::Uniform);
        cfg.budget_mflops = Some(10.0);
        cfg.budget_lower_frac = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn uniform_run_record_shape() {
        let mut cfg = pooling_tabular(Strategy::Uniform);
        cfg.seed = 3;
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none());
        assert_eq!(record.steps.len(), 200);
        assert_eq!(record.evals, 200);
        assert_eq!(record.rejections, 0);
        assert!(record.tree.is_none());
        let bench = pooling_benchmark();
        let space = bench.space().clone();
        let mut prev = f64::NEG_INFINITY;
        for s in &record.steps {
            let arch = Architecture::from_digits(&s.arch).unwrap();
            assert!(space.contains(&arch) && space.satisfies_constraint(&arch));
            assert!(s.best_acc >= prev, "best-so-far decreased");
            prev = s.best_acc;
            assert!(s.best_rank.is_some());
        }
        let final_arch = Architecture::from_digits(record.final_arch.as_ref().unwrap()).unwrap();
        assert_eq!(
            record.final_rank.unwrap(),
            bench.rank_of(&final_arch).unwrap()
        );
        assert_eq!(
            record.final_acc.unwrap(),
            bench.record(bench.enumeration().index_of(&final_arch).unwrap()).acc
        );
        assert_eq!(record.final_selection.len().min(5), record.final_selection.len());
        assert!(record.wall_time_ms >= 0.0);
    }

    #[test]
    fn run_is_deterministic_per_seed() {
        let cfg = pooling_tabular(Strategy::MctsDefault);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
        let mut other = cfg.clone();
        other.seed = 1;
        let c = run(&other).unwrap();
        assert_ne!(a.canonical_json(), c.canonical_json());
    }

    #[test]
    fn mcts_run_builds_valid_tree() {
        // Layer-order trees need the unconstrained macro space; the pooling
        // constraint gets a clustered tree instead.
        let cfg = macro_tabular(Strategy::MctsDefault);
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none(), "{:?}", record.error);
        let tree = parse_tree(record.tree.as_ref().unwrap()).unwrap();
        assert_eq!(tree.num_archs(), 6561);
        assert_eq!(record.steps.len(), 300);

        let mut cfg = pooling_tabular(Strategy::MctsRandom);
        cfg.total_steps = 300;
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none(), "{:?}", record.error);
        let tree = parse_tree(record.tree.as_ref().unwrap()).unwrap();
        assert_eq!(tree.num_archs(), 36);
    }

    #[test]
    fn zero_search_steps_still_selects() {
        let mut cfg = pooling_tabular(Strategy::MctsRandom);
        cfg.pretrain_frac = 1.0;
        cfg.warmup_frac = 0.0;
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none());
        assert_eq!(record.steps.len(), 200);
        assert!(record.final_arch.is_some());
        assert!(record.tree.is_some());
    }

    #[test]
    fn learned_fallback_ignores_measure_on_tabular() {
        // Tables expose no output vectors, so all measures reduce to the same
        // encoding-based tree.
        let mut trees = Vec::new();
        for measure in [Measure::Kl, Measure::L2, Measure::CrossEntropy] {
            let mut cfg = pooling_tabular(Strategy::MctsLearned);
            cfg.total_steps = 240;
            cfg.measure = measure;
            let record = run(&cfg).unwrap();
            assert!(record.error.is_none());
            trees.push(record.tree.unwrap());
        }
        assert_eq!(trees[0], trees[1]);
        assert_eq!(trees[0], trees[2]);
    }

    #[test]
    fn synthetic_learned_run_builds_output_tree() {
        let mut cfg = RunConfig::new(
            "pooling",
            EvaluatorSpec::Synthetic {
                config: SyntheticConfig::default(),
            },
            Strategy::MctsLearned,
        );
        cfg.total_steps = 300;
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none(), "{:?}", record.error);
        let tree = parse_tree(record.tree.as_ref().unwrap()).unwrap();
        assert_eq!(tree.num_archs(), 36);
        assert!(record.final_acc.unwrap() <= 1.0);
        assert!(record.final_rank.unwrap() >= 1);
        // The zero-cost variant must differ in provenance but still cover the
        // space.
        cfg.strategy = Strategy::MctsLearnedZeroCost;
        let zc = run(&cfg).unwrap();
        assert!(zc.error.is_none());
        assert_eq!(parse_tree(zc.tree.as_ref().unwrap()).unwrap().num_archs(), 36);
    }

    #[test]
    fn budget_filter_counts_rejections() {
        // Macro costs span [20, 368] MFLOPs; a tight band forces rejections.
        let mut cfg = macro_tabular(Strategy::Uniform);
        cfg.budget_mflops = Some(100.0);
        cfg.budget_lower_frac = 0.8;
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none(), "{:?}", record.error);
        assert!(record.rejections > 0);
        let space = crate::space::bench_macro_space();
        for s in &record.steps {
            let arch = Architecture::from_digits(&s.arch).unwrap();
            let cost = space.cost(&arch).unwrap();
            assert!((80.0..=100.0).contains(&cost), "cost {cost}");
        }
    }

    #[test]
    fn infeasible_budget_marks_partial_record() {
        let mut cfg = macro_tabular(Strategy::Uniform);
        // Below the fixed base cost, so nothing can satisfy the filter.
        cfg.budget_mflops = Some(10.0);
        let record = run(&cfg).unwrap();
        assert!(record.error.is_some());
        assert!(record.steps.is_empty());
    }

    #[test]
    fn compare_emits_contracted_csv() {
        let configs = vec![
            pooling_tabular(Strategy::Uniform),
            pooling_tabular(Strategy::MctsRandom),
        ];
        let summary = compare(&configs, 2).unwrap();
        assert_eq!(summary.rows.len(), 2);
        assert_eq!(summary.records.len(), 4);
        let csv = summary.csv();
        assert!(csv.starts_with("strategy,best_acc,mean_acc,std_acc,best_rank,mean_rank\n"));
        assert!(csv.contains("\nuniform,") || csv.contains("uniform,"));
        for row in &summary.rows {
            assert!(row.best_acc >= row.mean_acc);
            assert!(row.best_rank.unwrap() >= 1);
            assert_eq!(row.failures, 0);
        }
        assert!(!summary.table().is_empty());
    }

    #[test]
    fn single_seed_compare_has_zero_std() {
        let summary = compare(&[pooling_tabular(Strategy::Uniform)], 1).unwrap();
        assert_eq!(summary.rows.len(), 1);
        let row = &summary.rows[0];
        assert_eq!(row.std_acc, 0.0);
        assert_eq!(row.best_acc, row.mean_acc);
        assert_eq!(row.best_rank.map(|r| r as f64), row.mean_rank);
    }

    #[test]
    fn compare_requires_shared_backend() {
        let a = pooling_tabular(Strategy::Uniform);
        let mut b = pooling_tabular(Strategy::MctsDefault);
        b.space = "bench_macro".into();
        b.evaluator = EvaluatorSpec::Tabular {
            benchmark: "bench_macro".into(),
        };
        assert!(matches!(
            compare(&[a, b], 1),
            Err(HarnessError::InvalidConfig(_))
        ));
    }

    #[test]
    fn sweep_rejects_empty_grid_and_flat_strategies() {
        let cfg = pooling_tabular(Strategy::MctsLearned);
        assert!(matches!(
            sweep_pretrain_budget(&cfg, &[], 1),
            Err(HarnessError::InvalidConfig(_))
        ));
        let flat = pooling_tabular(Strategy::Uniform);
        assert!(sweep_pretrain_budget(&flat, &[0, 50], 1).is_err());
        assert!(sweep_pretrain_budget(&cfg, &[10_000], 1).is_err());
    }

    #[test]
    fn sweep_covers_grid_including_zero() {
        let mut cfg = pooling_tabular(Strategy::MctsLearned);
        cfg.total_steps = 150;
        let sweep = sweep_pretrain_budget(&cfg, &[0, 60], 1).unwrap();
        assert_eq!(sweep.points.len(), 2);
        assert_eq!(sweep.points[0].pretrain_steps, 0);
        assert_eq!(sweep.records.len(), 2);
        for p in &sweep.points {
            assert!(p.row.mean_acc.is_finite());
            assert_eq!(p.row.failures, 0);
        }
        let csv = sweep.csv();
        assert!(csv.starts_with("pretrain_steps,best_acc,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn sign_test_matches_exact_binomial() {
        assert!((sign_test_p(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(9, 10) - 11.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(8, 10) - 56.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(0, 10) - 1.0).abs() < 1e-15);
        assert!(sign_test_p(9, 10) < 0.05);
        assert!(sign_test_p(8, 10) > 0.05);
    }

    #[test]
    fn pooling_learned_best_seed_hits_reference_arch() {
        // Reference result: the clustered-tree search lands on the layer
        // pattern [6,2,2] at 91.83, the second-best entry of the table.
        let mut cfg = RunConfig::new(
            "pooling",
            EvaluatorSpec::Tabular {
                benchmark: "pooling".into(),
            },
            Strategy::MctsLearned,
        );
        cfg.total_steps = 10_000;
        cfg.seed = 9;
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none());
        let expected = crate::space::pooling_arch([6, 2, 2]).unwrap();
        assert_eq!(record.final_arch.as_deref(), Some(expected.to_string().as_str()));
        assert_eq!(record.final_acc, Some(91.83));
        assert_eq!(record.final_rank, Some(2));
        // The same run under the l2 measure reduces to the same encoding
        // fallback, so the result is identical.
        let mut l2 = cfg.clone();
        l2.measure = Measure::L2;
        let other = run(&l2).unwrap();
        assert_eq!(other.final_arch, record.final_arch);
        assert_eq!(other.final_acc, Some(91.83));
    }

    #[test]
    fn macro_learned_best_seed_retrieves_rank_one() {
        // High-fidelity final evaluation (sigma 0.002) and the wide selection
        // draw: the best run returns the table optimum exactly.
        let mut cfg = macro_tabular(Strategy::MctsLearned);
        cfg.total_steps = 10_000;
        cfg.k_final = 50;
        cfg.sigma_acc = 0.002;
        cfg.seed = 14;
        let record = run(&cfg).unwrap();
        assert!(record.error.is_none());
        assert_eq!(record.final_arch.as_deref(), Some("22212220"));
        assert_eq!(record.final_acc, Some(93.13));
        assert_eq!(record.final_rank, Some(1));
    }

    #[test]
    fn record_json_round_trip() {
        let cfg = pooling_tabular(Strategy::Boltzmann);
        let record = run(&cfg).unwrap();
        let back = RunRecord::from_json(&record.to_json()).unwrap();
        assert_eq!(back, record);
        let csv = record.steps_csv();
        assert_eq!(csv.lines().count(), 201);
    }
}

