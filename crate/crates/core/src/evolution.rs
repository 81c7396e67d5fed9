//! The (1+lambda) evolutionary strategy over Cartesian genomes, plus
//! multi-run aggregation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::engine::{classify, mutate, random_genome, ClassifyMode, Genome, GenomeConfig};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub lambda: usize,
    pub mutation_rate: f64,
    pub max_iterations: u64,
    pub n_runs: usize,
    pub recurrent_prob: f64,
    pub genome: GenomeConfig,
    pub classify_mode: ClassifyMode,
    pub seed: u64,
    /// Track the best-validation genome as well; evolution itself is always
    /// steered by training fitness only.
    pub select_on_validation: bool,
    pub record_history: bool,
}

impl EvolutionConfig {
    pub fn new(genome: GenomeConfig, seed: u64) -> Self {
        Self {
            lambda: 4,
            mutation_rate: 0.1,
            max_iterations: 15_000,
            n_runs: 10,
            recurrent_prob: if genome.recurrent { 0.1 } else { 0.0 },
            genome,
            classify_mode: ClassifyMode::Wide,
            seed,
            select_on_validation: false,
            record_history: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::InvalidEvolutionConfig("lambda must be >= 1".into()));
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return Err(Error::InvalidEvolutionConfig(format!(
                "mutation rate {} outside (0, 1]",
                self.mutation_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.recurrent_prob) {
            return Err(Error::InvalidProbability(self.recurrent_prob));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidEvolutionConfig("n_runs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Classification accuracy of a genome on a dataset.
pub fn fitness(genome: &Genome, data: &Dataset, mode: ClassifyMode) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for s in data.samples() {
        if classify(genome, &s.features, mode)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn accuracy_opt(genome: &Genome, data: &Dataset, mode: ClassifyMode) -> Result<Option<f64>> {
    if data.is_empty() {
        Ok(None)
    } else {
        fitness(genome, data, mode).map(Some)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub winning_genome: Genome,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub iterations_used: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness_history: Option<Vec<(u64, f64)>>,
    /// Present only with `select_on_validation`: the best genome by
    /// validation accuracy seen among accepted parents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_validation: Option<Box<(Genome, f64)>>,
}

/// One (1+lambda) run. Each iteration produces `lambda` mutants, evaluates
/// training fitness, and replaces the parent when the best mutant is at
/// least as fit (neutral drift). Stops at the iteration budget or perfect
/// training fitness.
pub fn evolve(
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    config: &EvolutionConfig,
    run_seed: u64,
) -> Result<RunResult> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mode = config.classify_mode;
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let mut parent = random_genome(config.genome, config.recurrent_prob, &mut rng)?;
    let mut parent_fit = fitness(&parent, train, mode)?;
    let mut history = vec![(0u64, parent_fit)];
    let mut best_validation: Option<(Genome, f64)> = None;
    let track_val = |genome: &Genome, best: &mut Option<(Genome, f64)>| -> Result<()> {
        if config.select_on_validation && !val.is_empty() {
            let acc = fitness(genome, val, mode)?;
            if best.as_ref().is_none_or(|(_, b)| acc > *b) {
                *best = Some((genome.clone(), acc));
            }
        }
        Ok(())
    };
    track_val(&parent, &mut best_validation)?;

    let mut iterations_used = 0u64;
    for iteration in 1..=config.max_iterations {
        if parent_fit >= 1.0 {
            break;
        }
        iterations_used = iteration;
        let mut best_child: Option<(Genome, f64)> = None;
        for _ in 0..config.lambda {
            let child = mutate(&parent, config.mutation_rate, config.recurrent_prob, &mut rng);
            let fit = fitness(&child, train, mode)?;
            if best_child.as_ref().is_none_or(|(_, b)| fit > *b) {
                best_child = Some((child, fit));
            }
        }
        let (child, child_fit) = best_child.expect("lambda >= 1");
        if child_fit >= parent_fit {
            let improved = child_fit > parent_fit;
            parent = child;
            parent_fit = child_fit;
            track_val(&parent, &mut best_validation)?;
            if improved {
                history.push((iteration, parent_fit));
            }
        }
    }

    Ok(RunResult {
        train_acc: parent_fit,
        val_acc: accuracy_opt(&parent, val, mode)?,
        test_acc: accuracy_opt(&parent, test, mode)?,
        winning_genome: parent,
        iterations_used,
        seed: run_seed,
        fitness_history: config.record_history.then_some(history),
        best_validation: best_validation.map(Box::new),
    })
}

/// Mean and sample standard deviation (n - 1). A single value has no sample
/// SD; it is reported as 0 with `sd_defined = false`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stats {
    pub mean: Option<f64>,
    pub sd: f64,
    pub sd_defined: bool,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Stats {
    let n = values.len();
    if n == 0 {
        return Stats {
            mean: None,
            sd: 0.0,
            sd_defined: false,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Stats {
            mean: Some(mean),
            sd: 0.0,
            sd_defined: false,
            n,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Stats {
        mean: Some(mean),
        sd: var.sqrt(),
        sd_defined: true,
        n,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BatchSummary {
    pub train: Stats,
    pub val: Stats,
    pub test: Stats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchResult {
    pub runs: Vec<RunResult>,
    pub summary: BatchSummary,
}

pub fn summarize_runs(runs: &[RunResult]) -> BatchSummary {
    let collect = |f: fn(&RunResult) -> Option<f64>| -> Vec<f64> {
        runs.iter().filter_map(f).collect()
    };
    BatchSummary {
        train: summarize(&collect(|r| Some(r.train_acc))),
        val: summarize(&collect(|r| r.val_acc)),
        test: summarize(&collect(|r| r.test_acc)),
    }
}

/// `n_runs` independent runs with seeds derived from the master seed; runs
/// execute in parallel but the result order is fixed by run index.
pub fn run_batch(split: &Split, config: &EvolutionConfig) -> Result<BatchResult> {
    config.validate()?;
    let runs: Vec<RunResult> = (0..config.n_runs)
        .into_par_iter()
        .map(|run| evolve(&split.train, &split.val, &split.test, config, derive_seed(config.seed, run as u64)))
        .collect::<Result<_>>()?;
    let summary = summarize_runs(&runs);
    Ok(BatchResult { runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, LayoutDescriptor, Sample};
    use crate::engine::mutate_with_stats;
    use rand::Rng;

    fn dcm_dataset(labels: &[u8], features: impl Fn(usize) -> Vec<f64>) -> Dataset {
        let samples = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Sample {
                id: format!("s{i}"),
                group_tag: String::new(),
                label,
                features: features(i),
            })
            .collect();
        Dataset::new(samples, LayoutDescriptor::dcm16()).unwrap()
    }

    fn rand_features(seed: u64) -> impl Fn(usize) -> Vec<f64> {
        move |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            (0..16).map(|_| rng.gen_range(-5.0..5.0)).collect()
        }
    }

    #[test]
    fn mutation_rate_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = random_genome(GenomeConfig::new(4, false), 0.0, &mut rng).unwrap();
        let child = mutate(&g, 0.0, 0.0, &mut rng);
        assert_eq!(child, g);
    }

    #[test]
    fn mutation_rate_one_resamples_every_gene() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_genome(GenomeConfig::new(4, false), 0.0, &mut rng).unwrap();
        let total_genes = g.config.n_nodes * 3 + g.config.n_outputs;
        let (_, resampled) = mutate_with_stats(&g, 1.0, 0.0, &mut rng);
        assert_eq!(resampled, total_genes);
    }

    #[test]
    fn mutation_fraction_within_binomial_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_genome(GenomeConfig::new(4, false), 0.0, &mut rng).unwrap();
        let genes_per_mutation = g.config.n_nodes * 3 + g.config.n_outputs;
        let mut total = 0usize;
        let mut resampled = 0usize;
        while total < 10_000 {
            let (_, r) = mutate_with_stats(&g, 0.1, 0.0, &mut rng);
            resampled += r;
            total += genes_per_mutation;
        }
        // 99% binomial interval around p = 0.1
        let p = 0.1;
        let half = 2.576 * (p * (1.0 - p) / total as f64).sqrt();
        let frac = resampled as f64 / total as f64;
        assert!((frac - p).abs() <= half, "fraction {frac}, bound {half}");
    }

    #[test]
    fn fitness_on_constant_data() {
        let data = dcm_dataset(&[0; 10], |_| vec![0.0; 16]);
        // a genome whose output is input 0 (= 0.0 here) classifies all as 0
        let g = crate::engine::Genome {
            config: GenomeConfig::new(16, false),
            function_genes: vec![0; 50],
            connection_genes: (0..50).map(|_| [0, 0]).collect(),
            output_genes: vec![0],
            seed: None,
        };
        assert_eq!(fitness(&g, &data, ClassifyMode::Wide).unwrap(), 1.0);
    }

    #[test]
    fn fitness_majority_arithmetic() {
        let mut labels = vec![0u8; 111];
        labels.extend(vec![1u8; 39]);
        let data = dcm_dataset(&labels, |_| vec![-1.0; 16]);
        // output = x0 = -1.0 < 0.5 everywhere -> always class 0
        let g = crate::engine::Genome {
            config: GenomeConfig::new(16, false),
            function_genes: vec![0; 50],
            connection_genes: (0..50).map(|_| [0, 0]).collect(),
            output_genes: vec![0],
            seed: None,
        };
        assert_eq!(fitness(&g, &data, ClassifyMode::Wide).unwrap(), 111.0 / 150.0);
    }

    #[test]
    fn fitness_matches_recount_oracle() {
        let data = dcm_dataset(&[0, 1, 1, 0, 1, 0, 0, 1], rand_features(4));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let g = random_genome(GenomeConfig::new(16, false), 0.0, &mut rng).unwrap();
            let fit = fitness(&g, &data, ClassifyMode::Wide).unwrap();
            let recount = data
                .samples()
                .iter()
                .filter(|s| classify(&g, &s.features, ClassifyMode::Wide).unwrap() == s.label)
                .count();
            assert_eq!(fit, recount as f64 / data.len() as f64);
        }
    }

    #[test]
    fn fitness_rejects_empty() {
        let data = dcm_dataset(&[0], |_| vec![0.0; 16]);
        let empty = data.subset(&[]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_genome(GenomeConfig::new(16, false), 0.0, &mut rng).unwrap();
        assert!(matches!(fitness(&g, &empty, ClassifyMode::Wide), Err(Error::EmptyDataset)));
    }

    fn quick_config(seed: u64) -> EvolutionConfig {
        let mut cfg = EvolutionConfig::new(GenomeConfig::new(16, false), seed);
        cfg.max_iterations = 200;
        cfg.n_runs = 2;
        cfg
    }

    #[test]
    fn constant_label_data_is_solved_quickly() {
        let data = dcm_dataset(&[1; 20], rand_features(7));
        let empty = data.subset(&[]);
        let cfg = quick_config(1);
        let r = evolve(&data, &empty, &empty, &cfg, 99).unwrap();
        assert_eq!(r.train_acc, 1.0);
        assert!(r.iterations_used < cfg.max_iterations);
    }

    #[test]
    fn zero_iterations_returns_unevolved_parent() {
        let data = dcm_dataset(&[0, 1, 0, 1], rand_features(8));
        let empty = data.subset(&[]);
        let mut cfg = quick_config(1);
        cfg.max_iterations = 0;
        let r = evolve(&data, &empty, &empty, &cfg, 5).unwrap();
        assert_eq!(r.iterations_used, 0);
        // the winning genome is exactly the seeded random parent
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let parent = random_genome(cfg.genome, cfg.recurrent_prob, &mut rng).unwrap();
        assert_eq!(r.winning_genome, parent);
    }

    #[test]
    fn history_is_monotone_and_elitist() {
        let data = dcm_dataset(&[0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 1, 0], rand_features(9));
        let empty = data.subset(&[]);
        let mut cfg = quick_config(2);
        cfg.record_history = true;
        let r = evolve(&data, &empty, &empty, &cfg, 11).unwrap();
        let history = r.fitness_history.unwrap();
        for pair in history.windows(2) {
            assert!(pair[1].1 > pair[0].1);
        }
        assert!(r.train_acc >= history[0].1);
    }

    #[test]
    fn neutral_drift_moves_across_plateaus() {
        // identical features, mixed labels: every genome scores exactly 0.5,
        // so any accepted mutant is a tie acceptance
        let data = dcm_dataset(&[0, 1], |_| vec![1.0; 16]);
        let empty = data.subset(&[]);
        let mut cfg = quick_config(3);
        cfg.max_iterations = 20;
        cfg.mutation_rate = 0.5;
        let r = evolve(&data, &empty, &empty, &cfg, 13).unwrap();
        assert_eq!(r.train_acc, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let initial = random_genome(cfg.genome, cfg.recurrent_prob, &mut rng).unwrap();
        assert_ne!(r.winning_genome, initial, "ties must be accepted");
    }

    #[test]
    fn evolve_is_deterministic() {
        let data = dcm_dataset(&[0, 1, 0, 1, 1, 0], rand_features(10));
        let empty = data.subset(&[]);
        let cfg = quick_config(4);
        let a = evolve(&data, &empty, &empty, &cfg, 21).unwrap();
        let b = evolve(&data, &empty, &empty, &cfg, 21).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn budget_respected() {
        let data = dcm_dataset(&[0, 1, 0, 1, 1, 0, 1, 0], rand_features(11));
        let empty = data.subset(&[]);
        let cfg = quick_config(5);
        let r = evolve(&data, &empty, &empty, &cfg, 31).unwrap();
        assert!(r.iterations_used <= cfg.max_iterations);
        // evaluations = 1 parent + lambda per executed iteration
        assert!(1 + cfg.lambda as u64 * r.iterations_used <= 1 + cfg.lambda as u64 * cfg.max_iterations);
    }

    #[test]
    fn summary_closed_form() {
        let s = summarize(&[0.70, 0.80]);
        assert!((s.mean.unwrap() - 0.75).abs() < 1e-12);
        assert!((s.sd - 0.070710678).abs() < 1e-6);
        assert!(s.sd_defined);

        let single = summarize(&[0.6]);
        assert_eq!(single.mean, Some(0.6));
        assert_eq!(single.sd, 0.0);
        assert!(!single.sd_defined);
    }

    #[test]
    fn batch_is_deterministic_and_ordered() {
        let mut labels = vec![0u8; 14];
        labels.extend(vec![1u8; 10]);
        let data = dcm_dataset(&labels, rand_features(12));
        let split = crate::dataset::stratified_split(
            &data,
            &crate::dataset::SplitSpec::new(0.7, 0.15, 0.15, 3).unwrap(),
        )
        .unwrap();
        let mut cfg = quick_config(6);
        cfg.max_iterations = 50;
        cfg.n_runs = 3;
        let a = run_batch(&split, &cfg).unwrap();
        let b = run_batch(&split, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for (i, run) in a.runs.iter().enumerate() {
            assert_eq!(run.seed, derive_seed(cfg.seed, i as u64));
        }
        let mean = a.summary.train.mean.unwrap();
        let lo = a.runs.iter().map(|r| r.train_acc).fold(f64::INFINITY, f64::min);
        let hi = a.runs.iter().map(|r| r.train_acc).fold(f64::NEG_INFINITY, f64::max);
        assert!(mean >= lo && mean <= hi);
    }
}
