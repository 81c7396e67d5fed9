//! Synthetic dataset generator with controllable planted signal, used for
//! the acceptance suite and for demo runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LayoutDescriptor, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Signal {
    /// Both classes identically distributed.
    None,
    /// Labels follow `weights . x > threshold`; samples closer than `margin`
    /// to the decision surface are rejected and redrawn.
    Linear {
        weights: Vec<f64>,
        threshold: f64,
        margin: f64,
    },
    /// Informative features differ in mean by `delta` between classes.
    MeanShift {
        delta: f64,
        informative: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_minority: usize,
    pub n_majority: usize,
    pub layout: LayoutDescriptor,
    pub signal: Signal,
    pub noise_sd: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Defaults: 39 minority vs 111 majority, no signal.
    pub fn new(layout: LayoutDescriptor, seed: u64) -> Self {
        Self {
            n_minority: 39,
            n_majority: 111,
            layout,
            signal: Signal::None,
            noise_sd: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_minority == 0 || self.n_majority == 0 {
            return Err(Error::InvalidSpec("class counts must be >= 1".into()));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::InvalidSpec("noise_sd must be positive".into()));
        }
        let d = self.layout.n_features();
        match &self.signal {
            Signal::None => {}
            Signal::Linear { weights, margin, .. } => {
                if weights.len() != d {
                    return Err(Error::InvalidSpec(format!(
                        "linear weights length {} != {d} features",
                        weights.len()
                    )));
                }
                if *margin < 0.0 {
                    return Err(Error::InvalidSpec("margin must be >= 0".into()));
                }
            }
            Signal::MeanShift { informative, .. } => {
                if informative.iter().any(|&i| i >= d) {
                    return Err(Error::InvalidSpec(
                        "informative feature index out of range".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn noise_vector<R: Rng>(rng: &mut R, d: usize, sd: f64) -> Vec<f64> {
    (0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Generate a dataset matching the requested shape exactly: class counts, layout
/// dimensionality, and planted signal. Minority samples carry label 1.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.layout.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.n_minority + spec.n_majority);
    // majority first (label 0), then minority (label 1)
    for (label, count) in [(0u8, spec.n_majority), (1u8, spec.n_minority)] {
        for _ in 0..count {
            let features = match &spec.signal {
                Signal::None => noise_vector(&mut rng, d, spec.noise_sd),
                Signal::Linear {
                    weights,
                    threshold,
                    margin,
                } => loop {
                    // rejection-sample until the rule agrees with the label
                    // and the point clears the margin
                    let candidate = noise_vector(&mut rng, d, spec.noise_sd);
                    let score: f64 =
                        weights.iter().zip(&candidate).map(|(w, x)| w * x).sum::<f64>() - threshold;
                    if score.abs() >= *margin && (score > 0.0) == (label == 1) {
                        break candidate;
                    }
                },
                Signal::MeanShift { delta, informative } => {
                    let mut features = noise_vector(&mut rng, d, spec.noise_sd);
                    if label == 1 {
                        for &i in informative {
                            features[i] += delta;
                        }
                    }
                    features
                }
            };
            samples.push(Sample {
                id: format!("g{}", samples.len()),
                group_tag: String::new(),
                label,
                features,
            });
        }
    }
    Dataset::new(samples, spec.layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_no_signal() {
        let spec = GeneratorSpec::new(LayoutDescriptor::dcm16(), 0);
        let data = generate(&spec).unwrap();
        assert_eq!(data.len(), 150);
        assert_eq!(data.n_features(), 16);
        assert_eq!(data.class_counts(), (111, 39));
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = GeneratorSpec::new(LayoutDescriptor::dcm16(), 5);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = GeneratorSpec::new(LayoutDescriptor::dcm16(), 6);
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn zero_shift_equals_no_signal() {
        let mut spec = GeneratorSpec::new(LayoutDescriptor::dcm16(), 7);
        spec.signal = Signal::MeanShift {
            delta: 0.0,
            informative: vec![0, 1, 2],
        };
        let shifted = generate(&spec).unwrap();
        spec.signal = Signal::None;
        let plain = generate(&spec).unwrap();
        assert_eq!(shifted, plain);
    }

    #[test]
    fn linear_rule_labels_are_consistent() {
        let mut spec = GeneratorSpec::new(LayoutDescriptor::dcm16(), 8);
        let mut weights = vec![0.0; 16];
        weights[0] = 1.0;
        weights[1] = -1.0;
        spec.signal = Signal::Linear {
            weights: weights.clone(),
            threshold: 0.0,
            margin: 0.5,
        };
        let data = generate(&spec).unwrap();
        assert_eq!(data.class_counts(), (111, 39));
        for s in data.samples() {
            let score: f64 = weights.iter().zip(&s.features).map(|(w, x)| w * x).sum();
            assert!(score.abs() >= 0.5);
            assert_eq!(s.label, u8::from(score > 0.0));
        }
    }

    #[test]
    fn mean_shift_detectable_by_two_sample_test() {
        let mut spec = GeneratorSpec::new(LayoutDescriptor::dcm16(), 9);
        spec.n_minority = 75;
        spec.n_majority = 75;
        spec.signal = Signal::MeanShift {
            delta: 1.0,
            informative: vec![3],
        };
        let data = generate(&spec).unwrap();
        let values = |label: u8| -> Vec<f64> {
            data.samples()
                .iter()
                .filter(|s| s.label == label)
                .map(|s| s.features[3])
                .collect()
        };
        let (a, b) = (values(0), values(1));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| {
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let (ma, mb) = (mean(&a), mean(&b));
        let (va, vb) = (var(&a, ma), var(&b, mb));
        let t = (mb - ma) / (va / a.len() as f64 + vb / b.len() as f64).sqrt();
        // Welch statistic; dof > 100, so |t| > 2.62 rejects at p < 0.01
        assert!(t > 2.62, "t statistic {t}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = GeneratorSpec::new(LayoutDescriptor::dcm16(), 0);
        spec.n_minority = 0;
        assert!(generate(&spec).is_err());
        let mut spec = GeneratorSpec::new(LayoutDescriptor::dcm16(), 0);
        spec.signal = Signal::MeanShift {
            delta: 1.0,
            informative: vec![16],
        };
        assert!(generate(&spec).is_err());
    }
}
