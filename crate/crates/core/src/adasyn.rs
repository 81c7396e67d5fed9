//! Adaptive synthetic oversampling of the minority class (training
//! partitions only).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdasynConfig {
    pub k_neighbors: usize,
    /// Balance degree: 1.0 generates enough synthetics for exact balance.
    pub beta: f64,
    pub seed: u64,
    /// Z-score features before distance computation. Off by default;
    /// distances are taken over the features as-is.
    pub normalize: bool,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            beta: 1.0,
            seed: 0,
            normalize: false,
        }
    }
}

/// How one synthetic sample was produced: interpolation draw `lambda` from
/// `base_id` toward `neighbor_id`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_index: usize,
    pub base_id: String,
    pub neighbor_id: String,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct BalancedSet {
    pub original: Dataset,
    pub synthetic: Vec<(Sample, Provenance)>,
    pub minority_label: u8,
}

impl BalancedSet {
    /// Original samples followed by synthetics, as one dataset.
    pub fn merged(&self) -> Result<Dataset> {
        self.original
            .with_extra_samples(self.synthetic.iter().map(|(s, _)| s.clone()).collect())
    }

    pub fn provenance(&self) -> Vec<&Provenance> {
        self.synthetic.iter().map(|(_, p)| p).collect()
    }
}

/// Exact Euclidean k-nearest-neighbour indices into `pool`, nearest first,
/// ties broken by lower index. `skip` excludes the query's own slot when it
/// belongs to the pool.
pub fn knn(query: &[f64], pool: &[&[f64]], k: usize, skip: Option<usize>) -> Result<Vec<usize>> {
    let available = pool.len() - usize::from(skip.is_some());
    if available < k {
        return Err(Error::PoolTooSmall {
            pool: available,
            k,
        });
    }
    let mut dist: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, p)| {
            let d2: f64 = query.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(dist.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Largest-remainder apportionment of `total` into integer quotas
/// proportional to `weights` (which sum to 1). Remainder ties go to the
/// lower index, so the result is deterministic and sums exactly to `total`.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut quota: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        quota[i] += 1;
    }
    quota
}

fn normalized_features(data: &Dataset) -> Vec<Vec<f64>> {
    let n = data.len() as f64;
    let d = data.n_features();
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for s in data.samples() {
        for (m, f) in mean.iter_mut().zip(&s.features) {
            *m += f / n;
        }
    }
    for s in data.samples() {
        for ((v, f), m) in sd.iter_mut().zip(&s.features).zip(&mean) {
            *v += (f - m) * (f - m) / n;
        }
    }
    data.samples()
        .iter()
        .map(|s| {
            s.features
                .iter()
                .zip(&mean)
                .zip(&sd)
                .map(|((f, m), v)| if *v > 0.0 { (f - m) / v.sqrt() } else { 0.0 })
                .collect()
        })
        .collect()
}

/// ADASYN. Generates `round((m_l - m_s) * beta)` minority synthetics,
/// apportioned per minority point by its majority-neighbour density ratio,
/// each interpolated toward a random minority neighbour.
pub fn adasyn_balance(train: &Dataset, config: &AdasynConfig) -> Result<BalancedSet> {
    let (zeros, ones) = train.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::SingleClass);
    }
    let (minority_label, m_s, m_l) = if ones <= zeros {
        (1u8, ones, zeros)
    } else {
        (0u8, zeros, ones)
    };
    if m_s < 2 {
        return Err(Error::MinorityTooSmall(m_s));
    }

    let scaled: Vec<Vec<f64>>;
    let feature_of: Vec<&[f64]> = if config.normalize {
        scaled = normalized_features(train);
        scaled.iter().map(Vec::as_slice).collect()
    } else {
        train.samples().iter().map(|s| s.features.as_slice()).collect()
    };
    let minority_idx: Vec<usize> = train
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == minority_label)
        .map(|(i, _)| i)
        .collect();

    let g_total = ((m_l - m_s) as f64 * config.beta).round() as usize;
    if g_total == 0 {
        return Ok(BalancedSet {
            original: train.clone(),
            synthetic: Vec::new(),
            minority_label,
        });
    }

    // density ratios over k-NN in the whole training set
    let k = config.k_neighbors.min(train.len() - 1).max(1);
    let mut ratios = Vec::with_capacity(m_s);
    for &i in &minority_idx {
        let neighbors = knn(feature_of[i], &feature_of, k, Some(i))?;
        let majority = neighbors
            .iter()
            .filter(|&&j| train.samples()[j].label != minority_label)
            .count();
        ratios.push(majority as f64 / k as f64);
    }
    let ratio_sum: f64 = ratios.iter().sum();
    let weights: Vec<f64> = if ratio_sum > 0.0 {
        ratios.iter().map(|r| r / ratio_sum).collect()
    } else {
        // no minority point borders the majority: uniform fallback
        vec![1.0 / m_s as f64; m_s]
    };
    let per_point = apportion(&weights, g_total);

    // minority-only neighbourhoods for the generation step
    let minority_features: Vec<&[f64]> = minority_idx.iter().map(|&i| feature_of[i]).collect();
    let k_minority = config.k_neighbors.min(m_s - 1).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut synthetic = Vec::with_capacity(g_total);
    for (mi, (&base, &count)) in minority_idx.iter().zip(&per_point).enumerate() {
        if count == 0 {
            continue;
        }
        let neighbors = knn(minority_features[mi], &minority_features, k_minority, Some(mi))?;
        let base_sample = &train.samples()[base];
        for _ in 0..count {
            let pick = neighbors[rng.gen_range(0..neighbors.len())];
            let neighbor_sample = &train.samples()[minority_idx[pick]];
            let lambda: f64 = rng.gen();
            // interpolation is always in the original feature space
            let features: Vec<f64> = base_sample
                .features
                .iter()
                .zip(&neighbor_sample.features)
                .map(|(a, b)| a + lambda * (b - a))
                .collect();
            let seed_index = synthetic.len();
            synthetic.push((
                Sample {
                    id: format!("syn{seed_index}"),
                    group_tag: String::new(),
                    label: minority_label,
                    features,
                },
                Provenance {
                    seed_index,
                    base_id: base_sample.id.clone(),
                    neighbor_id: neighbor_sample.id.clone(),
                    lambda,
                },
            ));
        }
    }
    debug_assert_eq!(synthetic.len(), g_total);

    Ok(BalancedSet {
        original: train.clone(),
        synthetic,
        minority_label,
    })
}
