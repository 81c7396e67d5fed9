//! Labeled feature data, the four feature layouts, and stratified splitting.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// The four default-mode-network regions, in the fixed order used by every
/// region-major layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Pcc,
    Mpfc,
    Ripc,
    Lipc,
}

pub const REGION_ORDER: [Region; 4] = [Region::Pcc, Region::Mpfc, Region::Ripc, Region::Lipc];

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::Pcc => "pcc",
            Region::Mpfc => "mpfc",
            Region::Ripc => "ripc",
            Region::Lipc => "lipc",
        }
    }

    pub fn index(&self) -> usize {
        REGION_ORDER.iter().position(|r| r == self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutMode {
    /// One region's timeseries as the feature vector.
    PerRegion(Region),
    /// All four regions, region-major, read as 4 logical input columns.
    FourColumn,
    /// All four regions concatenated into a single column.
    SingleVector,
    /// The 16 intrinsic-connectivity values of a 4x4 coupling matrix.
    Dcm16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutDescriptor {
    pub mode: LayoutMode,
    /// Timepoints per region; ignored for `Dcm16`.
    pub timepoints: usize,
}

impl LayoutDescriptor {
    pub fn per_region(region: Region, timepoints: usize) -> Self {
        Self {
            mode: LayoutMode::PerRegion(region),
            timepoints,
        }
    }

    pub fn four_column(timepoints: usize) -> Self {
        Self {
            mode: LayoutMode::FourColumn,
            timepoints,
        }
    }

    pub fn single_vector(timepoints: usize) -> Self {
        Self {
            mode: LayoutMode::SingleVector,
            timepoints,
        }
    }

    pub fn dcm16() -> Self {
        Self {
            mode: LayoutMode::Dcm16,
            timepoints: 0,
        }
    }

    /// Feature-vector length implied by the layout.
    pub fn n_features(&self) -> usize {
        match self.mode {
            LayoutMode::PerRegion(_) => self.timepoints,
            LayoutMode::FourColumn | LayoutMode::SingleVector => 4 * self.timepoints,
            LayoutMode::Dcm16 => 16,
        }
    }

    /// Classifier input count in wide mode (every feature its own input).
    pub fn wide_inputs(&self) -> usize {
        self.n_features()
    }

    /// Classifier input count in streamed mode (features fed over timesteps).
    pub fn streamed_inputs(&self) -> usize {
        match self.mode {
            LayoutMode::PerRegion(_) | LayoutMode::SingleVector => 1,
            LayoutMode::FourColumn => 4,
            LayoutMode::Dcm16 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub group_tag: String,
    pub label: u8,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    n_features: usize,
    layout: LayoutDescriptor,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, layout: LayoutDescriptor) -> Result<Self> {
        let n_features = layout.n_features();
        let mut seen = HashSet::new();
        for s in &samples {
            if s.features.len() != n_features {
                return Err(Error::LayoutMismatch {
                    expected: n_features,
                    found: s.features.len(),
                });
            }
            if s.label > 1 {
                return Err(Error::NonBinaryLabel {
                    row: seen.len(),
                    value: s.label.to_string(),
                });
            }
            if !seen.insert(s.id.clone()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Self {
            samples,
            n_features,
            layout,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn layout(&self) -> LayoutDescriptor {
        self.layout
    }

    /// (count of label 0, count of label 1)
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.samples.iter().filter(|s| s.label == 1).count();
        (self.samples.len() - ones, ones)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.id.as_str()).collect()
    }

    /// New dataset from a subset of sample indices, preserving order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            n_features: self.n_features,
            layout: self.layout,
        }
    }

    /// Append samples (used by resampling); ids must stay unique.
    pub fn with_extra_samples(&self, extra: Vec<Sample>) -> Result<Self> {
        let mut samples = self.samples.clone();
        samples.extend(extra);
        Self::new(samples, self.layout)
    }
}

/// One sample's raw per-region timeseries, regions in [`REGION_ORDER`].
#[derive(Debug, Clone)]
pub struct RegionSeries {
    pub id: String,
    pub group_tag: String,
    pub label: u8,
    pub regions: Vec<Vec<f64>>,
}

/// Assemble a dataset in the requested layout from raw per-region series.
///
/// Region-major ordering is fixed: the `SingleVector` vector is
/// `pcc[0..T], mpfc[0..T], ripc[0..T], lipc[0..T]`, and `FourColumn` stores
/// the same values read as four logical columns of length `T`.
pub fn build_layout(raw: &[RegionSeries], mode: LayoutMode) -> Result<Dataset> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let timepoints = raw[0].regions.first().map_or(0, Vec::len);
    for rs in raw {
        if rs.regions.len() != 4 {
            return Err(Error::RegionCountMismatch {
                expected: 4,
                found: rs.regions.len(),
            });
        }
        for (r, series) in REGION_ORDER.iter().zip(&rs.regions) {
            if series.len() != timepoints {
                return Err(Error::TimepointMismatch {
                    region: r.name().to_string(),
                    expected: timepoints,
                    found: series.len(),
                });
            }
        }
    }
    let layout = LayoutDescriptor {
        mode,
        timepoints,
    };
    let samples = raw
        .iter()
        .map(|rs| {
            let features = match mode {
                LayoutMode::PerRegion(region) => rs.regions[region.index()].clone(),
                LayoutMode::FourColumn | LayoutMode::SingleVector => {
                    rs.regions.concat()
                }
                LayoutMode::Dcm16 => rs.regions.concat(),
            };
            Sample {
                id: rs.id.clone(),
                group_tag: rs.group_tag.clone(),
                label: rs.label,
                features,
            }
        })
        .collect();
    Dataset::new(samples, layout)
}

/// Load the standard CSV schema: `id`, optional `group`, the label column,
/// then feature columns in file order.
pub fn load_csv(
    path: &Path,
    label_column: &str,
    id_column: &str,
    layout: LayoutDescriptor,
) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let id_idx = headers
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| Error::MissingColumn(id_column.to_string()))?;
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let group_idx = headers.iter().position(|h| h == "group");
    let synthetic_idx = headers.iter().position(|h| h == "synthetic");
    let meta: HashSet<usize> = [Some(id_idx), Some(label_idx), group_idx, synthetic_idx]
        .into_iter()
        .flatten()
        .collect();
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|i| !meta.contains(i)).collect();

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let label = match record.get(label_idx).unwrap_or("").trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::NonBinaryLabel {
                    row,
                    value: other.to_string(),
                })
            }
        };
        let mut features = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            let value: f64 = record
                .get(col)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::NonFiniteFeature { row, col })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteFeature { row, col });
            }
            features.push(value);
        }
        samples.push(Sample {
            id: record.get(id_idx).unwrap_or("").to_string(),
            group_tag: group_idx
                .and_then(|g| record.get(g))
                .unwrap_or("")
                .to_string(),
            label,
            features,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if feature_cols.len() != layout.n_features() {
        return Err(Error::LayoutMismatch {
            expected: layout.n_features(),
            found: feature_cols.len(),
        });
    }
    Dataset::new(samples, layout)
}

/// Write a dataset in the standard CSV schema. `mark_synthetic_from` adds a
/// `synthetic` column set to 1 for samples at or past that index.
pub fn write_csv(data: &Dataset, path: &Path, mark_synthetic_from: Option<usize>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "group".to_string(), "label".to_string()];
    if mark_synthetic_from.is_some() {
        header.push("synthetic".to_string());
    }
    for i in 0..data.n_features() {
        header.push(format!("f{i}"));
    }
    writer.write_record(&header)?;
    for (i, s) in data.samples().iter().enumerate() {
        let mut record = vec![s.id.clone(), s.group_tag.clone(), s.label.to_string()];
        if let Some(from) = mark_synthetic_from {
            record.push(if i >= from { "1" } else { "0" }.to_string());
        }
        for f in &s.features {
            record.push(format!("{f}"));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f))
            || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::BadSplitFractions(fr));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// JSON manifest listing ids per partition plus the seed that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn manifest(&self, seed: u64) -> SplitManifest {
        SplitManifest {
            seed,
            train: self.train.ids().iter().map(|s| s.to_string()).collect(),
            val: self.val.ids().iter().map(|s| s.to_string()).collect(),
            test: self.test.ids().iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Stratified random split. Per class: shuffle with a seeded RNG, give the
/// test partition `floor(test_frac * n)`, validation `floor(val_frac * n)`,
/// and the remainder to training, then merge classes per partition in
/// original dataset order.
pub fn stratified_split(data: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let (zeros, ones) = data.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::MissingClass);
    }
    for (class, n) in [(0u8, zeros), (1u8, ones)] {
        if n < 3 {
            return Err(Error::ClassTooSmall { class, n, min: 3 });
        }
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = data
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        let n = idx.len();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, class as u64));
        idx.shuffle(&mut rng);
        let n_test = (spec.test_frac * n as f64).floor() as usize;
        let n_val = (spec.val_frac * n as f64).floor() as usize;
        test.extend_from_slice(&idx[..n_test]);
        val.extend_from_slice(&idx[n_test..n_test + n_val]);
        train.extend_from_slice(&idx[n_test + n_val..]);
    }
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok(Split {
        train: data.subset(&train),
        val: data.subset(&val),
        test: data.subset(&test),
    })
}
