//! Element-feature / stacking-fault-energy tables, scaling and splits.

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Exact CSV header of a dataset file.
pub const HEADER: [&str; 5] = [
    "element",
    "bulk_modulus_gpa",
    "volume_a3",
    "electronegativity",
    "sfe_mj_m2",
];

/// Number of feature columns (B, V, ν).
pub const N_FEATURES: usize = 3;

/// Stacking-fault energy of pure magnesium, mJ/m².
pub const MG_SFE_THRESHOLD: f64 = 19.0;

/// Bulk modulus substituted for technetium when the table leaves it blank, GPa.
pub const TC_BULK_MODULUS_GPA: f64 = 281.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub element: String,
    /// GPa
    pub bulk_modulus: f64,
    /// Å³ per atom
    pub volume: f64,
    pub electronegativity: f64,
    /// mJ/m²; absent only for prediction inputs.
    pub sfe: Option<f64>,
    pub label: Option<u8>,
}

impl Sample {
    pub fn features(&self) -> Vec<f64> {
        vec![self.bulk_modulus, self.volume, self.electronegativity]
    }
}

/// Whether rows without an SFE value are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfePolicy {
    Required,
    Optional,
}

pub fn load_table(path: impl AsRef<Path>, policy: SfePolicy) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file, policy)
}

const WIDTH_HINT: &str = "rows carry 3 feature columns (bulk_modulus_gpa, volume_a3, electronegativity) plus sfe_mj_m2";

fn ingestion(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Ingestion {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Parses a dataset from any reader. Row numbers in errors are file line numbers.
pub fn parse_table<R: Read>(reader: R, policy: SfePolicy) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(ingestion(1, "<header>", "file is empty"));
    }
    for (i, want) in HEADER.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == *want => {}
            Some(h) => {
                return Err(ingestion(
                    1,
                    want,
                    format!(
                        "expected column `{want}` at position {}, found `{h}`; {WIDTH_HINT}",
                        i + 1
                    ),
                ))
            }
            None => return Err(ingestion(1, want, format!("missing column; {WIDTH_HINT}"))),
        }
    }
    if header.len() > HEADER.len() {
        return Err(ingestion(
            1,
            &header[HEADER.len()],
            format!("unexpected extra column; {WIDTH_HINT}"),
        ));
    }

    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(samples.len() + 2, |p| p.line() as usize);
        if rec.len() != HEADER.len() {
            return Err(ingestion(
                row,
                "<record>",
                format!("expected {} fields, found {}; {WIDTH_HINT}", HEADER.len(), rec.len()),
            ));
        }
        let element = rec[0].to_string();
        if element.is_empty() {
            return Err(ingestion(row, HEADER[0], "missing element symbol"));
        }
        let number = |col: usize| -> Result<Option<f64>> {
            let raw = &rec[col];
            if raw.is_empty() {
                return Ok(None);
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| ingestion(row, HEADER[col], format!("cannot parse `{raw}` as a number")))?;
            if !v.is_finite() {
                return Err(ingestion(row, HEADER[col], format!("non-finite value `{raw}`")));
            }
            Ok(Some(v))
        };
        let positive = |col: usize, v: Option<f64>| -> Result<f64> {
            match v {
                None => Err(ingestion(row, HEADER[col], "missing value")),
                Some(v) if v <= 0.0 => Err(ingestion(row, HEADER[col], format!("must be positive, got {v}"))),
                Some(v) => Ok(v),
            }
        };

        let bulk = match number(1)? {
            None if element == "Tc" => Some(TC_BULK_MODULUS_GPA),
            other => other,
        };
        let bulk_modulus = positive(1, bulk)?;
        let volume = positive(2, number(2)?)?;
        let electronegativity = positive(3, number(3)?)?;
        let sfe = number(4)?;
        if sfe.is_none() && policy == SfePolicy::Required {
            return Err(ingestion(row, HEADER[4], "missing stacking-fault energy"));
        }
        samples.push(Sample {
            element,
            bulk_modulus,
            volume,
            electronegativity,
            sfe,
            label: None,
        });
    }
    if samples.is_empty() {
        return Err(ingestion(2, "<record>", "file contains no data rows"));
    }
    Ok(samples)
}

/// Direction of the binary labelling around the SFE threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelConvention {
    /// SFE above the threshold → 0, otherwise → 1.
    #[default]
    Methods,
    /// SFE below the threshold → 0, otherwise → 1.
    Dataset,
}

impl FromStr for LabelConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "methods" => Ok(Self::Methods),
            "dataset" => Ok(Self::Dataset),
            other => Err(Error::config(format!(
                "unknown label convention `{other}` (expected methods or dataset)"
            ))),
        }
    }
}

impl fmt::Display for LabelConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Methods => "methods",
            Self::Dataset => "dataset",
        })
    }
}

pub fn label_for(sfe: f64, threshold: f64, convention: LabelConvention) -> u8 {
    match convention {
        LabelConvention::Methods => u8::from(sfe <= threshold),
        LabelConvention::Dataset => u8::from(sfe >= threshold),
    }
}

/// Sets `label` on every sample from its SFE.
pub fn derive_labels(samples: &mut [Sample], threshold: f64, convention: LabelConvention) -> Result<()> {
    for s in samples.iter() {
        if s.sfe.is_none() {
            return Err(Error::config(format!("sample `{}` has no SFE to label", s.element)));
        }
    }
    for s in samples.iter_mut() {
        s.label = s.sfe.map(|v| label_for(v, threshold, convention));
    }
    Ok(())
}

/// Per-feature min-max map onto `[0, range_max]`, fit on a training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub range_max: f64,
}

impl ScalerParams {
    pub fn fit(rows: &[Vec<f64>], range_max: f64) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::config("cannot fit a scaler on an empty training fold"))?;
        if !(range_max > 0.0 && range_max.is_finite()) {
            return Err(Error::config(format!(
                "scaling range must be positive, got {range_max}"
            )));
        }
        let d = first.len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::Shape {
                    what: "scaler input width",
                    expected: d,
                    found: r.len(),
                });
            }
            for (k, &v) in r.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        for k in 0..d {
            if max[k] <= min[k] {
                return Err(Error::config(format!(
                    "feature {k} is constant on the training fold ({}); cannot scale",
                    min[k]
                )));
            }
        }
        Ok(Self { min, max, range_max })
    }

    /// Scales one row; values outside the fitted range are clamped.
    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.min.len() {
            return Err(Error::Shape {
                what: "scaler input width",
                expected: self.min.len(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let u = (v - self.min[k]) / (self.max[k] - self.min[k]) * self.range_max;
                u.clamp(0.0, self.range_max)
            })
            .collect())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Default feature range: one half-period of the encoding angles.
pub const DEFAULT_SCALE_MAX: f64 = PI;

/// Min-max map of regression targets onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub min: f64,
    pub max: f64,
}

impl TargetScaler {
    pub fn fit(targets: &[f64]) -> Result<Self> {
        let min = targets.iter().copied().fold(f64::INFINITY, f64::min);
        let max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if targets.is_empty() || max <= min {
            return Err(Error::config("zero target variance: cannot scale regression targets"));
        }
        Ok(Self { min, max })
    }

    pub fn scale(&self, t: f64) -> f64 {
        2.0 * (t - self.min) / (self.max - self.min) - 1.0
    }

    pub fn unscale(&self, s: f64) -> f64 {
        (s + 1.0) / 2.0 * (self.max - self.min) + self.min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitScheme {
    /// Shuffled k-fold partition.
    KFold { k: usize },
    /// Independent shuffled train/validation splits.
    Shuffle { fraction: f64, repeats: usize },
}

impl Default for SplitScheme {
    fn default() -> Self {
        SplitScheme::Shuffle {
            fraction: 0.2,
            repeats: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    /// Repeat number (shuffle) or fold number (k-fold).
    pub index: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

pub fn make_splits(m: usize, scheme: SplitScheme, seed: u64) -> Result<Vec<SplitPlan>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    match scheme {
        SplitScheme::KFold { k } => {
            if k < 2 {
                return Err(Error::config(format!("k-fold needs k >= 2, got {k}")));
            }
            if m < k {
                return Err(Error::config(format!("{m} samples cannot fill {k} folds")));
            }
            order.shuffle(&mut rng);
            let (base, extra) = (m / k, m % k);
            let mut start = 0;
            Ok((0..k)
                .map(|fold| {
                    let len = base + usize::from(fold < extra);
                    let mut validation = order[start..start + len].to_vec();
                    let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
                    start += len;
                    validation.sort_unstable();
                    train.sort_unstable();
                    SplitPlan {
                        seed,
                        index: fold,
                        train,
                        validation,
                    }
                })
                .collect())
        }
        SplitScheme::Shuffle { fraction, repeats } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::config(format!(
                    "validation fraction must be in (0, 1), got {fraction}"
                )));
            }
            if repeats == 0 {
                return Err(Error::config("at least one shuffled split is required"));
            }
            let n_val = (fraction * m as f64).ceil() as usize;
            if n_val < 1 || n_val >= m {
                return Err(Error::config(format!(
                    "{m} samples are too few for a {fraction} validation fraction"
                )));
            }
            Ok((0..repeats)
                .map(|r| {
                    order.shuffle(&mut rng);
                    let mut validation = order[..n_val].to_vec();
                    let mut train = order[n_val..].to_vec();
                    validation.sort_unstable();
                    train.sort_unstable();
                    SplitPlan {
                        seed,
                        index: r,
                        train,
                        validation,
                    }
                })
                .collect())
        }
    }
}

/// SHA-256 over a canonical rendering of the samples (independent of the
/// source file's whitespace or number formatting).
pub fn fingerprint(samples: &[Sample]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        let sfe = s.sfe.map_or(String::new(), |v| format!("{v:e}"));
        h.update(format!(
            "{},{:e},{:e},{:e},{}\n",
            s.element, s.bulk_modulus, s.volume, s.electronegativity, sfe
        ));
    }
    hex::encode(h.finalize())
}
