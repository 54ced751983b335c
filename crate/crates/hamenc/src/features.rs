//! k-mer Hamming (KH) similarity and sequence featurization, plus the
//! exact-equivalence verifier between the Hamming-scan route and the
//! convolution + global-max-pool route.
//!
//! `Sim(p, s) = k - min over sliding windows of H(window, p)`, where the
//! windows range over the padded width: positions past the end of a sequence
//! (and out-of-alphabet slots) mismatch every k-mer symbol. Under one-hot
//! encoding the same quantity falls out of the network's convolution and
//! global max pooling, which is what makes the pooled features readable as
//! similarities; [`verify_theorem1`] checks that equivalence on randomized
//! instances via two independent implementations.

use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{one_hot_encode, synthetic_symbols, MISMATCH_ITEM};
use crate::encoder::KmerSet;
use crate::error::{Error, Result};
use crate::nn::{conv1d_valid, global_max_pool};

/// Positionwise Hamming distance between a window and a k-mer of equal
/// length. Windows may contain [`MISMATCH_ITEM`] slots, which differ from
/// every real token.
pub fn hamming_distance(window: &[usize], kmer: &[usize]) -> Result<u32> {
    if window.len() != kmer.len() {
        return Err(Error::shape(format!(
            "window length {} != k-mer length {}",
            window.len(),
            kmer.len()
        )));
    }
    Ok(window
        .iter()
        .zip(kmer)
        .filter(|(a, b)| a != b)
        .count() as u32)
}

/// KH similarity of a k-mer against a sequence padded to `width`:
/// `k - min` Hamming distance over all `width - k + 1` windows.
pub fn kh_similarity(kmer: &[usize], sequence: &[usize], width: usize) -> Result<u32> {
    let k = kmer.len();
    if k == 0 {
        return Err(Error::validation("k-mer must be non-empty"));
    }
    if width < k {
        return Err(Error::validation(format!(
            "padded width {width} is smaller than k {k}"
        )));
    }
    if sequence.len() > width {
        return Err(Error::validation(format!(
            "sequence length {} exceeds padded width {width}",
            sequence.len()
        )));
    }
    let mut min_dist = k as u32;
    for start in 0..=(width - k) {
        let mut dist = 0u32;
        for (offset, &sym) in kmer.iter().enumerate() {
            let pos = start + offset;
            let slot = if pos < sequence.len() { sequence[pos] } else { MISMATCH_ITEM };
            if slot != sym {
                dist += 1;
            }
        }
        if dist < min_dist {
            min_dist = dist;
            if min_dist == 0 {
                break;
            }
        }
    }
    Ok(k as u32 - min_dist)
}

/// Per-sequence KH-similarity feature vectors against a k-mer set. Every
/// entry is an integer in `[0, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<u32>,
    columns: Vec<String>,
}

impl FeatureMatrix {
    pub fn values(&self) -> &Array2<u32> {
        &self.values
    }

    pub fn num_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.values.ncols()
    }

    /// Column names: the k-mer token strings joined by `|`.
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Float copy for classifiers.
    pub fn to_f64(&self) -> Array2<f64> {
        self.values.mapv(|v| v as f64)
    }
}

/// Featurizes sequences against a k-mer set at the given padded width.
/// Rows follow the input order; parallelized over sequences (integer
/// outputs, so results are identical for any worker count).
pub fn featurize(sequences: &[Vec<usize>], kmers: &KmerSet, width: usize) -> Result<FeatureMatrix> {
    if kmers.is_empty() {
        return Err(Error::validation("k-mer set is empty"));
    }
    let k = kmers.kmer_len();
    if width < k {
        return Err(Error::validation(format!(
            "padded width {width} is smaller than k {k}"
        )));
    }
    let rows: Vec<Vec<u32>> = sequences
        .par_iter()
        .map(|seq| {
            kmers
                .iter_items()
                .map(|kmer| kh_similarity(kmer, seq, width))
                .collect::<Result<Vec<u32>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Array2::<u32>::zeros((sequences.len(), kmers.len()));
    for (n, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[[n, j]] = v;
        }
    }
    let columns = (0..kmers.len()).map(|i| kmers.label(i)).collect();
    Ok(FeatureMatrix { values, columns })
}

/// Writes features as CSV: header `label,<kmer>,...`, one row per sequence.
pub fn export_features(
    features: &FeatureMatrix,
    labels: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    if labels.len() != features.num_rows() {
        return Err(Error::shape(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.num_rows()
        )));
    }
    let mut writer = csv::Writer::from_path(path).map_err(io_from_csv)?;
    let mut header = Vec::with_capacity(features.num_columns() + 1);
    header.push("label".to_string());
    header.extend_from_slice(features.columns());
    writer.write_record(&header).map_err(io_from_csv)?;
    for (n, label) in labels.iter().enumerate() {
        let mut record = Vec::with_capacity(features.num_columns() + 1);
        record.push(label.clone());
        for j in 0..features.num_columns() {
            record.push(features.values()[[n, j]].to_string());
        }
        writer.write_record(&record).map_err(io_from_csv)?;
    }
    writer.flush()?;
    Ok(())
}

fn io_from_csv(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Validation(format!("csv error: {other:?}")),
    }
}

/// Randomized-instance settings for [`verify_theorem1`].
#[derive(Debug, Clone)]
pub struct Theorem1Config {
    pub trials: u64,
    pub max_alphabet: usize,
    pub max_len: usize,
    pub max_k: usize,
    pub seed: u64,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Theorem1Config {
            trials: 1000,
            max_alphabet: 26,
            max_len: 50,
            max_k: 8,
            seed: 0,
        }
    }
}

/// First diverging instance found by the verifier, rendered as tokens.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub sequence: Vec<String>,
    pub kmer: Vec<String>,
    pub pooled: f64,
    pub similarity: u32,
}

#[derive(Debug, Clone)]
pub struct Theorem1Report {
    pub trials: u64,
    pub mismatches: u64,
    pub first_counterexample: Option<Counterexample>,
}

/// Checks, over random (sequence, k-mer) instances, that convolving the
/// one-hot sequence with the k-mer's one-hot kernel and max-pooling equals
/// the KH similarity computed by direct string scanning. The two routes
/// share no code beyond the one-hot encoder.
pub fn verify_theorem1(config: &Theorem1Config) -> Result<Theorem1Report> {
    verify_theorem1_with_fault(config, None)
}

/// Same as [`verify_theorem1`] but optionally perturbing the network value
/// of one trial, so the failure path can be exercised end to end.
pub(crate) fn verify_theorem1_with_fault(
    config: &Theorem1Config,
    fault_trial: Option<u64>,
) -> Result<Theorem1Report> {
    if config.trials == 0 {
        return Err(Error::validation("trials must be positive"));
    }
    if config.max_alphabet < 2 || config.max_len == 0 || config.max_k == 0 {
        return Err(Error::validation(
            "need max_alphabet >= 2, max_len >= 1, max_k >= 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mismatches = 0;
    let mut first = None;
    for trial in 0..config.trials {
        let m = rng.gen_range(2..=config.max_alphabet);
        let len = rng.gen_range(1..=config.max_len);
        let k = rng.gen_range(1..=config.max_k);
        let sequence: Vec<usize> = (0..len).map(|_| rng.gen_range(0..m)).collect();
        let kmer: Vec<usize> = (0..k).map(|_| rng.gen_range(0..m)).collect();
        let width = len.max(k);

        // Network route: one-hot kernel, convolution, global max pooling.
        let batch = one_hot_encode(&[sequence.clone()], m, width)?;
        let mut kernel = Array3::<f64>::zeros((1, m, k));
        for (r, &item) in kmer.iter().enumerate() {
            kernel[[0, item, r]] = 1.0;
        }
        let conv = conv1d_valid(&batch, &kernel)?;
        let pool = global_max_pool(&conv)?;
        let mut pooled = pool.values()[[0, 0]];
        if fault_trial == Some(trial) {
            pooled += 1.0;
        }

        // Scan route.
        let similarity = kh_similarity(&kmer, &sequence, width)?;

        if pooled != similarity as f64 {
            mismatches += 1;
            if first.is_none() {
                let symbols = synthetic_symbols(m);
                first = Some(Counterexample {
                    sequence: sequence.iter().map(|&i| symbols[i].clone()).collect(),
                    kmer: kmer.iter().map(|&i| symbols[i].clone()).collect(),
                    pooled,
                    similarity,
                });
            }
        }
    }
    Ok(Theorem1Report {
        trials: config.trials,
        mismatches,
        first_counterexample: first,
    })
}
