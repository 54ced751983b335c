//! Model assembly, the training loop, k-mer extraction from trained
//! binarized kernels, and model persistence.
//!
//! # Model file format (version 1)
//!
//! Little-endian throughout:
//!
//! ```text
//! magic             7 bytes  "HAMMENC"
//! version           u32      1
//! quantizer kind    u8       0 hamming, 1 heaviside, 2 sign, 3 none
//! k                 u32      kernel width (k-mer length)
//! kernel count      u32
//! alphabet size m   u32
//! class count d     u32
//! alphabet tokens   m x (u32 byte length + UTF-8 bytes)
//! class names       d x (u32 byte length + UTF-8 bytes)
//! conv weights      K*m*k f64, row-major [kernel][row][column]
//! dense weights     d*K f64, row-major [class][kernel]
//! ```
//!
//! Weights are stored as raw f64 bits, so save/load round trips are exact.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{one_hot_encode, ItemAlphabet, LabeledSequenceDataset};
use crate::error::{Error, Result};
use crate::nn::{
    backward_pass, conv1d_valid, dense_forward, global_max_pool, softmax_cross_entropy,
    AdamConfig, AdamState,
};
use crate::quantize::{quantize_kernels, ste_passthrough, QuantizerKind};
use crate::util::derive_seed;

const MAGIC: &[u8; 7] = b"HAMMENC";
const FORMAT_VERSION: u32 = 1;

/// Training hyperparameters. The defaults are the reference settings:
/// 1024 kernels, batch size 64, 100 epochs, Adam at 3e-4 with 1e-5 weight
/// decay, hamming quantizer.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub kernel_count: usize,
    /// k-mer length; `None` selects it from the length distribution via
    /// [`choose_k`].
    pub kmer_len: Option<usize>,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub quantizer: QuantizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            kernel_count: 1024,
            kmer_len: None,
            learning_rate: 3e-4,
            weight_decay: 1e-5,
            seed: 0,
            quantizer: QuantizerKind::Hamming,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be positive"));
        }
        if self.kernel_count == 0 {
            return Err(Error::validation("kernel count must be positive"));
        }
        if self.kmer_len == Some(0) {
            return Err(Error::validation("k must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::validation("weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// The trained (or initialized) encoder: real-valued conv kernels, the
/// dense head, and the bookkeeping needed to interpret them.
#[derive(Debug, Clone)]
pub struct EncoderModel {
    conv_weights: Array3<f64>,
    dense_weights: Array2<f64>,
    quantizer: QuantizerKind,
    alphabet: ItemAlphabet,
    class_names: Vec<String>,
}

impl EncoderModel {
    /// Assembles a model from raw tensors, checking shape consistency:
    /// conv `[K x m x k]` against the alphabet, dense `[d x K]` against the
    /// class list.
    pub fn from_parts(
        conv_weights: Array3<f64>,
        dense_weights: Array2<f64>,
        quantizer: QuantizerKind,
        alphabet: ItemAlphabet,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (kernel_count, m, kmer_len) = conv_weights.dim();
        let (d, dense_kernels) = dense_weights.dim();
        if kernel_count == 0 || kmer_len == 0 {
            return Err(Error::validation("conv weights must be non-empty"));
        }
        if m != alphabet.len() {
            return Err(Error::shape(format!(
                "conv weights expect alphabet size {m}, alphabet has {}",
                alphabet.len()
            )));
        }
        if dense_kernels != kernel_count {
            return Err(Error::shape(format!(
                "dense weights cover {dense_kernels} kernels, conv has {kernel_count}"
            )));
        }
        if d != class_names.len() || d < 2 {
            return Err(Error::shape(format!(
                "dense weights cover {d} classes, class list has {}",
                class_names.len()
            )));
        }
        Ok(EncoderModel {
            conv_weights,
            dense_weights,
            quantizer,
            alphabet,
            class_names,
        })
    }

    pub fn kmer_len(&self) -> usize {
        self.conv_weights.shape()[2]
    }

    pub fn kernel_count(&self) -> usize {
        self.conv_weights.shape()[0]
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn quantizer(&self) -> QuantizerKind {
        self.quantizer
    }

    pub fn alphabet(&self) -> &ItemAlphabet {
        &self.alphabet
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn conv_weights(&self) -> &Array3<f64> {
        &self.conv_weights
    }

    pub fn dense_weights(&self) -> &Array2<f64> {
        &self.dense_weights
    }

    /// Kernels after applying this model's quantizer.
    pub fn binarized_kernels(&self) -> Result<Array3<f64>> {
        quantize_kernels(&self.conv_weights, self.quantizer)
    }

    /// Full forward pass (quantize, convolve, pool, dense) on already
    /// encoded sequences.
    pub fn logits(&self, batch: &crate::data::OneHotBatch) -> Result<Array2<f64>> {
        let kernels = self.binarized_kernels()?;
        let conv = conv1d_valid(batch, &kernels)?;
        let pool = global_max_pool(&conv)?;
        dense_forward(pool.values(), &self.dense_weights)
    }

    /// Class predictions by logit argmax (ties to the lowest class index).
    ///
    /// Sequences are padded to at least `min_width`; pass the training-time
    /// padded width so padding influences pooling exactly as it did during
    /// training. Item indices outside the alphabet encode as zero columns.
    pub fn predict(&self, sequences: &[Vec<usize>], min_width: usize) -> Result<Vec<usize>> {
        let k = self.kmer_len();
        let max_len = sequences.iter().map(Vec::len).max().unwrap_or(0);
        let batch = one_hot_encode(
            sequences,
            self.alphabet.len(),
            min_width.max(max_len).max(k),
        )?;
        let logits = self.logits(&batch)?;
        Ok(logits
            .outer_iter()
            .map(|row| {
                let mut best = 0;
                for (o, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = o;
                    }
                }
                best
            })
            .collect())
    }
}

/// Picks the k-mer length from the sequence-length distribution: 5 for
/// datasets whose median length is at least 30, otherwise 2. An explicit
/// `kmer_len` in [`TrainConfig`] always overrides this.
pub fn choose_k(dataset: &LabeledSequenceDataset) -> usize {
    if dataset.median_length() >= 30.0 {
        5
    } else {
        2
    }
}

/// Initializes a model with uniform fan-in weights: conv entries from
/// `U(-1/sqrt(m*k), 1/sqrt(m*k))`, dense entries from
/// `U(-1/sqrt(K), 1/sqrt(K))`. Deterministic for a given seed.
pub fn init_model(
    config: &TrainConfig,
    alphabet: &ItemAlphabet,
    class_names: &[String],
    kmer_len: usize,
) -> Result<EncoderModel> {
    config.validate()?;
    if kmer_len == 0 {
        return Err(Error::validation("k must be positive"));
    }
    if alphabet.is_empty() {
        return Err(Error::validation("alphabet must be non-empty"));
    }
    if class_names.len() < 2 {
        return Err(Error::validation("need at least two classes"));
    }
    let m = alphabet.len();
    let d = class_names.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let conv_bound = 1.0 / ((m * kmer_len) as f64).sqrt();
    let conv_weights = Array3::from_shape_fn((config.kernel_count, m, kmer_len), |_| {
        rng.gen_range(-conv_bound..conv_bound)
    });
    let dense_bound = 1.0 / (config.kernel_count as f64).sqrt();
    let dense_weights = Array2::from_shape_fn((d, config.kernel_count), |_| {
        rng.gen_range(-dense_bound..dense_bound)
    });
    Ok(EncoderModel {
        conv_weights,
        dense_weights,
        quantizer: config.quantizer,
        alphabet: alphabet.clone(),
        class_names: class_names.to_vec(),
    })
}

/// Trains the encoder: per batch the kernels are quantized, the forward pass
/// runs without any nonlinearity or bias, the straight-through estimator
/// hands the binarized-kernel gradient to the real kernels, and Adam updates
/// both tensors. Batches are drawn by a seeded shuffle each epoch.
///
/// Returns the epoch-boundary checkpoint with the minimum epoch-mean
/// training loss, plus the per-epoch mean loss history.
pub fn train(
    dataset: &LabeledSequenceDataset,
    config: &TrainConfig,
) -> Result<(EncoderModel, Vec<f64>)> {
    config.validate()?;
    let kmer_len = config.kmer_len.unwrap_or_else(|| choose_k(dataset));
    let mut model = init_model(config, dataset.alphabet(), dataset.class_names(), kmer_len)?;
    if config.epochs == 0 {
        return Ok((model, Vec::new()));
    }

    let width = dataset.max_length().max(kmer_len);
    let m = dataset.alphabet().len();
    let n = dataset.len();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x5u64));
    let mut conv_opt = AdamState::new(
        model.conv_weights.raw_dim(),
        AdamConfig::new(config.learning_rate, config.weight_decay),
    );
    let mut dense_opt = AdamState::new(
        model.dense_weights.raw_dim(),
        AdamConfig::new(config.learning_rate, config.weight_decay),
    );

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Array3<f64>, Array2<f64>)> = None;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        // Fisher-Yates over the record order, one stream for the whole run.
        for i in (1..n).rev() {
            order.swap(i, shuffle_rng.gen_range(0..=i));
        }
        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let records = dataset.records();
            let sequences: Vec<&[usize]> =
                chunk.iter().map(|&i| records[i].items.as_slice()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| records[i].label).collect();
            let batch = one_hot_encode(&sequences, m, width)?;

            let kernels = quantize_kernels(&model.conv_weights, config.quantizer)?;
            let conv = conv1d_valid(&batch, &kernels)?;
            let pool = global_max_pool(&conv)?;
            let logits = dense_forward(pool.values(), &model.dense_weights)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels).map_err(|e| {
                Error::NonFinite(format!("epoch {epoch}, batch {batch_idx}: {e}"))
            })?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "epoch {epoch}, batch {batch_idx}: loss is {loss}"
                )));
            }
            loss_sum += loss * chunk.len() as f64;

            let grads = backward_pass(&batch, &model.dense_weights, &pool, &dlogits, kmer_len)?;
            let conv_grad = ste_passthrough(grads.conv);
            dense_opt.step(&mut model.dense_weights, &grads.dense)?;
            conv_opt.step(&mut model.conv_weights, &conv_grad)?;
        }
        let epoch_mean = loss_sum / n as f64;
        history.push(epoch_mean);
        let improved = best.as_ref().is_none_or(|(b, _, _)| epoch_mean < *b);
        if improved {
            best = Some((
                epoch_mean,
                model.conv_weights.clone(),
                model.dense_weights.clone(),
            ));
        }
    }

    let (_, conv, dense) = best.expect("epochs > 0 pushed at least one checkpoint");
    model.conv_weights = conv;
    model.dense_weights = dense;
    Ok((model, history))
}

/// A deduplicated, ordered set of extracted k-mers with their source
/// kernels.
#[derive(Debug, Clone)]
pub struct KmerSet {
    kmer_len: usize,
    kmers: Vec<Vec<usize>>,
    provenance: Vec<Vec<usize>>,
    alphabet: ItemAlphabet,
}

impl KmerSet {
    pub fn len(&self) -> usize {
        self.kmers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kmers.is_empty()
    }

    pub fn kmer_len(&self) -> usize {
        self.kmer_len
    }

    pub fn alphabet(&self) -> &ItemAlphabet {
        &self.alphabet
    }

    /// Item indices of the i-th k-mer.
    pub fn items(&self, index: usize) -> &[usize] {
        &self.kmers[index]
    }

    /// Source kernel indices that quantized to the i-th k-mer.
    pub fn provenance(&self, index: usize) -> &[usize] {
        &self.provenance[index]
    }

    pub fn iter_items(&self) -> impl Iterator<Item = &[usize]> {
        self.kmers.iter().map(Vec::as_slice)
    }

    /// Tokens of the i-th k-mer.
    pub fn tokens(&self, index: usize) -> Vec<&str> {
        self.kmers[index]
            .iter()
            .map(|&item| self.alphabet.token(item).expect("extracted item in alphabet"))
            .collect()
    }

    /// Column label for exports: tokens joined by `|`.
    pub fn label(&self, index: usize) -> String {
        self.tokens(index).join("|")
    }
}

/// Translates each kernel's binarized weights into a k-mer: per column, the
/// row holding the 1 names the item. Identical k-mers from different kernels
/// collapse into one entry that keeps all source kernel indices, in
/// first-kernel order.
pub fn extract_kmers(model: &EncoderModel) -> Result<KmerSet> {
    if model.quantizer != QuantizerKind::Hamming {
        return Err(Error::Unsupported(format!(
            "k-mer extraction requires the hamming quantizer, model uses {}",
            model.quantizer
        )));
    }
    let binary = model.binarized_kernels()?;
    let (kernel_count, m, kmer_len) = binary.dim();
    let mut kmers: Vec<Vec<usize>> = Vec::new();
    let mut provenance: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for c in 0..kernel_count {
        let mut items = Vec::with_capacity(kmer_len);
        for r in 0..kmer_len {
            let row = (0..m)
                .find(|&i| binary[[c, i, r]] == 1.0)
                .expect("hamming quantizer sets one 1 per column");
            items.push(row);
        }
        match seen.get(&items) {
            Some(&idx) => provenance[idx].push(c),
            None => {
                seen.insert(items.clone(), kmers.len());
                kmers.push(items);
                provenance.push(vec![c]);
            }
        }
    }
    Ok(KmerSet {
        kmer_len,
        kmers,
        provenance,
        alphabet: model.alphabet.clone(),
    })
}

fn quantizer_tag(kind: QuantizerKind) -> u8 {
    match kind {
        QuantizerKind::Hamming => 0,
        QuantizerKind::Heaviside => 1,
        QuantizerKind::Sign => 2,
        QuantizerKind::None => 3,
    }
}

fn quantizer_from_tag(tag: u8) -> Result<QuantizerKind> {
    match tag {
        0 => Ok(QuantizerKind::Hamming),
        1 => Ok(QuantizerKind::Heaviside),
        2 => Ok(QuantizerKind::Sign),
        3 => Ok(QuantizerKind::None),
        other => Err(Error::ModelFormat(format!("unknown quantizer tag {other}"))),
    }
}

fn write_string(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::ModelFormat("file is truncated".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::ModelFormat("string is not UTF-8".into()))
    }
}

/// Serializes a model to the versioned binary format described in the
/// module docs.
pub fn save_model(model: &EncoderModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(quantizer_tag(model.quantizer));
    buf.extend_from_slice(&(model.kmer_len() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.kernel_count() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.alphabet.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.class_names.len() as u32).to_le_bytes());
    for symbol in model.alphabet.symbols() {
        write_string(&mut buf, symbol);
    }
    for name in &model.class_names {
        write_string(&mut buf, name);
    }
    for &w in model.conv_weights.iter() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    for &w in model.dense_weights.iter() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Loads a model saved by [`save_model`]. The round trip is bitwise exact.
pub fn load_model(path: impl AsRef<Path>) -> Result<EncoderModel> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(MAGIC.len())? != MAGIC {
        return Err(Error::ModelFormat("bad magic header".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let quantizer = quantizer_from_tag(cur.u8()?)?;
    let kmer_len = cur.u32()? as usize;
    let kernel_count = cur.u32()? as usize;
    let m = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    if kmer_len == 0 || kernel_count == 0 || m == 0 || d < 2 {
        return Err(Error::ModelFormat("invalid dimensions in header".into()));
    }
    let mut symbols = Vec::with_capacity(m);
    for _ in 0..m {
        symbols.push(cur.string()?);
    }
    let alphabet = ItemAlphabet::from_symbols(symbols)
        .map_err(|e| Error::ModelFormat(format!("bad alphabet: {e}")))?;
    let mut class_names = Vec::with_capacity(d);
    for _ in 0..d {
        class_names.push(cur.string()?);
    }
    let conv_len = kernel_count
        .checked_mul(m)
        .and_then(|x| x.checked_mul(kmer_len))
        .ok_or_else(|| Error::ModelFormat("dimensions overflow".into()))?;
    let mut conv = Vec::with_capacity(conv_len);
    for _ in 0..conv_len {
        conv.push(cur.f64()?);
    }
    let mut dense = Vec::with_capacity(d * kernel_count);
    for _ in 0..d * kernel_count {
        dense.push(cur.f64()?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::ModelFormat("trailing bytes after weights".into()));
    }
    Ok(EncoderModel {
        conv_weights: Array3::from_shape_vec((kernel_count, m, kmer_len), conv)
            .expect("length checked above"),
        dense_weights: Array2::from_shape_vec((d, kernel_count), dense)
            .expect("length checked above"),
        quantizer,
        alphabet,
        class_names,
    })
}
