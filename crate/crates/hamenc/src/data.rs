//! Dataset parsing, alphabet construction, one-hot encoding, and the
//! planted-motif synthetic generator.
//!
//! The on-disk dataset format is a UTF-8 TSV: one record per line,
//! `label<TAB>tok1 tok2 ... tokn`, with `#`-prefixed comment lines and blank
//! lines ignored. Alphabet symbols and class names are indexed in order of
//! first appearance in the file.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use ndarray::{Array3, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Item slot standing in for "matches no alphabet symbol": padding beyond a
/// sequence's end and out-of-alphabet tokens seen only at inference time.
/// One-hot encoding maps it to an all-zero column, so under the dot-product
/// view it is a guaranteed mismatch.
pub const MISMATCH_ITEM: usize = usize::MAX;

/// Ordered bijection between item tokens and row indices of the one-hot
/// encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemAlphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl ItemAlphabet {
    /// Builds an alphabet from symbols in the given order. Duplicates are
    /// rejected so that token -> index stays a bijection.
    pub fn from_symbols<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = ItemAlphabet {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for sym in symbols {
            out.push(sym.into())?;
        }
        Ok(out)
    }

    fn push(&mut self, symbol: String) -> Result<usize> {
        if self.index.contains_key(&symbol) {
            return Err(Error::validation(format!("duplicate symbol {symbol:?}")));
        }
        let idx = self.symbols.len();
        self.index.insert(symbol.clone(), idx);
        self.symbols.push(symbol);
        Ok(idx)
    }

    /// Index of `symbol`, inserting it at the end if unseen.
    pub(crate) fn intern(&mut self, symbol: &str) -> usize {
        match self.index.get(symbol) {
            Some(&idx) => idx,
            None => self
                .push(symbol.to_owned())
                .expect("intern only inserts unseen symbols"),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Maps a token to its index, or [`MISMATCH_ITEM`] when it is not part
    /// of this alphabet.
    pub fn map_token(&self, token: &str) -> usize {
        self.index_of(token).unwrap_or(MISMATCH_ITEM)
    }
}

/// One labeled sequence: item indices into the owning dataset's alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub items: Vec<usize>,
    pub label: usize,
}

/// A validated collection of labeled sequences over a shared alphabet.
#[derive(Debug, Clone)]
pub struct LabeledSequenceDataset {
    records: Vec<SequenceRecord>,
    class_names: Vec<String>,
    alphabet: ItemAlphabet,
}

impl LabeledSequenceDataset {
    /// Validates the dataset invariants: non-empty sequences, in-range item
    /// and label indices, at least two classes, every class populated.
    pub fn new(
        records: Vec<SequenceRecord>,
        class_names: Vec<String>,
        alphabet: ItemAlphabet,
    ) -> Result<Self> {
        let d = class_names.len();
        if d < 2 {
            return Err(Error::validation(format!(
                "dataset must have at least 2 classes, found {d}"
            )));
        }
        let mut seen = vec![false; d];
        for (n, rec) in records.iter().enumerate() {
            if rec.items.is_empty() {
                return Err(Error::validation(format!("record {n} has an empty sequence")));
            }
            if rec.label >= d {
                return Err(Error::validation(format!(
                    "record {n} has label {} but only {d} classes exist",
                    rec.label
                )));
            }
            seen[rec.label] = true;
            if let Some(&bad) = rec.items.iter().find(|&&i| i >= alphabet.len()) {
                return Err(Error::validation(format!(
                    "record {n} has item index {bad} outside alphabet of size {}",
                    alphabet.len()
                )));
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::validation(format!(
                "class {:?} has no records",
                class_names[missing]
            )));
        }
        Ok(LabeledSequenceDataset {
            records,
            class_names,
            alphabet,
        })
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn alphabet(&self) -> &ItemAlphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Longest sequence in the dataset.
    pub fn max_length(&self) -> usize {
        self.records.iter().map(|r| r.items.len()).max().unwrap_or(0)
    }

    /// Median sequence length; for an even count, the mean of the two
    /// central values.
    pub fn median_length(&self) -> f64 {
        let mut lens: Vec<usize> = self.records.iter().map(|r| r.items.len()).collect();
        lens.sort_unstable();
        let n = lens.len();
        if n % 2 == 1 {
            lens[n / 2] as f64
        } else {
            (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
        }
    }

    /// Renders a record's sequence back to tokens.
    pub fn tokens(&self, record: &SequenceRecord) -> Vec<&str> {
        record
            .items
            .iter()
            .map(|&i| self.alphabet.token(i).expect("validated item index"))
            .collect()
    }
}

/// Parses the TSV dataset format from a file.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<LabeledSequenceDataset> {
    let file = File::open(path)?;
    parse_dataset_from_reader(file)
}

/// Parses the TSV dataset format from any reader. Alphabet symbols and class
/// names are indexed in first-appearance order.
pub fn parse_dataset_from_reader(reader: impl Read) -> Result<LabeledSequenceDataset> {
    let reader = BufReader::new(reader);
    let mut alphabet = ItemAlphabet::from_symbols(Vec::<String>::new())?;
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut records = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (label, rest) = trimmed.split_once('\t').ok_or_else(|| Error::Parse {
            line: lineno,
            message: "expected `label<TAB>tokens`".into(),
        })?;
        if label.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty label".into(),
            });
        }
        let items: Vec<usize> = rest
            .split_whitespace()
            .map(|tok| alphabet.intern(tok))
            .collect();
        if items.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty sequence".into(),
            });
        }
        let label = match class_index.get(label) {
            Some(&idx) => idx,
            None => {
                let idx = class_names.len();
                class_index.insert(label.to_owned(), idx);
                class_names.push(label.to_owned());
                idx
            }
        };
        records.push(SequenceRecord { items, label });
    }

    if records.is_empty() {
        return Err(Error::validation("dataset contains no records"));
    }
    LabeledSequenceDataset::new(records, class_names, alphabet)
}

/// A batch of sequences encoded as a padded binary tensor
/// `[batch x alphabet x width]`. Data columns carry exactly one 1; padding
/// columns (and [`MISMATCH_ITEM`] slots) are all-zero.
#[derive(Debug, Clone)]
pub struct OneHotBatch {
    values: Array3<f64>,
    slots: Vec<Vec<usize>>,
    lengths: Vec<usize>,
    alphabet_size: usize,
}

impl OneHotBatch {
    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Padded width shared by every sequence in the batch.
    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    /// Item index at `(sequence, position)`, or `None` for padding and
    /// mismatch slots. This is the sparse view of the tensor that the
    /// convolution consumes.
    pub(crate) fn item_at(&self, sequence: usize, position: usize) -> Option<usize> {
        let slots = &self.slots[sequence];
        match slots.get(position) {
            Some(&item) if item != MISMATCH_ITEM => Some(item),
            _ => None,
        }
    }
}

/// One-hot encodes a slice of sequences into a `[N x m x width]` tensor.
///
/// Item indices must be `< m`; the only exception is [`MISMATCH_ITEM`],
/// which encodes to an all-zero column exactly like padding.
pub fn one_hot_encode<S: AsRef<[usize]>>(
    sequences: &[S],
    alphabet_size: usize,
    width: usize,
) -> Result<OneHotBatch> {
    let n = sequences.len();
    let max_len = sequences.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
    if width < max_len {
        return Err(Error::validation(format!(
            "padded width {width} is smaller than longest sequence {max_len}"
        )));
    }
    let mut values = Array3::<f64>::zeros((n, alphabet_size, width));
    let mut slots = Vec::with_capacity(n);
    let mut lengths = Vec::with_capacity(n);
    for (s, seq) in sequences.iter().enumerate() {
        let seq = seq.as_ref();
        for (j, &item) in seq.iter().enumerate() {
            if item == MISMATCH_ITEM {
                continue;
            }
            if item >= alphabet_size {
                return Err(Error::validation(format!(
                    "sequence {s} position {j}: item index {item} >= alphabet size {alphabet_size}"
                )));
            }
            values[[s, item, j]] = 1.0;
        }
        slots.push(seq.to_vec());
        lengths.push(seq.len());
    }
    Ok(OneHotBatch {
        values,
        slots,
        lengths,
        alphabet_size,
    })
}

/// Decodes one one-hot column back to its token; all-zero columns decode to
/// `None` (padding). Columns must be binary with at most one 1.
pub fn inverse_one_hot<'a>(
    column: ArrayView1<'_, f64>,
    alphabet: &'a ItemAlphabet,
) -> Result<Option<&'a str>> {
    if column.len() != alphabet.len() {
        return Err(Error::shape(format!(
            "column has {} rows, alphabet has {}",
            column.len(),
            alphabet.len()
        )));
    }
    let mut hit = None;
    for (i, &v) in column.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if v != 1.0 {
            return Err(Error::validation(format!(
                "one-hot column contains non-binary value {v} at row {i}"
            )));
        }
        if hit.is_some() {
            return Err(Error::validation("one-hot column contains more than one 1"));
        }
        hit = Some(i);
    }
    Ok(hit.map(|i| alphabet.token(i).expect("row index < alphabet length")))
}

/// Symbol names for synthetic alphabets: `A..Z`, then `AA`, `AB`, ...
/// (bijective base-26).
pub fn synthetic_symbols(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            let mut n = i + 1;
            let mut name = Vec::new();
            while n > 0 {
                n -= 1;
                name.push(b'A' + (n % 26) as u8);
                n /= 26;
            }
            name.reverse();
            String::from_utf8(name).expect("ASCII letters")
        })
        .collect()
}

/// Configuration for [`generate_planted_motif_dataset`]. One motif per
/// class; class count is `motifs.len()`.
#[derive(Debug, Clone)]
pub struct MotifDatasetConfig {
    /// One token sequence per class, planted verbatim in that class's
    /// sequences (before noise).
    pub motifs: Vec<Vec<String>>,
    pub alphabet_size: usize,
    pub sequences_per_class: usize,
    pub min_length: usize,
    pub max_length: usize,
    /// Per-position probability that a planted motif symbol is replaced by
    /// a uniformly random *other* symbol.
    pub noise: f64,
    pub seed: u64,
}

/// Generates a labeled dataset of uniform-random background sequences, each
/// carrying its class motif at a uniform-random position.
///
/// Noise and replacement draws happen for every motif position regardless of
/// the noise rate, so two runs that differ only in `noise` share background,
/// placement, and replacement streams.
pub fn generate_planted_motif_dataset(
    config: &MotifDatasetConfig,
) -> Result<LabeledSequenceDataset> {
    let d = config.motifs.len();
    let m = config.alphabet_size;
    if d < 2 {
        return Err(Error::validation("need at least two motifs (one per class)"));
    }
    if m < 2 {
        return Err(Error::validation("alphabet size must be at least 2"));
    }
    if config.sequences_per_class == 0 {
        return Err(Error::validation("sequences_per_class must be positive"));
    }
    if config.min_length == 0 || config.min_length > config.max_length {
        return Err(Error::validation(format!(
            "invalid length range [{}, {}]",
            config.min_length, config.max_length
        )));
    }
    if !(0.0..1.0).contains(&config.noise) {
        return Err(Error::validation(format!(
            "noise rate {} outside [0, 1)",
            config.noise
        )));
    }
    let symbols = synthetic_symbols(m);
    let alphabet = ItemAlphabet::from_symbols(symbols)?;
    let mut motif_items = Vec::with_capacity(d);
    let mut distinct = HashSet::new();
    for motif in &config.motifs {
        if motif.is_empty() {
            return Err(Error::validation("motif must be non-empty"));
        }
        if motif.len() > config.min_length {
            return Err(Error::validation(format!(
                "motif length {} exceeds minimum sequence length {}",
                motif.len(),
                config.min_length
            )));
        }
        let items: Vec<usize> = motif
            .iter()
            .map(|tok| {
                alphabet.index_of(tok).ok_or_else(|| {
                    Error::validation(format!(
                        "motif token {tok:?} is not one of the {m} synthetic symbols"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if !distinct.insert(items.clone()) {
            return Err(Error::validation("motifs must be pairwise distinct"));
        }
        motif_items.push(items);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(d * config.sequences_per_class);
    for (label, motif) in motif_items.iter().enumerate() {
        for _ in 0..config.sequences_per_class {
            let len = rng.gen_range(config.min_length..=config.max_length);
            let mut items: Vec<usize> = (0..len).map(|_| rng.gen_range(0..m)).collect();
            let start = rng.gen_range(0..=len - motif.len());
            for (offset, &item) in motif.iter().enumerate() {
                let corrupt: f64 = rng.gen();
                let replacement = (item + 1 + rng.gen_range(0..m - 1)) % m;
                items[start + offset] = if corrupt < config.noise { replacement } else { item };
            }
            records.push(SequenceRecord { items, label });
        }
    }
    let class_names = (0..d).map(|c| format!("c{c}")).collect();
    LabeledSequenceDataset::new(records, class_names, alphabet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<LabeledSequenceDataset> {
        parse_dataset_from_reader(text.as_bytes())
    }

    #[test]
    fn parse_indexes_by_first_appearance() {
        let ds = parse("A\tx y x\nB\ty z\n").unwrap();
        assert_eq!(ds.alphabet().symbols(), ["x", "y", "z"]);
        assert_eq!(ds.class_names(), ["A", "B"]);
        assert_eq!(ds.records()[0].items, vec![0, 1, 0]);
        assert_eq!(ds.records()[0].label, 0);
        assert_eq!(ds.records()[1].items, vec![1, 2]);
        assert_eq!(ds.records()[1].label, 1);
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let ds = parse("# header\n\nA\tx\nB\ty\n").unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn parse_rejects_empty_sequence_with_line_number() {
        let err = parse("A\tx\nB\t\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_missing_tab() {
        let err = parse("A x y\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_rejects_single_class() {
        let err = parse("A\tx\nA\ty\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn one_hot_matches_hand_positions() {
        // alphabet [A, B, C], sequence CACBA
        let seq = vec![2usize, 0, 2, 1, 0];
        let batch = one_hot_encode(&[seq], 3, 5).unwrap();
        let expected = [(2, 0), (0, 1), (2, 2), (1, 3), (0, 4)];
        let mut ones = 0;
        for i in 0..3 {
            for j in 0..5 {
                let v = batch.values()[[0, i, j]];
                if expected.contains(&(i, j)) {
                    assert_eq!(v, 1.0);
                    ones += 1;
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert_eq!(ones, 5);
    }

    #[test]
    fn one_hot_empty_slice() {
        let batch = one_hot_encode(&Vec::<Vec<usize>>::new(), 4, 3).unwrap();
        assert_eq!(batch.batch_size(), 0);
        assert_eq!(batch.values().shape(), &[0, 4, 3]);
    }

    #[test]
    fn one_hot_pads_with_zero_columns() {
        let batch = one_hot_encode(&[vec![0usize]], 2, 3).unwrap();
        for j in 1..3 {
            assert_eq!(batch.values()[[0, 0, j]], 0.0);
            assert_eq!(batch.values()[[0, 1, j]], 0.0);
        }
        assert_eq!(batch.lengths(), &[1]);
    }

    #[test]
    fn one_hot_rejects_width_smaller_than_sequence() {
        let err = one_hot_encode(&[vec![0usize, 1, 0]], 2, 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn one_hot_rejects_out_of_range_item() {
        let err = one_hot_encode(&[vec![2usize]], 2, 1).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn one_hot_encodes_mismatch_item_as_zero_column() {
        let batch = one_hot_encode(&[vec![0usize, MISMATCH_ITEM]], 2, 2).unwrap();
        assert_eq!(batch.values()[[0, 0, 1]], 0.0);
        assert_eq!(batch.values()[[0, 1, 1]], 0.0);
        assert_eq!(batch.item_at(0, 1), None);
        assert_eq!(batch.lengths(), &[2]);
    }

    #[test]
    fn inverse_one_hot_decodes_token_and_padding() {
        let alphabet = ItemAlphabet::from_symbols(["A", "B", "C"]).unwrap();
        let col = ndarray::arr1(&[0.0, 0.0, 1.0]);
        assert_eq!(inverse_one_hot(col.view(), &alphabet).unwrap(), Some("C"));
        let pad = ndarray::arr1(&[0.0, 0.0, 0.0]);
        assert_eq!(inverse_one_hot(pad.view(), &alphabet).unwrap(), None);
    }

    #[test]
    fn inverse_one_hot_rejects_multiple_ones() {
        let alphabet = ItemAlphabet::from_symbols(["A", "B", "C"]).unwrap();
        let col = ndarray::arr1(&[1.0, 1.0, 0.0]);
        assert!(inverse_one_hot(col.view(), &alphabet).is_err());
    }

    fn motif_config(noise: f64, seed: u64) -> MotifDatasetConfig {
        MotifDatasetConfig {
            motifs: vec![
                "ABABA".chars().map(String::from).collect(),
                "CDCDC".chars().map(String::from).collect(),
            ],
            alphabet_size: 6,
            sequences_per_class: 50,
            min_length: 10,
            max_length: 20,
            noise,
            seed,
        }
    }

    fn contains_subsequence(haystack: &[usize], needle: &[usize]) -> bool {
        haystack.windows(needle.len()).any(|w| w == needle)
    }

    #[test]
    fn zero_noise_plants_motif_in_every_sequence() {
        let ds = generate_planted_motif_dataset(&motif_config(0.0, 3)).unwrap();
        let motifs = [vec![0usize, 1, 0, 1, 0], vec![2usize, 3, 2, 3, 2]];
        for rec in ds.records() {
            assert!(
                contains_subsequence(&rec.items, &motifs[rec.label]),
                "motif missing from {:?}",
                rec.items
            );
        }
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let a = generate_planted_motif_dataset(&motif_config(0.3, 11)).unwrap();
        let b = generate_planted_motif_dataset(&motif_config(0.3, 11)).unwrap();
        assert_eq!(a.records(), b.records());
        let c = generate_planted_motif_dataset(&motif_config(0.3, 12)).unwrap();
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn corruption_count_matches_binomial_oracle() {
        // Same seed at noise 0 and noise 0.5 shares background and placement
        // streams, so positionwise differences count exactly the corrupted
        // motif positions: Binomial(1000, 0.5).
        let mut clean_cfg = motif_config(0.0, 99);
        let mut noisy_cfg = motif_config(0.5, 99);
        clean_cfg.sequences_per_class = 100;
        noisy_cfg.sequences_per_class = 100;
        let clean = generate_planted_motif_dataset(&clean_cfg).unwrap();
        let noisy = generate_planted_motif_dataset(&noisy_cfg).unwrap();
        let mut corrupted = 0usize;
        let mut positions = 0usize;
        for (a, b) in clean.records().iter().zip(noisy.records()) {
            assert_eq!(a.items.len(), b.items.len());
            corrupted += a
                .items
                .iter()
                .zip(&b.items)
                .filter(|(x, y)| x != y)
                .count();
            positions += 5; // motif length
        }
        assert_eq!(positions, 1000);
        let mean = 500.0;
        let sigma = (1000.0f64 * 0.25).sqrt();
        assert!(
            (corrupted as f64 - mean).abs() < 3.0 * sigma,
            "corrupted {corrupted} outside 3 sigma of Binomial(1000, 0.5)"
        );
    }

    #[test]
    fn generator_rejects_motif_longer_than_min_length() {
        let mut cfg = motif_config(0.0, 1);
        cfg.min_length = 3;
        assert!(generate_planted_motif_dataset(&cfg).is_err());
    }

    #[test]
    fn generator_rejects_duplicate_motifs() {
        let mut cfg = motif_config(0.0, 1);
        cfg.motifs[1] = cfg.motifs[0].clone();
        assert!(generate_planted_motif_dataset(&cfg).is_err());
    }

    #[test]
    fn synthetic_symbols_extend_past_single_letters() {
        let syms = synthetic_symbols(28);
        assert_eq!(syms[0], "A");
        assert_eq!(syms[25], "Z");
        assert_eq!(syms[26], "AA");
        assert_eq!(syms[27], "AB");
    }

    proptest! {
        // Round trip: encode then per-column decode reproduces the token
        // sequence followed by padding markers, and total ones = sum of
        // lengths.
        #[test]
        fn one_hot_round_trip(
            seqs in proptest::collection::vec(
                proptest::collection::vec(0usize..5, 1..12),
                1..6,
            ),
            extra in 0usize..4,
        ) {
            let alphabet = ItemAlphabet::from_symbols(synthetic_symbols(5)).unwrap();
            let width = seqs.iter().map(Vec::len).max().unwrap() + extra;
            let batch = one_hot_encode(&seqs, 5, width).unwrap();
            let mut total_ones = 0.0;
            for (n, seq) in seqs.iter().enumerate() {
                for j in 0..width {
                    let col = batch.values().slice(ndarray::s![n, .., j]);
                    let decoded = inverse_one_hot(col, &alphabet).unwrap();
                    if j < seq.len() {
                        prop_assert_eq!(decoded, alphabet.token(seq[j]));
                    } else {
                        prop_assert_eq!(decoded, None);
                    }
                    total_ones += col.sum();
                }
            }
            let expected: usize = seqs.iter().map(Vec::len).sum();
            prop_assert_eq!(total_ones as usize, expected);
        }
    }
}
