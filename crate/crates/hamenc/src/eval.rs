//! Built-in classifiers over feature vectors, repeated stratified
//! cross-validation, the end-to-end network-classifier mode, and report
//! emission.
//!
//! Everything a fold needs (alphabet, padded width, standardization
//! statistics, the trained encoder) is derived from that fold's training
//! split only; test tokens unseen in training map to a marker that matches
//! nothing. Folds run in parallel, each with a seed derived from the plan
//! seed, so parallel and serial runs produce identical reports.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::LabeledSequenceDataset;
use crate::encoder::{extract_kmers, train, TrainConfig};
use crate::error::{Error, Result};
use crate::features::featurize;
use crate::quantize::QuantizerKind;
use crate::util::derive_seed;

/// Repeated stratified k-fold plan.
#[derive(Debug, Clone)]
pub struct CvPlan {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan { folds: 5, repeats: 5, seed: 0 }
    }
}

impl CvPlan {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::validation("cross-validation needs at least 2 folds"));
        }
        if self.repeats == 0 {
            return Err(Error::validation("cross-validation needs at least 1 repeat"));
        }
        Ok(())
    }
}

/// Built-in classifier selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Knn,
    Gnb,
    LinearSvm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] =
        [ClassifierKind::Knn, ClassifierKind::Gnb, ClassifierKind::LinearSvm];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Gnb => "gnb",
            ClassifierKind::LinearSvm => "svm",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ClassifierKind::Knn),
            "gnb" => Ok(ClassifierKind::Gnb),
            "svm" => Ok(ClassifierKind::LinearSvm),
            other => Err(Error::validation(format!(
                "unknown classifier {other:?} (expected knn | gnb | svm)"
            ))),
        }
    }
}

/// k-nearest-neighbors with Euclidean distance and majority vote. Vote ties
/// go to the tied class with the nearest single neighbor, then to the lowest
/// class index. `k_neighbors` is clamped to the training-set size.
pub fn classify_knn(
    train_x: &Array2<f64>,
    train_y: &[usize],
    test_x: &Array2<f64>,
    num_classes: usize,
    k_neighbors: usize,
) -> Result<Vec<usize>> {
    let n = train_x.nrows();
    if n == 0 {
        return Err(Error::validation("kNN needs a non-empty training set"));
    }
    if train_y.len() != n || train_x.ncols() != test_x.ncols() {
        return Err(Error::shape("kNN input shapes disagree"));
    }
    let k = k_neighbors.clamp(1, n);
    let predictions = test_x
        .outer_iter()
        .map(|point| {
            let mut dists: Vec<(f64, usize)> = train_x
                .outer_iter()
                .enumerate()
                .map(|(i, row)| {
                    let d2: f64 = row
                        .iter()
                        .zip(point.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, i)
                })
                .collect();
            dists.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1))
            });
            let mut votes = vec![0usize; num_classes];
            let mut best_rank = vec![usize::MAX; num_classes];
            for (rank, &(_, idx)) in dists[..k].iter().enumerate() {
                let class = train_y[idx];
                votes[class] += 1;
                if rank < best_rank[class] {
                    best_rank[class] = rank;
                }
            }
            let top = *votes.iter().max().expect("num_classes > 0");
            (0..num_classes)
                .filter(|&c| votes[c] == top)
                .min_by_key(|&c| (best_rank[c], c))
                .expect("at least one class has the top vote")
        })
        .collect();
    Ok(predictions)
}

const GNB_VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with per-class feature means/variances (variance
/// floored at 1e-9) and class priors from training frequencies.
pub fn classify_gnb(
    train_x: &Array2<f64>,
    train_y: &[usize],
    test_x: &Array2<f64>,
    num_classes: usize,
) -> Result<Vec<usize>> {
    let (n, f) = train_x.dim();
    if n == 0 {
        return Err(Error::validation("naive Bayes needs a non-empty training set"));
    }
    if train_y.len() != n || test_x.ncols() != f {
        return Err(Error::shape("naive Bayes input shapes disagree"));
    }
    let mut counts = vec![0usize; num_classes];
    let mut means = Array2::<f64>::zeros((num_classes, f));
    for (row, &y) in train_x.outer_iter().zip(train_y) {
        counts[y] += 1;
        for (j, &v) in row.iter().enumerate() {
            means[[y, j]] += v;
        }
    }
    for c in 0..num_classes {
        if counts[c] > 0 {
            for j in 0..f {
                means[[c, j]] /= counts[c] as f64;
            }
        }
    }
    let mut vars = Array2::<f64>::from_elem((num_classes, f), GNB_VARIANCE_FLOOR);
    for (row, &y) in train_x.outer_iter().zip(train_y) {
        for (j, &v) in row.iter().enumerate() {
            let d = v - means[[y, j]];
            vars[[y, j]] += d * d / counts[y] as f64;
        }
    }
    let log_priors: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if c == 0 {
                f64::NEG_INFINITY
            } else {
                (c as f64 / n as f64).ln()
            }
        })
        .collect();

    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let predictions = test_x
        .outer_iter()
        .map(|point| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for c in 0..num_classes {
                if counts[c] == 0 {
                    continue;
                }
                let mut score = log_priors[c];
                for (j, &x) in point.iter().enumerate() {
                    let var = vars[[c, j]];
                    let d = x - means[[c, j]];
                    score -= 0.5 * (ln_2pi + var.ln() + d * d / var);
                }
                if score > best_score {
                    best_score = score;
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(predictions)
}

/// Linear SVM hyperparameters (one-vs-rest hinge loss, full-batch
/// subgradient descent).
#[derive(Debug, Clone)]
pub struct SvmParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { epochs: 200, learning_rate: 0.1, regularization: 1e-4 }
    }
}

/// Fitted one-vs-rest linear SVM with the training standardization
/// statistics baked in.
#[derive(Debug, Clone)]
pub struct SvmModel {
    weights: Array2<f64>,
    biases: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Regularized hinge objective summed over the one-vs-rest problems,
    /// recorded after every epoch.
    pub objective_history: Vec<f64>,
}

/// Fits the one-vs-rest linear SVM. Features are standardized with training
/// mean/std before fitting (zero-variance features keep scale 1), weights
/// start at zero, and the full-batch updates make the fit deterministic.
pub fn fit_linear_svm(
    train_x: &Array2<f64>,
    train_y: &[usize],
    num_classes: usize,
    params: &SvmParams,
) -> Result<SvmModel> {
    let (n, f) = train_x.dim();
    if n == 0 {
        return Err(Error::validation("SVM needs a non-empty training set"));
    }
    if train_y.len() != n {
        return Err(Error::shape("SVM label count disagrees with feature rows"));
    }
    let mut means = vec![0.0; f];
    for row in train_x.outer_iter() {
        for (j, &v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for mean in &mut means {
        *mean /= n as f64;
    }
    let mut stds = vec![0.0; f];
    for row in train_x.outer_iter() {
        for (j, &v) in row.iter().enumerate() {
            let d = v - means[j];
            stds[j] += d * d;
        }
    }
    for std in &mut stds {
        *std = (*std / n as f64).sqrt();
        if *std < 1e-12 {
            *std = 1.0;
        }
    }
    let standardized: Vec<Vec<f64>> = train_x
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| (v - means[j]) / stds[j])
                .collect()
        })
        .collect();

    let mut weights = Array2::<f64>::zeros((num_classes, f));
    let mut biases = vec![0.0; num_classes];
    let mut objective_history = vec![0.0; params.epochs];
    for class in 0..num_classes {
        let targets: Vec<f64> = train_y
            .iter()
            .map(|&y| if y == class { 1.0 } else { -1.0 })
            .collect();
        let mut w = vec![0.0; f];
        let mut b = 0.0;
        for (epoch, objective) in objective_history.iter_mut().enumerate() {
            let lr = params.learning_rate / (1.0 + 0.05 * epoch as f64);
            let mut grad_w: Vec<f64> = w.iter().map(|&wj| params.regularization * wj).collect();
            let mut grad_b = 0.0;
            for (x, &y) in standardized.iter().zip(&targets) {
                let margin = y * (dot(&w, x) + b);
                if margin < 1.0 {
                    for (gj, &xj) in grad_w.iter_mut().zip(x) {
                        *gj -= y * xj / n as f64;
                    }
                    grad_b -= y / n as f64;
                }
            }
            for (wj, gj) in w.iter_mut().zip(&grad_w) {
                *wj -= lr * gj;
            }
            b -= lr * grad_b;

            let hinge: f64 = standardized
                .iter()
                .zip(&targets)
                .map(|(x, &y)| (1.0 - y * (dot(&w, x) + b)).max(0.0))
                .sum::<f64>()
                / n as f64;
            let reg = 0.5 * params.regularization * w.iter().map(|wj| wj * wj).sum::<f64>();
            objective_history[epoch] += hinge + reg;
        }
        for (j, &wj) in w.iter().enumerate() {
            weights[[class, j]] = wj;
        }
        biases[class] = b;
    }
    Ok(SvmModel { weights, biases, means, stds, objective_history })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SvmModel {
    /// Predicts by the largest one-vs-rest margin (ties to the lowest class
    /// index).
    pub fn predict(&self, test_x: &Array2<f64>) -> Result<Vec<usize>> {
        if test_x.ncols() != self.means.len() {
            return Err(Error::shape("SVM feature count disagrees with the fitted model"));
        }
        Ok(test_x
            .outer_iter()
            .map(|row| {
                let x: Vec<f64> = row
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| (v - self.means[j]) / self.stds[j])
                    .collect();
                let mut best = 0;
                let mut best_margin = f64::NEG_INFINITY;
                for c in 0..self.weights.nrows() {
                    let margin = dot(&self.weights.row(c).to_vec(), &x) + self.biases[c];
                    if margin > best_margin {
                        best_margin = margin;
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}

/// Convenience wrapper: fit on the training split, predict the test split.
pub fn classify_linear_svm(
    train_x: &Array2<f64>,
    train_y: &[usize],
    test_x: &Array2<f64>,
    num_classes: usize,
    params: &SvmParams,
) -> Result<Vec<usize>> {
    fit_linear_svm(train_x, train_y, num_classes, params)?.predict(test_x)
}

/// Stratified fold assignment. Fold sizes differ by at most one, and each
/// fold receives either `floor` or `ceil` of its exactly proportional share
/// `n_c * |fold| / N` of every class, so per-fold class shares deviate from
/// the global shares by strictly less than `1 / |fold|`. Within a class,
/// membership is shuffled by the seeded RNG. Returns each fold's test-index
/// list (sorted for stable downstream order).
pub fn stratified_folds(
    labels: &[usize],
    class_names: &[String],
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if folds < 2 {
        return Err(Error::validation("need at least 2 folds"));
    }
    let num_classes = class_names.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < folds {
            return Err(Error::validation(format!(
                "class {:?} has {} records, fewer than {folds} folds",
                class_names[c],
                members.len()
            )));
        }
    }

    let total = labels.len();
    let fold_sizes: Vec<usize> = (0..folds)
        .map(|f| total / folds + usize::from(f < total % folds))
        .collect();

    // Integer proportional targets: class c owes fold f exactly
    // n_c * s_f / N records. Start every cell at the floor, then hand out
    // the remaining units along cells with a nonzero fractional part so
    // that both the per-class and per-fold sums come out exact (a
    // controlled rounding, found by augmenting paths).
    let mut base = vec![vec![0usize; folds]; num_classes];
    let mut fractional = vec![vec![false; folds]; num_classes];
    let mut class_extras = vec![0usize; num_classes];
    let mut fold_extras = fold_sizes.clone();
    for (c, members) in by_class.iter().enumerate() {
        let n_c = members.len();
        let mut assigned = 0;
        for f in 0..folds {
            let numerator = (n_c * fold_sizes[f]) as u64;
            base[c][f] = (numerator / total as u64) as usize;
            fractional[c][f] = numerator % total as u64 != 0;
            assigned += base[c][f];
            fold_extras[f] -= base[c][f];
        }
        class_extras[c] = n_c - assigned;
    }
    let extra = allocate_extras(&class_extras, &fold_extras, &fractional)
        .expect("consistent marginals always admit a controlled rounding");

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); folds];
    for (c, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        let mut cursor = 0;
        for f in 0..folds {
            let take = base[c][f] + usize::from(extra[c][f]);
            assignment[f].extend_from_slice(&members[cursor..cursor + take]);
            cursor += take;
        }
        debug_assert_eq!(cursor, members.len());
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    Ok(assignment)
}

/// Distributes the leftover units of the proportional allocation: find a
/// 0/1 matrix over the allowed (fractional-target) cells whose row sums are
/// `class_extras` and column sums are `fold_extras`. Solved by BFS
/// augmenting paths on the bipartite residual graph; deterministic.
fn allocate_extras(
    class_extras: &[usize],
    fold_extras: &[usize],
    allowed: &[Vec<bool>],
) -> Option<Vec<Vec<bool>>> {
    const SOURCE: usize = usize::MAX;

    let num_classes = class_extras.len();
    let folds = fold_extras.len();
    let mut used = vec![vec![false; folds]; num_classes];
    let mut class_left = class_extras.to_vec();
    let mut fold_left = fold_extras.to_vec();
    let target: usize = class_extras.iter().sum();
    debug_assert_eq!(target, fold_extras.iter().sum::<usize>());

    for _ in 0..target {
        // BFS over the residual graph: forward along unused allowed edges
        // (class -> fold), backward along used ones (fold -> class).
        let mut class_parent = vec![None; num_classes]; // fold we came from
        let mut fold_parent = vec![None; folds]; // class we came from
        let mut queue = std::collections::VecDeque::new();
        for c in 0..num_classes {
            if class_left[c] > 0 {
                class_parent[c] = Some(SOURCE);
                queue.push_back(c);
            }
        }
        let mut sink = None;
        'bfs: while let Some(c) = queue.pop_front() {
            for f in 0..folds {
                if allowed[c][f] && !used[c][f] && fold_parent[f].is_none() {
                    fold_parent[f] = Some(c);
                    if fold_left[f] > 0 {
                        sink = Some(f);
                        break 'bfs;
                    }
                    for c2 in 0..num_classes {
                        if used[c2][f] && class_parent[c2].is_none() {
                            class_parent[c2] = Some(f);
                            queue.push_back(c2);
                        }
                    }
                }
            }
        }
        let sink = sink?;
        let mut fold = sink;
        loop {
            let c = fold_parent[fold].expect("path reaches a source class");
            used[c][fold] = true;
            match class_parent[c].expect("visited class has a parent") {
                SOURCE => {
                    class_left[c] -= 1;
                    break;
                }
                prev_fold => {
                    used[c][prev_fold] = false;
                    fold = prev_fold;
                }
            }
        }
        fold_left[sink] -= 1;
    }
    Some(used)
}

/// Rebuilds a dataset from the chosen records only, with a fresh alphabet
/// built from those records alone (first-appearance order over ascending
/// record index). Class names and label indices are preserved.
pub fn build_fold_dataset(
    dataset: &LabeledSequenceDataset,
    indices: &[usize],
) -> Result<LabeledSequenceDataset> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut alphabet = crate::data::ItemAlphabet::from_symbols(Vec::<String>::new())?;
    let mut records = Vec::with_capacity(sorted.len());
    for &i in &sorted {
        let rec = &dataset.records()[i];
        let items = rec
            .items
            .iter()
            .map(|&item| {
                let token = dataset.alphabet().token(item).expect("validated item");
                alphabet.intern(token)
            })
            .collect();
        records.push(crate::data::SequenceRecord { items, label: rec.label });
    }
    LabeledSequenceDataset::new(records, dataset.class_names().to_vec(), alphabet)
}

/// Re-tokenizes the chosen records against a (typically fold-local)
/// alphabet; tokens outside it become [`crate::data::MISMATCH_ITEM`].
pub fn map_records_to_alphabet(
    dataset: &LabeledSequenceDataset,
    indices: &[usize],
    alphabet: &crate::data::ItemAlphabet,
) -> Vec<Vec<usize>> {
    indices
        .iter()
        .map(|&i| {
            dataset.records()[i]
                .items
                .iter()
                .map(|&item| {
                    let token = dataset.alphabet().token(item).expect("validated item");
                    alphabet.map_token(token)
                })
                .collect()
        })
        .collect()
}

/// One (repeat, fold, classifier) outcome.
#[derive(Debug, Clone, Serialize)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    pub classifier: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<String>,
    pub accuracy: f64,
    pub n_patterns: usize,
    pub train_seconds: f64,
}

/// All fold outcomes of an evaluation run.
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub records: Vec<FoldRecord>,
}

impl EvalReport {
    pub fn mean_accuracy(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.accuracy).sum::<f64>() / self.records.len() as f64
    }

    /// Mean accuracy over records matching the classifier name.
    pub fn classifier_mean(&self, classifier: &str) -> Option<f64> {
        let matching: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.classifier == classifier)
            .map(|r| r.accuracy)
            .collect();
        if matching.is_empty() {
            None
        } else {
            Some(matching.iter().sum::<f64>() / matching.len() as f64)
        }
    }

    /// Mean accuracy over records matching the quantizer name.
    pub fn quantizer_mean(&self, quantizer: &str) -> Option<f64> {
        let matching: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.quantizer.as_deref() == Some(quantizer))
            .map(|r| r.accuracy)
            .collect();
        if matching.is_empty() {
            None
        } else {
            Some(matching.iter().sum::<f64>() / matching.len() as f64)
        }
    }

    pub fn extend(&mut self, other: EvalReport) {
        self.records.extend(other.records);
    }

    /// One JSON object per record, newline-terminated.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("plain struct serializes"));
            out.push('\n');
        }
        out
    }

    /// Aggregated table: one row per (classifier, quantizer) group.
    pub fn render_table(&self) -> String {
        let mut groups: Vec<(String, Option<String>)> = Vec::new();
        for r in &self.records {
            let key = (r.classifier.clone(), r.quantizer.clone());
            if !groups.contains(&key) {
                groups.push(key);
            }
        }
        let mut out = String::from("classifier  quantizer  folds  mean_acc\n");
        for (classifier, quantizer) in groups {
            let accs: Vec<f64> = self
                .records
                .iter()
                .filter(|r| r.classifier == classifier && r.quantizer == quantizer)
                .map(|r| r.accuracy)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            out.push_str(&format!(
                "{:<10}  {:<9}  {:<5}  {:.4}\n",
                classifier,
                quantizer.as_deref().unwrap_or("-"),
                accs.len(),
                mean
            ));
        }
        out
    }
}

/// Settings for the featurize-then-classify evaluation pipeline.
///
/// The per-fold training seed is derived from the plan seed; `train.seed`
/// is not used here.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub train: TrainConfig,
    pub classifiers: Vec<ClassifierKind>,
    pub knn_neighbors: usize,
    pub svm: SvmParams,
    pub record_timings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            train: TrainConfig::default(),
            classifiers: ClassifierKind::ALL.to_vec(),
            knn_neighbors: 5,
            svm: SvmParams::default(),
            record_timings: false,
        }
    }
}

struct FoldJob {
    repeat: usize,
    fold: usize,
    train_indices: Vec<usize>,
    test_indices: Vec<usize>,
}

fn fold_jobs(dataset: &LabeledSequenceDataset, plan: &CvPlan) -> Result<Vec<FoldJob>> {
    plan.validate()?;
    let labels = dataset.labels();
    let mut jobs = Vec::with_capacity(plan.repeats * plan.folds);
    for repeat in 0..plan.repeats {
        let folds = stratified_folds(
            &labels,
            dataset.class_names(),
            plan.folds,
            derive_seed(plan.seed, repeat as u64),
        )?;
        for (fold, test_indices) in folds.iter().enumerate() {
            let in_test = {
                let mut mask = vec![false; dataset.len()];
                for &i in test_indices {
                    mask[i] = true;
                }
                mask
            };
            let train_indices = (0..dataset.len()).filter(|&i| !in_test[i]).collect();
            jobs.push(FoldJob {
                repeat,
                fold,
                train_indices,
                test_indices: test_indices.clone(),
            });
        }
    }
    Ok(jobs)
}

fn fold_train_config(base: &TrainConfig, plan: &CvPlan, job: &FoldJob) -> TrainConfig {
    let mut cfg = base.clone();
    let stream = (job.repeat * plan.folds + job.fold) as u64;
    cfg.seed = derive_seed(plan.seed, 1_000_000 + stream);
    cfg
}

fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / labels.len() as f64
}

/// Trains the encoder on each fold's training split, extracts k-mers,
/// featurizes both splits, and scores every requested classifier. Requires
/// the hamming quantizer (extraction is only defined for it).
pub fn cross_validate(
    dataset: &LabeledSequenceDataset,
    options: &EvalOptions,
    plan: &CvPlan,
) -> Result<EvalReport> {
    if options.classifiers.is_empty() {
        return Err(Error::validation("no classifiers requested"));
    }
    if options.train.quantizer != QuantizerKind::Hamming {
        return Err(Error::Unsupported(format!(
            "the featurize pipeline requires the hamming quantizer, got {}",
            options.train.quantizer
        )));
    }
    let jobs = fold_jobs(dataset, plan)?;
    let per_job: Vec<Result<Vec<FoldRecord>>> = jobs
        .par_iter()
        .map(|job| {
            let fold_ds = build_fold_dataset(dataset, &job.train_indices)?;
            let cfg = fold_train_config(&options.train, plan, job);

            let started = Instant::now();
            let (model, _history) = train(&fold_ds, &cfg)?;
            let train_seconds = if options.record_timings {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            };

            let kmers = extract_kmers(&model)?;
            let k = model.kmer_len();
            let train_width = fold_ds.max_length().max(k);
            let train_seqs: Vec<Vec<usize>> =
                fold_ds.records().iter().map(|r| r.items.clone()).collect();
            let train_x = featurize(&train_seqs, &kmers, train_width)?.to_f64();
            let train_y = fold_ds.labels();

            let test_seqs = map_records_to_alphabet(dataset, &job.test_indices, fold_ds.alphabet());
            let test_len = test_seqs.iter().map(Vec::len).max().unwrap_or(0);
            let test_x = featurize(&test_seqs, &kmers, train_width.max(test_len))?.to_f64();
            let test_y: Vec<usize> = job
                .test_indices
                .iter()
                .map(|&i| dataset.records()[i].label)
                .collect();

            let d = dataset.num_classes();
            let mut records = Vec::with_capacity(options.classifiers.len());
            for &classifier in &options.classifiers {
                let predictions = match classifier {
                    ClassifierKind::Knn => {
                        classify_knn(&train_x, &train_y, &test_x, d, options.knn_neighbors)?
                    }
                    ClassifierKind::Gnb => classify_gnb(&train_x, &train_y, &test_x, d)?,
                    ClassifierKind::LinearSvm => {
                        classify_linear_svm(&train_x, &train_y, &test_x, d, &options.svm)?
                    }
                };
                records.push(FoldRecord {
                    repeat: job.repeat,
                    fold: job.fold,
                    classifier: classifier.to_string(),
                    quantizer: None,
                    accuracy: accuracy(&predictions, &test_y),
                    n_patterns: kmers.len(),
                    train_seconds,
                });
            }
            Ok(records)
        })
        .collect();

    let mut report = EvalReport::default();
    for records in per_job {
        report.records.extend(records?);
    }
    Ok(report)
}

/// Cross-validation where the trained network itself classifies the test
/// fold by logit argmax (no featurize step). Supports all quantizer kinds;
/// `none` is the full-precision baseline.
pub fn end_to_end_eval(
    dataset: &LabeledSequenceDataset,
    train_config: &TrainConfig,
    quantizer: QuantizerKind,
    plan: &CvPlan,
    record_timings: bool,
) -> Result<EvalReport> {
    let jobs = fold_jobs(dataset, plan)?;
    let per_job: Vec<Result<FoldRecord>> = jobs
        .par_iter()
        .map(|job| {
            let fold_ds = build_fold_dataset(dataset, &job.train_indices)?;
            let mut cfg = fold_train_config(train_config, plan, job);
            cfg.quantizer = quantizer;

            let started = Instant::now();
            let (model, _history) = train(&fold_ds, &cfg)?;
            let train_seconds = if record_timings {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            };

            let test_seqs = map_records_to_alphabet(dataset, &job.test_indices, fold_ds.alphabet());
            let train_width = fold_ds.max_length().max(model.kmer_len());
            let predictions = model.predict(&test_seqs, train_width)?;
            let test_y: Vec<usize> = job
                .test_indices
                .iter()
                .map(|&i| dataset.records()[i].label)
                .collect();
            Ok(FoldRecord {
                repeat: job.repeat,
                fold: job.fold,
                classifier: "network".to_string(),
                quantizer: Some(quantizer.to_string()),
                accuracy: accuracy(&predictions, &test_y),
                n_patterns: 0,
                train_seconds,
            })
        })
        .collect();

    let mut report = EvalReport::default();
    for record in per_job {
        report.records.push(record?);
    }
    Ok(report)
}
