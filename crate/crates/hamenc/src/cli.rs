//! The `hamenc` command line: synth, train, extract, featurize, classify,
//! eval, end2end, verify.
//!
//! Exit codes: 0 success, 1 verification/validation failure, 2 usage error,
//! 3 I/O error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{
    generate_planted_motif_dataset, parse_dataset, synthetic_symbols, LabeledSequenceDataset,
    MotifDatasetConfig,
};
use crate::encoder::{extract_kmers, load_model, save_model, train, EncoderModel, TrainConfig};
use crate::error::Error;
use crate::eval::{
    classify_gnb, classify_knn, classify_linear_svm, cross_validate, end_to_end_eval,
    ClassifierKind, CvPlan, EvalOptions, EvalReport, SvmParams,
};
use crate::features::{export_features, featurize, verify_theorem1_with_fault, Theorem1Config};
use crate::quantize::QuantizerKind;

#[derive(Parser)]
#[command(
    name = "hamenc",
    version,
    about = "Mine discriminative k-mers with a binarized 1D-conv encoder and classify sequences by k-mer Hamming similarity"
)]
struct Cli {
    /// Worker threads for parallel sections; 1 is the bit-exact reference
    /// mode (results are identical for any value by construction)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-motif synthetic dataset TSV
    Synth(SynthArgs),
    /// Train the encoder on a dataset TSV, writing a model file and a
    /// loss-history CSV
    Train(TrainArgs),
    /// Translate a trained model's kernels into its k-mer set
    Extract(ExtractArgs),
    /// Write KH-similarity feature vectors for a dataset as CSV
    Featurize(FeaturizeArgs),
    /// Featurize train/test TSVs against a model and print test accuracy
    Classify(ClassifyArgs),
    /// Repeated stratified cross-validation of the full pipeline
    /// (train -> extract -> featurize -> classifier)
    Eval(EvalArgs),
    /// Cross-validation with the trained network as the classifier
    End2end(End2endArgs),
    /// Verify that conv + global max pooling equals the Hamming-scan
    /// similarity on random instances
    Verify(VerifyArgs),
}

/// Training hyperparameters shared by train/eval/end2end.
#[derive(Args, Clone)]
struct TrainFlags {
    /// Number of convolution kernels (the initial k-mer budget)
    #[arg(long, default_value_t = 1024)]
    kernels: usize,

    /// k-mer length; chosen from the sequence-length distribution when
    /// omitted (5 if median length >= 30, else 2)
    #[arg(long)]
    k: Option<usize>,

    #[arg(long, default_value_t = 100)]
    epochs: usize,

    #[arg(long, default_value_t = 64)]
    batch_size: usize,

    /// Adam learning rate
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,

    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Binarization strategy: hamming | heaviside | sign | none
    #[arg(long, default_value = "hamming", value_parser = parse_quantizer)]
    quantizer: QuantizerKind,
}

impl TrainFlags {
    fn to_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            kernel_count: self.kernels,
            kmer_len: self.k,
            learning_rate: self.lr,
            weight_decay: self.weight_decay,
            seed: self.seed,
            quantizer: self.quantizer,
        }
    }
}

fn parse_quantizer(s: &str) -> Result<QuantizerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset TSV path
    #[arg(long)]
    output: PathBuf,

    /// Comma-separated motifs over single-letter symbols (e.g.
    /// "ABABA,CDCDC"), one per class; auto-generated when omitted
    #[arg(long)]
    motifs: Option<String>,

    /// Number of classes (only used when --motifs is omitted)
    #[arg(long, default_value_t = 2)]
    classes: usize,

    /// Length of auto-generated motifs
    #[arg(long, default_value_t = 5)]
    motif_len: usize,

    #[arg(long, default_value_t = 10)]
    alphabet_size: usize,

    #[arg(long, default_value_t = 100)]
    per_class: usize,

    /// Minimum sequence length
    #[arg(long, default_value_t = 30)]
    lmin: usize,

    /// Maximum sequence length
    #[arg(long, default_value_t = 60)]
    lmax: usize,

    /// Per-position probability of corrupting a planted motif symbol
    #[arg(long, default_value_t = 0.1)]
    noise: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset TSV
    #[arg(long)]
    data: PathBuf,

    /// Output model file
    #[arg(long)]
    model_out: PathBuf,

    /// Output loss-history CSV (defaults to <model-out>.loss.csv)
    #[arg(long)]
    loss_out: Option<PathBuf>,

    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct ExtractArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,

    /// Output k-mer list; stdout when omitted. One k-mer per line: tokens
    /// space-separated, then a tab and the source-kernel count
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,

    /// Dataset TSV to featurize
    #[arg(long)]
    data: PathBuf,

    /// Output feature CSV
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,

    /// Labeled training TSV (fits the classifier)
    #[arg(long)]
    train: PathBuf,

    /// Labeled test TSV (scored)
    #[arg(long)]
    test: PathBuf,

    /// Classifier: knn | gnb | svm
    #[arg(long, default_value = "knn", value_parser = parse_classifier)]
    classifier: ClassifierKind,

    /// Neighbors for knn
    #[arg(long, default_value_t = 5)]
    knn_neighbors: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Input dataset TSV
    #[arg(long)]
    data: PathBuf,

    /// Output JSON-lines report (one record per classifier per fold)
    #[arg(long)]
    output: PathBuf,

    #[arg(long, default_value_t = 5)]
    folds: usize,

    #[arg(long, default_value_t = 5)]
    repeats: usize,

    /// Comma-separated classifiers to run: knn | gnb | svm
    #[arg(long, default_value = "knn,gnb,svm")]
    classifiers: String,

    /// Neighbors for knn
    #[arg(long, default_value_t = 5)]
    knn_neighbors: usize,

    /// Record wall-clock training time per fold (off by default so reports
    /// are byte-identical across runs)
    #[arg(long)]
    timings: bool,

    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct End2endArgs {
    /// Input dataset TSV
    #[arg(long)]
    data: PathBuf,

    /// Output JSON-lines report
    #[arg(long)]
    output: PathBuf,

    #[arg(long, default_value_t = 5)]
    folds: usize,

    #[arg(long, default_value_t = 5)]
    repeats: usize,

    /// Comma-separated quantizers to compare: hamming | heaviside | sign |
    /// none, or "all"
    #[arg(long, default_value = "hamming")]
    quantizers: String,

    /// Record wall-clock training time per fold
    #[arg(long)]
    timings: bool,

    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    trials: u64,

    #[arg(long, default_value_t = 26)]
    max_alphabet: usize,

    #[arg(long, default_value_t = 50)]
    max_len: usize,

    #[arg(long, default_value_t = 8)]
    max_k: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Perturb one trial's network value (exercises the failure path)
    #[arg(long, hide = true)]
    inject_fault: bool,
}

enum CmdError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CmdError {
    fn from(err: Error) -> Self {
        CmdError::Lib(err)
    }
}

type CmdResult = Result<i32, CmdError>;

fn usage(message: impl Into<String>) -> CmdError {
    CmdError::Usage(message.into())
}

/// Entry point used by `src/main.rs`; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("usage error: --threads must be positive");
            return 2;
        }
        // Ignore failure: the global pool can only be built once per
        // process, which only matters if run() is invoked twice in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Featurize(args) => cmd_featurize(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Eval(args) => cmd_eval(args),
        Command::End2end(args) => cmd_end2end(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(CmdError::Usage(message)) => {
            eprintln!("usage error: {message}");
            2
        }
        Err(CmdError::Lib(err)) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => 3,
                _ => 1,
            }
        }
    }
}

fn write_dataset_tsv(dataset: &LabeledSequenceDataset, path: &Path) -> Result<(), Error> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in dataset.records() {
        writeln!(
            out,
            "{}\t{}",
            dataset.class_names()[record.label],
            dataset.tokens(record).join(" ")
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    if args.lmin == 0 || args.lmin > args.lmax {
        return Err(usage(format!("invalid length range [{}, {}]", args.lmin, args.lmax)));
    }
    if !(0.0..1.0).contains(&args.noise) {
        return Err(usage(format!("--noise {} must be in [0, 1)", args.noise)));
    }
    if args.alphabet_size < 2 {
        return Err(usage("--alphabet-size must be at least 2"));
    }
    let symbols = synthetic_symbols(args.alphabet_size);
    let motifs: Vec<Vec<String>> = match &args.motifs {
        Some(spec) => {
            let motifs: Vec<Vec<String>> = spec
                .split(',')
                .map(|motif| motif.chars().map(String::from).collect())
                .collect();
            if motifs.len() < 2 {
                return Err(usage("--motifs needs at least two comma-separated motifs"));
            }
            for motif in &motifs {
                if motif.is_empty() {
                    return Err(usage("empty motif in --motifs"));
                }
                if motif.len() > args.lmin {
                    return Err(usage(format!(
                        "motif {:?} is longer than --lmin {}",
                        motif.join(""),
                        args.lmin
                    )));
                }
                if let Some(tok) = motif.iter().find(|t| !symbols.contains(t)) {
                    return Err(usage(format!(
                        "motif token {tok:?} is outside the {}-symbol alphabet",
                        args.alphabet_size
                    )));
                }
            }
            motifs
        }
        None => {
            if args.classes < 2 {
                return Err(usage("--classes must be at least 2"));
            }
            if args.motif_len == 0 || args.motif_len > args.lmin {
                return Err(usage(format!(
                    "--motif-len {} must be in [1, --lmin {}]",
                    args.motif_len, args.lmin
                )));
            }
            generate_motifs(&symbols, args.classes, args.motif_len, args.seed)
        }
    };

    let dataset = generate_planted_motif_dataset(&MotifDatasetConfig {
        motifs: motifs.clone(),
        alphabet_size: args.alphabet_size,
        sequences_per_class: args.per_class,
        min_length: args.lmin,
        max_length: args.lmax,
        noise: args.noise,
        seed: args.seed,
    })?;
    write_dataset_tsv(&dataset, &args.output)?;
    for (c, motif) in motifs.iter().enumerate() {
        eprintln!("planted class {} motif {}", dataset.class_names()[c], motif.join(" "));
    }
    Ok(0)
}

/// Deterministically draws `count` distinct motifs of the given length.
fn generate_motifs(symbols: &[String], count: usize, len: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut motifs: Vec<Vec<String>> = Vec::with_capacity(count);
    while motifs.len() < count {
        let motif: Vec<String> = (0..len)
            .map(|_| symbols[rng.gen_range(0..symbols.len())].clone())
            .collect();
        if !motifs.contains(&motif) {
            motifs.push(motif);
        }
    }
    motifs
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let dataset = parse_dataset(&args.data)?;
    let config = args.train.to_config();
    let (model, history) = train(&dataset, &config)?;
    save_model(&model, &args.model_out)?;

    let loss_path = args
        .loss_out
        .unwrap_or_else(|| args.model_out.with_extension("loss.csv"));
    let mut out = BufWriter::new(File::create(&loss_path).map_err(Error::Io)?);
    writeln!(out, "epoch,mean_loss").map_err(Error::Io)?;
    for (epoch, loss) in history.iter().enumerate() {
        writeln!(out, "{},{}", epoch + 1, loss).map_err(Error::Io)?;
    }
    out.flush().map_err(Error::Io)?;

    println!(
        "trained k={} kernels={} epochs={}",
        model.kmer_len(),
        model.kernel_count(),
        history.len()
    );
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!("loss first={first} last={last}");
    }
    Ok(0)
}

fn cmd_extract(args: ExtractArgs) -> CmdResult {
    let model = load_model(&args.model)?;
    let kmers = extract_kmers(&model)?;
    let mut lines = String::new();
    for i in 0..kmers.len() {
        lines.push_str(&kmers.tokens(i).join(" "));
        lines.push('\t');
        lines.push_str(&kmers.provenance(i).len().to_string());
        lines.push('\n');
    }
    match &args.output {
        Some(path) => std::fs::write(path, lines).map_err(Error::Io)?,
        None => print!("{lines}"),
    }
    Ok(0)
}

/// Re-tokenizes a parsed dataset against a model's alphabet; unknown tokens
/// become the guaranteed-mismatch marker.
fn map_to_model(dataset: &LabeledSequenceDataset, model: &EncoderModel) -> Vec<Vec<usize>> {
    dataset
        .records()
        .iter()
        .map(|record| {
            record
                .items
                .iter()
                .map(|&item| {
                    let token = dataset.alphabet().token(item).expect("validated item");
                    model.alphabet().map_token(token)
                })
                .collect()
        })
        .collect()
}

/// Maps a dataset's labels onto the model's class list.
fn labels_for_model(
    dataset: &LabeledSequenceDataset,
    model: &EncoderModel,
) -> Result<Vec<usize>, Error> {
    dataset
        .records()
        .iter()
        .map(|record| {
            let name = &dataset.class_names()[record.label];
            model
                .class_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::Validation(format!("class {name:?} is unknown to the model"))
                })
        })
        .collect()
}

fn cmd_featurize(args: FeaturizeArgs) -> CmdResult {
    let model = load_model(&args.model)?;
    let dataset = parse_dataset(&args.data)?;
    let kmers = extract_kmers(&model)?;
    let sequences = map_to_model(&dataset, &model);
    let max_len = sequences.iter().map(Vec::len).max().unwrap_or(0);
    let width = max_len.max(model.kmer_len());
    let features = featurize(&sequences, &kmers, width)?;
    let labels: Vec<String> = dataset
        .records()
        .iter()
        .map(|r| dataset.class_names()[r.label].clone())
        .collect();
    export_features(&features, &labels, &args.output)?;
    println!("wrote {} rows x {} patterns", features.num_rows(), features.num_columns());
    Ok(0)
}

fn cmd_classify(args: ClassifyArgs) -> CmdResult {
    let model = load_model(&args.model)?;
    let kmers = extract_kmers(&model)?;
    let train_ds = parse_dataset(&args.train)?;
    let test_ds = parse_dataset(&args.test)?;

    let train_seqs = map_to_model(&train_ds, &model);
    let test_seqs = map_to_model(&test_ds, &model);
    let train_y = labels_for_model(&train_ds, &model)?;
    let test_y = labels_for_model(&test_ds, &model)?;

    let k = model.kmer_len();
    let train_width = train_seqs.iter().map(Vec::len).max().unwrap_or(0).max(k);
    let test_width = test_seqs.iter().map(Vec::len).max().unwrap_or(0).max(k);
    let train_x = featurize(&train_seqs, &kmers, train_width)?.to_f64();
    let test_x = featurize(&test_seqs, &kmers, test_width)?.to_f64();

    let d = model.num_classes();
    let predictions = match args.classifier {
        ClassifierKind::Knn => classify_knn(&train_x, &train_y, &test_x, d, args.knn_neighbors)?,
        ClassifierKind::Gnb => classify_gnb(&train_x, &train_y, &test_x, d)?,
        ClassifierKind::LinearSvm => {
            classify_linear_svm(&train_x, &train_y, &test_x, d, &SvmParams::default())?
        }
    };
    let correct = predictions.iter().zip(&test_y).filter(|(p, l)| p == l).count();
    let accuracy = correct as f64 / test_y.len() as f64;
    println!("accuracy {accuracy:.6}");
    Ok(0)
}

fn parse_classifier_list(spec: &str) -> Result<Vec<ClassifierKind>, CmdError> {
    let mut kinds = Vec::new();
    for part in spec.split(',') {
        let kind: ClassifierKind = part
            .trim()
            .parse()
            .map_err(|e: Error| usage(e.to_string()))?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(usage("no classifiers given"));
    }
    Ok(kinds)
}

fn parse_quantizer_list(spec: &str) -> Result<Vec<QuantizerKind>, CmdError> {
    if spec.trim() == "all" {
        return Ok(QuantizerKind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for part in spec.split(',') {
        let kind: QuantizerKind = part
            .trim()
            .parse()
            .map_err(|e: Error| usage(e.to_string()))?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(usage("no quantizers given"));
    }
    Ok(kinds)
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let dataset = parse_dataset(&args.data)?;
    let options = EvalOptions {
        train: args.train.to_config(),
        classifiers: parse_classifier_list(&args.classifiers)?,
        knn_neighbors: args.knn_neighbors,
        svm: SvmParams::default(),
        record_timings: args.timings,
    };
    let plan = CvPlan { folds: args.folds, repeats: args.repeats, seed: args.train.seed };
    let report = cross_validate(&dataset, &options, &plan)?;
    std::fs::write(&args.output, report.to_json_lines()).map_err(Error::Io)?;
    print!("{}", report.render_table());
    println!("mean accuracy {:.4}", report.mean_accuracy());
    Ok(0)
}

fn cmd_end2end(args: End2endArgs) -> CmdResult {
    let dataset = parse_dataset(&args.data)?;
    let quantizers = parse_quantizer_list(&args.quantizers)?;
    let config = args.train.to_config();
    let plan = CvPlan { folds: args.folds, repeats: args.repeats, seed: args.train.seed };
    let mut report = EvalReport::default();
    for quantizer in quantizers {
        report.extend(end_to_end_eval(&dataset, &config, quantizer, &plan, args.timings)?);
    }
    std::fs::write(&args.output, report.to_json_lines()).map_err(Error::Io)?;
    print!("{}", report.render_table());
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    if args.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    if args.max_alphabet < 2 || args.max_len == 0 || args.max_k == 0 {
        return Err(usage("need --max-alphabet >= 2, --max-len >= 1, --max-k >= 1"));
    }
    let config = Theorem1Config {
        trials: args.trials,
        max_alphabet: args.max_alphabet,
        max_len: args.max_len,
        max_k: args.max_k,
        seed: args.seed,
    };
    let fault = if args.inject_fault { Some(0) } else { None };
    let report = verify_theorem1_with_fault(&config, fault)?;
    println!("trials {} mismatches {}", report.trials, report.mismatches);
    if let Some(ce) = &report.first_counterexample {
        println!("counterexample sequence: {}", ce.sequence.join(" "));
        println!("counterexample k-mer: {}", ce.kmer.join(" "));
        println!("conv+maxpool {} vs hamming-scan {}", ce.pooled, ce.similarity);
    }
    Ok(if report.mismatches == 0 { 0 } else { 1 })
}
