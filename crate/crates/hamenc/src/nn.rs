//! Numeric core for the fixed architecture: valid 1D cross-correlation,
//! global max pooling with argmax tracking, a bias-free dense layer, softmax
//! cross-entropy, and Adam.
//!
//! The backward pass is hand-derived for exactly this architecture; there is
//! no autodiff graph. All reductions run in a fixed order (samples ascending,
//! window columns left to right), and parallelism only ever splits work along
//! independent kernel or sample axes, so outputs are bit-identical for any
//! worker count.

use ndarray::{Array, Array2, Array3, Dimension};
use rayon::prelude::*;

use crate::data::OneHotBatch;
use crate::error::{Error, Result};

/// Convolution output `[batch x kernels x windows]`.
#[derive(Debug, Clone)]
pub struct ConvOutput {
    values: Array3<f64>,
}

impl ConvOutput {
    /// Wraps precomputed window values `[batch x kernels x windows]`.
    pub fn from_values(values: Array3<f64>) -> Self {
        ConvOutput { values }
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn num_windows(&self) -> usize {
        self.values.shape()[2]
    }
}

/// Global max pooling output: per (sample, kernel) the max window value and
/// the window index attaining it (first occurrence on ties).
#[derive(Debug, Clone)]
pub struct PoolOutput {
    values: Array2<f64>,
    argmax: Array2<usize>,
}

impl PoolOutput {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn argmax(&self) -> &Array2<usize> {
        &self.argmax
    }
}

/// Gradients for the two trainable tensors.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// `[classes x kernels]`
    pub dense: Array2<f64>,
    /// `[kernels x alphabet x kernel_width]`, computed w.r.t. the binarized
    /// kernels (the straight-through estimator forwards it to the real ones).
    pub conv: Array3<f64>,
}

/// Valid (no padding beyond the batch width) 1D cross-correlation of one-hot
/// inputs with a kernel stack `[K x m x k]`.
///
/// Window values are accumulated left to right over the k kernel columns.
/// Because every input column holds at most a single 1, each column
/// contributes exactly one kernel entry; all-zero columns (padding,
/// out-of-alphabet) contribute nothing, which equals the dense sum since
/// adding a zero product never changes the accumulator.
pub fn conv1d_valid(input: &OneHotBatch, kernels: &Array3<f64>) -> Result<ConvOutput> {
    let (num_kernels, kernel_alphabet, kernel_width) = kernels.dim();
    let n = input.batch_size();
    let width = input.width();
    if kernel_alphabet != input.alphabet_size() {
        return Err(Error::shape(format!(
            "kernels expect alphabet size {kernel_alphabet}, input has {}",
            input.alphabet_size()
        )));
    }
    if kernel_width == 0 {
        return Err(Error::validation("kernel width must be positive"));
    }
    if width < kernel_width {
        return Err(Error::validation(format!(
            "padded width {width} is smaller than kernel width {kernel_width}: no output windows"
        )));
    }
    let windows = width - kernel_width + 1;

    let per_kernel: Vec<Array2<f64>> = (0..num_kernels)
        .into_par_iter()
        .map(|c| {
            let kernel = kernels.index_axis(ndarray::Axis(0), c);
            let mut out = Array2::<f64>::zeros((n, windows));
            for s in 0..n {
                for j in 0..windows {
                    let mut acc = 0.0;
                    for r in 0..kernel_width {
                        if let Some(item) = input.item_at(s, j + r) {
                            acc += kernel[[item, r]];
                        }
                    }
                    out[[s, j]] = acc;
                }
            }
            out
        })
        .collect();

    let mut values = Array3::<f64>::zeros((n, num_kernels, windows));
    for (c, block) in per_kernel.into_iter().enumerate() {
        values
            .slice_mut(ndarray::s![.., c, ..])
            .assign(&block);
    }
    Ok(ConvOutput { values })
}

/// Reduces each (sample, kernel) channel to its maximum window value,
/// recording the argmax window for backward routing. Ties keep the lowest
/// window index.
pub fn global_max_pool(conv: &ConvOutput) -> Result<PoolOutput> {
    let (n, k, windows) = conv.values.dim();
    if windows == 0 {
        return Err(Error::validation("cannot pool over zero windows"));
    }
    let mut values = Array2::<f64>::zeros((n, k));
    let mut argmax = Array2::<usize>::zeros((n, k));
    for s in 0..n {
        for c in 0..k {
            let mut best = conv.values[[s, c, 0]];
            let mut best_j = 0;
            for j in 1..windows {
                let v = conv.values[[s, c, j]];
                if v > best {
                    best = v;
                    best_j = j;
                }
            }
            values[[s, c]] = best;
            argmax[[s, c]] = best_j;
        }
    }
    Ok(PoolOutput { values, argmax })
}

/// Bias-free dense layer: `logits = pooled . weights^T` with `weights`
/// shaped `[classes x kernels]`.
pub fn dense_forward(pooled: &Array2<f64>, weights: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, k) = pooled.dim();
    let (d, kw) = weights.dim();
    if k != kw {
        return Err(Error::shape(format!(
            "pooled features {k} do not match dense weight columns {kw}"
        )));
    }
    let mut logits = Array2::<f64>::zeros((n, d));
    for s in 0..n {
        for o in 0..d {
            let mut acc = 0.0;
            for c in 0..k {
                acc += pooled[[s, c]] * weights[[o, c]];
            }
            logits[[s, o]] = acc;
        }
    }
    Ok(logits)
}

/// Mean softmax cross-entropy over the batch, with the gradient w.r.t. the
/// logits. Numerically stabilized by per-row max subtraction.
pub fn softmax_cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, Array2<f64>)> {
    let (n, d) = logits.dim();
    if n == 0 {
        return Err(Error::validation("cannot compute loss over an empty batch"));
    }
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{} labels for {n} logit rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= d) {
        return Err(Error::validation(format!("label {bad} >= class count {d}")));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("logits contain NaN or infinity".into()));
    }

    let mut dlogits = Array2::<f64>::zeros((n, d));
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for s in 0..n {
        let row = logits.row(s);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum_exp = 0.0;
        for o in 0..d {
            sum_exp += (row[o] - max).exp();
        }
        let log_sum = sum_exp.ln();
        loss -= (row[labels[s]] - max - log_sum) * inv_n;
        for o in 0..d {
            let p = (row[o] - max).exp() / sum_exp;
            let target = if o == labels[s] { 1.0 } else { 0.0 };
            dlogits[[s, o]] = (p - target) * inv_n;
        }
    }
    Ok((loss, dlogits))
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty applied as `grad += weight_decay * param` before the
    /// moment updates (classic Adam style, not decoupled).
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
        }
    }
}

/// Per-parameter-tensor Adam state (first and second moments plus the step
/// counter).
#[derive(Debug, Clone)]
pub struct AdamState<D: Dimension> {
    first_moment: Array<f64, D>,
    second_moment: Array<f64, D>,
    step: u64,
    config: AdamConfig,
}

impl<D: Dimension> AdamState<D> {
    pub fn new(shape: D, config: AdamConfig) -> Self {
        AdamState {
            first_moment: Array::zeros(shape.clone()),
            second_moment: Array::zeros(shape),
            step: 0,
            config,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction.
    pub fn step(&mut self, params: &mut Array<f64, D>, grads: &Array<f64, D>) -> Result<()> {
        if params.raw_dim() != self.first_moment.raw_dim()
            || grads.raw_dim() != self.first_moment.raw_dim()
        {
            return Err(Error::shape(
                "parameter/gradient shape does not match optimizer state",
            ));
        }
        self.step += 1;
        let c = self.config;
        let bias1 = 1.0 - c.beta1.powi(self.step as i32);
        let bias2 = 1.0 - c.beta2.powi(self.step as i32);
        ndarray::Zip::from(params)
            .and(grads)
            .and(&mut self.first_moment)
            .and(&mut self.second_moment)
            .for_each(|p, &g, m, v| {
                let g = g + c.weight_decay * *p;
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            });
        Ok(())
    }
}

/// Routes the pooled gradient back to the window it came from: every window
/// except the recorded argmax receives zero.
pub fn pool_backward(
    dpool: &Array2<f64>,
    pool: &PoolOutput,
    num_windows: usize,
) -> Result<Array3<f64>> {
    let (n, k) = dpool.dim();
    if pool.argmax.dim() != (n, k) {
        return Err(Error::shape("pool argmax does not match gradient shape"));
    }
    let mut out = Array3::<f64>::zeros((n, k, num_windows));
    for s in 0..n {
        for c in 0..k {
            let j = pool.argmax[[s, c]];
            if j >= num_windows {
                return Err(Error::shape(format!(
                    "stale argmax {j} for {num_windows} windows"
                )));
            }
            out[[s, c, j]] = dpool[[s, c]];
        }
    }
    Ok(out)
}

/// Backward pass for the whole architecture given `dlogits` from the loss.
///
/// Dense gradient: `dlogits^T . pooled`. The pooled gradient
/// `dlogits . dense_weights` is routed to each channel's argmax window, and
/// the convolution gradient w.r.t. the binarized kernels accumulates the
/// one-hot input columns under those windows, samples in ascending order.
pub fn backward_pass(
    input: &OneHotBatch,
    dense_weights: &Array2<f64>,
    pool: &PoolOutput,
    dlogits: &Array2<f64>,
    kernel_width: usize,
) -> Result<Gradients> {
    let n = input.batch_size();
    let (d, num_kernels) = dense_weights.dim();
    if pool.values.dim() != (n, num_kernels) {
        return Err(Error::shape(format!(
            "pool output {:?} does not match batch {n} x kernels {num_kernels}",
            pool.values.dim()
        )));
    }
    if dlogits.dim() != (n, d) {
        return Err(Error::shape(format!(
            "dlogits {:?} does not match batch {n} x classes {d}",
            dlogits.dim()
        )));
    }
    if kernel_width == 0 || input.width() < kernel_width {
        return Err(Error::shape(format!(
            "kernel width {kernel_width} incompatible with padded width {}",
            input.width()
        )));
    }
    let num_windows = input.width() - kernel_width + 1;
    if let Some(&stale) = pool.argmax.iter().find(|&&j| j >= num_windows) {
        return Err(Error::shape(format!(
            "stale argmax {stale} for {num_windows} windows"
        )));
    }

    let mut dense = Array2::<f64>::zeros((d, num_kernels));
    for o in 0..d {
        for c in 0..num_kernels {
            let mut acc = 0.0;
            for s in 0..n {
                acc += dlogits[[s, o]] * pool.values[[s, c]];
            }
            dense[[o, c]] = acc;
        }
    }

    let mut dpool = Array2::<f64>::zeros((n, num_kernels));
    for s in 0..n {
        for c in 0..num_kernels {
            let mut acc = 0.0;
            for o in 0..d {
                acc += dlogits[[s, o]] * dense_weights[[o, c]];
            }
            dpool[[s, c]] = acc;
        }
    }

    let alphabet = input.alphabet_size();
    let per_kernel: Vec<Array2<f64>> = (0..num_kernels)
        .into_par_iter()
        .map(|c| {
            let mut grad = Array2::<f64>::zeros((alphabet, kernel_width));
            for s in 0..n {
                let g = dpool[[s, c]];
                if g == 0.0 {
                    continue;
                }
                let window = pool.argmax[[s, c]];
                for r in 0..kernel_width {
                    if let Some(item) = input.item_at(s, window + r) {
                        grad[[item, r]] += g;
                    }
                }
            }
            grad
        })
        .collect();

    let mut conv = Array3::<f64>::zeros((num_kernels, alphabet, kernel_width));
    for (c, block) in per_kernel.into_iter().enumerate() {
        conv.index_axis_mut(ndarray::Axis(0), c).assign(&block);
    }
    Ok(Gradients { dense, conv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::one_hot_encode;
    use crate::quantize::quantize_kernels;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr2, s};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent dense cross-correlation oracle: the literal triple sum
    /// over every kernel row and column.
    fn conv_brute_force(input: &Array3<f64>, kernels: &Array3<f64>) -> Array3<f64> {
        let (n, m, width) = input.dim();
        let (num_kernels, _, kernel_width) = kernels.dim();
        let windows = width - kernel_width + 1;
        let mut out = Array3::<f64>::zeros((n, num_kernels, windows));
        for s in 0..n {
            for c in 0..num_kernels {
                for j in 0..windows {
                    let mut acc = 0.0;
                    for i in 0..m {
                        for r in 0..kernel_width {
                            acc += kernels[[c, i, r]] * input[[s, i, j + r]];
                        }
                    }
                    out[[s, c, j]] = acc;
                }
            }
        }
        out
    }

    /// One-hot kernel for a k-mer: a 1 at (item, column) per column.
    fn kmer_kernel(kmer: &[usize], alphabet: usize) -> Array3<f64> {
        let mut kernel = Array3::<f64>::zeros((1, alphabet, kmer.len()));
        for (r, &item) in kmer.iter().enumerate() {
            kernel[[0, item, r]] = 1.0;
        }
        kernel
    }

    #[test]
    fn conv_window_values_match_brute_force_oracle() {
        // alphabet [A, B, C]; sequence CACBA; kernel = one-hot of CBA.
        let seq = vec![2usize, 0, 2, 1, 0];
        let batch = one_hot_encode(&[seq], 3, 5).unwrap();
        let kernel = kmer_kernel(&[2, 1, 0], 3);
        let out = conv1d_valid(&batch, &kernel).unwrap();
        let brute = conv_brute_force(batch.values(), &kernel);
        assert_eq!(out.values(), &brute);
        // Frozen from the oracle: windows CAC, ACB, CBA against CBA.
        assert_eq!(out.values().slice(s![0, 0, ..]).to_vec(), vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn conv_all_zero_kernel_gives_all_zero_output() {
        let batch = one_hot_encode(&[vec![0usize, 1, 0]], 2, 3).unwrap();
        let kernel = Array3::<f64>::zeros((1, 2, 2));
        let out = conv1d_valid(&batch, &kernel).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_exact_window_match_scores_kernel_width() {
        let seq = vec![1usize, 0, 1, 1];
        let batch = one_hot_encode(&[seq.clone()], 2, 4).unwrap();
        let kernel = kmer_kernel(&[0, 1, 1], 2);
        let out = conv1d_valid(&batch, &kernel).unwrap();
        assert_eq!(out.values()[[0, 0, 1]], 3.0);
    }

    #[test]
    fn conv_rejects_width_smaller_than_kernel() {
        let batch = one_hot_encode(&[vec![0usize]], 2, 1).unwrap();
        let kernel = Array3::<f64>::zeros((1, 2, 3));
        assert!(conv1d_valid(&batch, &kernel).is_err());
    }

    #[test]
    fn conv_is_bit_identical_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seqs: Vec<Vec<usize>> = (0..6)
            .map(|_| (0..12).map(|_| rng.gen_range(0..4)).collect())
            .collect();
        let batch = one_hot_encode(&seqs, 4, 12).unwrap();
        let kernels =
            Array3::from_shape_fn((8, 4, 3), |_| rng.gen_range(-1.0..1.0));
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| conv1d_valid(&batch, &kernels).unwrap())
        };
        let single = run(1);
        let multi = run(4);
        assert_eq!(single.values(), multi.values());
    }

    #[test]
    fn pool_takes_max_and_first_argmax() {
        let values = Array3::from_shape_vec((1, 1, 3), vec![1.0, 1.0, 3.0]).unwrap();
        let pool = global_max_pool(&ConvOutput { values }).unwrap();
        assert_eq!(pool.values()[[0, 0]], 3.0);
        assert_eq!(pool.argmax()[[0, 0]], 2);

        let ties = Array3::from_shape_vec((1, 1, 3), vec![2.0, 2.0, 2.0]).unwrap();
        let pool = global_max_pool(&ConvOutput { values: ties }).unwrap();
        assert_eq!(pool.values()[[0, 0]], 2.0);
        assert_eq!(pool.argmax()[[0, 0]], 0);
    }

    #[test]
    fn pool_single_window_is_identity() {
        let values = Array3::from_shape_vec((2, 1, 1), vec![4.0, -1.0]).unwrap();
        let pool = global_max_pool(&ConvOutput { values }).unwrap();
        assert_eq!(pool.values()[[0, 0]], 4.0);
        assert_eq!(pool.values()[[1, 0]], -1.0);
    }

    #[test]
    fn dense_forward_matches_hand_product() {
        let pooled = arr2(&[[2.0, 3.0]]);
        let weights = arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let logits = dense_forward(&pooled, &weights).unwrap();
        assert_eq!(logits, arr2(&[[2.0, 3.0, 5.0]]));
    }

    #[test]
    fn dense_forward_identity_weights_pass_through() {
        let pooled = arr2(&[[1.5, -2.0], [0.0, 4.0]]);
        let eye = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(dense_forward(&pooled, &eye).unwrap(), pooled);
        let zero = Array2::<f64>::zeros((2, 2));
        assert_eq!(dense_forward(&zero, &eye).unwrap(), zero);
    }

    #[test]
    fn dense_forward_rejects_shape_mismatch() {
        let pooled = arr2(&[[1.0, 2.0]]);
        let weights = arr2(&[[1.0, 2.0, 3.0]]);
        assert!(dense_forward(&pooled, &weights).is_err());
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln_d() {
        for d in 2..6 {
            let logits = Array2::<f64>::from_elem((3, d), 0.7);
            let labels = vec![0usize; 3];
            let (loss, _) = softmax_cross_entropy(&logits, &labels).unwrap();
            assert_abs_diff_eq!(loss, (d as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn cross_entropy_confident_correct_logit_approaches_zero() {
        let logits = arr2(&[[50.0, 0.0]]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn cross_entropy_matches_closed_form() {
        // softmax([0, ln 3]) = [1/4, 3/4]; -ln(1/4) = ln 4.
        let logits = arr2(&[[0.0, 3.0f64.ln()]]);
        let (loss, dlogits) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert_abs_diff_eq!(loss, 4.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(dlogits[[0, 0]], 0.25 - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dlogits[[0, 1]], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_non_finite_logits() {
        let logits = arr2(&[[f64::INFINITY, 0.0]]);
        assert!(softmax_cross_entropy(&logits, &[0]).is_err());
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let logits = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-2.0..2.0));
        let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
        let (_, dlogits) = softmax_cross_entropy(&logits, &labels).unwrap();
        let eps = 1e-4;
        for s in 0..4 {
            for o in 0..3 {
                let mut plus = logits.clone();
                plus[[s, o]] += eps;
                let mut minus = logits.clone();
                minus[[s, o]] -= eps;
                let (lp, _) = softmax_cross_entropy(&plus, &labels).unwrap();
                let (lm, _) = softmax_cross_entropy(&minus, &labels).unwrap();
                let fd = (lp - lm) / (2.0 * eps);
                let rel = (dlogits[[s, o]] - fd).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-4, "rel error {rel} at ({s}, {o})");
            }
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut params = arr2(&[[1.0, -2.0], [3.0, 0.5]]);
        let before = params.clone();
        let mut state = AdamState::new(params.raw_dim(), AdamConfig::new(0.1, 0.0));
        state.step(&mut params, &Array2::zeros((2, 2))).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn adam_first_step_is_bounded_by_learning_rate() {
        let lr = 0.05;
        let mut params = arr2(&[[0.0, 1.0], [-1.0, 2.0]]);
        let before = params.clone();
        let grads = arr2(&[[0.3, -0.7], [2.0, 0.001]]);
        let mut state = AdamState::new(params.raw_dim(), AdamConfig::new(lr, 0.0));
        state.step(&mut params, &grads).unwrap();
        for (p, b) in params.iter().zip(before.iter()) {
            assert!((p - b).abs() <= lr * (1.0 + 1e-6));
        }
    }

    #[test]
    fn adam_matches_scripted_recurrence() {
        let config = AdamConfig::new(0.01, 1e-3);
        let mut params = ndarray::arr1(&[0.4, -0.8]);
        let grads = ndarray::arr1(&[0.25, -0.5]);
        let mut state = AdamState::new(params.raw_dim(), config);

        // Independent recurrence on plain floats.
        let mut expect = [0.4, -0.8];
        let mut m = [0.0; 2];
        let mut v = [0.0; 2];
        for t in 1..=2u32 {
            for i in 0..2 {
                let g = grads[i] + config.weight_decay * expect[i];
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                let m_hat = m[i] / (1.0 - config.beta1.powi(t as i32));
                let v_hat = v[i] / (1.0 - config.beta2.powi(t as i32));
                expect[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
            state.step(&mut params, &grads).unwrap();
        }
        for i in 0..2 {
            assert_abs_diff_eq!(params[i], expect[i], epsilon = 1e-12);
        }
    }

    fn forward_fixture() -> (OneHotBatch, Array3<f64>, Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let seqs: Vec<Vec<usize>> = (0..5)
            .map(|_| {
                let len = rng.gen_range(4..=8);
                (0..len).map(|_| rng.gen_range(0..3)).collect()
            })
            .collect();
        let batch = one_hot_encode(&seqs, 3, 8).unwrap();
        let kernels = Array3::from_shape_fn((4, 3, 2), |_| rng.gen_range(-1.0..1.0));
        let dense = Array2::from_shape_fn((2, 4), |_| rng.gen_range(-1.0..1.0));
        let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..2)).collect();
        (batch, kernels, dense, labels)
    }

    #[test]
    fn backward_zero_dlogits_gives_zero_gradients() {
        let (batch, kernels, dense, _) = forward_fixture();
        let conv = conv1d_valid(&batch, &kernels).unwrap();
        let pool = global_max_pool(&conv).unwrap();
        let dlogits = Array2::<f64>::zeros((5, 2));
        let grads = backward_pass(&batch, &dense, &pool, &dlogits, 2).unwrap();
        assert!(grads.dense.iter().all(|&g| g == 0.0));
        assert!(grads.conv.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_conv_gradient_lives_inside_argmax_window() {
        // Single kernel, single sample: nonzero gradient columns must be
        // exactly the argmax window's columns.
        let seq = vec![0usize, 1, 2, 1];
        let batch = one_hot_encode(&[seq.clone()], 3, 4).unwrap();
        let kernels = kmer_kernel(&[1, 2], 3);
        let conv = conv1d_valid(&batch, &kernels).unwrap();
        let pool = global_max_pool(&conv).unwrap();
        let window = pool.argmax()[[0, 0]];
        assert_eq!(window, 1);
        let dense = arr2(&[[1.0], [-1.0]]);
        let (_, dlogits) = softmax_cross_entropy(
            &dense_forward(pool.values(), &dense).unwrap(),
            &[0],
        )
        .unwrap();
        let grads = backward_pass(&batch, &dense, &pool, &dlogits, 2).unwrap();
        for r in 0..2 {
            for i in 0..3 {
                let g = grads.conv[[0, i, r]];
                if i == seq[window + r] {
                    assert!(g != 0.0);
                } else {
                    assert_eq!(g, 0.0);
                }
            }
        }
    }

    #[test]
    fn backward_dense_gradient_matches_finite_differences() {
        let (batch, kernels, dense, labels) = forward_fixture();
        let conv = conv1d_valid(&batch, &kernels).unwrap();
        let pool = global_max_pool(&conv).unwrap();
        let logits = dense_forward(pool.values(), &dense).unwrap();
        let (_, dlogits) = softmax_cross_entropy(&logits, &labels).unwrap();
        let grads = backward_pass(&batch, &dense, &pool, &dlogits, 2).unwrap();

        let loss_for = |w: &Array2<f64>| {
            let logits = dense_forward(pool.values(), w).unwrap();
            softmax_cross_entropy(&logits, &labels).unwrap().0
        };
        let eps = 1e-4;
        for o in 0..2 {
            for c in 0..4 {
                let mut plus = dense.clone();
                plus[[o, c]] += eps;
                let mut minus = dense.clone();
                minus[[o, c]] -= eps;
                let fd = (loss_for(&plus) - loss_for(&minus)) / (2.0 * eps);
                let rel = (grads.dense[[o, c]] - fd).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-4, "rel error {rel} at ({o}, {c})");
            }
        }
    }

    #[test]
    fn backward_conv_gradient_matches_routed_windows() {
        // Reference route: pool_backward to a dense window gradient, then
        // accumulate input windows explicitly.
        let (batch, kernels, dense, labels) = forward_fixture();
        let conv = conv1d_valid(&batch, &kernels).unwrap();
        let pool = global_max_pool(&conv).unwrap();
        let logits = dense_forward(pool.values(), &dense).unwrap();
        let (_, dlogits) = softmax_cross_entropy(&logits, &labels).unwrap();
        let grads = backward_pass(&batch, &dense, &pool, &dlogits, 2).unwrap();

        let mut dpool = Array2::<f64>::zeros((5, 4));
        for s in 0..5 {
            for c in 0..4 {
                for o in 0..2 {
                    dpool[[s, c]] += dlogits[[s, o]] * dense[[o, c]];
                }
            }
        }
        let dconv = pool_backward(&dpool, &pool, conv.num_windows()).unwrap();
        let mut expected = Array3::<f64>::zeros((4, 3, 2));
        for s in 0..5 {
            for c in 0..4 {
                for j in 0..conv.num_windows() {
                    let g = dconv[[s, c, j]];
                    if g == 0.0 {
                        continue;
                    }
                    for i in 0..3 {
                        for r in 0..2 {
                            expected[[c, i, r]] += g * batch.values()[[s, i, j + r]];
                        }
                    }
                }
            }
        }
        for (a, b) in grads.conv.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pool_backward_rejects_stale_argmax() {
        let values = Array3::from_shape_vec((1, 1, 3), vec![0.0, 1.0, 2.0]).unwrap();
        let pool = global_max_pool(&ConvOutput { values }).unwrap();
        let dpool = arr2(&[[1.0]]);
        assert!(pool_backward(&dpool, &pool, 2).is_err());
    }

    proptest! {
        // Binary column-stochastic kernels on one-hot input produce integer
        // window values in [0, k].
        #[test]
        fn conv_outputs_are_integers_under_quantized_kernels(
            seqs in proptest::collection::vec(
                proptest::collection::vec(0usize..4, 3..10),
                1..4,
            ),
            raw in proptest::collection::vec(-1.0f64..1.0, 2 * 4 * 3),
        ) {
            let width = seqs.iter().map(Vec::len).max().unwrap();
            let batch = one_hot_encode(&seqs, 4, width).unwrap();
            let kernels = Array3::from_shape_vec((2, 4, 3), raw).unwrap();
            let binary = quantize_kernels(&kernels, crate::quantize::QuantizerKind::Hamming).unwrap();
            let out = conv1d_valid(&batch, &binary).unwrap();
            for &v in out.values() {
                prop_assert!(v.fract() == 0.0);
                prop_assert!((0.0..=3.0).contains(&v));
            }
        }

        // Routed pool gradient is a partition: summing it over windows
        // recovers the incoming gradient per channel.
        #[test]
        fn pool_backward_partitions_the_gradient(
            values in proptest::collection::vec(-10.0f64..10.0, 2 * 3 * 4),
            dpool in proptest::collection::vec(-5.0f64..5.0, 2 * 3),
        ) {
            let conv = ConvOutput {
                values: Array3::from_shape_vec((2, 3, 4), values).unwrap(),
            };
            let pool = global_max_pool(&conv).unwrap();
            let dpool = Array2::from_shape_vec((2, 3), dpool).unwrap();
            let routed = pool_backward(&dpool, &pool, 4).unwrap();
            for s in 0..2 {
                for c in 0..3 {
                    let sum: f64 = (0..4).map(|j| routed[[s, c, j]]).sum();
                    prop_assert_eq!(sum, dpool[[s, c]]);
                }
            }
        }
    }
}
