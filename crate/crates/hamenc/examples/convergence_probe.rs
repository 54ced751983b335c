//! Scratch probe: loss trajectories for a few training configurations on
//! planted-motif data.

use hamenc::data::{generate_planted_motif_dataset, MotifDatasetConfig};
use hamenc::encoder::{extract_kmers, train, TrainConfig};

fn main() {
    // Acceptance-scale dataset: m=10, 2x100 sequences, lengths 30-60,
    // noise 0.1, k=5, K=64, 100 epochs, reference hyperparameters.
    let ds = generate_planted_motif_dataset(&MotifDatasetConfig {
        motifs: vec![
            "ABABA".chars().map(String::from).collect(),
            "CDCDC".chars().map(String::from).collect(),
        ],
        alphabet_size: 10,
        sequences_per_class: 100,
        min_length: 30,
        max_length: 60,
        noise: 0.1,
        seed: 42,
    })
    .unwrap();

    for (label, epochs, kernels, lr) in [
        ("reference K=64", 100usize, 64usize, 3e-4),
        ("small K=16", 30, 16, 3e-4),
        ("small K=16 lr=3e-3", 30, 16, 3e-3),
        ("small K=16 lr=1e-2", 30, 16, 1e-2),
    ] {
        let cfg = TrainConfig {
            epochs,
            batch_size: 64,
            kernel_count: kernels,
            kmer_len: Some(5),
            learning_rate: lr,
            seed: 7,
            ..TrainConfig::default()
        };
        let start = std::time::Instant::now();
        let (model, history) = train(&ds, &cfg).unwrap();
        let kmers = extract_kmers(&model).unwrap();
        let motifs = [[0usize, 1, 0, 1, 0], [2, 3, 2, 3, 2]];
        let mut best = [5u32, 5];
        for items in kmers.iter_items() {
            for (c, motif) in motifs.iter().enumerate() {
                let dist = items.iter().zip(motif).filter(|(a, b)| a != b).count() as u32;
                best[c] = best[c].min(dist);
            }
        }
        println!(
            "{label}: first={:.4} last={:.4} ratio={:.3} patterns={} motif_dists={:?} ({:.1}s)",
            history[0],
            history.last().unwrap(),
            history.last().unwrap() / history[0],
            kmers.len(),
            best,
            start.elapsed().as_secs_f64()
        );
        let sampled: Vec<String> = history
            .iter()
            .step_by((history.len() / 10).max(1))
            .map(|l| format!("{l:.3}"))
            .collect();
        println!("  trajectory: {}", sampled.join(" "));
    }
}
