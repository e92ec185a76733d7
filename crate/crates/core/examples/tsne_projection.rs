// Embeds three Gaussian blobs with t-SNE and writes a plot-ready CSV.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use textshift::analysis::{export_projection, tsne, PointMeta, TsneConfig};
use textshift::corpus::DomainTag;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1.0)?;
    let mut x = Vec::new();
    let mut meta = Vec::new();
    for c in 0..3 {
        for i in 0..20 {
            x.push((0..5).map(|d| noise.sample(&mut rng) + if d == c { 8.0 } else { 0.0 }).collect::<Vec<f64>>());
            meta.push(PointMeta {
                id: format!("p{c}-{i}"),
                label: format!("blob{c}"),
                domain: if i % 2 == 0 { DomainTag::Source } else { DomainTag::Target },
            });
        }
    }
    let config = TsneConfig {
        perplexity: 10.0,
        iterations: 400,
        seed: 7,
        ..TsneConfig::default()
    };
    let out = tsne(&x, &config)?;
    println!("KL {:.4} -> {:.4}", out.initial_kl(), out.final_kl());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("projection.csv");
    export_projection(&out.y, &meta, &path)?;
    for line in std::fs::read_to_string(&path)?.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
