// Word-frequency comparison between two corpora: ratio tables in both
// directions plus the correlation of shared-token frequencies.

use textshift::analysis::{compare_domains, frequency_profile, Direction};
use textshift::corpus::{synth_generate, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpora = synth_generate(&SynthConfig {
        seed: 3,
        ..SynthConfig::default()
    })?;
    let profile = frequency_profile(&corpora.source)?;
    println!("source: {} tokens, {} types", profile.total_tokens, profile.counts.len());

    let cmp = compare_domains(&corpora.source, &corpora.target, 5)?;
    for (title, dir) in [("source / target", Direction::AOverB), ("target / source", Direction::BOverA)] {
        println!("{title}");
        for (rank, t) in cmp.top(dir, 5).iter().enumerate() {
            let ratio = if dir == Direction::AOverB { t.ratio_ab } else { t.ratio_ba };
            println!("  {:>2}  {:>7.3}  {}", rank + 1, ratio, t.word);
        }
    }
    println!("{}", cmp.summary_line());
    Ok(())
}

fn main() {
    run_example().unwrap();
}
