// Trains the CNN with early stopping on synthetic source data, then
// evaluates on the shifted target domain.

use textshift::cnn::{CnnConfig, CnnModel};
use textshift::corpus::{split, synth_generate, SynthConfig};
use textshift::training::{evaluate, train_with, TrainConfig};
use textshift::Model;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpora = synth_generate(&SynthConfig {
        num_classes: 4,
        docs_per_class_source: 80,
        docs_per_class_target: 20,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let (train, val, test) = split(&corpora.source, (240, 40, 40), 9)?;
    let cnn = CnnConfig {
        embed_dim: 32,
        filters_per_width: 10,
        ..CnnConfig::default()
    };
    let model = Model::Cnn(CnnModel::from_corpus(cnn, &train, None)?);
    let config = TrainConfig {
        max_epochs: 15,
        patience: 5,
        batch_size: 10,
        ..TrainConfig::default()
    };
    let outcome = train_with(model, &train, &val, &config, |r| {
        println!(
            "epoch {:>2}  loss {:.4}  train {:.3}  val {:.3}",
            r.epoch, r.train_loss, r.train_accuracy, r.val_accuracy
        );
    })?;
    println!("selected epoch {}", outcome.history.selected_epoch);

    let src = evaluate(&outcome.model, &test)?;
    let tgt = evaluate(&outcome.model, &corpora.target)?;
    println!("source test {:.3}, target {:.3}", src.accuracy, tgt.accuracy);
    print!("{}", String::from_utf8(tgt.confusion.to_csv(&corpora.target.label_set)?)?);
    Ok(())
}

fn main() {
    run_example().unwrap();
}
