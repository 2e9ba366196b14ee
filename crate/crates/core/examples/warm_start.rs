//! Warm-starts a deeper model from a shallower trained checkpoint by
//! copying every tensor whose name and shape match, then compares its
//! heldout loss with a cold start after the same number of epochs.
//!
//! `cargo run --release --example warm_start`

use a2w::pipeline::{synth_corpus, SynthSpec};
use a2w::trainer::{TrainConfig, TrainSession};

fn main() -> anyhow::Result<()> {
    let corpus = synth_corpus(&SynthSpec {
        count: 600,
        ..SynthSpec::default()
    })?;
    let (train, heldout) = corpus.utterances.split_at(500);
    let base = TrainConfig {
        num_layers: 2,
        hidden: 16,
        min_count: 1,
        ..TrainConfig::toy()
    };

    let mut source = TrainSession::new(TrainConfig { epochs: 8, ..base.clone() }, train, heldout)?;
    source.run(None, |_| {})?;
    let ckpt = source.checkpoint();
    println!("source: 2 layers, heldout loss {:.4}", source.run.final_heldout_loss().unwrap());

    let deeper = TrainConfig {
        num_layers: 3,
        epochs: 3,
        ..base
    };
    let mut warm = TrainSession::new(deeper.clone(), train, heldout)?;
    let report = warm.warm_start(&ckpt);
    println!("copied:  {}", report.copied.join(" "));
    for (name, why) in &report.skipped {
        println!("skipped: {name} ({why})");
    }
    let mut cold = TrainSession::new(deeper, train, heldout)?;
    warm.run(None, |_| {})?;
    cold.run(None, |_| {})?;
    for (w, c) in warm.run.records.iter().zip(&cold.run.records) {
        println!(
            "epoch {}  warm heldout {:.4}  cold heldout {:.4}",
            w.epoch,
            w.heldout_loss.unwrap(),
            c.heldout_loss.unwrap()
        );
    }
    Ok(())
}
