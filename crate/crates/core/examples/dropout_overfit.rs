//! Trains the toy model on a small, noisy corpus with and without dropout
//! and prints each run's heldout-loss curve. Without dropout the heldout
//! loss climbs back above its minimum while the training loss keeps falling.
//!
//! `cargo run --release --example dropout_overfit -- [train_count] [noise] [key=value ...]`

use a2w::pipeline::{synth_corpus, SynthSpec};
use a2w::trainer::{TrainConfig, TrainSession};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let train_count: usize = args.first().map_or(Ok(400), |s| s.parse())?;
    let noise: f64 = args.get(1).map_or(Ok(0.5), |s| s.parse())?;
    let corpus = synth_corpus(&SynthSpec {
        count: train_count + 200,
        noise,
        seed: 11,
        ..SynthSpec::default()
    })?;
    let (train, heldout) = corpus.utterances.split_at(train_count);

    for dropout in [0.0, 0.25] {
        let mut cfg = TrainConfig {
            dropout,
            min_count: 1,
            batch_size: 4,
            flat_epochs: 30,
            ..TrainConfig::toy()
        };
        for kv in args.iter().skip(2) {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow::anyhow!("expected key=value, got {kv}"))?;
            anyhow::ensure!(cfg.set(k, v)?, "unknown key {k}");
        }
        let mut session = TrainSession::new(cfg, train, heldout)?;
        println!("dropout {dropout}");
        session.run(None, |r| {
            println!(
                "  epoch {:2}  train {:8.4}  heldout {:8.4}",
                r.epoch,
                r.train_loss,
                r.heldout_loss.unwrap_or(f64::NAN)
            )
        })?;
        println!("  final heldout loss is {:.2}% above its minimum", session.run.overfit_gap() * 100.0);
    }
    Ok(())
}
