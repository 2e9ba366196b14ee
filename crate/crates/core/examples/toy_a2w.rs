//! Trains the six-layer toy word model on a synthetic corpus and reports
//! greedy-decode WER on the heldout utterances.
//!
//! `cargo run --release --example toy_a2w -- [key=value ...]`

use a2w::decoder::DecodeMode;
use a2w::eval::score_model;
use a2w::pipeline::{synth_corpus, SynthSpec};
use a2w::trainer::{TrainConfig, TrainSession};

fn main() -> anyhow::Result<()> {
    let mut cfg = TrainConfig::toy();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or_else(|| anyhow::anyhow!("expected key=value, got {arg}"))?;
        anyhow::ensure!(cfg.set(k, v)?, "unknown key {k}");
    }
    let corpus = synth_corpus(&SynthSpec {
        count: 2200,
        seed: cfg.seed,
        ..SynthSpec::default()
    })?;
    let (train, heldout) = corpus.utterances.split_at(2000);
    println!("{cfg}");

    let mut session = TrainSession::new(cfg, train, heldout)?;
    let feats = session.config.features();
    while session.epoch < session.config.epochs {
        let r = session.run_epoch()?;
        let wer = score_model(&session.model, &session.labels, feats, heldout, DecodeMode::Word)?;
        println!(
            "epoch {:2}  lr {:.5}  train {:8.4}  heldout {:8.4}  wer {:6.2}%  {:.1}s",
            r.epoch,
            r.lr,
            r.train_loss,
            r.heldout_loss.unwrap_or(f64::NAN),
            wer.wer,
            r.seconds
        );
    }
    Ok(())
}
