//! Trains a spell-and-recognize model on a synthetic corpus whose words are
//! built from per-letter sounds. Rare words fall below the vocabulary
//! threshold and are trained as UNK with their spelling. On heldout
//! utterances the word decode emits UNK for out-of-vocabulary words and the
//! switched decode recovers them from the characters.
//!
//! `cargo run --release --example sar_a2w -- [key=value ...]`

use a2w::decoder::DecodeMode;
use a2w::eval::{decode_utterances, score_model};
use a2w::pipeline::{synth_corpus, SynthSpec};
use a2w::trainer::{TrainConfig, TrainSession};

fn main() -> anyhow::Result<()> {
    let mut cfg = TrainConfig {
        targets: "sar".into(),
        stack: false,
        num_layers: 3,
        hidden: 32,
        min_count: 3,
        epochs: 30,
        flat_epochs: 30,
        ..TrainConfig::toy()
    };
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or_else(|| anyhow::anyhow!("expected key=value, got {arg}"))?;
        anyhow::ensure!(cfg.set(k, v)?, "unknown key {k}");
    }
    let spec = SynthSpec {
        vocab_size: 120,
        oov_words: 300,
        oov_rate: 0.1,
        max_words: 4,
        max_letters: 5,
        letter_frames: 3,
        count: 1500,
        seed: cfg.seed,
        ..SynthSpec::default()
    };
    let corpus = synth_corpus(&spec)?;
    let with_oov = synth_corpus(&SynthSpec {
        oov_rate: 0.3,
        count: 1600,
        ..spec
    })?;
    let heldout = with_oov.utterances[1500..].to_vec();

    let mut session = TrainSession::new(cfg, &corpus.utterances, &heldout)?;
    let vocab = session.labels.vocab().clone();
    println!("{} vocabulary words", vocab.words().len());
    session.run(None, |r| {
        println!(
            "epoch {:2}  train {:8.4}  heldout {:8.4}  {:.1}s",
            r.epoch,
            r.train_loss,
            r.heldout_loss.unwrap_or(f64::NAN),
            r.seconds
        )
    })?;

    let feats = session.config.features();
    for mode in [DecodeMode::Word, DecodeMode::Chars, DecodeMode::Switched] {
        let report = score_model(&session.model, &session.labels, feats, &heldout, mode)?;
        println!("{mode:>8} decode: {report}");
    }

    let decoded = decode_utterances(&session.model, &session.labels, feats, &heldout, DecodeMode::Switched)?;
    let mut shown = 0;
    for (u, (_, d)) in heldout.iter().zip(&decoded) {
        if shown < 5 && u.transcript.iter().any(|w| !vocab.contains(w)) {
            println!("REF: {}", u.transcript.join(" "));
            println!("HYP: {}", d.words.join(" "));
            println!("SAR: {}", d.sar.as_deref().unwrap_or(""));
            shown += 1;
        }
    }
    Ok(())
}
