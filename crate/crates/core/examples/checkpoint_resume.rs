//! Trains for three epochs with a checkpoint per epoch, resumes from the
//! last one for two more, and shows the records match an uninterrupted
//! five-epoch run bit for bit.
//!
//! `cargo run --release --example checkpoint_resume`

use std::collections::BTreeMap;

use a2w::network::Checkpoint;
use a2w::pipeline::{synth_corpus, SynthSpec};
use a2w::trainer::{checkpoint_name, TrainConfig, TrainSession};

fn main() -> anyhow::Result<()> {
    let corpus = synth_corpus(&SynthSpec {
        count: 240,
        ..SynthSpec::default()
    })?;
    let (train, heldout) = corpus.utterances.split_at(200);
    let cfg = TrainConfig {
        num_layers: 2,
        hidden: 16,
        epochs: 5,
        min_count: 1,
        order: "random".into(),
        ..TrainConfig::toy()
    };

    let mut full = TrainSession::new(cfg.clone(), train, heldout)?;
    full.run(None, |_| {})?;

    let dir = tempfile::tempdir()?;
    let mut first = TrainSession::new(TrainConfig { epochs: 3, ..cfg }, train, heldout)?;
    first.run(Some(dir.path()), |_| {})?;
    let path = dir.path().join(checkpoint_name(3));
    let ckpt = Checkpoint::load(&path)?;
    println!("{} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    for line in ckpt.manifest().lines().filter(|l| l.starts_with("tensor")).take(6) {
        println!("  {line}");
    }

    let overrides = BTreeMap::from([("epochs".to_string(), "5".to_string())]);
    let mut resumed = TrainSession::resume(&ckpt, &overrides, train, heldout)?;
    resumed.run(None, |_| {})?;
    for (a, b) in full.run.records.iter().zip(&resumed.run.records) {
        println!(
            "epoch {}  straight {:.12}  resumed {:.12}  identical {}",
            a.epoch,
            a.heldout_loss.unwrap(),
            b.heldout_loss.unwrap(),
            a.same_outcome(b)
        );
    }
    Ok(())
}
