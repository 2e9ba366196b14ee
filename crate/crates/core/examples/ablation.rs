//! Leave-one-out recipe ablation on a small synthetic corpus: each row
//! drops one ingredient (ascending order, momentum, dropout, projection,
//! warm start, model size) and reports mean heldout WER over the seeds.
//!
//! `cargo run --release --example ablation -- [epochs] [seeds]`

use a2w::eval::{run_ablation, AblationSpec};
use a2w::pipeline::{synth_corpus, SynthSpec};
use a2w::trainer::TrainConfig;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs: usize = args.first().map_or(Ok(8), |s| s.parse())?;
    let seeds: u64 = args.get(1).map_or(Ok(2), |s| s.parse())?;
    let corpus = synth_corpus(&SynthSpec {
        count: 500,
        ..SynthSpec::default()
    })?;
    let (train, heldout) = corpus.utterances.split_at(400);
    let base = TrainConfig {
        num_layers: 3,
        hidden: 16,
        projection: 12,
        epochs,
        min_count: 1,
        ..TrainConfig::toy()
    };
    let seeds: Vec<u64> = (1..=seeds).collect();
    let table = run_ablation(&base, &AblationSpec::leave_one_out(), train, heldout, &seeds, None)?;
    print!("{}", table.to_text());
    Ok(())
}
