//! Orders a synthetic corpus by length and reports the padding waste of
//! each curriculum order at several batch sizes.
//!
//! `cargo run --example curriculum`

use a2w::alphabet::{build_vocabulary, LabelSpace};
use a2w::pipeline::{mean_padding_waste, sort_and_batch, synth_corpus, CurriculumOrder, FeaturePipeline, SynthSpec};
use a2w::trainer::prepare_examples;

fn main() -> anyhow::Result<()> {
    let corpus = synth_corpus(&SynthSpec {
        count: 512,
        ..SynthSpec::default()
    })?;
    let text: Vec<String> = corpus.utterances.iter().map(|u| u.transcript.join(" ")).collect();
    let labels = LabelSpace::Words(build_vocabulary(&text, 1)?);
    let examples = prepare_examples(&corpus.utterances, &labels, FeaturePipeline { deltas: true, stack: true })?;

    println!("{:>6} {:>11} {:>11} {:>11}", "batch", "ascending", "descending", "random");
    for b in [4, 8, 16, 32] {
        let waste = |order| -> anyhow::Result<f64> { Ok(mean_padding_waste(&sort_and_batch(&examples, order, b)?)) };
        println!(
            "{b:>6} {:>10.2}% {:>10.2}% {:>10.2}%",
            100.0 * waste(CurriculumOrder::Ascending)?,
            100.0 * waste(CurriculumOrder::Descending)?,
            100.0 * waste(CurriculumOrder::Random(1))?
        );
    }

    let first = &sort_and_batch(&examples, CurriculumOrder::Ascending, 8)?[0];
    println!("first ascending batch: lengths {:?}, waste {:.3}", first.lengths, first.padding_waste);
    Ok(())
}
