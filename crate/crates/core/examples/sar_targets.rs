//! Spell-and-recognize targets over a joint word + character alphabet and
//! the three greedy decode modes, including a word outside the vocabulary.
//!
//! `cargo run --example sar_targets`

use a2w::alphabet::{build_sar_targets, build_vocabulary, spell_word, CharSet, JointAlphabet, LabelId};
use a2w::ctc::PosteriorLattice;
use a2w::decoder::{sar_decode_chars, sar_decode_switched, sar_decode_word};
use ndarray::Array2;

/// A lattice whose greedy path is exactly `labels`, with blanks between
/// repeated neighbours.
fn peaked_lattice(labels: &[LabelId], k: usize) -> anyhow::Result<PosteriorLattice> {
    let mut path = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if i > 0 && labels[i - 1] == l {
            path.push(LabelId::BLANK);
        }
        path.push(l);
    }
    let mut m = Array2::from_elem((path.len(), k), 0.1 / k as f64);
    for (t, l) in path.iter().enumerate() {
        m[[t, l.index()]] += 0.9;
    }
    Ok(PosteriorLattice::from_probabilities(m)?)
}

fn main() -> anyhow::Result<()> {
    let positional = CharSet::positional();
    for word in ["SUMMERY", "STUFF", "A", "LL"] {
        let ids = spell_word(word, &positional)?;
        println!("{word:>8}: {}", positional.spelled_text(&ids));
        let names: Vec<String> = ids.iter().map(|&i| positional.symbol(i).unwrap().name()).collect();
        println!("{:>8}  {}", "", names.join(" "));
    }

    let vocab = build_vocabulary(&["I AM NOT GOING TO STOP THE STUFF"], 1)?;
    let joint = JointAlphabet::new(vocab, positional);
    let transcript = ["I", "AM", "MURDERING", "THE", "STUFF"];
    let targets = build_sar_targets(&transcript, &joint)?;
    let names: Vec<String> = targets.labels.iter().map(|&l| joint.symbol_name(l).unwrap()).collect();
    println!("\ntargets: {}", names.join(" "));

    let lattice = peaked_lattice(&targets.labels, joint.size())?;
    println!("word decode:      {}", sar_decode_word(&lattice, &joint).join(" "));
    let chars: Vec<String> = sar_decode_chars(&lattice, &joint).into_iter().map(|w| w.text).collect();
    println!("character decode: {}", chars.join(" "));
    let switched = sar_decode_switched(&lattice, &joint);
    println!("switched decode:  {}", switched.transcript().join(" "));
    println!("annotated:        {}", switched.render(&joint));
    for w in &switched.words {
        println!("  {:<10} {}", w.word, w.source.name());
    }
    Ok(())
}
