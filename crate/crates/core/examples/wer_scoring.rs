//! Word error rate with substitution, insertion and deletion counts.
//!
//! `cargo run --example wer_scoring`

use a2w::alphabet::tokenize;
use a2w::eval::wer;

fn main() -> anyhow::Result<()> {
    let pairs = [
        ("the cat sat on the mat", "the cat sat on the mat"),
        ("the cat sat on the mat", "the bat sat on mat"),
        ("i am murdering it", "i am murdering murdering it"),
        ("hello", "HELLO"),
    ];
    for (r, h) in pairs {
        let report = wer(&tokenize(r), &tokenize(h))?;
        println!("{r:?} vs {h:?}: {report}");
    }
    Ok(())
}
