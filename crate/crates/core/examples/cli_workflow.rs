//! The command-line workflow run in-process: synthesize a corpus, train,
//! inspect the checkpoint, decode and score.
//!
//! `cargo run --release --example cli_workflow`

use a2w::cli::cli_main;

fn run(args: &[&str]) -> anyhow::Result<()> {
    println!("$ a2w {}", args.join(" "));
    let code = cli_main(std::iter::once("a2w").chain(args.iter().copied()));
    anyhow::ensure!(code == 0, "exit status {code}");
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let (corpus, run_dir, hyp) = (dir("corpus"), dir("run"), dir("hyp.txt"));
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/toy.conf");

    run(&["synth", "--out", &corpus, "--count", "300", "--vocab_size", "8"])?;
    run(&[
        "train",
        "--corpus",
        &corpus,
        "--out",
        &run_dir,
        "--config",
        config,
        "--num_layers",
        "2",
        "--hidden",
        "16",
        "--epochs",
        "6",
        "--min_count",
        "1",
        "--heldout_fraction",
        "0.1",
    ])?;
    let ckpt = format!("{run_dir}/epoch-006.ckpt");
    run(&["inspect-ckpt", &ckpt])?;
    run(&["decode", "--checkpoint", &ckpt, "--corpus", &corpus, "--out", &hyp])?;
    run(&["score", &corpus, &hyp])?;
    Ok(())
}
