//! Command-line entry point: `synth`, `train`, `decode`, `score`, `ablate`
//! and `inspect-ckpt`.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for runtime failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use crate::decoder::{write_transcripts, DecodeMode};
use crate::error::{Error, Result};
use crate::eval::{decode_utterances, read_transcripts, run_ablation, score_transcripts, AblationSpec};
use crate::network::Checkpoint;
use crate::pipeline::{read_corpus, split_heldout, synth_corpus, write_corpus, SynthSpec, CORPUS_INDEX};
use crate::trainer::{TrainConfig, TrainSession, TRAIN_CONFIG_KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("PATH")
        .value_parser(value_parser!(PathBuf))
        .required(true)
        .help(help)
}

fn config_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(value_parser!(PathBuf))
            .help("key=value training config; individual flags override it"),
    );
    TRAIN_CONFIG_KEYS.iter().fold(cmd, |cmd, &key| {
        cmd.arg(Arg::new(key).long(key).value_name("VALUE").help_heading("Config overrides"))
    })
}

pub fn command() -> Command {
    let synth = Command::new("synth")
        .about("Write a synthetic corpus directory")
        .arg(path_arg("out", "output directory"))
        .arg(Arg::new("seed").long("seed").value_parser(value_parser!(u64)).default_value("7"))
        .arg(Arg::new("count").long("count").value_parser(value_parser!(usize)).default_value("2200"))
        .arg(Arg::new("vocab_size").long("vocab_size").value_parser(value_parser!(usize)).default_value("20"))
        .arg(Arg::new("feature_dim").long("feature_dim").value_parser(value_parser!(usize)).default_value("6"))
        .arg(Arg::new("noise").long("noise").value_parser(value_parser!(f64)).default_value("0.3"))
        .arg(Arg::new("oov_words").long("oov_words").value_parser(value_parser!(usize)).default_value("0"))
        .arg(Arg::new("oov_rate").long("oov_rate").value_parser(value_parser!(f64)).default_value("0"))
        .arg(
            Arg::new("letter_frames")
                .long("letter_frames")
                .value_parser(value_parser!(usize))
                .default_value("0")
                .help("frames per letter; 0 gives words unrelated prototypes"),
        );
    let train = config_args(
        Command::new("train")
            .about("Train a model; writes per-epoch checkpoints and records.jsonl")
            .arg(path_arg("corpus", "corpus directory"))
            .arg(path_arg("out", "output directory"))
            .arg(
                Arg::new("resume")
                    .long("resume")
                    .value_name("CKPT")
                    .value_parser(value_parser!(PathBuf))
                    .help("continue from a checkpoint written by train"),
            )
            .arg(Arg::new("quiet").long("quiet").action(ArgAction::SetTrue)),
    );
    let decode = Command::new("decode")
        .about("Greedy-decode a corpus with a checkpoint")
        .arg(path_arg("checkpoint", "checkpoint file"))
        .arg(path_arg("corpus", "corpus directory"))
        .arg(path_arg("out", "transcript file (id<TAB>words)"))
        .arg(
            Arg::new("mode")
                .long("mode")
                .value_parser(["word", "chars", "switched"])
                .default_value("word")
                .help("decode mode for spell-and-recognize models"),
        );
    let score = Command::new("score")
        .about("Word error rate of a hypothesis transcript against a reference")
        .arg(
            Arg::new("reference")
                .required(true)
                .value_parser(value_parser!(PathBuf))
                .help("transcript file or corpus directory"),
        )
        .arg(Arg::new("hypothesis").required(true).value_parser(value_parser!(PathBuf)));
    let ablate = config_args(
        Command::new("ablate")
            .about("Train recipe variants over several seeds and tabulate heldout WER")
            .arg(path_arg("corpus", "corpus directory"))
            .arg(path_arg("out", "output directory"))
            .arg(
                Arg::new("specs")
                    .long("specs")
                    .default_value("all")
                    .help("comma-separated spec names, or `all` for leave-one-out"),
            )
            .arg(Arg::new("seeds").long("seeds").default_value("1,2,3")),
    );
    let inspect = Command::new("inspect-ckpt")
        .about("Print a checkpoint manifest")
        .arg(Arg::new("checkpoint").required(true).value_parser(value_parser!(PathBuf)));
    Command::new("a2w")
        .about("Acoustics-to-word CTC toolkit")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommands([synth, train, decode, score, ablate, inspect])
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match matches.subcommand() {
        Some(("synth", m)) => synth(m),
        Some(("train", m)) => train(m),
        Some(("decode", m)) => decode(m),
        Some(("score", m)) => score(m),
        Some(("ablate", m)) => ablate(m),
        Some(("inspect-ckpt", m)) => inspect(m),
        _ => unreachable!("subcommand is required"),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult = std::result::Result<(), CliError>;

fn path<'a>(m: &'a ArgMatches, name: &str) -> &'a Path {
    m.get_one::<PathBuf>(name).expect("required").as_path()
}

/// Config overrides given explicitly on the command line.
fn overrides(m: &ArgMatches) -> BTreeMap<String, String> {
    TRAIN_CONFIG_KEYS
        .iter()
        .filter_map(|&k| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

fn load_config(m: &ArgMatches) -> std::result::Result<TrainConfig, CliError> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    for (k, v) in overrides(m) {
        cfg.set(&k, &v).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn synth(m: &ArgMatches) -> CliResult {
    let spec = SynthSpec {
        seed: *m.get_one("seed").unwrap(),
        count: *m.get_one("count").unwrap(),
        vocab_size: *m.get_one("vocab_size").unwrap(),
        feature_dim: *m.get_one("feature_dim").unwrap(),
        noise: *m.get_one("noise").unwrap(),
        oov_words: *m.get_one("oov_words").unwrap(),
        oov_rate: *m.get_one("oov_rate").unwrap(),
        letter_frames: *m.get_one("letter_frames").unwrap(),
        ..SynthSpec::default()
    };
    let corpus = synth_corpus(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    write_corpus(path(m, "out"), &corpus.utterances)?;
    println!("wrote {} utterances to {}", corpus.utterances.len(), path(m, "out").display());
    Ok(())
}

fn train(m: &ArgMatches) -> CliResult {
    let corpus = read_corpus(path(m, "corpus"))?;
    let out = path(m, "out");
    let quiet = m.get_flag("quiet");
    let mut session = match m.get_one::<PathBuf>("resume") {
        Some(ckpt) => {
            let ckpt = Checkpoint::load(ckpt)?;
            let mut kv = ckpt.config.clone();
            if let Some(p) = m.get_one::<PathBuf>("config") {
                kv.extend(TrainConfig::load(p)?.to_kv());
            }
            kv.extend(overrides(m));
            let cfg = TrainConfig::from_kv(&kv).map_err(|e| CliError::Usage(e.to_string()))?;
            let (train, heldout) = split_heldout(corpus, cfg.heldout_fraction);
            TrainSession::resume(&ckpt, &kv, &train, &heldout)?
        }
        None => {
            let cfg = load_config(m)?;
            let (train, heldout) = split_heldout(corpus, cfg.heldout_fraction);
            let warm = cfg.warm_start.clone();
            let mut session = TrainSession::new(cfg, &train, &heldout)?;
            if !warm.is_empty() {
                let report = session.warm_start(&Checkpoint::load(Path::new(&warm))?);
                if !quiet {
                    println!("warm start: {} tensors copied, {} skipped", report.copied.len(), report.skipped.len());
                }
            }
            session
        }
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg_path = out.join("config.txt");
    std::fs::write(&cfg_path, session.config.to_string()).map_err(|e| Error::io(&cfg_path, e))?;
    session.run(Some(out), |r| {
        if !quiet {
            println!(
                "epoch {:3}  lr {:.6}  train {:.4}  heldout {}  {:.1}s",
                r.epoch,
                r.lr,
                r.train_loss,
                r.heldout_loss.map_or("-".into(), |h| format!("{h:.4}")),
                r.seconds
            );
        }
    })?;
    Ok(())
}

fn decode(m: &ArgMatches) -> CliResult {
    let ckpt = Checkpoint::load(path(m, "checkpoint"))?;
    let labels = crate::alphabet::LabelSpace::from_kv(&ckpt.config)?;
    let cfg = TrainConfig::from_kv(&ckpt.config)?;
    let (model_cfg, params) = ckpt.to_model()?;
    let model = crate::network::Model::new(model_cfg, params);
    let mode = DecodeMode::parse(m.get_one::<String>("mode").unwrap()).expect("validated by clap");
    let corpus = read_corpus(path(m, "corpus"))?;
    let decoded = decode_utterances(&model, &labels, cfg.features(), &corpus, mode)?;
    write_transcripts(path(m, "out"), &decoded)?;
    Ok(())
}

/// Reference transcripts from a transcript file or a corpus directory.
fn reference_transcripts(p: &Path) -> Result<Vec<(String, Vec<String>)>> {
    if !p.is_dir() {
        return read_transcripts(p);
    }
    let index = p.join(CORPUS_INDEX);
    let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut cols = l.split('\t');
            let id = cols.next().unwrap_or("").to_string();
            (id, crate::alphabet::tokenize(cols.next().unwrap_or("")))
        })
        .collect())
}

fn score(m: &ArgMatches) -> CliResult {
    let reference = reference_transcripts(path(m, "reference"))?;
    let hypothesis = read_transcripts(path(m, "hypothesis"))?;
    let report = score_transcripts(&reference, &hypothesis)?;
    println!("{report}");
    Ok(())
}

fn ablate(m: &ArgMatches) -> CliResult {
    let base = load_config(m)?;
    let specs_arg = m.get_one::<String>("specs").unwrap();
    let specs = if specs_arg == "all" {
        AblationSpec::leave_one_out()
    } else {
        specs_arg
            .split(',')
            .map(|s| AblationSpec::parse(s.trim()).ok_or_else(|| CliError::Usage(format!("unknown spec {s:?}"))))
            .collect::<std::result::Result<_, _>>()?
    };
    let seeds = m
        .get_one::<String>("seeds")
        .unwrap()
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| CliError::Usage(format!("bad seed {s:?}"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let corpus = read_corpus(path(m, "corpus"))?;
    let (train, heldout) = split_heldout(corpus, base.heldout_fraction);
    let table = run_ablation(&base, &specs, &train, &heldout, &seeds, Some(path(m, "out")))?;
    print!("{}", table.to_text());
    for c in &table.cells {
        if let Err(e) = &c.result {
            eprintln!("{} seed {}: {e}", c.spec, c.seed);
        }
    }
    Ok(())
}

fn inspect(m: &ArgMatches) -> CliResult {
    let ckpt = Checkpoint::load(path(m, "checkpoint"))?;
    print!("{}", ckpt.manifest());
    Ok(())
}
