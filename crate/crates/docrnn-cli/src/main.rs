//! `docrnn` — train, evaluate, and poke at document-vector RNN language
//! models from the command line.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use docrnn::{
    added_ops_doc, added_ops_hidden, added_params_doc, added_params_hidden, load_model,
    nearest_sentences, perplexity, read_corpus, save_model, sentence_vectors, train, Dataset,
    ModelParams, OnlinePolicy, Rng, TrainConfig, Vocabulary,
};

#[derive(Parser)]
#[command(name = "docrnn", version, about = "Document-vector RNN language model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a vocabulary and a canonicalized corpus from raw text.
    Preprocess {
        /// Raw corpus: one sentence per line, whitespace-separated tokens.
        #[arg(long)]
        input: PathBuf,
        /// Writes `<PREFIX>.vocab` and `<PREFIX>.txt`.
        #[arg(long)]
        out_prefix: PathBuf,
        /// Words occurring fewer times than this become `<unk>`.
        #[arg(long, default_value_t = 30)]
        min_count: u32,
        /// Number of word classes for the factored output layer.
        #[arg(long, default_value_t = 100)]
        classes: usize,
        /// Lowercase every token first.
        #[arg(long)]
        lowercase: bool,
        /// Shuffle sentence order in the canonicalized corpus.
        #[arg(long)]
        shuffle: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train a model; hyperparameters come from a config file, overridable
    /// by flags.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Hidden layer size M.
        #[arg(long)]
        m: Option<usize>,
        /// Document vector size D (0 = none).
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        min_count: Option<u32>,
        #[arg(long)]
        general_lr: Option<f64>,
        #[arg(long)]
        doc_lr: Option<f64>,
        #[arg(long)]
        lr_decay_factor: Option<f64>,
        #[arg(long)]
        decay_trigger: Option<f64>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        init_scale: Option<f64>,
        /// Elementwise gradient clamp; pass `none` to disable.
        #[arg(long)]
        gradient_clip: Option<String>,
        /// Print the effective configuration and exit without training.
        #[arg(long)]
        dump_config: bool,
    },
    /// Perplexity of a model over a corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Let the document vector adapt online while scoring.
        #[arg(long)]
        online: bool,
        #[arg(long, default_value_t = 0.1)]
        doc_lr: f64,
        /// Also print one `index<TAB>nll` line per sentence.
        #[arg(long)]
        per_sentence: bool,
    },
    /// Added parameters and per-position operations of a model extension.
    Costs {
        /// Grow the hidden layer (`--x`) or attach a document vector (`--d`).
        #[arg(long, value_enum)]
        mode: CostMode,
        /// Hidden-layer growth X (mode `hidden`).
        #[arg(long)]
        x: Option<u64>,
        /// Document vector size D (mode `doc`).
        #[arg(long)]
        d: Option<u64>,
        /// Baseline hidden size M.
        #[arg(long)]
        m: u64,
        /// Vocabulary size V.
        #[arg(long)]
        v: u64,
        /// Number of classes C.
        #[arg(long)]
        c: u64,
        /// Expected in-class softmax size E[O].
        #[arg(long)]
        eo: f64,
        #[arg(long)]
        label: Option<String>,
    },
    /// Train and test a list of (M, D) configurations; emits the cost table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated `M:D` pairs, e.g. `120:0,100:20`.
        #[arg(long)]
        pairs: String,
        /// Runs per pair, seeded `seed`, `seed+1`, ...
        #[arg(long, default_value_t = 1)]
        repeat: u64,
        /// Also write the CSV here (it always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest sentences to a query sentence by document-vector cosine.
    Similar {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Zero-based index of the query sentence in the data file.
        #[arg(long)]
        query: usize,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        doc_lr: f64,
    },
    /// Shuffle the lines of a file with a seeded RNG.
    Shuffle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CostMode {
    Hidden,
    Doc,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Preprocess { input, out_prefix, min_count, classes, lowercase, shuffle, seed } => {
            cmd_preprocess(&input, &out_prefix, min_count, classes, lowercase, shuffle, seed)
        }
        Command::Train {
            config,
            train,
            dev,
            out_dir,
            m,
            d,
            classes,
            min_count,
            general_lr,
            doc_lr,
            lr_decay_factor,
            decay_trigger,
            max_epochs,
            seed,
            init_scale,
            gradient_clip,
            dump_config,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            merge(&mut cfg.train, train);
            merge(&mut cfg.dev, dev);
            if let Some(p) = out_dir {
                cfg.out_dir = p;
            }
            merge_val(&mut cfg.m, m);
            merge_val(&mut cfg.d, d);
            merge_val(&mut cfg.classes, classes);
            merge_val(&mut cfg.min_count, min_count);
            merge_val(&mut cfg.general_lr, general_lr);
            merge_val(&mut cfg.doc_lr, doc_lr);
            merge_val(&mut cfg.lr_decay_factor, lr_decay_factor);
            merge_val(&mut cfg.decay_trigger, decay_trigger);
            merge_val(&mut cfg.max_epochs, max_epochs);
            merge_val(&mut cfg.seed, seed);
            merge_val(&mut cfg.init_scale, init_scale);
            if let Some(raw) = gradient_clip {
                cfg.gradient_clip = if raw == "none" {
                    None
                } else {
                    Some(raw.parse().context("--gradient-clip expects a number or `none`")?)
                };
            }
            if dump_config {
                print!("{}", cfg.dump());
                return Ok(());
            }
            cmd_train(&cfg)
        }
        Command::Eval { model, data, online, doc_lr, per_sentence } => {
            cmd_eval(&model, &data, online, doc_lr, per_sentence)
        }
        Command::Costs { mode, x, d, m, v, c, eo, label } => {
            cmd_costs(mode, x, d, m, v, c, eo, label)
        }
        Command::Sweep { config, pairs, repeat, out } => {
            let cfg = load_config(Some(&config))?;
            cmd_sweep(&cfg, &pairs, repeat, out.as_deref())
        }
        Command::Similar { model, data, query, k, doc_lr } => {
            cmd_similar(&model, &data, query, k, doc_lr)
        }
        Command::Shuffle { input, output, seed } => cmd_shuffle(&input, &output, seed),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", p.display()))
        }
        None => Ok(RunConfig::default()),
    }
}

fn merge<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn merge_val<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn cmd_preprocess(
    input: &Path,
    out_prefix: &Path,
    min_count: u32,
    classes: usize,
    lowercase: bool,
    shuffle: bool,
    seed: u64,
) -> Result<()> {
    let mut sentences =
        read_corpus(input).with_context(|| format!("reading {}", input.display()))?;
    if lowercase {
        for sentence in sentences.iter_mut() {
            for token in sentence.iter_mut() {
                *token = token.to_lowercase();
            }
        }
    }
    let vocab = Vocabulary::build(&sentences, min_count, classes)?;
    let data = vocab.encode(&sentences);
    let mut canonical = vocab.decode(&data);
    if shuffle {
        Rng::new(seed).shuffle(&mut canonical);
    }

    let vocab_path = out_prefix.with_extension("vocab");
    let corpus_path = out_prefix.with_extension("txt");
    if let Some(dir) = out_prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    vocab.save(&vocab_path)?;
    let mut text = String::new();
    for sentence in &canonical {
        text.push_str(&sentence.join(" "));
        text.push('\n');
    }
    fs::write(&corpus_path, text)?;

    println!(
        "vocabulary: {} words in {} classes (min_count {})",
        vocab.size(),
        vocab.num_classes(),
        vocab.min_count()
    );
    println!(
        "corpus: {} sentences, {} scorable tokens, E[O] = {:.2}",
        data.len(),
        data.scorable_tokens(),
        vocab.expected_in_class_size()
    );
    println!("wrote {} and {}", vocab_path.display(), corpus_path.display());
    Ok(())
}

fn train_config_of(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        general_lr: cfg.general_lr,
        doc_lr: cfg.doc_lr,
        lr_decay_factor: cfg.lr_decay_factor,
        decay_trigger: cfg.decay_trigger,
        max_epochs: cfg.max_epochs,
        seed: cfg.seed,
        init_scale: cfg.init_scale,
        gradient_clip: cfg.gradient_clip,
    }
}

/// Read the train/dev corpora of a config, build the vocabulary from the
/// training side, and encode both.
fn load_train_dev(cfg: &RunConfig) -> Result<(Vocabulary, Dataset, Dataset)> {
    let train_path =
        cfg.train.as_ref().ok_or_else(|| anyhow!("no training corpus configured (`train`)"))?;
    let dev_path =
        cfg.dev.as_ref().ok_or_else(|| anyhow!("no dev corpus configured (`dev`)"))?;
    let train_raw =
        read_corpus(train_path).with_context(|| format!("reading {}", train_path.display()))?;
    let dev_raw =
        read_corpus(dev_path).with_context(|| format!("reading {}", dev_path.display()))?;
    let vocab = Vocabulary::build(&train_raw, cfg.min_count, cfg.classes)?;
    let train_set = vocab.encode(&train_raw);
    let dev_set = vocab.encode(&dev_raw);
    Ok((vocab, train_set, dev_set))
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let (vocab, train_set, dev_set) = load_train_dev(cfg)?;
    println!(
        "training M={} D={} over V={} words in C={} classes ({} train / {} dev sentences)",
        cfg.m,
        cfg.d,
        vocab.size(),
        vocab.num_classes(),
        train_set.len(),
        dev_set.len()
    );
    let mut rng = Rng::new(cfg.seed);
    let params = ModelParams::init(cfg.m, cfg.d, vocab.classes(), cfg.init_scale, &mut rng)?;
    let tcfg = train_config_of(cfg);
    let (best, report) = train(params, &train_set, &dev_set, &tcfg)?;

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let model_path = cfg.out_dir.join("model.bin");
    let log_path = cfg.out_dir.join("train.log");
    save_model(&best, &vocab, &model_path)?;
    let mut log = String::new();
    for e in &report.epochs {
        log.push_str(&format!("{}\t{:.4}\t{:.4}\t{}\n", e.epoch, e.train_ppl, e.dev_ppl, e.lr));
    }
    fs::write(&log_path, &log)?;

    println!("initial dev ppl {:.4}", report.initial_dev_ppl);
    print!("{log}");
    let best_ppl = report
        .epochs
        .iter()
        .find(|e| e.epoch == report.best_epoch)
        .map(|e| e.dev_ppl)
        .unwrap_or(report.initial_dev_ppl);
    println!("best epoch {} (dev ppl {:.4})", report.best_epoch, best_ppl);
    println!("wrote {} and {}", model_path.display(), log_path.display());
    Ok(())
}

fn cmd_eval(
    model_path: &Path,
    data_path: &Path,
    online: bool,
    doc_lr: f64,
    per_sentence: bool,
) -> Result<()> {
    let (params, vocab) = load_model(model_path)?;
    if online && params.d == 0 {
        bail!("--online requested but the model has no document vector (D = 0)");
    }
    let raw = read_corpus(data_path)?;
    let data = vocab.encode(&raw);
    let policy =
        if online { OnlinePolicy::enabled(doc_lr) } else { OnlinePolicy::disabled() };
    let report = perplexity(&params, &data, &policy)?;
    if per_sentence {
        for (i, nll) in report.per_sentence.iter().enumerate() {
            println!("{i}\t{nll:.6}");
        }
    }
    println!(
        "ppl={:.4} tokens={} nll={:.4}",
        report.perplexity, report.scorable_tokens, report.total_nll
    );
    Ok(())
}

const COST_CSV_HEADER: &str = "label,M,D,added_params,added_ops,test_ppl";

#[allow(clippy::too_many_arguments)]
fn cmd_costs(
    mode: CostMode,
    x: Option<u64>,
    d: Option<u64>,
    m: u64,
    v: u64,
    c: u64,
    eo: f64,
    label: Option<String>,
) -> Result<()> {
    if c == 0 || c > v {
        bail!("class count {c} does not fit a vocabulary of {v} words");
    }
    let (label, m_col, d_col, params, ops) = match mode {
        CostMode::Hidden => {
            let x = x.ok_or_else(|| anyhow!("mode `hidden` needs --x"))?;
            (
                label.unwrap_or_else(|| format!("M{}", m + x)),
                m + x,
                0,
                added_params_hidden(x, m, v, c),
                added_ops_hidden(x, m, c, eo),
            )
        }
        CostMode::Doc => {
            let d = d.ok_or_else(|| anyhow!("mode `doc` needs --d"))?;
            (
                label.unwrap_or_else(|| format!("M{m}_D{d}")),
                m,
                d,
                added_params_doc(d, v, c),
                added_ops_doc(d, c, eo),
            )
        }
    };
    println!("{COST_CSV_HEADER}");
    println!("{label},{m_col},{d_col},{params},{ops},");
    Ok(())
}

fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let (m, d) = part
            .split_once(':')
            .ok_or_else(|| anyhow!("bad pair {part:?}; expected `M:D`"))?;
        pairs.push((
            m.trim().parse().with_context(|| format!("bad M in {part:?}"))?,
            d.trim().parse().with_context(|| format!("bad D in {part:?}"))?,
        ));
    }
    if pairs.is_empty() {
        bail!("--pairs is empty");
    }
    Ok(pairs)
}

/// Signed parameter/operation cost of running at hidden size `m_run`
/// relative to the baseline `m_base`, document cost included.
fn cost_columns(
    m_run: usize,
    d_run: usize,
    m_base: usize,
    v: usize,
    c: usize,
    eo: f64,
) -> (i64, i64) {
    let (mut params, mut ops) = if m_run >= m_base {
        let x = (m_run - m_base) as u64;
        (
            added_params_hidden(x, m_base as u64, v as u64, c as u64) as i64,
            added_ops_hidden(x, m_base as u64, c as u64, eo) as i64,
        )
    } else {
        // Shrinking from the baseline removes what growing back would add.
        let x = (m_base - m_run) as u64;
        (
            -(added_params_hidden(x, m_run as u64, v as u64, c as u64) as i64),
            -(added_ops_hidden(x, m_run as u64, c as u64, eo) as i64),
        )
    };
    params += added_params_doc(d_run as u64, v as u64, c as u64) as i64;
    ops += added_ops_doc(d_run as u64, c as u64, eo) as i64;
    (params, ops)
}

fn cmd_sweep(cfg: &RunConfig, pairs: &str, repeat: u64, out: Option<&Path>) -> Result<()> {
    let pairs = parse_pairs(pairs)?;
    if repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let (vocab, train_set, dev_set) = load_train_dev(cfg)?;
    let test_path =
        cfg.test.as_ref().ok_or_else(|| anyhow!("no test corpus configured (`test`)"))?;
    let test_raw =
        read_corpus(test_path).with_context(|| format!("reading {}", test_path.display()))?;
    let test_set = vocab.encode(&test_raw);
    let eo = vocab.expected_in_class_size();
    let v = vocab.size();
    let c = vocab.num_classes();

    let mut csv = String::from(COST_CSV_HEADER);
    csv.push('\n');
    for &(m, d) in &pairs {
        for rep in 0..repeat {
            let seed = cfg.seed + rep;
            let label = format!("M{m}_D{d}_s{seed}");
            let (added_params, added_ops) = cost_columns(m, d, cfg.m, v, c, eo);
            let run = || -> Result<f64> {
                let mut rng = Rng::new(seed);
                let params = ModelParams::init(m, d, vocab.classes(), cfg.init_scale, &mut rng)?;
                let tcfg = TrainConfig { seed, ..train_config_of(cfg) };
                let (best, _) = train(params, &train_set, &dev_set, &tcfg)?;
                let policy = OnlinePolicy::for_model(&best, cfg.doc_lr);
                Ok(perplexity(&best, &test_set, &policy)?.perplexity)
            };
            let ppl_col = match run() {
                Ok(ppl) => format!("{ppl:.4}"),
                Err(e) => {
                    eprintln!("run {label} failed: {e:#}");
                    "error".to_owned()
                }
            };
            csv.push_str(&format!("{label},{m},{d},{added_params},{added_ops},{ppl_col}\n"));
        }
    }
    print!("{csv}");
    if let Some(path) = out {
        fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_similar(
    model_path: &Path,
    data_path: &Path,
    query: usize,
    k: usize,
    doc_lr: f64,
) -> Result<()> {
    let (params, vocab) = load_model(model_path)?;
    if params.d == 0 {
        bail!("model has no document vector (D = 0); it cannot embed sentences");
    }
    let text = fs::read_to_string(data_path)?;
    let lines: Vec<&str> = text.lines().collect();
    let raw: Vec<Vec<String>> = lines.iter().map(|l| docrnn::tokenize_line(l)).collect();
    let data = vocab.encode(&raw);
    let vectors = sentence_vectors(&params, &data, doc_lr)?;
    let neighbors = nearest_sentences(&vectors, query, k)?;
    if neighbors.zero_norm_skipped > 0 {
        eprintln!(
            "warning: skipped {} sentence(s) with zero-norm vectors",
            neighbors.zero_norm_skipped
        );
    }
    println!("query {}: {}", query, lines.get(query).copied().unwrap_or(""));
    for (rank, (index, sim)) in neighbors.ranked.iter().enumerate() {
        println!("{}\t{}\t{:.4}\t{}", rank + 1, index, sim, lines.get(*index).copied().unwrap_or(""));
    }
    Ok(())
}

fn cmd_shuffle(input: &Path, output: &Path, seed: u64) -> Result<()> {
    let text = fs::read_to_string(input)?;
    let mut lines: Vec<&str> = text.lines().collect();
    Rng::new(seed).shuffle(&mut lines);
    let mut out = String::with_capacity(text.len());
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    fs::write(output, out)?;
    Ok(())
}
