//! The `titlemeta` command line. Exit codes: 0 success, 1 usage error,
//! 2 data error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::embeddings::EmbeddingTable;
use crate::error::Error;
use crate::metrics::{evaluate, Confusion};
use crate::ngram_lm::{read_corpus, sample_training_corpus, MknModel, TrainOptions};
use crate::protonet::predict_episode;
use crate::rule_engine::{RetentionMode, RuleSampling};
use crate::segment_mapper::{map_segments, sample_mapping_params};
use crate::segmenter::segment;
use crate::synth::{default_grammars, synth_products, synth_queries, HELD_OUT};
use crate::task_dataset::{
    empirical_threshold_range, generate_meta_dataset, generate_rank_dataset, group_products,
    read_jsonl, write_jsonl, LabelRow, MetaConfig, MetaExample, ProductRow,
};
use crate::text_norm::{normalize, TokenSequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "titlemeta", version, about = "1-shot title compression task generation")]
pub struct RunConfig {
    /// Worker threads (0 = all cores). Output never depends on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Train the trigram language model on a query corpus.
    TrainLm(TrainLmArgs),
    /// Segment titles read from stdin.
    Segment(SegmentArgs),
    /// Print token, segment and bucket label for titles read from stdin.
    MapSegments(MapSegmentsArgs),
    /// Generate 1-shot meta-training rows.
    GenTasks(GenTasksArgs),
    /// Generate segment-rank pre-training rows.
    GenRankData(GenRankArgs),
    /// Evaluate the prototypical-network baseline on a meta dataset.
    ProtonetEval(ProtonetEvalArgs),
    /// Score predicted test labels against gold.
    Eval(EvalArgs),
    /// Write a synthetic query corpus and product catalog.
    SynthCatalog(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TrainLmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw this many distinct queries, weighted by frequency / length.
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub unk_singletons: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct MapSegmentsArgs {
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long, default_value = "hashed:64:0")]
    pub embeddings: String,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long = "B", default_value_t = 12)]
    pub buckets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenTasksArgs {
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long)]
    pub products: PathBuf,
    #[arg(long)]
    pub pairs: usize,
    #[arg(long)]
    pub rules_per_pair: usize,
    #[arg(long = "B", default_value_t = 12)]
    pub buckets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "hashed:64:0")]
    pub embeddings: String,
    #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
    pub alpha_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub alpha_max: f64,
    /// Lower threshold bound; defaults to the 5th percentile of the
    /// boundary statistic over the products.
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    /// Upper threshold bound; defaults to the 95th percentile.
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Comma-separated subset of prefix,suffix,substring,all.
    #[arg(long, value_delimiter = ',', default_value = "prefix,suffix,substring,all")]
    pub modes: Vec<String>,
    /// Resample rules that keep every token of both products.
    #[arg(long)]
    pub reject_all_ones: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct GenRankArgs {
    #[arg(long)]
    pub lm: PathBuf,
    #[arg(long)]
    pub products: PathBuf,
    #[arg(long = "B", default_value_t = 12)]
    pub buckets: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProtonetEvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "hashed:64:0")]
    pub embeddings: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write predicted test labels as JSON lines.
    #[arg(long)]
    pub pred: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub products_per_category: usize,
    #[arg(long, default_value_t = 100_000)]
    pub queries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep only the first N values of every grammar slot.
    #[arg(long)]
    pub slot_values: Option<usize>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Attaches the file name to data errors.
fn at<T>(path: &Path, r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.msg = format!("{}: {}", path.display(), f.msg);
        f
    })
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    at(path, File::open(path).map(BufReader::new).map_err(Error::from))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    at(path, File::create(path).map(BufWriter::new).map_err(Error::from))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    let json = serde_json::to_string(value).map_err(Error::from)?;
    at(path, writeln!(w, "{json}").and_then(|_| w.flush()).map_err(Error::from))
}

fn load_lm(path: &Path) -> CliResult<MknModel> {
    at(path, MknModel::load(path))
}

fn load_embeddings(spec: &str) -> CliResult<EmbeddingTable> {
    at(Path::new(spec), EmbeddingTable::from_spec(spec))
}

fn load_products(path: &Path) -> CliResult<Vec<ProductRow>> {
    at(path, read_jsonl(open(path)?))
}

fn stdin_titles() -> CliResult<Vec<Option<TokenSequence>>> {
    let mut out = Vec::new();
    for line in io::stdin().lock().lines() {
        let line = line.map_err(Error::from)?;
        match normalize(&line) {
            Ok(t) => out.push(Some(t)),
            Err(Error::EmptyInput) => out.push(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn train_lm(a: &TrainLmArgs) -> CliResult<()> {
    let queries = at(&a.corpus, read_corpus(open(&a.corpus)?))?;
    let corpus: Vec<TokenSequence> = match a.sample_size {
        Some(size) => at(&a.corpus, sample_training_corpus(&queries, size, a.seed))?,
        None => queries.into_iter().map(|q| q.tokens).collect(),
    };
    let opts = TrainOptions {
        unk_singletons: a.unk_singletons,
    };
    let model = at(&a.corpus, MknModel::train(&corpus, opts))?;
    at(&a.out, model.save(&a.out))?;
    info!(
        "trained on {} lines, vocabulary {}, discounts {:?}",
        corpus.len(),
        model.vocab().len(),
        model.discounts()
    );
    Ok(())
}

fn segment_cmd(a: &SegmentArgs) -> CliResult<()> {
    let model = load_lm(&a.lm)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for title in stdin_titles()? {
        if let Some(t) = title {
            let seg = segment(&model, t.as_slice(), a.alpha, a.t)?;
            let ids: Vec<String> = seg.ids.iter().map(usize::to_string).collect();
            write!(out, "{}", ids.join(" ")).map_err(Error::from)?;
        }
        writeln!(out).map_err(Error::from)?;
    }
    out.flush().map_err(Error::from)?;
    Ok(())
}

fn map_segments_cmd(a: &MapSegmentsArgs) -> CliResult<()> {
    let model = load_lm(&a.lm)?;
    let table = load_embeddings(&a.embeddings)?;
    let params = sample_mapping_params(table.dim(), a.buckets, (a.alpha, a.alpha), a.seed)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for t in stdin_titles()?.into_iter().flatten() {
        let seg = segment(&model, t.as_slice(), a.alpha, a.t)?;
        let map = map_segments(t.as_slice(), &seg, &model, &table, &params)?;
        for ((tok, sid), l) in t.tokens.iter().zip(&seg.ids).zip(&map.labels) {
            writeln!(out, "{tok}\t{sid}\t{l}").map_err(Error::from)?;
        }
        writeln!(out).map_err(Error::from)?;
    }
    out.flush().map_err(Error::from)?;
    Ok(())
}

fn gen_tasks(a: &GenTasksArgs) -> CliResult<()> {
    let model = load_lm(&a.lm)?;
    let table = load_embeddings(&a.embeddings)?;
    let products = load_products(&a.products)?;
    let groups = at(&a.products, group_products(&products))?;
    let modes = a
        .modes
        .iter()
        .map(|m| RetentionMode::parse(m.trim()))
        .collect::<crate::Result<Vec<_>>>()?;
    let alpha_range = (a.alpha_min, a.alpha_max);
    let t_range = match (a.t_min, a.t_max) {
        (Some(lo), Some(hi)) => (lo, hi),
        (lo, hi) => {
            let all: Vec<&TokenSequence> = groups.values().flatten().collect();
            let (plo, phi) = empirical_threshold_range(&model, &all, alpha_range, (5.0, 95.0));
            (lo.unwrap_or(plo), hi.unwrap_or(phi))
        }
    };
    info!("resolved t range [{:e}, {:e}]", t_range.0, t_range.1);
    let cfg = MetaConfig {
        n_pairs: a.pairs,
        rules_per_pair: a.rules_per_pair,
        seed: a.seed,
        sampling: RuleSampling {
            dim: table.dim(),
            buckets: a.buckets,
            alpha_range,
            t_range,
            modes,
        },
        reject_all_ones: a.reject_all_ones,
    };
    let (rows, stats) = at(&a.products, generate_meta_dataset(&groups, &cfg, &model, &table))?;
    at(&a.out, write_jsonl(&rows, create(&a.out)?))?;
    info!(
        "wrote {} rows ({} resamples, {} skipped)",
        stats.rows, stats.resampled, stats.skipped
    );
    Ok(())
}

fn gen_rank_data(a: &GenRankArgs) -> CliResult<()> {
    let model = load_lm(&a.lm)?;
    let products = load_products(&a.products)?;
    let seqs = products
        .iter()
        .map(|p| normalize(&p.title))
        .collect::<crate::Result<Vec<_>>>()?;
    let rows = generate_rank_dataset(&seqs, &model, a.buckets, a.alpha, a.t)?;
    at(&a.out, write_jsonl(&rows, create(&a.out)?))?;
    info!("wrote {} rank rows", rows.len());
    Ok(())
}

fn protonet_eval(a: &ProtonetEvalArgs) -> CliResult<()> {
    use rayon::prelude::*;

    let table = load_embeddings(&a.embeddings)?;
    let rows: Vec<MetaExample> = at(&a.dataset, read_jsonl(open(&a.dataset)?))?;
    let preds = rows
        .par_iter()
        .map(|r| predict_episode(&table, &r.x_ex, &r.y_ex, &r.x_ts).map(|(y, _)| y))
        .collect::<crate::Result<Vec<_>>>()?;
    let gold: Vec<_> = rows.iter().map(|r| r.y_ts.clone()).collect();
    let report = evaluate(&gold, &preds)?;
    if let Some(path) = &a.pred {
        let pred_rows: Vec<LabelRow> = preds.into_iter().map(|y_ts| LabelRow { y_ts }).collect();
        at(path, write_jsonl(&pred_rows, create(path)?))?;
    }
    write_json(&a.out, &report)?;
    println!("{}", serde_json::to_string(&report).map_err(Error::from)?);
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> CliResult<()> {
    let gold: Vec<LabelRow> = at(&a.gold, read_jsonl(open(&a.gold)?))?;
    let pred: Vec<LabelRow> = at(&a.pred, read_jsonl(open(&a.pred)?))?;
    if gold.len() != pred.len() {
        return Err(Failure {
            code: EXIT_DATA,
            msg: format!("{} gold rows but {} predicted rows", gold.len(), pred.len()),
        });
    }
    let mut c = Confusion::default();
    for (i, (g, p)) in gold.iter().zip(&pred).enumerate() {
        c.add_row(&g.y_ts, &p.y_ts).map_err(|e| Failure {
            code: EXIT_DATA,
            msg: format!("{}: row {}: {e}", a.pred.display(), i + 1),
        })?;
    }
    let report = c.report();
    println!("{}", serde_json::to_string(&report).map_err(Error::from)?);
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn synth_catalog(a: &SynthArgs) -> CliResult<()> {
    at(&a.out_dir, std::fs::create_dir_all(&a.out_dir).map_err(Error::from))?;
    let mut grammars = default_grammars();
    if let Some(k) = a.slot_values {
        if k == 0 {
            return Err(Failure::from(Error::InvalidArgument("--slot-values must be positive".into())));
        }
        grammars = grammars.iter().map(|g| g.narrowed(k)).collect();
    }
    let queries = synth_queries(&grammars, a.queries, a.seed);
    let path = a.out_dir.join("queries.txt");
    let mut w = create(&path)?;
    for q in &queries {
        at(&path, writeln!(w, "{q}").map_err(Error::from))?;
    }
    at(&path, w.flush().map_err(Error::from))?;

    let products = synth_products(&grammars, a.products_per_category, a.seed);
    let (held, train): (Vec<ProductRow>, Vec<ProductRow>) = products
        .iter()
        .cloned()
        .partition(|p| HELD_OUT.contains(&p.category.as_str()));
    for (name, rows) in [
        ("products.jsonl", &products),
        ("products_train.jsonl", &train),
        ("products_heldout.jsonl", &held),
    ] {
        let path = a.out_dir.join(name);
        at(&path, write_jsonl(rows, create(&path)?))?;
    }
    Ok(())
}

fn dispatch(cfg: &RunConfig) -> CliResult<()> {
    match &cfg.command {
        Command::TrainLm(a) => train_lm(a),
        Command::Segment(a) => segment_cmd(a),
        Command::MapSegments(a) => map_segments_cmd(a),
        Command::GenTasks(a) => gen_tasks(a),
        Command::GenRankData(a) => gen_rank_data(a),
        Command::ProtonetEval(a) => protonet_eval(a),
        Command::Eval(a) => eval_cmd(a),
        Command::SynthCatalog(a) => synth_catalog(a),
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    info!(
        "config: {}",
        serde_json::to_string(&cfg).unwrap_or_else(|_| format!("{cfg:?}"))
    );

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cfg)) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}
