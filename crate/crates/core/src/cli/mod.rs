//! `findings-ir` command-line front end.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::ConfigFile;

use crate::corpus::{load_corpus, load_findings, load_measures, write_corpus, write_measures, Finding};
use crate::crr::{CrrTree, PrefilterConfig};
use crate::dense::{read_embeddings, write_embeddings};
use crate::error::{Error, Result};
use crate::eval::{
    load_labels, mc_validate, plot_series, simulate_bounds, write_bounds_csv, write_eval_csv, write_labels, EvalReport,
    McConfig, SimSpec,
};
use crate::retriever::{Engine, EngineConfig, HybridWeights, RetrieverConfig, Scheme};
use crate::synth::generate_synthetic;
use crate::tokenizer::{write_json, Lexicon};

#[derive(Debug, Parser)]
#[command(
    name = "findings-ir",
    version,
    about = "Hybrid lexical/semantic retrieval over regulatory findings"
)]
pub struct Cli {
    /// TOML file with default values for any flag (flags win)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random step [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a corpus and write all index artifacts
    Index(IndexArgs),
    /// Rank findings for one or more queries, printing JSON lines
    Query(QueryArgs),
    /// Down-sampled Monte-Carlo evaluation against labeled queries
    Eval(EvalArgs),
    /// Upper-bound simulation for partially labeled data
    Simulate(SimulateArgs),
    /// Write a synthetic clustered corpus with labels and embeddings
    GenCorpus(GenCorpusArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Findings JSONL
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Corpus embeddings (EMB1 or JSONL)
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Measures JSONL
    #[arg(long)]
    pub measures: Option<PathBuf>,
    /// Extra CRR articles, one canonical reference per line
    #[arg(long)]
    pub articles: Option<PathBuf>,
    /// Stopword list replacing the bundled one
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Lemma table replacing the bundled one
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    /// BM25 saturation [default: 1.6]
    #[arg(long)]
    pub k1: Option<f64>,
    /// BM25 length normalization [default: 0.75]
    #[arg(long)]
    pub b: Option<f64>,
    /// BM25+ shift [default: 1.0]
    #[arg(long)]
    pub delta_plus: Option<f64>,
    /// BM25L shift [default: 0.5]
    #[arg(long)]
    pub delta_l: Option<f64>,
    /// Full pipeline lower df bound [default: 0.0005]
    #[arg(long)]
    pub min_df: Option<f64>,
    /// Full pipeline upper df bound [default: 0.9]
    #[arg(long)]
    pub max_df: Option<f64>,
    /// Full pipeline phrase length, 1 to 3 [default: 3]
    #[arg(long)]
    pub ngram: Option<usize>,
    /// Minimum adjacent-pair count for a phrase [default: 5]
    #[arg(long)]
    pub collocation_min_count: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PrefilterArgs {
    /// Restrict candidates by CRR reference overlap
    #[arg(long)]
    pub prefilter: bool,
    /// Minimum Jaccard similarity of reference sets [default: 1/3]
    #[arg(long)]
    pub jaccard_min: Option<f64>,
    /// Minimum hierarchical similarity of reference sets [default: 1/3]
    #[arg(long)]
    pub hier_min: Option<f64>,
    /// Return nothing instead of everything when no candidate passes
    #[arg(long)]
    pub no_fallback: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Index directory
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Inline query text
    #[arg(long, conflicts_with = "queries")]
    pub text: Option<String>,
    /// Query findings JSONL
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Query embeddings (EMB1 or JSONL), needed for dense/hybrid on new text
    #[arg(long)]
    pub query_embeddings: Option<PathBuf>,
    /// random, tfidf, bm25, bm25plus, bm25l, bm25lplus, dense or hybrid
    /// [default: hybrid with embeddings, else bm25lplus]
    #[arg(long)]
    pub scheme: Option<String>,
    /// Number of hits [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Lexical weight in hybrid fusion; dense gets the rest [default: 0.5]
    #[arg(long)]
    pub lexical_weight: Option<f64>,
    #[command(flatten)]
    pub filter: PrefilterArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Index directory
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Labeled queries JSONL
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Comma-separated schemes [default: every scheme the index supports]
    #[arg(long)]
    pub schemes: Option<String>,
    /// Down-sample size [default: 100]
    #[arg(long)]
    pub m: Option<usize>,
    /// Down-sampled databases per query [default: 1000]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Metric cutoff [default: 100]
    #[arg(long)]
    pub k: Option<usize>,
    /// Lexical weight in hybrid fusion [default: 0.5]
    #[arg(long)]
    pub lexical_weight: Option<f64>,
    /// Output directory for CSV and JSON reports
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also evaluate with the CRR prefilter (adds results_prefilter.csv)
    #[command(flatten)]
    pub filter: PrefilterArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Findings in the artificial database besides the query [default: 7000]
    #[arg(long)]
    pub db_size: Option<usize>,
    /// Identified relevant findings [default: 3]
    #[arg(long)]
    pub g_hat: Option<usize>,
    /// Comma-separated unidentified relevant counts [default: 5,10,15,20]
    #[arg(long)]
    pub g_tilde: Option<String>,
    /// Independent simulation runs [default: 200]
    #[arg(long)]
    pub mc_runs: Option<usize>,
    /// Run 10000 simulation runs instead of the default
    #[arg(long)]
    pub full: bool,
    /// Down-sample size [default: 100]
    #[arg(long)]
    pub m: Option<usize>,
    /// Down-sampled databases per run [default: 1000]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Metric cutoff [default: 100]
    #[arg(long)]
    pub k: Option<usize>,
    /// Sampling weight of similar findings for omega2 [default: 10]
    #[arg(long)]
    pub omega2_weight: Option<f64>,
    /// Sampling weight of similar findings for omega3 [default: 3]
    #[arg(long)]
    pub omega3_weight: Option<f64>,
    /// Directory for bounds.csv and bounds_plot.json [default: print CSV only]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// Number of findings [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of clusters [default: 50]
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Embedding dimension [default: 32]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Embedding noise scale around the cluster centroid [default: 1.0]
    #[arg(long)]
    pub noise: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad {what} value {p:?}")))
        })
        .collect()
}

fn prefilter_config(args: &PrefilterArgs, cfg: &ConfigFile, section: &str) -> Result<Option<PrefilterConfig>> {
    if !cfg.switch(args.prefilter, section, "prefilter")? {
        return Ok(None);
    }
    let d = PrefilterConfig::default();
    let pf = PrefilterConfig {
        jaccard_min: cfg.pick(args.jaccard_min, section, "jaccard_min", d.jaccard_min)?,
        hier_min: cfg.pick(args.hier_min, section, "hier_min", d.hier_min)?,
        fallback_on_empty: !cfg.switch(args.no_fallback, section, "no_fallback")?,
    };
    pf.validate()?;
    Ok(Some(pf))
}

fn hybrid_weights(flag: Option<f64>, cfg: &ConfigFile, section: &str) -> Result<HybridWeights> {
    let lexical = cfg.pick(flag, section, "lexical_weight", 0.5)?;
    let w = HybridWeights {
        lexical,
        dense: 1.0 - lexical,
    };
    w.validate()?;
    Ok(w)
}

fn cmd_index(args: IndexArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "index";
    let corpus_path: PathBuf = required(cfg.pick_opt(args.corpus, S, "corpus")?, "corpus")?;
    let out: PathBuf = required(cfg.pick_opt(args.out, S, "out")?, "out")?;
    let corpus = load_corpus(&corpus_path)?;

    let stopwords: Option<PathBuf> = cfg.pick_opt(args.stopwords, S, "stopwords")?;
    let lemmas: Option<PathBuf> = cfg.pick_opt(args.lemmas, S, "lemmas")?;
    let lexicon = match (stopwords, lemmas) {
        (None, None) => Lexicon::bundled(),
        (s, l) => {
            let bundled = Lexicon::bundled();
            let s_text = match s {
                Some(p) => fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?,
                None => bundled.stopwords_text(),
            };
            let l_text = match l {
                Some(p) => fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?,
                None => bundled.lemmas_text(),
            };
            Lexicon::parse(&s_text, &l_text)?
        }
    };

    let mut ec = EngineConfig::default().with_lexicon(lexicon);
    ec.k1 = cfg.pick(args.k1, S, "k1", ec.k1)?;
    ec.b = cfg.pick(args.b, S, "b", ec.b)?;
    ec.delta_plus = cfg.pick(args.delta_plus, S, "delta_plus", ec.delta_plus)?;
    ec.delta_l = cfg.pick(args.delta_l, S, "delta_l", ec.delta_l)?;
    ec.full.min_df = cfg.pick(args.min_df, S, "min_df", ec.full.min_df)?;
    ec.full.max_df = cfg.pick(args.max_df, S, "max_df", ec.full.max_df)?;
    ec.full.ngram_max = cfg.pick(args.ngram, S, "ngram", ec.full.ngram_max)?;
    let min_count = cfg.pick(
        args.collocation_min_count,
        S,
        "collocation_min_count",
        ec.full.collocation_min_count,
    )?;
    ec.full.collocation_min_count = min_count;
    ec.basic.collocation_min_count = min_count;

    let mut engine = Engine::build(corpus, ec)?;
    if let Some(p) = cfg.pick_opt::<PathBuf>(args.measures, S, "measures")? {
        engine = engine.with_measures(load_measures(&p)?)?;
    }
    if let Some(p) = cfg.pick_opt::<PathBuf>(args.articles, S, "articles")? {
        let mut tree = CrrTree::new();
        tree.extend_from_file(&p)?;
        engine = engine.with_articles(&tree);
    }
    if let Some(p) = cfg.pick_opt::<PathBuf>(args.embeddings, S, "embeddings")? {
        engine = engine.with_embeddings(read_embeddings(&p)?)?;
    }
    engine.save(&out)?;
    let schemes: Vec<&str> = engine.available_schemes().iter().map(|s| s.name()).collect();
    eprintln!(
        "indexed {} findings into {} (schemes: {})",
        engine.corpus().len(),
        out.display(),
        schemes.join(", ")
    );
    Ok(())
}

fn default_scheme(engine: &Engine) -> Scheme {
    if engine.embeddings().is_some() {
        Scheme::Hybrid
    } else {
        Scheme::Bm25LPlus
    }
}

fn cmd_query(args: QueryArgs, cfg: &ConfigFile, seed: u64, out: &mut impl Write) -> Result<()> {
    const S: &str = "query";
    let index: PathBuf = required(cfg.pick_opt(args.index, S, "index")?, "index")?;
    let engine = Engine::load(&index)?;
    let scheme = match cfg.pick_opt::<String>(args.scheme, S, "scheme")? {
        Some(s) => s.parse()?,
        None => default_scheme(&engine),
    };
    let rc = RetrieverConfig {
        scheme,
        k: cfg.pick(args.k, S, "k", 10)?,
        prefilter: prefilter_config(&args.filter, cfg, S)?,
        weights: hybrid_weights(args.lexical_weight, cfg, S)?,
        seed,
    };
    let queries: Vec<Finding> = match (args.text, cfg.pick_opt::<PathBuf>(args.queries, S, "queries")?) {
        (Some(text), _) => vec![Finding::from_text("query", text)],
        (None, Some(p)) => load_findings(&p)?,
        (None, None) => return Err(Error::Config("one of --text or --queries is required".into())),
    };
    let query_vecs = match cfg.pick_opt::<PathBuf>(args.query_embeddings, S, "query_embeddings")? {
        Some(p) => Some(read_embeddings(&p)?),
        None => None,
    };
    let results = engine.retrieve_batch(&queries, query_vecs.as_ref(), &rc)?;
    for r in &results {
        let line = serde_json::to_string(r).expect("serializable result");
        writeln!(out, "{line}").map_err(stdout_err)?;
    }
    Ok(())
}

fn write_csv_file(path: &Path, reports: &[EvalReport]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_eval_csv(&mut buf, reports).expect("in-memory write");
    fs::write(path, &buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn cmd_eval(args: EvalArgs, cfg: &ConfigFile, seed: u64, out: &mut impl Write) -> Result<()> {
    const S: &str = "eval";
    let index: PathBuf = required(cfg.pick_opt(args.index, S, "index")?, "index")?;
    let labels_path: PathBuf = required(cfg.pick_opt(args.labels, S, "labels")?, "labels")?;
    let out_dir: PathBuf = required(cfg.pick_opt(args.out, S, "out")?, "out")?;
    let engine = Engine::load(&index)?;
    let labels = load_labels(&labels_path)?;
    for lq in &labels {
        lq.resolve(engine.corpus())?;
    }
    let schemes: Vec<Scheme> = match cfg.pick_opt::<String>(args.schemes, S, "schemes")? {
        Some(list) => parse_list(&list, "scheme")?,
        None => engine.available_schemes(),
    };
    let d = McConfig::default();
    let mc = McConfig {
        m: cfg.pick(args.m, S, "m", d.m)?,
        reps: cfg.pick(args.reps, S, "reps", d.reps)?,
        k: cfg.pick(args.k, S, "k", d.k)?,
        seed,
    };
    let weights = hybrid_weights(args.lexical_weight, cfg, S)?;
    let filter = prefilter_config(&args.filter, cfg, S)?;

    let mut settings = vec![None];
    if filter.is_some() {
        settings.push(filter);
    }
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut all = Vec::new();
    for prefilter in settings {
        let reports = schemes
            .iter()
            .map(|&scheme| {
                let rc = RetrieverConfig {
                    scheme,
                    k: mc.k,
                    prefilter,
                    weights,
                    seed,
                };
                mc_validate(&engine, &labels, &rc, &mc)
            })
            .collect::<Result<Vec<_>>>()?;
        let name = if prefilter.is_some() {
            "results_prefilter.csv"
        } else {
            "results.csv"
        };
        let csv = write_csv_file(&out_dir.join(name), &reports)?;
        writeln!(out, "# {name}").map_err(stdout_err)?;
        out.write_all(&csv).map_err(stdout_err)?;
        all.extend(reports);
    }
    write_json(&out_dir.join("report.json"), &all)
}

fn cmd_simulate(args: SimulateArgs, cfg: &ConfigFile, seed: u64, out: &mut impl Write) -> Result<()> {
    const S: &str = "simulate";
    let d = SimSpec::default();
    let g_tilde = match cfg.pick_opt::<String>(args.g_tilde, S, "g_tilde")? {
        Some(list) => parse_list(&list, "g_tilde")?,
        None => d.g_tilde.clone(),
    };
    let mc_runs = if cfg.switch(args.full, S, "full")? {
        10_000
    } else {
        cfg.pick(args.mc_runs, S, "mc_runs", d.mc_runs)?
    };
    let spec = SimSpec {
        db_size: cfg.pick(args.db_size, S, "db_size", d.db_size)?,
        g_hat: cfg.pick(args.g_hat, S, "g_hat", d.g_hat)?,
        g_tilde,
        mc_runs,
        omega2_weight: cfg.pick(args.omega2_weight, S, "omega2_weight", d.omega2_weight)?,
        omega3_weight: cfg.pick(args.omega3_weight, S, "omega3_weight", d.omega3_weight)?,
    };
    let md = McConfig::default();
    let mc = McConfig {
        m: cfg.pick(args.m, S, "m", md.m)?,
        reps: cfg.pick(args.reps, S, "reps", md.reps)?,
        k: cfg.pick(args.k, S, "k", md.k)?,
        seed,
    };
    let rows = simulate_bounds(&spec, &mc)?;
    let mut csv = Vec::new();
    write_bounds_csv(&mut csv, &rows).expect("in-memory write");
    if let Some(dir) = cfg.pick_opt::<PathBuf>(args.out, S, "out")? {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("bounds.csv");
        fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
        write_json(&dir.join("bounds_plot.json"), &plot_series(&rows))?;
    }
    out.write_all(&csv).map_err(stdout_err)
}

fn cmd_gen_corpus(args: GenCorpusArgs, cfg: &ConfigFile, seed: u64) -> Result<()> {
    const S: &str = "gen-corpus";
    let n = cfg.pick(args.n, S, "n", 1000)?;
    let clusters = cfg.pick(args.clusters, S, "clusters", 50)?;
    let dim = cfg.pick(args.dim, S, "dim", 32)?;
    let noise = cfg.pick(args.noise, S, "noise", 1.0)?;
    let dir: PathBuf = required(cfg.pick_opt(args.out, S, "out")?, "out")?;
    let synth = generate_synthetic(n, seed, clusters)?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_corpus(&synth.corpus, &dir.join("corpus.jsonl"))?;
    write_measures(&synth.measures, &dir.join("measures.jsonl"))?;
    write_labels(&dir.join("labels.jsonl"), &synth.labels())?;
    write_embeddings(&dir.join("embeddings.emb1"), &synth.embeddings(dim, noise, seed)?)?;
    write_json(&dir.join("clusters.json"), &synth.clusters)?;
    eprintln!("wrote {n} findings in {clusters} clusters to {}", dir.display());
    Ok(())
}

/// Runs a parsed invocation, writing primary output to `out`.
pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let section = match &cli.command {
        Command::Index(_) => "index",
        Command::Query(_) => "query",
        Command::Eval(_) => "eval",
        Command::Simulate(_) => "simulate",
        Command::GenCorpus(_) => "gen-corpus",
    };
    if let Some(n) = cfg.pick_opt::<usize>(cli.threads, section, "threads")? {
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seed = cfg.pick(cli.seed, section, "seed", 0u64)?;
    match cli.command {
        Command::Index(a) => cmd_index(a, &cfg),
        Command::Query(a) => cmd_query(a, &cfg, seed, out),
        Command::Eval(a) => cmd_eval(a, &cfg, seed, out),
        Command::Simulate(a) => cmd_simulate(a, &cfg, seed, out),
        Command::GenCorpus(a) => cmd_gen_corpus(a, &cfg, seed),
    }
}

/// Parses `args`, runs, and returns the process exit code: 0 on success,
/// 1 for computation errors, 2 for usage and input errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list::<usize>("5, 10,15", "n").unwrap(), vec![5, 10, 15]);
        assert!(parse_list::<usize>("5,x", "n").is_err());
        let s: Vec<Scheme> = parse_list("bm25,hybrid", "scheme").unwrap();
        assert_eq!(s, vec![Scheme::Bm25, Scheme::Hybrid]);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["findings-ir", "frobnicate"]), 2);
        assert_eq!(
            main_with_args([
                "findings-ir",
                "index",
                "--corpus",
                "/nonexistent/corpus.jsonl",
                "--out",
                "/tmp/x"
            ]),
            2
        );
    }
}
