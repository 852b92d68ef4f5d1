use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use taxembed::bench;
use taxembed::dataset::{self, Dataset, DatasetConfig, Mode};
use taxembed::eval::{self, GoldSource, GraphScorer, ModelScorer, PairScorer, SelectionMode};
use taxembed::manifest::{manifest_path_for, RunManifest};
use taxembed::synth;
use taxembed::trainer::{self, NegativeMode};
use taxembed::wsd::{self, NormalizedScorer, WsdConfig};
use taxembed::{
    EmbeddingMatrix, Error, InformationContentTable, Measure, Result, ScoreMode, SimilaritySpec, TaxonomyGraph,
    TrainConfig,
};

const FORMATS: &str = "\
FILE FORMATS
  graph        child<TAB>parent per line; a single token declares an isolated
               node; lines starting with # are comments.
                 cat.n.01<TAB>feline.n.01
  counts       node<TAB>raw corpus count, propagated to ancestors for JCN.
                 cat.n.01<TAB>1812
  pairs        `# key=value` header lines (measure, threshold, top_k, mode,
               seed, norm_min, norm_max, similarity_evaluations, pairs) then
               u<TAB>v<TAB>s rows with s in [0, 1].
  embeddings   text: `N d` then `id v1 ... vd` per row; binary: written with
               --format binary, detected automatically on read.
  lemma pairs  lemma1<TAB>lemma2<TAB>gold score
  candidates   lemma<TAB>node,node,...
  instances    sentence<TAB>token index<TAB>lemma<TAB>node,node,...|-<TAB>gold|-
               with a blank line between sentences; predictions append a
               predicted-sense column.
  manifest     key=value lines written next to each output as <output>.manifest.

EXIT CODES
  0 success, 1 usage error, 2 data error, 3 numeric failure";

#[derive(Parser, Debug)]
#[command(name = "taxembed", version, about = "Embeddings that approximate taxonomy similarity measures")]
#[command(after_long_help = FORMATS)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Where to write the run manifest (default: next to the output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a training-pairs file from a taxonomy.
    Similarities(SimilaritiesArgs),
    /// Train node embeddings on a training-pairs file.
    Train(TrainArgs),
    /// Correlate a model or graph measure with lemma-pair judgments.
    EvalSim(EvalSimArgs),
    /// Disambiguate sentences by sense-graph centrality.
    Wsd(WsdArgs),
    /// Nearest nodes to a query node under a model.
    Neighbors(NeighborsArgs),
    /// Time graph traversal against dense scoring for one-vs-all queries.
    Bench(BenchArgs),
    /// Write a synthetic taxonomy (and optional counts).
    Generate(GenerateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Taxonomy edge list.
    #[arg(long)]
    graph: PathBuf,
    /// Join all roots under a new node with this id.
    #[arg(long)]
    virtual_root: Option<String>,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// shp, lch, wup or jcn.
    #[arg(long, default_value = "shp")]
    measure: Measure,
    /// Raw counts file; required for jcn.
    #[arg(long)]
    ic: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimilaritiesArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    measure: MeasureArgs,
    /// full (all pairs) or fast (pairs within distance 2).
    #[arg(long, default_value = "full")]
    mode: Mode,
    /// Minimum raw similarity (default depends on the measure).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 50)]
    top_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelFormat {
    Text,
    Binary,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Training-pairs file.
    #[arg(long)]
    pairs: PathBuf,
    /// Held-out pairs for early stopping.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    /// Neighbor regularization weight.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Negative samples per positive pair.
    #[arg(long, default_value_t = 3)]
    negatives: usize,
    /// Split negatives across both endpoints instead of drawing per side.
    #[arg(long)]
    neg_total: bool,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    l1: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epochs without improvement before stopping; 0 disables.
    #[arg(long, default_value_t = 2)]
    patience: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: ModelFormat,
    /// Per-epoch loss and dev correlation as TSV.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Selection {
    Static,
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Gold {
    Human,
    Graph,
}

#[derive(Args, Debug)]
struct EvalSimArgs {
    /// Lemma-pair judgments.
    #[arg(long)]
    pairs: PathBuf,
    /// Lemma to node candidates.
    #[arg(long)]
    candidates: PathBuf,
    /// Model to evaluate; without it the graph measure is evaluated.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "dot")]
    score_mode: ScoreMode,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    virtual_root: Option<String>,
    #[command(flatten)]
    measure: MeasureArgs,
    #[arg(long, value_enum, default_value = "static")]
    selection: Selection,
    /// Measure that picks node pairs in static selection (default: --measure).
    #[arg(long)]
    selection_measure: Option<Measure>,
    #[arg(long, value_enum, default_value = "human")]
    gold: Gold,
    /// Training pairs, to report how many evaluated pairs were seen.
    #[arg(long)]
    training: Option<PathBuf>,
    /// Histogram TSV of predicted and gold scores.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Report TSV (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Random,
    First,
}

#[derive(Args, Debug)]
struct WsdArgs {
    /// Sentences with candidate and gold senses.
    #[arg(long)]
    instances: PathBuf,
    /// Score senses with this model; without it the graph measure is used.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "dot")]
    score_mode: ScoreMode,
    /// Taxonomy edge list for graph scoring.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    virtual_root: Option<String>,
    #[command(flatten)]
    measure: MeasureArgs,
    /// Training-pairs file whose normalization range rescales graph scores.
    #[arg(long)]
    normalize_with: Option<PathBuf>,
    /// Minimum similarity for a sense-graph edge.
    #[arg(long, default_value_t = 0.95)]
    threshold: f64,
    /// Comma-separated thresholds to report F1 for.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<f64>,
    /// Predict with a baseline instead of a scorer.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Predictions: the instance columns plus the chosen sense.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NeighborsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    node: String,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "dot")]
    score_mode: ScoreMode,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Graph,
    Dot,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value = "lch")]
    measure: Measure,
    #[arg(long)]
    ic: Option<PathBuf>,
    /// Model to time; without it a random matrix of --dim columns is used.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    /// Number of random query nodes.
    #[arg(long, default_value_t = 10)]
    queries: usize,
    /// Explicit query node; repeatable, overrides --queries.
    #[arg(long = "query")]
    query: Vec<String>,
    #[arg(long, default_value_t = bench::MIN_REPEATS)]
    repeats: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "graph,dot")]
    methods: Vec<Method>,
    /// Also measure throughput on this many workers.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report TSV (default: table on stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Shape {
    Tree,
    Dag,
    Wordnet,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "tree")]
    kind: Shape,
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    /// Second-parent probability for dag.
    #[arg(long, default_value_t = 0.1)]
    second_parent: f64,
    /// Root count for dag.
    #[arg(long, default_value_t = 1)]
    roots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write random raw counts here.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    max_count: u32,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest_file: PathBuf,
    /// Run even if recorded inputs changed.
    #[arg(long)]
    force: bool,
}

/// Manifest under construction for the current command.
struct Run {
    manifest: RunManifest,
    start: Instant,
    explicit: Option<PathBuf>,
}

impl Run {
    fn new(cli: &Cli, argv: &[String]) -> Self {
        let name = match &cli.command {
            Command::Similarities(_) => "similarities",
            Command::Train(_) => "train",
            Command::EvalSim(_) => "eval-sim",
            Command::Wsd(_) => "wsd",
            Command::Neighbors(_) => "neighbors",
            Command::Bench(_) => "bench",
            Command::Generate(_) => "generate",
            Command::Replay(_) => "replay",
        };
        let mut manifest = RunManifest::new(name);
        manifest.argv = argv.to_vec();
        if let Some(t) = cli.threads {
            manifest.set("threads", t);
        }
        Self {
            manifest,
            start: Instant::now(),
            explicit: cli.manifest.clone(),
        }
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.manifest.add_input(role, path)
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.manifest.set(key, value);
    }

    fn finish(mut self, output: Option<&Path>) -> Result<()> {
        self.manifest.wall_time_secs = self.start.elapsed().as_secs_f64();
        if let Some(out) = output {
            self.manifest.add_output("main", out);
        }
        match (self.explicit, output) {
            (Some(p), _) => self.manifest.write(p),
            (None, Some(out)) => self.manifest.write(manifest_path_for(out)),
            (None, None) => {
                log::info!("run manifest:\n{}", self.manifest.to_text());
                Ok(())
            }
        }
    }
}

fn load_graph(run: &mut Run, path: &Path, virtual_root: Option<&str>) -> Result<TaxonomyGraph> {
    run.input("graph", path)?;
    let g = TaxonomyGraph::load_edge_list(path)?;
    match virtual_root {
        Some(name) => {
            run.set("virtual_root", name);
            g.with_virtual_root(name)
        }
        None => Ok(g),
    }
}

fn load_spec(run: &mut Run, g: &TaxonomyGraph, measure: Measure, ic: Option<&Path>) -> Result<SimilaritySpec> {
    run.set("measure", measure);
    let table = match ic {
        Some(p) => {
            run.input("ic", p)?;
            Some(InformationContentTable::load(p, g)?)
        }
        None => None,
    };
    SimilaritySpec::new(measure, g, table)
}

fn load_model(run: &mut Run, path: &Path) -> Result<EmbeddingMatrix> {
    run.input("model", path)?;
    EmbeddingMatrix::read(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}

fn cmd_similarities(a: &SimilaritiesArgs, mut run: Run) -> Result<()> {
    let g = load_graph(&mut run, &a.graph.graph, a.graph.virtual_root.as_deref())?;
    let spec = load_spec(&mut run, &g, a.measure.measure, a.measure.ic.as_deref())?;
    let mut cfg = DatasetConfig::new(a.measure.measure).with_mode(a.mode).with_seed(a.seed);
    if let Some(t) = a.threshold {
        cfg.raw_threshold = t;
    }
    cfg.top_k = a.top_k;
    run.manifest.seed = Some(a.seed);
    run.set("mode", a.mode);
    run.set("threshold", cfg.raw_threshold);
    run.set("top_k", cfg.top_k);
    let ds = dataset::build(&g, &spec, &cfg)?;
    log::info!(
        "{} pairs from {} similarity evaluations",
        ds.pairs.len(),
        ds.header.similarity_evaluations
    );
    ds.write(&g, &a.output)?;
    run.finish(Some(&a.output))
}

fn cmd_train(a: &TrainArgs, mut run: Run) -> Result<()> {
    let g = load_graph(&mut run, &a.graph.graph, a.graph.virtual_root.as_deref())?;
    run.input("pairs", &a.pairs)?;
    let ds = Dataset::read(&a.pairs, &g)?;
    let dev = match &a.dev {
        Some(p) => {
            run.input("dev", p)?;
            Some(Dataset::read(p, &g)?)
        }
        None => None,
    };
    let cfg = TrainConfig {
        dim: a.dim,
        alpha: a.alpha,
        negatives: a.negatives,
        negative_mode: if a.neg_total {
            NegativeMode::Total
        } else {
            NegativeMode::PerSide
        },
        batch_size: a.batch_size,
        epochs: a.epochs,
        learning_rate: a.lr,
        l1: a.l1,
        seed: a.seed,
        early_stop_patience: a.patience,
    };
    run.manifest.seed = Some(a.seed);
    run.set("dim", cfg.dim);
    run.set("alpha", cfg.alpha);
    run.set("negatives", cfg.negatives);
    run.set("negative_mode", cfg.negative_mode);
    run.set("batch_size", cfg.batch_size);
    run.set("epochs", cfg.epochs);
    run.set("learning_rate", cfg.learning_rate);
    run.set("l1", cfg.l1);
    run.set("early_stop_patience", cfg.early_stop_patience);
    run.set("format", format!("{:?}", a.format).to_lowercase());
    let trained = trainer::train(&ds.pairs, &g, &cfg, dev.as_ref().map(|d| d.pairs.as_slice()))?;
    log::info!(
        "best epoch {} of {}",
        trained.best_epoch,
        trained.history.len()
    );
    match a.format {
        ModelFormat::Text => trained.embeddings.write_text(&a.output)?,
        ModelFormat::Binary => trained.embeddings.write_binary(&a.output)?,
    }
    if let Some(h) = &a.history {
        let mut s = String::from("epoch\tmean_loss\tmedian_batch_loss\tdev_spearman\n");
        for r in &trained.history {
            let dev = r.dev_spearman.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
            writeln!(s, "{}\t{}\t{}\t{dev}", r.epoch, r.mean_loss, r.median_batch_loss).unwrap();
        }
        write_text(h, &s)?;
    }
    run.finish(Some(&a.output))
}

fn need_graph(run: &mut Run, graph: &Option<PathBuf>, vroot: Option<&str>, why: &str) -> Result<TaxonomyGraph> {
    let path = graph
        .as_ref()
        .ok_or_else(|| Error::Config(format!("--graph is required {why}")))?;
    load_graph(run, path, vroot)
}

fn cmd_eval_sim(a: &EvalSimArgs, mut run: Run) -> Result<()> {
    run.input("pairs", &a.pairs)?;
    run.input("candidates", &a.candidates)?;
    let records = eval::load_records(&a.pairs, &a.candidates)?;
    let needs_graph = a.model.is_none() || a.selection == Selection::Static || a.training.is_some();
    let g = if needs_graph {
        Some(need_graph(
            &mut run,
            &a.graph,
            a.virtual_root.as_deref(),
            "for graph scoring, static selection or coverage",
        )?)
    } else {
        None
    };
    let model = a.model.as_ref().map(|p| load_model(&mut run, p)).transpose()?;
    let spec = match &g {
        Some(g) if a.model.is_none() => Some(load_spec(&mut run, g, a.measure.measure, a.measure.ic.as_deref())?),
        _ => None,
    };
    let sel_measure = a.selection_measure.unwrap_or(a.measure.measure);
    let sel_spec = match &g {
        Some(g) if a.selection == Selection::Static => {
            run.set("selection_measure", sel_measure);
            let table = match &a.measure.ic {
                Some(p) if sel_measure == Measure::Jcn => Some(InformationContentTable::load(p, g)?),
                _ => None,
            };
            Some(SimilaritySpec::new(sel_measure, g, table)?)
        }
        _ => None,
    };
    run.set("selection", format!("{:?}", a.selection).to_lowercase());
    run.set("gold", format!("{:?}", a.gold).to_lowercase());

    let model_scorer;
    let graph_scorer;
    let scorer: &dyn PairScorer = match (&model, &spec, &g) {
        (Some(m), _, _) => {
            run.set("score_mode", a.score_mode);
            model_scorer = ModelScorer {
                model: m,
                mode: a.score_mode,
                label: a.model.as_ref().unwrap().display().to_string(),
            };
            &model_scorer
        }
        (None, Some(spec), Some(g)) => {
            graph_scorer = GraphScorer { graph: g, spec };
            &graph_scorer
        }
        _ => unreachable!("graph loaded whenever no model is given"),
    };
    let sel_scorer = match (&sel_spec, &g) {
        (Some(spec), Some(g)) => Some(GraphScorer { graph: g, spec }),
        _ => None,
    };
    let selection = match &sel_scorer {
        Some(s) => SelectionMode::Static(s),
        None => SelectionMode::Dynamic,
    };
    let gold = match a.gold {
        Gold::Human => GoldSource::Human,
        Gold::Graph => GoldSource::Graph,
    };
    let report = match (&a.training, &g) {
        (Some(t), Some(g)) => {
            run.input("training", t)?;
            let ds = Dataset::read(t, g)?;
            eval::evaluate_with_coverage(&records, scorer, selection, gold, g, &ds.pairs)?
        }
        _ => eval::evaluate(&records, scorer, selection, gold)?,
    };
    if let Some(h) = &a.histogram {
        run.set("bins", a.bins);
        let scored = eval::score_records(&records, scorer, selection, gold)?;
        let mut s = String::from("series\tlo\thi\tcount\n");
        for (series, values) in [("predicted", &scored.predicted), ("gold", &scored.gold)] {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for b in eval::histogram(values, a.bins, lo, hi) {
                writeln!(s, "{series}\t{}\t{}\t{}", b.lo, b.hi, b.count).unwrap();
            }
        }
        write_text(h, &s)?;
    }
    let tsv = format!("{}\n{}\n", eval::CorrelationReport::TSV_HEADER, report.tsv_row());
    match &a.output {
        Some(p) => {
            write_text(p, &tsv)?;
            eprintln!("{report}");
        }
        None => print(&tsv),
    }
    run.finish(a.output.as_deref())
}

fn cmd_wsd(a: &WsdArgs, mut run: Run) -> Result<()> {
    run.input("instances", &a.instances)?;
    let instances = wsd::read_instances(&a.instances)?;
    run.set("threshold", a.threshold);
    if let Some(b) = a.baseline {
        run.manifest.seed = Some(a.seed);
        run.set("baseline", format!("{b:?}").to_lowercase());
        let preds = match b {
            Baseline::Random => wsd::random_sense_baseline(&instances, a.seed),
            Baseline::First => wsd::first_sense_baseline(&instances),
        };
        if let Some(p) = &a.output {
            wsd::write_predictions(p, &instances, &preds)?;
        }
        print_f1(&wsd::micro_f1(&preds, &instances));
        return run.finish(a.output.as_deref());
    }

    let model = a.model.as_ref().map(|p| load_model(&mut run, p)).transpose()?;
    let g = match &model {
        Some(_) => None,
        None => Some(need_graph(&mut run, &a.graph, a.virtual_root.as_deref(), "without --model")?),
    };
    let spec = match &g {
        Some(g) => Some(load_spec(&mut run, g, a.measure.measure, a.measure.ic.as_deref())?),
        None => None,
    };
    let header = match (&a.normalize_with, &g) {
        (Some(p), Some(g)) => {
            run.input("normalize_with", p)?;
            Some(Dataset::read(p, g)?.header)
        }
        (Some(_), None) => return Err(Error::Config("--normalize-with applies to graph scoring only".into())),
        _ => None,
    };

    let model_scorer;
    let graph_scorer;
    let normalized;
    let scorer: &dyn PairScorer = match (&model, &g, &spec) {
        (Some(m), _, _) => {
            run.set("score_mode", a.score_mode);
            model_scorer = ModelScorer {
                model: m,
                mode: a.score_mode,
                label: "wsd".into(),
            };
            &model_scorer
        }
        (None, Some(g), Some(spec)) => {
            graph_scorer = GraphScorer { graph: g, spec };
            match header {
                Some(header) => {
                    normalized = NormalizedScorer {
                        inner: &graph_scorer,
                        header,
                    };
                    &normalized
                }
                None => &graph_scorer,
            }
        }
        _ => unreachable!("graph loaded whenever no model is given"),
    };

    let run_result = wsd::disambiguate(&instances, &WsdConfig { threshold: a.threshold }, scorer)?;
    if run_result.skipped_pairs > 0 {
        log::warn!("{} sense pairs could not be scored", run_result.skipped_pairs);
    }
    if let Some(p) = &a.output {
        wsd::write_predictions(p, &instances, &run_result.predictions)?;
    }
    print_f1(&wsd::micro_f1(&run_result.predictions, &instances));
    if !a.sweep.is_empty() {
        run.set(
            "sweep",
            a.sweep.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        let mut s = String::from("threshold\tprecision\trecall\tf1\n");
        for (t, f) in wsd::threshold_sweep(&instances, &a.sweep, scorer)? {
            writeln!(s, "{t}\t{:.4}\t{:.4}\t{:.4}", f.precision, f.recall, f.f1).unwrap();
        }
        print(&s);
    }
    run.finish(a.output.as_deref())
}

fn print_f1(f: &wsd::F1Score) {
    print(&format!(
        "precision\trecall\tf1\tcorrect\tattempted\tgold\n{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\n",
        f.precision, f.recall, f.f1, f.correct, f.attempted, f.gold_total
    ));
}

fn cmd_neighbors(a: &NeighborsArgs, mut run: Run) -> Result<()> {
    let m = load_model(&mut run, &a.model)?;
    let q = m.index_of(&a.node)?;
    run.set("node", &a.node);
    run.set("score_mode", a.score_mode);
    let limit = m.len().saturating_sub(1);
    let k = if a.k > limit {
        log::warn!("k = {} exceeds {limit}; clipping", a.k);
        limit
    } else {
        a.k
    };
    run.set("k", k);
    let scores: Vec<f32> = match a.score_mode {
        ScoreMode::Dot => bench::one_vs_all_dot(&m, q),
        ScoreMode::Cosine => (0..m.len()).map(|r| m.score_rows(q, r, ScoreMode::Cosine)).collect(),
    };
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
    let mut s = String::from("rank\tnode\tscore\n");
    for (rank, &r) in order.iter().take(k).enumerate() {
        writeln!(s, "{}\t{}\t{}", rank + 1, m.ids()[r], scores[r]).unwrap();
    }
    match &a.output {
        Some(p) => write_text(p, &s)?,
        None => print(&s),
    }
    run.finish(a.output.as_deref())
}

fn cmd_bench(a: &BenchArgs, mut run: Run) -> Result<()> {
    let g = load_graph(&mut run, &a.graph.graph, a.graph.virtual_root.as_deref())?;
    let spec = load_spec(&mut run, &g, a.measure, a.ic.as_deref())?;
    let m = match &a.model {
        Some(p) => load_model(&mut run, p)?,
        None => {
            run.set("dim", a.dim);
            EmbeddingMatrix::random(g.ids().to_vec(), a.dim, a.seed)?
        }
    };
    run.manifest.seed = Some(a.seed);
    let queries: Vec<String> = if a.query.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let n = a.queries.clamp(1, g.len().max(1));
        let mut picked = rand::seq::index::sample(&mut rng, g.len(), n).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| g.id(i).to_owned()).collect()
    } else {
        a.query.clone()
    };
    run.set("queries", queries.join(","));
    run.set("repeats", a.repeats);
    run.set(
        "methods",
        a.methods.iter().map(|m| format!("{m:?}").to_lowercase()).collect::<Vec<_>>().join(","),
    );
    let resolved = bench::resolve(&g, &m, &queries)?;
    let (nodes, rows): (Vec<usize>, Vec<usize>) = resolved.into_iter().unzip();

    let mut reports = Vec::new();
    let mut baseline = None;
    for method in &a.methods {
        let (name, secs) = match method {
            Method::Graph => (format!("graph:{}", a.measure), bench::time_graph(&g, &spec, &nodes, a.repeats)?),
            Method::Dot => ("dot".to_owned(), bench::time_dot(&m, &rows, a.repeats)?),
        };
        if secs < bench::TIMER_FLOOR_SECS {
            log::warn!("{name} median {} is below timer resolution; use more queries", bench::format_secs(secs));
        }
        if *method == Method::Graph {
            baseline = Some(secs);
        }
        reports.push(bench::BenchReport {
            method: name,
            median_secs: secs,
            n_targets: g.len(),
            repeats: a.repeats,
            speedup: 1.0,
        });
    }
    let base = baseline.unwrap_or(reports.first().map_or(1.0, |r| r.median_secs));
    for r in &mut reports {
        r.speedup = base / r.median_secs;
    }

    let mut tsv = format!("{}\n", bench::BenchReport::TSV_HEADER);
    for r in &reports {
        writeln!(tsv, "{}", r.tsv_row()).unwrap();
    }
    let mut table = format!("{:<12} {:>14} {:>10} {:>8} {:>10}\n", "method", "median/query", "targets", "repeats", "speedup");
    for r in &reports {
        writeln!(
            table,
            "{:<12} {:>14} {:>10} {:>8} {:>9.1}x",
            r.method,
            bench::format_secs(r.median_secs),
            r.n_targets,
            r.repeats,
            r.speedup
        )
        .unwrap();
    }
    if a.workers > 1 {
        run.set("workers", a.workers);
        for t in bench::run_parallel_throughput(&g, &spec, &m, &queries, a.workers)? {
            writeln!(
                table,
                "{} on {} workers: {:.1} queries/s ({:.1} per worker)",
                t.method, t.workers, t.queries_per_sec, t.queries_per_sec_per_worker
            )
            .unwrap();
        }
    }
    match &a.output {
        Some(p) => {
            write_text(p, &tsv)?;
            print(&table);
        }
        None => print(&table),
    }
    run.finish(a.output.as_deref())
}

fn cmd_generate(a: &GenerateArgs, mut run: Run) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    run.manifest.seed = Some(a.seed);
    run.set("kind", format!("{:?}", a.kind).to_lowercase());
    run.set("nodes", a.nodes);
    let g = match a.kind {
        Shape::Tree => synth::random_tree(a.nodes, &mut rng),
        Shape::Dag => {
            if !(0.0..=1.0).contains(&a.second_parent) {
                return Err(Error::Config("--second-parent must lie in [0, 1]".into()));
            }
            run.set("second_parent", a.second_parent);
            run.set("roots", a.roots);
            synth::random_dag(a.nodes, a.second_parent, a.roots, &mut rng)
        }
        Shape::Wordnet => synth::wordnet_like(a.nodes, &mut rng),
    };
    g.write_edge_list(&a.output)?;
    if let Some(c) = &a.counts {
        if a.max_count == 0 {
            return Err(Error::Config("--max-count must be positive".into()));
        }
        run.set("max_count", a.max_count);
        let counts = synth::random_counts(&g, a.max_count, &mut rng);
        let mut s = String::new();
        for (i, c) in counts.iter().enumerate() {
            if *c > 0.0 {
                writeln!(s, "{}\t{c}", g.id(i)).unwrap();
            }
        }
        write_text(c, &s)?;
    }
    run.finish(Some(&a.output))
}

fn cmd_replay(a: &ReplayArgs) -> Result<ExitCode> {
    let m = RunManifest::read(&a.manifest_file)?;
    let changed = m.changed_inputs()?;
    if !changed.is_empty() {
        let list: Vec<String> = changed.iter().map(|i| format!("{} ({})", i.role, i.path.display())).collect();
        if !a.force {
            return Err(Error::Validation(format!("inputs changed since the run: {}", list.join(", "))));
        }
        log::warn!("replaying despite changed inputs: {}", list.join(", "));
    }
    if m.argv.first().map(String::as_str) == Some("replay") {
        return Err(Error::Validation("manifest records a replay".into()));
    }
    if m.version != taxembed::manifest::VERSION {
        log::warn!("manifest written by version {}, running {}", m.version, taxembed::manifest::VERSION);
    }
    Ok(run_argv(&m.argv))
}

fn dispatch(cli: &Cli, argv: &[String]) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    let run = Run::new(cli, argv);
    match &cli.command {
        Command::Similarities(a) => cmd_similarities(a, run)?,
        Command::Train(a) => cmd_train(a, run)?,
        Command::EvalSim(a) => cmd_eval_sim(a, run)?,
        Command::Wsd(a) => cmd_wsd(a, run)?,
        Command::Neighbors(a) => cmd_neighbors(a, run)?,
        Command::Bench(a) => cmd_bench(a, run)?,
        Command::Generate(a) => cmd_generate(a, run)?,
        Command::Replay(a) => return cmd_replay(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

/// Parses and runs `argv` (without the program name).
fn run_argv(argv: &[String]) -> ExitCode {
    let full = std::iter::once("taxembed".to_owned()).chain(argv.iter().cloned());
    let cli = match Cli::try_parse_from(full) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    // A replayed run keeps the logger of the outer invocation.
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match dispatch(&cli, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    run_argv(&argv)
}
