mod config;
mod run;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use bsg_core::belief::{build_bsg, Rounding, ShareBase};
use bsg_core::ceci::{checkpoint, examples_from_samples, train_with_observer, EpochRecord, TrainLog};
use bsg_core::dataset::{
    ingest, make_sample, read_dataset, split, synthesize, write_dataset, AnnotatedSpace, ClassMapping, DatasetSample,
};
use bsg_core::metrics::{comparison_rows, evaluate, BeliefSource, Grouping, MeanBeliefs, OracleBeliefs};
use bsg_core::search::{batch_eval, BatchReport, SearchMode};
use bsg_core::{ClassCatalog, SceneGraph};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::Configs;
use run::{exit_code, usage, Run};

#[derive(Parser)]
#[command(name = "bsg", version, about = "Belief scene graph pipelines")]
struct Cli {
    /// Seed overriding the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file with per-command sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "bsg-out")]
    out: PathBuf,
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    Pooled,
    Rooms,
    Buildings,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Model,
    Oracle,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    Nearest,
    Floor,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShareBaseArg {
    AllClasses,
    UnseenOnly,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Single,
    Multi,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long)]
        count: Option<i64>,
        #[arg(long)]
        partials: Option<usize>,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Build a dataset from annotated space files and a class mapping.
    Ingest {
        /// Directory of annotated space JSON files.
        #[arg(long)]
        spaces: PathBuf,
        /// CSV with a `raw_category,target` header; target DROP discards the category.
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        partials: Option<usize>,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Train a model on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Compute distance metrics on the test split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "model")]
        source: SourceArg,
        #[arg(long, value_enum)]
        grouping: Option<GroupingArg>,
    },
    /// Add blind nodes to a partial graph and list likely unseen objects.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long, value_enum)]
        rounding: Option<RoundingArg>,
        #[arg(long, value_enum)]
        share_base: Option<ShareBaseArg>,
    },
    /// Compare the search planners on the test split.
    Search {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Runs per graph.
        #[arg(long)]
        runs: Option<usize>,
        /// Use at most this many test graphs.
        #[arg(long)]
        graphs: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        no_pass_through: bool,
    },
    /// Summarize an eval or search output directory.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn catalog() -> Result<Arc<ClassCatalog>> {
    Ok(Arc::new(ClassCatalog::from_env().context("loading class catalog")?))
}

fn say(quiet: bool, text: &str) {
    if !quiet {
        print!("{text}");
    }
}

fn write_samples(run: &Run, samples: Vec<DatasetSample>, spaces: &[AnnotatedSpace], seed: u64, fraction: f64) -> Result<()> {
    let parts = split(samples, seed)?;
    log::info!(
        "split: {} train, {} val, {} test",
        parts.train.len(),
        parts.val.len(),
        parts.test.len()
    );
    write_dataset(&run.out, &parts, spaces, seed, fraction)?;
    Ok(())
}

fn cmd_gen(cli: &Cli, cfg: &Configs, count: Option<i64>, partials: Option<usize>, fraction: Option<f64>) -> Result<()> {
    let mut c = cfg.gen()?;
    c.count = count.unwrap_or(c.count);
    c.partials = partials.unwrap_or(c.partials);
    c.fraction = fraction.unwrap_or(c.fraction);
    c.synth.seed = cli.seed.unwrap_or(c.synth.seed);
    let catalog = catalog()?;
    let mut run = Run::start(&cli.out, "gen")?;
    run.seed("seed", c.synth.seed);
    c.synth.check_catalog(&catalog)?;
    let mapping = ClassMapping::identity(&catalog);
    let spaces = synthesize(&c.synth, c.count)?;
    let samples = spaces
        .iter()
        .map(|s| {
            let gt = ingest(s, &mapping, &catalog)?.graph;
            make_sample(&s.id, gt, c.partials, c.fraction, c.synth.seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_samples(&run, samples, &spaces, c.synth.seed, c.fraction)?;
    say(cli.quiet, &format!("generated {} buildings in {}\n", c.count, cli.out.display()));
    run.finish(&c, catalog.fingerprint_hex())
}

fn cmd_ingest(
    cli: &Cli,
    cfg: &Configs,
    spaces_dir: &Path,
    mapping_path: &Path,
    partials: Option<usize>,
    fraction: Option<f64>,
) -> Result<()> {
    let mut c = cfg.ingest()?;
    c.partials = partials.unwrap_or(c.partials);
    c.fraction = fraction.unwrap_or(c.fraction);
    c.seed = cli.seed.unwrap_or(c.seed);
    let catalog = catalog()?;
    let mut run = Run::start(&cli.out, "ingest")?;
    run.seed("seed", c.seed);
    run.input(spaces_dir)?;
    run.input(mapping_path)?;
    let mapping = ClassMapping::from_file(mapping_path)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(spaces_dir)
        .with_context(|| format!("reading {}", spaces_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "json"));
    files.sort();
    let mut spaces = Vec::with_capacity(files.len());
    let mut samples = Vec::with_capacity(files.len());
    let mut warnings = csv::Writer::from_writer(Vec::new());
    warnings.write_record(["space", "raw_category", "reason"])?;
    for f in &files {
        let space = AnnotatedSpace::read(f).with_context(|| format!("reading {}", f.display()))?;
        let got = ingest(&space, &mapping, &catalog)?;
        for raw in &got.dropped {
            warnings.write_record([space.id.as_str(), raw, "drop"])?;
        }
        for raw in &got.unmapped {
            warnings.write_record([space.id.as_str(), raw, "unmapped"])?;
        }
        samples.push(make_sample(&space.id, got.graph, c.partials, c.fraction, c.seed)?);
        spaces.push(space);
    }
    run.write("dropped.csv", warnings.into_inner()?)?;
    write_samples(&run, samples, &spaces, c.seed, c.fraction)?;
    say(cli.quiet, &format!("ingested {} spaces into {}\n", spaces.len(), cli.out.display()));
    run.finish(&c, catalog.fingerprint_hex())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    cli: &Cli,
    cfg: &Configs,
    data: &Path,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    hidden: Option<usize>,
    dropout: Option<f64>,
) -> Result<()> {
    let mut c = cfg.train()?;
    c.epochs = epochs.unwrap_or(c.epochs);
    c.batch_size = batch_size.unwrap_or(c.batch_size);
    c.learning_rate = lr.unwrap_or(c.learning_rate);
    c.hidden = hidden.unwrap_or(c.hidden);
    c.dropout = dropout.unwrap_or(c.dropout);
    c.seed = cli.seed.unwrap_or(c.seed);
    let catalog = catalog()?;
    let mut run = Run::start(&cli.out, "train")?;
    run.seed("seed", c.seed);
    run.input(data)?;
    let (_, parts) = read_dataset(data, &catalog)?;
    let tr = examples_from_samples(&parts.train)?;
    let va = examples_from_samples(&parts.val)?;
    let mut records: Vec<EpochRecord> = Vec::new();
    let quiet = cli.quiet;
    let result = train_with_observer(&tr, &va, &catalog, &c, |r| {
        if !quiet && (r.epoch % 50 == 0 || r.epoch + 1 == c.epochs) {
            log::info!("epoch {} train {:.5} val {:.5}", r.epoch, r.train_mse, r.val_mse);
        }
        records.push(r.clone());
    });
    let (model, log) = match result {
        Ok(v) => v,
        Err(e) => {
            let partial = TrainLog {
                epochs: records,
                ..TrainLog::default()
            };
            run.write("train_log.csv", partial.to_csv())?;
            return Err(e.into());
        }
    };
    let model_path = run.path("model.bsgc");
    checkpoint::save(&model, &model_path)?;
    checkpoint::write_sidecar(&model_path, &c, &catalog)?;
    run.write("train_log.csv", log.to_csv())?;
    say(
        cli.quiet,
        &format!(
            "trained {} epochs; validation MSE {:.5} -> {:.5} (best epoch {})\n",
            log.epochs.len(),
            log.initial_val_mse,
            log.best_val_mse().unwrap_or(f64::NAN),
            log.best_epoch.map_or("-".into(), |e| e.to_string())
        ),
    );
    run.finish(&c, catalog.fingerprint_hex())
}

#[derive(Serialize)]
struct EvalSnapshot {
    source: &'static str,
    #[serde(flatten)]
    config: config::EvalConfig,
}

fn cmd_eval(
    cli: &Cli,
    cfg: &Configs,
    data: &Path,
    model_path: Option<&Path>,
    source: SourceArg,
    grouping: Option<GroupingArg>,
) -> Result<()> {
    let mut c = cfg.eval()?;
    if let Some(g) = grouping {
        c.grouping = match g {
            GroupingArg::Pooled => Grouping::Pooled,
            GroupingArg::Rooms => Grouping::Rooms,
            GroupingArg::Buildings => Grouping::Buildings,
        };
    }
    if matches!(source, SourceArg::Model) != model_path.is_some() {
        return usage("--model is required with --source model and not allowed otherwise");
    }
    let catalog = catalog()?;
    let mut run = Run::start(&cli.out, "eval")?;
    run.input(data)?;
    let (_, parts) = read_dataset(data, &catalog)?;
    if parts.test.is_empty() {
        bail!("test split is empty");
    }
    let (belief_source, name): (Box<dyn BeliefSource>, &'static str) = match source {
        SourceArg::Model => {
            let p = model_path.expect("checked above");
            run.input(p)?;
            (Box::new(checkpoint::load_for(p, &catalog)?), "model")
        }
        SourceArg::Oracle => (Box::new(OracleBeliefs), "oracle"),
        SourceArg::Mean => (Box::new(MeanBeliefs::fit(&parts.train)?), "mean"),
    };
    let report = evaluate(belief_source.as_ref(), &parts.test, c.grouping)?;
    run.write("report.json", report.to_json())?;
    run.write("per_class.csv", report.per_class_csv())?;
    run.write("correlation_predicted.csv", report.correlation_csv(true))?;
    run.write("correlation_truth.csv", report.correlation_csv(false))?;
    run.write("per_class.svg", report.box_plot_svg())?;
    let mut rows = csv::Writer::from_writer(Vec::new());
    for sample in parts.test.iter().take(c.comparison_samples) {
        for row in comparison_rows(belief_source.as_ref(), sample, c.comparison_partials)? {
            rows.serialize(row)?;
        }
    }
    run.write("comparisons.csv", rows.into_inner()?)?;
    say(
        cli.quiet,
        &format!(
            "nodes {}  wasserstein mean {:.4} var {:.4}  energy mean {:.4} var {:.4}  frobenius {:.4}\n",
            report.nodes,
            report.wasserstein.mean,
            report.wasserstein.variance,
            report.energy.mean,
            report.energy.variance,
            report.frobenius
        ),
    );
    run.finish(&EvalSnapshot { source: name, config: c }, catalog.fingerprint_hex())
}

fn cmd_predict(
    cli: &Cli,
    cfg: &Configs,
    model_path: &Path,
    graph_path: &Path,
    top_k: Option<usize>,
    rounding: Option<RoundingArg>,
    share_base: Option<ShareBaseArg>,
) -> Result<()> {
    let mut c = cfg.predict()?;
    c.top_k = top_k.unwrap_or(c.top_k);
    if let Some(r) = rounding {
        c.options.rounding = match r {
            RoundingArg::Nearest => Rounding::Nearest,
            RoundingArg::Floor => Rounding::Floor,
        };
    }
    if let Some(b) = share_base {
        c.options.share_base = match b {
            ShareBaseArg::AllClasses => ShareBase::AllClasses,
            ShareBaseArg::UnseenOnly => ShareBase::UnseenOnly,
        };
    }
    if c.top_k == 0 {
        return usage("--top-k must be at least 1");
    }
    let catalog = catalog()?;
    let mut run = Run::start(&cli.out, "predict")?;
    run.input(model_path)?;
    run.input(graph_path)?;
    let model = checkpoint::load_for(model_path, &catalog)?;
    let bytes = std::fs::read(graph_path).with_context(|| format!("reading {}", graph_path.display()))?;
    let partial = SceneGraph::from_json_with_catalog(&bytes, Some(&catalog))
        .with_context(|| format!("parsing {}", graph_path.display()))?;
    let bsg = build_bsg(&partial, &model, &c.options)?;
    run.write("bsg.json", bsg.to_json()?)?;
    let table = bsg.top_k_table(c.top_k, c.options.share_base)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut text = String::new();
    for row in &table {
        w.serialize(row)?;
        text.push_str(&format!("{:<24} {:>2}  {:<20} {:>7.2}%\n", row.room.as_str(), row.rank, row.class, row.share));
    }
    run.write("top_k.csv", w.into_inner()?)?;
    say(cli.quiet, &format!("{} blind nodes added\n{text}", bsg.blind_count()));
    run.finish(&c, catalog.fingerprint_hex())
}

fn report_csv(report: &BatchReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "mode",
        "runs",
        "baseline_mean_cost",
        "bsg_mean_cost",
        "reduction_pct",
        "reduction_ci_low",
        "reduction_ci_high",
        "baseline_success_rate",
        "bsg_success_rate",
    ])?;
    for m in &report.modes {
        w.write_record([
            m.mode.to_string(),
            m.runs.to_string(),
            m.baseline_mean_cost.to_string(),
            m.bsg_mean_cost.to_string(),
            m.reduction_pct.to_string(),
            m.reduction_ci[0].to_string(),
            m.reduction_ci[1].to_string(),
            m.baseline_success_rate.to_string(),
            m.bsg_success_rate.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    cli: &Cli,
    cfg: &Configs,
    data: &Path,
    model_path: &Path,
    runs: Option<usize>,
    graphs: Option<usize>,
    mode: Option<ModeArg>,
    no_pass_through: bool,
) -> Result<()> {
    let mut c = cfg.search()?;
    c.batch.runs_per_graph = runs.unwrap_or(c.batch.runs_per_graph);
    c.max_graphs = graphs.or(c.max_graphs);
    c.batch.seed = cli.seed.unwrap_or(c.batch.seed);
    if let Some(m) = mode {
        c.batch.modes = match m {
            ModeArg::Single => vec![SearchMode::Single],
            ModeArg::Multi => vec![SearchMode::Multi],
            ModeArg::Both => vec![SearchMode::Single, SearchMode::Multi],
        };
    }
    if no_pass_through {
        c.batch.episode.pass_through = false;
    }
    if c.batch.modes.is_empty() {
        return usage("at least one search mode is required");
    }
    let catalog = catalog()?;
    let mut run = Run::start(&cli.out, "search")?;
    run.seed("seed", c.batch.seed);
    run.input(data)?;
    run.input(model_path)?;
    let model = checkpoint::load_for(model_path, &catalog)?;
    let (_, parts) = read_dataset(data, &catalog)?;
    let graphs: Vec<(String, SceneGraph)> = parts
        .test
        .into_iter()
        .take(c.max_graphs.unwrap_or(usize::MAX))
        .map(|s| (s.source_id, s.ground_truth))
        .collect();
    let report = batch_eval(&graphs, &model, &c.batch)?;
    run.write("report.json", report.to_json())?;
    run.write("report.csv", report_csv(&report)?)?;
    run.write("episodes.jsonl", report.episodes_jsonl())?;
    let table = report.summary_table();
    run.write("summary.txt", &table)?;
    say(cli.quiet, &table);
    run.finish(&c, catalog.fingerprint_hex())
}

fn summarize(dir: &Path) -> Result<String> {
    let path = dir.join("report.json");
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    let num = |v: &serde_json::Value, k: &str| v.get(k).and_then(|x| x.as_f64()).unwrap_or(f64::NAN);
    let opt = |v: &serde_json::Value, k: &str| match v.get(k).and_then(|x| x.as_f64()) {
        Some(x) => format!("{x:>10.4}"),
        None => format!("{:>10}", "n/a"),
    };
    let mut out = String::new();
    if let Some(modes) = v.get("modes").and_then(|m| m.as_array()) {
        out.push_str(&format!(
            "{:<7} {:>5} {:>10} {:>10} {:>9} {:>19}\n",
            "mode", "runs", "baseline", "bsg", "reduc%", "95% CI"
        ));
        for m in modes {
            let ci = m.get("reduction_ci").and_then(|c| c.as_array()).cloned().unwrap_or_default();
            let at = |i: usize| ci.get(i).and_then(|x| x.as_f64()).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{:<7} {:>5} {:>10.3} {:>10.3} {:>9.2} [{:>7.2}, {:>7.2}]\n",
                m.get("mode").and_then(|x| x.as_str()).unwrap_or("?"),
                m.get("runs").and_then(|x| x.as_u64()).unwrap_or(0),
                num(m, "baseline_mean_cost"),
                num(m, "bsg_mean_cost"),
                num(m, "reduction_pct"),
                at(0),
                at(1)
            ));
        }
    } else if v.get("wasserstein").is_some() {
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>10} {:>10}\n",
            "metric", "mean", "variance", "skewness", "ex.kurt"
        ));
        for k in ["wasserstein", "energy"] {
            let s = &v[k];
            out.push_str(&format!(
                "{k:<12} {:>10.4} {:>10.4} {} {}\n",
                num(s, "mean"),
                num(s, "variance"),
                opt(s, "skewness"),
                opt(s, "excess_kurtosis")
            ));
        }
        out.push_str(&format!("frobenius    {:>10.4}\n", num(&v, "frobenius")));
    } else {
        bail!("{} is neither an eval nor a search report", path.display());
    }
    Ok(out)
}

fn cmd_report(cli: &Cli, input: &Path) -> Result<()> {
    let mut run = Run::start(&cli.out, "report")?;
    run.input(&input.join("report.json"))?;
    let text = summarize(input)?;
    run.write("summary.txt", &text)?;
    say(cli.quiet, &text);
    run.finish(&serde_json::json!({ "input": input }), String::new())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = Configs::load(cli.config.as_deref()).map_err(|e| run::UsageError(format!("{e:#}")))?;
    match &cli.command {
        Command::Gen {
            count,
            partials,
            fraction,
        } => cmd_gen(cli, &cfg, *count, *partials, *fraction),
        Command::Ingest {
            spaces,
            mapping,
            partials,
            fraction,
        } => cmd_ingest(cli, &cfg, spaces, mapping, *partials, *fraction),
        Command::Train {
            data,
            epochs,
            batch_size,
            lr,
            hidden,
            dropout,
        } => cmd_train(cli, &cfg, data, *epochs, *batch_size, *lr, *hidden, *dropout),
        Command::Eval {
            data,
            model,
            source,
            grouping,
        } => cmd_eval(cli, &cfg, data, model.as_deref(), *source, *grouping),
        Command::Predict {
            model,
            graph,
            top_k,
            rounding,
            share_base,
        } => cmd_predict(cli, &cfg, model, graph, *top_k, *rounding, *share_base),
        Command::Search {
            data,
            model,
            runs,
            graphs,
            mode,
            no_pass_through,
        } => cmd_search(cli, &cfg, data, model, *runs, *graphs, *mode, *no_pass_through),
        Command::Report { input } => cmd_report(cli, input),
    }
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "error" } else { "info" }))
        .format_timestamp(None)
        .init();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
