use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use drem::config::RunConfig;
use drem::evaluation::{evaluate_run, significance_matrix, Metric};
use drem::explainer::ExplanationRecord;
use drem::persist::{load_model, read_artifacts, save_model, QRELS};
use drem::pipeline;
use drem::retrieval::read_run;
use drem::{DremError, EntityType};

#[derive(Parser)]
#[command(name = "drem", version, about = "Dynamic relation embeddings for explainable product search")]
struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    reviews: Option<String>,
    #[arg(long, global = true)]
    metadata: Option<String>,
    #[arg(long, global = true)]
    data_dir: Option<String>,
    #[arg(long, global = true)]
    min_freq: Option<String>,
    #[arg(long, global = true)]
    test_ratio: Option<String>,
    /// Embedding size α.
    #[arg(long, global = true)]
    dim: Option<String>,
    /// Weight of the dynamic relation.
    #[arg(long, global = true)]
    lambda: Option<String>,
    #[arg(long, global = true)]
    negatives: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    lr_start: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    #[arg(long, global = true)]
    grad_clip_norm: Option<String>,
    #[arg(long, global = true)]
    beta: Option<String>,
    #[arg(long, global = true)]
    max_hops: Option<String>,
    #[arg(long, global = true)]
    top_per_type: Option<String>,
    #[arg(long, global = true)]
    top_k: Option<String>,
    /// NoMeta, AB, AV, BT, Bnd, Cat or All.
    #[arg(long, global = true)]
    relations: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    mu: Option<String>,
    #[arg(long, global = true)]
    k1: Option<String>,
    #[arg(long, global = true)]
    b: Option<String>,
    #[arg(long, global = true)]
    bm25_literal_paper_formula: Option<String>,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) -> drem::Result<()> {
        let pairs = [
            ("reviews", &self.reviews),
            ("metadata", &self.metadata),
            ("data-dir", &self.data_dir),
            ("min-freq", &self.min_freq),
            ("test-ratio", &self.test_ratio),
            ("dim", &self.dim),
            ("lambda", &self.lambda),
            ("negatives", &self.negatives),
            ("epochs", &self.epochs),
            ("lr-start", &self.lr_start),
            ("batch-size", &self.batch_size),
            ("grad-clip-norm", &self.grad_clip_norm),
            ("beta", &self.beta),
            ("max-hops", &self.max_hops),
            ("top-per-type", &self.top_per_type),
            ("top-k", &self.top_k),
            ("relations", &self.relations),
            ("seed", &self.seed),
            ("mu", &self.mu),
            ("k1", &self.k1),
            ("b", &self.b),
            ("bm25-literal-paper-formula", &self.bm25_literal_paper_formula),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                c.set(key, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum System {
    Drem,
    Ql,
    Bm25,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Map,
    Mrr,
    Ndcg10,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the raw dumps and write dataset artifacts to --data-dir.
    Ingest,
    /// Train a model and save it.
    Train {
        #[arg(long)]
        model: PathBuf,
        /// Per-epoch objective CSV.
        #[arg(long)]
        loss_trace: Option<PathBuf>,
    },
    /// Write a TREC run for every judged user-query pair.
    Retrieve {
        #[arg(long, value_enum, default_value = "drem")]
        system: System,
        #[arg(long, required_if_eq("system", "drem"))]
        model: Option<PathBuf>,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "")]
        tag: String,
    },
    /// Score runs against the held-out judgments and compare them.
    Evaluate {
        /// Run files, optionally as `name=path`.
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        /// Defaults to the qrels file in --data-dir.
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Writes metrics and the significance matrix as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "map")]
        metric: MetricArg,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
    },
    /// Explain why items were retrieved, as JSON lines.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// `user:query:item` with surface names or numeric ids; repeatable.
        #[arg(long = "triple")]
        triples: Vec<String>,
        /// Explain the top items of this run instead.
        #[arg(long, conflicts_with = "triples")]
        run: Option<PathBuf>,
        /// Items per pair taken from --run.
        #[arg(long, default_value_t = 1)]
        per_pair: usize,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate over a grid of λ and α.
    Sweep {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500")]
        dims: Vec<usize>,
    },
}

fn write_out(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).map_err(|e| DremError::Io { path: path.to_path_buf(), source: e }.into())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut config)?;
    config.validate()?;

    match cli.command {
        Command::Ingest => {
            let (_, stats) = pipeline::ingest(&config)?;
            println!("{stats}");
        }
        Command::Train { model, loss_trace } => {
            let art = read_artifacts(&config.data_dir)?;
            let (params, trace) = pipeline::train_model(&art, &config)?;
            save_model(&params, &model)?;
            let trace_path = loss_trace.unwrap_or_else(|| model.with_extension("loss.csv"));
            trace.write_csv(&trace_path)?;
            if let Some(last) = trace.epochs.last() {
                println!("epoch {} mean objective {:.6}", last.epoch, last.mean_objective);
            }
            println!("saved {}", model.display());
        }
        Command::Retrieve { system, model, run, tag } => {
            let art = read_artifacts(&config.data_dir)?;
            let (lists, default_tag) = match system {
                System::Drem => {
                    let m = load_model(model.as_deref().expect("clap enforces --model"))?;
                    (pipeline::drem_rankings(&m, &art, config.top_k)?, "drem")
                }
                System::Ql => (pipeline::baseline_rankings(&art, &config.scorer("ql")?, config.top_k)?, "ql"),
                System::Bm25 => (pipeline::baseline_rankings(&art, &config.scorer("bm25")?, config.top_k)?, "bm25"),
            };
            let tag = if tag.is_empty() { default_tag } else { tag.as_str() };
            write_out(&run, &pipeline::run_text(&art, &lists, tag))?;
            println!("wrote {} rankings to {}", lists.len(), run.display());
        }
        Command::Evaluate { runs, qrels, json, metric, iterations } => {
            let qrels = qrels.unwrap_or_else(|| config.data_dir.join(QRELS));
            let mut reports = Vec::new();
            for r in &runs {
                let (name, path) = match r.split_once('=') {
                    Some((n, p)) => (n.to_string(), PathBuf::from(p)),
                    None => (r.clone(), PathBuf::from(r)),
                };
                let report = evaluate_run(&path, &qrels)?;
                println!("== {name}\n{report}");
                reports.push((name, report));
            }
            let metric = match metric {
                MetricArg::Map => Metric::Map,
                MetricArg::Mrr => Metric::Mrr,
                MetricArg::Ndcg10 => Metric::Ndcg10,
            };
            let matrix = significance_matrix(&reports, metric, iterations, config.seed)?;
            if reports.len() > 1 {
                println!("\nFisher randomization p-values\n{matrix}");
            }
            if let Some(path) = json {
                let value = serde_json::json!({
                    "systems": reports.iter().map(|(n, r)| serde_json::json!({"name": n, "metrics": r})).collect::<Vec<_>>(),
                    "significance": matrix,
                });
                write_out(&path, &serde_json::to_string_pretty(&value)?)?;
            }
        }
        Command::Explain { model, triples, run, per_pair, out } => {
            let art = read_artifacts(&config.data_dir)?;
            let m = load_model(&model)?;
            let mut wanted: Vec<(u32, u32, u32)> = Vec::new();
            for t in &triples {
                let parts: Vec<&str> = t.split(':').collect();
                let [u, q, i] = parts[..] else {
                    bail!(DremError::InvalidArgument(format!("--triple {t} is not user:query:item")))
                };
                let q: u32 = q.parse().map_err(|_| DremError::InvalidArgument(format!("bad query id `{q}`")))?;
                wanted.push((
                    pipeline::resolve(&art, EntityType::User, u)?,
                    q,
                    pipeline::resolve(&art, EntityType::Item, i)?,
                ));
            }
            if let Some(path) = run {
                for line in read_run(&path)?.into_iter().filter(|l| (l.rank as usize) <= per_pair) {
                    let (u, q) =
                        line.key.rsplit_once('_').and_then(|(u, q)| Some((u, q.parse::<u32>().ok()?))).ok_or_else(
                            || DremError::InvalidArgument(format!("run key `{}` is not user_query", line.key)),
                        )?;
                    wanted.push((
                        pipeline::resolve(&art, EntityType::User, u)?,
                        q,
                        pipeline::resolve(&art, EntityType::Item, &line.item)?,
                    ));
                }
            }
            if wanted.is_empty() {
                bail!(DremError::InvalidArgument("nothing to explain: give --triple or --run".into()));
            }
            let lines: Vec<String> = wanted
                .par_iter()
                .map(|&(u, q, i)| {
                    let expls = pipeline::explain(&m, &art, u, q, i, &config)?;
                    Ok(expls.iter().map(|e| ExplanationRecord::new(e, &art.catalog).to_json_line()).collect::<Vec<_>>())
                })
                .collect::<drem::Result<Vec<_>>>()?
                .concat();
            let text = lines.iter().map(|l| format!("{l}\n")).collect::<String>();
            match out {
                Some(path) => write_out(&path, &text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::Sweep { out, lambdas, dims } => {
            let art = read_artifacts(&config.data_dir)?;
            let rows = pipeline::sweep(&art, &config, &lambdas, &dims);
            write_out(&out, &pipeline::sweep_csv(&rows))?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} grid points, {failed} failed; wrote {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<DremError>().map_or(2, DremError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
