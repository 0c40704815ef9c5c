use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use montage_cli::commands::*;
use montage_cli::server::router;
use montage_cli::store::SessionStore;
use montage_core::dst::{read_predictions, ContextMode, PromptConfig};
use montage_core::eval::{branch_diversity, corpus_stats, histograms_csv, score, transition_flows};
use montage_core::graph::GenConfig;
use montage_core::sim::{simulate_corpus, SimConfig};
use montage_core::splits::export_splits;
use montage_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "montage",
    version,
    about = "Simulate, score and serve montage-editing dialogs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic memory graph as JSON.
    GenGraph {
        #[arg(long, default_value_t = 100)]
        n_clips: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        graph_id: Option<String>,
        /// Vocabulary JSON replacing the built-in one.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Annotation category list to build the vocabulary from.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Full generator config; overrides the other generation flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a corpus of dialogs, one fresh graph per dialog.
    Simulate {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Simulator config JSON; defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        graph_config: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
    /// Corpus statistics as JSON.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Also write histogram rows as CSV.
        #[arg(long)]
        histograms: Option<PathBuf>,
        /// Exchange whose user activity is compared to the uniform branch-off.
        #[arg(long, default_value_t = 2)]
        branch_turn: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sankey-ready activity transition flows.
    Flows {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a prediction file against gold dialogs.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dialog-level train/val/test split.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "0.6,0.2,0.2")]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "splits")]
        out: PathBuf,
    },
    /// Rule-baseline predictions in the scoring format.
    Predict {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        graphs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Token-mode prompts with gold targets for external models.
    Prompts {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        graphs: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        history_turns: usize,
        #[arg(long)]
        no_context: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve interactive editing sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// A graph JSON document or a JSONL file of graphs.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Directory for append-only session logs; sessions are recovered from it on start.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

fn gen_config(
    config: Option<&Path>,
    vocab: Option<&Path>,
    annotations: Option<&Path>,
    n_clips: usize,
    seed: u64,
) -> Result<GenConfig> {
    if let Some(c) = load_gen_config(config)? {
        return Ok(c);
    }
    let mut c = GenConfig::new(n_clips, seed);
    c.vocabulary = load_vocabulary(vocab, annotations)?;
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph {
            n_clips,
            seed,
            graph_id,
            vocab,
            annotations,
            config,
            out,
        } => {
            let mut c = gen_config(
                config.as_deref(),
                vocab.as_deref(),
                annotations.as_deref(),
                n_clips,
                seed,
            )?;
            if graph_id.is_some() {
                c.graph_id = graph_id;
            }
            emit(&gen_graph(&c)?, out.as_deref())
        }
        Command::Simulate {
            n,
            seed,
            config,
            graph_config,
            vocab,
            annotations,
            out,
        } => {
            let sim = match &config {
                Some(p) => SimConfig::from_json(&read_text(p)?)?,
                None => SimConfig::default(),
            };
            let gc = gen_config(
                graph_config.as_deref(),
                vocab.as_deref(),
                annotations.as_deref(),
                sim.clips_per_graph,
                0,
            )?;
            let corpus = simulate_corpus(n, &gc, &sim, seed)?;
            for path in corpus.write(&out)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Stats {
            corpus,
            histograms,
            branch_turn,
            out,
        } => {
            let dialogs = load_corpus(&corpus)?;
            let report = corpus_stats(&dialogs);
            if let Some(path) = histograms {
                emit(&histograms_csv(&report), Some(&path))?;
            }
            let value = serde_json::json!({
                "stats": report,
                "branch_diversity": branch_diversity(&dialogs, branch_turn),
            });
            emit(&to_json(&value), out.as_deref())
        }
        Command::Flows { corpus, depth, out } => {
            let flows = transition_flows(&load_corpus(&corpus)?, depth)?;
            emit(&to_json(&flows), out.as_deref())
        }
        Command::Score { gold, pred, out } => {
            let report = score(&load_corpus(&gold)?, &read_predictions(&pred)?)?;
            emit(&to_json(&report), out.as_deref())
        }
        Command::Split {
            corpus,
            ratios,
            seed,
            out,
        } => {
            let ratios = parse_ratios(&ratios)?;
            let manifest = export_splits(&load_corpus(&corpus)?, ratios, seed, &out)?;
            eprintln!(
                "train {} / val {} / test {} written to {}",
                manifest.counts[0],
                manifest.counts[1],
                manifest.counts[2],
                out.display()
            );
            Ok(())
        }
        Command::Predict {
            corpus,
            graphs,
            out,
        } => {
            let dialogs = load_corpus(&corpus)?;
            let graphs = load_graphs(&graphs_path(&corpus, graphs.as_deref()))?;
            write_records(&out, &predict(&dialogs, &graphs)?)
        }
        Command::Prompts {
            corpus,
            graphs,
            history_turns,
            no_context,
            out,
        } => {
            let dialogs = load_corpus(&corpus)?;
            let graphs = load_graphs(&graphs_path(&corpus, graphs.as_deref()))?;
            let cfg = PromptConfig {
                history_turns,
                include_context: !no_context,
                mode: ContextMode::Tokens,
            };
            write_records(&out, &prompts(&dialogs, &graphs, &cfg)?)
        }
        Command::Serve {
            port,
            host,
            graph,
            log_dir,
        } => {
            let graphs = match &graph {
                Some(p) => load_graphs(p)?,
                None => vec![montage_core::graph::generate_collection(&GenConfig::new(
                    100, 0,
                ))?],
            };
            let store = Arc::new(SessionStore::new(graphs, log_dir)?);
            serve(store, &host, port)
        }
    }
}

fn serve(store: Arc<SessionStore>, host: &str, port: u16) -> Result<()> {
    let addr = format!("{host}:{port}");
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(&addr, e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Error::io(&addr, e))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, router(store))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(&addr, e))
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
