//! Implementations behind the `montage` subcommands.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use montage_core::dialog::{read_dialogs, read_graphs, write_jsonl, Dialog};
use montage_core::dst::{build_prompt, serialize_frame, PredictionRecord, PromptConfig};
use montage_core::graph::{generate_collection, GenConfig, MemoryGraph};
use montage_core::lexicon::Lexicon;
use montage_core::nlu::understand;
use montage_core::sim::{DIALOGS_FILE, GRAPHS_FILE};
use montage_core::vocab::{ingest_annotation_vocab, Vocabulary};
use montage_core::{Error, Result};
use serde::Serialize;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `text` to `out`, or stdout when `out` is `None`.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{}", text.trim_end()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Error::io("<stdout>", e))
                }
                _ => Ok(()),
            }
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// A corpus argument names either the dialogs file or the directory holding it.
pub fn dialogs_path(corpus: &Path) -> PathBuf {
    if corpus.is_dir() {
        corpus.join(DIALOGS_FILE)
    } else {
        corpus.to_path_buf()
    }
}

/// The graphs file next to a corpus unless given explicitly.
pub fn graphs_path(corpus: &Path, graphs: Option<&Path>) -> PathBuf {
    match graphs {
        Some(g) => g.to_path_buf(),
        None if corpus.is_dir() => corpus.join(GRAPHS_FILE),
        None => corpus.with_file_name(GRAPHS_FILE),
    }
}

/// Vocabulary from an explicit file, an annotation category list, or the built-in default.
pub fn load_vocabulary(vocab: Option<&Path>, annotations: Option<&Path>) -> Result<Vocabulary> {
    match (vocab, annotations) {
        (Some(_), Some(_)) => Err(Error::Validation(
            "pass either --vocab or --annotations, not both".into(),
        )),
        (Some(p), None) => Vocabulary::from_json(&read_text(p)?),
        (None, Some(p)) => ingest_annotation_vocab(&read_text(p)?),
        (None, None) => Ok(Vocabulary::default()),
    }
}

pub fn load_gen_config(path: Option<&Path>) -> Result<Option<GenConfig>> {
    path.map(|p| {
        serde_json::from_str(&read_text(p)?).map_err(|e| Error::Ingest {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })
    .transpose()
}

pub fn gen_graph(config: &GenConfig) -> Result<String> {
    Ok(generate_collection(config)?.to_json() + "\n")
}

/// Loads graphs from a single graph JSON document or a JSONL file of graphs.
pub fn load_graphs(path: &Path) -> Result<Vec<MemoryGraph>> {
    let text = read_text(path)?;
    if let Ok(g) = MemoryGraph::from_json(&text) {
        return Ok(vec![g]);
    }
    read_graphs(path)
}

fn graph_index(graphs: &[MemoryGraph]) -> HashMap<&str, &MemoryGraph> {
    graphs.iter().map(|g| (g.graph_id.as_str(), g)).collect()
}

fn graph_for<'g>(index: &HashMap<&str, &'g MemoryGraph>, d: &Dialog) -> Result<&'g MemoryGraph> {
    index.get(d.graph_id.as_str()).copied().ok_or_else(|| {
        Error::Input(format!(
            "dialog {} refers to missing graph {}",
            d.dialog_id, d.graph_id
        ))
    })
}

/// Lexicons keyed by vocabulary, since a corpus usually shares one.
struct Lexicons(Vec<(Vocabulary, Lexicon)>);

impl Lexicons {
    fn get(&mut self, vocab: &Vocabulary) -> Result<&Lexicon> {
        if let Some(i) = self.0.iter().position(|(v, _)| v == vocab) {
            return Ok(&self.0[i].1);
        }
        self.0
            .push((vocab.clone(), Lexicon::for_vocabulary(vocab)?));
        Ok(&self.0.last().expect("just pushed").1)
    }
}

/// Rule-baseline predictions for every user turn the parser understands.
pub fn predict(dialogs: &[Dialog], graphs: &[MemoryGraph]) -> Result<Vec<PredictionRecord>> {
    let index = graph_index(graphs);
    let mut lexicons = Lexicons(Vec::new());
    let mut out = Vec::new();
    for d in dialogs {
        let graph = graph_for(&index, d)?;
        let lexicon = lexicons.get(&graph.vocabulary)?;
        for (i, t) in d.turns.iter().enumerate() {
            if !t.is_user() {
                continue;
            }
            if let Some(frame) =
                understand(t.text(), &d.turns[..i], &t.story_snapshot, graph, lexicon)
            {
                out.push(PredictionRecord {
                    dialog_id: d.dialog_id.clone(),
                    turn_id: t.turn_id,
                    linear_frame: serialize_frame(&frame),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct PromptRecord {
    pub dialog_id: String,
    pub turn_id: u32,
    pub prompt: String,
    pub target: String,
}

/// Token-mode prompt and gold linear frame for every user turn.
pub fn prompts(
    dialogs: &[Dialog],
    graphs: &[MemoryGraph],
    cfg: &PromptConfig,
) -> Result<Vec<PromptRecord>> {
    let index = graph_index(graphs);
    let mut out = Vec::new();
    for d in dialogs {
        let graph = graph_for(&index, d)?;
        for (i, t) in d.turns.iter().enumerate() {
            if t.is_user() {
                out.push(PromptRecord {
                    dialog_id: d.dialog_id.clone(),
                    turn_id: t.turn_id,
                    prompt: build_prompt(&d.turns[..=i], &t.story_snapshot, graph, cfg)?,
                    target: serialize_frame(&t.frame),
                });
            }
        }
    }
    Ok(out)
}

pub fn load_corpus(corpus: &Path) -> Result<Vec<Dialog>> {
    read_dialogs(&dialogs_path(corpus))
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_jsonl(path, records)
}

/// Parses `0.6,0.2,0.2`.
pub fn parse_ratios(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Validation(format!("bad ratios `{text}`: {e}")))?;
    parts
        .try_into()
        .map_err(|_| Error::Validation(format!("expected three ratios, got `{text}`")))
}

/// Process exit code for an error: 2 for bad input, 3 for I/O.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}
