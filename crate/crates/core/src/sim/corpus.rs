use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use super::{SimConfig, Simulator};
use crate::dialog::{write_jsonl, Dialog};
use crate::error::{Error, Result};
use crate::graph::{generate_collection, GenConfig, MemoryGraph};
use crate::lexicon::Lexicon;

pub const DIALOGS_FILE: &str = "dialogs.jsonl";
pub const GRAPHS_FILE: &str = "graphs.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub seed: u64,
    pub config_digest: String,
    pub graph_config_digest: String,
    pub n_utterances: usize,
    pub dialogs_file: String,
    pub graphs_file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub dialogs: Vec<Dialog>,
    pub graphs: Vec<MemoryGraph>,
    pub manifest: Manifest,
}

/// Per-dialog seed from the corpus seed, the dialog index and a stream tag.
pub fn derive_seed(seed: u64, index: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.update(stream.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Generates `n` dialogs, each grounded in its own fresh collection.
///
/// `graph_config` supplies the vocabulary and activity marginal; its seed
/// and id are replaced per dialog and its size by `sim.clips_per_graph`.
/// Work is spread over threads, but every dialog depends only on its index,
/// so the result equals a sequential run.
pub fn simulate_corpus(
    n: usize,
    graph_config: &GenConfig,
    sim: &SimConfig,
    seed: u64,
) -> Result<Corpus> {
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let lexicon = Lexicon::for_vocabulary(&graph_config.vocabulary)?;
    let simulator = Simulator::new(sim.clone(), lexicon)?;
    let pairs: Vec<(MemoryGraph, Dialog)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut gc = graph_config.clone();
            gc.n_clips = sim.clips_per_graph;
            gc.seed = derive_seed(seed, i as u64, "graph");
            gc.graph_id = Some(format!("g{:04}", i + 1));
            let graph = generate_collection(&gc)?;
            let dialog = simulator.simulate_dialog(
                &graph,
                &format!("d{:04}", i + 1),
                derive_seed(seed, i as u64, "dialog"),
            )?;
            Ok((graph, dialog))
        })
        .collect::<Result<_>>()?;
    let (graphs, dialogs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let graph_json = serde_json::to_string(graph_config).expect("config serializes");
    let manifest = Manifest {
        n,
        seed,
        config_digest: sim.digest(),
        graph_config_digest: hex(&Sha256::digest(graph_json.as_bytes())),
        n_utterances: dialogs.iter().map(|d: &Dialog| d.turns.len()).sum(),
        dialogs_file: DIALOGS_FILE.into(),
        graphs_file: GRAPHS_FILE.into(),
    };
    Ok(Corpus {
        dialogs,
        graphs,
        manifest,
    })
}

impl Corpus {
    /// Writes dialogs, graphs and the manifest into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let dialogs = dir.join(DIALOGS_FILE);
        let graphs = dir.join(GRAPHS_FILE);
        let manifest = dir.join(MANIFEST_FILE);
        write_jsonl(&dialogs, &self.dialogs)?;
        write_jsonl(&graphs, &self.graphs)?;
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&manifest, json + "\n").map_err(|e| Error::io(&manifest, e))?;
        Ok(vec![dialogs, graphs, manifest])
    }
}
