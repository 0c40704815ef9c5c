//! Dialog-level train/val/test partitions.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dialog::{write_jsonl, Dialog};
use crate::error::{Error, Result};

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];
pub const SPLIT_MANIFEST_FILE: &str = "splits.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub counts: [usize; 3],
    /// Dialog ids per split, in file order.
    pub members: [Vec<String>; 3],
}

/// Split sizes by largest remainder, so they always add up to `n`.
/// Remainder ties go to the earlier split.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Validation(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let exact = ratios.map(|r| r * n as f64);
    let mut sizes = exact.map(|x| x.floor() as usize);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

/// Shuffles dialog indices with `seed` and cuts them into three parts.
pub fn partition(dialogs: &[Dialog], ratios: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let sizes = split_sizes(dialogs.len(), ratios)?;
    let mut order: Vec<usize> = (0..dialogs.len()).collect();
    // Sort by id first so the partition does not depend on input order.
    order.sort_by(|&a, &b| dialogs[a].dialog_id.cmp(&dialogs[b].dialog_id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at(sizes[0]);
    let (val, test) = rest.split_at(sizes[1]);
    Ok([train.to_vec(), val.to_vec(), test.to_vec()])
}

/// Writes `train.jsonl`, `val.jsonl`, `test.jsonl` and a manifest to `dir`.
pub fn export_splits(
    dialogs: &[Dialog],
    ratios: [f64; 3],
    seed: u64,
    dir: &Path,
) -> Result<SplitManifest> {
    let parts = partition(dialogs, ratios, seed)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, part) in SPLIT_NAMES.iter().zip(&parts) {
        write_jsonl(
            &dir.join(format!("{name}.jsonl")),
            part.iter().map(|&i| &dialogs[i]),
        )?;
    }
    let members = parts.map(|p| {
        p.iter()
            .map(|&i| dialogs[i].dialog_id.clone())
            .collect::<Vec<_>>()
    });
    let manifest = SplitManifest {
        seed,
        ratios,
        counts: [members[0].len(), members[1].len(), members[2].len()],
        members,
    };
    let path = dir.join(SPLIT_MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
