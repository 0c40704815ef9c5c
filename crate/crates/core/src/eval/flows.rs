use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dialog::Dialog;
use crate::error::{Error, Result};
use crate::story::applicable_activities;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    pub label: String,
    pub weight: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLink {
    pub source: String,
    pub target: String,
    pub weight: usize,
}

/// Sankey-ready flow graph over the first `depth` dialog turns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub depth: usize,
    pub nodes: Vec<FlowNode>,
    pub links: Vec<FlowLink>,
}

/// Node label for the utterance at 0-based position `index`: user and
/// assistant utterances of the k-th exchange are `U{k}` and `A{k}`.
fn label(d: &Dialog, index: usize) -> String {
    let t = &d.turns[index];
    format!("{}:{}{}", t.frame.activity, t.speaker.tag(), index / 2 + 1)
}

pub fn transition_flows(dialogs: &[Dialog], depth: usize) -> Result<FlowGraph> {
    if depth == 0 {
        return Err(Error::Validation("flow depth must be at least 1".into()));
    }
    let mut nodes: BTreeMap<(usize, String), usize> = BTreeMap::new();
    let mut links: BTreeMap<(usize, String, String), usize> = BTreeMap::new();
    for d in dialogs {
        let n = d.turns.len().min(2 * depth);
        for i in 0..n {
            *nodes.entry((i, label(d, i))).or_default() += 1;
            if i + 1 < n {
                *links.entry((i, label(d, i), label(d, i + 1))).or_default() += 1;
            }
        }
    }
    Ok(FlowGraph {
        depth,
        nodes: nodes
            .into_iter()
            .map(|((_, label), weight)| FlowNode { label, weight })
            .collect(),
        links: links
            .into_iter()
            .map(|((_, source, target), weight)| FlowLink {
                source,
                target,
                weight,
            })
            .collect(),
    })
}

/// Distribution of the user activity at exchange `turn` (1-based).
pub fn user_activity_distribution(dialogs: &[Dialog], turn: usize) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for d in dialogs {
        if let Some(t) = d.turns.get(2 * (turn - 1)) {
            *out.entry(t.frame.activity.as_str().to_string())
                .or_default() += 1;
        }
    }
    out
}

/// Observed user activity at one exchange against the uniform choice
/// among the activities applicable in each dialog's state at that point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchDiversity {
    pub turn: usize,
    pub observed: BTreeMap<String, f64>,
    pub expected: BTreeMap<String, f64>,
    pub tv_distance: f64,
}

pub fn branch_diversity(dialogs: &[Dialog], turn: usize) -> BranchDiversity {
    let mut observed: BTreeMap<String, f64> = BTreeMap::new();
    let mut expected: BTreeMap<String, f64> = BTreeMap::new();
    let mut n = 0.0;
    for d in dialogs {
        let Some(t) = d.turns.get(2 * (turn.max(1) - 1)) else {
            continue;
        };
        n += 1.0;
        *observed
            .entry(t.frame.activity.as_str().to_string())
            .or_default() += 1.0;
        let allowed = applicable_activities(&t.story_snapshot);
        for a in &allowed {
            *expected.entry(a.as_str().to_string()).or_default() += 1.0 / allowed.len() as f64;
        }
    }
    if n > 0.0 {
        observed
            .values_mut()
            .chain(expected.values_mut())
            .for_each(|v| *v /= n);
    }
    let tv_distance = tv_distance(&observed, &expected);
    BranchDiversity {
        turn,
        observed,
        expected,
        tv_distance,
    }
}

/// Total-variation distance between two distributions over labels.
pub fn tv_distance(p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>) -> f64 {
    let keys: std::collections::BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn tv_distance_cases() {
        let u = dist(&[("A", 0.5), ("B", 0.5)]);
        assert_eq!(tv_distance(&u, &u), 0.0);
        assert!((tv_distance(&dist(&[("A", 0.75), ("B", 0.25)]), &u) - 0.25).abs() < 1e-12);
        assert_eq!(tv_distance(&dist(&[("A", 1.0)]), &dist(&[("B", 1.0)])), 1.0);
    }
}
