//! Scoring for slot filling, coreference and joint state tracking, plus
//! corpus analytics.

mod flows;
mod prf;
mod score;
mod stats;

pub use flows::{
    branch_diversity, transition_flows, tv_distance, user_activity_distribution, BranchDiversity,
    FlowGraph, FlowLink, FlowNode,
};
pub use prf::{Prf, PrfCounts};
pub use score::{
    gold_predictions, index_predictions, score, score_coref, score_joint, score_slots,
    ActivityScores, PredictionIndex, ScoreReport,
};
pub use stats::{corpus_stats, histograms_csv, Histograms, MeanStd, StatsReport};
