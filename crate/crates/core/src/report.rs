use serde::{Deserialize, Serialize};

/// Adaptive-round accounting. A round is one synchronized batch of mutually
/// independent queries, counted even when the batch runs sequentially.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLedger {
    pub value_query_rounds: u64,
    pub independence_query_rounds: u64,
    pub total_value_queries: u64,
    pub total_independence_queries: u64,
}

impl RoundLedger {
    /// Records one batch of `value` value queries and `independence`
    /// independence queries issued together. Empty batches cost nothing.
    pub fn batch(&mut self, value: u64, independence: u64) {
        if value > 0 {
            self.value_query_rounds += 1;
            self.total_value_queries += value;
        }
        if independence > 0 {
            self.independence_query_rounds += 1;
            self.total_independence_queries += independence;
        }
    }
}

/// Outcome of one algorithm run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub solution: Vec<usize>,
    pub value: f64,
    pub value_queries: u64,
    pub independence_queries: u64,
    /// Main-loop iterations.
    pub steps: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<RoundLedger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

impl RunReport {
    pub fn sorted_solution(&self) -> Vec<usize> {
        let mut s = self.solution.clone();
        s.sort_unstable();
        s
    }
}
