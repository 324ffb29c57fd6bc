use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fit::RateFit;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub iteration: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub history: Vec<HistoryPoint>,
    pub final_train_mse: f64,
    pub final_test_mse: f64,
    /// `final_test_mse - final_train_mse`
    pub gap: f64,
    #[serde(default)]
    pub fits: BTreeMap<String, RateFit>,
    /// Final MSE on additional test sets, keyed by name.
    #[serde(default)]
    pub extra_test_mse: BTreeMap<String, f64>,
    pub config: serde_json::Value,
    pub config_hash: String,
    /// Seed per randomness consumer (data, init, minibatch).
    pub seeds: BTreeMap<String, u64>,
    /// Deviations from the reference settings, one line each.
    #[serde(default)]
    pub notes: Vec<String>,
    pub runtime_secs: f64,
}

impl ExperimentReport {
    pub fn write_history_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "iteration,train_mse,test_mse")?;
        for h in &self.history {
            writeln!(w, "{},{:e},{:e}", h.iteration, h.train_mse, h.test_mse)?;
        }
        Ok(())
    }
}

/// Hex SHA-256 of the compact JSON form. `serde_json` maps keep keys sorted,
/// so equal configs hash equally regardless of construction order.
pub fn config_hash(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("JSON values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_ignores_key_order() {
        let a = json!({"a": 1, "b": [1.5, 2]});
        let mut b = serde_json::Map::new();
        b.insert("b".into(), json!([1.5, 2]));
        b.insert("a".into(), json!(1));
        assert_eq!(config_hash(&a), config_hash(&serde_json::Value::Object(b)));
        assert_ne!(config_hash(&a), config_hash(&json!({"a": 2, "b": [1.5, 2]})));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
