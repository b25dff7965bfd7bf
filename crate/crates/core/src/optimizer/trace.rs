use serde::{Deserialize, Serialize};

/// One search pass and the update preceding it. Iteration 0 is the
/// initial search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub changed: usize,
    pub nn_calls: usize,
    pub millis: f64,
}

/// Quadratic energy with fixed assignments and weights, around one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateEnergy {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub records: Vec<IterationRecord>,
    pub updates: Vec<UpdateEnergy>,
    pub points_scanned: u64,
}

impl EnergyTrace {
    /// Records after the initial search.
    pub fn iterations(&self) -> &[IterationRecord] {
        self.records.get(1..).unwrap_or(&[])
    }

    pub fn final_energy(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.energy)
    }

    pub fn nn_calls(&self) -> usize {
        self.records.iter().map(|r| r.nn_calls).sum()
    }

    pub fn millis(&self) -> f64 {
        self.records.iter().map(|r| r.millis).sum()
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}
