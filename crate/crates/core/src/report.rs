//! Experiment report types and serialization.
//!
//! Reports embed the full configuration echo, the build identifier, and the
//! master seed, so a report file is sufficient to re-run the experiment
//! exactly. JSON carries the structured report; a companion CSV holds one
//! row per equivalent-sample-size grid point for plotting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Package version plus a `git describe`-style revision captured at build
/// time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildInfo {
    pub package: String,
    pub version: String,
    pub revision: String,
}

impl BuildInfo {
    pub fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            revision: env!("SPARSE_PCE_GIT_DESCRIBE").to_string(),
        }
    }
}

/// Aggregated outcomes for one equivalent sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPointReport {
    /// Equivalent sample size requested for this point.
    pub n_tilde: f64,
    /// Realized cost `n_e + nu * n_g` for the chosen counts.
    pub equivalent_cost: f64,
    pub n_total: usize,
    pub n_e: usize,
    pub n_g: usize,
    pub replications: usize,
    pub successes: usize,
    pub success_probability: f64,
    pub mean_rrmse: f64,
    pub std_rrmse: f64,
    /// Replications whose solver run failed to certify optimality; these
    /// count as recovery failures.
    pub non_converged: usize,
}

/// Full record of a recovery study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub study: String,
    pub build: BuildInfo,
    pub seed: u64,
    pub nu: f64,
    pub gradient_fraction: f64,
    pub success_threshold: f64,
    /// Flat configuration echo; keys are CLI flag names where applicable.
    pub config: BTreeMap<String, String>,
    pub points: Vec<GridPointReport>,
}

impl ExperimentReport {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn from_json_str(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Curve CSV: one row per grid point.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("n_tilde,success_prob,mean_rrmse,std_rrmse\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.n_tilde, p.success_probability, p.mean_rrmse, p.std_rrmse
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ExperimentReport {
        ExperimentReport {
            study: "manufactured".into(),
            build: BuildInfo::current(),
            seed: 42,
            nu: 2.0,
            gradient_fraction: 1.0,
            success_threshold: 1e-4,
            config: [("dim".to_string(), "8".to_string())].into_iter().collect(),
            points: vec![GridPointReport {
                n_tilde: 50.0,
                equivalent_cost: 50.0,
                n_total: 25,
                n_e: 0,
                n_g: 25,
                replications: 10,
                successes: 9,
                success_probability: 0.9,
                mean_rrmse: 1.2e-5,
                std_rrmse: 3.0e-6,
                non_converged: 0,
            }],
        }
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let report = sample_report();
        let a = report.to_json_string();
        let b = ExperimentReport::from_json_str(&a).unwrap().to_json_string();
        assert_eq!(a, b);
        assert!(a.contains("\"revision\""));
        assert!(a.contains("\"seed\": 42"));
    }

    #[test]
    fn curve_csv_has_one_row_per_point() {
        let csv = sample_report().curve_csv();
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "n_tilde,success_prob,mean_rrmse,std_rrmse");
        assert!(lines[1].starts_with("50,0.9,"));
    }
}
