//! Aggregation of per-replicate interval scores into a results table.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::config::TableFormat;
use crate::pumba::CredibleInterval;

/// What one method produced on one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodOutcome {
    pub estimate: Vec<f64>,
    pub intervals: Vec<CredibleInterval>,
    pub seconds: f64,
    /// Effective sample size of the monitored coordinate, for methods that
    /// produce draws.
    pub ess: Option<f64>,
    /// Acceptance rate of the sampler, when there is one.
    pub acceptance: Option<f64>,
}

/// Outcome or the reason the method failed on this replicate.
pub type ReplicateOutcome = std::result::Result<MethodOutcome, String>;

/// One row per method, design cell and parameter coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub n: u64,
    pub epsilon: f64,
    pub parameter: String,
    pub truth: f64,
    pub replicates: usize,
    pub invalid: usize,
    /// Invalid replicates count as misses.
    pub coverage: f64,
    pub coverage_se: f64,
    pub width: f64,
    pub width_se: f64,
    pub rmse: f64,
    pub rmse_se: f64,
    pub ess_per_sec: Option<f64>,
    pub ess_per_sec_se: Option<f64>,
    pub acceptance: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Binomial Monte Carlo standard error `sqrt(p (1 - p) / B)`.
pub fn coverage_se(p: f64, b: usize) -> f64 {
    (p * (1.0 - p) / b as f64).sqrt()
}

impl MetricsRow {
    /// Score coordinate `j` of `outcomes` (one per replicate) against the truth.
    pub fn from_outcomes(
        method: &str,
        n: u64,
        epsilon: f64,
        parameter: &str,
        j: usize,
        truth: f64,
        outcomes: &[&ReplicateOutcome],
    ) -> MetricsRow {
        let b = outcomes.len();
        let valid: Vec<&MethodOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let hits = valid.iter().filter(|o| o.intervals[j].contains(truth)).count();
        let coverage = if b == 0 { f64::NAN } else { hits as f64 / b as f64 };
        let widths: Vec<f64> = valid.iter().map(|o| o.intervals[j].width()).collect();
        let (width, width_se) = mean_and_se(&widths);
        let sq: Vec<f64> = valid.iter().map(|o| (o.estimate[j] - truth).powi(2)).collect();
        let (mse, mse_se) = mean_and_se(&sq);
        let rmse = mse.sqrt();
        // delta method
        let rmse_se = if rmse > 0.0 { mse_se / (2.0 * rmse) } else { f64::NAN };
        let ess: Vec<f64> = valid.iter().filter_map(|o| o.ess.map(|e| e / o.seconds.max(1e-12))).collect();
        let (ess_per_sec, ess_per_sec_se) = if ess.is_empty() {
            (None, None)
        } else {
            let (m, se) = mean_and_se(&ess);
            (Some(m), Some(se))
        };
        let acc: Vec<f64> = valid.iter().filter_map(|o| o.acceptance).collect();
        MetricsRow {
            method: method.to_string(),
            n,
            epsilon,
            parameter: parameter.to_string(),
            truth,
            replicates: b,
            invalid: b - valid.len(),
            coverage,
            coverage_se: coverage_se(coverage, b),
            width,
            width_se,
            rmse,
            rmse_se,
            ess_per_sec,
            ess_per_sec_se,
            acceptance: (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64),
        }
    }
}

impl MetricsTable {
    pub fn find(&self, method: &str, n: u64, parameter: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n && r.parameter == parameter)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER)?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Method | n | Coverage | Width | RMSE | ESS/sec | Parameter | Invalid |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for r in &self.rows {
            let ess = match (r.ess_per_sec, r.ess_per_sec_se) {
                (Some(m), Some(se)) => paired(m, se, 1),
                _ => "-".to_string(),
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
                r.method,
                r.n,
                paired(r.coverage, r.coverage_se, 3),
                paired(r.width, r.width_se, 3),
                paired(r.rmse, r.rmse_se, 3),
                ess,
                r.parameter,
                r.invalid
            ));
        }
        out
    }
}

const CSV_HEADER: [&str; 16] = [
    "method",
    "n",
    "epsilon",
    "parameter",
    "truth",
    "replicates",
    "invalid",
    "coverage",
    "coverage_se",
    "width",
    "width_se",
    "rmse",
    "rmse_se",
    "ess_per_sec",
    "ess_per_sec_se",
    "acceptance",
];

/// `value (se)`, with undefined numbers shown as `NA`.
fn paired(value: f64, se: f64, digits: usize) -> String {
    let fmt = |x: f64| {
        if x.is_finite() {
            format!("{x:.digits$}")
        } else {
            "NA".to_string()
        }
    };
    format!("{} ({})", fmt(value), fmt(se))
}

pub fn emit_table(table: &MetricsTable, format: TableFormat) -> Result<String> {
    match format {
        TableFormat::Csv => table.to_csv(),
        TableFormat::Markdown => Ok(table.to_markdown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(est: f64, lo: f64, hi: f64) -> ReplicateOutcome {
        Ok(MethodOutcome {
            estimate: vec![est],
            intervals: vec![CredibleInterval { lo, hi, level: 0.95 }],
            seconds: 0.5,
            ess: Some(100.0),
            acceptance: None,
        })
    }

    #[test]
    fn scoring_counts_invalid_as_misses() {
        let outs = [outcome(1.0, 0.0, 2.0), outcome(3.0, 2.5, 3.5), Err("singular".to_string()), outcome(0.0, -1.0, 1.0)];
        let refs: Vec<&ReplicateOutcome> = outs.iter().collect();
        let row = MetricsRow::from_outcomes("m", 10, 1.0, "theta", 0, 0.5, &refs);
        assert_eq!(row.invalid, 1);
        assert_eq!(row.coverage, 0.5);
        assert!((row.coverage_se - (0.25f64 / 4.0).sqrt()).abs() < 1e-15);
        assert!((row.width - 5.0 / 3.0).abs() < 1e-12);
        let mse = (0.25 + 6.25 + 0.25) / 3.0;
        assert!((row.rmse - f64::sqrt(mse)).abs() < 1e-12);
        assert_eq!(row.ess_per_sec, Some(200.0));
    }

    #[test]
    fn single_replicate_has_undefined_ses() {
        let outs = [outcome(1.0, 0.0, 2.0)];
        let refs: Vec<&ReplicateOutcome> = outs.iter().collect();
        let row = MetricsRow::from_outcomes("m", 10, 1.0, "theta", 0, 0.5, &refs);
        assert_eq!(row.coverage_se, 0.0);
        assert!(row.width_se.is_nan());
        let md = MetricsTable { rows: vec![row] }.to_markdown();
        assert!(md.contains("NA"));
    }

    #[test]
    fn csv_round_trip() {
        let outs = [outcome(1.0, 0.0, 2.0), outcome(0.3, 0.1, 0.4)];
        let refs: Vec<&ReplicateOutcome> = outs.iter().collect();
        let mut row = MetricsRow::from_outcomes("m", 10, 1.0, "theta", 0, 1.0 / 3.0, &refs);
        row.acceptance = Some(0.123456789012345);
        let mut other = row.clone();
        other.ess_per_sec = None;
        other.ess_per_sec_se = None;
        let table = MetricsTable { rows: vec![row, other] };
        let back = MetricsTable::from_csv(&table.to_csv().unwrap()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = MetricsTable::default();
        let csv = t.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("method,n,epsilon"));
        assert_eq!(MetricsTable::from_csv(&csv).unwrap(), t);
        assert!(t.to_markdown().starts_with("| Method | n | Coverage | Width | RMSE | ESS/sec |"));
    }
}
