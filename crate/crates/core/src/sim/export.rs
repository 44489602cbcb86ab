use std::fmt::Write;

use super::TickReport;

pub const METRICS_HEADER: &str = "tick,event,knn_size,is_size,comparisons,recompute_count";

/// Per-tick metrics table, one row per report.
pub fn metrics_csv(reports: &[TickReport]) -> String {
    let mut out = String::with_capacity(32 * (reports.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            r.event.as_str(),
            r.knn.len(),
            r.is_set.len(),
            r.comparisons,
            r.recompute_count
        );
    }
    out
}

/// One JSON document per line.
pub fn reports_jsonl(reports: &[TickReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("reports serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::tests::two_site;
    use crate::sim::run_simulation;

    #[test]
    fn csv_rows() {
        let run = run_simulation(&two_site()).unwrap();
        let csv = metrics_csv(&run.reports);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines.len(), run.reports.len() + 1);
        assert_eq!(lines[1], "0,none,1,1,2,1");
        assert_eq!(lines[6], "5,swap,1,1,2,1");
    }

    #[test]
    fn jsonl_lines_parse() {
        let run = run_simulation(&two_site()).unwrap();
        let text = reports_jsonl(&run.reports);
        for (line, r) in text.lines().zip(&run.reports) {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["t"], r.t);
            assert_eq!(v["event"], r.event.as_str());
        }
    }
}
