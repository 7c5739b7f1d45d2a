//! Per-slot metrics and their CSV / JSONL renderings.

use std::fmt::Write as _;

use num_rational::Ratio;

use crate::gnb::UeId;

pub const CSV_HEADER: &str =
    "t_ms,slot,barred_count,barred_bitmap,ue_id,dl_bits,ul_bits,incumbent_truth,detect_latency_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeBits {
    pub ue_id: UeId,
    pub dl_bits: f64,
    pub ul_bits: f64,
}

/// State of one slot after scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub t_ms: f64,
    pub slot: u64,
    pub barred_count: usize,
    pub barred_bitmap_hex: String,
    pub ue_bits: Vec<UeBits>,
    /// PRBs covered by incumbents active at the start of the slot.
    pub incumbent_truth: usize,
    /// Set on slots where a new barred mask took effect.
    pub detect_latency_ms: Option<f64>,
    /// Cumulative E3 messages received / sent by the gNB.
    pub e3_msgs_in: u64,
    pub e3_msgs_out: u64,
}

impl MetricsRecord {
    pub fn total_bits(&self) -> f64 {
        self.ue_bits.iter().map(|u| u.dl_bits + u.ul_bits).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
    /// Emission time of every IqReport the gNB sent, exact.
    pub report_times_ms: Vec<Ratio<u64>>,
    /// Sensing symbols produced while no dApp was subscribed.
    pub dropped_reports: u64,
    /// ControlActions accepted by the gNB.
    pub control_actions: u64,
    /// Error frames the gNB sent back.
    pub errors_sent: u64,
}

impl MetricsLog {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total bits over slots whose start time lies in `[from_ms, to_ms)`.
    pub fn bits_between(&self, from_ms: f64, to_ms: f64) -> f64 {
        self.records
            .iter()
            .filter(|r| r.t_ms >= from_ms && r.t_ms < to_ms)
            .map(MetricsRecord::total_bits)
            .sum()
    }
}

/// Up to six fractional digits, trailing zeros trimmed, `.` as separator.
pub fn format_number(value: f64) -> String {
    let mut s = format!("{value:.6}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// One exported row: a (slot, UE) pair, or the slot alone when there are
/// no UEs. Values are pre-rendered; `None` is an absent value.
fn rows(log: &MetricsLog) -> impl Iterator<Item = [(&'static str, Option<String>, bool); 9]> + '_ {
    log.records.iter().flat_map(|r| {
        let per_ue: Vec<Option<UeBits>> =
            if r.ue_bits.is_empty() { vec![None] } else { r.ue_bits.iter().copied().map(Some).collect() };
        per_ue.into_iter().map(move |ue| {
            [
                ("t_ms", Some(format_number(r.t_ms)), false),
                ("slot", Some(r.slot.to_string()), false),
                ("barred_count", Some(r.barred_count.to_string()), false),
                ("barred_bitmap", Some(r.barred_bitmap_hex.clone()), true),
                ("ue_id", ue.map(|u| u.ue_id.to_string()), false),
                ("dl_bits", ue.map(|u| format_number(u.dl_bits)), false),
                ("ul_bits", ue.map(|u| format_number(u.ul_bits)), false),
                ("incumbent_truth", Some(r.incumbent_truth.to_string()), false),
                ("detect_latency_ms", r.detect_latency_ms.map(format_number), false),
            ]
        })
    })
}

pub fn export_metrics(log: &MetricsLog, format: ExportFormat) -> Vec<u8> {
    let mut out = String::new();
    match format {
        ExportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for row in rows(log) {
                let fields: Vec<String> = row.iter().map(|(_, v, _)| v.clone().unwrap_or_default()).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        ExportFormat::Jsonl => {
            for row in rows(log) {
                out.push('{');
                for (i, (name, value, is_string)) in row.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let rendered = match value {
                        None => "null".to_string(),
                        Some(v) if *is_string => serde_json::to_string(v).expect("strings serialize"),
                        Some(v) => v.clone(),
                    };
                    let _ = write!(out, "\"{name}\":{rendered}");
                }
                out.push_str("}\n");
            }
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(slot: u64, latency: Option<f64>) -> MetricsRecord {
        MetricsRecord {
            t_ms: slot as f64 * 0.5,
            slot,
            barred_count: 2,
            barred_bitmap_hex: "0300".into(),
            ue_bits: vec![UeBits { ue_id: 0, dl_bits: 1000.0 / 3.0, ul_bits: 0.0 }],
            incumbent_truth: 20,
            detect_latency_ms: latency,
            e3_msgs_in: 1,
            e3_msgs_out: 2,
        }
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(180.0), "180");
        assert_eq!(format_number(167.142857142), "167.142857");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1e-9), "0");
    }

    #[test]
    fn empty_log_is_header_only() {
        let csv = String::from_utf8(export_metrics(&MetricsLog::default(), ExportFormat::Csv)).unwrap();
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        assert!(export_metrics(&MetricsLog::default(), ExportFormat::Jsonl).is_empty());
    }

    #[test]
    fn one_record_two_lines() {
        let log = MetricsLog { records: vec![record(3, Some(4.5))], ..Default::default() };
        let csv = String::from_utf8(export_metrics(&log, ExportFormat::Csv)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "1.5,3,2,0300,0,333.333333,0,20,4.5");
        let jsonl = String::from_utf8(export_metrics(&log, ExportFormat::Jsonl)).unwrap();
        assert_eq!(
            jsonl.trim_end(),
            r#"{"t_ms":1.5,"slot":3,"barred_count":2,"barred_bitmap":"0300","ue_id":0,"dl_bits":333.333333,"ul_bits":0,"incumbent_truth":20,"detect_latency_ms":4.5}"#
        );
    }

    #[test]
    fn csv_and_jsonl_agree() {
        let mut no_ue = record(5, None);
        no_ue.ue_bits.clear();
        let log = MetricsLog { records: vec![record(1, None), record(2, Some(0.25)), no_ue], ..Default::default() };
        let csv = String::from_utf8(export_metrics(&log, ExportFormat::Csv)).unwrap();
        let jsonl = String::from_utf8(export_metrics(&log, ExportFormat::Jsonl)).unwrap();
        let header: Vec<&str> = CSV_HEADER.split(',').collect();
        let csv_rows: Vec<&str> = csv.lines().skip(1).collect();
        let json_rows: Vec<&str> = jsonl.lines().collect();
        assert_eq!(csv_rows.len(), json_rows.len());
        for (c, j) in csv_rows.iter().zip(json_rows) {
            let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(j).unwrap();
            assert_eq!(obj.len(), header.len());
            for (name, field) in header.iter().zip(c.split(',')) {
                let rendered = match &obj[*name] {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                assert_eq!(rendered, field, "{name}");
            }
        }
    }
}
