//! Report records and their serialization.
//!
//! Floating-point fields serialize with 17 significant digits in both
//! formats, so a reload reproduces every f64 bit-exactly. Identical config
//! and seed produce byte-identical report files; wall time is therefore
//! kept on the in-memory record only and never written to a file.

use std::io::{self, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use grasp_core::grasp::RangeReport;

/// One optimization run: config echo, result summary, ground-truth metrics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub problem: String,
    pub noise: String,
    pub algorithm: String,
    pub seed: u64,
    pub budget: u64,
    pub confidence: f64,
    pub smoothness_floor: f64,
    pub gap_floor: f64,
    pub distance_floor: f64,
    pub value_lower_bound: Option<f64>,
    /// Range rule of the convex searcher (`gradient` or `value`).
    pub option: String,
    pub initial_fraction: Option<(u32, u32)>,
    pub x0: Vec<f64>,
    pub output: Vec<f64>,
    pub selected: String,
    pub degenerate: bool,
    pub cells: usize,
    pub samples_per_cell: u64,
    pub estimation_samples: u64,
    pub calls_total: u64,
    pub ledger: Vec<(String, u64)>,
    pub d_max: Option<f64>,
    pub eta_min: Option<f64>,
    pub eta_max: Option<f64>,
    pub l_max: Option<f64>,
    pub f_max: Option<f64>,
    pub delta_sq_max: Option<f64>,
    /// True suboptimality gap of the output (ground truth; absent for
    /// opaque problems).
    pub true_gap: Option<f64>,
    pub true_grad_norm: f64,
    pub true_grad_norm_sq: f64,
    /// Wall time of the run; excluded from serialized files so that
    /// identical config and seed give byte-identical reports.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    pub fn ranges(&mut self, r: &RangeReport) {
        self.d_max = r.d_max;
        self.eta_min = r.eta_min;
        self.eta_max = r.eta_max;
        self.l_max = r.l_max;
        self.f_max = r.f_max;
        self.delta_sq_max = r.delta_sq_max;
    }
}

/// GRASP-vs-tuned comparison. `rho = (grasp - tuned) / tuned` on the
/// squared-gradient-norm metric for the non-convex case and on the gap for
/// the convex case.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComparisonReport {
    pub metric_kind: String,
    pub grasp_metric: f64,
    pub tuned_metric: f64,
    pub tuned_param: f64,
    pub rho: f64,
    pub fine_grid: Vec<f64>,
}

/// CSV header shared by every run-report file.
pub const CSV_HEADER: &str = "problem,noise,algorithm,seed,budget,confidence,smoothness_floor,\
gap_floor,distance_floor,value_lower_bound,option,initial_fraction,cells,samples_per_cell,\
estimation_samples,degenerate,calls_total,selected,true_gap,true_grad_norm,true_grad_norm_sq,\
x0,output";

/// Formats an f64 with 17 significant digits (round-trips bit-exactly).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(";")
}

/// One CSV row per report, columns per [`CSV_HEADER`].
pub fn write_csv<W: Write>(mut w: W, reports: &[RunReport]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.problem,
            r.noise,
            r.algorithm,
            r.seed,
            r.budget,
            fmt_f64(r.confidence),
            fmt_f64(r.smoothness_floor),
            fmt_f64(r.gap_floor),
            fmt_f64(r.distance_floor),
            fmt_opt(r.value_lower_bound),
            r.option,
            r.initial_fraction
                .map(|(n, d)| format!("{n}/{d}"))
                .unwrap_or_default(),
            r.cells,
            r.samples_per_cell,
            r.estimation_samples,
            r.degenerate,
            r.calls_total,
            r.selected,
            fmt_opt(r.true_gap),
            fmt_f64(r.true_grad_norm),
            fmt_f64(r.true_grad_norm_sq),
            fmt_vec(&r.x0),
            fmt_vec(&r.output),
        )?;
    }
    Ok(())
}

/// JSON with every float printed at 17 significant digits.
pub fn write_json<W: Write, T: Serialize>(w: W, value: &T) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(w, SigDigitFormatter::default());
    value
        .serialize(&mut ser)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut w = ser.into_inner();
    writeln!(w)
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    write_json(&mut buf, value).expect("in-memory serialization");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Pretty-printing formatter that writes floats as `{:.16e}`.
#[derive(Default)]
pub struct SigDigitFormatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        RunReport {
            problem: "quadratic".into(),
            noise: "g:none/v:none".into(),
            algorithm: "grasp_c".into(),
            seed: 7,
            budget: 1000,
            confidence: 0.05,
            smoothness_floor: 1e-3,
            gap_floor: 1e-3,
            distance_floor: 1e-3,
            value_lower_bound: None,
            option: "gradient".into(),
            initial_fraction: Some((1, 8)),
            x0: vec![0.0, 0.0],
            output: vec![0.123_456_789_012_345_68, -1.0],
            selected: "cell:3".into(),
            degenerate: false,
            cells: 5,
            samples_per_cell: 0,
            estimation_samples: 10,
            calls_total: 998,
            ledger: vec![("initial_gradient".into(), 125)],
            d_max: Some(17.25),
            eta_min: None,
            eta_max: None,
            l_max: None,
            f_max: None,
            delta_sq_max: None,
            true_gap: Some(1.5e-9),
            true_grad_norm: 3e-5,
            true_grad_norm_sq: 9e-10,
            wall_time: Duration::from_millis(12),
        }
    }

    #[test]
    fn json_floats_round_trip_bit_exactly() {
        let r = sample();
        let s = to_json_string(&r);
        let back: RunReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.output[0].to_bits(), r.output[0].to_bits());
        assert_eq!(
            back.true_gap.unwrap().to_bits(),
            r.true_gap.unwrap().to_bits()
        );
        assert_eq!(back, {
            let mut r2 = r.clone();
            r2.wall_time = Duration::ZERO;
            r2
        });
    }

    #[test]
    fn wall_time_never_reaches_the_file() {
        let mut a = sample();
        let mut b = sample();
        a.wall_time = Duration::from_secs(1);
        b.wall_time = Duration::from_secs(9999);
        assert_eq!(to_json_string(&a), to_json_string(&b));
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_csv(&mut ca, &[a]).unwrap();
        write_csv(&mut cb, &[b]).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn csv_has_the_documented_header_and_17_digit_floats() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[sample()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.contains("1.2345678901234568e-1"));
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn csv_floats_parse_back_bit_exactly() {
        let r = sample();
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let out_col = CSV_HEADER.split(',').position(|c| c == "output").unwrap();
        for (printed, original) in row[out_col].split(';').zip(&r.output) {
            let parsed: f64 = printed.parse().unwrap();
            assert_eq!(parsed.to_bits(), original.to_bits());
        }
        let gap_col = CSV_HEADER.split(',').position(|c| c == "true_gap").unwrap();
        let parsed: f64 = row[gap_col].parse().unwrap();
        assert_eq!(parsed.to_bits(), r.true_gap.unwrap().to_bits());
    }
}
