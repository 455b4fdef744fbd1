//! CSV export of verification reports.
//!
//! One row per band under a fixed header, then three `#` lines with the
//! summary. Values are written in shortest round-trip form; a band with no
//! fill energy has `fill_db = -inf`.

use std::io::Write;
use std::path::Path;

use roomfill_core::verify::{BandRow, Summary};
use roomfill_core::VerificationReport;

use crate::error::{AppError, AppResult};

pub const HEADER: &str = "f_c_hz,primary_db,fill_db,total_db,target_db,deviation_db";

pub fn to_string(report: &VerificationReport) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for r in &report.rows {
        let fields = [r.f_c, r.primary_db, r.fill_db, r.total_db, r.target_db, r.deviation_db];
        let line: Vec<String> = fields.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    let s = &report.summary;
    out.push_str(&format!("# bands={} filled={} unfilled_band_count={}\n", s.bands, s.filled, s.unfilled_band_count));
    out.push_str(&format!("# max_abs_deviation_filled_bands_db={}\n", s.max_abs_deviation_filled_bands));
    out.push_str(&format!("# rms_deviation_db={}\n", s.rms_deviation));
    out
}

pub fn export_report(report: &VerificationReport, path: &Path) -> AppResult<()> {
    let mut file = std::fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    file.write_all(to_string(report).as_bytes()).map_err(|e| AppError::io(path, e))
}

pub fn parse(text: &str, path: &Path) -> AppResult<VerificationReport> {
    let bad = |msg: String| AppError::format(path, msg);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(bad(format!("unexpected header, expected `{HEADER}`")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let v: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}"))))
            .collect::<AppResult<_>>()?;
        rows.push(BandRow {
            f_c: v[0],
            primary_db: v[1],
            fill_db: v[2],
            total_db: v[3],
            target_db: v[4],
            deviation_db: v[5],
        });
    }

    let mut summary = Summary {
        bands: rows.len(),
        filled: 0,
        max_abs_deviation_filled_bands: 0.0,
        rms_deviation: 0.0,
        unfilled_band_count: 0,
    };
    let mut seen = 0;
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        for pair in line.split_whitespace() {
            let Some((key, value)) = pair.split_once('=') else { continue };
            let int = || value.parse::<usize>().map_err(|_| bad(format!("bad summary value {pair:?}")));
            let float = || value.parse::<f64>().map_err(|_| bad(format!("bad summary value {pair:?}")));
            match key {
                "bands" => summary.bands = int()?,
                "filled" => summary.filled = int()?,
                "unfilled_band_count" => summary.unfilled_band_count = int()?,
                "max_abs_deviation_filled_bands_db" => summary.max_abs_deviation_filled_bands = float()?,
                "rms_deviation_db" => summary.rms_deviation = float()?,
                _ => continue,
            }
            seen += 1;
        }
    }
    if seen != 5 {
        return Err(bad("missing summary lines".into()));
    }
    if summary.bands != rows.len() {
        return Err(bad(format!("summary says {} bands, found {} rows", summary.bands, rows.len())));
    }
    Ok(VerificationReport { rows, summary })
}

pub fn read_report(path: &Path) -> AppResult<VerificationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse(&text, path)
}

/// Fixed-width table for the terminal.
pub fn summary_table(label: &str, report: &VerificationReport) -> String {
    let mut out = format!("{label}\n");
    out.push_str("    f_c Hz   primary     fill    total   target      dev\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{:>10.1} {:>9.2} {:>8.2} {:>8.2} {:>8.2} {:>+8.2}\n",
            r.f_c, r.primary_db, r.fill_db, r.total_db, r.target_db, r.deviation_db
        ));
    }
    let s = &report.summary;
    out.push_str(&format!(
        "  filled {}/{} bands, max |dev| {:.3} dB, rms {:.3} dB, unfilled {}\n",
        s.filled, s.bands, s.max_abs_deviation_filled_bands, s.rms_deviation, s.unfilled_band_count
    ));
    out
}
