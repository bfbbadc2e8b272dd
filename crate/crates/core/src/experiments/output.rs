use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepKind;
use crate::error::{Error, Result};

/// Aggregate of one sweep point; the field order is the CSV column order.
///
/// `mean_sigma` and `frac_gap_le_1` are empty when `N` is above the exact
/// limit. Wall-clock time is logged rather than stored so that the CSV is
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub mean_sigma: Option<f64>,
    pub mean_rho: f64,
    pub mean_sigma_hat: f64,
    pub frac_gap_le_1: Option<f64>,
    /// Realizations that entered the means.
    pub realizations: usize,
    pub excluded: usize,
    pub density_rule: String,
    pub epsilon_rule: String,
}

/// Serializes rows as CSV with a header line.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid("no rows to write"));
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn emit_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, file)
}

/// Parses CSV produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let expected = [
        "n",
        "lambda",
        "epsilon",
        "beta",
        "mean_sigma",
        "mean_rho",
        "mean_sigma_hat",
        "frac_gap_le_1",
        "realizations",
        "excluded",
        "density_rule",
        "epsilon_rule",
    ];
    if header.iter().ne(expected) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn series(rows: &[SweepRow], kind: SweepKind) -> Vec<Series> {
    // Curves are keyed by everything except the x variable, in first-seen order.
    let mut groups: Vec<(String, Vec<&SweepRow>)> = Vec::new();
    for row in rows {
        let key = match kind {
            SweepKind::Epsilon => format!("lambda={} N={}", row.density_rule, row.n),
            SweepKind::Nodes | SweepKind::DensityFixed => {
                format!("lambda={} eps={}", row.density_rule, row.epsilon_rule)
            }
        };
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    let x = |r: &SweepRow| match kind {
        SweepKind::Epsilon => r.epsilon,
        SweepKind::Nodes | SweepKind::DensityFixed => r.n as f64,
    };
    let mut out = Vec::new();
    for (key, g) in groups {
        let sigma: Vec<(f64, f64)> = g.iter().filter_map(|r| r.mean_sigma.map(|s| (x(r), s))).collect();
        if !sigma.is_empty() {
            out.push(Series {
                label: format!("sigma {key}"),
                points: sigma,
            });
        }
        out.push(Series {
            label: format!("rho {key}"),
            points: g.iter().map(|r| (x(r), r.mean_rho)).collect(),
        });
    }
    out
}

/// Number of curves [`plotdata_text`] writes for these rows.
pub fn series_count(rows: &[SweepRow], kind: SweepKind) -> usize {
    series(rows, kind).len()
}

/// Gnuplot-style data blocks, one per curve, separated by two blank lines so
/// each is addressable with `index`.
pub fn plotdata_text(rows: &[SweepRow], kind: SweepKind) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("no rows to plot"));
    }
    let xname = match kind {
        SweepKind::Epsilon => "epsilon",
        SweepKind::Nodes | SweepKind::DensityFixed => "n",
    };
    let mut s = String::new();
    for (i, curve) in series(rows, kind).iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# {}", curve.label);
        let _ = writeln!(s, "# {xname} mean");
        for (x, y) in &curve.points {
            let _ = writeln!(s, "{x} {y}");
        }
    }
    Ok(s)
}

pub fn emit_plotdata(rows: &[SweepRow], kind: SweepKind, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = plotdata_text(rows, kind)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
