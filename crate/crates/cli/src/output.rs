//! Result rows, aligned text rendering and CSV files.
//!
//! CSV columns, in order: `method, quantity, model, payoff, sigma_s, sigma1,
//! sigma2, mean, std_error, ci_lo, ci_hi, n_paths, seconds, seed`. Parameters
//! that do not apply to the model are empty cells. Reals are written in
//! scientific notation with 17 significant digits, so parsing a cell gives
//! back the exact value.

use std::path::Path;

use crate::tables::{quantity_name, Method, Sweep, TableRun};

pub const CSV_HEADER: [&str; 14] = [
    "method",
    "quantity",
    "model",
    "payoff",
    "sigma_s",
    "sigma1",
    "sigma2",
    "mean",
    "std_error",
    "ci_lo",
    "ci_hi",
    "n_paths",
    "seconds",
    "seed",
];

/// One estimate with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub method: String,
    pub quantity: String,
    pub model: String,
    pub payoff: String,
    pub sigma_s: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_paths: u64,
    pub seconds: f64,
    pub seed: u64,
}

/// Exact decimal form: 17 significant digits.
pub fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

fn exact_opt(v: Option<f64>) -> String {
    v.map(exact).unwrap_or_default()
}

/// Six significant digits, without exponent for moderate magnitudes.
pub fn short(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let e = v.abs().log10().floor() as i32;
    if !(-5..=6).contains(&e) {
        return format!("{v:.5e}");
    }
    let digits = (5 - e).max(0) as usize;
    let s = format!("{v:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn short_opt(v: Option<f64>) -> String {
    v.map(short).unwrap_or_else(|| "-".into())
}

fn ci(lo: f64, hi: f64) -> String {
    format!("[{}, {}]", short(lo), short(hi))
}

impl Row {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.quantity.clone(),
            self.model.clone(),
            self.payoff.clone(),
            exact_opt(self.sigma_s),
            exact_opt(self.sigma1),
            exact_opt(self.sigma2),
            exact(self.mean),
            exact(self.std_error),
            exact(self.ci_lo),
            exact(self.ci_hi),
            self.n_paths.to_string(),
            exact(self.seconds),
            self.seed.to_string(),
        ]
    }

    pub fn from_csv_record(rec: &csv::StringRecord) -> Result<Row, String> {
        if rec.len() != CSV_HEADER.len() {
            return Err(format!(
                "expected {} fields, got {}",
                CSV_HEADER.len(),
                rec.len()
            ));
        }
        let real = |i: usize| -> Result<f64, String> {
            rec[i]
                .parse()
                .map_err(|_| format!("{}: bad number {:?}", CSV_HEADER[i], &rec[i]))
        };
        let opt = |i: usize| -> Result<Option<f64>, String> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                real(i).map(Some)
            }
        };
        let int = |i: usize| -> Result<u64, String> {
            rec[i]
                .parse()
                .map_err(|_| format!("{}: bad integer {:?}", CSV_HEADER[i], &rec[i]))
        };
        Ok(Row {
            method: rec[0].to_string(),
            quantity: rec[1].to_string(),
            model: rec[2].to_string(),
            payoff: rec[3].to_string(),
            sigma_s: opt(4)?,
            sigma1: opt(5)?,
            sigma2: opt(6)?,
            mean: real(7)?,
            std_error: real(8)?,
            ci_lo: real(9)?,
            ci_hi: real(10)?,
            n_paths: int(11)?,
            seconds: real(12)?,
            seed: int(13)?,
        })
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>, String> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = rd.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    rd.records()
        .map(|rec| {
            rec.map_err(|e| e.to_string())
                .and_then(|r| Row::from_csv_record(&r))
        })
        .collect()
}

/// Left-aligned columns separated by two spaces.
pub fn render_aligned(header: &[String], body: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&width).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(cell);
            } else {
                s.push_str(&format!("{cell:<w$}  "));
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    for row in body {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// Long format: one line per estimate.
pub fn render_rows(rows: &[Row]) -> String {
    let header: Vec<String> = [
        "method",
        "quantity",
        "model",
        "payoff",
        "sigma_s",
        "sigma1",
        "sigma2",
        "mean",
        "std_error",
        "95% CI",
        "n_paths",
        "seconds",
        "seed",
    ]
    .map(String::from)
    .to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.quantity.clone(),
                r.model.clone(),
                r.payoff.clone(),
                short_opt(r.sigma_s),
                short_opt(r.sigma1),
                short_opt(r.sigma2),
                short(r.mean),
                short(r.std_error),
                ci(r.ci_lo, r.ci_hi),
                r.n_paths.to_string(),
                format!("{:.2}", r.seconds),
                r.seed.to_string(),
            ]
        })
        .collect();
    render_aligned(&header, &body)
}

/// Wide format: one line per sweep point, one column group per method.
pub fn render_table(t: &TableRun) -> String {
    let spec = &t.spec;
    let q = quantity_name(spec.quantity);
    let mut header: Vec<String> = match spec.sweep {
        Sweep::SigmaS(_) => vec!["sigma_S".into()],
        Sweep::Pairs(_) => vec!["sigma1".into(), "sigma2".into()],
    };
    for &m in spec.methods {
        if m == Method::BsFormula {
            header.push(m.title().into());
        } else {
            header.push(format!("{} {q}", m.title()));
            header.push(format!("{} 95% CI", m.title()));
        }
    }
    let body: Vec<Vec<String>> = t
        .rows
        .chunks(spec.methods.len())
        .map(|point| {
            let first = &point[0];
            let mut line = match spec.sweep {
                Sweep::SigmaS(_) => vec![short_opt(first.sigma_s)],
                Sweep::Pairs(_) => vec![short_opt(first.sigma1), short_opt(first.sigma2)],
            };
            for (r, &m) in point.iter().zip(spec.methods) {
                line.push(short(r.mean));
                if m != Method::BsFormula {
                    line.push(ci(r.ci_lo, r.ci_hi));
                }
            }
            line
        })
        .collect();
    let mut out = format!("Table {}: {} ({q})\n", spec.id, spec.caption);
    out.push_str(&render_aligned(&header, &body));
    out
}
