//! CSV result tables with a `#` metadata preamble.
//!
//! Numbers are written with Rust's shortest round-trip formatting so a table
//! re-rendered from parsed values is byte-identical to the original.

use std::path::Path;

use crate::crb::{BoundTarget, CrbReport};
use crate::dsp::EstimateResult;
use crate::error::{Error, Result};
use crate::experiments::{BoundCheck, ContourField, MitigationReport, StaircaseResult, SweepResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Seed and config digest stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    /// `(column, unit)` pairs; unit may be empty.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `key: value` metadata lines.
    pub notes: Vec<(String, String)>,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns
                .iter()
                .map(|(c, u)| (c.to_string(), u.to_string()))
                .collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.notes.push((key.to_string(), value.into()));
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut out = format!("# rssbound {}\n", self.name);
        out.push_str(&format!("# config_sha256: {}\n", prov.config_hash));
        out.push_str(&format!("# seed: {}\n", prov.seed));
        let units: Vec<String> = self
            .columns
            .iter()
            .filter(|(_, u)| !u.is_empty())
            .map(|(c, u)| format!("{c}={u}"))
            .collect();
        if !units.is_empty() {
            out.push_str(&format!("# units: {}\n", units.join(" ")));
        }
        for (k, v) in &self.notes {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|(c, _)| c.as_str()))
            .expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&bytes).expect("utf-8 cells"));
        out
    }

    pub fn write(&self, path: &Path, prov: &Provenance) -> Result<()> {
        std::fs::write(path, self.render(prov)).map_err(|e| Error::io(path, e))
    }
}

/// Reads back the column names and raw cells of a rendered table.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| Error::Parse {
        path: "<table>".into(),
        message: e.to_string(),
    };
    let headers = r.headers().map_err(parse_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(parse_err)?.iter().map(String::from).collect());
    }
    Ok((headers, rows))
}

pub fn sweep_table(r: &SweepResult) -> CsvTable {
    let unit = r.axis.unit();
    let mut t = CsvTable::new(
        &format!("sweep {}", r.axis.name()),
        &[
            (r.axis.name(), unit),
            ("sigma_rate", "dB"),
            ("sigma_amplitude", "dB"),
            ("std_amplitude", "dB"),
            ("std_rate", "bpm"),
            ("unquantized_std_amplitude", "dB"),
            ("unquantized_std_rate", "bpm"),
            ("mc_rmse_rate", "bpm"),
            ("trials", ""),
        ],
    );
    for row in &r.rows {
        t.push(vec![
            row.axis_value.into(),
            row.sigma.into(),
            row.sigma_amplitude.into(),
            row.std_amplitude_db.into(),
            row.std_rate_bpm.into(),
            row.unquantized_std_amplitude_db.into(),
            row.unquantized_std_rate_bpm.into(),
            row.mc_rmse_bpm.into(),
            row.trials.into(),
        ]);
    }
    if let Some(f) = &r.fits {
        let poly = |p: &crate::experiments::PolyFit| {
            let c: Vec<String> = p.coefficients[..=p.degree].iter().map(|v| v.to_string()).collect();
            format!("coefficients=[{}] r2={}", c.join(" "), p.r_squared)
        };
        t.note("fit_rate_linear", poly(&f.frequency_linear));
        t.note("fit_amplitude_quadratic", poly(&f.amplitude_quadratic));
        t.note(
            "sigma_opt_slope",
            format!("{} max_deviation={}", f.sigma_slope, f.sigma_max_deviation),
        );
    }
    t
}

pub fn contour_field_table(f: &ContourField) -> CsvTable {
    let mut t = CsvTable::new(
        "contour field",
        &[
            ("sample_rate", "Hz"),
            ("step", "dB"),
            ("min_std_rate", "bpm"),
            ("sigma_opt_rate", "dB"),
            ("min_std_amplitude", "dB"),
            ("sigma_opt_amplitude", "dB"),
        ],
    );
    for (i, &fs) in f.sample_rates.iter().enumerate() {
        for (j, &d) in f.steps.iter().enumerate() {
            t.push(vec![
                fs.into(),
                d.into(),
                f.rate_std_bpm[i][j].into(),
                f.sigma_opt_rate[i][j].into(),
                f.amplitude_std_db[i][j].into(),
                f.sigma_opt_amplitude[i][j].into(),
            ]);
        }
    }
    t
}

pub fn contour_lines_table(f: &ContourField) -> CsvTable {
    let mut t = CsvTable::new(
        "contour lines",
        &[
            ("quantity", ""),
            ("level", ""),
            ("line", ""),
            ("point", ""),
            ("sample_rate", "Hz"),
            ("step", "dB"),
        ],
    );
    t.note("levels", "rate in bpm, amplitude in dB");
    for c in &f.contours {
        for (li, line) in c.polylines.iter().enumerate() {
            for (pi, p) in line.iter().enumerate() {
                t.push(vec![
                    c.quantity.as_str().into(),
                    c.level.into(),
                    li.into(),
                    pi.into(),
                    p[0].into(),
                    p[1].into(),
                ]);
            }
        }
    }
    t
}

pub fn staircase_table(r: &StaircaseResult) -> CsvTable {
    let mut t = CsvTable::new(
        "staircase",
        &[
            ("level", "dB"),
            ("effective_sigma", "dB"),
            ("windows", ""),
            ("degenerate_windows", ""),
            ("rmse_rate", "bpm"),
        ],
    );
    t.note("truth_rate_bpm", r.truth_bpm.to_string());
    for s in &r.segments {
        t.push(vec![
            s.level.into(),
            s.effective_sigma.into(),
            s.windows.into(),
            s.degenerate_windows.into(),
            s.rmse_bpm.into(),
        ]);
    }
    t
}

pub fn mitigation_table(r: &MitigationReport) -> CsvTable {
    let mut t = CsvTable::new(
        &format!("mitigation {}", r.policy.kind()),
        &[
            ("sample_rate", "Hz"),
            ("step", "dB"),
            ("sigma_opt_rate", "dB"),
            ("min_std_rate", "bpm"),
            ("sigma_opt_amplitude", "dB"),
            ("min_std_amplitude", "dB"),
            ("bounded", ""),
            ("attacker_best", ""),
        ],
    );
    for (i, p) in r.points.iter().enumerate() {
        t.push(vec![
            p.sample_rate.into(),
            p.step.into(),
            p.sigma_opt_rate.into(),
            p.std_rate_bpm.into(),
            p.sigma_opt_amplitude.into(),
            p.std_amplitude_db.into(),
            p.bounded.into(),
            (i == r.best_point).into(),
        ]);
    }
    t.note("attacker_min_std_rate_bpm", r.attacker_min_std_bpm.to_string());
    t.note("attacker_min_std_amplitude_db", r.attacker_min_std_db.to_string());
    if let Some(s) = &r.reselection {
        t.note(
            "reselection",
            format!(
                "selections={} min_offset={} mean_offset={} guaranteed_offset={}",
                s.selections, s.min_offset, s.mean_offset, s.guaranteed_offset
            ),
        );
    }
    if let (Some(a), Some(b)) = (r.static_std_bpm, r.restricted_std_bpm) {
        t.note("static_std_rate_bpm", a.to_string());
        t.note("restricted_std_rate_bpm", b.to_string());
    }
    for n in &r.notes {
        t.note("note", n.clone());
    }
    t
}

pub fn crb_table(r: &CrbReport, sigma: f64) -> CsvTable {
    let mut t = CsvTable::new(
        "crb",
        &[
            ("noise_sigma", "dB"),
            ("crb_amplitude", "dB^2"),
            ("crb_frequency", "(rad/s)^2"),
            ("std_amplitude", "dB"),
            ("std_rate", "bpm"),
            ("bounded", ""),
            ("unbounded_grid_points", ""),
        ],
    );
    t.push(vec![
        sigma.into(),
        r.crb_amplitude.into(),
        r.crb_frequency.into(),
        r.std_amplitude_db.into(),
        r.std_rate_bpm.into(),
        r.bounded.into(),
        r.averaging
            .as_ref()
            .map_or(Cell::Empty, |a| a.unbounded_points.into()),
    ]);
    t
}

pub fn bound_check_table(c: &BoundCheck) -> CsvTable {
    let unit = match c.target {
        BoundTarget::Amplitude => "dB^2",
        BoundTarget::Frequency => "(rad/s)^2",
    };
    let mut t = CsvTable::new(
        "bound check",
        &[
            ("target", ""),
            ("empirical_variance", unit),
            ("variance_se", unit),
            ("bound", unit),
            ("ratio", ""),
            ("trials", ""),
            ("degenerate_trials", ""),
            ("inconclusive", ""),
            ("pass", ""),
        ],
    );
    let target = match c.target {
        BoundTarget::Amplitude => "amplitude",
        BoundTarget::Frequency => "frequency",
    };
    t.push(vec![
        target.into(),
        c.empirical_variance.into(),
        c.variance_se.into(),
        c.bound.into(),
        c.ratio.into(),
        c.trials.into(),
        c.degenerate_trials.into(),
        c.inconclusive.into(),
        c.pass.into(),
    ]);
    t
}

pub fn estimate_table(r: &EstimateResult) -> CsvTable {
    let mut t = CsvTable::new(
        "estimate",
        &[
            ("rate", "Hz"),
            ("rate_bpm", "bpm"),
            ("amplitude", "dB"),
            ("psd_peak", ""),
            ("degenerate", ""),
        ],
    );
    t.push(vec![
        r.f_hat.into(),
        r.rate_bpm.into(),
        r.amplitude_hat.into(),
        r.psd_peak_value.into(),
        r.degenerate.into(),
    ]);
    t
}
