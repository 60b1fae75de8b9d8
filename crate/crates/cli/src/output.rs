//! Result files: CSV or JSON with embedded provenance, plus matplotlib
//! scripts that only read the CSV back.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// One CSV cell. Numbers always print with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // drop the sign of negative zero so reruns diff cleanly
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match c {
                        Cell::Num(x) => serde_json::json!(x),
                        Cell::Int(i) => serde_json::json!(i),
                        Cell::Text(s) => serde_json::json!(s),
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({ "columns": self.columns, "rows": rows })
    }
}

/// How the plot script should draw a table.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotStyle {
    /// Stick spectrum of Franck-Condon weights.
    Bars,
    /// Analytic line over a shaded numeric profile.
    Overlay { x_label: String },
    /// Several columns against the first one.
    Lines { x_label: String },
    /// `|T|²` against the laser frequency, one line per source.
    Transmission,
    /// Matrix CSV; profiles are drawn for the listed rows.
    Heatmap { y_label: String, profiles: Vec<f64> },
    None,
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub stem: String,
    pub table: Table,
    /// JSON payload; the table itself when `None`.
    pub payload: Option<serde_json::Value>,
    pub plot: PlotStyle,
}

impl Artifact {
    pub fn new(stem: &str, table: Table, plot: PlotStyle) -> Self {
        Self {
            stem: stem.into(),
            table,
            payload: None,
            plot,
        }
    }

    pub fn with_payload(mut self, payload: impl Serialize) -> Result<Self, CliError> {
        let v = serde_json::to_value(payload)
            .map_err(|e| CliError::config(format!("cannot serialize payload: {e}")))?;
        self.payload = Some(v);
        Ok(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub subcommand: String,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub config_sha256: String,
    /// The physics part of the resolved config; rerunning it reproduces the file.
    pub config: serde_json::Value,
    pub truncation: BTreeMap<String, usize>,
    pub notes: Vec<String>,
    pub wall_time_s: f64,
}

impl Provenance {
    pub fn new(subcommand: &str, cfg: &RunConfig) -> Self {
        let mut physics = serde_json::to_value(cfg).expect("config serializes");
        if let Some(map) = physics.as_object_mut() {
            map.remove("output");
        }
        let canonical = serde_json::to_string(&physics).expect("value serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        let mut versions = BTreeMap::new();
        versions.insert("vibronica-cli", env!("CARGO_PKG_VERSION"));
        versions.insert("vibronica", vibronica::VERSION);
        Self {
            subcommand: subcommand.into(),
            versions,
            config_sha256: format!("{hash:x}"),
            config: physics,
            truncation: BTreeMap::new(),
            notes: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    fn csv_header(&self) -> String {
        let versions: Vec<String> = self.versions.iter().map(|(k, v)| format!("{k} {v}")).collect();
        let trunc: Vec<String> = self.truncation.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mut h = format!(
            "# vibronica {}\n# versions: {}\n# config_sha256: {}\n# config: {}\n# truncation: {}\n",
            self.subcommand,
            versions.join(", "),
            self.config_sha256,
            serde_json::to_string(&self.config).expect("value serializes"),
            if trunc.is_empty() { "none".into() } else { trunc.join(", ") },
        );
        for n in &self.notes {
            h.push_str(&format!("# note: {n}\n"));
        }
        h.push_str(&format!("# wall_time_s: {:.3}\n", self.wall_time_s));
        h
    }
}

pub fn render_csv(table: &Table, prov: &Provenance) -> Result<String, CliError> {
    let mut buf = prov.csv_header().into_bytes();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
        w.write_record(&table.columns).map_err(io)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.flush()?;
    }
    String::from_utf8(buf).map_err(|e| CliError::Io(std::io::Error::other(e)))
}

pub fn render_json(artifact: &Artifact, prov: &Provenance) -> String {
    let payload = artifact.payload.clone().unwrap_or_else(|| artifact.table.to_json());
    let doc = serde_json::json!({
        "provenance": prov,
        "table": artifact.table.to_json(),
        "payload": payload,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("value serializes");
    s.push('\n');
    s
}

/// Writes every artifact in every format; returns the paths written.
pub fn write_all(
    dir: &Path,
    artifacts: &[Artifact],
    prov: &Provenance,
    formats: &[Format],
    plot_scripts: bool,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for a in artifacts {
        for f in formats {
            let (path, text) = match f {
                Format::Csv => (dir.join(format!("{}.csv", a.stem)), render_csv(&a.table, prov)?),
                Format::Json => (dir.join(format!("{}.json", a.stem)), render_json(a, prov)),
            };
            fs::write(&path, text)?;
            written.push(path);
        }
        if plot_scripts && formats.contains(&Format::Csv) {
            if let Some(script) = plot_script(a, &format!("{}.csv", a.stem)) {
                let path = dir.join(format!("plot_{}.py", a.stem));
                fs::write(&path, script)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

const SCRIPT_HEAD: &str = r##"# Renders the CSV next to this script; no computation happens here.
import csv
import os
import sys

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name)) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    return rows[0], rows[1:]


"##;

const SCRIPT_TAIL: &str = r#"
fig.tight_layout()
out = os.path.join(HERE, STEM + ".png")
fig.savefig(out, dpi=150)
if "--show" in sys.argv:
    plt.show()
print(out)
"#;

pub fn plot_script(a: &Artifact, csv_name: &str) -> Option<String> {
    let body = match &a.plot {
        PlotStyle::None => return None,
        PlotStyle::Bars => r#"header, rows = load(CSV)
m = [int(r[0]) for r in rows]
fig, axes = plt.subplots(1, 2, figsize=(8, 3), sharey=True)
for ax, col, colour in zip(axes, (1, 2), ("tab:red", "tab:blue")):
    ax.bar(m, [float(r[col]) for r in rows], color=colour, width=0.6)
    ax.set_xlabel("m")
    ax.set_title(header[col])
axes[0].set_ylabel("Franck-Condon weight")
"#
        .to_string(),
        PlotStyle::Overlay { x_label } => format!(
            r#"header, rows = load(CSV)
x = [float(r[0]) for r in rows]
ana = [float(r[1]) for r in rows]
num = [float(r[2]) for r in rows]
fig, ax = plt.subplots(figsize=(6, 3.5))
ax.fill_between(x, num, color="tab:blue", alpha=0.3, label=header[2])
ax.plot(x, ana, color="k", lw=1, label=header[1])
ax.set_xlabel("{x_label}")
ax.set_ylabel(STEM)
ax.legend()
"#
        ),
        PlotStyle::Lines { x_label } => format!(
            r#"header, rows = load(CSV)
x = [float(r[0]) for r in rows]
fig, ax = plt.subplots(figsize=(6, 3.5))
for k in range(1, len(header)):
    if header[k] == "abs_diff":
        continue
    ax.plot(x, [float(r[k]) for r in rows], label=header[k])
ax.set_xlabel("{x_label}")
ax.legend()
"#
        ),
        PlotStyle::Transmission => r#"header, rows = load(CSV)
fig, ax = plt.subplots(figsize=(6, 3.5))
for source, style in (("analytic", "-"), ("numeric", "o")):
    sel = [r for r in rows if r[4] == source]
    if sel:
        ax.plot([float(r[0]) for r in sel], [float(r[3]) for r in sel], style,
                ms=3, label=source)
ax.set_xlabel("laser frequency")
ax.set_ylabel("|T|^2")
ax.legend()
"#
        .to_string(),
        PlotStyle::Heatmap { y_label, profiles } => {
            let list: Vec<String> = profiles.iter().map(|p| format!("{p:?}")).collect();
            format!(
                r#"header, rows = load(CSV)
x = [float(h) for h in header[1:]]
y = [float(r[0]) for r in rows]
z = [[float(v) for v in r[1:]] for r in rows]
fig, (ax, bx) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
mesh = ax.pcolormesh(x, y, z, shading="nearest", cmap="viridis")
# colorbar in an inset so both panels keep the same width
fig.colorbar(mesh, cax=ax.inset_axes([1.01, 0.0, 0.02, 1.0]))
ax.set_ylabel("{y_label}")
for target in [{}]:
    k = min(range(len(y)), key=lambda i: abs(y[i] - target))
    ax.axhline(y[k], color="w", lw=0.8)
    bx.plot(x, z[k], label="{y_label} = %g" % y[k])
bx.set_xlabel("laser frequency")
bx.legend()
"#,
                list.join(", ")
            )
        }
    };
    Some(format!(
        "{SCRIPT_HEAD}CSV = {csv_name:?}\nSTEM = {:?}\n\n{body}{SCRIPT_TAIL}",
        a.stem
    ))
}
