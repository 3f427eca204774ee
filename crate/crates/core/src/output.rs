//! Artifact writers. Every file written through [`ArtifactDir`] is listed in
//! `MANIFEST.txt` with its SHA-256 digest; `run.log` is kept out of it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::spaces::EnergySnapshot;
use crate::wavesolver::SpaceTimeField;

pub const MANIFEST: &str = "MANIFEST.txt";
pub const RUN_LOG: &str = "run.log";

/// Floats are written in shortest round-trip exponent form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV text from a header and rows of pre-formatted cells.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn numeric_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<Vec<String>> {
    rows.into_iter().map(|r| r.iter().map(|&x| fmt_f64(x)).collect()).collect()
}

pub fn energy_csv(trace: &[EnergySnapshot]) -> String {
    csv_text(
        &["t", "kinetic", "potential", "total"],
        trace
            .iter()
            .map(|e| vec![fmt_f64(e.time), fmt_f64(e.kinetic), fmt_f64(e.potential), fmt_f64(e.total)]),
    )
}

/// Snapshot dump: `#` header lines with the grid and time stepping, then one
/// row `step,t,u_0,...,u_{n-1}` for every `every`-th stored snapshot and the
/// last one (nodes in grid order).
pub fn trajectory_csv(grid: &Grid, traj: &SpaceTimeField, every: usize) -> String {
    let every = every.max(1);
    let d = grid.domain();
    let bounds: Vec<String> = d.bounds().iter().map(|(a, b)| format!("{},{}", fmt_f64(*a), fmt_f64(*b))).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# dim={} bounds={} alpha={} cells_per_axis={} nodes={}",
        d.dim(),
        bounds.join(";"),
        fmt_f64(d.alpha()),
        grid.cells_per_axis(),
        grid.len()
    );
    let _ = writeln!(
        out,
        "# dt={} stride={} n_steps={} t_final={}",
        fmt_f64(traj.dt()),
        traj.stride() * every,
        traj.n_steps(),
        fmt_f64(traj.t_final())
    );
    out.push_str("step,t");
    for i in 0..grid.len() {
        let _ = write!(out, ",u{i}");
    }
    out.push('\n');
    for j in (0..traj.len()).filter(|&j| j % every == 0 || j + 1 == traj.len()) {
        let _ = write!(out, "{},{}", traj.steps()[j], fmt_f64(traj.time(j)));
        for &v in traj.snapshot(j) {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records what it writes.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    entries: Vec<(String, String)>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        if name == MANIFEST || name == RUN_LOG {
            return Err(Error::validation("output", format!("{name} is reserved")));
        }
        fs::write(self.root.join(name), contents)?;
        let digest = sha256_hex(contents);
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(e) => e.1 = digest,
            None => self.entries.push((name.to_string(), digest)),
        }
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, contents: &str) -> Result<()> {
        self.write(name, contents.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        text.push('\n');
        self.write_str(name, &text)
    }

    pub fn manifest_text(&self) -> String {
        let mut entries = self.entries.clone();
        entries.sort();
        entries.iter().map(|(n, d)| format!("{n}\t{d}\n")).collect()
    }

    /// Writes `MANIFEST.txt` and returns its text.
    pub fn finish(self) -> Result<String> {
        let text = self.manifest_text();
        fs::write(self.root.join(MANIFEST), &text)?;
        Ok(text)
    }
}
