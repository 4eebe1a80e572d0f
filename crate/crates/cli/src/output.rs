//! CSV, JSON and gnuplot writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use viscobeam::Trajectory64;

use crate::config::{Format, OutputConfig};
use crate::error::{CliError, CliResult};

/// Target directory plus the format switches.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: PathBuf,
    pub cfg: OutputConfig,
}

#[derive(Serialize)]
struct EnergyRow {
    t: f64,
    #[serde(rename = "norm_H2")]
    norm_h2: f64,
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "Etilde")]
    etilde: f64,
    #[serde(rename = "Edelta")]
    edelta: Option<f64>,
    phi1: f64,
    phi2: f64,
    #[serde(rename = "D_mem")]
    d_mem: f64,
    #[serde(rename = "D_bnd")]
    d_bnd: f64,
}

pub const ENERGY_HEADER: &str = "t,norm_H2,E,Etilde,Edelta,phi1,phi2,D_mem,D_bnd";

impl Sink {
    pub fn new(dir: PathBuf, cfg: OutputConfig) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::write(&dir, e))?;
        Ok(Self { dir, cfg })
    }

    /// Same formats, different directory.
    pub fn child(&self, name: &str) -> CliResult<Self> {
        Self::new(self.dir.join(name), self.cfg.clone())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&self, name: &str, body: &str) -> CliResult<()> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| CliError::write(&p, e))
    }

    pub fn json<S: Serialize + ?Sized>(&self, name: &str, value: &S) -> CliResult<()> {
        if !self.cfg.wants(Format::Json) {
            return Ok(());
        }
        let mut body = serde_json::to_string_pretty(value).map_err(|e| CliError::Parse(e.to_string()))?;
        body.push('\n');
        self.text(name, &body)
    }

    /// Writes rows with a header; `rows` must match the header width.
    pub fn csv<R: Serialize>(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> CliResult<()> {
        if !self.cfg.wants(Format::Csv) {
            return Ok(());
        }
        let p = self.path(name);
        let err = |e: csv::Error| CliError::write(&p, std::io::Error::other(e));
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&p).map_err(err)?;
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.serialize(r).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::write(&p, e))
    }

    pub fn energy_csv(&self, name: &str, traj: &Trajectory64) -> CliResult<()> {
        let rows = traj.samples.iter().map(|s| {
            let r = &s.energy;
            EnergyRow {
                t: s.t,
                norm_h2: r.norm_h2,
                e: r.e,
                etilde: r.etilde,
                edelta: r.edelta,
                phi1: r.phi1,
                phi2: r.phi2,
                d_mem: r.d_mem,
                d_bnd: r.d_bnd,
            }
        });
        self.csv(name, &ENERGY_HEADER.split(',').collect::<Vec<_>>(), rows)
    }

    /// gnuplot script plotting columns of `csv` against the first.
    pub fn plot(&self, name: &str, csv: &str, title: &str, columns: &[(usize, &str)], log_y: bool) -> CliResult<()> {
        if !(self.cfg.plot_scripts && self.cfg.wants(Format::Csv)) {
            return Ok(());
        }
        let png = Path::new(name).with_extension("png");
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set key autotitle columnhead\n");
        s.push_str("set terminal pngcairo size 900,600\n");
        s.push_str(&format!("set output '{}'\n", png.display()));
        s.push_str(&format!("set title '{title}'\n"));
        if log_y {
            s.push_str("set logscale y\n");
        }
        let plots: Vec<String> = columns
            .iter()
            .map(|(c, label)| format!("'{csv}' using 1:{c} with lines title '{label}'"))
            .collect();
        s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
        self.text(name, &s)
    }
}
