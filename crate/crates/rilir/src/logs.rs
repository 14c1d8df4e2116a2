//! CSV training logs. Missing values (NaN) are written as empty fields.

use std::fs::File;
use std::path::Path;

use rilir_core::agent::{EpisodeRecord, LogRow, TrainObserver};

use crate::error::{HarnessError, Result};

fn field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn parse_field(path: &Path, s: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| HarnessError::format(path, format!("`{s}` is not a number")))
}

/// Streams `log.csv` and `episodes.csv`, flushing after each row.
pub struct CsvLogger {
    log: csv::Writer<File>,
    episodes: csv::Writer<File>,
}

impl CsvLogger {
    pub fn create(dir: &Path) -> Result<Self> {
        let open = |name: &str| -> Result<csv::Writer<File>> {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            Ok(csv::Writer::from_writer(file))
        };
        let mut log = open("log.csv")?;
        log.write_record(LogRow::HEADER)?;
        log.flush().map_err(|e| HarnessError::io(dir.join("log.csv"), e))?;
        let mut episodes = open("episodes.csv")?;
        episodes.write_record(EpisodeRecord::HEADER)?;
        episodes.flush().map_err(|e| HarnessError::io(dir.join("episodes.csv"), e))?;
        Ok(Self { log, episodes })
    }

    pub fn write_row(&mut self, row: &LogRow) -> Result<()> {
        let mut rec = vec![row.step.to_string(), row.episode.to_string()];
        rec.extend(row.values().iter().map(|&v| field(v)));
        self.log.write_record(&rec)?;
        self.log.flush().map_err(|e| HarnessError::io("log.csv", e))
    }

    pub fn write_episode(&mut self, r: &EpisodeRecord) -> Result<()> {
        self.episodes.write_record([
            r.episode.to_string(),
            r.step.to_string(),
            field(r.r1),
            field(r.r2),
            field(r.ri),
            r.expert_index.to_string(),
            r.sinkhorn_iters.to_string(),
            field(r.diag_return),
        ])?;
        self.episodes.flush().map_err(|e| HarnessError::io("episodes.csv", e))
    }
}

impl TrainObserver for CsvLogger {
    fn on_episode(&mut self, record: &EpisodeRecord) -> rilir_core::Result<()> {
        self.write_episode(record).map_err(|e| rilir_core::Error::Contract(e.to_string()))
    }

    fn on_eval(&mut self, row: &LogRow) -> rilir_core::Result<()> {
        self.write_row(row).map_err(|e| rilir_core::Error::Contract(e.to_string()))
    }
}

/// Reads a `log.csv` back, checking the header.
pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::format(path, format!("{other:?}")),
    })?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != LogRow::HEADER {
        return Err(HarnessError::format(path, "unexpected log header"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let f = |i: usize| parse_field(path, rec.get(i).unwrap_or(""));
        let int = |i: usize| -> Result<u64> {
            rec.get(i).unwrap_or("").parse().map_err(|_| HarnessError::format(path, "bad step or episode column"))
        };
        rows.push(LogRow {
            step: int(0)?,
            episode: int(1)?,
            eval_return_mean: f(2)?,
            eval_return_std: f(3)?,
            l_inv: f(4)?,
            l_critic: f(5)?,
            l_actor: f(6)?,
            l_d: f(7)?,
            mean_r1: f(8)?,
            mean_r2: f(9)?,
            sinkhorn_iters_mean: f(10)?,
        });
    }
    Ok(rows)
}
