//! The clean/perturbed × full/ablation grid and cross-seed summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rilir_core::envsim::PerturbationKind;
use rilir_core::reward::RewardSpace;

use crate::config::{print_perturbation, RunConfig, KEYS};
use crate::error::{HarnessError, Result};
use crate::logs::read_log;
use crate::run::{self, CONFIG_FILE, INFO_FILE, LOG_FILE};

/// The method a sweep compares the full agent against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    NoRepresentation,
    NoDiscriminator,
    /// Rewards computed on raw pixels instead of target embeddings.
    RawPixels,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoRepresentation => "no_representation",
            Variant::NoDiscriminator => "no_discriminator",
            Variant::RawPixels => "raw_pixels",
        }
    }

    pub fn apply(self, cfg: &mut RunConfig) {
        match self {
            Variant::Full => {}
            Variant::NoRepresentation => cfg.train.no_representation = true,
            Variant::NoDiscriminator => cfg.train.no_discriminator = true,
            Variant::RawPixels => cfg.train.reward_space = RewardSpace::RawPixels,
        }
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "no_representation" => Ok(Variant::NoRepresentation),
            "no_discriminator" => Ok(Variant::NoDiscriminator),
            "raw_pixels" => Ok(Variant::RawPixels),
            _ => Err(HarnessError::config(
                "ablation",
                format!("`{s}` is not one of no_representation, no_discriminator, raw_pixels"),
            )),
        }
    }
}

/// One cell of the grid: a labelled config run over several seeds.
#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub config: RunConfig,
    pub dirs: Vec<PathBuf>,
}

pub fn run_dir_name(cfg: &RunConfig, variant: Variant) -> String {
    let t = &cfg.train;
    let perturb = match t.perturbation.kind {
        PerturbationKind::None => "clean".to_string(),
        k => print_perturbation(&k).replace(['(', ')'], "").replace(',', "x"),
    };
    format!("{}-{}-{}-seed{}", t.env, perturb, variant.as_str(), t.seed)
}

/// Builds the 2×2 grid {clean, `perturbation`} × {full, `ablation`} over
/// `seeds`, with run directories under `root`.
pub fn grid(base: &RunConfig, perturbation: PerturbationKind, ablations: &[Variant], seeds: &[u64], root: &Path) -> Vec<Cell> {
    let mut cells = Vec::new();
    for kind in [PerturbationKind::None, perturbation] {
        for &variant in std::iter::once(&Variant::Full).chain(ablations) {
            let mut cfg = base.clone();
            cfg.train.perturbation.kind = kind;
            variant.apply(&mut cfg);
            let mut dirs = Vec::new();
            for &seed in seeds {
                let mut c = cfg.clone();
                c.train.seed = seed;
                dirs.push(root.join(run_dir_name(&c, variant)));
            }
            let perturb = if matches!(kind, PerturbationKind::None) { "clean".into() } else { print_perturbation(&kind) };
            cells.push(Cell { label: format!("{perturb} {}", variant.as_str()), config: cfg, dirs });
        }
    }
    cells
}

/// Runs every (cell, seed) pair using up to `jobs` worker threads. Each run
/// is sequential on its own.
pub fn run_grid(cells: &[Cell], seeds: &[u64], jobs: usize, log: &(dyn Fn(&str) + Sync)) -> Result<()> {
    let mut work = Vec::new();
    for cell in cells {
        for (dir, &seed) in cell.dirs.iter().zip(seeds) {
            let mut cfg = cell.config.clone();
            cfg.train.seed = seed;
            work.push((cfg, dir.clone()));
        }
    }
    let queue = Mutex::new(work.into_iter());
    let first_error = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1) {
            s.spawn(|| loop {
                let Some((cfg, dir)) = queue.lock().unwrap().next() else { break };
                log(&format!("start {}", dir.display()));
                match run::train(&cfg, &dir, None) {
                    Ok(r) => log(&format!("done  {} final {:.3}", dir.display(), r.final_eval.mean)),
                    Err(e) => {
                        log(&format!("fail  {}: {e}", dir.display()));
                        first_error.lock().unwrap().get_or_insert(e);
                    }
                }
            });
        }
    });
    match first_error.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// A completed run as read back from its directory.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub final_return: f64,
    pub auc: f64,
    pub expert_return: f64,
}

fn info_value(dir: &Path, key: &str) -> Result<f64> {
    let path = dir.join(INFO_FILE);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .and_then(|(_, v)| v.trim().parse().ok())
        .ok_or_else(|| HarnessError::format(&path, format!("missing `{key}`")))
}

/// Mean of the trapezoid-integrated learning curve over its step span; the
/// single value itself when there is one row.
pub fn curve_auc(steps: &[f64], values: &[f64]) -> f64 {
    if steps.len() == 1 {
        return values[0];
    }
    let span = steps[steps.len() - 1] - steps[0];
    let area: f64 = steps.windows(2).zip(values.windows(2)).map(|(s, v)| (s[1] - s[0]) * (v[0] + v[1]) / 2.0).sum();
    area / span
}

/// Final return and AUC of a finished run. The curve starts at the post-BC
/// evaluation (step 0) recorded in the run info.
pub fn read_run(dir: &Path) -> Result<RunResult> {
    let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let rows = read_log(&dir.join(LOG_FILE))?;
    let mut steps = vec![0.0];
    let mut values = vec![info_value(dir, "bc_eval_mean")?];
    for r in rows.iter().filter(|r| !r.eval_return_mean.is_nan()) {
        steps.push(r.step as f64);
        values.push(r.eval_return_mean);
    }
    Ok(RunResult {
        dir: dir.to_path_buf(),
        final_return: values[values.len() - 1],
        auc: curve_auc(&steps, &values),
        expert_return: info_value(dir, "expert_return")?,
        config,
    })
}

/// Config text with the keys that may differ between seeds of one group
/// removed.
fn group_key(cfg: &RunConfig) -> String {
    KEYS.iter()
        .filter(|k| !matches!(**k, "seed" | "out"))
        .map(|k| format!("{k}={}", cfg.get(k).unwrap_or_default()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Cross-seed statistics of one group of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub label: String,
    pub runs: usize,
    pub mean_final: f64,
    /// Sample standard deviation of the finals (0 for one run).
    pub std_final: f64,
    pub fraction_of_expert: f64,
    pub mean_auc: f64,
    pub expert_return: f64,
}

pub fn summarize_group(label: &str, dirs: &[PathBuf]) -> Result<GroupSummary> {
    if dirs.is_empty() {
        return Err(HarnessError::Aggregate(format!("group `{label}` has no runs")));
    }
    let runs = dirs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>>>()?;
    let key = group_key(&runs[0].config);
    for r in &runs[1..] {
        if group_key(&r.config) != key {
            let diff = KEYS
                .iter()
                .find(|k| !matches!(**k, "seed" | "out") && r.config.get(k) != runs[0].config.get(k))
                .unwrap_or(&"config");
            return Err(HarnessError::Aggregate(format!(
                "group `{label}`: {} and {} differ in `{diff}`",
                runs[0].dir.display(),
                r.dir.display()
            )));
        }
    }
    let n = runs.len() as f64;
    let finals: Vec<f64> = runs.iter().map(|r| r.final_return).collect();
    let mean_final = finals.iter().sum::<f64>() / n;
    let std_final = if runs.len() < 2 {
        0.0
    } else {
        (finals.iter().map(|f| (f - mean_final).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let expert_return = runs.iter().map(|r| r.expert_return).sum::<f64>() / n;
    Ok(GroupSummary {
        label: label.to_string(),
        runs: runs.len(),
        mean_final,
        std_final,
        fraction_of_expert: mean_final / expert_return,
        mean_auc: runs.iter().map(|r| r.auc).sum::<f64>() / n,
        expert_return,
    })
}

pub const SUMMARY_HEADER: [&str; 7] =
    ["group", "runs", "mean_final_return", "std_final_return", "fraction_of_expert", "mean_auc", "expert_return"];

pub fn summary_text(groups: &[GroupSummary]) -> String {
    let width = groups.iter().map(|g| g.label.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  runs  final_mean  final_std  frac_expert     auc  expert\n", "group");
    for g in groups {
        let _ = writeln!(
            out,
            "{:<width$}  {:>4}  {:>10.3}  {:>9.3}  {:>11.3}  {:>6.3}  {:>6.3}",
            g.label, g.runs, g.mean_final, g.std_final, g.fraction_of_expert, g.mean_auc, g.expert_return
        );
    }
    out
}

/// Writes `summary.txt` and `summary.csv` into `dir`.
pub fn write_summary(groups: &[GroupSummary], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let txt = dir.join("summary.txt");
    fs::write(&txt, summary_text(groups)).map_err(|e| HarnessError::io(&txt, e))?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    for g in groups {
        w.write_record([
            g.label.clone(),
            g.runs.to_string(),
            g.mean_final.to_string(),
            g.std_final.to_string(),
            g.fraction_of_expert.to_string(),
            g.mean_auc.to_string(),
            g.expert_return.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(dir.join("summary.csv"), e))
}
