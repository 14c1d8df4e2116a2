use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rilir::config::{parse_perturbation, RunConfig};
use rilir::core::envsim::{EnvId, PerturbationKind, HORIZON};
use rilir::sweep::{self, Variant};
use rilir::{run, HarnessError, Result};

#[derive(Parser)]
#[command(name = "rilir", version, about = "Robust visual imitation learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect scripted expert demonstrations into a dataset file.
    GenExpert {
        #[arg(long)]
        env: EnvId,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        seed: u64,
        #[arg(long, default_value_t = HORIZON)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one run; any config key can be given as `--key value`.
    Train {
        /// Run directory name under the output root.
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        run: Option<PathBuf>,
        /// Defaults to the run's final checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write saliency maps of a checkpoint's encoder as PGM images.
    Saliency {
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Defaults to `<run>/saliency`.
        #[arg(long = "maps")]
        maps: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run {clean, perturbed} × {full, ablation} over several seeds.
    Sweep {
        #[arg(long)]
        task: Option<EnvId>,
        /// `random_mask`, `white_noise`, `background_shift` or a full spec
        /// such as `random_mask(4,2)`.
        #[arg(long)]
        perturb: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "no_representation")]
        ablation: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Aggregate finished runs. Plain directories form one group.
    Summarize {
        dirs: Vec<PathBuf>,
        /// `label=dir1,dir2,...`; repeatable.
        #[arg(long)]
        group: Vec<String>,
        /// Where summary.txt and summary.csv go.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Base config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides of config keys.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    overrides: Vec<String>,
}

impl ConfigArgs {
    /// Removes `--key value` from the overrides. Clap stops matching named
    /// flags once the first override appears, so later subcommand flags land
    /// here.
    fn pull(&mut self, key: &str) -> Option<String> {
        let flag = format!("--{key}");
        let prefix = format!("--{key}=");
        let i = self.overrides.iter().position(|a| *a == flag || a.starts_with(&prefix))?;
        let arg = self.overrides.remove(i);
        match arg.strip_prefix(&prefix) {
            Some(v) => Some(v.to_string()),
            None => (i < self.overrides.len()).then(|| self.overrides.remove(i)),
        }
    }

    fn pull_parsed<T: std::str::FromStr>(&mut self, key: &str, current: Option<T>) -> Result<Option<T>> {
        match self.pull(key) {
            Some(v) => v.parse().map(Some).map_err(|_| HarnessError::config(key, format!("`{v}` is invalid"))),
            None => Ok(current),
        }
    }
}

fn apply_overrides(cfg: &mut RunConfig, args: &[String]) -> Result<()> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let flag = arg.strip_prefix("--").ok_or_else(|| HarnessError::config(arg, "expected `--key value`"))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.replace('-', "_"), v.to_string()),
            None => {
                let key = flag.replace('-', "_");
                let value = it.next().ok_or_else(|| HarnessError::config(&key, "missing value"))?;
                (key, value.clone())
            }
        };
        cfg.set(&key, &value)?;
    }
    Ok(())
}

/// Defaults, then the config file, then `RILIR_OUT`, then flags.
fn build_config(base: Option<&Path>, args: &mut ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let file = args.pull_parsed("config", args.config.clone())?;
    for path in base.into_iter().chain(file.as_deref()) {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        cfg.apply_text(&text)?;
    }
    if let Some(out) = std::env::var_os("RILIR_OUT").filter(|v| !v.is_empty()) {
        cfg.out = PathBuf::from(out);
    }
    apply_overrides(&mut cfg, &args.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| HarnessError::config(key, "is required"))
}

fn perturbation_arg(s: &str) -> Result<PerturbationKind> {
    let spec = match s {
        "random_mask" => "random_mask(4,2)",
        "white_noise" => "white_noise(0.1)",
        "background_shift" => "background_shift(4,10)",
        other => other,
    };
    parse_perturbation(spec).map_err(|m| HarnessError::config("perturb", m))
}

fn print_eval(label: &str, e: &rilir::core::agent::EvalResult) {
    println!("{label}: mean {:.4} std {:.4} over {} episodes", e.mean, e.std, e.returns.len());
}

fn run_command(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenExpert { env, n, seed, horizon, out } => {
            let ds = run::gen_expert(env, n, horizon, seed, &out)?;
            println!("wrote {} ({} trajectories, expert return {:.4})", out.display(), ds.len(), ds.expert_return());
        }
        Command::Train { name, mut cfg } => {
            let name = cfg.pull_parsed("name", name)?;
            let cfg = build_config(None, &mut cfg)?;
            let name = name.unwrap_or_else(|| sweep::run_dir_name(&cfg, variant_of(&cfg)));
            let dir = cfg.out.join(name);
            let mut progress = |row: &rilir::core::agent::LogRow| {
                println!("step {:>7}  episode {:>5}  eval {:>8.3} ± {:.3}", row.step, row.episode, row.eval_return_mean, row.eval_return_std);
            };
            let report = run::train(&cfg, &dir, Some(&mut progress))?;
            println!("run {} done: final eval {:.4}, expert {:.4}", dir.display(), report.final_eval.mean, report.expert_return);
        }
        Command::Eval { run: dir, checkpoint, episodes, mut cfg } => {
            let dir = required(cfg.pull_parsed("run", dir)?, "run")?;
            let checkpoint = cfg.pull_parsed("checkpoint", checkpoint)?;
            let episodes = cfg.pull_parsed("episodes", episodes)?;
            let cfg = build_config(Some(&dir.join(run::CONFIG_FILE)), &mut cfg)?;
            let ckpt = checkpoint.unwrap_or_else(|| dir.join(run::FINAL_CHECKPOINT));
            let e = run::eval_checkpoint(&cfg, &ckpt, episodes.unwrap_or(cfg.train.eval_episodes))?;
            print_eval(&ckpt.display().to_string(), &e);
        }
        Command::Saliency { run: dir, checkpoint, count, maps, mut cfg } => {
            let dir = required(cfg.pull_parsed("run", dir)?, "run")?;
            let checkpoint = cfg.pull_parsed("checkpoint", checkpoint)?;
            let count = cfg.pull_parsed("count", Some(count))?.unwrap_or(count);
            let maps = cfg.pull_parsed("maps", maps)?;
            let cfg = build_config(Some(&dir.join(run::CONFIG_FILE)), &mut cfg)?;
            let ckpt = checkpoint.unwrap_or_else(|| dir.join(run::FINAL_CHECKPOINT));
            let out = maps.unwrap_or_else(|| dir.join("saliency"));
            let written = run::export_saliency(&cfg, &ckpt, count, &out)?;
            println!("wrote {} saliency maps to {}", written.len(), out.display());
        }
        Command::Sweep { task, perturb, ablation, seeds, jobs, mut cfg } => {
            let task: EnvId = required(cfg.pull_parsed("task", task)?, "task")?;
            let perturb = required(cfg.pull("perturb").or(perturb), "perturb")?;
            let ablation = cfg.pull("ablation").map_or(ablation, |v| v.split(',').map(str::to_string).collect());
            let seeds = match cfg.pull("seeds") {
                Some(v) => v.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<Vec<u64>, _>>()
                    .map_err(|_| HarnessError::config("seeds", format!("`{v}` is not a seed list")))?,
                None => seeds,
            };
            let jobs = cfg.pull_parsed("jobs", Some(jobs))?.unwrap_or(jobs);
            let mut base = build_config(None, &mut cfg)?;
            base.train.env = task;
            let kind = perturbation_arg(&perturb)?;
            let ablations = ablation.iter().map(|s| s.parse()).collect::<Result<Vec<Variant>>>()?;
            let cells = sweep::grid(&base, kind, &ablations, &seeds, &base.out);
            sweep::run_grid(&cells, &seeds, jobs, &|msg| eprintln!("{msg}"))?;
            let groups = cells
                .iter()
                .map(|c| sweep::summarize_group(&c.label, &c.dirs))
                .collect::<Result<Vec<_>>>()?;
            sweep::write_summary(&groups, &base.out)?;
            print!("{}", sweep::summary_text(&groups));
        }
        Command::Summarize { dirs, group, out } => {
            let mut groups = Vec::new();
            if !dirs.is_empty() {
                groups.push(sweep::summarize_group("runs", &dirs)?);
            }
            for g in &group {
                let (label, list) = g.split_once('=').ok_or_else(|| HarnessError::config("group", "expected `label=dir,dir`"))?;
                let dirs: Vec<PathBuf> = list.split(',').map(PathBuf::from).collect();
                groups.push(sweep::summarize_group(label, &dirs)?);
            }
            if groups.is_empty() {
                return Err(HarnessError::Aggregate("no runs given".into()));
            }
            if let Some(out) = out {
                sweep::write_summary(&groups, &out)?;
            }
            print!("{}", sweep::summary_text(&groups));
        }
    }
    Ok(())
}

fn variant_of(cfg: &RunConfig) -> Variant {
    let t = &cfg.train;
    if t.no_representation {
        Variant::NoRepresentation
    } else if t.no_discriminator {
        Variant::NoDiscriminator
    } else if t.reward_space == rilir::core::reward::RewardSpace::RawPixels {
        Variant::RawPixels
    } else {
        Variant::Full
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
