//! Single-run operations: dataset generation, training, evaluation and
//! saliency export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rilir_core::agent::{eval_seeds, evaluate, ActionMode, ActorCritic, EvalResult, LogRow, Trainer};
use rilir_core::envsim::{collect_expert, EnvId, ExpertDataset, PixelEnv, FRAME_H, FRAME_W};
use rilir_core::repr::saliency;
use rilir_core::rng::{SeedTree, Stream};

use crate::codec;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::logs::CsvLogger;
use crate::pgm;

pub const CONFIG_FILE: &str = "config.txt";
pub const LOG_FILE: &str = "log.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const INIT_CHECKPOINT: &str = "checkpoint_init.bin";
pub const FINAL_CHECKPOINT: &str = "checkpoint_final.bin";
pub const INFO_FILE: &str = "run_info.txt";
pub const FAILURE_FILE: &str = "failure.txt";

/// Expert baseline written next to a generated dataset.
pub fn expert_info_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.file_name().unwrap_or_default().to_os_string();
    name.push(".expert.txt");
    dataset.with_file_name(name)
}

pub fn gen_expert(env: EnvId, n: usize, horizon: usize, seed: u64, out: &Path) -> Result<ExpertDataset> {
    if n == 0 {
        return Err(HarnessError::config("n", "must be >= 1"));
    }
    let ds = collect_expert(env, n, horizon, seed)?;
    codec::save_dataset(&ds, out)?;
    let info = expert_info_path(out);
    let text = format!("env = {env}\nn = {n}\nhorizon = {horizon}\nseed = {seed}\nexpert_return = {}\n", ds.expert_return());
    fs::write(&info, text).map_err(|e| HarnessError::io(&info, e))?;
    Ok(ds)
}

/// The dataset named by the config, or a freshly collected one.
pub fn dataset_for(cfg: &RunConfig) -> Result<ExpertDataset> {
    let t = &cfg.train;
    match &cfg.dataset {
        Some(path) => {
            let ds = codec::load_dataset(path)?;
            if ds.env_id != t.env {
                return Err(HarnessError::config("dataset", format!("{} holds {} demonstrations", path.display(), ds.env_id)));
            }
            Ok(ds)
        }
        None => Ok(collect_expert(t.env, cfg.expert_n, t.horizon, cfg.expert_seed)?),
    }
}

/// Mean return of uniformly random actions on the run's evaluation seeds.
pub fn random_baseline(cfg: &RunConfig) -> Result<EvalResult> {
    let t = &cfg.train;
    let mut rng = SeedTree::new(t.seed).substream(Stream::Eval, 1);
    let seeds = eval_seeds(t.seed, t.eval_episodes);
    Ok(evaluate(t.env, t.perturbation, t.horizon, &seeds, |_| {
        Ok(rilir_core::envsim::random_action(t.env, &mut rng))
    })?)
}

/// What a finished training run reports.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub dir: PathBuf,
    pub bc_eval: EvalResult,
    pub final_eval: EvalResult,
    pub expert_return: f64,
    pub rows: usize,
}

struct Logged<'a> {
    csv: CsvLogger,
    last: Option<LogRow>,
    rows: usize,
    progress: Option<&'a mut dyn FnMut(&LogRow)>,
}

impl rilir_core::agent::TrainObserver for Logged<'_> {
    fn on_episode(&mut self, r: &rilir_core::agent::EpisodeRecord) -> rilir_core::Result<()> {
        self.csv.on_episode(r)
    }

    fn on_eval(&mut self, row: &LogRow) -> rilir_core::Result<()> {
        self.csv.on_eval(row)?;
        if let Some(p) = self.progress.as_mut() {
            p(row);
        }
        self.last = Some(row.clone());
        self.rows += 1;
        Ok(())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Trains one run into `dir`. The step-0 row of `log.csv` is the
/// post-cloning evaluation. On failure `failure.txt` records the error and
/// the step it happened at.
pub fn train(cfg: &RunConfig, dir: &Path, progress: Option<&mut dyn FnMut(&LogRow)>) -> Result<TrainReport> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let _ = fs::remove_file(dir.join(FAILURE_FILE));
    write_text(&dir.join(CONFIG_FILE), &cfg.to_text())?;
    let dataset = dataset_for(cfg)?;
    let expert_return = dataset.expert_return();
    let mut trainer = Trainer::new(cfg.train.clone(), dataset)?;
    let started = Instant::now();
    let result = train_inner(cfg, dir, &mut trainer, expert_return, progress);
    if let Err(e) = &result {
        let text = format!("step = {}\nepisode = {}\nerror = {e}\n", trainer.step(), trainer.episode());
        write_text(&dir.join(FAILURE_FILE), &text)?;
    }
    let report = result?;
    let mut info = fs::read_to_string(dir.join(INFO_FILE)).unwrap_or_default();
    let _ = writeln!(info, "wall_seconds = {:.1}", started.elapsed().as_secs_f64());
    write_text(&dir.join(INFO_FILE), &info)?;
    Ok(report)
}

fn train_inner(
    cfg: &RunConfig,
    dir: &Path,
    trainer: &mut Trainer,
    expert_return: f64,
    progress: Option<&mut dyn FnMut(&LogRow)>,
) -> Result<TrainReport> {
    let mut logged = Logged { csv: CsvLogger::create(dir)?, last: None, rows: 0, progress };
    let bc_losses = trainer.pretrain()?.to_vec();
    codec::save_params(&trainer.agent().parameters(), &dir.join(INIT_CHECKPOINT))?;
    let bc_eval = trainer.evaluate()?;
    let random = random_baseline(cfg)?;
    let mut info = String::new();
    let _ = writeln!(info, "expert_return = {expert_return}");
    let _ = writeln!(info, "random_return = {}", random.mean);
    let _ = writeln!(info, "bc_eval_mean = {}", bc_eval.mean);
    let _ = writeln!(info, "bc_eval_std = {}", bc_eval.std);
    let _ = writeln!(info, "bc_loss_first = {}", bc_losses.first().copied().unwrap_or(f64::NAN));
    let _ = writeln!(info, "bc_loss_last = {}", bc_losses.last().copied().unwrap_or(f64::NAN));
    write_text(&dir.join(INFO_FILE), &info)?;

    trainer.run(&mut logged)?;
    codec::save_params(&trainer.agent().parameters(), &dir.join(FINAL_CHECKPOINT))?;
    let final_eval = if logged.last.as_ref().is_some_and(|r| r.step == trainer.step()) {
        let last = logged.last.as_ref().unwrap();
        EvalResult { returns: Vec::new(), mean: last.eval_return_mean, std: last.eval_return_std }
    } else {
        let e = trainer.evaluate()?;
        let _ = writeln!(info, "final_eval_unlogged = {}", e.mean);
        e
    };
    let _ = writeln!(info, "final_step = {}", trainer.step());
    let _ = writeln!(info, "final_eval_mean = {}", final_eval.mean);
    let _ = writeln!(info, "final_eval_std = {}", final_eval.std);
    write_text(&dir.join(INFO_FILE), &info)?;
    Ok(TrainReport { dir: dir.to_path_buf(), bc_eval, final_eval, expert_return, rows: logged.rows })
}

/// Rebuilds the agent described by `cfg` and loads a checkpoint into it.
pub fn load_agent(cfg: &RunConfig, checkpoint: &Path) -> Result<ActorCritic> {
    let t = &cfg.train;
    let mut agent_cfg = t.agent.clone();
    agent_cfg.inverse_weight = t.inverse_weight();
    let mut rng = SeedTree::new(t.seed).stream(Stream::Nets);
    let mut agent = ActorCritic::new(PixelEnv::obs_dim(), t.env.action_dim(), agent_cfg, &mut rng)?;
    let params = codec::load_params(checkpoint)?;
    agent.load_parameters(&params).map_err(|e| HarnessError::format(checkpoint, e.to_string()))?;
    Ok(agent)
}

/// Greedy return over `episodes` seeded episodes. The seeds are the ones
/// training used, so evaluating a final checkpoint with the run's seed and
/// episode count reproduces the last logged evaluation exactly.
pub fn eval_checkpoint(cfg: &RunConfig, checkpoint: &Path, episodes: usize) -> Result<EvalResult> {
    let agent = load_agent(cfg, checkpoint)?;
    let t = &cfg.train;
    let seeds = eval_seeds(t.seed, episodes);
    Ok(evaluate(t.env, t.perturbation, t.horizon, &seeds, |o| agent.greedy(o))?)
}

/// Writes `obs_<i>.pgm` and `saliency_<i>.pgm` for `count` observations
/// spread over one greedy evaluation episode. Frames are stacked vertically.
pub fn export_saliency(cfg: &RunConfig, checkpoint: &Path, count: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let agent = load_agent(cfg, checkpoint)?;
    let t = &cfg.train;
    let mut env = PixelEnv::new(t.env, t.perturbation, t.horizon)?;
    let seed = eval_seeds(t.seed, 1)[0];
    let mut obs = env.reset(seed);
    let mut rng = SeedTree::new(t.seed).stream(Stream::Explore);
    let every = (t.horizon / count.max(1)).max(1);
    let mut written = Vec::new();
    let mut step = 0;
    while written.len() < count {
        if step % every == 0 {
            let i = written.len();
            let height = FRAME_H * obs.frames();
            pgm::write_map(out, &format!("obs_{i:03}"), obs.data(), FRAME_W, height)?;
            let map = saliency(&agent.encoder, &obs)?;
            pgm::write_map(out, &format!("saliency_{i:03}"), &map, FRAME_W, height)?;
            written.push(out.join(format!("saliency_{i:03}.pgm")));
        }
        if env.is_done() {
            obs = env.reset(seed.wrapping_add(step as u64));
        } else {
            let a = agent.select_action(&obs, ActionMode::Greedy, &mut rng)?;
            obs = env.step(&a)?.observation;
        }
        step += 1;
    }
    Ok(written)
}
