use serde::{Deserialize, Serialize};

use super::{run_episode, EpisodeTrace, Outcome};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::memory::{MemoryStore, SharedStore};
use crate::sim::{make_task, TaskId};

/// Aggregate over the episodes of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub config_hash: String,
    pub episodes: usize,
    pub successes: usize,
    pub timeouts: usize,
    pub stopped_early: usize,
    pub env_failures: usize,
    pub success_rate: f64,
    pub timeout_rate: f64,
    /// Mean episode length over successful episodes; `None` without any.
    pub mean_steps: Option<f64>,
    /// Fraction of evaluated windows gated as low quality.
    pub activation_rate: f64,
    pub windows: usize,
    pub low_quality_windows: usize,
    pub corrected_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config_hash: String,
    pub base_seed: u64,
    pub rows: Vec<TaskSummary>,
}

impl CampaignReport {
    pub fn env_failures(&self) -> usize {
        self.rows.iter().map(|r| r.env_failures).sum()
    }
}

#[derive(Default)]
struct Tally {
    episodes: usize,
    successes: usize,
    timeouts: usize,
    stopped_early: usize,
    env_failures: usize,
    success_steps: usize,
    windows: usize,
    low: usize,
    corrected: usize,
}

impl Tally {
    fn add(&mut self, trace: &EpisodeTrace) {
        self.episodes += 1;
        match trace.outcome {
            Outcome::Success => {
                self.successes += 1;
                self.success_steps += trace.len();
            }
            Outcome::Timeout => self.timeouts += 1,
            Outcome::StoppedEarlyIncorrect => self.stopped_early += 1,
            Outcome::EnvFailure => self.env_failures += 1,
        }
        let (n, low) = trace.windows();
        self.windows += n;
        self.low += low;
        self.corrected += trace.steps.iter().filter(|s| s.corrected).count();
    }

    fn summary(&self, task: &TaskId, config_hash: &str) -> TaskSummary {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        TaskSummary {
            task: task.to_string(),
            config_hash: config_hash.to_owned(),
            episodes: self.episodes,
            successes: self.successes,
            timeouts: self.timeouts,
            stopped_early: self.stopped_early,
            env_failures: self.env_failures,
            success_rate: ratio(self.successes, self.episodes),
            timeout_rate: ratio(self.timeouts, self.episodes),
            mean_steps: (self.successes > 0).then(|| ratio(self.success_steps, self.successes)),
            activation_rate: ratio(self.low, self.windows),
            windows: self.windows,
            low_quality_windows: self.low,
            corrected_steps: self.corrected,
        }
    }
}

fn check_request(tasks: &[TaskId], config: &Config, episodes: usize) -> Result<()> {
    if episodes == 0 {
        return Err(Error::validation("a campaign needs at least one episode"));
    }
    if tasks.is_empty() {
        return Err(Error::validation("a campaign needs at least one task"));
    }
    config.validate()
}

fn seeded_episode(task: &TaskId, config: &Config, seed: u64, store: &SharedStore) -> Result<EpisodeTrace> {
    let (mut world, mut policy) = make_task(task, seed, &config.sim)?;
    let id = format!("{task}/{seed}");
    run_episode(&mut policy, &mut world, store, config, &id, seed)
}

/// Runs `episodes` seeded episodes of every task in order against one
/// store, which stays warm across episodes and tasks. Episode `i` uses seed
/// `base_seed + i`. Episodes run sequentially because later episodes see
/// what earlier ones recorded.
pub fn run_campaign(
    tasks: &[TaskId],
    config: &Config,
    episodes: usize,
    base_seed: u64,
    store: &SharedStore,
    mut observe: impl FnMut(&TaskId, &EpisodeTrace),
) -> Result<CampaignReport> {
    check_request(tasks, config, episodes)?;
    let config_hash = config.hash();
    let mut rows = Vec::with_capacity(tasks.len());
    for task in tasks {
        let mut tally = Tally::default();
        for i in 0..episodes as u64 {
            let seed = base_seed.wrapping_add(i);
            let trace = seeded_episode(task, config, seed, store)?;
            tally.add(&trace);
            observe(task, &trace);
        }
        rows.push(tally.summary(task, &config_hash));
    }
    Ok(CampaignReport {
        config_hash,
        base_seed,
        rows,
    })
}

/// Like [`run_campaign`] against a store that never changes: every episode
/// sees `frozen` as it is, and successes are not recorded. Episodes are then
/// independent and spread over `workers` threads; the report does not
/// depend on the worker count.
pub fn run_replay_campaign(
    tasks: &[TaskId],
    config: &Config,
    episodes: usize,
    base_seed: u64,
    frozen: &MemoryStore,
    workers: usize,
) -> Result<CampaignReport> {
    check_request(tasks, config, episodes)?;
    let workers = workers.clamp(1, episodes);
    let config_hash = config.hash();
    let mut rows = Vec::with_capacity(tasks.len());
    for task in tasks {
        let traces: Vec<Result<Vec<EpisodeTrace>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        (w..episodes)
                            .step_by(workers)
                            .map(|i| {
                                let seed = base_seed.wrapping_add(i as u64);
                                seeded_episode(task, config, seed, &SharedStore::new(frozen.clone()))
                            })
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("replay worker panicked".into()))))
                .collect()
        });
        let per_worker = traces.into_iter().collect::<Result<Vec<_>>>()?;
        let mut tally = Tally::default();
        for i in 0..episodes {
            tally.add(&per_worker[i % workers][i / workers]);
        }
        rows.push(tally.summary(task, &config_hash));
    }
    Ok(CampaignReport {
        config_hash,
        base_seed,
        rows,
    })
}
