//! Closed-loop one-shot evaluation and the experiment grids built on it.

mod report;

pub use report::{
    parse_eval_csv, summarize_table, table_csv, write_eval_csv, write_sweep_csv, EvalRow, SweepRow, TableRow,
    EVAL_HEADER, SWEEP_HEADER, TABLE_HEADER,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::compose::{rollout_waypoint_index, CaseModel, ComposeError, StepInputs, Variant};
use crate::craftworld::{featurize_sparse, GridState, TaskKind};
use crate::datagen::{gen_dataset, sorted, DataError, Episode, EpisodePair, GenConfig};
use crate::fingerprint::subseed;
use crate::nn::SparseVec;
use crate::num::Scalar;
use crate::train::{train_loop, Dataset, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no test episodes")]
    NoEpisodes,
    #[error("reference tasks {reference:?} differ from rollout tasks {tasks:?}")]
    TaskMismatch { tasks: Vec<TaskKind>, reference: Vec<TaskKind> },
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    AllDone,
    StepBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutOutcome {
    pub success: bool,
    pub steps_taken: usize,
    pub tasks_completed: usize,
    pub termination: Termination,
}

/// `mult · T + 20` for a reference of length `T`.
pub fn step_budget(reference_len: usize, mult: usize) -> usize {
    mult * reference_len + 20
}

/// Greedy closed-loop rollout from `world` toward `goal` (the task's end
/// state in this world), guided by `reference` from another world.
pub fn rollout<S: Scalar>(
    model: &CaseModel<S>,
    world: &GridState,
    tasks: &[TaskKind],
    goal: &GridState,
    reference: &Episode,
    k: usize,
    budget: usize,
) -> Result<RolloutOutcome, EvalError> {
    if sorted(tasks) != reference.multiset() {
        return Err(EvalError::TaskMismatch {
            tasks: tasks.to_vec(),
            reference: reference.tasks.clone(),
        });
    }
    let r: Vec<SparseVec<S>> = reference.trajectory.states.iter().map(featurize_sparse).collect();
    let t_ref = r.len() - 1;
    let u0 = featurize_sparse(world);
    let un = featurize_sparse(goal);
    let mut state = world.clone();
    let mut t = 0;
    loop {
        if state.tasks_done(tasks) {
            return Ok(RolloutOutcome {
                success: true,
                steps_taken: t,
                tasks_completed: state.tasks_completed(tasks),
                termination: Termination::AllDone,
            });
        }
        if t >= budget {
            return Ok(RolloutOutcome {
                success: false,
                steps_taken: t,
                tasks_completed: state.tasks_completed(tasks),
                termination: Termination::StepBudget,
            });
        }
        let ut = featurize_sparse(&state);
        let i = rollout_waypoint_index(t, t_ref, k);
        let x = StepInputs {
            u0: &u0,
            ut: &ut,
            un: &un,
            r0: &r[0],
            ri: &r[i],
            rt: &r[t_ref],
        };
        let action = model.act(&x)?;
        state = state.step(action).0;
        t += 1;
    }
}

/// Rollout on a test pair: its training world is the environment, the
/// reference episode is the guide.
pub fn rollout_pair<S: Scalar>(
    model: &CaseModel<S>,
    pair: &EpisodePair,
    k: usize,
    budget_mult: usize,
) -> Result<RolloutOutcome, EvalError> {
    rollout(
        model,
        pair.train.world(),
        &pair.train.tasks,
        pair.train.trajectory.final_state(),
        &pair.reference,
        k,
        step_budget(pair.reference.len(), budget_mult),
    )
}

/// Success statistics over a set of episodes. The rate is an exact ratio
/// of integer counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub n_episodes: usize,
    pub successes: usize,
    pub rate: f64,
    pub mean_steps: f64,
    /// Sample standard deviation of the per-episode success indicator.
    pub std: f64,
    /// Half-width of the normal-approximation binomial 95% interval.
    pub ci95: f64,
}

impl EvalSummary {
    pub fn from_outcomes(outcomes: &[RolloutOutcome]) -> Result<Self, EvalError> {
        let n = outcomes.len();
        if n == 0 {
            return Err(EvalError::NoEpisodes);
        }
        let successes = outcomes.iter().filter(|o| o.success).count();
        let steps: usize = outcomes.iter().map(|o| o.steps_taken).sum();
        let rate = successes as f64 / n as f64;
        let std = if n > 1 {
            // Σ(x − p)² over 0/1 outcomes equals s·(1 − p)² + (n − s)·p².
            let s = successes as f64;
            let ss = s * (1.0 - rate).powi(2) + (n as f64 - s) * rate * rate;
            (ss / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(EvalSummary {
            n_episodes: n,
            successes,
            rate,
            mean_steps: steps as f64 / n as f64,
            std,
            ci95: 1.96 * (rate * (1.0 - rate) / n as f64).sqrt(),
        })
    }
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, EvalError> {
    if workers <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Every outcome in test-pair order; identical for any worker count.
pub fn rollout_all<S: Scalar>(
    model: &CaseModel<S>,
    pairs: &[EpisodePair],
    k: usize,
    budget_mult: usize,
    workers: usize,
) -> Result<Vec<RolloutOutcome>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoEpisodes);
    }
    with_workers(workers, || {
        pairs
            .par_iter()
            .map(|p| rollout_pair(model, p, k, budget_mult))
            .collect::<Result<Vec<_>, _>>()
    })?
}

pub fn success_rate<S: Scalar>(
    model: &CaseModel<S>,
    pairs: &[EpisodePair],
    k: usize,
    budget_mult: usize,
    workers: usize,
) -> Result<EvalSummary, EvalError> {
    EvalSummary::from_outcomes(&rollout_all(model, pairs, k, budget_mult, workers)?)
}

/// One (variant, k, seed) training and evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub variant: Variant,
    pub k: usize,
    pub seed: u64,
}

/// Settings shared by every run of an experiment grid.
#[derive(Debug, Clone)]
pub struct GridSettings {
    /// Template; variant, k and seed are overridden per run.
    pub train: TrainConfig,
    pub budget_mult: usize,
    pub workers: usize,
}

pub fn run_one<S: Scalar>(
    spec: RunSpec,
    settings: &GridSettings,
    train_data: &Dataset<S>,
    test_pairs: &[EpisodePair],
) -> Result<EvalRow, EvalError> {
    let mut cfg = settings.train.clone();
    cfg.model.variant = spec.variant;
    cfg.k = spec.k;
    cfg.seed = spec.seed;
    let trained = train_loop(&cfg, train_data, &BTreeMap::new(), None, None)?;
    let summary = success_rate(&trained.model, test_pairs, spec.k, settings.budget_mult, 1)?;
    Ok(EvalRow {
        variant: spec.variant,
        k: spec.k,
        seed: spec.seed,
        summary,
    })
}

/// Trains and evaluates every spec; runs are parallel across `workers`
/// and rows come back in spec order.
pub fn run_grid<S: Scalar>(
    specs: &[RunSpec],
    settings: &GridSettings,
    train_data: &Dataset<S>,
    test_pairs: &[EpisodePair],
) -> Result<Vec<EvalRow>, EvalError> {
    if test_pairs.is_empty() {
        return Err(EvalError::NoEpisodes);
    }
    with_workers(settings.workers, || {
        specs
            .par_iter()
            .map(|&s| run_one(s, settings, train_data, test_pairs))
            .collect::<Result<Vec<_>, _>>()
    })?
}

/// Variant × seed grid at the template's k.
pub fn compare_variants<S: Scalar>(
    variants: &[Variant],
    seeds: &[u64],
    settings: &GridSettings,
    train_data: &Dataset<S>,
    test_pairs: &[EpisodePair],
) -> Result<Vec<EvalRow>, EvalError> {
    let specs: Vec<RunSpec> = variants
        .iter()
        .flat_map(|&variant| {
            seeds.iter().map(move |&seed| RunSpec {
                variant,
                k: settings.train.k,
                seed,
            })
        })
        .collect();
    run_grid(&specs, settings, train_data, test_pairs)
}

/// k × seed grid for the template's variant.
pub fn ablate_k<S: Scalar>(
    ks: &[usize],
    seeds: &[u64],
    settings: &GridSettings,
    train_data: &Dataset<S>,
    test_pairs: &[EpisodePair],
) -> Result<Vec<EvalRow>, EvalError> {
    let variant = settings.train.model.variant;
    let specs: Vec<RunSpec> = ks
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&seed| RunSpec { variant, k, seed }))
        .collect();
    run_grid(&specs, settings, train_data, test_pairs)
}

/// Test pairs for one sequence length, drawn from the multisets of that
/// length in `pool`.
pub fn length_bucket(
    seed: u64,
    length: usize,
    n: usize,
    pool: &[Vec<TaskKind>],
    gen: &GenConfig,
) -> Result<Vec<EpisodePair>, EvalError> {
    let bucket: Vec<Vec<TaskKind>> = pool.iter().filter(|m| m.len() == length).cloned().collect();
    if bucket.is_empty() {
        return Err(EvalError::Config(format!("no test sequences of length {length}")));
    }
    Ok(gen_dataset(subseed(seed, "sweep/length", length as u64), n, &bucket, gen, 1)?)
}

/// Evaluates trained models on freshly generated test sets per length.
#[allow(clippy::too_many_arguments)]
pub fn sweep_sequence_length<S: Scalar>(
    models: &[(RunSpec, &CaseModel<S>)],
    lengths: &[usize],
    pool: &[Vec<TaskKind>],
    per_length: usize,
    seed: u64,
    gen: &GenConfig,
    budget_mult: usize,
    workers: usize,
) -> Result<Vec<SweepRow>, EvalError> {
    let mut rows = Vec::new();
    for &length in lengths {
        let pairs = length_bucket(seed, length, per_length, pool, gen)?;
        for &(spec, model) in models {
            let summary = success_rate(model, &pairs, spec.k, budget_mult, workers)?;
            rows.push(SweepRow {
                length,
                row: EvalRow {
                    variant: spec.variant,
                    k: spec.k,
                    seed: spec.seed,
                    summary,
                },
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests;
