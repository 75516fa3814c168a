use rand::seq::SliceRandom;

use super::{DataError, GenConfig};
use crate::craftworld::{task_counts, ObjectKind, TaskKind};
use crate::fingerprint::substream;

/// How test sequences are held out from training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HoldoutSpec {
    /// Hold out this fraction of the multisets of every length.
    Composition { fraction: f64 },
    /// Every multiset containing this task kind goes to the test side.
    ExcludeKind(TaskKind),
}

/// Disjoint train/test sets of task multisets (each sorted by kind).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSplit {
    pub train_sequences: Vec<Vec<TaskKind>>,
    pub test_sequences: Vec<Vec<TaskKind>>,
}

fn multisets_rec(kinds: &[TaskKind], len: usize, start: usize, cur: &mut Vec<TaskKind>, out: &mut Vec<Vec<TaskKind>>) {
    if cur.len() == len {
        out.push(cur.clone());
        return;
    }
    for i in start..kinds.len() {
        cur.push(kinds[i]);
        multisets_rec(kinds, len, i, cur, out);
        cur.pop();
    }
}

/// Every multiset over `kinds` with length in `[tasks_min, tasks_max]` that is
/// closed under dependencies given the config's initial Log and Bread counts.
pub fn enumerate_multisets(kinds: &[TaskKind], config: &GenConfig) -> Vec<Vec<TaskKind>> {
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let logs = config.counts[ObjectKind::Log.index()] as u32;
    let bread = config.counts[ObjectKind::Bread.index()] as u32;
    let mut out = Vec::new();
    for len in config.tasks_min.max(1)..=config.tasks_max {
        let mut all = Vec::new();
        multisets_rec(&kinds, len, 0, &mut Vec::new(), &mut all);
        out.extend(all.into_iter().filter(|m| {
            let n = task_counts(m);
            n[TaskKind::BuildHouse.index()] <= n[TaskKind::ChopTree.index()] + logs
                && n[TaskKind::EatBread.index()] <= n[TaskKind::MakeBread.index()] + bread
        }));
    }
    out
}

/// Deterministic partition of the multiset universe.
pub fn split_tasks(
    vocabulary: &[TaskKind],
    holdout: &HoldoutSpec,
    seed: u64,
    config: &GenConfig,
) -> Result<TaskSplit, DataError> {
    let universe = enumerate_multisets(vocabulary, config);
    let (train, test): (Vec<_>, Vec<_>) = match *holdout {
        HoldoutSpec::ExcludeKind(kind) => universe.into_iter().partition(|m| !m.contains(&kind)),
        HoldoutSpec::Composition { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(DataError::DegenerateSplit(format!(
                    "holdout fraction {fraction} leaves one side empty"
                )));
            }
            let mut rng = substream(seed, "split", 0);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for len in config.tasks_min.max(1)..=config.tasks_max {
                let mut group: Vec<Vec<TaskKind>> =
                    universe.iter().filter(|m| m.len() == len).cloned().collect();
                group.shuffle(&mut rng);
                let n_test = if group.len() >= 2 {
                    ((fraction * group.len() as f64).round() as usize).clamp(1, group.len() - 1)
                } else {
                    0
                };
                test.extend(group.drain(..n_test));
                train.extend(group);
            }
            train.sort();
            test.sort();
            (train, test)
        }
    };
    if train.is_empty() || test.is_empty() {
        return Err(DataError::DegenerateSplit(format!(
            "{} train and {} test sequences",
            train.len(),
            test.len()
        )));
    }
    Ok(TaskSplit {
        train_sequences: train,
        test_sequences: test,
    })
}
