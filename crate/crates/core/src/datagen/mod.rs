//! Random maps, paired expert episodes and task-composition splits.

mod io;
mod split;

pub use io::{parse_record, read_dataset, record_line, write_dataset, DATASET_VERSION};
pub use split::{enumerate_multisets, split_tasks, HoldoutSpec, TaskSplit};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::craftworld::{task_counts, GridState, ObjectKind, Pos, TaskKind, WorldError};
use crate::expert::{check_feasible, plan_sequence, PlanError, PlannerConfig, Trajectory};
use crate::fingerprint::{substream, subseed};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{needed} objects do not fit on a grid of {cells} cells")]
    Capacity { needed: usize, cells: usize },
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("degenerate task split: {0}")]
    DegenerateSplit(String),
    #[error("planning failed after {attempts} map samples: {source}")]
    Planning { attempts: usize, source: PlanError },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: dataset version {found} is not supported (expected {expected})")]
    Version { line: usize, found: u64, expected: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Object counts per kind, indexed by [`ObjectKind::index`].
pub type ObjectCounts = [usize; 8];

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub width: usize,
    pub height: usize,
    /// Baseline object counts; raised per episode to cover its task multiset.
    pub counts: ObjectCounts,
    pub tasks_min: usize,
    pub tasks_max: usize,
    /// Map resamples allowed after a planning failure.
    pub max_retries: usize,
    pub planner: PlannerConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        let mut counts = [0; 8];
        counts[ObjectKind::Axe.index()] = 1;
        counts[ObjectKind::Hammer.index()] = 1;
        counts[ObjectKind::Tree.index()] = 2;
        counts[ObjectKind::Wheat.index()] = 2;
        counts[ObjectKind::Rock.index()] = 2;
        counts[ObjectKind::House.index()] = 1;
        GenConfig {
            width: 8,
            height: 8,
            counts,
            tasks_min: 2,
            tasks_max: 8,
            max_retries: 16,
            planner: PlannerConfig::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.width == 0 || self.height == 0 {
            return Err(DataError::Config("grid must be non-empty".into()));
        }
        if self.tasks_min > self.tasks_max {
            return Err(DataError::Config(format!(
                "tasks_min {} exceeds tasks_max {}",
                self.tasks_min, self.tasks_max
            )));
        }
        Ok(())
    }

    /// Counts raised so that `tasks` is feasible (tools present, enough
    /// Trees, Wheat and Rocks for the requested multiplicities).
    pub fn counts_for(&self, tasks: &[TaskKind]) -> ObjectCounts {
        let need = task_counts(tasks);
        let n = |t: TaskKind| need[t.index()] as usize;
        let mut c = self.counts;
        let mut raise = |k: ObjectKind, at_least: usize| {
            c[k.index()] = c[k.index()].max(at_least);
        };
        raise(ObjectKind::Tree, n(TaskKind::ChopTree));
        raise(ObjectKind::Wheat, n(TaskKind::MakeBread));
        raise(ObjectKind::Rock, n(TaskKind::BreakRock));
        if n(TaskKind::ChopTree) + n(TaskKind::MakeBread) > 0 {
            raise(ObjectKind::Axe, 1);
        }
        if n(TaskKind::BuildHouse) + n(TaskKind::BreakRock) > 0 {
            raise(ObjectKind::Hammer, 1);
        }
        c
    }
}

/// Adds the producer tasks a consumer needs when no initial Log/Bread exists.
pub fn with_prerequisites(tasks: &[TaskKind]) -> Vec<TaskKind> {
    let need = task_counts(tasks);
    let mut out = tasks.to_vec();
    for consumer in [TaskKind::BuildHouse, TaskKind::EatBread] {
        let producer = consumer.producer().expect("consumers have producers");
        let missing = need[consumer.index()].saturating_sub(need[producer.index()]);
        out.extend(std::iter::repeat(producer).take(missing as usize));
    }
    out
}

/// Uniformly placed, non-overlapping objects and a uniform agent cell.
pub fn random_map(seed: u64, width: usize, height: usize, counts: &ObjectCounts) -> Result<GridState, DataError> {
    let needed: usize = counts.iter().sum();
    let cells = width * height;
    if needed > cells {
        return Err(DataError::Capacity { needed, cells });
    }
    if cells == 0 {
        return Err(DataError::Config("grid must be non-empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<Pos> = (0..height)
        .flat_map(|r| (0..width).map(move |c| Pos::new(r, c)))
        .collect();
    let (chosen, _) = all.partial_shuffle(&mut rng, needed);
    let mut placements = Vec::with_capacity(needed);
    let mut it = chosen.iter();
    for kind in ObjectKind::ALL {
        for _ in 0..counts[kind.index()] {
            placements.push((*it.next().expect("enough cells chosen"), kind));
        }
    }
    let agent = Pos::new(rng.gen_range(0..height), rng.gen_range(0..width));
    Ok(GridState::new(width, height, &placements, agent)?)
}

/// Map for the config's baseline counts.
pub fn random_config_map(seed: u64, config: &GenConfig) -> Result<GridState, DataError> {
    random_map(seed, config.width, config.height, &config.counts)
}

/// One expert episode: initial map, tasks in planned completion order, trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub map_seed: u64,
    pub tasks: Vec<TaskKind>,
    pub trajectory: Trajectory,
}

impl Episode {
    pub fn world(&self) -> &GridState {
        self.trajectory.initial()
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn multiset(&self) -> Vec<TaskKind> {
        sorted(&self.tasks)
    }
}

/// Training episode and reference episode solving the same task multiset on
/// different maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodePair {
    pub pair_id: u64,
    pub train: Episode,
    pub reference: Episode,
}

impl EpisodePair {
    pub fn check(&self) -> Result<(), String> {
        if self.train.multiset() != self.reference.multiset() {
            return Err(format!(
                "task multisets differ: {:?} vs {:?}",
                self.train.tasks, self.reference.tasks
            ));
        }
        if self.train.map_seed == self.reference.map_seed {
            return Err("train and reference share a map seed".into());
        }
        self.train.trajectory.check(&self.train.tasks)?;
        self.reference.trajectory.check(&self.reference.tasks)
    }
}

pub fn sorted(tasks: &[TaskKind]) -> Vec<TaskKind> {
    let mut v = tasks.to_vec();
    v.sort();
    v
}

fn plan_episode(map_seed: u64, tasks: &[TaskKind], config: &GenConfig) -> Result<Episode, DataError> {
    let counts = config.counts_for(tasks);
    let world = random_map(map_seed, config.width, config.height, &counts)?;
    check_feasible(&world, tasks).map_err(|source| DataError::Planning { attempts: 1, source })?;
    let plan = plan_sequence(&world, tasks, &config.planner)
        .map_err(|source| DataError::Planning { attempts: 1, source })?;
    Ok(Episode {
        map_seed,
        tasks: plan.order,
        trajectory: plan.trajectory,
    })
}

/// Two independently sampled maps solving `tasks`, resampling on planning
/// failure up to `config.max_retries` times.
pub fn gen_pair(seed: u64, pair_id: u64, tasks: &[TaskKind], config: &GenConfig) -> Result<EpisodePair, DataError> {
    config.validate()?;
    let mut last = None;
    for attempt in 0..=config.max_retries as u64 {
        let seed_a = subseed(seed, "pair/train", attempt);
        let mut seed_b = subseed(seed, "pair/reference", attempt);
        if seed_b == seed_a {
            seed_b = seed_b.wrapping_add(1);
        }
        let result = plan_episode(seed_a, tasks, config)
            .and_then(|train| Ok((train, plan_episode(seed_b, tasks, config)?)));
        match result {
            Ok((train, reference)) => {
                return Ok(EpisodePair {
                    pair_id,
                    train,
                    reference,
                })
            }
            Err(DataError::Planning { source, .. }) => last = Some(source),
            Err(e) => return Err(e),
        }
    }
    Err(DataError::Planning {
        attempts: config.max_retries + 1,
        source: last.expect("at least one attempt"),
    })
}

/// Draws a length uniformly among those present, then a multiset of that length.
pub fn sample_multiset<R: Rng>(pool: &[Vec<TaskKind>], rng: &mut R) -> Option<Vec<TaskKind>> {
    let mut lengths: Vec<usize> = pool.iter().map(Vec::len).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let len = *lengths.choose(rng)?;
    let of_len: Vec<&Vec<TaskKind>> = pool.iter().filter(|m| m.len() == len).collect();
    of_len.choose(rng).map(|m| (*m).clone())
}

/// `n` pairs with multisets drawn from `pool`. Output is identical for any
/// worker count.
pub fn gen_dataset(
    seed: u64,
    n: usize,
    pool: &[Vec<TaskKind>],
    config: &GenConfig,
    workers: usize,
) -> Result<Vec<EpisodePair>, DataError> {
    if pool.is_empty() {
        return Err(DataError::Config("empty task pool".into()));
    }
    let job = |i: usize| {
        let mut rng = substream(seed, "dataset/tasks", i as u64);
        let tasks = sample_multiset(pool, &mut rng).expect("pool is non-empty");
        gen_pair(subseed(seed, "dataset/pair", i as u64), i as u64, &tasks, config)
    };
    if workers <= 1 {
        return (0..n).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DataError::Config(e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(job).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use TaskKind::*;

    #[test]
    fn same_seed_same_map() {
        let c = GenConfig::default();
        assert_eq!(random_config_map(11, &c).unwrap(), random_config_map(11, &c).unwrap());
        assert_ne!(random_config_map(11, &c).unwrap(), random_config_map(12, &c).unwrap());
    }

    #[test]
    fn over_capacity_is_an_error() {
        let mut counts = [0; 8];
        counts[ObjectKind::Rock.index()] = 100;
        assert!(matches!(
            random_map(1, 3, 3, &counts),
            Err(DataError::Capacity { needed: 100, cells: 9 })
        ));
    }

    #[test]
    fn default_map_object_counts() {
        let s = random_config_map(5, &GenConfig::default()).unwrap();
        assert_eq!(s.object_count(), 9);
        assert_eq!(s.count(ObjectKind::Tree), 2);
        assert_eq!(s.count(ObjectKind::Log), 0);
    }

    #[test]
    fn pair_has_equal_multisets() {
        let c = GenConfig::default();
        let p = gen_pair(3, 0, &[EatBread, MakeBread, BreakRock], &c).unwrap();
        p.check().unwrap();
        assert_eq!(p.train.multiset(), vec![MakeBread, EatBread, BreakRock]);
        assert_ne!(p.train.world(), p.reference.world());
    }

    #[test]
    fn counts_cover_multiplicity() {
        let c = GenConfig::default();
        let counts = c.counts_for(&[ChopTree, ChopTree, ChopTree]);
        assert_eq!(counts[ObjectKind::Tree.index()], 3);
        let p = gen_pair(9, 0, &[ChopTree, ChopTree, ChopTree, BuildHouse], &c).unwrap();
        p.check().unwrap();
    }

    #[test]
    fn prerequisites_added() {
        assert_eq!(with_prerequisites(&[BuildHouse]), vec![BuildHouse, ChopTree]);
        assert_eq!(with_prerequisites(&[EatBread, MakeBread]), vec![EatBread, MakeBread]);
    }

    #[test]
    fn dataset_independent_of_workers() {
        let c = GenConfig {
            tasks_max: 3,
            ..GenConfig::default()
        };
        let pool = enumerate_multisets(&TaskKind::ALL, &c);
        let a = gen_dataset(4, 6, &pool, &c, 1).unwrap();
        let b = gen_dataset(4, 6, &pool, &c, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn min_above_max_rejected() {
        let c = GenConfig {
            tasks_min: 4,
            tasks_max: 2,
            ..GenConfig::default()
        };
        assert!(matches!(gen_pair(1, 0, &[ChopTree], &c), Err(DataError::Config(_))));
    }
}
