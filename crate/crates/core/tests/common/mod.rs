#![allow(dead_code)]

pub mod gradcheck;
pub mod oracle;

use std::collections::{HashSet, VecDeque};

use caselab::craftworld::{Action, GridState, TaskKind};
use caselab::datagen::{enumerate_multisets, random_map, GenConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shortest number of actions from `start` to a state completing `tasks`,
/// by breadth-first search over whole world states.
pub fn brute_force_len(start: &GridState, tasks: &[TaskKind], limit: usize) -> Option<usize> {
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if s.tasks_done(tasks) {
            return Some(d);
        }
        if d == limit {
            continue;
        }
        for a in Action::ALL {
            let (next, _) = s.step(a);
            if seen.insert(next.clone()) {
                queue.push_back((next, d + 1));
            }
        }
    }
    None
}

/// Closed multisets of one or two tasks on small grids.
pub fn small_instances(n: usize, seed: u64) -> Vec<(GridState, Vec<TaskKind>)> {
    let config = GenConfig {
        width: 5,
        height: 5,
        tasks_min: 1,
        tasks_max: 2,
        ..GenConfig::default()
    };
    let pool = enumerate_multisets(&TaskKind::ALL, &config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let tasks = pool.choose(&mut rng).expect("non-empty pool").clone();
            let map = random_map(seed.wrapping_mul(1000) + i as u64, 5, 5, &config.counts_for(&tasks)).unwrap();
            (map, tasks)
        })
        .collect()
}

pub fn brute_force_path(start: &GridState, tasks: &[TaskKind]) -> Option<Vec<Action>> {
    let mut parent = std::collections::HashMap::from([(start.clone(), None)]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(s) = queue.pop_front() {
        if s.tasks_done(tasks) {
            let mut path = Vec::new();
            let mut cur = s;
            while let Some(Some((prev, a))) = parent.get(&cur).cloned() {
                path.push(a);
                cur = prev;
            }
            path.reverse();
            return Some(path);
        }
        for a in Action::ALL {
            let (next, _) = s.step(a);
            if !parent.contains_key(&next) {
                parent.insert(next.clone(), Some((s.clone(), a)));
                queue.push_back(next);
            }
        }
    }
    None
}
