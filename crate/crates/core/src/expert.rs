//! Expert planner.
//!
//! Every task follows a recipe built from shortest-path segments: optionally
//! drop whatever is held on the best empty cell, walk to a tool and pick it
//! up, then walk onto the target (or, for `EatBread`, walk onto a Bread and
//! pick it up). A *candidate* is one recipe instantiation, i.e. one choice of
//! tool instance, target instance and drop cell.
//!
//! [`plan_sequence`] searches task orderings together with candidate choices
//! (uniform-cost search over the states reached after each completed task)
//! when the multiset is small, and falls back to nearest-next-task greedy
//! planning above [`PlannerConfig::exhaustive_max`].
//!
//! Recipes never move a target object, yet Wheat is carryable and bringing
//! it to the Axe can be shorter. Small instances are therefore solved by
//! breadth-first search over whole world states instead.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::craftworld::{task_counts, Action, GridState, ObjectKind, Pos, TaskKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("no reachable cell satisfies {predicate}")]
    Unreachable { predicate: String },
    #[error("{task:?} cannot be planned: no {missing:?} available")]
    MissingPrerequisite { task: TaskKind, missing: ObjectKind },
    #[error("task multiset is infeasible on this map: {task:?} cannot be completed")]
    Infeasible { task: TaskKind },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<GridState>,
    pub actions: Vec<Action>,
}

impl Trajectory {
    /// Replays `actions` from `initial`.
    pub fn from_actions(initial: GridState, actions: Vec<Action>) -> Self {
        let states = initial.rollout(&actions);
        Trajectory { states, actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn initial(&self) -> &GridState {
        &self.states[0]
    }

    pub fn final_state(&self) -> &GridState {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Replay check with a diagnostic for the first divergence.
    pub fn check(&self, tasks: &[TaskKind]) -> Result<(), String> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(format!(
                "{} states for {} actions",
                self.states.len(),
                self.actions.len()
            ));
        }
        for (i, &a) in self.actions.iter().enumerate() {
            if self.states[i].step(a).0 != self.states[i + 1] {
                return Err(format!("state {} does not follow from action {i} ({a:?})", i + 1));
            }
        }
        if !self.final_state().tasks_done(tasks) {
            return Err(format!("final state does not complete {tasks:?}"));
        }
        Ok(())
    }

    pub fn validate(&self, tasks: &[TaskKind]) -> bool {
        self.check(tasks).is_ok()
    }
}

/// Shortest action sequence moving the agent onto a cell satisfying `goal`.
///
/// Ties between equally distant cells go to the first in row-major order;
/// the path itself follows breadth-first parents expanded in N, S, E, W order.
pub fn bfs_actions(
    state: &GridState,
    goal: impl Fn(Pos) -> bool,
    label: &str,
) -> Result<Vec<Action>, PlanError> {
    let (w, h) = (state.width(), state.height());
    let idx = |p: Pos| p.row * w + p.col;
    let start = state.agent();
    let mut dist = vec![usize::MAX; w * h];
    let mut parent: Vec<Option<(Pos, Action)>> = vec![None; w * h];
    dist[idx(start)] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for a in Action::MOVES {
            if let Some(q) = state.neighbor(p, a) {
                if dist[idx(q)] == usize::MAX {
                    dist[idx(q)] = dist[idx(p)] + 1;
                    parent[idx(q)] = Some((p, a));
                    queue.push_back(q);
                }
            }
        }
    }
    let target = state
        .positions()
        .filter(|&p| dist[idx(p)] != usize::MAX && goal(p))
        .min_by_key(|&p| dist[idx(p)])
        .ok_or_else(|| PlanError::Unreachable {
            predicate: label.to_string(),
        })?;
    let mut path = Vec::with_capacity(dist[idx(target)]);
    let mut cur = target;
    while let Some((prev, a)) = parent[idx(cur)] {
        path.push(a);
        cur = prev;
    }
    path.reverse();
    Ok(path)
}

fn walk_to(state: &GridState, to: Pos) -> Vec<Action> {
    bfs_actions(state, |p| p == to, "target cell").expect("open grid cells are always reachable")
}

fn run(state: &GridState, actions: &[Action]) -> GridState {
    actions.iter().fold(state.clone(), |s, &a| s.step(a).0)
}

/// Empty cell minimising `d(agent, e) + d(e, next)`; row-major tie-break.
fn drop_cell(state: &GridState, next: Pos) -> Option<Pos> {
    let p = state.agent();
    state
        .positions()
        .filter(|&e| state.cell(e).is_none())
        .min_by_key(|&e| p.manhattan(e) + e.manhattan(next))
}

/// One instantiation of a task recipe.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub task: TaskKind,
    pub actions: Vec<Action>,
    pub result: GridState,
    /// Distance walked before the first pickup (tie-break key).
    pub tool_dist: usize,
    pub tool_pos: Option<Pos>,
    pub target_pos: Pos,
}

impl Candidate {
    pub fn cost(&self) -> usize {
        self.actions.len()
    }

    fn rank(&self) -> (usize, usize, Option<Pos>, Pos) {
        (self.cost(), self.tool_dist, self.tool_pos, self.target_pos)
    }
}

/// Segments that leave the agent at `pickup` with empty hands, then pick up.
fn fetch(state: &GridState, pickup: Pos) -> Option<(Vec<Action>, usize)> {
    let mut actions = Vec::new();
    let mut s = state.clone();
    if s.carried().is_some() {
        let e = drop_cell(&s, pickup)?;
        let seg = walk_to(&s, e);
        s = run(&s, &seg);
        actions.extend(seg);
        actions.push(Action::Drop);
        s = s.step(Action::Drop).0;
    }
    let seg = walk_to(&s, pickup);
    actions.extend(seg);
    let walked = actions.len();
    actions.push(Action::PickUp);
    Some((actions, walked))
}

/// Every recipe instantiation that advances `task` by one from `state`.
pub fn task_candidates(state: &GridState, task: TaskKind) -> Vec<Candidate> {
    let before = state.events().get(task.event());
    let targets = state.find(task.target());
    let mut out = Vec::new();
    let mut push = |actions: Vec<Action>, tool_dist, tool_pos, target_pos| {
        let result = run(state, &actions);
        if result.events().get(task.event()) > before {
            out.push(Candidate {
                task,
                actions,
                result,
                tool_dist,
                tool_pos,
                target_pos,
            });
        }
    };
    match task.tool() {
        None => {
            for &t in &targets {
                if let Some((actions, walked)) = fetch(state, t) {
                    push(actions, walked, None, t);
                }
            }
        }
        Some(tool) if state.carried() == Some(tool) => {
            for &t in &targets {
                let actions = if t == state.agent() {
                    // transformations fire on entry: step out and back in
                    let out_move = Action::MOVES
                        .into_iter()
                        .find(|&a| state.neighbor(t, a).is_some());
                    match out_move {
                        Some(a) => vec![a, opposite(a)],
                        None => continue,
                    }
                } else {
                    walk_to(state, t)
                };
                push(actions, 0, None, t);
            }
        }
        Some(tool) => {
            for u in state.find(tool) {
                let Some((actions, walked)) = fetch(state, u) else {
                    continue;
                };
                let at_tool = run(state, &actions);
                for &t in &targets {
                    let mut full = actions.clone();
                    full.extend(walk_to(&at_tool, t));
                    push(full, walked, Some(u), t);
                }
            }
        }
    }
    out
}

fn opposite(a: Action) -> Action {
    match a {
        Action::MoveNorth => Action::MoveSouth,
        Action::MoveSouth => Action::MoveNorth,
        Action::MoveEast => Action::MoveWest,
        Action::MoveWest => Action::MoveEast,
        other => other,
    }
}

fn missing_object(state: &GridState, task: TaskKind) -> ObjectKind {
    match task.tool() {
        Some(tool) if state.carried() != Some(tool) && state.count(tool) == 0 => tool,
        _ => task.target(),
    }
}

/// Cheapest recipe for one task; ties go to the nearest tool, then row-major
/// tool and target positions.
pub fn plan_task(state: &GridState, task: TaskKind) -> Result<Vec<Action>, PlanError> {
    best_candidate(state, task)
        .map(|c| c.actions)
        .ok_or_else(|| PlanError::MissingPrerequisite {
            task,
            missing: missing_object(state, task),
        })
}

fn best_candidate(state: &GridState, task: TaskKind) -> Option<Candidate> {
    task_candidates(state, task)
        .into_iter()
        .min_by_key(Candidate::rank)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannerConfig {
    /// Largest multiset planned by exhaustive search.
    pub exhaustive_max: usize,
    /// Largest multiset solved exactly over the joint state space...
    pub exact_max_tasks: usize,
    /// ...on grids with at most this many cells.
    pub exact_max_cells: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            exhaustive_max: 5,
            exact_max_tasks: 2,
            exact_max_cells: 25,
        }
    }
}

/// Expert solution for a task multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub trajectory: Trajectory,
    /// Task occurrences in the order the trajectory completes them.
    pub order: Vec<TaskKind>,
}

/// Resource-count feasibility under dependency closure: Logs may come from
/// `ChopTree` occurrences and Bread from `MakeBread` occurrences.
pub fn check_feasible(state: &GridState, tasks: &[TaskKind]) -> Result<(), PlanError> {
    let need = task_counts(tasks);
    let have = |k: ObjectKind| state.count(k) + usize::from(state.carried() == Some(k));
    let n = |t: TaskKind| need[t.index()] as usize;
    let checks = [
        (TaskKind::ChopTree, n(TaskKind::ChopTree) <= have(ObjectKind::Tree)),
        (TaskKind::MakeBread, n(TaskKind::MakeBread) <= have(ObjectKind::Wheat)),
        (TaskKind::BreakRock, n(TaskKind::BreakRock) <= have(ObjectKind::Rock)),
        (
            TaskKind::BuildHouse,
            n(TaskKind::BuildHouse) <= have(ObjectKind::Log) + n(TaskKind::ChopTree),
        ),
        (
            TaskKind::EatBread,
            n(TaskKind::EatBread) <= have(ObjectKind::Bread) + n(TaskKind::MakeBread),
        ),
    ];
    for (task, ok) in checks {
        if !ok {
            return Err(PlanError::Infeasible { task });
        }
    }
    for t in TaskKind::ALL {
        if let Some(tool) = t.tool() {
            if n(t) > 0 && have(tool) == 0 {
                return Err(PlanError::MissingPrerequisite {
                    task: t,
                    missing: tool,
                });
            }
        }
    }
    Ok(())
}

fn remaining(state: &GridState, need: &[u32; 5]) -> Vec<TaskKind> {
    TaskKind::ALL
        .into_iter()
        .filter(|t| state.events().get(t.event()) < need[t.index()])
        .collect()
}

/// Task occurrences of `tasks` in the order `traj` completes them.
pub fn completion_order(traj: &Trajectory, tasks: &[TaskKind]) -> Vec<TaskKind> {
    let need = task_counts(tasks);
    let mut credited = [0u32; 5];
    let mut order = Vec::with_capacity(tasks.len());
    for s in &traj.states {
        for t in TaskKind::ALL {
            let have = s.events().get(t.event()).min(need[t.index()]);
            while credited[t.index()] < have {
                credited[t.index()] += 1;
                order.push(t);
            }
        }
    }
    order
}

pub fn plan_sequence(
    state: &GridState,
    tasks: &[TaskKind],
    config: &PlannerConfig,
) -> Result<Plan, PlanError> {
    check_feasible(state, tasks)?;
    let small = tasks.len() <= config.exact_max_tasks && state.width() * state.height() <= config.exact_max_cells;
    let actions = if small {
        exact_plan(state, tasks)?
    } else if tasks.len() <= config.exhaustive_max {
        search_plan(state, tasks)?
    } else {
        greedy_plan(state, tasks)?
    };
    let trajectory = Trajectory::from_actions(state.clone(), actions);
    let order = completion_order(&trajectory, tasks);
    Ok(Plan { trajectory, order })
}

/// Breadth-first search over world states; actions expand in
/// [`Action::ALL`] order, so the first shortest plan found is deterministic.
pub fn exact_plan(state: &GridState, tasks: &[TaskKind]) -> Result<Vec<Action>, PlanError> {
    let mut nodes: Vec<(GridState, usize, Action)> = vec![(state.clone(), usize::MAX, Action::PickUp)];
    let mut seen = HashSet::from([state.clone()]);
    let mut head = 0;
    while head < nodes.len() {
        if nodes[head].0.tasks_done(tasks) {
            let mut path = Vec::new();
            let mut i = head;
            while nodes[i].1 != usize::MAX {
                path.push(nodes[i].2);
                i = nodes[i].1;
            }
            path.reverse();
            return Ok(path);
        }
        for a in Action::ALL {
            let (next, _) = nodes[head].0.step(a);
            if seen.insert(next.clone()) {
                nodes.push((next, head, a));
            }
        }
        head += 1;
    }
    let need = task_counts(tasks);
    let first = remaining(state, &need).first().copied().unwrap_or(TaskKind::ChopTree);
    Err(PlanError::Infeasible { task: first })
}

fn greedy_plan(state: &GridState, tasks: &[TaskKind]) -> Result<Vec<Action>, PlanError> {
    let need = task_counts(tasks);
    let mut s = state.clone();
    let mut actions = Vec::new();
    loop {
        let left = remaining(&s, &need);
        let Some(&first) = left.first() else {
            return Ok(actions);
        };
        let best = left
            .iter()
            .filter_map(|&t| best_candidate(&s, t))
            .min_by_key(|c| c.cost())
            .ok_or(PlanError::Infeasible { task: first })?;
        actions.extend_from_slice(&best.actions);
        s = best.result;
    }
}

struct Node {
    state: GridState,
    parent: Option<usize>,
    segment: Vec<Action>,
    cost: usize,
}

/// Uniform-cost search over post-task states; exact within the recipe family.
fn search_plan(state: &GridState, tasks: &[TaskKind]) -> Result<Vec<Action>, PlanError> {
    let need = task_counts(tasks);
    let mut nodes = vec![Node {
        state: state.clone(),
        parent: None,
        segment: Vec::new(),
        cost: 0,
    }];
    let mut best: HashMap<GridState, usize> = HashMap::from([(state.clone(), 0)]);
    let mut heap = BinaryHeap::from([(Reverse(0usize), Reverse(0usize))]);
    while let Some((Reverse(cost), Reverse(i))) = heap.pop() {
        if cost > nodes[i].cost || best.get(&nodes[i].state) != Some(&i) {
            continue;
        }
        let left = remaining(&nodes[i].state, &need);
        if left.is_empty() {
            let mut segs = Vec::new();
            let mut cur = Some(i);
            while let Some(j) = cur {
                segs.push(std::mem::take(&mut nodes[j].segment));
                cur = nodes[j].parent;
            }
            return Ok(segs.into_iter().rev().flatten().collect());
        }
        for t in left {
            for c in task_candidates(&nodes[i].state, t) {
                let next_cost = cost + c.cost();
                if let Some(&j) = best.get(&c.result) {
                    if nodes[j].cost <= next_cost {
                        continue;
                    }
                }
                let j = nodes.len();
                best.insert(c.result.clone(), j);
                nodes.push(Node {
                    state: c.result,
                    parent: Some(i),
                    segment: c.actions,
                    cost: next_cost,
                });
                heap.push((Reverse(next_cost), Reverse(j)));
            }
        }
    }
    let first = remaining(state, &need)
        .first()
        .copied()
        .unwrap_or(TaskKind::ChopTree);
    Err(PlanError::Infeasible { task: first })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::craftworld::new_world;
    use ObjectKind::*;
    use TaskKind::*;

    const E: Action = Action::MoveEast;

    #[test]
    fn bfs_already_there() {
        let s = new_world(3, 3, &[], (1, 1)).unwrap();
        assert_eq!(bfs_actions(&s, |p| p == Pos::new(1, 1), "self").unwrap(), vec![]);
    }

    #[test]
    fn bfs_straight_row() {
        let s = new_world(4, 1, &[], (0, 0)).unwrap();
        assert_eq!(bfs_actions(&s, |p| p == Pos::new(0, 3), "(0,3)").unwrap(), vec![E, E, E]);
    }

    #[test]
    fn bfs_unreachable_names_predicate() {
        let s = new_world(2, 2, &[], (0, 0)).unwrap();
        let err = bfs_actions(&s, |_| false, "nowhere").unwrap_err();
        assert_eq!(err.to_string(), "no reachable cell satisfies nowhere");
    }

    #[test]
    fn bfs_row_major_tie_break() {
        let s = new_world(3, 3, &[], (1, 1)).unwrap();
        // (0,1) and (1,0) are both one step away; (0,1) comes first row-major
        let path = bfs_actions(&s, |p| p == Pos::new(0, 1) || p == Pos::new(1, 0), "x").unwrap();
        assert_eq!(path, vec![Action::MoveNorth]);
    }

    #[test]
    fn chop_with_tool_in_hand() {
        let s = new_world(3, 1, &[((0, 0), Axe), ((0, 2), Tree)], (0, 0)).unwrap();
        let s = s.step(Action::PickUp).0;
        assert_eq!(plan_task(&s, ChopTree).unwrap(), vec![E, E]);
    }

    #[test]
    fn chop_fetches_axe() {
        let s = new_world(4, 1, &[((0, 1), Axe), ((0, 3), Tree)], (0, 0)).unwrap();
        assert_eq!(plan_task(&s, ChopTree).unwrap(), vec![E, Action::PickUp, E, E]);
    }

    #[test]
    fn chop_without_axe_fails() {
        let s = new_world(4, 1, &[((0, 3), Tree)], (0, 0)).unwrap();
        assert_eq!(
            plan_task(&s, ChopTree).unwrap_err(),
            PlanError::MissingPrerequisite {
                task: ChopTree,
                missing: Axe
            }
        );
    }

    #[test]
    fn empty_multiset() {
        let s = new_world(3, 3, &[], (0, 0)).unwrap();
        let plan = plan_sequence(&s, &[], &PlannerConfig::default()).unwrap();
        assert!(plan.trajectory.is_empty());
        assert_eq!(plan.trajectory.states, vec![s]);
    }

    #[test]
    fn bread_before_eating() {
        let s = new_world(
            5,
            5,
            &[((0, 4), Axe), ((4, 4), Wheat), ((2, 0), Hammer)],
            (0, 0),
        )
        .unwrap();
        for tasks in [[MakeBread, EatBread], [EatBread, MakeBread]] {
            let plan = plan_sequence(&s, &tasks, &PlannerConfig::default()).unwrap();
            assert_eq!(plan.order, vec![MakeBread, EatBread]);
            assert!(plan.trajectory.validate(&tasks));
        }
    }

    #[test]
    fn nearer_tool_first_when_shorter() {
        // Axe and Tree close to the start, Hammer and Rock far away.
        let s = new_world(
            6,
            1,
            &[((0, 1), Axe), ((0, 2), Tree), ((0, 4), Hammer), ((0, 5), Rock)],
            (0, 0),
        )
        .unwrap();
        let tasks = [BreakRock, ChopTree];
        let plan = plan_sequence(&s, &tasks, &PlannerConfig::default()).unwrap();
        // chop-first: E P E | E D E P E = 8 (axe dropped on (0,3))
        // rock-first walks to the hammer, then back for the axe: 13
        let chop_first = {
            let a = plan_task(&s, ChopTree).unwrap();
            let s2 = run(&s, &a);
            a.len() + plan_task(&s2, BreakRock).unwrap().len()
        };
        let rock_first = {
            let a = plan_task(&s, BreakRock).unwrap();
            let s2 = run(&s, &a);
            a.len() + plan_task(&s2, ChopTree).unwrap().len()
        };
        assert!(chop_first < rock_first);
        assert_eq!(plan.trajectory.len(), chop_first);
        assert_eq!(plan.order[0], ChopTree);
    }

    #[test]
    fn infeasible_multiset_names_task() {
        let s = new_world(4, 1, &[((0, 0), Axe), ((0, 3), Tree)], (0, 0)).unwrap();
        let err = plan_sequence(&s, &[ChopTree, ChopTree], &PlannerConfig::default()).unwrap_err();
        assert_eq!(err, PlanError::Infeasible { task: ChopTree });
        let err = plan_sequence(&s, &[BuildHouse], &PlannerConfig::default()).unwrap_err();
        assert_eq!(err, PlanError::Infeasible { task: BuildHouse });
    }

    #[test]
    fn flipped_action_fails_validation() {
        let s = new_world(4, 1, &[((0, 1), Axe), ((0, 3), Tree)], (0, 0)).unwrap();
        let plan = plan_sequence(&s, &[ChopTree], &PlannerConfig::default()).unwrap();
        assert!(plan.trajectory.validate(&[ChopTree]));
        let mut bad = plan.trajectory.clone();
        bad.actions[0] = Action::MoveWest;
        assert!(!bad.validate(&[ChopTree]));
        let replayed = Trajectory::from_actions(s, bad.actions.clone());
        assert!(!replayed.validate(&[ChopTree]));
    }

    #[test]
    fn greedy_and_search_agree_on_single_task() {
        let s = new_world(5, 5, &[((4, 0), Axe), ((0, 4), Tree), ((2, 2), Axe)], (0, 0)).unwrap();
        let search = plan_sequence(&s, &[ChopTree], &PlannerConfig::default()).unwrap();
        let greedy = plan_sequence(&s, &[ChopTree], &PlannerConfig { exhaustive_max: 0, exact_max_tasks: 0, ..PlannerConfig::default() }).unwrap();
        assert_eq!(search.trajectory.len(), greedy.trajectory.len());
    }

    #[test]
    fn eating_while_holding_drops_first() {
        let s = new_world(3, 1, &[((0, 0), Axe), ((0, 1), Wheat)], (0, 0)).unwrap();
        let plan = plan_sequence(&s, &[MakeBread, EatBread], &PlannerConfig::default()).unwrap();
        assert!(plan.trajectory.actions.contains(&Action::Drop));
        assert!(plan.trajectory.validate(&[MakeBread, EatBread]));
        // P E makes bread under the agent, then W D E P drops the axe on the
        // cell it came from and eats.
        assert_eq!(plan.trajectory.len(), 6);
    }
}
