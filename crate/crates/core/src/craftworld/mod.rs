//! Deterministic, fully observable crafting grid world.
//!
//! The world is a `height x width` grid holding at most one object per cell.
//! The agent may stand on any cell, including cells holding objects. Carrying
//! a tool onto a cell with the matching terrain object fires a transformation:
//!
//! | carried | entered cell | result      | event          |
//! |---------|--------------|-------------|----------------|
//! | Axe     | Tree         | Log         | `LogsMade`     |
//! | Hammer  | Log          | House       | `HousesBuilt`  |
//! | Axe     | Wheat        | Bread       | `BreadMade`    |
//! | Hammer  | Rock         | (empty)     | `RocksBroken`  |
//!
//! Picking up Bread eats it (`BreadEaten`) and leaves the hands empty.
//! Every ill-posed action is a no-op that is flagged in the [`StepReport`].

mod features;
mod render;
mod symmetry;

pub use features::{feature_len, featurize, featurize_sparse, EVENT_CHANNELS, CELL_CHANNELS};
pub use render::{parse_ascii, render_ascii};
pub use symmetry::Symmetry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("grid dimensions must be positive, got {width}x{height}")]
    EmptyGrid { width: usize, height: usize },
    #[error("position ({row}, {col}) is outside the {height}x{width} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },
    #[error("two objects placed on cell ({row}, {col})")]
    DuplicatePlacement { row: usize, col: usize },
    #[error("{0:?} cannot be carried")]
    NotCarryable(ObjectKind),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectKind {
    Tree,
    Log,
    House,
    Rock,
    Wheat,
    Bread,
    Axe,
    Hammer,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 8] = [
        ObjectKind::Tree,
        ObjectKind::Log,
        ObjectKind::House,
        ObjectKind::Rock,
        ObjectKind::Wheat,
        ObjectKind::Bread,
        ObjectKind::Axe,
        ObjectKind::Hammer,
    ];

    /// Kinds that can sit in the agent's hands, in carried-channel order.
    pub const CARRYABLE: [ObjectKind; 4] = [
        ObjectKind::Axe,
        ObjectKind::Hammer,
        ObjectKind::Wheat,
        ObjectKind::Bread,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_carryable(self) -> bool {
        matches!(
            self,
            ObjectKind::Axe | ObjectKind::Hammer | ObjectKind::Wheat | ObjectKind::Bread
        )
    }

    pub fn carried_index(self) -> Option<usize> {
        Self::CARRYABLE.iter().position(|&k| k == self)
    }
}

/// Agent actions. The discriminant is the policy logit index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveNorth = 0,
    MoveSouth = 1,
    MoveEast = 2,
    MoveWest = 3,
    PickUp = 4,
    Drop = 5,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; 6] = [
        Action::MoveNorth,
        Action::MoveSouth,
        Action::MoveEast,
        Action::MoveWest,
        Action::PickUp,
        Action::Drop,
    ];
    pub const MOVES: [Action; 4] = [
        Action::MoveNorth,
        Action::MoveSouth,
        Action::MoveEast,
        Action::MoveWest,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    /// Single-letter code used in dataset files.
    pub fn code(self) -> char {
        match self {
            Action::MoveNorth => 'N',
            Action::MoveSouth => 'S',
            Action::MoveEast => 'E',
            Action::MoveWest => 'W',
            Action::PickUp => 'P',
            Action::Drop => 'D',
        }
    }

    pub fn from_code(c: char) -> Option<Action> {
        Self::ALL.iter().copied().find(|a| a.code() == c)
    }

    fn delta(self) -> Option<(isize, isize)> {
        match self {
            Action::MoveNorth => Some((-1, 0)),
            Action::MoveSouth => Some((1, 0)),
            Action::MoveEast => Some((0, 1)),
            Action::MoveWest => Some((0, -1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Pos { row, col }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl From<(usize, usize)> for Pos {
    fn from((row, col): (usize, usize)) -> Self {
        Pos { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskEvent {
    LogsMade = 0,
    HousesBuilt = 1,
    BreadMade = 2,
    BreadEaten = 3,
    RocksBroken = 4,
}

impl TaskEvent {
    pub const COUNT: usize = 5;
    pub const ALL: [TaskEvent; 5] = [
        TaskEvent::LogsMade,
        TaskEvent::HousesBuilt,
        TaskEvent::BreadMade,
        TaskEvent::BreadEaten,
        TaskEvent::RocksBroken,
    ];
}

/// Monotone event counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Events([u32; TaskEvent::COUNT]);

impl Events {
    pub fn get(&self, e: TaskEvent) -> u32 {
        self.0[e as usize]
    }

    pub fn as_array(&self) -> [u32; TaskEvent::COUNT] {
        self.0
    }

    pub fn from_array(a: [u32; TaskEvent::COUNT]) -> Self {
        Events(a)
    }

    fn bump(&mut self, e: TaskEvent) {
        self.0[e as usize] += 1;
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    ChopTree,
    BuildHouse,
    MakeBread,
    EatBread,
    BreakRock,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::ChopTree,
        TaskKind::BuildHouse,
        TaskKind::MakeBread,
        TaskKind::EatBread,
        TaskKind::BreakRock,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn event(self) -> TaskEvent {
        match self {
            TaskKind::ChopTree => TaskEvent::LogsMade,
            TaskKind::BuildHouse => TaskEvent::HousesBuilt,
            TaskKind::MakeBread => TaskEvent::BreadMade,
            TaskKind::EatBread => TaskEvent::BreadEaten,
            TaskKind::BreakRock => TaskEvent::RocksBroken,
        }
    }

    /// Tool that must be carried; `None` means the hands must be empty.
    pub fn tool(self) -> Option<ObjectKind> {
        match self {
            TaskKind::ChopTree | TaskKind::MakeBread => Some(ObjectKind::Axe),
            TaskKind::BuildHouse | TaskKind::BreakRock => Some(ObjectKind::Hammer),
            TaskKind::EatBread => None,
        }
    }

    /// Object consumed by the task.
    pub fn target(self) -> ObjectKind {
        match self {
            TaskKind::ChopTree => ObjectKind::Tree,
            TaskKind::BuildHouse => ObjectKind::Log,
            TaskKind::MakeBread => ObjectKind::Wheat,
            TaskKind::EatBread => ObjectKind::Bread,
            TaskKind::BreakRock => ObjectKind::Rock,
        }
    }

    /// Task whose completion produces this task's target, if any.
    pub fn producer(self) -> Option<TaskKind> {
        match self {
            TaskKind::BuildHouse => Some(TaskKind::ChopTree),
            TaskKind::EatBread => Some(TaskKind::MakeBread),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ChopTree => "ChopTree",
            TaskKind::BuildHouse => "BuildHouse",
            TaskKind::MakeBread => "MakeBread",
            TaskKind::EatBread => "EatBread",
            TaskKind::BreakRock => "BreakRock",
        }
    }

    pub fn from_name(s: &str) -> Option<TaskKind> {
        Self::ALL.iter().copied().find(|t| t.name() == s)
    }
}

/// Multiplicity of each task kind in a task list, indexed by [`TaskKind::index`].
pub fn task_counts(tasks: &[TaskKind]) -> [u32; 5] {
    let mut counts = [0; 5];
    for t in tasks {
        counts[t.index()] += 1;
    }
    counts
}

/// Transformation fired when the agent carries `tool` onto `terrain`.
pub fn transformation(tool: ObjectKind, terrain: ObjectKind) -> Option<(Option<ObjectKind>, TaskEvent)> {
    use ObjectKind::*;
    match (tool, terrain) {
        (Axe, Tree) => Some((Some(Log), TaskEvent::LogsMade)),
        (Hammer, Log) => Some((Some(House), TaskEvent::HousesBuilt)),
        (Axe, Wheat) => Some((Some(Bread), TaskEvent::BreadMade)),
        (Hammer, Rock) => Some((None, TaskEvent::RocksBroken)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transformation {
    pub pos: Pos,
    pub from: ObjectKind,
    pub to: Option<ObjectKind>,
    pub event: TaskEvent,
}

/// What happened during one [`GridState::step`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    /// A move was clamped at the boundary.
    pub blocked: bool,
    /// PickUp/Drop had no effect.
    pub noop: bool,
    pub picked_up: Option<ObjectKind>,
    pub dropped: Option<ObjectKind>,
    pub eaten: bool,
    pub transformed: Option<Transformation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    width: usize,
    height: usize,
    cells: Vec<Option<ObjectKind>>,
    agent: Pos,
    carried: Option<ObjectKind>,
    events: Events,
}

/// Fixed 8x8 layout with one object of every kind, used by fixtures and docs.
pub const STANDARD_PLACEMENTS: [(Pos, ObjectKind); 8] = [
    (Pos::new(1, 1), ObjectKind::Axe),
    (Pos::new(1, 6), ObjectKind::Tree),
    (Pos::new(2, 3), ObjectKind::Wheat),
    (Pos::new(3, 5), ObjectKind::Hammer),
    (Pos::new(4, 2), ObjectKind::Rock),
    (Pos::new(5, 6), ObjectKind::Log),
    (Pos::new(6, 1), ObjectKind::Bread),
    (Pos::new(7, 4), ObjectKind::House),
];

impl GridState {
    pub fn new(
        width: usize,
        height: usize,
        placements: &[(Pos, ObjectKind)],
        agent: Pos,
    ) -> Result<Self, WorldError> {
        if width == 0 || height == 0 {
            return Err(WorldError::EmptyGrid { width, height });
        }
        let check = |p: Pos| {
            if p.row < height && p.col < width {
                Ok(())
            } else {
                Err(WorldError::OutOfBounds {
                    row: p.row,
                    col: p.col,
                    width,
                    height,
                })
            }
        };
        check(agent)?;
        let mut cells = vec![None; width * height];
        for &(p, kind) in placements {
            check(p)?;
            let cell = &mut cells[p.row * width + p.col];
            if cell.is_some() {
                return Err(WorldError::DuplicatePlacement { row: p.row, col: p.col });
            }
            *cell = Some(kind);
        }
        Ok(GridState {
            width,
            height,
            cells,
            agent,
            carried: None,
            events: Events::default(),
        })
    }

    /// Replaces the carried slot and counters; used by fixture parsing.
    pub fn with_inventory(
        mut self,
        carried: Option<ObjectKind>,
        events: Events,
    ) -> Result<Self, WorldError> {
        if let Some(k) = carried {
            if !k.is_carryable() {
                return Err(WorldError::NotCarryable(k));
            }
        }
        self.carried = carried;
        self.events = events;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn agent(&self) -> Pos {
        self.agent
    }

    pub fn carried(&self) -> Option<ObjectKind> {
        self.carried
    }

    pub fn events(&self) -> Events {
        self.events
    }

    pub fn cell(&self, p: Pos) -> Option<ObjectKind> {
        self.cells[p.row * self.width + p.col]
    }

    pub fn cells(&self) -> &[Option<ObjectKind>] {
        &self.cells
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.row < self.height && p.col < self.width
    }

    /// Row-major iterator over every cell position.
    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height).flat_map(move |r| (0..self.width).map(move |c| Pos::new(r, c)))
    }

    /// Row-major positions holding `kind`.
    pub fn find(&self, kind: ObjectKind) -> Vec<Pos> {
        self.positions().filter(|&p| self.cell(p) == Some(kind)).collect()
    }

    pub fn count(&self, kind: ObjectKind) -> usize {
        self.cells.iter().filter(|c| **c == Some(kind)).count()
    }

    pub fn object_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Neighbour reached by a move action, or `None` at a wall.
    pub fn neighbor(&self, p: Pos, action: Action) -> Option<Pos> {
        let (dr, dc) = action.delta()?;
        let row = p.row.checked_add_signed(dr)?;
        let col = p.col.checked_add_signed(dc)?;
        let q = Pos::new(row, col);
        self.in_bounds(q).then_some(q)
    }

    fn set_cell(&mut self, p: Pos, v: Option<ObjectKind>) {
        self.cells[p.row * self.width + p.col] = v;
    }

    /// Applies one action and returns the successor state.
    pub fn step(&self, action: Action) -> (GridState, StepReport) {
        let mut next = self.clone();
        let mut report = StepReport::default();
        match action {
            Action::MoveNorth | Action::MoveSouth | Action::MoveEast | Action::MoveWest => {
                match self.neighbor(self.agent, action) {
                    None => report.blocked = true,
                    Some(q) => {
                        next.agent = q;
                        if let (Some(tool), Some(terrain)) = (next.carried, next.cell(q)) {
                            if let Some((to, event)) = transformation(tool, terrain) {
                                next.set_cell(q, to);
                                next.events.bump(event);
                                report.transformed = Some(Transformation {
                                    pos: q,
                                    from: terrain,
                                    to,
                                    event,
                                });
                            }
                        }
                    }
                }
            }
            Action::PickUp => match (self.carried, self.cell(self.agent)) {
                (None, Some(ObjectKind::Bread)) => {
                    next.set_cell(self.agent, None);
                    next.events.bump(TaskEvent::BreadEaten);
                    report.picked_up = Some(ObjectKind::Bread);
                    report.eaten = true;
                }
                (None, Some(k)) if k.is_carryable() => {
                    next.set_cell(self.agent, None);
                    next.carried = Some(k);
                    report.picked_up = Some(k);
                }
                _ => report.noop = true,
            },
            Action::Drop => match (self.carried, self.cell(self.agent)) {
                (Some(k), None) => {
                    next.set_cell(self.agent, Some(k));
                    next.carried = None;
                    report.dropped = Some(k);
                }
                _ => report.noop = true,
            },
        }
        (next, report)
    }

    /// Replays `actions` and returns every visited state, starting with `self`.
    pub fn rollout(&self, actions: &[Action]) -> Vec<GridState> {
        let mut states = Vec::with_capacity(actions.len() + 1);
        states.push(self.clone());
        for &a in actions {
            let next = states.last().expect("non-empty").step(a).0;
            states.push(next);
        }
        states
    }

    /// Whether the counters cover every task of `tasks` with multiplicity.
    pub fn tasks_done(&self, tasks: &[TaskKind]) -> bool {
        let counts = task_counts(tasks);
        TaskKind::ALL
            .iter()
            .all(|t| self.events.get(t.event()) >= counts[t.index()])
    }

    /// Number of task occurrences in `tasks` already covered by the counters.
    pub fn tasks_completed(&self, tasks: &[TaskKind]) -> usize {
        let counts = task_counts(tasks);
        TaskKind::ALL
            .iter()
            .map(|t| self.events.get(t.event()).min(counts[t.index()]) as usize)
            .sum()
    }
}

/// `new_world` with the fixed-row `(row, col)` tuple interface.
pub fn new_world(
    width: usize,
    height: usize,
    placements: &[((usize, usize), ObjectKind)],
    agent: (usize, usize),
) -> Result<GridState, WorldError> {
    let placements: Vec<(Pos, ObjectKind)> =
        placements.iter().map(|&(p, k)| (Pos::from(p), k)).collect();
    GridState::new(width, height, &placements, agent.into())
}

pub fn task_done(state: &GridState, task: TaskKind) -> bool {
    state.events().get(task.event()) >= 1
}
