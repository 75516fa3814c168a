//! Symbolic observation encoding.
//!
//! Layout, in order:
//! - per cell (row-major), [`CELL_CHANNELS`] one-hot channels: the 8 object
//!   kinds in [`ObjectKind::ALL`] order, then the agent channel;
//! - one-hot carried slot over [`ObjectKind::CARRYABLE`];
//! - [`EVENT_CHANNELS`] counters squashed as `c / (1 + c)` (injective, in `[0, 1)`);
//! - an agent-centred copy of the object channels: a `(2H-1) × (2W-1)` window
//!   of offsets from the agent, row-major, [`EGO_CHANNELS`] per offset.

use super::{GridState, ObjectKind, TaskEvent};
use crate::nn::SparseVec;
use crate::num::Scalar;

pub const CELL_CHANNELS: usize = ObjectKind::ALL.len() + 1;
pub const EVENT_CHANNELS: usize = TaskEvent::COUNT;
pub const EGO_CHANNELS: usize = ObjectKind::ALL.len();
const AGENT_CHANNEL: usize = ObjectKind::ALL.len();

pub fn feature_len(width: usize, height: usize) -> usize {
    ego_base(width, height) + ego_cells(width, height) * EGO_CHANNELS
}

pub(crate) fn ego_base(width: usize, height: usize) -> usize {
    width * height * CELL_CHANNELS + ObjectKind::CARRYABLE.len() + EVENT_CHANNELS
}

pub(crate) fn ego_cells(width: usize, height: usize) -> usize {
    (2 * width - 1) * (2 * height - 1)
}

/// Window cell of offset `(dr, dc)` from the agent.
pub(crate) fn ego_cell(width: usize, height: usize, dr: i64, dc: i64) -> usize {
    let row = (dr + height as i64 - 1) as usize;
    let col = (dc + width as i64 - 1) as usize;
    row * (2 * width - 1) + col
}

fn squash<S: Scalar>(count: u32) -> S {
    let c = f64::from(count);
    S::of(c / (1.0 + c))
}

/// Non-zero entries of the feature vector, in increasing index order.
fn entries<S: Scalar>(state: &GridState) -> Vec<(u32, S)> {
    let (w, h) = (state.width(), state.height());
    let agent_cell = state.agent().row * w + state.agent().col;
    let mut out = Vec::with_capacity(state.object_count() + 8);
    for (i, cell) in state.cells().iter().enumerate() {
        let base = i * CELL_CHANNELS;
        if let Some(k) = cell {
            out.push(((base + k.index()) as u32, S::one()));
        }
        if i == agent_cell {
            out.push(((base + AGENT_CHANNEL) as u32, S::one()));
        }
    }
    let carried_base = w * h * CELL_CHANNELS;
    if let Some(ci) = state.carried().and_then(ObjectKind::carried_index) {
        out.push(((carried_base + ci) as u32, S::one()));
    }
    let event_base = carried_base + ObjectKind::CARRYABLE.len();
    for (j, &c) in state.events().as_array().iter().enumerate() {
        if c > 0 {
            out.push(((event_base + j) as u32, squash(c)));
        }
    }
    let base = ego_base(w, h);
    let agent = state.agent();
    let mut ego: Vec<(u32, S)> = state
        .cells()
        .iter()
        .enumerate()
        .filter_map(|(i, cell)| {
            let k = (*cell)?;
            let dr = (i / w) as i64 - agent.row as i64;
            let dc = (i % w) as i64 - agent.col as i64;
            Some(((base + ego_cell(w, h, dr, dc) * EGO_CHANNELS + k.index()) as u32, S::one()))
        })
        .collect();
    ego.sort_by_key(|e| e.0);
    out.extend(ego);
    out
}

/// Dense feature vector of length [`feature_len`].
pub fn featurize<S: Scalar>(state: &GridState) -> Vec<S> {
    let mut v = vec![S::zero(); feature_len(state.width(), state.height())];
    for (i, x) in entries::<S>(state) {
        v[i as usize] = x;
    }
    v
}

/// Same vector as [`featurize`], stored sparsely.
pub fn featurize_sparse<S: Scalar>(state: &GridState) -> SparseVec<S> {
    let len = feature_len(state.width(), state.height());
    let (idx, val) = entries::<S>(state).into_iter().unzip();
    SparseVec::new(len, idx, val).expect("feature entries are sorted and in range")
}
