//! Rotations and reflections of the grid.

use super::features::{ego_base, ego_cell, CELL_CHANNELS, EGO_CHANNELS};
use super::{feature_len, Action, GridState, Pos};

/// One of the eight symmetries of the square. Odd quarter turns and the two
/// diagonal reflections swap width and height, so on non-square grids only
/// [`Symmetry::valid_for`] elements apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symmetry(u8);

impl Symmetry {
    pub const COUNT: usize = 8;
    pub const IDENTITY: Symmetry = Symmetry(0);

    pub fn from_index(i: usize) -> Option<Symmetry> {
        (i < Self::COUNT).then_some(Symmetry(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = Symmetry> {
        (0..Self::COUNT as u8).map(Symmetry)
    }

    fn swaps_axes(self) -> bool {
        matches!(self.0, 1 | 3 | 6 | 7)
    }

    pub fn valid_for(self, width: usize, height: usize) -> bool {
        width == height || !self.swaps_axes()
    }

    /// Symmetries applicable to a `width × height` grid.
    pub fn for_grid(width: usize, height: usize) -> Vec<Symmetry> {
        Self::all().filter(|s| s.valid_for(width, height)).collect()
    }

    /// Image of a displacement `(dr, dc)`.
    fn map_delta(self, dr: i64, dc: i64) -> (i64, i64) {
        match self.0 {
            0 => (dr, dc),
            1 => (dc, -dr),
            2 => (-dr, -dc),
            3 => (-dc, dr),
            4 => (-dr, dc),
            5 => (dr, -dc),
            6 => (dc, dr),
            _ => (-dc, -dr),
        }
    }

    pub fn map_pos(self, p: Pos, width: usize, height: usize) -> Pos {
        let (r, c) = (p.row, p.col);
        let (h1, w1) = (height - 1, width - 1);
        let (nr, nc) = match self.0 {
            0 => (r, c),
            1 => (c, h1 - r),
            2 => (h1 - r, w1 - c),
            3 => (w1 - c, r),
            4 => (h1 - r, c),
            5 => (r, w1 - c),
            6 => (c, r),
            _ => (w1 - c, h1 - r),
        };
        Pos::new(nr, nc)
    }

    pub fn map_action(self, a: Action) -> Action {
        let (dr, dc) = match a {
            Action::MoveNorth => (-1, 0),
            Action::MoveSouth => (1, 0),
            Action::MoveEast => (0, 1),
            Action::MoveWest => (0, -1),
            other => return other,
        };
        match self.map_delta(dr, dc) {
            (-1, 0) => Action::MoveNorth,
            (1, 0) => Action::MoveSouth,
            (0, 1) => Action::MoveEast,
            _ => Action::MoveWest,
        }
    }

    /// Image of `state`; `None` when the symmetry does not fit the grid.
    pub fn apply(self, state: &GridState) -> Option<GridState> {
        let (w, h) = (state.width(), state.height());
        if !self.valid_for(w, h) {
            return None;
        }
        let placements: Vec<_> = state
            .positions()
            .filter_map(|p| state.cell(p).map(|k| (self.map_pos(p, w, h), k)))
            .collect();
        let (nw, nh) = if self.swaps_axes() { (h, w) } else { (w, h) };
        let s = GridState::new(nw, nh, &placements, self.map_pos(state.agent(), w, h)).ok()?;
        s.with_inventory(state.carried(), state.events()).ok()
    }

    /// Index map taking `featurize(s)` entries to `featurize(apply(s))` entries.
    pub fn feature_permutation(self, width: usize, height: usize) -> Option<Vec<u32>> {
        if !self.valid_for(width, height) {
            return None;
        }
        let cells = width * height;
        let mut perm: Vec<u32> = (0..feature_len(width, height) as u32).collect();
        let new_width = if self.swaps_axes() { height } else { width };
        for i in 0..cells {
            let q = self.map_pos(Pos::new(i / width, i % width), width, height);
            let j = q.row * new_width + q.col;
            for ch in 0..CELL_CHANNELS {
                perm[i * CELL_CHANNELS + ch] = (j * CELL_CHANNELS + ch) as u32;
            }
        }
        let base = ego_base(width, height);
        let (new_width, new_height) = if self.swaps_axes() { (height, width) } else { (width, height) };
        for dr in -(height as i64 - 1)..height as i64 {
            for dc in -(width as i64 - 1)..width as i64 {
                let (nr, nc) = self.map_delta(dr, dc);
                let from = base + ego_cell(width, height, dr, dc) * EGO_CHANNELS;
                let to = base + ego_cell(new_width, new_height, nr, nc) * EGO_CHANNELS;
                for ch in 0..EGO_CHANNELS {
                    perm[from + ch] = (to + ch) as u32;
                }
            }
        }
        Some(perm)
    }
}
