//! ASCII rendering and parsing.
//!
//! Glyph table (stable, also used by the dataset format):
//!
//! | object | glyph | with agent on top |
//! |--------|-------|-------------------|
//! | empty  | `·`   | `@`               |
//! | Tree   | `T`   | `t`               |
//! | Log    | `L`   | `l`               |
//! | House  | `H`   | `h`               |
//! | Rock   | `R`   | `r`               |
//! | Wheat  | `W`   | `w`               |
//! | Bread  | `B`   | `b`               |
//! | Axe    | `A`   | `a`               |
//! | Hammer | `M`   | `m`               |
//!
//! One line per grid row. A trailing status line
//! `# carried=<glyph|-> events=<c0>,<c1>,<c2>,<c3>,<c4>` is emitted only when
//! the agent carries something or any counter is non-zero.

use super::{Events, GridState, ObjectKind, Pos, TaskEvent, WorldError};

const EMPTY: char = '·';
const AGENT: char = '@';

fn glyph(kind: ObjectKind) -> char {
    match kind {
        ObjectKind::Tree => 'T',
        ObjectKind::Log => 'L',
        ObjectKind::House => 'H',
        ObjectKind::Rock => 'R',
        ObjectKind::Wheat => 'W',
        ObjectKind::Bread => 'B',
        ObjectKind::Axe => 'A',
        ObjectKind::Hammer => 'M',
    }
}

fn from_glyph(c: char) -> Option<ObjectKind> {
    ObjectKind::ALL.into_iter().find(|&k| glyph(k) == c)
}

pub fn render_ascii(state: &GridState) -> String {
    let mut out = String::with_capacity((state.width() * 2 + 1) * state.height());
    for r in 0..state.height() {
        for c in 0..state.width() {
            let p = Pos::new(r, c);
            let here = p == state.agent();
            let ch = match (state.cell(p), here) {
                (None, false) => EMPTY,
                (None, true) => AGENT,
                (Some(k), false) => glyph(k),
                (Some(k), true) => glyph(k).to_ascii_lowercase(),
            };
            out.push(ch);
        }
        out.push('\n');
    }
    if state.carried().is_some() || !state.events().is_zero() {
        let carried = state.carried().map(glyph).unwrap_or('-');
        let ev = state.events().as_array();
        out.push_str(&format!(
            "# carried={carried} events={},{},{},{},{}\n",
            ev[0], ev[1], ev[2], ev[3], ev[4]
        ));
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> WorldError {
    WorldError::Parse { line, msg: msg.into() }
}

fn parse_status(line_no: usize, line: &str) -> Result<(Option<ObjectKind>, Events), WorldError> {
    let rest = line
        .strip_prefix("# carried=")
        .ok_or_else(|| parse_err(line_no, "expected status line"))?;
    let (carried, events) = rest
        .split_once(" events=")
        .ok_or_else(|| parse_err(line_no, "missing events field"))?;
    let carried = match carried {
        "-" => None,
        g => {
            let mut chars = g.chars();
            match (chars.next().and_then(from_glyph), chars.next()) {
                (Some(k), None) => Some(k),
                _ => return Err(parse_err(line_no, format!("bad carried glyph {g:?}"))),
            }
        }
    };
    let counts: Vec<u32> = events
        .split(',')
        .map(|s| s.parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(line_no, format!("bad event counter: {e}")))?;
    let counts: [u32; TaskEvent::COUNT] = counts
        .try_into()
        .map_err(|_| parse_err(line_no, "expected 5 event counters"))?;
    Ok((carried, Events::from_array(counts)))
}

/// Inverse of [`render_ascii`]. Line numbers in errors are 1-based.
pub fn parse_ascii(text: &str) -> Result<GridState, WorldError> {
    let mut rows: Vec<Vec<char>> = Vec::new();
    let mut status = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if status.is_some() {
            return Err(parse_err(line_no, "content after status line"));
        }
        if line.starts_with('#') {
            status = Some(parse_status(line_no, line)?);
            continue;
        }
        let row: Vec<char> = line.chars().collect();
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(line_no, "ragged row"));
            }
        }
        rows.push(row);
    }
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if height == 0 || width == 0 {
        return Err(parse_err(1, "empty grid"));
    }
    let mut placements = Vec::new();
    let mut agent = None;
    for (r, row) in rows.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            let p = Pos::new(r, c);
            let (kind, here) = match ch {
                EMPTY => (None, false),
                AGENT => (None, true),
                ch if ch.is_ascii_lowercase() => match from_glyph(ch.to_ascii_uppercase()) {
                    Some(k) => (Some(k), true),
                    None => return Err(parse_err(r + 1, format!("unknown glyph {ch:?}"))),
                },
                ch => match from_glyph(ch) {
                    Some(k) => (Some(k), false),
                    None => return Err(parse_err(r + 1, format!("unknown glyph {ch:?}"))),
                },
            };
            if let Some(k) = kind {
                placements.push((p, k));
            }
            if here {
                if agent.is_some() {
                    return Err(parse_err(r + 1, "more than one agent"));
                }
                agent = Some(p);
            }
        }
    }
    let agent = agent.ok_or_else(|| parse_err(height, "no agent on grid"))?;
    let state = GridState::new(width, height, &placements, agent)?;
    match status {
        Some((carried, events)) => state.with_inventory(carried, events),
        None => Ok(state),
    }
}
