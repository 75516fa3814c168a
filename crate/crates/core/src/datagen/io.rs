//! Line-delimited JSON dataset files.
//!
//! One record per line:
//!
//! ```text
//! {"version":1,"pair_id":0,
//!  "train":{"map_seed":..,"grid":"<ascii render>","tasks":["ChopTree",..],"actions":"EEPN.."},
//!  "reference":{..}}
//! ```
//!
//! Only the initial grid and the action string are stored; states are
//! rebuilt by replay and every trajectory is re-validated on load.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Episode, EpisodePair};
use crate::craftworld::{parse_ascii, render_ascii, Action, TaskKind};
use crate::expert::Trajectory;

pub const DATASET_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeRecord {
    map_seed: u64,
    grid: String,
    tasks: Vec<TaskKind>,
    actions: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    version: u64,
    pair_id: u64,
    train: EpisodeRecord,
    reference: EpisodeRecord,
}

fn to_record(ep: &Episode) -> EpisodeRecord {
    EpisodeRecord {
        map_seed: ep.map_seed,
        grid: render_ascii(ep.world()),
        tasks: ep.tasks.clone(),
        actions: ep.trajectory.actions.iter().map(|a| a.code()).collect(),
    }
}

fn from_record(line: usize, rec: EpisodeRecord) -> Result<Episode, DataError> {
    let bad = |msg: String| DataError::Malformed { line, msg };
    let world = parse_ascii(&rec.grid).map_err(|e| bad(format!("grid: {e}")))?;
    let actions = rec
        .actions
        .chars()
        .map(|c| Action::from_code(c).ok_or_else(|| bad(format!("unknown action code {c:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let trajectory = Trajectory::from_actions(world, actions);
    trajectory
        .check(&rec.tasks)
        .map_err(|e| bad(format!("trajectory does not validate: {e}")))?;
    Ok(Episode {
        map_seed: rec.map_seed,
        tasks: rec.tasks,
        trajectory,
    })
}

/// Serialized form of one pair, without the trailing newline.
pub fn record_line(pair: &EpisodePair) -> String {
    let rec = PairRecord {
        version: DATASET_VERSION,
        pair_id: pair.pair_id,
        train: to_record(&pair.train),
        reference: to_record(&pair.reference),
    };
    serde_json::to_string(&rec).expect("records serialize")
}

/// Parses one record; `line` is the 1-based line number used in errors.
pub fn parse_record(line: usize, text: &str) -> Result<EpisodePair, DataError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| DataError::Malformed {
        line,
        msg: e.to_string(),
    })?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(DATASET_VERSION) => {}
        Some(found) => {
            return Err(DataError::Version {
                line,
                found,
                expected: DATASET_VERSION,
            })
        }
        None => {
            return Err(DataError::Malformed {
                line,
                msg: "missing version field".into(),
            })
        }
    }
    let rec: PairRecord = serde_json::from_value(value).map_err(|e| DataError::Malformed {
        line,
        msg: e.to_string(),
    })?;
    let pair = EpisodePair {
        pair_id: rec.pair_id,
        train: from_record(line, rec.train)?,
        reference: from_record(line, rec.reference)?,
    };
    pair.check().map_err(|msg| DataError::Malformed { line, msg })?;
    Ok(pair)
}

pub fn write_dataset(pairs: &[EpisodePair], path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for p in pairs {
        w.write_all(record_line(p).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<EpisodePair>, DataError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(i + 1, l))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_pair, GenConfig};
    use TaskKind::*;

    fn pairs() -> Vec<EpisodePair> {
        let c = GenConfig::default();
        vec![
            gen_pair(1, 0, &[ChopTree, BuildHouse], &c).unwrap(),
            gen_pair(2, 1, &[MakeBread, BreakRock, EatBread], &c).unwrap(),
        ]
    }

    #[test]
    fn empty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&[], &path).unwrap();
        assert!(read_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ps = pairs();
        write_dataset(&ps, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ps);
    }

    #[test]
    fn truncated_file_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&pairs(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() - 40]).unwrap();
        match read_dataset(&path) {
            Err(DataError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed line 2, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_rejected() {
        let line = record_line(&pairs()[0]).replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(
            parse_record(5, &line),
            Err(DataError::Version { line: 5, found: 2, .. })
        ));
        let line = record_line(&pairs()[0]).replacen("\"version\":1,", "", 1);
        assert!(matches!(parse_record(1, &line), Err(DataError::Malformed { .. })));
    }

    #[test]
    fn corrupted_actions_rejected() {
        let p = &pairs()[0];
        let good: String = p.train.trajectory.actions.iter().map(|a| a.code()).collect();
        let mut bad = good.clone();
        bad.truncate(good.len() - 1);
        let line = record_line(p).replacen(&format!("\"actions\":\"{good}\""), &format!("\"actions\":\"{bad}\""), 1);
        assert!(matches!(parse_record(3, &line), Err(DataError::Malformed { line: 3, .. })));
    }
}
