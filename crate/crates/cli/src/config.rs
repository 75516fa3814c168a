//! Merged run configuration: defaults, then a key=value file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use caselab::compose::{ModelConfig, Variant};
use caselab::craftworld::TaskKind;
use caselab::datagen::{GenConfig, HoldoutSpec};
use caselab::fingerprint::{canonical_text, fingerprint};
use caselab::train::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    map: BTreeMap<String, String>,
}

fn layers(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

/// Every recognised key with its default value.
pub fn defaults(command: &str) -> BTreeMap<String, String> {
    let gen = GenConfig::default();
    let train = TrainConfig::default();
    let m = &train.model;
    let pairs: &[(&str, String)] = &[
        ("command", command.to_string()),
        ("seed", "0".into()),
        ("out", "out".into()),
        ("workers", "1".into()),
        ("scalar", "f32".into()),
        // gen
        ("pairs", "2000".into()),
        ("test_pairs", "200".into()),
        ("grid", format!("{}x{}", gen.width, gen.height)),
        ("tasks_min", gen.tasks_min.to_string()),
        ("tasks_max", gen.tasks_max.to_string()),
        ("holdout_mode", "composition".into()),
        ("holdout_fraction", "0.2".into()),
        // train
        ("data", "data".into()),
        ("variant", m.variant.to_string()),
        ("k", train.k.to_string()),
        ("lambda_h", format!("{:?}", train.lambda_h)),
        ("lambda_p", format!("{:?}", train.lambda_p)),
        ("margin", format!("{:?}", train.margin)),
        ("epochs", train.epochs.to_string()),
        ("batch", train.batch.to_string()),
        ("lr", format!("{:?}", train.lr)),
        ("latent_dim", m.latent_dim.to_string()),
        ("encoder_hidden", layers(&m.encoder_hidden)),
        ("policy_hidden", layers(&m.policy_hidden)),
        ("augment", train.augment.to_string()),
        ("log_every", train.log_every.to_string()),
        ("checkpoint_every", train.checkpoint_every.to_string()),
        ("halt_at", "0".into()),
        ("resume", "false".into()),
        // eval and grids
        ("checkpoint", "".into()),
        ("budget_mult", "2".into()),
        ("ks", "1-8".into()),
        ("seeds", "0-7".into()),
        ("variants", Variant::ALL.iter().map(|v| v.name()).collect::<Vec<_>>().join(",")),
        ("lengths", "2-8".into()),
        ("per_length", "100".into()),
    ];
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Parses `key=value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    /// `file` entries override defaults and `flags` override both.
    pub fn merge(
        command: &str,
        file: Option<&Path>,
        flags: BTreeMap<String, String>,
    ) -> Result<Self, CliError> {
        let mut map = defaults(command);
        let mut layer = |entries: BTreeMap<String, String>, origin: &str| -> Result<(), CliError> {
            for (k, v) in entries {
                if !map.contains_key(&k) {
                    return Err(CliError::Usage(format!("unknown config key {k:?} in {origin}")));
                }
                if k == "command" {
                    if v != command {
                        return Err(CliError::Usage(format!(
                            "config was written by `{v}`, not `{command}`"
                        )));
                    }
                    continue;
                }
                map.insert(k, v);
            }
            Ok(())
        };
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            layer(parse_config_text(&text)?, &path.display().to_string())?;
        }
        layer(flags, "flags")?;
        Ok(RunConfig { map })
    }

    pub fn get(&self, key: &str) -> &str {
        self.map.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::Usage(format!("invalid value {v:?} for {key}")))
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.get(key))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out")
    }

    pub fn text(&self) -> String {
        canonical_text(&self.map)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.map)
    }

    /// Writes `run_config.txt` and `fingerprint.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join("run_config.txt"), self.text())?;
        fs::write(dir.join("fingerprint.txt"), format!("{}\n", self.fingerprint()))
    }

    pub fn grid(&self) -> Result<(usize, usize), CliError> {
        let g = self.get("grid");
        let bad = || CliError::Usage(format!("invalid grid {g:?} (expected WxH or N)"));
        match g.split_once('x') {
            Some((w, h)) => Ok((w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?)),
            None => {
                let n = g.parse().map_err(|_| bad())?;
                Ok((n, n))
            }
        }
    }

    pub fn gen_config(&self) -> Result<GenConfig, CliError> {
        let (width, height) = self.grid()?;
        let c = GenConfig {
            width,
            height,
            tasks_min: self.parse("tasks_min")?,
            tasks_max: self.parse("tasks_max")?,
            ..GenConfig::default()
        };
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }

    pub fn holdout(&self) -> Result<HoldoutSpec, CliError> {
        let mode = self.get("holdout_mode");
        if mode == "composition" {
            return Ok(HoldoutSpec::Composition {
                fraction: self.parse("holdout_fraction")?,
            });
        }
        if let Some(kind) = mode.strip_prefix("exclude:") {
            let kind = TaskKind::from_name(kind)
                .ok_or_else(|| CliError::Usage(format!("unknown task kind {kind:?}")))?;
            return Ok(HoldoutSpec::ExcludeKind(kind));
        }
        Err(CliError::Usage(format!(
            "invalid holdout mode {mode:?} (expected composition or exclude:<Task>)"
        )))
    }

    /// Training settings for a dataset of the given grid size.
    pub fn train_config(&self, width: usize, height: usize) -> Result<TrainConfig, CliError> {
        let layers = |key: &str| -> Result<Vec<usize>, CliError> {
            let v = self.get(key);
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split('x')
                .map(|p| p.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("invalid layer list {v:?} for {key}")))
        };
        let variant: Variant = self
            .get("variant")
            .parse()
            .map_err(CliError::Usage)?;
        let c = TrainConfig {
            model: ModelConfig {
                variant,
                width,
                height,
                latent_dim: self.parse("latent_dim")?,
                encoder_hidden: layers("encoder_hidden")?,
                policy_hidden: layers("policy_hidden")?,
            },
            k: self.parse("k")?,
            lambda_h: self.parse("lambda_h")?,
            lambda_p: self.parse("lambda_p")?,
            margin: self.parse("margin")?,
            lr: self.parse("lr")?,
            batch: self.parse("batch")?,
            epochs: self.parse("epochs")?,
            seed: self.parse("seed")?,
            augment: self.parse("augment")?,
            log_every: self.parse("log_every")?,
            checkpoint_every: self.parse("checkpoint_every")?,
            halt_at: Some(self.parse::<u64>("halt_at")?).filter(|&n| n > 0),
            ..TrainConfig::default()
        };
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }

    pub fn u64_list(&self, key: &str) -> Result<Vec<u64>, CliError> {
        parse_list(self.get(key)).map_err(|e| CliError::Usage(format!("{key}: {e}")))
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        Ok(self.u64_list(key)?.into_iter().map(|x| x as usize).collect())
    }

    pub fn variants(&self) -> Result<Vec<Variant>, CliError> {
        self.get("variants")
            .split(',')
            .map(|v| v.parse().map_err(CliError::Usage))
            .collect()
    }
}

/// Comma-separated integers and inclusive `a-b` ranges.
pub fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let num = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("bad number {x:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_list("3-1").is_err());
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.txt");
        fs::write(&file, "# comment\nk = 3\nepochs=5\n").unwrap();
        let flags = BTreeMap::from([("k".to_string(), "6".to_string())]);
        let c = RunConfig::merge("train", Some(&file), flags).unwrap();
        assert_eq!(c.get("k"), "6");
        assert_eq!(c.get("epochs"), "5");
        assert_eq!(c.get("batch"), TrainConfig::default().batch.to_string());
    }

    #[test]
    fn unknown_keys_and_foreign_commands_are_rejected() {
        let flags = BTreeMap::from([("nope".to_string(), "1".to_string())]);
        assert!(matches!(RunConfig::merge("gen", None, flags), Err(CliError::Usage(_))));
        let flags = BTreeMap::from([("command".to_string(), "train".to_string())]);
        assert!(matches!(RunConfig::merge("gen", None, flags), Err(CliError::Usage(_))));
    }

    #[test]
    fn written_config_reloads_identically() {
        let dir = tempfile::tempdir().unwrap();
        let flags = BTreeMap::from([("lr".to_string(), "0.002".to_string())]);
        let c = RunConfig::merge("train", None, flags).unwrap();
        c.write_to(dir.path()).unwrap();
        let again = RunConfig::merge("train", Some(&dir.path().join("run_config.txt")), BTreeMap::new()).unwrap();
        assert_eq!(again, c);
    }
}
