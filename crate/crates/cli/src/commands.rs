use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::Context;
use caselab::compose::{CaseModel, ModelConfig};
use caselab::craftworld::TaskKind;
use caselab::datagen::{
    enumerate_multisets, gen_dataset, read_dataset, split_tasks, write_dataset, DataError, EpisodePair, GenConfig,
    TaskSplit,
};
use caselab::eval::{
    ablate_k, compare_variants, success_rate, summarize_table, sweep_sequence_length, table_csv, write_eval_csv,
    write_sweep_csv, EvalError, EvalRow, GridSettings, RunSpec,
};
use caselab::fingerprint::{digest_bytes, subseed};
use caselab::nn::Checkpoint;
use caselab::num::Scalar;
use caselab::train::{train_loop, Dataset, TrainError, TrainOutputs};

use crate::config::RunConfig;
use crate::plot::{parse_chart, render_svg};
use crate::CliError;

fn data_err(e: DataError) -> CliError {
    match e {
        DataError::Config(_) | DataError::DegenerateSplit(_) => CliError::Usage(e.to_string()),
        e => CliError::Runtime(e.into()),
    }
}

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::Config(_) | TrainError::EmptyDataset => CliError::Usage(e.to_string()),
        e => CliError::Runtime(e.into()),
    }
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::NoEpisodes | EvalError::Config(_) => CliError::Usage(e.to_string()),
        EvalError::Train(t) => train_err(t),
        EvalError::Data(d) => data_err(d),
        e => CliError::Runtime(e.into()),
    }
}

pub fn dispatch<S: Scalar>(name: &str, config: &RunConfig) -> Result<(), CliError> {
    let out = config.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    config.write_to(&out).context("writing run config")?;
    match name {
        "gen" => gen(config),
        "train" => train::<S>(config),
        "eval" => eval::<S>(config),
        "ablate-k" => ablate::<S>(config),
        "compare" => compare::<S>(config),
        "sweep-len" => sweep::<S>(config),
        _ => unreachable!("unknown command {name}"),
    }
}

fn manifest(split: &TaskSplit) -> String {
    let line = |side: &str, m: &Vec<TaskKind>| {
        let names: Vec<&str> = m.iter().map(|t| t.name()).collect();
        format!("{side}\t{}\n", names.join(","))
    };
    let mut s = String::new();
    for m in &split.train_sequences {
        s.push_str(&line("train", m));
    }
    for m in &split.test_sequences {
        s.push_str(&line("test", m));
    }
    s
}

fn read_manifest(path: &Path) -> Result<TaskSplit, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut split = TaskSplit {
        train_sequences: Vec::new(),
        test_sequences: Vec::new(),
    };
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || CliError::Runtime(anyhow::anyhow!("{} line {}: malformed", path.display(), i + 1));
        let (side, tasks) = line.split_once('\t').ok_or_else(bad)?;
        let m = tasks
            .split(',')
            .map(TaskKind::from_name)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(bad)?;
        match side {
            "train" => split.train_sequences.push(m),
            "test" => split.test_sequences.push(m),
            _ => return Err(bad()),
        }
    }
    Ok(split)
}

fn gen(config: &RunConfig) -> Result<(), CliError> {
    let gc = config.gen_config()?;
    let seed: u64 = config.parse("seed")?;
    let workers: usize = config.parse("workers")?;
    let split = split_tasks(&TaskKind::ALL, &config.holdout()?, subseed(seed, "gen/split", 0), &gc).map_err(data_err)?;
    let train = gen_dataset(
        subseed(seed, "gen/train", 0),
        config.parse("pairs")?,
        &split.train_sequences,
        &gc,
        workers,
    )
    .map_err(data_err)?;
    let test = gen_dataset(
        subseed(seed, "gen/test", 0),
        config.parse("test_pairs")?,
        &split.test_sequences,
        &gc,
        workers,
    )
    .map_err(data_err)?;
    let out = config.out_dir();
    write_dataset(&train, &out.join("train.jsonl"))?;
    write_dataset(&test, &out.join("test.jsonl"))?;
    fs::write(out.join("split.txt"), manifest(&split))?;
    let steps = |p: &[EpisodePair]| p.iter().map(|p| p.train.len() + p.reference.len()).sum::<usize>();
    println!(
        "train: {} pairs, {} expert steps, {} sequences",
        train.len(),
        steps(&train),
        split.train_sequences.len()
    );
    println!(
        "test: {} pairs, {} expert steps, {} sequences",
        test.len(),
        steps(&test),
        split.test_sequences.len()
    );
    Ok(())
}

fn load_pairs(config: &RunConfig, file: &str) -> Result<(Vec<EpisodePair>, String), CliError> {
    let path = config.path("data").join(file);
    let bytes = fs::read(&path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let pairs = read_dataset(&path).map_err(|e| CliError::Runtime(anyhow::anyhow!("{}: {e}", path.display())))?;
    Ok((pairs, digest_bytes(&bytes)))
}

fn load_train<S: Scalar>(config: &RunConfig) -> Result<(Dataset<S>, String), CliError> {
    let (pairs, digest) = load_pairs(config, "train.jsonl")?;
    Ok((Dataset::from_pairs(&pairs).map_err(train_err)?, digest))
}

fn load_test(config: &RunConfig) -> Result<Vec<EpisodePair>, CliError> {
    let (pairs, _) = load_pairs(config, "test.jsonl")?;
    if pairs.is_empty() {
        return Err(CliError::Usage("test set has no episodes".into()));
    }
    Ok(pairs)
}

fn train<S: Scalar>(config: &RunConfig) -> Result<(), CliError> {
    let (data, digest) = load_train::<S>(config)?;
    let tc = config.train_config(data.width(), data.height())?;
    let extra = BTreeMap::from([
        ("data.digest".to_string(), digest),
        ("scalar".to_string(), S::NAME.to_string()),
    ]);
    let outputs = TrainOutputs::in_dir(&config.out_dir());
    let resume = if config.parse::<bool>("resume")? {
        if !outputs.checkpoint.exists() {
            return Err(CliError::Usage(format!("no checkpoint to resume at {}", outputs.checkpoint.display())));
        }
        Some(Checkpoint::<S>::load(&outputs.checkpoint, None)?)
    } else {
        None
    };
    let result = train_loop(&tc, &data, &extra, Some(&outputs), resume).map_err(train_err)?;
    println!("steps: {}", result.steps);
    if let Some(m) = result.metrics.last() {
        println!(
            "final loss: total {:.6} policy {:.6} H {:.6} P {:.6}",
            m.total, m.policy, m.h, m.p
        );
    }
    println!("checkpoint: {}", outputs.checkpoint.display());
    Ok(())
}

fn eval<S: Scalar>(config: &RunConfig) -> Result<(), CliError> {
    let path = config.path("checkpoint");
    if config.get("checkpoint").is_empty() {
        return Err(CliError::Usage("eval needs --checkpoint".into()));
    }
    let test = load_test(config)?;
    let ck = Checkpoint::<S>::load(&path, None).with_context(|| format!("loading {}", path.display()))?;
    let model_config = ModelConfig::from_map(&ck.config)?;
    let number = |key: &str| -> Result<u64, CliError> {
        ck.config
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Runtime(anyhow::anyhow!("checkpoint config lacks {key}")))
    };
    let k = number("train.k")? as usize;
    let seed = number("train.seed")?;
    let model = CaseModel::from_store(model_config, ck.store)?;
    let summary = success_rate(&model, &test, k, config.parse("budget_mult")?, config.parse("workers")?)
        .map_err(eval_err)?;
    let row = EvalRow {
        variant: model.variant(),
        k,
        seed,
        summary,
    };
    write_eval_csv(&config.out_dir().join("eval.csv"), &[row])?;
    println!(
        "{}: success {:.4} ({}/{}) ±{:.4}, mean steps {:.2}",
        row.variant, summary.rate, summary.successes, summary.n_episodes, summary.ci95, summary.mean_steps
    );
    Ok(())
}

fn settings<S: Scalar>(config: &RunConfig, data: &Dataset<S>) -> Result<GridSettings, CliError> {
    Ok(GridSettings {
        train: config.train_config(data.width(), data.height())?,
        budget_mult: config.parse("budget_mult")?,
        workers: config.parse("workers")?,
    })
}

fn print_table(rows: &[EvalRow]) {
    print!("{}", table_csv(&summarize_table(rows)));
}

fn ablate<S: Scalar>(config: &RunConfig) -> Result<(), CliError> {
    let (data, _) = load_train::<S>(config)?;
    let test = load_test(config)?;
    let ks = config.usize_list("ks")?;
    let seeds = config.u64_list("seeds")?;
    let rows = ablate_k(&ks, &seeds, &settings(config, &data)?, &data, &test).map_err(eval_err)?;
    let path = config.out_dir().join("ablate_k.csv");
    write_eval_csv(&path, &rows)?;
    for &k in &ks {
        let rates: Vec<f64> = rows.iter().filter(|r| r.k == k).map(|r| r.summary.rate).collect();
        println!("k={k}: mean success {:.4} over {} seeds", rates.iter().sum::<f64>() / rates.len() as f64, rates.len());
    }
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn compare<S: Scalar>(config: &RunConfig) -> Result<(), CliError> {
    let (data, _) = load_train::<S>(config)?;
    let test = load_test(config)?;
    let variants = config.variants()?;
    let seeds = config.u64_list("seeds")?;
    let rows = compare_variants(&variants, &seeds, &settings(config, &data)?, &data, &test).map_err(eval_err)?;
    let out = config.out_dir();
    write_eval_csv(&out.join("compare.csv"), &rows)?;
    fs::write(out.join("table.csv"), table_csv(&summarize_table(&rows)))?;
    print_table(&rows);
    Ok(())
}

fn sweep<S: Scalar>(config: &RunConfig) -> Result<(), CliError> {
    let (data, _) = load_train::<S>(config)?;
    let split = read_manifest(&config.path("data").join("split.txt"))?;
    let lengths = config.usize_list("lengths")?;
    let seeds = config.u64_list("seeds")?;
    let variants = config.variants()?;
    let settings = settings(config, &data)?;
    let seed: u64 = config.parse("seed")?;

    let (lo, hi) = (*lengths.iter().min().unwrap(), *lengths.iter().max().unwrap());
    let gen = GenConfig {
        width: data.width(),
        height: data.height(),
        tasks_min: lo,
        tasks_max: hi,
        ..GenConfig::default()
    };
    let seen: BTreeSet<&Vec<TaskKind>> = split.train_sequences.iter().collect();
    let pool: Vec<Vec<TaskKind>> = enumerate_multisets(&TaskKind::ALL, &gen)
        .into_iter()
        .filter(|m| !seen.contains(m))
        .collect();

    let mut models = Vec::new();
    for &variant in &variants {
        for &s in &seeds {
            let mut tc = settings.train.clone();
            tc.model.variant = variant;
            tc.seed = s;
            let trained = train_loop(&tc, &data, &BTreeMap::new(), None, None).map_err(train_err)?;
            let spec = RunSpec { variant, k: tc.k, seed: s };
            models.push((spec, trained.model));
        }
    }
    let refs: Vec<(RunSpec, &CaseModel<S>)> = models.iter().map(|(s, m)| (*s, m)).collect();
    let rows = sweep_sequence_length(
        &refs,
        &lengths,
        &pool,
        config.parse("per_length")?,
        seed,
        &gen,
        settings.budget_mult,
        settings.workers,
    )
    .map_err(eval_err)?;
    let path = config.out_dir().join("sweep_len.csv");
    write_sweep_csv(&path, &rows)?;
    for r in &rows {
        println!("length {} {} seed {}: {:.4}", r.length, r.row.variant, r.row.seed, r.row.summary.rate);
    }
    Ok(())
}

pub fn plot(csv: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(csv).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", csv.display())))?;
    let chart = parse_chart(&text).map_err(|e| CliError::Runtime(anyhow::anyhow!("{}: {e}", csv.display())))?;
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| csv.with_extension("svg"));
    fs::write(&target, render_svg(&chart)).with_context(|| format!("writing {}", target.display()))?;
    println!("{}", target.display());
    Ok(())
}
