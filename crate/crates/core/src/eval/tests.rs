use super::*;
use crate::compose::ModelConfig;
use crate::craftworld::TaskKind::*;
use crate::datagen::gen_pair;
use crate::expert::Trajectory;

fn small_gen() -> GenConfig {
    GenConfig {
        width: 5,
        height: 5,
        ..GenConfig::default()
    }
}

fn model(variant: Variant) -> CaseModel<f64> {
    CaseModel::new(
        ModelConfig {
            variant,
            width: 5,
            height: 5,
            latent_dim: 8,
            encoder_hidden: vec![16, 16],
            policy_hidden: vec![16],
        },
        1,
    )
    .unwrap()
}

fn outcome(success: bool, steps: usize) -> RolloutOutcome {
    RolloutOutcome {
        success,
        steps_taken: steps,
        tasks_completed: 0,
        termination: if success { Termination::AllDone } else { Termination::StepBudget },
    }
}

#[test]
fn satisfied_tasks_succeed_at_zero_steps() {
    let p = gen_pair(1, 0, &[ChopTree, BreakRock], &small_gen()).unwrap();
    let done = p.train.trajectory.final_state().clone();
    let m = model(Variant::CaseCi);
    let o = rollout(&m, &done, &p.train.tasks, &done, &p.reference, 4, 50).unwrap();
    assert_eq!(o, RolloutOutcome {
        success: true,
        steps_taken: 0,
        tasks_completed: 2,
        termination: Termination::AllDone
    });
}

#[test]
fn budget_exhaustion_is_an_outcome() {
    let p = gen_pair(2, 0, &[ChopTree, BreakRock], &small_gen()).unwrap();
    let m = model(Variant::Case);
    let o = rollout(&m, p.train.world(), &p.train.tasks, p.train.trajectory.final_state(), &p.reference, 4, 0).unwrap();
    assert!(!o.success);
    assert_eq!(o.termination, Termination::StepBudget);
}

#[test]
fn mismatched_reference_rejected() {
    let a = gen_pair(3, 0, &[ChopTree, BreakRock], &small_gen()).unwrap();
    let b = gen_pair(4, 0, &[MakeBread, EatBread], &small_gen()).unwrap();
    let m = model(Variant::Case);
    let err = rollout(&m, a.train.world(), &a.train.tasks, a.train.world(), &b.reference, 4, 5);
    assert!(matches!(err, Err(EvalError::TaskMismatch { .. })));
}

#[test]
fn empty_reference_episode_is_valid() {
    let p = gen_pair(5, 0, &[ChopTree], &small_gen()).unwrap();
    let world = p.train.trajectory.final_state().clone();
    let reference = Episode {
        map_seed: 0,
        tasks: p.reference.tasks.clone(),
        trajectory: Trajectory::from_actions(p.reference.trajectory.final_state().clone(), vec![]),
    };
    let o = rollout(&model(Variant::CpvFull), &world, &p.train.tasks, &world, &reference, 4, 20).unwrap();
    assert!(o.success);
}

#[test]
fn summary_statistics() {
    let all = vec![outcome(true, 3); 4];
    let s = EvalSummary::from_outcomes(&all).unwrap();
    assert_eq!((s.rate, s.std, s.mean_steps), (1.0, 0.0, 3.0));

    let mixed = [outcome(true, 2), outcome(false, 10), outcome(false, 10), outcome(true, 4)];
    let s = EvalSummary::from_outcomes(&mixed).unwrap();
    let xs = [1.0, 0.0, 0.0, 1.0];
    let direct = (xs.iter().map(|x: &f64| (x - 0.5).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert_eq!(s.rate, 0.5);
    assert!((s.std - direct).abs() < 1e-15);
    assert_eq!(s.mean_steps, 6.5);
    assert!((s.ci95 - 1.96 * 0.25f64.sqrt() / 2.0).abs() < 1e-15);
    assert!(matches!(EvalSummary::from_outcomes(&[]), Err(EvalError::NoEpisodes)));
}

fn row(variant: Variant, seed: u64, rate: f64) -> EvalRow {
    EvalRow {
        variant,
        k: 4,
        seed,
        summary: EvalSummary {
            n_episodes: 10,
            successes: (rate * 10.0) as usize,
            rate,
            mean_steps: 1.0,
            std: 0.0,
            ci95: 0.0,
        },
    }
}

#[test]
fn table_aggregates_over_seeds() {
    let single = summarize_table(&[row(Variant::Case, 0, 0.4)]);
    assert_eq!(single.len(), 1);
    assert_eq!((single[0].best, single[0].mean, single[0].std), (0.4, 0.4, 0.0));

    let rows = [
        row(Variant::CaseCiL, 0, 0.2),
        row(Variant::CaseCiL, 1, 0.6),
        row(Variant::CaseCiL, 2, 0.4),
        row(Variant::GoalGuidance, 0, 0.1),
    ];
    let t = summarize_table(&rows);
    assert_eq!(t[0].variant, Variant::CaseCiL);
    assert_eq!(t[0].best, 0.6);
    assert!((t[0].mean - 0.4).abs() < 1e-15);
    assert!((t[0].std - 0.2).abs() < 1e-12);
    assert_eq!(t[1].n_seeds, 1);
    assert!(table_csv(&t).starts_with(TABLE_HEADER));
}

#[test]
fn eval_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    let rows = vec![row(Variant::Case, 3, 0.3), row(Variant::CpvFull, 4, 0.1)];
    write_eval_csv(&path, &rows).unwrap();
    let back = parse_eval_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0].csv(), rows[0].csv());
    let err = parse_eval_csv(&format!("{EVAL_HEADER}\nCASE,4,1,10,0.5,3\n")).unwrap_err();
    assert!(err.starts_with("line 2"), "{err}");
}

#[test]
fn rollouts_are_worker_independent() {
    let pairs: Vec<_> = (0..6)
        .map(|i| gen_pair(20 + i, i, &[ChopTree, BreakRock], &small_gen()).unwrap())
        .collect();
    let m = model(Variant::GoalGuidance);
    let a = rollout_all(&m, &pairs, 4, 2, 1).unwrap();
    let b = rollout_all(&m, &pairs, 4, 2, 3).unwrap();
    assert_eq!(a, b);
    assert!(matches!(rollout_all(&m, &[], 4, 2, 1), Err(EvalError::NoEpisodes)));
}
