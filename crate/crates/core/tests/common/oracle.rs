use caselab::craftworld::TaskKind;
use caselab::datagen::{enumerate_multisets, gen_dataset, GenConfig};
use caselab::expert::{plan_sequence, PlannerConfig};

use super::{brute_force_len, small_instances};

/// 200 random 5x5 maps with 1-2 tasks against breadth-first search over world states.
pub fn planner_matches_state_space_search() {
    for (i, (map, tasks)) in small_instances(200, 7).into_iter().enumerate() {
        let plan = plan_sequence(&map, &tasks, &PlannerConfig::default()).unwrap();
        assert!(plan.trajectory.validate(&tasks));
        let best = brute_force_len(&map, &tasks, plan.trajectory.len()).unwrap();
        assert_eq!(plan.trajectory.len(), best, "instance {i}: {tasks:?}");
    }
}

/// Every generated episode (2 per pair) replays to its recorded states and completes its tasks.
pub fn generated_episodes_replay(pairs: usize) {
    let config = GenConfig {
        tasks_min: 2,
        tasks_max: 4,
        ..GenConfig::default()
    };
    let pool = enumerate_multisets(&TaskKind::ALL, &config);
    let pairs = gen_dataset(11, pairs, &pool, &config, 1).unwrap();
    for p in &pairs {
        for ep in [&p.train, &p.reference] {
            let replay = ep.world().rollout(&ep.trajectory.actions);
            assert_eq!(replay, ep.trajectory.states);
            assert!(ep.trajectory.validate(&ep.tasks));
        }
    }
}
