use mcte::multigoal::{reachability, ExpertConfig, GridExpert, MultiGoalWorld};
use mcte::tabular::evaluate_policy;
use mcte::trainer::{rollout_episode, sample_rollouts, Environment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rotate(p: [f64; 2]) -> [f64; 2] {
    [-p[1], p[0]]
}

fn expert() -> GridExpert {
    GridExpert::solve(&MultiGoalWorld::default(), &ExpertConfig::default()).unwrap()
}

#[test]
fn reward_is_invariant_under_quarter_turns() {
    let world = MultiGoalWorld::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let from = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let to = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let base = world.reward(from, to);
        let (mut f, mut t) = (from, to);
        for _ in 0..3 {
            f = rotate(f);
            t = rotate(t);
            assert!((world.reward(f, t) - base).abs() <= 1e-9);
        }
        // mirror across the diagonal
        assert!((world.reward([from[1], from[0]], [to[1], to[0]]) - base).abs() <= 1e-9);
    }
}

#[test]
fn rotated_policy_gives_rotated_trajectory_and_equal_return() {
    let world = MultiGoalWorld {
        start_jitter: 0.0,
        ..MultiGoalWorld::default()
    };
    let policy = |obs: &[f64], _: &mut ChaCha8Rng| vec![0.9 - 0.3 * obs[1], 0.7 + 0.2 * obs[0] * obs[0]];
    // pi'(x) = R pi(R^-1 x)
    let rotated = |obs: &[f64], rng: &mut ChaCha8Rng| {
        let back = [obs[1], -obs[0]];
        let a = policy(&back, rng);
        rotate([a[0], a[1]]).to_vec()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (base, goal) = rollout_episode(&policy, &world, &mut rng);
    let (turned, turned_goal) = rollout_episode(&rotated, &world, &mut rng);
    assert_eq!(base.len(), turned.len());
    assert_eq!(turned_goal, goal.map(|g| (g + 1) % 4));
    for (a, b) in base.steps.iter().zip(&turned.steps) {
        let r = rotate([a.state[0], a.state[1]]);
        assert!((r[0] - b.state[0]).abs() <= 1e-12 && (r[1] - b.state[1]).abs() <= 1e-12);
    }
    assert!((base.total_reward() - turned.total_reward()).abs() <= 1e-9);
}

#[test]
fn zero_action_reaches_nothing() {
    let world = MultiGoalWorld::default();
    let still = |_: &[f64], _: &mut ChaCha8Rng| vec![0.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(reachability(&still, &world, 100, &mut rng).unwrap(), 0);

    let s = world.reset(&mut rng);
    let t = world.step(&s, &[0.0, 0.0]);
    assert_eq!(t.state.position, s.position);
    assert!(t.reward <= 0.0);
}

fn straight_run(world: &MultiGoalWorld, action: [f64; 2], steps: usize) -> (f64, [f64; 2]) {
    let mut p = [0.0, 0.0];
    let mut total = 0.0;
    for _ in 0..steps {
        let next = world.advance(p, &action);
        total += world.reward(p, next);
        p = next;
    }
    (total, p)
}

#[test]
fn heading_for_an_attractor_pays() {
    let world = MultiGoalWorld::default();
    for (target, repulsor) in world.attractors.iter().zip(&world.repulsors) {
        let toward = [target[0].signum(), target[1].signum()];
        assert!(world.potential(world.advance([0.0, 0.0], &toward)) > world.potential([0.0, 0.0]));
        let (gain, end) = straight_run(&world, toward, 8);
        assert!(world.captured(end).is_some());
        assert!(gain > 0.0);
        let toward_repulsor = repulsor.map(|x| if x == 0.0 { 0.0 } else { x.signum() });
        let (loss, _) = straight_run(&world, toward_repulsor, 8);
        assert!(loss < 0.0);
    }
}

#[test]
fn expert_is_multimodal_at_the_center_and_reaches_every_goal() {
    let expert = expert();
    let world = &expert.world;
    assert!(expert.policy.support_size(expert.cell_of([0.0, 0.0])) >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert_eq!(reachability(&expert, world, 500, &mut rng).unwrap(), 4);

    let demos = expert.demos(300, &mut rng).unwrap();
    assert_eq!(demos.len(), 300);
    for ep in demos.episodes() {
        assert!(ep.len() <= world.max_steps);
        let last = ep.steps.last().unwrap();
        let end = world.advance([last.state[0], last.state[1]], &last.action);
        assert!(world.captured(end).is_some());
    }
}

#[test]
fn grid_expert_return_tracks_its_tabular_value() {
    let expert = expert();
    let gamma = ExpertConfig::default().gamma;
    let tabular = evaluate_policy(&expert.mdp, &expert.policy).unwrap()[expert.cell_of([0.0, 0.0])];
    let rollouts = sample_rollouts(&expert, &expert.world, 2000, 9, 0).unwrap();
    let mean: f64 = rollouts
        .batch
        .episodes()
        .iter()
        .map(|ep| {
            ep.steps
                .iter()
                .enumerate()
                .map(|(t, s)| gamma.powi(t as i32) * s.reward.unwrap())
                .sum::<f64>()
        })
        .sum::<f64>()
        / 2000.0;
    assert!(tabular > 0.0);
    assert!((mean - tabular).abs() <= 0.1 * tabular, "continuous {mean} vs tabular {tabular}");
}

#[test]
fn rollouts_depend_only_on_the_seed() {
    let expert = expert();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_rollouts(&expert, &expert.world, 64, 42, 3).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.batch, b.batch);
    assert_eq!(a.goals, b.goals);
    assert_ne!(a.batch, sample_rollouts(&expert, &expert.world, 64, 43, 3).unwrap().batch);
}
