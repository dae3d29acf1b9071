use super::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn no_overrides() -> BTreeMap<String, f64> {
    BTreeMap::new()
}

#[test]
fn reset_is_deterministic_per_seed() {
    let mut env = make_env("point-mass-2d", &no_overrides()).unwrap();
    let a = env.reset(0);
    let b = env.reset(0);
    assert_eq!(a, b);
    assert_eq!(a.step_index, 0);
    assert!(!a.done);
}

#[test]
fn pendulum_observation_lies_on_unit_circle() {
    let mut env = make_env("pendulum-swingup", &no_overrides()).unwrap();
    for seed in 0..20 {
        let state = env.reset(seed);
        let (c, s) = (state.observation[0], state.observation[1]);
        assert!((c * c + s * s - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn point_mass_origin_is_a_reward_maximising_fixed_point() {
    let mut env = PointMass2d::from_overrides(&no_overrides()).unwrap();
    env.set_state([0.0, 0.0], [0.0, 0.0]);
    let (state, reward) = env.step(&[0.0, 0.0]).unwrap();
    assert_eq!(reward, 0.0);
    assert_eq!(state.observation, vec![0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn pendulum_rests_hanging_down() {
    let mut env = PendulumSwingup::from_overrides(&no_overrides()).unwrap();
    env.set_state(PI, 0.0);
    let (state, _) = env.step(&[0.0]).unwrap();
    // sin(pi) is ~1e-16 in f64, so the velocity picks up only rounding noise.
    assert!((state.observation[0] - (-1.0)).abs() < 1e-12, "cos(theta)");
    assert!(state.observation[2].abs() < 1e-12, "omega");
}

#[test]
fn pendulum_step_matches_hand_integration() {
    // One explicit Euler step from (theta = pi/2, omega = 0, u = 0) with the
    // documented dynamics and default constants dt 0.05, g 10, l 1, m 1:
    //   accel  = 1.5 * 10 / 1 * sin(pi/2) = 15
    //   omega' = 0 + 0.05 * 15 = 0.75
    //   theta' = pi/2 + 0.05 * 0 = pi/2
    let mut env = PendulumSwingup::from_overrides(&no_overrides()).unwrap();
    env.set_state(PI / 2.0, 0.0);
    let (state, _) = env.step(&[0.0]).unwrap();
    assert!((state.observation[2] - 0.75).abs() < 1e-12);
    assert!((state.observation[0] - (PI / 2.0).cos()).abs() < 1e-12);
    assert!((state.observation[1] - 1.0).abs() < 1e-12);
}

#[test]
fn stepping_a_done_episode_is_an_error() {
    let one_step: BTreeMap<String, f64> =
        [("max_episode_steps".to_string(), 1.0)].into_iter().collect();
    let mut env = make_env("point-mass-2d", &one_step).unwrap();
    env.reset(0);
    let (state, _) = env.step(&[0.0, 0.0]).unwrap();
    assert!(state.done);
    assert!(matches!(
        env.step(&[0.0, 0.0]),
        Err(crate::error::Error::Usage(_))
    ));
}

#[test]
fn unknown_env_name_is_a_config_error() {
    assert!(matches!(
        make_env("mountain-car", &no_overrides()),
        Err(crate::error::Error::Config(_))
    ));
}

#[test]
fn unknown_override_key_is_a_config_error() {
    let bad: BTreeMap<String, f64> = [("gravity_typo".to_string(), 1.0)].into_iter().collect();
    assert!(matches!(
        make_env("pendulum-swingup", &bad),
        Err(crate::error::Error::Config(_))
    ));
}

#[test]
fn wrap_angle_covers_both_directions() {
    assert!((wrap_angle(3.0 * PI) - (-PI)).abs() < 1e-12);
    assert!((wrap_angle(-3.0 * PI) - (-PI)).abs() < 1e-12);
    assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// A (seed, action sequence) pair replays to a bitwise-identical
    /// trajectory, rewards stay within declared bounds, and episodes
    /// terminate within the step limit.
    #[test]
    fn trajectories_replay_bitwise(
        seed in 0u64..1000,
        env_idx in 0usize..2,
        actions in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..40),
    ) {
        let name = registered_envs()[env_idx];
        let mut env_a = make_env(name, &no_overrides()).unwrap();
        let mut env_b = make_env(name, &no_overrides()).unwrap();
        let dim = env_a.spec().action_dim;
        let (lo, hi) = env_a.spec().reward_bounds;
        let max_steps = env_a.spec().max_episode_steps;

        prop_assert_eq!(env_a.reset(seed), env_b.reset(seed));
        for action in &actions {
            let a = &action[..dim];
            let (state_a, reward_a) = env_a.step(a).unwrap();
            let (state_b, reward_b) = env_b.step(a).unwrap();
            prop_assert_eq!(&state_a, &state_b);
            prop_assert_eq!(reward_a.to_bits(), reward_b.to_bits());
            prop_assert!(reward_a >= lo && reward_a <= hi,
                "reward {} outside [{}, {}]", reward_a, lo, hi);
            prop_assert!(state_a.step_index <= max_steps);
            if state_a.done {
                break;
            }
        }
    }
}
