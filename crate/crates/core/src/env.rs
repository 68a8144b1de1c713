//! The exploration MDP: observations built from consecutive range scans
//! plus the previous action, shaped rewards, and collision/budget episode
//! termination.
//!
//! One environment instance is single-threaded and owns its RNG; run
//! several independently seeded instances for parallel rollouts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{omega_to_steer, step_kinematics, VehicleParams, VehicleState};
use crate::worldmap::{uniform_beams, RangeScan, WorldMap};

/// Exploration reward: rewards clearance from obstacles and forward speed,
/// penalizes turning. `min_range` is in meters (un-normalized).
///
/// Expression order is fixed and mirrored by the acceptance tests:
/// `0.0075 * r * r + 1.5 * v * v - 0.6 * omega * omega`.
pub fn reward_explore(min_range: f64, v: f64, omega: f64) -> f64 {
    0.0075 * min_range * min_range + 1.5 * v * v - 0.6 * omega * omega
}

/// Search-and-rescue variant: adds +2.0 in the shaded band strictly
/// between 2.0 m and 2.5 m of the nearest object, and -50.0 strictly
/// within 1.0 m. The two branches cannot co-fire.
pub fn reward_sar(min_range: f64, v: f64, omega: f64) -> f64 {
    let mut rw = reward_explore(min_range, v, omega);
    if 2.0 < min_range && min_range < 2.5 {
        rw += 2.0;
    }
    if min_range < 1.0 {
        rw -= 50.0;
    }
    rw
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Explore,
    Sar,
}

impl RewardKind {
    pub fn evaluate(self, min_range: f64, v: f64, omega: f64) -> f64 {
        match self {
            RewardKind::Explore => reward_explore(min_range, v, omega),
            RewardKind::Sar => reward_sar(min_range, v, omega),
        }
    }
}

/// Environment geometry-independent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub beams: usize,
    pub max_range: f64,
    pub dt: f64,
    pub episode_steps: u32,
    pub reward: RewardKind,
    pub v_max: f64,
    pub omega_max: f64,
    pub clearance: f64,
    pub footprint_radius: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            beams: 24,
            max_range: 10.0,
            dt: 0.1,
            episode_steps: 1000,
            reward: RewardKind::Explore,
            v_max: 2.0,
            omega_max: 1.5,
            clearance: 1.0,
            footprint_radius: 0.3,
        }
    }
}

/// Physical command after de-normalization: forward speed in
/// [0, v_max] and yaw rate in [-omega_max, omega_max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCommand {
    pub v: f64,
    pub omega: f64,
}

impl ActionCommand {
    /// Affine de-normalization of an agent action in [-1, 1]^2.
    pub fn from_normalized(action: [f64; 2], cfg: &EnvConfig) -> Self {
        let a_v = action[0].clamp(-1.0, 1.0);
        let a_w = action[1].clamp(-1.0, 1.0);
        ActionCommand {
            v: (a_v + 1.0) / 2.0 * cfg.v_max,
            omega: a_w * cfg.omega_max,
        }
    }

    pub fn to_normalized(self, cfg: &EnvConfig) -> [f64; 2] {
        [
            (2.0 * self.v / cfg.v_max - 1.0).clamp(-1.0, 1.0),
            (self.omega / cfg.omega_max).clamp(-1.0, 1.0),
        ]
    }
}

/// Agent-facing observation: current and previous normalized range scans
/// plus the previous normalized action. Total length `2B + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub ranges_now: Vec<f64>,
    pub ranges_prev: Vec<f64>,
    pub action_prev: [f64; 2],
}

impl Observation {
    pub fn dim(beams: usize) -> usize {
        2 * beams + 2
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.ranges_now.len() * 2 + 2);
        v.extend_from_slice(&self.ranges_now);
        v.extend_from_slice(&self.ranges_prev);
        v.extend_from_slice(&self.action_prev);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub min_range: f64,
    pub collided: bool,
    pub pose: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// The exploration environment. Owns its map, vehicle state and RNG.
#[derive(Debug, Clone)]
pub struct ExploreEnv {
    map: WorldMap,
    cfg: EnvConfig,
    vehicle: VehicleParams,
    beam_angles: Vec<f64>,
    rng: ChaCha8Rng,
    state: VehicleState,
    ranges_now: Vec<f64>,
    ranges_prev: Vec<f64>,
    action_prev: [f64; 2],
    steps: u32,
    done: bool,
    spawn: (f64, f64),
}

impl ExploreEnv {
    pub fn new(map: WorldMap, cfg: EnvConfig, vehicle: VehicleParams, seed: u64) -> Self {
        let beam_angles = uniform_beams(cfg.beams);
        ExploreEnv {
            map,
            cfg,
            vehicle,
            beam_angles,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: VehicleState::new(0.0, 0.0, 0.0),
            ranges_now: Vec::new(),
            ranges_prev: Vec::new(),
            action_prev: [0.0, 0.0],
            steps: 0,
            done: true,
            spawn: (0.0, 0.0),
        }
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn vehicle_params(&self) -> &VehicleParams {
        &self.vehicle
    }

    pub fn observation_dim(&self) -> usize {
        Observation::dim(self.cfg.beams)
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn spawn_point(&self) -> (f64, f64) {
        self.spawn
    }

    pub fn steps_taken(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Places the vehicle at a random collision-free pose and rebuilds the
    /// observation windows. `seed` reseeds the environment stream;
    /// `None` continues it.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<Observation> {
        if let Some(s) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(s);
        }
        let (x, y, psi) = self.map.sample_spawn(&mut self.rng, self.cfg.clearance)?;
        self.state = VehicleState::new(x, y, psi);
        self.spawn = (x, y);
        let scan = self.scan();
        self.ranges_now = normalize_ranges(&scan, self.cfg.max_range);
        self.ranges_prev = self.ranges_now.clone();
        self.action_prev = [0.0, 0.0];
        self.steps = 0;
        self.done = false;
        Ok(self.observation())
    }

    pub fn observation(&self) -> Observation {
        Observation {
            ranges_now: self.ranges_now.clone(),
            ranges_prev: self.ranges_prev.clone(),
            action_prev: self.action_prev,
        }
    }

    /// Advances one control period under a physical command.
    pub fn step(&mut self, cmd: ActionCommand) -> Result<StepOutcome> {
        let normalized = cmd.to_normalized(&self.cfg);
        self.step_inner(cmd, normalized)
    }

    /// Advances one control period under a normalized agent action in
    /// [-1, 1]^2; the action is recorded verbatim in the next observation.
    pub fn step_normalized(&mut self, action: [f64; 2]) -> Result<StepOutcome> {
        let cmd = ActionCommand::from_normalized(action, &self.cfg);
        self.step_inner(cmd, [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)])
    }

    fn step_inner(&mut self, cmd: ActionCommand, normalized: [f64; 2]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Usage(
                "step called on a finished episode; call reset first".into(),
            ));
        }
        let v = cmd.v.clamp(0.0, self.cfg.v_max.min(self.vehicle.max_speed));
        let omega = cmd.omega.clamp(-self.cfg.omega_max, self.cfg.omega_max);
        let delta = omega_to_steer(v, omega, &self.vehicle);
        self.state = step_kinematics(&self.state, v, delta, self.cfg.dt, &self.vehicle);
        self.steps += 1;

        let collided = self
            .map
            .collision_check(self.state.pose(), self.cfg.footprint_radius);
        let scan = self.scan();
        let min_range = scan.min_range();
        // Reward uses the commanded action and the un-normalized range,
        // and is still granted on the colliding step.
        let reward = self.cfg.reward.evaluate(min_range, v, omega);
        self.done = collided || self.steps >= self.cfg.episode_steps;

        self.ranges_prev = std::mem::replace(
            &mut self.ranges_now,
            normalize_ranges(&scan, self.cfg.max_range),
        );
        self.action_prev = normalized;

        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.done,
            info: StepInfo {
                min_range,
                collided,
                pose: self.state.pose(),
            },
        })
    }

    fn scan(&self) -> RangeScan {
        self.map
            .raycast(self.state.pose(), &self.beam_angles, self.cfg.max_range)
    }
}

fn normalize_ranges(scan: &RangeScan, max_range: f64) -> Vec<f64> {
    scan.ranges.iter().map(|r| r / max_range).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmap::MapDocument;

    fn empty_env(w: f64, h: f64, seed: u64) -> ExploreEnv {
        let map = WorldMap::from_document(MapDocument {
            format: 1,
            name: "arena".into(),
            width: w,
            height: h,
            obstacles: vec![],
            walls: vec![],
        })
        .unwrap();
        ExploreEnv::new(map, EnvConfig::default(), VehicleParams::default(), seed)
    }

    #[test]
    fn reward_explore_hand_values() {
        assert_eq!(reward_explore(0.0, 0.0, 0.0), 0.0);
        assert_eq!(reward_explore(10.0, 1.0, 0.0), 2.25);
        assert_eq!(reward_explore(0.0, 0.0, 1.0), -0.6);
    }

    #[test]
    fn reward_sar_hand_values() {
        assert_eq!(reward_sar(2.2, 0.0, 0.0), 0.0075 * 2.2 * 2.2 + 2.0);
        assert_eq!(reward_sar(0.5, 0.0, 0.0), 0.0075 * 0.5 * 0.5 - 50.0);
        assert_eq!(reward_sar(1.5, 0.0, 0.0), 0.016875);
    }

    #[test]
    fn reward_sar_branch_boundaries_are_strict() {
        // At exactly 1.0, 2.0 and 2.5 m neither branch fires.
        for r in [1.0, 2.0, 2.5] {
            assert_eq!(reward_sar(r, 0.0, 0.0), reward_explore(r, 0.0, 0.0));
        }
        assert!(reward_sar(0.999_999, 0.0, 0.0) < -49.0);
        assert!(reward_sar(2.000_001, 0.0, 0.0) > 2.0);
        assert!(reward_sar(2.499_999, 0.0, 0.0) > 2.0);
    }

    #[test]
    fn reward_identity_between_variants() {
        // reward_sar - reward_explore is in {0, 2, -50}, decided by r only.
        let mut k = 0u32;
        for i in 0..400 {
            let r = i as f64 * 0.01;
            for (v, w) in [(0.0, 0.0), (1.3, -0.7), (2.0, 1.5)] {
                let diff = reward_sar(r, v, w) - reward_explore(r, v, w);
                let expect = if 2.0 < r && r < 2.5 {
                    2.0
                } else if r < 1.0 {
                    -50.0
                } else {
                    0.0
                };
                assert!((diff - expect).abs() < 1e-12, "r={r}: diff {diff}");
                k += 1;
            }
        }
        assert!(k > 1000);
    }

    #[test]
    fn reward_monotonicity_on_grid() {
        // dR/dr >= 0, dR/dv >= 0 for v >= 0, dR/d|omega| <= 0.
        for i in 0..50 {
            let r = i as f64 * 0.2;
            assert!(reward_explore(r + 0.2, 1.0, 0.5) >= reward_explore(r, 1.0, 0.5));
            let v = i as f64 * 0.04;
            assert!(reward_explore(5.0, v + 0.04, 0.5) >= reward_explore(5.0, v, 0.5));
            let w = i as f64 * 0.03;
            assert!(reward_explore(5.0, 1.0, w + 0.03) <= reward_explore(5.0, 1.0, w));
        }
    }

    #[test]
    fn reset_is_deterministic_and_well_shaped() {
        let mut env = empty_env(25.0, 25.0, 99);
        let a = env.reset(Some(7)).unwrap();
        let mut env2 = empty_env(25.0, 25.0, 1);
        let b = env2.reset(Some(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_vec().len(), Observation::dim(24));
        assert_eq!(a.ranges_now, a.ranges_prev);
        assert_eq!(a.action_prev, [0.0, 0.0]);
        assert!(a.ranges_now.iter().all(|r| *r > 0.0 && *r <= 1.0));
    }

    #[test]
    fn reset_spawns_pass_collision_check() {
        let mut env = empty_env(25.0, 25.0, 3);
        for _ in 0..1000 {
            env.reset(None).unwrap();
            let pose = env.state().pose();
            assert!(!env.map().collision_check(pose, env.config().clearance));
        }
    }

    #[test]
    fn zero_action_reward_matches_min_range() {
        let mut env = empty_env(25.0, 25.0, 5);
        env.reset(Some(11)).unwrap();
        let out = env.step_normalized([-1.0, 0.0]).unwrap(); // v = 0
        assert!(!out.done);
        assert_eq!(out.reward, 0.0075 * out.info.min_range * out.info.min_range);
    }

    #[test]
    fn drives_into_wall_within_kinematic_bound() {
        let mut env = empty_env(25.0, 25.0, 5);
        env.reset(Some(1)).unwrap();
        // Face the left wall from 0.5 m away at full speed.
        env.state = VehicleState::new(0.5, 12.5, std::f64::consts::PI);
        let budget = (0.5 / (2.0 * env.config().dt)).ceil() as usize + 1;
        let mut hit = false;
        for _ in 0..budget {
            let out = env.step_normalized([1.0, 0.0]).unwrap();
            if out.done {
                assert!(out.info.collided);
                hit = true;
                break;
            }
        }
        assert!(hit, "no collision within {budget} steps");
    }

    #[test]
    fn budget_exhaustion_terminates_without_collision() {
        let mut env = empty_env(25.0, 25.0, 5);
        env.cfg.episode_steps = 10;
        env.reset(Some(2)).unwrap();
        env.state = VehicleState::new(12.5, 12.5, 0.0);
        let mut last = None;
        for _ in 0..10 {
            last = Some(env.step_normalized([-1.0, 0.0]).unwrap());
        }
        let out = last.unwrap();
        assert!(out.done);
        assert!(!out.info.collided);
        // Stepping a finished episode is a usage error.
        assert!(matches!(
            env.step_normalized([0.0, 0.0]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn no_unflagged_penetration() {
        let mut env = empty_env(10.0, 10.0, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::Rng;
        for ep in 0..20 {
            env.reset(Some(ep)).unwrap();
            loop {
                let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let out = env.step_normalized(a).unwrap();
                if !out.done {
                    let min_m = out.info.min_range;
                    assert!(min_m > env.config().footprint_radius);
                } else {
                    break;
                }
            }
        }
    }

    #[test]
    fn replay_determinism_bit_exact() {
        let actions: Vec<[f64; 2]> = (0..60)
            .map(|i| {
                [
                    ((i as f64) * 0.37).sin() * 0.8,
                    ((i as f64) * 0.53).cos() * 0.9,
                ]
            })
            .collect();
        let run = |seed| {
            let mut env = empty_env(12.0, 12.0, seed);
            env.reset(Some(77)).unwrap();
            let mut trace = Vec::new();
            for a in &actions {
                let out = env.step_normalized(*a).unwrap();
                trace.push((out.reward, out.info.pose, out.done));
                if out.done {
                    break;
                }
            }
            trace
        };
        assert_eq!(run(1), run(2));
    }

    #[test]
    fn action_denormalization_bounds() {
        let cfg = EnvConfig::default();
        let a = ActionCommand::from_normalized([-1.0, -1.0], &cfg);
        assert_eq!((a.v, a.omega), (0.0, -cfg.omega_max));
        let b = ActionCommand::from_normalized([1.0, 1.0], &cfg);
        assert_eq!((b.v, b.omega), (cfg.v_max, cfg.omega_max));
        let c = ActionCommand::from_normalized([5.0, -7.0], &cfg);
        assert_eq!((c.v, c.omega), (cfg.v_max, -cfg.omega_max));
    }
}
