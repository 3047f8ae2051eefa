//! Synchronous-round swarm simulator.
//!
//! Each round every robot observes once, computes its local estimate and
//! confidence, exchanges `(x_hat, alpha)` with its current neighbors
//! (simultaneously, using this round's values), fuses a social and an
//! informed estimate, and finally runs the degradation filter when eligible.
//! Two communication regimes are supported: a fully connected swarm fed by a
//! virtual Bernoulli tile stream, and a dynamic topology where robots
//! diffuse kinematically through a tiled arena and talk within a
//! communication radius.
//!
//! Trials are deterministic per seed: every robot draws from its own
//! counter-split RNG stream, so changing the robot count never perturbs
//! other robots' draws.

use crate::arena::{Arena, ArenaError, TileColor};
use crate::estimation::{self, EstimateBundle, EstimationError, ObservationTally, SensorAccuracy};
use crate::filter::{self, ActivationConfig, FilterError, TQuantileTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::{FRAC_PI_2, TAU};
use thiserror::Error;

/// Robot body radius in meters (Khepera-class footprint).
pub const BODY_RADIUS: f64 = 0.07;
/// Minimum center separation at placement: one body diameter.
pub const PLACEMENT_SEPARATION: f64 = 2.0 * BODY_RADIUS;
/// Per-step uniform heading perturbation half-width in radians.
pub const HEADING_NOISE: f64 = 0.1;
/// Default forward speed in meters per second.
pub const DEFAULT_SPEED: f64 = 0.14;
/// Default communication range in meters (five body lengths).
pub const DEFAULT_COMM_RANGE: f64 = 0.7;
/// Default swarm density for the dynamic regime.
pub const DEFAULT_DENSITY: f64 = 1.0;

const STREAM_PLACEMENT: u64 = 1;
const STREAM_ROBOT_BASE: u64 = 16;
const ARENA_SEED_SALT: u64 = 0x41_52_45_4e_41;
const FLAWED_SEED_SALT: u64 = 0x46_4c_41_57_45;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("trial needs at least one robot")]
    ZeroRobots,
    #[error("trial needs at least one step")]
    ZeroSteps,
    #[error("flawed percent {0} exceeds 100")]
    FlawedPercentOutOfRange(u32),
    #[error("{name} = {value} must be positive and finite")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("fill ratio {0} outside [0, 1]")]
    FillRatioOutOfRange(f64),
    #[error("dynamic regime requires {0}")]
    MissingDynamicParameter(&'static str),
    #[error("could not place robot {index} without overlap after {attempts} attempts")]
    PlacementFailed { index: usize, attempts: usize },
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// SplitMix64 mixing step; used for deriving sub-seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn seed_to_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// A per-robot RNG stream for a given trial seed.
fn robot_rng(trial_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::from_seed(seed_to_key(trial_seed));
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Vec2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Position and heading of a robot in the dynamic regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    FullyConnected,
    Dynamic,
}

/// Which robots run the degradation filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// Assumed accuracies are never updated.
    None,
    /// Only robots flagged flawed run the filter.
    OnlyFlawed,
    /// Every robot runs the filter.
    All,
}

/// Full description of one trial. `density`, `comm_range`, `speed`, and
/// `dt` only apply to the dynamic regime.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub regime: Regime,
    pub n_robots: usize,
    pub k_max: usize,
    pub target_fill_ratio: f64,
    /// True accuracy `b` (= `w`) shared by every robot.
    pub true_accuracy: f64,
    /// Initial assumed accuracy of flawed robots.
    pub assumed_accuracy_flawed: f64,
    /// Percent of robots initialized with the flawed assumed accuracy.
    pub flawed_percent: u32,
    pub filter_mode: FilterMode,
    pub activation: ActivationConfig,
    pub density: Option<f64>,
    pub comm_range: Option<f64>,
    pub speed: Option<f64>,
    pub tile_side: f64,
    /// Tick length in seconds; the per-step travel distance is `speed * dt`.
    pub dt: f64,
    pub seed: u64,
}

impl TrialConfig {
    /// Fully connected swarm over a virtual tile stream.
    pub fn fully_connected(n_robots: usize, k_max: usize, fill_ratio: f64, accuracy: f64) -> Self {
        Self {
            regime: Regime::FullyConnected,
            n_robots,
            k_max,
            target_fill_ratio: fill_ratio,
            true_accuracy: accuracy,
            assumed_accuracy_flawed: accuracy,
            flawed_percent: 0,
            filter_mode: FilterMode::None,
            activation: ActivationConfig::default(),
            density: None,
            comm_range: None,
            speed: None,
            tile_side: crate::arena::DEFAULT_TILE_SIDE,
            dt: 1.0,
            seed: 0,
        }
    }

    /// Dynamic-topology swarm diffusing through a generated arena.
    pub fn dynamic(n_robots: usize, k_max: usize, fill_ratio: f64, accuracy: f64) -> Self {
        Self {
            regime: Regime::Dynamic,
            density: Some(DEFAULT_DENSITY),
            comm_range: Some(DEFAULT_COMM_RANGE),
            speed: Some(DEFAULT_SPEED),
            ..Self::fully_connected(n_robots, k_max, fill_ratio, accuracy)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_robots == 0 {
            return Err(SimError::ZeroRobots);
        }
        if self.k_max == 0 {
            return Err(SimError::ZeroSteps);
        }
        if self.flawed_percent > 100 {
            return Err(SimError::FlawedPercentOutOfRange(self.flawed_percent));
        }
        if !(0.0..=1.0).contains(&self.target_fill_ratio) || self.target_fill_ratio.is_nan() {
            return Err(SimError::FillRatioOutOfRange(self.target_fill_ratio));
        }
        self.activation.validate()?;
        for (name, value) in [("tile_side", self.tile_side), ("dt", self.dt)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(SimError::NonPositiveParameter { name, value });
            }
        }
        if self.regime == Regime::Dynamic {
            for (name, value) in [
                ("density", self.density),
                ("comm_range", self.comm_range),
                ("speed", self.speed),
            ] {
                let value = value.ok_or(SimError::MissingDynamicParameter(name))?;
                if !value.is_finite() || value <= 0.0 {
                    return Err(SimError::NonPositiveParameter { name, value });
                }
            }
        }
        Ok(())
    }

    /// Arena side length in meters for the dynamic regime, from the density
    /// definition `D = N pi r^2 / L^2`.
    pub fn dynamic_arena_side_m(&self) -> Result<f64, SimError> {
        let r = self
            .comm_range
            .ok_or(SimError::MissingDynamicParameter("comm_range"))?;
        let d = self
            .density
            .ok_or(SimError::MissingDynamicParameter("density"))?;
        Ok(dynamic_arena_side_m(self.n_robots, r, d))
    }
}

/// `L = sqrt(N pi r^2 / D)`.
pub fn dynamic_arena_side_m(n_robots: usize, comm_range: f64, density: f64) -> f64 {
    (n_robots as f64 * std::f64::consts::PI * comm_range * comm_range / density).sqrt()
}

/// Tiles per side covering at least `side_m` meters.
pub fn side_tiles_for(side_m: f64, tile_side: f64) -> usize {
    (side_m / tile_side).ceil().max(1.0) as usize
}

/// Flags exactly `round(percent * n / 100)` robots, chosen by a seeded
/// shuffle over the robot indices.
pub fn assign_flawed(n_robots: usize, percent: u32, seed: u64) -> Vec<bool> {
    let count = (percent as f64 * n_robots as f64 / 100.0).round() as usize;
    let mut indices: Vec<usize> = (0..n_robots).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut flags = vec![false; n_robots];
    for &i in indices.iter().take(count) {
        flags[i] = true;
    }
    flags
}

/// Symmetric inclusive-range adjacency over robot positions.
pub fn neighbors_of(positions: &[Vec2], comm_range: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if positions[i].distance(&positions[j]) <= comm_range {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    adjacency
}

/// One kinematic diffusion step. The heading is perturbed by uniform noise
/// in [-HEADING_NOISE, HEADING_NOISE]; the robot then advances `step_len`
/// along it, unless the predicted position leaves the arena or comes within
/// one body radius of another robot, in which case it turns in place by a
/// uniform angle in [pi/2, 3*pi/2).
pub fn diffuse_step(
    pose: &mut Pose,
    arena: &Arena,
    others: &[Vec2],
    step_len: f64,
    rng: &mut impl Rng,
) {
    pose.heading = (pose.heading + rng.random_range(-HEADING_NOISE..HEADING_NOISE)).rem_euclid(TAU);
    let next = Vec2::new(
        pose.position.x + step_len * pose.heading.cos(),
        pose.position.y + step_len * pose.heading.sin(),
    );
    let in_bounds =
        next.x >= 0.0 && next.x < arena.width_m() && next.y >= 0.0 && next.y < arena.height_m();
    let blocked = !in_bounds
        || others
            .iter()
            .any(|other| next.distance(other) < BODY_RADIUS);
    if blocked {
        pose.heading =
            (pose.heading + rng.random_range(FRAC_PI_2..3.0 * FRAC_PI_2)).rem_euclid(TAU);
    } else {
        pose.position = next;
    }
}

/// Uniform rejection-sampled starting poses with pairwise separation of at
/// least one body diameter.
pub fn place_robots(
    n_robots: usize,
    arena: &Arena,
    rng: &mut impl Rng,
) -> Result<Vec<Pose>, SimError> {
    const MAX_ATTEMPTS: usize = 100_000;
    let mut poses: Vec<Pose> = Vec::with_capacity(n_robots);
    for index in 0..n_robots {
        let mut attempts = 0;
        loop {
            let candidate = Vec2::new(
                rng.random_range(0.0..arena.width_m()),
                rng.random_range(0.0..arena.height_m()),
            );
            let clear = poses
                .iter()
                .all(|p| p.position.distance(&candidate) >= PLACEMENT_SEPARATION);
            if clear {
                let heading = rng.random_range(0.0..TAU);
                poses.push(Pose {
                    position: candidate,
                    heading,
                });
                break;
            }
            attempts += 1;
            if attempts >= MAX_ATTEMPTS {
                return Err(SimError::PlacementFailed { index, attempts });
            }
        }
    }
    Ok(poses)
}

/// Per-robot state across rounds.
#[derive(Debug, Clone)]
pub struct RobotState {
    pub id: usize,
    pub pose: Option<Pose>,
    pub tally: ObservationTally,
    pub accuracy: SensorAccuracy,
    pub bundle: EstimateBundle,
    pub is_flawed: bool,
    pub runs_filter: bool,
    pub steps_since_filter: u32,
}

/// Logged trajectories for one robot, one entry per round.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotTrajectory {
    /// Informed estimate `x`.
    pub informed: Vec<f64>,
    /// Local estimate `x_hat`.
    pub local: Vec<f64>,
    /// Assumed accuracy `b_hat` after the round's filter step.
    pub assumed_accuracy: Vec<f64>,
}

/// Complete record of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub config: TrialConfig,
    /// Ground-truth fill ratio the observations were drawn from.
    pub realized_fill_ratio: f64,
    pub robots: Vec<RobotTrajectory>,
    /// Observation tallies as of the final round.
    pub final_tallies: Vec<ObservationTally>,
}

pub(crate) struct Trial {
    regime: Regime,
    arena: Option<Arena>,
    truth: f64,
    step_len: f64,
    comm_range: f64,
    min_neighbors: usize,
    tau: u32,
    pub(crate) robots: Vec<RobotState>,
    rngs: Vec<ChaCha12Rng>,
    table: TQuantileTable,
    adjacency: Vec<Vec<usize>>,
    // Scratch buffers reused across rounds.
    positions: Vec<Vec2>,
    others: Vec<Vec2>,
    messages: Vec<(f64, f64)>,
    neighbor_estimates: Vec<f64>,
}

impl Trial {
    pub(crate) fn new(config: &TrialConfig, provided: Option<&Arena>) -> Result<Self, SimError> {
        config.validate()?;
        let arena = match config.regime {
            Regime::FullyConnected => None,
            Regime::Dynamic => Some(match provided {
                Some(arena) => arena.clone(),
                None => {
                    let side_m = config.dynamic_arena_side_m()?;
                    Arena::generate(
                        side_tiles_for(side_m, config.tile_side),
                        config.target_fill_ratio,
                        config.tile_side,
                        splitmix64(config.seed ^ ARENA_SEED_SALT),
                    )?
                }
            }),
        };
        // In the fully connected regime a provided arena parametrizes the
        // virtual tile stream with its realized fill ratio.
        let truth = match (&arena, provided) {
            (Some(arena), _) => arena.fill_ratio(),
            (None, Some(provided)) => provided.fill_ratio(),
            (None, None) => config.target_fill_ratio,
        };

        let flawed = assign_flawed(
            config.n_robots,
            config.flawed_percent,
            splitmix64(config.seed ^ FLAWED_SEED_SALT),
        );
        let poses: Vec<Option<Pose>> = match &arena {
            Some(arena) => {
                let mut placement_rng = robot_rng(config.seed, STREAM_PLACEMENT);
                place_robots(config.n_robots, arena, &mut placement_rng)?
                    .into_iter()
                    .map(Some)
                    .collect()
            }
            None => vec![None; config.n_robots],
        };

        let mut robots = Vec::with_capacity(config.n_robots);
        for id in 0..config.n_robots {
            let is_flawed = flawed[id] && config.assumed_accuracy_flawed != config.true_accuracy;
            let b_hat = if flawed[id] {
                config.assumed_accuracy_flawed
            } else {
                config.true_accuracy
            };
            let accuracy = SensorAccuracy::symmetric(config.true_accuracy, b_hat)?;
            let runs_filter = match config.filter_mode {
                FilterMode::None => false,
                FilterMode::OnlyFlawed => is_flawed,
                FilterMode::All => true,
            };
            robots.push(RobotState {
                id,
                pose: poses[id],
                tally: ObservationTally::default(),
                accuracy,
                bundle: EstimateBundle {
                    x_hat: 0.0,
                    alpha: 0.0,
                    x_bar: None,
                    beta: 0.0,
                    x: 0.0,
                },
                is_flawed,
                runs_filter,
                steps_since_filter: 0,
            });
        }

        let rngs = (0..config.n_robots)
            .map(|id| robot_rng(config.seed, STREAM_ROBOT_BASE + id as u64))
            .collect();
        let table_size = config.n_robots.saturating_sub(1);
        let table = TQuantileTable::new(config.activation.omega, table_size)?;
        let adjacency = match config.regime {
            Regime::FullyConnected => (0..config.n_robots)
                .map(|i| (0..config.n_robots).filter(|&j| j != i).collect())
                .collect(),
            Regime::Dynamic => vec![Vec::new(); config.n_robots],
        };
        Ok(Self {
            regime: config.regime,
            arena,
            truth,
            step_len: config.speed.unwrap_or(DEFAULT_SPEED) * config.dt,
            comm_range: config.comm_range.unwrap_or(DEFAULT_COMM_RANGE),
            min_neighbors: config.activation.min_neighbors,
            tau: config.activation.tau,
            robots,
            rngs,
            table,
            adjacency,
            positions: Vec::new(),
            others: Vec::new(),
            messages: Vec::new(),
            neighbor_estimates: Vec::new(),
        })
    }

    pub(crate) fn realized_fill_ratio(&self) -> f64 {
        self.truth
    }

    fn move_phase(&mut self) {
        let arena = self.arena.as_ref().expect("dynamic regime has an arena");
        let n = self.robots.len();
        for i in 0..n {
            self.others.clear();
            for (j, robot) in self.robots.iter().enumerate() {
                if j != i {
                    self.others
                        .push(robot.pose.expect("dynamic robots have poses").position);
                }
            }
            let pose = self.robots[i]
                .pose
                .as_mut()
                .expect("dynamic robots have poses");
            diffuse_step(pose, arena, &self.others, self.step_len, &mut self.rngs[i]);
        }
    }

    /// Recomputes a robot's local estimate and confidence from its tally.
    pub(crate) fn refresh_local(&mut self, i: usize) -> Result<(), SimError> {
        let robot = &mut self.robots[i];
        let x_hat = estimation::local_estimate(&robot.tally, &robot.accuracy)?;
        let alpha = estimation::local_confidence(&robot.tally, &robot.accuracy, x_hat)?;
        robot.bundle.x_hat = x_hat;
        robot.bundle.alpha = alpha;
        Ok(())
    }

    fn observe_phase(&mut self) -> Result<(), SimError> {
        for i in 0..self.robots.len() {
            let true_color = match self.regime {
                Regime::Dynamic => {
                    let arena = self.arena.as_ref().expect("dynamic regime has an arena");
                    let pos = self.robots[i]
                        .pose
                        .expect("dynamic robots have poses")
                        .position;
                    arena.color_at(pos.x, pos.y)?
                }
                Regime::FullyConnected => {
                    if self.rngs[i].random::<f64>() < self.truth {
                        TileColor::Black
                    } else {
                        TileColor::White
                    }
                }
            };
            let observed =
                estimation::observe(true_color, &self.robots[i].accuracy, self.rngs[i].random());
            self.robots[i].tally.record(observed);
            self.refresh_local(i)?;
        }
        Ok(())
    }

    fn rebuild_adjacency(&mut self) {
        if self.regime == Regime::FullyConnected {
            return; // static all-to-all adjacency built at construction
        }
        self.positions.clear();
        self.positions.extend(
            self.robots
                .iter()
                .map(|r| r.pose.expect("dynamic robots have poses").position),
        );
        self.adjacency = neighbors_of(&self.positions, self.comm_range);
    }

    pub(crate) fn fuse_phase(&mut self) -> Result<(), SimError> {
        for i in 0..self.robots.len() {
            self.messages.clear();
            for &j in &self.adjacency[i] {
                let bundle = &self.robots[j].bundle;
                self.messages.push((bundle.x_hat, bundle.alpha));
            }
            let robot = &mut self.robots[i];
            let (x_bar, beta) = match estimation::social_fuse(&self.messages) {
                Ok((x_bar, beta)) => (Some(x_bar), beta),
                Err(EstimationError::NoNeighbors) => (None, 0.0),
                Err(other) => return Err(other.into()),
            };
            let x = estimation::informed_fuse(robot.bundle.x_hat, robot.bundle.alpha, x_bar, beta)?;
            robot.bundle.x_bar = x_bar;
            robot.bundle.beta = beta;
            robot.bundle.x = x;
        }
        Ok(())
    }

    fn filter_phase(&mut self) -> Result<(), SimError> {
        for i in 0..self.robots.len() {
            if !self.robots[i].runs_filter {
                continue;
            }
            self.robots[i].steps_since_filter += 1;
            if self.robots[i].steps_since_filter < self.tau
                || self.adjacency[i].len() < self.min_neighbors
            {
                continue; // not yet eligible, or eligible but deferred
            }
            self.neighbor_estimates.clear();
            self.neighbor_estimates.extend(
                self.adjacency[i]
                    .iter()
                    .map(|&j| self.robots[j].bundle.x_hat),
            );
            let activate = filter::should_activate_with_table(
                self.robots[i].bundle.x_hat,
                &self.neighbor_estimates,
                &self.table,
            )?;
            if activate && let Some(x_bar) = self.robots[i].bundle.x_bar {
                match filter::update_assumed_accuracy(&self.robots[i].tally, x_bar) {
                    Ok(b_hat) => self.robots[i].accuracy.set_assumed(b_hat),
                    Err(FilterError::SingularSocialEstimate) => {}
                    Err(other) => return Err(other.into()),
                }
            }
            self.robots[i].steps_since_filter = 0;
        }
        Ok(())
    }

    pub(crate) fn step(&mut self) -> Result<(), SimError> {
        if self.regime == Regime::Dynamic {
            self.move_phase();
        }
        self.observe_phase()?;
        self.rebuild_adjacency();
        self.fuse_phase()?;
        self.filter_phase()?;
        Ok(())
    }
}

/// Runs one trial. A provided arena overrides generation; in the fully
/// connected regime it parametrizes the virtual tile stream with its
/// realized fill ratio.
pub fn run_trial(config: &TrialConfig, arena: Option<&Arena>) -> Result<TrialLog, SimError> {
    let mut trial = Trial::new(config, arena)?;
    let n = config.n_robots;
    let mut robots = vec![
        RobotTrajectory {
            informed: Vec::with_capacity(config.k_max),
            local: Vec::with_capacity(config.k_max),
            assumed_accuracy: Vec::with_capacity(config.k_max),
        };
        n
    ];
    for _ in 0..config.k_max {
        trial.step()?;
        for (trajectory, robot) in robots.iter_mut().zip(&trial.robots) {
            trajectory.informed.push(robot.bundle.x);
            trajectory.local.push(robot.bundle.x_hat);
            trajectory.assumed_accuracy.push(robot.accuracy.b_hat);
        }
    }
    Ok(TrialLog {
        config: config.clone(),
        realized_fill_ratio: trial.realized_fill_ratio(),
        robots,
        final_tallies: trial.robots.iter().map(|r| r.tally).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn seed_mixing_is_stable() {
        assert_eq!(splitmix64(0), splitmix64(0));
        assert_ne!(splitmix64(1), splitmix64(2));
    }

    #[test]
    fn flawed_assignment_counts() {
        assert!(assign_flawed(10, 0, 3).iter().all(|f| !f));
        assert!(assign_flawed(10, 100, 3).iter().all(|f| *f));
        assert_eq!(assign_flawed(20, 30, 3).iter().filter(|f| **f).count(), 6);
        assert_eq!(assign_flawed(20, 37, 3).iter().filter(|f| **f).count(), 7);
        assert_eq!(assign_flawed(20, 30, 3), assign_flawed(20, 30, 3));
    }

    #[test]
    fn adjacency_inclusive_boundary() {
        let positions = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(1.2, 0.0),
        ];
        let adj = neighbors_of(&positions, 0.7);
        assert_eq!(adj[0], vec![1]);
        assert_eq!(adj[1], vec![0, 2]);
        assert_eq!(adj[2], vec![1]);
        // Exactly at range counts as adjacent.
        let touching = [Vec2::new(0.0, 0.0), Vec2::new(0.7, 0.0)];
        let adj = neighbors_of(&touching, 0.7);
        assert_eq!(adj[0], vec![1]);
        // Just beyond does not.
        let apart = [Vec2::new(0.0, 0.0), Vec2::new(0.8, 0.0)];
        let adj = neighbors_of(&apart, 0.7);
        assert!(adj[0].is_empty() && adj[1].is_empty());
    }

    #[test]
    fn density_formula_reference_point() {
        let side = dynamic_arena_side_m(20, 0.7, 1.0);
        assert_relative_eq!(side, 5.5487, epsilon = 1e-4);
        // Default tile side quantizes to 57 tiles per side.
        assert_eq!(side_tiles_for(side, crate::arena::DEFAULT_TILE_SIDE), 57);
    }

    #[test]
    fn diffuse_advances_exactly_one_step() {
        let arena = Arena::generate(57, 0.5, crate::arena::DEFAULT_TILE_SIDE, 1).unwrap();
        let center = Vec2::new(arena.width_m() / 2.0, arena.height_m() / 2.0);
        let mut pose = Pose {
            position: center,
            heading: 1.0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        diffuse_step(&mut pose, &arena, &[], 0.14, &mut rng);
        assert_relative_eq!(pose.position.distance(&center), 0.14, epsilon = 1e-12);
        let direction = (pose.position.y - center.y).atan2(pose.position.x - center.x);
        assert_relative_eq!(direction.rem_euclid(TAU), pose.heading, epsilon = 1e-12);
    }

    #[test]
    fn diffuse_turns_at_wall_without_moving() {
        let arena = Arena::generate(10, 0.5, 0.1, 1).unwrap();
        // Pointing straight out of the east wall from just inside it.
        let start = Vec2::new(arena.width_m() - 0.01, arena.height_m() / 2.0);
        let mut pose = Pose {
            position: start,
            heading: 0.0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        diffuse_step(&mut pose, &arena, &[], 0.14, &mut rng);
        assert_eq!(pose.position, start);
        assert!(pose.heading.rem_euclid(TAU) > FRAC_PI_2 - HEADING_NOISE);
    }

    #[test]
    fn diffuse_turns_near_other_robot() {
        let arena = Arena::generate(57, 0.5, crate::arena::DEFAULT_TILE_SIDE, 1).unwrap();
        let start = Vec2::new(2.0, 2.0);
        let mut pose = Pose {
            position: start,
            heading: 0.0,
        };
        // Another robot sits exactly where the step would land.
        let blocker = Vec2::new(2.14, 2.0);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        diffuse_step(&mut pose, &arena, &[blocker], 0.14, &mut rng);
        assert_eq!(pose.position, start);
    }

    #[test]
    fn diffuse_trajectory_is_deterministic() {
        let arena = Arena::generate(57, 0.5, crate::arena::DEFAULT_TILE_SIDE, 1).unwrap();
        let run = |seed| {
            let mut pose = Pose {
                position: Vec2::new(2.0, 2.0),
                heading: 0.3,
            };
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                diffuse_step(&mut pose, &arena, &[], 0.14, &mut rng);
            }
            pose
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn placement_respects_separation() {
        let arena = Arena::generate(57, 0.5, crate::arena::DEFAULT_TILE_SIDE, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let poses = place_robots(20, &arena, &mut rng).unwrap();
        for i in 0..poses.len() {
            for j in (i + 1)..poses.len() {
                assert!(poses[i].position.distance(&poses[j].position) >= PLACEMENT_SEPARATION);
            }
        }
    }

    #[test]
    fn placement_fails_when_impossible() {
        // A 2-tile arena cannot hold 20 separated robots.
        let arena = Arena::generate(2, 0.5, 0.05, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        assert!(matches!(
            place_robots(20, &arena, &mut rng),
            Err(SimError::PlacementFailed { .. })
        ));
    }

    #[test]
    fn config_validation_errors() {
        let mut config = TrialConfig::dynamic(5, 100, 0.55, 0.95);
        config.comm_range = None;
        assert_eq!(
            config.validate(),
            Err(SimError::MissingDynamicParameter("comm_range"))
        );

        let config = TrialConfig::fully_connected(0, 100, 0.55, 0.95);
        assert_eq!(config.validate(), Err(SimError::ZeroRobots));

        let mut config = TrialConfig::fully_connected(5, 100, 0.55, 0.95);
        config.flawed_percent = 130;
        assert_eq!(
            config.validate(),
            Err(SimError::FlawedPercentOutOfRange(130))
        );
    }

    #[test]
    fn lone_dynamic_robot_never_fuses() {
        let mut config = TrialConfig::dynamic(1, 400, 0.55, 0.95);
        config.seed = 42;
        let log = run_trial(&config, None).unwrap();
        let robot = &log.robots[0];
        assert_eq!(robot.informed, robot.local);
        assert!(robot.assumed_accuracy.iter().all(|b| *b == 0.95));
    }

    #[test]
    fn trial_is_deterministic() {
        let mut config = TrialConfig::dynamic(6, 300, 0.55, 0.95);
        config.seed = 1234;
        config.flawed_percent = 50;
        config.assumed_accuracy_flawed = 0.55;
        config.filter_mode = FilterMode::All;
        config.activation.tau = 50;
        let a = run_trial(&config, None).unwrap();
        let b = run_trial(&config, None).unwrap();
        assert_eq!(a, b);

        let mut other = config.clone();
        other.seed = 1235;
        assert_ne!(run_trial(&other, None).unwrap(), a);
    }

    #[test]
    fn tally_counts_one_observation_per_round() {
        let config = TrialConfig::fully_connected(4, 25, 0.55, 0.95);
        let mut trial = Trial::new(&config, None).unwrap();
        for k in 0..25 {
            trial.step().unwrap();
            for robot in &trial.robots {
                assert_eq!(robot.tally.t, k + 1);
            }
        }
    }

    #[test]
    fn no_filter_keeps_assumed_accuracy_constant() {
        let mut config = TrialConfig::fully_connected(6, 200, 0.55, 0.95);
        config.flawed_percent = 50;
        config.assumed_accuracy_flawed = 0.55;
        config.seed = 7;
        let log = run_trial(&config, None).unwrap();
        for robot in &log.robots {
            let first = robot.assumed_accuracy[0];
            assert!(robot.assumed_accuracy.iter().all(|b| *b == first));
        }
    }

    #[test]
    fn only_flawed_mode_anchors_correct_robots() {
        let mut config = TrialConfig::fully_connected(6, 2000, 0.55, 0.95);
        config.flawed_percent = 50;
        config.assumed_accuracy_flawed = 0.55;
        config.filter_mode = FilterMode::OnlyFlawed;
        config.activation.tau = 100;
        config.seed = 7;
        let trial = Trial::new(&config, None).unwrap();
        let flawed_flags: Vec<bool> = trial.robots.iter().map(|r| r.is_flawed).collect();
        let log = run_trial(&config, None).unwrap();
        let mut some_flawed_updated = false;
        for (robot, flawed) in log.robots.iter().zip(&flawed_flags) {
            let first = robot.assumed_accuracy[0];
            let constant = robot.assumed_accuracy.iter().all(|b| *b == first);
            if *flawed {
                some_flawed_updated |= !constant;
            } else {
                assert!(constant, "correct robot's assumed accuracy changed");
            }
        }
        assert!(some_flawed_updated, "no flawed robot ever updated");
    }

    #[test]
    fn fully_connected_equal_inputs_give_equal_informed_estimates() {
        let config = TrialConfig::fully_connected(5, 10, 0.55, 0.95);
        let mut trial = Trial::new(&config, None).unwrap();
        trial.step().unwrap();
        // Force identical tallies, refresh the local layers, and re-fuse.
        for i in 0..5 {
            trial.robots[i].tally = ObservationTally::new(3, 7).unwrap();
            trial.refresh_local(i).unwrap();
        }
        trial.fuse_phase().unwrap();
        let x0 = trial.robots[0].bundle.x;
        for robot in &trial.robots {
            assert_eq!(robot.bundle.x, x0);
            assert_eq!(robot.bundle.beta, trial.robots[0].bundle.beta);
        }
    }

    #[test]
    fn fully_connected_converges_to_truth() {
        // Law of large numbers sanity check at a reduced horizon; the
        // acceptance suite runs the full-length version.
        let mut config = TrialConfig::fully_connected(10, 20_000, 0.95, 0.95);
        config.seed = 3;
        let log = run_trial(&config, None).unwrap();
        for robot in &log.robots {
            let last = *robot.informed.last().unwrap();
            assert!(
                (last - 0.95).abs() < 0.02,
                "final estimate {last} far from 0.95"
            );
        }
    }

    #[test]
    fn logged_values_stay_in_range() {
        let mut config = TrialConfig::fully_connected(8, 3000, 0.95, 0.55);
        config.flawed_percent = 50;
        config.assumed_accuracy_flawed = 0.95;
        config.filter_mode = FilterMode::All;
        config.activation.tau = 100;
        config.seed = 31;
        let log = run_trial(&config, None).unwrap();
        for robot in &log.robots {
            assert!(robot.informed.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!(robot.local.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!(
                robot
                    .assumed_accuracy
                    .iter()
                    .all(|b| (0.501..=0.999).contains(b))
            );
        }
        for tally in &log.final_tallies {
            assert_eq!(tally.t, 3000);
        }
    }

    #[test]
    fn adding_robots_leaves_other_streams_untouched() {
        // Counter-split streams: a robot's own observation draws must not
        // change with the swarm size, so its local-estimate trajectory in
        // the fully connected regime is invariant.
        let mut small = TrialConfig::fully_connected(5, 100, 0.55, 0.95);
        small.seed = 99;
        let mut large = small.clone();
        large.n_robots = 6;
        let log_small = run_trial(&small, None).unwrap();
        let log_large = run_trial(&large, None).unwrap();
        for i in 0..5 {
            assert_eq!(log_small.robots[i].local, log_large.robots[i].local);
        }
    }

    #[test]
    fn provided_arena_drives_fully_connected_stream() {
        let arena = Arena::from_grid_text("BW\nWB", 1.0).unwrap();
        let mut config = TrialConfig::fully_connected(3, 50, 0.9, 0.95);
        config.seed = 5;
        let log = run_trial(&config, Some(&arena)).unwrap();
        assert_eq!(log.realized_fill_ratio, 0.5);
    }

    #[test]
    fn flawed_flag_requires_actual_deviation() {
        let mut config = TrialConfig::fully_connected(4, 10, 0.55, 0.95);
        config.flawed_percent = 100;
        config.assumed_accuracy_flawed = 0.95; // same as true accuracy
        config.filter_mode = FilterMode::OnlyFlawed;
        let trial = Trial::new(&config, None).unwrap();
        assert!(trial.robots.iter().all(|r| !r.is_flawed && !r.runs_filter));
    }
}
