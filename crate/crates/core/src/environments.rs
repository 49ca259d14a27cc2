//! Tabular environments: gridworlds, the windy three-state MDP, and the
//! block-aliasing transform that produces a low-capacity dynamics model.
//!
//! Grid states are numbered row-major from the top-left cell. Obstacle cells
//! are kept as states so that every model shares one index space; under the
//! true dynamics they are unreachable self-loops.

use std::collections::BTreeMap;

use crate::error::{MnmError, Result};
use crate::mdp::{RewardTable3, TabularMdp, TabularModel};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;
pub const NUM_GRID_ACTIONS: usize = 4;

const MOVES: [(isize, isize); NUM_GRID_ACTIONS] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardScheme {
    /// `step` everywhere, plus `goal` while occupying the goal.
    StepGoal { step: f64, goal: f64 },
    /// `step` everywhere except the goal, which pays `goal` instead.
    UnitStepGoal { step: f64, goal: f64 },
    /// Per-transition reward by the change in Manhattan distance to the goal.
    Manhattan { away: f64, same: f64, toward: f64 },
}

impl RewardScheme {
    fn parameters(&self) -> Vec<f64> {
        match *self {
            RewardScheme::StepGoal { step, goal } | RewardScheme::UnitStepGoal { step, goal } => {
                vec![step, goal]
            }
            RewardScheme::Manhattan { away, same, toward } => vec![away, same, toward],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` for obstacle cells.
    pub obstacles: Vec<bool>,
    pub start: Cell,
    pub goal: Cell,
    /// Probability that the chosen action is replaced by a uniform one.
    pub noise: f64,
    pub reward_scheme: RewardScheme,
    pub discount: f64,
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = ["stochastic-d2", "manhattan-d2", "bound-trace", "aliased-15"];

const WALLED_10: [&str; 10] = [
    "S....#....",
    ".....#....",
    ".....#....",
    ".....#....",
    ".....#....",
    ".....#....",
    ".....#....",
    ".........G",
    ".....#....",
    ".....#....",
];

const ALIASED_15: [&str; 15] = [
    "...#...........",
    "...#...........",
    "...#...........",
    "...#...........",
    "...#...........",
    "...#...........",
    "...#...........",
    "S..#..........G",
    "...#...........",
    "...............",
    "...#...........",
    "...#...........",
    "...#...........",
    "...#...........",
    "...#...........",
];

/// Goal cells of the transfer tasks A, B, and C on the walled 10×10 layout.
pub const TRANSFER_GOALS: [(&str, Cell); 3] = [
    ("A", Cell::new(2, 2)),
    ("B", Cell::new(7, 8)),
    ("C", Cell::new(8, 9)),
];

/// Built-in environments by name.
pub fn preset(name: &str) -> Result<GridworldConfig> {
    match name {
        "stochastic-d2" => GridworldConfig::from_rows(
            &WALLED_10,
            0.5,
            RewardScheme::StepGoal {
                step: 0.001,
                goal: 10.0,
            },
            0.9,
        ),
        "manhattan-d2" => GridworldConfig::from_rows(
            &WALLED_10,
            0.9,
            RewardScheme::Manhattan {
                away: 0.001,
                same: 1.001,
                toward: 2.001,
            },
            0.5,
        ),
        "bound-trace" => GridworldConfig::from_rows(
            &WALLED_10,
            0.5,
            RewardScheme::StepGoal {
                step: 1.0,
                goal: 10.0,
            },
            0.9,
        ),
        "aliased-15" => GridworldConfig::from_rows(
            &ALIASED_15,
            0.0,
            RewardScheme::UnitStepGoal {
                step: 1.0,
                goal: 100.0,
            },
            0.9,
        ),
        other => Err(MnmError::InvalidConfig(format!(
            "unknown environment preset `{other}`; expected one of {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

impl GridworldConfig {
    /// Parses a layout drawn with `.` (free), `#` (obstacle), `S` (start),
    /// and `G` (goal). Exactly one `S` and one `G` are required.
    pub fn from_rows<S: AsRef<str>>(
        rows: &[S],
        noise: f64,
        reward_scheme: RewardScheme,
        discount: f64,
    ) -> Result<Self> {
        let height = rows.len();
        if height == 0 {
            return Err(MnmError::InvalidConfig("layout has no rows".into()));
        }
        let width = rows[0].as_ref().chars().count();
        let mut obstacles = Vec::with_capacity(width * height);
        let (mut start, mut goal) = (None, None);
        for (r, line) in rows.iter().enumerate() {
            let line = line.as_ref();
            if line.chars().count() != width {
                return Err(MnmError::InvalidConfig(format!(
                    "layout row {r} has {} cells, expected {width}",
                    line.chars().count()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => obstacles.push(false),
                    '#' => obstacles.push(true),
                    'S' | 'G' => {
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.is_some() {
                            return Err(MnmError::InvalidConfig(format!(
                                "layout contains more than one `{ch}`"
                            )));
                        }
                        *slot = Some(Cell::new(r, c));
                        obstacles.push(false);
                    }
                    other => {
                        return Err(MnmError::InvalidConfig(format!(
                            "unexpected layout character `{other}` at row {r}, column {c}"
                        )))
                    }
                }
            }
        }
        let config = Self {
            width,
            height,
            obstacles,
            start: start.ok_or_else(|| MnmError::InvalidConfig("layout has no `S`".into()))?,
            goal: goal.ok_or_else(|| MnmError::InvalidConfig("layout has no `G`".into()))?,
            noise,
            reward_scheme,
            discount,
        };
        config.validate()?;
        Ok(config)
    }

    /// An obstacle-free grid.
    pub fn open(
        width: usize,
        height: usize,
        start: Cell,
        goal: Cell,
        noise: f64,
        reward_scheme: RewardScheme,
        discount: f64,
    ) -> Result<Self> {
        let config = Self {
            width,
            height,
            obstacles: vec![false; width * height],
            start,
            goal,
            noise,
            reward_scheme,
            discount,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(MnmError::InvalidConfig("grid must be non-empty".into()));
        }
        if self.obstacles.len() != self.width * self.height {
            return Err(MnmError::InvalidConfig("obstacle mask has the wrong size".into()));
        }
        for (name, cell) in [("start", self.start), ("goal", self.goal)] {
            if !self.in_bounds(cell) {
                return Err(MnmError::InvalidConfig(format!("{name} cell is off the grid")));
            }
            if self.is_obstacle(cell) {
                return Err(MnmError::InvalidConfig(format!("{name} cell is an obstacle")));
            }
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(MnmError::InvalidConfig(format!(
                "noise must lie in [0, 1], got {}",
                self.noise
            )));
        }
        if self
            .reward_scheme
            .parameters()
            .iter()
            .any(|&x| !(x > 0.0) || !x.is_finite())
        {
            return Err(MnmError::InvalidConfig(
                "reward parameters must be strictly positive".into(),
            ));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(MnmError::InvalidConfig(format!(
                "discount must lie in (0, 1), got {}",
                self.discount
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn state(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell(&self, state: usize) -> Cell {
        Cell::new(state / self.width, state % self.width)
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacles[self.state(cell)]
    }

    pub fn with_goal(&self, goal: Cell) -> Result<Self> {
        let config = Self {
            goal,
            ..self.clone()
        };
        config.validate()?;
        Ok(config)
    }

    /// Next state of a noiseless move; walls and boundaries leave the agent in place.
    pub fn deterministic_next(&self, state: usize, action: usize) -> usize {
        let cell = self.cell(state);
        if self.obstacles[state] {
            return state;
        }
        let (dr, dc) = MOVES[action];
        let row = cell.row as isize + dr;
        let col = cell.col as isize + dc;
        if row < 0 || col < 0 {
            return state;
        }
        let target = Cell::new(row as usize, col as usize);
        if !self.in_bounds(target) || self.is_obstacle(target) {
            return state;
        }
        self.state(target)
    }

    /// True transition tensor.
    pub fn dynamics(&self) -> TabularModel {
        let ns = self.num_states();
        let mut probs = vec![0.0; ns * NUM_GRID_ACTIONS * ns];
        let share = self.noise / NUM_GRID_ACTIONS as f64;
        for s in 0..ns {
            for a in 0..NUM_GRID_ACTIONS {
                let base = (s * NUM_GRID_ACTIONS + a) * ns;
                probs[base + self.deterministic_next(s, a)] += 1.0 - self.noise;
                for other in 0..NUM_GRID_ACTIONS {
                    probs[base + self.deterministic_next(s, other)] += share;
                }
            }
        }
        TabularModel::from_vec_unchecked(ns, NUM_GRID_ACTIONS, probs)
            .expect("grid dimensions are consistent")
    }

    /// `r̃(s, a, s')` for the configured scheme; constant in `s'` except for
    /// the Manhattan scheme.
    pub fn transition_rewards(&self) -> RewardTable3 {
        let ns = self.num_states();
        RewardTable3::from_fn(ns, NUM_GRID_ACTIONS, |s, _a, next| match self.reward_scheme {
            RewardScheme::StepGoal { step, goal } => {
                if s == self.state(self.goal) {
                    step + goal
                } else {
                    step
                }
            }
            RewardScheme::UnitStepGoal { step, goal } => {
                if s == self.state(self.goal) {
                    goal
                } else {
                    step
                }
            }
            RewardScheme::Manhattan { away, same, toward } => {
                let before = self.cell(s).manhattan(self.goal);
                let after = self.cell(next).manhattan(self.goal);
                match after.cmp(&before) {
                    std::cmp::Ordering::Less => toward,
                    std::cmp::Ordering::Equal => same,
                    std::cmp::Ordering::Greater => away,
                }
            }
        })
    }

    /// `r(s, a)` obtained by taking the expectation of [`Self::transition_rewards`]
    /// under `dynamics`.
    fn reward_table(&self, dynamics: &TabularModel) -> Vec<f64> {
        self.transition_rewards().expected_under(dynamics)
    }

    pub fn initial(&self) -> Vec<f64> {
        let mut p0 = vec![0.0; self.num_states()];
        p0[self.state(self.start)] = 1.0;
        p0
    }
}

pub fn build_gridworld(config: &GridworldConfig) -> Result<TabularMdp> {
    config.validate()?;
    let dynamics = config.dynamics();
    let reward = config.reward_table(&dynamics);
    TabularMdp::from_model(dynamics, reward, config.discount, config.initial())
}

/// Rebuilds the reward table for a new goal while keeping `mdp`'s dynamics.
pub fn relocate_goal(mdp: &TabularMdp, config: &GridworldConfig, new_goal: Cell) -> Result<TabularMdp> {
    if !config.in_bounds(new_goal) || config.is_obstacle(new_goal) {
        return Err(MnmError::InvalidConfig(format!(
            "goal ({}, {}) is off the grid or on an obstacle",
            new_goal.row, new_goal.col
        )));
    }
    if mdp.num_states() != config.num_states() || mdp.num_actions() != NUM_GRID_ACTIONS {
        return Err(MnmError::DimensionMismatch(
            "MDP does not match the gridworld configuration".into(),
        ));
    }
    let moved = config.with_goal(new_goal)?;
    mdp.with_reward(moved.reward_table(mdp.dynamics()))
}

// ── Aliasing ─────────────────────────────────────────────────────────────

/// Partition of a grid into `k × k` spatial blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasMap {
    width: usize,
    height: usize,
    block_size: usize,
    assignment: Vec<usize>,
    /// Averaging preference per state; each block averages over the states
    /// holding its highest rank.
    rank: Vec<u8>,
}

impl AliasMap {
    /// Blocks over `config`'s grid.
    ///
    /// A block averages over its free cells away from the grid border when it
    /// has any, otherwise over its free cells, otherwise over all its cells.
    /// Border cells then inherit interior dynamics with off-grid moves turned
    /// into staying in place, so the border alone never makes a model wrong.
    pub fn new(config: &GridworldConfig, block_size: usize) -> Result<Self> {
        let mut map = Self::for_grid(config.width, config.height, block_size)?;
        map.rank = (0..config.num_states())
            .map(|s| {
                let cell = config.cell(s);
                let border = cell.row == 0
                    || cell.col == 0
                    || cell.row + 1 == config.height
                    || cell.col + 1 == config.width;
                match (config.obstacles[s], border) {
                    (true, _) => 0,
                    (false, true) => 1,
                    (false, false) => 2,
                }
            })
            .collect();
        Ok(map)
    }

    /// Blocks over a bare grid where every state is averaged.
    pub fn for_grid(width: usize, height: usize, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(MnmError::InvalidArgument("block size must be positive".into()));
        }
        let blocks_per_row = width.div_ceil(block_size);
        let assignment = (0..width * height)
            .map(|s| {
                let (r, c) = (s / width, s % width);
                (r / block_size) * blocks_per_row + c / block_size
            })
            .collect();
        Ok(Self {
            width,
            height,
            block_size,
            assignment,
            rank: vec![0; width * height],
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_states(&self) -> usize {
        self.assignment.len()
    }

    pub fn block_of(&self, state: usize) -> usize {
        self.assignment[state]
    }

    pub fn num_blocks(&self) -> usize {
        self.assignment.iter().max().map_or(0, |b| b + 1)
    }

    fn offset(&self, from: usize, to: usize) -> (isize, isize) {
        let (fr, fc) = ((from / self.width) as isize, (from % self.width) as isize);
        let (tr, tc) = ((to / self.width) as isize, (to % self.width) as isize);
        (tr - fr, tc - fc)
    }

    /// Target of `offset` from `from`, or `from` itself when it leaves the grid.
    fn apply(&self, from: usize, offset: (isize, isize)) -> usize {
        let r = (from / self.width) as isize + offset.0;
        let c = (from % self.width) as isize + offset.1;
        if r < 0 || c < 0 || r as usize >= self.height || c as usize >= self.width {
            from
        } else {
            r as usize * self.width + c as usize
        }
    }

    /// Block averages of a per-transition table in relative-move coordinates.
    ///
    /// `value(s, a, s')` is summed per `(block, a, offset)` over the block's
    /// members and divided by the member count.
    fn relative_average(
        &self,
        num_actions: usize,
        mut value: impl FnMut(usize, usize, usize) -> f64,
        support: impl Fn(usize, usize, usize) -> bool,
    ) -> Vec<Vec<BTreeMap<(isize, isize), f64>>> {
        let nb = self.num_blocks();
        let ns = self.num_states();
        let mut top_rank = vec![0u8; nb];
        for s in 0..ns {
            let b = self.assignment[s];
            top_rank[b] = top_rank[b].max(self.rank[s]);
        }
        let is_member = |s: usize| self.rank[s] == top_rank[self.assignment[s]];
        let mut member_count = vec![0usize; nb];
        for s in (0..ns).filter(|&s| is_member(s)) {
            member_count[self.assignment[s]] += 1;
        }
        let mut sums = vec![vec![BTreeMap::new(); num_actions]; nb];
        for s in (0..ns).filter(|&s| is_member(s)) {
            let b = self.assignment[s];
            for (a, table) in sums[b].iter_mut().enumerate() {
                for next in 0..ns {
                    if support(s, a, next) {
                        *table.entry(self.offset(s, next)).or_insert(0.0) += value(s, a, next);
                    }
                }
            }
        }
        for (b, per_action) in sums.iter_mut().enumerate() {
            let count = member_count[b].max(1) as f64;
            for table in per_action.iter_mut() {
                for v in table.values_mut() {
                    *v /= count;
                }
            }
        }
        sums
    }
}

/// Block-averaged relative dynamics of an arbitrary grid-indexed model.
///
/// Each `(block, action)` pair gets the mean distribution over relative
/// moves; it is then instantiated at every state with off-grid moves
/// redirected to staying in place.
pub fn alias_model(model: &TabularModel, alias: &AliasMap) -> Result<TabularModel> {
    let ns = model.num_states();
    let na = model.num_actions();
    if alias.num_states() != ns {
        return Err(MnmError::DimensionMismatch(
            "alias map does not cover the model's states".into(),
        ));
    }
    if alias.block_size == 1 {
        return Ok(model.clone());
    }
    let averaged = alias.relative_average(
        na,
        |s, a, next| model.prob(s, a, next),
        |s, a, next| model.prob(s, a, next) > 0.0,
    );
    let mut probs = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            let table = &averaged[alias.block_of(s)][a];
            for (&offset, &mass) in table {
                probs[base + alias.apply(s, offset)] += mass;
            }
            let total: f64 = probs[base..base + ns].iter().sum();
            for p in &mut probs[base..base + ns] {
                *p /= total;
            }
        }
    }
    TabularModel::new(ns, na, probs)
}

pub fn alias_dynamics(mdp: &TabularMdp, alias: &AliasMap) -> Result<TabularModel> {
    alias_model(mdp.dynamics(), alias)
}

/// Block average of a per-transition table in relative-move coordinates,
/// instantiated back at every state. Entries whose offset leaves the grid
/// keep their original value.
pub fn alias_transition_table(
    num_actions: usize,
    values: &[f64],
    alias: &AliasMap,
    support: impl Fn(usize, usize, usize) -> bool,
) -> Vec<f64> {
    let ns = alias.num_states();
    let averaged_values =
        alias.relative_average(num_actions, |s, a, next| values[(s * num_actions + a) * ns + next], &support);
    // Per-block count of members contributing to each offset so that the
    // average is taken over states where the offset is actually observed.
    let averaged_counts = alias.relative_average(num_actions, |_, _, _| 1.0, &support);
    let mut out = values.to_vec();
    for s in 0..ns {
        for a in 0..num_actions {
            let b = alias.block_of(s);
            for next in 0..ns {
                let offset = alias.offset(s, next);
                if alias.apply(s, offset) != next {
                    continue;
                }
                if let (Some(v), Some(c)) = (
                    averaged_values[b][a].get(&offset),
                    averaged_counts[b][a].get(&offset),
                ) {
                    if *c > 0.0 {
                        out[(s * num_actions + a) * ns + next] = v / c;
                    }
                }
            }
        }
    }
    out
}

// ── Windy three-state MDP ────────────────────────────────────────────────

pub const WINDY_LEFT: usize = 0;
pub const WINDY_MIDDLE: usize = 1;
pub const WINDY_RIGHT: usize = 2;
pub const GO_LEFT: usize = 0;
pub const GO_RIGHT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindyConfig {
    pub reward_left: f64,
    pub reward_middle: f64,
    pub reward_right: f64,
    pub wind_prob: f64,
    pub discount: f64,
}

impl Default for WindyConfig {
    /// `reward_right` is the value produced by the calibration search in
    /// `solvers::calibrate_windy`, starting from 1.1.
    fn default() -> Self {
        Self {
            reward_left: 1.0,
            reward_middle: 0.1,
            reward_right: 1.35,
            wind_prob: 0.5,
            discount: 0.9,
        }
    }
}

impl WindyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reward_right > self.reward_left
            && self.reward_left > self.reward_middle
            && self.reward_middle > 0.0)
        {
            return Err(MnmError::InvalidConfig(
                "windy rewards must satisfy right > left > middle > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.wind_prob) {
            return Err(MnmError::InvalidConfig("wind_prob must lie in [0, 1]".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(MnmError::InvalidConfig("discount must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// States `L, M, R`; the agent starts in `M`. `L` is absorbing. In `R` the
/// wind pushes the agent back to `M` with probability `wind_prob`; otherwise
/// going right stays in `R` and going left returns to `M`.
pub fn build_windy_three_state(config: &WindyConfig) -> Result<TabularMdp> {
    config.validate()?;
    let w = config.wind_prob;
    #[rustfmt::skip]
    let transition = vec![
        // L
        1.0, 0.0, 0.0,
        1.0, 0.0, 0.0,
        // M
        1.0, 0.0, 0.0,
        0.0, 0.0, 1.0,
        // R
        0.0, 1.0, 0.0,
        0.0, w, 1.0 - w,
    ];
    let r = [config.reward_left, config.reward_middle, config.reward_right];
    let reward = vec![r[0], r[0], r[1], r[1], r[2], r[2]];
    TabularMdp::new(3, 2, transition, reward, config.discount, vec![0.0, 1.0, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{expected_return, return_variance, validate_mdp, TabularPolicy};
    use approx::assert_abs_diff_eq;

    #[test]
    fn presets_have_documented_shape() {
        let mdp = build_gridworld(&preset("stochastic-d2").unwrap()).unwrap();
        assert_eq!(mdp.num_states(), 100);
        assert_eq!(mdp.num_actions(), 4);
        assert_eq!(mdp.discount(), 0.9);
        assert_abs_diff_eq!(mdp.min_reward(), 0.001);
        assert_abs_diff_eq!(mdp.max_reward(), 10.001);

        let aliased = build_gridworld(&preset("aliased-15").unwrap()).unwrap();
        assert_eq!(aliased.num_states(), 225);
        assert!(aliased.dynamics().as_slice().iter().all(|&p| p == 0.0 || p == 1.0));
        let mut rewards: Vec<f64> = aliased.rewards().to_vec();
        rewards.sort_by(f64::total_cmp);
        rewards.dedup();
        assert_eq!(rewards, vec![1.0, 100.0]);

        for name in PRESET_NAMES {
            let mdp = build_gridworld(&preset(name).unwrap()).unwrap();
            assert!(validate_mdp(&mdp).is_empty(), "{name}");
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn deterministic_move_on_open_grid() {
        let config = GridworldConfig::open(
            2,
            1,
            Cell::new(0, 0),
            Cell::new(0, 1),
            0.0,
            RewardScheme::StepGoal { step: 1.0, goal: 1.0 },
            0.9,
        )
        .unwrap();
        let mdp = build_gridworld(&config).unwrap();
        assert_eq!(mdp.dynamics().prob(0, RIGHT, 1), 1.0);
        assert_eq!(mdp.dynamics().prob(0, LEFT, 0), 1.0);
    }

    #[test]
    fn noise_rows_are_mixtures() {
        let config = preset("stochastic-d2").unwrap();
        let model = config.dynamics();
        let n = config.noise;
        for s in 0..config.num_states() {
            for a in 0..NUM_GRID_ACTIONS {
                for next in 0..config.num_states() {
                    let det = |b: usize| (config.deterministic_next(s, b) == next) as u8 as f64;
                    let expected = (1.0 - n) * det(a)
                        + n * (0..NUM_GRID_ACTIONS).map(det).sum::<f64>() / 4.0;
                    assert_abs_diff_eq!(model.prob(s, a, next), expected, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn layout_parsing_errors() {
        let scheme = RewardScheme::StepGoal { step: 1.0, goal: 1.0 };
        assert!(GridworldConfig::from_rows(&["S.", "#G"], 0.1, scheme, 0.9).is_ok());
        assert!(GridworldConfig::from_rows(&["S.", "#"], 0.1, scheme, 0.9).is_err());
        assert!(GridworldConfig::from_rows(&["..", ".G"], 0.1, scheme, 0.9).is_err());
        assert!(GridworldConfig::from_rows(&["SX", ".G"], 0.1, scheme, 0.9).is_err());
        assert!(GridworldConfig::from_rows(&["S.", ".G"], 1.5, scheme, 0.9).is_err());
        let zero = RewardScheme::StepGoal { step: 0.0, goal: 1.0 };
        assert!(GridworldConfig::from_rows(&["S.", ".G"], 0.1, zero, 0.9).is_err());
    }

    #[test]
    fn relocation_keeps_dynamics() {
        let config = preset("stochastic-d2").unwrap();
        let mdp = build_gridworld(&config).unwrap();
        let same = relocate_goal(&mdp, &config, config.goal).unwrap();
        assert_eq!(same, mdp);
        for (_, goal) in TRANSFER_GOALS {
            let moved = relocate_goal(&mdp, &config, goal).unwrap();
            assert_eq!(moved.dynamics(), mdp.dynamics());
            assert_ne!(moved.rewards(), mdp.rewards());
        }
        assert!(relocate_goal(&mdp, &config, Cell::new(0, 5)).is_err());
        assert!(relocate_goal(&mdp, &config, Cell::new(10, 0)).is_err());
    }

    #[test]
    fn manhattan_rewards_follow_distance_change() {
        let config = preset("manhattan-d2").unwrap();
        let table = config.transition_rewards();
        let g = config.goal;
        let s = config.state(Cell::new(g.row, g.col - 1));
        assert_eq!(table.get(s, RIGHT, config.state(g)), 2.001);
        assert_eq!(table.get(s, LEFT, config.state(Cell::new(g.row, g.col - 2))), 0.001);
        assert_eq!(table.get(s, UP, s), 1.001);
    }

    #[test]
    fn unit_block_alias_is_identity() {
        for name in PRESET_NAMES {
            let config = preset(name).unwrap();
            let mdp = build_gridworld(&config).unwrap();
            let alias = AliasMap::new(&config, 1).unwrap();
            assert_eq!(&alias_dynamics(&mdp, &alias).unwrap(), mdp.dynamics());
        }
    }

    #[test]
    fn aliasing_leaks_through_walls() {
        let config = preset("aliased-15").unwrap();
        let mdp = build_gridworld(&config).unwrap();
        let alias = AliasMap::new(&config, 3).unwrap();
        let q = alias_dynamics(&mdp, &alias).unwrap();
        // (7, 2) sits left of the wall; its block mate (7, 1) moves right freely.
        let s = config.state(Cell::new(7, 2));
        let wall = config.state(Cell::new(7, 3));
        assert_eq!(mdp.dynamics().prob(s, RIGHT, wall), 0.0);
        assert!(q.prob(s, RIGHT, wall) > 0.0);
        // An interior state of an obstacle-free block is untouched.
        let inner = config.state(Cell::new(10, 1));
        assert_eq!(q.row(inner, UP), mdp.dynamics().row(inner, UP));
    }

    #[test]
    fn windy_defaults_orderings() {
        let mdp = build_windy_three_state(&WindyConfig::default()).unwrap();
        let left = TabularPolicy::deterministic(2, &[GO_LEFT; 3]).unwrap();
        let right = TabularPolicy::deterministic(2, &[GO_RIGHT; 3]).unwrap();
        let j_left = expected_return(&mdp, &left).unwrap();
        let j_right = expected_return(&mdp, &right).unwrap();
        assert_abs_diff_eq!(j_left, 9.1, epsilon = 1e-10);
        assert!(j_left > j_right);
        assert!(return_variance(&mdp, &right).unwrap() > return_variance(&mdp, &left).unwrap());

        let calm = build_windy_three_state(&WindyConfig {
            wind_prob: 0.0,
            ..WindyConfig::default()
        })
        .unwrap();
        assert!(expected_return(&calm, &right).unwrap() > expected_return(&calm, &left).unwrap());

        let bad = WindyConfig {
            reward_right: 0.5,
            ..WindyConfig::default()
        };
        assert!(build_windy_three_state(&bad).is_err());
    }
}
