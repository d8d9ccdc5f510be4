//! The three benchmark domains, built as [`TabularMdp`] values: a four-room
//! grid world, the combination lock chain, and a block-pushing maze.

use std::collections::HashMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

// ---------------------------------------------------------------------------
// Grid world
// ---------------------------------------------------------------------------

/// Four-room grid world. The default layout is an 11x11 grid split by a
/// vertical wall at column 5 (doorways at rows 2 and 8), a horizontal wall at
/// row 5 on the left half (doorway at column 2) and at row 6 on the right
/// half (doorway at column 8). Start is the lower-left corner, goal the
/// upper-right. Moves succeed with probability 0.8; the remaining 0.2 is
/// split evenly over the other three directions, and blocked moves keep the
/// agent in place. Reward is 0 at the goal (absorbing) and -1 elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    /// Wall cells as `(row, col)`, row 0 at the bottom.
    pub walls: Vec<(usize, usize)>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub move_success_prob: f64,
}

impl Default for GridWorldSpec {
    fn default() -> Self {
        let mut walls = Vec::new();
        for r in 0..11 {
            if r != 2 && r != 8 {
                walls.push((r, 5));
            }
        }
        for c in 0..5 {
            if c != 2 {
                walls.push((5, c));
            }
        }
        for c in 6..11 {
            if c != 8 {
                walls.push((6, c));
            }
        }
        walls.sort_unstable();
        Self {
            width: 11,
            height: 11,
            walls,
            start: (0, 0),
            goal: (10, 10),
            move_success_prob: 0.8,
        }
    }
}

/// Action indices for the grid world.
pub const GRID_NORTH: usize = 0;
pub const GRID_SOUTH: usize = 1;
pub const GRID_WEST: usize = 2;
pub const GRID_EAST: usize = 3;

impl GridWorldSpec {
    pub fn is_wall(&self, r: usize, c: usize) -> bool {
        self.walls.binary_search(&(r, c)).is_ok()
    }

    /// Free cells in row-major order; their position in this list is the
    /// state index.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                if !self.is_wall(r, c) {
                    cells.push((r, c));
                }
            }
        }
        cells
    }

    pub fn state_of(&self, r: usize, c: usize) -> Option<usize> {
        self.free_cells().binary_search(&(r, c)).ok()
    }

    pub fn ascii_map(&self) -> String {
        let mut out = String::new();
        for r in (0..self.height).rev() {
            for c in 0..self.width {
                let ch = if self.is_wall(r, c) {
                    '#'
                } else if (r, c) == self.start {
                    'S'
                } else if (r, c) == self.goal {
                    'G'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn build(&self) -> Result<TabularMdp> {
        if self.is_wall(self.start.0, self.start.1) || self.is_wall(self.goal.0, self.goal.1) {
            return Err(Error::Config("start or goal cell is a wall".into()));
        }
        let cells = self.free_cells();
        let index: HashMap<(usize, usize), usize> =
            cells.iter().enumerate().map(|(i, &rc)| (rc, i)).collect();
        let goal_idx = *index
            .get(&self.goal)
            .ok_or_else(|| Error::Config("goal not a free cell".into()))?;
        let start_idx = *index
            .get(&self.start)
            .ok_or_else(|| Error::Config("start not a free cell".into()))?;

        let p_hit = self.move_success_prob;
        let p_slip = (1.0 - p_hit) / 3.0;
        let mut transitions = Vec::with_capacity(cells.len());
        let mut rewards = Vec::with_capacity(cells.len());
        for (i, &(r, c)) in cells.iter().enumerate() {
            let mut rows = Vec::with_capacity(4);
            if i == goal_idx {
                for _ in 0..4 {
                    rows.push(vec![(i, 1.0)]);
                }
                rewards.push(vec![0.0; 4]);
            } else {
                for a in 0..4 {
                    let mut mass = vec![0.0; cells.len()];
                    for d in 0..4 {
                        let p = if d == a { p_hit } else { p_slip };
                        let target = self
                            .neighbor(r, c, d)
                            .and_then(|rc| index.get(&rc).copied());
                        mass[target.unwrap_or(i)] += p;
                    }
                    rows.push(
                        mass.into_iter()
                            .enumerate()
                            .filter(|&(_, p)| p > 0.0)
                            .collect(),
                    );
                }
                rewards.push(vec![-1.0; 4]);
            }
            transitions.push(rows);
        }
        TabularMdp::new(transitions, rewards, start_idx)
    }

    fn neighbor(&self, r: usize, c: usize, dir: usize) -> Option<(usize, usize)> {
        let (r2, c2) = match dir {
            GRID_NORTH => (r as isize + 1, c as isize),
            GRID_SOUTH => (r as isize - 1, c as isize),
            GRID_WEST => (r as isize, c as isize - 1),
            GRID_EAST => (r as isize, c as isize + 1),
            _ => return None,
        };
        if r2 < 0 || c2 < 0 || r2 as usize >= self.height || c2 as usize >= self.width {
            return None;
        }
        let (r2, c2) = (r2 as usize, c2 as usize);
        if self.is_wall(r2, c2) {
            None
        } else {
            Some((r2, c2))
        }
    }
}

pub fn build_grid_world(spec: &GridWorldSpec) -> Result<TabularMdp> {
    spec.build()
}

// ---------------------------------------------------------------------------
// Combination lock
// ---------------------------------------------------------------------------

/// Chain of `n + 1` states. States `0..n` have two actions: `a` advances one
/// state, `b` resets to state 0, both with reward -1. State `n` has a single
/// action with reward +1 that stays with probability 0.9 and drops back to
/// state 0 with probability 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationLockSpec {
    pub n: usize,
}

/// Lock action indices: `a` advances, `b` resets.
pub const LOCK_ADVANCE: usize = 0;
pub const LOCK_RESET: usize = 1;

pub fn build_combination_lock(n: usize) -> Result<TabularMdp> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
        });
    }
    let mut transitions = Vec::with_capacity(n + 1);
    let mut rewards = Vec::with_capacity(n + 1);
    for s in 0..n {
        transitions.push(vec![vec![(s + 1, 1.0)], vec![(0, 1.0)]]);
        rewards.push(vec![-1.0, -1.0]);
    }
    transitions.push(vec![vec![(0, 0.1), (n, 0.9)]]);
    rewards.push(vec![1.0]);
    TabularMdp::new(transitions, rewards, 0)
}

// ---------------------------------------------------------------------------
// Block dude
// ---------------------------------------------------------------------------

/// Block-pushing maze. The agent walks left/right, climbs height-1 obstacles
/// in its facing direction, and can pick up or put down blocks in the faced
/// cell; gravity applies to the agent and to placed blocks. Carried blocks
/// ride one cell above the agent, so carrying requires head room — which
/// also means blocks cannot be hauled over full-height walls. All states
/// whose agent position is the goal cell collapse into a single absorbing
/// terminal with reward +1; every other state pays -1.
///
/// The default level is the in-repo fixture: a 3x25 maze with two
/// two-cell-high walls, each passable only by staging a block next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDudeSpec {
    pub width: usize,
    pub height: usize,
    /// Wall cells as `(x, y)`, y 0 at the ground.
    pub walls: Vec<(usize, usize)>,
    pub blocks: Vec<(usize, usize)>,
    pub start: (usize, usize),
    pub start_facing: Facing,
    pub goal: (usize, usize),
    /// Enumeration aborts with an error past this many states.
    pub state_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facing {
    Left,
    Right,
}

impl Facing {
    fn dx(self) -> isize {
        match self {
            Facing::Left => -1,
            Facing::Right => 1,
        }
    }
}

pub const DUDE_LEFT: usize = 0;
pub const DUDE_RIGHT: usize = 1;
pub const DUDE_UP: usize = 2;
pub const DUDE_INTERACT: usize = 3;

const LEVEL1_FIXTURE: &str = include_str!("../fixtures/block_dude_level1.json");

impl Default for BlockDudeSpec {
    fn default() -> Self {
        serde_json::from_str(LEVEL1_FIXTURE).expect("embedded level fixture parses")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct DudeState {
    x: u8,
    y: u8,
    facing: Facing,
    carrying: bool,
    /// Resting blocks, sorted.
    blocks: Vec<(u8, u8)>,
}

/// A built block dude MDP plus enumeration metadata.
#[derive(Debug, Clone)]
pub struct BlockDudeBuild {
    pub mdp: TabularMdp,
    /// Index of the absorbing goal state.
    pub terminal: usize,
    pub num_states: usize,
}

impl BlockDudeSpec {
    pub fn ascii_map(&self) -> String {
        let mut out = String::new();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                let ch = if self.walls.contains(&(x, y)) {
                    '#'
                } else if self.blocks.contains(&(x, y)) {
                    'b'
                } else if (x, y) == self.start {
                    'S'
                } else if (x, y) == self.goal {
                    'G'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    fn is_wall(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && self.walls.contains(&(x as usize, y as usize))
    }

    fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    fn occupied(&self, st: &DudeState, x: isize, y: isize) -> bool {
        if !self.in_bounds(x, y) {
            return true;
        }
        self.is_wall(x, y) || st.blocks.contains(&(x as u8, y as u8))
    }

    fn drop_to_rest(&self, st: &DudeState, x: isize, mut y: isize) -> isize {
        while y > 0 && !self.occupied(st, x, y - 1) {
            y -= 1;
        }
        y
    }

    /// Deterministic successor under one action.
    fn apply(&self, st: &DudeState, action: usize) -> DudeState {
        let mut next = st.clone();
        let (x, y) = (st.x as isize, st.y as isize);
        match action {
            DUDE_LEFT | DUDE_RIGHT => {
                let facing = if action == DUDE_LEFT {
                    Facing::Left
                } else {
                    Facing::Right
                };
                next.facing = facing;
                let tx = x + facing.dx();
                if self.occupied(st, tx, y) {
                    return next;
                }
                if st.carrying && self.occupied(st, tx, y + 1) {
                    return next;
                }
                let ry = self.drop_to_rest(st, tx, y);
                if st.carrying && self.occupied(st, tx, ry + 1) {
                    return next;
                }
                next.x = tx as u8;
                next.y = ry as u8;
            }
            DUDE_UP => {
                let tx = x + st.facing.dx();
                let climbable = self.occupied(st, tx, y)
                    && self.in_bounds(tx, y)
                    && !self.occupied(st, tx, y + 1)
                    && (!st.carrying || !self.occupied(st, tx, y + 2));
                if climbable {
                    next.x = tx as u8;
                    next.y = (y + 1) as u8;
                }
            }
            DUDE_INTERACT => {
                let tx = x + st.facing.dx();
                if !st.carrying {
                    let target = (tx, y);
                    let has_block = self.in_bounds(target.0, target.1)
                        && st.blocks.contains(&(target.0 as u8, target.1 as u8));
                    let top_free = !self.occupied(st, tx, y + 1);
                    let head_free = !self.occupied(st, x, y + 1);
                    if has_block && top_free && head_free {
                        next.blocks.retain(|&b| b != (tx as u8, y as u8));
                        next.carrying = true;
                    }
                } else if !self.occupied(st, tx, y + 1) {
                    // Release the carried block over the faced column; it
                    // falls until supported.
                    let ry = self.drop_to_rest(st, tx, y + 1);
                    next.blocks.push((tx as u8, ry as u8));
                    next.blocks.sort_unstable();
                    next.carrying = false;
                }
            }
            _ => {}
        }
        next
    }

    /// Enumerates the reachable state space by breadth-first search and
    /// produces the deterministic MDP over it.
    pub fn build(&self) -> Result<BlockDudeBuild> {
        if self.walls.contains(&self.start) || self.walls.contains(&self.goal) {
            return Err(Error::Config("start or goal inside a wall".into()));
        }
        let mut start = DudeState {
            x: self.start.0 as u8,
            y: self.start.1 as u8,
            facing: self.start_facing,
            carrying: false,
            blocks: self
                .blocks
                .iter()
                .map(|&(x, y)| (x as u8, y as u8))
                .collect(),
        };
        start.blocks.sort_unstable();
        let sy = self.drop_to_rest(&start, start.x as isize, start.y as isize);
        start.y = sy as u8;

        let goal = (self.goal.0 as u8, self.goal.1 as u8);
        let mut index: HashMap<DudeState, usize> = HashMap::new();
        let mut states: Vec<DudeState> = Vec::new();
        let mut transitions: Vec<Vec<Vec<(usize, f64)>>> = Vec::new();
        let mut terminal: Option<usize> = None;
        let mut queue = VecDeque::new();

        index.insert(start.clone(), 0);
        states.push(start);
        queue.push_back(0usize);
        transitions.push(Vec::new());

        while let Some(i) = queue.pop_front() {
            let st = states[i].clone();
            let mut rows = Vec::with_capacity(4);
            for a in 0..4 {
                let succ = self.apply(&st, a);
                let j = if (succ.x, succ.y) == goal {
                    *terminal.get_or_insert_with(|| {
                        let t = states.len();
                        // Canonical absorbing goal: block layout and facing
                        // no longer matter once the agent reaches it.
                        states.push(DudeState {
                            x: goal.0,
                            y: goal.1,
                            facing: Facing::Right,
                            carrying: false,
                            blocks: Vec::new(),
                        });
                        transitions.push(vec![vec![(t, 1.0)]; 4]);
                        t
                    })
                } else if let Some(&j) = index.get(&succ) {
                    j
                } else {
                    let j = states.len();
                    if j > self.state_cap {
                        return Err(Error::StateCapExceeded {
                            cap: self.state_cap,
                        });
                    }
                    index.insert(succ.clone(), j);
                    states.push(succ);
                    transitions.push(Vec::new());
                    queue.push_back(j);
                    j
                };
                rows.push(vec![(j, 1.0)]);
            }
            transitions[i] = rows;
        }

        let terminal =
            terminal.ok_or_else(|| Error::Config("goal unreachable from start".into()))?;
        let num_states = states.len();
        let rewards: Vec<Vec<f64>> = (0..num_states)
            .map(|s| vec![if s == terminal { 1.0 } else { -1.0 }; 4])
            .collect();
        let mdp = TabularMdp::new(transitions, rewards, 0)?;
        Ok(BlockDudeBuild {
            mdp,
            terminal,
            num_states,
        })
    }
}

pub fn build_block_dude(spec: &BlockDudeSpec) -> Result<BlockDudeBuild> {
    spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{evaluate_policy_average_reward, relative_value_iteration, span, validate};
    use rand::SeedableRng;

    #[test]
    fn grid_layout_constants() {
        let spec = GridWorldSpec::default();
        assert_eq!(spec.walls.len(), 17);
        assert_eq!(spec.free_cells().len(), 104);
        // Doorways are open.
        for cell in [(2, 5), (8, 5), (5, 2), (6, 8)] {
            assert!(!spec.is_wall(cell.0, cell.1));
        }
        assert!(spec.is_wall(5, 5));
        assert!(spec.is_wall(6, 6));
    }

    #[test]
    fn grid_interior_cell_row() {
        let spec = GridWorldSpec::default();
        let mdp = spec.build().unwrap();
        // (1, 1) has all four neighbours free.
        let s = spec.state_of(1, 1).unwrap();
        let row = mdp.row(s, GRID_NORTH);
        let north = spec.state_of(2, 1).unwrap();
        for &(s2, p) in row {
            if s2 == north {
                assert!((p - 0.8).abs() < 1e-12);
            } else {
                assert!((p - 0.2 / 3.0).abs() < 1e-12);
            }
        }
        assert_eq!(row.len(), 4);
    }

    #[test]
    fn grid_blocked_intended_direction_mass_stays() {
        let spec = GridWorldSpec::default();
        let mdp = spec.build().unwrap();
        // (0, 0): south and west are out of bounds.
        let s = spec.state_of(0, 0).unwrap();
        let row = mdp.row(s, GRID_SOUTH);
        let self_mass: f64 = row
            .iter()
            .filter(|&&(s2, _)| s2 == s)
            .map(|&(_, p)| p)
            .sum();
        // 0.8 intended (blocked) + 0.2/3 west (blocked).
        assert!((self_mass - (0.8 + 0.2 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn grid_validates_and_goal_reachable() {
        let spec = GridWorldSpec::default();
        let mdp = spec.build().unwrap();
        let report = validate(&mdp);
        assert!(report.is_ok(), "{report:?}");
        // With slip everywhere, the goal is the only closed class.
        assert_eq!(report.communicating_class.len(), 1);
        assert_eq!(
            report.communicating_class[0],
            spec.state_of(10, 10).unwrap()
        );
    }

    #[test]
    fn lock_structure() {
        let mdp = build_combination_lock(1).unwrap();
        assert_eq!(mdp.num_states(), 2);
        let pairs: usize = (0..mdp.num_states()).map(|s| mdp.num_actions(s)).sum();
        assert_eq!(pairs, 3);
        assert!(build_combination_lock(0).is_err());
    }

    #[test]
    fn lock_gain_matches_renewal_oracle() {
        // Renewal cycle under the advance-everywhere policy: an expected
        // 1/0.1 = 10 steps at +1 in the last state, then n climbing steps at
        // -1, so the gain is (10 - n) / (10 + n).
        for n in [1usize, 3, 5, 8] {
            let mdp = build_combination_lock(n).unwrap();
            let (gb, pi) = relative_value_iteration(&mdp, 1e-10, 1_000_000).unwrap();
            let oracle = (10.0 - n as f64) / (10.0 + n as f64);
            assert!(
                (gb.gain - oracle).abs() < 1e-8,
                "n={n}: {} vs {oracle}",
                gb.gain
            );
            assert!(pi.actions().iter().all(|&a| a == LOCK_ADVANCE));
        }
    }

    #[test]
    fn lock_reset_policy_pays_minus_one() {
        let mdp = build_combination_lock(5).unwrap();
        let actions: Vec<usize> = (0..6).map(|s| if s < 5 { LOCK_RESET } else { 0 }).collect();
        let pi = crate::mdp::DeterministicPolicy::new(actions, &mdp).unwrap();
        let g = evaluate_policy_average_reward(&mdp, &pi, 1e-9).unwrap();
        assert!((g - -1.0).abs() < 1e-9);
    }

    #[test]
    fn lock_validates() {
        let mdp = build_combination_lock(5).unwrap();
        assert!(validate(&mdp).is_ok());
    }

    #[test]
    fn lock_last_state_stay_frequency() {
        // Empirical stay probability at the last state over 1e4 draws.
        let n = 5;
        let mdp = build_combination_lock(n).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(123);
        let draws = 10_000;
        let mut stays = 0;
        for _ in 0..draws {
            let (s2, r) = mdp.step(n, 0, &mut rng).unwrap();
            assert_eq!(r, 1.0);
            if s2 == n {
                stays += 1;
            }
        }
        let freq = stays as f64 / draws as f64;
        assert!((freq - 0.9).abs() <= 0.02, "stay frequency {freq}");
    }

    #[test]
    fn block_dude_builds_and_solves() {
        let spec = BlockDudeSpec::default();
        let build = spec.build().unwrap();
        assert!(
            build.num_states > 100,
            "suspiciously small: {}",
            build.num_states
        );
        let report = validate(&build.mdp);
        assert!(
            report.is_ok(),
            "closed classes: {}",
            report.closed_class_count
        );
        assert_eq!(report.communicating_class, vec![build.terminal]);

        // Solvable: the optimal gain is +1 (park at the goal) and the
        // optimal policy actually reaches the goal from the start.
        let (gb, pi) = relative_value_iteration(&build.mdp, 1e-8, 1_000_000).unwrap();
        assert!((gb.gain - 1.0).abs() < 1e-6, "gain {}", gb.gain);
        assert!(span(&gb.bias).unwrap() < 1000.0);
        let mut s = build.mdp.start_state();
        let mut reached = false;
        for _ in 0..500 {
            let row = build.mdp.row(s, pi.action(s));
            s = row[0].0;
            if s == build.terminal {
                reached = true;
                break;
            }
        }
        assert!(reached, "greedy policy never reached the goal");
    }

    #[test]
    fn block_dude_pick_with_no_block_is_noop() {
        let spec = BlockDudeSpec::default();
        let st = DudeState {
            x: 1,
            y: 0,
            facing: Facing::Right,
            carrying: false,
            blocks: vec![(5, 0), (12, 0)],
        };
        let next = spec.apply(&st, DUDE_INTERACT);
        assert_eq!(next, st);
    }

    #[test]
    fn block_dude_goal_is_absorbing() {
        let build = BlockDudeSpec::default().build().unwrap();
        for a in 0..4 {
            assert_eq!(
                build.mdp.row(build.terminal, a),
                &vec![(build.terminal, 1.0)]
            );
            assert_eq!(build.mdp.reward(build.terminal, a), 1.0);
        }
    }

    #[test]
    fn block_dude_carrying_blocked_by_ceiling() {
        // A wall cell above the path blocks carrying but not walking.
        let spec = BlockDudeSpec {
            width: 5,
            height: 3,
            walls: vec![(2, 1)],
            blocks: vec![(1, 0)],
            start: (0, 0),
            start_facing: Facing::Right,
            goal: (4, 0),
            state_cap: 100_000,
        };
        // Walk under the ceiling unburdened.
        let bare = DudeState {
            x: 1,
            y: 0,
            facing: Facing::Right,
            carrying: false,
            blocks: vec![],
        };
        assert_eq!(spec.apply(&bare, DUDE_RIGHT).x, 2);
        // Carrying, the move is refused.
        let loaded = DudeState {
            carrying: true,
            ..bare.clone()
        };
        assert_eq!(spec.apply(&loaded, DUDE_RIGHT).x, 1);
    }

    #[test]
    fn fixture_map_shape() {
        let spec = BlockDudeSpec::default();
        assert_eq!((spec.width, spec.height), (25, 3));
        assert_eq!(spec.blocks.len(), 2);
        let map = spec.ascii_map();
        assert_eq!(map.lines().count(), 3);
        assert!(map.contains('G') && map.contains('S'));
    }
}
