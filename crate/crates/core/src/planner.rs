//! Maze world and the UCT planner choosing the next top-layer skill.
//!
//! World frame: x grows with the column index, y grows upwards (the first
//! text row is the top of the maze). Cell `(row, col)` covers
//! `[col·s, (col+1)·s] × [(rows−1−row)·s, (rows−row)·s]`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archive::Elite;
use crate::error::{Error, Result};
use crate::geom::{wrap, Pose2};
use crate::gp::TransitionModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Free,
    Start,
    Goal,
}

impl Cell {
    pub fn is_wall(self) -> bool {
        self == Cell::Wall
    }
}

/// Geometry constants of the maze world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeGeometry {
    pub cell_size: f64,
    pub goal_radius: f64,
    pub robot_radius: f64,
    /// Distance kept from a wall when a motion is truncated.
    pub margin: f64,
}

impl Default for MazeGeometry {
    fn default() -> Self {
        MazeGeometry {
            cell_size: 0.5,
            goal_radius: 0.3,
            robot_radius: 0.25,
            margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Maze {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    geo: MazeGeometry,
    start: (usize, usize),
    goal: (usize, usize),
    /// Shortest free-cell path length from each cell centre to the goal
    /// centre (8-connected, no corner cutting); infinite if unreachable.
    field: Vec<f64>,
}

/// The maze shipped for the benchmark.
pub const BENCHMARK_MAZE: &str = include_str!("../assets/maze.txt");

impl Maze {
    pub fn parse(text: &str) -> Result<Maze> {
        Maze::parse_with(text, MazeGeometry::default())
    }

    pub fn benchmark() -> Maze {
        Maze::parse(BENCHMARK_MAZE).expect("shipped maze is valid")
    }

    pub fn parse_with(text: &str, geo: MazeGeometry) -> Result<Maze> {
        let err = |line: usize, column: usize, msg: &str| Error::MazeParse {
            line,
            column,
            msg: msg.to_string(),
        };
        if !(geo.cell_size > 0.0
            && geo.robot_radius > 0.0
            && geo.goal_radius > 0.0
            && geo.margin >= 0.0)
        {
            return Err(Error::Config("maze geometry must be positive".into()));
        }
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let Some(&(first_line, first)) = lines.first() else {
            return Err(err(1, 1, "empty maze"));
        };
        let cols = first.chars().count();
        let rows = lines.len();
        if rows < 3 || cols < 3 {
            return Err(err(first_line, 1, "maze must be at least 3x3"));
        }
        let mut cells = Vec::with_capacity(rows * cols);
        let (mut start, mut goal) = (None, None);
        for (r, &(ln, l)) in lines.iter().enumerate() {
            if l.chars().count() != cols {
                return Err(err(ln, l.chars().count().min(cols) + 1, "ragged row"));
            }
            for (c, ch) in l.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    'S' => Cell::Start,
                    'G' => Cell::Goal,
                    _ => return Err(err(ln, c + 1, &format!("unexpected character {ch:?}"))),
                };
                let border = r == 0 || c == 0 || r + 1 == rows || c + 1 == cols;
                if border && cell != Cell::Wall {
                    return Err(err(ln, c + 1, "border must be wall"));
                }
                let slot = match cell {
                    Cell::Start => Some((&mut start, "duplicate start")),
                    Cell::Goal => Some((&mut goal, "duplicate goal")),
                    _ => None,
                };
                if let Some((slot, msg)) = slot {
                    if slot.is_some() {
                        return Err(err(ln, c + 1, msg));
                    }
                    *slot = Some((r, c));
                }
                cells.push(cell);
            }
        }
        let last = lines.last().unwrap().0;
        let start = start.ok_or_else(|| err(last, 1, "missing start"))?;
        let goal = goal.ok_or_else(|| err(last, 1, "missing goal"))?;
        let mut m = Maze {
            rows,
            cols,
            cells,
            geo,
            start,
            goal,
            field: Vec::new(),
        };
        m.field = m.distance_field();
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn geometry(&self) -> &MazeGeometry {
        &self.geo
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        let s = self.geo.cell_size;
        [
            (col as f64 + 0.5) * s,
            ((self.rows - 1 - row) as f64 + 0.5) * s,
        ]
    }

    /// Axis-aligned bounds `[xmin, ymin, xmax, ymax]` of a cell.
    pub fn cell_box(&self, row: usize, col: usize) -> [f64; 4] {
        let s = self.geo.cell_size;
        let x0 = col as f64 * s;
        let y0 = (self.rows - 1 - row) as f64 * s;
        [x0, y0, x0 + s, y0 + s]
    }

    /// Cell containing a world point, if inside the grid.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let s = self.geo.cell_size;
        let c = (x / s).floor();
        let rf = (y / s).floor();
        if c < 0.0 || rf < 0.0 || c >= self.cols as f64 || rf >= self.rows as f64 {
            return None;
        }
        Some((self.rows - 1 - rf as usize, c as usize))
    }

    pub fn start_pose(&self) -> Pose2 {
        let [x, y] = self.cell_center(self.start.0, self.start.1);
        Pose2 { x, y, yaw: 0.0 }
    }

    pub fn goal(&self) -> [f64; 2] {
        self.cell_center(self.goal.0, self.goal.1)
    }

    pub fn at_goal(&self, p: &Pose2) -> bool {
        let g = self.goal();
        (p.x - g[0]).hypot(p.y - g[1]) < self.geo.goal_radius
    }

    /// Breadth-first search over 4-connected free cells from start to goal.
    pub fn solvable(&self) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start.0 * self.cols + self.start.1] = true;
        while let Some((r, c)) = queue.pop_front() {
            if (r, c) == self.goal {
                return true;
            }
            for (nr, nc) in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
                let i = nr * self.cols + nc;
                if !self.cells[i].is_wall() && !seen[i] {
                    seen[i] = true;
                    queue.push_back((nr, nc));
                }
            }
        }
        false
    }

    fn distance_field(&self) -> Vec<f64> {
        let n = self.cells.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let s = self.geo.cell_size;
        dist[self.goal.0 * self.cols + self.goal.1] = 0.0;
        // Dijkstra by linear scan; mazes are small.
        loop {
            let mut best = None;
            for i in 0..n {
                if !done[i]
                    && dist[i].is_finite()
                    && best.map_or(true, |b: usize| dist[i] < dist[b])
                {
                    best = Some(i);
                }
            }
            let Some(i) = best else { break };
            done[i] = true;
            let (r, c) = ((i / self.cols) as isize, (i % self.cols) as isize);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
                        continue;
                    }
                    let free =
                        |rr: isize, cc: isize| !self.cell(rr as usize, cc as usize).is_wall();
                    if !free(nr, nc)
                        || (dr != 0 && dc != 0 && !(free(r + dr, c) && free(r, c + dc)))
                    {
                        continue;
                    }
                    let j = nr as usize * self.cols + nc as usize;
                    let w = if dr != 0 && dc != 0 {
                        s * std::f64::consts::SQRT_2
                    } else {
                        s
                    };
                    if dist[i] + w < dist[j] {
                        dist[j] = dist[i] + w;
                    }
                }
            }
        }
        dist
    }

    /// Path distance from a point to the goal: the best over the surrounding
    /// free cells of (cell-centre distance + straight line to that centre).
    pub fn goal_distance(&self, x: f64, y: f64) -> f64 {
        let Some((r, c)) = self.locate(x, y) else {
            return f64::INFINITY;
        };
        if (r, c) == self.goal {
            let g = self.goal();
            return (x - g[0]).hypot(y - g[1]);
        }
        let mut best = f64::INFINITY;
        for nr in r.saturating_sub(1)..=(r + 1).min(self.rows - 1) {
            for nc in c.saturating_sub(1)..=(c + 1).min(self.cols - 1) {
                let d = self.field[nr * self.cols + nc];
                if d.is_finite() {
                    let [cx, cy] = self.cell_center(nr, nc);
                    best = best.min(d + (x - cx).hypot(y - cy));
                }
            }
        }
        best
    }

    /// True if the robot disc centred at `(x, y)` overlaps a wall's interior.
    pub fn disc_hits_wall(&self, x: f64, y: f64) -> bool {
        let rad = self.geo.robot_radius;
        self.walls_near(x - rad, y - rad, x + rad, y + rad)
            .any(|b| {
                let dx = (b[0] - x).max(0.0).max(x - b[2]);
                let dy = (b[1] - y).max(0.0).max(y - b[3]);
                dx * dx + dy * dy < rad * rad
            })
    }

    fn walls_near(
        &self,
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    ) -> impl Iterator<Item = [f64; 4]> + '_ {
        let s = self.geo.cell_size;
        let clamp_c = |v: f64| (v / s).floor().clamp(0.0, (self.cols - 1) as f64) as usize;
        let clamp_r = |v: f64| (v / s).floor().clamp(0.0, (self.rows - 1) as f64) as usize;
        let (c0, c1) = (clamp_c(x0), clamp_c(x1));
        let (yr0, yr1) = (clamp_r(y0), clamp_r(y1));
        let rows = self.rows;
        (yr0..=yr1).flat_map(move |yr| {
            (c0..=c1).filter_map(move |c| {
                let r = rows - 1 - yr;
                self.cell(r, c).is_wall().then(|| self.cell_box(r, c))
            })
        })
    }
}

/// Reads a maze file, or the benchmark maze when no path is given.
pub fn load_maze(path: Option<&std::path::Path>, geo: MazeGeometry) -> Result<Maze> {
    match path {
        Some(p) => Maze::parse_with(&std::fs::read_to_string(p)?, geo),
        None => Maze::parse_with(BENCHMARK_MAZE, geo),
    }
}

/// Entry parameter of a ray `p + t·d` into an axis-aligned box, if any.
fn ray_box(p: [f64; 2], d: [f64; 2], b: [f64; 4]) -> Option<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        let (lo, hi) = (b[k], b[k + 2]);
        if d[k] == 0.0 {
            if p[k] <= lo || p[k] >= hi {
                return None;
            }
        } else {
            let a = (lo - p[k]) / d[k];
            let c = (hi - p[k]) / d[k];
            t0 = t0.max(a.min(c));
            t1 = t1.min(a.max(c));
        }
    }
    (t0 < t1 && t1 > 0.0).then_some(t0.max(0.0))
}

/// Entry parameter of a ray into an open disc, if any.
fn ray_disc(p: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> Option<f64> {
    let f = [p[0] - c[0], p[1] - c[1]];
    let a = d[0] * d[0] + d[1] * d[1];
    let b = f[0] * d[0] + f[1] * d[1];
    let cc = f[0] * f[0] + f[1] * f[1] - r * r;
    if cc < 0.0 {
        return Some(0.0);
    }
    if a == 0.0 {
        return None;
    }
    let disc = b * b - a * cc;
    if disc <= 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / a;
    (t >= 0.0).then_some(t)
}

/// First parameter in `[0, 1]` at which the swept disc touches the wall box
/// (the box grown by `r` with rounded corners).
fn sweep_hit(p: [f64; 2], d: [f64; 2], b: [f64; 4], r: f64) -> Option<f64> {
    let wide = [b[0] - r, b[1], b[2] + r, b[3]];
    let tall = [b[0], b[1] - r, b[2], b[3] + r];
    let corners = [[b[0], b[1]], [b[2], b[1]], [b[0], b[3]], [b[2], b[3]]];
    [ray_box(p, d, wide), ray_box(p, d, tall)]
        .into_iter()
        .chain(corners.iter().map(|&c| ray_disc(p, d, c, r)))
        .flatten()
        .filter(|&t| t <= 1.0)
        .min_by(f64::total_cmp)
}

/// Moves the robot by a body-frame displacement, stopping short of the first
/// wall contact.
pub fn apply_motion(m: &Maze, from: &Pose2, disp: &Pose2) -> (Pose2, bool) {
    let to = from.compose(disp);
    let p = [from.x, from.y];
    let d = [to.x - from.x, to.y - from.y];
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return (to, false);
    }
    let r = m.geo.robot_radius;
    let hit = m
        .walls_near(
            p[0].min(to.x) - r,
            p[1].min(to.y) - r,
            p[0].max(to.x) + r,
            p[1].max(to.y) + r,
        )
        .filter_map(|b| sweep_hit(p, d, b, r))
        .min_by(f64::total_cmp);
    match hit {
        None => (to, false),
        Some(t) => {
            let t = (t - m.geo.margin / len).max(0.0);
            let pose = Pose2 {
                x: p[0] + t * d[0],
                y: p[1] + t * d[1],
                yaw: wrap(from.yaw + t * disp.yaw),
            };
            (pose, true)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsParams {
    pub iterations: usize,
    pub horizon: usize,
    pub uct_c: f64,
    pub action_set_size: usize,
    /// Evenly spaced directional targets within the action set.
    pub directions: usize,
    pub direction_radius: f64,
    pub discount: f64,
    pub goal_bonus: f64,
    pub collision_penalty: f64,
    pub rollout: Rollout,
}

/// Action choice beyond the tree during a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rollout {
    /// Uniformly random actions.
    Random,
    /// The action whose outcome is closest to the goal (by path distance).
    Greedy,
}

impl std::str::FromStr for Rollout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Rollout::Random),
            "greedy" => Ok(Rollout::Greedy),
            _ => Err(Error::Config(format!("unknown rollout policy {s:?}"))),
        }
    }
}

impl Default for MctsParams {
    fn default() -> Self {
        MctsParams {
            iterations: 500,
            horizon: 6,
            uct_c: 1.414,
            action_set_size: 40,
            directions: 24,
            direction_radius: 0.9,
            discount: 1.0,
            goal_bonus: 10.0,
            collision_penalty: 0.5,
            rollout: Rollout::Greedy,
        }
    }
}

impl MctsParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.iterations > 0
            && self.horizon > 0
            && self.uct_c > 0.0
            && self.action_set_size > 0
            && self.directions <= self.action_set_size
            && self.direction_radius > 0.0
            && self.discount > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid planner parameters".into()))
        }
    }
}

/// Chooses the skills offered to the planner: for each of the evenly spaced
/// targets on a circle the nearest skill, then uniformly random skills.
/// Duplicates are dropped, so the set may be smaller than requested.
pub fn select_action_set<R: Rng + ?Sized>(
    skills: &[Elite],
    p: &MctsParams,
    rng: &mut R,
) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(p.action_set_size);
    if skills.is_empty() {
        return out;
    }
    for k in 0..p.directions {
        let a = std::f64::consts::TAU * k as f64 / p.directions as f64;
        let q = [p.direction_radius * a.cos(), p.direction_radius * a.sin()];
        let i = crate::archive::nearest_primary(skills, &q).expect("non-empty");
        if !out.contains(&i) {
            out.push(i);
        }
    }
    for _ in p.directions..p.action_set_size {
        let i = rng.gen_range(0..skills.len());
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// A skill as seen by the planner: stored `(x, y)` and recorded yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkillAction {
    pub bd: [f64; 2],
    pub yaw: f64,
}

impl SkillAction {
    pub fn of(e: &Elite) -> Self {
        SkillAction {
            bd: [e.bd_primary[0], e.bd_primary[1]],
            yaw: e.recorded_yaw,
        }
    }
}

/// Repertoire outcome corrected by the transition model's mean residual.
pub fn predicted_displacement(a: &SkillAction, tgp: &TransitionModel, input: &[f64]) -> Pose2 {
    let r = tgp.mean(input);
    Pose2 {
        x: a.bd[0] + r[0],
        y: a.bd[1] + r[1],
        yaw: wrap(a.yaw + r[2]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Index into the offered displacements.
    pub choice: usize,
    pub root_visits: Vec<u32>,
    pub root_values: Vec<f64>,
}

struct Node {
    pose: Pose2,
    terminal: bool,
    /// Reward collected on the edge into this node.
    edge_reward: f64,
    children: Vec<Option<usize>>,
    visits: u32,
    value: f64,
}

/// UCT search over sequences of body-frame displacements. Returns the most
/// visited first action (ties: higher mean return, then lower index).
pub fn mcts_plan<R: Rng + ?Sized>(
    m: &Maze,
    pose: &Pose2,
    disps: &[Pose2],
    p: &MctsParams,
    rng: &mut R,
) -> Result<Plan> {
    if disps.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    p.validate()?;
    let n = disps.len();
    let d0 = m.goal_distance(pose.x, pose.y).max(1e-9);
    let step = |from: &Pose2, a: usize, depth: usize| -> (Pose2, f64, bool) {
        let (to, hit) = apply_motion(m, from, &disps[a]);
        let g = p.discount.powi(depth as i32);
        let mut r = 0.0;
        if hit {
            r -= g * p.collision_penalty;
        }
        let goal = m.at_goal(&to);
        if goal {
            r += g * p.goal_bonus;
        }
        (to, r, goal)
    };
    let greedy = |from: &Pose2| -> usize {
        let mut best = (f64::INFINITY, 0usize);
        for (a, d) in disps.iter().enumerate() {
            let (to, hit) = apply_motion(m, from, d);
            let v = m.goal_distance(to.x, to.y) + if hit { p.collision_penalty * d0 } else { 0.0 };
            if v < best.0 {
                best = (v, a);
            }
        }
        best.1
    };
    let mut nodes = vec![Node {
        pose: *pose,
        terminal: m.at_goal(pose),
        edge_reward: 0.0,
        children: vec![None; n],
        visits: 0,
        value: 0.0,
    }];
    let mut path = Vec::with_capacity(p.horizon + 1);
    for _ in 0..p.iterations {
        path.clear();
        path.push(0usize);
        let mut cur = 0usize;
        let mut depth = 0usize;
        let mut reward = 0.0;
        // selection and expansion
        while depth < p.horizon && !nodes[cur].terminal {
            let untried: Vec<usize> = (0..n)
                .filter(|&a| nodes[cur].children[a].is_none())
                .collect();
            if !untried.is_empty() {
                let a = untried[rng.gen_range(0..untried.len())];
                let (to, r, goal) = step(&nodes[cur].pose, a, depth);
                nodes.push(Node {
                    pose: to,
                    terminal: goal,
                    edge_reward: r,
                    children: vec![None; n],
                    visits: 0,
                    value: 0.0,
                });
                let id = nodes.len() - 1;
                nodes[cur].children[a] = Some(id);
                cur = id;
                reward += r;
                depth += 1;
                path.push(cur);
                break;
            }
            let ln = (nodes[cur].visits.max(1) as f64).ln();
            let mut best = (f64::NEG_INFINITY, 0usize);
            for a in 0..n {
                let ch = &nodes[nodes[cur].children[a].unwrap()];
                let u = ch.value / ch.visits as f64 + p.uct_c * (ln / ch.visits as f64).sqrt();
                if u > best.0 {
                    best = (u, a);
                }
            }
            cur = nodes[cur].children[best.1].unwrap();
            reward += nodes[cur].edge_reward;
            depth += 1;
            path.push(cur);
        }
        // random rollout
        let mut pose_r = nodes[cur].pose;
        let mut done = nodes[cur].terminal;
        while depth < p.horizon && !done {
            let a = match p.rollout {
                Rollout::Random => rng.gen_range(0..n),
                Rollout::Greedy => greedy(&pose_r),
            };
            let (to, r, goal) = step(&pose_r, a, depth);
            pose_r = to;
            reward += r;
            done = goal;
            depth += 1;
        }
        let dh = m.goal_distance(pose_r.x, pose_r.y);
        let ret = reward + (d0 - dh) / d0;
        // Returns accumulate along the whole path; each node records the
        // return of iterations passing through it.
        for &id in &path {
            nodes[id].visits += 1;
            nodes[id].value += ret;
        }
    }
    let mut root_visits = vec![0u32; n];
    let mut root_values = vec![f64::NEG_INFINITY; n];
    for a in 0..n {
        if let Some(id) = nodes[0].children[a] {
            root_visits[a] = nodes[id].visits;
            root_values[a] = nodes[id].value / nodes[id].visits as f64;
        }
    }
    let choice = (0..n)
        .max_by(|&a, &b| {
            root_visits[a]
                .cmp(&root_visits[b])
                .then(root_values[a].total_cmp(&root_values[b]))
                .then(b.cmp(&a))
        })
        .unwrap();
    Ok(Plan {
        choice,
        root_visits,
        root_values,
    })
}
