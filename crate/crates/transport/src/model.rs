//! The travel model as a dynamic mixed network.
//!
//! Per slice: time of day `d` (4) and day of week `w` (2), goal `g`, route
//! `r` = (origin goal, target goal), dwell counter `f ∈ 0..=D`, indicator
//! `eq` (on a goal edge), goal-switch selector `sw`, arc `a`, offset along
//! the arc, velocity `v`, and GPS readings `yx`, `yy`, `ys` (position and
//! speed). `d`, `w` and the readings are observed.
//!
//! The counter and selector have uniform CPDs; the eight switching rules
//! pin them down, so the uniform factors are constant and do not bias the
//! joint. The goal CPD copies the previous goal when `sw = 0` and draws
//! from the time-dependent switching table when `sw = 1`.

use hdmn::model::{ConstraintRelation, LgParams};
use hdmn::{DynamicBuilder, DynamicMixedNetwork64, VarId};
use serde::{Deserialize, Serialize};

use crate::graph::RoadGraph;
use crate::{Result, TransportError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Full model.
    Model1,
    /// Without time of day and day of week.
    Model2,
    /// Location, velocity and readings only.
    Model3,
}

impl std::str::FromStr for Variant {
    type Err = TransportError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model1" => Ok(Variant::Model1),
            "model2" => Ok(Variant::Model2),
            "model3" => Ok(Variant::Model3),
            _ => Err(TransportError::Model(format!("unknown model variant `{s}`"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Model1 => "model1",
            Variant::Model2 => "model2",
            Variant::Model3 => "model3",
        })
    }
}

/// A goal is a set of road edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportParams {
    /// Seconds per slice.
    pub tick: f64,
    /// Dwell counter maximum `D`.
    pub dwell: usize,
    /// Cruising speed, m/s.
    pub cruise: f64,
    /// Probability that a goal switch keeps the current goal.
    pub goal_stay: f64,
    /// Probability of heading to the preferred goal of the time slot.
    pub target_bias: f64,
    /// Preferred goal per (day of week, time of day), taken modulo the goal count.
    pub targets: [[usize; 4]; 2],
    /// Mass on shortest-path successors when leaving an arc.
    pub follow: f64,
    /// Relative per-route perturbation of successor weights.
    pub route_noise: f64,
    /// Probability of staying on a goal edge of the target.
    pub park: f64,
    pub offset_sd: f64,
    pub speed_sd: f64,
    pub gps_sd: f64,
    pub speed_reading_sd: f64,
    /// Per-slice probability that the time of day advances.
    pub period_advance: f64,
    /// Per-slice probability that the day type flips.
    pub day_flip: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        Self {
            tick: 5.0,
            dwell: 3,
            cruise: 10.0,
            goal_stay: 0.6,
            target_bias: 0.9,
            targets: [[2, 2, 0, 0], [1, 2, 0, 0]],
            follow: 0.9,
            route_noise: 0.3,
            park: 0.97,
            offset_sd: 5.0,
            speed_sd: 1.5,
            gps_sd: 10.0,
            speed_reading_sd: 1.0,
            period_advance: 0.02,
            day_flip: 0.005,
        }
    }
}

/// Ids of the model's state variables (`None` where the variant drops them).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VarRegistry {
    pub d: Option<VarId>,
    pub w: Option<VarId>,
    pub g: Option<VarId>,
    pub r: Option<VarId>,
    pub f: Option<VarId>,
    pub eq: Option<VarId>,
    pub sw: Option<VarId>,
    pub a: VarId,
    pub offset: VarId,
    pub v: VarId,
    pub yx: VarId,
    pub yy: VarId,
    pub ys: VarId,
}

#[derive(Clone, Debug)]
pub struct TransportHdmn {
    pub dmn: DynamicMixedNetwork64,
    pub vars: VarRegistry,
    pub graph: RoadGraph,
    pub goals: Vec<Goal>,
    pub variant: Variant,
    pub params: TransportParams,
    pub tables: Tables,
}

impl TransportHdmn {
    /// Model-level variables per slice: location (arc plus offset),
    /// velocity and the reading count once each.
    pub fn logical_variables(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.vars.d.is_some() {
            v.extend(["d", "w"]);
        }
        if self.vars.g.is_some() {
            v.extend(["g", "r", "f"]);
        }
        v.extend(["l", "v", "y"]);
        v
    }

    pub fn num_goals(&self) -> usize {
        self.goals.len()
    }

    pub fn route(&self, from: usize, to: usize) -> usize {
        from * self.goals.len() + to
    }

    /// `(origin, target)` of a route value.
    pub fn route_goals(&self, r: usize) -> (usize, usize) {
        (r / self.goals.len(), r % self.goals.len())
    }

    pub fn goal_of_edge(&self, e: usize) -> Option<usize> {
        self.goals.iter().position(|g| g.edges.contains(&e))
    }
}

/// The goal-switching rules as implications: a tuple outside a rule's guard is allowed.
fn counter_rule(d: usize, rule: usize, eq: usize, fp: usize, fc: usize) -> bool {
    match rule {
        1 => !(eq == 1 && fp == 0) || fc == d,
        2 => !(eq == 1 && fp > 0) || fc + 1 == fp,
        3 => !(eq == 0 && fp == 0) || fc == 0,
        4 => !(eq == 0 && fp > 0) || fc == 0,
        _ => unreachable!(),
    }
}

fn switch_rule(rule: usize, fp: usize, fc: usize, sw: usize) -> bool {
    match rule {
        5 => !(fp > 0 && fc == 0) || sw == 1,
        6 => !(fp == 0 && fc == 0) || sw == 0,
        7 => !(fp > 0 && fc > 0) || sw == 0,
        8 => !(fp == 0 && fc > 0) || sw == 1,
        _ => unreachable!(),
    }
}

/// The eight goal-switching rules as relations, in rule order. Rules 1–4
/// range over `(eq_prev, f_prev, f_cur)`, rules 5–8 over
/// `(f_prev, f_cur, sw_cur)`; each allows every tuple its guard does not
/// select. `sw = 1` means the new goal is drawn from the switching table.
pub fn goal_switch_constraints(
    d: usize,
    eq_prev: VarId,
    f_prev: VarId,
    f_cur: VarId,
    sw_cur: VarId,
) -> Result<Vec<ConstraintRelation>> {
    if d < 1 {
        return Err(TransportError::Model("dwell maximum D must be at least 1".into()));
    }
    let k = d + 1;
    let mut out = Vec::with_capacity(8);
    for rule in 1..=4 {
        out.push(ConstraintRelation::from_predicate(vec![eq_prev, f_prev, f_cur], vec![2, k, k], |t| {
            counter_rule(d, rule, t[0], t[1], t[2])
        })?);
    }
    for rule in 5..=8 {
        out.push(ConstraintRelation::from_predicate(vec![f_prev, f_cur, sw_cur], vec![k, k, 2], |t| {
            switch_rule(rule, t[0], t[1], t[2])
        })?);
    }
    Ok(out)
}

/// The counter value rules 1–4 force, and whether rules 5–8 then select
/// a goal switch.
pub fn next_counter(d: usize, at_goal: bool, f_prev: usize) -> (usize, bool) {
    let f = match (at_goal, f_prev) {
        (true, 0) => d,
        (true, f) => f - 1,
        (false, _) => 0,
    };
    (f, (f_prev > 0) != (f > 0))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn unit_hash(parts: &[u64]) -> f64 {
    let h = parts.iter().fold(0x5151_u64, |acc, &p| splitmix(acc ^ p));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Probability tables shared by the network and the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Tables {
    /// `switch[w][d][j]`: next-goal distribution from goal `j` on a switch.
    pub switch: Vec<Vec<Vec<Vec<f64>>>>,
    /// `initial[w][d]`: goal distribution at the first slice.
    pub initial: Vec<Vec<Vec<f64>>>,
    /// `arc[r][a]`: next-arc distribution on route `r`.
    pub arc: Vec<Vec<Vec<f64>>>,
    /// `free_arc[a]`: next-arc distribution without route knowledge.
    pub free_arc: Vec<Vec<f64>>,
    /// Day-type weights (weekend, weekday).
    pub day_weights: [f64; 2],
}

impl Tables {
    pub fn new(graph: &RoadGraph, goals: &[Goal], p: &TransportParams) -> Self {
        let ng = goals.len();
        let target = |w: usize, d: usize| p.targets[w][d] % ng;
        let leave = |j: usize, t: usize| -> Vec<f64> {
            // distribution over goals other than j
            let others: Vec<usize> = (0..ng).filter(|&k| k != j).collect();
            let mut q = vec![0.0; ng];
            if t == j || others.len() == 1 {
                for &k in &others {
                    q[k] = 1.0 / others.len() as f64;
                }
            } else {
                for &k in &others {
                    q[k] = if k == t { p.target_bias } else { (1.0 - p.target_bias) / (others.len() - 1) as f64 };
                }
            }
            q
        };
        let switch = (0..2)
            .map(|w| {
                (0..4)
                    .map(|d| {
                        (0..ng)
                            .map(|j| {
                                let q = leave(j, target(w, d));
                                (0..ng)
                                    .map(|k| if k == j { p.goal_stay } else { (1.0 - p.goal_stay) * q[k] })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let initial = (0..2)
            .map(|w| {
                (0..4)
                    .map(|d| {
                        let t = target(w, d);
                        (0..ng)
                            .map(|k| {
                                if ng == 1 {
                                    1.0
                                } else if k == t {
                                    p.target_bias
                                } else {
                                    (1.0 - p.target_bias) / (ng - 1) as f64
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let dist = graph.distances();
        let na = graph.num_arcs();
        let goal_dist = |goal: &Goal, v: usize| -> f64 {
            goal.edges
                .iter()
                .map(|&e| dist[v][graph.edges[e].s1].min(dist[v][graph.edges[e].s2]))
                .fold(f64::INFINITY, f64::min)
        };
        let advance = |a: usize| (p.tick * p.cruise / graph.arc_length(a)).min(0.9);
        let mut arc = Vec::with_capacity(ng * ng);
        for r in 0..ng * ng {
            let to = &goals[r % ng];
            let rows = (0..na)
                .map(|a| {
                    let succ = graph.successors(a);
                    let mut row = vec![0.0; na];
                    let moving = if to.edges.contains(&graph.arc_edge(a)) {
                        row[a] = p.park;
                        1.0 - p.park
                    } else {
                        let adv = advance(a);
                        row[a] = 1.0 - adv;
                        adv
                    };
                    let score = |s: usize| {
                        if to.edges.contains(&graph.arc_edge(s)) {
                            0.0
                        } else {
                            graph.arc_length(s) + goal_dist(to, graph.arc_end(s))
                        }
                    };
                    let best = succ.iter().map(|&s| score(s)).fold(f64::INFINITY, f64::min);
                    let is_best: Vec<bool> = succ.iter().map(|&s| score(s) <= best + 1e-9).collect();
                    let nb = is_best.iter().filter(|&&b| b).count();
                    let mut w: Vec<f64> = is_best
                        .iter()
                        .map(|&b| {
                            if nb == succ.len() {
                                1.0 / nb as f64
                            } else if b {
                                p.follow / nb as f64
                            } else {
                                (1.0 - p.follow) / (succ.len() - nb) as f64
                            }
                        })
                        .zip(&succ)
                        .map(|(x, &s)| x * (1.0 + p.route_noise * unit_hash(&[r as u64, a as u64, s as u64])))
                        .collect();
                    let total: f64 = w.iter().sum();
                    w.iter_mut().for_each(|x| *x *= moving / total);
                    for (&s, x) in succ.iter().zip(w) {
                        row[s] += x;
                    }
                    row
                })
                .collect();
            arc.push(rows);
        }
        let free_arc = (0..na)
            .map(|a| {
                let succ = graph.successors(a);
                let adv = advance(a);
                let mut row = vec![0.0; na];
                row[a] = 1.0 - adv;
                for &s in &succ {
                    row[s] += adv / succ.len() as f64;
                }
                row
            })
            .collect();
        Self {
            switch,
            initial,
            arc,
            free_arc,
            day_weights: [2.0 / 7.0, 5.0 / 7.0],
        }
    }

    /// Switching table averaged over the clock (time-of-day uniform).
    pub fn switch_without_clock(&self, j: usize) -> Vec<f64> {
        let ng = self.switch[0][0].len();
        let mut out = vec![0.0; ng];
        for w in 0..2 {
            for d in 0..4 {
                for (o, x) in out.iter_mut().zip(&self.switch[w][d][j]) {
                    *o += self.day_weights[w] * 0.25 * x;
                }
            }
        }
        out
    }

    pub fn initial_without_clock(&self) -> Vec<f64> {
        let ng = self.initial[0][0].len();
        let mut out = vec![0.0; ng];
        for w in 0..2 {
            for d in 0..4 {
                for (o, x) in out.iter_mut().zip(&self.initial[w][d]) {
                    *o += self.day_weights[w] * 0.25 * x;
                }
            }
        }
        out
    }

    /// Start arcs: uniform over arcs of the route's origin goal.
    pub fn start_arcs(graph: &RoadGraph, origin: &Goal) -> Vec<f64> {
        let mut row = vec![0.0; graph.num_arcs()];
        let arcs: Vec<usize> = (0..graph.num_arcs()).filter(|&a| origin.edges.contains(&graph.arc_edge(a))).collect();
        for &a in &arcs {
            row[a] = 1.0 / arcs.len() as f64;
        }
        row
    }
}

fn one_hot(k: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
}

/// Assemble the prior and transition networks for a variant.
pub fn build_transport_model(
    graph: &RoadGraph,
    goals: &[Goal],
    d_max: usize,
    params: &TransportParams,
    variant: Variant,
) -> Result<TransportHdmn> {
    graph.validate()?;
    if goals.len() < 2 {
        return Err(TransportError::Model("need at least two goals".into()));
    }
    for (i, g) in goals.iter().enumerate() {
        if g.edges.is_empty() || g.edges.iter().any(|&e| e >= graph.edges.len()) {
            return Err(TransportError::Model(format!("goal {i} has no valid edges")));
        }
        for h in &goals[i + 1..] {
            if g.edges.iter().any(|e| h.edges.contains(e)) {
                return Err(TransportError::Model("goals must be disjoint edge sets".into()));
            }
        }
    }
    if d_max < 1 {
        return Err(TransportError::Model("dwell maximum D must be at least 1".into()));
    }
    let params = TransportParams { dwell: d_max, ..params.clone() };
    let p = &params;
    let tables = Tables::new(graph, goals, p);
    for rows in tables.arc.iter().chain(std::iter::once(&tables.free_arc)) {
        for (from, row) in rows.iter().enumerate() {
            if let Some(to) = (0..row.len()).find(|&to| row[to] > 0.0 && !graph.adjacent(from, to)) {
                return Err(TransportError::Model(format!("transition from arc {from} to non-adjacent arc {to}")));
            }
        }
    }
    let ng = goals.len();
    let na = graph.num_arcs();
    let nf = d_max + 1;
    let full = variant != Variant::Model3;
    let clock = variant == Variant::Model1;

    let mut b = DynamicBuilder::<f64>::new();
    let d = clock.then(|| b.discrete_labeled("d", &["morning", "afternoon", "evening", "night"]));
    let w = clock.then(|| b.discrete_labeled("w", &["weekend", "weekday"]));
    let g = full.then(|| b.discrete("g", ng));
    let r = full.then(|| b.discrete("r", ng * ng));
    let f = full.then(|| b.discrete("f", nf));
    let eq = full.then(|| b.discrete("eq", 2));
    let sw = full.then(|| b.discrete("sw", 2));
    let a = b.discrete("a", na);
    let offset = b.continuous("offset");
    let v = b.continuous("v");
    let yx = b.continuous("yx");
    let yy = b.continuous("yy");
    let ys = b.continuous("ys");
    let vars = VarRegistry { d, w, g, r, f, eq, sw, a, offset, v, yx, yy, ys };

    // prior
    if let (Some(d), Some(w)) = (d, w) {
        b.prior_table(d, &[], vec![0.25; 4]);
        b.prior_table(w, &[], tables.day_weights.to_vec());
    }
    if let (Some(g), Some(r), Some(f), Some(eq), Some(sw)) = (g, r, f, eq, sw) {
        match (d, w) {
            (Some(d), Some(w)) => {
                let mut table = Vec::with_capacity(8 * ng);
                for dd in 0..4 {
                    for ww in 0..2 {
                        table.extend(&tables.initial[ww][dd]);
                    }
                }
                b.prior_table(g, &[d, w], table);
            }
            _ => {
                b.prior_table(g, &[], tables.initial_without_clock());
            }
        }
        // origin uniform over the other goals
        let mut rt = Vec::with_capacity(ng * ng * ng);
        for gg in 0..ng {
            for rr in 0..ng * ng {
                let (from, to) = (rr / ng, rr % ng);
                rt.push(if to == gg && from != gg { 1.0 / (ng - 1) as f64 } else { 0.0 });
            }
        }
        b.prior_table(r, &[g], rt);
        b.prior_table(f, &[], one_hot(0, nf));
        b.prior_table(sw, &[], one_hot(0, 2));
        let mut at = Vec::with_capacity(ng * ng * na);
        for rr in 0..ng * ng {
            at.extend(Tables::start_arcs(graph, &goals[rr / ng]));
        }
        b.prior_table(a, &[r], at);
        b.prior_table(eq, &[a, g], eq_table(graph, goals, na));
    } else {
        let mut start = vec![0.0; na];
        for origin in goals {
            for (s, x) in start.iter_mut().zip(Tables::start_arcs(graph, origin)) {
                *s += x / ng as f64;
            }
        }
        b.prior_table(a, &[], start);
    }
    b.prior_linear_gaussian(
        offset,
        &[a],
        &[],
        (0..na)
            .map(|k| {
                let len = graph.arc_length(k);
                LgParams::new(len / 2.0, vec![], (len / 4.0).powi(2))
            })
            .collect(),
    );
    b.prior_linear_gaussian(v, &[], &[], vec![LgParams::new(p.cruise / 2.0, vec![], 16.0)]);
    add_readings(&mut b, graph, p, vars, false);

    // transition
    let cur = |b: &DynamicBuilder<f64>, x: VarId| b.cur(x);
    if let (Some(d), Some(w)) = (d, w) {
        let mut dt = Vec::with_capacity(16);
        for dd in 0..4 {
            for k in 0..4 {
                dt.push(if k == dd {
                    1.0 - p.period_advance
                } else if k == (dd + 1) % 4 {
                    p.period_advance
                } else {
                    0.0
                });
            }
        }
        b.transition_table(cur(&b, d), &[d], dt);
        b.transition_table(
            cur(&b, w),
            &[w],
            vec![1.0 - p.day_flip, p.day_flip, p.day_flip, 1.0 - p.day_flip],
        );
    }
    if let (Some(g), Some(r), Some(f), Some(eq), Some(sw)) = (g, r, f, eq, sw) {
        b.transition_table(cur(&b, f), &[], vec![1.0 / nf as f64; nf]);
        b.transition_table(cur(&b, sw), &[], vec![0.5, 0.5]);
        let mut gt = Vec::new();
        let parents: Vec<VarId> = match (d, w) {
            (Some(d), Some(w)) => {
                for j in 0..ng {
                    for s in 0..2 {
                        for dd in 0..4 {
                            for ww in 0..2 {
                                if s == 0 {
                                    gt.extend(one_hot(j, ng));
                                } else {
                                    gt.extend(&tables.switch[ww][dd][j]);
                                }
                            }
                        }
                    }
                }
                vec![g, cur(&b, sw), cur(&b, d), cur(&b, w)]
            }
            _ => {
                for j in 0..ng {
                    gt.extend(one_hot(j, ng));
                    gt.extend(tables.switch_without_clock(j));
                }
                vec![g, cur(&b, sw)]
            }
        };
        b.transition_table(cur(&b, g), &parents, gt);
        // keep the route while the target stands; else start from the old target
        let mut rt = Vec::with_capacity(ng * ng * ng * ng * ng);
        for rp in 0..ng * ng {
            for gg in 0..ng {
                let to = rp % ng;
                let next = if to == gg { rp } else { to * ng + gg };
                rt.extend(one_hot(next, ng * ng));
            }
        }
        b.transition_table(cur(&b, r), &[r, cur(&b, g)], rt);
        let mut at = Vec::with_capacity(na * ng * ng * na);
        for aa in 0..na {
            for rr in 0..ng * ng {
                at.extend(&tables.arc[rr][aa]);
            }
        }
        b.transition_table(cur(&b, a), &[a, cur(&b, r)], at);
        b.transition_table(cur(&b, eq), &[cur(&b, a), cur(&b, g)], eq_table(graph, goals, na));
        for rel in goal_switch_constraints(d_max, eq, f, cur(&b, f), cur(&b, sw))? {
            b.transition_constraint(rel);
        }
    } else {
        b.transition_table(cur(&b, a), &[a], tables.free_arc.concat());
    }
    b.transition_constraint(ConstraintRelation::from_predicate(vec![a, cur(&b, a)], vec![na, na], |t| {
        graph.adjacent(t[0], t[1])
    })?);
    let mut op = Vec::with_capacity(na * na);
    for from in 0..na {
        for to in 0..na {
            op.push(if from == to {
                LgParams::new(0.0, vec![1.0, p.tick], p.offset_sd.powi(2))
            } else {
                LgParams::new(0.0, vec![0.0, p.tick / 2.0], p.offset_sd.powi(2))
            });
        }
    }
    b.transition_linear_gaussian(cur(&b, offset), &[a, cur(&b, a)], &[offset, v], op);
    let moving = LgParams::new(0.4 * p.cruise, vec![0.6], p.speed_sd.powi(2));
    match eq {
        Some(eq) => {
            let parked = LgParams::new(0.0, vec![0.1], 0.3f64.powi(2));
            b.transition_linear_gaussian(cur(&b, v), &[cur(&b, eq)], &[v], vec![moving, parked]);
        }
        None => {
            b.transition_linear_gaussian(cur(&b, v), &[], &[v], vec![moving]);
        }
    }
    add_readings(&mut b, graph, p, vars, true);
    for o in [d, w].into_iter().flatten().chain([yx, yy, ys]) {
        b.observe(o);
    }
    let dmn = b.build()?;
    Ok(TransportHdmn {
        dmn,
        vars,
        graph: graph.clone(),
        goals: goals.to_vec(),
        variant,
        params,
        tables,
    })
}

fn eq_table(graph: &RoadGraph, goals: &[Goal], na: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(na * goals.len() * 2);
    for aa in 0..na {
        for goal in goals {
            let on = goal.edges.contains(&graph.arc_edge(aa));
            t.extend(if on { [0.0, 1.0] } else { [1.0, 0.0] });
        }
    }
    t
}

fn add_readings(b: &mut DynamicBuilder<f64>, graph: &RoadGraph, p: &TransportParams, vars: VarRegistry, transition: bool) {
    let na = graph.num_arcs();
    let id = |b: &DynamicBuilder<f64>, x: VarId| if transition { b.cur(x) } else { x };
    let (a, offset, v) = (id(b, vars.a), id(b, vars.offset), id(b, vars.v));
    let gps = p.gps_sd.powi(2);
    let px: Vec<LgParams<f64>> = (0..na)
        .map(|k| {
            let s = graph.vertices[graph.arc_start(k)];
            LgParams::new(s.0, vec![graph.arc_direction(k).0], gps)
        })
        .collect();
    let py: Vec<LgParams<f64>> = (0..na)
        .map(|k| {
            let s = graph.vertices[graph.arc_start(k)];
            LgParams::new(s.1, vec![graph.arc_direction(k).1], gps)
        })
        .collect();
    let speed = vec![LgParams::new(0.0, vec![1.0], p.speed_reading_sd.powi(2))];
    let (yx, yy, ys) = (id(b, vars.yx), id(b, vars.yy), id(b, vars.ys));
    if transition {
        b.transition_linear_gaussian(yx, &[a], &[offset], px);
        b.transition_linear_gaussian(yy, &[a], &[offset], py);
        b.transition_linear_gaussian(ys, &[], &[v], speed);
    } else {
        b.prior_linear_gaussian(yx, &[a], &[offset], px);
        b.prior_linear_gaussian(yy, &[a], &[offset], py);
        b.prior_linear_gaussian(ys, &[], &[v], speed);
    }
}
