//! Goal and route prediction from filtered beliefs, scored per trip.

use std::ops::Range;

use hdmn::propagate::Marginal;
use hdmn::BeliefState64;
use serde::Serialize;

use crate::model::TransportHdmn;
use crate::simulate::Trajectory;
use crate::{Result, TransportError};

/// Maximal runs of ticks with the same true goal.
pub fn trips(goals: &[usize]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=goals.len() {
        if t == goals.len() || goals[t] != goals[start] {
            out.push(start..t);
            start = t;
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Score {
    pub trips: usize,
    pub correct: usize,
    /// Percent of trips whose goal was predicted correctly.
    pub goal_accuracy: f64,
    /// Predicted route edges not traveled, summed over trips.
    pub route_fp: usize,
    /// Traveled edges not on the predicted route, summed over trips.
    pub route_fn: usize,
    /// Ticks whose goal was predicted correctly.
    pub tick_hits: usize,
}

/// Score per-tick goal predictions and per-trip route edge sets. A trip
/// counts as correct when more than half of its ticks predict its goal.
pub fn score_predictions(truth: &Trajectory, goals: &[usize], routes: &[Vec<usize>]) -> Score {
    let true_goals: Vec<usize> = truth.steps.iter().map(|s| s.goal).collect();
    let trips = trips(&true_goals);
    let mut score = Score { trips: trips.len(), ..Default::default() };
    for (k, trip) in trips.iter().enumerate() {
        let hits = trip.clone().filter(|&t| goals.get(t) == Some(&true_goals[t])).count();
        score.tick_hits += hits;
        if 2 * hits > trip.len() {
            score.correct += 1;
        }
        let mut traveled: Vec<usize> = trip.clone().map(|t| truth.steps[t].edge()).collect();
        traveled.sort_unstable();
        traveled.dedup();
        let predicted = routes.get(k).map_or(&[][..], |r| &r[..]);
        score.route_fp += predicted.iter().filter(|e| !traveled.contains(e)).count();
        score.route_fn += traveled.iter().filter(|e| !predicted.contains(e)).count();
    }
    if score.trips > 0 {
        score.goal_accuracy = 100.0 * score.correct as f64 / score.trips as f64;
    }
    score
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = k;
        }
    }
    best
}

fn probs(b: &BeliefState64, v: hdmn::VarId) -> Result<&[f64]> {
    b.marginals
        .get(&v)
        .and_then(Marginal::probs)
        .ok_or_else(|| TransportError::Model(format!("no discrete marginal for {v} at t={}", b.t)))
}

impl TransportHdmn {
    /// Edges of a shortest connection between two goals, goal edges included.
    pub fn goal_path(&self, dist: &[Vec<f64>], from: usize, to: usize) -> Vec<usize> {
        let ends = |g: usize| -> Vec<usize> {
            self.goals[g]
                .edges
                .iter()
                .flat_map(|&e| [self.graph.edges[e].s1, self.graph.edges[e].s2])
                .collect()
        };
        let mut best = (f64::INFINITY, 0, 0);
        for u in ends(from) {
            for v in ends(to) {
                if dist[u][v] < best.0 {
                    best = (dist[u][v], u, v);
                }
            }
        }
        self.path_with_goal(dist, best.1, to, Some(from))
    }

    fn path_with_goal(&self, dist: &[Vec<f64>], u: usize, to: usize, from: Option<usize>) -> Vec<usize> {
        let target = self.goals[to]
            .edges
            .iter()
            .flat_map(|&e| [self.graph.edges[e].s1, self.graph.edges[e].s2])
            .min_by(|&a, &b| dist[u][a].total_cmp(&dist[u][b]).then(a.cmp(&b)))
            .expect("goals have edges");
        let mut edges = self.graph.shortest_path_edges(dist, u, target);
        edges.extend(&self.goals[to].edges);
        if let Some(f) = from {
            edges.extend(&self.goals[f].edges);
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Per-tick goal prediction. With a goal variable: argmax of its
    /// marginal. Without one: the goal of the most probable arc's edge, or
    /// else the goal nearest the arc's end by road distance.
    pub fn predict_goals(&self, beliefs: &[BeliefState64]) -> Result<Vec<usize>> {
        let dist = self.graph.distances();
        beliefs
            .iter()
            .map(|b| match self.vars.g {
                Some(g) => Ok(argmax(probs(b, g)?)),
                None => Ok(self.nearest_goal(&dist, argmax(probs(b, self.vars.a)?))),
            })
            .collect()
    }

    fn nearest_goal(&self, dist: &[Vec<f64>], arc: usize) -> usize {
        if let Some(g) = self.goal_of_edge(self.graph.arc_edge(arc)) {
            return g;
        }
        let v = self.graph.arc_end(arc);
        let d = |g: usize| {
            self.goals[g]
                .edges
                .iter()
                .map(|&e| dist[v][self.graph.edges[e].s1].min(dist[v][self.graph.edges[e].s2]))
                .fold(f64::INFINITY, f64::min)
        };
        (0..self.goals.len())
            .min_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)))
            .unwrap_or(0)
    }

    /// Per-trip predicted route edges. With a route variable: the route
    /// with the largest marginal mass summed over the trip. Without one:
    /// a shortest path from the trip's first most probable arc to the goal
    /// predicted most often during the trip.
    pub fn predict_routes(
        &self,
        beliefs: &[BeliefState64],
        goals: &[usize],
        trips: &[Range<usize>],
    ) -> Result<Vec<Vec<usize>>> {
        let dist = self.graph.distances();
        let ng = self.goals.len();
        trips
            .iter()
            .map(|trip| match self.vars.r {
                Some(r) => {
                    let mut mass = vec![0.0; ng * ng];
                    for b in &beliefs[trip.clone()] {
                        for (m, p) in mass.iter_mut().zip(probs(b, r)?) {
                            *m += p;
                        }
                    }
                    let (from, to) = self.route_goals(argmax(&mass));
                    Ok(self.goal_path(&dist, from, to))
                }
                None => {
                    let mut votes = vec![0usize; ng];
                    for &g in &goals[trip.clone()] {
                        votes[g] += 1;
                    }
                    let to = (0..ng).max_by_key(|&g| (votes[g], std::cmp::Reverse(g))).unwrap_or(0);
                    let arc = argmax(probs(&beliefs[trip.start], self.vars.a)?);
                    let mut edges = self.path_with_goal(&dist, self.graph.arc_start(arc), to, None);
                    edges.push(self.graph.arc_edge(arc));
                    edges.sort_unstable();
                    edges.dedup();
                    Ok(edges)
                }
            })
            .collect()
    }
}

/// Predict goals and routes from filtered beliefs and score them against
/// the trajectory.
pub fn predict_and_score(model: &TransportHdmn, beliefs: &[BeliefState64], truth: &Trajectory) -> Result<Score> {
    if beliefs.len() != truth.len() {
        return Err(TransportError::Model(format!(
            "{} beliefs for {} ticks",
            beliefs.len(),
            truth.len()
        )));
    }
    let goals = model.predict_goals(beliefs)?;
    let true_goals: Vec<usize> = truth.steps.iter().map(|s| s.goal).collect();
    let routes = model.predict_routes(beliefs, &goals, &trips(&true_goals))?;
    Ok(score_predictions(truth, &goals, &routes))
}
