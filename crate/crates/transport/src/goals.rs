//! Goal locations from a position trace: long stops, clustered.

use serde::{Deserialize, Serialize};

use crate::graph::RoadGraph;
use crate::model::Goal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Seconds since the start of the trace.
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalExtraction {
    /// Minimum stop duration, seconds.
    pub dwell_threshold: f64,
    /// Stops closer than this (meters) end up in the same goal.
    pub cluster_radius: f64,
    /// Speeds below this (m/s) count as stopped.
    pub stop_speed: f64,
}

impl Default for GoalExtraction {
    fn default() -> Self {
        Self {
            dwell_threshold: 15.0 * 60.0,
            cluster_radius: 50.0,
            stop_speed: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedGoal {
    /// Mean position of the stops.
    pub center: (f64, f64),
    /// Stop positions that make up the goal.
    pub stops: Vec<(f64, f64)>,
    /// Nearest edges of the stops, sorted.
    pub edges: Vec<usize>,
    /// Total dwell time, seconds.
    pub dwell: f64,
}

impl ExtractedGoal {
    pub fn goal(&self) -> Goal {
        Goal { edges: self.edges.clone() }
    }
}

/// Stops longer than the threshold, merged by single linkage within the
/// cluster radius, each mapped to the edges nearest its stops. Goals come
/// out in order of their first stop.
pub fn extract_goals(graph: &RoadGraph, trace: &[TracePoint], opts: &GoalExtraction) -> Vec<ExtractedGoal> {
    let mut stops: Vec<((f64, f64), f64)> = Vec::new();
    let mut k = 0;
    while k < trace.len() {
        if trace[k].speed >= opts.stop_speed {
            k += 1;
            continue;
        }
        let start = k;
        while k < trace.len() && trace[k].speed < opts.stop_speed {
            k += 1;
        }
        let run = &trace[start..k];
        let dwell = run[run.len() - 1].time - run[0].time;
        if dwell > opts.dwell_threshold {
            let n = run.len() as f64;
            let c = (run.iter().map(|p| p.x).sum::<f64>() / n, run.iter().map(|p| p.y).sum::<f64>() / n);
            stops.push((c, dwell));
        }
    }
    // single linkage by union-find
    let mut parent: Vec<usize> = (0..stops.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..stops.len() {
        for j in i + 1..stops.len() {
            let (a, b) = (stops[i].0, stops[j].0);
            if (a.0 - b.0).hypot(a.1 - b.1) <= opts.cluster_radius {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut out: Vec<(usize, ExtractedGoal)> = Vec::new();
    for i in 0..stops.len() {
        let r = root(&mut parent, i);
        let (pos, dwell) = stops[i];
        let (edge, _) = graph.nearest_edge(pos);
        match out.iter_mut().find(|(k, _)| *k == r) {
            Some((_, g)) => {
                g.stops.push(pos);
                g.dwell += dwell;
                if !g.edges.contains(&edge) {
                    g.edges.push(edge);
                    g.edges.sort_unstable();
                }
            }
            None => out.push((
                r,
                ExtractedGoal {
                    center: pos,
                    stops: vec![pos],
                    edges: vec![edge],
                    dwell,
                },
            )),
        }
    }
    out.into_iter()
        .map(|(_, mut g)| {
            let n = g.stops.len() as f64;
            g.center = (
                g.stops.iter().map(|p| p.0).sum::<f64>() / n,
                g.stops.iter().map(|p| p.1).sum::<f64>() / n,
            );
            g
        })
        .collect()
}
