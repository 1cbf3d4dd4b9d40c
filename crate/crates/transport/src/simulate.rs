//! Trajectories sampled from the full travel process. The same process
//! drives every model variant; the variants differ only in what the
//! inference model represents.

use hdmn::{Evidence64, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::goals::TracePoint;
use crate::graph::RoadGraph;
use crate::model::{build_transport_model, next_counter, Goal, Tables, TransportHdmn, TransportParams, Variant};
use crate::{Result, TransportError};

/// One tick of a trajectory: hidden state and readings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub tick: usize,
    pub time_of_day: usize,
    pub day_of_week: usize,
    pub goal: usize,
    pub route: usize,
    pub counter: usize,
    pub at_goal: bool,
    pub switched: bool,
    pub arc: usize,
    pub offset: f64,
    pub velocity: f64,
    /// True planar position.
    pub position: (f64, f64),
    /// GPS readings.
    pub x: f64,
    pub y: f64,
    pub speed: f64,
}

impl Step {
    pub fn edge(&self) -> usize {
        self.arc / 2
    }
}

/// How a trajectory was produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub scenario: String,
    pub tick: f64,
    pub gps_sd: f64,
    pub speed_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Per-slice evidence for a model: the readings, plus the clock when
    /// the model has it.
    pub fn evidence(&self, model: &TransportHdmn) -> Vec<Evidence64> {
        let v = &model.vars;
        self.steps
            .iter()
            .map(|s| {
                let mut e = Evidence64::new();
                e.insert(v.yx, Value::Continuous(s.x));
                e.insert(v.yy, Value::Continuous(s.y));
                e.insert(v.ys, Value::Continuous(s.speed));
                if let (Some(d), Some(w)) = (v.d, v.w) {
                    e.insert(d, Value::Discrete(s.time_of_day));
                    e.insert(w, Value::Discrete(s.day_of_week));
                }
                e
            })
            .collect()
    }

    /// Readings as a timed trace for goal extraction.
    pub fn trace(&self) -> Vec<TracePoint> {
        self.steps
            .iter()
            .map(|s| TracePoint {
                time: s.tick as f64 * self.meta.tick,
                x: s.x,
                y: s.y,
                speed: s.speed,
            })
            .collect()
    }
}

fn draw<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let total: f64 = p.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &x) in p.iter().enumerate() {
        if u < x {
            return k;
        }
        u -= x;
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

fn gauss<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    Normal::new(mean, sd).map_or(mean, |n| n.sample(rng))
}

/// Sample `horizon` ticks of the travel process.
pub fn simulate(
    graph: &RoadGraph,
    goals: &[Goal],
    tables: &Tables,
    p: &TransportParams,
    horizon: usize,
    seed: u64,
) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ng = goals.len();
    let on_goal = |arc: usize, g: usize| goals[g].edges.contains(&graph.arc_edge(arc));
    let mut steps: Vec<Step> = Vec::with_capacity(horizon);
    for tick in 0..horizon {
        let step = match steps.last() {
            None => {
                let d = draw(&[0.25; 4], &mut rng);
                let w = draw(&tables.day_weights, &mut rng);
                let goal = draw(&tables.initial[w][d], &mut rng);
                let others: Vec<f64> = (0..ng).map(|k| if k == goal { 0.0 } else { 1.0 }).collect();
                let from = draw(&others, &mut rng);
                let arc = draw(&Tables::start_arcs(graph, &goals[from]), &mut rng);
                let len = graph.arc_length(arc);
                let offset = gauss(len / 2.0, len / 4.0, &mut rng).clamp(0.0, len);
                let velocity = gauss(p.cruise / 2.0, 4.0, &mut rng);
                (d, w, goal, from * ng + goal, 0, false, arc, offset, velocity)
            }
            Some(prev) => {
                let d = if rng.random::<f64>() < p.period_advance {
                    (prev.time_of_day + 1) % 4
                } else {
                    prev.time_of_day
                };
                let w = if rng.random::<f64>() < p.day_flip {
                    1 - prev.day_of_week
                } else {
                    prev.day_of_week
                };
                let (counter, switched) = next_counter(p.dwell, prev.at_goal, prev.counter);
                let goal = if switched {
                    draw(&tables.switch[w][d][prev.goal], &mut rng)
                } else {
                    prev.goal
                };
                let to = prev.route % ng;
                let route = if to == goal { prev.route } else { to * ng + goal };
                let arc = draw(&tables.arc[route][prev.arc], &mut rng);
                let len = graph.arc_length(arc);
                let mean = if arc == prev.arc {
                    prev.offset + p.tick * prev.velocity
                } else {
                    0.5 * p.tick * prev.velocity
                };
                let offset = gauss(mean, p.offset_sd, &mut rng).clamp(0.0, len);
                let velocity = if on_goal(arc, goal) {
                    gauss(0.1 * prev.velocity, 0.3, &mut rng)
                } else {
                    gauss(0.6 * prev.velocity + 0.4 * p.cruise, p.speed_sd, &mut rng)
                };
                (d, w, goal, route, counter, switched, arc, offset, velocity)
            }
        };
        let (d, w, goal, route, counter, switched, arc, offset, velocity) = step;
        let position = graph.position(arc, offset);
        steps.push(Step {
            tick,
            time_of_day: d,
            day_of_week: w,
            goal,
            route,
            counter,
            at_goal: on_goal(arc, goal),
            switched,
            arc,
            offset,
            velocity,
            position,
            x: gauss(position.0, p.gps_sd, &mut rng),
            y: gauss(position.1, p.gps_sd, &mut rng),
            speed: gauss(velocity, p.speed_reading_sd, &mut rng),
        });
    }
    Trajectory {
        meta: TrajectoryMeta {
            seed,
            scenario: String::new(),
            tick: p.tick,
            gps_sd: p.gps_sd,
            speed_sd: p.speed_reading_sd,
        },
        steps,
    }
}

/// A road graph, goals and parameters that together define an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportScenario {
    pub name: String,
    /// Road graph file; a `rows` x `cols` grid when absent.
    pub graph_file: Option<std::path::PathBuf>,
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub goals: usize,
    pub horizon: usize,
    pub params: TransportParams,
    /// Goal edges; chosen from the seed when empty.
    pub goal_edges: Vec<Vec<usize>>,
}

impl Default for TransportScenario {
    fn default() -> Self {
        Self {
            name: "grid".into(),
            graph_file: None,
            rows: 3,
            cols: 3,
            spacing: 150.0,
            goals: 3,
            horizon: 120,
            params: TransportParams::default(),
            goal_edges: Vec::new(),
        }
    }
}

impl TransportScenario {
    pub fn graph(&self) -> Result<RoadGraph> {
        match &self.graph_file {
            Some(path) => RoadGraph::read(path),
            None => RoadGraph::grid(self.rows, self.cols, self.spacing),
        }
    }

    /// Goal sets: the configured ones, or one edge each drawn from `seed`.
    pub fn goal_sets(&self, graph: &RoadGraph, seed: u64) -> Result<Vec<Goal>> {
        if !self.goal_edges.is_empty() {
            return Ok(self.goal_edges.iter().map(|e| Goal { edges: e.clone() }).collect());
        }
        if self.goals > graph.edges.len() {
            return Err(TransportError::Model(format!(
                "{} goals requested but the graph has {} edges",
                self.goals,
                graph.edges.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x60a1_5eed);
        let mut edges: Vec<usize> = (0..graph.edges.len()).collect();
        let mut out = Vec::with_capacity(self.goals);
        for _ in 0..self.goals {
            let k = rng.random_range(0..edges.len());
            out.push(Goal { edges: vec![edges.swap_remove(k)] });
        }
        Ok(out)
    }

    /// Build the model for a variant and sample a trajectory from it.
    pub fn instantiate(&self, variant: Variant, seed: u64) -> Result<(TransportHdmn, Trajectory)> {
        let graph = self.graph()?;
        let goals = self.goal_sets(&graph, seed)?;
        let model = build_transport_model(&graph, &goals, self.params.dwell, &self.params, variant)?;
        let mut traj = simulate(&graph, &goals, &model.tables, &model.params, self.horizon, seed);
        traj.meta.scenario = self.name.clone();
        Ok((model, traj))
    }
}
