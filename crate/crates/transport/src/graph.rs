//! Road graphs: intersections joined by straight segments.
//!
//! Movement happens on arcs (directed copies of edges). Arc `2e` runs from
//! `edges[e].s1` to `edges[e].s2`, arc `2e + 1` the other way.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Result, TransportError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub s1: usize,
    pub s2: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadGraph {
    pub vertices: Vec<(f64, f64)>,
    pub edges: Vec<Edge>,
}

impl RoadGraph {
    /// Edge lengths are the Euclidean distances between endpoints.
    pub fn new(vertices: Vec<(f64, f64)>, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(s1, s2)| {
                let (a, b) = (
                    vertices.get(s1).ok_or(TransportError::Graph(format!("no vertex {s1}")))?,
                    vertices.get(s2).ok_or(TransportError::Graph(format!("no vertex {s2}")))?,
                );
                Ok(Edge {
                    s1,
                    s2,
                    length: ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let g = Self { vertices, edges };
        g.validate()?;
        Ok(g)
    }

    /// `rows × cols` lattice with the given spacing in meters.
    pub fn grid(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        let vertices = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (c as f64 * spacing, r as f64 * spacing)))
            .collect();
        let mut pairs = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    pairs.push((v, v + 1));
                }
                if r + 1 < rows {
                    pairs.push((v, v + cols));
                }
            }
        }
        Self::new(vertices, &pairs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() || self.edges.is_empty() {
            return Err(TransportError::Graph("graph needs vertices and edges".into()));
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.s1 >= self.vertices.len() || e.s2 >= self.vertices.len() || e.s1 == e.s2 {
                return Err(TransportError::Graph(format!("edge {k} has bad endpoints")));
            }
            if !(e.length > 0.0) {
                return Err(TransportError::Graph(format!("edge {k} has non-positive length")));
            }
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(_, u) in &self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(TransportError::Graph("graph is not connected".into()));
        }
        Ok(())
    }

    pub fn num_arcs(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn arc_edge(&self, arc: usize) -> usize {
        arc / 2
    }

    pub fn arc_start(&self, arc: usize) -> usize {
        let e = &self.edges[arc / 2];
        if arc.is_multiple_of(2) {
            e.s1
        } else {
            e.s2
        }
    }

    pub fn arc_end(&self, arc: usize) -> usize {
        let e = &self.edges[arc / 2];
        if arc.is_multiple_of(2) {
            e.s2
        } else {
            e.s1
        }
    }

    pub fn arc_length(&self, arc: usize) -> f64 {
        self.edges[arc / 2].length
    }

    /// Unit direction of travel along an arc.
    pub fn arc_direction(&self, arc: usize) -> (f64, f64) {
        let (a, b) = (self.vertices[self.arc_start(arc)], self.vertices[self.arc_end(arc)]);
        let len = self.arc_length(arc);
        ((b.0 - a.0) / len, (b.1 - a.1) / len)
    }

    /// Planar position at `offset` meters along an arc.
    pub fn position(&self, arc: usize, offset: f64) -> (f64, f64) {
        let s = self.vertices[self.arc_start(arc)];
        let (dx, dy) = self.arc_direction(arc);
        (s.0 + dx * offset, s.1 + dy * offset)
    }

    /// `(edge, other endpoint)` for each edge at `v`.
    pub fn neighbors(&self, v: usize) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(k, e)| {
                if e.s1 == v {
                    Some((k, e.s2))
                } else if e.s2 == v {
                    Some((k, e.s1))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Arcs leaving the end of `arc` (the U-turn included).
    pub fn successors(&self, arc: usize) -> Vec<usize> {
        let v = self.arc_end(arc);
        self.neighbors(v)
            .into_iter()
            .map(|(e, _)| if self.edges[e].s1 == v { 2 * e } else { 2 * e + 1 })
            .collect()
    }

    /// An arc may follow another if it is the same arc or starts where the
    /// other ends.
    pub fn adjacent(&self, from: usize, to: usize) -> bool {
        from == to || self.arc_start(to) == self.arc_end(from)
    }

    /// All-pairs shortest path lengths between vertices.
    pub fn distances(&self) -> Vec<Vec<f64>> {
        let n = self.vertices.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (v, row) in d.iter_mut().enumerate() {
            row[v] = 0.0;
        }
        for e in &self.edges {
            d[e.s1][e.s2] = d[e.s1][e.s2].min(e.length);
            d[e.s2][e.s1] = d[e.s2][e.s1].min(e.length);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    /// Edges of a shortest path from vertex `a` to vertex `b` (lowest
    /// vertex id first on ties).
    pub fn shortest_path_edges(&self, dist: &[Vec<f64>], a: usize, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut v = a;
        while v != b {
            let mut nb = self.neighbors(v);
            nb.sort_by_key(|&(_, u)| u);
            let Some(&(e, u)) = nb
                .iter()
                .find(|&&(e, u)| (self.edges[e].length + dist[u][b] - dist[v][b]).abs() < 1e-9)
            else {
                break;
            };
            out.push(e);
            v = u;
        }
        out
    }

    /// Nearest edge to a point and the distance to it.
    pub fn nearest_edge(&self, p: (f64, f64)) -> (usize, f64) {
        self.edges
            .iter()
            .enumerate()
            .map(|(k, e)| (k, segment_distance(p, self.vertices[e.s1], self.vertices[e.s2])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("graph has edges")
    }

    /// Plain-text form: `roadgraph/1`, then `vertex <x> <y>` lines in id
    /// order, then `edge <s1> <s2>` lines. `#` starts a comment.
    pub fn to_text(&self) -> String {
        let mut s = String::from("roadgraph/1\n");
        for &(x, y) in &self.vertices {
            let _ = writeln!(s, "vertex {x:?} {y:?}");
        }
        for e in &self.edges {
            let _ = writeln!(s, "edge {} {}", e.s1, e.s2);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "roadgraph/1")) => {}
            _ => return Err(TransportError::Format { line: 1, msg: "expected header roadgraph/1".into() }),
        }
        let mut vertices = Vec::new();
        let mut pairs = Vec::new();
        for (line, l) in lines {
            let bad = |msg: &str| TransportError::Format { line, msg: msg.into() };
            let f: Vec<&str> = l.split_whitespace().collect();
            match f.as_slice() {
                ["vertex", x, y] => vertices.push((
                    x.parse().map_err(|_| bad("bad x coordinate"))?,
                    y.parse().map_err(|_| bad("bad y coordinate"))?,
                )),
                ["edge", a, b] => pairs.push((
                    a.parse().map_err(|_| bad("bad vertex id"))?,
                    b.parse().map_err(|_| bad("bad vertex id"))?,
                )),
                _ => return Err(bad("expected `vertex x y` or `edge s1 s2`")),
            }
        }
        Self::new(vertices, &pairs)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}
