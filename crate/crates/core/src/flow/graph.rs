use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::manifold::{self, ON_MANIFOLD_TOL, RETRACT_MAX_ITER};
use crate::rng;
use crate::{Point, Quadric, SceneSystem};

use super::morse::{morse_check_with, MorseOptions};
use super::trajectory::{integrate_trajectory, Direction, FlowOptions, Trajectory};

/// k-nearest-neighbour graph on points of `M`, with chord-length weights.
#[derive(Debug, Clone)]
pub struct SampleGraph {
    pub points: Vec<Point>,
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Component label of every node, labels numbered from 0 in order of
    /// first appearance.
    pub component: Vec<usize>,
    pub component_count: usize,
}

/// Edge test: the chord midpoint must retract onto `M`, stay feasible and
/// move by at most a quarter of the chord (rejects chords that cut across
/// a gap between nearby sheets).
fn chord_ok(scene: &SceneSystem, a: &Point, b: &Point) -> bool {
    let mid = (a + b) * 0.5;
    let chord = (a - b).norm();
    match manifold::retract(scene, &mid, ON_MANIFOLD_TOL, RETRACT_MAX_ITER) {
        Ok(m) => (&m - &mid).norm() <= 0.25 * chord && scene.inequalities_hold(&m, 1e-9),
        Err(_) => false,
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl SampleGraph {
    pub fn build(scene: &SceneSystem, points: Vec<Point>, neighbor_count: usize) -> SampleGraph {
        let m = points.len();
        let kn = neighbor_count.min(m.saturating_sub(1));
        let candidate: Vec<Vec<(usize, f64)>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut d: Vec<(f64, usize)> = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| ((&points[i] - &points[j]).norm_squared(), j))
                    .collect();
                if kn < d.len() {
                    d.select_nth_unstable_by(kn, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    d.truncate(kn);
                }
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.into_iter()
                    .filter(|&(_, j)| chord_ok(scene, &points[i], &points[j]))
                    .map(|(d2, j)| (j, d2.sqrt()))
                    .collect()
            })
            .collect();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (i, nbrs) in candidate.into_iter().enumerate() {
            for (j, w) in nbrs {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
        for a in &mut adjacency {
            a.sort_by_key(|x| x.0);
            a.dedup_by_key(|e| e.0);
        }
        let mut parent: Vec<usize> = (0..m).collect();
        for (i, a) in adjacency.iter().enumerate() {
            for &(j, _) in a {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut label = vec![usize::MAX; m];
        let mut component = vec![0; m];
        let mut count = 0;
        for i in 0..m {
            let r = find(&mut parent, i);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            component[i] = label[r];
        }
        SampleGraph {
            points,
            adjacency,
            component,
            component_count: count,
        }
    }

    /// Single-source shortest path lengths (infinite outside the source's
    /// component).
    pub fn distances_from(&self, src: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.points.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        // Non-negative floats order like their bit patterns.
        heap.push(Reverse((0f64.to_bits(), src)));
        while let Some(Reverse((bits, v))) = heap.pop() {
            let d = f64::from_bits(bits);
            if d > dist[v] {
                continue;
            }
            for &(w, len) in &self.adjacency[v] {
                let nd = d + len;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Reverse((nd.to_bits(), w)));
                }
            }
        }
        dist
    }

    /// Exact graph diameter of one component by eccentricity bounding, with
    /// a witness pair of node indices.
    pub fn component_diameter(&self, comp: usize) -> (f64, usize, usize) {
        let nodes: Vec<usize> = (0..self.points.len()).filter(|&i| self.component[i] == comp).collect();
        if nodes.len() < 2 {
            return (0.0, nodes[0], nodes[0]);
        }
        let m = self.points.len();
        let mut lo = vec![0.0f64; m];
        let mut hi = vec![f64::INFINITY; m];
        let mut cand: Vec<usize> = nodes.clone();
        let mut best = (0.0, nodes[0], nodes[0]);
        let mut pick_high = true;
        while !cand.is_empty() {
            let v = if pick_high {
                *cand.iter().max_by(|&&a, &&b| hi[a].total_cmp(&hi[b]).then(b.cmp(&a))).unwrap()
            } else {
                *cand.iter().min_by(|&&a, &&b| lo[a].total_cmp(&lo[b]).then(a.cmp(&b))).unwrap()
            };
            pick_high = !pick_high;
            let d = self.distances_from(v);
            let (far, ecc) = nodes
                .iter()
                .map(|&w| (w, d[w]))
                .fold((v, 0.0), |acc, (w, dw)| if dw > acc.1 { (w, dw) } else { acc });
            if ecc > best.0 {
                best = (ecc, v, far);
            }
            lo[v] = ecc;
            hi[v] = ecc;
            for &w in &nodes {
                lo[w] = lo[w].max(d[w].max(ecc - d[w]));
                hi[w] = hi[w].min(ecc + d[w]);
            }
            let dlo = best.0;
            cand.retain(|&w| w != v && hi[w] > dlo && lo[w] < hi[w]);
        }
        best
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentDiameter {
    pub component_id: usize,
    pub diameter: f64,
    pub witness_pair: (Point, Point),
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphDiameter {
    pub components: Vec<ComponentDiameter>,
    pub sample_count: usize,
    pub neighbor_count: usize,
    pub warnings: Vec<String>,
}

impl GraphDiameter {
    pub fn total(&self) -> f64 {
        self.components.iter().map(|c| c.diameter).fold(0.0, |s, d| s + d)
    }
}

/// Samples `M`, joins k nearest neighbours whose chord midpoint retracts
/// onto `M`, and reports the largest shortest-path distance per component.
pub fn graph_geodesic_diameter(scene: &SceneSystem, sample_count: usize, neighbor_count: usize, seed: u64) -> Result<GraphDiameter> {
    let points = manifold::sample_points(scene, sample_count, rng::derive_seed(seed, "flow.graph"))?;
    let graph = SampleGraph::build(scene, points, neighbor_count);
    let mut warnings = Vec::new();
    let components: Vec<ComponentDiameter> = (0..graph.component_count)
        .map(|c| {
            let size = graph.component.iter().filter(|&&l| l == c).count();
            let (d, a, b) = graph.component_diameter(c);
            ComponentDiameter {
                component_id: c,
                diameter: d,
                witness_pair: (graph.points[a].clone(), graph.points[b].clone()),
                size,
            }
        })
        .collect();
    let small = components.iter().filter(|c| c.size * 50 < sample_count.max(1)).count();
    if small > 0 {
        warnings.push(format!(
            "{small} graph component(s) hold < 2% of the samples; they may be fragments of a larger component (increase samples or neighbors)"
        ));
    }
    Ok(GraphDiameter {
        components,
        sample_count,
        neighbor_count,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryEstimate {
    pub estimate: f64,
    pub ascent_x: Trajectory,
    pub ascent_y: Trajectory,
    /// Straight-line distance between the meeting vertices.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub flow: FlowOptions,
    /// Meeting tolerance relative to the ball radius.
    pub gap_rel: f64,
    /// Samples for the component check graph.
    pub component_samples: usize,
    pub morse: MorseOptions,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            flow: FlowOptions::default(),
            gap_rel: 1e-3,
            component_samples: 600,
            morse: MorseOptions::default(),
            seed: 0,
        }
    }
}

/// Upper estimate of the geodesic distance `d(x, y)`: follow the ascent
/// trajectories of `P` from both points until they meet.
pub fn trajectory_diameter_estimate(
    scene: &SceneSystem,
    p: &Quadric,
    x: &Point,
    y: &Point,
    opts: &EstimateOptions,
) -> Result<TrajectoryEstimate> {
    check_dim(scene.dim(), x.len())?;
    check_dim(scene.dim(), y.len())?;
    let r = scene.ball_radius();
    let x = manifold::retract(scene, x, ON_MANIFOLD_TOL, RETRACT_MAX_ITER)?;
    let y = manifold::retract(scene, y, ON_MANIFOLD_TOL, RETRACT_MAX_ITER)?;

    let morse = morse_check_with(scene, p, rng::derive_seed(opts.seed, "flow.estimate.morse"), &opts.morse)?;
    let maxima: Vec<Point> = morse.maxima().map(|c| c.x.clone()).collect();
    let mut pts = manifold::sample_points(scene, opts.component_samples, rng::derive_seed(opts.seed, "flow.estimate.graph"))?;
    let base = pts.len();
    pts.push(x.clone());
    pts.push(y.clone());
    pts.extend(maxima.iter().cloned());
    let graph = SampleGraph::build(scene, pts, 12);
    let cx = graph.component[base];
    if graph.component[base + 1] != cx {
        return Err(Error::DifferentComponents);
    }
    let in_comp = (0..maxima.len()).filter(|&i| graph.component[base + 2 + i] == cx).count();
    if in_comp > 1 {
        return Err(Error::MultipleMaxima { count: in_comp });
    }

    let max_len = 1e3 * r;
    let tx = integrate_trajectory(scene, p, &x, Direction::Ascent, max_len, &opts.flow)?;
    let ty = integrate_trajectory(scene, p, &y, Direction::Ascent, max_len, &opts.flow)?;
    let gap_tol = opts.gap_rel * r;
    let vx = tx.polyline.vertices();
    let vy = ty.polyline.vertices();
    let best = (0..vx.len())
        .into_par_iter()
        .filter_map(|i| {
            let mut local: Option<(f64, f64)> = None;
            for j in 0..vy.len() {
                let g = (&vx[i] - &vy[j]).norm();
                if g <= gap_tol {
                    let total = tx.cumulative[i] + ty.cumulative[j] + g;
                    if local.is_none_or(|l| total < l.0) {
                        local = Some((total, g));
                    }
                }
            }
            local
        })
        .reduce_with(|a, b| if b.0 < a.0 { b } else { a });
    match best {
        Some((estimate, gap)) => Ok(TrajectoryEstimate {
            estimate,
            ascent_x: tx,
            ascent_y: ty,
            gap,
        }),
        None => {
            let gap = (vx.last().unwrap() - vy.last().unwrap()).norm();
            Err(Error::TrajectoriesDidNotMeet { gap })
        }
    }
}
