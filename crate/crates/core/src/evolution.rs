//! Contour dynamics: time integration of patch boundaries under their
//! self-induced velocity, node redistribution for stretching filaments, and
//! passive particle tracing through recorded histories.
//!
//! Boundary nodes are advected with classical RK4; at every substage the
//! velocity field is the one induced by the substage contour. The log
//! kernel is integrated with the spectral product rule, so a rigidly
//! rotating wave stays rigid to quadrature accuracy and area, angular
//! impulse and energy are conserved to the time-integration error.

use std::f64::consts::PI;

use anyhow::{bail, ensure, Result};

use crate::field;
use crate::geometry::{Diagnostics, NodeContour, Vec2};
use crate::kernel::Curve;

/// Hard cap on node counts; growth past it truncates the run.
pub const DEFAULT_NODE_CAP: usize = 200_000;

/// One moment of a boundary evolution.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub time: f64,
    pub contour: NodeContour,
    pub step_count: u64,
}

impl EvolutionState {
    pub fn new(contour: NodeContour) -> Self {
        Self {
            time: 0.0,
            contour,
            step_count: 0,
        }
    }
}

/// Node redistribution thresholds.
#[derive(Debug, Clone, Copy)]
pub struct RemeshParams {
    pub h_min: f64,
    pub h_max: f64,
    pub node_cap: usize,
    /// reproduce remesh decisions across all m sectors so that an m-fold
    /// symmetric node set stays exactly symmetric
    pub symmetry: Option<u32>,
    /// nodes are kept where the local turn angle exceeds this, whatever the
    /// spacing: filament tips stay resolved
    pub max_removal_turn: f64,
}

impl RemeshParams {
    /// h_max = twice the current mean spacing, h_min = h_max / 8.
    pub fn from_contour(c: &NodeContour) -> Self {
        let mean = c.perimeter() / c.len() as f64;
        Self {
            h_min: mean / 4.0,
            h_max: 2.0 * mean,
            node_cap: DEFAULT_NODE_CAP,
            symmetry: None,
            max_removal_turn: 0.15,
        }
    }

    pub fn with_symmetry(mut self, m: u32) -> Self {
        self.symmetry = Some(m);
        self
    }
}

/// Self-induced velocity of the patch at each of its boundary nodes.
pub fn self_induced_velocities(c: &NodeContour) -> Vec<Vec2> {
    field::boundary_velocities(&Curve::from_contour(c))
}

fn displaced(nodes: &[Vec2], k: &[Vec2], factor: f64) -> Vec<Vec2> {
    nodes
        .iter()
        .zip(k)
        .map(|(p, v)| *p + *v * factor)
        .collect()
}

fn velocities_of(nodes: Vec<Vec2>) -> Vec<Vec2> {
    field::boundary_velocities(&Curve::from_contour(&NodeContour::from_nodes_unchecked(nodes)))
}

/// Advection-guard data measured at the start of a step.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub max_speed: f64,
    pub min_spacing: f64,
}

impl StepStats {
    /// Largest |dt| the guard admits for these values.
    pub fn dt_limit(&self) -> f64 {
        0.5 * self.min_spacing / self.max_speed.max(1e-300)
    }
}

/// One RK4 step of every node under the self-induced field. Negative dt
/// integrates backwards; the CFL-style guard applies to |dt|.
pub fn step(state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
    step_with_stats(state, dt).map(|(s, _)| s)
}

/// Step plus the guard data it measured, for callers that track the
/// admissible step size across a run.
pub fn step_with_stats(state: &EvolutionState, dt: f64) -> Result<(EvolutionState, StepStats)> {
    ensure!(dt != 0.0, "time step must be nonzero");
    let nodes = state.contour.nodes();
    let n = nodes.len();
    let k1 = self_induced_velocities(&state.contour);

    let max_speed = k1.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let min_spacing = (0..n)
        .map(|i| (nodes[(i + 1) % n] - nodes[i]).norm())
        .fold(f64::INFINITY, f64::min);
    let stats = StepStats {
        max_speed,
        min_spacing,
    };
    ensure!(
        dt.abs() * max_speed <= 0.5 * min_spacing,
        "time step {dt:.3e} violates the advection guard; use |dt| <= {:.3e}",
        stats.dt_limit()
    );

    let k2 = velocities_of(displaced(nodes, &k1, 0.5 * dt));
    let k3 = velocities_of(displaced(nodes, &k2, 0.5 * dt));
    let k4 = velocities_of(displaced(nodes, &k3, dt));
    let new_nodes: Vec<Vec2> = (0..n)
        .map(|i| nodes[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect();
    Ok((
        EvolutionState {
            time: state.time + dt,
            contour: NodeContour::from_nodes_unchecked(new_nodes),
            step_count: state.step_count + 1,
        },
        stats,
    ))
}

/// Chordal Catmull-Rom point between p1 and p2 at fraction u in (0, 1);
/// chord-length knots keep the interpolant sane across uneven gaps.
fn catmull_rom(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2, u: f64) -> Vec2 {
    let t0 = 0.0;
    let t1 = t0 + (p1 - p0).norm().max(1e-300);
    let t2 = t1 + (p2 - p1).norm().max(1e-300);
    let t3 = t2 + (p3 - p2).norm().max(1e-300);
    let t = t1 + u * (t2 - t1);
    let lerp = |a: Vec2, b: Vec2, ta: f64, tb: f64| a * ((tb - t) / (tb - ta)) + b * ((t - ta) / (tb - ta));
    let a1 = lerp(p0, p1, t0, t1);
    let a2 = lerp(p1, p2, t1, t2);
    let a3 = lerp(p2, p3, t2, t3);
    let b1 = lerp(a1, a2, t0, t2);
    let b2 = lerp(a2, a3, t1, t3);
    lerp(b1, b2, t1, t2)
}

fn turn_angle(prev: Vec2, here: Vec2, next: Vec2) -> f64 {
    let a = here - prev;
    let b = next - here;
    let denom = a.norm() * b.norm();
    if denom < 1e-300 {
        return PI;
    }
    (a.dot(b) / denom).clamp(-1.0, 1.0).acos()
}

/// Rebuild a section of nodes [0, len) with removals and cubic insertions;
/// `all` is the full node list for neighbor lookups.
fn remesh_section(all: &[Vec2], len: usize, p: &RemeshParams) -> Vec<Vec2> {
    let n = all.len();
    let at = |i: isize| all[i.rem_euclid(n as isize) as usize];

    // keep-set: drop nodes surrounded by short edges in flat regions
    let mut keep = vec![true; len];
    let mut i = 1;
    while i < len {
        let prev = at(i as isize - 1);
        let here = at(i as isize);
        let next = at(i as isize + 1);
        let short = (here - prev).norm() < p.h_min && (next - here).norm() < p.h_min;
        if short && turn_angle(prev, here, next) < p.max_removal_turn {
            keep[i] = false;
            i += 2; // never remove adjacent nodes in one pass
        } else {
            i += 1;
        }
    }

    let kept: Vec<isize> = (0..len as isize).filter(|&i| keep[i as usize]).collect();
    let mut out = Vec::with_capacity(len + 8);
    for (pos, &i) in kept.iter().enumerate() {
        out.push(at(i));
        let j = if pos + 1 < kept.len() {
            kept[pos + 1]
        } else {
            len as isize // first node of the next section (or wrap)
        };
        let gap = (at(j) - at(i)).norm();
        if gap > p.h_max {
            let count = (gap / p.h_max).ceil() as usize - 1;
            for k in 1..=count {
                let t = k as f64 / (count + 1) as f64;
                // interpolate on the local cubic through the gap's neighbors
                out.push(catmull_rom(at(i - 1), at(i), at(j), at(j + 1), t));
            }
        }
    }
    out
}

/// Insert nodes on long edges by local cubic interpolation and drop nodes
/// on short flat stretches; the patch area is restored exactly by a
/// centroid rescale (relative change < 1e-10 per call).
pub fn remesh(c: &NodeContour, p: &RemeshParams) -> Result<NodeContour> {
    ensure!(
        p.h_min > 0.0 && p.h_min < p.h_max,
        "need 0 < h_min < h_max, got ({}, {})",
        p.h_min,
        p.h_max
    );
    let nodes = c.nodes();
    let n = nodes.len();
    let area_before = c.area();

    let new_nodes = match p.symmetry {
        Some(m) if m >= 2 && n % m as usize == 0 => {
            let s = n / m as usize;
            let sector = remesh_section(nodes, s, p);
            let mut out = Vec::with_capacity(sector.len() * m as usize);
            for k in 0..m {
                let alpha = 2.0 * PI * k as f64 / m as f64;
                out.extend(sector.iter().map(|pt| pt.rotated(alpha)));
            }
            out
        }
        _ => remesh_section(nodes, n, p),
    };
    ensure!(new_nodes.len() >= 3, "remesh collapsed the contour");
    let result = NodeContour::from_nodes_unchecked(new_nodes);

    let area_after = result.area();
    if area_after <= 0.0 {
        bail!("remesh produced a non-positive area");
    }
    if (area_after - area_before).abs() / area_before.abs() < 1e-16 {
        return Ok(result);
    }
    let centroid = result.centroid();
    let scale = (area_before / area_after).sqrt();
    let rescaled: Vec<Vec2> = result
        .nodes()
        .iter()
        .map(|&q| centroid + (q - centroid) * scale)
        .collect();
    Ok(NodeContour::from_nodes_unchecked(rescaled))
}

/// Evolution controls; events (logs, snapshots, dense frames) are hit
/// exactly by shortening the step.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    pub remesh: Option<RemeshParams>,
    pub log_interval: f64,
    pub snapshot_times: Vec<f64>,
    /// cadence of stored frames for particle tracing
    pub dense_interval: Option<f64>,
    /// angular order of the logged complex moment
    pub moment_m: u32,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt: f64, moment_m: u32) -> Self {
        Self {
            t_final,
            dt,
            remesh: None,
            log_interval: 0.25,
            snapshot_times: Vec::new(),
            dense_interval: None,
            moment_m,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct History {
    pub samples: Vec<(f64, Diagnostics)>,
    pub snapshots: Vec<(f64, NodeContour)>,
    pub dense: Vec<(f64, NodeContour)>,
    /// set when the node cap stopped the run early
    pub truncated: bool,
}

/// Repeated step + remesh with diagnostics logging and snapshot capture.
pub fn evolve(s0: &EvolutionState, opts: &EvolveOptions) -> Result<(EvolutionState, History)> {
    ensure!(opts.t_final > s0.time, "t_final must exceed the start time");
    ensure!(opts.dt > 0.0, "dt must be positive");
    let mut state = s0.clone();
    let mut history = History::default();
    let cap = opts.remesh.map_or(DEFAULT_NODE_CAP, |r| r.node_cap);

    let mut log_next = state.time;
    let mut dense_next = state.time;
    let mut snapshots: Vec<f64> = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t >= state.time - 1e-12)
        .collect();
    snapshots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    snapshots.dedup();

    let eps = 1e-10;
    loop {
        // fire events at the current time
        if state.time + eps >= log_next {
            history
                .samples
                .push((state.time, field::compute_diagnostics(&state.contour, opts.moment_m)?));
            log_next += opts.log_interval;
        }
        if let Some(cadence) = opts.dense_interval {
            if state.time + eps >= dense_next {
                history.dense.push((state.time, state.contour.clone()));
                dense_next += cadence;
            }
        }
        while !snapshots.is_empty() && state.time + eps >= snapshots[0] {
            history.snapshots.push((state.time, state.contour.clone()));
            snapshots.remove(0);
        }
        if state.time + eps >= opts.t_final {
            break;
        }
        if state.contour.len() >= cap {
            history.truncated = true;
            break;
        }

        let mut next_stop = (state.time + opts.dt).min(opts.t_final).min(log_next);
        if let Some(cadence) = opts.dense_interval {
            let _ = cadence;
            next_stop = next_stop.min(dense_next);
        }
        if let Some(&t) = snapshots.first() {
            next_stop = next_stop.min(t);
        }
        let dt = (next_stop - state.time).max(1e-14);
        state = step(&state, dt)?;
        if let Some(params) = &opts.remesh {
            state.contour = remesh(&state.contour, params)?;
        }
    }
    Ok((state, history))
}

/// Passive tracer paths through a recorded contour history.
#[derive(Debug, Clone)]
pub struct TrajectorySet {
    pub seeds: Vec<Vec2>,
    pub times: Vec<f64>,
    /// positions per seed on the common time grid
    pub paths: Vec<Vec<Vec2>>,
    /// unwrapped polar angle / 2 pi per seed
    pub winding: Vec<Vec<f64>>,
    /// set per seed when it left the recorded domain and the path froze
    pub truncated: Vec<bool>,
}

/// RK4 integration of seeds through the time-interpolated velocity of the
/// recorded contours; `substeps` RK4 steps per recorded interval.
pub fn trace_particles(
    history: &[(f64, NodeContour)],
    seeds: &[Vec2],
    substeps: usize,
) -> Result<TrajectorySet> {
    ensure!(history.len() >= 2, "need at least two recorded frames");
    ensure!(substeps >= 1, "substeps must be >= 1");
    for w in history.windows(2) {
        ensure!(w[1].0 > w[0].0, "history times must increase");
    }
    let domain = history
        .iter()
        .map(|(_, c)| c.max_radius())
        .fold(0.0, f64::max)
        * 3.0
        + 1.0;
    for s in seeds {
        ensure!(
            s.norm() <= domain,
            "seed {s:?} outside the recorded domain (radius {domain:.2})"
        );
    }

    // velocity at interpolated node positions when the counts match,
    // nearest frame otherwise (remesh changes the count)
    let velocity = |t: f64, x: Vec2, lo: &(f64, NodeContour), hi: &(f64, NodeContour)| -> Vec2 {
        let (t0, c0) = lo;
        let (t1, c1) = hi;
        if c0.len() == c1.len() {
            let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            let nodes: Vec<Vec2> = c0
                .nodes()
                .iter()
                .zip(c1.nodes())
                .map(|(a, b)| *a + (*b - *a) * w)
                .collect();
            field::velocity_at(&NodeContour::from_nodes_unchecked(nodes), x)
        } else if (t - t0).abs() <= (t1 - t).abs() {
            field::velocity_at(c0, x)
        } else {
            field::velocity_at(c1, x)
        }
    };

    let mut times = vec![history[0].0];
    let mut paths: Vec<Vec<Vec2>> = seeds.iter().map(|&s| vec![s]).collect();
    let mut winding: Vec<Vec<f64>> = seeds.iter().map(|_| vec![0.0]).collect();
    let mut truncated = vec![false; seeds.len()];
    let mut angles: Vec<f64> = seeds.iter().map(|s| s.angle()).collect();

    for w in history.windows(2) {
        let (t0, _) = &w[0];
        let (t1, _) = &w[1];
        let dt = (t1 - t0) / substeps as f64;
        for k in 0..substeps {
            let t = t0 + dt * k as f64;
            for (i, path) in paths.iter_mut().enumerate() {
                let x = *path.last().unwrap();
                if truncated[i] {
                    path.push(x);
                    let wlast = *winding[i].last().unwrap();
                    winding[i].push(wlast);
                    continue;
                }
                let k1 = velocity(t, x, &w[0], &w[1]);
                let k2 = velocity(t + 0.5 * dt, x + k1 * (0.5 * dt), &w[0], &w[1]);
                let k3 = velocity(t + 0.5 * dt, x + k2 * (0.5 * dt), &w[0], &w[1]);
                let k4 = velocity(t + dt, x + k3 * dt, &w[0], &w[1]);
                let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
                if next.norm() > domain {
                    truncated[i] = true;
                    path.push(x);
                } else {
                    path.push(next);
                }
                // unwrapped polar angle: accumulate the principal increment
                let p = *path.last().unwrap();
                let delta = crate::geometry::torus_project(p.angle() - angles[i], 1);
                angles[i] += delta;
                winding[i].push((angles[i] - seeds[i].angle()) / (2.0 * PI));
            }
            times.push(t + dt);
        }
    }
    Ok(TrajectorySet {
        seeds: seeds.to_vec(),
        times,
        paths,
        winding,
        truncated,
    })
}
