//! Association of accumulated landmark observations with map landmarks.
//!
//! Observations are clustered in the odometry frame over a short window
//! (the local map), candidate SE(2) corrections are scored against the
//! map with an unmatched penalty, and the per-frame association stream is
//! smoothed into an injective assignment by exact maximum-weight
//! bipartite matching over association counts.

use crate::map_construction::{line_pair_distance, LandmarkMap};
use crate::se2::Pose2;
use crate::spatial::{KdTree2, UnionFind};
use nalgebra::Vector2;
use std::collections::{BTreeMap, VecDeque};

/// Point-landmark candidate observation in the odometry frame.
#[derive(Debug, Clone, Copy)]
pub struct PointObservation {
    pub position: Vector2<f64>,
    pub t: f64,
}

/// Line-landmark candidate observation in the odometry frame.
#[derive(Debug, Clone, Copy)]
pub struct LineObservation {
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PointCluster {
    pub id: usize,
    pub position: Vector2<f64>,
    pub last_seen: f64,
    pub members: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LineCluster {
    pub id: usize,
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    pub last_seen: f64,
    pub members: usize,
}

/// Clustered short-horizon observations, built purely from integrated
/// ego-motion (never from the optimized pose).
#[derive(Debug, Clone, Default)]
pub struct LocalMap {
    pub points: Vec<PointCluster>,
    pub lines: Vec<LineCluster>,
    pub window_s: f64,
}

/// Line grouping gates for the local map.
#[derive(Debug, Clone, Copy)]
pub struct LineGates {
    pub d_ch: f64,
    pub d_prj: f64,
}

/// Clusters windowed observations: connected components of the
/// `cluster_d` proximity graph become point clusters at the member mean;
/// lines group under the hull/projection gates and merge across their
/// mutual projections. Observations older than `window_s` before `now`
/// are dropped. Cluster ids are positional (fresh each call); use
/// [`LocalMapTracker`] for identity across frames.
pub fn build_local_map(
    point_obs: &[PointObservation],
    line_obs: &[LineObservation],
    now: f64,
    window_s: f64,
    cluster_d: f64,
    line_gates: LineGates,
) -> LocalMap {
    let fresh: Vec<&PointObservation> =
        point_obs.iter().filter(|o| now - o.t <= window_s).collect();
    let positions: Vec<Vector2<f64>> = fresh.iter().map(|o| o.position).collect();
    let tree = KdTree2::build(positions.clone());
    let mut uf = UnionFind::new(positions.len());
    for i in 0..positions.len() {
        for j in tree.within_radius(positions[i], cluster_d) {
            if j > i {
                uf.union(i, j);
            }
        }
    }
    let mut points = Vec::new();
    for (next_id, comp) in uf.components().into_iter().enumerate() {
        let mean = comp.iter().map(|&i| positions[i]).sum::<Vector2<f64>>() / comp.len() as f64;
        let last_seen = comp.iter().map(|&i| fresh[i].t).fold(f64::MIN, f64::max);
        points.push(PointCluster { id: next_id, position: mean, last_seen, members: comp.len() });
    }

    let fresh_lines: Vec<&LineObservation> =
        line_obs.iter().filter(|o| now - o.t <= window_s).collect();
    let mut luf = UnionFind::new(fresh_lines.len());
    for i in 0..fresh_lines.len() {
        for j in (i + 1)..fresh_lines.len() {
            let (d_ch, d_prj) = line_pair_distance(
                (fresh_lines[i].start, fresh_lines[i].end),
                (fresh_lines[j].start, fresh_lines[j].end),
            );
            if d_ch < line_gates.d_ch && d_prj < line_gates.d_prj {
                luf.union(i, j);
            }
        }
    }
    let mut lines = Vec::new();
    for (next_id, comp) in luf.components().into_iter().enumerate() {
        let members: Vec<(Vector2<f64>, Vector2<f64>)> =
            comp.iter().map(|&i| (fresh_lines[i].start, fresh_lines[i].end)).collect();
        let (start, end) = merge_line_span(&members);
        let last_seen = comp.iter().map(|&i| fresh_lines[i].t).fold(f64::MIN, f64::max);
        lines.push(LineCluster { id: next_id, start, end, last_seen, members: comp.len() });
    }
    LocalMap { points, lines, window_s }
}

/// Maximum-separation pair among mutual projections (same rule as map
/// construction, without the split refinement).
fn merge_line_span(members: &[(Vector2<f64>, Vector2<f64>)]) -> (Vector2<f64>, Vector2<f64>) {
    let mut pts: Vec<Vector2<f64>> = Vec::new();
    for (i, &(s, e)) in members.iter().enumerate() {
        for (j, &(os, oe)) in members.iter().enumerate() {
            if i == j {
                continue;
            }
            for p in [os, oe] {
                let d = e - s;
                let len2 = d.norm_squared().max(1e-18);
                pts.push(s + d * ((p - s).dot(&d) / len2));
            }
        }
    }
    if members.len() == 1 {
        return members[0];
    }
    let (mut a, mut b, mut best) = (pts[0], pts[0], -1.0);
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = (pts[i] - pts[j]).norm();
            if d > best {
                best = d;
                a = pts[i];
                b = pts[j];
            }
        }
    }
    (a, b)
}

/// Maintains stable cluster identities across frames: each rebuild
/// inherits the id of the nearest previous cluster within the clustering
/// distance.
pub struct LocalMapTracker {
    pub window_s: f64,
    pub cluster_d: f64,
    pub line_gates: LineGates,
    point_obs: VecDeque<PointObservation>,
    line_obs: VecDeque<LineObservation>,
    prev_points: Vec<PointCluster>,
    prev_lines: Vec<LineCluster>,
    next_point_id: usize,
    next_line_id: usize,
}

impl LocalMapTracker {
    pub fn new(window_s: f64, cluster_d: f64, line_gates: LineGates) -> Self {
        Self {
            window_s,
            cluster_d,
            line_gates,
            point_obs: VecDeque::new(),
            line_obs: VecDeque::new(),
            prev_points: Vec::new(),
            prev_lines: Vec::new(),
            next_point_id: 0,
            next_line_id: 0,
        }
    }

    pub fn push_points(&mut self, obs: impl IntoIterator<Item = PointObservation>) {
        self.point_obs.extend(obs);
    }

    pub fn push_lines(&mut self, obs: impl IntoIterator<Item = LineObservation>) {
        self.line_obs.extend(obs);
    }

    /// Rebuilds the local map at time `now` with stable ids.
    pub fn local_map(&mut self, now: f64) -> LocalMap {
        while self.point_obs.front().map(|o| now - o.t > self.window_s).unwrap_or(false) {
            self.point_obs.pop_front();
        }
        while self.line_obs.front().map(|o| now - o.t > self.window_s).unwrap_or(false) {
            self.line_obs.pop_front();
        }
        let mut map = build_local_map(
            self.point_obs.make_contiguous(),
            self.line_obs.make_contiguous(),
            now,
            self.window_s,
            self.cluster_d,
            self.line_gates,
        );
        // Inherit ids from the previous clustering by proximity.
        let mut used_prev: Vec<bool> = vec![false; self.prev_points.len()];
        for c in &mut map.points {
            let mut best: Option<(usize, f64)> = None;
            for (k, p) in self.prev_points.iter().enumerate() {
                if used_prev[k] {
                    continue;
                }
                let d = (p.position - c.position).norm();
                if d <= self.cluster_d && best.map(|(_, bd)| d < bd).unwrap_or(true) {
                    best = Some((k, d));
                }
            }
            match best {
                Some((k, _)) => {
                    c.id = self.prev_points[k].id;
                    used_prev[k] = true;
                }
                None => {
                    c.id = self.next_point_id;
                    self.next_point_id += 1;
                }
            }
        }
        let mut used_prev: Vec<bool> = vec![false; self.prev_lines.len()];
        for c in &mut map.lines {
            let mut best: Option<(usize, f64)> = None;
            for (k, p) in self.prev_lines.iter().enumerate() {
                if used_prev[k] {
                    continue;
                }
                let (d_ch, d_prj) = line_pair_distance((p.start, p.end), (c.start, c.end));
                if d_ch <= self.line_gates.d_ch && d_prj <= self.line_gates.d_prj {
                    let d = d_ch + d_prj;
                    if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                        best = Some((k, d));
                    }
                }
            }
            match best {
                Some((k, _)) => {
                    c.id = self.prev_lines[k].id;
                    used_prev[k] = true;
                }
                None => {
                    c.id = self.next_line_id;
                    self.next_line_id += 1;
                }
            }
        }
        self.prev_points = map.points.clone();
        self.prev_lines = map.lines.clone();
        map
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ObsKind {
    Point,
    Line,
}

/// One observation-to-map association.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Association {
    pub obs_id: usize,
    pub landmark_id: usize,
    pub kind: ObsKind,
}

#[derive(Debug, Clone)]
pub struct MatchParams {
    /// Point association gate in meters.
    pub point_gate: f64,
    /// Line association gates (hull / projection distances).
    pub line_d_ch_gate: f64,
    pub line_d_prj_gate: f64,
    /// Cost charged per unmatched local cluster.
    pub unmatched_cost: f64,
    /// Radius around the prior inside which candidate pairs are formed.
    pub candidate_gate: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            point_gate: 1.0,
            line_d_ch_gate: 0.18,
            line_d_prj_gate: 3.0,
            unmatched_cost: 2.0,
            candidate_gate: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub associations: Vec<Association>,
    pub cost: f64,
    /// Winning world-frame correction applied on top of the prior.
    pub correction: Pose2,
}

/// Matches the local map against the landmark map around a prior
/// odometry-to-world transform.
///
/// Candidate corrections are translations aligning one local point
/// cluster with one map landmark inside the candidate gate (the identity
/// is always a candidate). Every candidate is scored with greedy
/// nearest-neighbor assignment under the gates; unmatched local clusters
/// are charged a fixed cost. An empty association set is returned when no
/// candidate beats leaving everything unmatched.
pub fn match_local_map(
    local: &LocalMap,
    map: &LandmarkMap,
    prior: &Pose2,
    params: &MatchParams,
) -> MatchResult {
    let local_pts_w: Vec<Vector2<f64>> =
        local.points.iter().map(|c| prior.transform(c.position)).collect();
    let mut candidates: Vec<Vector2<f64>> = vec![Vector2::zeros()];
    for lw in &local_pts_w {
        for m in &map.points {
            let delta = m.position - lw;
            if delta.norm() <= params.candidate_gate {
                candidates.push(delta);
            }
        }
    }

    let mut best: Option<(f64, Vec<Association>, Vector2<f64>)> = None;
    for delta in candidates {
        let (cost, assoc) = score_candidate(local, &local_pts_w, map, prior, delta, params);
        if best.as_ref().map(|(bc, _, _)| cost < bc - 1e-12).unwrap_or(true) {
            best = Some((cost, assoc, delta));
        }
    }
    let (cost, associations, delta) = best.unwrap();
    let all_unmatched = params.unmatched_cost * (local.points.len() + local.lines.len()) as f64;
    if associations.is_empty() || cost >= all_unmatched - 1e-12 {
        return MatchResult {
            associations: Vec::new(),
            cost: all_unmatched,
            correction: Pose2::identity(),
        };
    }
    MatchResult {
        associations,
        cost,
        correction: Pose2::new(delta.x, delta.y, 0.0),
    }
}

fn score_candidate(
    local: &LocalMap,
    local_pts_w: &[Vector2<f64>],
    map: &LandmarkMap,
    prior: &Pose2,
    delta: Vector2<f64>,
    params: &MatchParams,
) -> (f64, Vec<Association>) {
    // Greedy nearest-neighbor assignment under the gates.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, lw) in local_pts_w.iter().enumerate() {
        let corrected = lw + delta;
        for (mi, m) in map.points.iter().enumerate() {
            let d = (m.position - corrected).norm();
            if d <= params.point_gate {
                pairs.push((d, ci, mi));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut cost = 0.0;
    let mut used_c = vec![false; local.points.len()];
    let mut used_m = vec![false; map.points.len()];
    let mut assoc = Vec::new();
    for (d, ci, mi) in pairs {
        if used_c[ci] || used_m[mi] {
            continue;
        }
        used_c[ci] = true;
        used_m[mi] = true;
        cost += d;
        assoc.push(Association {
            obs_id: local.points[ci].id,
            landmark_id: mi,
            kind: ObsKind::Point,
        });
    }
    cost += params.unmatched_cost * used_c.iter().filter(|&&u| !u).count() as f64;

    let mut lpairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in local.lines.iter().enumerate() {
        let s = prior.transform(c.start) + delta;
        let e = prior.transform(c.end) + delta;
        for (mi, m) in map.lines.iter().enumerate() {
            let (d_ch, d_prj) = line_pair_distance((s, e), (m.start, m.end));
            if d_ch <= params.line_d_ch_gate && d_prj <= params.line_d_prj_gate {
                lpairs.push((d_ch + d_prj, ci, mi));
            }
        }
    }
    lpairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_c = vec![false; local.lines.len()];
    let mut used_m = vec![false; map.lines.len()];
    for (d, ci, mi) in lpairs {
        if used_c[ci] || used_m[mi] {
            continue;
        }
        used_c[ci] = true;
        used_m[mi] = true;
        cost += d;
        assoc.push(Association {
            obs_id: local.lines[ci].id,
            landmark_id: mi,
            kind: ObsKind::Line,
        });
    }
    cost += params.unmatched_cost * used_c.iter().filter(|&&u| !u).count() as f64;
    (cost, assoc)
}

/// Rolling per-pair association counts over a frame horizon.
#[derive(Debug, Clone)]
pub struct AssociationGraph {
    horizon: usize,
    frames: VecDeque<(u64, Vec<Association>)>,
}

impl AssociationGraph {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, frames: VecDeque::new() }
    }

    pub fn push_frame(&mut self, frame: u64, associations: Vec<Association>) {
        self.frames.push_back((frame, associations));
        while self.frames.len() > self.horizon {
            self.frames.pop_front();
        }
    }

    /// Aggregated counts per (observation, landmark, kind).
    pub fn counts(&self) -> BTreeMap<(usize, usize, ObsKind), u32> {
        let mut out = BTreeMap::new();
        for (_, assoc) in &self.frames {
            for a in assoc {
                *out.entry((a.obs_id, a.landmark_id, a.kind)).or_insert(0) += 1;
            }
        }
        out
    }

    /// Injective smoothed associations of one kind.
    pub fn smooth(&self, kind: ObsKind, min_count: u32) -> Vec<(usize, usize)> {
        let counts: BTreeMap<(usize, usize), u32> = self
            .counts()
            .into_iter()
            .filter(|&((_, _, k), _)| k == kind)
            .map(|((o, l, _), c)| ((o, l), c))
            .collect();
        temporal_smooth(&counts, min_count)
    }
}

/// Exact maximum-weight bipartite matching over association counts.
///
/// Pairs below `min_count` are dropped; the result is injective in both
/// directions; ties between equal-weight matchings resolve toward lower
/// landmark ids. Returns `(observation, landmark)` pairs sorted by
/// observation.
pub fn temporal_smooth(
    counts: &BTreeMap<(usize, usize), u32>,
    min_count: u32,
) -> Vec<(usize, usize)> {
    let mut obs_ids: Vec<usize> = counts.keys().map(|&(o, _)| o).collect();
    let mut lm_ids: Vec<usize> = counts.keys().map(|&(_, l)| l).collect();
    obs_ids.sort_unstable();
    obs_ids.dedup();
    lm_ids.sort_unstable();
    lm_ids.dedup();
    let n = obs_ids.len();
    let m = lm_ids.len();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let dim = n.max(m);
    // Integer weights with a small bonus preferring lower landmark
    // indices among equal-weight matchings.
    let scale = (dim * m + 1) as i64;
    let mut w = vec![vec![0i64; dim]; dim];
    for i in 0..n {
        for j in 0..m {
            if let Some(&c) = counts.get(&(obs_ids[i], lm_ids[j])) {
                if c >= min_count {
                    w[i][j] = c as i64 * scale + (m - j) as i64;
                }
            }
        }
    }
    let assignment = max_weight_assignment(&w);
    let mut out = Vec::new();
    for (i, j) in assignment.into_iter().enumerate() {
        if i < n && j < m && w[i][j] > 0 {
            out.push((obs_ids[i], lm_ids[j]));
        }
    }
    out.sort_unstable();
    out
}

/// Exact square assignment maximizing total weight (Hungarian algorithm
/// with potentials, O(n³)). Returns the column assigned to each row.
pub fn max_weight_assignment(w: &[Vec<i64>]) -> Vec<usize> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    const INF: i64 = i64::MAX / 4;
    // Minimize negated weights; 1-indexed potentials.
    let a = |i: usize, j: usize| -w[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Brute-force maximum matching weight, for oracle checks on small
/// instances.
pub fn brute_force_max_weight(counts: &BTreeMap<(usize, usize), u32>, min_count: u32) -> u64 {
    let mut obs_ids: Vec<usize> = counts.keys().map(|&(o, _)| o).collect();
    let mut lm_ids: Vec<usize> = counts.keys().map(|&(_, l)| l).collect();
    obs_ids.sort_unstable();
    obs_ids.dedup();
    lm_ids.sort_unstable();
    lm_ids.dedup();
    fn rec(
        oi: usize,
        obs_ids: &[usize],
        lm_ids: &[usize],
        counts: &BTreeMap<(usize, usize), u32>,
        min_count: u32,
        used: &mut Vec<bool>,
    ) -> u64 {
        if oi == obs_ids.len() {
            return 0;
        }
        // Leave this observation unmatched.
        let mut best = rec(oi + 1, obs_ids, lm_ids, counts, min_count, used);
        for (j, &lm) in lm_ids.iter().enumerate() {
            if used[j] {
                continue;
            }
            if let Some(&c) = counts.get(&(obs_ids[oi], lm)) {
                if c >= min_count {
                    used[j] = true;
                    best = best
                        .max(c as u64 + rec(oi + 1, obs_ids, lm_ids, counts, min_count, used));
                    used[j] = false;
                }
            }
        }
        best
    }
    let mut used = vec![false; lm_ids.len()];
    rec(0, &obs_ids, &lm_ids, counts, min_count, &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_construction::{LineLandmark, PointLandmark};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    fn gates() -> LineGates {
        LineGates { d_ch: 0.5, d_prj: 1.5 }
    }

    #[test]
    fn local_map_clusters_repeated_sightings() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let truth = v(12.0, 3.0);
        let obs: Vec<PointObservation> = (0..10)
            .map(|i| PointObservation {
                position: truth
                    + v(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)),
                t: i as f64 * 0.1,
            })
            .collect();
        let lm = build_local_map(&obs, &[], 1.0, 5.0, 0.5, gates());
        assert_eq!(lm.points.len(), 1);
        assert!((lm.points[0].position - truth).norm() < 0.12);
        assert_eq!(lm.points[0].members, 10);
    }

    #[test]
    fn local_map_separates_distant_landmarks() {
        let obs = vec![
            PointObservation { position: v(0.0, 0.0), t: 0.0 },
            PointObservation { position: v(2.0, 0.0), t: 0.0 },
        ];
        let lm = build_local_map(&obs, &[], 0.0, 5.0, 0.5, gates());
        assert_eq!(lm.points.len(), 2);
    }

    #[test]
    fn local_map_window_drops_old() {
        let obs = vec![
            PointObservation { position: v(0.0, 0.0), t: 0.0 },
            PointObservation { position: v(0.1, 0.0), t: 7.0 },
        ];
        let lm = build_local_map(&obs, &[], 7.0, 5.0, 0.5, gates());
        assert_eq!(lm.points.len(), 1);
        assert_eq!(lm.points[0].members, 1);
        let empty = build_local_map(&[], &[], 0.0, 5.0, 0.5, gates());
        assert!(empty.points.is_empty() && empty.lines.is_empty());
    }

    #[test]
    fn tracker_keeps_ids_stable() {
        let mut tracker = LocalMapTracker::new(5.0, 0.5, gates());
        tracker.push_points([PointObservation { position: v(1.0, 1.0), t: 0.0 }]);
        let m0 = tracker.local_map(0.0);
        let id0 = m0.points[0].id;
        tracker.push_points([PointObservation { position: v(1.05, 1.0), t: 0.1 }]);
        tracker.push_points([PointObservation { position: v(9.0, 0.0), t: 0.1 }]);
        let m1 = tracker.local_map(0.1);
        let near = m1.points.iter().find(|c| (c.position - v(1.0, 1.0)).norm() < 0.5).unwrap();
        assert_eq!(near.id, id0);
        let far = m1.points.iter().find(|c| (c.position - v(9.0, 0.0)).norm() < 0.5).unwrap();
        assert_ne!(far.id, id0);
    }

    fn simple_map() -> LandmarkMap {
        let mut map = LandmarkMap::default();
        for (x, y) in [(5.0, 0.0), (10.0, 2.0), (15.0, -1.0)] {
            map.points.push(PointLandmark { position: v(x, y), observation_count: 3 });
        }
        map.lines.push(LineLandmark { start: v(0.0, 4.0), end: v(20.0, 4.0) });
        map
    }

    fn local_from_map(map: &LandmarkMap, shift: Vector2<f64>) -> LocalMap {
        LocalMap {
            points: map
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| PointCluster {
                    id: i,
                    position: p.position - shift,
                    last_seen: 0.0,
                    members: 5,
                })
                .collect(),
            lines: map
                .lines
                .iter()
                .enumerate()
                .map(|(i, l)| LineCluster {
                    id: i,
                    start: l.start - shift,
                    end: l.end - shift,
                    last_seen: 0.0,
                    members: 5,
                })
                .collect(),
            window_s: 5.0,
        }
    }

    #[test]
    fn match_recovers_pure_shift() {
        let map = simple_map();
        let local = local_from_map(&map, v(0.3, -0.2));
        let res = match_local_map(&local, &map, &Pose2::identity(), &MatchParams::default());
        assert_eq!(res.associations.len(), 4);
        assert_relative_eq!(res.correction.x, 0.3, epsilon = 1e-9);
        assert_relative_eq!(res.correction.y, -0.2, epsilon = 1e-9);
        assert!(res.cost < 0.5);
    }

    #[test]
    fn identity_when_already_aligned() {
        let map = simple_map();
        let local = local_from_map(&map, v(0.0, 0.0));
        let res = match_local_map(&local, &map, &Pose2::identity(), &MatchParams::default());
        assert_eq!(res.associations.len(), 4);
        assert_relative_eq!(res.cost, 0.0, epsilon = 1e-9);
        assert_relative_eq!(res.correction.x, 0.0);
    }

    #[test]
    fn spurious_cluster_left_unmatched() {
        let map = simple_map();
        let mut local = local_from_map(&map, v(0.0, 0.0));
        local.points.push(PointCluster { id: 99, position: v(8.0, -6.0), last_seen: 0.0, members: 3 });
        let params = MatchParams::default();
        let res = match_local_map(&local, &map, &Pose2::identity(), &params);
        assert_eq!(res.associations.len(), 4);
        assert!(res.associations.iter().all(|a| a.obs_id != 99));
        assert_relative_eq!(res.cost, params.unmatched_cost, epsilon = 1e-9);
    }

    #[test]
    fn picket_fence_lattice_resolved_by_boundary() {
        // Identical posts every 2 m; prior offset below half spacing must
        // snap to the correct lattice alignment, verified exhaustively.
        let mut map = LandmarkMap::default();
        for i in 0..8 {
            map.points.push(PointLandmark { position: v(2.0 * i as f64, 5.0), observation_count: 2 });
        }
        let shift = v(0.7, 0.0); // true correction, below half spacing
        let local = LocalMap {
            points: (0..8)
                .map(|i| PointCluster {
                    id: i,
                    position: v(2.0 * i as f64, 5.0) - shift,
                    last_seen: 0.0,
                    members: 4,
                })
                .collect(),
            lines: Vec::new(),
            window_s: 5.0,
        };
        let params = MatchParams { candidate_gate: 3.0, ..Default::default() };
        let res = match_local_map(&local, &map, &Pose2::identity(), &params);
        assert_eq!(res.associations.len(), 8);
        assert_relative_eq!(res.correction.x, 0.7, epsilon = 1e-9);
        // Exhaustive lattice-offset oracle: cost of the chosen correction
        // is minimal among all integer lattice shifts.
        for k in -3i32..=3 {
            let delta = v(0.7 + 2.0 * k as f64, 0.0);
            let (cost, _) = super::score_candidate(
                &local,
                &local.points.iter().map(|c| c.position).collect::<Vec<_>>(),
                &map,
                &Pose2::identity(),
                delta,
                &params,
            );
            assert!(res.cost <= cost + 1e-9, "lattice shift {k} beat the winner");
        }
    }

    #[test]
    fn relabeling_invariance() {
        let map = simple_map();
        let local = local_from_map(&map, v(0.2, 0.1));
        let res_a = match_local_map(&local, &map, &Pose2::identity(), &MatchParams::default());
        // Reverse the map landmark order (relabeling).
        let mut map_r = map.clone();
        map_r.points.reverse();
        let res_b = match_local_map(&local, &map_r, &Pose2::identity(), &MatchParams::default());
        let n = map.points.len();
        let remap = |lm: usize| n - 1 - lm;
        let mut a: Vec<(usize, usize)> = res_a
            .associations
            .iter()
            .filter(|x| x.kind == ObsKind::Point)
            .map(|x| (x.obs_id, x.landmark_id))
            .collect();
        let mut b: Vec<(usize, usize)> = res_b
            .associations
            .iter()
            .filter(|x| x.kind == ObsKind::Point)
            .map(|x| (x.obs_id, remap(x.landmark_id)))
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        assert_relative_eq!(res_a.cost, res_b.cost, epsilon = 1e-9);
    }

    fn counts_from(pairs: &[((usize, usize), u32)]) -> BTreeMap<(usize, usize), u32> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn smoothing_examples() {
        // Single persistent association.
        let c = counts_from(&[((0, 1), 5)]);
        assert_eq!(temporal_smooth(&c, 3), vec![(0, 1)]);
        // The outlier association B-1 must yield to A-1, leaving B-2.
        let c = counts_from(&[((0, 1), 5), ((1, 1), 2), ((1, 2), 2)]);
        assert_eq!(temporal_smooth(&c, 1), vec![(0, 1), (1, 2)]);
        // Symmetric tie resolves to the lower landmark id.
        let c = counts_from(&[((0, 1), 3), ((0, 2), 3)]);
        assert_eq!(temporal_smooth(&c, 1), vec![(0, 1)]);
    }

    #[test]
    fn smoothing_min_count_drop() {
        let c = counts_from(&[((0, 1), 2), ((1, 2), 5)]);
        assert_eq!(temporal_smooth(&c, 3), vec![(1, 2)]);
    }

    #[test]
    fn smoothing_matches_brute_force_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n_obs = rng.random_range(1..=8usize);
            let n_lm = rng.random_range(1..=8usize);
            let mut counts = BTreeMap::new();
            for o in 0..n_obs {
                for l in 0..n_lm {
                    if rng.random::<f64>() < 0.4 {
                        counts.insert((o, l), rng.random_range(1..20u32));
                    }
                }
            }
            let smoothed = temporal_smooth(&counts, 1);
            let weight: u64 = smoothed.iter().map(|p| counts[p] as u64).sum();
            assert_eq!(weight, brute_force_max_weight(&counts, 1));
            // Injectivity both ways.
            let mut obs: Vec<usize> = smoothed.iter().map(|&(o, _)| o).collect();
            let mut lms: Vec<usize> = smoothed.iter().map(|&(_, l)| l).collect();
            obs.dedup();
            lms.sort_unstable();
            let lml = lms.len();
            lms.dedup();
            assert_eq!(obs.len(), smoothed.len());
            assert_eq!(lms.len(), lml);
        }
    }

    #[test]
    fn association_graph_rolls_horizon() {
        let mut g = AssociationGraph::new(3);
        let a = Association { obs_id: 0, landmark_id: 1, kind: ObsKind::Point };
        for f in 0..5u64 {
            g.push_frame(f, vec![a]);
        }
        assert_eq!(g.counts()[&(0, 1, ObsKind::Point)], 3);
        assert_eq!(g.smooth(ObsKind::Point, 3), vec![(0, 1)]);
        assert!(g.smooth(ObsKind::Line, 1).is_empty());
    }
}
