//! Multi-drive landmark consensus and the persistent map format.
//!
//! Candidates from different drives that agree spatially are promoted to
//! map landmarks; everything seen in only one pass (parked cars, clutter)
//! is dropped. Points use plain Euclidean proximity, lines a combination
//! of convex-hull and projection distance.

use crate::spatial::{KdTree2, UnionFind};
use nalgebra::Vector2;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Consensus point landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLandmark {
    pub position: Vector2<f64>,
    pub observation_count: usize,
}

/// Consensus line-segment landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineLandmark {
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
}

impl LineLandmark {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn direction(&self) -> Vector2<f64> {
        (self.end - self.start).normalize()
    }
}

/// The persistent landmark map.
#[derive(Debug, Clone, Default)]
pub struct LandmarkMap {
    pub points: Vec<PointLandmark>,
    pub lines: Vec<LineLandmark>,
    /// Free-form metadata (datum, creation drives, cell size, ...).
    pub metadata: BTreeMap<String, String>,
}

/// Groups point candidates across drives: cross-drive pairs closer than
/// `d_thres` form edges; connected components backed by at least
/// `n_thres` members from as many distinct drives become landmarks at the
/// arithmetic mean of their members.
pub fn consensus_points(
    candidates_per_drive: &[Vec<Vector2<f64>>],
    d_thres: f64,
    n_thres: usize,
) -> Vec<PointLandmark> {
    let mut points = Vec::new();
    let mut drive_of = Vec::new();
    for (drive, cands) in candidates_per_drive.iter().enumerate() {
        for &p in cands {
            points.push(p);
            drive_of.push(drive);
        }
    }
    let tree = KdTree2::build(points.clone());
    let mut uf = UnionFind::new(points.len());
    for i in 0..points.len() {
        for j in tree.within_radius(points[i], d_thres) {
            if j > i && drive_of[i] != drive_of[j] && (points[i] - points[j]).norm() < d_thres {
                uf.union(i, j);
            }
        }
    }
    let mut out = Vec::new();
    for comp in uf.components() {
        if comp.len() < n_thres {
            continue;
        }
        let mut drives: Vec<usize> = comp.iter().map(|&i| drive_of[i]).collect();
        drives.sort_unstable();
        drives.dedup();
        if drives.len() < n_thres {
            continue;
        }
        let mean = comp.iter().map(|&i| points[i]).sum::<Vector2<f64>>() / comp.len() as f64;
        out.push(PointLandmark { position: mean, observation_count: comp.len() });
    }
    out
}

/// Convex-hull and projection distance between two segments.
///
/// `d_ch` is half the excess of the convex-hull perimeter of the four
/// endpoints over twice the longer segment's length: 0 for identical or
/// nested collinear segments, the offset for parallel ones, and it grows
/// with how far the pair's union extends beyond the longer segment. A
/// segment contained in a longer one therefore costs only its lateral
/// deviation, which is what both consensus grouping and observation
/// matching need. `d_prj` is the gap between the projections of both
/// segments onto the direction of the longer one (0 when the projected
/// intervals overlap).
pub fn line_pair_distance(
    a: (Vector2<f64>, Vector2<f64>),
    b: (Vector2<f64>, Vector2<f64>),
) -> (f64, f64) {
    let len_a = (a.1 - a.0).norm();
    let len_b = (b.1 - b.0).norm();
    let hull = convex_hull_perimeter(&[a.0, a.1, b.0, b.1]);
    let d_ch = ((hull - 2.0 * len_a.max(len_b)) / 2.0).max(0.0);

    let u = if len_a >= len_b { (a.1 - a.0) / len_a } else { (b.1 - b.0) / len_b };
    let (a0, a1) = minmax(a.0.dot(&u), a.1.dot(&u));
    let (b0, b1) = minmax(b.0.dot(&u), b.1.dot(&u));
    let d_prj = (b0 - a1).max(a0 - b1).max(0.0);
    (d_ch, d_prj)
}

fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Perimeter of the convex hull (Andrew monotone chain); collinear sets
/// degenerate to twice the extreme-point distance.
fn convex_hull_perimeter(points: &[Vector2<f64>]) -> f64 {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    pts.dedup_by(|p, q| (*p - *q).norm() < 1e-12);
    if pts.len() < 2 {
        return 0.0;
    }
    let cross = |o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let chain = |iter: &mut dyn Iterator<Item = Vector2<f64>>| -> Vec<Vector2<f64>> {
        let mut hull: Vec<Vector2<f64>> = Vec::new();
        for p in iter {
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-12
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull
    };
    let lower = chain(&mut pts.iter().copied());
    let upper = chain(&mut pts.iter().rev().copied());
    // Drop each chain's last point (it starts the other chain).
    let mut hull: Vec<Vector2<f64>> = Vec::new();
    hull.extend_from_slice(&lower[..lower.len() - 1]);
    hull.extend_from_slice(&upper[..upper.len() - 1]);
    if hull.len() < 2 {
        // Fully collinear: out-and-back along the extreme points.
        return 2.0 * (pts[pts.len() - 1] - pts[0]).norm();
    }
    let mut per = 0.0;
    for i in 0..hull.len() {
        per += (hull[(i + 1) % hull.len()] - hull[i]).norm();
    }
    per
}

#[derive(Debug, Clone)]
pub struct LineConsensusParams {
    /// Convex-hull distance threshold (lateral tightness).
    pub d_ch_thres: f64,
    /// Projection gap threshold (longitudinal continuity).
    pub d_prj_thres: f64,
    /// Split tolerance for curve-following refinement.
    pub rdp_tol: f64,
    /// Endpoint snap distance for intersection trimming.
    pub trim_tol: f64,
}

impl Default for LineConsensusParams {
    fn default() -> Self {
        Self { d_ch_thres: 0.09, d_prj_thres: 1.5, rdp_tol: 0.2, trim_tol: 1.0 }
    }
}

/// Groups line candidates across drives and merges each group into one or
/// more segments.
///
/// Proximity requires both `d_ch` and `d_prj` below their thresholds and
/// membership from at least two distinct drives. Merged endpoints are the
/// pair of mutual orthogonal projection points with maximum separation;
/// groups tracing a curve are split recursively at the worst-deviation
/// member point until `rdp_tol` holds, and neighboring results are
/// trimmed or extended to their intersection when they nearly cross.
pub fn consensus_lines(
    candidates_per_drive: &[Vec<(Vector2<f64>, Vector2<f64>)>],
    params: &LineConsensusParams,
) -> Vec<LineLandmark> {
    let mut segs: Vec<(Vector2<f64>, Vector2<f64>)> = Vec::new();
    let mut drive_of = Vec::new();
    for (drive, cands) in candidates_per_drive.iter().enumerate() {
        for &s in cands {
            segs.push(s);
            drive_of.push(drive);
        }
    }
    let mut uf = UnionFind::new(segs.len());
    for i in 0..segs.len() {
        for j in (i + 1)..segs.len() {
            if drive_of[i] == drive_of[j] {
                continue;
            }
            let (d_ch, d_prj) = line_pair_distance(segs[i], segs[j]);
            if d_ch < params.d_ch_thres && d_prj < params.d_prj_thres {
                uf.union(i, j);
            }
        }
    }

    let mut merged: Vec<LineLandmark> = Vec::new();
    for comp in uf.components() {
        let mut drives: Vec<usize> = comp.iter().map(|&i| drive_of[i]).collect();
        drives.sort_unstable();
        drives.dedup();
        if drives.len() < 2 {
            continue;
        }
        let members: Vec<(Vector2<f64>, Vector2<f64>)> = comp.iter().map(|&i| segs[i]).collect();
        merged.extend(merge_component(&members, params.rdp_tol));
    }

    trim_intersections(&mut merged, params.trim_tol);
    merged.retain(|l| l.length() > 1e-9);
    merged
}

/// Merges one component: maximum-separation mutual projections define the
/// base segment, then worst member endpoints are inserted recursively
/// while the deviation exceeds `rdp_tol`.
fn merge_component(members: &[(Vector2<f64>, Vector2<f64>)], rdp_tol: f64) -> Vec<LineLandmark> {
    // Mutual orthogonal projections of every endpoint onto every other
    // member's infinite line.
    let mut projections: Vec<Vector2<f64>> = Vec::new();
    for (i, &(s, e)) in members.iter().enumerate() {
        for (j, &(os, oe)) in members.iter().enumerate() {
            if i == j {
                continue;
            }
            projections.push(project_onto_line(os, s, e));
            projections.push(project_onto_line(oe, s, e));
        }
    }
    if members.len() == 1 {
        projections.push(members[0].0);
        projections.push(members[0].1);
    }
    let (mut best_a, mut best_b, mut best_d) = (projections[0], projections[0], -1.0);
    for i in 0..projections.len() {
        for j in (i + 1)..projections.len() {
            let d = (projections[i] - projections[j]).norm();
            if d > best_d {
                best_d = d;
                best_a = projections[i];
                best_b = projections[j];
            }
        }
    }

    // Member endpoints ordered along the merged direction feed the
    // split refinement.
    let dir = (best_b - best_a).normalize();
    let mut pts: Vec<(f64, Vector2<f64>)> = members
        .iter()
        .flat_map(|&(s, e)| [s, e])
        .map(|p| ((p - best_a).dot(&dir), p))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let chain: Vec<Vector2<f64>> = pts.into_iter().map(|(_, p)| p).collect();

    let mut vertices = vec![best_a];
    rdp_split(best_a, best_b, &chain, rdp_tol, &mut vertices);
    vertices.push(best_b);
    vertices
        .windows(2)
        .map(|w| LineLandmark { start: w[0], end: w[1] })
        .collect()
}

fn rdp_split(
    a: Vector2<f64>,
    b: Vector2<f64>,
    points: &[Vector2<f64>],
    tol: f64,
    out: &mut Vec<Vector2<f64>>,
) {
    let dir = b - a;
    let len = dir.norm();
    if len < 1e-9 {
        return;
    }
    let u = dir / len;
    let mut worst: Option<(f64, Vector2<f64>)> = None;
    for &p in points {
        let s = (p - a).dot(&u);
        if s <= 1e-9 || s >= len - 1e-9 {
            continue;
        }
        let d = (p - a - u * s).norm();
        if worst.map(|(wd, _)| d > wd).unwrap_or(true) {
            worst = Some((d, p));
        }
    }
    if let Some((d, p)) = worst {
        if d > tol {
            rdp_split(a, p, points, tol, out);
            out.push(p);
            rdp_split(p, b, points, tol, out);
        }
    }
}

fn project_onto_line(p: Vector2<f64>, s: Vector2<f64>, e: Vector2<f64>) -> Vector2<f64> {
    let d = e - s;
    let len2 = d.norm_squared();
    if len2 < 1e-18 {
        return s;
    }
    s + d * ((p - s).dot(&d) / len2)
}

/// Snaps nearly-crossing segment ends to their intersection point.
fn trim_intersections(lines: &mut [LineLandmark], trim_tol: f64) {
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (a, b) = (lines[i], lines[j]);
            let da = a.end - a.start;
            let db = b.end - b.start;
            let det = da.x * db.y - da.y * db.x;
            if det.abs() < 1e-9 {
                continue;
            }
            let diff = b.start - a.start;
            let t = (diff.x * db.y - diff.y * db.x) / det;
            let x = a.start + da * t;
            // Nearest endpoints of both segments must be within the snap
            // tolerance for a corner to form.
            let (ai, ad) = nearest_endpoint(&a, x);
            let (bi, bd) = nearest_endpoint(&b, x);
            if ad <= trim_tol && bd <= trim_tol {
                set_endpoint(&mut lines[i], ai, x);
                set_endpoint(&mut lines[j], bi, x);
            }
        }
    }
}

fn nearest_endpoint(l: &LineLandmark, x: Vector2<f64>) -> (bool, f64) {
    let ds = (l.start - x).norm();
    let de = (l.end - x).norm();
    if ds <= de {
        (true, ds)
    } else {
        (false, de)
    }
}

fn set_endpoint(l: &mut LineLandmark, start: bool, x: Vector2<f64>) {
    if start {
        l.start = x;
    } else {
        l.end = x;
    }
}

/// Serializes a map to the text format: header `polaris-map v1`, optional
/// `<key> <value>` metadata lines, then `P <x> <y> <count>` and
/// `L <xs> <ys> <xe> <ye>` records with six fractional digits.
pub fn map_to_string(map: &LandmarkMap) -> String {
    let mut s = String::from("polaris-map v1\n");
    for (k, v) in &map.metadata {
        let _ = writeln!(s, "{k} {v}");
    }
    for p in &map.points {
        let _ = writeln!(
            s,
            "P {:.6} {:.6} {}",
            p.position.x, p.position.y, p.observation_count
        );
    }
    for l in &map.lines {
        let _ = writeln!(
            s,
            "L {:.6} {:.6} {:.6} {:.6}",
            l.start.x, l.start.y, l.end.x, l.end.y
        );
    }
    s
}

pub fn map_from_str(text: &str) -> Result<LandmarkMap, MapError> {
    let mut lines_iter = text.lines().enumerate();
    let header = loop {
        match lines_iter.next() {
            Some((_, l)) if l.trim().is_empty() || l.trim_start().starts_with('#') => continue,
            Some((_, l)) => break l.trim().to_string(),
            None => {
                return Err(MapError::Parse { line: 1, msg: "empty map file".into() });
            }
        }
    };
    if header != "polaris-map v1" {
        return Err(MapError::Parse {
            line: 1,
            msg: format!("unsupported header {header:?}"),
        });
    }
    let mut map = LandmarkMap::default();
    for (idx, raw) in lines_iter {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let tag = tok.next().unwrap();
        let mut num = |what: &str| -> Result<f64, MapError> {
            tok.next()
                .ok_or_else(|| MapError::Parse {
                    line: line_no,
                    msg: format!("missing {what}"),
                })?
                .parse::<f64>()
                .map_err(|e| MapError::Parse {
                    line: line_no,
                    msg: format!("bad {what}: {e}"),
                })
        };
        match tag {
            "P" => {
                let x = num("x")?;
                let y = num("y")?;
                let count = num("count")? as usize;
                map.points.push(PointLandmark {
                    position: Vector2::new(x, y),
                    observation_count: count,
                });
            }
            "L" => {
                let xs = num("xs")?;
                let ys = num("ys")?;
                let xe = num("xe")?;
                let ye = num("ye")?;
                map.lines.push(LineLandmark {
                    start: Vector2::new(xs, ys),
                    end: Vector2::new(xe, ye),
                });
            }
            key => {
                let value = line[key.len()..].trim().to_string();
                map.metadata.insert(key.to_string(), value);
            }
        }
    }
    Ok(map)
}

pub fn save_map(map: &LandmarkMap, path: &Path) -> Result<(), MapError> {
    std::fs::write(path, map_to_string(map))?;
    Ok(())
}

pub fn load_map(path: &Path) -> Result<LandmarkMap, MapError> {
    map_from_str(&std::fs::read_to_string(path)?)
}
