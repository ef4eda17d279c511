//! End-to-end orchestration: simulated drives, multi-drive mapping,
//! sliding-window localization, and evaluation artifacts.
//!
//! The mapping path accumulates full-history grids under ground-truth
//! poses and extracts per-drive candidates; consensus across drives
//! produces the persistent map. The localization path never sees the
//! optimized pose in its gridmap: the sliding-window grid is built purely
//! from integrated ego-motion, and the optimizer output only propagates
//! the world-from-odometry correction.

use crate::config::{PolSelection, RunConfig};
use crate::egomotion::{estimate_motion, EgoEstimate, MotionState, RadarDetection};
use crate::evaluation::{aggregate, ccdf, compute_errors, Gates, Metrics, TimedPose};
use crate::gridmap::{
    extract_static_surface, scatter_to_grid, CovarianceGrid, GridMode, GridSpec, PolarStaticImage,
};
use crate::landmarks::{pcfar_detect, ridge_lines, LineCandidate, PointCandidate};
use crate::map_construction::{
    consensus_lines, consensus_points, LandmarkMap, LineLandmark, MapError,
};
use crate::matching::{
    match_local_map, AssociationGraph, LineObservation, LocalMapTracker, ObsKind,
    PointObservation,
};
use crate::polarimetry::ScatteringVector;
use crate::pose_graph::{FactorGraph, LmVar, OptimizeParams};
use crate::se2::{wrap_angle, Pose2};
use crate::simulator::{
    generate_scene, generate_trajectory, simulate_frame, GtQuality, Scatterer, ScattererKind,
    Scene, TrajectorySample,
};
use nalgebra::Vector2;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("mapping requires at least two drives, got {0}")]
    TooFewDrives(usize),
    #[error("map error: {0}")]
    Map(#[from] MapError),
    #[error("{0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One recorded or simulated drive: its ground-truth trajectory and the
/// seed that makes its sensor data reproducible.
#[derive(Debug, Clone)]
pub struct Drive {
    pub name: String,
    pub trajectory: Vec<TrajectorySample>,
    pub noise_seed: u64,
}

/// Builds the scene and the configured number of drives deterministically
/// from the config seed. Drives share the route but differ in start
/// offset, speed jitter, and sensor noise.
pub fn simulate_drives(config: &RunConfig) -> (Scene, Vec<Drive>) {
    let scene = generate_scene(config.seed, &config.scene);
    let drives = (0..config.drives)
        .map(|i| {
            let mut spec = config.trajectory.clone();
            let lateral = 0.15 * (i as f64 - (config.drives as f64 - 1.0) / 2.0);
            let r = spec.start.rotation();
            let offset = r * Vector2::new(0.0, lateral);
            spec.start = Pose2::new(spec.start.x + offset.x, spec.start.y + offset.y, spec.start.yaw);
            Drive {
                name: format!("drive{i}"),
                trajectory: generate_trajectory(
                    config.seed.wrapping_mul(31).wrapping_add(i as u64),
                    &spec,
                ),
                noise_seed: config.seed.wrapping_mul(1_000_003).wrapping_add(i as u64 * 7919),
            }
        })
        .collect();
    (scene, drives)
}

fn frame_seed(drive_seed: u64, frame: usize, sensor: usize) -> u64 {
    drive_seed
        .wrapping_add(frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(sensor as u64)
}

/// Grid extent covering all trajectories plus the sensing range.
fn auto_grid_spec(config: &RunConfig, drives: &[Drive]) -> GridSpec {
    if !config.auto_grid && config.grid_width > 0 {
        return GridSpec::new(
            config.grid_origin,
            config.cell_size,
            config.grid_width,
            config.grid_height,
        );
    }
    let mut lo = Vector2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for d in drives {
        for s in &d.trajectory {
            lo.x = lo.x.min(s.pose.x);
            lo.y = lo.y.min(s.pose.y);
            hi.x = hi.x.max(s.pose.x);
            hi.y = hi.y.max(s.pose.y);
        }
    }
    let margin = config.sim.cube_max_range + 5.0;
    GridSpec::covering(
        lo - Vector2::new(margin, margin),
        hi + Vector2::new(margin, margin),
        config.cell_size,
    )
}

fn polarize_image(image: &mut PolarStaticImage, pol: PolSelection, floor: f64) {
    if pol == PolSelection::Full {
        return;
    }
    let q_in = image.q();
    let basis_in = image.basis.clone();
    let basis_out = pol.basis();
    let q_out = basis_out.q();
    let mut out =
        vec![crate::polarimetry::C64::new(0.0, 0.0); image.n_range * image.n_azimuth * q_out];
    for r in 0..image.n_range {
        for a in 0..image.n_azimuth {
            let src = image.bin(r, a);
            // Skip silent bins: transforming pure zeros is pointless.
            if src.iter().all(|v| v.norm_sqr() == 0.0) {
                continue;
            }
            let power: f64 = src.iter().map(|v| v.norm_sqr()).sum();
            if power <= floor * 0.01 {
                continue;
            }
            let omega = ScatteringVector::new(basis_in.clone(), src.to_vec()).unwrap();
            let selected = pol.apply(&omega);
            let o = (r * image.n_azimuth + a) * q_out;
            out[o..o + q_out].copy_from_slice(&selected.values);
        }
    }
    let _ = q_in;
    image.basis = basis_out;
    image.values = out;
}

/// Per-drive landmark extraction result.
#[derive(Debug, Clone, Default)]
pub struct DriveCandidates {
    pub points: Vec<PointCandidate>,
    pub lines: Vec<LineCandidate>,
}

/// Runs the mapping path for one drive: ego-motion is estimated per frame
/// (the Doppler surface needs it), the grid accumulates under the
/// ground-truth pose, and candidates are extracted once at the end.
pub fn map_single_drive(config: &RunConfig, scene: &Scene, drive: &Drive, spec: &GridSpec) -> DriveCandidates {
    let mut grid = CovarianceGrid::new(spec.clone(), config.pol.basis(), GridMode::FullHistory);
    let floor = config.effective_power_floor();
    for (k, sample) in drive.trajectory.iter().enumerate() {
        for (mi, mount) in config.mounts.iter().enumerate() {
            let (cube, _) = simulate_frame(
                scene,
                sample,
                mount,
                &config.radar,
                &config.sim,
                frame_seed(drive.noise_seed, k, mi),
            );
            // Mapping phase: ground-truth motion and pose are available.
            let mut img = extract_static_surface(&cube, &sample.motion, mount);
            polarize_image(&mut img, config.pol, floor);
            scatter_to_grid(&mut grid, &img, &sample.pose, mount, floor, k as u64);
        }
    }
    let points = pcfar_detect(&grid, &config.pcfar);
    let lines = ridge_lines(&grid.power_map(), &config.ridge);
    DriveCandidates { points, lines }
}

/// Mapping output: the consensus map plus the raw per-drive candidates.
#[derive(Debug)]
pub struct MappingResult {
    pub map: LandmarkMap,
    pub per_drive: Vec<DriveCandidates>,
}

/// Multi-drive mapping: per-drive extraction (parallel across drives) and
/// cross-drive consensus. Refuses fewer than two drives.
pub fn run_mapping(
    config: &RunConfig,
    scene: &Scene,
    drives: &[Drive],
) -> Result<MappingResult, PipelineError> {
    if drives.len() < 2 {
        return Err(PipelineError::TooFewDrives(drives.len()));
    }
    let spec = auto_grid_spec(config, drives);
    let per_drive: Vec<DriveCandidates> = drives
        .par_iter()
        .map(|d| map_single_drive(config, scene, d, &spec))
        .collect();
    let point_sets: Vec<Vec<Vector2<f64>>> = per_drive
        .iter()
        .map(|c| c.points.iter().map(|p| p.position).collect())
        .collect();
    let line_sets: Vec<Vec<(Vector2<f64>, Vector2<f64>)>> = per_drive
        .iter()
        .map(|c| c.lines.iter().map(|l| (l.start, l.end)).collect())
        .collect();
    let points = consensus_points(&point_sets, config.consensus_d_point, config.consensus_n_point);
    let lines = consensus_lines(&line_sets, &config.line_consensus);
    let mut map = LandmarkMap { points, lines, metadata: BTreeMap::new() };
    map.metadata.insert("cell_size".into(), format!("{:.6}", config.cell_size));
    map.metadata.insert("drives".into(), drives.iter().map(|d| d.name.clone()).collect::<Vec<_>>().join(","));
    map.metadata.insert("pol".into(), config.pol.name().into());
    Ok(MappingResult { map, per_drive })
}

/// One localization output row.
#[derive(Debug, Clone, Copy)]
pub struct EstimateRow {
    pub t: f64,
    pub pose: Pose2,
    pub converged: bool,
    pub n_landmarks: usize,
}

/// Localization output: the estimated trajectory, the dead-reckoning
/// baseline, and the association log.
pub struct LocalizationResult {
    pub estimates: Vec<EstimateRow>,
    pub dead_reckoning: Vec<(f64, Pose2)>,
    pub association_log: String,
    pub detection_log: String,
}

/// Runs the localization path on one drive against a given map.
///
/// Per frame: ego-motion RANSAC with Nyquist augmentation, odometry
/// integration, sliding-window grid update (odometry poses only, never
/// the optimizer output), candidate extraction, local-map matching with
/// temporal smoothing, graph update, optimization, truncation.
pub fn run_localization(
    config: &RunConfig,
    map: &LandmarkMap,
    scene: &Scene,
    drive: &Drive,
    collect_detections: bool,
) -> LocalizationResult {
    let floor = config.effective_power_floor();
    let spec = auto_grid_spec(config, std::slice::from_ref(drive));
    let mut grid = CovarianceGrid::new(
        spec,
        config.pol.basis(),
        GridMode::SlidingWindow(config.window_frames),
    );
    let ego_params = config.ego_params();
    let dt = 1.0 / config.radar.update_rate;

    let mut graph = FactorGraph::new(config.noise.clone());
    let mut tracker = LocalMapTracker::new(
        config.local_window_s,
        config.local_cluster_d,
        config.line_gates(),
    );
    let mut assoc_graph = AssociationGraph::new(config.smooth_horizon);
    let mut assoc_log = String::new();
    let mut det_log = String::from("t,sensor_id,range,azimuth,vr,re0,im0,re1,im1,re2,im2,re3,im3\n");

    let mut history: Vec<MotionState> = Vec::new();
    let start = drive.trajectory[0].pose;
    let mut odom = start; // odometry frame seeded at the known start pose
    let mut world_from_odom = Pose2::identity();
    let mut estimates = Vec::new();
    let mut dead_reckoning = Vec::new();
    // Map landmark id -> live graph variable.
    let mut point_vars: BTreeMap<usize, LmVar> = BTreeMap::new();
    let mut last_point_matches = 0usize;

    for (k, sample) in drive.trajectory.iter().enumerate() {
        let t = sample.t;
        // Sense: cubes and detections from every mount.
        let mut dets: Vec<RadarDetection> = Vec::new();
        let mut images = Vec::new();
        for (mi, mount) in config.mounts.iter().enumerate() {
            let (cube, mut frame_dets) = simulate_frame(
                scene,
                sample,
                mount,
                &config.radar,
                &config.sim,
                frame_seed(drive.noise_seed, k, mi),
            );
            for d in &mut frame_dets {
                d.sensor_id = mi;
            }
            if collect_detections {
                for d in &frame_dets {
                    let mut row = format!(
                        "{:.3},{},{:.4},{:.6},{:.4}",
                        t, d.sensor_id, d.range, d.azimuth, d.v_r
                    );
                    for c in 0..4 {
                        let v = d.omega_vec.values.get(c).copied().unwrap_or_default();
                        let _ = write!(row, ",{:.4},{:.4}", v.re, v.im);
                    }
                    det_log.push_str(&row);
                    det_log.push('\n');
                }
            }
            dets.extend(frame_dets);
            images.push((cube, mi));
        }

        // Ego motion and odometry integration.
        let est: EgoEstimate = estimate_motion(&dets, &config.mounts, &history, t, k as u64, &ego_params);
        history.push(est.motion);
        if history.len() > 8 {
            history.remove(0);
        }
        if k > 0 {
            let z = Pose2::new(est.motion.v * dt, 0.0, est.motion.omega * dt);
            odom = odom.compose(&z);
        }
        dead_reckoning.push((t, odom));

        // Sliding-window grid under the integrated odometry pose.
        for (cube, mi) in &images {
            let mount = &config.mounts[*mi];
            let mut img = extract_static_surface(cube, &est.motion, mount);
            polarize_image(&mut img, config.pol, floor);
            scatter_to_grid(&mut grid, &img, &odom, mount, floor, k as u64);
        }
        let _ = grid.evict_window(k as u64);

        // Candidate extraction in the odometry frame.
        let points = pcfar_detect(&grid, &config.pcfar);
        tracker.push_points(points.iter().map(|p| PointObservation { position: p.position, t }));
        let extract_lines =
            k as u64 % config.line_cadence == 0 || last_point_matches < config.min_point_matches;
        if extract_lines {
            let lines = ridge_lines(&grid.power_map(), &config.ridge);
            tracker.push_lines(lines.iter().map(|l| LineObservation {
                start: l.start,
                end: l.end,
                t,
            }));
        }
        let local = tracker.local_map(t);

        // Match against the map around the propagated prior.
        let result = match_local_map(&local, map, &world_from_odom, &config.match_params);
        assoc_graph.push_frame(k as u64, result.associations.clone());
        let smoothed_points = assoc_graph.smooth(ObsKind::Point, config.smooth_min_count);
        let smoothed_lines = assoc_graph.smooth(ObsKind::Line, config.smooth_min_count);

        // Graph update.
        let prior_world = world_from_odom.compose(&odom);
        graph.add_pose(k as u64, prior_world);
        if k == 0 {
            graph.add_fallback_pose_prior(0, prior_world);
        } else {
            graph.add_odometry_factor(k as u64 - 1, k as u64, &est.motion, dt);
        }

        let mut n_point_factors = 0;
        for &(obs_id, lm_id) in &smoothed_points {
            let Some(cluster) = local.points.iter().find(|c| c.id == obs_id) else {
                continue;
            };
            let Some(lm) = map.points.get(lm_id) else { continue };
            let var = *point_vars.entry(lm_id).or_insert_with(|| {
                let v = graph.add_point_variable(lm.position);
                graph.add_point_prior(v, lm.position);
                v
            });
            let d = cluster.position - odom.translation();
            let range = d.norm();
            if range < 0.5 {
                continue;
            }
            let bearing = wrap_angle(d.y.atan2(d.x) - odom.yaw);
            graph.add_observation_factor(k as u64, var, bearing, range);
            n_point_factors += 1;
            let _ = writeln!(assoc_log, "A {:.3} {} {} {} point", t, k, obs_id, lm_id);
        }
        last_point_matches = n_point_factors;

        if extract_lines {
            for &(obs_id, lm_id) in &smoothed_lines {
                let Some(cluster) = local.lines.iter().find(|c| c.id == obs_id) else {
                    continue;
                };
                let Some(lm) = map.lines.get(lm_id) else { continue };
                for endpoint in [cluster.start, cluster.end] {
                    let d = endpoint - odom.translation();
                    let range = d.norm();
                    if range < 0.5 {
                        continue;
                    }
                    let ep = graph.add_endpoint_variable(world_from_odom.transform(endpoint));
                    let bearing = wrap_angle(d.y.atan2(d.x) - odom.yaw);
                    graph.add_observation_factor(k as u64, ep, bearing, range);
                    let _ = graph.add_line_prior(ep, lm);
                }
                let _ = writeln!(assoc_log, "A {:.3} {} {} {} line", t, k, obs_id, lm_id);
            }
        }

        // Anchor the window when landmarks underconstrain it.
        if k > 0 && graph.constrained_landmark_count() < config.min_constraint {
            graph.add_fallback_pose_prior(k as u64, prior_world);
        }

        let report = graph.optimize(&OptimizeParams::default());
        graph.truncate_window(config.graph_window_poses);
        // Drop variable handles that truncation removed.
        point_vars.retain(|_, v| graph.landmark_estimate(*v).is_some());

        let world = graph.pose(k as u64).expect("current pose in window");
        world_from_odom = world.compose(&odom.inverse());
        estimates.push(EstimateRow {
            t,
            pose: world,
            converged: report.converged,
            n_landmarks: graph.constrained_landmark_count(),
        });
    }

    LocalizationResult {
        estimates,
        dead_reckoning,
        association_log: assoc_log,
        detection_log: det_log,
    }
}

/// One evaluation row of the metrics table.
pub struct EvalRow {
    pub route: String,
    pub drive: String,
    pub pol: String,
    pub metrics: Option<Metrics>,
    pub skipped_samples: usize,
    pub samples: Vec<crate::evaluation::TrajectoryErrorSample>,
}

/// Computes errors, aggregates, and CCDFs for one localization run.
pub fn run_eval(
    route: &str,
    drive: &str,
    pol: &str,
    estimates: &[EstimateRow],
    gt: &[TimedPose],
    rate_hz: f64,
) -> EvalRow {
    let est: Vec<(f64, Pose2)> = estimates.iter().map(|e| (e.t, e.pose)).collect();
    let (samples, skipped) = compute_errors(&est, gt, rate_hz);
    let metrics = aggregate(&samples, &Gates::default());
    EvalRow {
        route: route.to_string(),
        drive: drive.to_string(),
        pol: pol.to_string(),
        metrics,
        skipped_samples: skipped,
        samples,
    }
}

/// Formats the metrics table required by the evaluation interface.
pub fn metrics_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from(
        "route,drive,config,rmse_long,max_long,rmse_lat,max_lat,rmse_rot,max_rot,reliable_fraction\n",
    );
    for r in rows {
        match &r.metrics {
            Some(m) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                    r.route,
                    r.drive,
                    r.pol,
                    m.rmse_long,
                    m.max_long,
                    m.rmse_lat,
                    m.max_lat,
                    m.rmse_rot,
                    m.max_rot,
                    m.reliable_fraction
                );
            }
            None => {
                let _ = writeln!(s, "{},{},{},empty,empty,empty,empty,empty,empty,0", r.route, r.drive, r.pol);
            }
        }
    }
    s
}

/// CCDF CSV (`eps,ccdf`) for one error component of one run.
pub fn ccdf_csv(values: &[f64]) -> String {
    let c = ccdf(values);
    let mut s = String::from("eps,ccdf\n");
    for (eps, f) in c.points {
        let _ = writeln!(s, "{eps:.6},{f:.6}");
    }
    s
}

// --- text artifacts ---

/// Ground-truth / simulated trajectory CSV: `t,x,y,yaw,v,omega,quality`.
pub fn trajectory_to_csv(traj: &[TrajectorySample]) -> String {
    let mut s = String::from("t,x,y,yaw,v,omega,quality\n");
    for ts in traj {
        let q = match ts.gt_quality {
            GtQuality::Carrier => "carrier",
            GtQuality::Std => "std",
        };
        let _ = writeln!(
            s,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            ts.t, ts.pose.x, ts.pose.y, ts.pose.yaw, ts.motion.v, ts.motion.omega, q
        );
    }
    s
}

pub fn trajectory_from_csv(text: &str) -> Result<Vec<TrajectorySample>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(PipelineError::Parse(format!(
                "trajectory line {}: expected 7 fields, got {}",
                i + 1,
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64, PipelineError> {
            s.parse().map_err(|e| {
                PipelineError::Parse(format!("trajectory line {}: {e}", i + 1))
            })
        };
        let quality = match f[6].trim() {
            "carrier" => GtQuality::Carrier,
            "std" => GtQuality::Std,
            other => {
                return Err(PipelineError::Parse(format!(
                    "trajectory line {}: unknown quality `{other}`",
                    i + 1
                )))
            }
        };
        out.push(TrajectorySample {
            t: num(f[0])?,
            pose: Pose2::new(num(f[1])?, num(f[2])?, num(f[3])?),
            motion: MotionState::new(num(f[4])?, num(f[5])?, num(f[0])?),
            gt_quality: quality,
        });
    }
    Ok(out)
}

/// Estimated trajectory CSV: `t,x,y,yaw,converged,n_landmarks`.
pub fn estimates_to_csv(rows: &[EstimateRow]) -> String {
    let mut s = String::from("t,x,y,yaw,converged,n_landmarks\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.3},{:.6},{:.6},{:.6},{},{}",
            r.t,
            r.pose.x,
            r.pose.y,
            r.pose.yaw,
            r.converged as u8,
            r.n_landmarks
        );
    }
    s
}

pub fn estimates_from_csv(text: &str) -> Result<Vec<EstimateRow>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(PipelineError::Parse(format!(
                "estimate line {}: expected 6 fields",
                i + 1
            )));
        }
        let num = |s: &str| -> Result<f64, PipelineError> {
            s.parse()
                .map_err(|e| PipelineError::Parse(format!("estimate line {}: {e}", i + 1)))
        };
        out.push(EstimateRow {
            t: num(f[0])?,
            pose: Pose2::new(num(f[1])?, num(f[2])?, num(f[3])?),
            converged: f[4].trim() == "1",
            n_landmarks: num(f[5])? as usize,
        });
    }
    Ok(out)
}

/// Scene text format: `polaris-scene v1` header, metadata, then `PT` and
/// `SEG` records.
pub fn scene_to_string(scene: &Scene, sample_spacing: f64, detection_spacing: f64) -> String {
    let mut s = String::from("polaris-scene v1\n");
    let _ = writeln!(s, "sample_spacing {sample_spacing:.6}");
    let _ = writeln!(s, "detection_spacing {detection_spacing:.6}");
    for sc in &scene.scatterers {
        let kind = match sc.kind {
            ScattererKind::OddBounce => "odd",
            ScattererKind::EvenBounce => "even",
            ScattererKind::Mixed => "mixed",
        };
        let rcs: f64 = sc.rcs.iter().sum();
        match sc.extent {
            None => {
                let _ = writeln!(s, "PT {:.6} {:.6} {kind} {rcs:.6}", sc.position.x, sc.position.y);
            }
            Some((a, b)) => {
                let _ = writeln!(
                    s,
                    "SEG {:.6} {:.6} {:.6} {:.6} {kind} {rcs:.6}",
                    a.x, a.y, b.x, b.y
                );
            }
        }
    }
    s
}

pub fn scene_from_str(text: &str) -> Result<Scene, PipelineError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "polaris-scene v1" => {}
        _ => return Err(PipelineError::Parse("missing scene header".into())),
    }
    let mut sample_spacing = 0.075;
    let mut detection_spacing = 0.4;
    let mut scatterers = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64, PipelineError> {
            s.parse()
                .map_err(|e| PipelineError::Parse(format!("scene line {}: {e}", i + 1)))
        };
        let kind_of = |s: &str| -> Result<ScattererKind, PipelineError> {
            Ok(match s {
                "odd" => ScattererKind::OddBounce,
                "even" => ScattererKind::EvenBounce,
                "mixed" => ScattererKind::Mixed,
                other => {
                    return Err(PipelineError::Parse(format!(
                        "scene line {}: unknown kind `{other}`",
                        i + 1
                    )))
                }
            })
        };
        match tok.first().copied() {
            Some("PT") if tok.len() == 5 => {
                scatterers.push(Scatterer::point(
                    Vector2::new(num(tok[1])?, num(tok[2])?),
                    kind_of(tok[3])?,
                    num(tok[4])?,
                ));
            }
            Some("SEG") if tok.len() == 7 => {
                scatterers.push(Scatterer::segment(
                    Vector2::new(num(tok[1])?, num(tok[2])?),
                    Vector2::new(num(tok[3])?, num(tok[4])?),
                    kind_of(tok[5])?,
                    num(tok[6])?,
                ));
            }
            Some("sample_spacing") if tok.len() == 2 => sample_spacing = num(tok[1])?,
            Some("detection_spacing") if tok.len() == 2 => detection_spacing = num(tok[1])?,
            _ => {
                return Err(PipelineError::Parse(format!(
                    "scene line {}: unrecognized record `{line}`",
                    i + 1
                )))
            }
        }
    }
    let spec = crate::simulator::SceneSpec {
        sample_spacing,
        detection_spacing,
        ..Default::default()
    };
    Ok(Scene::from_scatterers(scatterers, &spec))
}

/// Candidate dump records: `PC x y score support` / `LC xs ys xe ye support`.
pub fn candidates_to_string(c: &DriveCandidates) -> String {
    let mut s = String::new();
    for p in &c.points {
        let _ = writeln!(
            s,
            "PC {:.6} {:.6} {:.6} {}",
            p.position.x, p.position.y, p.score, p.support
        );
    }
    for l in &c.lines {
        let _ = writeln!(
            s,
            "LC {:.6} {:.6} {:.6} {:.6} {}",
            l.start.x, l.start.y, l.end.x, l.end.y, l.support
        );
    }
    s
}

/// Ground-truth samples viewed as evaluation input.
pub fn gt_as_timed_poses(traj: &[TrajectorySample]) -> Vec<TimedPose> {
    traj.iter()
        .map(|s| TimedPose {
            t: s.t,
            pose: s.pose,
            quality: s.gt_quality,
            speed: s.motion.v.abs(),
        })
        .collect()
}

/// Line landmarks from a map, exposed for tests.
pub fn map_line(start: (f64, f64), end: (f64, f64)) -> LineLandmark {
    LineLandmark {
        start: Vector2::new(start.0, start.1),
        end: Vector2::new(end.0, end.1),
    }
}
