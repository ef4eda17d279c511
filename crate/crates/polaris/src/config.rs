//! Run configuration: a flat `key = value` text format with `#` comments.
//!
//! Every key has a documented default; unknown keys are rejected so typos
//! fail loudly. [`RunConfig::to_text`] writes a fully commented file that
//! round-trips through [`RunConfig::parse`].

use crate::egomotion::EgoEstimateParams;
use crate::landmarks::{PcfarParams, RidgeParams};
use crate::map_construction::LineConsensusParams;
use crate::matching::{LineGates, MatchParams};
use crate::polarimetry::{BasisKind, Channel, PolarizationBasis, ScatteringVector};
use crate::pose_graph::NoiseConfig;
use crate::se2::Pose2;
use crate::simulator::{
    FenceSpec, MotionSegment, RadarSpec, SceneSpec, SensorMount, SimConfig, TrajectorySpec,
};
use nalgebra::Vector2;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Polarimetric channel selection evaluated by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolSelection {
    /// Full circular basis (LL, LR, RL, RR).
    Full,
    /// Circular co-polar pair (even-bounce channels).
    DualLlRr,
    /// Linear co-polar pair after basis transformation.
    DualHhVv,
    /// Single circular cross channel.
    SingleLr,
    /// Single circular co-polar channel.
    SingleRr,
    /// Single linear co-polar channel.
    SingleHh,
}

impl PolSelection {
    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "full" => PolSelection::Full,
            "dual-LL.RR" => PolSelection::DualLlRr,
            "dual-HH.VV" => PolSelection::DualHhVv,
            "single-LR" => PolSelection::SingleLr,
            "single-RR" => PolSelection::SingleRr,
            "single-HH" => PolSelection::SingleHh,
            other => return Err(format!(
                "unknown polarization `{other}` (full|dual-LL.RR|dual-HH.VV|single-LR|single-RR|single-HH)"
            )),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolSelection::Full => "full",
            PolSelection::DualLlRr => "dual-LL.RR",
            PolSelection::DualHhVv => "dual-HH.VV",
            PolSelection::SingleLr => "single-LR",
            PolSelection::SingleRr => "single-RR",
            PolSelection::SingleHh => "single-HH",
        }
    }

    fn channels(&self) -> (BasisKind, Vec<Channel>) {
        match self {
            PolSelection::Full => (
                BasisKind::CircularLR,
                vec![Channel::LL, Channel::LR, Channel::RL, Channel::RR],
            ),
            PolSelection::DualLlRr => (BasisKind::CircularLR, vec![Channel::LL, Channel::RR]),
            PolSelection::DualHhVv => (BasisKind::LinearHV, vec![Channel::HH, Channel::VV]),
            PolSelection::SingleLr => (BasisKind::CircularLR, vec![Channel::LR]),
            PolSelection::SingleRr => (BasisKind::CircularLR, vec![Channel::RR]),
            PolSelection::SingleHh => (BasisKind::LinearHV, vec![Channel::HH]),
        }
    }

    /// The basis the gridmap accumulates under this selection.
    pub fn basis(&self) -> PolarizationBasis {
        PolarizationBasis::new(self.channels().1).unwrap()
    }

    /// Number of measured channels.
    pub fn q(&self) -> usize {
        self.channels().1.len()
    }

    /// Applies the selection to a full-pol circular scattering vector:
    /// transform to the target basis if linear, then pick the channels.
    pub fn apply(&self, omega: &ScatteringVector) -> ScatteringVector {
        let (kind, channels) = self.channels();
        let transformed;
        let source = if omega.basis.kind() != kind {
            transformed = omega.transform_basis(kind).expect("full-pol input");
            &transformed
        } else {
            omega
        };
        source.select_channels(&channels).expect("known channels")
    }
}

/// Full pipeline configuration with documented defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub radar: RadarSpec,
    pub mounts: Vec<SensorMount>,
    pub sim: SimConfig,
    pub scene: SceneSpec,
    pub trajectory: TrajectorySpec,
    /// Grid cell size (m).
    pub cell_size: f64,
    /// Grid origin/extent; `auto_grid` derives them from the trajectory.
    pub grid_origin: Vector2<f64>,
    pub grid_width: usize,
    pub grid_height: usize,
    pub auto_grid: bool,
    /// Sliding-window length in frames for localization grids.
    pub window_frames: u64,
    /// Power floor; negative selects 3x the expected noise floor.
    pub power_floor: f64,
    pub pcfar: PcfarParams,
    pub ridge: RidgeParams,
    /// Point consensus: distance and minimum observation thresholds.
    pub consensus_d_point: f64,
    pub consensus_n_point: usize,
    pub line_consensus: LineConsensusParams,
    pub match_params: MatchParams,
    /// Local map window (s) and clustering distance (m).
    pub local_window_s: f64,
    pub local_cluster_d: f64,
    /// Temporal smoothing horizon (frames) and minimum count.
    pub smooth_horizon: usize,
    pub smooth_min_count: u32,
    pub noise: NoiseConfig,
    /// Pose-graph window and cadence controls.
    pub graph_window_poses: usize,
    pub line_cadence: u64,
    pub min_point_matches: usize,
    pub min_constraint: usize,
    pub ego: EgoEstimateParams,
    /// Maximum expected ego velocity, sizing the Nyquist zone range.
    pub v_ego_max: f64,
    pub nyquist_augmentation: bool,
    pub pol: PolSelection,
    pub seed: u64,
    /// Number of drives simulated for mapping (localization uses the
    /// leave-one-out drive below).
    pub drives: usize,
    pub loo_drive: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let radar = RadarSpec::default();
        let sim = SimConfig::for_radar(&radar);
        Self {
            radar,
            mounts: SensorMount::default_layout(),
            sim,
            scene: SceneSpec::default(),
            trajectory: TrajectorySpec::constant(8.0, 0.0, 10.0),
            cell_size: 0.15,
            grid_origin: Vector2::new(0.0, 0.0),
            grid_width: 0,
            grid_height: 0,
            auto_grid: true,
            window_frames: 30,
            power_floor: -1.0,
            pcfar: PcfarParams::default(),
            ridge: RidgeParams::default(),
            consensus_d_point: 0.3,
            consensus_n_point: 2,
            line_consensus: LineConsensusParams::default(),
            match_params: MatchParams::default(),
            local_window_s: 5.0,
            local_cluster_d: 0.5,
            smooth_horizon: 30,
            smooth_min_count: 3,
            noise: NoiseConfig::default(),
            graph_window_poses: 100,
            line_cadence: 10,
            min_point_matches: 5,
            min_constraint: 2,
            ego: EgoEstimateParams::default(),
            v_ego_max: 15.0,
            nyquist_augmentation: true,
            pol: PolSelection::Full,
            seed: 1,
            drives: 4,
            loo_drive: 3,
        }
    }
}

impl RunConfig {
    /// Effective power floor (resolves the automatic setting).
    pub fn effective_power_floor(&self) -> f64 {
        if self.power_floor >= 0.0 {
            self.power_floor
        } else {
            3.0 * self.sim.noise_power * self.radar.basis.q() as f64
        }
    }

    /// Ego-estimation parameters with the Nyquist zone range resolved
    /// from `v_ego_max` and the radar's unambiguous velocity.
    pub fn ego_params(&self) -> EgoEstimateParams {
        let mut p = self.ego.clone();
        p.v_unamb = self.radar.unambiguous_radial_velocity;
        p.zone_range = if self.nyquist_augmentation {
            let k = crate::egomotion::nyquist_zone_count(
                self.v_ego_max,
                self.radar.unambiguous_radial_velocity,
            );
            (-k, k)
        } else {
            (0, 0)
        };
        p
    }

    pub fn line_gates(&self) -> LineGates {
        LineGates {
            d_ch: self.match_params.line_d_ch_gate,
            d_prj: self.match_params.line_d_prj_gate,
        }
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut cfg = RunConfig::default();
        let mut take = Taker { kv: &mut kv };

        take.f64("radar.max_range", &mut cfg.radar.max_range)?;
        take.f64("radar.range_resolution", &mut cfg.radar.range_resolution)?;
        take.deg("radar.fov_azimuth_deg", &mut cfg.radar.fov_azimuth)?;
        take.deg("radar.azimuth_resolution_deg", &mut cfg.radar.azimuth_resolution)?;
        take.f64("radar.unambiguous_velocity", &mut cfg.radar.unambiguous_radial_velocity)?;
        take.f64("radar.velocity_resolution", &mut cfg.radar.radial_velocity_resolution)?;
        take.f64("radar.update_rate", &mut cfg.radar.update_rate)?;

        if let Some(n) = take.opt_usize("mounts")? {
            let mut mounts = Vec::new();
            for i in 0..n {
                let key = format!("mount.{i}");
                let val = take.required(&key)?;
                let nums = parse_floats(&key, &val, 3)?;
                mounts.push(SensorMount::new(nums[0], nums[1], nums[2].to_radians()));
            }
            cfg.mounts = mounts;
        }

        take.f64("sim.cube_range_res", &mut cfg.sim.cube_range_res)?;
        take.f64("sim.cube_max_range", &mut cfg.sim.cube_max_range)?;
        take.f64("sim.cube_doppler_res", &mut cfg.sim.cube_doppler_res)?;
        take.f64("sim.noise_power", &mut cfg.sim.noise_power)?;
        take.f64("sim.range_sigma", &mut cfg.sim.range_sigma)?;
        take.deg("sim.azimuth_sigma_deg", &mut cfg.sim.azimuth_sigma)?;
        take.f64("sim.vr_sigma", &mut cfg.sim.vr_sigma)?;
        take.f64("sim.outlier_rate", &mut cfg.sim.outlier_rate)?;
        take.bool("sim.occlusion", &mut cfg.sim.occlusion)?;

        take.usize("scene.n_poles", &mut cfg.scene.n_poles)?;
        take.f64("scene.pole_rcs", &mut cfg.scene.pole_rcs)?;
        take.usize("scene.n_clutter", &mut cfg.scene.n_clutter)?;
        take.f64("scene.clutter_rcs", &mut cfg.scene.clutter_rcs)?;
        if let Some(v) = take.opt("scene.region")? {
            let n = parse_floats("scene.region", &v, 4)?;
            cfg.scene.region = (Vector2::new(n[0], n[1]), Vector2::new(n[2], n[3]));
        }
        take.f64("scene.sample_spacing", &mut cfg.scene.sample_spacing)?;
        take.f64("scene.detection_spacing", &mut cfg.scene.detection_spacing)?;
        if let Some(n) = take.opt_usize("scene.fences")? {
            let mut fences = Vec::new();
            for i in 0..n {
                let key = format!("scene.fence.{i}");
                let val = take.required(&key)?;
                let nums = parse_floats(&key, &val, 5)?;
                fences.push(FenceSpec::new(
                    Vector2::new(nums[0], nums[1]),
                    Vector2::new(nums[2], nums[3]),
                    nums[4],
                ));
            }
            cfg.scene.fences = fences;
        }

        take.f64("traj.rate_hz", &mut cfg.trajectory.rate_hz)?;
        if let Some(v) = take.opt("traj.start")? {
            let n = parse_floats("traj.start", &v, 3)?;
            cfg.trajectory.start = Pose2::new(n[0], n[1], n[2].to_radians());
        }
        take.f64("traj.v_start", &mut cfg.trajectory.v_start)?;
        take.f64("traj.jitter_accel", &mut cfg.trajectory.jitter_accel)?;
        if let Some(n) = take.opt_usize("traj.segments")? {
            let mut segments = Vec::new();
            for i in 0..n {
                let key = format!("traj.segment.{i}");
                let val = take.required(&key)?;
                let nums = parse_floats(&key, &val, 3)?;
                segments.push(MotionSegment { duration: nums[0], v_end: nums[1], omega: nums[2] });
            }
            cfg.trajectory.segments = segments;
        }

        take.f64("grid.cell_size", &mut cfg.cell_size)?;
        if let Some(v) = take.opt("grid.origin")? {
            let n = parse_floats("grid.origin", &v, 2)?;
            cfg.grid_origin = Vector2::new(n[0], n[1]);
            cfg.auto_grid = false;
        }
        take.usize("grid.width", &mut cfg.grid_width)?;
        take.usize("grid.height", &mut cfg.grid_height)?;
        take.u64("grid.window_frames", &mut cfg.window_frames)?;
        take.f64("grid.power_floor", &mut cfg.power_floor)?;

        take.usize("pcfar.guard_radius", &mut cfg.pcfar.guard_radius)?;
        take.usize("pcfar.train_radius", &mut cfg.pcfar.train_radius)?;
        take.f64("pcfar.threshold", &mut cfg.pcfar.threshold)?;
        take.usize("pcfar.min_area", &mut cfg.pcfar.min_area)?;
        take.u64("pcfar.min_samples", &mut cfg.pcfar.min_samples)?;
        take.f64("pcfar.sigma_floor", &mut cfg.pcfar.sigma_floor)?;

        take.usize("ridge.median_radius", &mut cfg.ridge.median_radius)?;
        take.f64("ridge.sigma", &mut cfg.ridge.ridge_sigma)?;
        take.f64("ridge.threshold_factor", &mut cfg.ridge.threshold_factor)?;
        take.f64("ridge.rho_res", &mut cfg.ridge.rho_res)?;
        take.f64("ridge.theta_res_deg", &mut cfg.ridge.theta_res_deg)?;
        take.f64("ridge.min_length", &mut cfg.ridge.min_length_m)?;
        take.f64("ridge.max_gap", &mut cfg.ridge.max_gap_m)?;

        take.f64("consensus.d_point", &mut cfg.consensus_d_point)?;
        take.usize("consensus.n_point", &mut cfg.consensus_n_point)?;
        take.f64("consensus.d_ch", &mut cfg.line_consensus.d_ch_thres)?;
        take.f64("consensus.d_prj", &mut cfg.line_consensus.d_prj_thres)?;
        take.f64("consensus.rdp_tol", &mut cfg.line_consensus.rdp_tol)?;
        take.f64("consensus.trim_tol", &mut cfg.line_consensus.trim_tol)?;

        take.f64("match.point_gate", &mut cfg.match_params.point_gate)?;
        take.f64("match.line_d_ch_gate", &mut cfg.match_params.line_d_ch_gate)?;
        take.f64("match.line_d_prj_gate", &mut cfg.match_params.line_d_prj_gate)?;
        take.f64("match.unmatched_cost", &mut cfg.match_params.unmatched_cost)?;
        take.f64("match.candidate_gate", &mut cfg.match_params.candidate_gate)?;
        take.f64("match.local_window_s", &mut cfg.local_window_s)?;
        take.f64("match.local_cluster_d", &mut cfg.local_cluster_d)?;
        take.usize("match.smooth_horizon", &mut cfg.smooth_horizon)?;
        take.u32("match.smooth_min_count", &mut cfg.smooth_min_count)?;

        take.f64("noise.sigma_lp", &mut cfg.noise.sigma_lp)?;
        take.f64("noise.sigma_ll", &mut cfg.noise.sigma_ll)?;
        take.f64("noise.sigma_xx_t", &mut cfg.noise.sigma_xx_t)?;
        take.f64("noise.sigma_xx_phi", &mut cfg.noise.sigma_xx_phi)?;
        take.f64("noise.sigma_xlp_r", &mut cfg.noise.sigma_xlp_r)?;
        take.f64("noise.sigma_xlp_phi", &mut cfg.noise.sigma_xlp_phi)?;
        take.f64("noise.sigma_fallback_t", &mut cfg.noise.sigma_fallback_t)?;
        take.f64("noise.sigma_fallback_phi", &mut cfg.noise.sigma_fallback_phi)?;

        take.usize("graph.window_poses", &mut cfg.graph_window_poses)?;
        take.u64("graph.line_cadence", &mut cfg.line_cadence)?;
        take.usize("graph.min_point_matches", &mut cfg.min_point_matches)?;
        take.usize("graph.min_constraint", &mut cfg.min_constraint)?;

        take.f64("ego.inlier_threshold", &mut cfg.ego.inlier_threshold)?;
        take.usize("ego.max_iterations", &mut cfg.ego.max_iterations)?;
        take.f64("ego.early_exit_ratio", &mut cfg.ego.early_exit_ratio)?;
        take.f64("ego.v_max", &mut cfg.ego.v_max)?;
        take.f64("ego.omega_max", &mut cfg.ego.omega_max)?;
        take.f64("ego.a_max", &mut cfg.ego.a_max)?;
        take.f64("ego.alpha_max", &mut cfg.ego.alpha_max)?;
        take.f64("ego.v_ego_max", &mut cfg.v_ego_max)?;
        take.bool("ego.nyquist_augmentation", &mut cfg.nyquist_augmentation)?;

        if let Some(v) = take.opt("pol.config")? {
            cfg.pol = PolSelection::parse(&v)
                .map_err(|msg| ConfigError::BadValue { key: "pol.config".into(), msg })?;
        }
        take.u64("run.seed", &mut cfg.seed)?;
        take.usize("run.drives", &mut cfg.drives)?;
        take.usize("run.loo_drive", &mut cfg.loo_drive)?;

        if let Some(key) = kv.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        Ok(cfg)
    }

    /// Writes the configuration as a fully commented `key = value` file.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut w = |line: &str| {
            s.push_str(line);
            s.push('\n');
        };
        w("# polaris run configuration (flat key = value, `#` comments)");
        w("");
        w("# --- radar data sheet ---");
        w(&format!("radar.max_range = {}                # m", self.radar.max_range));
        w(&format!("radar.range_resolution = {}         # m", self.radar.range_resolution));
        w(&format!("radar.fov_azimuth_deg = {}          # +- deg", self.radar.fov_azimuth.to_degrees()));
        w(&format!("radar.azimuth_resolution_deg = {}", self.radar.azimuth_resolution.to_degrees()));
        w(&format!("radar.unambiguous_velocity = {}     # m/s", self.radar.unambiguous_radial_velocity));
        w(&format!("radar.velocity_resolution = {}      # m/s", self.radar.radial_velocity_resolution));
        w(&format!("radar.update_rate = {}              # Hz", self.radar.update_rate));
        w("");
        w("# --- sensor mounts: `x y yaw_deg` in the vehicle frame ---");
        w(&format!("mounts = {}", self.mounts.len()));
        for (i, m) in self.mounts.iter().enumerate() {
            w(&format!("mount.{i} = {} {} {}", m.position.x, m.position.y, m.yaw.to_degrees()));
        }
        w("");
        w("# --- simulation (cube resolution, noise, outliers) ---");
        w(&format!("sim.cube_range_res = {}", self.sim.cube_range_res));
        w(&format!("sim.cube_max_range = {}", self.sim.cube_max_range));
        w(&format!("sim.cube_doppler_res = {}", self.sim.cube_doppler_res));
        w(&format!("sim.noise_power = {}                # per-channel complex noise power", self.sim.noise_power));
        w(&format!("sim.range_sigma = {}                # detection range noise (m)", self.sim.range_sigma));
        w(&format!("sim.azimuth_sigma_deg = {}          # detection azimuth noise (deg)", self.sim.azimuth_sigma.to_degrees()));
        w(&format!("sim.vr_sigma = {}                   # detection Doppler noise (m/s)", self.sim.vr_sigma));
        w(&format!("sim.outlier_rate = {}               # dynamic-object detection fraction", self.sim.outlier_rate));
        w(&format!("sim.occlusion = {}                  # first-hit occlusion toggle", self.sim.occlusion));
        w("");
        w("# --- scene generation ---");
        w(&format!("scene.n_poles = {}", self.scene.n_poles));
        w(&format!("scene.pole_rcs = {}", self.scene.pole_rcs));
        w(&format!("scene.n_clutter = {}", self.scene.n_clutter));
        w(&format!("scene.clutter_rcs = {}", self.scene.clutter_rcs));
        w(&format!(
            "scene.region = {} {} {} {}          # x0 y0 x1 y1",
            self.scene.region.0.x, self.scene.region.0.y, self.scene.region.1.x, self.scene.region.1.y
        ));
        w(&format!("scene.sample_spacing = {}           # cube sampling along lines (m)", self.scene.sample_spacing));
        w(&format!("scene.detection_spacing = {}        # detection sampling along lines (m)", self.scene.detection_spacing));
        w(&format!("scene.fences = {}", self.scene.fences.len()));
        for (i, f) in self.scene.fences.iter().enumerate() {
            w(&format!(
                "scene.fence.{i} = {} {} {} {} {}    # xs ys xe ye post_spacing",
                f.start.x, f.start.y, f.end.x, f.end.y, f.post_spacing
            ));
        }
        w("");
        w("# --- trajectory: segments of `duration v_end omega` ---");
        w(&format!("traj.rate_hz = {}", self.trajectory.rate_hz));
        w(&format!(
            "traj.start = {} {} {}               # x y yaw_deg",
            self.trajectory.start.x,
            self.trajectory.start.y,
            self.trajectory.start.yaw.to_degrees()
        ));
        w(&format!("traj.v_start = {}", self.trajectory.v_start));
        w(&format!("traj.jitter_accel = {}              # random accel jitter (m/s^2)", self.trajectory.jitter_accel));
        w(&format!("traj.segments = {}", self.trajectory.segments.len()));
        for (i, seg) in self.trajectory.segments.iter().enumerate() {
            w(&format!("traj.segment.{i} = {} {} {}", seg.duration, seg.v_end, seg.omega));
        }
        w("");
        w("# --- gridmap ---");
        w(&format!("grid.cell_size = {}                 # m", self.cell_size));
        if !self.auto_grid {
            w(&format!("grid.origin = {} {}", self.grid_origin.x, self.grid_origin.y));
        } else {
            w("# grid.origin omitted: extent derived from the trajectory");
        }
        w(&format!("grid.width = {}                     # cells (0 = auto)", self.grid_width));
        w(&format!("grid.height = {}", self.grid_height));
        w(&format!("grid.window_frames = {}             # localization sliding window", self.window_frames));
        w(&format!("grid.power_floor = {}               # negative = 3x noise floor", self.power_floor));
        w("");
        w("# --- point-landmark detector ---");
        w(&format!("pcfar.guard_radius = {}", self.pcfar.guard_radius));
        w(&format!("pcfar.train_radius = {}", self.pcfar.train_radius));
        w(&format!("pcfar.threshold = {}                # calibrated score, homogeneous = 1", self.pcfar.threshold));
        w(&format!("pcfar.min_area = {}", self.pcfar.min_area));
        w(&format!("pcfar.min_samples = {}", self.pcfar.min_samples));
        w(&format!("pcfar.sigma_floor = {}", self.pcfar.sigma_floor));
        w("");
        w("# --- line-landmark extractor ---");
        w(&format!("ridge.median_radius = {}            # 1 = 3x3 median", self.ridge.median_radius));
        w(&format!("ridge.sigma = {}                    # Hessian smoothing (cells)", self.ridge.ridge_sigma));
        w(&format!("ridge.threshold_factor = {}         # x median nonzero ridgeness", self.ridge.threshold_factor));
        w(&format!("ridge.rho_res = {}                  # Hough distance bin (cells)", self.ridge.rho_res));
        w(&format!("ridge.theta_res_deg = {}", self.ridge.theta_res_deg));
        w(&format!("ridge.min_length = {}               # m", self.ridge.min_length_m));
        w(&format!("ridge.max_gap = {}                  # m", self.ridge.max_gap_m));
        w("");
        w("# --- multi-drive consensus ---");
        w(&format!("consensus.d_point = {}              # m", self.consensus_d_point));
        w(&format!("consensus.n_point = {}              # min observations", self.consensus_n_point));
        w(&format!("consensus.d_ch = {}                 # hull distance gate (m)", self.line_consensus.d_ch_thres));
        w(&format!("consensus.d_prj = {}                # projection gap gate (m)", self.line_consensus.d_prj_thres));
        w(&format!("consensus.rdp_tol = {}", self.line_consensus.rdp_tol));
        w(&format!("consensus.trim_tol = {}", self.line_consensus.trim_tol));
        w("");
        w("# --- map matching ---");
        w(&format!("match.point_gate = {}               # m", self.match_params.point_gate));
        w(&format!("match.line_d_ch_gate = {}", self.match_params.line_d_ch_gate));
        w(&format!("match.line_d_prj_gate = {}", self.match_params.line_d_prj_gate));
        w(&format!("match.unmatched_cost = {}", self.match_params.unmatched_cost));
        w(&format!("match.candidate_gate = {}           # m around the prior", self.match_params.candidate_gate));
        w(&format!("match.local_window_s = {}", self.local_window_s));
        w(&format!("match.local_cluster_d = {}", self.local_cluster_d));
        w(&format!("match.smooth_horizon = {}           # frames", self.smooth_horizon));
        w(&format!("match.smooth_min_count = {}", self.smooth_min_count));
        w("");
        w("# --- factor information (standard deviations) ---");
        w(&format!("noise.sigma_lp = {}                 # point map prior (m)", self.noise.sigma_lp));
        w(&format!("noise.sigma_ll = {}                 # line map prior orthogonal (m)", self.noise.sigma_ll));
        w(&format!("noise.sigma_xx_t = {}               # odometry translation (m)", self.noise.sigma_xx_t));
        w(&format!("noise.sigma_xx_phi = {}             # odometry rotation (rad)", self.noise.sigma_xx_phi));
        w(&format!("noise.sigma_xlp_r = {}              # observation range (m)", self.noise.sigma_xlp_r));
        w(&format!("noise.sigma_xlp_phi = {}            # observation bearing (rad)", self.noise.sigma_xlp_phi));
        w(&format!("noise.sigma_fallback_t = {}", self.noise.sigma_fallback_t));
        w(&format!("noise.sigma_fallback_phi = {}", self.noise.sigma_fallback_phi));
        w("");
        w("# --- pose graph ---");
        w(&format!("graph.window_poses = {}", self.graph_window_poses));
        w(&format!("graph.line_cadence = {}             # line factors every Nth frame", self.line_cadence));
        w(&format!("graph.min_point_matches = {}        # below this, lines every frame", self.min_point_matches));
        w(&format!("graph.min_constraint = {}           # below this, fallback pose prior", self.min_constraint));
        w("");
        w("# --- ego-motion estimation ---");
        w(&format!("ego.inlier_threshold = {}           # m/s", self.ego.inlier_threshold));
        w(&format!("ego.max_iterations = {}", self.ego.max_iterations));
        w(&format!("ego.early_exit_ratio = {}", self.ego.early_exit_ratio));
        w(&format!("ego.v_max = {}", self.ego.v_max));
        w(&format!("ego.omega_max = {}", self.ego.omega_max));
        w(&format!("ego.a_max = {}                      # m/s^2 plausibility", self.ego.a_max));
        w(&format!("ego.alpha_max = {}                  # rad/s^2 plausibility", self.ego.alpha_max));
        w(&format!("ego.v_ego_max = {}                  # sizes the Nyquist zone range", self.v_ego_max));
        w(&format!("ego.nyquist_augmentation = {}", self.nyquist_augmentation));
        w("");
        w("# --- run ---");
        w(&format!("pol.config = {}                     # full|dual-LL.RR|dual-HH.VV|single-LR|single-RR|single-HH", self.pol.name()));
        w(&format!("run.seed = {}", self.seed));
        w(&format!("run.drives = {}", self.drives));
        w(&format!("run.loo_drive = {}                  # localization drive (left out of the map)", self.loo_drive));
        s
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

struct Taker<'a> {
    kv: &'a mut BTreeMap<String, String>,
}

impl Taker<'_> {
    fn opt(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        Ok(self.kv.remove(key))
    }

    fn required(&mut self, key: &str) -> Result<String, ConfigError> {
        self.kv.remove(key).ok_or_else(|| ConfigError::BadValue {
            key: key.to_string(),
            msg: "missing required key".into(),
        })
    }

    fn f64(&mut self, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.kv.remove(key) {
            *slot = v.parse().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: format!("{e}"),
            })?;
        }
        Ok(())
    }

    fn deg(&mut self, key: &str, slot_rad: &mut f64) -> Result<(), ConfigError> {
        let mut deg = slot_rad.to_degrees();
        self.f64(key, &mut deg)?;
        *slot_rad = deg.to_radians();
        Ok(())
    }

    fn usize(&mut self, key: &str, slot: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = self.kv.remove(key) {
            *slot = v.parse().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: format!("{e}"),
            })?;
        }
        Ok(())
    }

    fn u64(&mut self, key: &str, slot: &mut u64) -> Result<(), ConfigError> {
        if let Some(v) = self.kv.remove(key) {
            *slot = v.parse().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: format!("{e}"),
            })?;
        }
        Ok(())
    }

    fn u32(&mut self, key: &str, slot: &mut u32) -> Result<(), ConfigError> {
        if let Some(v) = self.kv.remove(key) {
            *slot = v.parse().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: format!("{e}"),
            })?;
        }
        Ok(())
    }

    fn bool(&mut self, key: &str, slot: &mut bool) -> Result<(), ConfigError> {
        if let Some(v) = self.kv.remove(key) {
            *slot = match v.as_str() {
                "true" | "1" | "yes" | "on" => true,
                "false" | "0" | "no" | "off" => false,
                other => {
                    return Err(ConfigError::BadValue {
                        key: key.to_string(),
                        msg: format!("not a boolean: {other}"),
                    })
                }
            };
        }
        Ok(())
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.kv.remove(key) {
            Some(v) => Ok(Some(v.parse().map_err(|e| ConfigError::BadValue {
                key: key.to_string(),
                msg: format!("{e}"),
            })?)),
            None => Ok(None),
        }
    }
}

fn parse_floats(key: &str, value: &str, expect: usize) -> Result<Vec<f64>, ConfigError> {
    let nums: Result<Vec<f64>, _> = value.split_whitespace().map(str::parse).collect();
    let nums = nums.map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        msg: format!("{e}"),
    })?;
    if nums.len() != expect {
        return Err(ConfigError::BadValue {
            key: key.to_string(),
            msg: format!("expected {expect} numbers, got {}", nums.len()),
        });
    }
    Ok(nums)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_roundtrips() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.radar.max_range, cfg.radar.max_range);
        assert_eq!(back.mounts.len(), cfg.mounts.len());
        assert_eq!(back.pol, cfg.pol);
        assert_eq!(back.seed, cfg.seed);
        assert_eq!(back.window_frames, cfg.window_frames);
        assert_eq!(back.noise.sigma_xlp_r, cfg.noise.sigma_xlp_r);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::parse("bogus.key = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "bogus.key"));
    }

    #[test]
    fn syntax_and_value_errors() {
        assert!(matches!(
            RunConfig::parse("radar.max_range 80\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("radar.max_range = eighty\n"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn comments_and_overrides() {
        let cfg = RunConfig::parse(
            "# comment\nradar.max_range = 40 # inline comment\npol.config = single-RR\n",
        )
        .unwrap();
        assert_eq!(cfg.radar.max_range, 40.0);
        assert_eq!(cfg.pol, PolSelection::SingleRr);
    }

    #[test]
    fn pol_selection_applies_transform_and_subset() {
        use crate::polarimetry::C64;
        let full = PolarizationBasis::full_circular();
        // Odd-bounce signature: circular cross channels only.
        let omega = ScatteringVector::new(
            full,
            vec![
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let hh = PolSelection::SingleHh.apply(&omega);
        assert_eq!(hh.values.len(), 1);
        assert!(hh.values[0].norm() > 0.9, "odd bounce shows up in HH");
        let rr = PolSelection::SingleRr.apply(&omega);
        assert!(rr.values[0].norm() < 1e-12, "odd bounce invisible in RR");
        let dual = PolSelection::DualHhVv.apply(&omega);
        assert_eq!(dual.values.len(), 2);
        assert_eq!(PolSelection::Full.apply(&omega).values.len(), 4);
    }

    #[test]
    fn effective_power_floor_auto() {
        let mut cfg = RunConfig::default();
        cfg.sim.noise_power = 0.01;
        cfg.power_floor = -1.0;
        assert!((cfg.effective_power_floor() - 0.12).abs() < 1e-12);
        cfg.power_floor = 0.5;
        assert_eq!(cfg.effective_power_floor(), 0.5);
    }

    #[test]
    fn ego_params_zone_range() {
        let mut cfg = RunConfig::default();
        cfg.v_ego_max = 12.0;
        assert_eq!(cfg.ego_params().zone_range, (-2, 2));
        cfg.nyquist_augmentation = false;
        assert_eq!(cfg.ego_params().zone_range, (0, 0));
    }
}
