//! Deterministic synthetic world and polarimetric radar measurement
//! generator.
//!
//! Scenes are built from fence segments with periodic posts, isolated
//! poles, and clutter. Frames are rendered at the detection plus coarse
//! data-cube level: every visible scatterer deposits its complex channel
//! amplitudes into the range/azimuth/Doppler bin it falls into, and a
//! thinned detection list drives the ego-motion estimation. All outputs
//! are pure functions of `(scene, trajectory sample, seed)`.

use crate::egomotion::{fold_velocity, predict_radial_velocity, MotionState, RadarDetection};
use crate::polarimetry::{PolarizationBasis, ScatteringVector, C64};
use crate::se2::Pose2;
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Radar sensor parameters (defaults follow a 78 GHz polarimetric
/// prototype: 80 m, 7.5 cm range resolution, +-60 deg at ~3 deg, +-5 m/s
/// unambiguous Doppler at 0.15 m/s, 10 Hz).
#[derive(Debug, Clone)]
pub struct RadarSpec {
    pub max_range: f64,
    pub range_resolution: f64,
    /// Half field of view in radians (the FoV spans +-this value).
    pub fov_azimuth: f64,
    pub azimuth_resolution: f64,
    pub unambiguous_radial_velocity: f64,
    pub radial_velocity_resolution: f64,
    pub update_rate: f64,
    pub basis: PolarizationBasis,
}

impl Default for RadarSpec {
    fn default() -> Self {
        Self {
            max_range: 80.0,
            range_resolution: 0.075,
            fov_azimuth: 60f64.to_radians(),
            azimuth_resolution: 3f64.to_radians(),
            unambiguous_radial_velocity: 5.0,
            radial_velocity_resolution: 0.15,
            update_rate: 10.0,
            basis: PolarizationBasis::full_circular(),
        }
    }
}

/// Sensor pose in the vehicle frame (rear-axle origin).
#[derive(Debug, Clone, Copy)]
pub struct SensorMount {
    pub position: Vector2<f64>,
    pub yaw: f64,
}

impl SensorMount {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { position: Vector2::new(x, y), yaw }
    }

    pub fn as_pose(&self) -> Pose2 {
        Pose2::new(self.position.x, self.position.y, self.yaw)
    }

    /// Default layout: one front-center sensor plus two front corners at
    /// +-45 degrees.
    pub fn default_layout() -> Vec<SensorMount> {
        vec![
            SensorMount::new(3.6, 0.0, 0.0),
            SensorMount::new(3.4, 0.8, 45f64.to_radians()),
            SensorMount::new(3.4, -0.8, -45f64.to_radians()),
        ]
    }
}

/// Scattering parity of a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScattererKind {
    /// Trihedral-like: circular cross-polar channels (LR, RL).
    OddBounce,
    /// Dihedral-like: circular co-polar channels (LL, RR).
    EvenBounce,
    /// Energy in all channels.
    Mixed,
}

impl ScattererKind {
    /// Per-channel power split `(LL, LR, RL, RR)` for unit total RCS.
    pub fn channel_split(self) -> [f64; 4] {
        match self {
            ScattererKind::OddBounce => [0.0, 0.5, 0.5, 0.0],
            ScattererKind::EvenBounce => [0.5, 0.0, 0.0, 0.5],
            ScattererKind::Mixed => [0.25, 0.25, 0.25, 0.25],
        }
    }
}

/// Point or line target in the world.
#[derive(Debug, Clone)]
pub struct Scatterer {
    pub position: Vector2<f64>,
    pub kind: ScattererKind,
    /// Per-channel RCS in the circular basis `(LL, LR, RL, RR)`.
    pub rcs: [f64; 4],
    /// Line targets carry their segment; `position` is the midpoint.
    pub extent: Option<(Vector2<f64>, Vector2<f64>)>,
}

impl Scatterer {
    pub fn point(position: Vector2<f64>, kind: ScattererKind, total_rcs: f64) -> Self {
        let split = kind.channel_split();
        Self {
            position,
            kind,
            rcs: [
                split[0] * total_rcs,
                split[1] * total_rcs,
                split[2] * total_rcs,
                split[3] * total_rcs,
            ],
            extent: None,
        }
    }

    pub fn segment(start: Vector2<f64>, end: Vector2<f64>, kind: ScattererKind, rcs_per_sample: f64) -> Self {
        let split = kind.channel_split();
        Self {
            position: (start + end) / 2.0,
            kind,
            rcs: [
                split[0] * rcs_per_sample,
                split[1] * rcs_per_sample,
                split[2] * rcs_per_sample,
                split[3] * rcs_per_sample,
            ],
            extent: Some((start, end)),
        }
    }

    /// Complex channel amplitudes (sqrt of per-channel RCS, common phase 0).
    fn amplitudes(&self) -> [C64; 4] {
        [
            C64::new(self.rcs[0].sqrt(), 0.0),
            C64::new(self.rcs[1].sqrt(), 0.0),
            C64::new(self.rcs[2].sqrt(), 0.0),
            C64::new(self.rcs[3].sqrt(), 0.0),
        ]
    }
}

/// A fence line with optional periodic posts.
#[derive(Debug, Clone)]
pub struct FenceSpec {
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    /// Post spacing in meters; 0 disables posts.
    pub post_spacing: f64,
    pub post_kind: ScattererKind,
    pub fence_rcs: f64,
    pub post_rcs: f64,
}

impl FenceSpec {
    pub fn new(start: Vector2<f64>, end: Vector2<f64>, post_spacing: f64) -> Self {
        Self {
            start,
            end,
            post_spacing,
            post_kind: ScattererKind::EvenBounce,
            fence_rcs: 1.0,
            post_rcs: 1.0,
        }
    }
}

/// Scene generator parameters.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub fences: Vec<FenceSpec>,
    /// Isolated odd-bounce poles placed inside `region`.
    pub n_poles: usize,
    pub pole_rcs: f64,
    /// Weak mixed-scattering clutter points inside `region`.
    pub n_clutter: usize,
    pub clutter_rcs: f64,
    /// Placement region `(min, max)` for random objects.
    pub region: (Vector2<f64>, Vector2<f64>),
    /// Sample spacing along line targets for cube deposits.
    pub sample_spacing: f64,
    /// Sample spacing along line targets for the detection list.
    pub detection_spacing: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            fences: Vec::new(),
            n_poles: 0,
            pole_rcs: 1.0,
            n_clutter: 0,
            clutter_rcs: 0.05,
            region: (Vector2::new(0.0, -20.0), Vector2::new(100.0, 20.0)),
            sample_spacing: 0.075,
            detection_spacing: 0.4,
        }
    }
}

/// World model: discrete scatterers plus pre-sampled line points.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
    /// Fine sampling (scatterer index per sample) used for cube deposits.
    cube_samples: Vec<(Vector2<f64>, usize)>,
    /// Coarse sampling used for the detection list.
    det_samples: Vec<(Vector2<f64>, usize)>,
}

impl Scene {
    pub fn from_scatterers(scatterers: Vec<Scatterer>, spec: &SceneSpec) -> Self {
        let mut scene = Scene { scatterers, ..Default::default() };
        scene.resample(spec.sample_spacing, spec.detection_spacing);
        scene
    }

    fn resample(&mut self, cube_spacing: f64, det_spacing: f64) {
        self.cube_samples.clear();
        self.det_samples.clear();
        for (idx, s) in self.scatterers.iter().enumerate() {
            match s.extent {
                None => {
                    self.cube_samples.push((s.position, idx));
                    self.det_samples.push((s.position, idx));
                }
                Some((a, b)) => {
                    for p in sample_segment(a, b, cube_spacing) {
                        self.cube_samples.push((p, idx));
                    }
                    for p in sample_segment(a, b, det_spacing) {
                        self.det_samples.push((p, idx));
                    }
                }
            }
        }
    }

    pub fn cube_samples(&self) -> &[(Vector2<f64>, usize)] {
        &self.cube_samples
    }

    pub fn det_samples(&self) -> &[(Vector2<f64>, usize)] {
        &self.det_samples
    }
}

fn sample_segment(a: Vector2<f64>, b: Vector2<f64>, spacing: f64) -> Vec<Vector2<f64>> {
    let len = (b - a).norm();
    let n = (len / spacing).ceil().max(1.0) as usize;
    (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
}

/// Builds a deterministic scene: fences with periodic posts, isolated
/// poles, and clutter, all seeded.
pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scatterers = Vec::new();
    for f in &spec.fences {
        scatterers.push(Scatterer::segment(f.start, f.end, ScattererKind::OddBounce, f.fence_rcs));
        if f.post_spacing > 0.0 {
            let len = (f.end - f.start).norm();
            let n = (len / f.post_spacing).round() as usize;
            for i in 0..=n {
                let p = f.start + (f.end - f.start) * (i as f64 * f.post_spacing / len).min(1.0);
                scatterers.push(Scatterer::point(p, f.post_kind, f.post_rcs));
            }
        }
    }
    let (lo, hi) = spec.region;
    for _ in 0..spec.n_poles {
        let p = Vector2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        scatterers.push(Scatterer::point(p, ScattererKind::OddBounce, spec.pole_rcs));
    }
    for _ in 0..spec.n_clutter {
        let p = Vector2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        scatterers.push(Scatterer::point(p, ScattererKind::Mixed, spec.clutter_rcs));
    }
    Scene::from_scatterers(scatterers, spec)
}

/// Ground-truth pose quality flag of the reference system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtQuality {
    /// Carrier-phase solution, full precision.
    Carrier,
    /// Degraded solution.
    Std,
}

/// One trajectory sample: time, pose, motion, and ground-truth quality.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose2,
    pub motion: MotionState,
    pub gt_quality: GtQuality,
}

/// Constant-acceleration motion segment: the forward speed ramps linearly
/// to `v_end` over `duration` while the yaw rate stays constant.
#[derive(Debug, Clone, Copy)]
pub struct MotionSegment {
    pub duration: f64,
    pub v_end: f64,
    pub omega: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectorySpec {
    pub rate_hz: f64,
    pub start: Pose2,
    pub v_start: f64,
    pub segments: Vec<MotionSegment>,
    /// Random per-step acceleration jitter (m/s^2 std, 0 = deterministic).
    pub jitter_accel: f64,
    /// Time windows with degraded ground-truth quality.
    pub std_quality_windows: Vec<(f64, f64)>,
}

impl TrajectorySpec {
    pub fn constant(v: f64, omega: f64, duration: f64) -> Self {
        Self {
            rate_hz: 10.0,
            start: Pose2::identity(),
            v_start: v,
            segments: vec![MotionSegment { duration, v_end: v, omega }],
            jitter_accel: 0.0,
            std_quality_windows: Vec::new(),
        }
    }
}

/// Integrates a piecewise-constant-acceleration unicycle path. Samples are
/// emitted at `rate_hz` including both endpoints of the total duration.
pub fn generate_trajectory(seed: u64, spec: &TrajectorySpec) -> Vec<TrajectorySample> {
    if spec.segments.is_empty() {
        return vec![TrajectorySample {
            t: 0.0,
            pose: spec.start,
            motion: MotionState::new(spec.v_start, 0.0, 0.0),
            gt_quality: GtQuality::Carrier,
        }];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / spec.rate_hz;
    let total: f64 = spec.segments.iter().map(|s| s.duration).sum();
    let n_steps = (total * spec.rate_hz).round() as usize;
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut pose = spec.start;
    let mut v = spec.v_start;
    let quality = |t: f64| {
        if spec.std_quality_windows.iter().any(|&(a, b)| t >= a && t < b) {
            GtQuality::Std
        } else {
            GtQuality::Carrier
        }
    };

    let segment_at = |t: f64| -> (usize, f64) {
        let mut acc = 0.0;
        for (i, s) in spec.segments.iter().enumerate() {
            if t < acc + s.duration - 1e-9 {
                return (i, t - acc);
            }
            acc += s.duration;
        }
        (spec.segments.len() - 1, spec.segments.last().map(|s| s.duration).unwrap_or(0.0))
    };

    // Speed at the start of each segment follows the ramp chain.
    let mut seg_v_start = Vec::with_capacity(spec.segments.len());
    let mut v_run = spec.v_start;
    for s in &spec.segments {
        seg_v_start.push(v_run);
        v_run = s.v_end;
    }

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let (si, _) = segment_at(t.min(total - 1e-9).max(0.0));
        let seg = &spec.segments[si];
        samples.push(TrajectorySample {
            t,
            pose,
            motion: MotionState::new(v, seg.omega, t),
            gt_quality: quality(t),
        });
        if k == n_steps {
            break;
        }
        // Advance with midpoint speed over the step.
        let (si2, local) = segment_at(t + 1e-9);
        let seg2 = &spec.segments[si2];
        let ramp = if seg2.duration > 1e-9 {
            (seg2.v_end - seg_v_start[si2]) / seg2.duration
        } else {
            0.0
        };
        let mut v_next = seg_v_start[si2] + ramp * (local + dt).min(seg2.duration);
        if spec.jitter_accel > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            v_next = (v_next + z * spec.jitter_accel * dt).max(0.0);
        }
        let v_mid = 0.5 * (v + v_next);
        pose = pose.compose(&Pose2::from_twist(v_mid, seg2.omega, dt));
        v = v_next;
    }
    samples
}

/// Simulation tuning knobs independent of the radar data sheet.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Cube range bin size; defaults to the radar range resolution.
    pub cube_range_res: f64,
    /// Cube range extent; defaults to the radar maximum range.
    pub cube_max_range: f64,
    /// Cube Doppler bin size; defaults to the radial velocity resolution.
    pub cube_doppler_res: f64,
    /// Complex noise power per channel added to every cube cell.
    pub noise_power: f64,
    /// Detection range noise (m).
    pub range_sigma: f64,
    /// Detection azimuth noise (rad).
    pub azimuth_sigma: f64,
    /// Detection radial-velocity noise (m/s).
    pub vr_sigma: f64,
    /// Fraction of extra dynamic-object outlier detections.
    pub outlier_rate: f64,
    /// First-hit occlusion along azimuth bins.
    pub occlusion: bool,
}

impl SimConfig {
    pub fn for_radar(radar: &RadarSpec) -> Self {
        Self {
            cube_range_res: radar.range_resolution,
            cube_max_range: radar.max_range,
            cube_doppler_res: radar.radial_velocity_resolution,
            noise_power: 0.01, // 20 dB below a unit-RCS target
            range_sigma: 0.05,
            azimuth_sigma: 0.5f64.to_radians(),
            vr_sigma: 0.03,
            outlier_rate: 0.0,
            occlusion: false,
        }
    }
}

/// Range x azimuth x Doppler grid of scattering vectors for one frame.
pub struct DataCube {
    pub n_range: usize,
    pub n_azimuth: usize,
    pub n_doppler: usize,
    pub range_res: f64,
    pub azimuth_min: f64,
    pub azimuth_res: f64,
    pub doppler_res: f64,
    pub v_unamb: f64,
    pub basis: PolarizationBasis,
    /// Flattened `[range][azimuth][doppler][channel]`.
    pub data: Vec<C64>,
}

impl DataCube {
    fn new(radar: &RadarSpec, cfg: &SimConfig) -> Self {
        let n_range = (cfg.cube_max_range / cfg.cube_range_res).ceil() as usize;
        let n_azimuth = (2.0 * radar.fov_azimuth / radar.azimuth_resolution).round() as usize;
        let v_unamb = radar.unambiguous_radial_velocity;
        let n_doppler = (2.0 * v_unamb / cfg.cube_doppler_res).ceil() as usize;
        let q = radar.basis.q();
        Self {
            n_range,
            n_azimuth,
            n_doppler,
            range_res: cfg.cube_range_res,
            azimuth_min: -radar.fov_azimuth,
            azimuth_res: radar.azimuth_resolution,
            doppler_res: cfg.cube_doppler_res,
            v_unamb,
            basis: radar.basis.clone(),
            data: vec![C64::new(0.0, 0.0); n_range * n_azimuth * n_doppler * q],
        }
    }

    pub fn q(&self) -> usize {
        self.basis.q()
    }

    #[inline]
    fn cell_offset(&self, r: usize, a: usize, d: usize) -> usize {
        ((r * self.n_azimuth + a) * self.n_doppler + d) * self.q()
    }

    pub fn cell(&self, r: usize, a: usize, d: usize) -> &[C64] {
        let o = self.cell_offset(r, a, d);
        &self.data[o..o + self.q()]
    }

    pub fn cell_mut(&mut self, r: usize, a: usize, d: usize) -> &mut [C64] {
        let o = self.cell_offset(r, a, d);
        let q = self.q();
        &mut self.data[o..o + q]
    }

    pub fn range_center(&self, r: usize) -> f64 {
        (r as f64 + 0.5) * self.range_res
    }

    pub fn azimuth_center(&self, a: usize) -> f64 {
        self.azimuth_min + (a as f64 + 0.5) * self.azimuth_res
    }

    /// Doppler bin whose center is nearest to a folded velocity.
    pub fn doppler_bin(&self, v_folded: f64) -> usize {
        let idx = ((v_folded + self.v_unamb) / self.doppler_res).floor() as isize;
        idx.clamp(0, self.n_doppler as isize - 1) as usize
    }

    pub fn doppler_center(&self, d: usize) -> f64 {
        -self.v_unamb + (d as f64 + 0.5) * self.doppler_res
    }

    /// Total energy of one channel summed over the cube.
    pub fn channel_energy(&self, channel: usize) -> f64 {
        let q = self.q();
        self.data[channel..].iter().step_by(q).map(|v| v.norm_sqr()).sum()
    }
}

/// Renders one radar frame: the data cube and the detection list.
///
/// Scatterers outside the field of view (or occluded, when enabled) are
/// silently omitted. Static targets appear at the Doppler bin implied by
/// the vehicle motion, folded into the unambiguous interval; outliers are
/// injected with uniformly random velocities.
pub fn simulate_frame(
    scene: &Scene,
    sample: &TrajectorySample,
    mount: &SensorMount,
    radar: &RadarSpec,
    cfg: &SimConfig,
    noise_seed: u64,
) -> (DataCube, Vec<RadarDetection>) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut cube = DataCube::new(radar, cfg);
    let sensor_pose = sample.pose.compose(&mount.as_pose());
    let sensor_inv = sensor_pose.inverse();

    // Occlusion: nearest hit per azimuth bin, filled before deposits.
    let mut first_hit = vec![f64::INFINITY; cube.n_azimuth];
    if cfg.occlusion {
        for &(p, _) in scene.cube_samples() {
            let local = sensor_inv.transform(p);
            let r = local.norm();
            let az = local.y.atan2(local.x);
            if r <= cfg.cube_max_range && az.abs() <= radar.fov_azimuth {
                let a = azimuth_bin(&cube, az);
                if r < first_hit[a] {
                    first_hit[a] = r;
                }
            }
        }
    }

    // Deposits: coherent addition with a random phase per sample.
    for &(p, sidx) in scene.cube_samples() {
        let local = sensor_inv.transform(p);
        let r = local.norm();
        let az = local.y.atan2(local.x);
        if r > cfg.cube_max_range || az.abs() > radar.fov_azimuth || r < 1e-6 {
            continue;
        }
        let a = azimuth_bin(&cube, az);
        if cfg.occlusion && r > first_hit[a] + 2.0 * cfg.cube_range_res {
            continue;
        }
        let rbin = ((r / cfg.cube_range_res) as usize).min(cube.n_range - 1);
        let vr = predict_radial_velocity(mount, &sample.motion, az);
        let d = cube.doppler_bin(fold_velocity(vr, cube.v_unamb));
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let rot = C64::from_polar(1.0, phase);
        let amps = scene.scatterers[sidx].amplitudes();
        let cell = cube.cell_mut(rbin, a, d);
        for (c, slot) in cell.iter_mut().enumerate() {
            let full = radar.basis.channels()[c].full_index();
            *slot += amps[full] * rot;
        }
    }

    // Additive complex Gaussian noise on every cell.
    if cfg.noise_power > 0.0 {
        let sigma = (cfg.noise_power / 2.0).sqrt();
        for v in cube.data.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += C64::new(re * sigma, im * sigma);
        }
    }

    // Detection list from the coarse samples.
    let mut dets = Vec::new();
    for &(p, sidx) in scene.det_samples() {
        let local = sensor_inv.transform(p);
        let r = local.norm();
        let az = local.y.atan2(local.x);
        if r > radar.max_range || az.abs() > radar.fov_azimuth || r < 1e-6 {
            continue;
        }
        if cfg.occlusion {
            let a = azimuth_bin(&cube, az);
            if r > first_hit[a] + 2.0 * cfg.cube_range_res {
                continue;
            }
        }
        let vr_true = predict_radial_velocity(mount, &sample.motion, az);
        let nr: f64 = StandardNormal.sample(&mut rng);
        let na: f64 = StandardNormal.sample(&mut rng);
        let nv: f64 = StandardNormal.sample(&mut rng);
        let amps = scene.scatterers[sidx].amplitudes();
        let phase = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        let values: Vec<C64> = radar
            .basis
            .channels()
            .iter()
            .map(|ch| amps[ch.full_index()] * phase)
            .collect();
        dets.push(RadarDetection {
            sensor_id: 0,
            range: (r + nr * cfg.range_sigma).max(0.0),
            azimuth: az + na * cfg.azimuth_sigma,
            v_r: fold_velocity(vr_true + nv * cfg.vr_sigma, radar.unambiguous_radial_velocity),
            omega_vec: ScatteringVector::new(radar.basis.clone(), values).unwrap(),
        });
    }
    let n_outliers = (dets.len() as f64 * cfg.outlier_rate).round() as usize;
    for _ in 0..n_outliers {
        let az = rng.random_range(-radar.fov_azimuth..radar.fov_azimuth);
        let r = rng.random_range(1.0..radar.max_range);
        let vr = rng.random_range(-radar.unambiguous_radial_velocity..radar.unambiguous_radial_velocity);
        dets.push(RadarDetection {
            sensor_id: 0,
            range: r,
            azimuth: az,
            v_r: vr,
            omega_vec: ScatteringVector::zeros(radar.basis.clone()),
        });
    }
    (cube, dets)
}

fn azimuth_bin(cube: &DataCube, az: f64) -> usize {
    let idx = ((az - cube.azimuth_min) / cube.azimuth_res).floor() as isize;
    idx.clamp(0, cube.n_azimuth as isize - 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scene_empty_and_deterministic() {
        let spec = SceneSpec::default();
        let s = generate_scene(1, &spec);
        assert!(s.scatterers.is_empty());
        let spec2 = SceneSpec { n_poles: 5, n_clutter: 3, ..Default::default() };
        let a = generate_scene(7, &spec2);
        let b = generate_scene(7, &spec2);
        assert_eq!(a.scatterers.len(), b.scatterers.len());
        for (x, y) in a.scatterers.iter().zip(&b.scatterers) {
            assert_eq!(x.position, y.position);
        }
    }

    #[test]
    fn fence_posts_count_and_colinearity() {
        let spec = SceneSpec {
            fences: vec![FenceSpec::new(Vector2::new(0.0, 5.0), Vector2::new(20.0, 5.0), 2.0)],
            ..Default::default()
        };
        let s = generate_scene(1, &spec);
        let posts: Vec<&Scatterer> =
            s.scatterers.iter().filter(|sc| sc.extent.is_none()).collect();
        assert_eq!(posts.len(), 11);
        for p in posts {
            assert_relative_eq!(p.position.y, 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trajectory_straight_line() {
        let spec = TrajectorySpec::constant(10.0, 0.0, 1.0);
        let tr = generate_trajectory(0, &spec);
        assert_eq!(tr.len(), 11);
        let last = tr.last().unwrap();
        assert_relative_eq!(last.pose.x, 10.0, epsilon = 1e-9);
        assert_relative_eq!(last.pose.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(last.t, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trajectory_standstill() {
        let spec = TrajectorySpec::constant(0.0, 0.0, 2.0);
        let tr = generate_trajectory(0, &spec);
        for s in &tr {
            assert_eq!(s.pose, tr[0].pose);
        }
    }

    #[test]
    fn trajectory_half_circle() {
        let spec = TrajectorySpec::constant(std::f64::consts::PI, std::f64::consts::PI / 10.0, 10.0);
        let tr = generate_trajectory(0, &spec);
        let last = tr.last().unwrap();
        assert_relative_eq!(last.pose.yaw, std::f64::consts::PI, epsilon = 1e-9);
        assert_relative_eq!(last.pose.x, 0.0, epsilon = 1e-6);
        assert_relative_eq!(last.pose.y, 20.0, epsilon = 1e-6);
    }

    #[test]
    fn trajectory_consistency_per_step() {
        // Poses must follow midpoint unicycle integration of the stored
        // motion states to 1e-6 per step.
        let spec = TrajectorySpec {
            rate_hz: 10.0,
            start: Pose2::identity(),
            v_start: 5.0,
            segments: vec![
                MotionSegment { duration: 2.0, v_end: 12.0, omega: 0.2 },
                MotionSegment { duration: 1.0, v_end: 12.0, omega: -0.3 },
            ],
            jitter_accel: 0.0,
            std_quality_windows: Vec::new(),
        };
        let tr = generate_trajectory(0, &spec);
        for w in tr.windows(2) {
            let dt = w[1].t - w[0].t;
            let v_mid = 0.5 * (w[0].motion.v + w[1].motion.v);
            // Sample motion is forward-looking: omega at sample k governs
            // the step from t_k to t_{k+1}.
            let pred = w[0].pose.compose(&Pose2::from_twist(v_mid, w[0].motion.omega, dt));
            assert!((pred.x - w[1].pose.x).abs() < 1e-6);
            assert!((pred.y - w[1].pose.y).abs() < 1e-6);
        }
    }

    #[test]
    fn quality_windows() {
        let mut spec = TrajectorySpec::constant(5.0, 0.0, 1.0);
        spec.std_quality_windows = vec![(0.35, 0.65)];
        let tr = generate_trajectory(0, &spec);
        let stds = tr.iter().filter(|s| s.gt_quality == GtQuality::Std).count();
        assert_eq!(stds, 3); // samples at 0.4, 0.5, 0.6
    }

    fn stationary_sample() -> TrajectorySample {
        TrajectorySample {
            t: 0.0,
            pose: Pose2::identity(),
            motion: MotionState::new(0.0, 0.0, 0.0),
            gt_quality: GtQuality::Carrier,
        }
    }

    #[test]
    fn stationary_single_scatterer_detection() {
        let radar = RadarSpec::default();
        let mut cfg = SimConfig::for_radar(&radar);
        cfg.noise_power = 0.0;
        cfg.range_sigma = 0.0;
        cfg.azimuth_sigma = 0.0;
        cfg.vr_sigma = 0.0;
        let spec = SceneSpec::default();
        let scene = Scene::from_scatterers(
            vec![Scatterer::point(Vector2::new(10.0, 0.0), ScattererKind::OddBounce, 1.0)],
            &spec,
        );
        let mount = SensorMount::new(0.0, 0.0, 0.0);
        let (_, dets) = simulate_frame(&scene, &stationary_sample(), &mount, &radar, &cfg, 1);
        assert_eq!(dets.len(), 1);
        assert_relative_eq!(dets[0].range, 10.0, epsilon = 1e-9);
        assert_relative_eq!(dets[0].azimuth, 0.0, epsilon = 1e-12);
        assert_relative_eq!(dets[0].v_r, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn folding_into_unambiguous_interval() {
        // Driving at 6 m/s toward a broadside target with 5 m/s unambiguous
        // velocity folds -6 m/s to +4 m/s.
        let radar = RadarSpec::default();
        let mut cfg = SimConfig::for_radar(&radar);
        cfg.noise_power = 0.0;
        cfg.range_sigma = 0.0;
        cfg.azimuth_sigma = 0.0;
        cfg.vr_sigma = 0.0;
        let spec = SceneSpec::default();
        let scene = Scene::from_scatterers(
            vec![Scatterer::point(Vector2::new(20.0, 0.0), ScattererKind::OddBounce, 1.0)],
            &spec,
        );
        let mount = SensorMount::new(0.0, 0.0, 0.0);
        let sample = TrajectorySample {
            t: 0.0,
            pose: Pose2::identity(),
            motion: MotionState::new(6.0, 0.0, 0.0),
            gt_quality: GtQuality::Carrier,
        };
        let (cube, dets) = simulate_frame(&scene, &sample, &mount, &radar, &cfg, 1);
        assert_relative_eq!(dets[0].v_r, 4.0, epsilon = 1e-9);
        // The cube deposit is at the folded Doppler bin as well.
        let d = cube.doppler_bin(4.0);
        let r = (20.0 / cube.range_res) as usize;
        let a = azimuth_bin(&cube, 0.0);
        let energy: f64 = cube.cell(r, a, d).iter().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(energy, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn even_bounce_energy_in_co_polar_channels() {
        let radar = RadarSpec::default();
        let mut cfg = SimConfig::for_radar(&radar);
        cfg.noise_power = 0.0;
        let spec = SceneSpec::default();
        let scene = Scene::from_scatterers(
            vec![Scatterer::point(Vector2::new(15.0, 2.0), ScattererKind::EvenBounce, 2.0)],
            &spec,
        );
        let mount = SensorMount::new(0.0, 0.0, 0.0);
        let (cube, _) = simulate_frame(&scene, &stationary_sample(), &mount, &radar, &cfg, 1);
        // LL and RR carry all energy, LR and RL none.
        assert_relative_eq!(cube.channel_energy(0) + cube.channel_energy(3), 2.0, epsilon = 1e-9);
        assert_relative_eq!(cube.channel_energy(1) + cube.channel_energy(2), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deposited_energy_matches_rcs() {
        let radar = RadarSpec::default();
        let mut cfg = SimConfig::for_radar(&radar);
        cfg.noise_power = 0.0;
        let spec = SceneSpec::default();
        let scene = Scene::from_scatterers(
            vec![Scatterer::point(Vector2::new(30.0, -5.0), ScattererKind::Mixed, 3.0)],
            &spec,
        );
        let mount = SensorMount::new(0.0, 0.0, 0.0);
        let (cube, _) = simulate_frame(&scene, &stationary_sample(), &mount, &radar, &cfg, 9);
        let total: f64 = (0..4).map(|c| cube.channel_energy(c)).sum();
        assert_relative_eq!(total, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn determinism_same_seed() {
        let radar = RadarSpec::default();
        let cfg = SimConfig::for_radar(&radar);
        let spec = SceneSpec {
            fences: vec![FenceSpec::new(Vector2::new(5.0, 8.0), Vector2::new(30.0, 8.0), 2.0)],
            n_poles: 3,
            ..Default::default()
        };
        let scene = generate_scene(5, &spec);
        let mount = SensorMount::new(3.5, 0.0, 0.0);
        let (c1, d1) = simulate_frame(&scene, &stationary_sample(), &mount, &radar, &cfg, 33);
        let (c2, d2) = simulate_frame(&scene, &stationary_sample(), &mount, &radar, &cfg, 33);
        assert_eq!(c1.data, c2.data);
        assert_eq!(d1.len(), d2.len());
        for (a, b) in d1.iter().zip(&d2) {
            assert_eq!(a.range, b.range);
            assert_eq!(a.v_r, b.v_r);
        }
    }

    #[test]
    fn occlusion_drops_hidden_scatterers() {
        let radar = RadarSpec::default();
        let mut cfg = SimConfig::for_radar(&radar);
        cfg.noise_power = 0.0;
        cfg.occlusion = true;
        cfg.range_sigma = 0.0;
        cfg.azimuth_sigma = 0.0;
        cfg.vr_sigma = 0.0;
        let spec = SceneSpec::default();
        let scene = Scene::from_scatterers(
            vec![
                Scatterer::point(Vector2::new(10.0, 0.0), ScattererKind::OddBounce, 1.0),
                Scatterer::point(Vector2::new(25.0, 0.0), ScattererKind::OddBounce, 1.0),
            ],
            &spec,
        );
        let mount = SensorMount::new(0.0, 0.0, 0.0);
        let (_, dets) = simulate_frame(&scene, &stationary_sample(), &mount, &radar, &cfg, 2);
        assert_eq!(dets.len(), 1);
        assert_relative_eq!(dets[0].range, 10.0, epsilon = 1e-9);
    }
}
