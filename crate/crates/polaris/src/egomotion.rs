//! Instantaneous radar ego-motion estimation.
//!
//! The motion state (forward velocity, yaw rate) is fit to the radial
//! velocities of static detections with RANSAC. Detections are replicated
//! across Nyquist zones beforehand so that ego-velocities beyond the
//! unambiguous Doppler interval are recovered by the plain linear model
//! without folding the fit function.

use crate::polarimetry::ScatteringVector;
use crate::simulator::SensorMount;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EgoError {
    #[error("motion history is empty")]
    EmptyHistory,
}

/// Vehicle motion state at the rear-axle center (zero side slip).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState {
    /// Forward velocity in m/s.
    pub v: f64,
    /// Yaw rate in rad/s.
    pub omega: f64,
    /// Timestamp in seconds.
    pub t: f64,
}

impl MotionState {
    pub fn new(v: f64, omega: f64, t: f64) -> Self {
        Self { v, omega, t }
    }
}

/// Single radar detection in the sensor frame.
#[derive(Debug, Clone)]
pub struct RadarDetection {
    pub sensor_id: usize,
    /// Range in meters.
    pub range: f64,
    /// Azimuth in radians, sensor frame.
    pub azimuth: f64,
    /// Measured radial velocity in m/s, folded into the unambiguous interval.
    pub v_r: f64,
    pub omega_vec: ScatteringVector,
}

/// Radial velocity a static point at `azimuth` (sensor frame) produces for
/// a rigid vehicle motion, as seen from `mount`.
pub fn predict_radial_velocity(mount: &SensorMount, motion: &MotionState, azimuth: f64) -> f64 {
    let (a, b) = radial_velocity_coefficients(mount, azimuth);
    a * motion.v + b * motion.omega
}

/// Coefficients `(a, b)` of the linear model `v_r = a v + b omega`.
pub fn radial_velocity_coefficients(mount: &SensorMount, azimuth: f64) -> (f64, f64) {
    let psi = mount.yaw + azimuth;
    let (s, c) = psi.sin_cos();
    // Sensor translational velocity in the vehicle frame is
    // (v - omega * y_s, omega * x_s); the measured radial velocity is the
    // negated projection onto the observation ray.
    (-c, mount.position.y * c - mount.position.x * s)
}

/// Folds a radial velocity into the unambiguous interval `(-v_unamb, v_unamb]`.
pub fn fold_velocity(v: f64, v_unamb: f64) -> f64 {
    let period = 2.0 * v_unamb;
    let mut r = (v + v_unamb).rem_euclid(period) - v_unamb;
    if r <= -v_unamb {
        r += period;
    }
    r
}

/// Replicates every detection into the Nyquist zones `k_min..=k_max`,
/// shifting the radial velocity by `2 k v_unamb`. The zone-0 copies keep
/// their original values; the output is grouped zone-major, so entry `i`
/// corresponds to input detection `i % dets.len()`.
pub fn augment_nyquist(
    dets: &[RadarDetection],
    v_unamb: f64,
    zone_range: (i32, i32),
) -> Vec<RadarDetection> {
    let (k_min, k_max) = zone_range;
    assert!(k_min <= 0 && 0 <= k_max, "zone range must contain 0");
    let mut out = Vec::with_capacity(dets.len() * ((k_max - k_min) as usize + 1));
    for k in k_min..=k_max {
        for d in dets {
            let mut c = d.clone();
            c.v_r += 2.0 * k as f64 * v_unamb;
            out.push(c);
        }
    }
    out
}

/// Number of Nyquist zones needed to cover ego-velocities up to `v_ego_max`.
pub fn nyquist_zone_count(v_ego_max: f64, v_unamb: f64) -> i32 {
    (v_ego_max / (2.0 * v_unamb)).ceil() as i32
}

#[derive(Debug, Clone)]
pub struct EgoEstimateParams {
    /// Inlier residual threshold in m/s.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    /// Early exit once this inlier ratio (of the unaugmented count) is reached.
    pub early_exit_ratio: f64,
    /// Nyquist zone range applied before fitting; `(0, 0)` disables augmentation.
    pub zone_range: (i32, i32),
    pub v_unamb: f64,
    /// Plausibility bounds.
    pub v_max: f64,
    pub omega_max: f64,
    pub a_max: f64,
    pub alpha_max: f64,
    /// Per-sensor trigger offsets in seconds relative to the frame time.
    pub trigger_offsets: Vec<f64>,
}

impl Default for EgoEstimateParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.1,
            max_iterations: 200,
            early_exit_ratio: 0.8,
            zone_range: (0, 0),
            v_unamb: 5.0,
            v_max: 40.0,
            omega_max: 1.5,
            a_max: 5.0,
            alpha_max: 2.0,
            trigger_offsets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoConfidence {
    /// Regular consensus estimate.
    Estimated,
    /// Fit rejected or impossible; motion extrapolated from history.
    Extrapolated,
    /// No detections and no history.
    ZeroFallback,
}

#[derive(Debug, Clone)]
pub struct EgoEstimate {
    pub motion: MotionState,
    /// Indices into the caller's detection list that supported the fit.
    pub inliers: Vec<usize>,
    pub confidence: EgoConfidence,
}

/// RANSAC motion fit over detections from all sensors.
///
/// Detections from sensors triggered earlier than the frame time are
/// compensated with motion extrapolated from `history` before stacking.
/// A result implying an implausible acceleration against the previous
/// state is discarded in favor of extrapolation. The RANSAC draw order is
/// seeded by `frame_id` and detections are canonicalized internally, so
/// the estimate does not depend on the input order.
pub fn estimate_motion(
    dets: &[RadarDetection],
    mounts: &[SensorMount],
    history: &[MotionState],
    t: f64,
    frame_id: u64,
    params: &EgoEstimateParams,
) -> EgoEstimate {
    let fallback = || -> EgoEstimate {
        match extrapolate_clamped(history, t, params.v_max, params.omega_max) {
            Ok(m) => EgoEstimate {
                motion: m,
                inliers: Vec::new(),
                confidence: EgoConfidence::Extrapolated,
            },
            Err(_) => EgoEstimate {
                motion: MotionState::new(0.0, 0.0, t),
                inliers: Vec::new(),
                confidence: EgoConfidence::ZeroFallback,
            },
        }
    };
    if dets.len() < 2 {
        return fallback();
    }

    // Canonical order makes the seeded draw order independent of the
    // caller's detection order.
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        let a = &dets[i];
        let b = &dets[j];
        a.v_r
            .total_cmp(&b.v_r)
            .then(a.azimuth.total_cmp(&b.azimuth))
            .then(a.range.total_cmp(&b.range))
            .then(a.sensor_id.cmp(&b.sensor_id))
    });

    // Linear model rows (a, b, v_r) with trigger-offset compensation.
    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(dets.len());
    for &i in &order {
        let d = &dets[i];
        let mount = &mounts[d.sensor_id];
        let (a, b) = radial_velocity_coefficients(mount, d.azimuth);
        let mut vr = d.v_r;
        let offset = params.trigger_offsets.get(d.sensor_id).copied().unwrap_or(0.0);
        if offset != 0.0 {
            if let (Ok(m_then), Ok(m_now)) =
                (extrapolate_motion(history, t + offset), extrapolate_motion(history, t))
            {
                vr -= predict_radial_velocity(mount, &m_then, d.azimuth)
                    - predict_radial_velocity(mount, &m_now, d.azimuth);
            }
        }
        rows.push((a, b, vr));
    }

    let n_orig = rows.len();
    let mut aug: Vec<(f64, f64, f64)> =
        Vec::with_capacity(n_orig * (params.zone_range.1 - params.zone_range.0 + 1) as usize);
    for k in params.zone_range.0..=params.zone_range.1 {
        let shift = 2.0 * k as f64 * params.v_unamb;
        for &(a, b, vr) in &rows {
            aug.push((a, b, vr + shift));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(frame_id);
    let mut best: Option<(usize, f64, f64)> = None; // (inlier count, v, omega)
    for _ in 0..params.max_iterations {
        let i = rng.random_range(0..aug.len());
        let mut j = rng.random_range(0..aug.len());
        if i == j {
            j = (j + 1) % aug.len();
        }
        let (a1, b1, r1) = aug[i];
        let (a2, b2, r2) = aug[j];
        let det = a1 * b2 - a2 * b1;
        if det.abs() < 1e-9 {
            continue;
        }
        let v = (r1 * b2 - r2 * b1) / det;
        let omega = (a1 * r2 - a2 * r1) / det;
        if v.abs() > params.v_max || omega.abs() > params.omega_max {
            continue;
        }
        let count = aug
            .iter()
            .filter(|&&(a, b, r)| (a * v + b * omega - r).abs() <= params.inlier_threshold)
            .count();
        if best.map(|(c, _, _)| count > c).unwrap_or(true) {
            best = Some((count, v, omega));
            if count as f64 >= params.early_exit_ratio * n_orig as f64 {
                break;
            }
        }
    }

    let Some((_, v0, w0)) = best else {
        return fallback();
    };

    // Least-squares refit on the inliers in the augmented (unfolded) domain.
    let mut stt = [0.0f64; 3]; // a^2, a*b, b^2
    let mut rhs = [0.0f64; 2];
    let mut inlier_orig: Vec<usize> = Vec::new();
    for (idx, &(a, b, r)) in aug.iter().enumerate() {
        if (a * v0 + b * w0 - r).abs() <= params.inlier_threshold {
            stt[0] += a * a;
            stt[1] += a * b;
            stt[2] += b * b;
            rhs[0] += a * r;
            rhs[1] += b * r;
            inlier_orig.push(order[idx % n_orig]);
        }
    }
    inlier_orig.sort_unstable();
    inlier_orig.dedup();
    let det = stt[0] * stt[2] - stt[1] * stt[1];
    let (v, omega) = if det.abs() > 1e-12 {
        (
            (rhs[0] * stt[2] - rhs[1] * stt[1]) / det,
            (stt[0] * rhs[1] - stt[1] * rhs[0]) / det,
        )
    } else {
        (v0, w0)
    };

    // Plausibility gate against the previous state.
    if let Some(prev) = history.last() {
        let dt = (t - prev.t).max(1e-6);
        let accel = (v - prev.v) / dt;
        let alpha = (omega - prev.omega) / dt;
        if accel.abs() > params.a_max || alpha.abs() > params.alpha_max {
            return fallback();
        }
    }
    if v.abs() > params.v_max || omega.abs() > params.omega_max {
        return fallback();
    }

    EgoEstimate {
        motion: MotionState::new(v, omega, t),
        inliers: inlier_orig,
        confidence: EgoConfidence::Estimated,
    }
}

/// Constant-acceleration extrapolation from the last two states; a single
/// state extrapolates with constant velocity.
pub fn extrapolate_motion(history: &[MotionState], t: f64) -> Result<MotionState, EgoError> {
    extrapolate_clamped(history, t, 40.0, 1.5)
}

/// [`extrapolate_motion`] with explicit plausibility clamps.
pub fn extrapolate_clamped(
    history: &[MotionState],
    t: f64,
    v_max: f64,
    omega_max: f64,
) -> Result<MotionState, EgoError> {
    match history {
        [] => Err(EgoError::EmptyHistory),
        [single] => Ok(MotionState::new(single.v, single.omega, t)),
        [.., a, b] => {
            let dt = b.t - a.t;
            let (v, omega) = if dt.abs() < 1e-9 {
                (b.v, b.omega)
            } else {
                let s = (t - b.t) / dt;
                (b.v + (b.v - a.v) * s, b.omega + (b.omega - a.omega) * s)
            };
            Ok(MotionState::new(
                v.clamp(-v_max, v_max),
                omega.clamp(-omega_max, omega_max),
                t,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarimetry::PolarizationBasis;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    fn mount(x: f64, y: f64, yaw: f64) -> SensorMount {
        SensorMount { position: Vector2::new(x, y), yaw }
    }

    fn det(sensor_id: usize, azimuth: f64, v_r: f64) -> RadarDetection {
        RadarDetection {
            sensor_id,
            range: 10.0,
            azimuth,
            v_r,
            omega_vec: ScatteringVector::zeros(PolarizationBasis::full_circular()),
        }
    }

    #[test]
    fn predict_examples() {
        let m0 = mount(0.0, 0.0, 0.0);
        let fwd = MotionState::new(10.0, 0.0, 0.0);
        assert_relative_eq!(predict_radial_velocity(&m0, &fwd, 0.0), -10.0);
        assert_relative_eq!(
            predict_radial_velocity(&m0, &fwd, 60f64.to_radians()),
            -5.0,
            epsilon = 1e-12
        );
        let m1 = mount(3.5, 0.0, 0.0);
        let spin = MotionState::new(0.0, 0.5, 0.0);
        assert_relative_eq!(
            predict_radial_velocity(&m1, &spin, 90f64.to_radians()),
            -1.75,
            epsilon = 1e-12
        );
    }

    #[test]
    fn predict_is_linear_in_motion() {
        let m = mount(1.2, -0.4, 0.3);
        for &az in &[0.0, 0.7, -1.1] {
            let a = predict_radial_velocity(&m, &MotionState::new(3.0, 0.0, 0.0), az);
            let b = predict_radial_velocity(&m, &MotionState::new(0.0, 0.4, 0.0), az);
            let ab = predict_radial_velocity(&m, &MotionState::new(3.0, 0.4, 0.0), az);
            assert_relative_eq!(a + b, ab, epsilon = 1e-12);
        }
    }

    #[test]
    fn fold_examples() {
        assert_relative_eq!(fold_velocity(-6.0, 5.0), 4.0);
        assert_relative_eq!(fold_velocity(4.0, 5.0), 4.0);
        assert_relative_eq!(fold_velocity(5.0, 5.0), 5.0);
        assert_relative_eq!(fold_velocity(-5.0, 5.0), 5.0);
        assert_relative_eq!(fold_velocity(17.0, 5.0), -3.0);
    }

    #[test]
    fn augment_examples() {
        let d = vec![det(0, 0.0, 4.0)];
        let out = augment_nyquist(&d, 5.0, (-1, 1));
        let vs: Vec<f64> = out.iter().map(|d| d.v_r).collect();
        assert_eq!(vs, vec![-6.0, 4.0, 14.0]);
        assert_eq!(augment_nyquist(&d, 5.0, (0, 0)).len(), 1);
        let empty: Vec<RadarDetection> = vec![];
        assert!(augment_nyquist(&empty, 5.0, (-1, 1)).is_empty());
    }

    fn synth_dets(
        mounts: &[SensorMount],
        motion: &MotionState,
        n: usize,
        v_unamb: f64,
    ) -> Vec<RadarDetection> {
        synth_dets_span(mounts, motion, n, v_unamb, 1.0)
    }

    fn synth_dets_span(
        mounts: &[SensorMount],
        motion: &MotionState,
        n: usize,
        v_unamb: f64,
        az_span: f64,
    ) -> Vec<RadarDetection> {
        (0..n)
            .map(|i| {
                let az = az_span * (-1.0 + 2.0 * (i as f64 / (n - 1) as f64));
                let sid = i % mounts.len();
                let vr = predict_radial_velocity(&mounts[sid], motion, az);
                det(sid, az, fold_velocity(vr, v_unamb))
            })
            .collect()
    }

    #[test]
    fn estimate_noiseless() {
        let mounts = vec![mount(3.5, 0.0, 0.0), mount(3.2, 0.8, 0.6)];
        let truth = MotionState::new(8.0, 0.1, 0.0);
        let dets = synth_dets(&mounts, &truth, 100, 50.0);
        let est = estimate_motion(&dets, &mounts, &[], 0.0, 1, &EgoEstimateParams::default());
        assert_eq!(est.confidence, EgoConfidence::Estimated);
        assert_relative_eq!(est.motion.v, 8.0, epsilon = 1e-6);
        assert_relative_eq!(est.motion.omega, 0.1, epsilon = 1e-6);
        assert_eq!(est.inliers.len(), 100);
    }

    #[test]
    fn estimate_with_outliers() {
        use rand::{Rng, SeedableRng};
        let mounts = vec![mount(3.5, 0.0, 0.0)];
        let truth = MotionState::new(8.0, 0.1, 0.0);
        let mut ok = 0;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1000);
            let mut dets = synth_dets(&mounts, &truth, 100, 50.0);
            for _ in 0..20 {
                let az = rng.random_range(-1.0..1.0);
                let vr = rng.random_range(-5.0..5.0);
                dets.push(det(0, az, vr));
            }
            let est = estimate_motion(&dets, &mounts, &[], 0.0, seed, &EgoEstimateParams::default());
            if (est.motion.v - 8.0).abs() <= 0.05 && (est.motion.omega - 0.1).abs() <= 0.005 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "only {ok}/100 seeds within tolerance");
    }

    #[test]
    fn augmentation_recovers_aliased_velocity() {
        // Corridor geometry: targets ahead within +-28 deg, so at
        // v = 1.2 v_unamb every radial velocity folds. Without
        // augmentation no consistent unfolded support exists.
        let mounts = vec![mount(3.5, 0.0, 0.0)];
        let truth = MotionState::new(6.0, 0.0, 0.0);
        let dets = synth_dets_span(&mounts, &truth, 80, 5.0, 0.5);
        let mut params =
            EgoEstimateParams { v_unamb: 5.0, zone_range: (-1, 1), ..Default::default() };
        let est = estimate_motion(&dets, &mounts, &[], 0.0, 3, &params);
        assert!((est.motion.v - 6.0).abs() <= 0.05, "v = {}", est.motion.v);
        params.zone_range = (0, 0);
        let est_off = estimate_motion(&dets, &mounts, &[], 0.0, 3, &params);
        assert!((est_off.motion.v - 6.0).abs() > 0.05, "folded fit should fail");
    }

    #[test]
    fn augmentation_noop_within_unambiguous_range() {
        let mounts = vec![mount(3.5, 0.0, 0.0)];
        let truth = MotionState::new(3.0, 0.05, 0.0);
        let dets = synth_dets(&mounts, &truth, 60, 5.0);
        let base = EgoEstimateParams { v_unamb: 5.0, ..Default::default() };
        let aug = EgoEstimateParams { v_unamb: 5.0, zone_range: (-2, 2), ..Default::default() };
        let e0 = estimate_motion(&dets, &mounts, &[], 0.0, 9, &base);
        let e1 = estimate_motion(&dets, &mounts, &[], 0.0, 9, &aug);
        assert_relative_eq!(e0.motion.v, e1.motion.v, epsilon = 1e-9);
        assert_relative_eq!(e0.motion.omega, e1.motion.omega, epsilon = 1e-9);
        assert_eq!(e0.inliers, e1.inliers);
    }

    #[test]
    fn order_permutation_invariance() {
        let mounts = vec![mount(3.5, 0.0, 0.0)];
        let truth = MotionState::new(4.0, 0.2, 0.0);
        let mut dets = synth_dets(&mounts, &truth, 50, 50.0);
        // Perturb a few into outliers so the fit is nontrivial.
        dets[3].v_r += 2.0;
        dets[17].v_r -= 1.0;
        let params = EgoEstimateParams::default();
        let a = estimate_motion(&dets, &mounts, &[], 0.0, 77, &params);
        let mut shuffled: Vec<RadarDetection> = dets.clone();
        shuffled.rotate_left(13);
        shuffled.swap(0, 5);
        let map: Vec<usize> = shuffled
            .iter()
            .map(|d| {
                dets.iter()
                    .position(|o| o.v_r == d.v_r && o.azimuth == d.azimuth)
                    .unwrap()
            })
            .collect();
        let b = estimate_motion(&shuffled, &mounts, &[], 0.0, 77, &params);
        assert_relative_eq!(a.motion.v, b.motion.v, epsilon = 1e-12);
        assert_relative_eq!(a.motion.omega, b.motion.omega, epsilon = 1e-12);
        let mut b_mapped: Vec<usize> = b.inliers.iter().map(|&i| map[i]).collect();
        b_mapped.sort_unstable();
        assert_eq!(a.inliers, b_mapped);
    }

    #[test]
    fn implausible_acceleration_falls_back() {
        let mounts = vec![mount(3.5, 0.0, 0.0)];
        let dets = synth_dets(&mounts, &MotionState::new(10.0, 0.0, 1.0), 50, 50.0);
        let history = vec![MotionState::new(2.0, 0.0, 0.8), MotionState::new(2.0, 0.0, 0.9)];
        // Implied acceleration (10 - 2) / 0.1 = 80 m/s^2 is rejected.
        let est = estimate_motion(&dets, &mounts, &history, 1.0, 5, &EgoEstimateParams::default());
        assert_eq!(est.confidence, EgoConfidence::Extrapolated);
        assert_relative_eq!(est.motion.v, 2.0);
    }

    #[test]
    fn too_few_detections_fallbacks() {
        let mounts = vec![mount(3.5, 0.0, 0.0)];
        let history = vec![MotionState::new(5.0, 0.0, 0.0)];
        let est = estimate_motion(&[], &mounts, &history, 0.5, 2, &EgoEstimateParams::default());
        assert_eq!(est.confidence, EgoConfidence::Extrapolated);
        assert_relative_eq!(est.motion.v, 5.0);
        let est = estimate_motion(&[], &mounts, &[], 0.5, 2, &EgoEstimateParams::default());
        assert_eq!(est.confidence, EgoConfidence::ZeroFallback);
        assert_relative_eq!(est.motion.v, 0.0);
    }

    #[test]
    fn extrapolation_examples() {
        let single = vec![MotionState::new(5.0, 0.0, 0.0)];
        let m = extrapolate_motion(&single, 3.0).unwrap();
        assert_relative_eq!(m.v, 5.0);
        let two = vec![MotionState::new(4.0, 0.0, 0.0), MotionState::new(5.0, 0.0, 1.0)];
        let m = extrapolate_motion(&two, 1.5).unwrap();
        assert_relative_eq!(m.v, 5.5);
        let fast = vec![MotionState::new(30.0, 0.0, 0.0), MotionState::new(39.0, 0.0, 1.0)];
        let m = extrapolate_motion(&fast, 2.0).unwrap();
        assert_relative_eq!(m.v, 40.0); // clamped at v_max
        assert!(extrapolate_motion(&[], 0.0).is_err());
    }

    #[test]
    fn zone_count_from_max_velocity() {
        assert_eq!(nyquist_zone_count(12.0, 5.0), 2);
        assert_eq!(nyquist_zone_count(9.9, 5.0), 1);
        assert_eq!(nyquist_zone_count(60.0, 5.0), 6);
    }

    #[test]
    fn trigger_offset_compensation() {
        // Sensor 1 triggers 50 ms earlier while the vehicle accelerates,
        // so its raw radial velocities are stale; compensation recovers the
        // frame-time motion.
        let mounts = vec![mount(3.5, 0.0, 0.0), mount(3.0, 0.5, 0.5)];
        let history = vec![MotionState::new(8.0, 0.0, 0.9), MotionState::new(9.0, 0.0, 1.0)];
        let t_frame = 1.1;
        let m_frame = MotionState::new(10.0, 0.0, t_frame); // continues +10 m/s^2
        let m_stale = MotionState::new(9.5, 0.0, t_frame - 0.05);
        let mut dets = Vec::new();
        for i in 0..40 {
            let az = -1.0 + 2.0 * (i as f64 / 39.0);
            dets.push(det(0, az, predict_radial_velocity(&mounts[0], &m_frame, az)));
            dets.push(det(1, az, predict_radial_velocity(&mounts[1], &m_stale, az)));
        }
        let params = EgoEstimateParams {
            trigger_offsets: vec![0.0, -0.05],
            a_max: 50.0,
            ..Default::default()
        };
        let est = estimate_motion(&dets, &mounts, &history, t_frame, 4, &params);
        assert_eq!(est.confidence, EgoConfidence::Estimated);
        assert_relative_eq!(est.motion.v, 10.0, epsilon = 1e-6);
        assert_eq!(est.inliers.len(), 80);
    }
}
