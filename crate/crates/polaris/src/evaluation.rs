//! Absolute trajectory error metrics and their aggregation.
//!
//! Translational errors are expressed in the ground-truth body frame
//! (longitudinal along the heading, lateral across it); the rotational
//! error uses the arccos-trace form. Aggregates gate on ground-truth
//! quality and exclude standstill samples.

use crate::se2::Pose2;
use crate::simulator::GtQuality;

/// One timestamped pose-error sample with its gating attributes.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryErrorSample {
    pub t: f64,
    /// Longitudinal error (m), along the ground-truth heading.
    pub eps_long: f64,
    /// Lateral error (m), across the ground-truth heading.
    pub eps_lat: f64,
    /// Rotational error in [0, pi].
    pub eps_rot: f64,
    pub gt_quality: GtQuality,
    /// Ground-truth speed (m/s), used for standstill exclusion.
    pub speed: f64,
}

/// A timestamped pose with gating attributes, as read from trajectories.
#[derive(Debug, Clone, Copy)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose2,
    pub quality: GtQuality,
    pub speed: f64,
}

/// Pairs every estimate with the nearest ground-truth sample (within half
/// a period) and computes the error triple. Estimates without an
/// alignable ground-truth sample are skipped and counted.
pub fn compute_errors(
    estimates: &[(f64, Pose2)],
    ground_truth: &[TimedPose],
    rate_hz: f64,
) -> (Vec<TrajectoryErrorSample>, usize) {
    let max_dt = 0.5 / rate_hz;
    let mut out = Vec::with_capacity(estimates.len());
    let mut skipped = 0;
    for &(t, est) in estimates {
        // Ground truth is time-ordered; binary search for the neighbor.
        let idx = ground_truth.partition_point(|g| g.t < t);
        let mut best: Option<&TimedPose> = None;
        for cand in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
            if let Some(g) = ground_truth.get(cand) {
                if best.map(|b| (g.t - t).abs() < (b.t - t).abs()).unwrap_or(true) {
                    best = Some(g);
                }
            }
        }
        let Some(g) = best.filter(|g| (g.t - t).abs() <= max_dt) else {
            skipped += 1;
            continue;
        };
        out.push(pose_error(t, &est, g));
    }
    (out, skipped)
}

/// Error triple of one estimate against one ground-truth sample.
pub fn pose_error(t: f64, est: &Pose2, gt: &TimedPose) -> TrajectoryErrorSample {
    let dt_world = est.translation() - gt.pose.translation();
    let in_gt = gt.pose.rotation().transpose() * dt_world;
    let rel = gt.pose.rotation().transpose() * est.rotation();
    // arccos(0.5 tr(R_gt^-1 R_est)), clamped against round-off.
    let eps_rot = (0.5 * (rel[(0, 0)] + rel[(1, 1)])).clamp(-1.0, 1.0).acos();
    TrajectoryErrorSample {
        t,
        eps_long: in_gt.x,
        eps_lat: in_gt.y,
        eps_rot,
        gt_quality: gt.quality,
        speed: gt.speed,
    }
}

/// Gating rules for aggregation.
#[derive(Debug, Clone, Copy)]
pub struct Gates {
    /// Keep only carrier-phase ground truth.
    pub carrier_only: bool,
    /// Exclude samples at or below this speed (standstill).
    pub min_speed: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Self { carrier_only: true, min_speed: 0.5 }
    }
}

/// RMSE/max aggregates per error component plus the gated fraction.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    pub rmse_long: f64,
    pub max_long: f64,
    pub rmse_lat: f64,
    pub max_lat: f64,
    pub rmse_rot: f64,
    pub max_rot: f64,
    /// Fraction of samples with carrier-quality ground truth.
    pub reliable_fraction: f64,
    /// Number of samples that passed all gates.
    pub gated_samples: usize,
}

/// Aggregates gated samples; `None` marks an empty gated set explicitly
/// (never zeros).
pub fn aggregate(samples: &[TrajectoryErrorSample], gates: &Gates) -> Option<Metrics> {
    let reliable = samples
        .iter()
        .filter(|s| s.gt_quality == GtQuality::Carrier)
        .count() as f64;
    let reliable_fraction = if samples.is_empty() { 0.0 } else { reliable / samples.len() as f64 };
    let gated: Vec<&TrajectoryErrorSample> = samples
        .iter()
        .filter(|s| (!gates.carrier_only || s.gt_quality == GtQuality::Carrier) && s.speed > gates.min_speed)
        .collect();
    if gated.is_empty() {
        return None;
    }
    let rmse = |f: &dyn Fn(&TrajectoryErrorSample) -> f64| {
        (gated.iter().map(|s| f(s) * f(s)).sum::<f64>() / gated.len() as f64).sqrt()
    };
    let max = |f: &dyn Fn(&TrajectoryErrorSample) -> f64| {
        gated.iter().map(|s| f(s).abs()).fold(0.0f64, f64::max)
    };
    Some(Metrics {
        rmse_long: rmse(&|s| s.eps_long),
        max_long: max(&|s| s.eps_long),
        rmse_lat: rmse(&|s| s.eps_lat),
        max_lat: max(&|s| s.eps_lat),
        rmse_rot: rmse(&|s| s.eps_rot),
        max_rot: max(&|s| s.eps_rot),
        reliable_fraction,
        gated_samples: gated.len(),
    })
}

/// Empirical complementary cumulative distribution `F̄(ε) = P(X > ε)`.
#[derive(Debug, Clone, Default)]
pub struct Ccdf {
    /// Sorted `(epsilon, F̄(epsilon))` points, one per distinct value.
    pub points: Vec<(f64, f64)>,
    n: usize,
}

impl Ccdf {
    /// Right-continuous evaluation of `F̄` at `eps`.
    pub fn eval(&self, eps: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        match self.points.iter().rev().find(|&&(v, _)| v <= eps) {
            Some(&(_, f)) => f,
            None => 1.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the empirical CCDF of absolute values.
pub fn ccdf(values: &[f64]) -> Ccdf {
    if values.is_empty() {
        return Ccdf::default();
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == v {
            j += 1;
        }
        // F̄(v) counts strictly greater values.
        points.push((v, (n - j) as f64 / n as f64));
        i = j;
    }
    Ccdf { points, n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tp(t: f64, x: f64, y: f64, yaw: f64) -> TimedPose {
        TimedPose { t, pose: Pose2::new(x, y, yaw), quality: GtQuality::Carrier, speed: 5.0 }
    }

    #[test]
    fn identical_trajectories_zero_error() {
        let gt: Vec<TimedPose> = (0..10).map(|i| tp(i as f64 * 0.1, i as f64, 0.0, 0.0)).collect();
        let est: Vec<(f64, Pose2)> = gt.iter().map(|g| (g.t, g.pose)).collect();
        let (samples, skipped) = compute_errors(&est, &gt, 10.0);
        assert_eq!(skipped, 0);
        assert_eq!(samples.len(), 10);
        for s in samples {
            assert_relative_eq!(s.eps_long, 0.0);
            assert_relative_eq!(s.eps_lat, 0.0);
            assert_relative_eq!(s.eps_rot, 0.0);
        }
    }

    #[test]
    fn world_error_rotated_into_gt_frame() {
        // Ground truth heading 90 deg; world offset (0.1, 0) becomes a
        // negative lateral error.
        let gt = vec![tp(0.0, 1.0, 2.0, std::f64::consts::FRAC_PI_2)];
        let est = vec![(0.0, Pose2::new(1.1, 2.0, std::f64::consts::FRAC_PI_2))];
        let (samples, _) = compute_errors(&est, &gt, 10.0);
        assert_relative_eq!(samples[0].eps_long, 0.0, epsilon = 1e-12);
        assert_relative_eq!(samples[0].eps_lat, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn rotation_error_from_trace() {
        let gt = vec![tp(0.0, 0.0, 0.0, 0.2)];
        let est = vec![(0.0, Pose2::new(0.0, 0.0, 0.2 + 30f64.to_radians()))];
        let (samples, _) = compute_errors(&est, &gt, 10.0);
        assert_relative_eq!(samples[0].eps_rot, 30f64.to_radians(), epsilon = 1e-12);
        // Symmetry: swapping est and gt leaves the magnitude unchanged.
        let gt2 = vec![tp(0.0, 0.0, 0.0, 0.2 + 30f64.to_radians())];
        let est2 = vec![(0.0, Pose2::new(0.0, 0.0, 0.2))];
        let (s2, _) = compute_errors(&est2, &gt2, 10.0);
        assert_relative_eq!(s2[0].eps_rot, samples[0].eps_rot, epsilon = 1e-12);
    }

    #[test]
    fn unalignable_samples_skipped() {
        let gt = vec![tp(0.0, 0.0, 0.0, 0.0)];
        let est = vec![(0.0, Pose2::identity()), (1.0, Pose2::identity())];
        let (samples, skipped) = compute_errors(&est, &gt, 10.0);
        assert_eq!(samples.len(), 1);
        assert_eq!(skipped, 1);
    }

    #[test]
    fn aggregate_constant_error() {
        let samples: Vec<TrajectoryErrorSample> = (0..30)
            .map(|i| TrajectoryErrorSample {
                t: i as f64,
                eps_long: 0.0,
                eps_lat: 0.1,
                eps_rot: 0.0,
                gt_quality: GtQuality::Carrier,
                speed: 5.0,
            })
            .collect();
        let m = aggregate(&samples, &Gates::default()).unwrap();
        assert_relative_eq!(m.rmse_lat, 0.1, epsilon = 1e-12);
        assert_relative_eq!(m.max_lat, 0.1, epsilon = 1e-12);
        assert_relative_eq!(m.reliable_fraction, 1.0);
    }

    #[test]
    fn standstill_and_quality_gating() {
        let mk = |speed: f64, q: GtQuality, e: f64| TrajectoryErrorSample {
            t: 0.0,
            eps_long: e,
            eps_lat: 0.0,
            eps_rot: 0.0,
            gt_quality: q,
            speed,
        };
        let samples = vec![
            mk(5.0, GtQuality::Carrier, 0.1),
            mk(0.2, GtQuality::Carrier, 9.0), // standstill: excluded
            mk(5.0, GtQuality::Std, 9.0),     // degraded gt: excluded
        ];
        let m = aggregate(&samples, &Gates::default()).unwrap();
        assert_eq!(m.gated_samples, 1);
        assert_relative_eq!(m.rmse_long, 0.1, epsilon = 1e-12);
        assert_relative_eq!(m.reliable_fraction, 2.0 / 3.0, epsilon = 1e-12);
        // All samples gated out -> explicit empty marker.
        let none = aggregate(&[mk(0.1, GtQuality::Std, 1.0)], &Gates::default());
        assert!(none.is_none());
    }

    #[test]
    fn rmse_dominates_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<TrajectoryErrorSample> = (0..100)
            .map(|i| TrajectoryErrorSample {
                t: i as f64,
                eps_long: rng.random_range(-1.0..1.0),
                eps_lat: rng.random_range(-1.0..1.0),
                eps_rot: rng.random_range(0.0..0.5),
                gt_quality: GtQuality::Carrier,
                speed: 3.0,
            })
            .collect();
        let m = aggregate(&samples, &Gates::default()).unwrap();
        let mean_long =
            samples.iter().map(|s| s.eps_long).sum::<f64>() / samples.len() as f64;
        let mean_lat = samples.iter().map(|s| s.eps_lat).sum::<f64>() / samples.len() as f64;
        assert!(m.rmse_long >= mean_long.abs());
        assert!(m.rmse_lat >= mean_lat.abs());
    }

    #[test]
    fn ccdf_counting() {
        let c = ccdf(&[1.0, 2.0, 3.0]);
        assert_relative_eq!(c.eval(1.5), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(c.eval(0.5), 1.0);
        assert_relative_eq!(c.eval(3.0), 0.0);
        assert_relative_eq!(c.eval(2.0), 1.0 / 3.0);
    }

    #[test]
    fn ccdf_all_equal_step() {
        let c = ccdf(&[2.0, 2.0, 2.0]);
        assert_eq!(c.points.len(), 1);
        assert_relative_eq!(c.eval(1.999), 1.0);
        assert_relative_eq!(c.eval(2.0), 0.0);
    }

    #[test]
    fn ccdf_monotone_nonincreasing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let n = rng.random_range(1..200);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let c = ccdf(&values);
            let mut prev = 1.0;
            for &(_, f) in &c.points {
                assert!(f <= prev + 1e-12);
                assert!((0.0..=1.0).contains(&f));
                prev = f;
            }
        }
        assert!(ccdf(&[]).is_empty());
    }
}
