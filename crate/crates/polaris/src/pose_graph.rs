//! Sliding-window factor-graph optimization over SE(2) poses and
//! landmark variables.
//!
//! Four factor types constrain the window: binary odometry between
//! successive poses, binary bearing/range observations from a pose to a
//! landmark variable, unary point-landmark map priors, and unary
//! line-landmark map priors acting on observed line endpoints through
//! their orthogonal projection onto the map segment with an anisotropic
//! information matrix. A unary pose prior anchors the window whenever too
//! few landmarks constrain it. Old poses leave the window by truncation;
//! no marginal priors are synthesized.

use crate::egomotion::MotionState;
use crate::map_construction::LineLandmark;
use crate::se2::{v_inv_diag_deriv, v_inverse, wrap_angle, Pose2};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use std::collections::BTreeMap;

/// Standard deviations behind the constant information matrices.
#[derive(Debug, Clone)]
pub struct NoiseConfig {
    /// Point map prior position (m).
    pub sigma_lp: f64,
    /// Line map prior orthogonal direction (m); along-line is 10x weaker.
    pub sigma_ll: f64,
    /// Odometry translation per step (m).
    pub sigma_xx_t: f64,
    /// Odometry rotation per step (rad).
    pub sigma_xx_phi: f64,
    /// Observation range (m).
    pub sigma_xlp_r: f64,
    /// Observation bearing (rad).
    pub sigma_xlp_phi: f64,
    /// Fallback pose prior translation (m) and rotation (rad).
    pub sigma_fallback_t: f64,
    pub sigma_fallback_phi: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_lp: 0.1,
            sigma_ll: 0.1,
            sigma_xx_t: 0.05,
            sigma_xx_phi: 0.01,
            sigma_xlp_r: 0.5,
            sigma_xlp_phi: 0.03,
            sigma_fallback_t: 0.5,
            sigma_fallback_phi: 0.1,
        }
    }
}

/// Landmark variable addressed by an observation factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LmVar {
    /// Point-landmark variable.
    Point(u64),
    /// Line endpoint variable (one per observed line instance endpoint).
    Endpoint(u64),
}

#[derive(Debug, Clone)]
enum Factor {
    Odometry { i: u64, j: u64, z: Pose2, info: Matrix3<f64> },
    Observation { pose: u64, var: LmVar, z_bearing: f64, z_range: f64, info: Matrix2<f64> },
    PointPrior { var: u64, m: Vector2<f64>, info: Matrix2<f64> },
    LinePrior { var: u64, seg_start: Vector2<f64>, seg_end: Vector2<f64>, info: Matrix2<f64> },
    PosePrior { i: u64, z: Pose2, info: Matrix3<f64> },
}

/// Optimization report.
#[derive(Debug, Clone, Copy)]
pub struct OptimizeReport {
    pub converged: bool,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeParams {
    pub max_iterations: usize,
    pub rel_cost_tol: f64,
    pub initial_lambda: f64,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        Self { max_iterations: 50, rel_cost_tol: 1e-8, initial_lambda: 1e-6 }
    }
}

/// Factor graph over SE(2) poses, point landmarks, and line endpoints.
pub struct FactorGraph {
    noise: NoiseConfig,
    poses: BTreeMap<u64, Pose2>,
    points: BTreeMap<u64, Vector2<f64>>,
    endpoints: BTreeMap<u64, Vector2<f64>>,
    factors: Vec<Factor>,
    next_point: u64,
    next_endpoint: u64,
}

impl FactorGraph {
    pub fn new(noise: NoiseConfig) -> Self {
        Self {
            noise,
            poses: BTreeMap::new(),
            points: BTreeMap::new(),
            endpoints: BTreeMap::new(),
            factors: Vec::new(),
            next_point: 0,
            next_endpoint: 0,
        }
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn add_pose(&mut self, id: u64, initial: Pose2) {
        self.poses.insert(id, initial);
    }

    pub fn pose(&self, id: u64) -> Option<Pose2> {
        self.poses.get(&id).copied()
    }

    pub fn poses(&self) -> impl Iterator<Item = (u64, Pose2)> + '_ {
        self.poses.iter().map(|(&k, &v)| (k, v))
    }

    pub fn n_poses(&self) -> usize {
        self.poses.len()
    }

    pub fn latest_pose_id(&self) -> Option<u64> {
        self.poses.keys().next_back().copied()
    }

    pub fn add_point_variable(&mut self, initial: Vector2<f64>) -> LmVar {
        let id = self.next_point;
        self.next_point += 1;
        self.points.insert(id, initial);
        LmVar::Point(id)
    }

    pub fn add_endpoint_variable(&mut self, initial: Vector2<f64>) -> LmVar {
        let id = self.next_endpoint;
        self.next_endpoint += 1;
        self.endpoints.insert(id, initial);
        LmVar::Endpoint(id)
    }

    pub fn landmark_estimate(&self, var: LmVar) -> Option<Vector2<f64>> {
        match var {
            LmVar::Point(id) => self.points.get(&id).copied(),
            LmVar::Endpoint(id) => self.endpoints.get(&id).copied(),
        }
    }

    pub fn point_estimates(&self) -> impl Iterator<Item = (u64, Vector2<f64>)> + '_ {
        self.points.iter().map(|(&k, &v)| (k, v))
    }

    /// Odometry factor between successive poses. The measurement is the
    /// linear increment `(v dt, 0, omega dt)` treated as an SE(2)
    /// element; the error is `Log(z⁻¹ ∘ (x_i⁻¹ ∘ x_j))`.
    pub fn add_odometry_factor(&mut self, i: u64, j: u64, motion: &MotionState, dt: f64) {
        assert_eq!(j, i + 1, "odometry links successive poses");
        let z = Pose2::new(motion.v * dt, 0.0, motion.omega * dt);
        let it = 1.0 / (self.noise.sigma_xx_t * self.noise.sigma_xx_t);
        let ip = 1.0 / (self.noise.sigma_xx_phi * self.noise.sigma_xx_phi);
        self.factors.push(Factor::Odometry {
            i,
            j,
            z,
            info: Matrix3::from_diagonal(&Vector3::new(it, it, ip)),
        });
    }

    /// Bearing/range observation of a landmark variable from a pose.
    pub fn add_observation_factor(&mut self, pose: u64, var: LmVar, bearing: f64, range: f64) {
        assert!(range > 0.0, "observation range must be positive");
        let ib = 1.0 / (self.noise.sigma_xlp_phi * self.noise.sigma_xlp_phi);
        let ir = 1.0 / (self.noise.sigma_xlp_r * self.noise.sigma_xlp_r);
        self.factors.push(Factor::Observation {
            pose,
            var,
            z_bearing: bearing,
            z_range: range,
            info: Matrix2::from_diagonal(&Vector2::new(ib, ir)),
        });
    }

    /// Unary point-landmark map prior.
    pub fn add_point_prior(&mut self, var: LmVar, m: Vector2<f64>) {
        let LmVar::Point(id) = var else {
            panic!("point prior requires a point variable");
        };
        let il = 1.0 / (self.noise.sigma_lp * self.noise.sigma_lp);
        self.factors.push(Factor::PointPrior {
            var: id,
            m,
            info: Matrix2::from_diagonal(&Vector2::new(il, il)),
        });
    }

    /// Unary line-landmark map prior on an observed endpoint variable.
    ///
    /// The reference point is the orthogonal projection of the current
    /// endpoint estimate onto the map segment (clamped to it, recomputed
    /// at every relinearization). The information matrix penalizes
    /// orthogonal deviations 100x harder than along-line ones.
    pub fn add_line_prior(&mut self, var: LmVar, line: &LineLandmark) -> Result<(), String> {
        let LmVar::Endpoint(id) = var else {
            return Err("line prior requires an endpoint variable".into());
        };
        let len = line.length();
        if len < 1e-9 {
            return Err("degenerate map segment".into());
        }
        let u = line.direction();
        let n = Vector2::new(-u.y, u.x);
        let s_along = 10.0 * self.noise.sigma_ll;
        let s_orth = self.noise.sigma_ll;
        // P = (U diag((10 sigma)^2, sigma^2) U^T)^-1 with U = [u n].
        let basis = Matrix2::from_columns(&[u, n]);
        let info = basis
            * Matrix2::from_diagonal(&Vector2::new(
                1.0 / (s_along * s_along),
                1.0 / (s_orth * s_orth),
            ))
            * basis.transpose();
        self.factors.push(Factor::LinePrior {
            var: id,
            seg_start: line.start,
            seg_end: line.end,
            info,
        });
        Ok(())
    }

    /// Unary SE(2) prior with moderate information, used to anchor an
    /// underconstrained window.
    pub fn add_fallback_pose_prior(&mut self, i: u64, pose: Pose2) {
        let it = 1.0 / (self.noise.sigma_fallback_t * self.noise.sigma_fallback_t);
        let ip = 1.0 / (self.noise.sigma_fallback_phi * self.noise.sigma_fallback_phi);
        self.factors.push(Factor::PosePrior {
            i,
            z: pose,
            info: Matrix3::from_diagonal(&Vector3::new(it, it, ip)),
        });
    }

    /// Pose prior with explicit uncertainties (initialization anchor).
    pub fn add_pose_prior(&mut self, i: u64, pose: Pose2, sigma_t: f64, sigma_phi: f64) {
        let it = 1.0 / (sigma_t * sigma_t);
        let ip = 1.0 / (sigma_phi * sigma_phi);
        self.factors.push(Factor::PosePrior {
            i,
            z: pose,
            info: Matrix3::from_diagonal(&Vector3::new(it, it, ip)),
        });
    }

    /// Number of distinct landmark variables touched by observation
    /// factors (the window constraint count).
    pub fn constrained_landmark_count(&self) -> usize {
        let mut vars: Vec<LmVar> = self
            .factors
            .iter()
            .filter_map(|f| match f {
                Factor::Observation { var, .. } => Some(*var),
                _ => None,
            })
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars.len()
    }

    /// Removes the oldest poses beyond `max_poses` together with their
    /// factors; landmark variables left without observation factors are
    /// dropped too. No marginal prior is synthesized.
    pub fn truncate_window(&mut self, max_poses: usize) {
        while self.poses.len() > max_poses {
            let oldest = *self.poses.keys().next().unwrap();
            self.poses.remove(&oldest);
            self.factors.retain(|f| match f {
                Factor::Odometry { i, j, .. } => *i != oldest && *j != oldest,
                Factor::Observation { pose, .. } => *pose != oldest,
                Factor::PosePrior { i, .. } => *i != oldest,
                _ => true,
            });
        }
        // Landmark variables need at least one remaining observation.
        let mut seen_points: Vec<u64> = Vec::new();
        let mut seen_endpoints: Vec<u64> = Vec::new();
        for f in &self.factors {
            if let Factor::Observation { var, .. } = f {
                match var {
                    LmVar::Point(id) => seen_points.push(*id),
                    LmVar::Endpoint(id) => seen_endpoints.push(*id),
                }
            }
        }
        self.points.retain(|id, _| seen_points.contains(id));
        self.endpoints.retain(|id, _| seen_endpoints.contains(id));
        let points = &self.points;
        let endpoints = &self.endpoints;
        self.factors.retain(|f| match f {
            Factor::PointPrior { var, .. } => points.contains_key(var),
            Factor::LinePrior { var, .. } => endpoints.contains_key(var),
            Factor::Observation { var, .. } => match var {
                LmVar::Point(id) => points.contains_key(id),
                LmVar::Endpoint(id) => endpoints.contains_key(id),
            },
            _ => true,
        });
    }

    fn layout(&self) -> (BTreeMap<VarKey, usize>, usize) {
        let mut offsets = BTreeMap::new();
        let mut n = 0;
        for &id in self.poses.keys() {
            offsets.insert(VarKey::Pose(id), n);
            n += 3;
        }
        for &id in self.points.keys() {
            offsets.insert(VarKey::Point(id), n);
            n += 2;
        }
        for &id in self.endpoints.keys() {
            offsets.insert(VarKey::Endpoint(id), n);
            n += 2;
        }
        (offsets, n)
    }

    /// Total weighted squared error at the current estimates.
    pub fn cost(&self) -> f64 {
        self.factors.iter().map(|f| self.linearize(f).weighted_square()).sum()
    }

    fn linearize(&self, f: &Factor) -> Linearized {
        match f {
            Factor::Odometry { i, j, z, info } => {
                let xi = self.poses[i];
                let xj = self.poses[j];
                let (e, ji, jj) = odometry_error(&xi, &xj, z);
                Linearized {
                    e: DVector::from_column_slice(e.as_slice()),
                    info: DMatrix::from_column_slice(3, 3, info.as_slice()),
                    jacobians: vec![(VarKey::Pose(*i), ji), (VarKey::Pose(*j), jj)],
                }
            }
            Factor::Observation { pose, var, z_bearing, z_range, info } => {
                let x = self.poses[pose];
                let l = self.landmark_estimate(*var).expect("variable exists");
                let (e, jx, jl) = observation_error(&x, l, *z_bearing, *z_range);
                let var_key = match var {
                    LmVar::Point(id) => VarKey::Point(*id),
                    LmVar::Endpoint(id) => VarKey::Endpoint(*id),
                };
                Linearized {
                    e: DVector::from_column_slice(e.as_slice()),
                    info: DMatrix::from_column_slice(2, 2, info.as_slice()),
                    jacobians: vec![(VarKey::Pose(*pose), jx), (var_key, jl)],
                }
            }
            Factor::PointPrior { var, m, info } => {
                let l = self.points[var];
                let e = l - m;
                Linearized {
                    e: DVector::from_column_slice(e.as_slice()),
                    info: DMatrix::from_column_slice(2, 2, info.as_slice()),
                    jacobians: vec![(VarKey::Point(*var), DMatrix::identity(2, 2))],
                }
            }
            Factor::LinePrior { var, seg_start, seg_end, info } => {
                let p = self.endpoints[var];
                let (e, j) = line_prior_error(p, *seg_start, *seg_end);
                Linearized {
                    e: DVector::from_column_slice(e.as_slice()),
                    info: DMatrix::from_column_slice(2, 2, info.as_slice()),
                    jacobians: vec![(VarKey::Endpoint(*var), j)],
                }
            }
            Factor::PosePrior { i, z, info } => {
                let x = self.poses[i];
                let (e, j) = pose_prior_error(&x, z);
                Linearized {
                    e: DVector::from_column_slice(e.as_slice()),
                    info: DMatrix::from_column_slice(3, 3, info.as_slice()),
                    jacobians: vec![(VarKey::Pose(*i), j)],
                }
            }
        }
    }

    /// Levenberg–Marquardt over all variables with analytic Jacobians.
    /// The yaw of every pose is renormalized to `(-pi, pi]` on update.
    pub fn optimize(&mut self, params: &OptimizeParams) -> OptimizeReport {
        let (offsets, n) = self.layout();
        if n == 0 || self.factors.is_empty() {
            return OptimizeReport {
                converged: true,
                iterations: 0,
                initial_cost: 0.0,
                final_cost: 0.0,
            };
        }
        let mut lambda = params.initial_lambda;
        let mut cost = self.cost();
        let initial_cost = cost;
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..params.max_iterations {
            iterations += 1;
            let mut h = DMatrix::<f64>::zeros(n, n);
            let mut b = DVector::<f64>::zeros(n);
            for f in &self.factors {
                let lin = self.linearize(f);
                let pe = &lin.info * &lin.e;
                for (ka, ja) in &lin.jacobians {
                    let oa = offsets[ka];
                    let jt_p = ja.transpose() * &lin.info;
                    let jt_pe = ja.transpose() * &pe;
                    for r in 0..jt_pe.nrows() {
                        b[oa + r] += jt_pe[r];
                    }
                    for (kb, jb) in &lin.jacobians {
                        let ob = offsets[kb];
                        let block = &jt_p * jb;
                        for r in 0..block.nrows() {
                            for c in 0..block.ncols() {
                                h[(oa + r, ob + c)] += block[(r, c)];
                            }
                        }
                    }
                }
            }

            let mut accepted = false;
            for _ in 0..12 {
                let mut damped = h.clone();
                for d in 0..n {
                    damped[(d, d)] += lambda * h[(d, d)].max(1e-9);
                }
                let Some(chol) = damped.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&b));
                let saved = self.snapshot();
                self.apply_step(&offsets, &step);
                let new_cost = self.cost();
                if new_cost <= cost {
                    let rel = if cost > 0.0 { (cost - new_cost) / cost } else { 0.0 };
                    cost = new_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel < params.rel_cost_tol {
                        converged = true;
                    }
                    break;
                }
                self.restore(saved);
                lambda *= 10.0;
                if lambda > 1e12 {
                    break;
                }
            }
            if converged || !accepted {
                break;
            }
        }
        OptimizeReport { converged, iterations, initial_cost, final_cost: cost }
    }

    fn snapshot(&self) -> GraphState {
        GraphState {
            poses: self.poses.clone(),
            points: self.points.clone(),
            endpoints: self.endpoints.clone(),
        }
    }

    fn restore(&mut self, s: GraphState) {
        self.poses = s.poses;
        self.points = s.points;
        self.endpoints = s.endpoints;
    }

    fn apply_step(&mut self, offsets: &BTreeMap<VarKey, usize>, step: &DVector<f64>) {
        for (key, &o) in offsets {
            match key {
                VarKey::Pose(id) => {
                    let p = self.poses.get_mut(id).unwrap();
                    *p = Pose2::new(p.x + step[o], p.y + step[o + 1], p.yaw + step[o + 2]);
                }
                VarKey::Point(id) => {
                    let l = self.points.get_mut(id).unwrap();
                    *l += Vector2::new(step[o], step[o + 1]);
                }
                VarKey::Endpoint(id) => {
                    let l = self.endpoints.get_mut(id).unwrap();
                    *l += Vector2::new(step[o], step[o + 1]);
                }
            }
        }
    }

    /// Residual of factor `idx` at the current estimates.
    pub fn factor_residual(&self, idx: usize) -> DVector<f64> {
        self.linearize(&self.factors[idx]).e
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Central-difference check of factor `idx`'s analytic Jacobians.
    /// Returns the worst relative error over all touched variables.
    pub fn factor_jacobian_fd_error(&mut self, idx: usize, h: f64) -> f64 {
        let factor = self.factors[idx].clone();
        let lin = self.linearize(&factor);
        let mut worst: f64 = 0.0;
        for (key, j_analytic) in &lin.jacobians {
            let dims = match key {
                VarKey::Pose(_) => 3,
                _ => 2,
            };
            for d in 0..dims {
                self.perturb(key, d, h);
                let e_plus = self.linearize(&factor).e;
                self.perturb(key, d, -2.0 * h);
                let e_minus = self.linearize(&factor).e;
                self.perturb(key, d, h);
                let fd = (e_plus - e_minus) / (2.0 * h);
                for r in 0..fd.nrows() {
                    let a = j_analytic[(r, d)];
                    let denom = a.abs().max(1.0);
                    worst = worst.max((fd[r] - a).abs() / denom);
                }
            }
        }
        worst
    }

    fn perturb(&mut self, key: &VarKey, dim: usize, h: f64) {
        match key {
            VarKey::Pose(id) => {
                let p = self.poses.get_mut(id).unwrap();
                match dim {
                    0 => p.x += h,
                    1 => p.y += h,
                    _ => p.yaw += h,
                }
            }
            VarKey::Point(id) => {
                let l = self.points.get_mut(id).unwrap();
                l[dim] += h;
            }
            VarKey::Endpoint(id) => {
                let l = self.endpoints.get_mut(id).unwrap();
                l[dim] += h;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum VarKey {
    Pose(u64),
    Point(u64),
    Endpoint(u64),
}

struct GraphState {
    poses: BTreeMap<u64, Pose2>,
    points: BTreeMap<u64, Vector2<f64>>,
    endpoints: BTreeMap<u64, Vector2<f64>>,
}

struct Linearized {
    e: DVector<f64>,
    info: DMatrix<f64>,
    jacobians: Vec<(VarKey, DMatrix<f64>)>,
}

impl Linearized {
    fn weighted_square(&self) -> f64 {
        (self.e.transpose() * &self.info * &self.e)[(0, 0)]
    }
}

fn rot(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn skew() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// Error `Log(z⁻¹ ∘ (x_i⁻¹ ∘ x_j))` with Jacobians w.r.t. both poses.
fn odometry_error(xi: &Pose2, xj: &Pose2, z: &Pose2) -> (Vector3<f64>, DMatrix<f64>, DMatrix<f64>) {
    let theta = wrap_angle(xj.yaw - xi.yaw - z.yaw);
    let ri_t = rot(xi.yaw).transpose();
    let rz_t = rot(z.yaw).transpose();
    let dt = xj.translation() - xi.translation();
    let t_delta = rz_t * (ri_t * dt - z.translation());
    let w = v_inverse(theta);
    let rho = w * t_delta;

    let g = v_inv_diag_deriv(theta);
    let w_prime = Matrix2::new(g, 0.5, -0.5, g);

    let m = w * rz_t * ri_t; // d rho / d tj
    let dtd_dthi = -(rz_t * skew() * ri_t * dt);
    let drho_dthi = w * dtd_dthi - w_prime * t_delta;
    let drho_dthj = w_prime * t_delta;

    let mut ji = DMatrix::zeros(3, 3);
    let mut jj = DMatrix::zeros(3, 3);
    for r in 0..2 {
        for c in 0..2 {
            ji[(r, c)] = -m[(r, c)];
            jj[(r, c)] = m[(r, c)];
        }
        ji[(r, 2)] = drho_dthi[r];
        jj[(r, 2)] = drho_dthj[r];
    }
    ji[(2, 2)] = -1.0;
    jj[(2, 2)] = 1.0;
    (Vector3::new(rho.x, rho.y, theta), ji, jj)
}

/// Error `Log(z⁻¹ ∘ x)` of a unary pose prior.
fn pose_prior_error(x: &Pose2, z: &Pose2) -> (Vector3<f64>, DMatrix<f64>) {
    let theta = wrap_angle(x.yaw - z.yaw);
    let rz_t = rot(z.yaw).transpose();
    let t_delta = rz_t * (x.translation() - z.translation());
    let w = v_inverse(theta);
    let rho = w * t_delta;
    let g = v_inv_diag_deriv(theta);
    let w_prime = Matrix2::new(g, 0.5, -0.5, g);
    let m = w * rz_t;
    let drho_dth = w_prime * t_delta;
    let mut j = DMatrix::zeros(3, 3);
    for r in 0..2 {
        for c in 0..2 {
            j[(r, c)] = m[(r, c)];
        }
        j[(r, 2)] = drho_dth[r];
    }
    j[(2, 2)] = 1.0;
    (Vector3::new(rho.x, rho.y, theta), j)
}

/// Polar observation error `(wrap(bearing - z_b), range - z_r)`.
fn observation_error(
    x: &Pose2,
    l: Vector2<f64>,
    z_bearing: f64,
    z_range: f64,
) -> (Vector2<f64>, DMatrix<f64>, DMatrix<f64>) {
    let d = l - x.translation();
    let r2 = d.norm_squared().max(1e-12);
    let r = r2.sqrt();
    let bearing = d.y.atan2(d.x) - x.yaw;
    let e = Vector2::new(wrap_angle(bearing - z_bearing), r - z_range);

    let mut jx = DMatrix::zeros(2, 3);
    jx[(0, 0)] = d.y / r2;
    jx[(0, 1)] = -d.x / r2;
    jx[(0, 2)] = -1.0;
    jx[(1, 0)] = -d.x / r;
    jx[(1, 1)] = -d.y / r;

    let mut jl = DMatrix::zeros(2, 2);
    jl[(0, 0)] = -d.y / r2;
    jl[(0, 1)] = d.x / r2;
    jl[(1, 0)] = d.x / r;
    jl[(1, 1)] = d.y / r;
    (e, jx, jl)
}

/// Line map-prior error: deviation of the endpoint from its orthogonal
/// projection onto the map segment (clamped to the segment).
fn line_prior_error(
    p: Vector2<f64>,
    s: Vector2<f64>,
    e: Vector2<f64>,
) -> (Vector2<f64>, DMatrix<f64>) {
    let d = e - s;
    let len = d.norm();
    let u = d / len;
    let along = (p - s).dot(&u);
    if along <= 0.0 {
        return (p - s, DMatrix::identity(2, 2));
    }
    if along >= len {
        return (p - e, DMatrix::identity(2, 2));
    }
    let m = s + u * along;
    let err = p - m;
    // I - u u^T: constant while the projection stays interior.
    let mut j = DMatrix::zeros(2, 2);
    j[(0, 0)] = 1.0 - u.x * u.x;
    j[(0, 1)] = -u.x * u.y;
    j[(1, 0)] = -u.x * u.y;
    j[(1, 1)] = 1.0 - u.y * u.y;
    (err, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn motion(v: f64, omega: f64) -> MotionState {
        MotionState::new(v, omega, 0.0)
    }

    #[test]
    fn odometry_measurement_example() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        g.add_pose(0, Pose2::identity());
        g.add_pose(1, Pose2::new(1.0, 0.0, 0.0));
        g.add_odometry_factor(0, 1, &motion(10.0, 0.0), 0.1);
        // z = (1, 0, 0): consistent chain has zero residual.
        assert_relative_eq!(g.cost(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn odometry_longitudinal_perturbation() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        let x0 = Pose2::new(2.0, -1.0, 0.7);
        let z = Pose2::new(1.0, 0.0, 0.0);
        let x1 = x0.compose(&z).compose(&Pose2::new(0.1, 0.0, 0.0));
        g.add_pose(0, x0);
        g.add_pose(1, x1);
        g.add_odometry_factor(0, 1, &motion(10.0, 0.0), 0.1);
        let e = g.factor_residual(0);
        assert_relative_eq!(e[0], 0.1, epsilon = 1e-9);
        assert_relative_eq!(e[1], 0.0, epsilon = 1e-9);
        assert_relative_eq!(e[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn observation_zero_residual_examples() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        g.add_pose(0, Pose2::identity());
        let l1 = g.add_point_variable(Vector2::new(5.0, 0.0));
        g.add_observation_factor(0, l1, 0.0, 5.0);
        let l2 = g.add_point_variable(Vector2::new(0.0, 5.0));
        g.add_observation_factor(0, l2, std::f64::consts::FRAC_PI_2, 5.0);
        assert_relative_eq!(g.cost(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn bearing_wraps_across_pi() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        g.add_pose(0, Pose2::identity());
        // Landmark just below the negative x axis: bearing about -179 deg.
        let ang = (-179.0f64).to_radians();
        let l = g.add_point_variable(Vector2::new(10.0 * ang.cos(), 10.0 * ang.sin()));
        g.add_observation_factor(0, l, 179f64.to_radians(), 10.0);
        let e = g.factor_residual(0);
        assert_relative_eq!(e[0].abs(), 2f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn point_prior_information_from_table() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        let l = g.add_point_variable(Vector2::new(1.1, 2.0));
        g.add_point_prior(l, Vector2::new(1.0, 2.0));
        // sigma = 0.1 -> information 100; e = (0.1, 0) -> cost = 1.0.
        assert_relative_eq!(g.cost(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn line_prior_projection_and_anisotropy() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        let seg = LineLandmark {
            start: Vector2::new(0.0, 0.0),
            end: Vector2::new(2.0, 0.0),
        };
        let ep = g.add_endpoint_variable(Vector2::new(1.0, 1.0));
        g.add_line_prior(ep, &seg).unwrap();
        let e = g.factor_residual(0);
        assert_relative_eq!(e[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-12);
        // Orthogonal unit error costs 1/sigma^2, along-line 1/(10 sigma)^2.
        assert_relative_eq!(g.cost(), 100.0, epsilon = 1e-9);

        // The same unit displacement along the line (clamped beyond the
        // end) is 100x cheaper.
        let mut g2 = FactorGraph::new(NoiseConfig::default());
        let ep2 = g2.add_endpoint_variable(Vector2::new(3.0, 0.0));
        g2.add_line_prior(ep2, &seg).unwrap();
        let e2 = g2.factor_residual(0);
        assert_relative_eq!(e2[0], 1.0, epsilon = 1e-12); // clamped to end
        assert_relative_eq!(g2.cost(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn line_prior_rejects_degenerate_segment() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        let ep = g.add_endpoint_variable(Vector2::new(0.0, 0.0));
        let seg = LineLandmark { start: Vector2::new(1.0, 1.0), end: Vector2::new(1.0, 1.0) };
        assert!(g.add_line_prior(ep, &seg).is_err());
    }

    #[test]
    fn sliding_endpoint_along_segment_changes_cost_weakly() {
        let seg = LineLandmark { start: Vector2::new(0.0, 0.0), end: Vector2::new(10.0, 0.0) };
        let base = Vector2::new(5.0, 0.2);
        let cost_at = |p: Vector2<f64>| {
            let mut g = FactorGraph::new(NoiseConfig::default());
            let ep = g.add_endpoint_variable(p);
            g.add_line_prior(ep, &seg).unwrap();
            g.cost()
        };
        let c0 = cost_at(base);
        let c_along = cost_at(base + Vector2::new(1.0, 0.0));
        let c_orth = cost_at(base + Vector2::new(0.0, 1.0));
        let d_along = (c_along - c0).abs();
        let d_orth = (c_orth - c0).abs();
        assert!(d_along <= d_orth / 100.0 + 1e-12, "{d_along} vs {d_orth}");
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let mut g = FactorGraph::new(NoiseConfig::default());
            let x0 = Pose2::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-2.5..2.5),
            );
            let x1 = Pose2::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-2.5..2.5),
            );
            g.add_pose(0, x0);
            g.add_pose(1, x1);
            g.add_odometry_factor(
                0,
                1,
                &motion(rng.random_range(0.0..12.0), rng.random_range(-0.5..0.5)),
                0.1,
            );
            let l = g.add_point_variable(Vector2::new(
                rng.random_range(-8.0..8.0),
                rng.random_range(2.0..8.0),
            ));
            g.add_observation_factor(0, l, rng.random_range(-1.0..1.0), rng.random_range(1.0..10.0));
            g.add_point_prior(l, Vector2::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)));
            let ep = g.add_endpoint_variable(Vector2::new(
                rng.random_range(0.5..4.5),
                rng.random_range(-2.0..2.0),
            ));
            let seg = LineLandmark { start: Vector2::new(0.0, 0.1), end: Vector2::new(5.0, -0.3) };
            g.add_line_prior(ep, &seg).unwrap();
            g.add_fallback_pose_prior(1, Pose2::new(0.3, -0.2, 0.4));
            for idx in 0..g.n_factors() {
                let err = g.factor_jacobian_fd_error(idx, 1e-6);
                assert!(err <= 1e-5, "factor {idx} jacobian error {err}");
            }
        }
    }

    #[test]
    fn optimize_two_landmark_resection() {
        let truth = Pose2::new(3.0, -2.0, 0.8);
        let lms = [Vector2::new(10.0, 5.0), Vector2::new(-4.0, 8.0)];
        let mut g = FactorGraph::new(NoiseConfig::default());
        // Perturbed initialization (0.5 m, 5 deg).
        g.add_pose(0, Pose2::new(3.5, -2.0, 0.8 + 5f64.to_radians()));
        for &m in &lms {
            let v = g.add_point_variable(m);
            g.add_point_prior(v, m);
            let d = m - truth.translation();
            let bearing = wrap_angle(d.y.atan2(d.x) - truth.yaw);
            g.add_observation_factor(0, v, bearing, d.norm());
        }
        let report = g.optimize(&OptimizeParams::default());
        assert!(report.converged);
        assert!(report.final_cost <= report.initial_cost);
        let est = g.pose(0).unwrap();
        assert_relative_eq!(est.x, truth.x, epsilon = 1e-6);
        assert_relative_eq!(est.y, truth.y, epsilon = 1e-6);
        assert_relative_eq!(est.yaw, truth.yaw, epsilon = 1e-6);
    }

    #[test]
    fn fallback_prior_reduces_to_dead_reckoning() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        let m = motion(8.0, 0.15);
        let dt = 0.1;
        let z = Pose2::new(m.v * dt, 0.0, m.omega * dt);
        let mut dead = vec![Pose2::new(0.4, 0.3, 0.1)];
        g.add_pose(0, dead[0]);
        g.add_fallback_pose_prior(0, dead[0]);
        for i in 1..20u64 {
            let next = dead.last().unwrap().compose(&z);
            dead.push(next);
            // Deliberately biased initialization.
            g.add_pose(i, Pose2::new(next.x + 0.05, next.y - 0.03, next.yaw));
            g.add_odometry_factor(i - 1, i, &m, dt);
        }
        let report = g.optimize(&OptimizeParams::default());
        assert!(report.final_cost < 1e-15);
        for (i, d) in dead.iter().enumerate() {
            let p = g.pose(i as u64).unwrap();
            assert_relative_eq!(p.x, d.x, epsilon = 1e-9);
            assert_relative_eq!(p.y, d.y, epsilon = 1e-9);
            assert_relative_eq!(p.yaw, d.yaw, epsilon = 1e-9);
        }
    }

    #[test]
    fn gauge_equivariance() {
        // Rigidly transforming the prior and all measurements transforms
        // the solution identically.
        let t = Pose2::new(4.0, -7.0, 1.1);
        let build = |offset: Option<&Pose2>| -> Vec<Pose2> {
            let shift = |p: Pose2| offset.map(|o| o.compose(&p)).unwrap_or(p);
            let mut g = FactorGraph::new(NoiseConfig::default());
            let anchor = shift(Pose2::new(0.2, 0.1, 0.05));
            g.add_pose(0, anchor);
            g.add_pose_prior(0, anchor, 0.01, 0.001);
            let m = motion(6.0, 0.2);
            let mut chain = vec![anchor];
            for i in 1..8u64 {
                let next = chain.last().unwrap().compose(&Pose2::new(0.6, 0.0, 0.02));
                g.add_pose(i, next);
                g.add_odometry_factor(i - 1, i, &m, 0.1);
                chain.push(next);
            }
            // A landmark observed from several poses (relative data).
            let lm_world = shift(Pose2::identity()).transform(Vector2::new(3.0, 2.0));
            let v = g.add_point_variable(lm_world);
            for i in [1u64, 3, 5] {
                let x = chain[i as usize];
                let d = lm_world - x.translation();
                g.add_observation_factor(i, v, wrap_angle(d.y.atan2(d.x) - x.yaw), d.norm());
            }
            g.optimize(&OptimizeParams::default());
            (0..8u64).map(|i| g.pose(i).unwrap()).collect()
        };
        let base = build(None);
        let moved = build(Some(&t));
        for (a, b) in base.iter().zip(&moved) {
            let expect = t.compose(a);
            assert_relative_eq!(expect.x, b.x, epsilon = 1e-9);
            assert_relative_eq!(expect.y, b.y, epsilon = 1e-9);
            assert_relative_eq!(wrap_angle(expect.yaw - b.yaw), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn truncation_drops_poses_and_orphan_landmarks() {
        let mut g = FactorGraph::new(NoiseConfig::default());
        g.add_pose(0, Pose2::identity());
        let lm = g.add_point_variable(Vector2::new(5.0, 0.0));
        g.add_observation_factor(0, lm, 0.0, 5.0);
        g.add_point_prior(lm, Vector2::new(5.0, 0.0));
        let m = motion(5.0, 0.0);
        for i in 1..=4u64 {
            g.add_pose(i, Pose2::new(i as f64 * 0.5, 0.0, 0.0));
            g.add_odometry_factor(i - 1, i, &m, 0.1);
        }
        assert_eq!(g.n_poses(), 5);
        g.truncate_window(3);
        assert_eq!(g.n_poses(), 3);
        assert!(g.pose(0).is_none() && g.pose(1).is_none());
        // The landmark was observed only from pose 0: gone with it.
        assert!(g.landmark_estimate(lm).is_none());
        assert_eq!(g.constrained_landmark_count(), 0);
    }

    #[test]
    fn truncation_regression_newest_pose_stable() {
        // Benign sequence: landmarks visible throughout; truncating the
        // oldest third must not move the newest pose beyond 1e-3 m.
        let lms = [
            Vector2::new(5.0, 4.0),
            Vector2::new(10.0, -3.0),
            Vector2::new(15.0, 5.0),
            Vector2::new(20.0, -4.0),
        ];
        let m = motion(5.0, 0.05);
        let dt = 0.1;
        let z = Pose2::new(m.v * dt, 0.0, m.omega * dt);
        let build = || {
            let mut g = FactorGraph::new(NoiseConfig::default());
            let mut pose = Pose2::identity();
            g.add_pose(0, pose);
            g.add_pose_prior(0, pose, 0.01, 0.001);
            let vars: Vec<LmVar> = lms
                .iter()
                .map(|&p| {
                    let v = g.add_point_variable(p);
                    g.add_point_prior(v, p);
                    v
                })
                .collect();
            for i in 1..30u64 {
                pose = pose.compose(&z);
                g.add_pose(i, pose);
                g.add_odometry_factor(i - 1, i, &m, dt);
                for (k, &v) in vars.iter().enumerate() {
                    let d = lms[k] - pose.translation();
                    if d.norm() < 18.0 {
                        g.add_observation_factor(
                            i,
                            v,
                            wrap_angle(d.y.atan2(d.x) - pose.yaw),
                            d.norm(),
                        );
                    }
                }
            }
            g
        };
        let mut full = build();
        full.optimize(&OptimizeParams::default());
        let newest_full = full.pose(29).unwrap();

        let mut cut = build();
        cut.optimize(&OptimizeParams::default());
        cut.truncate_window(20);
        cut.optimize(&OptimizeParams::default());
        let newest_cut = cut.pose(29).unwrap();
        let d = ((newest_full.x - newest_cut.x).powi(2)
            + (newest_full.y - newest_cut.y).powi(2))
        .sqrt();
        assert!(d <= 1e-3, "newest pose moved {d} m after truncation");
    }

    #[test]
    fn cost_non_increasing_within_optimize() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = FactorGraph::new(NoiseConfig::default());
        g.add_pose(0, Pose2::identity());
        g.add_pose_prior(0, Pose2::identity(), 0.1, 0.05);
        for i in 1..10u64 {
            g.add_pose(
                i,
                Pose2::new(
                    i as f64 + rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.1..0.1),
                ),
            );
            g.add_odometry_factor(i - 1, i, &motion(10.0, 0.0), 0.1);
        }
        let report = g.optimize(&OptimizeParams::default());
        assert!(report.final_cost <= report.initial_cost);
        assert!(report.converged);
    }
}
