//! Polarimetric scattering vectors, covariance accumulation, the Wishart
//! dissimilarity, and polarization-basis handling.
//!
//! A scattering event is described by a complex vector `omega` holding the
//! measured channels of the 2x2 scattering matrix. Grid cells accumulate
//! the running mean of the outer products `omega * omega^H`, which yields a
//! Hermitian positive semi-definite covariance per cell. Covariances are
//! stored in compressed form (diagonal plus upper triangle).

use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Relative diagonal loading applied to a reference covariance before
/// inversion: `sigma + eps * tr(sigma)/q * I`.
pub const SIGMA_REG_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarimetryError {
    #[error("polarization basis mismatch: {0} vs {1}")]
    BasisMismatch(String, String),
    #[error("invalid channel set: {0}")]
    InvalidChannels(String),
    #[error("unknown channel label {0}")]
    UnknownChannel(String),
    #[error("basis transform needs full polarimetric input (q >= 3), got q = {0}")]
    InsufficientChannels(usize),
    #[error("reference covariance is singular after regularization")]
    DegenerateReference,
    #[error("scattering vector length {0} does not match basis channel count {1}")]
    LengthMismatch(usize, usize),
}

/// The two supported orthonormal polarization bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Left/right-hand circular, the radar's native basis.
    CircularLR,
    /// Horizontal/vertical linear.
    LinearHV,
}

/// One transmit/receive channel, labeled receive-first (`LR` = received L,
/// transmitted R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    LL,
    LR,
    RL,
    RR,
    HH,
    HV,
    VH,
    VV,
}

impl Channel {
    pub fn kind(self) -> BasisKind {
        match self {
            Channel::LL | Channel::LR | Channel::RL | Channel::RR => BasisKind::CircularLR,
            Channel::HH | Channel::HV | Channel::VH | Channel::VV => BasisKind::LinearHV,
        }
    }

    /// Index into the full 4-channel vector (receive-major order).
    pub fn full_index(self) -> usize {
        match self {
            Channel::LL | Channel::HH => 0,
            Channel::LR | Channel::HV => 1,
            Channel::RL | Channel::VH => 2,
            Channel::RR | Channel::VV => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::LL => "LL",
            Channel::LR => "LR",
            Channel::RL => "RL",
            Channel::RR => "RR",
            Channel::HH => "HH",
            Channel::HV => "HV",
            Channel::VH => "VH",
            Channel::VV => "VV",
        }
    }

    pub fn parse(s: &str) -> Result<Channel, PolarimetryError> {
        Ok(match s {
            "LL" => Channel::LL,
            "LR" => Channel::LR,
            "RL" => Channel::RL,
            "RR" => Channel::RR,
            "HH" => Channel::HH,
            "HV" => Channel::HV,
            "VH" => Channel::VH,
            "VV" => Channel::VV,
            other => return Err(PolarimetryError::UnknownChannel(other.to_string())),
        })
    }
}

/// An ordered set of measured channels, all from one basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolarizationBasis {
    kind: BasisKind,
    channels: Vec<Channel>,
}

impl PolarizationBasis {
    pub fn new(channels: Vec<Channel>) -> Result<Self, PolarimetryError> {
        if channels.is_empty() || channels.len() > 4 {
            return Err(PolarimetryError::InvalidChannels(format!(
                "channel count {} outside 1..=4",
                channels.len()
            )));
        }
        let kind = channels[0].kind();
        for (i, c) in channels.iter().enumerate() {
            if c.kind() != kind {
                return Err(PolarimetryError::InvalidChannels(
                    "mixed circular and linear channels".into(),
                ));
            }
            if channels[..i].contains(c) {
                return Err(PolarimetryError::InvalidChannels(format!(
                    "duplicate channel {}",
                    c.label()
                )));
            }
        }
        // Reciprocal q = 3 sets keep exactly one cross channel.
        if channels.len() == 3 {
            let has = |c: Channel| channels.contains(&c);
            let ok = match kind {
                BasisKind::CircularLR => {
                    has(Channel::LL) && has(Channel::RR) && (has(Channel::LR) ^ has(Channel::RL))
                }
                BasisKind::LinearHV => {
                    has(Channel::HH) && has(Channel::VV) && (has(Channel::HV) ^ has(Channel::VH))
                }
            };
            if !ok {
                return Err(PolarimetryError::InvalidChannels(
                    "q = 3 requires both co-polar channels and one cross channel".into(),
                ));
            }
        }
        Ok(Self { kind, channels })
    }

    /// Full four-channel circular basis `(LL, LR, RL, RR)`.
    pub fn full_circular() -> Self {
        Self::new(vec![Channel::LL, Channel::LR, Channel::RL, Channel::RR]).unwrap()
    }

    /// Full four-channel linear basis `(HH, HV, VH, VV)`.
    pub fn full_linear() -> Self {
        Self::new(vec![Channel::HH, Channel::HV, Channel::VH, Channel::VV]).unwrap()
    }

    /// Reciprocal three-channel circular basis `(LL, LR, RR)`.
    pub fn reciprocal_circular() -> Self {
        Self::new(vec![Channel::LL, Channel::LR, Channel::RR]).unwrap()
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Number of measured channels `q`.
    pub fn q(&self) -> usize {
        self.channels.len()
    }

    /// True if the basis carries full polarimetric information (q >= 3).
    pub fn is_full_pol(&self) -> bool {
        self.q() >= 3
    }

    pub fn describe(&self) -> String {
        self.channels.iter().map(|c| c.label()).collect::<Vec<_>>().join(",")
    }

    fn index_of(&self, c: Channel) -> Option<usize> {
        self.channels.iter().position(|&x| x == c)
    }
}

/// Vectorized scattering matrix observation (linear scale, sqrt-power units).
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringVector {
    pub basis: PolarizationBasis,
    pub values: Vec<C64>,
}

impl ScatteringVector {
    pub fn new(basis: PolarizationBasis, values: Vec<C64>) -> Result<Self, PolarimetryError> {
        if values.len() != basis.q() {
            return Err(PolarimetryError::LengthMismatch(values.len(), basis.q()));
        }
        Ok(Self { basis, values })
    }

    pub fn zeros(basis: PolarizationBasis) -> Self {
        let q = basis.q();
        Self { basis, values: vec![C64::new(0.0, 0.0); q] }
    }

    /// Total power across channels, `|omega|^2`.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Changes the polarization basis of a full-pol vector (q in {3, 4}).
    pub fn transform_basis(&self, target_kind: BasisKind) -> Result<ScatteringVector, PolarimetryError> {
        if !self.basis.is_full_pol() {
            return Err(PolarimetryError::InsufficientChannels(self.basis.q()));
        }
        if self.basis.kind() == target_kind {
            return Ok(self.clone());
        }
        let full = expand_reciprocal(&self.values, &self.basis);
        let a = channel_change_matrix(self.basis.kind(), target_kind);
        let out_full = &a * DMatrix::from_column_slice(4, 1, &full);
        let target = target_basis_like(&self.basis, target_kind);
        let values = target
            .channels()
            .iter()
            .map(|c| out_full[(c.full_index(), 0)])
            .collect();
        Ok(ScatteringVector { basis: target, values })
    }

    /// Restricts the vector to a channel subset, in the given order.
    pub fn select_channels(&self, subset: &[Channel]) -> Result<ScatteringVector, PolarimetryError> {
        let basis = PolarizationBasis::new(subset.to_vec())?;
        let mut values = Vec::with_capacity(subset.len());
        for c in subset {
            let i = self
                .basis
                .index_of(*c)
                .ok_or_else(|| PolarimetryError::UnknownChannel(c.label().to_string()))?;
            values.push(self.values[i]);
        }
        Ok(ScatteringVector { basis, values })
    }
}

/// Compressed Hermitian sample covariance of scattering vectors (Eq. 2
/// style running mean of outer products).
#[derive(Debug, Clone, PartialEq)]
pub struct PolCovariance {
    basis: PolarizationBasis,
    /// Row-major upper triangle including the diagonal, `q(q+1)/2` entries.
    upper: Vec<C64>,
    n_samples: u64,
}

fn upper_len(q: usize) -> usize {
    q * (q + 1) / 2
}

fn upper_index(q: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < q);
    i * (2 * q + 1 - i) / 2 + (j - i)
}

impl PolCovariance {
    pub fn zeros(basis: PolarizationBasis) -> Self {
        let q = basis.q();
        Self { basis, upper: vec![C64::new(0.0, 0.0); upper_len(q)], n_samples: 0 }
    }

    pub fn identity(basis: PolarizationBasis) -> Self {
        let q = basis.q();
        let mut c = Self::zeros(basis);
        for i in 0..q {
            c.upper[upper_index(q, i, i)] = C64::new(1.0, 0.0);
        }
        c.n_samples = 1;
        c
    }

    /// Builds a covariance from a full Hermitian matrix (upper part is read).
    pub fn from_matrix(
        basis: PolarizationBasis,
        m: &DMatrix<C64>,
        n_samples: u64,
    ) -> Result<Self, PolarimetryError> {
        let q = basis.q();
        if m.nrows() != q || m.ncols() != q {
            return Err(PolarimetryError::LengthMismatch(m.nrows(), q));
        }
        let mut upper = Vec::with_capacity(upper_len(q));
        for i in 0..q {
            for j in i..q {
                upper.push(m[(i, j)]);
            }
        }
        Ok(Self { basis, upper, n_samples })
    }

    pub fn basis(&self) -> &PolarizationBasis {
        &self.basis
    }

    pub fn q(&self) -> usize {
        self.basis.q()
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn upper_entries(&self) -> &[C64] {
        &self.upper
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        if i <= j {
            self.upper[upper_index(self.q(), i, j)]
        } else {
            self.upper[upper_index(self.q(), j, i)].conj()
        }
    }

    /// Reconstructs the full Hermitian matrix.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let q = self.q();
        DMatrix::from_fn(q, q, |i, j| self.entry(i, j))
    }

    /// Folds one observation into the running mean of outer products and
    /// increments the sample count.
    pub fn accumulate(&mut self, omega: &ScatteringVector) -> Result<(), PolarimetryError> {
        if omega.basis != self.basis {
            return Err(PolarimetryError::BasisMismatch(
                self.basis.describe(),
                omega.basis.describe(),
            ));
        }
        let q = self.q();
        let n = self.n_samples as f64;
        let w_old = n / (n + 1.0);
        let w_new = 1.0 / (n + 1.0);
        let mut k = 0;
        for i in 0..q {
            for j in i..q {
                let outer = omega.values[i] * omega.values[j].conj();
                self.upper[k] = self.upper[k] * w_old + outer * w_new;
                k += 1;
            }
        }
        self.n_samples += 1;
        Ok(())
    }

    /// Reflection power: trace of the covariance matrix.
    pub fn power(&self) -> f64 {
        let q = self.q();
        (0..q).map(|i| self.upper[upper_index(q, i, i)].re).sum()
    }

    /// Changes the polarization basis (full-pol only, q in {3, 4}).
    pub fn transform_basis(&self, target_kind: BasisKind) -> Result<PolCovariance, PolarimetryError> {
        if !self.basis.is_full_pol() {
            return Err(PolarimetryError::InsufficientChannels(self.q()));
        }
        if self.basis.kind() == target_kind {
            return Ok(self.clone());
        }
        let c4 = expand_reciprocal_matrix(&self.to_matrix(), &self.basis);
        let a = channel_change_matrix(self.basis.kind(), target_kind);
        let out4 = &a * c4 * a.adjoint();
        let target = target_basis_like(&self.basis, target_kind);
        let idx: Vec<usize> = target.channels().iter().map(|c| c.full_index()).collect();
        let q = target.q();
        let m = DMatrix::from_fn(q, q, |i, j| out4[(idx[i], idx[j])]);
        PolCovariance::from_matrix(target, &m, self.n_samples)
    }

    /// Principal submatrix for a channel subset, in the given order.
    pub fn select_channels(&self, subset: &[Channel]) -> Result<PolCovariance, PolarimetryError> {
        let basis = PolarizationBasis::new(subset.to_vec())?;
        let mut src = Vec::with_capacity(subset.len());
        for c in subset {
            src.push(
                self.basis
                    .index_of(*c)
                    .ok_or_else(|| PolarimetryError::UnknownChannel(c.label().to_string()))?,
            );
        }
        let q = subset.len();
        let m = DMatrix::from_fn(q, q, |i, j| self.entry(src[i], src[j]));
        PolCovariance::from_matrix(basis, &m, self.n_samples)
    }
}

/// The fixed channel-change matrix between the circular and linear bases,
/// acting on full 4-channel scattering vectors.
///
/// Convention: `E_L = (E_H - i E_V)/sqrt(2)`, `E_R = (E_H + i E_V)/sqrt(2)`,
/// scattering matrices map as `S_circ = U S_lin U^T`, so the vectorized form
/// uses the unitary Kronecker product `U (x) U`. With this convention a
/// trihedral (odd-bounce) response lands in the circular cross channels and
/// a dihedral (even-bounce) response in the circular co-polar channels.
pub fn channel_change_matrix(from: BasisKind, to: BasisKind) -> DMatrix<C64> {
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    // U maps linear components to circular components.
    let u = DMatrix::from_row_slice(2, 2, &[s * one, s * (-i), s * one, s * i]);
    let a_lin_to_circ = kron2(&u, &u);
    match (from, to) {
        (BasisKind::LinearHV, BasisKind::CircularLR) => a_lin_to_circ,
        (BasisKind::CircularLR, BasisKind::LinearHV) => a_lin_to_circ.adjoint(),
        _ => DMatrix::identity(4, 4),
    }
}

fn kron2(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

fn target_basis_like(source: &PolarizationBasis, target_kind: BasisKind) -> PolarizationBasis {
    let map = |c: &Channel| -> Channel {
        match (c.full_index(), target_kind) {
            (0, BasisKind::CircularLR) => Channel::LL,
            (1, BasisKind::CircularLR) => Channel::LR,
            (2, BasisKind::CircularLR) => Channel::RL,
            (3, BasisKind::CircularLR) => Channel::RR,
            (0, BasisKind::LinearHV) => Channel::HH,
            (1, BasisKind::LinearHV) => Channel::HV,
            (2, BasisKind::LinearHV) => Channel::VH,
            _ => Channel::VV,
        }
    };
    PolarizationBasis::new(source.channels().iter().map(map).collect()).unwrap()
}

/// Expands a reciprocal q = 3 vector to the full 4-channel layout by
/// duplicating the stored cross channel; q = 4 passes through.
fn expand_reciprocal(values: &[C64], basis: &PolarizationBasis) -> Vec<C64> {
    let mut full = vec![C64::new(0.0, 0.0); 4];
    for (v, c) in values.iter().zip(basis.channels()) {
        full[c.full_index()] = *v;
        if basis.q() == 3 && matches!(c.full_index(), 1 | 2) {
            full[1] = *v;
            full[2] = *v;
        }
    }
    full
}

fn expand_reciprocal_matrix(m: &DMatrix<C64>, basis: &PolarizationBasis) -> DMatrix<C64> {
    // Duplication matrix G with omega4 = G omega3 gives C4 = G C3 G^H.
    let mut g = DMatrix::zeros(4, basis.q());
    for (col, c) in basis.channels().iter().enumerate() {
        g[(c.full_index(), col)] = C64::new(1.0, 0.0);
        if basis.q() == 3 && matches!(c.full_index(), 1 | 2) {
            g[(1, col)] = C64::new(1.0, 0.0);
            g[(2, col)] = C64::new(1.0, 0.0);
        }
    }
    &g * m * g.adjoint()
}

/// Wishart dissimilarity `q⁻¹ (ln|sigma| + tr(sigma⁻¹ c))` between a cell
/// covariance and a reference covariance.
///
/// The reference is diagonally loaded with `SIGMA_REG_EPS * tr(sigma)/q`
/// before inversion; a reference that stays singular is reported as an
/// error.
pub fn wishart_distance(c: &PolCovariance, sigma: &PolCovariance) -> Result<f64, PolarimetryError> {
    if c.basis != sigma.basis {
        return Err(PolarimetryError::BasisMismatch(
            sigma.basis.describe(),
            c.basis.describe(),
        ));
    }
    let q = c.q();
    let (log_det, trace_term) = wishart_parts(&c.to_matrix(), &sigma.to_matrix(), 0.0)?;
    Ok((log_det + trace_term) / q as f64)
}

/// Background-calibrated detection score `tr(sigma⁻¹ c) / q`.
///
/// Equals `wishart_distance` minus its homogeneous-background offset
/// `ln|sigma|/q`, so the score is invariant to a common power scaling of
/// cell and reference. `abs_floor` is an absolute diagonal load that keeps
/// an all-empty reference invertible.
pub fn wishart_score(
    c: &PolCovariance,
    sigma: &PolCovariance,
    abs_floor: f64,
) -> Result<f64, PolarimetryError> {
    if c.basis != sigma.basis {
        return Err(PolarimetryError::BasisMismatch(
            sigma.basis.describe(),
            c.basis.describe(),
        ));
    }
    let q = c.q();
    let (_, trace_term) = wishart_parts(&c.to_matrix(), &sigma.to_matrix(), abs_floor)?;
    Ok(trace_term / q as f64)
}

fn wishart_parts(
    c: &DMatrix<C64>,
    sigma: &DMatrix<C64>,
    abs_floor: f64,
) -> Result<(f64, f64), PolarimetryError> {
    let q = sigma.nrows();
    let mut reg = sigma.clone();
    let load = (SIGMA_REG_EPS * trace_re(sigma) / q as f64).max(abs_floor);
    for i in 0..q {
        reg[(i, i)] += C64::new(load, 0.0);
    }
    let chol = reg
        .clone()
        .cholesky()
        .ok_or(PolarimetryError::DegenerateReference)?;
    let l = chol.l();
    let mut log_det = 0.0;
    for i in 0..q {
        let d = l[(i, i)].re;
        if d <= 0.0 || !d.is_finite() {
            return Err(PolarimetryError::DegenerateReference);
        }
        log_det += 2.0 * d.ln();
    }
    let solved = chol.solve(c);
    Ok((log_det, trace_re(&solved)))
}

fn trace_re(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}
