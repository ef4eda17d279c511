//! Point-landmark detection on covariance grids.

use crate::gridmap::CovarianceGrid;
use crate::polarimetry::{C64, SIGMA_REG_EPS};
use crate::spatial::UnionFind;
use nalgebra::{DMatrix, Vector2};
use std::collections::BTreeMap;

/// Detector parameters. The train annulus spans Chebyshev distances
/// `guard_radius < d <= train_radius` around the cell under test.
#[derive(Debug, Clone)]
pub struct PcfarParams {
    pub guard_radius: usize,
    pub train_radius: usize,
    /// Detection threshold on the background-calibrated Wishart score;
    /// a homogeneous neighborhood scores 1.
    pub threshold: f64,
    /// Minimum connected-component area in cells.
    pub min_area: usize,
    /// Minimum sample count of the cell under test.
    pub min_samples: u64,
    /// Absolute diagonal load keeping sparse references invertible.
    pub sigma_floor: f64,
}

impl Default for PcfarParams {
    fn default() -> Self {
        Self {
            guard_radius: 2,
            train_radius: 5,
            threshold: 1.8,
            min_area: 2,
            min_samples: 5,
            sigma_floor: 1e-6,
        }
    }
}

/// Detected point-landmark candidate.
#[derive(Debug, Clone)]
pub struct PointCandidate {
    /// Score-weighted centroid in world meters.
    pub position: Vector2<f64>,
    /// Peak detection score of the component.
    pub score: f64,
    /// Component area in cells.
    pub support: usize,
}

/// Runs the covariance CFAR detector over all occupied cells.
///
/// For each cell under test with at least `min_samples` observations, the
/// sample-weighted average covariance of the train annulus (guard cells
/// excluded) forms the reference; the cell is marked when the calibrated
/// Wishart score `tr(sigma⁻¹ c) / q` exceeds the threshold. The score is
/// the Wishart dissimilarity minus its homogeneous-background offset
/// `ln|sigma|/q`, which keeps the marked set invariant to a common power
/// scaling of the data. Marked cells are grouped 8-connected; components
/// of sufficient area yield one candidate each at the score-weighted
/// centroid of their cell centers.
pub fn pcfar_detect(grid: &CovarianceGrid, params: &PcfarParams) -> Vec<PointCandidate> {
    assert!(
        params.train_radius > params.guard_radius,
        "train radius must exceed guard radius"
    );
    let q = grid.basis().q();
    let ulen = q * (q + 1) / 2;
    let spec = grid.spec().clone();
    let mut marked: BTreeMap<(usize, usize), f64> = BTreeMap::new();

    let mut sigma_sum = vec![C64::new(0.0, 0.0); ulen];
    for (ix, iy) in grid.occupied_cells() {
        let n_cut = grid.n_samples(ix, iy);
        if n_cut < params.min_samples {
            continue;
        }
        // Sample-weighted annulus average.
        sigma_sum.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let mut n_train: u64 = 0;
        let g = params.guard_radius as isize;
        let t = params.train_radius as isize;
        for dy in -t..=t {
            for dx in -t..=t {
                let cheb = dx.abs().max(dy.abs());
                if cheb <= g {
                    continue;
                }
                let (nx, ny) = (ix as isize + dx, iy as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= spec.width || ny as usize >= spec.height {
                    continue;
                }
                if let Some((sum, n)) = grid.raw_sum(nx as usize, ny as usize) {
                    for (s, v) in sigma_sum.iter_mut().zip(sum) {
                        *s += *v;
                    }
                    n_train += n;
                }
            }
        }
        let cut = grid.raw_sum(ix, iy).expect("occupied cell");
        if let Some(score) =
            calibrated_score(q, cut, &sigma_sum, n_train, params.sigma_floor)
        {
            if score > params.threshold {
                marked.insert((ix, iy), score);
            }
        }
    }

    // 8-connected components over the marked set.
    let keys: Vec<(usize, usize)> = marked.keys().copied().collect();
    let index: BTreeMap<(usize, usize), usize> =
        keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut uf = UnionFind::new(keys.len());
    for (i, &(ix, iy)) in keys.iter().enumerate() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = ix as i64 + dx;
                let ny = iy as i64 + dy;
                if nx < 0 || ny < 0 {
                    continue;
                }
                if let Some(&j) = index.get(&(nx as usize, ny as usize)) {
                    uf.union(i, j);
                }
            }
        }
    }

    let mut candidates = Vec::new();
    for comp in uf.components() {
        if comp.len() < params.min_area {
            continue;
        }
        let mut weight = 0.0;
        let mut centroid = Vector2::zeros();
        let mut peak = f64::NEG_INFINITY;
        for &i in &comp {
            let (ix, iy) = keys[i];
            let score = marked[&keys[i]];
            centroid += spec.cell_center(ix, iy) * score;
            weight += score;
            peak = peak.max(score);
        }
        candidates.push(PointCandidate {
            position: centroid / weight,
            score: peak,
            support: comp.len(),
        });
    }
    candidates
}

/// Score `tr(sigma_reg⁻¹ c) / q` from raw outer-product sums. The
/// reference is diagonally loaded with the larger of the relative term
/// `SIGMA_REG_EPS tr(sigma)/q` and `sigma_floor`.
fn calibrated_score(
    q: usize,
    cut: (&[C64], u64),
    sigma_sum: &[C64],
    n_train: u64,
    sigma_floor: f64,
) -> Option<f64> {
    let (cut_sum, n_cut) = cut;
    let c = unpack_mean(q, cut_sum, n_cut);
    let sigma = if n_train > 0 {
        unpack_mean(q, sigma_sum, n_train)
    } else {
        DMatrix::from_element(q, q, C64::new(0.0, 0.0))
    };
    let mut trace = 0.0;
    for i in 0..q {
        trace += sigma[(i, i)].re;
    }
    let load = (SIGMA_REG_EPS * trace / q as f64).max(sigma_floor);
    let mut reg = sigma;
    for i in 0..q {
        reg[(i, i)] += C64::new(load, 0.0);
    }
    let chol = reg.cholesky()?;
    let solved = chol.solve(&c);
    let mut tr = 0.0;
    for i in 0..q {
        tr += solved[(i, i)].re;
    }
    Some(tr / q as f64)
}

fn unpack_mean(q: usize, sum: &[C64], n: u64) -> DMatrix<C64> {
    let inv = 1.0 / n as f64;
    let mut m = DMatrix::from_element(q, q, C64::new(0.0, 0.0));
    let mut k = 0;
    for i in 0..q {
        for j in i..q {
            m[(i, j)] = sum[k] * inv;
            if i != j {
                m[(j, i)] = m[(i, j)].conj();
            }
            k += 1;
        }
    }
    m
}
