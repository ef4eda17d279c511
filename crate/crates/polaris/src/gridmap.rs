//! World-fixed Cartesian covariance gridmaps.
//!
//! Per frame, the static environment is sliced out of the data cube at the
//! Doppler surface implied by the ego motion, producing a dense polar
//! image. Each polar bin above the power floor is scattered into the
//! nearest grid cell (no interpolation) where the outer product of its
//! scattering vector accumulates. Mapping uses the full history of every
//! cell; localization uses a finite sliding window whose eviction is exact
//! because per-frame sums are retained.

use crate::egomotion::{fold_velocity, predict_radial_velocity, MotionState};
use crate::polarimetry::{PolCovariance, PolarizationBasis, C64};
use crate::se2::Pose2;
use crate::simulator::{DataCube, SensorMount};
use nalgebra::{DMatrix, Vector2};
use std::collections::{BTreeSet, VecDeque};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("operation requires sliding-window mode")]
    NotWindowed,
    #[error("grid dump write failed: {0}")]
    Io(String),
}

/// Geometry of a world-fixed grid. Cell `(ix, iy)` covers the half-open
/// square starting at `origin + (ix, iy) * cell_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin: Vector2<f64>,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(origin: Vector2<f64>, cell_size: f64, width: usize, height: usize) -> Self {
        assert!(cell_size > 0.0 && width * height > 0);
        Self { origin, cell_size, width, height }
    }

    /// Grid covering the axis-aligned box `[lo, hi]`.
    pub fn covering(lo: Vector2<f64>, hi: Vector2<f64>, cell_size: f64) -> Self {
        let width = ((hi.x - lo.x) / cell_size).ceil().max(1.0) as usize;
        let height = ((hi.y - lo.y) / cell_size).ceil().max(1.0) as usize;
        Self::new(lo, cell_size, width, height)
    }

    pub fn cell_of(&self, p: Vector2<f64>) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fy = (p.y - self.origin.y) / self.cell_size;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vector2<f64> {
        self.origin
            + Vector2::new((ix as f64 + 0.5) * self.cell_size, (iy as f64 + 0.5) * self.cell_size)
    }
}

/// History policy of a [`CovarianceGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// Keep every contribution (mapping with drift-free poses).
    FullHistory,
    /// Keep only the most recent `window_frames` frames (localization).
    SlidingWindow(u64),
}

struct FrameContrib {
    frame: u64,
    sum: Vec<C64>,
    n: u64,
}

struct CellAccum {
    /// Running sum of outer products, compressed upper triangle.
    sum: Vec<C64>,
    n: u64,
    /// Per-frame contributions, kept only in sliding-window mode.
    frames: VecDeque<FrameContrib>,
}

impl CellAccum {
    fn new(len: usize) -> Self {
        Self { sum: vec![C64::new(0.0, 0.0); len], n: 0, frames: VecDeque::new() }
    }
}

/// Dense world-fixed grid of compressed covariance accumulators.
pub struct CovarianceGrid {
    spec: GridSpec,
    basis: PolarizationBasis,
    mode: GridMode,
    cells: Vec<Option<Box<CellAccum>>>,
    occupied: BTreeSet<usize>,
}

impl CovarianceGrid {
    pub fn new(spec: GridSpec, basis: PolarizationBasis, mode: GridMode) -> Self {
        let n = spec.width * spec.height;
        let mut cells = Vec::with_capacity(n);
        cells.resize_with(n, || None);
        Self { spec, basis, mode, cells, occupied: BTreeSet::new() }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn basis(&self) -> &PolarizationBasis {
        &self.basis
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.spec.width + ix
    }

    fn upper_len(&self) -> usize {
        let q = self.basis.q();
        q * (q + 1) / 2
    }

    /// Adds one scattering observation (given as raw channel values) to a
    /// cell. `frame` attributes the contribution for window eviction.
    pub fn accumulate_at(&mut self, ix: usize, iy: usize, values: &[C64], frame: u64) {
        debug_assert_eq!(values.len(), self.basis.q());
        let q = self.basis.q();
        let windowed = matches!(self.mode, GridMode::SlidingWindow(_));
        let ulen = self.upper_len();
        let idx = self.idx(ix, iy);
        let cell = self.cells[idx].get_or_insert_with(|| Box::new(CellAccum::new(ulen)));
        let mut k = 0;
        let mut outer = [C64::new(0.0, 0.0); 10];
        for i in 0..q {
            for j in i..q {
                outer[k] = values[i] * values[j].conj();
                cell.sum[k] += outer[k];
                k += 1;
            }
        }
        cell.n += 1;
        if windowed {
            let need_new = cell.frames.back().map(|f| f.frame != frame).unwrap_or(true);
            if need_new {
                cell.frames.push_back(FrameContrib {
                    frame,
                    sum: vec![C64::new(0.0, 0.0); ulen],
                    n: 0,
                });
            }
            let fc = cell.frames.back_mut().unwrap();
            for (s, o) in fc.sum.iter_mut().zip(&outer[..ulen]) {
                *s += *o;
            }
            fc.n += 1;
        }
        self.occupied.insert(idx);
    }

    /// Mean covariance of a cell, or `None` when empty.
    pub fn covariance(&self, ix: usize, iy: usize) -> Option<PolCovariance> {
        let cell = self.cells[self.idx(ix, iy)].as_ref()?;
        if cell.n == 0 {
            return None;
        }
        Some(covariance_from_sum(&self.basis, &cell.sum, cell.n))
    }

    /// Sum of outer products and sample count of a cell.
    pub fn raw_sum(&self, ix: usize, iy: usize) -> Option<(&[C64], u64)> {
        let cell = self.cells[self.idx(ix, iy)].as_ref()?;
        (cell.n > 0).then(|| (cell.sum.as_slice(), cell.n))
    }

    pub fn n_samples(&self, ix: usize, iy: usize) -> u64 {
        self.cells[self.idx(ix, iy)].as_ref().map(|c| c.n).unwrap_or(0)
    }

    /// Occupied cells in deterministic (row-major) order.
    pub fn occupied_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.spec.width;
        self.occupied.iter().map(move |&i| (i % w, i / w))
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    /// Bounding box `(ix0, iy0, ix1, iy1)` of occupied cells, inclusive.
    pub fn occupied_bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (ix, iy) in self.occupied_cells() {
            bbox = Some(match bbox {
                None => (ix, iy, ix, iy),
                Some((x0, y0, x1, y1)) => (x0.min(ix), y0.min(iy), x1.max(ix), y1.max(iy)),
            });
        }
        bbox
    }

    /// Drops contributions older than the window. Returns the number of
    /// evicted per-cell frame contributions.
    pub fn evict_window(&mut self, current_frame: u64) -> Result<usize, GridError> {
        let GridMode::SlidingWindow(window) = self.mode else {
            return Err(GridError::NotWindowed);
        };
        let cutoff = current_frame.saturating_sub(window); // evict frames <= cutoff
        let mut evicted = 0;
        let mut emptied: Vec<usize> = Vec::new();
        for &idx in &self.occupied {
            let Some(cell) = self.cells[idx].as_mut() else { continue };
            while let Some(front) = cell.frames.front() {
                if front.frame > cutoff {
                    break;
                }
                let fc = cell.frames.pop_front().unwrap();
                for (s, o) in cell.sum.iter_mut().zip(&fc.sum) {
                    *s -= *o;
                }
                cell.n = cell.n.saturating_sub(fc.n);
                evicted += 1;
            }
            if cell.n == 0 {
                self.cells[idx] = None;
                emptied.push(idx);
            }
        }
        for idx in emptied {
            self.occupied.remove(&idx);
        }
        Ok(evicted)
    }

    /// Per-cell reflection power (covariance trace); empty cells are 0.
    pub fn power_map(&self) -> PowerGrid {
        let mut values = vec![0.0; self.spec.width * self.spec.height];
        let q = self.basis.q();
        for &idx in &self.occupied {
            if let Some(cell) = self.cells[idx].as_ref() {
                if cell.n > 0 {
                    let mut tr = 0.0;
                    let mut k = 0;
                    for i in 0..q {
                        tr += cell.sum[k].re;
                        k += q - i;
                    }
                    values[idx] = tr / cell.n as f64;
                }
            }
        }
        PowerGrid { spec: self.spec.clone(), values }
    }

    /// Writes the debugging dump: a header followed by one record per
    /// non-empty cell `ix iy N re im re im ...` (mean covariance upper
    /// triangle, row-major).
    pub fn dump(&self, w: &mut impl Write) -> Result<(), GridError> {
        let io = |e: std::io::Error| GridError::Io(e.to_string());
        writeln!(w, "polaris-grid v1").map_err(io)?;
        writeln!(w, "origin {:.6} {:.6}", self.spec.origin.x, self.spec.origin.y).map_err(io)?;
        writeln!(w, "cell_size {:.6}", self.spec.cell_size).map_err(io)?;
        writeln!(w, "size {} {}", self.spec.width, self.spec.height).map_err(io)?;
        writeln!(w, "basis {}", self.basis.describe()).map_err(io)?;
        match self.mode {
            GridMode::FullHistory => writeln!(w, "mode full").map_err(io)?,
            GridMode::SlidingWindow(n) => writeln!(w, "mode window {n}").map_err(io)?,
        }
        for (ix, iy) in self.occupied_cells() {
            if let Some(cov) = self.covariance(ix, iy) {
                let mut line = format!("{ix} {iy} {}", cov.n_samples());
                for v in cov.upper_entries() {
                    line.push_str(&format!(" {:.9} {:.9}", v.re, v.im));
                }
                writeln!(w, "{line}").map_err(io)?;
            }
        }
        Ok(())
    }
}

fn covariance_from_sum(basis: &PolarizationBasis, sum: &[C64], n: u64) -> PolCovariance {
    let q = basis.q();
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
    PolCovariance::from_matrix(basis.clone(), &m, n).unwrap()
}

/// Real-valued companion grid (reflection power per cell).
#[derive(Debug, Clone)]
pub struct PowerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl PowerGrid {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.width + ix]
    }
}

/// Dense polar image of the static environment: one scattering vector per
/// range/azimuth bin, taken from the Doppler bin matching the ego motion.
pub struct PolarStaticImage {
    pub n_range: usize,
    pub n_azimuth: usize,
    pub range_res: f64,
    pub azimuth_min: f64,
    pub azimuth_res: f64,
    pub basis: PolarizationBasis,
    pub sensor_id: usize,
    pub t: f64,
    /// Flattened `[range][azimuth][channel]`.
    pub values: Vec<C64>,
}

impl PolarStaticImage {
    pub fn q(&self) -> usize {
        self.basis.q()
    }

    pub fn bin(&self, r: usize, a: usize) -> &[C64] {
        let q = self.q();
        let o = (r * self.n_azimuth + a) * q;
        &self.values[o..o + q]
    }

    pub fn bin_mut(&mut self, r: usize, a: usize) -> &mut [C64] {
        let q = self.q();
        let o = (r * self.n_azimuth + a) * q;
        &mut self.values[o..o + q]
    }

    pub fn range_center(&self, r: usize) -> f64 {
        (r as f64 + 0.5) * self.range_res
    }

    pub fn azimuth_center(&self, a: usize) -> f64 {
        self.azimuth_min + (a as f64 + 0.5) * self.azimuth_res
    }

    pub fn bin_power(&self, r: usize, a: usize) -> f64 {
        self.bin(r, a).iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Extracts the static-environment surface from a data cube: per polar bin
/// the Doppler bin nearest to the motion-implied radial velocity (folded
/// into the unambiguous interval) is selected.
pub fn extract_static_surface(
    cube: &DataCube,
    motion: &MotionState,
    mount: &SensorMount,
) -> PolarStaticImage {
    let q = cube.q();
    let mut img = PolarStaticImage {
        n_range: cube.n_range,
        n_azimuth: cube.n_azimuth,
        range_res: cube.range_res,
        azimuth_min: cube.azimuth_min,
        azimuth_res: cube.azimuth_res,
        basis: cube.basis.clone(),
        sensor_id: 0,
        t: motion.t,
        values: vec![C64::new(0.0, 0.0); cube.n_range * cube.n_azimuth * q],
    };
    for a in 0..cube.n_azimuth {
        let az = cube.azimuth_center(a);
        let vr = fold_velocity(predict_radial_velocity(mount, motion, az), cube.v_unamb);
        let d = cube.doppler_bin(vr);
        for r in 0..cube.n_range {
            img.bin_mut(r, a).copy_from_slice(cube.cell(r, a, d));
        }
    }
    img
}

/// Scatters a polar image into the grid through `pose ∘ mount` using
/// nearest-neighbor cell assignment. Bins at or below `power_floor` and
/// bins mapping outside the grid are dropped. Returns the number of
/// distinct cells touched.
pub fn scatter_to_grid(
    grid: &mut CovarianceGrid,
    image: &PolarStaticImage,
    pose: &Pose2,
    mount: &SensorMount,
    power_floor: f64,
    frame: u64,
) -> usize {
    let sensor_pose = pose.compose(&mount.as_pose());
    let mut touched: Vec<usize> = Vec::new();
    for r in 0..image.n_range {
        let range = image.range_center(r);
        for a in 0..image.n_azimuth {
            let power = image.bin_power(r, a);
            if power <= power_floor {
                continue;
            }
            let az = image.azimuth_center(a);
            let local = Vector2::new(range * az.cos(), range * az.sin());
            let world = sensor_pose.transform(local);
            if let Some((ix, iy)) = grid.spec.cell_of(world) {
                let values: Vec<C64> = image.bin(r, a).to_vec();
                grid.accumulate_at(ix, iy, &values, frame);
                touched.push(grid.idx(ix, iy));
            }
        }
    }
    touched.sort_unstable();
    touched.dedup();
    touched.len()
}
