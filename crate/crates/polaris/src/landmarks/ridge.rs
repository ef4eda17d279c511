//! Line-segment extraction from the power map.
//!
//! No polarimetric information enters here: a median filter suppresses
//! speckle, the Hessian eigenvalues give a ridgeness score, the
//! thresholded score is thinned to a one-cell skeleton, and a Hough
//! transform peels line segments off the skeleton deterministically.

use crate::gridmap::PowerGrid;
use nalgebra::Vector2;

#[derive(Debug, Clone)]
pub struct RidgeParams {
    /// Median filter radius in cells (1 = 3x3). 0 disables the filter.
    pub median_radius: usize,
    /// Gaussian pre-smoothing scale for the Hessian, in cells.
    pub ridge_sigma: f64,
    /// Ridgeness threshold as a multiple of the median nonzero ridgeness.
    pub threshold_factor: f64,
    /// Hough distance resolution in cells.
    pub rho_res: f64,
    /// Hough angle resolution in degrees.
    pub theta_res_deg: f64,
    /// Minimum segment length in meters.
    pub min_length_m: f64,
    /// Maximum bridged gap along a line in meters.
    pub max_gap_m: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self {
            median_radius: 1,
            ridge_sigma: 1.0,
            threshold_factor: 3.0,
            rho_res: 1.0,
            theta_res_deg: 1.0,
            min_length_m: 1.0,
            max_gap_m: 0.5,
        }
    }
}

/// Extracted line-segment candidate in world meters.
#[derive(Debug, Clone)]
pub struct LineCandidate {
    pub start: Vector2<f64>,
    pub end: Vector2<f64>,
    /// Number of skeleton cells supporting the segment.
    pub support: usize,
}

impl LineCandidate {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

struct Raster {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Raster {
    fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.w + x] = v;
    }
}

/// Extracts line segments from a power map. Returns segments in world
/// meters; cells are addressed by their centers.
pub fn ridge_lines(power: &PowerGrid, params: &RidgeParams) -> Vec<LineCandidate> {
    // Crop to the occupied bounding box plus filter margin.
    let spec = &power.spec;
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for iy in 0..spec.height {
        for ix in 0..spec.width {
            if power.get(ix, iy) > 0.0 {
                bbox = Some(match bbox {
                    None => (ix, iy, ix, iy),
                    Some((x0, y0, x1, y1)) => (x0.min(ix), y0.min(iy), x1.max(ix), y1.max(iy)),
                });
            }
        }
    }
    let Some((x0, y0, x1, y1)) = bbox else {
        return Vec::new();
    };
    let margin = 3 + params.median_radius + (3.0 * params.ridge_sigma).ceil() as usize;
    let cx0 = x0.saturating_sub(margin);
    let cy0 = y0.saturating_sub(margin);
    let cx1 = (x1 + margin).min(spec.width - 1);
    let cy1 = (y1 + margin).min(spec.height - 1);
    let (w, h) = (cx1 - cx0 + 1, cy1 - cy0 + 1);
    let mut raster = Raster { w, h, data: vec![0.0; w * h] };
    for y in 0..h {
        for x in 0..w {
            raster.set(x, y, power.get(cx0 + x, cy0 + y));
        }
    }

    if params.median_radius > 0 {
        raster = median_filter(&raster, params.median_radius);
    }
    if params.ridge_sigma > 0.0 {
        raster = gaussian_blur(&raster, params.ridge_sigma);
    }
    let ridgeness = hessian_ridgeness(&raster);

    // Threshold at a multiple of the median nonzero ridgeness.
    let mut nonzero: Vec<f64> = ridgeness.data.iter().copied().filter(|&v| v > 0.0).collect();
    if nonzero.is_empty() {
        return Vec::new();
    }
    nonzero.sort_by(f64::total_cmp);
    let median = nonzero[nonzero.len() / 2];
    let threshold = params.threshold_factor * median;
    let mut mask: Vec<bool> = ridgeness.data.iter().map(|&v| v > threshold).collect();

    skeletonize(&mut mask, w, h);

    let cell = spec.cell_size;
    let min_len_cells = params.min_length_m / cell;
    let max_gap_cells = params.max_gap_m / cell;
    let segments = hough_segments(&mask, w, h, params, min_len_cells, max_gap_cells);

    segments
        .into_iter()
        .map(|(a, b, support)| LineCandidate {
            start: spec.cell_center(cx0 + 0, cy0 + 0)
                + Vector2::new(a.x * cell, a.y * cell),
            end: spec.cell_center(cx0 + 0, cy0 + 0) + Vector2::new(b.x * cell, b.y * cell),
            support,
        })
        .collect()
}

fn median_filter(src: &Raster, radius: usize) -> Raster {
    let (w, h) = (src.w, src.h);
    let mut out = Raster { w, h, data: vec![0.0; w * h] };
    let r = radius as isize;
    let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
    for y in 0..h as isize {
        for x in 0..w as isize {
            window.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                        window.push(src.get(nx as usize, ny as usize));
                    } else {
                        window.push(0.0);
                    }
                }
            }
            window.sort_by(f64::total_cmp);
            out.set(x as usize, y as usize, window[window.len() / 2]);
        }
    }
    out
}

fn gaussian_blur(src: &Raster, sigma: f64) -> Raster {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0;
    for i in -radius..=radius {
        let v = (-(i * i) as f64 / (2.0 * sigma * sigma)).exp();
        kernel.push(v);
        sum += v;
    }
    for v in &mut kernel {
        *v /= sum;
    }
    let (w, h) = (src.w, src.h);
    let mut tmp = Raster { w, h, data: vec![0.0; w * h] };
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let nx = x as isize + k as isize - radius;
                if nx >= 0 && nx < w as isize {
                    acc += kv * src.get(nx as usize, y);
                }
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Raster { w, h, data: vec![0.0; w * h] };
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let ny = y as isize + k as isize - radius;
                if ny >= 0 && ny < h as isize {
                    acc += kv * tmp.get(x, ny as usize);
                }
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Ridgeness `max(0, -lambda_min)` of the Hessian from central differences.
fn hessian_ridgeness(src: &Raster) -> Raster {
    let (w, h) = (src.w, src.h);
    let mut out = Raster { w, h, data: vec![0.0; w * h] };
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let dxx = src.get(x + 1, y) - 2.0 * src.get(x, y) + src.get(x - 1, y);
            let dyy = src.get(x, y + 1) - 2.0 * src.get(x, y) + src.get(x, y - 1);
            let dxy = (src.get(x + 1, y + 1) - src.get(x + 1, y - 1) - src.get(x - 1, y + 1)
                + src.get(x - 1, y - 1))
                / 4.0;
            let mean = 0.5 * (dxx + dyy);
            let disc = (0.5 * (dxx - dyy)).hypot(dxy);
            let lambda_min = mean - disc;
            out.set(x, y, (-lambda_min).max(0.0));
        }
    }
    out
}

/// Guo–Hall thinning to a one-cell-wide skeleton (thins diagonals
/// properly, which plain Zhang–Suen does not).
fn skeletonize(mask: &mut [bool], w: usize, h: usize) {
    let idx = |x: usize, y: usize| y * w + x;
    let mut changed = true;
    while changed {
        changed = false;
        for phase in 0..2 {
            let mut to_clear = Vec::new();
            for y in 1..h.saturating_sub(1) {
                for x in 1..w.saturating_sub(1) {
                    if !mask[idx(x, y)] {
                        continue;
                    }
                    // Neighbors clockwise from north.
                    let p = [
                        mask[idx(x, y - 1)],
                        mask[idx(x + 1, y - 1)],
                        mask[idx(x + 1, y)],
                        mask[idx(x + 1, y + 1)],
                        mask[idx(x, y + 1)],
                        mask[idx(x - 1, y + 1)],
                        mask[idx(x - 1, y)],
                        mask[idx(x - 1, y - 1)],
                    ];
                    let c = (!p[0] && (p[1] || p[2])) as usize
                        + (!p[2] && (p[3] || p[4])) as usize
                        + (!p[4] && (p[5] || p[6])) as usize
                        + (!p[6] && (p[7] || p[0])) as usize;
                    let n1 = (p[7] || p[0]) as usize
                        + (p[1] || p[2]) as usize
                        + (p[3] || p[4]) as usize
                        + (p[5] || p[6]) as usize;
                    let n2 = (p[0] || p[1]) as usize
                        + (p[2] || p[3]) as usize
                        + (p[4] || p[5]) as usize
                        + (p[6] || p[7]) as usize;
                    let n = n1.min(n2);
                    let m = if phase == 0 {
                        (p[4] || p[5] || !p[7]) && p[6]
                    } else {
                        (p[0] || p[1] || !p[3]) && p[2]
                    };
                    if c == 1 && (2..=3).contains(&n) && !m {
                        to_clear.push(idx(x, y));
                    }
                }
            }
            if !to_clear.is_empty() {
                changed = true;
                for i in to_clear {
                    mask[i] = false;
                }
            }
        }
    }
}

/// Deterministic Hough segment peeling: repeatedly take the strongest
/// (theta, rho) bin, walk its pixel band along the line direction, emit
/// runs longer than the minimum with gaps below the maximum, and remove
/// consumed pixels from the accumulator.
fn hough_segments(
    mask: &[bool],
    w: usize,
    h: usize,
    params: &RidgeParams,
    min_len_cells: f64,
    max_gap_cells: f64,
) -> Vec<(Vector2<f64>, Vector2<f64>, usize)> {
    let mut pixels: Vec<(f64, f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask[y * w + x] {
                pixels.push((x as f64, y as f64));
            }
        }
    }
    if pixels.is_empty() {
        return Vec::new();
    }
    let n_theta = (180.0 / params.theta_res_deg).round() as usize;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| {
            let th = (t as f64 * params.theta_res_deg).to_radians();
            th.sin_cos()
        })
        .collect();
    let max_rho = ((w * w + h * h) as f64).sqrt();
    let n_rho = (2.0 * max_rho / params.rho_res).ceil() as usize + 1;
    let rho_idx = |rho: f64| -> usize {
        (((rho + max_rho) / params.rho_res).floor() as isize).clamp(0, n_rho as isize - 1) as usize
    };
    let mut acc = vec![0i32; n_theta * n_rho];
    let mut alive = vec![true; pixels.len()];
    for &(x, y) in &pixels {
        for (t, &(s, c)) in trig.iter().enumerate() {
            acc[t * n_rho + rho_idx(x * c + y * s)] += 1;
        }
    }
    let min_votes = min_len_cells.floor().max(2.0) as i32;
    let mut segments = Vec::new();

    loop {
        // Strongest bin; ties resolved toward lower indices.
        let (mut best_bin, mut best_votes) = (0usize, 0i32);
        for (i, &v) in acc.iter().enumerate() {
            if v > best_votes {
                best_votes = v;
                best_bin = i;
            }
        }
        if best_votes < min_votes {
            break;
        }
        let t = best_bin / n_rho;
        let r = best_bin % n_rho;
        let (s, c) = trig[t];
        let rho_center = (r as f64 + 0.5) * params.rho_res - max_rho;

        // Pixels within one rho resolution of the bin center.
        let mut band: Vec<(f64, usize)> = Vec::new();
        for (i, &(x, y)) in pixels.iter().enumerate() {
            if alive[i] && (x * c + y * s - rho_center).abs() <= params.rho_res {
                band.push((-x * s + y * c, i));
            }
        }
        band.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut consumed: Vec<usize> = Vec::new();
        let mut run: Vec<(f64, usize)> = Vec::new();
        let flush = |run: &mut Vec<(f64, usize)>,
                         segments: &mut Vec<(Vector2<f64>, Vector2<f64>, usize)>,
                         consumed: &mut Vec<usize>| {
            if run.len() >= 2 {
                let extent = run.last().unwrap().0 - run[0].0;
                if extent >= min_len_cells {
                    let a = pixels[run[0].1];
                    let b = pixels[run.last().unwrap().1];
                    segments.push((
                        Vector2::new(a.0, a.1),
                        Vector2::new(b.0, b.1),
                        run.len(),
                    ));
                    consumed.extend(run.iter().map(|&(_, i)| i));
                }
            }
            run.clear();
        };
        for &(proj, i) in &band {
            if let Some(&(last, _)) = run.last() {
                if proj - last > max_gap_cells {
                    flush(&mut run, &mut segments, &mut consumed);
                }
            }
            run.push((proj, i));
        }
        flush(&mut run, &mut segments, &mut consumed);

        if consumed.is_empty() {
            // Nothing usable along this orientation; retire the bin.
            acc[best_bin] = 0;
            continue;
        }
        for i in consumed {
            if alive[i] {
                alive[i] = false;
                let (x, y) = pixels[i];
                for (t2, &(s2, c2)) in trig.iter().enumerate() {
                    acc[t2 * n_rho + rho_idx(x * c2 + y * s2)] -= 1;
                }
            }
        }
    }
    segments
}
