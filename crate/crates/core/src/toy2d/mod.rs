//! Planar study with pixelised line cameras.
//!
//! Each camera images the plane onto a 1-D sensor of `N` pixels. The pixel
//! boundary rays of all cameras cut the plane into convex cells on which
//! every pixel reading is constant, so the expected squared error of an
//! estimator (which depends only on the readings) is a finite sum of exact
//! polygon integrals.

mod optimize;
mod polygon;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use optimize::{grid_search, nelder_mead};
pub use polygon::{bounding_box, Point2, Polygon};

use crate::error::{Error, Result};
use crate::numerics::symmetric_eigen;

/// Grid resolution per axis used by [`bruteforce_optimum`] when none is given.
pub const DEFAULT_GRID_RESOLUTION: usize = 2001;

/// Pinhole camera of the plane with a pixelised 1-D sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera2D {
    centre: Point2,
    angle: f64,
    focal_length: f64,
    pixel_count: usize,
    pixel_pitch: f64,
    axis: Point2,
    lateral: Point2,
}

/// What a camera reads for a world point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Behind,
    Left,
    Pixel(usize),
    Right,
}

impl Camera2D {
    /// `angle` is the direction of the optical axis; image coordinates grow
    /// to the right of it.
    pub fn new(
        centre: Point2,
        angle: f64,
        focal_length: f64,
        pixel_count: usize,
        pixel_pitch: f64,
    ) -> Result<Self> {
        if !(focal_length > 0.0 && focal_length.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "focal length must be positive, got {focal_length}"
            )));
        }
        if pixel_count == 0 || !(pixel_pitch > 0.0) {
            return Err(Error::InvalidCamera(
                "need at least one pixel of positive pitch".into(),
            ));
        }
        if !(centre.iter().all(|v| v.is_finite()) && angle.is_finite()) {
            return Err(Error::InvalidCamera("non-finite pose".into()));
        }
        let axis = Point2::new(angle.cos(), angle.sin());
        Ok(Self {
            centre,
            angle,
            focal_length,
            pixel_count,
            pixel_pitch,
            axis,
            lateral: Point2::new(axis.y, -axis.x),
        })
    }

    pub fn centre(&self) -> Point2 {
        self.centre
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn depth(&self, x: &Point2) -> f64 {
        self.axis.dot(&(x - self.centre))
    }

    /// Image coordinate `f·lateral/depth`; meaningful only for positive depth.
    pub fn project(&self, x: &Point2) -> f64 {
        let r = x - self.centre;
        self.focal_length * self.lateral.dot(&r) / self.axis.dot(&r)
    }

    /// Image coordinate of pixel boundary `j ∈ 0..=N`.
    pub fn boundary(&self, j: usize) -> f64 {
        (j as f64 - self.pixel_count as f64 / 2.0) * self.pixel_pitch
    }

    pub fn pixel_centre(&self, k: usize) -> f64 {
        self.boundary(k) + self.pixel_pitch / 2.0
    }

    /// The line `{X : n·X = c}` of boundary `j`, oriented so that `n·X > c`
    /// means an image coordinate above the boundary (in front of the camera).
    pub fn boundary_line(&self, j: usize) -> (Point2, f64) {
        let n = self.lateral * self.focal_length - self.axis * self.boundary(j);
        (n, n.dot(&self.centre))
    }

    pub fn label(&self, x: &Point2) -> Label {
        if self.depth(x) <= 0.0 {
            return Label::Behind;
        }
        let u = self.project(x);
        if u < self.boundary(0) {
            Label::Left
        } else if u >= self.boundary(self.pixel_count) {
            Label::Right
        } else {
            Label::Pixel(
                (((u - self.boundary(0)) / self.pixel_pitch) as usize).min(self.pixel_count - 1),
            )
        }
    }
}

/// Parallel cameras facing `+y`, centres evenly spaced on `[-h, h] × {0}`.
pub fn linear_array(
    m: usize,
    half_baseline: f64,
    focal_length: f64,
    pixel_count: usize,
    pitch: f64,
) -> Result<Vec<Camera2D>> {
    (0..m)
        .map(|i| {
            let x = even_position(m, i, half_baseline);
            Camera2D::new(
                Point2::new(x, 0.0),
                std::f64::consts::FRAC_PI_2,
                focal_length,
                pixel_count,
                pitch,
            )
        })
        .collect()
}

fn even_position(m: usize, i: usize, half_baseline: f64) -> f64 {
    if m == 1 {
        0.0
    } else {
        -half_baseline + 2.0 * half_baseline * i as f64 / (m - 1) as f64
    }
}

/// How centres are spread along the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Even,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub polygon: Polygon,
    pub signature: Vec<Label>,
}

impl Cell {
    /// Readings of a cell seen by every camera.
    pub fn observations(&self, cameras: &[Camera2D]) -> Option<Vec<Observation2D>> {
        self.signature
            .iter()
            .zip(cameras)
            .map(|(l, c)| match l {
                Label::Pixel(k) => Some(Observation2D {
                    camera: c.clone(),
                    u: c.pixel_centre(*k),
                    delta: c.pixel_pitch() / 2.0,
                }),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellArrangement {
    pub cells: Vec<Cell>,
}

impl CellArrangement {
    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.polygon.area()).sum()
    }
}

/// Partition a convex region by every camera's depth line and, on its front
/// side, by its `N + 1` pixel-boundary lines. Each cell carries the labels of
/// its centroid.
pub fn toy2d_partition(cameras: &[Camera2D], roi: &Polygon) -> Result<CellArrangement> {
    if cameras.is_empty() {
        return Err(Error::Config("partition needs at least one camera".into()));
    }
    let roi_area = roi.area();
    if !(roi_area > 0.0) {
        return Err(Error::Degenerate("region of interest has no area".into()));
    }
    let min_area = 1e-14 * roi_area;
    let mut cells = vec![roi.clone()];
    for cam in cameras {
        let mut next = Vec::with_capacity(cells.len() * 2);
        for cell in cells {
            // axis·X ≤ axis·C is the region behind the camera.
            let (behind, front) = cell.split(&cam.axis, cam.axis.dot(&cam.centre), min_area);
            next.extend(behind);
            let Some(front) = front else { continue };
            let mut pieces = vec![front];
            for j in 0..=cam.pixel_count {
                let (n, c) = cam.boundary_line(j);
                let mut split = Vec::with_capacity(pieces.len() + 1);
                for p in pieces {
                    let (lo, hi) = p.split(&n, c, min_area);
                    split.extend(lo);
                    split.extend(hi);
                }
                pieces = split;
            }
            next.extend(pieces);
        }
        cells = next;
    }
    let cells = cells
        .into_iter()
        .map(|polygon| {
            let c = polygon.centroid();
            Cell {
                signature: cameras.iter().map(|cam| cam.label(&c)).collect(),
                polygon,
            }
        })
        .collect();
    Ok(CellArrangement { cells })
}

/// One pixel reading: centre `u` of the lit pixel and half-pitch `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation2D {
    pub camera: Camera2D,
    pub u: f64,
    pub delta: f64,
}

fn residuals<'a>(obs: &'a [Observation2D], x: &Point2) -> Option<impl Iterator<Item = f64> + 'a> {
    if obs.iter().any(|o| !(o.camera.depth(x) > 0.0)) {
        return None;
    }
    let x = *x;
    Some(obs.iter().map(move |o| o.u - o.camera.project(&x)))
}

/// `Σ_i (u_i - π_i(X))²`, infinite behind a camera.
pub fn l2_cost(obs: &[Observation2D], x: &Point2) -> f64 {
    residuals(obs, x).map_or(f64::INFINITY, |r| r.map(|v| v * v).sum())
}

/// `max_i |u_i - π_i(X)|`, infinite behind a camera.
pub fn linf_cost(obs: &[Observation2D], x: &Point2) -> f64 {
    residuals(obs, x).map_or(f64::INFINITY, |r| r.fold(0.0, |m, v| m.max(v.abs())))
}

/// In front of every camera with every reprojection within `delta` of its reading.
pub fn is_consistent(obs: &[Observation2D], x: &Point2) -> bool {
    residuals(obs, x).is_some_and(|mut r| {
        obs.iter()
            .all(|o| r.next().is_some_and(|v| v.abs() <= o.delta + 1e-12))
    })
}

/// Closed consistent region at level `gamma` within `window`: the points in
/// front of every camera reprojecting within `gamma` of every reading.
pub fn consistent_polygon(obs: &[Observation2D], gamma: f64, window: &Polygon) -> Option<Polygon> {
    let mut poly = window.clone();
    for o in obs {
        let cam = &o.camera;
        // depth ≥ 0, then u - γ ≤ π(X) ≤ u + γ, each linear for positive depth.
        poly = poly.clip(&-cam.axis, -cam.axis.dot(&cam.centre))?;
        for (b, sign) in [(o.u - gamma, -1.0), (o.u + gamma, 1.0)] {
            let n = (cam.lateral * cam.focal_length - cam.axis * b) * sign;
            poly = poly.clip(&n, n.dot(&cam.centre))?;
        }
    }
    Some(poly)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageNorm {
    L2,
    Linf,
}

/// Linear triangulation of the `M × 3` homogeneous system, with image
/// coordinates divided by `f` and world coordinates centred on the camera
/// centres and scaled to RMS distance `√2`.
pub fn triangulate_linear_2d(obs: &[Observation2D]) -> Result<Point2> {
    let m = obs.len() as f64;
    let centroid = obs.iter().map(|o| o.camera.centre).sum::<Point2>() / m;
    let rms = (obs
        .iter()
        .map(|o| (o.camera.centre - centroid).norm_squared())
        .sum::<f64>()
        / m)
        .sqrt();
    if obs.len() < 2 || rms <= 1e-12 * (1.0 + centroid.norm()) {
        return Err(Error::Degenerate(
            "linear triangulation needs two distinct camera centres".into(),
        ));
    }
    let s = rms / 2f64.sqrt();
    let mut ata = [0.0; 9];
    for o in obs {
        let cam = &o.camera;
        // Row ũ·[a; -a·C] - [l; -l·C] evaluated at X = s·X' + centroid.
        let u = o.u / cam.focal_length;
        let g = cam.axis * u - cam.lateral;
        let row = [g.x * s, g.y * s, g.dot(&(centroid - cam.centre))];
        let norm = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
        for a in 0..3 {
            for b in 0..3 {
                ata[3 * a + b] += row[a] * row[b] / (norm * norm);
            }
        }
    }
    let eig = symmetric_eigen(3, &ata);
    let v = &eig.vectors[0];
    if eig.values[1] <= 1e-12 * eig.values[2] {
        return Err(Error::Degenerate("rays do not determine a point".into()));
    }
    if v[2].abs() <= 1e-12 {
        return Err(Error::AtInfinity { depth: v[2] });
    }
    Ok(Point2::new(v[0], v[1]) / v[2] * s + centroid)
}

/// Grid search over `window` followed by a downhill-simplex polish from the
/// best few grid points. `resolution` defaults to [`DEFAULT_GRID_RESOLUTION`].
pub fn bruteforce_optimum(
    obs: &[Observation2D],
    norm: ImageNorm,
    window: &Polygon,
    resolution: Option<usize>,
) -> Point2 {
    let res = resolution.unwrap_or(DEFAULT_GRID_RESOLUTION);
    let cost = |x: &Point2| match norm {
        ImageNorm::L2 => l2_cost(obs, x),
        ImageNorm::Linf => linf_cost(obs, x),
    };
    let (lo, hi) = window.bounding_box();
    let h = (hi - lo).max() / (res.max(2) - 1) as f64;
    let seeds = grid_search(&cost, lo, hi, res, 4);
    let mut best = seeds[0];
    for &(start, _) in &seeds {
        let mut x = start;
        let mut step = h;
        for _ in 0..3 {
            let (p, v) = nelder_mead(&cost, x, step, 1e-14 * (1.0 + x.norm()), 500);
            if v < best.1 {
                best = (p, v);
            }
            x = p;
            step *= 0.1;
        }
    }
    best.0
}

/// Point of the consistent cell nearest the origin, computed exactly as the
/// projection of the origin onto the cell polygon.
pub fn toy2d_consistent_min_l2(obs: &[Observation2D], window: &Polygon) -> Result<Point2> {
    let delta = obs.iter().map(|o| o.delta).fold(0.0, f64::max);
    let cell = consistent_polygon(obs, delta, window).ok_or(Error::Infeasible)?;
    Ok(cell.nearest_point(&Point2::zeros()))
}

/// Estimators evaluated in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Toy2dAlgorithm {
    Linear,
    LinfBrute,
    L2Brute,
    ConsistentMinL2,
    /// Reference: the centroid of the true cell.
    CellCentroid,
}

/// Settings of the planar study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toy2dConfig {
    pub camera_counts: Vec<usize>,
    pub pixel_count: usize,
    pub pixel_pitch: f64,
    pub focal_length: f64,
    /// Centres lie on `[-half_baseline, half_baseline] × {0}`.
    pub half_baseline: f64,
    pub placement: Placement,
    /// Common point the optical axes aim at; `None` for cameras facing `+y`.
    pub target: Option<[f64; 2]>,
    /// Largest random turn of each optical axis away from its aim, in radians.
    pub orientation_jitter: f64,
    /// Fixed region of interest `[x_min, y_min, x_max, y_max]`, which every
    /// camera must see whole. `None` takes the union of all bounded cells.
    pub roi: Option<[f64; 4]>,
    /// Random camera layouts averaged per camera count.
    pub layouts_per_m: usize,
    pub seed: u64,
    /// Grid resolution per axis for the brute-force searches within each cell's window.
    pub grid_resolution: usize,
}

impl Default for Toy2dConfig {
    fn default() -> Self {
        Self {
            camera_counts: (2..=24).collect(),
            pixel_count: 5,
            pixel_pitch: 0.2,
            focal_length: 1.0,
            half_baseline: 4.0,
            placement: Placement::Uniform,
            target: Some([0.0, 4.0]),
            orientation_jitter: 0.1,
            roi: Some([-1.0, 3.0, 1.0, 5.0]),
            layouts_per_m: 8,
            seed: 1,
            grid_resolution: 21,
        }
    }
}

impl Toy2dConfig {
    pub fn validate(&self) -> Result<()> {
        if self.camera_counts.is_empty() || self.camera_counts.iter().any(|&m| m < 2) {
            return Err(Error::Config(
                "camera_counts must be non-empty with every M >= 2".into(),
            ));
        }
        if self.camera_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "camera_counts must be strictly increasing".into(),
            ));
        }
        if self.pixel_count == 0 || !(self.pixel_pitch > 0.0) || !(self.focal_length > 0.0) {
            return Err(Error::Config(
                "pixel_count, pixel_pitch and focal_length must be positive".into(),
            ));
        }
        if !(self.half_baseline > 0.0) {
            return Err(Error::Config("half_baseline must be positive".into()));
        }
        if !(self.orientation_jitter >= 0.0
            && self.orientation_jitter < std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::Config(format!(
                "orientation_jitter must lie in [0, pi/2), got {}",
                self.orientation_jitter
            )));
        }
        if let Some(t) = self.target {
            if !(t.iter().all(|v| v.is_finite()) && t[1] > 0.0) {
                return Err(Error::Config(format!(
                    "target must be finite with y > 0, got {t:?}"
                )));
            }
        }
        if let Some([x0, y0, x1, y1]) = self.roi {
            if !(x0 < x1 && y0 < y1 && y0 > 0.0) {
                return Err(Error::Config(format!(
                    "roi must be [x_min, y_min, x_max, y_max] in front of the cameras, got {:?}",
                    self.roi.unwrap()
                )));
            }
        }
        if self.layouts_per_m == 0 {
            return Err(Error::Config("layouts_per_m must be at least 1".into()));
        }
        if self.grid_resolution < 2 {
            return Err(Error::Config("grid_resolution must be at least 2".into()));
        }
        Ok(())
    }

    /// Layout `layout` of `m` cameras. Random layouts are drawn from a stream
    /// keyed by `(seed, layout)`, so the `m`-camera layout extends the `m - 1` one.
    pub fn cameras(&self, m: usize, layout: usize) -> Result<Vec<Camera2D>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(layout as u64);
        (0..m)
            .map(|i| {
                let x = match self.placement {
                    Placement::Even => even_position(m, i, self.half_baseline),
                    Placement::Uniform => {
                        rng.random_range(-self.half_baseline..=self.half_baseline)
                    }
                };
                let mut angle = match self.target {
                    Some([tx, ty]) => ty.atan2(tx - x),
                    None => std::f64::consts::FRAC_PI_2,
                };
                if self.orientation_jitter > 0.0 {
                    angle += rng.random_range(-self.orientation_jitter..=self.orientation_jitter);
                }
                Camera2D::new(
                    Point2::new(x, 0.0),
                    angle,
                    self.focal_length,
                    self.pixel_count,
                    self.pixel_pitch,
                )
            })
            .collect()
    }
}

/// Box holding every crossing of two pixel-boundary rays, padded tenfold.
pub fn clip_box(cameras: &[Camera2D]) -> Result<Polygon> {
    let lines: Vec<(usize, Point2, f64)> = cameras
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..=c.pixel_count).map(move |j| (i, c.boundary_line(j))))
        .map(|(i, (n, c))| (i, n, c))
        .collect();
    let mut pts: Vec<Point2> = cameras.iter().map(|c| c.centre).collect();
    for (a, &(ia, na, ca)) in lines.iter().enumerate() {
        for &(ib, nb, cb) in &lines[a + 1..] {
            if ia == ib {
                continue;
            }
            let det = na.perp(&nb);
            if det.abs() <= 1e-12 * na.norm() * nb.norm() {
                continue;
            }
            let x = Point2::new(ca * nb.y - cb * na.y, na.x * cb - nb.x * ca) / det;
            if cameras[ia].depth(&x) > 0.0 && cameras[ib].depth(&x) > 0.0 {
                pts.push(x);
            }
        }
    }
    let (lo, hi) = bounding_box(&pts);
    let mid = (lo + hi) / 2.0;
    let half = ((hi - lo) / 2.0).sup(&Point2::repeat(1e-3)) * 10.0;
    Ok(Polygon::rectangle(mid - half, mid + half))
}

/// Bounded cells seen by every camera: the region of interest of the study.
pub fn region_of_interest(cameras: &[Camera2D]) -> Result<(CellArrangement, Polygon)> {
    let window = clip_box(cameras)?;
    let (lo, hi) = window.bounding_box();
    let all = toy2d_partition(cameras, &window)?;
    let on_boundary = |p: &Point2| {
        let tol = 1e-9 * (hi - lo).max();
        (p.x - lo.x).abs() <= tol
            || (p.x - hi.x).abs() <= tol
            || (p.y - lo.y).abs() <= tol
            || (p.y - hi.y).abs() <= tol
    };
    let cells = all
        .cells
        .into_iter()
        .filter(|c| c.signature.iter().all(|l| matches!(l, Label::Pixel(_))))
        .filter(|c| !c.polygon.vertices().iter().any(on_boundary))
        .collect();
    Ok((CellArrangement { cells }, window))
}

/// Estimate from one cell's readings.
pub fn estimate(
    algorithm: Toy2dAlgorithm,
    cell: &Cell,
    obs: &[Observation2D],
    window: &Polygon,
    resolution: usize,
) -> Result<Point2> {
    match algorithm {
        Toy2dAlgorithm::Linear => triangulate_linear_2d(obs),
        Toy2dAlgorithm::CellCentroid => Ok(cell.polygon.centroid()),
        Toy2dAlgorithm::ConsistentMinL2 => toy2d_consistent_min_l2(obs, window),
        Toy2dAlgorithm::LinfBrute => {
            // The minimax level is at most δ, attained inside the closed cell.
            Ok(bruteforce_optimum(
                obs,
                ImageNorm::Linf,
                &cell.polygon,
                Some(resolution),
            ))
        }
        Toy2dAlgorithm::L2Brute => {
            // Any point with cost ≤ C has every residual ≤ √C, so the global
            // minimizer lies in the consistent region at level √C.
            let c = cell.polygon.centroid();
            let c_ref = l2_cost(obs, &c);
            let search = consistent_polygon(obs, c_ref.sqrt() * (1.0 + 1e-9), window)
                .unwrap_or_else(|| cell.polygon.clone());
            let x = bruteforce_optimum(obs, ImageNorm::L2, &search, Some(resolution));
            Ok(if l2_cost(obs, &x) <= c_ref { x } else { c })
        }
    }
}

/// `(1/area) Σ_cells ∫ ‖X̂ - X‖²`, and the area fraction of cells whose estimate
/// is inconsistent.
pub fn toy2d_expected_error(
    algorithm: Toy2dAlgorithm,
    cameras: &[Camera2D],
    arrangement: &CellArrangement,
    window: &Polygon,
    resolution: usize,
) -> Result<(f64, f64)> {
    let per_cell = |cell: &Cell| -> Result<(f64, f64)> {
        let obs = cell
            .observations(cameras)
            .ok_or_else(|| Error::Config("cell not seen by every camera".into()))?;
        let x = estimate(algorithm, cell, &obs, window, resolution)?;
        let inconsistent = if is_consistent(&obs, &x) {
            0.0
        } else {
            cell.polygon.area()
        };
        Ok((cell.polygon.squared_error_integral(&x), inconsistent))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        arrangement
            .cells
            .par_iter()
            .map(per_cell)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(f64, f64)> = arrangement
        .cells
        .iter()
        .map(per_cell)
        .collect::<Result<_>>()?;
    let area = arrangement.total_area();
    let (err, bad) = parts
        .iter()
        .fold((0.0, 0.0), |(e, b), p| (e + p.0, b + p.1));
    Ok((err / area, bad / area))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toy2dRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub cell_count: usize,
    #[serde(rename = "E_linear")]
    pub e_linear: f64,
    #[serde(rename = "E_linf_brute")]
    pub e_linf_brute: f64,
    #[serde(rename = "E_l2_brute")]
    pub e_l2_brute: f64,
    #[serde(rename = "E_consistent_min_l2")]
    pub e_consistent_min_l2: f64,
    pub inconsistent_fraction_l2: f64,
}

/// Cells of a fixed box, all of which must be seen by every camera.
pub fn fixed_region_of_interest(
    cameras: &[Camera2D],
    roi: &Polygon,
) -> Result<(CellArrangement, Polygon)> {
    let arrangement = toy2d_partition(cameras, roi)?;
    if let Some(c) = arrangement
        .cells
        .iter()
        .find(|c| !c.signature.iter().all(|l| matches!(l, Label::Pixel(_))))
    {
        return Err(Error::Config(format!(
            "region of interest not seen by every camera (cell at {:?})",
            c.polygon.centroid().as_slice()
        )));
    }
    let mut window = clip_box(cameras)?;
    let (lo, hi) = window.bounding_box();
    let (rlo, rhi) = roi.bounding_box();
    if !(lo.x <= rlo.x && lo.y <= rlo.y && hi.x >= rhi.x && hi.y >= rhi.y) {
        window = Polygon::rectangle(lo.inf(&rlo), hi.sup(&rhi));
    }
    Ok((arrangement, window))
}

/// Cells and search window of one layout.
pub fn study_arrangement(
    cfg: &Toy2dConfig,
    cameras: &[Camera2D],
) -> Result<(CellArrangement, Polygon)> {
    let (roi, window) = match cfg.roi {
        Some([x0, y0, x1, y1]) => fixed_region_of_interest(
            cameras,
            &Polygon::rectangle(Point2::new(x0, y0), Point2::new(x1, y1)),
        )?,
        None => region_of_interest(cameras)?,
    };
    if roi.cells.is_empty() {
        return Err(Error::Degenerate(format!(
            "no bounded cell seen by all {} cameras",
            cameras.len()
        )));
    }
    Ok((roi, window))
}

/// One CSV row: every quantity averaged over the configured layouts.
pub fn run_toy2d_row(cfg: &Toy2dConfig, m: usize) -> Result<Toy2dRow> {
    let mut sums = [0.0; 6];
    for layout in 0..cfg.layouts_per_m {
        let cameras = cfg.cameras(m, layout)?;
        let (roi, window) = study_arrangement(cfg, &cameras)?;
        let e = |a| toy2d_expected_error(a, &cameras, &roi, &window, cfg.grid_resolution);
        let (l2, bad) = e(Toy2dAlgorithm::L2Brute)?;
        let values = [
            roi.cells.len() as f64,
            e(Toy2dAlgorithm::Linear)?.0,
            e(Toy2dAlgorithm::LinfBrute)?.0,
            l2,
            e(Toy2dAlgorithm::ConsistentMinL2)?.0,
            bad,
        ];
        for (s, v) in sums.iter_mut().zip(values) {
            *s += v;
        }
    }
    let k = cfg.layouts_per_m as f64;
    let [cells, lin, linf, l2, cmin, bad] = sums.map(|s| s / k);
    Ok(Toy2dRow {
        m,
        cell_count: cells.round() as usize,
        e_linear: lin,
        e_linf_brute: linf,
        e_l2_brute: l2,
        e_consistent_min_l2: cmin,
        inconsistent_fraction_l2: bad,
    })
}

pub fn run_toy2d(cfg: &Toy2dConfig) -> Result<Vec<Toy2dRow>> {
    cfg.validate()?;
    cfg.camera_counts
        .iter()
        .map(|&m| run_toy2d_row(cfg, m))
        .collect()
}

/// SVG drawing of the region-of-interest cells and the cameras.
pub fn arrangement_svg(cameras: &[Camera2D], arrangement: &CellArrangement, width: f64) -> String {
    let mut pts: Vec<Point2> = arrangement
        .cells
        .iter()
        .flat_map(|c| c.polygon.vertices().to_vec())
        .collect();
    pts.extend(cameras.iter().map(|c| c.centre));
    let (lo, hi) = bounding_box(&pts);
    let span = (hi - lo).max().max(1e-9);
    let scale = width / span;
    let height = (hi.y - lo.y) * scale;
    let map = |p: &Point2| ((p.x - lo.x) * scale, (hi.y - p.y) * scale);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="-5 -5 {:.1} {:.1}" width="{:.0}" height="{:.0}">"#,
        width + 10.0,
        height + 10.0,
        width + 10.0,
        height + 10.0
    );
    for (k, cell) in arrangement.cells.iter().enumerate() {
        let points: Vec<String> = cell
            .polygon
            .vertices()
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let hue = (k * 137) % 360;
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="hsl({hue},60%,75%)" stroke="#333" stroke-width="0.5"/>"##,
            points.join(" ")
        );
    }
    for cam in cameras {
        let (x, y) = map(&cam.centre);
        let _ = writeln!(
            svg,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#c00"/>"##
        );
    }
    svg.push_str("</svg>\n");
    svg
}
