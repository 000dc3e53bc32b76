//! Deterministic synthetic indoor scenes: rectangular and L-shaped rooms
//! with full-height walls, wall-clear objects, and surface-sampled point
//! clouds. These scenes are the ground truth the rest of the crate is
//! tested against.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::codec::DEFAULT_CLASS_SPECS;
use crate::geom::{box_corners, plane_of, signed_side, OrientedBox, Quad, Vec3};
use crate::metrics::SceneRecord;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid range for {0}")]
    BadRange(&'static str),
    #[error("need at least 1000 points, got {0}")]
    TooFewPoints(usize),
    #[error("class weights must be non-negative with a positive sum")]
    BadClassWeights,
}

/// Room footprint shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoomShape {
    Rect,
    LShape,
}

impl RoomShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            RoomShape::Rect => "rect",
            RoomShape::LShape => "lshape",
        }
    }
}

/// Synthetic generator knobs. All sampling is driven by `seed` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub shape: RoomShape,
    pub width_range: (f64, f64),
    pub depth_range: (f64, f64),
    pub height_range: (f64, f64),
    /// Inclusive range of object counts per scene.
    pub objects: (usize, usize),
    /// Relative sampling weight per class id.
    pub class_weights: Vec<f64>,
    /// Points per scene.
    pub points: usize,
    /// Gaussian surface noise, meters.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            shape: RoomShape::Rect,
            width_range: (4.0, 8.0),
            depth_range: (3.5, 7.0),
            height_range: (2.4, 3.0),
            objects: (4, 9),
            class_weights: vec![1.0; DEFAULT_CLASS_SPECS.len()],
            points: 2000,
            noise_sigma: 0.005,
            seed: 0,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let ok = |r: (f64, f64)| r.0 > 0.0 && r.1 >= r.0;
        if !ok(self.width_range) {
            return Err(ConfigError::BadRange("width"));
        }
        if !ok(self.depth_range) {
            return Err(ConfigError::BadRange("depth"));
        }
        if !ok(self.height_range) {
            return Err(ConfigError::BadRange("height"));
        }
        if self.objects.1 < self.objects.0 {
            return Err(ConfigError::BadRange("objects"));
        }
        if self.points < 1000 {
            return Err(ConfigError::TooFewPoints(self.points));
        }
        if self.class_weights.is_empty()
            || self.class_weights.iter().any(|w| *w < 0.0 || !w.is_finite())
            || self.class_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(ConfigError::BadClassWeights);
        }
        Ok(())
    }
}

/// Point cloud with optional per-point feature columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub features: Option<Array2<f64>>,
}

/// A full synthetic scene: cloud, ground truth, vocabulary, room center.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub cloud: PointCloud,
    pub gt_boxes: Vec<OrientedBox>,
    pub gt_quads: Vec<Quad>,
    pub class_table: Vec<String>,
    pub room_center: Vec3,
}

impl Scene {
    /// Boxes plus unit-score quads, for the evaluation toolkit.
    pub fn to_record(&self) -> SceneRecord {
        SceneRecord {
            id: self.id.clone(),
            boxes: self.gt_boxes.clone(),
            quads: self.gt_quads.iter().map(|q| (*q, 1.0)).collect(),
        }
    }
}

/// Counter-clockwise footprint polygon in the xy plane.
fn footprint(shape: RoomShape, w: f64, l: f64, cut_w: f64, cut_l: f64) -> Vec<(f64, f64)> {
    match shape {
        RoomShape::Rect => vec![(0.0, 0.0), (w, 0.0), (w, l), (0.0, l)],
        RoomShape::LShape => vec![
            (0.0, 0.0),
            (w, 0.0),
            (w, l - cut_l),
            (w - cut_w, l - cut_l),
            (w - cut_w, l),
            (0.0, l),
        ],
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

fn point_in_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        if (y0 > p.1) != (y1 > p.1) {
            let xi = x0 + (p.1 - y0) / (y1 - y0) * (x1 - x0);
            if p.0 < xi {
                inside = !inside;
            }
        }
    }
    inside
}

/// Inside the footprint with at least `margin` clearance to every edge.
fn footprint_contains(poly: &[(f64, f64)], p: (f64, f64), margin: f64) -> bool {
    if !point_in_polygon(p, poly) {
        return false;
    }
    let n = poly.len();
    (0..n).all(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]) >= margin)
}

/// Walls along the footprint edges: full room height, inward normals
/// (left of the counter-clockwise edge direction).
fn walls_of_footprint(poly: &[(f64, f64)], height: f64) -> Vec<Quad> {
    let n = poly.len();
    let mut quads = Vec::with_capacity(n);
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let dir = ((x1 - x0) / len, (y1 - y0) / len);
        let normal = Vec3::new(-dir.1, dir.0, 0.0);
        let center = Vec3::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, height / 2.0);
        quads.push(Quad::new(center, len, height, normal).expect("valid wall"));
    }
    quads
}

fn weighted_choice(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Axis-aligned horizontal rectangle at a fixed z, used for floor and
/// ceiling sampling.
struct FlatRect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    z: f64,
}

/// Decompose the footprint into axis-aligned rectangles at height z.
fn flat_rects(shape: RoomShape, w: f64, l: f64, cut_w: f64, cut_l: f64, z: f64) -> Vec<FlatRect> {
    match shape {
        RoomShape::Rect => vec![FlatRect { x0: 0.0, y0: 0.0, x1: w, y1: l, z }],
        RoomShape::LShape => vec![
            FlatRect { x0: 0.0, y0: 0.0, x1: w, y1: l - cut_l, z },
            FlatRect { x0: 0.0, y0: l - cut_l, x1: w - cut_w, y1: l, z },
        ],
    }
}

enum Surface<'a> {
    Flat(&'a FlatRect),
    Wall(&'a Quad),
    /// Box face: index into the face table of the box.
    Face(&'a OrientedBox, usize),
}

fn surface_area(s: &Surface) -> f64 {
    match s {
        Surface::Flat(r) => (r.x1 - r.x0) * (r.y1 - r.y0),
        Surface::Wall(q) => q.width() * q.height(),
        Surface::Face(b, f) => {
            let (w, l, h) = b.size;
            match f {
                0 | 1 => w * l, // bottom, top
                2 | 3 => w * h, // front, back
                _ => l * h,     // left, right
            }
        }
    }
}

fn sample_surface(s: &Surface, rng: &mut ChaCha8Rng) -> Vec3 {
    match s {
        Surface::Flat(r) => Vec3::new(
            rng.random_range(r.x0..r.x1),
            rng.random_range(r.y0..r.y1),
            r.z,
        ),
        Surface::Wall(q) => {
            let (u, v) = q.axes();
            let su = rng.random_range(-0.5..0.5) * q.width();
            let sv = rng.random_range(-0.5..0.5) * q.height();
            q.center() + u * su + v * sv
        }
        Surface::Face(b, f) => {
            let (w, l, h) = b.size;
            let (a, bb) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let local = match f {
                0 => Vec3::new(a * w, bb * l, -h / 2.0),
                1 => Vec3::new(a * w, bb * l, h / 2.0),
                2 => Vec3::new(a * w, -l / 2.0, bb * h),
                3 => Vec3::new(a * w, l / 2.0, bb * h),
                4 => Vec3::new(-w / 2.0, a * l, bb * h),
                _ => Vec3::new(w / 2.0, a * l, bb * h),
            };
            let (c, s) = (b.heading.cos(), b.heading.sin());
            b.center
                + Vec3::new(local.x * c - local.y * s, local.x * s + local.y * c, local.z)
        }
    }
}

/// Minimum horizontal clearance between a box corner and any wall.
pub const WALL_MARGIN: f64 = 0.05;

/// Generate one scene. Walls span the full room height; every object box
/// is strictly inside the footprint with at least `WALL_MARGIN` clearance
/// and does not overlap other boxes. Identical configs produce identical
/// scenes.
pub fn gen_scene(cfg: &GenConfig) -> Result<Scene, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = rng.random_range(cfg.width_range.0..=cfg.width_range.1);
    let l = rng.random_range(cfg.depth_range.0..=cfg.depth_range.1);
    let h = rng.random_range(cfg.height_range.0..=cfg.height_range.1);
    let cut_w = w * rng.random_range(0.3..0.5);
    let cut_l = l * rng.random_range(0.3..0.5);
    let poly = footprint(cfg.shape, w, l, cut_w, cut_l);
    let gt_quads = walls_of_footprint(&poly, h);

    // room center: centroid of the footprint rectangles, mid height
    let rects = flat_rects(cfg.shape, w, l, cut_w, cut_l, 0.0);
    let (mut cx, mut cy, mut area) = (0.0, 0.0, 0.0);
    for r in &rects {
        let a = (r.x1 - r.x0) * (r.y1 - r.y0);
        cx += a * (r.x0 + r.x1) / 2.0;
        cy += a * (r.y0 + r.y1) / 2.0;
        area += a;
    }
    let room_center = Vec3::new(cx / area, cy / area, h / 2.0);
    for q in &gt_quads {
        debug_assert!(signed_side(&plane_of(q), room_center) > 0.0);
    }

    // place objects
    let class_table: Vec<String> =
        DEFAULT_CLASS_SPECS.iter().map(|(n, _)| n.to_string()).collect();
    let n_objects = rng.random_range(cfg.objects.0..=cfg.objects.1);
    let mut gt_boxes: Vec<OrientedBox> = Vec::new();
    for _ in 0..n_objects {
        let class_id = weighted_choice(&mut rng, &cfg.class_weights);
        let prior = DEFAULT_CLASS_SPECS[class_id % DEFAULT_CLASS_SPECS.len()].1;
        let size = (
            prior.0 * rng.random_range(0.8..1.25),
            prior.1 * rng.random_range(0.8..1.25),
            (prior.2 * rng.random_range(0.8..1.25)).min(h - 0.15),
        );
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let circumradius = (size.0 * size.0 + size.1 * size.1).sqrt() / 2.0;
        for _attempt in 0..100 {
            let px = rng.random_range(0.0..w);
            let py = rng.random_range(0.0..l);
            if !footprint_contains(&poly, (px, py), WALL_MARGIN + circumradius) {
                continue;
            }
            let lift = rng.random_range(0.0..(h - size.2 - 0.01).min(0.1));
            let center = Vec3::new(px, py, size.2 / 2.0 + lift);
            let candidate = OrientedBox::new(center, size, heading, class_id, 1.0).unwrap();
            if gt_boxes.iter().any(|b| crate::geom::iou_3d(b, &candidate) > 0.02) {
                continue;
            }
            gt_boxes.push(candidate);
            break;
        }
    }

    // sample the cloud over all surfaces, proportional to area
    let floor = flat_rects(cfg.shape, w, l, cut_w, cut_l, 0.0);
    let ceiling = flat_rects(cfg.shape, w, l, cut_w, cut_l, h);
    let mut surfaces: Vec<Surface> = Vec::new();
    for r in floor.iter().chain(ceiling.iter()) {
        surfaces.push(Surface::Flat(r));
    }
    for q in &gt_quads {
        surfaces.push(Surface::Wall(q));
    }
    for b in &gt_boxes {
        for f in 0..6 {
            surfaces.push(Surface::Face(b, f));
        }
    }
    let cumulative: Vec<f64> = surfaces
        .iter()
        .scan(0.0, |acc, s| {
            *acc += surface_area(s);
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let noise = Normal::new(0.0, cfg.noise_sigma).unwrap();
    let mut points = Vec::with_capacity(cfg.points);
    for _ in 0..cfg.points {
        let r = rng.random_range(0.0..total);
        let idx = cumulative.partition_point(|c| *c <= r).min(surfaces.len() - 1);
        let p = sample_surface(&surfaces[idx], &mut rng);
        points.push(
            p + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)),
        );
    }

    Ok(Scene {
        id: format!("scene-{:016x}", cfg.seed),
        cloud: PointCloud { points, features: None },
        gt_boxes,
        gt_quads,
        class_table,
        room_center,
    })
}

/// Generate a scene and then push some boxes outward through their nearest
/// wall, producing strictly positive collision counts. The push keeps the
/// corner projections on the wall, so the constraint loss sees every
/// violation.
pub fn gen_colliding_scene(cfg: &GenConfig) -> Result<Scene, ConfigError> {
    let mut scene = gen_scene(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x636f6c6c69646531);
    let n = scene.gt_boxes.len();
    let mut pushed_any = false;
    for i in 0..n {
        let push = rng.random_range(0.0..1.0) < 0.5 || (i == n - 1 && !pushed_any);
        if !push {
            continue;
        }
        let b = &scene.gt_boxes[i];
        // nearest wall whose segment the whole box projects onto, so the
        // push is guaranteed to register as corner collisions
        let corners = box_corners(b);
        let faced = scene.gt_quads.iter().enumerate().filter(|(_, q)| {
            corners.iter().all(|c| {
                let (u, _, _) = crate::geom::project_onto_quad(q, *c);
                u.abs() <= q.width() / 2.0 - 0.01
            })
        });
        let (qi, _) = faced
            .map(|(j, q)| (j, signed_side(&plane_of(q), b.center)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("outer walls span the full footprint extent");
        let quad = &scene.gt_quads[qi];
        // minimum corner clearance to the wall plane
        let clearance = corners
            .iter()
            .map(|c| signed_side(&plane_of(quad), *c))
            .fold(f64::INFINITY, f64::min);
        let depth = rng.random_range(0.1..0.3);
        let shift = quad.normal() * -(clearance + depth);
        scene.gt_boxes[i].center = b.center + shift;
        pushed_any = true;
    }
    Ok(scene)
}

/// Ground-truth vote targets: for each seed position inside an object box,
/// the offset to that box's center; zero (and off-object) elsewhere.
pub fn gt_vote_offsets(scene: &Scene, seeds: &[Vec3]) -> (Vec<Vec3>, Vec<bool>) {
    let mut offsets = Vec::with_capacity(seeds.len());
    let mut on_object = Vec::with_capacity(seeds.len());
    for p in seeds {
        match scene.gt_boxes.iter().find(|b| b.contains(*p)) {
            Some(b) => {
                offsets.push(b.center - *p);
                on_object.push(true);
            }
            None => {
                offsets.push(Vec3::ZERO);
                on_object.push(false);
            }
        }
    }
    (offsets, on_object)
}
