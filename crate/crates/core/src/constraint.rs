//! Physical-constraint loss between object boxes and wall quads.
//!
//! A box corner that crosses an inward-oriented wall plane while its
//! projection lands on the wall rectangle is penalized linearly by its
//! penetration depth. The naive form works on the eight 3D corners per
//! box; the fast form reduces everything to the top-down view where quads
//! become line segments and each footprint corner stands for a top and a
//! bottom box corner. On scenes whose walls span the full room height the
//! two forms agree to floating-point precision.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{
    box_corners, plane_of, project_onto_quad, signed_side, OrientedBox, Quad, Vec3,
};

/// Which object classes are subject to the constraint, plus the slack used
/// by the projection indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintConfig {
    pub c_pc: BTreeSet<usize>,
    pub eps_inside: f64,
}

/// Class names that are allowed to overlap walls and are therefore left out
/// of the default constraint set.
pub const WALL_OVERLAP_CLASSES: [&str; 4] = ["door", "window", "curtain", "showercurtain"];

impl ConstraintConfig {
    /// Constrain every class id in [0, num_classes).
    pub fn all_classes(num_classes: usize) -> Self {
        ConstraintConfig { c_pc: (0..num_classes).collect(), eps_inside: 0.0 }
    }

    /// Default set for a class table: everything except classes that
    /// legitimately overlap walls (doors, windows, curtains).
    pub fn for_class_table(class_table: &[String]) -> Self {
        let c_pc = class_table
            .iter()
            .enumerate()
            .filter(|(_, name)| {
                let canon: String = name
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric())
                    .collect::<String>()
                    .to_ascii_lowercase();
                !WALL_OVERLAP_CLASSES.contains(&canon.as_str())
            })
            .map(|(i, _)| i)
            .collect();
        ConstraintConfig { c_pc, eps_inside: 0.0 }
    }
}

/// Per-box gradient of the fast constraint loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoxGrad {
    pub d_center: Vec3,
    /// (d/dw, d/dl, d/dh); d/dh is always 0 in the top-down form.
    pub d_size: Vec3,
    pub d_heading: f64,
}

/// Per-quad gradient of the fast constraint loss. The projection indicator
/// is treated as a constant gate, so the quad extents get zero gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadGrad {
    pub d_center: Vec3,
    /// Derivative w.r.t. the azimuth of the quad normal, radians.
    pub d_normal_angle: f64,
    /// (d/dwidth, d/dheight); both 0 through the gated indicator.
    pub d_size: [f64; 2],
}

/// Gradient of the fast constraint loss w.r.t. every box and quad.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGrad {
    pub boxes: Vec<BoxGrad>,
    pub quads: Vec<QuadGrad>,
}

/// Naive 3D form: traverse all eight corners of every constrained box
/// against every quad plane, gating by the in-quad projection test.
pub fn pc_loss_naive(boxes: &[OrientedBox], quads: &[Quad], cfg: &ConstraintConfig) -> f64 {
    let mut loss = 0.0;
    for b in boxes {
        if !cfg.c_pc.contains(&b.class_id) {
            continue;
        }
        let corners = box_corners(b);
        for q in quads {
            let plane = plane_of(q);
            for corner in corners {
                let side = signed_side(&plane, corner);
                if side < 0.0 {
                    let (u, v, _) = project_onto_quad(q, corner);
                    if u.abs() <= q.width() / 2.0 + cfg.eps_inside
                        && v.abs() <= q.height() / 2.0 + cfg.eps_inside
                    {
                        loss += -side;
                    }
                }
            }
        }
    }
    loss
}

/// Top-down line segment derived from a near-vertical quad.
struct QuadSeg {
    a: f64,
    b: f64,
    d: f64,
    tx: f64,
    ty: f64,
    cx: f64,
    cy: f64,
    half_u: f64,
}

impl QuadSeg {
    fn new(q: &Quad, eps_inside: f64) -> Self {
        let n = q.normal();
        let h = (n.x * n.x + n.y * n.y).sqrt();
        let (u_axis, _) = q.axes();
        let c = q.center();
        QuadSeg {
            a: n.x / h,
            b: n.y / h,
            d: -(n.x / h * c.x + n.y / h * c.y),
            tx: u_axis.x,
            ty: u_axis.y,
            cx: c.x,
            cy: c.y,
            half_u: q.width() / 2.0 + eps_inside,
        }
    }
}

/// Fast 2D form: quads as line segments, box footprints as rotated
/// rectangles. Each footprint corner is weighted by 2 because it stands for
/// the top and the bottom 3D corner; the vertical half of the projection
/// test is dropped, which matches the naive form whenever walls span the
/// full room height.
pub fn pc_loss_fast(boxes: &[OrientedBox], quads: &[Quad], cfg: &ConstraintConfig) -> f64 {
    let segs: Vec<QuadSeg> = quads.iter().map(|q| QuadSeg::new(q, cfg.eps_inside)).collect();
    let mut loss = 0.0;
    for b in boxes {
        if !cfg.c_pc.contains(&b.class_id) {
            continue;
        }
        let corners = b.bev_corners();
        for seg in &segs {
            for &(x, y) in &corners {
                let side = seg.a * x + seg.b * y + seg.d;
                if side < 0.0 {
                    let u = seg.tx * (x - seg.cx) + seg.ty * (y - seg.cy);
                    if u.abs() <= seg.half_u {
                        loss += -side * 2.0;
                    }
                }
            }
        }
    }
    loss
}

/// Fast loss plus its analytic gradient. The ReLU subgradient at zero is
/// taken as 0 and the projection indicator is a stop-gradient gate.
pub fn pc_loss_grad(
    boxes: &[OrientedBox],
    quads: &[Quad],
    cfg: &ConstraintConfig,
) -> (f64, ConstraintGrad) {
    let segs: Vec<QuadSeg> = quads.iter().map(|q| QuadSeg::new(q, cfg.eps_inside)).collect();
    let mut grad = ConstraintGrad {
        boxes: vec![BoxGrad::default(); boxes.len()],
        quads: vec![QuadGrad::default(); quads.len()],
    };
    let mut loss = 0.0;
    for (bi, b) in boxes.iter().enumerate() {
        if !cfg.c_pc.contains(&b.class_id) {
            continue;
        }
        let (cos_t, sin_t) = (b.heading.cos(), b.heading.sin());
        let hw = b.size.0 / 2.0;
        let hl = b.size.1 / 2.0;
        // footprint corner signs in the same order as bev_corners
        let signs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let corners = b.bev_corners();
        for (qi, seg) in segs.iter().enumerate() {
            for (p, &(x, y)) in corners.iter().enumerate() {
                let side = seg.a * x + seg.b * y + seg.d;
                if side >= 0.0 {
                    continue;
                }
                let u = seg.tx * (x - seg.cx) + seg.ty * (y - seg.cy);
                if u.abs() > seg.half_u {
                    continue;
                }
                loss += -side * 2.0;
                let (sx, sy) = signs[p];
                // local corner offset rotated into the world frame
                let ox = sx * hw * cos_t - sy * hl * sin_t;
                let oy = sx * hw * sin_t + sy * hl * cos_t;
                let bg = &mut grad.boxes[bi];
                bg.d_center.x += -seg.a * 2.0;
                bg.d_center.y += -seg.b * 2.0;
                bg.d_heading += (seg.a * oy - seg.b * ox) * 2.0;
                bg.d_size.x += -sx * (seg.a * cos_t + seg.b * sin_t);
                bg.d_size.y += -sy * (-seg.a * sin_t + seg.b * cos_t);
                let qg = &mut grad.quads[qi];
                qg.d_center.x += seg.a * 2.0;
                qg.d_center.y += seg.b * 2.0;
                qg.d_normal_angle += (seg.b * (x - seg.cx) - seg.a * (y - seg.cy)) * 2.0;
            }
        }
    }
    (loss, grad)
}

/// Count box corners that are strictly outside some wall plane while
/// projecting onto that wall rectangle. Class-agnostic; filter the box
/// slice beforehand to restrict to particular classes.
pub fn count_collisions(boxes: &[OrientedBox], quads: &[Quad]) -> usize {
    let mut count = 0;
    for b in boxes {
        for corner in box_corners(b) {
            let out = quads.iter().any(|q| {
                let side = signed_side(&plane_of(q), corner);
                if side >= 0.0 {
                    return false;
                }
                let (_, _, inside) = project_onto_quad(q, corner);
                inside
            });
            count += out as usize;
        }
    }
    count
}

/// Result of running gradient descent on the fast loss over box centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub steps: usize,
    pub final_loss: f64,
    pub boxes: Vec<OrientedBox>,
}

/// Move box centers down the fast-loss gradient until the loss vanishes or
/// the step budget runs out. Quads stay fixed.
pub fn descend_box_centers(
    boxes: &[OrientedBox],
    quads: &[Quad],
    cfg: &ConstraintConfig,
    learning_rate: f64,
    max_steps: usize,
) -> DescentResult {
    let mut boxes = boxes.to_vec();
    for step in 0..max_steps {
        let (loss, grad) = pc_loss_grad(&boxes, quads, cfg);
        if loss == 0.0 {
            return DescentResult { steps: step, final_loss: 0.0, boxes };
        }
        for (b, g) in boxes.iter_mut().zip(&grad.boxes) {
            b.center.x -= learning_rate * g.d_center.x;
            b.center.y -= learning_rate * g.d_center.y;
        }
    }
    let final_loss = pc_loss_fast(&boxes, quads, cfg);
    DescentResult { steps: max_steps, final_loss, boxes }
}

/// Outcome of comparing the analytic gradient against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub coordinates: usize,
    pub max_rel_err: f64,
}

fn rebuild_quad(center: Vec3, width: f64, height: f64, angle: f64) -> Quad {
    Quad::new(center, width, height, Vec3::new(angle.cos(), angle.sin(), 0.0)).unwrap()
}

/// One randomly posed configuration for the gradient check, guaranteed to
/// sit away from every ReLU kink and indicator boundary: for all
/// (corner, quad) pairs, |pre-ReLU| and the gate margin both exceed
/// `margin`.
fn sample_gradcheck_config(
    rng: &mut ChaCha8Rng,
    cfg: &ConstraintConfig,
    margin: f64,
) -> (Vec<OrientedBox>, Vec<Quad>) {
    'outer: loop {
        let mut quads = Vec::new();
        for _ in 0..rng.random_range(2..=4usize) {
            let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            quads.push(rebuild_quad(
                Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 1.25),
                rng.random_range(1.5..5.0),
                2.5,
                angle,
            ));
        }
        let mut boxes = Vec::new();
        for _ in 0..rng.random_range(1..=3usize) {
            boxes.push(
                OrientedBox::new(
                    Vec3::new(rng.random_range(-3.5..3.5), rng.random_range(-3.5..3.5), 0.4),
                    (
                        rng.random_range(0.3..1.5),
                        rng.random_range(0.3..1.5),
                        rng.random_range(0.3..0.8),
                    ),
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                    0,
                    1.0,
                )
                .unwrap(),
            );
        }
        let segs: Vec<QuadSeg> = quads.iter().map(|q| QuadSeg::new(q, cfg.eps_inside)).collect();
        let mut active = 0;
        for b in &boxes {
            for seg in &segs {
                for &(x, y) in &b.bev_corners() {
                    let side = seg.a * x + seg.b * y + seg.d;
                    let u = seg.tx * (x - seg.cx) + seg.ty * (y - seg.cy);
                    if side.abs() <= margin || (u.abs() - seg.half_u).abs() <= margin {
                        continue 'outer;
                    }
                    if side < 0.0 && u.abs() < seg.half_u {
                        active += 1;
                    }
                }
            }
        }
        if active == 0 {
            continue;
        }
        return (boxes, quads);
    }
}

/// Compare the analytic gradient of the fast loss against central finite
/// differences on `trials` random configurations sampled away from kinks.
pub fn gradcheck(trials: usize, seed: u64, step: f64) -> GradCheckReport {
    let cfg = ConstraintConfig { c_pc: BTreeSet::from([0]), eps_inside: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err: f64 = 0.0;
    let mut coordinates = 0;
    for _ in 0..trials {
        let (boxes, quads) = sample_gradcheck_config(&mut rng, &cfg, 1e-3);
        let (_, grad) = pc_loss_grad(&boxes, &quads, &cfg);
        // relative error with a unit floor so that finite-difference noise
        // on identically-zero coordinates is not amplified
        let mut check = |analytic: f64, loss_at: &mut dyn FnMut(f64) -> f64| {
            let fd = (loss_at(step) - loss_at(-step)) / (2.0 * step);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1.0);
            max_rel_err = max_rel_err.max(rel);
            coordinates += 1;
        };
        for (bi, bg) in grad.boxes.iter().enumerate() {
            let perturbed = |boxes: &[OrientedBox], f: &dyn Fn(&mut OrientedBox)| {
                let mut bs = boxes.to_vec();
                f(&mut bs[bi]);
                bs
            };
            check(bg.d_center.x, &mut |h| {
                pc_loss_fast(&perturbed(&boxes, &|b| b.center.x += h), &quads, &cfg)
            });
            check(bg.d_center.y, &mut |h| {
                pc_loss_fast(&perturbed(&boxes, &|b| b.center.y += h), &quads, &cfg)
            });
            check(bg.d_center.z, &mut |h| {
                pc_loss_fast(&perturbed(&boxes, &|b| b.center.z += h), &quads, &cfg)
            });
            check(bg.d_size.x, &mut |h| {
                pc_loss_fast(&perturbed(&boxes, &|b| b.size.0 += h), &quads, &cfg)
            });
            check(bg.d_size.y, &mut |h| {
                pc_loss_fast(&perturbed(&boxes, &|b| b.size.1 += h), &quads, &cfg)
            });
            check(bg.d_size.z, &mut |h| {
                pc_loss_fast(&perturbed(&boxes, &|b| b.size.2 += h), &quads, &cfg)
            });
            check(bg.d_heading, &mut |h| {
                pc_loss_fast(&perturbed(&boxes, &|b| b.heading += h), &quads, &cfg)
            });
        }
        for (qi, qg) in grad.quads.iter().enumerate() {
            let perturbed = |f: &dyn Fn(Vec3, f64, f64, f64) -> (Vec3, f64, f64, f64)| {
                let mut qs = quads.to_vec();
                let q = &qs[qi];
                let angle = q.normal().y.atan2(q.normal().x);
                let (c, w, h, a) = f(q.center(), q.width(), q.height(), angle);
                qs[qi] = rebuild_quad(c, w, h, a);
                qs
            };
            check(qg.d_center.x, &mut |h| {
                pc_loss_fast(&boxes, &perturbed(&|c, w, hh, a| (c + Vec3::new(h, 0.0, 0.0), w, hh, a)), &cfg)
            });
            check(qg.d_center.y, &mut |h| {
                pc_loss_fast(&boxes, &perturbed(&|c, w, hh, a| (c + Vec3::new(0.0, h, 0.0), w, hh, a)), &cfg)
            });
            check(qg.d_center.z, &mut |h| {
                pc_loss_fast(&boxes, &perturbed(&|c, w, hh, a| (c + Vec3::new(0.0, 0.0, h), w, hh, a)), &cfg)
            });
            check(qg.d_normal_angle, &mut |h| {
                pc_loss_fast(&boxes, &perturbed(&|c, w, hh, a| (c, w, hh, a + h)), &cfg)
            });
            check(qg.d_size[0], &mut |h| {
                pc_loss_fast(&boxes, &perturbed(&|c, w, hh, a| (c, w + h, hh, a)), &cfg)
            });
            check(qg.d_size[1], &mut |h| {
                pc_loss_fast(&boxes, &perturbed(&|c, w, hh, a| (c, w, hh + h, a)), &cfg)
            });
        }
    }
    GradCheckReport { trials, coordinates, max_rel_err }
}
