//! Duplicate removal and ceiling/floor assembly over predicted quads.
//!
//! Quads are flattened into thin cuboids so object boxes and quads share
//! one NMS path. Ceiling and floor polygons are assembled from the upper
//! and lower quad edges by merging nearby endpoints.

use thiserror::Error;

use crate::geom::{iou_3d, GeomError, LayoutPolygon, OrientedBox, PolygonKind, Quad, Vec3};

/// Default thickness given to a quad when flattened into a cuboid, meters.
pub const QUAD_CUBOID_WIDTH: f64 = 0.10;

/// Default IoU threshold for suppression.
pub const NMS_IOU: f64 = 0.25;

/// Default quadness score required to keep a quad during assembly.
pub const QUADNESS_MIN: f64 = 0.5;

/// Default vertex merge radius for ceiling/floor assembly, meters.
pub const MERGE_RADIUS: f64 = 0.40;

#[derive(Debug, Error, PartialEq)]
pub enum PostprocessError {
    #[error("need at least 3 quads above the quadness threshold, got {0}")]
    TooFewQuads(usize),
    #[error("assembled polygon degenerate: {0}")]
    AssemblyFailed(#[from] GeomError),
}

/// Flatten a quad into a thin gravity-aligned cuboid: thickness along the
/// normal azimuth, quad extents in-plane. Any residual tilt of the normal
/// is dropped, matching the top-down treatment elsewhere.
pub fn quad_to_cuboid(q: &Quad, width: f64) -> OrientedBox {
    let n = q.normal();
    let heading = n.y.atan2(n.x);
    OrientedBox::new(q.center(), (width, q.width(), q.height()), heading, 0, 1.0)
        .expect("quad extents are positive")
}

/// Greedy score-descending suppression: a box is dropped when its IoU with
/// an already-kept box exceeds the threshold. Ties in score keep the lower
/// input index first.
pub fn nms(boxes: &[OrientedBox], iou_threshold: f64) -> Vec<OrientedBox> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[b]
            .score
            .partial_cmp(&boxes[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<OrientedBox> = Vec::new();
    for &i in &order {
        if kept.iter().all(|k| iou_3d(k, &boxes[i]) <= iou_threshold) {
            kept.push(boxes[i]);
        }
    }
    kept
}

/// The upper or lower edge of a quad, as a pair of corner positions.
fn quad_edge(q: &Quad, upper: bool) -> (Vec3, Vec3) {
    let corners = q.corners();
    if upper {
        (corners[3], corners[2])
    } else {
        (corners[0], corners[1])
    }
}

/// Merge all vertex pairs closer than `radius` by averaging, processing
/// pairs in ascending-distance order and re-merging transitively until no
/// pair is left, then order the survivors by azimuth about their centroid.
fn merge_and_order(mut vertices: Vec<Vec3>, radius: f64) -> Vec<Vec3> {
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..vertices.len() {
            for j in i + 1..vertices.len() {
                let d = vertices[i].distance(vertices[j]);
                if d < radius && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => {
                let mid = (vertices[i] + vertices[j]) / 2.0;
                vertices[i] = mid;
                vertices.swap_remove(j);
            }
            None => break,
        }
    }
    let n = vertices.len() as f64;
    let centroid = vertices.iter().fold(Vec3::ZERO, |a, &v| a + v) / n;
    vertices.sort_by(|a, b| {
        let aa = (a.y - centroid.y).atan2(a.x - centroid.x);
        let ab = (b.y - centroid.y).atan2(b.x - centroid.x);
        aa.partial_cmp(&ab)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.distance_sq(centroid).partial_cmp(&b.distance_sq(centroid)).unwrap())
    });
    vertices
}

/// Assemble the ceiling and floor polygons from quads that pass the
/// quadness threshold. Expects quads to be NMS-filtered already.
pub fn assemble_ceiling_floor(
    quads: &[(Quad, f64)],
    quadness_min: f64,
    merge_radius: f64,
) -> Result<(LayoutPolygon, LayoutPolygon), PostprocessError> {
    let kept: Vec<&Quad> =
        quads.iter().filter(|(_, s)| *s > quadness_min).map(|(q, _)| q).collect();
    if kept.len() < 3 {
        return Err(PostprocessError::TooFewQuads(kept.len()));
    }
    let mut build = |upper: bool, kind: PolygonKind| {
        let mut vertices = Vec::with_capacity(kept.len() * 2);
        for q in &kept {
            let (a, b) = quad_edge(q, upper);
            vertices.push(a);
            vertices.push(b);
        }
        let ordered = merge_and_order(vertices, merge_radius);
        LayoutPolygon::new(ordered, kind).map_err(PostprocessError::from)
    };
    let ceiling = build(true, PolygonKind::Ceiling)?;
    let floor = build(false, PolygonKind::Floor)?;
    Ok((ceiling, floor))
}

/// A quad's own boundary as a wall polygon.
pub fn quad_wall_polygon(q: &Quad) -> LayoutPolygon {
    LayoutPolygon::new(q.corners().to_vec(), PolygonKind::Wall)
        .expect("quad corners are distinct")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::plane_of;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wall(cx: f64, cy: f64, w: f64, h: f64, nx: f64, ny: f64) -> Quad {
        Quad::new(Vec3::new(cx, cy, h / 2.0), w, h, Vec3::new(nx, ny, 0.0)).unwrap()
    }

    #[test]
    fn cuboid_size_and_heading() {
        let q = wall(0.0, 2.0, 4.0, 2.5, 0.0, -1.0);
        let b = quad_to_cuboid(&q, QUAD_CUBOID_WIDTH);
        assert_eq!(b.size, (0.10, 4.0, 2.5));
        assert!((b.heading - (-std::f64::consts::FRAC_PI_2)).abs() < 1e-12);
        assert_eq!(b.center, q.center());
        let b2 = quad_to_cuboid(&q, 0.2);
        assert_eq!(b2.size.0, 0.2);
    }

    #[test]
    fn cuboid_dominant_plane_matches_quad_plane() {
        // the two large faces of the cuboid straddle the quad plane: their
        // midplane is the quad plane itself
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let az = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let q = Quad::new(
                Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 1.25),
                rng.random_range(1.0..5.0),
                2.5,
                Vec3::new(az.cos(), az.sin(), 0.0),
            )
            .unwrap();
            let b = quad_to_cuboid(&q, 0.1);
            let plane = plane_of(&q);
            // fit: corners of the cuboid must sit at distance +-0.05 along
            // the quad normal, i.e. the plane bisects the cuboid
            for c in crate::geom::box_corners(&b) {
                let d = crate::geom::signed_side(&plane, c).abs();
                assert!((d - 0.05).abs() < 1e-9, "corner offset {d}");
            }
        }
    }

    #[test]
    fn nms_keeps_higher_score_of_identical_pair() {
        let mut a = quad_to_cuboid(&wall(0.0, 0.0, 2.0, 2.0, 1.0, 0.0), 0.1);
        let mut b = a;
        a.score = 0.9;
        b.score = 0.8;
        let kept = nms(&[b, a], NMS_IOU);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
    }

    #[test]
    fn nms_keeps_disjoint_boxes() {
        let mk = |x: f64, s: f64| {
            let mut b =
                OrientedBox::new(Vec3::new(x, 0.0, 0.5), (1.0, 1.0, 1.0), 0.0, 0, 1.0).unwrap();
            b.score = s;
            b
        };
        let kept = nms(&[mk(0.0, 0.5), mk(3.0, 0.9), mk(6.0, 0.7)], NMS_IOU);
        assert_eq!(kept.len(), 3);
        // scores non-increasing
        assert!(kept.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn nms_matches_brute_force_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..30 {
            let boxes: Vec<OrientedBox> = (0..rng.random_range(2..=20usize))
                .map(|_| {
                    OrientedBox::new(
                        Vec3::new(
                            rng.random_range(-2.0..2.0),
                            rng.random_range(-2.0..2.0),
                            rng.random_range(0.0..1.0),
                        ),
                        (
                            rng.random_range(0.5..2.0),
                            rng.random_range(0.5..2.0),
                            rng.random_range(0.5..2.0),
                        ),
                        rng.random_range(-3.0..3.0),
                        0,
                        rng.random_range(0.0..1.0),
                    )
                    .unwrap()
                })
                .collect();
            let got = nms(&boxes, NMS_IOU);
            // reference: explicit suppressed set
            let mut order: Vec<usize> = (0..boxes.len()).collect();
            order.sort_by(|&a, &b| {
                boxes[b].score.partial_cmp(&boxes[a].score).unwrap().then(a.cmp(&b))
            });
            let mut suppressed = vec![false; boxes.len()];
            let mut want = Vec::new();
            for (oi, &i) in order.iter().enumerate() {
                if suppressed[i] {
                    continue;
                }
                want.push(boxes[i]);
                for &j in &order[oi + 1..] {
                    if !suppressed[j] && iou_3d(&boxes[i], &boxes[j]) > NMS_IOU {
                        suppressed[j] = true;
                    }
                }
            }
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert_eq!(a, b);
            }
            // antichain under IoU > threshold
            for i in 0..got.len() {
                for j in i + 1..got.len() {
                    assert!(iou_3d(&got[i], &got[j]) <= NMS_IOU + 1e-12);
                }
            }
        }
    }

    fn rect_room_walls() -> Vec<(Quad, f64)> {
        // 6 x 4 x 2.5 room centred at the origin, inward normals
        vec![
            (wall(-3.0, 0.0, 4.0, 2.5, 1.0, 0.0), 1.0),
            (wall(3.0, 0.0, 4.0, 2.5, -1.0, 0.0), 1.0),
            (wall(0.0, -2.0, 6.0, 2.5, 0.0, 1.0), 1.0),
            (wall(0.0, 2.0, 6.0, 2.5, 0.0, -1.0), 1.0),
        ]
    }

    #[test]
    fn rect_room_assembles_exact_corners() {
        let (ceiling, floor) =
            assemble_ceiling_floor(&rect_room_walls(), QUADNESS_MIN, MERGE_RADIUS).unwrap();
        assert_eq!(ceiling.vertices.len(), 4);
        assert_eq!(floor.vertices.len(), 4);
        for v in &ceiling.vertices {
            assert!((v.x.abs() - 3.0).abs() < 1e-12);
            assert!((v.y.abs() - 2.0).abs() < 1e-12);
            assert!((v.z - 2.5).abs() < 1e-12);
        }
        for v in &floor.vertices {
            assert!((v.z - 0.0).abs() < 1e-12);
        }
        assert_eq!(ceiling.kind, PolygonKind::Ceiling);
        assert_eq!(floor.kind, PolygonKind::Floor);
    }

    #[test]
    fn low_quadness_quads_are_dropped() {
        let mut quads = rect_room_walls();
        quads[0].1 = 0.2;
        quads[1].1 = 0.3;
        let err = assemble_ceiling_floor(&quads, QUADNESS_MIN, MERGE_RADIUS).unwrap_err();
        assert_eq!(err, PostprocessError::TooFewQuads(2));
    }

    #[test]
    fn nearby_endpoints_merge_to_midpoint() {
        // two walls meeting at a corner with a 0.3 m gap between endpoints
        let a = wall(-1.0, 0.0, 2.0, 2.0, 0.0, 1.0); // spans x in [-2, 0] at y = 0
        let b = Quad::new(Vec3::new(0.15, 1.0, 1.0), 2.0, 2.0, Vec3::new(-1.0, 0.0, 0.0)).unwrap();
        // third wall far away so assembly is possible
        let c = wall(5.0, 5.0, 1.0, 2.0, 0.0, 1.0);
        let (ceiling, _) =
            assemble_ceiling_floor(&[(a, 1.0), (b, 1.0), (c, 1.0)], 0.5, MERGE_RADIUS).unwrap();
        // endpoints (0, 0, 2) [from a] and (0.15, 0.25?...) -- the close pair
        // across a/b merges by averaging
        let found = ceiling
            .vertices
            .iter()
            .any(|v| (v.x - 0.075).abs() < 1e-9 && (v.y - 0.0).abs() < 1e-9);
        assert!(found, "vertices: {:?}", ceiling.vertices);
    }

    #[test]
    fn merge_is_order_independent_for_unambiguous_clusters() {
        let quads = rect_room_walls();
        let reversed: Vec<(Quad, f64)> = quads.iter().rev().cloned().collect();
        let (c1, f1) = assemble_ceiling_floor(&quads, QUADNESS_MIN, MERGE_RADIUS).unwrap();
        let (c2, f2) = assemble_ceiling_floor(&reversed, QUADNESS_MIN, MERGE_RADIUS).unwrap();
        let key = |p: &LayoutPolygon| {
            let mut k: Vec<(i64, i64, i64)> = p
                .vertices
                .iter()
                .map(|v| ((v.x * 1e9) as i64, (v.y * 1e9) as i64, (v.z * 1e9) as i64))
                .collect();
            k.sort_unstable();
            k
        };
        assert_eq!(key(&c1), key(&c2));
        assert_eq!(key(&f1), key(&f2));
    }
}
