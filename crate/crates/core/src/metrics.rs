//! Layout F1, object detection mAP and the collision audit.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::constraint::count_collisions;
use crate::geom::{iou_3d, LayoutPolygon, OrientedBox, PolygonKind, Quad, Vec3};
use crate::postprocess::{assemble_ceiling_floor, quad_wall_polygon};

/// Default corner-matching radius, meters.
pub const CORNER_RADIUS: f64 = 0.40;

/// Default detection IoU threshold.
pub const DETECTION_IOU: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction/ground-truth scene ids differ: {0}")]
    SceneMismatch(String),
}

/// Greedy one-to-one corner matching in ascending distance order; only
/// pairs within `radius` may match. Returns (pred index, gt index) pairs.
pub fn match_corners(pred: &[Vec3], gt: &[Vec3], radius: f64) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let d = p.distance(*g);
            if d <= radius {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// A predicted polygon is correct iff its corners map one-to-one onto the
/// corner set of the ground-truth polygon.
fn polygon_matches(pred: &LayoutPolygon, gt: &LayoutPolygon, radius: f64) -> bool {
    pred.vertices.len() == gt.vertices.len()
        && match_corners(&pred.vertices, &gt.vertices, radius).len() == pred.vertices.len()
}

/// Raw match counts behind a layout evaluation, accumulable across scenes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LayoutCounts {
    pub tp: usize,
    pub pred: usize,
    pub gt: usize,
    pub tp_wall: usize,
    pub pred_wall: usize,
    pub gt_wall: usize,
    pub tp_by_kind: [usize; 3],
    pub pred_by_kind: [usize; 3],
    pub gt_by_kind: [usize; 3],
    pub corners_matched: usize,
    pub corners_pred: usize,
    pub corners_gt: usize,
}

impl LayoutCounts {
    pub fn accumulate(&mut self, o: &LayoutCounts) {
        self.tp += o.tp;
        self.pred += o.pred;
        self.gt += o.gt;
        self.tp_wall += o.tp_wall;
        self.pred_wall += o.pred_wall;
        self.gt_wall += o.gt_wall;
        for k in 0..3 {
            self.tp_by_kind[k] += o.tp_by_kind[k];
            self.pred_by_kind[k] += o.pred_by_kind[k];
            self.gt_by_kind[k] += o.gt_by_kind[k];
        }
        self.corners_matched += o.corners_matched;
        self.corners_pred += o.corners_pred;
        self.corners_gt += o.corners_gt;
    }
}

/// Precision, recall and F1 for one polygon kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Layout evaluation: polygon-level F1 plus per-kind and corner-level
/// detail.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEvalResult {
    pub f1_all: f64,
    pub f1_wall_only: f64,
    pub per_kind: [(PolygonKind, KindScores); 3],
    pub corners_matched: usize,
    pub corners_pred: usize,
    pub corners_gt: usize,
    pub counts: LayoutCounts,
}

fn prf(tp: usize, pred: usize, gt: usize) -> KindScores {
    let precision = if pred == 0 { 0.0 } else { tp as f64 / pred as f64 };
    let recall = if gt == 0 { 0.0 } else { tp as f64 / gt as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    KindScores { precision, recall, f1 }
}

fn kind_index(kind: PolygonKind) -> usize {
    match kind {
        PolygonKind::Wall => 0,
        PolygonKind::Ceiling => 1,
        PolygonKind::Floor => 2,
    }
}

/// Count polygon matches for a single scene. Each ground-truth polygon may
/// be claimed at most once; predictions are processed in input order.
pub fn layout_counts(
    pred_polys: &[LayoutPolygon],
    gt_polys: &[LayoutPolygon],
    radius: f64,
) -> LayoutCounts {
    let mut counts = LayoutCounts {
        pred: pred_polys.len(),
        gt: gt_polys.len(),
        ..Default::default()
    };
    for p in pred_polys {
        counts.pred_by_kind[kind_index(p.kind)] += 1;
        counts.corners_pred += p.vertices.len();
    }
    for g in gt_polys {
        counts.gt_by_kind[kind_index(g.kind)] += 1;
        counts.corners_gt += g.vertices.len();
    }
    counts.pred_wall = counts.pred_by_kind[0];
    counts.gt_wall = counts.gt_by_kind[0];

    let mut claimed = vec![false; gt_polys.len()];
    for p in pred_polys {
        for (j, g) in gt_polys.iter().enumerate() {
            if claimed[j] || !polygon_matches(p, g, radius) {
                continue;
            }
            claimed[j] = true;
            counts.tp += 1;
            counts.tp_by_kind[kind_index(p.kind)] += 1;
            if p.kind == PolygonKind::Wall {
                counts.tp_wall += 1;
            }
            break;
        }
    }

    // corner-level matching over the pooled corner sets
    let pool = |polys: &[LayoutPolygon]| -> Vec<Vec3> {
        polys.iter().flat_map(|p| p.vertices.iter().copied()).collect()
    };
    counts.corners_matched = match_corners(&pool(pred_polys), &pool(gt_polys), radius).len();
    counts
}

impl LayoutEvalResult {
    pub fn from_counts(c: LayoutCounts) -> Self {
        let all = prf(c.tp, c.pred, c.gt);
        // wall-only score restricts both sides to wall polygons
        let wall = prf(c.tp_wall, c.pred_wall, c.gt_wall);
        LayoutEvalResult {
            f1_all: all.f1,
            f1_wall_only: wall.f1,
            per_kind: [
                (PolygonKind::Wall, prf(c.tp_by_kind[0], c.pred_by_kind[0], c.gt_by_kind[0])),
                (PolygonKind::Ceiling, prf(c.tp_by_kind[1], c.pred_by_kind[1], c.gt_by_kind[1])),
                (PolygonKind::Floor, prf(c.tp_by_kind[2], c.pred_by_kind[2], c.gt_by_kind[2])),
            ],
            corners_matched: c.corners_matched,
            corners_pred: c.corners_pred,
            corners_gt: c.corners_gt,
            counts: c,
        }
    }
}

/// Polygon-level layout F1 for a single scene.
pub fn layout_f1(
    pred_polys: &[LayoutPolygon],
    gt_polys: &[LayoutPolygon],
    radius: f64,
) -> LayoutEvalResult {
    LayoutEvalResult::from_counts(layout_counts(pred_polys, gt_polys, radius))
}

/// Match scored predictions of one class against ground truth within one
/// scene: score-descending greedy, each ground truth claimed once, a match
/// requires IoU >= `iou_min`. Returns (score, is_tp) per prediction.
fn match_detections(
    preds: &[OrientedBox],
    gts: &[OrientedBox],
    iou_min: f64,
) -> Vec<(f64, bool)> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut claimed = vec![false; gts.len()];
    let mut out = Vec::with_capacity(preds.len());
    for &i in &order {
        let mut best: Option<(f64, usize)> = None;
        for (j, g) in gts.iter().enumerate() {
            if claimed[j] {
                continue;
            }
            let iou = iou_3d(&preds[i], g);
            if best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, j));
            }
        }
        let tp = match best {
            Some((iou, j)) if iou >= iou_min => {
                claimed[j] = true;
                true
            }
            _ => false,
        };
        out.push((preds[i].score, tp));
    }
    out
}

/// All-point-interpolation average precision from pooled detections.
fn ap_from_detections(mut dets: Vec<(f64, bool)>, gt_count: usize) -> f64 {
    if gt_count == 0 || dets.is_empty() {
        return 0.0;
    }
    dets.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut tp = 0usize;
    let mut recalls = Vec::with_capacity(dets.len());
    let mut precisions = Vec::with_capacity(dets.len());
    for (rank, (_, is_tp)) in dets.iter().enumerate() {
        tp += *is_tp as usize;
        recalls.push(tp as f64 / gt_count as f64);
        precisions.push(tp as f64 / (rank + 1) as f64);
    }
    // area under the precision envelope over recall
    let mut ap = 0.0;
    let mut env = 0.0f64;
    for k in (0..dets.len()).rev() {
        env = env.max(precisions[k]);
        let prev_recall = if k == 0 { 0.0 } else { recalls[k - 1] };
        ap += (recalls[k] - prev_recall) * env;
    }
    ap
}

/// Average precision for scored predictions of a single class within one
/// scene set (here: one scene).
pub fn average_precision(preds: &[OrientedBox], gts: &[OrientedBox], iou_min: f64) -> f64 {
    ap_from_detections(match_detections(preds, gts, iou_min), gts.len())
}

/// Per-class AP and the mean over classes with at least one ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvalResult {
    /// (class id, AP, ground-truth count), for classes with >= 1 GT.
    pub per_class: Vec<(usize, f64, usize)>,
    pub map: f64,
}

/// One scene's boxes and scored quads, for set-level evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub id: String,
    pub boxes: Vec<OrientedBox>,
    pub quads: Vec<(Quad, f64)>,
}

/// Knobs of the full evaluation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_min: f64,
    pub corner_radius: f64,
    pub quadness_min: f64,
    pub merge_radius: f64,
    /// Restrict the collision audit to these classes; `None` audits all.
    pub collision_classes: Option<BTreeSet<usize>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_min: DETECTION_IOU,
            corner_radius: CORNER_RADIUS,
            quadness_min: crate::postprocess::QUADNESS_MIN,
            merge_radius: crate::postprocess::MERGE_RADIUS,
            collision_classes: None,
        }
    }
}

/// Layout polygons induced by a scene's quads: every quad above the
/// quadness threshold contributes its wall polygon; ceiling and floor are
/// assembled from the same set when at least three quads survive.
pub fn scene_layout_polygons(
    quads: &[(Quad, f64)],
    quadness_min: f64,
    merge_radius: f64,
) -> Vec<LayoutPolygon> {
    let mut polys: Vec<LayoutPolygon> = quads
        .iter()
        .filter(|(_, s)| *s > quadness_min)
        .map(|(q, _)| quad_wall_polygon(q))
        .collect();
    if let Ok((ceiling, floor)) = assemble_ceiling_floor(quads, quadness_min, merge_radius) {
        polys.push(ceiling);
        polys.push(floor);
    }
    polys
}

/// Aggregate detection mAP, micro-averaged layout F1 and the collision
/// total over a scene set. Predictions and ground truth pair by scene id.
pub fn evaluate_scene_set(
    preds: &[SceneRecord],
    gts: &[SceneRecord],
    cfg: &EvalConfig,
) -> Result<(DetectionEvalResult, LayoutEvalResult, usize), MetricsError> {
    if preds.len() != gts.len() {
        return Err(MetricsError::SceneMismatch(format!(
            "{} predictions vs {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    let mut gt_by_id: std::collections::BTreeMap<&str, &SceneRecord> =
        gts.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut pairs = Vec::with_capacity(preds.len());
    for p in preds {
        match gt_by_id.remove(p.id.as_str()) {
            Some(g) => pairs.push((p, g)),
            None => return Err(MetricsError::SceneMismatch(p.id.clone())),
        }
    }

    // detection: pool per-scene matches per class
    let classes: BTreeSet<usize> = pairs
        .iter()
        .flat_map(|(p, g)| p.boxes.iter().chain(g.boxes.iter()).map(|b| b.class_id))
        .collect();
    let mut per_class = Vec::new();
    for class in classes {
        let mut dets = Vec::new();
        let mut gt_count = 0;
        for (p, g) in &pairs {
            let pc: Vec<OrientedBox> =
                p.boxes.iter().filter(|b| b.class_id == class).copied().collect();
            let gc: Vec<OrientedBox> =
                g.boxes.iter().filter(|b| b.class_id == class).copied().collect();
            gt_count += gc.len();
            dets.extend(match_detections(&pc, &gc, cfg.iou_min));
        }
        if gt_count > 0 {
            per_class.push((class, ap_from_detections(dets, gt_count), gt_count));
        }
    }
    let map = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|(_, ap, _)| ap).sum::<f64>() / per_class.len() as f64
    };
    let detection = DetectionEvalResult { per_class, map };

    // layout: micro-averaged counts over scenes
    let mut counts = LayoutCounts::default();
    for (p, g) in &pairs {
        let pred_polys = scene_layout_polygons(&p.quads, cfg.quadness_min, cfg.merge_radius);
        let gt_polys = scene_layout_polygons(&g.quads, cfg.quadness_min, cfg.merge_radius);
        counts.accumulate(&layout_counts(&pred_polys, &gt_polys, cfg.corner_radius));
    }
    let layout = LayoutEvalResult::from_counts(counts);

    // collisions over predicted scenes
    let mut collisions = 0;
    for (p, _) in &pairs {
        let boxes: Vec<OrientedBox> = match &cfg.collision_classes {
            Some(set) => p.boxes.iter().filter(|b| set.contains(&b.class_id)).copied().collect(),
            None => p.boxes.clone(),
        };
        let quads: Vec<Quad> = p.quads.iter().map(|(q, _)| *q).collect();
        collisions += count_collisions(&boxes, &quads);
    }

    Ok((detection, layout, collisions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn identical_corner_sets_fully_match() {
        let corners = vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(1.0, 1.0, 0.0)];
        let pairs = match_corners(&corners, &corners, CORNER_RADIUS);
        assert_eq!(pairs.len(), 3);
        for (i, j) in pairs {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn corner_radius_threshold() {
        let gt = vec![v(0.0, 0.0, 0.0)];
        assert_eq!(match_corners(&[v(0.39, 0.0, 0.0)], &gt, CORNER_RADIUS).len(), 1);
        assert_eq!(match_corners(&[v(0.41, 0.0, 0.0)], &gt, CORNER_RADIUS).len(), 0);
    }

    /// Maximum bipartite matching cardinality by brute force over subsets.
    fn optimal_matching_size(pred: &[Vec3], gt: &[Vec3], radius: f64) -> usize {
        fn recurse(
            adj: &[Vec<usize>],
            i: usize,
            used: &mut Vec<bool>,
        ) -> usize {
            if i == adj.len() {
                return 0;
            }
            // skip pred i
            let mut best = recurse(adj, i + 1, used);
            for &j in &adj[i] {
                if !used[j] {
                    used[j] = true;
                    best = best.max(1 + recurse(adj, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let adj: Vec<Vec<usize>> = pred
            .iter()
            .map(|p| {
                gt.iter()
                    .enumerate()
                    .filter(|(_, g)| p.distance(**g) <= radius)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let mut used = vec![false; gt.len()];
        recurse(&adj, 0, &mut used)
    }

    /// Room-like corner layouts: well-separated true corners, jittered
    /// predictions, occasional misses and spurious extras.
    fn corner_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec3>, Vec<Vec3>) {
        let n = rng.random_range(3..=8usize);
        let mut gt = Vec::new();
        for k in 0..n {
            let angle = k as f64 / n as f64 * std::f64::consts::TAU;
            let r = rng.random_range(2.0..4.0);
            gt.push(v(r * angle.cos(), r * angle.sin(), 2.5));
        }
        let mut pred = Vec::new();
        for g in &gt {
            if rng.random_range(0.0..1.0) < 0.85 {
                let dx = rng.random_range(-0.15..0.15);
                let dy = rng.random_range(-0.15..0.15);
                pred.push(v(g.x + dx, g.y + dy, g.z));
            }
        }
        for _ in 0..rng.random_range(0..3usize) {
            pred.push(v(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), 2.5));
        }
        (pred, gt)
    }

    #[test]
    fn greedy_matching_cardinality_equals_optimal_on_corner_layouts() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..120 {
            let (pred, gt) = corner_instance(&mut rng);
            let greedy = match_corners(&pred, &gt, CORNER_RADIUS).len();
            let optimal = optimal_matching_size(&pred, &gt, CORNER_RADIUS);
            assert_eq!(greedy, optimal);
        }
    }

    fn square_poly(z: f64, kind: PolygonKind) -> LayoutPolygon {
        LayoutPolygon::new(
            vec![v(-3.0, -2.0, z), v(3.0, -2.0, z), v(3.0, 2.0, z), v(-3.0, 2.0, z)],
            kind,
        )
        .unwrap()
    }

    fn rect_room_polys() -> Vec<LayoutPolygon> {
        let wall = |a: Vec3, b: Vec3| {
            LayoutPolygon::new(
                vec![a, b, v(b.x, b.y, 2.5), v(a.x, a.y, 2.5)],
                PolygonKind::Wall,
            )
            .unwrap()
        };
        vec![
            wall(v(-3.0, -2.0, 0.0), v(3.0, -2.0, 0.0)),
            wall(v(3.0, -2.0, 0.0), v(3.0, 2.0, 0.0)),
            wall(v(3.0, 2.0, 0.0), v(-3.0, 2.0, 0.0)),
            wall(v(-3.0, 2.0, 0.0), v(-3.0, -2.0, 0.0)),
            square_poly(2.5, PolygonKind::Ceiling),
            square_poly(0.0, PolygonKind::Floor),
        ]
    }

    #[test]
    fn perfect_layout_scores_one() {
        let polys = rect_room_polys();
        let res = layout_f1(&polys, &polys, CORNER_RADIUS);
        assert_eq!(res.f1_all, 1.0);
        assert_eq!(res.f1_wall_only, 1.0);
        assert_eq!(res.corners_matched, res.corners_gt);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let res = layout_f1(&[], &rect_room_polys(), CORNER_RADIUS);
        assert_eq!(res.f1_all, 0.0);
        assert_eq!(res.f1_wall_only, 0.0);
    }

    #[test]
    fn dropping_one_wall_scores_hand_enumerated_f1() {
        let gt = rect_room_polys();
        // drop one wall; ceiling and floor still assemble from the corner
        // set, so 5 of 6 polygons survive as true positives
        let pred: Vec<LayoutPolygon> =
            gt.iter().enumerate().filter(|(i, _)| *i != 0).map(|(_, p)| p.clone()).collect();
        let res = layout_f1(&pred, &gt, CORNER_RADIUS);
        // precision 5/5, recall 5/6 -> F1 = 10/11
        assert!((res.f1_all - 10.0 / 11.0).abs() < 1e-12);
        // walls: precision 3/3, recall 3/4 -> F1 = 6/7
        assert!((res.f1_wall_only - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_match_requires_equal_cardinality() {
        let gt = square_poly(0.0, PolygonKind::Floor);
        let pred = LayoutPolygon::new(
            vec![
                v(-3.0, -2.0, 0.0),
                v(3.0, -2.0, 0.0),
                v(3.0, 2.0, 0.0),
                v(-3.0, 2.0, 0.0),
                v(-3.2, 0.0, 0.0),
            ],
            PolygonKind::Floor,
        )
        .unwrap();
        assert!(!polygon_matches(&pred, &gt, CORNER_RADIUS));
    }

    fn unit_box_at(x: f64, y: f64, class: usize, score: f64) -> OrientedBox {
        OrientedBox::new(v(x, y, 0.5), (1.0, 1.0, 1.0), 0.0, class, score).unwrap()
    }

    #[test]
    fn ap_perfect_predictions() {
        let gts = vec![unit_box_at(0.0, 0.0, 0, 1.0), unit_box_at(5.0, 0.0, 0, 1.0)];
        let mut preds = gts.clone();
        preds[0].score = 0.9;
        preds[1].score = 0.8;
        assert_eq!(average_precision(&preds, &gts, DETECTION_IOU), 1.0);
    }

    #[test]
    fn ap_hand_case_tp_fp_tp() {
        let gts = vec![unit_box_at(0.0, 0.0, 0, 1.0), unit_box_at(5.0, 0.0, 0, 1.0)];
        let preds = vec![
            unit_box_at(0.0, 0.0, 0, 0.9),  // TP
            unit_box_at(20.0, 0.0, 0, 0.8), // FP
            unit_box_at(5.0, 0.0, 0, 0.7),  // TP
        ];
        let ap = average_precision(&preds, &gts, DETECTION_IOU);
        assert!((ap - (0.5 + 0.5 * (2.0 / 3.0))).abs() < 1e-9, "ap = {ap}");
    }

    #[test]
    fn ap_no_predictions_is_zero() {
        let gts = vec![unit_box_at(0.0, 0.0, 0, 1.0)];
        assert_eq!(average_precision(&[], &gts, DETECTION_IOU), 0.0);
    }

    #[test]
    fn ap_invariant_under_monotone_score_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gts: Vec<OrientedBox> =
            (0..5).map(|i| unit_box_at(i as f64 * 4.0, 0.0, 0, 1.0)).collect();
        let preds: Vec<OrientedBox> = (0..8)
            .map(|i| {
                let near = i % 2 == 0;
                let x = if near { (i / 2) as f64 * 4.0 + 0.2 } else { 100.0 + i as f64 * 5.0 };
                unit_box_at(x, 0.0, 0, rng.random_range(0.1..0.9))
            })
            .collect();
        let base = average_precision(&preds, &gts, DETECTION_IOU);
        let rescaled: Vec<OrientedBox> = preds
            .iter()
            .map(|b| {
                let mut c = *b;
                c.score = 0.1 + 0.8 * b.score.powi(3); // strictly monotone
                c
            })
            .collect();
        let after = average_precision(&rescaled, &gts, DETECTION_IOU);
        assert!((base - after).abs() < 1e-12);
    }

    fn rect_room_record(id: &str) -> SceneRecord {
        let wall = |cx: f64, cy: f64, w: f64, nx: f64, ny: f64| {
            (
                Quad::new(v(cx, cy, 1.25), w, 2.5, v(nx, ny, 0.0)).unwrap(),
                1.0,
            )
        };
        SceneRecord {
            id: id.to_string(),
            boxes: vec![unit_box_at(0.0, 0.0, 2, 1.0), unit_box_at(1.8, 0.5, 5, 1.0)],
            quads: vec![
                wall(-3.0, 0.0, 4.0, 1.0, 0.0),
                wall(3.0, 0.0, 4.0, -1.0, 0.0),
                wall(0.0, -2.0, 6.0, 0.0, 1.0),
                wall(0.0, 2.0, 6.0, 0.0, -1.0),
            ],
        }
    }

    #[test]
    fn gt_as_prediction_is_perfect() {
        let gts = vec![rect_room_record("a"), rect_room_record("b")];
        let (det, layout, collisions) =
            evaluate_scene_set(&gts, &gts, &EvalConfig::default()).unwrap();
        assert_eq!(det.map, 1.0);
        assert_eq!(layout.f1_all, 1.0);
        assert_eq!(collisions, 0);
    }

    #[test]
    fn deleting_all_walls_zeroes_layout_f1() {
        let gts = vec![rect_room_record("a")];
        let mut preds = gts.clone();
        preds[0].quads.clear();
        let (_, layout, _) = evaluate_scene_set(&preds, &gts, &EvalConfig::default()).unwrap();
        assert_eq!(layout.f1_all, 0.0);
    }

    #[test]
    fn scene_id_mismatch_is_rejected() {
        let gts = vec![rect_room_record("a")];
        let preds = vec![rect_room_record("b")];
        assert!(matches!(
            evaluate_scene_set(&preds, &gts, &EvalConfig::default()),
            Err(MetricsError::SceneMismatch(_))
        ));
    }

    #[test]
    fn perturbed_boxes_keep_map_at_iou_quarter() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let gts = vec![rect_room_record("a"), rect_room_record("b")];
        let preds: Vec<SceneRecord> = gts
            .iter()
            .map(|s| {
                let mut p = s.clone();
                for b in &mut p.boxes {
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    b.center.x += 0.05 * angle.cos();
                    b.center.y += 0.05 * angle.sin();
                }
                p
            })
            .collect();
        let (det, _, _) = evaluate_scene_set(&preds, &gts, &EvalConfig::default()).unwrap();
        assert_eq!(det.map, 1.0);
    }
}
