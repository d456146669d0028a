//! Handover discovery: co-detections logged during exploration become
//! directed camera-to-camera edges, each carrying the pixel in the source
//! camera where the robot is safely visible to the destination camera.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, Detection, DrivableMask};
use crate::control::wrap_angle;
use crate::error::{Error, Result};
use crate::field::{distance_transform, sample_gradient, DistanceField, PotentialField};
use crate::grid::{Grid, Pixel};

/// Default minimum co-detections per ordered pair before an edge is trusted.
pub const DEFAULT_N_MIN: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoDetection {
    pub cam_a: String,
    pub pixel_a: Pixel,
    pub cam_b: String,
    pub pixel_b: Pixel,
    pub tick: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoDetectionLog {
    pub samples: Vec<CoDetection>,
}

impl CoDetectionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends one sample per ordered pair of distinct cameras in a single
    /// tick's detections. Returns the number appended.
    pub fn log_codetections(&mut self, detections: &[Detection]) -> usize {
        let before = self.samples.len();
        for (i, a) in detections.iter().enumerate() {
            for (j, b) in detections.iter().enumerate() {
                if i == j || a.camera_id == b.camera_id {
                    continue;
                }
                debug_assert_eq!(a.tick, b.tick, "co-detections must share a tick");
                self.samples.push(CoDetection {
                    cam_a: a.camera_id.clone(),
                    pixel_a: round_pixel(a),
                    cam_b: b.camera_id.clone(),
                    pixel_b: round_pixel(b),
                    tick: a.tick,
                });
            }
        }
        self.samples.len() - before
    }

    /// Samples grouped by ordered `(cam_a, cam_b)`, log order preserved.
    pub fn by_pair(&self) -> BTreeMap<(&str, &str), Vec<&CoDetection>> {
        let mut out: BTreeMap<(&str, &str), Vec<&CoDetection>> = BTreeMap::new();
        for s in &self.samples {
            out.entry((s.cam_a.as_str(), s.cam_b.as_str())).or_default().push(s);
        }
        out
    }
}

fn round_pixel(d: &Detection) -> Pixel {
    let u = (d.center.0 + 0.5).floor().max(0.0) as usize;
    let v = (d.center.1 + 0.5).floor().max(0.0) as usize;
    Pixel(u, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverEdge {
    pub src: String,
    pub dst: String,
    /// Where to drive in `src` so that `dst` sees the robot.
    pub handover: Pixel,
    /// The same ground spot as seen by `dst`.
    pub entry: Pixel,
    pub count: usize,
    /// `min(d_src(handover), d_dst(entry))`, pixels.
    pub clearance: f64,
    /// Set by configuration (virtual split), not learned.
    pub configured: bool,
}

fn lookup(dist: &DistanceField, p: Pixel) -> f64 {
    if p.0 < dist.width() && p.1 < dist.height() {
        dist.at(p)
    } else {
        0.0
    }
}

/// Max-min selection: the sample whose smaller clearance over the two views
/// is largest; ties go to the earliest tick. `None` below `n_min` samples.
pub fn select_handover(
    samples: &[&CoDetection],
    dist_a: &DistanceField,
    dist_b: &DistanceField,
    n_min: usize,
) -> Option<HandoverEdge> {
    if samples.is_empty() || samples.len() < n_min {
        return None;
    }
    let mut best: Option<(&CoDetection, f64)> = None;
    for &s in samples {
        let score = lookup(dist_a, s.pixel_a).min(lookup(dist_b, s.pixel_b));
        let better = match best {
            None => true,
            Some((b, bs)) => score > bs || (score == bs && s.tick < b.tick),
        };
        if better {
            best = Some((s, score));
        }
    }
    best.map(|(s, score)| HandoverEdge {
        src: s.cam_a.clone(),
        dst: s.cam_b.clone(),
        handover: s.pixel_a,
        entry: s.pixel_b,
        count: samples.len(),
        clearance: score,
        configured: false,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HandoverGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<HandoverEdge>,
}

impl HandoverGraph {
    pub fn has_node(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n == id)
    }

    pub fn edge(&self, src: &str, dst: &str) -> Option<&HandoverEdge> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    /// Destinations reachable in one handover from `src`, sorted by id.
    pub fn successors(&self, src: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .edges
            .iter()
            .filter(|e| e.src == src)
            .map(|e| e.dst.as_str())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Inserts or replaces the edge for `(src, dst)`, keeping edges sorted.
    pub fn upsert(&mut self, edge: HandoverEdge) {
        for id in [&edge.src, &edge.dst] {
            if !self.has_node(id) {
                self.nodes.push(id.clone());
            }
        }
        self.edges.retain(|e| !(e.src == edge.src && e.dst == edge.dst));
        self.edges.push(edge);
        self.edges
            .sort_by(|a, b| (a.src.as_str(), a.dst.as_str()).cmp(&(b.src.as_str(), b.dst.as_str())));
    }

    /// Every node reaches every other node.
    pub fn is_strongly_connected(&self) -> bool {
        self.nodes.iter().all(|src| {
            let mut seen = vec![src.as_str()];
            let mut stack = vec![src.as_str()];
            while let Some(n) = stack.pop() {
                for m in self.successors(n) {
                    if !seen.contains(&m) {
                        seen.push(m);
                        stack.push(m);
                    }
                }
            }
            seen.len() == self.nodes.len()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One edge per ordered pair passing [`select_handover`]. Nodes are `listed`
/// in order followed by any other logged camera, sorted.
pub fn build_graph(
    log: &CoDetectionLog,
    dists: &BTreeMap<String, DistanceField>,
    listed: &[String],
    n_min: usize,
) -> Result<HandoverGraph> {
    let mut graph = HandoverGraph {
        nodes: listed.to_vec(),
        edges: Vec::new(),
    };
    let mut extra: Vec<&str> = log
        .samples
        .iter()
        .flat_map(|s| [s.cam_a.as_str(), s.cam_b.as_str()])
        .filter(|id| !listed.iter().any(|l| l == id))
        .collect();
    extra.sort_unstable();
    extra.dedup();
    graph.nodes.extend(extra.into_iter().map(String::from));

    for ((a, b), samples) in log.by_pair() {
        let da = dists.get(a).ok_or_else(|| Error::UnknownCamera(a.to_string()))?;
        let db = dists.get(b).ok_or_else(|| Error::UnknownCamera(b.to_string()))?;
        if let Some(edge) = select_handover(&samples, da, db, n_min) {
            graph.edges.push(edge);
        }
    }
    Ok(graph)
}

/// Configured split of one physical view into two sub-views.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSplit {
    pub parent: String,
    /// `true` assigns a pixel to sub-view A.
    pub partition: Grid<bool>,
    pub interface: Pixel,
}

impl VirtualSplit {
    /// Partition by the directed line `p0 -> p1`: pixels on its left
    /// (image coordinates, `v` down) go to sub-view A.
    pub fn from_line(parent: &str, width: usize, height: usize, p0: [f64; 2], p1: [f64; 2], interface: Pixel) -> Self {
        let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
        let partition = Grid::from_fn(width, height, |u, v| {
            dx * (v as f64 - p0[1]) - dy * (u as f64 - p0[0]) < 0.0
        });
        Self {
            parent: parent.to_string(),
            partition,
            interface,
        }
    }

    /// The two halves of `mask`, checked against the split invariants.
    pub fn halves(&self, mask: &DrivableMask) -> Result<(DrivableMask, DrivableMask)> {
        let bad = |m: &str| Error::InvalidPartition(format!("{}: {m}", self.parent));
        if self.partition.width() != mask.width() || self.partition.height() != mask.height() {
            return Err(bad("partition size differs from the mask"));
        }
        let half = |side: bool| {
            let cells = Grid::from_fn(mask.width(), mask.height(), |u, v| {
                *mask.cells().get(u, v) && *self.partition.get(u, v) == side
            });
            DrivableMask::new(cells).map_err(|_| bad("a half is empty"))
        };
        let (a, b) = (half(true)?, half(false)?);
        if !a.is_connected() || !b.is_connected() {
            return Err(bad("each half must be 4-connected"));
        }
        let i = self.interface;
        if !mask.is_drivable(i) {
            return Err(bad("interface pixel is not drivable"));
        }
        let near: Vec<Pixel> = std::iter::once(i).chain(mask.cells().neighbours4(i)).collect();
        if !near.iter().any(|&p| a.is_drivable(p)) || !near.iter().any(|&p| b.is_drivable(p)) {
            return Err(bad("interface pixel must touch both halves"));
        }
        Ok((a, b))
    }
}

/// Splits `camera` into sub-views `ids.0` / `ids.1` sharing its homography
/// and image size, plus the two configured edges joined at the interface.
pub fn split_virtual_camera(
    camera: &CameraModel,
    split: &VirtualSplit,
    ids: (&str, &str),
) -> Result<(CameraModel, CameraModel, [HandoverEdge; 2])> {
    let mask = camera
        .mask
        .as_ref()
        .ok_or_else(|| Error::MissingMask(camera.id.clone()))?;
    let (ma, mb) = split.halves(mask)?;
    let clearance = distance_transform(mask).at(split.interface);
    let sub = |id: &str, m: DrivableMask| CameraModel {
        id: id.to_string(),
        width: camera.width,
        height: camera.height,
        homography: camera.homography,
        mask: Some(m),
    };
    let edge = |src: &str, dst: &str| HandoverEdge {
        src: src.to_string(),
        dst: dst.to_string(),
        handover: split.interface,
        entry: split.interface,
        count: 0,
        clearance,
        configured: true,
    };
    Ok((
        sub(ids.0, ma),
        sub(ids.1, mb),
        [edge(ids.0, ids.1), edge(ids.1, ids.0)],
    ))
}

/// Largest change of steepest-descent direction between consecutive pixels
/// of `path`, skipping pixels within `exclude_radius` of the field's goal
/// and pixels where the gradient is undefined or flat. Pairs are only
/// compared when both ends are usable.
pub fn descent_clash(field: &PotentialField, path: &[Pixel], exclude_radius: f64) -> f64 {
    let dir = |p: Pixel| -> Option<f64> {
        if p.distance(field.goal()) <= exclude_radius {
            return None;
        }
        let g = sample_gradient(field, p.to_subpixel()).ok()?;
        (g[0].hypot(g[1]) > 1e-12).then(|| (-g[1]).atan2(-g[0]))
    };
    path.windows(2)
        .filter_map(|w| Some(wrap_angle(dir(w[1])? - dir(w[0])?).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Homography;
    use crate::grid::SubPixel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(cam: &str, u: f64, v: f64, tick: u64) -> Detection {
        Detection {
            camera_id: cam.into(),
            center: SubPixel(u, v),
            heading: 0.0,
            tick,
        }
    }

    #[test]
    fn pair_tick_logs_both_directions() {
        let mut log = CoDetectionLog::new();
        assert_eq!(log.log_codetections(&[det("7", 3.0, 4.0, 1), det("8", 9.0, 2.0, 1)]), 2);
        assert_eq!(log.samples[0].cam_a, "7");
        assert_eq!(log.samples[0].pixel_b, Pixel(9, 2));
        assert_eq!(log.samples[1].cam_a, "8");
    }

    #[test]
    fn single_detection_is_a_no_op() {
        let mut log = CoDetectionLog::new();
        assert_eq!(log.log_codetections(&[det("7", 3.0, 4.0, 1)]), 0);
        assert_eq!(log.log_codetections(&[]), 0);
        assert!(log.is_empty());
    }

    #[test]
    fn three_cameras_give_six_samples() {
        let mut log = CoDetectionLog::new();
        let n = log.log_codetections(&[det("4", 1.0, 1.0, 0), det("5a", 2.0, 2.0, 0), det("8", 3.0, 3.0, 0)]);
        assert_eq!(n, 3 * 2);
    }

    /// Strip whose only obstacle is the bottom row, so row `h - 1 - c`
    /// has clearance exactly `c`.
    fn strip_field(values: &[u32]) -> DistanceField {
        let h = *values.iter().max().unwrap() as usize + 1;
        let mask = DrivableMask::new(Grid::from_fn(values.len(), h, |_, v| v + 1 < h)).unwrap();
        distance_transform(&mask)
    }

    fn sample(a: u32, b: u32, tick: u64, h: usize) -> CoDetection {
        CoDetection {
            cam_a: "A".into(),
            pixel_a: Pixel(0, h - 1 - a as usize),
            cam_b: "B".into(),
            pixel_b: Pixel(0, h - 1 - b as usize),
            tick,
        }
    }

    #[test]
    fn max_min_picks_balanced_sample() {
        let dist = strip_field(&[10, 10]);
        let h = dist.height();
        let s = [sample(5, 3, 0, h), sample(4, 4, 1, h), sample(10, 1, 2, h)];
        let refs: Vec<&CoDetection> = s.iter().collect();
        let e = select_handover(&refs, &dist, &dist, 3).unwrap();
        assert_eq!(e.clearance, 4.0);
        assert_eq!(e.handover, s[1].pixel_a);
        assert_eq!(e.entry, s[1].pixel_b);
        assert_eq!(e.count, 3);
        assert!(!e.configured);
    }

    #[test]
    fn below_threshold_gives_nothing() {
        let dist = strip_field(&[5]);
        let h = dist.height();
        let s = [sample(1, 1, 0, h), sample(2, 2, 1, h)];
        let refs: Vec<&CoDetection> = s.iter().collect();
        assert!(select_handover(&refs, &dist, &dist, 10).is_none());
        assert!(select_handover(&refs[..1], &dist, &dist, 1).is_some());
        assert!(select_handover(&[], &dist, &dist, 0).is_none());
    }

    #[test]
    fn ties_go_to_earliest_tick() {
        let dist = strip_field(&[6]);
        let h = dist.height();
        let s = [sample(3, 5, 9, h), sample(5, 3, 4, h), sample(4, 3, 1, h)];
        let refs: Vec<&CoDetection> = s.iter().collect();
        assert_eq!(select_handover(&refs, &dist, &dist, 1).unwrap().handover, s[2].pixel_a);
    }

    fn open_dist(w: usize, h: usize) -> DistanceField {
        distance_transform(&DrivableMask::new(Grid::from_fn(w, h, |u, v| u > 0 && v > 0 && u + 1 < w && v + 1 < h)).unwrap())
    }

    #[test]
    fn empty_log_gives_bare_nodes() {
        let nodes: Vec<String> = vec!["7".into(), "8".into()];
        let g = build_graph(&CoDetectionLog::new(), &BTreeMap::new(), &nodes, 10).unwrap();
        assert_eq!(g.nodes, nodes);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn two_camera_log_gives_two_edges() {
        let mut log = CoDetectionLog::new();
        for t in 0..12 {
            log.log_codetections(&[det("7", 5.0 + t as f64, 6.0, t), det("8", 20.0, 4.0 + t as f64, t)]);
        }
        let dists: BTreeMap<String, DistanceField> =
            [("7".to_string(), open_dist(40, 30)), ("8".to_string(), open_dist(40, 30))].into();
        let g = build_graph(&log, &dists, &["7".into(), "8".into()], 10).unwrap();
        let pairs: Vec<(&str, &str)> = g.edges.iter().map(|e| (e.src.as_str(), e.dst.as_str())).collect();
        assert_eq!(pairs, vec![("7", "8"), ("8", "7")]);
        assert_eq!(g.edges[0].count, 12);
    }

    #[test]
    fn missing_distance_field_is_an_error() {
        let mut log = CoDetectionLog::new();
        log.log_codetections(&[det("7", 5.0, 6.0, 0), det("9", 5.0, 6.0, 0)]);
        let dists: BTreeMap<String, DistanceField> = [("7".to_string(), open_dist(20, 20))].into();
        assert!(build_graph(&log, &dists, &[], 1).is_err());
    }

    #[test]
    fn graph_json_round_trips() {
        let mut g = HandoverGraph {
            nodes: vec!["7".into(), "8".into()],
            edges: vec![],
        };
        g.upsert(HandoverEdge {
            src: "8".into(),
            dst: "7".into(),
            handover: Pixel(3, 4),
            entry: Pixel(5, 6),
            count: 11,
            clearance: 2.5,
            configured: false,
        });
        let s = g.to_json().unwrap();
        assert!(s.contains("\"handover\": [\n"));
        assert_eq!(HandoverGraph::from_json(&s).unwrap(), g);
    }

    fn l_camera() -> CameraModel {
        // L-shaped corridor: bottom leg along v in 12..20, right leg along u in 30..38.
        let mask = DrivableMask::new(Grid::from_fn(40, 22, |u, v| {
            let bottom = (1..39).contains(&u) && (12..21).contains(&v);
            let right = (30..39).contains(&u) && (1..21).contains(&v);
            bottom || right
        }))
        .unwrap();
        CameraModel::new("5", 40, 22, Homography::IDENTITY).unwrap().with_mask(mask).unwrap()
    }

    #[test]
    fn split_produces_connected_halves_and_forced_edges() {
        let cam = l_camera();
        let split = VirtualSplit::from_line("5", 40, 22, [0.0, 11.5], [40.0, 11.5], Pixel(34, 12));
        let (a, b, edges) = split_virtual_camera(&cam, &split, ("5a", "5b")).unwrap();
        let (ma, mb) = (a.mask.as_ref().unwrap(), b.mask.as_ref().unwrap());
        assert!(ma.is_connected() && mb.is_connected());
        assert_eq!(ma.count() + mb.count(), cam.mask.as_ref().unwrap().count());
        assert_eq!(a.homography, cam.homography);
        assert_eq!((edges[0].src.as_str(), edges[0].dst.as_str()), ("5a", "5b"));
        assert!(edges.iter().all(|e| e.configured && e.handover == Pixel(34, 12) && e.entry == Pixel(34, 12)));
        // A detection in the upper leg lands in exactly one sub-view.
        let p = SubPixel(34.0, 5.0);
        assert!(!ma.contains(p) && mb.contains(p) || ma.contains(p) && !mb.contains(p));
    }

    #[test]
    fn split_with_empty_half_is_rejected() {
        let cam = l_camera();
        let split = VirtualSplit::from_line("5", 40, 22, [0.0, -5.0], [40.0, -5.0], Pixel(34, 12));
        assert!(matches!(
            split_virtual_camera(&cam, &split, ("5a", "5b")),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn interface_must_touch_both_halves() {
        let cam = l_camera();
        let split = VirtualSplit::from_line("5", 40, 22, [0.0, 11.5], [40.0, 11.5], Pixel(34, 17));
        assert!(split_virtual_camera(&cam, &split, ("5a", "5b")).is_err());
    }

    proptest::proptest! {
        #[test]
        fn selection_is_brute_force_max_min(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dist = open_dist(30, 30);
            let n = rng.random_range(1..40);
            let s: Vec<CoDetection> = (0..n).map(|k| CoDetection {
                cam_a: "A".into(),
                pixel_a: Pixel(rng.random_range(0..30), rng.random_range(0..30)),
                cam_b: "B".into(),
                pixel_b: Pixel(rng.random_range(0..30), rng.random_range(0..30)),
                tick: k,
            }).collect();
            let refs: Vec<&CoDetection> = s.iter().collect();
            let e = select_handover(&refs, &dist, &dist, 1).unwrap();
            let scores: Vec<f64> = s.iter().map(|x| dist.at(x.pixel_a).min(dist.at(x.pixel_b))).collect();
            let best = scores.iter().cloned().fold(f64::MIN, f64::max);
            proptest::prop_assert!(scores.iter().all(|&x| e.clearance >= x));
            let first = scores.iter().position(|&x| x == best).unwrap();
            proptest::prop_assert_eq!(e.handover, s[first].pixel_a);
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            proptest::prop_assert!(e.clearance >= sorted[sorted.len() / 2]);
        }

        #[test]
        fn ordered_pair_counts_are_symmetric(ticks in proptest::collection::vec(proptest::collection::vec(0usize..4, 0..4), 1..30)) {
            let ids = ["3", "4", "5a", "8"];
            let mut log = CoDetectionLog::new();
            for (t, seen) in ticks.iter().enumerate() {
                let mut cams: Vec<usize> = seen.clone();
                cams.sort_unstable();
                cams.dedup();
                let dets: Vec<Detection> = cams.iter().map(|&c| det(ids[c], 1.0, 1.0, t as u64)).collect();
                log.log_codetections(&dets);
            }
            let pairs = log.by_pair();
            for ((a, b), v) in &pairs {
                proptest::prop_assert_eq!(v.len(), pairs.get(&(*b, *a)).map_or(0, |w| w.len()));
            }
        }
    }
}
