//! Associates observations across the frames of a window into trajectories.
//!
//! Consecutive frames are matched by optimal bipartite assignment on an
//! edge weight mixing flow-propagated and raw box overlap. A track that
//! finds no match is carried forward for up to `bridge_k` frames by a ghost
//! observation extrapolated at constant ground-plane velocity.

mod assign;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fol::Symbol;
use crate::scene::{Attributes, Bev, ObjectObservation, SceneError, SceneWindow};

#[derive(Debug, thiserror::Error)]
pub enum TrackError {
    #[error("cannot compare a {0} with a {1}")]
    CategoryMismatch(Symbol, Symbol),
    #[error("frame {frame}: a {category} has no gt_instance")]
    MissingGroundTruthIds { frame: i64, category: Symbol },
    #[error("frame {frame}: gt_instance `{id}` appears twice")]
    DuplicateId { frame: i64, id: Symbol },
    #[error("gt_instance `{0}` changes category")]
    InconsistentCategory(Symbol),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Share of the flow factor in the edge weight.
    pub alpha: f64,
    /// Edges lighter than this are never matched.
    pub w_min: f64,
    /// Longest run of missed frames a track survives.
    pub bridge_k: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { alpha: 0.5, w_min: 0.1, bridge_k: 2 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackMode {
    /// Group by annotated instance ids.
    #[default]
    Oracle,
    /// Match frame to frame.
    Inferred,
}

impl std::str::FromStr for TrackMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(TrackMode::Oracle),
            "inferred" => Ok(TrackMode::Inferred),
            _ => Err(format!("unknown track mode `{s}`")),
        }
    }
}

/// Intersection over union of two `[x0, y0, x1, y1]` boxes.
pub fn iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = w * h;
    let area = |r: [f64; 4]| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn shifted(b: [f64; 4], d: [f64; 2]) -> [f64; 4] {
    [b[0] + d[0], b[1] + d[1], b[2] + d[0], b[3] + d[1]]
}

/// `alpha · IoU(l moved by its flow, r) + (1 − alpha) · IoU(l, r)`, or the
/// raw IoU alone when `l` carries no flow.
pub fn edge_weight(l: &ObjectObservation, r: &ObjectObservation, alpha: f64) -> Result<f64, TrackError> {
    if l.category != r.category {
        return Err(TrackError::CategoryMismatch(l.category.clone(), r.category.clone()));
    }
    let raw = iou(l.bbox, r.bbox);
    Ok(match l.flow_px {
        Some(f) => alpha * iou(shifted(l.bbox, f), r.bbox) + (1.0 - alpha) * raw,
        None => raw,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationGraph {
    pub left: Vec<ObjectObservation>,
    pub right: Vec<ObjectObservation>,
    /// `(left, right, weight)` for every same-category pair.
    pub edges: Vec<(usize, usize, f64)>,
    /// Edges below this weight are dropped.
    pub skip_cost: f64,
}

impl AssociationGraph {
    pub fn new(left: Vec<ObjectObservation>, right: Vec<ObjectObservation>, cfg: &TrackerConfig) -> Self {
        let mut edges = Vec::new();
        for (i, l) in left.iter().enumerate() {
            for (j, r) in right.iter().enumerate() {
                if let Ok(w) = edge_weight(l, r, cfg.alpha) {
                    edges.push((i, j, w));
                }
            }
        }
        AssociationGraph { left, right, edges, skip_cost: cfg.w_min }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub assignments: Vec<(usize, usize)>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
    pub total_weight: f64,
}

/// Maximum-weight matching over the edges of weight at least `skip_cost`.
pub fn match_frames(g: &AssociationGraph) -> Matching {
    let (n, m) = (g.left.len(), g.right.len());
    let s = n.max(m);
    let mut weight = vec![vec![0.0; s]; s];
    let mut allowed = vec![vec![false; s]; s];
    for &(i, j, w) in &g.edges {
        if w >= g.skip_cost {
            weight[i][j] = w;
            allowed[i][j] = true;
        }
    }
    let cost: Vec<Vec<f64>> = weight.iter().map(|row| row.iter().map(|w| -w).collect()).collect();
    let a = assign::hungarian(&cost);
    let mut out = Matching::default();
    let mut right_used = vec![false; m];
    for i in 0..n {
        let j = a[i];
        if j < m && allowed[i][j] {
            out.assignments.push((i, j));
            out.total_weight += weight[i][j];
            right_used[j] = true;
        } else {
            out.unmatched_left.push(i);
        }
    }
    out.unmatched_right = (0..m).filter(|&j| !right_used[j]).collect();
    out
}

/// One instance over a window. Observations are keyed by window-relative
/// frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub instance_id: Symbol,
    pub category: Symbol,
    pub observations: BTreeMap<usize, ObjectObservation>,
    pub attributes: Attributes,
}

impl Trajectory {
    pub fn first_frame(&self) -> usize {
        *self.observations.keys().next().expect("trajectory has observations")
    }

    pub fn last_frame(&self) -> usize {
        *self.observations.keys().next_back().expect("trajectory has observations")
    }

    /// Ground-plane positions in the window's common frame.
    pub fn positions(&self, w: &SceneWindow) -> Result<Vec<(usize, Bev)>, SceneError> {
        self.observations.iter().map(|(&f, o)| Ok((f, w.position(f, o)?))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceFlags {
    pub appears: bool,
    pub disappears: bool,
    pub first_frame: usize,
    pub last_frame: usize,
}

pub fn presence(t: &Trajectory, n: usize) -> PresenceFlags {
    let (first_frame, last_frame) = (t.first_frame(), t.last_frame());
    PresenceFlags { appears: first_frame > 0, disappears: last_frame + 1 < n, first_frame, last_frame }
}

pub fn link_window(w: &SceneWindow, mode: TrackMode, cfg: &TrackerConfig) -> Result<Vec<Trajectory>, TrackError> {
    match mode {
        TrackMode::Oracle => link_oracle(w),
        TrackMode::Inferred => link_inferred(w, cfg),
    }
}

fn link_oracle(w: &SceneWindow) -> Result<Vec<Trajectory>, TrackError> {
    let mut groups: BTreeMap<Symbol, (Symbol, BTreeMap<usize, ObjectObservation>)> = BTreeMap::new();
    for (rel, f) in w.frames.iter().enumerate() {
        for o in &f.objects {
            let Some(id) = &o.gt_instance else {
                return Err(TrackError::MissingGroundTruthIds { frame: f.frame_index, category: o.category.clone() });
            };
            let entry = groups.entry(id.clone()).or_insert_with(|| (o.category.clone(), BTreeMap::new()));
            if entry.0 != o.category {
                return Err(TrackError::InconsistentCategory(id.clone()));
            }
            if entry.1.insert(rel, o.clone()).is_some() {
                return Err(TrackError::DuplicateId { frame: f.frame_index, id: id.clone() });
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(instance_id, (category, observations))| {
            let attributes = consolidate(&observations);
            Trajectory { instance_id, category, observations, attributes }
        })
        .collect())
}

struct Track {
    category: Symbol,
    observations: BTreeMap<usize, ObjectObservation>,
    /// Consecutive frames without a match.
    missed: usize,
}

fn link_inferred(w: &SceneWindow, cfg: &TrackerConfig) -> Result<Vec<Trajectory>, TrackError> {
    let mut tracks: Vec<Track> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    for (rel, f) in w.frames.iter().enumerate() {
        if rel == 0 {
            for o in &f.objects {
                active.push(tracks.len());
                tracks.push(Track { category: o.category.clone(), observations: BTreeMap::from([(0, o.clone())]), missed: 0 });
            }
            continue;
        }
        let left: Vec<ObjectObservation> = active
            .iter()
            .map(|&t| predecessor(&tracks[t], rel - 1, w))
            .collect::<Result<_, _>>()?;
        let g = AssociationGraph::new(left, f.objects.clone(), cfg);
        let m = match_frames(&g);
        let mut next_active = Vec::new();
        for &(i, j) in &m.assignments {
            let t = active[i];
            tracks[t].observations.insert(rel, f.objects[j].clone());
            tracks[t].missed = 0;
            next_active.push(t);
        }
        for &i in &m.unmatched_left {
            let t = active[i];
            tracks[t].missed += 1;
            if tracks[t].missed <= cfg.bridge_k {
                next_active.push(t);
            }
        }
        for &j in &m.unmatched_right {
            next_active.push(tracks.len());
            let o = f.objects[j].clone();
            tracks.push(Track { category: o.category.clone(), observations: BTreeMap::from([(rel, o)]), missed: 0 });
        }
        next_active.sort_unstable();
        active = next_active;
    }
    Ok(assign_ids(tracks))
}

/// The track's vertex in frame `rel`: its real observation there, or a ghost
/// extrapolated from its last two observations.
fn predecessor(t: &Track, rel: usize, w: &SceneWindow) -> Result<ObjectObservation, SceneError> {
    if let Some(o) = t.observations.get(&rel) {
        return Ok(o.clone());
    }
    let mut it = t.observations.iter().rev();
    let (&f1, last) = it.next().expect("track has observations");
    let p1 = w.position(f1, last)?;
    let vel = match it.next() {
        Some((&f0, prev)) => {
            let p0 = w.position(f0, prev)?;
            let dt = (f1 - f0) as f64;
            [(p1[0] - p0[0]) / dt, (p1[1] - p0[1]) / dt]
        }
        None => [0.0, 0.0],
    };
    let at = |frame: usize| -> Bev {
        let dt = (frame - f1) as f64;
        [p1[0] + vel[0] * dt, p1[1] + vel[1] * dt]
    };
    let here = ghost(last, at(rel), rel, w)?;
    let next = ghost(last, at(rel + 1), (rel + 1).min(w.len() - 1), w)?;
    let mut o = here;
    o.flow_px = Some([next.centroid_px[0] - o.centroid_px[0], next.centroid_px[1] - o.centroid_px[1]]);
    Ok(o)
}

/// Projects a window-frame ground position into frame `rel`, keeping the
/// height and the metric box size of `last`.
fn ghost(last: &ObjectObservation, p: Bev, rel: usize, w: &SceneWindow) -> Result<ObjectObservation, SceneError> {
    let k = &w.intrinsics;
    let cam = w.frame_transform(rel).inverse().apply(p);
    let depth = cam[1].max(1e-6);
    let height = (last.centroid_px[1] - k.cy) * last.depth_m / k.fy;
    let u = k.fx * cam[0] / depth + k.cx;
    let v = k.fy * height / depth + k.cy;
    let scale = last.depth_m / depth;
    let [x0, y0, x1, y1] = last.bbox;
    let [cu, cv] = last.centroid_px;
    Ok(ObjectObservation {
        category: last.category.clone(),
        gt_instance: None,
        centroid_px: [u, v],
        bbox: [u + (x0 - cu) * scale, v + (y0 - cv) * scale, u + (x1 - cu) * scale, v + (y1 - cv) * scale],
        depth_m: depth,
        flow_px: None,
        attributes: last.attributes.clone(),
    })
}

/// Names tracks `category + ordinal`, ordered by first frame and then by
/// the horizontal centroid at that frame.
fn assign_ids(tracks: Vec<Track>) -> Vec<Trajectory> {
    let mut by_cat: BTreeMap<Symbol, Vec<Track>> = BTreeMap::new();
    for t in tracks {
        by_cat.entry(t.category.clone()).or_default().push(t);
    }
    let mut out = Vec::new();
    for (cat, mut ts) in by_cat {
        ts.sort_by(|a, b| {
            let (fa, oa) = a.observations.iter().next().unwrap();
            let (fb, ob) = b.observations.iter().next().unwrap();
            fa.cmp(fb).then(oa.centroid_px[0].total_cmp(&ob.centroid_px[0]))
        });
        for (i, t) in ts.into_iter().enumerate() {
            let attributes = consolidate(&t.observations);
            out.push(Trajectory {
                instance_id: instance_name(&cat, i + 1),
                category: cat.clone(),
                observations: t.observations,
                attributes,
            });
        }
    }
    out.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    out
}

pub fn instance_name(category: &str, ordinal: usize) -> Symbol {
    format!("{}{ordinal:02}", category.to_lowercase())
}

/// Most frequent color and type; ties go to the smaller symbol.
fn consolidate(obs: &BTreeMap<usize, ObjectObservation>) -> Attributes {
    fn vote<'a>(it: impl Iterator<Item = &'a Symbol>) -> Option<Symbol> {
        let mut counts: BTreeMap<&Symbol, usize> = BTreeMap::new();
        for s in it {
            *counts.entry(s).or_default() += 1;
        }
        let best = counts.values().copied().max()?;
        counts.into_iter().find(|(_, c)| *c == best).map(|(s, _)| s.clone())
    }
    let attrs: Vec<&Attributes> = obs.values().filter_map(|o| o.attributes.as_ref()).collect();
    Attributes {
        color: vote(attrs.iter().filter_map(|a| a.color.as_ref())),
        kind: vote(attrs.iter().filter_map(|a| a.kind.as_ref())),
    }
}

/// Observation partition of a set of trajectories, as sets of
/// `(frame, index within frame)`; used to compare linkings.
pub fn partition(w: &SceneWindow, tracks: &[Trajectory]) -> BTreeSet<BTreeSet<(usize, usize)>> {
    tracks
        .iter()
        .map(|t| {
            t.observations
                .iter()
                .map(|(&f, o)| (f, w.frames[f].objects.iter().position(|x| x == o).expect("observation from window")))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CameraIntrinsics, FrameObservation, OriginConfig, OriginMode};
    use proptest::prelude::*;

    fn obs(cat: &str, bbox: [f64; 4], flow: Option<[f64; 2]>) -> ObjectObservation {
        ObjectObservation {
            category: cat.into(),
            gt_instance: None,
            centroid_px: [(bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0],
            bbox,
            depth_m: 10.0,
            flow_px: flow,
            attributes: None,
        }
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou([0.0, 0.0, 2.0, 2.0], [0.0, 0.0, 2.0, 2.0]), 1.0);
        assert_eq!(iou([0.0, 0.0, 2.0, 2.0], [1.0, 0.0, 3.0, 2.0]), 2.0 / 6.0);
        assert_eq!(iou([0.0, 0.0, 1.0, 1.0], [5.0, 5.0, 6.0, 6.0]), 0.0);
        assert_eq!(iou([0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn edge_weight_examples() {
        let a = obs("Vehicle", [0.0, 0.0, 10.0, 10.0], Some([0.0, 0.0]));
        assert_eq!(edge_weight(&a, &a, 0.5).unwrap(), 1.0);
        let l = obs("Vehicle", [0.0, 0.0, 10.0, 10.0], Some([50.0, 0.0]));
        let r = obs("Vehicle", [50.0, 0.0, 60.0, 10.0], None);
        assert_eq!(edge_weight(&l, &r, 0.5).unwrap(), 0.5);
        let still = obs("Vehicle", [0.0, 0.0, 10.0, 10.0], Some([0.0, 0.0]));
        assert_eq!(edge_weight(&still, &r, 0.5).unwrap(), 0.0);
        let no_flow = obs("Vehicle", [0.0, 0.0, 10.0, 10.0], None);
        assert_eq!(edge_weight(&no_flow, &a, 0.5).unwrap(), 1.0);
        let p = obs("Pedestrian", [0.0, 0.0, 10.0, 10.0], None);
        assert!(matches!(edge_weight(&a, &p, 0.5), Err(TrackError::CategoryMismatch(..))));
    }

    #[test]
    fn match_single_pair_and_empty_side() {
        let cfg = TrackerConfig::default();
        let g = AssociationGraph::new(
            vec![obs("Vehicle", [0.0, 0.0, 10.0, 10.0], None)],
            vec![obs("Vehicle", [1.0, 0.0, 11.0, 10.0], None)],
            &cfg,
        );
        assert_eq!(match_frames(&g).assignments, vec![(0, 0)]);
        let g = AssociationGraph::new(
            vec![obs("Vehicle", [0.0, 0.0, 10.0, 10.0], None), obs("Vehicle", [20.0, 0.0, 30.0, 10.0], None)],
            vec![],
            &cfg,
        );
        let m = match_frames(&g);
        assert!(m.assignments.is_empty());
        assert_eq!(m.unmatched_left, vec![0, 1]);
    }

    #[test]
    fn flow_disambiguates_crossing() {
        // A moves right and B moves left; in the next frame they have swapped
        // sides but overlap heavily, so raw IoU prefers the wrong pairing.
        let a = obs("Pedestrian", [100.0, 0.0, 120.0, 40.0], Some([8.0, 0.0]));
        let b = obs("Pedestrian", [112.0, 0.0, 132.0, 40.0], Some([-8.0, 0.0]));
        let a_next = obs("Pedestrian", [108.0, 0.0, 128.0, 40.0], None);
        let b_next = obs("Pedestrian", [104.0, 0.0, 124.0, 40.0], None);
        assert!(iou(a.bbox, b_next.bbox) > iou(a.bbox, a_next.bbox));
        let g = AssociationGraph::new(vec![a, b], vec![a_next, b_next], &TrackerConfig::default());
        let m = match_frames(&g);
        assert_eq!(m.assignments, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn weak_edges_are_skipped() {
        let g = AssociationGraph::new(
            vec![obs("Vehicle", [0.0, 0.0, 10.0, 10.0], None)],
            vec![obs("Vehicle", [9.5, 0.0, 19.5, 10.0], None)],
            &TrackerConfig::default(),
        );
        let m = match_frames(&g);
        assert!(m.assignments.is_empty());
        assert_eq!((m.unmatched_left.len(), m.unmatched_right.len()), (1, 1));
    }

    fn brute_force(g: &AssociationGraph) -> f64 {
        let mut w = vec![vec![None; g.right.len()]; g.left.len()];
        for &(i, j, x) in &g.edges {
            if x >= g.skip_cost {
                w[i][j] = Some(x);
            }
        }
        fn go(w: &[Vec<Option<f64>>], i: usize, used: &mut Vec<bool>) -> f64 {
            if i == w.len() {
                return 0.0;
            }
            let mut best = go(w, i + 1, used);
            for j in 0..used.len() {
                if let (false, Some(x)) = (used[j], w[i][j]) {
                    used[j] = true;
                    best = best.max(x + go(w, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let m = g.right.len();
        go(&w, 0, &mut vec![false; m])
    }

    fn arb_obs() -> impl Strategy<Value = ObjectObservation> {
        (0usize..2, 0.0f64..60.0, 0.0f64..60.0, 5.0f64..25.0, 5.0f64..25.0, prop::option::of((-10.0f64..10.0, -10.0f64..10.0)))
            .prop_map(|(c, x, y, w, h, f)| {
                obs(["Vehicle", "Pedestrian"][c], [x, y, x + w, y + h], f.map(|(a, b)| [a, b]))
            })
    }

    proptest! {
        #[test]
        fn matching_is_optimal(
            left in prop::collection::vec(arb_obs(), 0..7),
            right in prop::collection::vec(arb_obs(), 0..7),
        ) {
            let g = AssociationGraph::new(left, right, &TrackerConfig::default());
            let m = match_frames(&g);
            prop_assert!((m.total_weight - brute_force(&g)).abs() < 1e-9);
            let mut l = BTreeSet::new();
            let mut r = BTreeSet::new();
            for &(i, j) in &m.assignments {
                prop_assert!(l.insert(i) && r.insert(j));
                prop_assert_eq!(&g.left[i].category, &g.right[j].category);
            }
            prop_assert_eq!(l.len() + m.unmatched_left.len(), g.left.len());
            prop_assert_eq!(r.len() + m.unmatched_right.len(), g.right.len());
        }
    }

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0, fps: 10.0 }
    }

    /// A car at ground position `p`, 1.8 m wide, seen by a fixed camera.
    fn car(id: &str, p: Bev, vel: Bev) -> ObjectObservation {
        let k = cam();
        let project = |q: Bev| [k.fx * q[0] / q[1] + k.cx, k.fy * 1.0 / q[1] + k.cy];
        let c = project(p);
        let n = project([p[0] + vel[0], p[1] + vel[1]]);
        let half = 0.9 * k.fx / p[1];
        ObjectObservation {
            category: "Vehicle".into(),
            gt_instance: Some(id.into()),
            centroid_px: c,
            bbox: [c[0] - half, c[1] - half, c[0] + half, c[1] + half],
            depth_m: p[1],
            flow_px: Some([n[0] - c[0], n[1] - c[1]]),
            attributes: Some(Attributes { color: Some("Red".into()), kind: Some("Car".into()) }),
        }
    }

    fn window(visible: &dyn Fn(usize, usize) -> bool, n: usize) -> SceneWindow {
        let starts = [([-3.0, 12.0], [0.0, 0.5]), ([3.0, 20.0], [0.0, -0.5])];
        let frames = (0..n)
            .map(|f| FrameObservation {
                frame_index: f as i64,
                objects: starts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| visible(*i, f))
                    .map(|(i, (p, v))| {
                        let q = [p[0] + v[0] * f as f64, p[1] + v[1] * f as f64];
                        car(&format!("vehicle{:02}", i + 1), q, *v)
                    })
                    .collect(),
            })
            .collect();
        let cfg = OriginConfig { mode: OriginMode::Fixed, ..OriginConfig::default() };
        SceneWindow::new(frames, cam(), 0, &cfg).unwrap()
    }

    #[test]
    fn present_throughout() {
        let w = window(&|i, _| i == 0, 10);
        let ts = link_window(&w, TrackMode::Inferred, &TrackerConfig::default()).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].instance_id, "vehicle01");
        let p = presence(&ts[0], 10);
        assert!(!p.appears && !p.disappears);
    }

    #[test]
    fn late_entry_appears() {
        let w = window(&|i, f| i == 0 || f >= 4, 10);
        let ts = link_window(&w, TrackMode::Inferred, &TrackerConfig::default()).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[1].instance_id, "vehicle02");
        let p = presence(&ts[1], 10);
        assert!(p.appears && !p.disappears);
        assert_eq!(p.first_frame, 4);
    }

    #[test]
    fn occlusion_bridged_by_ghost() {
        let w = window(&|i, f| i == 1 || !(5..=6).contains(&f), 10);
        let ts = link_window(&w, TrackMode::Inferred, &TrackerConfig::default()).unwrap();
        assert_eq!(ts.len(), 2);
        let frames: Vec<usize> = ts[0].observations.keys().copied().collect();
        assert_eq!(frames, vec![0, 1, 2, 3, 4, 7, 8, 9]);
        let oracle = link_window(&w, TrackMode::Oracle, &TrackerConfig::default()).unwrap();
        assert_eq!(partition(&w, &ts), partition(&w, &oracle));
    }

    #[test]
    fn gap_longer_than_bridge_splits() {
        let w = window(&|i, f| i == 1 || !(4..=6).contains(&f), 10);
        let ts = link_window(&w, TrackMode::Inferred, &TrackerConfig::default()).unwrap();
        assert_eq!(ts.len(), 3);
    }

    #[test]
    fn oracle_and_inferred_agree_and_ids_are_stable() {
        let w = window(&|_, _| true, 10);
        let cfg = TrackerConfig::default();
        let a = link_window(&w, TrackMode::Inferred, &cfg).unwrap();
        let b = link_window(&w, TrackMode::Oracle, &cfg).unwrap();
        assert_eq!(partition(&w, &a), partition(&w, &b));
        assert_eq!(a, link_window(&w, TrackMode::Inferred, &cfg).unwrap());
        assert_eq!(a[0].attributes.color.as_deref(), Some("Red"));
        for t in &a {
            assert!(t.observations.keys().zip(t.observations.keys().skip(1)).all(|(x, y)| x < y));
        }
    }

    #[test]
    fn oracle_requires_ids() {
        let mut w = window(&|_, _| true, 3);
        w.frames[1].objects[0].gt_instance = None;
        assert!(matches!(
            link_window(&w, TrackMode::Oracle, &TrackerConfig::default()),
            Err(TrackError::MissingGroundTruthIds { frame: 1, .. })
        ));
    }

    #[test]
    fn presence_flags() {
        let mut t = Trajectory {
            instance_id: "vehicle01".into(),
            category: "Vehicle".into(),
            observations: BTreeMap::new(),
            attributes: Attributes::default(),
        };
        let o = obs("Vehicle", [0.0, 0.0, 1.0, 1.0], None);
        t.observations.insert(0, o.clone());
        t.observations.insert(9, o.clone());
        assert_eq!(presence(&t, 10), PresenceFlags { appears: false, disappears: false, first_frame: 0, last_frame: 9 });
        t.observations.remove(&0);
        t.observations.insert(3, o.clone());
        assert!(presence(&t, 10).appears);
        t.observations.remove(&9);
        t.observations.insert(6, o);
        assert!(presence(&t, 10).disappears);
    }
}
