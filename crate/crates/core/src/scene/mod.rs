//! Scene annotations, camera geometry and the per-window common frame.
//!
//! Object positions are the bird's-eye projection of the centroid pixel
//! back-projected at the centroid depth. Consecutive frames are related by a
//! rigid transform fitted to static anchors, and the chain of those
//! transforms maps every frame of a window into the coordinates of its
//! first frame.

mod geometry;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fol::Symbol;
use crate::logicpad::RuleSet;

pub use geometry::{
    back_project, distance, estimate_origin, estimate_origin_with, kinematics, kinematics_sampled, to_bev,
    wrap_angle, Bev, Kinematics, OriginFit, OriginMode, Transform2,
};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("need at least 2 anchor correspondences, found {0}")]
    InsufficientAnchors(usize),
    #[error("all anchors coincide")]
    DegenerateConfiguration,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("frame pair {pair}: {source}")]
    Origin {
        pair: usize,
        #[source]
        source: Box<SceneError>,
    },
    #[error("invalid annotation: {0}")]
    Invalid(String),
    #[error("frame {found} does not follow frame {previous}")]
    NonConsecutiveFrame { previous: i64, found: i64 },
    #[error("window [{start}, {start}+{len}) exceeds the {available} annotated frames")]
    WindowOutOfRange { start: usize, len: usize, available: usize },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub fps: f64,
}

impl CameraIntrinsics {
    /// Image width, taking the optical center as the image middle.
    pub fn width(&self) -> f64 {
        2.0 * self.cx
    }

    pub fn height(&self) -> f64 {
        2.0 * self.cy
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.fx > 0.0 && self.fy > 0.0 && self.fps > 0.0 && self.cx.is_finite() && self.cy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SceneError::Invalid(format!("bad intrinsics {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Symbol>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub kind: Option<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectObservation {
    pub category: Symbol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_instance: Option<Symbol>,
    pub centroid_px: [f64; 2],
    /// `[x0, y0, x1, y1]`.
    pub bbox: [f64; 4],
    pub depth_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_px: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Attributes>,
}

impl ObjectObservation {
    pub fn validate(&self) -> Result<(), SceneError> {
        let [x0, y0, x1, y1] = self.bbox;
        let [u, v] = self.centroid_px;
        if !(self.depth_m > 0.0) {
            return Err(SceneError::NonPositiveDepth(self.depth_m));
        }
        if !(x0 <= u && u <= x1 && y0 <= v && v <= y1) {
            return Err(SceneError::Invalid(format!(
                "bbox {:?} of {} does not contain centroid {:?}",
                self.bbox, self.category, self.centroid_px
            )));
        }
        Ok(())
    }

    /// Ground-plane position in the frame's camera coordinates.
    pub fn bev(&self, k: &CameraIntrinsics) -> Result<Bev, SceneError> {
        Ok(to_bev(back_project(self.centroid_px, self.depth_m, k)?))
    }

    /// Bottom-center of the box, where the object meets the ground.
    pub fn footprint_px(&self) -> [f64; 2] {
        [(self.bbox[0] + self.bbox[2]) / 2.0, self.bbox[3]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameObservation {
    #[serde(rename = "index")]
    pub frame_index: i64,
    pub objects: Vec<ObjectObservation>,
}

/// One annotated sequence, as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<FrameObservation>,
}

impl Annotation {
    pub fn from_json(text: &str) -> Result<Annotation, SceneError> {
        let a: Annotation = serde_json::from_str(text)?;
        a.validate()?;
        Ok(a)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Annotation, SceneError> {
        Annotation::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// Structural checks that need no rule file.
    pub fn validate(&self) -> Result<(), SceneError> {
        self.intrinsics.validate()?;
        check_consecutive(&self.frames)?;
        for f in &self.frames {
            f.objects.iter().try_for_each(ObjectObservation::validate)?;
        }
        Ok(())
    }

    /// Every category must be a declared unary atomic predicate.
    pub fn check_categories(&self, rules: &RuleSet) -> Result<(), SceneError> {
        for f in &self.frames {
            for o in &f.objects {
                if !rules.is_atomic(&o.category) || rules.arity(&o.category) != Some(1) {
                    return Err(SceneError::Invalid(format!("undeclared category `{}`", o.category)));
                }
            }
        }
        Ok(())
    }

    /// Drops every `gt_instance`.
    pub fn without_ids(&self) -> Annotation {
        let mut a = self.clone();
        for f in &mut a.frames {
            for o in &mut f.objects {
                o.gt_instance = None;
            }
        }
        a
    }

    /// The window of `len` frames starting at position `start`.
    pub fn window(&self, start: usize, len: usize, window_id: u64, cfg: &OriginConfig) -> Result<SceneWindow, SceneError> {
        if len == 0 || start + len > self.frames.len() {
            return Err(SceneError::WindowOutOfRange { start, len, available: self.frames.len() });
        }
        SceneWindow::new(self.frames[start..start + len].to_vec(), self.intrinsics, window_id, cfg)
    }
}

fn check_consecutive(frames: &[FrameObservation]) -> Result<(), SceneError> {
    for w in frames.windows(2) {
        if w[1].frame_index != w[0].frame_index + 1 {
            return Err(SceneError::NonConsecutiveFrame { previous: w[0].frame_index, found: w[1].frame_index });
        }
    }
    Ok(())
}

/// Categories whose instances are assumed not to move.
pub const STATIC_CATEGORIES: [&str; 9] =
    ["Road", "LaneMarking", "TrafficSign", "Sidewalk", "Fence", "Pole", "Wall", "Building", "Vegetation"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OriginConfig {
    pub mode: OriginMode,
    /// Largest inter-frame shift for nearest-neighbour anchor matching, meters.
    pub gate_m: f64,
    pub static_categories: Vec<Symbol>,
}

impl Default for OriginConfig {
    fn default() -> Self {
        OriginConfig {
            mode: OriginMode::Rigid,
            gate_m: 1.0,
            static_categories: STATIC_CATEGORIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// `N` consecutive frames with the transforms tying them to the first one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneWindow {
    pub frames: Vec<FrameObservation>,
    pub intrinsics: CameraIntrinsics,
    pub window_id: u64,
    /// `origin_chain[i]` maps frame `i + 1` coordinates into frame `i`.
    pub origin_chain: Vec<Transform2>,
    pub residuals: Vec<f64>,
    /// `to_first[i]` maps frame `i` coordinates into frame 0.
    to_first: Vec<Transform2>,
}

impl SceneWindow {
    pub fn new(
        frames: Vec<FrameObservation>,
        intrinsics: CameraIntrinsics,
        window_id: u64,
        cfg: &OriginConfig,
    ) -> Result<SceneWindow, SceneError> {
        intrinsics.validate()?;
        check_consecutive(&frames)?;
        for f in &frames {
            f.objects.iter().try_for_each(ObjectObservation::validate)?;
        }
        let mut origin_chain = Vec::new();
        let mut residuals = Vec::new();
        for (pair, w) in frames.windows(2).enumerate() {
            let (prev, curr) = anchor_pairs(&w[0], &w[1], &intrinsics, cfg)?;
            let fit = estimate_origin_with(&prev, &curr, cfg.mode)
                .map_err(|e| SceneError::Origin { pair, source: Box::new(e) })?;
            origin_chain.push(fit.transform);
            residuals.push(fit.residual_rms);
        }
        let mut to_first = vec![Transform2::IDENTITY];
        for t in &origin_chain {
            let last = *to_first.last().unwrap();
            to_first.push(last.compose(t));
        }
        Ok(SceneWindow { frames, intrinsics, window_id, origin_chain, residuals, to_first })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_index(&self) -> i64 {
        self.frames.first().map_or(0, |f| f.frame_index)
    }

    pub fn last_index(&self) -> i64 {
        self.frames.last().map_or(0, |f| f.frame_index)
    }

    /// Maps a point of window-relative frame `rel` into the first frame.
    pub fn to_window(&self, rel: usize, p: Bev) -> Bev {
        self.to_first[rel].apply(p)
    }

    pub fn frame_transform(&self, rel: usize) -> Transform2 {
        self.to_first[rel]
    }

    /// Position of an observation of window-relative frame `rel`, in the
    /// first frame's coordinates.
    pub fn position(&self, rel: usize, o: &ObjectObservation) -> Result<Bev, SceneError> {
        Ok(self.to_window(rel, o.bev(&self.intrinsics)?))
    }

    /// Window-relative position of absolute frame index `index`.
    pub fn relative(&self, index: i64) -> Option<usize> {
        let r = index - self.first_index();
        (0..self.len() as i64).contains(&r).then_some(r as usize)
    }
}

/// Corresponding static anchors of two consecutive frames as
/// `(previous, current)` position lists. Anchors carrying the same
/// `gt_instance` are paired directly; the rest are paired as mutual nearest
/// neighbours of the same category within the gate.
pub fn anchor_pairs(
    prev: &FrameObservation,
    curr: &FrameObservation,
    k: &CameraIntrinsics,
    cfg: &OriginConfig,
) -> Result<(Vec<Bev>, Vec<Bev>), SceneError> {
    let statics: BTreeSet<&str> = cfg.static_categories.iter().map(String::as_str).collect();
    fn pick<'a>(
        f: &'a FrameObservation,
        statics: &BTreeSet<&str>,
        k: &CameraIntrinsics,
    ) -> Result<Vec<(&'a ObjectObservation, Bev)>, SceneError> {
        f.objects
            .iter()
            .filter(|o| statics.contains(o.category.as_str()))
            .map(|o| Ok((o, o.bev(k)?)))
            .collect()
    }
    let a = pick(prev, &statics, k)?;
    let b = pick(curr, &statics, k)?;
    let mut out_prev = Vec::new();
    let mut out_curr = Vec::new();

    let mut by_id: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (j, (o, _)) in b.iter().enumerate() {
        if let Some(id) = &o.gt_instance {
            by_id.insert((o.category.as_str(), id.as_str()), j);
        }
    }
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    for (i, (o, p)) in a.iter().enumerate() {
        let Some(id) = &o.gt_instance else { continue };
        if let Some(&j) = by_id.get(&(o.category.as_str(), id.as_str())) {
            out_prev.push(*p);
            out_curr.push(b[j].1);
            used_a[i] = true;
            used_b[j] = true;
        }
    }

    let free_a: Vec<usize> = (0..a.len()).filter(|&i| !used_a[i] && a[i].0.gt_instance.is_none()).collect();
    let free_b: Vec<usize> = (0..b.len()).filter(|&j| !used_b[j] && b[j].0.gt_instance.is_none()).collect();
    let nearest = |p: Bev, cat: &str, pool: &[usize], side: &[(&ObjectObservation, Bev)]| -> Option<usize> {
        pool.iter()
            .copied()
            .filter(|&j| side[j].0.category == cat)
            .map(|j| (distance(p, side[j].1), j))
            .filter(|(d, _)| *d <= cfg.gate_m)
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            .map(|(_, j)| j)
    };
    for &i in &free_a {
        let Some(j) = nearest(a[i].1, &a[i].0.category, &free_b, &b) else { continue };
        if nearest(b[j].1, &b[j].0.category, &free_a, &a) == Some(i) {
            out_prev.push(a[i].1);
            out_curr.push(b[j].1);
        }
    }
    Ok((out_prev, out_curr))
}
