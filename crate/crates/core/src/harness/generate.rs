//! Synthetic scenes with exact kinematics, their ground-truth facts and
//! yes/no questions with gold answers.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::compiler::CompilerConfig;
use crate::fol::{relation_name, Literal, Symbol};
use crate::frontend::{patterns, ObjectDescriptor, QuestionCategory, Side};
use crate::inference::FactSet;
use crate::logicpad::RuleSet;
use crate::scene::{
    distance, Annotation, Attributes, Bev, CameraIntrinsics, FrameObservation, ObjectObservation, Transform2,
};
use crate::tracker::{instance_name, iou, TrackerConfig};

/// Camera height above the ground plane, meters.
pub const CAMERA_HEIGHT: f64 = 1.5;
const MAX_ATTEMPTS: u64 = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ConstantSpeed,
    Accelerate,
    Decelerate,
    Stop,
    Approach,
    Collide,
    Appear,
    Disappear,
    Crossing,
    Static,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 10] = [
        ScenarioKind::ConstantSpeed,
        ScenarioKind::Accelerate,
        ScenarioKind::Decelerate,
        ScenarioKind::Stop,
        ScenarioKind::Approach,
        ScenarioKind::Collide,
        ScenarioKind::Appear,
        ScenarioKind::Disappear,
        ScenarioKind::Crossing,
        ScenarioKind::Static,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ConstantSpeed => "constant_speed",
            ScenarioKind::Accelerate => "accelerate",
            ScenarioKind::Decelerate => "decelerate",
            ScenarioKind::Stop => "stop",
            ScenarioKind::Approach => "approach",
            ScenarioKind::Collide => "collide",
            ScenarioKind::Appear => "appear",
            ScenarioKind::Disappear => "disappear",
            ScenarioKind::Crossing => "crossing",
            ScenarioKind::Static => "static",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown scenario kind `{s}`"))
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 400.0, fy: 400.0, cx: 480.0, cy: 270.0, fps: 10.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Extra road users besides the ones the kind needs.
    pub objects: usize,
    pub seed: u64,
    /// Frames in the window.
    pub n: usize,
    pub intrinsics: CameraIntrinsics,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        ScenarioSpec { kind, objects: 2, seed, n: 10, intrinsics: default_intrinsics() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n < 6 {
            return Err(HarnessError::InvalidSpec(format!("window of {} frames is shorter than 6", self.n)));
        }
        if self.objects > 4 {
            return Err(HarnessError::InvalidSpec(format!("{} extra objects, at most 4 supported", self.objects)));
        }
        let k = &self.intrinsics;
        if k.validate().is_err() || k.cx <= 0.0 || k.cy <= 0.0 {
            return Err(HarnessError::InvalidSpec(format!("bad intrinsics {k:?}")));
        }
        Ok(())
    }

    /// Directory name used by the CLI.
    pub fn slug(&self) -> String {
        format!("{}-{:04}", self.kind, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAItem {
    pub question: String,
    pub category: QuestionCategory,
    pub gold: bool,
    pub window_id: u64,
}

/// Ground-truth measurements and flags for one object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub id: Symbol,
    pub category: Symbol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Symbol>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub kind: Option<Symbol>,
    pub frames: Vec<usize>,
    pub side: Side,
    pub moves: bool,
    pub speed_up: bool,
    pub speed_down: bool,
    pub appears: bool,
    pub disappears: bool,
    pub close: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtPair {
    pub decreases: bool,
    pub increases: bool,
    pub to_zero: bool,
    pub on: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub objects: Vec<GtObject>,
    /// Ordered pairs of distinct ids with at least one relation.
    pub pairs: Vec<(Symbol, Symbol, GtPair)>,
    pub facts: FactSet,
}

impl GroundTruth {
    pub fn object(&self, id: &str) -> Option<&GtObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn pair(&self, x: &str, y: &str) -> GtPair {
        self.pairs.iter().find(|(a, b, _)| a == x && b == y).map(|p| p.2.clone()).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub annotation: Annotation,
    pub truth: GroundTruth,
    pub qa: Vec<QAItem>,
}

#[derive(Clone, Debug)]
enum Motion {
    Fixed(Bev),
    Linear { p0: Bev, v: Bev },
    /// Straight line along unit `dir` with speed `v0 + a t`.
    Accel { p0: Bev, dir: Bev, v0: f64, a: f64 },
}

impl Motion {
    fn at(&self, t: f64) -> Bev {
        match *self {
            Motion::Fixed(p) => p,
            Motion::Linear { p0, v } => [p0[0] + v[0] * t, p0[1] + v[1] * t],
            Motion::Accel { p0, dir, v0, a } => {
                let s = v0 * t + 0.5 * a * t * t;
                [p0[0] + dir[0] * s, p0[1] + dir[1] * s]
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Body {
    category: &'static str,
    color: Option<&'static str>,
    kind: Option<&'static str>,
    /// Half width and half height, meters.
    half: [f64; 2],
    /// Height of the box bottom above the ground, meters.
    lift: f64,
    motion: Motion,
    visible: Vec<bool>,
    /// Fixed image rectangle, for ground surfaces seen by a still camera.
    surface: Option<[f64; 4]>,
}

#[derive(Clone, Copy, Debug)]
struct Camera {
    c0: Bev,
    v: Bev,
    yaw_rate: f64,
}

impl Camera {
    fn pose(&self, t: f64) -> Transform2 {
        Transform2::new(self.yaw_rate * t, [self.c0[0] + self.v[0] * t, self.c0[1] + self.v[1] * t])
    }
}

/// One projected observation, with the world position it came from.
#[derive(Clone, Debug)]
struct View {
    world: Bev,
    centroid: [f64; 2],
    bbox: [f64; 4],
    depth: f64,
}

struct World {
    k: CameraIntrinsics,
    n: usize,
    camera: Camera,
    bodies: Vec<Body>,
    /// The first `subjects` bodies carry the scene's defining behavior.
    subjects: usize,
}

fn normalize(v: Bev) -> Bev {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

impl World {
    fn time(&self, f: usize) -> f64 {
        f as f64 / self.k.fps
    }

    fn view(&self, b: &Body, f: usize) -> View {
        let k = &self.k;
        if let Some(r) = b.surface {
            let centroid = [(r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0];
            let depth = k.fy * CAMERA_HEIGHT / (centroid[1] - k.cy);
            let world = self.camera.pose(0.0).apply([(centroid[0] - k.cx) * depth / k.fx, depth]);
            return View { world, centroid, bbox: r, depth };
        }
        let t = self.time(f);
        let world = b.motion.at(t);
        let q = self.camera.pose(t).inverse().apply(world);
        let (x, z) = (q[0], q[1]);
        let y = CAMERA_HEIGHT - b.lift - b.half[1];
        let u = k.fx * x / z + k.cx;
        let v = k.fy * y / z + k.cy;
        let (hw, hh) = (k.fx * b.half[0] / z, k.fy * b.half[1] / z);
        View { world, centroid: [u, v], bbox: [u - hw, v - hh, u + hw, v + hh], depth: z }
    }

    fn frames_of(&self, b: &Body) -> Vec<usize> {
        (0..self.n).filter(|&f| b.visible[f]).collect()
    }

    /// Every visible object is in front of the camera with its centroid in
    /// the image.
    fn in_view(&self) -> Result<(), String> {
        let (w, h) = (self.k.width(), self.k.height());
        for (i, b) in self.bodies.iter().enumerate() {
            for f in self.frames_of(b) {
                let v = self.view(b, f);
                let [u, vv] = v.centroid;
                if !(v.depth > 2.0 && (2.0..=w - 2.0).contains(&u) && (0.0..=h).contains(&vv)) {
                    return Err(format!("body {i} out of view at frame {f}"));
                }
            }
        }
        Ok(())
    }

    /// Boxes of same-category objects stay apart, including the frames a
    /// lost track is still carried forward.
    fn separated(&self, bridge_k: usize) -> Result<(), String> {
        let live = |b: &Body, f: usize| -> bool {
            let fr = self.frames_of(b);
            let (Some(&first), Some(&last)) = (fr.first(), fr.last()) else { return false };
            f >= first && f <= last + bridge_k
        };
        let grow = |r: [f64; 4]| {
            let (cx, cy) = ((r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0);
            let (hw, hh) = ((r[2] - r[0]) * 0.75 + 2.0, (r[3] - r[1]) * 0.75 + 2.0);
            [cx - hw, cy - hh, cx + hw, cy + hh]
        };
        for (i, a) in self.bodies.iter().enumerate() {
            for b in &self.bodies[i + 1..] {
                if a.category != b.category {
                    continue;
                }
                for f in 0..self.n {
                    if live(a, f) && live(b, f) && iou(grow(self.view(a, f).bbox), grow(self.view(b, f).bbox)) > 0.0 {
                        return Err(format!("{} boxes meet at frame {f}", a.category));
                    }
                }
            }
        }
        Ok(())
    }

    /// Names per category by first frame, then horizontal position there.
    fn ids(&self) -> Result<Vec<Symbol>, String> {
        let mut by_cat: BTreeMap<&str, Vec<(usize, f64, usize)>> = BTreeMap::new();
        for (i, b) in self.bodies.iter().enumerate() {
            let first = *self.frames_of(b).first().ok_or("invisible body")?;
            by_cat.entry(b.category).or_default().push((first, self.view(b, first).centroid[0], i));
        }
        let mut ids = vec![String::new(); self.bodies.len()];
        for (cat, mut v) in by_cat {
            v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            for w in v.windows(2) {
                if w[0].0 == w[1].0 && (w[0].1 - w[1].1).abs() < 1.0 {
                    return Err("ambiguous naming order".into());
                }
            }
            for (ord, (_, _, i)) in v.into_iter().enumerate() {
                ids[i] = instance_name(cat, ord + 1);
            }
        }
        Ok(ids)
    }

    fn annotation(&self, ids: &[Symbol]) -> Annotation {
        let frames = (0..self.n)
            .map(|f| FrameObservation {
                frame_index: f as i64,
                objects: self
                    .bodies
                    .iter()
                    .zip(ids)
                    .filter(|(b, _)| b.visible[f])
                    .map(|(b, id)| {
                        let v = self.view(b, f);
                        let next = self.view(b, f + 1);
                        let attributes = (b.color.is_some() || b.kind.is_some()).then(|| Attributes {
                            color: b.color.map(Into::into),
                            kind: b.kind.map(Into::into),
                        });
                        ObjectObservation {
                            category: b.category.into(),
                            gt_instance: Some(id.clone()),
                            centroid_px: v.centroid,
                            bbox: v.bbox,
                            depth_m: v.depth,
                            flow_px: Some([next.centroid[0] - v.centroid[0], next.centroid[1] - v.centroid[1]]),
                            attributes,
                        }
                    })
                    .collect(),
            })
            .collect();
        Annotation { intrinsics: self.k, frames }
    }
}

/// Rejects values that fall too near a decision threshold.
fn clear_of(value: f64, threshold: f64, margin: f64, what: &str) -> Result<(), String> {
    if (value - threshold).abs() < margin {
        Err(format!("{what} = {value} is within {margin} of {threshold}"))
    } else {
        Ok(())
    }
}

fn ground_truth(world: &World, ids: &[Symbol], cfg: &CompilerConfig, rules: &RuleSet) -> Result<GroundTruth, String> {
    let n = world.n;
    let fps = world.k.fps;
    let width = world.k.width();
    let mut facts = FactSet::new(0);
    let mut add = |p: &str, args: &[&str]| {
        facts.insert(Literal::fact(p, args)).expect("ground fact");
    };
    let mut objects = Vec::new();
    let views: Vec<BTreeMap<usize, View>> = world
        .bodies
        .iter()
        .map(|b| world.frames_of(b).into_iter().map(|f| (f, world.view(b, f))).collect())
        .collect();

    for ((b, id), vs) in world.bodies.iter().zip(ids).zip(&views) {
        let frames: Vec<usize> = vs.keys().copied().collect();
        let (first, last) = (frames[0], *frames.last().unwrap());
        let pts: Vec<(usize, Bev)> = vs.iter().map(|(&f, v)| (f, v.world)).collect();
        let displacement = distance(pts[0].1, pts[pts.len() - 1].1);
        clear_of(displacement, cfg.eps_move, 0.05, "displacement")?;
        let moves = displacement > cfg.eps_move;
        let (mut speed_up, mut speed_down) = (false, false);
        if pts.len() >= 2 {
            let speed = |a: &(usize, Bev), b: &(usize, Bev)| distance(a.1, b.1) * fps / (b.0 - a.0) as f64;
            let dv = speed(&pts[pts.len() - 2], &pts[pts.len() - 1]) - speed(&pts[0], &pts[1]);
            clear_of(dv, cfg.eps_speed, 0.05, "speed change")?;
            clear_of(dv, -cfg.eps_speed, 0.05, "speed change")?;
            speed_up = dv > cfg.eps_speed;
            speed_down = dv < -cfg.eps_speed;
        }
        let mean_u = vs.values().map(|v| v.centroid[0]).sum::<f64>() / vs.len() as f64;
        let mean_depth = vs.values().map(|v| v.depth).sum::<f64>() / vs.len() as f64;
        clear_of(mean_u, cfg.left_frac * width, 0.02 * width, "mean u")?;
        clear_of(mean_u, cfg.right_frac * width, 0.02 * width, "mean u")?;
        clear_of(mean_depth, cfg.close_depth, 0.25, "mean depth")?;
        let side = if mean_u < cfg.left_frac * width {
            Side::Left
        } else if mean_u >= cfg.right_frac * width {
            Side::Right
        } else {
            Side::Center
        };
        let o = GtObject {
            id: id.clone(),
            category: b.category.into(),
            color: b.color.map(Into::into),
            kind: b.kind.map(Into::into),
            frames,
            side,
            moves,
            speed_up,
            speed_down,
            appears: first > 0,
            disappears: last + 1 < n,
            close: mean_depth < cfg.close_depth,
        };
        add(&o.category, &[id]);
        let flags = [
            (o.appears, "Appears"),
            (o.disappears, "Disappears"),
            (o.moves, "Moves"),
            (o.speed_up, "SpeedUp"),
            (o.speed_down, "SpeedDown"),
            (o.close, "CloseToCamera"),
            (true, side.predicate()),
        ];
        for (on, p) in flags {
            if on {
                add(p, &[id]);
            }
        }
        if let Some(c) = &o.color {
            add(&relation_name("ColOf"), &[id, c]);
        }
        if let Some(t) = &o.kind {
            add(&relation_name("TypeOf"), &[id, t]);
        }
        objects.push(o);
    }

    let mut pairs = Vec::new();
    for (i, bx) in world.bodies.iter().enumerate() {
        for (j, by) in world.bodies.iter().enumerate() {
            if i == j {
                continue;
            }
            let (x, y) = (ids[i].as_str(), ids[j].as_str());
            let common: Vec<usize> = views[i].keys().filter(|f| views[j].contains_key(f)).copied().collect();
            let mut pair = GtPair::default();
            if common.len() >= 2 {
                let d: Vec<f64> = common.iter().map(|f| distance(views[i][f].world, views[j][f].world)).collect();
                let steps: Vec<f64> = d.windows(2).map(|w| w[1] - w[0]).collect();
                for s in &steps {
                    if (1e-8..1e-4).contains(&s.abs()) {
                        return Err(format!("distance step {s} between {x} and {y}"));
                    }
                }
                let need = cfg.trend_frac * steps.len() as f64;
                let dec = steps.iter().filter(|s| **s < -cfg.step_tol).count() as f64;
                let inc = steps.iter().filter(|s| **s > cfg.step_tol).count() as f64;
                let net = d[0] - d[d.len() - 1];
                if dec >= need || inc >= need {
                    clear_of(net.abs(), cfg.eps_move, 0.05, "net distance change")?;
                }
                pair.decreases = dec >= need && net > cfg.eps_move;
                pair.increases = inc >= need && -net > cfg.eps_move;
                if pair.decreases {
                    clear_of(d[d.len() - 1], cfg.eps_contact, 0.1, "final distance")?;
                    pair.to_zero = d[d.len() - 1] < cfg.eps_contact;
                }
            }
            let surface = |c: &str| cfg.surfaces.iter().any(|s| s == c);
            if surface(by.category) && !surface(bx.category) && !common.is_empty() {
                let mut inside = 0;
                for f in &common {
                    let b = views[i][f].bbox;
                    let (u, v) = ((b[0] + b[2]) / 2.0, b[3]);
                    let r = views[j][f].bbox;
                    let gap = (u - r[0]).min(r[2] - u).min(v - r[1]).min(r[3] - v);
                    if gap.abs() < 2.0 {
                        return Err(format!("footprint of {x} on the edge of {y}"));
                    }
                    if gap > 0.0 {
                        inside += 1;
                    }
                }
                pair.on = inside as f64 / common.len() as f64 > 0.5;
            }
            for (on, p) in [
                (pair.decreases, "DistanceDecreases"),
                (pair.to_zero, "DistanceDecreasesToZero"),
                (pair.increases, "DistanceIncreases"),
                (pair.on, "On"),
            ] {
                if on {
                    add(p, &[x, y]);
                }
            }
            if pair != GtPair::default() {
                pairs.push((x.to_string(), y.to_string(), pair));
            }
        }
    }
    for l in facts.iter() {
        if !rules.is_atomic(&l.predicate) {
            return Err(format!("ground truth uses undeclared predicate {}", l.predicate));
        }
    }
    Ok(GroundTruth { objects, pairs, facts })
}

const COLORS: [&str; 8] = ["White", "Black", "Red", "Blue", "Silver", "Gray", "Green", "Yellow"];
const TYPES: [&str; 5] = ["Car", "SUV", "Truck", "Bus", "Van"];

fn vehicle(rng: &mut ChaCha8Rng, color: &'static str, motion: Motion, n: usize) -> Body {
    let kind = *TYPES.choose(rng).unwrap();
    let half = match kind {
        "Car" => [0.9, 0.75],
        "SUV" => [1.0, 0.9],
        "Truck" => [1.2, 1.5],
        "Bus" => [1.3, 1.6],
        _ => [1.0, 1.0],
    };
    Body {
        category: "Vehicle",
        color: Some(color),
        kind: Some(kind),
        half,
        lift: 0.0,
        motion,
        visible: vec![true; n],
        surface: None,
    }
}

fn pedestrian(motion: Motion, n: usize) -> Body {
    Body {
        category: "Pedestrian",
        color: None,
        kind: None,
        half: [0.3, 0.85],
        lift: 0.0,
        motion,
        visible: vec![true; n],
        surface: None,
    }
}

fn anchor(category: &'static str, p: Bev, n: usize) -> Body {
    let (half, lift) = match category {
        "Building" => ([4.0, 5.0], 0.0),
        "Pole" => ([0.15, 3.0], 0.0),
        "Vegetation" => ([1.5, 2.5], 0.0),
        _ => ([0.4, 0.4], 2.1),
    };
    Body { category, color: None, kind: None, half, lift, motion: Motion::Fixed(p), visible: vec![true; n], surface: None }
}

fn surface(category: &'static str, rect: [f64; 4], n: usize) -> Body {
    Body {
        category,
        color: None,
        kind: None,
        half: [0.0, 0.0],
        lift: 0.0,
        motion: Motion::Fixed([0.0, 0.0]),
        visible: vec![true; n],
        surface: Some(rect),
    }
}

/// Build state shared by the kind-specific parts of one attempt.
struct Draft<'a> {
    rng: &'a mut ChaCha8Rng,
    n: usize,
    duration: f64,
    colors: Vec<&'static str>,
    bodies: Vec<Body>,
    still_world: bool,
    /// Body indices the questions should focus on.
    subjects: Vec<usize>,
}

impl Draft<'_> {
    fn color(&mut self) -> &'static str {
        let i = self.rng.gen_range(0..self.colors.len());
        self.colors.swap_remove(i)
    }

    fn lane_point(&mut self) -> Bev {
        [self.rng.gen_range(-2.0..5.0), self.rng.gen_range(12.0..32.0)]
    }

    fn walk_point(&mut self) -> Bev {
        [self.rng.gen_range(-10.0..-4.0), self.rng.gen_range(7.0..18.0)]
    }

    fn push(&mut self, b: Body, subject: bool) -> usize {
        self.bodies.push(b);
        if subject {
            self.subjects.push(self.bodies.len() - 1);
        }
        self.bodies.len() - 1
    }

    fn heading(&mut self) -> Bev {
        let s = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        normalize([self.rng.gen_range(-0.25..0.25), s])
    }

    fn moving_vehicle(&mut self, subject: bool) -> usize {
        let p0 = self.lane_point();
        let dir = self.heading();
        let speed = self.rng.gen_range(4.0..12.0);
        let c = self.color();
        let b = vehicle(self.rng, c, Motion::Linear { p0, v: [dir[0] * speed, dir[1] * speed] }, self.n);
        self.push(b, subject)
    }

    fn parked_vehicle(&mut self, subject: bool) -> usize {
        let p = self.lane_point();
        let c = self.color();
        let b = vehicle(self.rng, c, Motion::Fixed(p), self.n);
        self.push(b, subject)
    }

    fn walker(&mut self, subject: bool) -> usize {
        let p0 = self.walk_point();
        let ang = self.rng.gen_range(0.0..std::f64::consts::TAU);
        let speed = self.rng.gen_range(1.0..1.8);
        let b = pedestrian(Motion::Linear { p0, v: [ang.cos() * speed, ang.sin() * speed] }, self.n);
        self.push(b, subject)
    }

    fn stander(&mut self, subject: bool) -> usize {
        let p = self.walk_point();
        let b = pedestrian(Motion::Fixed(p), self.n);
        self.push(b, subject)
    }

    fn distractor(&mut self) {
        if self.still_world {
            if self.rng.gen_bool(0.5) {
                self.parked_vehicle(false);
            } else {
                self.stander(false);
            }
            return;
        }
        let i = match self.rng.gen_range(0..7) {
            0 => self.moving_vehicle(false),
            1 => self.parked_vehicle(false),
            2 => self.walker(false),
            3 => self.stander(false),
            _ => {
                let p0 = self.lane_point();
                let dir = self.heading();
                let (v0, a) = if self.rng.gen_bool(0.5) {
                    (self.rng.gen_range(2.0..6.0), self.rng.gen_range(2.0..5.0))
                } else {
                    (self.rng.gen_range(8.0..12.0), self.rng.gen_range(-6.0..-3.0))
                };
                let c = self.color();
                let b = vehicle(self.rng, c, Motion::Accel { p0, dir, v0, a }, self.n);
                self.push(b, false)
            }
        };
        // some road users enter late or leave early
        let n = self.n;
        match self.rng.gen_range(0..6) {
            0 => {
                let k = self.rng.gen_range(1..=n / 3);
                self.bodies[i].visible[..k].fill(false);
            }
            1 => {
                let last = self.rng.gen_range(n / 2..=n - 2);
                self.bodies[i].visible[last + 1..].fill(false);
            }
            _ => {}
        }
    }

    /// A vehicle heading straight for a standing pedestrian, ending `d_end`
    /// meters from it.
    fn approach(&mut self, d_end: f64) {
        let target = [self.rng.gen_range(-3.0..4.0), self.rng.gen_range(10.0..22.0)];
        let ang: f64 = self.rng.gen_range(-2.6..-0.5);
        let dir = [ang.cos(), ang.sin()];
        let speed = self.rng.gen_range(5.0..10.0);
        let back = d_end + speed * self.duration;
        let p0 = [target[0] - dir[0] * back, target[1] - dir[1] * back];
        let c = self.color();
        let v = vehicle(self.rng, c, Motion::Linear { p0, v: [dir[0] * speed, dir[1] * speed] }, self.n);
        self.push(v, true);
        self.push(pedestrian(Motion::Fixed(target), self.n), true);
    }
}

fn build_world(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> World {
    let n = spec.n;
    let k = spec.intrinsics;
    let duration = (n - 1) as f64 / k.fps;
    let ego = rng.gen_bool(0.5);
    let camera = if ego {
        Camera {
            c0: [0.0, 0.0],
            v: [rng.gen_range(-0.3..0.3), rng.gen_range(1.0..3.0)],
            yaw_rate: rng.gen_range(-0.04..0.04),
        }
    } else {
        Camera { c0: [0.0, 0.0], v: [0.0, 0.0], yaw_rate: 0.0 }
    };
    let still_world = spec.kind == ScenarioKind::Static;
    let mut d = Draft { rng, n, duration, colors: COLORS.to_vec(), bodies: Vec::new(), still_world, subjects: Vec::new() };

    match spec.kind {
        ScenarioKind::ConstantSpeed => {
            d.moving_vehicle(true);
        }
        ScenarioKind::Accelerate | ScenarioKind::Decelerate => {
            let up = spec.kind == ScenarioKind::Accelerate;
            let p0 = d.lane_point();
            let dir = d.heading();
            let (v0, a) = if up {
                (d.rng.gen_range(2.0..6.0), d.rng.gen_range(2.0..5.0))
            } else {
                (d.rng.gen_range(8.0..12.0), d.rng.gen_range(-6.0..-3.0))
            };
            let c = d.color();
            let b = vehicle(d.rng, c, Motion::Accel { p0, dir, v0, a }, n);
            d.push(b, true);
            if d.rng.gen_bool(0.6) {
                let p0 = d.walk_point();
                let ang = d.rng.gen_range(0.0..std::f64::consts::TAU);
                let (v0, a) = if up {
                    (d.rng.gen_range(0.8..1.2), d.rng.gen_range(1.0..2.0))
                } else {
                    (d.rng.gen_range(1.8..2.2), d.rng.gen_range(-1.5..-1.0))
                };
                d.push(pedestrian(Motion::Accel { p0, dir: [ang.cos(), ang.sin()], v0, a }, n), true);
            }
        }
        ScenarioKind::Stop | ScenarioKind::Static => {
            d.parked_vehicle(true);
            d.stander(true);
        }
        ScenarioKind::Approach => {
            let e = d.rng.gen_range(3.0..8.0);
            d.approach(e);
        }
        ScenarioKind::Collide => {
            let e = d.rng.gen_range(0.05..0.3);
            d.approach(e);
        }
        ScenarioKind::Appear => {
            let i = if d.rng.gen_bool(0.7) { d.moving_vehicle(true) } else { d.walker(true) };
            let latest = n - n.div_ceil(3);
            let k = d.rng.gen_range(1..=latest.min(n / 2));
            for f in 0..k {
                d.bodies[i].visible[f] = false;
            }
        }
        ScenarioKind::Disappear => {
            let i = if d.rng.gen_bool(0.7) { d.moving_vehicle(true) } else { d.walker(true) };
            let last = d.rng.gen_range(n.div_ceil(3).max(n / 2)..=n - 2);
            for f in last + 1..n {
                d.bodies[i].visible[f] = false;
            }
        }
        ScenarioKind::Crossing => {
            let p0 = [d.rng.gen_range(-5.0..-3.0), d.rng.gen_range(8.0..14.0)];
            let speed = d.rng.gen_range(1.2..2.0);
            let i = d.push(pedestrian(Motion::Linear { p0, v: [speed, 0.0] }, n), true);
            let gap = d.rng.gen_range(2..n - 3);
            d.bodies[i].visible[gap] = false;
            d.moving_vehicle(true);
        }
    }
    for _ in 0..spec.objects {
        d.distractor();
    }

    let mut cats = vec!["Building", "Pole", "Vegetation", "TrafficSign"];
    cats.shuffle(d.rng);
    let count = d.rng.gen_range(2..=4);
    for cat in cats.into_iter().take(count) {
        let s = if d.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let p = [s * d.rng.gen_range(7.0..14.0), d.rng.gen_range(20.0..45.0)];
        d.bodies.push(anchor(cat, p, n));
    }
    if !ego {
        let (w, h, cy) = (k.width(), k.height(), k.cy);
        d.bodies.push(surface("Road", [0.4 * w, cy + 0.02 * h, w, h], n));
        d.bodies.push(surface("Sidewalk", [0.0, cy + 0.02 * h, 0.3 * w, h], n));
    }
    let subjects = d.subjects.clone();
    let order = subjects.iter().copied().chain((0..d.bodies.len()).filter(|i| !subjects.contains(i)));
    let bodies = order.map(|i| d.bodies[i].clone()).collect();
    World { k, n, camera, bodies, subjects: subjects.len() }
}

/// Plain evaluation of a question over the ground-truth table.
pub fn gold_answer(truth: &GroundTruth, objects: &[ObjectDescriptor], predicate: &str) -> bool {
    let matches = |o: &GtObject, d: &ObjectDescriptor| {
        d.kind.as_ref().is_none_or(|k| o.kind.as_ref() == Some(k))
            && d.color.as_ref().is_none_or(|c| o.color.as_ref() == Some(c))
            && d.category.as_ref().is_none_or(|c| &o.category == c)
            && d.position.is_none_or(|p| o.side == p)
    };
    let unary = |o: &GtObject| {
        let vehicle = o.category == "Vehicle";
        let person = o.category == "Pedestrian";
        let steady = !o.speed_up && !o.speed_down;
        match predicate {
            "-" => true,
            "Moves" => o.moves,
            "Stopped" => !o.moves,
            "ConstantSpeed" => vehicle && steady,
            "Walk" => person && o.moves,
            "Stand" => person && !o.moves,
            "FixedPace" => person && steady,
            "Accelerate" => vehicle && o.speed_up,
            "SpeedUp" => o.speed_up,
            "SpeedDown" => o.speed_down,
            "IncreasePace" => person && o.speed_up,
            "Appears" => o.appears,
            "Disappears" => o.disappears,
            other => panic!("no unary reading for {other}"),
        }
    };
    let binary = |x: &GtObject, y: &GtObject| {
        let p = truth.pair(&x.id, &y.id);
        match predicate {
            "On" => p.on,
            "GettingCloser" | "DistanceDecreases" => p.decreases,
            "DistanceIncreases" => p.increases,
            "Collide" => p.decreases && p.to_zero,
            other => panic!("no binary reading for {other}"),
        }
    };
    match objects {
        [d] => truth.objects.iter().any(|o| matches(o, d) && unary(o)),
        [d1, d2] => truth.objects.iter().any(|x| {
            matches(x, d1) && truth.objects.iter().any(|y| y.id != x.id && matches(y, d2) && binary(x, y))
        }),
        _ => false,
    }
}

fn article(phrase: &str) -> &'static str {
    let vowel = phrase.starts_with(['a', 'e', 'i', 'o', 'u']) || phrase.starts_with("suv");
    if vowel {
        "an"
    } else {
        "a"
    }
}

/// Renders a question from a grammar template and descriptor phrases.
pub fn question_text(template: &str, phrases: &[String]) -> String {
    let mut text = template.to_string();
    for p in phrases {
        let det = if template.starts_with("is there") { article(p) } else { "the" };
        text = text.replacen('D', &format!("{det} {p}"), 1);
    }
    let mut c = text.chars();
    let first = c.next().map(|f| f.to_uppercase().collect::<String>()).unwrap_or_default();
    format!("{first}{}?", c.as_str())
}

fn descriptor(o: &GtObject, with_position: bool) -> ObjectDescriptor {
    match &o.kind {
        Some(k) => ObjectDescriptor {
            color: o.color.clone(),
            kind: Some(k.clone()),
            category: None,
            position: with_position.then_some(o.side),
        },
        None => ObjectDescriptor { color: o.color.clone(), kind: None, category: Some(o.category.clone()), position: Some(o.side) },
    }
}

fn make_questions(rng: &mut ChaCha8Rng, truth: &GroundTruth, n: usize, subjects: &[Symbol], rules: &RuleSet) -> Vec<QAItem> {
    let table = patterns();
    let template = |p: &str, cat: QuestionCategory| {
        table.iter().find(|q| q.predicate == p && q.category == cat).map(|q| q.template()).expect("pattern")
    };
    let users = road_users(truth, n);
    let focus: Vec<&GtObject> = {
        let s: Vec<&GtObject> = users.iter().copied().filter(|o| subjects.contains(&o.id)).collect();
        if s.is_empty() {
            users.clone()
        } else {
            s
        }
    };
    let surfaces: Vec<&GtObject> = truth.objects.iter().filter(|o| o.category == "Road" || o.category == "Sidewalk").collect();
    let mut out: Vec<QAItem> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut ask = |cat: QuestionCategory, pred: &str, ds: Vec<ObjectDescriptor>, out: &mut Vec<QAItem>| {
        let phrases: Vec<String> = ds.iter().map(|d| d.phrase(rules)).collect();
        let tpl = if pred == "-" { "is there D".to_string() } else { template(pred, cat) };
        let question = question_text(&tpl, &phrases);
        if seen.insert(question.clone()) {
            out.push(QAItem { question, category: cat, gold: gold_answer(truth, &ds, pred), window_id: 0 });
        }
    };
    if users.is_empty() {
        return out;
    }
    let pick = |rng: &mut ChaCha8Rng, from: &[&GtObject]| -> GtObject { (*from.choose(rng).unwrap()).clone() };

    // U1: a present object, and a description nothing in the scene fits.
    let o = pick(rng, &focus);
    let pos = rng.gen_bool(0.5);
    ask(QuestionCategory::U1, "-", vec![descriptor(&o, pos)], &mut out);
    let mut miss = descriptor(&pick(rng, &users), true);
    if miss.kind.is_some() && rng.gen_bool(0.5) {
        let unused: Vec<&str> =
            COLORS.iter().copied().filter(|c| !truth.objects.iter().any(|o| o.color.as_deref() == Some(*c))).collect();
        miss.color = unused.choose(rng).map(|c| c.to_string());
    } else {
        miss.position = Some(*[Side::Left, Side::Center, Side::Right].choose(rng).unwrap());
    }
    ask(QuestionCategory::U1, "-", vec![miss], &mut out);

    // half the time prefer a reading that holds, so yes and no both occur
    let choose = |rng: &mut ChaCha8Rng, opts: &[&'static str], ds: &[ObjectDescriptor]| -> &'static str {
        let yes: Vec<&'static str> = opts.iter().copied().filter(|p| gold_answer(truth, ds, p)).collect();
        if !yes.is_empty() && rng.gen_bool(0.5) {
            yes.choose(rng).unwrap()
        } else {
            opts.choose(rng).unwrap()
        }
    };
    let unary_q = |o: &GtObject, cat: QuestionCategory| -> &'static [&'static str] {
        let vehicle = o.kind.is_some();
        let opts: &[&'static str] = match (cat, vehicle) {
            (QuestionCategory::U2, true) => &["Moves", "Stopped", "ConstantSpeed"],
            (QuestionCategory::U2, false) => &["Moves", "Walk", "Stand", "FixedPace"],
            (QuestionCategory::U3, true) => &["Accelerate", "SpeedUp", "SpeedDown"],
            (QuestionCategory::U3, false) => &["IncreasePace", "SpeedUp", "SpeedDown"],
            _ => &["Appears", "Disappears"],
        };
        opts
    };
    for cat in [QuestionCategory::U2, QuestionCategory::U3, QuestionCategory::U4] {
        for round in 0..2 {
            let lively: Vec<&GtObject> = users
                .iter()
                .copied()
                .filter(|o| unary_q(o, cat).iter().any(|p| gold_answer(truth, &[descriptor(o, true)], p)))
                .collect();
            let o = match round {
                0 => pick(rng, &focus),
                _ if !lively.is_empty() && rng.gen_bool(0.5) => pick(rng, &lively),
                _ => pick(rng, &users),
            };
            let ds = vec![descriptor(&o, rng.gen_bool(0.4))];
            let p = choose(rng, unary_q(&o, cat), &ds);
            ask(cat, p, ds, &mut out);
        }
    }

    if !surfaces.is_empty() {
        for _ in 0..2 {
            let o = pick(rng, &users);
            let d = descriptor(&o, rng.gen_bool(0.4));
            let on = |s: &GtObject| ObjectDescriptor { color: None, kind: None, category: Some(s.category.clone()), position: None };
            let holds: Vec<&GtObject> = surfaces.iter().copied().filter(|s| gold_answer(truth, &[d.clone(), on(s)], "On")).collect();
            let s = if !holds.is_empty() && rng.gen_bool(0.5) { pick(rng, &holds) } else { pick(rng, &surfaces) };
            ask(QuestionCategory::B1, "On", vec![d, on(&s)], &mut out);
        }
    }

    if users.len() >= 2 {
        for round in 0..3 {
            let x = if round == 0 { pick(rng, &focus) } else { pick(rng, &users) };
            let others: Vec<&GtObject> = users.iter().copied().filter(|o| o.id != x.id).collect();
            let y = if round == 0 {
                others.iter().find(|o| subjects.contains(&o.id)).map(|o| (*o).clone()).unwrap_or_else(|| pick(rng, &others))
            } else {
                pick(rng, &others)
            };
            let (a, b) = if rng.gen_bool(0.5) { (x, y) } else { (y, x) };
            let ds = vec![descriptor(&a, rng.gen_bool(0.3)), descriptor(&b, rng.gen_bool(0.3))];
            let p = choose(rng, &["GettingCloser", "DistanceIncreases", "DistanceDecreases", "Collide"], &ds);
            ask(QuestionCategory::B2, p, ds, &mut out);
        }
    }
    out
}

/// Draws a scene for `spec`. Draws whose values sit near a decision
/// threshold or whose objects crowd each other are redrawn; the redraw
/// sequence is fixed by the seed.
pub fn generate_scenario(spec: &ScenarioSpec, rules: &RuleSet) -> Result<Scenario, HarnessError> {
    spec.validate()?;
    let cfg = CompilerConfig::default();
    let bridge_k = TrackerConfig::default().bridge_k;
    let mut last_reason = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ attempt);
        let world = build_world(spec, &mut rng);
        let checked = world
            .in_view()
            .and_then(|_| world.separated(bridge_k))
            .and_then(|_| world.ids())
            .and_then(|ids| ground_truth(&world, &ids, &cfg, rules).map(|t| (ids, t)))
            .and_then(|(ids, truth)| check_kind(spec.kind, &world, &ids, &truth).map(|_| (ids, truth)))
            .and_then(|(ids, truth)| distinct_descriptors(&truth, spec.n).map(|_| (ids, truth)));
        let (ids, truth) = match checked {
            Ok(v) => v,
            Err(e) => {
                last_reason = e;
                continue;
            }
        };
        let subjects = ids[..world.subjects].to_vec();
        let qa = make_questions(&mut rng, &truth, spec.n, &subjects, rules);
        if qa.len() < 3 {
            last_reason = "fewer than 3 questions".into();
            continue;
        }
        let annotation = world.annotation(&ids);
        return Ok(Scenario { spec: spec.clone(), annotation, truth, qa });
    }
    Err(HarnessError::InvalidSpec(format!("no valid draw in {MAX_ATTEMPTS} attempts: {last_reason}")))
}

fn road_users(truth: &GroundTruth, n: usize) -> Vec<&GtObject> {
    let min_frames = n.div_ceil(3);
    truth
        .objects
        .iter()
        .filter(|o| (o.category == "Vehicle" || o.category == "Pedestrian") && o.frames.len() >= min_frames)
        .collect()
}

/// Objects questions may mention can be told apart by their full
/// description.
fn distinct_descriptors(truth: &GroundTruth, n: usize) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for o in road_users(truth, n) {
        if !seen.insert(descriptor(o, true)) {
            return Err(format!("{} shares its description", o.id));
        }
    }
    Ok(())
}

/// The scene shows what its kind promises.
fn check_kind(kind: ScenarioKind, world: &World, ids: &[Symbol], t: &GroundTruth) -> Result<(), String> {
    let get = |i: usize| t.object(&ids[i]).expect("object");
    let s = get(0);
    let ok = match kind {
        ScenarioKind::ConstantSpeed => s.moves && !s.speed_up && !s.speed_down,
        ScenarioKind::Accelerate => s.moves && s.speed_up,
        ScenarioKind::Decelerate => s.moves && s.speed_down,
        ScenarioKind::Stop => !s.moves && !get(1).moves,
        ScenarioKind::Approach => {
            let p = t.pair(&ids[0], &ids[1]);
            p.decreases && !p.to_zero
        }
        ScenarioKind::Collide => {
            let p = t.pair(&ids[0], &ids[1]);
            p.decreases && p.to_zero
        }
        ScenarioKind::Appear => s.appears && !s.disappears,
        ScenarioKind::Disappear => s.disappears && !s.appears,
        ScenarioKind::Crossing => s.moves && world.bodies[0].visible.iter().filter(|v| !**v).count() == 1,
        ScenarioKind::Static => t.objects.iter().all(|o| !o.moves),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{kind} scene does not show its defining behavior"))
    }
}

/// `count` scenarios cycling through every kind.
pub fn generate_suite(seed: u64, count: usize, rules: &RuleSet) -> Result<Vec<Scenario>, HarnessError> {
    let specs: Vec<ScenarioSpec> = (0..count)
        .map(|i| ScenarioSpec::new(ScenarioKind::ALL[i % ScenarioKind::ALL.len()], seed * 1000 + i as u64))
        .collect();
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(specs.len().max(1));
    let chunks: Vec<&[ScenarioSpec]> = specs.chunks(specs.len().div_ceil(workers).max(1)).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|c| s.spawn(move || c.iter().map(|sp| generate_scenario(sp, rules)).collect::<Result<Vec<_>, _>>()))
            .collect();
        let mut out = Vec::new();
        for h in handles {
            out.extend(h.join().expect("generator thread")?);
        }
        Ok(out)
    })
}
