//! Evaluates the atomic predicates over a window's trajectories, producing
//! the ground facts inference starts from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fol::{relation_name, Literal, Symbol};
use crate::inference::{FactSet, InferenceError};
use crate::logicpad::RuleSet;
use crate::scene::{distance, kinematics_sampled, Bev, FrameObservation, OriginConfig, SceneError, SceneWindow};
use crate::tracker::{link_window, presence, TrackError, TrackMode, TrackerConfig, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("category `{0}` is not a declared unary atomic predicate")]
    UndeclaredCategory(Symbol),
    #[error("predicate `{0}` is not declared atomic")]
    UndeclaredPredicate(Symbol),
    #[error("frame {found} does not follow the window's last frame {last}")]
    NonConsecutiveFrame { last: i64, found: i64 },
    #[error("invalid compiler config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Fact(#[from] InferenceError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMode {
    /// Compare the first and last step speeds.
    #[default]
    Endpoints,
    /// Least-squares slope of step speed over the track's span.
    Slope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerConfig {
    /// Net displacement above which an object moves, meters.
    pub eps_move: f64,
    /// Speed change that counts as speeding up or slowing down, m/s.
    pub eps_speed: f64,
    /// Final distance below which two approaching objects touch, meters.
    pub eps_contact: f64,
    /// Mean depth below which an object is close to the camera, meters.
    pub close_depth: f64,
    pub left_frac: f64,
    pub right_frac: f64,
    /// Share of steps that must follow a distance trend.
    pub trend_frac: f64,
    /// Smallest per-step distance change that counts toward a trend, meters.
    pub step_tol: f64,
    pub speed_mode: SpeedMode,
    /// Categories other objects can stand on.
    pub surfaces: Vec<Symbol>,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        CompilerConfig {
            eps_move: 0.1,
            eps_speed: 0.2,
            eps_contact: 0.5,
            close_depth: 10.0,
            left_frac: 1.0 / 3.0,
            right_frac: 2.0 / 3.0,
            trend_frac: 0.7,
            step_tol: 1e-6,
            speed_mode: SpeedMode::Endpoints,
            surfaces: vec!["Road".into(), "Sidewalk".into(), "LaneMarking".into()],
        }
    }
}

impl CompilerConfig {
    pub fn validate(&self) -> Result<(), CompileError> {
        let positive = [self.eps_move, self.eps_speed, self.eps_contact, self.close_depth, self.trend_frac];
        if positive.iter().any(|x| !(*x > 0.0)) || self.step_tol < 0.0 {
            return Err(CompileError::InvalidConfig("thresholds must be positive".into()));
        }
        if !(0.0 <= self.left_frac && self.left_frac < self.right_frac && self.right_frac <= 1.0) {
            return Err(CompileError::InvalidConfig("need 0 <= left_frac < right_frac <= 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to turn raw frames into facts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileSettings {
    pub origin: OriginConfig,
    pub tracker: TrackerConfig,
    pub track_mode: TrackMode,
    pub compiler: CompilerConfig,
}

/// Numbers behind one fact.
pub type Evidence = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFacts {
    pub window_id: u64,
    pub facts: FactSet,
    /// Keyed by the fact's text form.
    pub provenance: BTreeMap<String, Evidence>,
    pub window: SceneWindow,
    pub tracks: Vec<Trajectory>,
}

/// Per-trajectory measurements the unary facts are read from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub id: Symbol,
    pub displacement: f64,
    pub v_start: Option<f64>,
    pub v_end: Option<f64>,
    pub speed_change: Option<f64>,
    pub mean_u: f64,
    pub mean_depth: f64,
}

pub fn summarize(w: &SceneWindow, t: &Trajectory, cfg: &CompilerConfig) -> Result<TrackSummary, CompileError> {
    let samples: Vec<(i64, Bev)> = t.positions(w)?.into_iter().map(|(f, p)| (f as i64, p)).collect();
    let n = t.observations.len() as f64;
    let mean_u = t.observations.values().map(|o| o.centroid_px[0]).sum::<f64>() / n;
    let mean_depth = t.observations.values().map(|o| o.depth_m).sum::<f64>() / n;
    let (mut displacement, mut v_start, mut v_end, mut speed_change) = (0.0, None, None, None);
    if samples.len() >= 2 {
        let k = kinematics_sampled(&samples, w.intrinsics.fps)?;
        displacement = k.displacement_total;
        let (a, b) = (k.velocity[0], *k.velocity.last().unwrap());
        v_start = Some(a);
        v_end = Some(b);
        speed_change = Some(match cfg.speed_mode {
            SpeedMode::Endpoints => b - a,
            SpeedMode::Slope => {
                let times: Vec<f64> = samples.windows(2).map(|s| (s[0].0 + s[1].0) as f64 / 2.0).collect();
                let span = times.last().unwrap() - times[0];
                slope(&times, &k.velocity) * span
            }
        });
    }
    Ok(TrackSummary { id: t.instance_id.clone(), displacement, v_start, v_end, speed_change, mean_u, mean_depth })
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}

/// Trend of the centroid distance between two tracks over their common
/// frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTrend {
    pub d_first: f64,
    pub d_last: f64,
    pub steps: usize,
    pub decreasing: usize,
    pub increasing: usize,
}

pub fn pair_trend(w: &SceneWindow, x: &Trajectory, y: &Trajectory, cfg: &CompilerConfig) -> Result<Option<PairTrend>, CompileError> {
    let mut series = Vec::new();
    for (f, ox) in &x.observations {
        if let Some(oy) = y.observations.get(f) {
            series.push(distance(w.position(*f, ox)?, w.position(*f, oy)?));
        }
    }
    if series.len() < 2 {
        return Ok(None);
    }
    let deltas: Vec<f64> = series.windows(2).map(|d| d[1] - d[0]).collect();
    Ok(Some(PairTrend {
        d_first: series[0],
        d_last: *series.last().unwrap(),
        steps: deltas.len(),
        decreasing: deltas.iter().filter(|d| **d < -cfg.step_tol).count(),
        increasing: deltas.iter().filter(|d| **d > cfg.step_tol).count(),
    }))
}

/// Share of co-visible frames in which `x`'s footprint lies inside `y`'s box.
fn footprint_share(x: &Trajectory, y: &Trajectory) -> Option<f64> {
    let mut both = 0usize;
    let mut inside = 0usize;
    for (f, ox) in &x.observations {
        if let Some(oy) = y.observations.get(f) {
            both += 1;
            let [u, v] = ox.footprint_px();
            let [x0, y0, x1, y1] = oy.bbox;
            if x0 <= u && u <= x1 && y0 <= v && v <= y1 {
                inside += 1;
            }
        }
    }
    (both > 0).then(|| inside as f64 / both as f64)
}

pub fn compile_window(
    w: &SceneWindow,
    tracks: &[Trajectory],
    cfg: &CompilerConfig,
    rules: &RuleSet,
) -> Result<WindowFacts, CompileError> {
    cfg.validate()?;
    let mut out = Emitter { facts: FactSet::new(w.window_id), provenance: BTreeMap::new(), rules };
    let n = w.len();
    let width = w.intrinsics.width();
    let surfaces: Vec<&str> = cfg.surfaces.iter().map(String::as_str).collect();

    for t in tracks {
        if !rules.is_atomic(&t.category) || rules.arity(&t.category) != Some(1) {
            return Err(CompileError::UndeclaredCategory(t.category.clone()));
        }
        let x = t.instance_id.as_str();
        out.emit(&t.category, &[x], [])?;

        let p = presence(t, n);
        let frames = [("first_frame", p.first_frame as f64), ("last_frame", p.last_frame as f64)];
        if p.appears {
            out.emit("Appears", &[x], frames)?;
        }
        if p.disappears {
            out.emit("Disappears", &[x], frames)?;
        }

        let s = summarize(w, t, cfg)?;
        if s.displacement > cfg.eps_move {
            out.emit("Moves", &[x], [("displacement", s.displacement)])?;
        }
        if let (Some(dv), Some(a), Some(b)) = (s.speed_change, s.v_start, s.v_end) {
            let ev = [("v_start", a), ("v_end", b), ("speed_change", dv)];
            if dv > cfg.eps_speed {
                out.emit("SpeedUp", &[x], ev)?;
            } else if dv < -cfg.eps_speed {
                out.emit("SpeedDown", &[x], ev)?;
            }
        }
        let side = if s.mean_u < cfg.left_frac * width {
            "AtLeft"
        } else if s.mean_u >= cfg.right_frac * width {
            "AtRight"
        } else {
            "AtCenter"
        };
        out.emit(side, &[x], [("mean_u", s.mean_u)])?;
        if s.mean_depth < cfg.close_depth {
            out.emit("CloseToCamera", &[x], [("mean_depth", s.mean_depth)])?;
        }
        if let Some(c) = &t.attributes.color {
            out.emit(&relation_name("ColOf"), &[x, c], [])?;
        }
        if let Some(k) = &t.attributes.kind {
            out.emit(&relation_name("TypeOf"), &[x, k], [])?;
        }
    }

    for tx in tracks {
        for ty in tracks {
            if tx.instance_id == ty.instance_id {
                continue;
            }
            let (x, y) = (tx.instance_id.as_str(), ty.instance_id.as_str());
            if let Some(tr) = pair_trend(w, tx, ty, cfg)? {
                let need = cfg.trend_frac * tr.steps as f64;
                let ev = [("d_first", tr.d_first), ("d_last", tr.d_last)];
                let decreases = tr.decreasing as f64 >= need && tr.d_first - tr.d_last > cfg.eps_move;
                let increases = tr.increasing as f64 >= need && tr.d_last - tr.d_first > cfg.eps_move;
                if decreases {
                    out.emit("DistanceDecreases", &[x, y], ev)?;
                    if tr.d_last < cfg.eps_contact {
                        out.emit("DistanceDecreasesToZero", &[x, y], ev)?;
                    }
                }
                if increases {
                    out.emit("DistanceIncreases", &[x, y], ev)?;
                }
            }
            if surfaces.contains(&ty.category.as_str()) && !surfaces.contains(&tx.category.as_str()) {
                if let Some(share) = footprint_share(tx, ty) {
                    if share > 0.5 {
                        out.emit("On", &[x, y], [("share", share)])?;
                    }
                }
            }
        }
    }

    Ok(WindowFacts {
        window_id: w.window_id,
        facts: out.facts,
        provenance: out.provenance,
        window: w.clone(),
        tracks: tracks.to_vec(),
    })
}

struct Emitter<'a> {
    facts: FactSet,
    provenance: BTreeMap<String, Evidence>,
    rules: &'a RuleSet,
}

impl Emitter<'_> {
    fn emit<const K: usize>(&mut self, p: &str, args: &[&str], ev: [(&str, f64); K]) -> Result<(), CompileError> {
        if !self.rules.is_atomic(p) || self.rules.arity(p) != Some(args.len()) {
            return Err(CompileError::UndeclaredPredicate(p.into()));
        }
        let l = Literal::fact(p, args);
        if K > 0 {
            self.provenance.insert(l.to_string(), ev.iter().map(|(k, v)| (k.to_string(), *v)).collect());
        }
        self.facts.insert(l)?;
        Ok(())
    }
}

/// Builds the window, links it and compiles it.
pub fn compile_frames(
    frames: Vec<FrameObservation>,
    intrinsics: crate::scene::CameraIntrinsics,
    window_id: u64,
    settings: &CompileSettings,
    rules: &RuleSet,
) -> Result<WindowFacts, CompileError> {
    let w = SceneWindow::new(frames, intrinsics, window_id, &settings.origin)?;
    let tracks = link_window(&w, settings.track_mode, &settings.tracker)?;
    compile_window(&w, &tracks, &settings.compiler, rules)
}

/// Slides the window one frame forward and recomputes everything.
pub fn advance(
    kb: &WindowFacts,
    next_frame: FrameObservation,
    settings: &CompileSettings,
    rules: &RuleSet,
) -> Result<WindowFacts, CompileError> {
    let last = kb.window.last_index();
    if next_frame.frame_index != last + 1 {
        return Err(CompileError::NonConsecutiveFrame { last, found: next_frame.frame_index });
    }
    let mut frames: Vec<FrameObservation> = kb.window.frames.iter().skip(1).cloned().collect();
    frames.push(next_frame);
    compile_frames(frames, kb.window.intrinsics, kb.window_id + 1, settings, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::{Literal, Term};
    use crate::inference::{resolve, saturate, Query};
    use crate::logicpad::default_ruleset;
    use crate::scene::{Attributes, CameraIntrinsics, ObjectObservation, OriginMode};

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0, fps: 10.0 }
    }

    fn fixed() -> CompileSettings {
        CompileSettings {
            origin: OriginConfig { mode: OriginMode::Fixed, ..OriginConfig::default() },
            ..CompileSettings::default()
        }
    }

    /// Observation of ground point `p` (camera frame) for object `id`.
    fn at(cat: &str, id: &str, p: Bev) -> ObjectObservation {
        let k = cam();
        let u = k.fx * p[0] / p[1] + k.cx;
        let v = k.fy * 1.2 / p[1] + k.cy;
        let half = 0.8 * k.fx / p[1];
        ObjectObservation {
            category: cat.into(),
            gt_instance: Some(id.into()),
            centroid_px: [u, v],
            bbox: [u - half, v - half, u + half, v + half],
            depth_m: p[1],
            flow_px: None,
            attributes: None,
        }
    }

    fn frames(tracks: &[(&str, &str, &dyn Fn(usize) -> Option<Bev>)], n: usize) -> Vec<FrameObservation> {
        (0..n)
            .map(|f| FrameObservation {
                frame_index: f as i64,
                objects: tracks.iter().filter_map(|(c, id, pos)| pos(f).map(|p| at(c, id, p))).collect(),
            })
            .collect()
    }

    fn compile(fs: Vec<FrameObservation>) -> WindowFacts {
        compile_frames(fs, cam(), 0, &fixed(), &default_ruleset()).unwrap()
    }

    fn has(kb: &WindowFacts, p: &str, args: &[&str]) -> bool {
        kb.facts.contains(&Literal::fact(p, args))
    }

    fn derivable(kb: &WindowFacts, p: &str, args: &[&str]) -> bool {
        saturate(&kb.facts, &default_ruleset()).unwrap().facts.contains(&Literal::fact(p, args))
    }

    #[test]
    fn parked_car_is_stopped() {
        let kb = compile(frames(&[("Vehicle", "vehicle01", &|_| Some([0.0, 15.0]))], 10));
        assert!(has(&kb, "Vehicle", &["vehicle01"]));
        assert!(!has(&kb, "Moves", &["vehicle01"]));
        assert!(derivable(&kb, "Stopped", &["vehicle01"]));
        assert!(has(&kb, "AtCenter", &["vehicle01"]));
        assert!(!has(&kb, "Appears", &["vehicle01"]) && !has(&kb, "Disappears", &["vehicle01"]));
    }

    #[test]
    fn steady_car_has_constant_speed() {
        let kb = compile(frames(&[("Vehicle", "vehicle01", &|f| Some([0.0, 12.0 + 0.8 * f as f64]))], 10));
        assert!(has(&kb, "Moves", &["vehicle01"]));
        assert!(!has(&kb, "SpeedUp", &["vehicle01"]) && !has(&kb, "SpeedDown", &["vehicle01"]));
        assert!(derivable(&kb, "ConstantSpeed", &["vehicle01"]));
        let ev = &kb.provenance["Moves(vehicle01)"];
        assert!((ev["displacement"] - 7.2).abs() < 1e-9);
    }

    #[test]
    fn approaching_pair_collides() {
        // distance series 8, 6, 4, 2, 0.3
        let d = [8.0, 6.0, 4.0, 2.0, 0.3];
        let fs = frames(
            &[
                ("Vehicle", "vehicle01", &|_| Some([0.0, 20.0])),
                ("Vehicle", "vehicle02", &move |f| Some([0.0, 20.0 + d[f]])),
            ],
            5,
        );
        let kb = compile(fs);
        for (x, y) in [("vehicle01", "vehicle02"), ("vehicle02", "vehicle01")] {
            assert!(has(&kb, "DistanceDecreases", &[x, y]));
            assert!(has(&kb, "DistanceDecreasesToZero", &[x, y]));
            assert!(derivable(&kb, "Collide", &[x, y]));
            assert!(!has(&kb, "DistanceIncreases", &[x, y]));
        }
    }

    #[test]
    fn receding_pair() {
        let fs = frames(
            &[
                ("Vehicle", "vehicle01", &|_| Some([0.0, 20.0])),
                ("Pedestrian", "pedestrian01", &|f| Some([-4.0 - f as f64, 20.0])),
            ],
            6,
        );
        let kb = compile(fs);
        assert!(has(&kb, "DistanceIncreases", &["vehicle01", "pedestrian01"]));
        assert!(!has(&kb, "DistanceDecreases", &["vehicle01", "pedestrian01"]));
        assert!(derivable(&kb, "Walk", &["pedestrian01"]));
    }

    #[test]
    fn accelerating_and_braking() {
        let kb = compile(frames(
            &[
                ("Vehicle", "vehicle01", &|f| Some([0.0, 10.0 + 0.05 * (f * f) as f64])),
                ("Vehicle", "vehicle02", &|f| Some([3.0, 30.0 - (1.0 * f as f64 - 0.05 * (f * f) as f64)])),
            ],
            10,
        ));
        assert!(has(&kb, "SpeedUp", &["vehicle01"]) && !has(&kb, "SpeedDown", &["vehicle01"]));
        assert!(has(&kb, "SpeedDown", &["vehicle02"]) && !has(&kb, "SpeedUp", &["vehicle02"]));
        assert!(derivable(&kb, "Accelerate", &["vehicle01"]));
    }

    #[test]
    fn image_thirds_and_depth() {
        let kb = compile(frames(
            &[
                ("Pole", "pole01", &|_| Some([-5.0, 8.0])),
                ("Pole", "pole02", &|_| Some([5.0, 8.0])),
                ("Pole", "pole03", &|_| Some([0.5, 25.0])),
            ],
            3,
        ));
        assert!(has(&kb, "AtLeft", &["pole01"]) && has(&kb, "CloseToCamera", &["pole01"]));
        assert!(has(&kb, "AtRight", &["pole02"]));
        assert!(has(&kb, "AtCenter", &["pole03"]) && !has(&kb, "CloseToCamera", &["pole03"]));
    }

    #[test]
    fn attributes_become_function_relations() {
        let mut fs = frames(&[("Vehicle", "vehicle01", &|_| Some([0.0, 15.0]))], 3);
        for f in &mut fs {
            f.objects[0].attributes = Some(Attributes { color: Some("White".into()), kind: Some("Car".into()) });
        }
        let kb = compile(fs);
        assert!(has(&kb, "ColOfRel", &["vehicle01", "White"]));
        assert!(has(&kb, "TypeOfRel", &["vehicle01", "Car"]));
        let rules = default_ruleset();
        let q = Query::new(vec![
            Literal::equality(Term::app("TypeOf", vec![Term::var("x")]), Term::constant("Car")),
            Literal::equality(Term::app("ColOf", vec![Term::var("x")]), Term::constant("White")),
            Literal::new("AtCenter", vec![Term::var("x")]),
            Literal::new("ConstantSpeed", vec![Term::var("x")]),
        ])
        .unwrap();
        assert!(resolve(&kb.facts, &rules, &q).unwrap().truth);
    }

    #[test]
    fn footprint_on_surface() {
        let mut fs = frames(
            &[("Pedestrian", "pedestrian01", &|_| Some([-3.0, 10.0])), ("Vehicle", "vehicle01", &|_| Some([3.0, 10.0]))],
            3,
        );
        for f in &mut fs {
            f.objects.push(ObjectObservation {
                category: "Sidewalk".into(),
                gt_instance: Some("sidewalk01".into()),
                centroid_px: [100.0, 400.0],
                bbox: [0.0, 250.0, 200.0, 480.0],
                depth_m: 6.0,
                flow_px: None,
                attributes: None,
            });
        }
        let kb = compile(fs);
        assert!(has(&kb, "On", &["pedestrian01", "sidewalk01"]));
        assert!(!has(&kb, "On", &["vehicle01", "sidewalk01"]));
        assert!(!has(&kb, "On", &["sidewalk01", "pedestrian01"]));
    }

    #[test]
    fn exclusivity_and_symmetry() {
        let kb = compile(frames(
            &[
                ("Vehicle", "vehicle01", &|f| Some([0.0, 10.0 + 0.05 * (f * f) as f64])),
                ("Vehicle", "vehicle02", &|f| Some([-4.0, 30.0 - f as f64])),
                ("Pedestrian", "pedestrian01", &|f| Some([6.0 - 0.1 * f as f64, 12.0])),
                ("Pole", "pole01", &|_| Some([-6.0, 9.0])),
            ],
            10,
        ));
        let sat = saturate(&kb.facts, &default_ruleset()).unwrap().facts;
        for t in &kb.tracks {
            let x = t.instance_id.as_str();
            let sides = ["AtLeft", "AtCenter", "AtRight"].iter().filter(|p| has(&kb, p, &[x])).count();
            assert_eq!(sides, 1, "{x}");
            assert!(!(has(&kb, "SpeedUp", &[x]) && has(&kb, "SpeedDown", &[x])));
            let moves = sat.contains(&Literal::fact("Moves", &[x]));
            let stopped = sat.contains(&Literal::fact("Stopped", &[x]));
            assert!(moves != stopped);
        }
        for a in &kb.tracks {
            for b in &kb.tracks {
                let (x, y) = (a.instance_id.as_str(), b.instance_id.as_str());
                assert_eq!(has(&kb, "DistanceDecreases", &[x, y]), has(&kb, "DistanceDecreases", &[y, x]));
                assert_eq!(has(&kb, "DistanceIncreases", &[x, y]), has(&kb, "DistanceIncreases", &[y, x]));
            }
        }
        let rules = default_ruleset();
        assert!(kb.facts.predicates().all(|p| rules.is_atomic(p)));
    }

    #[test]
    fn undeclared_category_rejected() {
        let fs = frames(&[("Dragon", "dragon01", &|_| Some([0.0, 15.0]))], 2);
        let err = compile_frames(fs, cam(), 0, &fixed(), &default_ruleset()).unwrap_err();
        assert!(matches!(err, CompileError::UndeclaredCategory(c) if c == "Dragon"));
    }

    #[test]
    fn advance_static_scene_is_stationary() {
        let all = frames(&[("Pole", "pole01", &|_| Some([-5.0, 9.0])), ("Vehicle", "vehicle01", &|_| Some([1.0, 20.0]))], 11);
        let rules = default_ruleset();
        let kb = compile_frames(all[..10].to_vec(), cam(), 0, &fixed(), &rules).unwrap();
        let next = advance(&kb, all[10].clone(), &fixed(), &rules).unwrap();
        assert_eq!(next.window_id, 1);
        assert!(next.facts.same_facts(&kb.facts));
        assert!(matches!(
            advance(&kb, all[3].clone(), &fixed(), &rules),
            Err(CompileError::NonConsecutiveFrame { last: 9, found: 3 })
        ));
    }

    #[test]
    fn advance_drops_departed_and_flags_new_arrivals() {
        let rules = default_ruleset();
        let all = frames(
            &[
                ("Vehicle", "vehicle01", &|f| (f <= 4).then_some([0.0, 15.0])),
                ("Vehicle", "vehicle02", &|f| (f >= 10).then_some([3.0, 15.0])),
                ("Pole", "pole01", &|_| Some([-5.0, 9.0])),
            ],
            15,
        );
        let mut kb = compile_frames(all[..10].to_vec(), cam(), 0, &fixed(), &rules).unwrap();
        assert!(has(&kb, "Disappears", &["vehicle01"]));
        kb = advance(&kb, all[10].clone(), &fixed(), &rules).unwrap();
        assert!(has(&kb, "Appears", &["vehicle02"]));
        for f in &all[11..15] {
            kb = advance(&kb, f.clone(), &fixed(), &rules).unwrap();
        }
        assert_eq!(kb.window_id, 5);
        assert_eq!(kb.facts.mentioning("vehicle01").count(), 0);
    }
}
