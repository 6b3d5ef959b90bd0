use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, SceneError};

/// A point in the ground plane, `[X, Z]` in meters.
pub type Bev = [f64; 2];

/// Pinhole back-projection of pixel `px` at depth `depth` into camera
/// coordinates `[X, Y, Z]`.
pub fn back_project(px: [f64; 2], depth: f64, k: &CameraIntrinsics) -> Result<[f64; 3], SceneError> {
    if !(depth > 0.0) {
        return Err(SceneError::NonPositiveDepth(depth));
    }
    Ok([(px[0] - k.cx) * depth / k.fx, (px[1] - k.cy) * depth / k.fy, depth])
}

/// Drops the height axis.
pub fn to_bev(p: [f64; 3]) -> Bev {
    [p[0], p[2]]
}

/// Rigid motion of the ground plane: rotate about the vertical axis, then
/// translate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform2 {
    pub rotation_rad: f64,
    pub translation_m: [f64; 2],
}

impl Default for Transform2 {
    fn default() -> Self {
        Transform2::IDENTITY
    }
}

impl Transform2 {
    pub const IDENTITY: Transform2 = Transform2 { rotation_rad: 0.0, translation_m: [0.0, 0.0] };

    pub fn new(rotation_rad: f64, translation_m: [f64; 2]) -> Self {
        Transform2 { rotation_rad: wrap_angle(rotation_rad), translation_m }
    }

    pub fn apply(&self, p: Bev) -> Bev {
        let r = rotate(self.rotation_rad, p);
        [r[0] + self.translation_m[0], r[1] + self.translation_m[1]]
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Transform2) -> Transform2 {
        Transform2::new(self.rotation_rad + other.rotation_rad, self.apply(other.translation_m))
    }

    pub fn inverse(&self) -> Transform2 {
        let t = rotate(-self.rotation_rad, self.translation_m);
        Transform2::new(-self.rotation_rad, [-t[0], -t[1]])
    }
}

pub(crate) fn rotate(theta: f64, p: Bev) -> Bev {
    let (s, c) = theta.sin_cos();
    [p[0] * c - p[1] * s, p[0] * s + p[1] * c]
}

/// Maps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn distance(a: Bev, b: Bev) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginMode {
    /// Rotation and translation.
    #[default]
    Rigid,
    /// Translation only.
    TranslationOnly,
    /// Assume a fixed camera; no anchors needed.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginFit {
    pub transform: Transform2,
    pub residual_rms: f64,
}

/// Least-squares rigid alignment of static anchors: the returned transform
/// maps current-frame coordinates onto the previous frame's.
/// `static_prev[i]` and `static_curr[i]` are the same anchor.
pub fn estimate_origin(static_prev: &[Bev], static_curr: &[Bev]) -> Result<OriginFit, SceneError> {
    estimate_origin_with(static_prev, static_curr, OriginMode::Rigid)
}

pub fn estimate_origin_with(static_prev: &[Bev], static_curr: &[Bev], mode: OriginMode) -> Result<OriginFit, SceneError> {
    if mode == OriginMode::Fixed {
        return Ok(OriginFit { transform: Transform2::IDENTITY, residual_rms: 0.0 });
    }
    let n = static_prev.len().min(static_curr.len());
    if n < 2 {
        return Err(SceneError::InsufficientAnchors(n));
    }
    let (prev, curr) = (&static_prev[..n], &static_curr[..n]);
    let mp = mean(prev);
    let mc = mean(curr);
    let spread = |pts: &[Bev], m: Bev| pts.iter().map(|p| distance(*p, m)).fold(0.0, f64::max);
    let scale = 1.0 + mp[0].abs().max(mp[1].abs()).max(mc[0].abs()).max(mc[1].abs());
    if spread(curr, mc) <= 1e-12 * scale || spread(prev, mp) <= 1e-12 * scale {
        return Err(SceneError::DegenerateConfiguration);
    }

    let theta = match mode {
        OriginMode::Rigid => {
            let (mut a, mut b) = (0.0, 0.0);
            for (p, c) in prev.iter().zip(curr) {
                let (px, pz) = (p[0] - mp[0], p[1] - mp[1]);
                let (cx, cz) = (c[0] - mc[0], c[1] - mc[1]);
                a += px * cx + pz * cz;
                b += pz * cx - px * cz;
            }
            b.atan2(a)
        }
        _ => 0.0,
    };
    let rc = rotate(theta, mc);
    let transform = Transform2::new(theta, [mp[0] - rc[0], mp[1] - rc[1]]);
    let sq: f64 = prev
        .iter()
        .zip(curr)
        .map(|(p, c)| {
            let q = transform.apply(*c);
            (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)
        })
        .sum();
    Ok(OriginFit { transform, residual_rms: (sq / n as f64).sqrt() })
}

fn mean(pts: &[Bev]) -> Bev {
    let n = pts.len() as f64;
    let s = pts.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub displacement_total: f64,
    /// Speed over each step, m/s.
    pub velocity: Vec<f64>,
    /// Change of speed between consecutive steps, m/s².
    pub accel: Vec<f64>,
}

/// Finite-difference kinematics of a track sampled at every frame.
pub fn kinematics(positions: &[Bev], k: &CameraIntrinsics) -> Result<Kinematics, SceneError> {
    let samples: Vec<(i64, Bev)> = positions.iter().enumerate().map(|(i, p)| (i as i64, *p)).collect();
    kinematics_sampled(&samples, k.fps)
}

/// Like [`kinematics`] for tracks with missing frames: each step is divided
/// by its frame gap.
pub fn kinematics_sampled(samples: &[(i64, Bev)], fps: f64) -> Result<Kinematics, SceneError> {
    if samples.len() < 2 {
        return Err(SceneError::TooFewSamples(samples.len()));
    }
    let gaps: Vec<f64> = samples.windows(2).map(|w| (w[1].0 - w[0].0) as f64).collect();
    let velocity: Vec<f64> = samples
        .windows(2)
        .zip(&gaps)
        .map(|(w, g)| distance(w[1].1, w[0].1) * fps / g)
        .collect();
    let accel = velocity
        .windows(2)
        .zip(gaps.windows(2))
        .map(|(v, g)| (v[1] - v[0]) * fps / ((g[0] + g[1]) / 2.0))
        .collect();
    Ok(Kinematics {
        displacement_total: distance(samples[samples.len() - 1].1, samples[0].1),
        velocity,
        accel,
    })
}
