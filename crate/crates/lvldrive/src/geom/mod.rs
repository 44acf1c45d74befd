//! Coordinate frames, 3D box geometry, camera projection, rotated-box BEV IoU
//! and drivable-area tests.
//!
//! Conventions: ego frame is +x forward, +y left, +z up. 3D boxes use a
//! bottom-center origin (the nuScenes convention), so the bottom face sits at
//! `center.z` and the top face at `center.z + height`.

mod iou;
mod project;

pub use iou::bev_iou;
pub use project::project_box_to_image;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];
pub type Vec2 = [f64; 2];
pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("rotation matrix is not orthonormal (|R R^T - I| = {0:.3e})")]
    NotOrthonormal(f64),
    #[error("rotation matrix has det {0}, expected +1")]
    NotProperRotation(f64),
    #[error("degenerate box: length and width must be positive, got {length} x {width}")]
    DegenerateBox { length: f64, width: f64 },
    #[error("camera intrinsics are singular or have non-positive focal lengths")]
    BadIntrinsics,
    #[error("polyline needs at least 2 distinct points")]
    BadPolyline,
}

/// Rigid transform: `p_out = R p + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Validates orthonormality and det = +1 to 1e-9.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeomError> {
        let mut max_dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = 0.0;
                for k in 0..3 {
                    dot += rotation[i][k] * rotation[j][k];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((dot - expect).abs());
            }
        }
        if max_dev > 1e-9 {
            return Err(GeomError::NotOrthonormal(max_dev));
        }
        let d = det3(&rotation);
        if (d - 1.0).abs() > 1e-9 {
            return Err(GeomError::NotProperRotation(d));
        }
        Ok(Pose { rotation, translation })
    }

    /// Rotation about +z by `yaw`, then translation.
    pub fn from_yaw_translation(yaw: f64, translation: Vec3) -> Self {
        let (s, c) = yaw.sin_cos();
        Pose {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation,
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.translation[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.translation[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.translation[2],
        ]
    }

    pub fn inverse(&self) -> Pose {
        let r = &self.rotation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let t = self.translation;
        let nt = [
            -(rt[0][0] * t[0] + rt[0][1] * t[1] + rt[0][2] * t[2]),
            -(rt[1][0] * t[0] + rt[1][1] * t[1] + rt[1][2] * t[2]),
            -(rt[2][0] * t[0] + rt[2][1] * t[1] + rt[2][2] * t[2]),
        ];
        Pose { rotation: rt, translation: nt }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    rotation[i][j] += self.rotation[i][k] * other.rotation[k][j];
                }
            }
        }
        Pose { rotation, translation: self.apply(other.translation) }
    }

    /// Yaw of the rotation's action on the x-axis, projected to the ground plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[1][0].atan2(self.rotation[0][0])
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn transform_points(pose: &Pose, pts: &[Vec3]) -> Vec<Vec3> {
    pts.iter().map(|p| pose.apply(*p)).collect()
}

/// Normalizes an angle into (-pi, pi].
pub fn normalize_yaw(yaw: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = yaw % two_pi;
    if y <= -std::f64::consts::PI {
        y += two_pi;
    } else if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// 3D bounding box, bottom-center origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: Vec3,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
    pub velocity: Vec2,
    pub category: String,
    pub track_id: u64,
}

impl Box3D {
    pub fn bev(&self) -> BevBox {
        BevBox {
            x: self.center[0],
            y: self.center[1],
            length: self.length,
            width: self.width,
            yaw: self.yaw,
        }
    }

    /// Volumetric centroid: bottom center lifted by half the height.
    pub fn centroid(&self) -> Vec3 {
        [self.center[0], self.center[1], self.center[2] + self.height / 2.0]
    }
}

/// Corner order: bottom face first, counter-clockwise seen from above,
/// starting at (+l/2, +w/2); top face in the same order.
pub fn box_corners_3d(b: &Box3D) -> [Vec3; 8] {
    let (s, c) = b.yaw.sin_cos();
    let hl = b.length / 2.0;
    let hw = b.width / 2.0;
    let local = [[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]];
    let mut out = [[0.0; 3]; 8];
    for (i, [lx, ly]) in local.iter().enumerate() {
        let x = b.center[0] + c * lx - s * ly;
        let y = b.center[1] + s * lx + c * ly;
        out[i] = [x, y, b.center[2]];
        out[i + 4] = [x, y, b.center[2] + b.height];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum CameraName {
    CAM_FRONT,
    CAM_FRONT_LEFT,
    CAM_FRONT_RIGHT,
    CAM_BACK,
    CAM_BACK_LEFT,
    CAM_BACK_RIGHT,
}

impl CameraName {
    pub const ALL: [CameraName; 6] = [
        CameraName::CAM_FRONT,
        CameraName::CAM_FRONT_LEFT,
        CameraName::CAM_FRONT_RIGHT,
        CameraName::CAM_BACK,
        CameraName::CAM_BACK_LEFT,
        CameraName::CAM_BACK_RIGHT,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CameraName::CAM_FRONT => "CAM_FRONT",
            CameraName::CAM_FRONT_LEFT => "CAM_FRONT_LEFT",
            CameraName::CAM_FRONT_RIGHT => "CAM_FRONT_RIGHT",
            CameraName::CAM_BACK => "CAM_BACK",
            CameraName::CAM_BACK_LEFT => "CAM_BACK_LEFT",
            CameraName::CAM_BACK_RIGHT => "CAM_BACK_RIGHT",
        }
    }

    pub fn parse(s: &str) -> Option<CameraName> {
        CameraName::ALL
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

/// Pinhole camera. `ego_to_cam` maps ego-frame points into the camera frame
/// (+z forward, +x right, +y down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub name: CameraName,
    pub intrinsics: Mat3,
    pub ego_to_cam: Pose,
    pub width: u32,
    pub height: u32,
}

/// Rotated rectangle in bird's-eye view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevBox {
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub width: f64,
    pub yaw: f64,
}

impl BevBox {
    pub fn corners(&self) -> [Vec2; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let local = [[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]];
        let mut out = [[0.0; 2]; 4];
        for (i, [lx, ly]) in local.iter().enumerate() {
            out[i] = [self.x + c * lx - s * ly, self.y + s * lx + c * ly];
        }
        out
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        let (s, c) = self.yaw.sin_cos();
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        lx.abs() <= self.length / 2.0 && ly.abs() <= self.width / 2.0
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect2D {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
    pub fn center(&self) -> Vec2 {
        [(self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameTag {
    Ego,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline2D {
    pub points: Vec<Vec2>,
    pub frame: FrameTag,
}

impl Polyline2D {
    pub fn new(points: Vec<Vec2>, frame: FrameTag) -> Result<Self, GeomError> {
        if points.len() < 2 {
            return Err(GeomError::BadPolyline);
        }
        for w in points.windows(2) {
            if w[0] == w[1] {
                return Err(GeomError::BadPolyline);
            }
        }
        Ok(Polyline2D { points, frame })
    }

    /// Minimum distance from `p` to any segment of the polyline.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for w in self.points.windows(2) {
            best = best.min(point_segment_distance(p, w[0], w[1]));
        }
        best
    }

    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum()
    }

    /// Point at arc-length position `s`, clamped to the endpoints.
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s <= 0.0 {
            return self.points[0];
        }
        let mut remaining = s;
        for w in self.points.windows(2) {
            let seg = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            if remaining <= seg {
                let t = remaining / seg;
                return [
                    w[0][0] + t * (w[1][0] - w[0][0]),
                    w[0][1] + t * (w[1][1] - w[0][1]),
                ];
            }
            remaining -= seg;
        }
        *self.points.last().unwrap()
    }

    /// Unit tangent at arc-length position `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let mut remaining = s.max(0.0);
        for w in self.points.windows(2) {
            let dx = w[1][0] - w[0][0];
            let dy = w[1][1] - w[0][1];
            let seg = (dx * dx + dy * dy).sqrt();
            if remaining <= seg {
                return [dx / seg, dy / seg];
            }
            remaining -= seg;
        }
        let w = &self.points[self.points.len() - 2..];
        let dx = w[1][0] - w[0][0];
        let dy = w[1][1] - w[0][1];
        let seg = (dx * dx + dy * dy).sqrt();
        [dx / seg, dy / seg]
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let abx = b[0] - a[0];
    let aby = b[1] - a[1];
    let apx = p[0] - a[0];
    let apy = p[1] - a[1];
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cx = a[0] + t * abx;
    let cy = a[1] + t * aby;
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

/// True iff `p` lies within `margin` (inclusive) of some centerline.
/// An empty centerline list is never drivable.
pub fn drivable_contains(centerlines: &[Polyline2D], p: Vec2, margin: f64) -> bool {
    if centerlines.is_empty() {
        log::warn!("drivable_contains called with no centerlines; treating as non-drivable");
        return false;
    }
    centerlines.iter().any(|c| c.distance_to(p) <= margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    FrontLeft,
    FrontRight,
    BackLeft,
    BackRight,
}

impl Sector {
    pub const ALL: [Sector; 4] = [
        Sector::FrontLeft,
        Sector::FrontRight,
        Sector::BackLeft,
        Sector::BackRight,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Sector::FrontLeft => "Front-Left",
            Sector::FrontRight => "Front-Right",
            Sector::BackLeft => "Back-Left",
            Sector::BackRight => "Back-Right",
        }
    }
}

/// Ego convention: +x forward, +y left. Boundaries are half-open so every
/// point lands in exactly one sector; the origin maps to BackLeft.
pub fn sector_of(p: Vec2) -> Sector {
    match (p[0] > 0.0, p[1] >= 0.0) {
        (true, true) => Sector::FrontLeft,
        (true, false) => Sector::FrontRight,
        (false, true) => Sector::BackLeft,
        (false, false) => Sector::BackRight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Box3D {
        Box3D {
            center: [0.0, 0.0, 0.0],
            length: 1.0,
            width: 1.0,
            height: 1.0,
            yaw: 0.0,
            velocity: [0.0, 0.0],
            category: "car".into(),
            track_id: 0,
        }
    }

    fn corner_set(cs: &[Vec3]) -> Vec<[i64; 3]> {
        let mut v: Vec<[i64; 3]> = cs
            .iter()
            .map(|c| {
                [
                    (c[0] * 1e6).round() as i64,
                    (c[1] * 1e6).round() as i64,
                    (c[2] * 1e6).round() as i64,
                ]
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn unit_cube_corners() {
        let cs = box_corners_3d(&unit_box());
        let expected: Vec<Vec3> = vec![
            [0.5, 0.5, 0.0],
            [0.5, -0.5, 0.0],
            [-0.5, -0.5, 0.0],
            [-0.5, 0.5, 0.0],
            [0.5, 0.5, 1.0],
            [0.5, -0.5, 1.0],
            [-0.5, -0.5, 1.0],
            [-0.5, 0.5, 1.0],
        ];
        assert_eq!(corner_set(&cs), corner_set(&expected));
    }

    #[test]
    fn corners_invariant_under_pi_rotation() {
        let mut b = unit_box();
        let base = corner_set(&box_corners_3d(&b));
        b.yaw = std::f64::consts::PI;
        assert_eq!(corner_set(&box_corners_3d(&b)), base);
    }

    #[test]
    fn corners_rotated_quarter_turn() {
        // l=4 along x becomes extent along y after a 90 degree yaw.
        let b = Box3D {
            center: [1.0, 2.0, 0.0],
            length: 4.0,
            width: 2.0,
            height: 1.0,
            yaw: std::f64::consts::FRAC_PI_2,
            ..unit_box()
        };
        let cs = box_corners_3d(&b);
        let xs: Vec<f64> = cs.iter().map(|c| c[0]).collect();
        let ys: Vec<f64> = cs.iter().map(|c| c[1]).collect();
        let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((xmin - 0.0).abs() < 1e-12 && (xmax - 2.0).abs() < 1e-12);
        assert!((ymin - 0.0).abs() < 1e-12 && (ymax - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pose_roundtrip() {
        let pose = Pose::from_yaw_translation(0.7, [1.0, 2.0, 3.0]);
        let pts = vec![[0.3, -0.4, 0.5], [10.0, 0.0, -2.0]];
        let fwd = transform_points(&pose, &pts);
        let back = transform_points(&pose.inverse(), &fwd);
        for (a, b) in pts.iter().zip(back.iter()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pose_quarter_turn() {
        let pose = Pose::from_yaw_translation(std::f64::consts::FRAC_PI_2, [0.0; 3]);
        let out = pose.apply([1.0, 0.0, 0.0]);
        assert!((out[0]).abs() < 1e-12);
        assert!((out[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pose_translation_only() {
        let pose = Pose::from_yaw_translation(0.0, [1.0, 2.0, 3.0]);
        assert_eq!(pose.apply([0.0; 3]), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn pose_validation_rejects_skew() {
        let r = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(Pose::new(r, [0.0; 3]).is_err());
    }

    #[test]
    fn drivable_straight_line() {
        let line = Polyline2D::new(
            vec![[0.0, 0.0], [100.0, 0.0]],
            FrameTag::Ego,
        )
        .unwrap();
        let lanes = vec![line];
        assert!(drivable_contains(&lanes, [10.0, 0.0], 1.75));
        assert!(!drivable_contains(&lanes, [10.0, 2.0], 1.75));
        // boundary inclusive
        assert!(drivable_contains(&lanes, [10.0, 1.75], 1.75));
    }

    #[test]
    fn drivable_empty_is_false() {
        assert!(!drivable_contains(&[], [0.0, 0.0], 1.75));
    }

    #[test]
    fn sectors() {
        assert_eq!(sector_of([5.0, 3.0]), Sector::FrontLeft);
        assert_eq!(sector_of([-1.0, -0.5]), Sector::BackRight);
        assert_eq!(sector_of([0.0, 0.0]), Sector::BackLeft);
    }

    #[test]
    fn yaw_normalization() {
        let pi = std::f64::consts::PI;
        assert!((normalize_yaw(pi) - pi).abs() < 1e-12);
        assert!((normalize_yaw(-pi) - pi).abs() < 1e-12);
        assert!((normalize_yaw(3.0 * pi) - pi).abs() < 1e-12);
        assert!((normalize_yaw(0.1) - 0.1).abs() < 1e-12);
    }
}
