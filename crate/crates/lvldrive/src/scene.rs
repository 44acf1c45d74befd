//! Deterministic synthetic driving scenes and the portable `lvl-scene/1`
//! JSON file format.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    normalize_yaw, Box3D, CameraModel, CameraName, FrameTag, Polyline2D, Pose, Vec3,
};

pub const SCENE_SCHEMA_VERSION: &str = "lvl-scene/1";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported scene schema version {found:?}, expected {expected:?}")]
    Version { found: String, expected: &'static str },
    #[error("frame index {index} out of range (scene has {len} frames)")]
    FrameIndex { index: usize, len: usize },
    #[error("invalid scene spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_frames: usize,
    pub n_agents: usize,
    pub n_lanes: usize,
    /// Half-extent of the map in meters; lanes run roughly this long.
    #[serde(default = "default_extent")]
    pub map_extent: f64,
    #[serde(default)]
    pub rig: RigPreset,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
}

fn default_extent() -> f64 {
    100.0
}
fn default_timestep() -> f64 {
    0.5
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.n_frames < 1 {
            return Err(SceneError::BadSpec("n_frames must be >= 1".into()));
        }
        if self.timestep <= 0.0 {
            return Err(SceneError::BadSpec("timestep must be positive".into()));
        }
        if self.n_lanes < 1 {
            return Err(SceneError::BadSpec("n_lanes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RigPreset {
    /// Six-camera surround rig: yaw offsets 0, +-55, +-110, 180 degrees,
    /// shared 1600x900 intrinsics with 1266 px focal length.
    #[default]
    SurroundSix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestamp: f64,
    /// Transforms ego-frame coordinates into the global frame.
    pub ego_pose: Pose,
    /// Annotations in the global frame.
    pub annotations: Vec<Box3D>,
    /// Optional point cloud in the ego frame.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lidar: Option<Vec<Vec3>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub frames: Vec<Frame>,
    pub cameras: Vec<CameraModel>,
    /// Lane centerlines in the global frame.
    pub lanes: Vec<Polyline2D>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    schema_version: String,
    #[serde(flatten)]
    scene: Scene,
}

/// Builds the surround camera rig in the ego frame.
///
/// Camera frames use +z forward, +x right, +y down. Each camera sits 1.5 m
/// above the ego origin and looks outward at its yaw offset.
pub fn camera_rig(preset: RigPreset) -> Vec<CameraModel> {
    let RigPreset::SurroundSix = preset;
    let deg = std::f64::consts::PI / 180.0;
    let spec: [(CameraName, f64); 6] = [
        (CameraName::CAM_FRONT, 0.0),
        (CameraName::CAM_FRONT_LEFT, 55.0),
        (CameraName::CAM_FRONT_RIGHT, -55.0),
        (CameraName::CAM_BACK_LEFT, 110.0),
        (CameraName::CAM_BACK_RIGHT, -110.0),
        (CameraName::CAM_BACK, 180.0),
    ];
    spec.iter()
        .map(|&(name, yaw_deg)| {
            let yaw = yaw_deg * deg;
            let (s, c) = yaw.sin_cos();
            // Viewing direction in ego frame.
            let fwd = [c, s, 0.0];
            let right = [s, -c, 0.0];
            let down = [0.0, 0.0, -1.0];
            // Rows of cam_from_ego rotation: camera axes expressed in ego frame.
            let rotation = [right, down, fwd];
            let pos = [0.0, 0.0, 1.5];
            let r = Pose::new(rotation, [0.0; 3]).unwrap();
            let t = r.apply([-pos[0], -pos[1], -pos[2]]);
            let ego_to_cam = Pose { rotation, translation: t };
            CameraModel {
                name,
                intrinsics: [
                    [1266.0, 0.0, 800.0],
                    [0.0, 1266.0, 450.0],
                    [0.0, 0.0, 1.0],
                ],
                ego_to_cam,
                width: 1600,
                height: 900,
            }
        })
        .collect()
}

struct AgentState {
    pos: [f64; 2],
    heading: f64,
    speed: f64,
    length: f64,
    width: f64,
    height: f64,
    category: &'static str,
    track_id: u64,
}

const CATEGORIES: [(&str, f64, f64, f64, f64); 4] = [
    // (name, length, width, height, top speed)
    ("car", 4.5, 1.9, 1.6, 12.0),
    ("truck", 8.0, 2.5, 3.0, 9.0),
    ("pedestrian", 0.8, 0.8, 1.8, 1.8),
    ("bicycle", 1.8, 0.6, 1.4, 5.0),
];

/// Generates a scene deterministically from its spec.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SceneError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Lanes: gentle sinusoids running along +x, spaced 3.5 m laterally.
    let mut lanes = Vec::with_capacity(spec.n_lanes);
    for i in 0..spec.n_lanes {
        let offset = (i as f64 - (spec.n_lanes as f64 - 1.0) / 2.0) * 3.5;
        let amp: f64 = rng.gen_range(0.0..4.0);
        let wavelength: f64 = rng.gen_range(60.0..160.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let k = std::f64::consts::TAU / wavelength;
        let mut pts = Vec::new();
        let mut x = -spec.map_extent;
        while x <= spec.map_extent {
            pts.push([x, offset + amp * (k * x + phase).sin()]);
            x += 2.0;
        }
        lanes.push(Polyline2D::new(pts, FrameTag::Global).unwrap());
    }

    // Ego drives along the middle lane at constant speed.
    let ego_lane = spec.n_lanes / 2;
    let ego_speed: f64 = rng.gen_range(5.0..10.0);
    let ego_start: f64 = rng.gen_range(10.0..30.0);

    // Agents: spawn near a lane, constant velocity plus small heading noise.
    let mut agents = Vec::with_capacity(spec.n_agents);
    for id in 0..spec.n_agents {
        let (category, length, width, height, vmax) =
            CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
        let lane = &lanes[rng.gen_range(0..lanes.len())];
        let s: f64 = rng.gen_range(0.0..lane.arc_length());
        let base = lane.point_at(s);
        let tangent = lane.tangent_at(s);
        let lateral: f64 = rng.gen_range(-1.0..1.0);
        let heading = tangent[1].atan2(tangent[0])
            + if rng.gen_bool(0.1) { std::f64::consts::PI } else { 0.0 };
        agents.push(AgentState {
            pos: [base[0] - tangent[1] * lateral, base[1] + tangent[0] * lateral],
            heading,
            speed: rng.gen_range(0.0..vmax),
            length,
            width,
            height,
            category,
            track_id: id as u64,
        });
    }

    let mut frames = Vec::with_capacity(spec.n_frames);
    for f in 0..spec.n_frames {
        let t = f as f64 * spec.timestep;
        let s = ego_start + ego_speed * t;
        let lane = &lanes[ego_lane];
        let pos = lane.point_at(s);
        let tan = lane.tangent_at(s);
        let ego_yaw = tan[1].atan2(tan[0]);
        let ego_pose = Pose::from_yaw_translation(ego_yaw, [pos[0], pos[1], 0.0]);

        let annotations = agents
            .iter()
            .map(|a| Box3D {
                center: [a.pos[0], a.pos[1], 0.0],
                length: a.length,
                width: a.width,
                height: a.height,
                yaw: normalize_yaw(a.heading),
                velocity: [a.speed * a.heading.cos(), a.speed * a.heading.sin()],
                category: a.category.to_string(),
                track_id: a.track_id,
            })
            .collect();

        frames.push(Frame { timestamp: t, ego_pose, annotations, lidar: None });

        // Advance agents to the next frame.
        for a in agents.iter_mut() {
            a.pos[0] += a.speed * a.heading.cos() * spec.timestep;
            a.pos[1] += a.speed * a.heading.sin() * spec.timestep;
            a.heading += rng.gen_range(-0.02..0.02);
        }
    }

    Ok(Scene {
        scene_id: format!("scene-{:016x}", spec.seed),
        frames,
        cameras: camera_rig(spec.rig),
        lanes,
    })
}

/// Annotations and lanes converted into one frame's ego coordinates.
pub struct EgoView {
    pub boxes: Vec<Box3D>,
    pub lanes: Vec<Polyline2D>,
}

pub fn to_ego_frame(scene: &Scene, frame_index: usize) -> Result<EgoView, SceneError> {
    let frame = scene.frames.get(frame_index).ok_or(SceneError::FrameIndex {
        index: frame_index,
        len: scene.frames.len(),
    })?;
    let inv = frame.ego_pose.inverse();
    let ego_yaw = frame.ego_pose.yaw();
    let (s, c) = ego_yaw.sin_cos();

    let boxes = frame
        .annotations
        .iter()
        .map(|b| {
            let center = inv.apply(b.center);
            // Velocity rotates with the frame change.
            let vx = c * b.velocity[0] + s * b.velocity[1];
            let vy = -s * b.velocity[0] + c * b.velocity[1];
            Box3D {
                center,
                yaw: normalize_yaw(b.yaw - ego_yaw),
                velocity: [vx, vy],
                ..b.clone()
            }
        })
        .collect();

    let lanes = scene
        .lanes
        .iter()
        .map(|l| {
            let points = l
                .points
                .iter()
                .map(|p| {
                    let q = inv.apply([p[0], p[1], 0.0]);
                    [q[0], q[1]]
                })
                .collect();
            Polyline2D { points, frame: FrameTag::Ego }
        })
        .collect();

    Ok(EgoView { boxes, lanes })
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<(), SceneError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let doc = SceneFile {
        schema_version: SCENE_SCHEMA_VERSION.to_string(),
        scene: scene.clone(),
    };
    serde_json::to_writer(&mut w, &doc).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let file = std::fs::File::open(path)?;
    let doc: SceneFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    if doc.schema_version != SCENE_SCHEMA_VERSION {
        return Err(SceneError::Version {
            found: doc.schema_version,
            expected: SCENE_SCHEMA_VERSION,
        });
    }
    Ok(doc.scene)
}

/// Samples a synthetic point cloud (ego frame) for one frame: points on
/// annotation box surfaces plus a ground plane disc around the ego vehicle.
pub fn synth_lidar(
    scene: &Scene,
    frame_index: usize,
    points_per_agent: usize,
    ground_points: usize,
    seed: u64,
) -> Result<Vec<Vec3>, SceneError> {
    let view = to_ego_frame(scene, frame_index)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = Vec::with_capacity(view.boxes.len() * points_per_agent + ground_points);

    for b in &view.boxes {
        for _ in 0..points_per_agent {
            cloud.push(sample_box_surface(b, &mut rng));
        }
    }
    for _ in 0..ground_points {
        let r: f64 = rng.gen_range(0.0_f64..1.0).sqrt() * 50.0;
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        cloud.push([r * th.cos(), r * th.sin(), 0.0]);
    }
    Ok(cloud)
}

fn sample_box_surface(b: &Box3D, rng: &mut ChaCha8Rng) -> Vec3 {
    let l = b.length;
    let w = b.width;
    let h = b.height;
    // Face areas: two lxh sides, two wxh sides, top lxw (ground face skipped).
    let areas = [l * h, l * h, w * h, w * h, l * w];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    let mut face = 0;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            face = i;
            break;
        }
        pick -= a;
    }
    let u: f64 = rng.gen_range(-0.5..0.5);
    let v: f64 = rng.gen_range(0.0..1.0);
    let local = match face {
        0 => [u * l, w / 2.0, v * h],
        1 => [u * l, -w / 2.0, v * h],
        2 => [l / 2.0, u * w, v * h],
        3 => [-l / 2.0, u * w, v * h],
        _ => [u * l, (v - 0.5) * w, h],
    };
    let (s, c) = b.yaw.sin_cos();
    [
        b.center[0] + c * local[0] - s * local[1],
        b.center[1] + s * local[0] + c * local[1],
        b.center[2] + local[2],
    ]
}

/// Trait hook for adapters that produce scenes from external datasets.
pub trait SceneSource {
    fn scenes(&self) -> Result<Vec<Scene>, SceneError>;
}
