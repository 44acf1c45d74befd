//! Python module `lvldrive_py`: rotated-box IoU, sectors, the answer
//! codec, scene/QA generation (JSON in, JSON out), text metrics, and the
//! fusion gradient check.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lvldrive::codec;
use lvldrive::fusion;
use lvldrive::geom;
use lvldrive::metrics;
use lvldrive::qa;
use lvldrive::scene;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Rotated rectangle in the BEV plane (meters, yaw in radians).
#[pyclass(name = "BevBox", from_py_object)]
#[derive(Clone)]
struct PyBevBox {
    inner: geom::BevBox,
}

#[pymethods]
impl PyBevBox {
    #[new]
    fn new(x: f64, y: f64, length: f64, width: f64, yaw: f64) -> Self {
        PyBevBox { inner: geom::BevBox { x, y, length, width, yaw } }
    }

    #[getter]
    fn x(&self) -> f64 {
        self.inner.x
    }

    #[getter]
    fn y(&self) -> f64 {
        self.inner.y
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn width(&self) -> f64 {
        self.inner.width
    }

    #[getter]
    fn yaw(&self) -> f64 {
        self.inner.yaw
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        self.inner.contains([p.0, p.1])
    }

    fn iou(&self, other: &PyBevBox) -> PyResult<f64> {
        geom::bev_iou(&self.inner, &other.inner).map_err(value_err)
    }

    fn corners(&self) -> Vec<(f64, f64)> {
        self.inner.corners().iter().map(|c| (c[0], c[1])).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "BevBox(x={}, y={}, length={}, width={}, yaw={})",
            self.inner.x, self.inner.y, self.inner.length, self.inner.width, self.inner.yaw
        )
    }
}

#[pyfunction]
fn bev_iou(a: &PyBevBox, b: &PyBevBox) -> PyResult<f64> {
    geom::bev_iou(&a.inner, &b.inner).map_err(value_err)
}

/// Quadrant name for an ego-frame point: "Front-Left", "Front-Right",
/// "Back-Left", or "Back-Right".
#[pyfunction]
fn sector_of(p: (f64, f64)) -> &'static str {
    geom::sector_of([p.0, p.1]).as_str()
}

/// True when the point lies within `margin` meters of any lane centerline.
#[pyfunction]
fn drivable_contains(lanes: Vec<Vec<(f64, f64)>>, p: (f64, f64), margin: f64) -> PyResult<bool> {
    let lanes: Vec<geom::Polyline2D> = lanes
        .into_iter()
        .map(|pts| {
            geom::Polyline2D::new(
                pts.into_iter().map(|(x, y)| [x, y]).collect(),
                geom::FrameTag::Ego,
            )
            .map_err(value_err)
        })
        .collect::<PyResult<_>>()?;
    Ok(geom::drivable_contains(&lanes, [p.0, p.1], margin))
}

#[pyfunction]
fn round_tenth(v: f64) -> f64 {
    codec::round_tenth(v)
}

/// Parses an object-description answer into a dict of its fields.
#[pyfunction]
fn parse_object_answer(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let p = codec::parse_object_answer(text).map_err(value_err)?;
    let json = serde_json::to_string(&p).map_err(value_err)?;
    let loads = py.import("json")?.getattr("loads")?;
    Ok(loads.call1((json,))?.unbind())
}

/// Formats the canonical object-description answer.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn format_object_answer(
    category: &str,
    camera: &str,
    x: f64,
    y: f64,
    length: f64,
    width: f64,
    height: f64,
    yaw: f64,
) -> String {
    let b = geom::Box3D {
        center: [x, y, 0.0],
        length,
        width,
        height,
        yaw,
        velocity: [0.0, 0.0],
        category: category.to_string(),
        track_id: 0,
    };
    codec::format_object_answer(&b, category, camera)
}

#[pyfunction]
fn format_waypoints(w: Vec<(f64, f64)>) -> PyResult<String> {
    if w.len() != 6 {
        return Err(PyValueError::new_err(format!("expected 6 waypoints, got {}", w.len())));
    }
    let mut arr = [[0.0; 2]; 6];
    for (i, (x, y)) in w.iter().enumerate() {
        arr[i] = [*x, *y];
    }
    Ok(codec::format_waypoints(&codec::WaypointList(arr)))
}

#[pyfunction]
fn parse_waypoints(text: &str) -> PyResult<Vec<(f64, f64)>> {
    let w = codec::parse_waypoints(text).map_err(value_err)?;
    Ok(w.0.iter().map(|p| (p[0], p[1])).collect())
}

/// Generates a scene and returns it as schema "lvl-scene/1" JSON.
#[pyfunction]
#[pyo3(signature = (seed, n_frames=8, n_agents=12, n_lanes=3))]
fn generate_scene_json(
    seed: u64,
    n_frames: usize,
    n_agents: usize,
    n_lanes: usize,
) -> PyResult<String> {
    let spec = scene::SceneSpec {
        seed,
        n_frames,
        n_agents,
        n_lanes,
        map_extent: 100.0,
        rig: scene::RigPreset::SurroundSix,
        timestep: 0.5,
    };
    let s = scene::generate_scene(&spec).map_err(value_err)?;
    let mut doc = serde_json::to_value(&s).map_err(value_err)?;
    doc.as_object_mut()
        .expect("scene serializes to an object")
        .insert("schema_version".into(), "lvl-scene/1".into());
    let mut text = serde_json::to_string(&doc).map_err(value_err)?;
    text.push('\n');
    Ok(text)
}

/// Generates QA records from scene JSON and returns "lvl-qa/1" JSONL.
#[pyfunction]
#[pyo3(signature = (scene_json, seed, per_task=2))]
fn generate_qa_jsonl(scene_json: &str, seed: u64, per_task: usize) -> PyResult<String> {
    let mut doc: serde_json::Value = serde_json::from_str(scene_json).map_err(value_err)?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| PyValueError::new_err("scene JSON must be an object"))?;
    match obj.remove("schema_version") {
        Some(v) if v == "lvl-scene/1" => {}
        other => {
            return Err(PyValueError::new_err(format!(
                "expected schema_version \"lvl-scene/1\", got {other:?}"
            )))
        }
    }
    let s: scene::Scene = serde_json::from_value(doc).map_err(value_err)?;
    let cfg = qa::GenConfig::with_seed(seed, qa::TaskCounts::uniform(per_task));
    let records = qa::generate_all(&s, &cfg).map_err(value_err)?;
    let mut bytes = Vec::new();
    qa::write_jsonl(&mut bytes, &records).map_err(value_err)?;
    String::from_utf8(bytes).map_err(value_err)
}

#[pyfunction]
fn bleu4(candidates: Vec<String>, references: Vec<Vec<String>>) -> f64 {
    metrics::bleu4(&candidates, &references)
}

#[pyfunction]
fn rouge_l(candidates: Vec<String>, references: Vec<Vec<String>>) -> f64 {
    metrics::rouge_l(&candidates, &references)
}

#[pyfunction]
fn cider(candidates: Vec<String>, references: Vec<Vec<String>>) -> f64 {
    metrics::cider(&candidates, &references)
}

/// Grounding mIoU over (predicted_text, gt_box, gt_distance) samples.
#[pyfunction]
fn grounding_miou(samples: Vec<(String, PyBevBox, f64)>) -> f64 {
    let samples: Vec<metrics::GroundingSample> = samples
        .into_iter()
        .map(|(text, gt, d)| metrics::GroundingSample {
            predicted_text: text,
            gt: gt.inner,
            gt_distance: d,
        })
        .collect();
    metrics::grounding_miou(&samples).miou
}

/// Max relative error of the analytic gradients on the reference fusion
/// configuration versus central finite differences.
#[pyfunction]
fn fusion_grad_check() -> PyResult<f64> {
    fusion::reference_grad_check().map_err(value_err)
}

/// Runs the toy gate-dynamics fit and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (task, steps=500, seed=0))]
fn fusion_toy_train(py: Python<'_>, task: &str, steps: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let task: fusion::ToyTask = task.parse().map_err(value_err)?;
    let cfg = fusion::TrainConfig { steps, seed, ..Default::default() };
    let report = fusion::toy_fit(task, &cfg).map_err(value_err)?;
    let json = serde_json::to_string(&report).map_err(value_err)?;
    let loads = py.import("json")?.getattr("loads")?;
    Ok(loads.call1((json,))?.unbind())
}

#[pymodule]
fn lvldrive_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBevBox>()?;
    m.add_function(wrap_pyfunction!(bev_iou, m)?)?;
    m.add_function(wrap_pyfunction!(sector_of, m)?)?;
    m.add_function(wrap_pyfunction!(drivable_contains, m)?)?;
    m.add_function(wrap_pyfunction!(round_tenth, m)?)?;
    m.add_function(wrap_pyfunction!(parse_object_answer, m)?)?;
    m.add_function(wrap_pyfunction!(format_object_answer, m)?)?;
    m.add_function(wrap_pyfunction!(format_waypoints, m)?)?;
    m.add_function(wrap_pyfunction!(parse_waypoints, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene_json, m)?)?;
    m.add_function(wrap_pyfunction!(generate_qa_jsonl, m)?)?;
    m.add_function(wrap_pyfunction!(bleu4, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(cider, m)?)?;
    m.add_function(wrap_pyfunction!(grounding_miou, m)?)?;
    m.add_function(wrap_pyfunction!(fusion_grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(fusion_toy_train, m)?)?;
    Ok(())
}
