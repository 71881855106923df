//! Python bindings. Errors surface as `ValueError("<CODE>: <message>")`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

use scm_core::document::{parse_frames, parse_metamodel, parse_model, serialize_document};
use scm_core::kernel::{EndpointRef, Endpoints};
use scm_core::{self as core, Context, ContextValue, Document, EventInterval, Scene};

fn err(code: &str, e: impl std::fmt::Display) -> PyErr {
    let text = e.to_string();
    if text.starts_with(code) {
        PyValueError::new_err(text)
    } else {
        PyValueError::new_err(format!("{code}: {text}"))
    }
}

type Report = Vec<(String, String, String)>;

fn report(violations: Vec<core::Violation>) -> Report {
    violations.into_iter().map(|v| (v.code.to_string(), v.location, v.message)).collect()
}

/// Rigid placement with uniform scale; `rotation` is `(w, x, y, z)`.
#[pyclass(module = "scm", frozen, from_py_object)]
#[derive(Clone)]
pub struct Pose(core::Pose);

#[pymethods]
impl Pose {
    #[new]
    #[pyo3(signature = (rotation = (1.0, 0.0, 0.0, 0.0), translation = (0.0, 0.0, 0.0), scale = 1.0))]
    fn new(rotation: (f64, f64, f64, f64), translation: (f64, f64, f64), scale: f64) -> PyResult<Self> {
        let q = core::Quaternion::new(rotation.0, rotation.1, rotation.2, rotation.3);
        let rotation = core::normalize_rotation(core::RotationInput::Quaternion(q)).map_err(|e| err(e.code(), &e))?;
        core::Pose::new(rotation, [translation.0, translation.1, translation.2], scale)
            .map(Pose)
            .map_err(|e| err(e.code(), &e))
    }

    #[getter]
    fn rotation(&self) -> (f64, f64, f64, f64) {
        let q = self.0.rotation;
        (q.w, q.x, q.y, q.z)
    }

    #[getter]
    fn translation(&self) -> (f64, f64, f64) {
        let t = self.0.translation;
        (t[0], t[1], t[2])
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale
    }

    /// `self ∘ other`: `other` is applied first.
    fn compose(&self, other: &Pose) -> Pose {
        Pose(core::compose(&self.0, &other.0))
    }

    fn inverse(&self) -> Pose {
        Pose(core::invert(&self.0))
    }

    fn apply(&self, point: (f64, f64, f64)) -> (f64, f64, f64) {
        let p = self.0.apply([point.0, point.1, point.2]);
        (p[0], p[1], p[2])
    }

    fn __repr__(&self) -> String {
        format!("Pose(rotation={:?}, translation={:?}, scale={})", self.rotation(), self.translation(), self.0.scale)
    }
}

/// Named coordinate frames rooted at `world`.
#[pyclass(module = "scm", from_py_object)]
#[derive(Clone, Default)]
pub struct FrameTree(core::FrameTree);

#[pymethods]
impl FrameTree {
    #[new]
    fn new() -> Self {
        FrameTree::default()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_frames(text).map(FrameTree).map_err(|e| err(e.code(), &e))
    }

    fn to_json(&self) -> String {
        serialize_document(&Document::Frames(self.0.clone()))
    }

    fn register_frame(&mut self, id: &str, parent: &str, pose: &Pose) -> PyResult<()> {
        self.0 = self.0.register_frame(id, parent, pose.0).map_err(|e| err(e.code(), &e))?;
        Ok(())
    }

    fn world_pose(&self, frame: &str) -> PyResult<Pose> {
        self.0.world_pose(frame).map(Pose).map_err(|e| err(e.code(), &e))
    }

    /// Express `point` given in `frame` in `target` coordinates.
    #[pyo3(signature = (frame, point, target = "world"))]
    fn resolve(&self, frame: &str, point: (f64, f64, f64), target: &str) -> PyResult<(f64, f64, f64)> {
        let at = core::CoordinateValue::new(frame, [point.0, point.1, point.2]);
        let p = self.0.resolve_position(&at, target).map_err(|e| err(e.code(), &e))?;
        Ok((p[0], p[1], p[2]))
    }
}

#[pyclass(module = "scm", from_py_object)]
#[derive(Clone)]
pub struct Metamodel(core::Metamodel);

#[pymethods]
impl Metamodel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_metamodel(text).map(Metamodel).map_err(|e| err(e.code(), &e))
    }

    fn to_json(&self) -> String {
        serialize_document(&Document::Metamodel(self.0.clone()))
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id.clone()
    }

    /// Violations as `(code, location, message)` tuples.
    fn validate(&self) -> Report {
        report(core::validate_metamodel(&self.0))
    }

    fn object_types(&self) -> Vec<(String, String)> {
        self.0.object_types().map(|(_, t)| (t.id.clone(), t.kind.as_str().to_string())).collect()
    }

    fn subtype_of(&self, a: &str, b: &str) -> PyResult<bool> {
        self.0.subtype_of(a, b).map_err(|e| err(e.code(), &e))
    }
}

#[pyclass(module = "scm", from_py_object)]
#[derive(Clone)]
pub struct Model(core::ModelInstance);

fn endpoint(spec: &str) -> EndpointRef {
    if spec == "model" {
        EndpointRef::Model
    } else {
        EndpointRef::object(spec)
    }
}

#[pymethods]
impl Model {
    #[new]
    fn new(id: &str, model_type: &str) -> Self {
        Model(core::ModelInstance::new(id, model_type))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_model(text).map(Model).map_err(|e| err(e.code(), &e))
    }

    fn to_json(&self) -> String {
        serialize_document(&Document::Model(self.0.clone()))
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id.clone()
    }

    /// `(uuid, object type)` pairs in uuid order.
    fn objects(&self) -> Vec<(String, String)> {
        self.0.objects().iter().map(|o| (o.uuid.clone(), o.object_type.clone())).collect()
    }

    fn validate(&self, mm: &Metamodel) -> PyResult<Report> {
        core::validate_model(&self.0, &mm.0).map(report).map_err(|e| err(e.code(), &e))
    }

    /// Relation objects take `source` and `target` uuids.
    #[pyo3(signature = (mm, object_type, source = None, target = None))]
    fn create_object(&mut self, mm: &Metamodel, object_type: &str, source: Option<&str>, target: Option<&str>) -> PyResult<String> {
        let endpoints = match (source, target) {
            (Some(s), Some(t)) => Some(Endpoints::new(endpoint(s), endpoint(t))),
            (None, None) => None,
            _ => return Err(PyTypeError::new_err("give both source and target or neither")),
        };
        self.0.create_object(&mm.0, object_type, endpoints).map_err(|e| err(e.code(), &e))
    }

    /// `values` uses the document encoding, e.g. `'[{"text": "Mix"}]'`.
    fn set_value(&mut self, mm: &Metamodel, uuid: &str, attribute: &str, values: &str) -> PyResult<()> {
        let values: Vec<core::Value> = serde_json::from_str(values).map_err(|e| err("PARSE_ERROR", e))?;
        self.0.set_value(&mm.0, uuid, attribute, values).map_err(|e| err(e.code(), &e))
    }

    fn delete_object(&mut self, uuid: &str) -> PyResult<()> {
        self.0.delete_object(uuid).map(|_| ()).map_err(|e| err(e.code(), &e))
    }

    /// Anchor `source` (an element uuid or `"model"`) to the real object `target`.
    #[pyo3(signature = (mm, source, target, offset = None, condition = None))]
    fn create_anchor(
        &mut self,
        mm: &Metamodel,
        source: &str,
        target: &str,
        offset: Option<Pose>,
        condition: Option<&str>,
    ) -> PyResult<String> {
        let offset = offset.map(|p| p.0).unwrap_or(core::Pose::IDENTITY);
        core::create_anchor(&mut self.0, &mm.0, endpoint(source), endpoint(target), offset, condition)
            .map_err(|e| err(e.code(), &e))
    }

    fn anchoring_level(&self, mm: &Metamodel) -> PyResult<u8> {
        core::classify_anchoring_level(&self.0, &mm.0).map(|l| l as u8).map_err(|e| err(e.code(), &e))
    }

    fn temporal_report(&self, mm: &Metamodel) -> PyResult<Vec<(String, String, String)>> {
        let report = core::check_temporal_consistency(&self.0, &mm.0).map_err(|e| err(e.code(), &e))?;
        Ok(report.into_iter().map(|v| (v.code.to_string(), v.location, v.message)).collect())
    }
}

fn context(dict: &Bound<'_, PyDict>) -> PyResult<Context> {
    let mut ctx = BTreeMap::new();
    for (k, v) in dict.iter() {
        let key: String = k.extract()?;
        let value = if v.is_instance_of::<PyBool>() {
            ContextValue::Bool(v.extract()?)
        } else if let Ok(s) = v.extract::<String>() {
            ContextValue::Text(s)
        } else {
            ContextValue::Number(v.extract::<f64>()?)
        };
        ctx.insert(key, value);
    }
    Ok(ctx)
}

#[pyfunction]
fn is_at(model: &Model, frames: &FrameTree, a: &str, b: &str, tolerance: f64) -> PyResult<bool> {
    core::is_at(&model.0, &frames.0, a, b, tolerance).map_err(|e| err(e.code(), &e))
}

#[pyfunction]
fn is_in(model: &Model, frames: &FrameTree, a: &str, b: &str) -> PyResult<bool> {
    core::is_in(&model.0, &frames.0, a, b).map_err(|e| err(e.code(), &e))
}

#[pyfunction]
fn distance(model: &Model, frames: &FrameTree, a: &str, b: &str) -> PyResult<f64> {
    core::object_distance(&model.0, &frames.0, a, b).map_err(|e| err(e.code(), &e))
}

#[pyfunction]
fn within_radius(model: &Model, frames: &FrameTree, frame: &str, center: (f64, f64, f64), radius: f64) -> PyResult<Vec<String>> {
    let at = core::CoordinateValue::new(frame, [center.0, center.1, center.2]);
    core::within_radius(&model.0, &frames.0, &at, radius).map_err(|e| err(e.code(), &e))
}

/// `(path, length)`, or `None` when the nodes are not connected.
#[pyfunction]
#[pyo3(signature = (model, mm, frames, source, target, weight = "euclidean"))]
fn shortest_path(
    model: &Model,
    mm: &Metamodel,
    frames: &FrameTree,
    source: &str,
    target: &str,
    weight: &str,
) -> PyResult<Option<(Vec<String>, f64)>> {
    core::shortest_path(&model.0, &mm.0, &frames.0, source, target, &core::EdgeWeight::parse(weight))
        .map(|p| p.map(|p| (p.path, p.length)))
        .map_err(|e| err(e.code(), &e))
}

/// Scene document text for the given context.
#[pyfunction]
fn resolve_scene(model: &Model, mm: &Metamodel, frames: &FrameTree, context: &Bound<'_, PyDict>) -> PyResult<String> {
    let ctx = self::context(context)?;
    let placements = core::resolve_scene(&model.0, &mm.0, &frames.0, &ctx).map_err(|e| err(e.code(), &e))?;
    Ok(serialize_document(&Document::Scene(Scene { model: model.0.id.clone(), placements })))
}

#[pyfunction]
fn evaluate_condition(expression: &str, context: &Bound<'_, PyDict>) -> PyResult<bool> {
    let ctx = self::context(context)?;
    core::evaluate_condition(expression, &ctx).map_err(|e| err(e.code(), &e))
}

/// Interval relation name of `(start, duration)` pairs, e.g. `"meets"`.
#[pyfunction]
fn infer_relation(a: (i64, i64), b: (i64, i64)) -> PyResult<String> {
    let ea = EventInterval::new("a", Some(a.0), Some(a.1));
    let eb = EventInterval::new("b", Some(b.0), Some(b.1));
    core::infer_relation(&ea, &eb).map(|r| r.as_str().to_string()).map_err(|e| err(e.code(), &e))
}

#[pymodule]
fn scm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pose>()?;
    m.add_class::<FrameTree>()?;
    m.add_class::<Metamodel>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(is_at, m)?)?;
    m.add_function(wrap_pyfunction!(is_in, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(within_radius, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_path, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_scene, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_condition, m)?)?;
    m.add_function(wrap_pyfunction!(infer_relation, m)?)?;
    m.add("FORMAT_VERSION", scm_core::document::FORMAT_VERSION)?;
    Ok(())
}
