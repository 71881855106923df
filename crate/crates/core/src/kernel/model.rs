use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::builtins;
use super::metamodel::{DataKind, Metamodel, RangeSpec};
use super::KernelError;
use crate::field::FieldSpec;
use crate::geometry::{CoordinateValue, Pose, Quaternion};
use crate::query::ExtentBox;

/// An attribute value. Enumeration members are stored as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Text(String),
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Timestamp(i64),
    Duration(i64),
    Coordinate(CoordinateValue),
    Rotation(Quaternion),
    Extent(ExtentBox),
    Field(FieldSpec),
    Pose(Pose),
    /// Reference to another object by uuid.
    Object(String),
    /// Reference to a model instance by id.
    Model(String),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Text(_) => "text",
            Value::Integer(_) => "integer",
            Value::Real(_) => "real",
            Value::Boolean(_) => "boolean",
            Value::Timestamp(_) => "timestamp",
            Value::Duration(_) => "duration",
            Value::Coordinate(_) => "coordinate",
            Value::Rotation(_) => "rotation",
            Value::Extent(_) => "extent",
            Value::Field(_) => "field",
            Value::Pose(_) => "pose",
            Value::Object(_) => "object reference",
            Value::Model(_) => "model reference",
        }
    }

    /// Checks that need nothing but the value and its data type.
    pub(crate) fn check_data(&self, kind: &DataKind) -> Result<(), String> {
        let ok = match (kind, self) {
            (DataKind::Text, Value::Text(_))
            | (DataKind::Integer, Value::Integer(_))
            | (DataKind::Boolean, Value::Boolean(_))
            | (DataKind::Timestamp, Value::Timestamp(_)) => true,
            (DataKind::Real, Value::Real(r)) => r.is_finite(),
            (DataKind::Duration, Value::Duration(d)) => {
                if *d < 0 {
                    return Err(format!("negative duration {d}"));
                }
                true
            }
            (DataKind::Enumeration(members), Value::Text(t)) => {
                if !members.contains(t) {
                    return Err(format!("`{t}` is not one of {members:?}"));
                }
                true
            }
            (DataKind::Coordinate, Value::Coordinate(c)) => c.position.iter().all(|v| v.is_finite()),
            (DataKind::Rotation, Value::Rotation(q)) => {
                if !q.is_unit() {
                    return Err(format!("rotation norm {} is not 1", q.norm()));
                }
                true
            }
            (DataKind::Extent, Value::Extent(e)) => {
                e.check()?;
                true
            }
            (DataKind::Pose, Value::Pose(p)) => {
                p.check().map_err(|e| e.to_string())?;
                true
            }
            (DataKind::FieldSpec, Value::Field(f)) => {
                f.check().map_err(|e| e.to_string())?;
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{} value does not fit data type {kind:?}", self.kind_name()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiTarget {
    pub frame: String,
    pub pose: Pose,
}

/// One end of a relational object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRef {
    Object(String),
    /// The model instance as a whole.
    Model,
    Poi(PoiTarget),
}

impl EndpointRef {
    pub fn object(uuid: &str) -> Self {
        EndpointRef::Object(uuid.into())
    }

    pub fn as_object(&self) -> Option<&str> {
        match self {
            EndpointRef::Object(u) => Some(u),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub source: EndpointRef,
    pub target: EndpointRef,
}

impl Endpoints {
    pub fn new(source: EndpointRef, target: EndpointRef) -> Self {
        Endpoints { source, target }
    }

    pub fn objects(source: &str, target: &str) -> Self {
        Endpoints::new(EndpointRef::object(source), EndpointRef::object(target))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub uuid: String,
    pub object_type: String,
    #[serde(default)]
    pub values: BTreeMap<String, Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<Endpoints>,
}

impl ObjectInstance {
    pub fn first(&self, attr: &str) -> Option<&Value> {
        self.values.get(attr).and_then(|v| v.first())
    }

    pub fn coordinate(&self) -> Option<&CoordinateValue> {
        match self.first(builtins::COORD) {
            Some(Value::Coordinate(c)) => Some(c),
            _ => None,
        }
    }

    pub fn rotation(&self) -> Quaternion {
        match self.first(builtins::ROTATION) {
            Some(Value::Rotation(q)) => *q,
            _ => Quaternion::IDENTITY,
        }
    }

    pub fn scale(&self) -> f64 {
        match self.first(builtins::SCALE) {
            Some(Value::Real(s)) => *s,
            _ => 1.0,
        }
    }

    pub fn extent(&self) -> Option<&ExtentBox> {
        match self.first(builtins::EXTENT) {
            Some(Value::Extent(e)) => Some(e),
            _ => None,
        }
    }

    pub fn text(&self, attr: &str) -> Option<&str> {
        match self.first(attr) {
            Some(Value::Text(t)) => Some(t),
            _ => None,
        }
    }

    pub fn timestamp(&self, attr: &str) -> Option<i64> {
        match self.first(attr) {
            Some(Value::Timestamp(t)) | Some(Value::Duration(t)) => Some(*t),
            _ => None,
        }
    }

    /// Pose of the object within its local frame, built from its coordinate
    /// and transform attributes, together with that frame's id.
    pub fn local_pose(&self) -> Option<(&str, Pose)> {
        let c = self.coordinate()?;
        let pose = Pose { rotation: self.rotation(), translation: c.position, scale: self.scale() };
        Some((c.frame.as_str(), pose))
    }

    /// Whether the object carries any coordinate, transform or extent value.
    pub fn is_spatialized(&self) -> bool {
        [builtins::COORD, builtins::ROTATION, builtins::SCALE, builtins::EXTENT]
            .iter()
            .any(|a| self.values.get(*a).is_some_and(|v| !v.is_empty()))
    }
}

/// A model instance: typed objects kept sorted by uuid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInstance {
    pub id: String,
    pub model_type: String,
    /// Other model instances that `model` reference values may name, with their model types.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub linked_models: BTreeMap<String, String>,
    #[serde(default)]
    objects: Vec<ObjectInstance>,
}

impl ModelInstance {
    pub fn new(id: &str, model_type: &str) -> Self {
        ModelInstance {
            id: id.into(),
            model_type: model_type.into(),
            linked_models: BTreeMap::new(),
            objects: Vec::new(),
        }
    }

    /// Objects in uuid order. Duplicate uuids are kept so validation can report them.
    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn canonicalize(&mut self) {
        self.objects.sort_by(|a, b| a.uuid.cmp(&b.uuid));
    }

    fn position(&self, uuid: &str) -> Option<usize> {
        let i = self.objects.partition_point(|o| o.uuid.as_str() < uuid);
        (i < self.objects.len() && self.objects[i].uuid == uuid).then_some(i)
    }

    pub fn get(&self, uuid: &str) -> Option<&ObjectInstance> {
        self.position(uuid).map(|i| &self.objects[i])
    }

    pub fn require(&self, uuid: &str) -> Result<&ObjectInstance, KernelError> {
        self.get(uuid).ok_or_else(|| KernelError::UnknownObject(uuid.into()))
    }

    /// Insert an object as-is, keeping uuid order. No checks are made.
    pub fn insert_raw(&mut self, object: ObjectInstance) {
        let i = self.objects.partition_point(|o| o.uuid <= object.uuid);
        self.objects.insert(i, object);
    }

    /// Create an object of type `t` with a fresh v4 uuid. Relational object
    /// types need `endpoints`; other types must not have them.
    pub fn create_object(
        &mut self,
        mm: &Metamodel,
        t: &str,
        endpoints: Option<Endpoints>,
    ) -> Result<String, KernelError> {
        let ot = mm.object_type(t).ok_or_else(|| KernelError::UnknownType(t.into()))?;
        if !mm.type_in_model_type(t, &self.model_type)? {
            return Err(KernelError::UnknownType(format!(
                "{t} (not part of model type {})",
                self.model_type
            )));
        }
        match (ot.kind.is_relational(), &endpoints) {
            (true, None) => {
                return Err(KernelError::KindMismatch(format!(
                    "{t} is a {} type and needs endpoints",
                    ot.kind.as_str()
                )))
            }
            (false, Some(_)) => {
                return Err(KernelError::KindMismatch(format!(
                    "{t} is a {} type and takes no endpoints",
                    ot.kind.as_str()
                )))
            }
            _ => {}
        }
        let mut uuid = Uuid::new_v4().to_string();
        while self.get(&uuid).is_some() {
            uuid = Uuid::new_v4().to_string();
        }
        let values = BTreeMap::from([(builtins::UUID.to_string(), vec![Value::Text(uuid.clone())])]);
        self.insert_raw(ObjectInstance { uuid: uuid.clone(), object_type: t.into(), values, endpoints });
        Ok(uuid)
    }

    /// Replace the values of `attr`. Cardinality is checked by `validate_model`.
    pub fn set_value(
        &mut self,
        mm: &Metamodel,
        uuid: &str,
        attr: &str,
        values: Vec<Value>,
    ) -> Result<(), KernelError> {
        let obj = self.require(uuid)?;
        let unknown = || KernelError::UnknownAttribute {
            object_type: obj.object_type.clone(),
            attribute: attr.into(),
        };
        if attr == builtins::UUID || !mm.effective_attributes(&obj.object_type)?.contains(attr) {
            return Err(unknown());
        }
        let range = mm.range_map.get(attr).ok_or_else(unknown)?;
        for value in &values {
            self.check_value_against_range(mm, range, value, false)
                .map_err(KernelError::RangeTypeMismatch)?;
        }
        let i = self.position(uuid).expect("object exists");
        self.objects[i].values.insert(attr.into(), values);
        Ok(())
    }

    /// Type-check one value. With `strict`, references must resolve.
    pub(crate) fn check_value_against_range(
        &self,
        mm: &Metamodel,
        range: &RangeSpec,
        value: &Value,
        strict: bool,
    ) -> Result<(), String> {
        match range {
            RangeSpec::DataType(id) => {
                let dt = mm.data_type(id).ok_or_else(|| format!("unknown data type `{id}`"))?;
                value.check_data(&dt.kind)
            }
            RangeSpec::ObjectType(t) => {
                let Value::Object(target) = value else {
                    return Err(format!("{} value where a {t} reference is expected", value.kind_name()));
                };
                match self.get(target) {
                    Some(obj) => match mm.subtype_of(&obj.object_type, t) {
                        Ok(true) => Ok(()),
                        _ => Err(format!("object {target} is a {}, not a {t}", obj.object_type)),
                    },
                    None if strict => Err(format!("dangling reference {target}")),
                    None => Ok(()),
                }
            }
            RangeSpec::ModelType(m) => {
                let Value::Model(id) = value else {
                    return Err(format!("{} value where a {m} model reference is expected", value.kind_name()));
                };
                let model_type = if *id == self.id {
                    Some(&self.model_type)
                } else {
                    self.linked_models.get(id)
                };
                match model_type {
                    Some(mt) if mt == m => Ok(()),
                    Some(mt) => Err(format!("model {id} is a {mt}, not a {m}")),
                    None if strict => Err(format!("dangling model reference {id}")),
                    None => Ok(()),
                }
            }
        }
    }

    /// Remove an object. References to it are left in place.
    pub fn delete_object(&mut self, uuid: &str) -> Result<ObjectInstance, KernelError> {
        let i = self.position(uuid).ok_or_else(|| KernelError::UnknownObject(uuid.into()))?;
        Ok(self.objects.remove(i))
    }

    /// Objects in uuid order, optionally restricted to a type (and its subtypes).
    pub fn iterate_objects<'a>(
        &'a self,
        mm: &Metamodel,
        filter: Option<&str>,
        include_subtypes: bool,
    ) -> Result<Vec<&'a ObjectInstance>, KernelError> {
        let Some(t) = filter else {
            return Ok(self.objects.iter().collect());
        };
        if mm.object_type(t).is_none() {
            return Err(KernelError::UnknownType(t.into()));
        }
        Ok(self
            .objects
            .iter()
            .filter(|o| {
                if include_subtypes {
                    mm.subtype_of(&o.object_type, t).unwrap_or(false)
                } else {
                    o.object_type == t
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Card, ObjectKind, ObjectType};

    fn mm() -> Metamodel {
        let mut mm = Metamodel::new("mm");
        mm.add_model_type("m");
        mm.add_object_type("m", ObjectType::new("Element", ObjectKind::Virtual)).unwrap();
        mm.add_object_type("m", ObjectType::new("Step", ObjectKind::Virtual)).unwrap();
        mm.add_object_type("m", ObjectType::new("Switch", ObjectKind::Real)).unwrap();
        mm.add_object_type("m", ObjectType::new("Anchor", ObjectKind::Anchor)).unwrap();
        mm.add_inheritance("Step", "Element");
        mm.add_attribute("m", "capacity", &["Step"], RangeSpec::data("integer"), Card::OPTIONAL)
            .unwrap();
        mm.attach_builtins();
        mm
    }

    #[test]
    fn create_assigns_distinct_uuids() {
        let mm = mm();
        let mut m = ModelInstance::new("m1", "m");
        let a = m.create_object(&mm, "Step", None).unwrap();
        let b = m.create_object(&mm, "Step", None).unwrap();
        assert_ne!(a, b);
        assert_eq!(Uuid::parse_str(&a).unwrap().get_version_num(), 4);
        assert_eq!(m.get(&a).unwrap().values[builtins::UUID], vec![Value::Text(a.clone())]);
    }

    #[test]
    fn create_errors() {
        let mm = mm();
        let mut m = ModelInstance::new("m1", "m");
        assert_eq!(m.create_object(&mm, "Nope", None).unwrap_err().code(), "UNKNOWN_TYPE");
        assert_eq!(m.create_object(&mm, "Anchor", None).unwrap_err().code(), "KIND_MISMATCH");
        let s = m.create_object(&mm, "Step", None).unwrap();
        let endpoints = Endpoints::objects(&s, &s);
        assert_eq!(
            m.create_object(&mm, "Step", Some(endpoints)).unwrap_err().code(),
            "KIND_MISMATCH"
        );
    }

    #[test]
    fn set_value_checks() {
        let mm = mm();
        let mut m = ModelInstance::new("m1", "m");
        let s = m.create_object(&mm, "Step", None).unwrap();
        let coord = Value::Coordinate(CoordinateValue::world([1.0, 2.0, 3.0]));
        m.set_value(&mm, &s, builtins::COORD, vec![coord.clone()]).unwrap();
        assert_eq!(m.get(&s).unwrap().values[builtins::COORD], vec![coord]);
        let err = m.set_value(&mm, &s, "capacity", vec![Value::Text("x".into())]).unwrap_err();
        assert_eq!(err.code(), "RANGE_TYPE_MISMATCH");
        let err = m.set_value(&mm, &s, builtins::UUID, vec![Value::Text("x".into())]).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_ATTRIBUTE");
        let err = m.set_value(&mm, &s, builtins::START, vec![Value::Timestamp(0)]).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_ATTRIBUTE");
        let err = m.set_value(&mm, "missing", builtins::COORD, vec![]).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_OBJECT");
        // card is deferred to validation
        m.set_value(&mm, &s, "capacity", vec![Value::Integer(1), Value::Integer(2)]).unwrap();
    }

    #[test]
    fn delete_and_iterate() {
        let mm = mm();
        let mut m = ModelInstance::new("m1", "m");
        assert!(m.iterate_objects(&mm, None, false).unwrap().is_empty());
        let step = m.create_object(&mm, "Step", None).unwrap();
        let elem = m.create_object(&mm, "Element", None).unwrap();
        let sw = m.create_object(&mm, "Switch", None).unwrap();

        let all: Vec<&str> = m.iterate_objects(&mm, None, false).unwrap().iter().map(|o| o.uuid.as_str()).collect();
        let mut sorted = vec![step.as_str(), elem.as_str(), sw.as_str()];
        sorted.sort();
        assert_eq!(all, sorted);

        assert_eq!(m.iterate_objects(&mm, Some("Element"), false).unwrap().len(), 1);
        assert_eq!(m.iterate_objects(&mm, Some("Element"), true).unwrap().len(), 2);
        assert_eq!(m.iterate_objects(&mm, Some("Nope"), true).unwrap_err().code(), "UNKNOWN_TYPE");

        m.delete_object(&sw).unwrap();
        assert!(m.get(&sw).is_none());
        assert_eq!(m.delete_object(&sw).unwrap_err().code(), "UNKNOWN_OBJECT");
    }
}
