use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::builtins;
use super::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Virtual,
    Real,
    /// Relates a virtual source to a real target (or a point of interest).
    Anchor,
    Field,
    Event,
    TemporalRelation,
    Participation,
    Node,
    Edge,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 9] = [
        ObjectKind::Virtual,
        ObjectKind::Real,
        ObjectKind::Anchor,
        ObjectKind::Field,
        ObjectKind::Event,
        ObjectKind::TemporalRelation,
        ObjectKind::Participation,
        ObjectKind::Node,
        ObjectKind::Edge,
    ];

    /// Kinds whose instances carry a source and a target endpoint.
    pub fn is_relational(self) -> bool {
        matches!(
            self,
            ObjectKind::Anchor
                | ObjectKind::Edge
                | ObjectKind::TemporalRelation
                | ObjectKind::Participation
        )
    }

    pub fn is_real(self) -> bool {
        self == ObjectKind::Real
    }

    /// Everything that is neither real nor a real/virtual relation.
    pub fn is_virtual(self) -> bool {
        !matches!(self, ObjectKind::Real | ObjectKind::Anchor)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Virtual => "virtual",
            ObjectKind::Real => "real",
            ObjectKind::Anchor => "anchor",
            ObjectKind::Field => "field",
            ObjectKind::Event => "event",
            ObjectKind::TemporalRelation => "temporal_relation",
            ObjectKind::Participation => "participation",
            ObjectKind::Node => "node",
            ObjectKind::Edge => "edge",
        }
    }
}

/// What an endpoint of a relational object may point at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EndpointKind {
    Object(ObjectKind),
    /// The whole model instance.
    Model,
    /// A pose in a named frame.
    Poi,
}

impl fmt::Display for EndpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndpointKind::Object(k) => f.write_str(k.as_str()),
            EndpointKind::Model => f.write_str("model"),
            EndpointKind::Poi => f.write_str("poi"),
        }
    }
}

impl FromStr for EndpointKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(EndpointKind::Model),
            "poi" => Ok(EndpointKind::Poi),
            other => ObjectKind::ALL
                .iter()
                .find(|k| k.as_str() == other)
                .map(|k| EndpointKind::Object(*k))
                .ok_or_else(|| format!("unknown endpoint kind `{other}`")),
        }
    }
}

impl TryFrom<String> for EndpointKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<EndpointKind> for String {
    fn from(k: EndpointKind) -> Self {
        k.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointSpec {
    pub sources: BTreeSet<EndpointKind>,
    pub targets: BTreeSet<EndpointKind>,
}

impl EndpointSpec {
    pub fn new(
        sources: impl IntoIterator<Item = EndpointKind>,
        targets: impl IntoIterator<Item = EndpointKind>,
    ) -> Self {
        EndpointSpec { sources: sources.into_iter().collect(), targets: targets.into_iter().collect() }
    }

    /// Virtual elements or the whole model, anchored to real objects or points of interest.
    pub fn anchor() -> Self {
        EndpointSpec::new(
            [
                EndpointKind::Object(ObjectKind::Virtual),
                EndpointKind::Object(ObjectKind::Node),
                EndpointKind::Object(ObjectKind::Edge),
                EndpointKind::Model,
            ],
            [EndpointKind::Object(ObjectKind::Real), EndpointKind::Poi],
        )
    }

    pub fn between(source: ObjectKind, target: ObjectKind) -> Self {
        EndpointSpec::new([EndpointKind::Object(source)], [EndpointKind::Object(target)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectType {
    pub id: String,
    pub name: String,
    pub kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_spec: Option<EndpointSpec>,
}

impl ObjectType {
    /// Object type with the default endpoint spec for its kind.
    pub fn new(id: &str, kind: ObjectKind) -> Self {
        let endpoint_spec = match kind {
            ObjectKind::Anchor => Some(EndpointSpec::anchor()),
            ObjectKind::Edge => Some(EndpointSpec::between(ObjectKind::Node, ObjectKind::Node)),
            ObjectKind::TemporalRelation => {
                Some(EndpointSpec::between(ObjectKind::Event, ObjectKind::Event))
            }
            ObjectKind::Participation => Some(EndpointSpec::new(
                [EndpointKind::Object(ObjectKind::Event)],
                ObjectKind::ALL
                    .iter()
                    .filter(|k| **k != ObjectKind::Anchor)
                    .map(|k| EndpointKind::Object(*k)),
            )),
            _ => None,
        };
        ObjectType { id: id.into(), name: id.into(), kind, endpoint_spec }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Text,
    Integer,
    Real,
    Boolean,
    Enumeration(Vec<String>),
    /// Integer UTC seconds.
    Timestamp,
    /// Non-negative integer seconds.
    Duration,
    Coordinate,
    Rotation,
    Extent,
    FieldSpec,
    /// Rotation, translation and uniform scale.
    Pose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataType {
    pub id: String,
    pub kind: DataKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub builtin: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub builtin: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeSpec {
    DataType(String),
    ObjectType(String),
    /// Values reference model instances of this type by id.
    ModelType(String),
}

impl RangeSpec {
    pub fn data(id: &str) -> Self {
        RangeSpec::DataType(id.into())
    }
}

/// Cardinality bounds; an absent `max` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Card {
    pub min: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u64>,
}

impl Card {
    pub const OPTIONAL: Card = Card { min: 0, max: Some(1) };
    pub const REQUIRED: Card = Card { min: 1, max: Some(1) };
    pub const MANY: Card = Card { min: 0, max: None };

    pub fn new(min: u64, max: Option<u64>) -> Self {
        Card { min, max }
    }

    pub fn admits(&self, n: u64) -> bool {
        n >= self.min && self.max.is_none_or(|m| n <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelType {
    pub id: String,
    #[serde(default)]
    pub object_types: Vec<ObjectType>,
    #[serde(default)]
    pub data_types: Vec<DataType>,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
}

impl ModelType {
    pub fn new(id: &str) -> Self {
        ModelType { id: id.into(), object_types: vec![], data_types: vec![], attributes: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metamodel {
    pub id: String,
    #[serde(default)]
    pub model_types: Vec<ModelType>,
    /// `(subtype, supertype)` pairs.
    #[serde(default)]
    pub inheritance: BTreeSet<(String, String)>,
    #[serde(default, rename = "domain")]
    pub domain_map: BTreeMap<String, BTreeSet<String>>,
    #[serde(default, rename = "range")]
    pub range_map: BTreeMap<String, RangeSpec>,
    #[serde(default, rename = "card")]
    pub card_map: BTreeMap<String, Card>,
}

fn insert_sorted<T>(items: &mut Vec<T>, item: T, key: impl Fn(&T) -> &str) {
    let pos = items.partition_point(|x| key(x) < key(&item));
    items.insert(pos, item);
}

impl Metamodel {
    pub fn new(id: &str) -> Self {
        Metamodel {
            id: id.into(),
            model_types: vec![],
            inheritance: BTreeSet::new(),
            domain_map: BTreeMap::new(),
            range_map: BTreeMap::new(),
            card_map: BTreeMap::new(),
        }
    }

    /// Sort every id-keyed list so that equal metamodels compare equal.
    pub fn canonicalize(&mut self) {
        self.model_types.sort_by(|a, b| a.id.cmp(&b.id));
        for mt in &mut self.model_types {
            mt.object_types.sort_by(|a, b| a.id.cmp(&b.id));
            mt.data_types.sort_by(|a, b| a.id.cmp(&b.id));
            mt.attributes.sort_by(|a, b| a.id.cmp(&b.id));
        }
    }

    fn model_type_mut(&mut self, id: &str) -> Result<&mut ModelType, KernelError> {
        self.model_types
            .iter_mut()
            .find(|m| m.id == id)
            .ok_or_else(|| KernelError::UnknownModelType(id.into()))
    }

    pub fn add_model_type(&mut self, id: &str) -> &mut Self {
        if self.model_type(id).is_none() {
            insert_sorted(&mut self.model_types, ModelType::new(id), |m| &m.id);
        }
        self
    }

    pub fn add_object_type(
        &mut self,
        model_type: &str,
        object_type: ObjectType,
    ) -> Result<&mut Self, KernelError> {
        let mt = self.model_type_mut(model_type)?;
        insert_sorted(&mut mt.object_types, object_type, |o| &o.id);
        Ok(self)
    }

    pub fn add_data_type(
        &mut self,
        model_type: &str,
        id: &str,
        kind: DataKind,
    ) -> Result<&mut Self, KernelError> {
        let mt = self.model_type_mut(model_type)?;
        insert_sorted(&mut mt.data_types, DataType { id: id.into(), kind, builtin: false }, |d| &d.id);
        Ok(self)
    }

    /// Declare an attribute with its domain, range and cardinality.
    pub fn add_attribute(
        &mut self,
        model_type: &str,
        id: &str,
        domain: &[&str],
        range: RangeSpec,
        card: Card,
    ) -> Result<&mut Self, KernelError> {
        let mt = self.model_type_mut(model_type)?;
        insert_sorted(
            &mut mt.attributes,
            Attribute { id: id.into(), name: id.into(), builtin: false },
            |a| &a.id,
        );
        self.domain_map
            .insert(id.into(), domain.iter().map(|s| s.to_string()).collect());
        self.range_map.insert(id.into(), range);
        self.card_map.insert(id.into(), card);
        Ok(self)
    }

    pub fn add_inheritance(&mut self, subtype: &str, supertype: &str) -> &mut Self {
        self.inheritance.insert((subtype.into(), supertype.into()));
        self
    }

    /// Declare the builtin data types and attributes in every model type and
    /// point their domains at the object types they belong to. Idempotent;
    /// call again after adding object types.
    pub fn attach_builtins(&mut self) -> &mut Self {
        let kinds: Vec<(String, ObjectKind)> =
            self.object_types().map(|(_, o)| (o.id.clone(), o.kind)).collect();
        for mt in &mut self.model_types {
            for (id, kind) in builtins::DATA_TYPES {
                if !mt.data_types.iter().any(|d| d.id == *id) {
                    insert_sorted(
                        &mut mt.data_types,
                        DataType { id: (*id).into(), kind: kind(), builtin: true },
                        |d| &d.id,
                    );
                }
            }
            for def in builtins::ATTRIBUTES {
                if !mt.attributes.iter().any(|a| a.id == def.id) {
                    insert_sorted(
                        &mut mt.attributes,
                        Attribute { id: def.id.into(), name: def.id.into(), builtin: true },
                        |a| &a.id,
                    );
                }
            }
        }
        for def in builtins::ATTRIBUTES {
            let domain = kinds
                .iter()
                .filter(|(_, k)| def.applies_to(*k))
                .map(|(id, _)| id.clone())
                .collect();
            self.domain_map.insert(def.id.into(), domain);
            self.range_map.insert(def.id.into(), RangeSpec::data(def.data_type));
            self.card_map.insert(def.id.into(), def.card);
        }
        self
    }

    pub fn model_type(&self, id: &str) -> Option<&ModelType> {
        self.model_types.iter().find(|m| m.id == id)
    }

    /// All object types with the id of the model type declaring them.
    pub fn object_types(&self) -> impl Iterator<Item = (&str, &ObjectType)> {
        self.model_types
            .iter()
            .flat_map(|m| m.object_types.iter().map(move |o| (m.id.as_str(), o)))
    }

    pub fn object_type(&self, id: &str) -> Option<&ObjectType> {
        self.object_types().find(|(_, o)| o.id == id).map(|(_, o)| o)
    }

    pub fn data_type(&self, id: &str) -> Option<&DataType> {
        self.model_types.iter().flat_map(|m| &m.data_types).find(|d| d.id == id)
    }

    pub fn attribute(&self, id: &str) -> Option<&Attribute> {
        self.model_types.iter().flat_map(|m| &m.attributes).find(|a| a.id == id)
    }

    fn require_type(&self, id: &str) -> Result<&ObjectType, KernelError> {
        self.object_type(id).ok_or_else(|| KernelError::UnknownType(id.into()))
    }

    /// `t` together with all of its (transitive) supertypes.
    pub fn supertypes(&self, t: &str) -> Result<BTreeSet<String>, KernelError> {
        self.require_type(t)?;
        let mut seen = BTreeSet::from([t.to_string()]);
        let mut queue = VecDeque::from([t.to_string()]);
        while let Some(cur) = queue.pop_front() {
            for (sub, sup) in &self.inheritance {
                if *sub == cur && seen.insert(sup.clone()) {
                    queue.push_back(sup.clone());
                }
            }
        }
        Ok(seen)
    }

    /// Reflexive-transitive closure of the inheritance ordering.
    pub fn subtype_of(&self, a: &str, b: &str) -> Result<bool, KernelError> {
        self.require_type(b)?;
        Ok(self.supertypes(a)?.contains(b))
    }

    /// Attributes available on instances of `t`, sorted by id.
    pub fn effective_attributes(&self, t: &str) -> Result<BTreeSet<String>, KernelError> {
        let supers = self.supertypes(t)?;
        let mut out: BTreeSet<String> = self
            .domain_map
            .iter()
            .filter(|(_, domain)| domain.iter().any(|d| supers.contains(d)))
            .map(|(attr, _)| attr.clone())
            .collect();
        out.extend(builtins::UNIVERSAL.iter().map(|s| s.to_string()));
        Ok(out)
    }

    /// Whether object type `t` may be instantiated in a model of `model_type`.
    pub fn type_in_model_type(&self, t: &str, model_type: &str) -> Result<bool, KernelError> {
        let mt = self
            .model_type(model_type)
            .ok_or_else(|| KernelError::UnknownModelType(model_type.into()))?;
        let supers = self.supertypes(t)?;
        Ok(mt.object_types.iter().any(|o| supers.contains(&o.id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Metamodel {
        let mut mm = Metamodel::new("mm");
        mm.add_model_type("m");
        for id in ["A", "B", "C", "D"] {
            mm.add_object_type("m", ObjectType::new(id, ObjectKind::Virtual)).unwrap();
        }
        mm.add_inheritance("A", "B").add_inheritance("B", "C");
        mm.add_attribute("m", "capacity", &["C"], RangeSpec::data("integer"), Card::OPTIONAL)
            .unwrap();
        mm.attach_builtins();
        mm
    }

    #[test]
    fn subtype_closure() {
        let mm = chain();
        assert!(mm.subtype_of("A", "A").unwrap());
        assert!(mm.subtype_of("A", "C").unwrap());
        assert!(!mm.subtype_of("C", "A").unwrap());
        assert!(!mm.subtype_of("A", "D").unwrap());
        assert_eq!(mm.subtype_of("A", "Z").unwrap_err().code(), "UNKNOWN_TYPE");
        assert_eq!(mm.subtype_of("Z", "A").unwrap_err().code(), "UNKNOWN_TYPE");
    }

    #[test]
    fn effective_attributes_of_plain_type_are_the_universal_builtins() {
        let mm = chain();
        let attrs = mm.effective_attributes("D").unwrap();
        let expected: BTreeSet<String> = builtins::UNIVERSAL.iter().map(|s| s.to_string()).collect();
        assert_eq!(attrs, expected);
    }

    #[test]
    fn inherited_attribute() {
        let mm = chain();
        assert!(mm.effective_attributes("A").unwrap().contains("capacity"));
        assert!(!mm.effective_attributes("D").unwrap().contains("capacity"));
    }

    #[test]
    fn field_types_get_field_attributes() {
        let mut mm = Metamodel::new("mm");
        mm.add_model_type("m");
        mm.add_object_type("m", ObjectType::new("Temp", ObjectKind::Field)).unwrap();
        mm.add_object_type("m", ObjectType::new("Box", ObjectKind::Virtual)).unwrap();
        mm.attach_builtins();
        let field = mm.effective_attributes("Temp").unwrap();
        for a in builtins::FIELD {
            assert!(field.contains(*a));
            assert!(!mm.effective_attributes("Box").unwrap().contains(*a));
        }
    }

    #[test]
    fn endpoint_kind_strings() {
        for k in ObjectKind::ALL {
            let e = EndpointKind::Object(k);
            assert_eq!(e.to_string().parse::<EndpointKind>().unwrap(), e);
        }
        assert_eq!("poi".parse::<EndpointKind>().unwrap(), EndpointKind::Poi);
        assert!("nope".parse::<EndpointKind>().is_err());
    }

    #[test]
    fn card_admits() {
        assert!(Card::MANY.admits(1000));
        assert!(!Card::REQUIRED.admits(0));
        assert!(!Card::new(0, Some(2)).admits(3));
    }
}
