//! Attributes the kernel attaches to object types on its own.
//!
//! | set        | ids                                   | attached to        |
//! |------------|---------------------------------------|--------------------|
//! | uuid       | `uuid`                                | every object type  |
//! | coord      | `coord`                               | every object type  |
//! | transform  | `rotation`, `scale`                   | every object type  |
//! | vizrep     | `extent`, `lod`, `representation`     | every object type  |
//! | field      | `field`                               | field kinds        |
//! | event      | `start`, `duration`                   | event kinds        |
//! | relations  | `condition`, `offset`, `relation`, `role` | anchor / temporal relation / participation |

use super::{Card, DataKind, ObjectKind};

pub const UUID: &str = "uuid";
pub const COORD: &str = "coord";
pub const ROTATION: &str = "rotation";
pub const SCALE: &str = "scale";
pub const EXTENT: &str = "extent";
pub const LOD: &str = "lod";
pub const REPRESENTATION: &str = "representation";
pub const FIELD_SPEC: &str = "field";
pub const START: &str = "start";
pub const DURATION: &str = "duration";
pub const CONDITION: &str = "condition";
pub const OFFSET: &str = "offset";
pub const RELATION: &str = "relation";
pub const ROLE: &str = "role";

pub const COORD_SET: &[&str] = &[COORD];
pub const TRANSFORM: &[&str] = &[ROTATION, SCALE];
pub const VIZREP: &[&str] = &[EXTENT, LOD, REPRESENTATION];
pub const FIELD: &[&str] = &[FIELD_SPEC];
pub const EVENT: &[&str] = &[START, DURATION];

/// Attributes present on every object type.
pub const UNIVERSAL: &[&str] = &[UUID, COORD, ROTATION, SCALE, EXTENT, LOD, REPRESENTATION];

/// Names of the thirteen interval relations, in the order used by `relation` values.
pub const ALLEN_RELATIONS: &[&str] = &[
    "before",
    "after",
    "meets",
    "met-by",
    "overlaps",
    "overlapped-by",
    "during",
    "contains",
    "starts",
    "started-by",
    "finishes",
    "finished-by",
    "equals",
];

pub const DT_TEXT: &str = "text";
pub const DT_INTEGER: &str = "integer";
pub const DT_REAL: &str = "real";
pub const DT_BOOLEAN: &str = "boolean";
pub const DT_TIMESTAMP: &str = "timestamp";
pub const DT_DURATION: &str = "duration";
pub const DT_COORDINATE: &str = "coordinate";
pub const DT_ROTATION: &str = "rotation";
pub const DT_EXTENT: &str = "extent";
pub const DT_FIELD_SPEC: &str = "field_spec";
pub const DT_POSE: &str = "pose";
pub const DT_ALLEN: &str = "allen_relation";

pub(crate) const DATA_TYPES: &[(&str, fn() -> DataKind)] = &[
    (DT_TEXT, || DataKind::Text),
    (DT_INTEGER, || DataKind::Integer),
    (DT_REAL, || DataKind::Real),
    (DT_BOOLEAN, || DataKind::Boolean),
    (DT_TIMESTAMP, || DataKind::Timestamp),
    (DT_DURATION, || DataKind::Duration),
    (DT_COORDINATE, || DataKind::Coordinate),
    (DT_ROTATION, || DataKind::Rotation),
    (DT_EXTENT, || DataKind::Extent),
    (DT_FIELD_SPEC, || DataKind::FieldSpec),
    (DT_POSE, || DataKind::Pose),
    (DT_ALLEN, || DataKind::Enumeration(ALLEN_RELATIONS.iter().map(|s| s.to_string()).collect())),
];

#[derive(Debug, Clone, Copy)]
pub(crate) enum Attachment {
    Every,
    Kind(ObjectKind),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BuiltinAttribute {
    pub id: &'static str,
    pub data_type: &'static str,
    pub card: Card,
    pub attach: Attachment,
}

impl BuiltinAttribute {
    pub fn applies_to(&self, kind: ObjectKind) -> bool {
        match self.attach {
            Attachment::Every => true,
            Attachment::Kind(k) => k == kind,
        }
    }
}

const fn every(id: &'static str, data_type: &'static str, card: Card) -> BuiltinAttribute {
    BuiltinAttribute { id, data_type, card, attach: Attachment::Every }
}

const fn on(id: &'static str, data_type: &'static str, card: Card, kind: ObjectKind) -> BuiltinAttribute {
    BuiltinAttribute { id, data_type, card, attach: Attachment::Kind(kind) }
}

pub(crate) const ATTRIBUTES: &[BuiltinAttribute] = &[
    every(UUID, DT_TEXT, Card::REQUIRED),
    every(COORD, DT_COORDINATE, Card::OPTIONAL),
    every(ROTATION, DT_ROTATION, Card::OPTIONAL),
    every(SCALE, DT_REAL, Card::OPTIONAL),
    every(EXTENT, DT_EXTENT, Card::OPTIONAL),
    every(LOD, DT_INTEGER, Card::OPTIONAL),
    every(REPRESENTATION, DT_TEXT, Card::OPTIONAL),
    on(FIELD_SPEC, DT_FIELD_SPEC, Card::REQUIRED, ObjectKind::Field),
    on(START, DT_TIMESTAMP, Card::OPTIONAL, ObjectKind::Event),
    on(DURATION, DT_DURATION, Card::OPTIONAL, ObjectKind::Event),
    on(CONDITION, DT_TEXT, Card::OPTIONAL, ObjectKind::Anchor),
    on(OFFSET, DT_POSE, Card::OPTIONAL, ObjectKind::Anchor),
    on(RELATION, DT_ALLEN, Card::REQUIRED, ObjectKind::TemporalRelation),
    on(ROLE, DT_TEXT, Card::OPTIONAL, ObjectKind::Participation),
];

pub(crate) fn lookup(id: &str) -> Option<&'static BuiltinAttribute> {
    ATTRIBUTES.iter().find(|a| a.id == id)
}

pub fn is_builtin(id: &str) -> bool {
    lookup(id).is_some()
}
