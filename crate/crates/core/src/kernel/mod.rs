//! Metamodels (the TBox) and model instances (the ABox).
//!
//! A [`Metamodel`] is the tuple of model types, the inheritance ordering and
//! the `domain`, `range` and `card` maps. Every object type automatically
//! carries the spatial builtin attributes listed in [`builtins`].

pub mod builtins;
mod metamodel;
mod model;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metamodel::{
    Attribute, Card, DataKind, DataType, EndpointKind, EndpointSpec, Metamodel, ModelType,
    ObjectKind, ObjectType, RangeSpec,
};
pub use model::{EndpointRef, Endpoints, ModelInstance, ObjectInstance, PoiTarget, Value};
pub use validate::{validate_metamodel, validate_model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    // metamodel
    InheritanceCycle,
    DanglingInheritance,
    DanglingDomain,
    DanglingRange,
    BadCard,
    KindConflict,
    MissingBuiltin,
    IncompleteAttribute,
    DuplicateId,
    BadDataType,
    // model
    UnknownModelType,
    UnknownType,
    WrongModelType,
    UnknownAttribute,
    RangeTypeMismatch,
    MissingValue,
    CardViolation,
    EndpointKind,
    MissingEndpoint,
    DanglingReference,
    DuplicateUuid,
    UuidMismatch,
    BadCondition,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

/// One broken rule, located by a path such as `object:<uuid>/attr:<id>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    pub fn new(code: ViolationCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { location: location.into(), code, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("UNKNOWN_TYPE: `{0}`")]
    UnknownType(String),
    #[error("UNKNOWN_MODEL_TYPE: `{0}`")]
    UnknownModelType(String),
    #[error("UNKNOWN_OBJECT: `{0}`")]
    UnknownObject(String),
    #[error("UNKNOWN_ATTRIBUTE: `{attribute}` on object type `{object_type}`")]
    UnknownAttribute { object_type: String, attribute: String },
    #[error("RANGE_TYPE_MISMATCH: {0}")]
    RangeTypeMismatch(String),
    #[error("KIND_MISMATCH: {0}")]
    KindMismatch(String),
    #[error("INVALID_METAMODEL: {} violation(s)", .0.len())]
    InvalidMetamodel(Vec<Violation>),
    #[error("INVALID_MODEL: {} violation(s)", .0.len())]
    InvalidModel(Vec<Violation>),
}

impl KernelError {
    pub fn code(&self) -> &'static str {
        match self {
            KernelError::UnknownType(_) => "UNKNOWN_TYPE",
            KernelError::UnknownModelType(_) => "UNKNOWN_MODEL_TYPE",
            KernelError::UnknownObject(_) => "UNKNOWN_OBJECT",
            KernelError::UnknownAttribute { .. } => "UNKNOWN_ATTRIBUTE",
            KernelError::RangeTypeMismatch(_) => "RANGE_TYPE_MISMATCH",
            KernelError::KindMismatch(_) => "KIND_MISMATCH",
            KernelError::InvalidMetamodel(_) => "INVALID_METAMODEL",
            KernelError::InvalidModel(_) => "INVALID_MODEL",
        }
    }
}
