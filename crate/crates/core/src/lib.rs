//! Spatial conceptual modeling engine.
//!
//! Metamodels and model instances live in [`kernel`]. The remaining modules
//! add coordinate frames, scalar fields, anchoring of virtual content to the
//! real world, events, spatial queries and the canonical document format.

pub mod anchoring;
pub mod document;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod kernel;
pub mod query;
pub mod temporal;

pub use anchoring::{
    anchors, classify_anchoring_level, create_anchor, resolve_scene, Anchor, AnchorError,
    AnchoringLevel, Placement,
};
pub use document::{parse_document, serialize_document, Document, DocumentError, Scene};
pub use expr::{evaluate_condition, Condition, ConditionError, Context, ContextValue, ParseError};
pub use field::{evaluate_field, field_from_grid, sample_to_grid, FieldError, FieldSource, FieldSpec, GridField};
pub use geometry::{
    compose, invert, normalize_rotation, CoordinateValue, FrameTree, GeometryError, Pose,
    Quaternion, RotationInput, WORLD,
};
pub use kernel::{
    validate_metamodel, validate_model, KernelError, Metamodel, ModelInstance, ObjectInstance,
    ObjectKind, Value, Violation, ViolationCode,
};
pub use query::{
    is_at, is_in, object_distance, shortest_path, within_radius, EdgeWeight, ExtentBox,
    NetworkPath, QueryError,
};
pub use temporal::{
    check_temporal_consistency, infer_relation, when, AllenRelation, EventInterval, TemporalError,
};
