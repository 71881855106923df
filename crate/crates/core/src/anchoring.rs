//! Anchors between virtual content and the real world, anchoring levels and
//! scene resolution.
//!
//! An anchor object relates a source (a virtual object, or the whole model)
//! to a target (a real object, or a pose in a named frame). Its `offset`
//! places the source relative to the target and an optional `condition`
//! makes it dynamic.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Condition, ConditionError, Context, ParseError};
use crate::geometry::{compose, FrameTree, GeometryError, Pose};
use crate::kernel::{
    builtins, validate_model, EndpointKind, EndpointRef, Endpoints, KernelError, Metamodel,
    ModelInstance, ObjectInstance, ObjectKind, Value, Violation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnchorError {
    #[error("ENDPOINT_KIND: {0}")]
    EndpointKind(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{source} (anchor {anchor})")]
    Condition { anchor: String, source: ConditionError },
    #[error("NO_POSITION: anchor target {0} has no coordinate")]
    NoPosition(String),
    #[error("INVALID_MODEL: {} violation(s)", .0.len())]
    InvalidModel(Vec<Violation>),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl AnchorError {
    pub fn code(&self) -> &'static str {
        match self {
            AnchorError::EndpointKind(_) => "ENDPOINT_KIND",
            AnchorError::Parse(_) => "PARSE_ERROR",
            AnchorError::Condition { source, .. } => source.code(),
            AnchorError::NoPosition(_) => "NO_POSITION",
            AnchorError::InvalidModel(_) => "INVALID_MODEL",
            AnchorError::Kernel(e) => e.code(),
            AnchorError::Geometry(e) => e.code(),
        }
    }
}

/// The five anchoring levels, from plain 2D models to dynamically anchored elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum AnchoringLevel {
    /// No spatialization.
    Traditional = 0,
    /// Spatialized but not anchored.
    Unanchored = 1,
    /// Whole models anchored to points of interest.
    ModelAnchored = 2,
    /// Individual elements statically anchored.
    StaticallyAnchored = 3,
    /// Element anchors that depend on context.
    DynamicallyAnchored = 4,
}

impl From<AnchoringLevel> for u8 {
    fn from(l: AnchoringLevel) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for AnchoringLevel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Ok(match v {
            0 => AnchoringLevel::Traditional,
            1 => AnchoringLevel::Unanchored,
            2 => AnchoringLevel::ModelAnchored,
            3 => AnchoringLevel::StaticallyAnchored,
            4 => AnchoringLevel::DynamicallyAnchored,
            _ => return Err(format!("no anchoring level {v}")),
        })
    }
}

impl fmt::Display for AnchoringLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AnchoringLevel::Traditional => "Traditional CM",
            AnchoringLevel::Unanchored => "Unanchored Spatial CM",
            AnchoringLevel::ModelAnchored => "Model-Anchored Spatial CM",
            AnchoringLevel::StaticallyAnchored => "Statically Anchored Spatial CM",
            AnchoringLevel::DynamicallyAnchored => "Dynamically Anchored Spatial CM",
        };
        write!(f, "Level {} ({name})", *self as u8)
    }
}

/// Typed view of an anchor object.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor<'a> {
    pub uuid: &'a str,
    pub source: &'a EndpointRef,
    pub target: &'a EndpointRef,
    pub offset: Pose,
    pub condition: Option<&'a str>,
}

impl<'a> Anchor<'a> {
    fn from_object(obj: &'a ObjectInstance) -> Option<Self> {
        let ends = obj.endpoints.as_ref()?;
        let offset = match obj.first(builtins::OFFSET) {
            Some(Value::Pose(p)) => *p,
            _ => Pose::IDENTITY,
        };
        Some(Anchor {
            uuid: &obj.uuid,
            source: &ends.source,
            target: &ends.target,
            offset,
            condition: obj.text(builtins::CONDITION),
        })
    }

    pub fn is_model_level(&self) -> bool {
        matches!(self.source, EndpointRef::Model)
    }
}

fn kind_of(mm: &Metamodel, obj: &ObjectInstance) -> Option<ObjectKind> {
    mm.object_type(&obj.object_type).map(|t| t.kind)
}

/// All anchor objects of the model, in uuid order.
pub fn anchors<'a>(model: &'a ModelInstance, mm: &Metamodel) -> Vec<Anchor<'a>> {
    model
        .objects()
        .iter()
        .filter(|o| kind_of(mm, o) == Some(ObjectKind::Anchor))
        .filter_map(Anchor::from_object)
        .collect()
}

fn require_valid(model: &ModelInstance, mm: &Metamodel) -> Result<(), AnchorError> {
    let violations = validate_model(model, mm)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(AnchorError::InvalidModel(violations))
    }
}

/// Level of a valid model; the highest matching level wins.
pub fn classify_anchoring_level(
    model: &ModelInstance,
    mm: &Metamodel,
) -> Result<AnchoringLevel, AnchorError> {
    require_valid(model, mm)?;
    let anchors = anchors(model, mm);
    Ok(if anchors.iter().any(|a| a.condition.is_some()) {
        AnchoringLevel::DynamicallyAnchored
    } else if anchors.iter().any(|a| !a.is_model_level()) {
        AnchoringLevel::StaticallyAnchored
    } else if !anchors.is_empty() {
        AnchoringLevel::ModelAnchored
    } else if model.objects().iter().any(ObjectInstance::is_spatialized) {
        AnchoringLevel::Unanchored
    } else {
        AnchoringLevel::Traditional
    })
}

fn endpoint_kind(
    model: &ModelInstance,
    mm: &Metamodel,
    end: &EndpointRef,
) -> Result<EndpointKind, AnchorError> {
    Ok(match end {
        EndpointRef::Model => EndpointKind::Model,
        EndpointRef::Poi(poi) => {
            poi.pose.check()?;
            EndpointKind::Poi
        }
        EndpointRef::Object(uuid) => {
            let obj = model.require(uuid)?;
            EndpointKind::Object(
                kind_of(mm, obj).ok_or_else(|| KernelError::UnknownType(obj.object_type.clone()))?,
            )
        }
    })
}

/// Add an anchor object. The anchor type is the first (by id) anchor type of
/// the model's model type that accepts both endpoints.
pub fn create_anchor(
    model: &mut ModelInstance,
    mm: &Metamodel,
    source: EndpointRef,
    target: EndpointRef,
    offset: Pose,
    condition: Option<&str>,
) -> Result<String, AnchorError> {
    if let Some(src) = condition {
        Condition::parse(src)?;
    }
    offset.check()?;
    let source_kind = endpoint_kind(model, mm, &source)?;
    let target_kind = endpoint_kind(model, mm, &target)?;
    match source_kind {
        EndpointKind::Model => {}
        EndpointKind::Object(k) if k.is_virtual() => {}
        other => return Err(AnchorError::EndpointKind(format!("`{other}` cannot be an anchor source"))),
    }
    match target_kind {
        EndpointKind::Poi | EndpointKind::Object(ObjectKind::Real) => {}
        other => return Err(AnchorError::EndpointKind(format!("`{other}` cannot be an anchor target"))),
    }

    let anchor_type = mm
        .object_types()
        .map(|(_, t)| t)
        .filter(|t| t.kind == ObjectKind::Anchor)
        .filter(|t| mm.type_in_model_type(&t.id, &model.model_type).unwrap_or(false))
        .find(|t| {
            t.endpoint_spec.as_ref().is_some_and(|spec| {
                spec.sources.contains(&source_kind) && spec.targets.contains(&target_kind)
            })
        })
        .map(|t| t.id.clone())
        .ok_or_else(|| {
            AnchorError::EndpointKind(format!(
                "no anchor type of `{}` relates `{source_kind}` to `{target_kind}`",
                model.model_type
            ))
        })?;

    let uuid = model.create_object(mm, &anchor_type, Some(Endpoints::new(source, target)))?;
    if offset != Pose::IDENTITY {
        model.set_value(mm, &uuid, builtins::OFFSET, vec![Value::Pose(offset)])?;
    }
    if let Some(src) = condition {
        model.set_value(mm, &uuid, builtins::CONDITION, vec![Value::Text(src.into())])?;
    }
    Ok(uuid)
}

/// A virtual object positioned in `world`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub source: String,
    pub anchor: String,
    pub pose: Pose,
    /// Visual representation attribute values of the source, echoed.
    pub vizrep: BTreeMap<String, Vec<Value>>,
}

fn vizrep_of(obj: &ObjectInstance) -> BTreeMap<String, Vec<Value>> {
    builtins::VIZREP
        .iter()
        .filter_map(|a| obj.values.get(*a).map(|v| (a.to_string(), v.clone())))
        .collect()
}

fn target_world_pose(
    model: &ModelInstance,
    tree: &FrameTree,
    target: &EndpointRef,
) -> Result<Pose, AnchorError> {
    match target {
        EndpointRef::Poi(poi) => Ok(compose(&tree.world_pose(&poi.frame)?, &poi.pose)),
        EndpointRef::Object(uuid) => {
            let obj = model.require(uuid)?;
            let (frame, local) = obj.local_pose().ok_or_else(|| AnchorError::NoPosition(uuid.clone()))?;
            Ok(compose(&tree.world_pose(frame)?, &local))
        }
        EndpointRef::Model => Err(AnchorError::EndpointKind("a model cannot be an anchor target".into())),
    }
}

/// Pose of an element relative to a model-level anchor: its coordinate and
/// transform values, ignoring the coordinate's frame label.
fn element_pose(obj: &ObjectInstance) -> Pose {
    Pose {
        rotation: obj.rotation(),
        translation: obj.coordinate().map_or([0.0; 3], |c| c.position),
        scale: obj.scale(),
    }
}

/// Elements that follow a model-level anchor: non-relational virtual objects.
fn follows_model_anchor(kind: Option<ObjectKind>) -> bool {
    kind.is_some_and(|k| k.is_virtual() && !k.is_relational())
}

/// World placements of every active anchor, sorted by source then anchor uuid.
pub fn resolve_scene(
    model: &ModelInstance,
    mm: &Metamodel,
    tree: &FrameTree,
    context: &Context,
) -> Result<Vec<Placement>, AnchorError> {
    require_valid(model, mm)?;
    let mut out = Vec::new();
    for anchor in anchors(model, mm) {
        if let Some(src) = anchor.condition {
            let active = Condition::parse(src)
                .map_err(ConditionError::from)
                .and_then(|c| c.evaluate(context))
                .map_err(|source| AnchorError::Condition { anchor: anchor.uuid.into(), source })?;
            if !active {
                continue;
            }
        }
        let base = compose(&target_world_pose(model, tree, anchor.target)?, &anchor.offset);
        match anchor.source {
            EndpointRef::Object(uuid) => {
                let obj = model.require(uuid)?;
                out.push(Placement {
                    source: uuid.clone(),
                    anchor: anchor.uuid.into(),
                    pose: base,
                    vizrep: vizrep_of(obj),
                });
            }
            EndpointRef::Model => {
                for obj in model.objects().iter().filter(|o| follows_model_anchor(kind_of(mm, o))) {
                    out.push(Placement {
                        source: obj.uuid.clone(),
                        anchor: anchor.uuid.into(),
                        pose: compose(&base, &element_pose(obj)),
                        vizrep: vizrep_of(obj),
                    });
                }
            }
            EndpointRef::Poi(_) => {
                return Err(AnchorError::EndpointKind("a point of interest cannot be an anchor source".into()))
            }
        }
    }
    out.sort_by(|a, b| a.source.cmp(&b.source).then_with(|| a.anchor.cmp(&b.anchor)));
    Ok(out)
}
