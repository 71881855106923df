//! Events, qualitative interval relations between them and consistency checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{
    builtins, validate_model, KernelError, Metamodel, ModelInstance, ObjectInstance, ObjectKind,
    Violation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemporalError {
    #[error("NO_TIMESTAMP: event {0} lacks a start or duration")]
    NoTimestamp(String),
    #[error("KIND_MISMATCH: {0} is not an event")]
    NotAnEvent(String),
    #[error("INVALID_MODEL: {} violation(s)", .0.len())]
    InvalidModel(Vec<Violation>),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl TemporalError {
    pub fn code(&self) -> &'static str {
        match self {
            TemporalError::NoTimestamp(_) => "NO_TIMESTAMP",
            TemporalError::NotAnEvent(_) => "KIND_MISMATCH",
            TemporalError::InvalidModel(_) => "INVALID_MODEL",
            TemporalError::Kernel(e) => e.code(),
        }
    }
}

/// The thirteen interval relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllenRelation {
    Before,
    After,
    Meets,
    MetBy,
    Overlaps,
    OverlappedBy,
    During,
    Contains,
    Starts,
    StartedBy,
    Finishes,
    FinishedBy,
    Equals,
}

impl AllenRelation {
    pub const ALL: [AllenRelation; 13] = [
        AllenRelation::Before,
        AllenRelation::After,
        AllenRelation::Meets,
        AllenRelation::MetBy,
        AllenRelation::Overlaps,
        AllenRelation::OverlappedBy,
        AllenRelation::During,
        AllenRelation::Contains,
        AllenRelation::Starts,
        AllenRelation::StartedBy,
        AllenRelation::Finishes,
        AllenRelation::FinishedBy,
        AllenRelation::Equals,
    ];

    pub fn as_str(self) -> &'static str {
        builtins::ALLEN_RELATIONS[self as usize]
    }

    /// The relation seen from the other interval.
    pub fn converse(self) -> AllenRelation {
        use AllenRelation::*;
        match self {
            Before => After,
            After => Before,
            Meets => MetBy,
            MetBy => Meets,
            Overlaps => OverlappedBy,
            OverlappedBy => Overlaps,
            During => Contains,
            Contains => During,
            Starts => StartedBy,
            StartedBy => Starts,
            Finishes => FinishedBy,
            FinishedBy => Finishes,
            Equals => Equals,
        }
    }

    /// Whether the relation forces the source to end no later than the
    /// target starts, with the pair ordered (earlier, later).
    fn precedence(self) -> Option<bool> {
        match self {
            AllenRelation::Before | AllenRelation::Meets => Some(true),
            AllenRelation::After | AllenRelation::MetBy => Some(false),
            _ => None,
        }
    }
}

impl fmt::Display for AllenRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllenRelation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AllenRelation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown interval relation `{s}`"))
    }
}

/// Temporal attributes of an event object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInterval {
    pub uuid: String,
    pub start: Option<i64>,
    pub duration: Option<i64>,
}

impl EventInterval {
    pub fn new(uuid: &str, start: Option<i64>, duration: Option<i64>) -> Self {
        EventInterval { uuid: uuid.into(), start, duration }
    }

    pub fn from_object(obj: &ObjectInstance) -> Self {
        EventInterval {
            uuid: obj.uuid.clone(),
            start: obj.timestamp(builtins::START),
            duration: obj.timestamp(builtins::DURATION),
        }
    }

    /// `[start, end]`, widened so the end never overflows.
    pub fn bounds(&self) -> Result<(i128, i128), TemporalError> {
        match (self.start, self.duration) {
            (Some(s), Some(d)) if d >= 0 => Ok((s as i128, s as i128 + d as i128)),
            _ => Err(TemporalError::NoTimestamp(self.uuid.clone())),
        }
    }
}

/// Date of an event: its start.
pub fn when(event: &EventInterval) -> Result<i64, TemporalError> {
    event.start.ok_or_else(|| TemporalError::NoTimestamp(event.uuid.clone()))
}

/// The relation of `a` to `b`. Point events are allowed; when several
/// definitions coincide on degenerate intervals, the earlier test wins.
pub fn infer_relation(a: &EventInterval, b: &EventInterval) -> Result<AllenRelation, TemporalError> {
    let (as_, ae) = a.bounds()?;
    let (bs, be) = b.bounds()?;
    Ok(relation_of_bounds((as_, ae), (bs, be)))
}

fn relation_of_bounds((as_, ae): (i128, i128), (bs, be): (i128, i128)) -> AllenRelation {
    use AllenRelation::*;
    if as_ == bs && ae == be {
        Equals
    } else if ae < bs {
        Before
    } else if be < as_ {
        After
    } else if as_ == bs {
        if ae < be { Starts } else { StartedBy }
    } else if ae == be {
        if as_ > bs { Finishes } else { FinishedBy }
    } else if ae == bs {
        Meets
    } else if be == as_ {
        MetBy
    } else if as_ > bs && ae < be {
        During
    } else if as_ < bs && ae > be {
        Contains
    } else if as_ < bs {
        Overlaps
    } else {
        OverlappedBy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TemporalCode {
    /// Strict-precedence relations that loop back.
    Cycle,
    /// An asserted relation disagrees with the events' timestamps.
    Contradiction,
    /// An event related to itself by anything but `equals`.
    SelfRelation,
    /// A relation value outside the thirteen names.
    UnknownRelation,
}

impl std::fmt::Display for TemporalCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TemporalCode::Cycle => "CYCLE",
            TemporalCode::Contradiction => "CONTRADICTION",
            TemporalCode::SelfRelation => "SELF_RELATION",
            TemporalCode::UnknownRelation => "UNKNOWN_RELATION",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TemporalViolation {
    pub location: String,
    pub code: TemporalCode,
    pub message: String,
}

/// An asserted relation between two events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertedRelation {
    pub uuid: String,
    pub source: String,
    pub target: String,
    pub relation: Result<AllenRelation, String>,
}

fn kind_of(mm: &Metamodel, obj: &ObjectInstance) -> Option<ObjectKind> {
    mm.object_type(&obj.object_type).map(|t| t.kind)
}

/// Event intervals of the model keyed by uuid.
pub fn events(model: &ModelInstance, mm: &Metamodel) -> BTreeMap<String, EventInterval> {
    model
        .objects()
        .iter()
        .filter(|o| kind_of(mm, o) == Some(ObjectKind::Event))
        .map(|o| (o.uuid.clone(), EventInterval::from_object(o)))
        .collect()
}

/// Interval of one event object.
pub fn event(model: &ModelInstance, mm: &Metamodel, uuid: &str) -> Result<EventInterval, TemporalError> {
    let obj = model.require(uuid)?;
    if kind_of(mm, obj) != Some(ObjectKind::Event) {
        return Err(TemporalError::NotAnEvent(uuid.into()));
    }
    Ok(EventInterval::from_object(obj))
}

/// Temporal relation objects whose endpoints are both objects, in uuid order.
pub fn asserted_relations(model: &ModelInstance, mm: &Metamodel) -> Vec<AssertedRelation> {
    model
        .objects()
        .iter()
        .filter(|o| kind_of(mm, o) == Some(ObjectKind::TemporalRelation))
        .filter_map(|o| {
            let ends = o.endpoints.as_ref()?;
            Some(AssertedRelation {
                uuid: o.uuid.clone(),
                source: ends.source.as_object()?.to_string(),
                target: ends.target.as_object()?.to_string(),
                relation: o
                    .text(builtins::RELATION)
                    .ok_or_else(|| "missing relation".to_string())
                    .and_then(AllenRelation::from_str),
            })
        })
        .collect()
}

/// Check asserted relations of a valid model for precedence cycles and for
/// disagreement with timestamps. Participation objects play no part.
pub fn check_temporal_consistency(
    model: &ModelInstance,
    mm: &Metamodel,
) -> Result<Vec<TemporalViolation>, TemporalError> {
    let violations = validate_model(model, mm)?;
    if !violations.is_empty() {
        return Err(TemporalError::InvalidModel(violations));
    }
    let events = events(model, mm);
    let relations = asserted_relations(model, mm);
    Ok(consistency_report(&events, &relations))
}

/// The checks behind [`check_temporal_consistency`], over plain data.
pub fn consistency_report(
    events: &BTreeMap<String, EventInterval>,
    relations: &[AssertedRelation],
) -> Vec<TemporalViolation> {
    let mut out = Vec::new();
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in relations {
        let location = format!("object:{}", r.uuid);
        let rel = match &r.relation {
            Ok(rel) => *rel,
            Err(msg) => {
                out.push(TemporalViolation { location, code: TemporalCode::UnknownRelation, message: msg.clone() });
                continue;
            }
        };
        if r.source == r.target {
            if rel != AllenRelation::Equals {
                out.push(TemporalViolation {
                    location,
                    code: TemporalCode::SelfRelation,
                    message: format!("event {} cannot be `{rel}` itself", r.source),
                });
            }
            continue;
        }
        match rel.precedence() {
            Some(true) => {
                edges.entry(&r.source).or_default().insert(&r.target);
            }
            Some(false) => {
                edges.entry(&r.target).or_default().insert(&r.source);
            }
            None => {}
        }
        if let (Some(a), Some(b)) = (events.get(&r.source), events.get(&r.target)) {
            if let Ok(actual) = infer_relation(a, b) {
                if actual != rel {
                    out.push(TemporalViolation {
                        location,
                        code: TemporalCode::Contradiction,
                        message: format!("asserted `{rel}` but the intervals give `{actual}`"),
                    });
                }
            }
        }
    }
    for component in cyclic_components(&edges) {
        out.push(TemporalViolation {
            location: format!("event:{}", component[0]),
            code: TemporalCode::Cycle,
            message: format!("precedence cycle through {}", component.join(", ")),
        });
    }
    out.sort();
    out
}

/// Strongly connected components with more than one node, each sorted.
fn cyclic_components<'a>(edges: &BTreeMap<&'a str, BTreeSet<&'a str>>) -> Vec<Vec<&'a str>> {
    let nodes: BTreeSet<&str> = edges
        .iter()
        .flat_map(|(k, vs)| std::iter::once(*k).chain(vs.iter().copied()))
        .collect();
    let reach = |from: &'a str| {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            for &m in edges.get(n).into_iter().flatten() {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen
    };
    let reachable: BTreeMap<&str, BTreeSet<&str>> = nodes.iter().map(|&n| (n, reach(n))).collect();
    let mut assigned = BTreeSet::new();
    let mut out = Vec::new();
    for &n in &nodes {
        if assigned.contains(n) || !reachable[n].contains(n) {
            continue;
        }
        let comp: Vec<&str> = nodes
            .iter()
            .copied()
            .filter(|&m| reachable[n].contains(m) && reachable[m].contains(n))
            .collect();
        assigned.extend(comp.iter().copied());
        out.push(comp);
    }
    out
}
