//! The canonical text format for metamodels, models, scenes and frame trees.
//!
//! A document is a JSON object with a `format_version` of `"1"` and exactly
//! one payload key. Serialization sorts object keys, keeps entity lists
//! sorted by id or uuid, rounds floats to 12 significant digits and ends
//! with a line feed, so equal values always produce identical bytes.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::anchoring::Placement;
use crate::geometry::FrameTree;
use crate::kernel::{Metamodel, ModelInstance};

pub const FORMAT_VERSION: &str = "1";

/// Significant digits kept for floating point numbers.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DocumentError {
    /// Position is 1-based; column counts bytes.
    #[error("PARSE_ERROR at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("UNSUPPORTED_VERSION: `{0}`")]
    UnsupportedVersion(String),
}

impl DocumentError {
    pub fn code(&self) -> &'static str {
        match self {
            DocumentError::Parse { .. } => "PARSE_ERROR",
            DocumentError::UnsupportedVersion(_) => "UNSUPPORTED_VERSION",
        }
    }

    fn from_json(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; the position is kept separately.
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        DocumentError::Parse { line: e.line().max(1), column: e.column().max(1), message }
    }

    fn structure(message: impl Into<String>) -> Self {
        DocumentError::Parse { line: 1, column: 1, message: message.into() }
    }
}

/// Resolved placements of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub model: String,
    #[serde(default)]
    pub placements: Vec<Placement>,
}

impl Scene {
    pub fn canonicalize(&mut self) {
        self.placements
            .sort_by(|a, b| a.source.cmp(&b.source).then_with(|| a.anchor.cmp(&b.anchor)));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Metamodel(Metamodel),
    Model(ModelInstance),
    Scene(Scene),
    Frames(FrameTree),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Metamodel(_) => "metamodel",
            Document::Model(_) => "model",
            Document::Scene(_) => "scene",
            Document::Frames(_) => "frames",
        }
    }

    fn canonicalize(&mut self) {
        match self {
            Document::Metamodel(m) => m.canonicalize(),
            Document::Model(m) => m.canonicalize(),
            Document::Scene(s) => s.canonicalize(),
            Document::Frames(_) => {}
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    #[allow(dead_code)]
    format_version: Json,
    metamodel: Option<Metamodel>,
    model: Option<ModelInstance>,
    scene: Option<Scene>,
    frames: Option<FrameTree>,
}

const PAYLOAD_KEYS: [&str; 4] = ["metamodel", "model", "scene", "frames"];

/// Parse any document. Structure is checked here; conformance is left to the validators.
pub fn parse_document(text: &str) -> Result<Document, DocumentError> {
    let raw: Json = serde_json::from_str(text).map_err(DocumentError::from_json)?;
    let obj = raw.as_object().ok_or_else(|| DocumentError::structure("a document must be an object"))?;
    match obj.get("format_version") {
        Some(Json::String(v)) if v == FORMAT_VERSION => {}
        Some(Json::String(v)) => return Err(DocumentError::UnsupportedVersion(v.clone())),
        Some(other) => return Err(DocumentError::UnsupportedVersion(other.to_string())),
        None => return Err(DocumentError::structure("missing `format_version`")),
    }
    let present: Vec<&str> = PAYLOAD_KEYS.iter().copied().filter(|k| obj.contains_key(*k)).collect();
    if present.len() != 1 {
        return Err(DocumentError::structure(format!(
            "expected exactly one of {}, found {}",
            PAYLOAD_KEYS.join(", "),
            present.len()
        )));
    }
    let env: Envelope = serde_json::from_str(text).map_err(DocumentError::from_json)?;
    let mut doc = match (env.metamodel, env.model, env.scene, env.frames) {
        (Some(m), ..) => Document::Metamodel(m),
        (_, Some(m), ..) => Document::Model(m),
        (_, _, Some(s), _) => Document::Scene(s),
        (.., Some(f)) => Document::Frames(f),
        _ => unreachable!("one payload key is present"),
    };
    doc.canonicalize();
    Ok(doc)
}

fn expect<T>(doc: Document, want: &str, pick: impl FnOnce(Document) -> Option<T>) -> Result<T, DocumentError> {
    let found = doc.kind();
    pick(doc).ok_or_else(|| DocumentError::structure(format!("expected a {want} document, found {found}")))
}

pub fn parse_metamodel(text: &str) -> Result<Metamodel, DocumentError> {
    expect(parse_document(text)?, "metamodel", |d| match d {
        Document::Metamodel(m) => Some(m),
        _ => None,
    })
}

pub fn parse_model(text: &str) -> Result<ModelInstance, DocumentError> {
    expect(parse_document(text)?, "model", |d| match d {
        Document::Model(m) => Some(m),
        _ => None,
    })
}

pub fn parse_scene(text: &str) -> Result<Scene, DocumentError> {
    expect(parse_document(text)?, "scene", |d| match d {
        Document::Scene(s) => Some(s),
        _ => None,
    })
}

pub fn parse_frames(text: &str) -> Result<FrameTree, DocumentError> {
    expect(parse_document(text)?, "frames", |d| match d {
        Document::Frames(f) => Some(f),
        _ => None,
    })
}

/// Round to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Sort keys (serde_json maps are ordered) and round floats.
pub fn canonical_json(value: Json) -> Json {
    match value {
        Json::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or_default());
            serde_json::Number::from_f64(x).map_or(Json::Null, Json::Number)
        }
        Json::Array(items) => Json::Array(items.into_iter().map(canonical_json).collect()),
        Json::Object(map) => Json::Object(map.into_iter().map(|(k, v)| (k, canonical_json(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// Render any serializable value in the canonical layout.
pub fn to_canonical_string<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_value(value).expect("document values serialize to JSON");
    let mut text = serde_json::to_string_pretty(&canonical_json(json)).expect("JSON values render");
    text.push('\n');
    text
}

/// Wrap a payload under `key` with the format version.
pub fn envelope<T: Serialize>(key: &str, payload: &T) -> Json {
    let mut map = Map::new();
    map.insert("format_version".into(), Json::String(FORMAT_VERSION.into()));
    map.insert(key.into(), serde_json::to_value(payload).expect("document values serialize to JSON"));
    Json::Object(map)
}

pub fn serialize_document(doc: &Document) -> String {
    let mut doc = doc.clone();
    doc.canonicalize();
    let json = match &doc {
        Document::Metamodel(m) => envelope("metamodel", m),
        Document::Model(m) => envelope("model", m),
        Document::Scene(s) => envelope("scene", s),
        Document::Frames(f) => envelope("frames", f),
    };
    to_canonical_string(&json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ObjectKind, ObjectType};

    const MINIMAL: &str = r#"{"format_version": "1", "metamodel": {"id": "mm", "model_types": [{"id": "process"}]}}"#;

    #[test]
    fn minimal_metamodel() {
        let mm = parse_metamodel(MINIMAL).unwrap();
        assert_eq!(mm.model_types.len(), 1);
        assert_eq!(mm.model_types[0].id, "process");
    }

    #[test]
    fn truncated_input_reports_end_position() {
        let text = "{\n  \"format_version\": \"1\",\n  \"metamodel\": {";
        let err = parse_document(text).unwrap_err();
        let DocumentError::Parse { line, column, .. } = err else { panic!("expected parse error") };
        assert_eq!(line, 3);
        assert_eq!(column, text.lines().last().unwrap().len());
    }

    #[test]
    fn version_two_is_unsupported() {
        let err = parse_document(r#"{"format_version": "2", "model": 7}"#).unwrap_err();
        assert_eq!(err.code(), "UNSUPPORTED_VERSION");
    }

    #[test]
    fn two_payloads_rejected() {
        let text = r#"{"format_version": "1", "metamodel": {"id": "a"}, "frames": {}}"#;
        assert_eq!(parse_document(text).unwrap_err().code(), "PARSE_ERROR");
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(0.1 + 0.2), 0.3);
        assert_eq!(round_significant(123456.7890123456), 123456.789012);
        assert_eq!(round_significant(-2.5e-20), -2.5e-20);
        assert_eq!(round_significant(0.0), 0.0);
    }

    #[test]
    fn serialize_is_stable() {
        let mut mm = Metamodel::new("mm");
        mm.add_model_type("b").add_model_type("a");
        mm.add_object_type("a", ObjectType::new("T", ObjectKind::Virtual)).unwrap();
        mm.attach_builtins();
        let doc = Document::Metamodel(mm);
        let once = serialize_document(&doc);
        assert!(once.ends_with('\n'));
        let back = parse_document(&once).unwrap();
        assert_eq!(back, doc);
        assert_eq!(serialize_document(&back), once);
    }
}
