//! Rigid poses with uniform scale, rotation normalization and a rooted frame tree.
//!
//! Rotations are stored as unit quaternions `(w, x, y, z)` with `w >= 0`.
//! A [`Pose`] maps a point `p` to `scale * rotate(p) + translation`, so
//! `compose(a, b)` applies `b` first and then `a`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the root frame every tree starts with.
pub const WORLD: &str = "world";

const UNIT_TOLERANCE: f64 = 1e-9;
const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("NOT_A_ROTATION: {0}")]
    NotARotation(String),
    #[error("NOT_A_ROTATION: scale must be positive and finite, got {0}")]
    BadScale(String),
    #[error("DUPLICATE_FRAME: frame `{0}` already exists")]
    DuplicateFrame(String),
    #[error("UNKNOWN_PARENT: parent frame `{0}` does not exist")]
    UnknownParent(String),
    #[error("CYCLE: parent chain of frame `{0}` does not reach `world`")]
    Cycle(String),
    #[error("UNKNOWN_FRAME: frame `{0}` does not exist")]
    UnknownFrame(String),
}

impl GeometryError {
    pub fn code(&self) -> &'static str {
        match self {
            GeometryError::NotARotation(_) | GeometryError::BadScale(_) => "NOT_A_ROTATION",
            GeometryError::DuplicateFrame(_) => "DUPLICATE_FRAME",
            GeometryError::UnknownParent(_) => "UNKNOWN_PARENT",
            GeometryError::Cycle(_) => "CYCLE",
            GeometryError::UnknownFrame(_) => "UNKNOWN_FRAME",
        }
    }
}

/// Unit quaternion, serialized as `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quaternion {
    fn from(q: [f64; 4]) -> Self {
        Quaternion { w: q[0], x: q[1], y: q[2], z: q[3] }
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = norm(axis);
        if n == 0.0 {
            return Quaternion::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Quaternion::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n).canonical()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn conjugate(&self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * other`.
    pub fn mul(&self, o: &Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Normalized, with the sign chosen so that `w >= 0`.
    pub fn canonical(&self) -> Quaternion {
        let n = self.norm();
        let s = if self.w < 0.0 { -1.0 / n } else { 1.0 / n };
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = [self.x, self.y, self.z];
        let t = scale3(cross(u, v), 2.0);
        add3(add3(v, scale3(t, self.w)), cross(u, t))
    }

    /// Row-major 3x3 rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }
}

/// Accepted rotation representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationInput {
    Quaternion(Quaternion),
    /// Intrinsic X-Y-Z angles in radians: `R = Rx(a) * Ry(b) * Rz(c)`.
    EulerXyz(Vec3),
    /// Row-major rotation matrix.
    Matrix([[f64; 3]; 3]),
}

/// Convert any supported rotation representation to a canonical unit quaternion.
pub fn normalize_rotation(input: RotationInput) -> Result<Quaternion, GeometryError> {
    match input {
        RotationInput::Quaternion(q) => {
            let n = q.norm();
            if !n.is_finite() || n < 1e-12 {
                return Err(GeometryError::NotARotation(format!("quaternion norm {n}")));
            }
            Ok(q.canonical())
        }
        RotationInput::EulerXyz([a, b, c]) => {
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return Err(GeometryError::NotARotation("non-finite Euler angle".into()));
            }
            let qx = Quaternion::from_axis_angle([1.0, 0.0, 0.0], a);
            let qy = Quaternion::from_axis_angle([0.0, 1.0, 0.0], b);
            let qz = Quaternion::from_axis_angle([0.0, 0.0, 1.0], c);
            Ok(qx.mul(&qy).mul(&qz).canonical())
        }
        RotationInput::Matrix(m) => matrix_to_quaternion(&m),
    }
}

fn matrix_to_quaternion(m: &[[f64; 3]; 3]) -> Result<Quaternion, GeometryError> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::NotARotation("non-finite matrix entry".into()));
    }
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            if (dot - expected).abs() > ORTHONORMAL_TOLERANCE {
                return Err(GeometryError::NotARotation(format!(
                    "columns {i} and {j} are not orthonormal"
                )));
            }
        }
    }
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
        return Err(GeometryError::NotARotation(format!("determinant {det}")));
    }

    // Shepperd: pick the largest diagonal term for numerical stability.
    let trace = m[0][0] + m[1][1] + m[2][2];
    let q = if trace >= m[0][0] && trace >= m[1][1] && trace >= m[2][2] {
        let s = (1.0 + trace).sqrt() * 2.0;
        Quaternion::new(
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        )
    } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        Quaternion::new(
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        )
    } else if m[1][1] >= m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        Quaternion::new(
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        )
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        Quaternion::new(
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        )
    };
    Ok(q.canonical())
}

/// Rotation, translation (meters) and positive uniform scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose =
        Pose { rotation: Quaternion::IDENTITY, translation: [0.0; 3], scale: 1.0 };

    /// Checked constructor; the rotation must already be unit length.
    pub fn new(rotation: Quaternion, translation: Vec3, scale: f64) -> Result<Self, GeometryError> {
        let pose = Pose { rotation, translation, scale };
        pose.check()?;
        Ok(pose)
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose { translation: t, ..Pose::IDENTITY }
    }

    pub fn from_rotation(rotation: Quaternion) -> Self {
        Pose { rotation, ..Pose::IDENTITY }
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        if !self.rotation.is_unit() {
            return Err(GeometryError::NotARotation(format!(
                "quaternion norm {} is not 1",
                self.rotation.norm()
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(GeometryError::BadScale(self.scale.to_string()));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NotARotation("non-finite translation".into()));
        }
        Ok(())
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        add3(scale3(self.rotation.rotate(p), self.scale), self.translation)
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_matrix();
        let mut m = [[0.0; 4]; 4];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.scale * r[i][j];
            }
            m[i][3] = self.translation[i];
        }
        m[3][3] = 1.0;
        m
    }

    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        let dq = self.rotation.mul(&other.rotation.conjugate());
        // q and -q are the same rotation
        let same_rotation = (dq.w.abs() - 1.0).abs() <= tol
            && dq.x.abs() <= tol
            && dq.y.abs() <= tol
            && dq.z.abs() <= tol;
        same_rotation
            && (self.scale - other.scale).abs() <= tol
            && (0..3).all(|i| (self.translation[i] - other.translation[i]).abs() <= tol)
    }
}

/// `a ∘ b`: applies `b`, then `a`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: a.rotation.mul(&b.rotation).canonical(),
        translation: a.apply(b.translation),
        scale: a.scale * b.scale,
    }
}

pub fn invert(p: &Pose) -> Pose {
    let rotation = p.rotation.conjugate();
    let scale = 1.0 / p.scale;
    Pose {
        rotation: rotation.canonical(),
        translation: scale3(rotation.rotate(p.translation), -scale),
        scale,
    }
}

/// A position expressed in a named frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateValue {
    pub frame: String,
    pub position: Vec3,
}

impl CoordinateValue {
    pub fn new(frame: impl Into<String>, position: Vec3) -> Self {
        CoordinateValue { frame: frame.into(), position }
    }

    pub fn world(position: Vec3) -> Self {
        CoordinateValue::new(WORLD, position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub parent: String,
    pub pose: Pose,
}

/// Rooted hierarchy of coordinate frames. `world` is implicit and has no entry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, FrameEntry>", into = "BTreeMap<String, FrameEntry>")]
pub struct FrameTree {
    frames: BTreeMap<String, FrameEntry>,
}

impl TryFrom<BTreeMap<String, FrameEntry>> for FrameTree {
    type Error = GeometryError;

    fn try_from(frames: BTreeMap<String, FrameEntry>) -> Result<Self, Self::Error> {
        FrameTree::from_entries(frames)
    }
}

impl From<FrameTree> for BTreeMap<String, FrameEntry> {
    fn from(tree: FrameTree) -> Self {
        tree.frames
    }
}

impl FrameTree {
    pub fn new() -> Self {
        FrameTree::default()
    }

    /// Build a tree from an unordered frame table, checking the tree invariant.
    pub fn from_entries(frames: BTreeMap<String, FrameEntry>) -> Result<Self, GeometryError> {
        if frames.contains_key(WORLD) {
            return Err(GeometryError::DuplicateFrame(WORLD.into()));
        }
        for (id, entry) in &frames {
            if entry.parent != WORLD && !frames.contains_key(&entry.parent) {
                return Err(GeometryError::UnknownParent(entry.parent.clone()));
            }
            entry.pose.check()?;
            let mut cursor = entry.parent.as_str();
            let mut steps = 0;
            while cursor != WORLD {
                steps += 1;
                if steps > frames.len() {
                    return Err(GeometryError::Cycle(id.clone()));
                }
                cursor = frames[cursor].parent.as_str();
            }
        }
        Ok(FrameTree { frames })
    }

    /// Returns a new tree with `id` attached under `parent`.
    pub fn register_frame(
        &self,
        id: &str,
        parent: &str,
        pose: Pose,
    ) -> Result<FrameTree, GeometryError> {
        if self.contains(id) {
            return Err(GeometryError::DuplicateFrame(id.into()));
        }
        if !self.contains(parent) {
            return Err(GeometryError::UnknownParent(parent.into()));
        }
        pose.check()?;
        let mut next = self.clone();
        next.frames.insert(id.to_string(), FrameEntry { parent: parent.to_string(), pose });
        Ok(next)
    }

    pub fn contains(&self, id: &str) -> bool {
        id == WORLD || self.frames.contains_key(id)
    }

    pub fn frames(&self) -> impl Iterator<Item = (&str, &FrameEntry)> {
        self.frames.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.frames.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frames from `id` up to and including `world`.
    fn ancestry<'a>(&'a self, id: &'a str) -> Result<Vec<&'a str>, GeometryError> {
        if !self.contains(id) {
            return Err(GeometryError::UnknownFrame(id.into()));
        }
        let mut chain = vec![id];
        let mut cursor = id;
        while cursor != WORLD {
            cursor = self.frames[cursor].parent.as_str();
            chain.push(cursor);
        }
        Ok(chain)
    }

    /// Pose of `id` relative to its ancestor `ancestor` (which must be on its chain).
    fn pose_relative_to_ancestor(&self, chain: &[&str], ancestor: &str) -> Pose {
        let mut pose = Pose::IDENTITY;
        for frame in chain {
            if *frame == ancestor {
                break;
            }
            pose = compose(&self.frames[*frame].pose, &pose);
        }
        pose
    }

    /// Pose that maps coordinates of `from` into coordinates of `to`.
    pub fn relative_pose(&self, from: &str, to: &str) -> Result<Pose, GeometryError> {
        let from_chain = self.ancestry(from)?;
        let to_chain = self.ancestry(to)?;
        let common = from_chain
            .iter()
            .find(|f| to_chain.contains(f))
            .copied()
            .unwrap_or(WORLD);
        let up = self.pose_relative_to_ancestor(&from_chain, common);
        let down = self.pose_relative_to_ancestor(&to_chain, common);
        Ok(compose(&invert(&down), &up))
    }

    pub fn world_pose(&self, frame: &str) -> Result<Pose, GeometryError> {
        self.relative_pose(frame, WORLD)
    }

    /// Express `value` in the `target` frame.
    pub fn resolve_position(
        &self,
        value: &CoordinateValue,
        target: &str,
    ) -> Result<Vec3, GeometryError> {
        Ok(self.relative_pose(&value.frame, target)?.apply(value.position))
    }

    /// Euclidean distance after resolving both positions to `world`.
    pub fn distance(&self, a: &CoordinateValue, b: &CoordinateValue) -> Result<f64, GeometryError> {
        let pa = self.resolve_position(a, WORLD)?;
        let pb = self.resolve_position(b, WORLD)?;
        Ok(norm(sub3(pa, pb)))
    }
}

pub(crate) fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}
