//! Contact, containment, radius search and network shortest paths.
//!
//! Extents are boxes in an object's local frame. For contact and containment
//! they are conservatively enclosed by their world-frame axis-aligned box, so
//! rotated boxes may report contact slightly early.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{compose, norm, sub3, CoordinateValue, FrameTree, GeometryError, Vec3, WORLD};
use crate::kernel::{KernelError, Metamodel, ModelInstance, ObjectInstance, ObjectKind, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("NO_POSITION: object {0} has no coordinate")]
    NoPosition(String),
    #[error("NO_EXTENT: object {0} has no extent")]
    NoExtent(String),
    #[error("NEGATIVE_WEIGHT: edge {edge} has weight {weight}")]
    NegativeWeight { edge: String, weight: f64 },
    #[error("NO_WEIGHT: edge {edge} has no numeric `{attribute}` value")]
    NoWeight { edge: String, attribute: String },
    #[error("KIND_MISMATCH: object {0} is not a network node")]
    NotANode(String),
    #[error("NEGATIVE_RADIUS: {0}")]
    NegativeRadius(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::NoPosition(_) => "NO_POSITION",
            QueryError::NoExtent(_) => "NO_EXTENT",
            QueryError::NegativeWeight { .. } => "NEGATIVE_WEIGHT",
            QueryError::NoWeight { .. } => "NO_WEIGHT",
            QueryError::NotANode(_) => "KIND_MISMATCH",
            QueryError::NegativeRadius(_) => "NEGATIVE_RADIUS",
            QueryError::Kernel(e) => e.code(),
            QueryError::Geometry(e) => e.code(),
        }
    }
}

/// Box around `center` with positive `half_sizes`, in the owning object's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtentBox {
    pub center: Vec3,
    pub half_sizes: Vec3,
}

impl ExtentBox {
    pub fn check(&self) -> Result<(), String> {
        if self.center.iter().any(|v| !v.is_finite()) {
            return Err("non-finite extent center".into());
        }
        if self.half_sizes.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(format!("half sizes {:?} must be positive", self.half_sizes));
        }
        Ok(())
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [[0.0; 3]; 8];
        for (n, corner) in out.iter_mut().enumerate() {
            for axis in 0..3 {
                let sign = if n >> axis & 1 == 1 { 1.0 } else { -1.0 };
                corner[axis] = self.center[axis] + sign * self.half_sizes[axis];
            }
        }
        out
    }
}

/// World-frame axis-aligned box; a point is a box with `min == max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn point(p: Vec3) -> Self {
        Aabb { min: p, max: p }
    }

    pub fn enclosing(points: &[Vec3]) -> Self {
        let mut b = Aabb::point(points[0]);
        for p in &points[1..] {
            for axis in 0..3 {
                b.min[axis] = b.min[axis].min(p[axis]);
                b.max[axis] = b.max[axis].max(p[axis]);
            }
        }
        b
    }

    /// Euclidean length of the per-axis separation.
    pub fn gap(&self, other: &Aabb) -> f64 {
        let g: Vec3 = std::array::from_fn(|i| {
            (self.min[i] - other.max[i]).max(other.min[i] - self.max[i]).max(0.0)
        });
        norm(g)
    }

    /// Closed containment: touching the boundary counts as inside.
    pub fn within(&self, outer: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] >= outer.min[i] && self.max[i] <= outer.max[i])
    }
}

fn object_position(tree: &FrameTree, obj: &ObjectInstance) -> Result<Vec3, QueryError> {
    let c = obj.coordinate().ok_or_else(|| QueryError::NoPosition(obj.uuid.clone()))?;
    Ok(tree.resolve_position(c, WORLD)?)
}

/// World AABB of an object's extent, or its position as a degenerate box.
pub fn world_aabb(tree: &FrameTree, obj: &ObjectInstance) -> Result<Aabb, QueryError> {
    let (frame, local) = obj.local_pose().ok_or_else(|| QueryError::NoPosition(obj.uuid.clone()))?;
    let pose = compose(&tree.world_pose(frame)?, &local);
    Ok(match obj.extent() {
        Some(extent) => Aabb::enclosing(&extent.corners().map(|c| pose.apply(c))),
        None => Aabb::point(pose.translation),
    })
}

/// True when the two objects' world boxes are within `tolerance` meters of each other.
pub fn is_at(
    model: &ModelInstance,
    tree: &FrameTree,
    a: &str,
    b: &str,
    tolerance: f64,
) -> Result<bool, QueryError> {
    let box_a = world_aabb(tree, model.require(a)?)?;
    let box_b = world_aabb(tree, model.require(b)?)?;
    Ok(box_a.gap(&box_b) <= tolerance)
}

/// True when `a` (box or point) lies entirely inside `b`'s box.
pub fn is_in(model: &ModelInstance, tree: &FrameTree, a: &str, b: &str) -> Result<bool, QueryError> {
    let obj_a = model.require(a)?;
    let obj_b = model.require(b)?;
    if obj_b.extent().is_none() {
        return Err(QueryError::NoExtent(b.into()));
    }
    Ok(world_aabb(tree, obj_a)?.within(&world_aabb(tree, obj_b)?))
}

/// Distance between two objects' resolved positions.
pub fn object_distance(
    model: &ModelInstance,
    tree: &FrameTree,
    a: &str,
    b: &str,
) -> Result<f64, QueryError> {
    let pa = object_position(tree, model.require(a)?)?;
    let pb = object_position(tree, model.require(b)?)?;
    Ok(norm(sub3(pa, pb)))
}

/// Uuids of positioned objects within `r` meters of `center`, in uuid order.
/// Objects without a coordinate are skipped.
pub fn within_radius(
    model: &ModelInstance,
    tree: &FrameTree,
    center: &CoordinateValue,
    r: f64,
) -> Result<Vec<String>, QueryError> {
    if !(r >= 0.0) {
        return Err(QueryError::NegativeRadius(r));
    }
    let c = tree.resolve_position(center, WORLD)?;
    let mut out = Vec::new();
    for obj in model.objects() {
        if obj.coordinate().is_none() {
            continue;
        }
        if norm(sub3(object_position(tree, obj)?, c)) <= r {
            out.push(obj.uuid.clone());
        }
    }
    Ok(out)
}

/// How edge costs are obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeWeight {
    /// First numeric value of this edge attribute.
    Attribute(String),
    /// Distance between the two end nodes' positions.
    Euclidean,
}

impl EdgeWeight {
    pub fn parse(s: &str) -> Self {
        if s == "euclidean" {
            EdgeWeight::Euclidean
        } else {
            EdgeWeight::Attribute(s.into())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkPath {
    pub path: Vec<String>,
    pub length: f64,
}

// Path sums that differ by less than this (relative) are treated as ties.
const TIE_EPSILON: f64 = 1e-9;

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], start: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[start] = 0.0;
    let mut heap = BinaryHeap::from([Candidate(0.0, start)]);
    while let Some(Candidate(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Candidate(nd, v));
            }
        }
    }
    dist
}

/// Minimum-weight path between two node objects over undirected edge objects.
/// Among equally short paths the lexicographically smallest uuid sequence wins.
/// Returns `Ok(None)` when the nodes are not connected.
pub fn shortest_path(
    model: &ModelInstance,
    mm: &Metamodel,
    tree: &FrameTree,
    source: &str,
    target: &str,
    weight: &EdgeWeight,
) -> Result<Option<NetworkPath>, QueryError> {
    let kind_of = |o: &ObjectInstance| mm.object_type(&o.object_type).map(|t| t.kind);
    for end in [source, target] {
        if kind_of(model.require(end)?) != Some(ObjectKind::Node) {
            return Err(QueryError::NotANode(end.into()));
        }
    }

    // nodes indexed in uuid order, so index order is uuid order
    let nodes: Vec<&ObjectInstance> =
        model.objects().iter().filter(|o| kind_of(o) == Some(ObjectKind::Node)).collect();
    let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, o)| (o.uuid.as_str(), i)).collect();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
    for edge in model.objects().iter().filter(|o| kind_of(o) == Some(ObjectKind::Edge)) {
        let Some(ends) = &edge.endpoints else { continue };
        let (Some(a), Some(b)) = (ends.source.as_object(), ends.target.as_object()) else { continue };
        let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) else { continue };
        let w = match weight {
            EdgeWeight::Euclidean => norm(sub3(
                object_position(tree, nodes[ia])?,
                object_position(tree, nodes[ib])?,
            )),
            EdgeWeight::Attribute(attr) => match edge.first(attr) {
                Some(Value::Real(w)) => *w,
                Some(Value::Integer(w)) => *w as f64,
                _ => {
                    return Err(QueryError::NoWeight { edge: edge.uuid.clone(), attribute: attr.clone() })
                }
            },
        };
        if !(w >= 0.0) {
            return Err(QueryError::NegativeWeight { edge: edge.uuid.clone(), weight: w });
        }
        adj[ia].push((ib, w));
        adj[ib].push((ia, w));
    }
    for list in &mut adj {
        list.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    }

    let (s, t) = (index[source], index[target]);
    let from_s = dijkstra(&adj, s);
    if !from_s[t].is_finite() {
        return Ok(None);
    }
    let to_t = dijkstra(&adj, t);
    let best = from_s[t];
    let tol = TIE_EPSILON * best.max(1.0);

    // Walk tight edges in uuid order with backtracking; the first complete
    // simple path found is the lexicographically smallest shortest path.
    let mut path = vec![s];
    let mut on_path = vec![false; nodes.len()];
    on_path[s] = true;
    let found = extend(&adj, &to_t, best, tol, t, 0.0, &mut path, &mut on_path);
    debug_assert!(found.is_some());
    let length = found.unwrap_or(best);
    Ok(Some(NetworkPath {
        path: path.iter().map(|i| nodes[*i].uuid.clone()).collect(),
        length,
    }))
}

#[allow(clippy::too_many_arguments)]
fn extend(
    adj: &[Vec<(usize, f64)>],
    to_t: &[f64],
    best: f64,
    tol: f64,
    t: usize,
    so_far: f64,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
) -> Option<f64> {
    let u = *path.last().unwrap();
    if u == t {
        return Some(so_far);
    }
    for &(v, w) in &adj[u] {
        if on_path[v] || (so_far + w + to_t[v] - best).abs() > tol {
            continue;
        }
        path.push(v);
        on_path[v] = true;
        if let Some(len) = extend(adj, to_t, best, tol, t, so_far + w, path, on_path) {
            return Some(len);
        }
        on_path[v] = false;
        path.pop();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;
    use crate::kernel::{builtins, Card, Endpoints, ObjectType, RangeSpec};

    fn mm() -> Metamodel {
        let mut mm = Metamodel::new("mm");
        mm.add_model_type("m");
        mm.add_object_type("m", ObjectType::new("Thing", ObjectKind::Virtual)).unwrap();
        mm.add_object_type("m", ObjectType::new("Node", ObjectKind::Node)).unwrap();
        mm.add_object_type("m", ObjectType::new("Link", ObjectKind::Edge)).unwrap();
        mm.add_attribute("m", "cost", &["Link"], RangeSpec::data("real"), Card::OPTIONAL).unwrap();
        mm.attach_builtins();
        mm
    }

    fn placed(model: &mut ModelInstance, mm: &Metamodel, t: &str, p: Vec3) -> String {
        let u = model.create_object(mm, t, None).unwrap();
        model
            .set_value(mm, &u, builtins::COORD, vec![Value::Coordinate(CoordinateValue::world(p))])
            .unwrap();
        u
    }

    fn boxed(model: &mut ModelInstance, mm: &Metamodel, p: Vec3, half: Vec3) -> String {
        let u = placed(model, mm, "Thing", p);
        let e = ExtentBox { center: [0.0; 3], half_sizes: half };
        model.set_value(mm, &u, builtins::EXTENT, vec![Value::Extent(e)]).unwrap();
        u
    }

    #[test]
    fn is_at_points() {
        let mm = mm();
        let tree = FrameTree::new();
        let mut m = ModelInstance::new("x", "m");
        let a = placed(&mut m, &mm, "Thing", [0.0; 3]);
        let b = placed(&mut m, &mm, "Thing", [0.0; 3]);
        let c = placed(&mut m, &mm, "Thing", [1.0, 0.0, 0.0]);
        assert!(is_at(&m, &tree, &a, &b, 0.0).unwrap());
        assert!(!is_at(&m, &tree, &a, &c, 0.5).unwrap());
        assert!(is_at(&m, &tree, &a, &c, 1.0).unwrap());
        let d = m.create_object(&mm, "Thing", None).unwrap();
        assert_eq!(is_at(&m, &tree, &a, &d, 1.0).unwrap_err().code(), "NO_POSITION");
        assert_eq!(is_at(&m, &tree, &a, "nope", 1.0).unwrap_err().code(), "UNKNOWN_OBJECT");
    }

    #[test]
    fn is_in_boxes() {
        let mm = mm();
        let tree = FrameTree::new();
        let mut m = ModelInstance::new("x", "m");
        let room = boxed(&mut m, &mm, [0.0; 3], [2.0, 2.0, 2.0]);
        let center = placed(&mut m, &mm, "Thing", [0.0; 3]);
        let straddling = boxed(&mut m, &mm, [2.0, 0.0, 0.0], [0.5, 0.5, 0.5]);
        assert!(is_in(&m, &tree, &center, &room).unwrap());
        assert!(!is_in(&m, &tree, &straddling, &room).unwrap());
        assert!(is_in(&m, &tree, &room, &room).unwrap());
        assert_eq!(is_in(&m, &tree, &room, &center).unwrap_err().code(), "NO_EXTENT");
    }

    #[test]
    fn rotated_extent_is_enclosed() {
        let mm = mm();
        let tree = FrameTree::new();
        let mut m = ModelInstance::new("x", "m");
        let u = boxed(&mut m, &mm, [0.0; 3], [1.0, 1.0, 1.0]);
        let q = Quaternion::from_axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_4);
        m.set_value(&mm, &u, builtins::ROTATION, vec![Value::Rotation(q)]).unwrap();
        let b = world_aabb(&tree, m.get(&u).unwrap()).unwrap();
        assert!((b.max[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((b.max[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radius_search() {
        let mm = mm();
        let tree = FrameTree::new();
        let mut m = ModelInstance::new("x", "m");
        let origin = CoordinateValue::world([0.0; 3]);
        assert!(within_radius(&m, &tree, &origin, 1.0).unwrap().is_empty());
        let a = placed(&mut m, &mm, "Thing", [0.0; 3]);
        placed(&mut m, &mm, "Thing", [3.0, 0.0, 0.0]);
        m.create_object(&mm, "Thing", None).unwrap();
        assert_eq!(within_radius(&m, &tree, &origin, 0.0).unwrap(), vec![a]);
        assert_eq!(within_radius(&m, &tree, &origin, 3.0).unwrap().len(), 2);
        assert_eq!(within_radius(&m, &tree, &origin, -1.0).unwrap_err().code(), "NEGATIVE_RADIUS");
    }

    fn link(m: &mut ModelInstance, mm: &Metamodel, a: &str, b: &str, w: f64) -> String {
        let e = m.create_object(mm, "Link", Some(Endpoints::objects(a, b))).unwrap();
        m.set_value(mm, &e, "cost", vec![Value::Real(w)]).unwrap();
        e
    }

    #[test]
    fn single_edge_and_disconnected() {
        let mm = mm();
        let tree = FrameTree::new();
        let mut m = ModelInstance::new("x", "m");
        let a = placed(&mut m, &mm, "Node", [0.0; 3]);
        let b = placed(&mut m, &mm, "Node", [3.0, 4.0, 0.0]);
        let c = placed(&mut m, &mm, "Node", [9.0, 0.0, 0.0]);
        link(&mut m, &mm, &a, &b, 2.0);
        let cost = EdgeWeight::Attribute("cost".into());
        let p = shortest_path(&m, &mm, &tree, &a, &b, &cost).unwrap().unwrap();
        assert_eq!(p.path, vec![a.clone(), b.clone()]);
        assert_eq!(p.length, 2.0);
        let p = shortest_path(&m, &mm, &tree, &b, &a, &EdgeWeight::Euclidean).unwrap().unwrap();
        assert_eq!(p.length, 5.0);
        assert!(shortest_path(&m, &mm, &tree, &a, &c, &cost).unwrap().is_none());
    }

    #[test]
    fn negative_weight_rejected() {
        let mm = mm();
        let tree = FrameTree::new();
        let mut m = ModelInstance::new("x", "m");
        let a = placed(&mut m, &mm, "Node", [0.0; 3]);
        let b = placed(&mut m, &mm, "Node", [1.0, 0.0, 0.0]);
        link(&mut m, &mm, &a, &b, -1.0);
        let err = shortest_path(&m, &mm, &tree, &a, &b, &EdgeWeight::Attribute("cost".into())).unwrap_err();
        assert_eq!(err.code(), "NEGATIVE_WEIGHT");
    }

    #[test]
    fn ties_prefer_smaller_uuids() {
        let mm = mm();
        let tree = FrameTree::new();
        let mut m = ModelInstance::new("x", "m");
        let mut ids: Vec<String> = (0..4).map(|_| placed(&mut m, &mm, "Node", [0.0; 3])).collect();
        ids.sort();
        let (s, lo, hi, t) = (&ids[0], &ids[1], &ids[2], &ids[3]);
        for (a, b) in [(s, hi), (hi, t), (s, lo), (lo, t)] {
            link(&mut m, &mm, a, b, 1.0);
        }
        let p = shortest_path(&m, &mm, &tree, s, t, &EdgeWeight::Attribute("cost".into())).unwrap().unwrap();
        assert_eq!(p.path, vec![s.clone(), lo.clone(), t.clone()]);
    }
}
