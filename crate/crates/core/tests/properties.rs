//! Property tests for invariants that hold across the engine.

use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;

use scm_core::document::{parse_model, round_significant};
use scm_core::kernel::{builtins, Card, DataKind, EndpointRef, Endpoints, Metamodel, ObjectType, RangeSpec};
use scm_core::{
    check_temporal_consistency, compose, create_anchor, invert, is_at, is_in, parse_document,
    serialize_document, validate_model, within_radius, CoordinateValue, Document, ExtentBox,
    FrameTree, ModelInstance, ObjectKind, Pose, Quaternion, Value, ViolationCode, WORLD,
};

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn metamodel() -> Metamodel {
    scm_core::document::parse_metamodel(&fixture("metamodel.scm.json")).unwrap()
}

fn rotation() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |q| q.iter().map(|v| v * v).sum::<f64>() > 0.01)
        .prop_map(|q| {
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            Quaternion::new(q[0] / n, q[1] / n, q[2] / n, q[3] / n).canonical()
        })
}

fn pose() -> impl Strategy<Value = Pose> {
    (rotation(), prop::array::uniform3(-20.0f64..20.0), 0.25f64..4.0)
        .prop_map(|(rotation, translation, scale)| Pose { rotation, translation, scale })
}

fn boxed() -> impl Strategy<Value = ([f64; 3], Option<Quaternion>, Option<([f64; 3], [f64; 3])>)> {
    (
        prop::array::uniform3(-5.0f64..5.0),
        prop::option::of(rotation()),
        prop::option::of((prop::array::uniform3(-1.0f64..1.0), prop::array::uniform3(0.05f64..3.0))),
    )
}

fn scene_metamodel() -> Metamodel {
    let mut mm = Metamodel::new("props");
    mm.add_model_type("m");
    mm.add_object_type("m", ObjectType::new("Thing", ObjectKind::Virtual)).unwrap();
    mm.attach_builtins();
    mm
}

fn place(
    model: &mut ModelInstance,
    mm: &Metamodel,
    (p, rot, ext): ([f64; 3], Option<Quaternion>, Option<([f64; 3], [f64; 3])>),
) -> String {
    let u = model.create_object(mm, "Thing", None).unwrap();
    model.set_value(mm, &u, builtins::COORD, vec![Value::Coordinate(CoordinateValue::world(p))]).unwrap();
    if let Some(q) = rot {
        model.set_value(mm, &u, builtins::ROTATION, vec![Value::Rotation(q)]).unwrap();
    }
    if let Some((center, half_sizes)) = ext {
        model.set_value(mm, &u, builtins::EXTENT, vec![Value::Extent(ExtentBox { center, half_sizes })]).unwrap();
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
        let left = compose(&compose(&a, &b), &c);
        let right = compose(&a, &compose(&b, &c));
        prop_assert!(left.approx_eq(&right, 1e-7));
    }

    #[test]
    fn inverse_undoes_apply(p in pose(), x in prop::array::uniform3(-50.0f64..50.0)) {
        let back = invert(&p).apply(p.apply(x));
        for i in 0..3 {
            prop_assert!((back[i] - x[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn subtype_is_reflexive_and_transitive(edges in prop::collection::vec((0usize..6, 0usize..6), 0..10)) {
        let mut mm = Metamodel::new("lattice");
        mm.add_model_type("m");
        let names: Vec<String> = (0..6).map(|i| format!("T{i}")).collect();
        for n in &names {
            mm.add_object_type("m", ObjectType::new(n, ObjectKind::Virtual)).unwrap();
        }
        // only downward edges, so the hierarchy stays acyclic
        for (a, b) in edges {
            if a > b {
                mm.add_inheritance(&names[a], &names[b]);
            }
        }
        for a in &names {
            prop_assert!(mm.subtype_of(a, a).unwrap());
            for b in &names {
                for c in &names {
                    if mm.subtype_of(a, b).unwrap() && mm.subtype_of(b, c).unwrap() {
                        prop_assert!(mm.subtype_of(a, c).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn is_at_is_symmetric_and_implied_by_is_in(a in boxed(), b in boxed(), tol in 0.0f64..2.0) {
        let mm = scene_metamodel();
        let tree = FrameTree::new();
        let mut model = ModelInstance::new("m", "m");
        let ua = place(&mut model, &mm, a);
        let ub = place(&mut model, &mm, b);
        let ab = is_at(&model, &tree, &ua, &ub, tol).unwrap();
        prop_assert_eq!(ab, is_at(&model, &tree, &ub, &ua, tol).unwrap());
        if let Ok(true) = is_in(&model, &tree, &ua, &ub) {
            prop_assert!(is_at(&model, &tree, &ua, &ub, 0.0).unwrap());
        }
    }

    #[test]
    fn within_radius_grows_with_radius(
        points in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..25),
        center in prop::array::uniform3(-5.0f64..5.0),
        r1 in 0.0f64..20.0,
        extra in 0.0f64..20.0,
    ) {
        let mm = scene_metamodel();
        let tree = FrameTree::new();
        let mut model = ModelInstance::new("m", "m");
        for p in points {
            place(&mut model, &mm, (p, None, None));
        }
        let c = CoordinateValue::world(center);
        let small: BTreeSet<String> = within_radius(&model, &tree, &c, r1).unwrap().into_iter().collect();
        let large: BTreeSet<String> = within_radius(&model, &tree, &c, r1 + extra).unwrap().into_iter().collect();
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn participation_does_not_affect_temporal_report(
        starts in prop::collection::vec((0i64..50, 0i64..20), 2..5),
        rels in prop::collection::vec((0usize..5, 0usize..5, 0usize..13), 0..6),
        roles in prop::collection::vec(0usize..5, 0..4),
    ) {
        let mm = metamodel();
        let mut model = ModelInstance::new("t", "process");
        let events: Vec<String> = starts
            .iter()
            .map(|(s, d)| {
                let e = model.create_object(&mm, "Operation", None).unwrap();
                model.set_value(&mm, &e, builtins::START, vec![Value::Timestamp(*s)]).unwrap();
                model.set_value(&mm, &e, builtins::DURATION, vec![Value::Duration(*d)]).unwrap();
                e
            })
            .collect();
        for (s, t, r) in rels {
            let (s, t) = (&events[s % events.len()], &events[t % events.len()]);
            let rel = model.create_object(&mm, "Precedes", Some(Endpoints::objects(s, t))).unwrap();
            model.set_value(&mm, &rel, builtins::RELATION, vec![Value::Text(builtins::ALLEN_RELATIONS[r].into())]).unwrap();
        }
        let before = check_temporal_consistency(&model, &mm).unwrap();
        let step = model.create_object(&mm, "Step", None).unwrap();
        for e in roles {
            let p = model.create_object(&mm, "Involves", Some(Endpoints::objects(&events[e % events.len()], &step))).unwrap();
            model.set_value(&mm, &p, builtins::ROLE, vec![Value::Text("target".into())]).unwrap();
        }
        prop_assert_eq!(before, check_temporal_consistency(&model, &mm).unwrap());
    }

    #[test]
    fn text_and_numbers_roundtrip(name in "\\PC{0,24}", lod in any::<i64>(), x in -1e9f64..1e9) {
        let mm = metamodel();
        let mut model = ModelInstance::new("r", "process");
        let s = model.create_object(&mm, "Step", None).unwrap();
        model.set_value(&mm, &s, "name", vec![Value::Text(name)]).unwrap();
        model.set_value(&mm, &s, builtins::LOD, vec![Value::Integer(lod)]).unwrap();
        let x = round_significant(x);
        model.set_value(&mm, &s, builtins::COORD, vec![Value::Coordinate(CoordinateValue::world([x, 0.0, -x]))]).unwrap();
        let doc = Document::Model(model);
        let text = serialize_document(&doc);
        prop_assert_eq!(parse_document(&text).unwrap(), doc);
    }

    #[test]
    fn rounding_is_idempotent(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let once = round_significant(x);
        prop_assert_eq!(round_significant(once), once);
    }

    #[test]
    fn created_anchors_are_valid(picks in prop::collection::vec((0usize..3, 0usize..3, prop::option::of(0i64..9)), 1..6)) {
        let mm = metamodel();
        let mut model = parse_model(&fixture("level1.scm.json")).unwrap();
        let steps: Vec<String> = model.objects().iter().filter(|o| o.object_type == "Step").map(|o| o.uuid.clone()).collect();
        let switches: Vec<String> = (0..3)
            .map(|i| {
                let u = model.create_object(&mm, "Switch", None).unwrap();
                let at = CoordinateValue::new("machine_1", [i as f64, 0.0, 0.0]);
                model.set_value(&mm, &u, builtins::COORD, vec![Value::Coordinate(at)]).unwrap();
                u
            })
            .collect();
        for (s, t, level) in picks {
            let cond = level.map(|l| format!("step >= {l}"));
            create_anchor(
                &mut model,
                &mm,
                EndpointRef::object(&steps[s % steps.len()]),
                EndpointRef::object(&switches[t]),
                Pose::from_translation([0.0, 0.0, 0.1]),
                cond.as_deref(),
            )
            .unwrap();
        }
        prop_assert_eq!(validate_model(&model, &mm).unwrap(), vec![]);
        // a virtual target is refused rather than producing an invalid model
        let err = create_anchor(&mut model, &mm, EndpointRef::object(&steps[0]), EndpointRef::object(&steps[0]), Pose::IDENTITY, None);
        prop_assert!(err.is_err());
    }
}

#[test]
fn required_attribute_on_new_type_is_reported_missing() {
    let mut mm = scene_metamodel();
    mm.add_data_type("m", "serial_number", DataKind::Text).unwrap();
    mm.add_attribute("m", "serial", &["Thing"], RangeSpec::data("serial_number"), Card::REQUIRED).unwrap();
    let mut model = ModelInstance::new("m", "m");
    model.create_object(&mm, "Thing", None).unwrap();
    let codes: Vec<ViolationCode> = validate_model(&model, &mm).unwrap().into_iter().map(|v| v.code).collect();
    assert_eq!(codes, vec![ViolationCode::MissingValue]);
    assert_eq!(WORLD, "world");
}
