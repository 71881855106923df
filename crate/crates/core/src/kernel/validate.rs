use std::collections::{BTreeMap, BTreeSet};

use super::builtins;
use super::metamodel::{DataKind, EndpointKind, Metamodel, ObjectKind, RangeSpec};
use super::model::{EndpointRef, ModelInstance};
use super::{KernelError, Violation, ViolationCode as Code};
use crate::expr::Condition;

/// Check every structural rule of a metamodel. An empty result means it is well formed.
pub fn validate_metamodel(mm: &Metamodel) -> Vec<Violation> {
    let mut out = Vec::new();
    check_ids(mm, &mut out);
    check_inheritance(mm, &mut out);
    check_attributes(mm, &mut out);
    check_kinds(mm, &mut out);
    check_builtins(mm, &mut out);
    out.sort();
    out.dedup();
    out
}

fn check_ids(mm: &Metamodel, out: &mut Vec<Violation>) {
    let mut model_types = BTreeSet::new();
    let mut object_types = BTreeSet::new();
    let mut attributes = BTreeMap::new();
    let mut data_types = BTreeMap::new();
    for mt in &mm.model_types {
        if !model_types.insert(&mt.id) {
            out.push(Violation::new(Code::DuplicateId, format!("model_type:{}", mt.id), "model type declared twice"));
        }
        for ot in &mt.object_types {
            if !object_types.insert(&ot.id) {
                out.push(Violation::new(
                    Code::DuplicateId,
                    format!("object_type:{}", ot.id),
                    "object type declared in more than one place",
                ));
            }
        }
        // builtins are shared by every model type and may repeat if identical
        for a in &mt.attributes {
            if let Some(prev) = attributes.insert(&a.id, a) {
                if !(a.builtin && prev == a) {
                    out.push(Violation::new(Code::DuplicateId, format!("attribute:{}", a.id), "attribute declared twice"));
                }
            }
        }
        for d in &mt.data_types {
            if let Some(prev) = data_types.insert(&d.id, d) {
                if !(d.builtin && prev == d) {
                    out.push(Violation::new(Code::DuplicateId, format!("data_type:{}", d.id), "data type declared twice"));
                }
            }
            if let DataKind::Enumeration(values) = &d.kind {
                let distinct: BTreeSet<_> = values.iter().collect();
                if values.is_empty() || distinct.len() != values.len() {
                    out.push(Violation::new(
                        Code::BadDataType,
                        format!("data_type:{}", d.id),
                        "enumeration needs at least one value and no repeats",
                    ));
                }
            }
        }
    }
}

fn check_inheritance(mm: &Metamodel, out: &mut Vec<Violation>) {
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (sub, sup) in &mm.inheritance {
        for t in [sub, sup] {
            if mm.object_type(t).is_none() {
                out.push(Violation::new(
                    Code::DanglingInheritance,
                    format!("inheritance:{sub}<{sup}"),
                    format!("unknown object type `{t}`"),
                ));
            }
        }
        if sub != sup {
            edges.entry(sub).or_default().insert(sup);
        }
    }
    // reachability sets; the graphs here are small
    let reach = |start: &str| -> BTreeSet<&str> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for next in edges.get(n).into_iter().flatten() {
                if seen.insert(*next) {
                    stack.push(next);
                }
            }
        }
        seen
    };
    let nodes: BTreeSet<&str> = edges.keys().copied().collect();
    let reachable: BTreeMap<&str, BTreeSet<&str>> = nodes.iter().map(|n| (*n, reach(n))).collect();
    let mut reported = BTreeSet::new();
    for n in &nodes {
        if !reachable[n].contains(n) || reported.contains(n) {
            continue;
        }
        let component: BTreeSet<&str> = nodes
            .iter()
            .filter(|m| reachable[n].contains(*m) && reachable[*m].contains(n))
            .copied()
            .collect();
        reported.extend(component.iter().copied());
        let members: Vec<&str> = component.into_iter().collect();
        out.push(Violation::new(
            Code::InheritanceCycle,
            format!("inheritance:{}", members.join(",")),
            "inheritance is not antisymmetric",
        ));
    }
}

fn check_attributes(mm: &Metamodel, out: &mut Vec<Violation>) {
    let declared: BTreeSet<&str> = mm
        .model_types
        .iter()
        .flat_map(|m| m.attributes.iter().map(|a| a.id.as_str()))
        .collect();
    for attr in &declared {
        let loc = format!("attribute:{attr}");
        let missing: Vec<&str> = [
            ("domain", mm.domain_map.contains_key(*attr)),
            ("range", mm.range_map.contains_key(*attr)),
            ("card", mm.card_map.contains_key(*attr)),
        ]
        .iter()
        .filter(|(_, present)| !present)
        .map(|(name, _)| *name)
        .collect();
        if !missing.is_empty() {
            out.push(Violation::new(Code::IncompleteAttribute, loc, format!("no {} entry", missing.join("/"))));
        }
    }
    for (attr, domain) in &mm.domain_map {
        let loc = format!("attribute:{attr}");
        if !declared.contains(attr.as_str()) {
            out.push(Violation::new(Code::DanglingDomain, loc.clone(), "domain entry for an undeclared attribute"));
        }
        for t in domain {
            if mm.object_type(t).is_none() {
                out.push(Violation::new(Code::DanglingDomain, loc.clone(), format!("unknown object type `{t}`")));
            }
        }
    }
    for (attr, range) in &mm.range_map {
        let loc = format!("attribute:{attr}");
        if !declared.contains(attr.as_str()) {
            out.push(Violation::new(Code::DanglingRange, loc.clone(), "range entry for an undeclared attribute"));
        }
        let resolves = match range {
            RangeSpec::DataType(id) => mm.data_type(id).is_some(),
            RangeSpec::ObjectType(id) => mm.object_type(id).is_some(),
            RangeSpec::ModelType(id) => mm.model_type(id).is_some(),
        };
        if !resolves {
            out.push(Violation::new(Code::DanglingRange, loc, format!("range {range:?} does not resolve")));
        }
    }
    for (attr, card) in &mm.card_map {
        let loc = format!("attribute:{attr}");
        if !declared.contains(attr.as_str()) {
            out.push(Violation::new(Code::IncompleteAttribute, loc.clone(), "card entry for an undeclared attribute"));
        }
        if card.max.is_some_and(|max| card.min > max) {
            out.push(Violation::new(Code::BadCard, loc, format!("min {} exceeds max {:?}", card.min, card.max)));
        }
    }
}

fn check_kinds(mm: &Metamodel, out: &mut Vec<Violation>) {
    for (_, ot) in mm.object_types() {
        let loc = format!("object_type:{}", ot.id);
        match (&ot.endpoint_spec, ot.kind.is_relational()) {
            (None, true) => out.push(Violation::new(
                Code::KindConflict,
                loc.clone(),
                format!("{} types need an endpoint spec", ot.kind.as_str()),
            )),
            (Some(_), false) => out.push(Violation::new(
                Code::KindConflict,
                loc.clone(),
                format!("{} types cannot have endpoints", ot.kind.as_str()),
            )),
            _ => {}
        }
        let Some(spec) = &ot.endpoint_spec else { continue };
        let allowed = |e: &EndpointKind, as_source: bool| -> bool {
            match ot.kind {
                ObjectKind::Anchor if as_source => match e {
                    EndpointKind::Model => true,
                    EndpointKind::Object(k) => k.is_virtual(),
                    EndpointKind::Poi => false,
                },
                ObjectKind::Anchor => matches!(e, EndpointKind::Poi | EndpointKind::Object(ObjectKind::Real)),
                ObjectKind::TemporalRelation => *e == EndpointKind::Object(ObjectKind::Event),
                ObjectKind::Participation if as_source => *e == EndpointKind::Object(ObjectKind::Event),
                _ => matches!(e, EndpointKind::Object(_)),
            }
        };
        for (set, as_source) in [(&spec.sources, true), (&spec.targets, false)] {
            if set.is_empty() {
                out.push(Violation::new(Code::KindConflict, loc.clone(), "empty endpoint set"));
            }
            for e in set {
                if !allowed(e, as_source) {
                    out.push(Violation::new(
                        Code::KindConflict,
                        loc.clone(),
                        format!(
                            "{} types cannot have `{e}` as {}",
                            ot.kind.as_str(),
                            if as_source { "source" } else { "target" }
                        ),
                    ));
                }
            }
        }
    }
    for (sub, sup) in &mm.inheritance {
        if let (Some(a), Some(b)) = (mm.object_type(sub), mm.object_type(sup)) {
            if a.kind != b.kind {
                out.push(Violation::new(
                    Code::KindConflict,
                    format!("inheritance:{sub}<{sup}"),
                    format!("a {} type cannot specialize a {} type", a.kind.as_str(), b.kind.as_str()),
                ));
            }
        }
    }
    for def in builtins::ATTRIBUTES {
        let builtins::Attachment::Kind(kind) = def.attach else { continue };
        for t in mm.domain_map.get(def.id).into_iter().flatten() {
            if mm.object_type(t).is_some_and(|o| o.kind != kind) {
                out.push(Violation::new(
                    Code::KindConflict,
                    format!("attribute:{}", def.id),
                    format!("only {} types may carry it, `{t}` is not one", kind.as_str()),
                ));
            }
        }
    }
}

fn check_builtins(mm: &Metamodel, out: &mut Vec<Violation>) {
    for mt in &mm.model_types {
        for def in builtins::ATTRIBUTES {
            if !mt.attributes.iter().any(|a| a.id == def.id && a.builtin) {
                out.push(Violation::new(
                    Code::MissingBuiltin,
                    format!("model_type:{}", mt.id),
                    format!("builtin attribute `{}` is not declared", def.id),
                ));
            }
        }
        for (id, kind) in builtins::DATA_TYPES {
            if !mt.data_types.iter().any(|d| d.id == *id && d.builtin && d.kind == kind()) {
                out.push(Violation::new(
                    Code::MissingBuiltin,
                    format!("model_type:{}", mt.id),
                    format!("builtin data type `{id}` is missing"),
                ));
            }
        }
    }
    for def in builtins::ATTRIBUTES {
        let loc = format!("attribute:{}", def.id);
        if let Some(range) = mm.range_map.get(def.id) {
            if *range != RangeSpec::data(def.data_type) {
                out.push(Violation::new(Code::MissingBuiltin, loc.clone(), "builtin range was changed"));
            }
        }
        if let Some(card) = mm.card_map.get(def.id) {
            if *card != def.card {
                out.push(Violation::new(Code::MissingBuiltin, loc.clone(), "builtin cardinality was changed"));
            }
        }
        let domain = mm.domain_map.get(def.id);
        for (_, ot) in mm.object_types() {
            if def.applies_to(ot.kind) && !domain.is_some_and(|d| d.contains(&ot.id)) {
                out.push(Violation::new(
                    Code::MissingBuiltin,
                    loc.clone(),
                    format!("object type `{}` lacks it", ot.id),
                ));
            }
        }
    }
}

/// Check a model instance against a well-formed metamodel.
pub fn validate_model(model: &ModelInstance, mm: &Metamodel) -> Result<Vec<Violation>, KernelError> {
    let mm_violations = validate_metamodel(mm);
    if !mm_violations.is_empty() {
        return Err(KernelError::InvalidMetamodel(mm_violations));
    }
    let mut out = Vec::new();
    if mm.model_type(&model.model_type).is_none() {
        out.push(Violation::new(
            Code::UnknownModelType,
            format!("model:{}", model.id),
            format!("unknown model type `{}`", model.model_type),
        ));
        return Ok(out);
    }

    let mut seen = BTreeSet::new();
    for obj in model.objects() {
        if !seen.insert(obj.uuid.as_str()) {
            out.push(Violation::new(Code::DuplicateUuid, format!("object:{}", obj.uuid), "uuid used more than once"));
        }
    }

    for obj in model.objects() {
        let loc = format!("object:{}", obj.uuid);
        let Some(ot) = mm.object_type(&obj.object_type) else {
            out.push(Violation::new(Code::UnknownType, loc, format!("unknown object type `{}`", obj.object_type)));
            continue;
        };
        if !mm.type_in_model_type(&ot.id, &model.model_type).unwrap_or(false) {
            out.push(Violation::new(
                Code::WrongModelType,
                loc.clone(),
                format!("`{}` is not part of model type `{}`", ot.id, model.model_type),
            ));
        }
        let effective = mm.effective_attributes(&ot.id).unwrap_or_default();

        for (attr, values) in &obj.values {
            let attr_loc = format!("{loc}/attr:{attr}");
            if !effective.contains(attr) {
                out.push(Violation::new(Code::UnknownAttribute, attr_loc, format!("not an attribute of `{}`", ot.id)));
                continue;
            }
            let Some(range) = mm.range_map.get(attr) else { continue };
            for value in values {
                if let Err(msg) = model.check_value_against_range(mm, range, value, true) {
                    let code = if msg.starts_with("dangling") { Code::DanglingReference } else { Code::RangeTypeMismatch };
                    out.push(Violation::new(code, attr_loc.clone(), msg));
                }
            }
        }

        for attr in &effective {
            let Some(card) = mm.card_map.get(attr) else { continue };
            let n = obj.values.get(attr).map_or(0, |v| v.len()) as u64;
            if !card.admits(n) {
                let code = if n == 0 { Code::MissingValue } else { Code::CardViolation };
                out.push(Violation::new(
                    code,
                    format!("{loc}/attr:{attr}"),
                    format!("{n} value(s), cardinality is {}..{}", card.min, card.max.map_or("*".into(), |m| m.to_string())),
                ));
            }
        }

        if let Some(values) = obj.values.get(builtins::UUID) {
            if values.len() == 1 && obj.text(builtins::UUID) != Some(obj.uuid.as_str()) {
                out.push(Violation::new(Code::UuidMismatch, format!("{loc}/attr:uuid"), "uuid attribute differs from the object uuid"));
            }
        }

        if ot.kind == ObjectKind::Anchor {
            if let Some(src) = obj.text(builtins::CONDITION) {
                if let Err(e) = Condition::parse(src) {
                    out.push(Violation::new(Code::BadCondition, format!("{loc}/attr:condition"), e.to_string()));
                }
            }
        }

        match (&obj.endpoints, &ot.endpoint_spec) {
            (None, Some(_)) => {
                out.push(Violation::new(Code::MissingEndpoint, loc, "relational object without endpoints"));
            }
            (Some(_), None) => {
                out.push(Violation::new(Code::EndpointKind, loc, format!("`{}` objects take no endpoints", ot.id)));
            }
            (Some(ends), Some(spec)) => {
                for (end, allowed, side) in [(&ends.source, &spec.sources, "source"), (&ends.target, &spec.targets, "target")] {
                    let end_loc = format!("{loc}/{side}");
                    let kind = match end {
                        EndpointRef::Model => Some(EndpointKind::Model),
                        EndpointRef::Poi(poi) => {
                            if let Err(e) = poi.pose.check() {
                                out.push(Violation::new(Code::RangeTypeMismatch, end_loc.clone(), e.to_string()));
                            }
                            Some(EndpointKind::Poi)
                        }
                        EndpointRef::Object(uuid) => match model.get(uuid) {
                            None => {
                                out.push(Violation::new(Code::DanglingReference, end_loc.clone(), format!("no object {uuid}")));
                                None
                            }
                            Some(o) => mm.object_type(&o.object_type).map(|t| EndpointKind::Object(t.kind)),
                        },
                    };
                    if let Some(kind) = kind {
                        if !allowed.contains(&kind) {
                            out.push(Violation::new(
                                Code::EndpointKind,
                                end_loc,
                                format!("`{kind}` is not a permitted {side} of `{}`", ot.id),
                            ));
                        }
                    }
                }
            }
            (None, None) => {}
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Card, EndpointSpec, Endpoints, ObjectType, Value};

    fn base() -> Metamodel {
        let mut mm = Metamodel::new("mm");
        mm.add_model_type("m");
        mm.add_object_type("m", ObjectType::new("Step", ObjectKind::Virtual)).unwrap();
        mm.add_object_type("m", ObjectType::new("Switch", ObjectKind::Real)).unwrap();
        mm.add_object_type("m", ObjectType::new("Anchor", ObjectKind::Anchor)).unwrap();
        mm.add_attribute("m", "label", &["Step"], RangeSpec::data("text"), Card::REQUIRED).unwrap();
        mm.add_attribute("m", "tags", &["Step"], RangeSpec::data("text"), Card::new(0, Some(2))).unwrap();
        mm.attach_builtins();
        mm
    }

    fn codes(v: &[Violation]) -> Vec<Code> {
        v.iter().map(|v| v.code).collect()
    }

    #[test]
    fn minimal_metamodel_is_clean() {
        let mut mm = Metamodel::new("mm");
        mm.add_model_type("m");
        mm.add_object_type("m", ObjectType::new("Thing", ObjectKind::Virtual)).unwrap();
        mm.attach_builtins();
        assert_eq!(validate_metamodel(&mm), vec![]);
        assert_eq!(validate_metamodel(&base()), vec![]);
    }

    #[test]
    fn two_type_cycle() {
        let mut mm = base();
        mm.add_object_type("m", ObjectType::new("Other", ObjectKind::Virtual)).unwrap();
        mm.attach_builtins();
        mm.add_inheritance("Step", "Other").add_inheritance("Other", "Step");
        assert_eq!(codes(&validate_metamodel(&mm)), vec![Code::InheritanceCycle]);
    }

    #[test]
    fn reflexive_pair_is_not_a_cycle() {
        let mut mm = base();
        mm.add_inheritance("Step", "Step");
        assert_eq!(validate_metamodel(&mm), vec![]);
    }

    #[test]
    fn dangling_domain() {
        let mut mm = base();
        mm.domain_map.get_mut("label").unwrap().insert("Ghost".into());
        assert_eq!(codes(&validate_metamodel(&mm)), vec![Code::DanglingDomain]);
    }

    #[test]
    fn missing_builtin_after_new_type() {
        let mut mm = base();
        mm.add_object_type("m", ObjectType::new("Late", ObjectKind::Virtual)).unwrap();
        let v = validate_metamodel(&mm);
        assert!(!v.is_empty());
        assert!(v.iter().all(|v| v.code == Code::MissingBuiltin));
    }

    #[test]
    fn anchor_with_real_source_is_a_kind_conflict() {
        let mut mm = base();
        let mut bad = ObjectType::new("BadAnchor", ObjectKind::Anchor);
        bad.endpoint_spec = Some(EndpointSpec::between(ObjectKind::Real, ObjectKind::Real));
        mm.add_object_type("m", bad).unwrap();
        mm.attach_builtins();
        assert_eq!(codes(&validate_metamodel(&mm)), vec![Code::KindConflict]);
    }

    fn step(model: &mut ModelInstance, mm: &Metamodel) -> String {
        let s = model.create_object(mm, "Step", None).unwrap();
        model.set_value(mm, &s, "label", vec![Value::Text("turn".into())]).unwrap();
        s
    }

    #[test]
    fn card_lower_and_upper_bounds() {
        let mm = base();
        let mut model = ModelInstance::new("x", "m");
        let s = model.create_object(&mm, "Step", None).unwrap();
        assert_eq!(codes(&validate_model(&model, &mm).unwrap()), vec![Code::MissingValue]);
        model.set_value(&mm, &s, "label", vec![Value::Text("a".into())]).unwrap();
        assert_eq!(validate_model(&model, &mm).unwrap(), vec![]);
        let three = vec![Value::Text("a".into()); 3];
        model.set_value(&mm, &s, "tags", three).unwrap();
        let v = validate_model(&model, &mm).unwrap();
        assert_eq!(codes(&v), vec![Code::CardViolation]);
        assert!(v[0].location.ends_with("attr:tags"));
    }

    #[test]
    fn anchor_targeting_virtual_object() {
        let mm = base();
        let mut model = ModelInstance::new("x", "m");
        let a = step(&mut model, &mm);
        let b = step(&mut model, &mm);
        model.create_object(&mm, "Anchor", Some(Endpoints::objects(&a, &b))).unwrap();
        assert_eq!(codes(&validate_model(&model, &mm).unwrap()), vec![Code::EndpointKind]);
    }

    #[test]
    fn deleting_a_target_leaves_a_dangling_reference() {
        let mm = base();
        let mut model = ModelInstance::new("x", "m");
        let a = step(&mut model, &mm);
        let sw = model.create_object(&mm, "Switch", None).unwrap();
        model.create_object(&mm, "Anchor", Some(Endpoints::objects(&a, &sw))).unwrap();
        assert_eq!(validate_model(&model, &mm).unwrap(), vec![]);
        model.delete_object(&sw).unwrap();
        assert_eq!(codes(&validate_model(&model, &mm).unwrap()), vec![Code::DanglingReference]);
    }

    #[test]
    fn invalid_metamodel_is_an_error() {
        let mut mm = base();
        mm.card_map.insert("label".into(), Card::new(3, Some(1)));
        let err = validate_model(&ModelInstance::new("x", "m"), &mm).unwrap_err();
        assert_eq!(err.code(), "INVALID_METAMODEL");
    }
}
