use std::collections::HashSet;
use std::fmt;

use super::{EdgeKind, Layer, NodeId, SceneGraph, BUILDING_LABEL, ROOM_LABEL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    DuplicateId,
    UnknownEndpoint,
    BuildingCount,
    WrongLabel,
    UnknownClass,
    NonFiniteAttribute,
    BadContainment,
    BadTraversal,
    MissingCost,
    NegativeCost,
    NonFiniteCost,
    CostOnContains,
    MissingParent,
    MultipleParents,
    SelfLoop,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::DuplicateId => "duplicate id",
            Rule::UnknownEndpoint => "unknown endpoint",
            Rule::BuildingCount => "building count",
            Rule::WrongLabel => "wrong label",
            Rule::UnknownClass => "unknown class",
            Rule::NonFiniteAttribute => "non-finite attribute",
            Rule::BadContainment => "bad containment",
            Rule::BadTraversal => "bad traversal",
            Rule::MissingCost => "missing cost",
            Rule::NegativeCost => "negative cost",
            Rule::NonFiniteCost => "non-finite cost",
            Rule::CostOnContains => "cost on contains edge",
            Rule::MissingParent => "missing parent",
            Rule::MultipleParents => "multiple parents",
            Rule::SelfLoop => "self loop",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub subjects: Vec<NodeId>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.subjects.iter().map(NodeId::as_str).collect();
        write!(f, "{} [{}]", self.rule.describe(), ids.join(", "))?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: Rule, subjects: Vec<NodeId>, detail: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            subjects,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub(super) fn validate(g: &SceneGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let catalog = g.catalog();

    let mut seen = HashSet::new();
    let mut buildings = Vec::new();
    for n in g.nodes() {
        if !seen.insert(&n.id) {
            report.push(Rule::DuplicateId, vec![n.id.clone()], "");
        }
        match n.layer {
            Layer::Building => {
                buildings.push(n.id.clone());
                if n.class_label != BUILDING_LABEL {
                    report.push(Rule::WrongLabel, vec![n.id.clone()], format!("building labeled {:?}", n.class_label));
                }
            }
            Layer::Room => {
                if n.class_label != ROOM_LABEL {
                    report.push(Rule::WrongLabel, vec![n.id.clone()], format!("room labeled {:?}", n.class_label));
                }
            }
            Layer::Object | Layer::Blind => {
                if !catalog.contains(&n.class_label) {
                    report.push(Rule::UnknownClass, vec![n.id.clone()], format!("{:?} not in catalog", n.class_label));
                }
            }
        }
        for (k, v) in &n.attributes {
            if !v.is_finite() {
                report.push(Rule::NonFiniteAttribute, vec![n.id.clone()], format!("{k} = {v}"));
            }
        }
    }
    if buildings.len() != 1 {
        report.push(Rule::BuildingCount, buildings, "exactly one building required");
    }

    for e in g.edges() {
        let ends = vec![e.from.clone(), e.to.clone()];
        let (Some(from), Some(to)) = (g.node(&e.from), g.node(&e.to)) else {
            report.push(Rule::UnknownEndpoint, ends, "");
            continue;
        };
        if e.from == e.to {
            report.push(Rule::SelfLoop, ends, "");
            continue;
        }
        match e.kind {
            EdgeKind::Contains => {
                let ok = matches!(
                    (from.layer, to.layer),
                    (Layer::Building, Layer::Room) | (Layer::Room, Layer::Object) | (Layer::Room, Layer::Blind)
                );
                if !ok {
                    report.push(Rule::BadContainment, ends.clone(), format!("{:?} contains {:?}", from.layer, to.layer));
                }
                if e.cost.is_some() {
                    report.push(Rule::CostOnContains, ends, "");
                }
            }
            EdgeKind::Traversal => {
                let ok = matches!(
                    (from.layer, to.layer),
                    (Layer::Room, Layer::Room) | (Layer::Room, Layer::Building) | (Layer::Building, Layer::Room)
                );
                if !ok {
                    report.push(Rule::BadTraversal, ends.clone(), format!("{:?} to {:?}", from.layer, to.layer));
                }
                match e.cost {
                    None => report.push(Rule::MissingCost, ends, ""),
                    Some(c) if !c.is_finite() => report.push(Rule::NonFiniteCost, ends, format!("{c}")),
                    Some(c) if c < 0.0 => report.push(Rule::NegativeCost, ends, format!("{c}")),
                    Some(_) => {}
                }
            }
        }
    }

    for n in g.nodes() {
        let parents = g.parents(&n.id);
        match n.layer {
            Layer::Building => {
                if !parents.is_empty() {
                    report.push(Rule::BadContainment, vec![n.id.clone()], "building has a parent");
                }
            }
            Layer::Room | Layer::Object | Layer::Blind => match parents.len() {
                0 => report.push(Rule::MissingParent, vec![n.id.clone()], ""),
                1 => {}
                _ => {
                    let mut subjects = vec![n.id.clone()];
                    subjects.extend(parents.iter().cloned());
                    report.push(Rule::MultipleParents, subjects, "");
                }
            },
        }
    }
    report
}
