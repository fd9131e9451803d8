//! Conflict graphs: conflict points, arcs between them and the movements that traverse them.

mod geometry;
pub mod scenarios;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scenarios::{build_scenario, GeometryParams, ScenarioKind};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown scenario kind `{0}`")]
    UnknownScenario(String),
    #[error("geometry length `{name}` must be positive, got {value}")]
    NonPositiveLength { name: &'static str, value: f64 },
    #[error("unknown movement `{0}`")]
    UnknownMovement(String),
    #[error("node `{node}` is not on movement `{movement}`")]
    NodeNotOnMovement { movement: String, node: String },
    #[error("movement `{movement}` has no arc from `{from}` to `{to}`")]
    MissingArc {
        movement: String,
        from: String,
        to: String,
    },
    #[error("graph is invalid: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovementKind {
    Through,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    #[default]
    Crossing,
    Merge,
    Diverge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictPoint {
    pub id: String,
    #[serde(default)]
    pub kind: ConflictKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: String,
    pub to: String,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Movement {
    pub id: String,
    pub nodes: Vec<String>,
    pub kind: MovementKind,
    /// Index into a scenario's base demand vector.
    #[serde(default)]
    pub demand_class: usize,
}

/// Signal-control metadata: which conflict points belong to one intersection
/// and how a fixed-time controller groups its movements into phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub id: String,
    pub nodes: Vec<String>,
    pub phases: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictGraph {
    pub nodes: Vec<ConflictPoint>,
    pub arcs: Vec<Arc>,
    pub movements: Vec<Movement>,
    #[serde(default)]
    pub intersections: Vec<Intersection>,
}

/// The two movements meeting at a node, `first` preceding `second` lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePair {
    pub node: String,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphIssue {
    DuplicateNode(String),
    DuplicateMovement(String),
    NonPositiveArc { from: String, to: String, length_m: f64 },
    ArcUnknownNode { from: String, to: String },
    EmptyMovement(String),
    UnknownNode { movement: String, node: String },
    RepeatedNode { movement: String, node: String },
    BrokenPath { movement: String, from: String, to: String },
    NodeMovementCount { node: String, count: usize },
    SharedConflictPoints { first: String, second: String, nodes: Vec<String> },
    PhaseUnknownMovement { intersection: String, movement: String },
    PhaseConflict { intersection: String, node: String, first: String, second: String },
}

impl fmt::Display for GraphIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use GraphIssue::*;
        match self {
            DuplicateNode(n) => write!(f, "node `{n}` declared twice"),
            DuplicateMovement(p) => write!(f, "movement `{p}` declared twice"),
            NonPositiveArc { from, to, length_m } => {
                write!(f, "arc {from}->{to} has non-positive length {length_m}")
            }
            ArcUnknownNode { from, to } => write!(f, "arc {from}->{to} references an unknown node"),
            EmptyMovement(p) => write!(f, "movement `{p}` has no nodes"),
            UnknownNode { movement, node } => {
                write!(f, "movement `{movement}` visits unknown node `{node}`")
            }
            RepeatedNode { movement, node } => {
                write!(f, "movement `{movement}` visits `{node}` more than once")
            }
            BrokenPath { movement, from, to } => {
                write!(f, "broken path: movement `{movement}` has no arc {from}->{to}")
            }
            NodeMovementCount { node, count } => {
                write!(f, "node `{node}` is traversed by {count} movements, expected |P_n| = 2")
            }
            SharedConflictPoints { first, second, nodes } => write!(
                f,
                "movements `{first}` and `{second}` share {} conflict points ({})",
                nodes.len(),
                nodes.join(", ")
            ),
            PhaseUnknownMovement { intersection, movement } => {
                write!(f, "intersection `{intersection}` phases name unknown movement `{movement}`")
            }
            PhaseConflict { intersection, node, first, second } => write!(
                f,
                "intersection `{intersection}`: `{first}` and `{second}` share a phase but conflict at `{node}`"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<GraphIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "no issues");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn validate_graph(g: &ConflictGraph) -> ValidationReport {
    let mut issues = Vec::new();
    let mut node_ids = BTreeSet::new();
    for n in &g.nodes {
        if !node_ids.insert(n.id.as_str()) {
            issues.push(GraphIssue::DuplicateNode(n.id.clone()));
        }
    }
    let mut movement_ids = BTreeSet::new();
    for p in &g.movements {
        if !movement_ids.insert(p.id.as_str()) {
            issues.push(GraphIssue::DuplicateMovement(p.id.clone()));
        }
    }
    for a in &g.arcs {
        if !(a.length_m > 0.0 && a.length_m.is_finite()) {
            issues.push(GraphIssue::NonPositiveArc {
                from: a.from.clone(),
                to: a.to.clone(),
                length_m: a.length_m,
            });
        }
        if !node_ids.contains(a.from.as_str()) || !node_ids.contains(a.to.as_str()) {
            issues.push(GraphIssue::ArcUnknownNode {
                from: a.from.clone(),
                to: a.to.clone(),
            });
        }
    }

    let mut users: BTreeMap<&str, Vec<&str>> = node_ids.iter().map(|n| (*n, Vec::new())).collect();
    for p in &g.movements {
        if p.nodes.is_empty() {
            issues.push(GraphIssue::EmptyMovement(p.id.clone()));
            continue;
        }
        let mut seen = BTreeSet::new();
        for n in &p.nodes {
            if !node_ids.contains(n.as_str()) {
                issues.push(GraphIssue::UnknownNode {
                    movement: p.id.clone(),
                    node: n.clone(),
                });
            }
            if !seen.insert(n.as_str()) {
                issues.push(GraphIssue::RepeatedNode {
                    movement: p.id.clone(),
                    node: n.clone(),
                });
            } else if let Some(list) = users.get_mut(n.as_str()) {
                list.push(p.id.as_str());
            }
        }
        for w in p.nodes.windows(2) {
            if g.arc_length(&w[0], &w[1]).is_none() {
                issues.push(GraphIssue::BrokenPath {
                    movement: p.id.clone(),
                    from: w[0].clone(),
                    to: w[1].clone(),
                });
            }
        }
    }
    for (node, list) in &users {
        let distinct: BTreeSet<&str> = list.iter().copied().collect();
        if distinct.len() != 2 {
            issues.push(GraphIssue::NodeMovementCount {
                node: node.to_string(),
                count: distinct.len(),
            });
        }
    }

    let mut shared: BTreeMap<(&str, &str), Vec<String>> = BTreeMap::new();
    for (node, list) in &users {
        let mut ids: Vec<&str> = list.clone();
        ids.sort_unstable();
        ids.dedup();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                shared.entry((ids[i], ids[j])).or_default().push(node.to_string());
            }
        }
    }
    for ((a, b), nodes) in shared {
        if nodes.len() > 1 {
            issues.push(GraphIssue::SharedConflictPoints {
                first: a.to_string(),
                second: b.to_string(),
                nodes,
            });
        }
    }

    let kinds: BTreeMap<&str, ConflictKind> = g.nodes.iter().map(|n| (n.id.as_str(), n.kind)).collect();
    for x in &g.intersections {
        for phase in &x.phases {
            for id in phase {
                if !movement_ids.contains(id.as_str()) {
                    issues.push(GraphIssue::PhaseUnknownMovement {
                        intersection: x.id.clone(),
                        movement: id.clone(),
                    });
                }
            }
            for (node, list) in &users {
                if kinds.get(node) == Some(&ConflictKind::Diverge) {
                    continue;
                }
                let inside: Vec<&str> = list.iter().copied().filter(|p| phase.iter().any(|q| q == p)).collect();
                if inside.len() >= 2 {
                    issues.push(GraphIssue::PhaseConflict {
                        intersection: x.id.clone(),
                        node: node.to_string(),
                        first: inside[0].to_string(),
                        second: inside[1].to_string(),
                    });
                }
            }
        }
    }
    ValidationReport { issues }
}

impl ConflictGraph {
    pub fn movement(&self, id: &str) -> Option<&Movement> {
        self.movements.iter().find(|p| p.id == id)
    }

    pub fn has_node(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n.id == id)
    }

    pub fn arc_length(&self, from: &str, to: &str) -> Option<f64> {
        self.arcs.iter().find(|a| a.from == from && a.to == to).map(|a| a.length_m)
    }

    /// Movement ids in the fixed total order used by the models.
    pub fn movement_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.movements.iter().map(|p| p.id.clone()).collect();
        ids.sort();
        ids
    }

    /// Movements traversing `node`, sorted by id.
    pub fn movements_at(&self, node: &str) -> Vec<&Movement> {
        let mut v: Vec<&Movement> = self.movements.iter().filter(|p| p.nodes.iter().any(|n| n == node)).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// The ordered movement pair of every node, in node declaration order.
    /// Nodes that do not have exactly two movements are skipped.
    pub fn node_pairs(&self) -> Vec<NodePair> {
        self.nodes
            .iter()
            .filter_map(|n| {
                let ps = self.movements_at(&n.id);
                (ps.len() == 2).then(|| NodePair {
                    node: n.id.clone(),
                    first: ps[0].id.clone(),
                    second: ps[1].id.clone(),
                })
            })
            .collect()
    }

    /// Distance from the first node of `movement` to `node`, in meters.
    pub fn distance_to(&self, movement: &str, node: &str) -> Result<f64, GraphError> {
        let p = self
            .movement(movement)
            .ok_or_else(|| GraphError::UnknownMovement(movement.to_string()))?;
        let pos = p.nodes.iter().position(|n| n == node).ok_or_else(|| GraphError::NodeNotOnMovement {
            movement: movement.to_string(),
            node: node.to_string(),
        })?;
        let mut d = 0.0;
        for w in p.nodes[..=pos].windows(2) {
            d += self.arc_length(&w[0], &w[1]).ok_or_else(|| GraphError::MissingArc {
                movement: movement.to_string(),
                from: w[0].clone(),
                to: w[1].clone(),
            })?;
        }
        Ok(d)
    }

    pub fn intersection_of(&self, node: &str) -> Option<&Intersection> {
        self.intersections.iter().find(|x| x.nodes.iter().any(|n| n == node))
    }
}

/// Free-flow travel time from the first conflict point of `movement` to `node`.
pub fn travel_time(g: &ConflictGraph, movement: &str, node: &str, v_f: f64) -> Result<f64, GraphError> {
    Ok(g.distance_to(movement, node)? / v_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph() -> ConflictGraph {
        ConflictGraph {
            nodes: vec![
                ConflictPoint { id: "a".into(), kind: ConflictKind::Crossing },
                ConflictPoint { id: "b".into(), kind: ConflictKind::Crossing },
            ],
            arcs: vec![Arc { from: "a".into(), to: "b".into(), length_m: 90.0 }],
            movements: vec![
                Movement { id: "p".into(), nodes: vec!["a".into(), "b".into()], kind: MovementKind::Through, demand_class: 0 },
                Movement { id: "q".into(), nodes: vec!["a".into()], kind: MovementKind::Through, demand_class: 1 },
                Movement { id: "r".into(), nodes: vec!["b".into()], kind: MovementKind::Left, demand_class: 2 },
            ],
            intersections: vec![],
        }
    }

    #[test]
    fn travel_time_along_arc() {
        let g = line_graph();
        assert_eq!(travel_time(&g, "p", "a", 18.0).unwrap(), 0.0);
        assert!((travel_time(&g, "p", "b", 18.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(travel_time(&g, "q", "b", 18.0), Err(GraphError::NodeNotOnMovement { .. })));
    }

    #[test]
    fn three_movements_on_a_node_are_reported() {
        let mut g = line_graph();
        g.movements.push(Movement { id: "s".into(), nodes: vec!["a".into()], kind: MovementKind::Right, demand_class: 0 });
        let report = validate_graph(&g);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, GraphIssue::NodeMovementCount { node, count: 3 } if node == "a")));
    }

    #[test]
    fn missing_arc_is_a_broken_path() {
        let mut g = line_graph();
        g.arcs.clear();
        let report = validate_graph(&g);
        assert!(report.issues.iter().any(|i| matches!(i, GraphIssue::BrokenPath { movement, .. } if movement == "p")));
        assert!(report.to_string().contains("broken path"));
    }

    #[test]
    fn node_pairs_are_lexicographic() {
        let g = line_graph();
        assert!(validate_graph(&g).is_empty());
        let pairs = g.node_pairs();
        assert_eq!(pairs[0], NodePair { node: "a".into(), first: "p".into(), second: "q".into() });
        assert_eq!(pairs[1], NodePair { node: "b".into(), first: "p".into(), second: "r".into() });
    }
}
