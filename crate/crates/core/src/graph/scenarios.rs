//! Builders for the evaluation layouts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{crossings, left_turn, through_lane, Path};
use super::{validate_graph, Arc, ConflictGraph, ConflictKind, ConflictPoint, GraphError, Intersection, Movement, MovementKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleConflict,
    FourLegDedicated,
    FourLegShared,
    ConnectedPair,
    /// Two conflict points, one movement crossing both (the T-junction of the oracle tests).
    StaggeredT,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::SingleConflict,
        ScenarioKind::FourLegDedicated,
        ScenarioKind::FourLegShared,
        ScenarioKind::ConnectedPair,
        ScenarioKind::StaggeredT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::SingleConflict => "single_conflict",
            ScenarioKind::FourLegDedicated => "four_leg_dedicated",
            ScenarioKind::FourLegShared => "four_leg_shared",
            ScenarioKind::ConnectedPair => "connected_pair",
            ScenarioKind::StaggeredT => "staggered_t",
        }
    }

    /// Length of the per-movement-class demand vector the scenario expects.
    pub fn demand_classes(self) -> usize {
        match self {
            ScenarioKind::SingleConflict => 2,
            ScenarioKind::FourLegDedicated => 3,
            ScenarioKind::FourLegShared => 4,
            ScenarioKind::ConnectedPair => 3,
            ScenarioKind::StaggeredT => 3,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GraphError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryParams {
    /// Arc length between consecutive conflict points of one intersection (m).
    pub internal_spacing_m: f64,
    /// Distance between the two intersections of the connected pair (m).
    pub link_spacing_m: f64,
    pub lane_width_m: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            internal_spacing_m: 20.0,
            link_spacing_m: 500.0,
            lane_width_m: 3.5,
        }
    }
}

impl GeometryParams {
    fn validate(&self) -> Result<(), GraphError> {
        for (name, value) in [
            ("internal_spacing_m", self.internal_spacing_m),
            ("link_spacing_m", self.link_spacing_m),
            ("lane_width_m", self.lane_width_m),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(GraphError::NonPositiveLength { name, value });
            }
        }
        Ok(())
    }
}

pub fn build_scenario(kind: ScenarioKind, geometry: &GeometryParams) -> Result<ConflictGraph, GraphError> {
    geometry.validate()?;
    let g = match kind {
        ScenarioKind::SingleConflict => single_conflict(),
        ScenarioKind::StaggeredT => staggered_t(geometry),
        ScenarioKind::FourLegDedicated => four_leg(geometry, false),
        ScenarioKind::FourLegShared => four_leg(geometry, true),
        ScenarioKind::ConnectedPair => connected_pair(geometry),
    };
    let report = validate_graph(&g);
    if !report.is_empty() {
        return Err(GraphError::Invalid(report));
    }
    Ok(g)
}

fn point(id: &str, kind: ConflictKind) -> ConflictPoint {
    ConflictPoint { id: id.to_string(), kind }
}

fn movement(id: &str, nodes: &[&str], kind: MovementKind, demand_class: usize) -> Movement {
    Movement {
        id: id.to_string(),
        nodes: nodes.iter().map(|s| s.to_string()).collect(),
        kind,
        demand_class,
    }
}

fn single_conflict() -> ConflictGraph {
    ConflictGraph {
        nodes: vec![point("n1", ConflictKind::Crossing)],
        arcs: vec![],
        movements: vec![
            movement("EB", &["n1"], MovementKind::Through, 0),
            movement("NB", &["n1"], MovementKind::Through, 1),
        ],
        intersections: vec![Intersection {
            id: "I1".into(),
            nodes: vec!["n1".into()],
            phases: vec![vec!["EB".into()], vec!["NB".into()]],
        }],
    }
}

fn staggered_t(geometry: &GeometryParams) -> ConflictGraph {
    ConflictGraph {
        nodes: vec![point("n1", ConflictKind::Crossing), point("n2", ConflictKind::Crossing)],
        arcs: vec![Arc {
            from: "n1".into(),
            to: "n2".into(),
            length_m: geometry.internal_spacing_m,
        }],
        movements: vec![
            movement("p1", &["n1", "n2"], MovementKind::Left, 0),
            movement("p2", &["n1"], MovementKind::Through, 1),
            movement("p3", &["n2"], MovementKind::Through, 2),
        ],
        intersections: vec![Intersection {
            id: "I1".into(),
            nodes: vec!["n1".into(), "n2".into()],
            phases: vec![vec!["p1".into()], vec!["p2".into(), "p3".into()]],
        }],
    }
}

const APPROACHES: [(&str, u8); 4] = [("NB", 0), ("WB", 1), ("SB", 2), ("EB", 3)];

/// A movement of one intersection with its lane geometry.
struct LaneMovement {
    id: String,
    path: Option<Path>,
    kind: MovementKind,
    demand_class: usize,
    /// Movement whose lane this one diverges from at its entry.
    diverges_from: Option<String>,
}

/// Lane layout of one approach: (suffix, kind, demand class, lateral offset in lane widths).
type LaneSpec = (&'static str, MovementKind, usize, f64);

/// Conflict points of one intersection, as (movement a, movement b, kind, param on a, param on b).
struct Conflicts {
    nodes: Vec<(String, String, ConflictKind, f64, f64)>,
}

fn intersection_conflicts(movements: &[LaneMovement]) -> Conflicts {
    let mut nodes = Vec::new();
    for (i, a) in movements.iter().enumerate() {
        for b in &movements[i + 1..] {
            if let (Some(pa), Some(pb)) = (&a.path, &b.path) {
                for (u, v) in crossings(pa, pb) {
                    nodes.push((a.id.clone(), b.id.clone(), ConflictKind::Crossing, u, v));
                }
            }
        }
    }
    for m in movements {
        if let Some(parent) = &m.diverges_from {
            nodes.push((parent.clone(), m.id.clone(), ConflictKind::Diverge, 0.0, 0.0));
        }
    }
    Conflicts { nodes }
}

fn lane_movements(lanes: &[LaneSpec], half_width: f64, width: f64) -> Vec<LaneMovement> {
    let mut out = Vec::new();
    for (approach, quarter) in APPROACHES {
        for &(suffix, kind, class, offset) in lanes {
            let x = offset * width;
            let id = format!("{approach}_{suffix}");
            let (path, diverges_from) = match kind {
                MovementKind::Through => (Some(through_lane(x, half_width, quarter)), None),
                MovementKind::Left => (Some(left_turn(x, half_width, quarter)), None),
                MovementKind::Right => {
                    // the right turn shares the outermost through lane and leaves it at the stop line
                    let parent = lanes
                        .iter()
                        .filter(|l| l.1 == MovementKind::Through)
                        .max_by(|a, b| a.3.total_cmp(&b.3))
                        .map(|l| format!("{approach}_{}", l.0));
                    (None, parent)
                }
            };
            out.push(LaneMovement {
                id,
                path,
                kind,
                demand_class: class,
                diverges_from,
            });
        }
    }
    out
}

/// Assemble nodes, movement sequences and arcs of one intersection.
fn assemble(
    prefix: &str,
    movements: &[LaneMovement],
    conflicts: &Conflicts,
) -> (Vec<ConflictPoint>, BTreeMap<String, Vec<(f64, String)>>) {
    let mut nodes = Vec::new();
    let mut along: BTreeMap<String, Vec<(f64, String)>> =
        movements.iter().map(|m| (m.id.clone(), Vec::new())).collect();
    for (k, (a, b, kind, u, v)) in conflicts.nodes.iter().enumerate() {
        let id = format!("{prefix}{}", k + 1);
        nodes.push(point(&id, *kind));
        along.get_mut(a).expect("movement").push((*u, id.clone()));
        along.get_mut(b).expect("movement").push((*v, id));
    }
    for list in along.values_mut() {
        list.sort_by(|x, y| x.0.total_cmp(&y.0));
    }
    (nodes, along)
}

fn chain_arcs(nodes: &[String], spacing: f64, arcs: &mut Vec<Arc>) {
    for w in nodes.windows(2) {
        if !arcs.iter().any(|a| a.from == w[0] && a.to == w[1]) {
            arcs.push(Arc {
                from: w[0].clone(),
                to: w[1].clone(),
                length_m: spacing,
            });
        }
    }
}

fn phases_for(ids: &[String], with_rights: bool) -> Vec<Vec<String>> {
    let pick = |axis: &[&str], left: bool| -> Vec<String> {
        ids.iter()
            .filter(|id| axis.iter().any(|a| id.starts_with(a)))
            .filter(|id| {
                let is_left = id.ends_with("_L");
                let is_right = id.ends_with("_R");
                if left {
                    is_left
                } else {
                    !is_left && (with_rights || !is_right)
                }
            })
            .cloned()
            .collect()
    };
    vec![
        pick(&["NB_", "SB_"], false),
        pick(&["NB_", "SB_"], true),
        pick(&["EB_", "WB_"], false),
        pick(&["EB_", "WB_"], true),
    ]
}

fn four_leg(geometry: &GeometryParams, shared: bool) -> ConflictGraph {
    let w = geometry.lane_width_m;
    let lanes: Vec<LaneSpec> = if shared {
        vec![
            ("R", MovementKind::Right, 0, 2.5),
            ("T1", MovementKind::Through, 1, 1.5),
            ("T2", MovementKind::Through, 2, 2.5),
            ("L", MovementKind::Left, 3, 0.5),
        ]
    } else {
        vec![
            ("T1", MovementKind::Through, 0, 1.5),
            ("T2", MovementKind::Through, 1, 2.5),
            ("L", MovementKind::Left, 2, 0.5),
        ]
    };
    let half = 3.0 * w;
    let lm = lane_movements(&lanes, half, w);
    let conflicts = intersection_conflicts(&lm);
    let (nodes, along) = assemble("n", &lm, &conflicts);
    let mut arcs = Vec::new();
    let mut movements = Vec::new();
    for m in &lm {
        let seq: Vec<String> = along[&m.id].iter().map(|(_, n)| n.clone()).collect();
        chain_arcs(&seq, geometry.internal_spacing_m, &mut arcs);
        movements.push(Movement {
            id: m.id.clone(),
            nodes: seq,
            kind: m.kind,
            demand_class: m.demand_class,
        });
    }
    let ids: Vec<String> = movements.iter().map(|m| m.id.clone()).collect();
    ConflictGraph {
        intersections: vec![Intersection {
            id: "I1".into(),
            nodes: nodes.iter().map(|n| n.id.clone()).collect(),
            phases: phases_for(&ids, shared),
        }],
        nodes,
        arcs,
        movements,
    }
}

/// A four-leg major intersection (right, through, left per approach) linked on its
/// east leg to a minor T-intersection whose south leg carries two local movements.
fn connected_pair(geometry: &GeometryParams) -> ConflictGraph {
    let w = geometry.lane_width_m;
    let lanes: Vec<LaneSpec> = vec![
        ("R", MovementKind::Right, 0, 1.5),
        ("T", MovementKind::Through, 1, 1.5),
        ("L", MovementKind::Left, 2, 0.5),
    ];
    let half = 2.0 * w;
    let lm = lane_movements(&lanes, half, w);
    let conflicts = intersection_conflicts(&lm);
    let (mut nodes, along) = assemble("a", &lm, &conflicts);
    let major_nodes: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();

    // minor intersection east of the major: NB_R and SB_L continue eastbound through it,
    // WB_L enters from its south leg and heads west to the major, mS_R merges behind NB_R
    // and mE_L turns left from the east leg. SB_L already meets WB_L at the major, so the
    // minor is laid out to keep that pair apart.
    let minor = [
        ("b1", ConflictKind::Crossing),
        ("b2", ConflictKind::Crossing),
        ("b3", ConflictKind::Crossing),
        ("b4", ConflictKind::Crossing),
        ("b5", ConflictKind::Merge),
    ];
    for (id, kind) in minor {
        nodes.push(point(id, kind));
    }
    let mut minor_tail: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    minor_tail.insert("NB_R", vec!["b2", "b3", "b5"]);
    minor_tail.insert("SB_L", vec!["b1"]);
    let mut minor_head: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    minor_head.insert("WB_L", vec!["b3", "b4"]);

    let mut arcs = Vec::new();
    let mut movements = Vec::new();
    let sp = geometry.internal_spacing_m;
    for m in &lm {
        let major: Vec<String> = along[&m.id].iter().map(|(_, n)| n.clone()).collect();
        chain_arcs(&major, sp, &mut arcs);
        let mut seq = Vec::new();
        if let Some(head) = minor_head.get(m.id.as_str()) {
            let head: Vec<String> = head.iter().map(|s| s.to_string()).collect();
            chain_arcs(&head, sp, &mut arcs);
            arcs.push(Arc {
                from: head.last().expect("head").clone(),
                to: major[0].clone(),
                length_m: geometry.link_spacing_m,
            });
            seq.extend(head);
        }
        seq.extend(major.iter().cloned());
        if let Some(tail) = minor_tail.get(m.id.as_str()) {
            let tail: Vec<String> = tail.iter().map(|s| s.to_string()).collect();
            chain_arcs(&tail, sp, &mut arcs);
            arcs.push(Arc {
                from: major.last().expect("major").clone(),
                to: tail[0].clone(),
                length_m: geometry.link_spacing_m,
            });
            seq.extend(tail);
        }
        movements.push(Movement {
            id: m.id.clone(),
            nodes: seq,
            kind: m.kind,
            demand_class: m.demand_class,
        });
    }
    let local_left = vec!["b4".to_string(), "b1".to_string(), "b2".to_string()];
    chain_arcs(&local_left, sp, &mut arcs);
    movements.push(Movement {
        id: "mE_L".into(),
        nodes: local_left,
        kind: MovementKind::Left,
        demand_class: 2,
    });
    movements.push(Movement {
        id: "mS_R".into(),
        nodes: vec!["b5".into()],
        kind: MovementKind::Right,
        demand_class: 0,
    });

    let ids: Vec<String> = lm.iter().map(|m| m.id.clone()).collect();
    ConflictGraph {
        nodes,
        arcs,
        movements,
        intersections: vec![
            Intersection {
                id: "major".into(),
                nodes: major_nodes,
                phases: phases_for(&ids, true),
            },
            Intersection {
                id: "minor".into(),
                nodes: minor.iter().map(|(id, _)| id.to_string()).collect(),
                phases: vec![
                    vec!["NB_R".into(), "SB_L".into()],
                    vec!["mE_L".into()],
                    vec!["WB_L".into(), "mS_R".into()],
                ],
            },
        ],
    }
}
