//! Build every shipped layout and print its conflict points and movement routes.
//!
//! `cargo run --example conflict_graph [scenario]`

use cmat::graph::{build_scenario, validate_graph, GeometryParams, ScenarioKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kinds: Vec<ScenarioKind> = match std::env::args().nth(1) {
        Some(name) => vec![name.parse()?],
        None => ScenarioKind::ALL.to_vec(),
    };
    for kind in kinds {
        let g = build_scenario(kind, &GeometryParams::default())?;
        assert!(validate_graph(&g).is_empty());
        println!(
            "{kind}: {} conflict points, {} movements, {} intersections",
            g.nodes.len(),
            g.movements.len(),
            g.intersections.len()
        );
        for m in &g.movements {
            println!("  {:<6} {}", m.id, m.nodes.join(" -> "));
        }
        for pair in g.node_pairs().iter().take(6) {
            println!("  {} shared by {} and {}", pair.node, pair.first, pair.second);
        }
    }
    Ok(())
}
