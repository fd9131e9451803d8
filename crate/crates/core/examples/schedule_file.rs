//! Save a schedule to the JSON exchange format, load it back and print it.

use cmat::bench::{explain_file, solve_schedule, ControllerKind, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/single_conflict_balanced.json".into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let dir = tempfile::tempdir()?;
    for kind in [ControllerKind::Cmat, ControllerKind::Rc, ControllerKind::Tsc] {
        let file = solve_schedule(&cfg, 1.0, kind)?;
        let out = dir.path().join(format!("{}.json", kind.name()));
        file.write(&out)?;
        println!("== {}", kind.name());
        print!("{}", explain_file(&out)?);
    }
    Ok(())
}
