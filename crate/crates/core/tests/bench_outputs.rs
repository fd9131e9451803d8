use std::path::Path;

use cmat::bench::{csv_rows, execute, write_outputs, ExperimentConfig, Overrides};

const CONFIG: &str = r#"{
    "name": "it",
    "scenario": "single_conflict",
    "base_demand_vph": [1800, 100],
    "beta": {"min": 0.5, "max": 2.5, "step": 0.5},
    "simulation": {"horizon": 1800, "warmup": 60, "arrivals": "poisson", "seed": 5},
    "controllers": ["tsc", "cmat", "rc"]
}"#;

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn csv_is_reproducible_and_complete() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = execute(&cfg, 1).unwrap();
    let rb = execute(&cfg, 3).unwrap();
    let fa = write_outputs(&cfg, &ra, a.path()).unwrap();
    let fb = write_outputs(&cfg, &rb, b.path()).unwrap();
    assert_eq!(fa.len(), 6);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(read(x), read(y), "{}", x.display());
    }
    let main = read(&a.path().join("it.csv"));
    let header = main.lines().next().unwrap();
    assert_eq!(
        header,
        "scenario,controller,beta,demand_total_vph,throughput_vph,mean_delay_s,cycle_s,platoon_sizes,model_used,tsc_feasible,safety_ok"
    );
    assert_eq!(main.lines().count(), 1 + 3 * 5);
    for row in csv_rows(&cfg, &ra) {
        if row.model_used == "M1" || row.model_used == "M2" {
            assert!(row.safety_ok);
        }
    }
    let ann = read(&a.path().join("it_annotations.csv"));
    assert!(ann.contains("m1_to_m2_switch,cmat,"), "{ann}");
}

#[test]
fn overrides_apply_and_validate() {
    let mut cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    let o = Overrides {
        horizon: Some(900.0),
        seed: Some(9),
        workers: None,
        output_dir: Some("elsewhere".into()),
    };
    o.apply(&mut cfg).unwrap();
    assert_eq!(cfg.simulation.horizon, 900.0);
    assert_eq!(cfg.simulation.seed, 9);
    assert_eq!(cfg.output_dir, Path::new("elsewhere"));
    let bad = Overrides {
        horizon: Some(10.0),
        ..o
    };
    let err = bad.apply(&mut cfg).unwrap_err().to_string();
    assert!(err.contains("simulation.horizon"), "{err}");
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.name, path.file_stem().unwrap().to_str().unwrap());
        n += 1;
    }
    assert_eq!(n, 5);
}
