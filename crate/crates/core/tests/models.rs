//! The JSON files under `models/` are the serialized bundled examples.
//! Set OPALG_REGEN_MODELS=1 to rewrite them.

use std::path::PathBuf;

use opalg::algebra::AlgebraModel;
use opalg::arbitrage::{GainsCone, GainsJson};
use opalg::cli::to_json_pretty;
use opalg::demo;
use opalg::jump::JumpModel;
use opalg::linalg::ComplexMatrix;
use opalg::qms::{system_from_json_str, GkslSystem, QmsJson};
use opalg::states::DensityState;
use serde_json::Value;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn qms_json(sys: &GkslSystem) -> QmsJson {
    QmsJson { h: sys.hamiltonian().clone(), lindblad: sys.lindblad().to_vec(), r: demo::DEMO_RATE }
}

fn claim4() -> ComplexMatrix {
    ComplexMatrix::real(&[&[1.0, 0.5, 0.0, 0.0], &[0.5, 2.0, 0.0, 0.0], &[0.0, 0.0, -1.0, 0.25], &[0.0, 0.0, 0.25, 3.0]])
}

fn expected() -> Vec<(String, Value)> {
    let mut v = Vec::new();
    for m in demo::all_models().unwrap() {
        v.push((format!("{}.json", m.name), serde_json::to_value(m.model.to_json()).unwrap()));
        v.push((format!("{}_state.json", m.name), serde_json::to_value(m.state.to_json()).unwrap()));
    }
    let cone = |c: GainsCone| serde_json::to_value(GainsJson { gains: c.generators().to_vec() }).unwrap();
    v.push(("gains_feasible.json".into(), cone(demo::gains_feasible())));
    v.push(("gains_arbitrage.json".into(), cone(demo::gains_arbitrage())));
    v.push(("pm1.json".into(), serde_json::to_value(demo::pm1_jump().to_json()).unwrap()));
    v.push(("damping.json".into(), serde_json::to_value(qms_json(&demo::damping())).unwrap()));
    v.push(("blocks.json".into(), serde_json::to_value(qms_json(&demo::blocks())).unwrap()));
    v.push(("claim4.json".into(), serde_json::to_value(claim4()).unwrap()));
    v
}

#[test]
fn bundled_files_match_examples() {
    let regen = std::env::var_os("OPALG_REGEN_MODELS").is_some();
    for (name, value) in expected() {
        let path = dir().join(&name);
        if regen {
            std::fs::write(&path, to_json_pretty(&value).unwrap() + "\n").unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        let on_disk: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(on_disk, value, "{name} is stale");
    }
}

#[test]
fn bundled_files_parse() {
    for name in ["diagonal4", "twoblock4", "cq2x2", "binomial"] {
        let m = AlgebraModel::from_json_str(&std::fs::read_to_string(dir().join(format!("{name}.json"))).unwrap()).unwrap();
        let s = DensityState::from_json_str(&std::fs::read_to_string(dir().join(format!("{name}_state.json"))).unwrap()).unwrap();
        assert_eq!(m.dim(), s.dim(), "{name}");
    }
    for name in ["gains_feasible", "gains_arbitrage"] {
        GainsCone::from_json_str(&std::fs::read_to_string(dir().join(format!("{name}.json"))).unwrap(), None).unwrap();
    }
    JumpModel::from_json_str(&std::fs::read_to_string(dir().join("pm1.json")).unwrap()).unwrap();
    for name in ["damping", "blocks"] {
        system_from_json_str(&std::fs::read_to_string(dir().join(format!("{name}.json"))).unwrap()).unwrap();
    }
}
