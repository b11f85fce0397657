#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use fundmatch_core::stages::{self, IngestInputs};
use fundmatch_core::PipelineConfig;
use serde_json::Value;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small")
}

pub fn fixture_inputs() -> IngestInputs {
    let dir = fixture_dir();
    IngestInputs {
        publications: dir.join("publications.jsonl"),
        calls: dir.join("calls.jsonl"),
        masters: dir.join("masters.csv"),
        profiles: dir.join("author_profiles.jsonl"),
        topics: Some(dir.join("topics.csv")),
    }
}

pub fn fixture_config() -> PipelineConfig {
    PipelineConfig::load(&fixture_dir().join("config.json")).unwrap()
}

/// Every stage of the engine on the fixture, reports written into `work`.
pub fn run_engine_on_fixture(work: &Path) -> PipelineConfig {
    let config = fixture_config();
    stages::ingest(&fixture_inputs(), work, config.reference_year).unwrap();
    stages::resolve(work).unwrap();
    stages::embed(work, &config, &fixture_dir()).unwrap();
    stages::report(work, work, &config).unwrap();
    config
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

fn compare_values(a: &Value, b: &Value, tol: f64, at: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if close(x, y, tol) {
                Ok(())
            } else {
                Err(format!("{at}: {x} vs {y}"))
            }
        }
        (Value::Array(xs), Value::Array(ys)) => {
            if xs.len() != ys.len() {
                return Err(format!("{at}: length {} vs {}", xs.len(), ys.len()));
            }
            for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                compare_values(x, y, tol, &format!("{at}[{i}]"))?;
            }
            Ok(())
        }
        (Value::Object(xs), Value::Object(ys)) => {
            let kx: Vec<&String> = xs.keys().collect();
            let ky: Vec<&String> = ys.keys().collect();
            if kx != ky {
                return Err(format!("{at}: keys {kx:?} vs {ky:?}"));
            }
            for (k, x) in xs {
                compare_values(x, &ys[k], tol, &format!("{at}.{k}"))?;
            }
            Ok(())
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} vs {b}")),
    }
}

/// Compares two report files of the same kind: identical structure, text fields equal,
/// numbers within `tol`.
pub fn compare_reports(a: &Path, b: &Path, tol: f64) -> Result<(), String> {
    let ta = std::fs::read_to_string(a).map_err(|e| format!("{}: {e}", a.display()))?;
    let tb = std::fs::read_to_string(b).map_err(|e| format!("{}: {e}", b.display()))?;
    let name = a.file_name().unwrap().to_string_lossy().to_string();
    if name.ends_with(".json") {
        let (va, vb): (Value, Value) = (serde_json::from_str(&ta).unwrap(), serde_json::from_str(&tb).unwrap());
        return compare_values(&va, &vb, tol, &name);
    }
    let (la, lb): (Vec<&str>, Vec<&str>) = (ta.lines().collect(), tb.lines().collect());
    if la.len() != lb.len() {
        return Err(format!("{name}: {} lines vs {}", la.len(), lb.len()));
    }
    for (i, (x, y)) in la.iter().zip(&lb).enumerate() {
        let at = format!("{name}:{}", i + 1);
        if name.ends_with(".jsonl") {
            let (vx, vy): (Value, Value) = (serde_json::from_str(x).unwrap(), serde_json::from_str(y).unwrap());
            compare_values(&vx, &vy, tol, &at)?;
        } else {
            let (fx, fy): (Vec<&str>, Vec<&str>) = (x.split(',').collect(), y.split(',').collect());
            if fx.len() != fy.len() {
                return Err(format!("{at}: {x} vs {y}"));
            }
            for (p, q) in fx.iter().zip(&fy) {
                let numeric = matches!((p.parse::<f64>(), q.parse::<f64>()), (Ok(u), Ok(v)) if close(u, v, tol));
                if p != q && !numeric {
                    return Err(format!("{at}: {x} vs {y}"));
                }
            }
        }
    }
    Ok(())
}
