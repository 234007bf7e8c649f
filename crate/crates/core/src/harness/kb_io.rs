//! Knowledge-base construction and its JSON file format.
//!
//! Only raw archives and fitted decay parameters are stored; source
//! surrogates are refit when a file is loaded. Reals are written with 17
//! significant digits so every stored value survives a roundtrip exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::adapt::AdaptationMap;
use crate::ckt::{DecayModel, KnowledgeBase, SourceRecord};
use crate::engine::{run_sas, BackboneConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::surrogate::{FittedSurrogate, GprConfig, SurrogateKind};
use crate::task::Task;

pub const SCHEMA_VERSION: u64 = 1;

/// Optimizes every source with `backbone` and archives the results. Source
/// `i` draws from `rng.fork(i)`.
pub fn build_kb(sources: &[Task], backbone: &BackboneConfig, rng: &RngStream) -> Result<KnowledgeBase> {
    use rayon::prelude::*;

    if sources.is_empty() {
        return Err(Error::invalid("build_kb needs at least one source task"));
    }
    let dim = sources[0].dim();
    let records = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            let mut task = src.fresh();
            let trace = run_sas(&mut task, backbone, &mut rng.fork(i as u64))?;
            let db = trace.database();
            SourceRecord::from_archive(
                src.name(),
                (src.lower().to_vec(), src.upper().to_vec()),
                db.points().to_vec(),
                db.values().to_vec(),
                backbone.surrogate,
                &backbone.gpr,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    KnowledgeBase::new(dim, records)
}

struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn num(v: f64) -> Value {
    // NaN has no JSON representation
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| num(v)).collect())
}

fn record_to_json(r: &SourceRecord) -> Value {
    let mut obj = json!({
        "task_id": r.task_id,
        "bounds": {"lower": nums(&r.bounds.0), "upper": nums(&r.bounds.1)},
        "X": Value::Array(r.x.iter().map(|row| nums(row)).collect()),
        "y": nums(&r.y),
        "tau_max": r.tau_max(),
        "decay": {
            "gamma_o": num(r.decay.gamma_o),
            "gamma_i": num(r.decay.gamma_i),
            "lambda": num(r.decay.lambda),
            "r2": num(r.decay.r2),
            "degenerate": r.decay.degenerate,
        },
        "best_index": r.best_index,
    });
    if let Some(map) = &r.adaptation {
        obj["adaptation"] = json!({"theta": nums(&map.theta), "s_adapted": num(map.s_adapted)});
    }
    obj
}

/// Serializes a knowledge base to the KB file format.
pub fn kb_to_string(kb: &KnowledgeBase) -> String {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "dimension": kb.dim,
        "records": kb.records.iter().map(record_to_json).collect::<Vec<_>>(),
    });
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17);
    serde::Serialize::serialize(&doc, &mut ser).expect("in-memory JSON serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON output is UTF-8")
}

pub fn save_kb(kb: &KnowledgeBase, path: &Path) -> Result<()> {
    fs::write(path, kb_to_string(kb)).map_err(|e| Error::io(path, e))
}

/// Loads a knowledge base, refitting each source surrogate as `kind`.
pub fn load_kb(path: &Path, kind: SurrogateKind, gpr: &GprConfig) -> Result<KnowledgeBase> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    kb_from_str(&text, kind, gpr)
}

pub fn kb_from_str(text: &str, kind: SurrogateKind, gpr: &GprConfig) -> Result<KnowledgeBase> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let top = as_object(&doc, "")?;
    let version = as_u64(field(top, "schema_version", "")?, "schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(Error::schema(
            "schema_version",
            format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    let dim = as_u64(field(top, "dimension", "")?, "dimension")? as usize;
    let records = as_array(field(top, "records", "")?, "records")?
        .iter()
        .enumerate()
        .map(|(i, v)| record_from_json(v, &format!("records[{i}]"), dim, kind, gpr))
        .collect::<Result<Vec<_>>>()?;
    KnowledgeBase::new(dim, records)
}

fn record_from_json(
    v: &Value,
    path: &str,
    dim: usize,
    kind: SurrogateKind,
    gpr: &GprConfig,
) -> Result<SourceRecord> {
    let obj = as_object(v, path)?;
    let at = |name: &str| format!("{path}.{name}");
    let task_id = field(obj, "task_id", path)?
        .as_str()
        .ok_or_else(|| Error::schema(at("task_id"), "expected a string"))?
        .to_string();

    let bounds = as_object(field(obj, "bounds", path)?, &at("bounds"))?;
    let lower = as_reals(field(bounds, "lower", &at("bounds"))?, &at("bounds.lower"))?;
    let upper = as_reals(field(bounds, "upper", &at("bounds"))?, &at("bounds.upper"))?;
    if lower.len() != dim || upper.len() != dim {
        return Err(Error::schema(at("bounds"), format!("expected {dim} entries per bound")));
    }

    let x = as_array(field(obj, "X", path)?, &at("X"))?
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let p = format!("{path}.X[{r}]");
            let vals = as_reals(row, &p)?;
            if vals.len() != dim {
                return Err(Error::schema(p, format!("expected {dim} coordinates")));
            }
            Ok(vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let y = as_reals(field(obj, "y", path)?, &at("y"))?;
    if y.len() != x.len() || y.is_empty() {
        return Err(Error::schema(at("y"), format!("expected {} values", x.len())));
    }
    let tau_max = as_u64(field(obj, "tau_max", path)?, &at("tau_max"))? as usize;
    if tau_max != y.len() {
        return Err(Error::schema(at("tau_max"), format!("{tau_max} differs from archive size {}", y.len())));
    }
    let best_index = as_u64(field(obj, "best_index", path)?, &at("best_index"))? as usize;
    if best_index >= y.len() || y.iter().any(|&v| v < y[best_index]) {
        return Err(Error::schema(at("best_index"), "does not point at the archive minimum"));
    }

    let dp = at("decay");
    let d = as_object(field(obj, "decay", path)?, &dp)?;
    let real = |name: &str| as_real_or_nan(field(d, name, &dp)?, &format!("{dp}.{name}"));
    let decay = DecayModel {
        gamma_o: real("gamma_o")?,
        gamma_i: real("gamma_i")?,
        lambda: real("lambda")?,
        r2: real("r2")?,
        degenerate: field(d, "degenerate", &dp)?
            .as_bool()
            .ok_or_else(|| Error::schema(format!("{dp}.degenerate"), "expected a boolean"))?,
    };

    let adaptation = match obj.get("adaptation") {
        None | Some(Value::Null) => None,
        Some(a) => {
            let ap = at("adaptation");
            let a = as_object(a, &ap)?;
            let theta = as_reals(field(a, "theta", &ap)?, &format!("{ap}.theta"))?;
            let s_adapted = as_real_or_nan(field(a, "s_adapted", &ap)?, &format!("{ap}.s_adapted"))?;
            Some(AdaptationMap {
                alpha: crate::adapt::regularizer(&theta),
                theta,
                s_adapted,
                evaluations: 0,
                degenerate: false,
            })
        }
    };

    let surrogate = FittedSurrogate::fit(kind, &x, &y, gpr)?;
    Ok(SourceRecord {
        task_id,
        bounds: (lower, upper),
        x,
        y,
        decay,
        best_index,
        surrogate: Arc::new(surrogate),
        adaptation,
    })
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &str) -> Result<&'a Value> {
    let full = if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    };
    obj.get(name).ok_or_else(|| Error::schema(full, "missing field"))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::schema(path, "expected an array"))
}

fn as_u64(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::schema(path, "expected a non-negative integer"))
}

fn as_real(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::schema(path, "expected a number"))
}

fn as_real_or_nan(v: &Value, path: &str) -> Result<f64> {
    if v.is_null() {
        return Ok(f64::NAN);
    }
    as_real(v, path)
}

fn as_reals(v: &Value, path: &str) -> Result<Vec<f64>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, e)| as_real(e, &format!("{path}[{i}]")))
        .collect()
}
