use std::fs;
use std::path::Path;
use std::process::Command;

use gfuse::cli::run;
use gfuse::metrics::SCHEMA;
use serde_json::Value;

fn gfuse(args: &[&str]) -> i32 {
    let mut full = vec!["gfuse"];
    full.extend_from_slice(args);
    run(full)
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> String {
    let out = dir.join(name).display().to_string();
    let mut args = vec!["synth", "--out", &out, "--nodes", "150"];
    args.extend_from_slice(extra);
    assert_eq!(gfuse(&args), 0);
    out
}

/// Checks the schema keywords the published metrics schema uses.
fn conforms(v: &Value, schema: &Value, root: &Value) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/$defs/");
        return conforms(v, &root["$defs"][name], root);
    }
    if let Some(c) = schema.get("const") {
        if v != c {
            return Err(format!("{v} != {c}"));
        }
    }
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let ok = types.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "number" => v.is_number(),
            "integer" => v.is_u64() || v.is_i64(),
            "null" => v.is_null(),
            "boolean" => v.is_boolean(),
            _ => false,
        });
        if !ok {
            return Err(format!("{v} is not {types:?}"));
        }
    }
    if let Some(x) = v.as_f64() {
        if schema.get("minimum").and_then(Value::as_f64).is_some_and(|m| x < m) {
            return Err(format!("{x} below minimum"));
        }
        if schema.get("maximum").and_then(Value::as_f64).is_some_and(|m| x > m + 1e-12) {
            return Err(format!("{x} above maximum"));
        }
    }
    if let Some(obj) = v.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(key.as_str().unwrap()) {
                return Err(format!("missing {key}"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, val) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => conforms(val, s, root).map_err(|e| format!("{k}: {e}"))?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return Err(format!("unexpected key {k}")),
                    Some(s @ Value::Object(_)) => conforms(val, s, root).map_err(|e| format!("{k}: {e}"))?,
                    _ => {}
                },
            }
        }
    }
    if let (Some(arr), Some(items)) = (v.as_array(), schema.get("items")) {
        for x in arr {
            conforms(x, items, root)?;
        }
    }
    Ok(())
}

fn check_schema(path: &Path) -> Value {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    conforms(&doc, &schema, &schema).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    doc
}

#[test]
fn train_infer_eval_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let src = synth(d, "src", &["--homophily", "0.3", "--seed", "1"]);
    let dst = synth(d, "dst", &["--classes", "4", "--feat-dim", "5", "--seed", "2"]);
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/wisconsin.cfg");
    let cfg = cfg.to_str().unwrap();
    let m1 = d.join("a.gany").display().to_string();
    let m2 = d.join("b.gany").display().to_string();
    for m in [&m1, &m2] {
        assert_eq!(gfuse(&["train", "--config", cfg, "--dataset", &src, "--n-batches", "40", "--out", m]), 0);
    }
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    let doc = check_schema(Path::new(&format!("{m1}.metrics.json")));
    assert_eq!(doc["loss_trace"].as_array().unwrap().len(), 40);
    assert_eq!(doc["config"]["n_batches"], 40);

    let preds = d.join("p.tsv");
    let metrics = d.join("i.json");
    let code = gfuse(&[
        "infer", "--model", &m1, "--dataset", &dst,
        "--predictions", preds.to_str().unwrap(), "--metrics", metrics.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    check_schema(&metrics);
    let test_nodes = fs::read_to_string(Path::new(&dst).join("splits/test.txt")).unwrap().lines().count();
    let text = fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().next(), Some("node_id\tpredicted_class\tp_max"));
    assert_eq!(text.lines().count() - 1, test_nodes);

    assert_eq!(gfuse(&["eval", "--model", &m1, "--dataset", &dst, "--split", "val"]), 0);
    for method in ["labelprop", "linear", "sgc1", "sgc2", "hgc1", "hgc2", "meanagg"] {
        let out = d.join(format!("{method}.json"));
        assert_eq!(gfuse(&["baseline", "--method", method, "--dataset", &dst, "--metrics", out.to_str().unwrap()]), 0);
        check_schema(&out);
    }
    let hist = d.join("h.tsv");
    assert_eq!(gfuse(&["export-features", "--dataset", &dst, "--bins", "10", "--out", hist.to_str().unwrap()]), 0);
    assert_eq!(fs::read_to_string(&hist).unwrap().lines().count(), 1 + 20 * 10);
}

#[test]
fn exit_codes_under_faults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let g = synth(d, "g", &[]);
    let cache = d.join("cache").display().to_string();

    assert_eq!(gfuse(&["preprocess", "--dataset", &g, "--channels", "linear,sgc7x", "--cache-dir", &cache]), 2);
    assert_eq!(gfuse(&["baseline", "--method", "gcn", "--dataset", &g]), 2);
    assert_eq!(gfuse(&["preprocess", "--dataset", d.join("nowhere").to_str().unwrap()]), 3);

    let bad = d.join("bad.cfg");
    fs::write(&bad, "lr = 0.001\nentropy = 1\nn_layers = 1\n").unwrap();
    assert_eq!(gfuse(&["train", "--config", bad.to_str().unwrap(), "--dataset", &g]), 2);
    fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(gfuse(&["train", "--config", bad.to_str().unwrap(), "--dataset", &g]), 2);

    // A learning rate this large overflows the parameters.
    let m = d.join("m.gany").display().to_string();
    let code = gfuse(&[
        "train", "--dataset", &g, "--n-batches", "50", "--lr", "1e308", "--entropy", "1",
        "--n-layers", "2", "--hidden-dims", "4", "--out", &m,
    ]);
    assert_eq!(code, 4);

    assert_eq!(gfuse(&["train", "--dataset", &g, "--n-batches", "3", "--lr", "1e-3", "--entropy", "1", "--n-layers", "1", "--out", &m]), 0);
    assert_eq!(gfuse(&["infer", "--model", &m, "--dataset", &g, "--channels", "linear,sgc1,sgc2"]), 5);

    let empty_val = d.join("g2");
    let g2 = synth(d, "g2", &[]);
    fs::write(empty_val.join("splits/val.txt"), "").unwrap();
    assert_eq!(gfuse(&["eval", "--model", &m, "--dataset", &g2, "--split", "val"]), 2);

    fs::write(Path::new(&g2).join("labels.tsv"), "0\tseven\n").unwrap();
    assert_eq!(gfuse(&["baseline", "--method", "linear", "--dataset", &g2]), 2);
}

#[test]
fn binary_reports_errors_on_stderr() {
    let out = Command::new(env!("CARGO_BIN_EXE_gfuse"))
        .args(["baseline", "--method", "gcn", "--dataset", "."])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gcn"));
}
