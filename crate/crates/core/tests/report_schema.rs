use cloudtopo::bench::{
    run_scaling_bench, run_stability_bench, BuilderParams, ScalingConfig, StabilityConfig,
};
use cloudtopo::complex::ComplexKind;
use serde_json::Value;

fn validator() -> jsonschema::Validator {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../schemas/bench_report.schema.json"
    );
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, report: &Value) {
    let errors: Vec<String> = v
        .iter_errors(report)
        .map(|e| format!("{e} at {}", e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

#[test]
fn scaling_report_matches_schema() {
    let cfg = ScalingConfig {
        sizes: vec![150, 300],
        kinds: vec![
            ComplexKind::Cubical,
            ComplexKind::Alpha,
            ComplexKind::Rips,
            ComplexKind::Flood,
        ],
        params: BuilderParams {
            rips_target_simplices: 600,
            ..Default::default()
        },
        reduce_max_dim: Some(1),
        ..Default::default()
    };
    let report = serde_json::to_value(run_scaling_bench(&cfg).unwrap()).unwrap();
    assert_valid(&validator(), &report);
}

#[test]
fn stability_report_matches_schema() {
    let cfg = StabilityConfig {
        base_n: 200,
        noise_levels: vec![0.0, 0.02],
        downsample_sizes: vec![100],
        seeds: vec![7],
        params: BuilderParams {
            rips_target_simplices: 2000,
            ..Default::default()
        },
        ..Default::default()
    };
    let report = serde_json::to_value(run_stability_bench(&cfg).unwrap()).unwrap();
    assert_valid(&validator(), &report);
}

#[test]
fn schema_rejects_malformed_reports() {
    let v = validator();
    let cfg = ScalingConfig {
        sizes: vec![100],
        kinds: vec![ComplexKind::Cubical],
        ..Default::default()
    };
    let good = serde_json::to_value(run_scaling_bench(&cfg).unwrap()).unwrap();
    assert_valid(&v, &good);
    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("seeds");
    assert!(!v.is_valid(&missing));
    let mut bad_row = good.clone();
    bad_row["rows"][0]["simplex_count"] = Value::from(-1);
    assert!(!v.is_valid(&bad_row));
    let mut bad_kind = good;
    bad_kind["rows"][0]["complex"] = Value::from("voronoi");
    assert!(!v.is_valid(&bad_kind));
}
