use svfend_core::eval::TrainConfig;
use svfend_core::model::ModelConfig;

#[test]
fn defaults_match_golden_file() {
    let golden: serde_json::Value =
        serde_json::from_str(include_str!("golden/defaults.json")).unwrap();
    let actual = serde_json::json!({
        "model": ModelConfig::default(),
        "train": TrainConfig::default(),
    });
    assert_eq!(actual, golden);
}

#[test]
fn golden_file_round_trips_into_configs() {
    let golden: serde_json::Value =
        serde_json::from_str(include_str!("golden/defaults.json")).unwrap();
    let m: ModelConfig = serde_json::from_value(golden["model"].clone()).unwrap();
    let t: TrainConfig = serde_json::from_value(golden["train"].clone()).unwrap();
    assert_eq!(m, ModelConfig::default());
    assert_eq!(t, TrainConfig::default());
}
