//! Versioned default configs for every scenario, embedded at build time from
//! the `presets/` directory.

use serde_json::Value;

use crate::config::Scenario;

pub fn preset_text(s: Scenario) -> &'static str {
    match s {
        Scenario::MvisBlock => include_str!("../presets/mvis-block.json"),
        Scenario::MatfacBlock => include_str!("../presets/matfac-block.json"),
        Scenario::MatfacMnist => include_str!("../presets/matfac-mnist.json"),
        Scenario::MatfacNonstationary => include_str!("../presets/matfac-nonstationary.json"),
        Scenario::LogisticImbalance => include_str!("../presets/logistic-imbalance.json"),
        Scenario::Gridworld => include_str!("../presets/gridworld.json"),
        Scenario::TimeawareSpeedup => include_str!("../presets/timeaware-speedup.json"),
    }
}

pub fn preset(s: Scenario) -> Value {
    serde_json::from_str(preset_text(s)).expect("presets are valid JSON")
}
