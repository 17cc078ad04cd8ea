//! Scenario presets compiled into the binary.
//!
//! The same files ship under `presets/` in the repository; embedding them
//! makes `hs-ctrl run --scenario ex1` work from any directory.

pub const PRESETS: &[(&str, &str)] = &[
    ("ex1", include_str!("../../../presets/ex1.toml")),
    ("ex1_global", include_str!("../../../presets/ex1_global.toml")),
    ("ex2", include_str!("../../../presets/ex2.toml")),
    ("ex3_static", include_str!("../../../presets/ex3_static.toml")),
    (
        "ex3_oscillating",
        include_str!("../../../presets/ex3_oscillating.toml"),
    ),
    ("ex4", include_str!("../../../presets/ex4.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}
