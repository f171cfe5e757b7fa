//! Bundled scenario presets. Each corresponds to one panel of the study
//! this tool reproduces; select with `--preset NAME`.

use crate::config::ScenarioConfig;
use crate::CmdError;

pub const PRESET_NAMES: [&str; 9] = [
    "fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "sfig3", "sfig4", "sfig5",
];

pub fn preset(name: &str) -> Result<ScenarioConfig, CmdError> {
    let text = match name {
        "fig2a" => include_str!("../presets/fig2a.toml"),
        "fig2b" => include_str!("../presets/fig2b.toml"),
        "fig2c" => include_str!("../presets/fig2c.toml"),
        "fig2d" => include_str!("../presets/fig2d.toml"),
        "fig3a" => include_str!("../presets/fig3a.toml"),
        "fig3b" => include_str!("../presets/fig3b.toml"),
        "sfig3" => include_str!("../presets/sfig3.toml"),
        "sfig4" => include_str!("../presets/sfig4.toml"),
        "sfig5" => include_str!("../presets/sfig5.toml"),
        other => {
            return Err(CmdError::Config(format!(
                "unknown preset `{other}`; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    ScenarioConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse_and_validate() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap_or_else(|e| panic!("preset {name}: {e}"));
            cfg.validate()
                .unwrap_or_else(|e| panic!("preset {name}: {e}"));
        }
    }

    #[test]
    fn unknown_preset_is_config_error() {
        assert!(matches!(preset("fig9z"), Err(CmdError::Config(_))));
    }
}
