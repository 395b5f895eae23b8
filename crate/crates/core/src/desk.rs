//! The bundled desk dataset, compiled into the library so that it runs
//! without any files on disk.

use std::path::{Path, PathBuf};

use crate::engine::{ScenarioData, Settings};
use crate::error::{Error, Result};
use crate::io::ScenarioConfig;

const FILES: [(&str, &str); 8] = [
    ("scenario.toml", include_str!("../data/desk/scenario.toml")),
    ("foods.csv", include_str!("../data/desk/foods.csv")),
    ("pe_matrix.csv", include_str!("../data/desk/pe_matrix.csv")),
    ("pe_matrix_sd.csv", include_str!("../data/desk/pe_matrix_sd.csv")),
    ("expenditure_elasticities.csv", include_str!("../data/desk/expenditure_elasticities.csv")),
    ("population.csv", include_str!("../data/desk/population.csv")),
    ("diseases.csv", include_str!("../data/desk/diseases.csv")),
    ("rr_links.csv", include_str!("../data/desk/rr_links.csv")),
];

/// Pseudo-directory used in error messages for embedded files.
pub const ORIGIN: &str = "<desk>";

/// Embedded file contents by path, for [`ScenarioData::from_config_with`].
pub fn fetch(path: &Path) -> Result<String> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| text.to_string())
        .ok_or_else(|| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not part of the desk dataset"),
        })
}

pub fn config() -> ScenarioConfig {
    let origin = PathBuf::from(ORIGIN).join("scenario.toml");
    ScenarioConfig::parse(FILES[0].1, &origin).expect("desk scenario parses")
}

pub fn load() -> Result<(ScenarioData, Settings)> {
    let cfg = config();
    Ok((ScenarioData::from_config_with(&cfg, &fetch)?, Settings::from_config(&cfg)?))
}
