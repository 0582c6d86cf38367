//! Default data files shipped with the crate.

use std::path::Path;

use nanoop_core::llm::Shot;
use nanoop_core::ppa::Coefficients;
use serde::Deserialize;

use crate::formats::{parse_ppa, parse_timing, parse_toml, FormatError, Timing};

pub const TIMING: &str = include_str!("../data/timing.toml");
pub const PPA: &str = include_str!("../data/ppa.toml");
pub const PROMPT: &str = include_str!("../data/prompt.txt");
pub const REGULATIONS: &str = include_str!("../data/regulations.txt");
pub const SHOTS: &str = include_str!("../data/shots.toml");

pub fn timing() -> Timing {
    parse_timing(TIMING, Path::new("<default timing>")).expect("default timing table parses")
}

/// Default area and power coefficients.
pub fn ppa() -> (Coefficients, Coefficients) {
    parse_ppa(PPA, Path::new("<default coefficients>")).expect("default coefficients parse")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShotFile {
    shot: Vec<ShotRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShotRow {
    prose: String,
    source: String,
}

pub fn parse_shots(text: &str, path: &Path) -> Result<Vec<Shot>, FormatError> {
    let f: ShotFile = parse_toml(text, path)?;
    Ok(f.shot.into_iter().map(|s| Shot { prose: s.prose, source: s.source.trim_start_matches('\n').to_string() }).collect())
}

pub fn shots() -> Vec<Shot> {
    parse_shots(SHOTS, Path::new("<default shots>")).expect("default shots parse")
}
