//! One config document carries the g(k) model, the constant C = ħ²/2μ and,
//! optionally, the pseudo-Morse reference parameters.

use crate::gk::{parse_gk_config, GkError, GkModel};
use crate::refpot::{PseudoMorseParams, RefpotError};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Toml(String),
    #[error("config: {0}")]
    Model(#[from] GkError),
    #[error("config: {0}")]
    Refpot(#[from] RefpotError),
    #[error("config: C_meV_A2 must be positive, got {0}")]
    BadConstant(f64),
}

#[derive(Debug, Deserialize)]
struct Constants {
    #[serde(rename = "C_meV_A2")]
    c: f64,
}

#[derive(Debug, Deserialize)]
struct Extras {
    constants: Constants,
    refpot: Option<PseudoMorseParams>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: GkModel,
    /// ħ²/2μ in meV·Å²
    pub c: f64,
    pub refpot: Option<PseudoMorseParams>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let extras: Extras = toml::from_str(text).map_err(|e| ConfigError::Toml(e.message().to_string()))?;
    if !(extras.constants.c > 0.0) {
        return Err(ConfigError::BadConstant(extras.constants.c));
    }
    if let Some(p) = &extras.refpot {
        p.validate()?;
    }
    Ok(RunConfig { model: parse_gk_config(text)?, c: extras.constants.c, refpot: extras.refpot })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse_config(&text)
}
