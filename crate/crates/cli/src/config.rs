use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sofri_core::model::McmcConfig;
use sofri_core::pipeline::PipelineSettings;
use sofri_core::simulate::Scenario;

use crate::CliError;

/// Transform applied to `W` and `M` before anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Log2,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub w: Option<PathBuf>,
    pub m: Option<PathBuf>,
    pub scalars: Option<PathBuf>,
    pub transform: Transform,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaSection {
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub n_basis: usize,
    pub degree: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        let p = PipelineSettings::default();
        Self {
            n_basis: p.n_basis,
            degree: p.degree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarySection {
    pub level: f64,
    /// Pair of cluster labels to contrast; the two largest clusters by default.
    pub contrast: Option<[usize; 2]>,
}

impl Default for SummarySection {
    fn default() -> Self {
        Self {
            level: 0.9,
            contrast: None,
        }
    }
}

/// Everything `fit`, `delta` and `summarize` read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub data: DataSection,
    pub delta: DeltaSection,
    pub basis: BasisSection,
    pub mcmc: McmcConfig,
    pub summary: SummarySection,
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineSettings {
        PipelineSettings {
            n_basis: self.basis.n_basis,
            degree: self.basis.degree,
            bandwidth: self.delta.bandwidth,
        }
    }

    /// Relative paths in a config file are taken relative to the file.
    fn rebase(&mut self, dir: &Path) {
        for p in [
            &mut self.out,
            &mut self.data.w,
            &mut self.data.m,
            &mut self.data.scalars,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn check_level(&self) -> Result<(), CliError> {
        let l = self.summary.level;
        if l > 0.0 && l < 1.0 {
            Ok(())
        } else {
            Err(CliError::InvalidConfig(format!(
                "summary level must lie in (0, 1), got {l}"
            )))
        }
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let mut cfg: RunConfig = read_toml(path)?;
    cfg.rebase(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

/// Scenario files use the field names of [`Scenario`] at the top level.
pub fn load_scenario(path: Option<&Path>) -> Result<Scenario, CliError> {
    match path {
        Some(p) => read_toml(p),
        None => Ok(Scenario::default()),
    }
}

pub fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    let p = path
        .clone()
        .ok_or_else(|| CliError::InvalidConfig(format!("missing {what} path (flag or config)")))?;
    if !p.exists() {
        return Err(CliError::InvalidConfig(format!(
            "{what} file {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_merge_with_defaults() {
        let cfg: RunConfig = toml::from_str(
            "[data]\nw = \"w.csv\"\ntransform = \"log2\"\n[mcmc]\nn_iter = 50\nburn_in = 10\n[summary]\nlevel = 0.8\n",
        )
        .unwrap();
        assert_eq!(cfg.data.transform, Transform::Log2);
        assert_eq!(cfg.mcmc.n_iter, 50);
        assert_eq!(cfg.mcmc.thin, McmcConfig::default().thin);
        assert_eq!(cfg.basis, BasisSection::default());
        assert_eq!(cfg.summary.level, 0.8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[data]\nwcsv = 1\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut cfg = RunConfig {
            out: Some("out".into()),
            ..Default::default()
        };
        cfg.data.w = Some("/abs/w.csv".into());
        cfg.rebase(Path::new("/cfg"));
        assert_eq!(cfg.out.unwrap(), PathBuf::from("/cfg/out"));
        assert_eq!(cfg.data.w.unwrap(), PathBuf::from("/abs/w.csv"));
    }
}
