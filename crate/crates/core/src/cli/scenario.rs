//! Scenario files: a TOML document with a format version, an output
//! directory and one `[[run]]` table per closed-loop run.
//!
//! ```toml
//! version = 1
//! output_dir = "out"
//!
//! [[run]]
//! name = "ex4-random-full"
//! plant = "ex4"
//! algorithm = "random"
//! mode = "full"
//! u0 = [0.0, 0.4]
//! max_iterations = 500
//! seed = 7
//!
//! [run.params]
//! lower_bracket = 1e-6
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::algorithms::AlgorithmId;
use crate::error::{Result, ScfoError};
use crate::harness::{ParamOverrides, RunConfig, DEFAULT_STALL_TOLERANCE};
use crate::scfo::Mode;

pub const SCENARIO_VERSION: u32 = 1;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub run: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    pub name: Option<String>,
    pub plant: String,
    pub algorithm: String,
    pub mode: String,
    pub u0: Vec<f64>,
    pub max_iterations: Option<usize>,
    pub seed: Option<u64>,
    pub stall_tolerance: Option<f64>,
    #[serde(default)]
    pub params: ParamOverrides,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("scenario (bytes {}..{})", s.start, s.end))
                .unwrap_or_else(|| "scenario".into());
            ScfoError::config(field, e.message().to_string())
        })?;
        if file.version != SCENARIO_VERSION {
            return Err(ScfoError::config(
                "version",
                format!("unsupported version {}, expected {SCENARIO_VERSION}", file.version),
            ));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ScfoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Resolves every entry into a validated [`RunConfig`]. `seed_override`
    /// replaces every entry's seed.
    pub fn configs(&self, seed_override: Option<u64>) -> Result<Vec<RunConfig>> {
        if self.run.is_empty() {
            return Err(ScfoError::config("run", "scenario defines no runs"));
        }
        let mut names = HashSet::new();
        let mut out = Vec::with_capacity(self.run.len());
        for (i, entry) in self.run.iter().enumerate() {
            let cfg = entry.to_config(seed_override).map_err(|e| prefix(i, e))?;
            if !names.insert(cfg.name.clone()) {
                return Err(ScfoError::config(
                    format!("run[{i}].name"),
                    format!("duplicate run name `{}`", cfg.name),
                ));
            }
            cfg.prepare().map_err(|e| prefix(i, e))?;
            out.push(cfg);
        }
        Ok(out)
    }
}

impl RunEntry {
    fn to_config(&self, seed_override: Option<u64>) -> Result<RunConfig> {
        let algorithm: AlgorithmId = self.algorithm.parse()?;
        let mode: Mode = self.mode.parse()?;
        let mut cfg = RunConfig::new(
            &self.plant,
            algorithm,
            mode,
            &self.u0,
            self.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
        )
        .with_seed(seed_override.or(self.seed).unwrap_or(0))
        .with_params(self.params.clone())
        .with_stall_tolerance(self.stall_tolerance.unwrap_or(DEFAULT_STALL_TOLERANCE));
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(ScfoError::config("name", "must be a nonempty file stem"));
            }
            cfg.name = name.clone();
        }
        Ok(cfg)
    }
}

fn prefix(i: usize, e: ScfoError) -> ScfoError {
    match e {
        ScfoError::Config { field, detail } => ScfoError::config(format!("run[{i}].{field}"), detail),
        other => ScfoError::config(format!("run[{i}]"), other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
version = 1
output_dir = "out"

[[run]]
name = "a"
plant = "ex4"
algorithm = "random"
mode = "full"
u0 = [0.0, 0.4]
seed = 7

[run.params]
lower_bracket = 1e-6

[[run]]
plant = "ex2"
algorithm = "fixed"
mode = "feas"
u0 = [-0.4, 0.1]
max_iterations = 50
"#;

    #[test]
    fn parses_and_resolves() {
        let s = ScenarioFile::parse(GOOD).unwrap();
        let c = s.configs(None).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].name, "a");
        assert_eq!(c[0].seed, 7);
        assert_eq!(c[0].max_iterations, DEFAULT_MAX_ITERATIONS);
        assert_eq!(c[0].params.lower_bracket, Some(1e-6));
        assert_eq!(c[1].mode, Mode::FeasibilityOnly);
        assert_eq!(c[1].max_iterations, 50);
        assert!(s.configs(Some(99)).unwrap().iter().all(|c| c.seed == 99));
    }

    #[test]
    fn empty_scenario_is_rejected() {
        let s = ScenarioFile::parse("version = 1\n").unwrap();
        let e = s.configs(None).unwrap_err();
        assert!(matches!(e, ScfoError::Config { ref field, .. } if field == "run"));
    }

    #[test]
    fn errors_name_the_field() {
        let field_of = |text: &str| match ScenarioFile::parse(text).and_then(|s| s.configs(None)) {
            Err(ScfoError::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        };
        let base = GOOD.replace("algorithm = \"random\"", "algorithm = \"nope\"");
        assert_eq!(field_of(&base), "run[0].algorithm");
        assert_eq!(
            field_of(&GOOD.replace("mode = \"feas\"", "mode = \"x\"")),
            "run[1].mode"
        );
        assert_eq!(
            field_of(&GOOD.replace("u0 = [0.0, 0.4]", "u0 = [0.0, 0.9]")),
            "run[0].u0"
        );
        assert_eq!(
            field_of(&GOOD.replace("plant = \"ex2\"", "plant = \"ex9\"")),
            "run[1].plant"
        );
        assert_eq!(field_of(&GOOD.replace("version = 1", "version = 2")), "version");
        assert_eq!(
            field_of(&GOOD.replace("name = \"a\"", "name = \"a\"\nbogus = 1")).starts_with("scenario"),
            true
        );
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let text = GOOD.replace("u0 = [-0.4, 0.1]", "u0 = [0.0, 0.75]");
        let e = ScenarioFile::parse(&text).unwrap().configs(None).unwrap_err();
        assert!(e.to_string().contains("run[1].u0"), "{e}");
    }
}
