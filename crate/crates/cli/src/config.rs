//! Declarative simulate configs (TOML). Unknown keys are rejected.
//!
//! ```toml
//! [run]
//! kind = "coverage"
//! n = 20
//! n_design_draws = 5
//! n_error_reps = 20
//!
//! [acceptance]
//! min_median_coverage = 0.9
//! ```

use serde::{Deserialize, Serialize};

use dyadnet::simulation::{BilinearParams, ErrorModel, SimDesign};
use dyadnet::theory::CheckConfig;

use crate::{exit, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub run: RunSpec,
    /// When present the exit code reflects pass/fail.
    #[serde(default)]
    pub acceptance: Option<AcceptanceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunSpec {
    Coverage(SimDesign),
    LimitingVariance(CheckConfig),
    Consistency(ConsistencySpec),
    BiasDominance(BiasSpec),
    DcRank(RankSpec),
    Preset(PresetSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencySpec {
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default = "bilinear_model")]
    pub error_model: ErrorModel,
    #[serde(default)]
    pub bilinear: BilinearParams,
    #[serde(default)]
    pub seed: u64,
}

fn bilinear_model() -> ErrorModel {
    ErrorModel::Bilinear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    pub n: usize,
    pub reps: usize,
    #[serde(default)]
    pub bilinear: BilinearParams,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSpec {
    pub n_grid: Vec<usize>,
    #[serde(default = "default_rank_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_rank_draws() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    /// Coverage distributions across design draws for IID and bilinear
    /// errors at desk scale.
    PaperFiguresDesk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSpec {
    pub name: PresetName,
    #[serde(default = "default_preset_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_preset_draws")]
    pub n_design_draws: usize,
    #[serde(default = "default_preset_reps")]
    pub n_error_reps: usize,
    #[serde(default = "default_preset_models")]
    pub error_models: Vec<ErrorModel>,
    #[serde(default)]
    pub seed: u64,
}

fn default_preset_grid() -> Vec<usize> {
    vec![20, 40]
}

fn default_preset_draws() -> usize {
    20
}

fn default_preset_reps() -> usize {
    100
}

fn default_preset_models() -> Vec<ErrorModel> {
    vec![ErrorModel::Iid, ErrorModel::Bilinear]
}

impl PresetSpec {
    /// The coverage designs the preset runs, in output order.
    pub fn designs(&self) -> Vec<SimDesign> {
        let mut out = Vec::new();
        for &model in &self.error_models {
            for &n in &self.n_grid {
                let mut d = SimDesign::new(n, model, self.seed);
                d.n_design_draws = self.n_design_draws;
                d.n_error_reps = self.n_error_reps;
                out.push(d);
            }
        }
        out
    }
}

/// Pass rule for acceptance-tagged runs. Theory checks use their own
/// verdict; coverage bounds apply to every cell's median coverage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceSpec {
    #[serde(default)]
    pub min_median_coverage: Option<f64>,
    #[serde(default)]
    pub max_median_coverage: Option<f64>,
}

impl AcceptanceSpec {
    pub fn coverage_ok(&self, median: f64) -> bool {
        self.min_median_coverage.is_none_or(|lo| median >= lo) && self.max_median_coverage.is_none_or(|hi| median <= hi)
    }
}

pub fn parse_config(text: &str) -> Result<SimulateConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::new(exit::CONFIG, format!("invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_config_parses() {
        let c = parse_config("[run]\nkind = \"coverage\"\nn = 20\nn_design_draws = 5\nn_error_reps = 20\n").unwrap();
        match c.run {
            RunSpec::Coverage(d) => {
                assert_eq!((d.n, d.n_design_draws, d.n_error_reps), (20, 5, 20));
                assert_eq!(d.error_model, ErrorModel::Iid);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(c.acceptance.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "[run]\nkind = \"coverage\"\nn = 20\nreps = 3\n",
            "[run]\nkind = \"dc-rank\"\nn_grid = [4]\n[acceptance]\nstrict = true\n",
            "extra = 1\n[run]\nkind = \"dc-rank\"\nn_grid = [4]\n",
            "[run]\nkind = \"coverage\"\nn = 20\n[run.bilinear]\nsigma_q = 1.0\n",
        ] {
            let err = parse_config(text).unwrap_err();
            assert_eq!(err.code, exit::CONFIG, "{text}");
        }
    }

    #[test]
    fn preset_defaults() {
        let c = parse_config("[run]\nkind = \"preset\"\nname = \"paper-figures-desk\"\n").unwrap();
        let RunSpec::Preset(p) = c.run else { panic!() };
        assert_eq!(p.designs().len(), 4);
    }
}
