// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Tunable constants of the scoring, allocation and composition formulas.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::DEFAULT_DEAD_THRESHOLD;

/// Weights of the composite region quality score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub conn: f64,
    pub gate: f64,
    pub readout: f64,
    pub uniformity: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            conn: 0.25,
            gate: 0.35,
            readout: 0.20,
            uniformity: 0.20,
        }
    }
}

/// Weights of the online allocation fitness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub size: f64,
    pub conn: f64,
    pub quality: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            size: 0.2,
            conn: 0.4,
            quality: 0.4,
        }
    }
}

/// Weights of the marginal score used when growing a composed footprint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeWeights {
    pub quality: f64,
    pub conn: f64,
    pub bridge: f64,
}

impl Default for ComposeWeights {
    fn default() -> Self {
        ComposeWeights {
            quality: 0.4,
            conn: 0.4,
            bridge: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub score_weights: ScoreWeights,
    pub fitness_weights: FitnessWeights,
    pub compose_weights: ComposeWeights,
    pub min_region_size: usize,
    pub shots: usize,
    pub seed: u64,
    pub one_qubit_depol: f64,
    pub dead_threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            score_weights: ScoreWeights::default(),
            fitness_weights: FitnessWeights::default(),
            compose_weights: ComposeWeights::default(),
            min_region_size: 3,
            shots: 1024,
            seed: 0,
            one_qubit_depol: 1e-4,
            dead_threshold: DEFAULT_DEAD_THRESHOLD,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{0} weights must be finite and non-negative")]
    NegativeWeight(&'static str),
    #[error("score weights sum to {0}, expected 1")]
    ScoreSum(f64),
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("{field} = {value} outside [0, 1]")]
    Probability { field: &'static str, value: f64 },
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = self.score_weights;
        let f = self.fitness_weights;
        let c = self.compose_weights;
        let ok = |ws: &[f64]| ws.iter().all(|w| w.is_finite() && *w >= 0.0);
        if !ok(&[s.conn, s.gate, s.readout, s.uniformity]) {
            return Err(ConfigError::NegativeWeight("score"));
        }
        if !ok(&[f.size, f.conn, f.quality]) {
            return Err(ConfigError::NegativeWeight("fitness"));
        }
        if !ok(&[c.quality, c.conn, c.bridge]) {
            return Err(ConfigError::NegativeWeight("compose"));
        }
        let sum = s.conn + s.gate + s.readout + s.uniformity;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::ScoreSum(sum));
        }
        if self.min_region_size == 0 {
            return Err(ConfigError::NotPositive("min_region_size"));
        }
        if self.shots == 0 {
            return Err(ConfigError::NotPositive("shots"));
        }
        for (field, value) in [
            ("one_qubit_depol", self.one_qubit_depol),
            ("dead_threshold", self.dead_threshold),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability { field, value });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn score_weights_must_sum_to_one() {
        let mut c = Config::default();
        c.score_weights.gate = 0.5;
        assert!(matches!(c.validate(), Err(ConfigError::ScoreSum(_))));
        c.score_weights.gate = -0.35;
        assert_eq!(c.validate(), Err(ConfigError::NegativeWeight("score")));
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c: Config = serde_json::from_str(r#"{"shots": 2048}"#).unwrap();
        assert_eq!(c.shots, 2048);
        assert_eq!(c.score_weights, ScoreWeights::default());
        assert!(serde_json::from_str::<Config>(r#"{"shotz": 1}"#).is_err());
    }
}
