use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cmgnn::{Ablation, CmgnnConfig};
use crate::error::{Error, Result};
use crate::htmp::{build_preset, MessagePassingSpec, PresetParams, PRESETS};
use crate::train::TrainConfig;

/// Everything needed to train one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// A preset name, `cmgnn`, or a path to a message-passing spec JSON file.
    pub model: String,
    pub dataset: Option<PathBuf>,
    /// Split ids to run; empty means every split of the dataset.
    pub splits: Vec<usize>,
    pub seed: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub dropout: f64,
    pub lambda: f64,
    pub layers: usize,
    pub nhidden: usize,
    pub relu_variant: bool,
    pub structure_info: bool,
    pub max_epochs: usize,
    pub ablation: Ablation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "cmgnn".into(),
            dataset: None,
            splits: Vec::new(),
            seed: 0,
            lr: 0.01,
            weight_decay: 5e-4,
            patience: 200,
            dropout: 0.5,
            lambda: 1.0,
            layers: 2,
            nhidden: 64,
            relu_variant: false,
            structure_info: false,
            max_epochs: 2000,
            ablation: Ablation::Full,
        }
    }
}

/// What [`RunConfig::model`] resolves to.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Cmgnn(CmgnnConfig),
    Htmp(MessagePassingSpec),
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !self.lr.is_finite() || self.lr < 0.0 {
            return bad("lr must be finite and >= 0");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight_decay must be >= 0");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return bad("lambda must be >= 0");
        }
        if self.nhidden == 0 || self.max_epochs == 0 {
            return bad("nhidden and max_epochs must be positive");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            patience: self.patience,
            max_epochs: self.max_epochs,
        }
    }

    pub fn cmgnn_config(&self) -> CmgnnConfig {
        CmgnnConfig {
            layers: self.layers,
            hidden: self.nhidden,
            dropout: self.dropout,
            lambda: self.lambda,
            structure_info: self.structure_info,
            relu_variant: self.relu_variant,
            sym_raw: false,
            lr: self.lr,
            weight_decay: self.weight_decay,
            patience: self.patience,
            max_epochs: self.max_epochs,
            ablation: self.ablation,
        }
    }

    pub fn preset_params(&self) -> PresetParams {
        PresetParams {
            layers: self.layers,
            hidden: self.nhidden,
            dropout: self.dropout,
            relu_variant: self.relu_variant,
            ..PresetParams::default()
        }
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        self.validate()?;
        let name = self.model.as_str();
        if name == "cmgnn" {
            return Ok(ModelKind::Cmgnn(self.cmgnn_config()));
        }
        if PRESETS.contains(&name) {
            return Ok(ModelKind::Htmp(build_preset(name, &self.preset_params())?));
        }
        if name.ends_with(".json") {
            let path = Path::new(name);
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Ok(ModelKind::Htmp(MessagePassingSpec::from_json(&text)?));
        }
        Err(Error::Config(format!(
            "unknown model {name:?}; expected cmgnn, a spec .json path, or one of {}",
            PRESETS.join(", ")
        )))
    }
}
