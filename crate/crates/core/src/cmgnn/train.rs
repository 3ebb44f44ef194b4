use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::estimate::{
    bootstrap_soft_labels, estimate_cm, impose_training_labels, supplementary_guidance, CmEstimate,
    CmSnapshot, DegreeWeighting,
};
use super::model::{
    build_prototypes, discrimination_loss, CmgnnArch, CmgnnInputs, CmgnnModel, CmgnnOptions,
    Guidance,
};
use crate::error::{Error, Result};
use crate::graph::{CompatibilityMatrix, Graph, Split};
use crate::rng::{self, Rng};
use crate::tensor::{softmax_rows, ParamStore, Tape};
use crate::train::{fit, FitReport, ForwardPass, TrainConfig, Trainable};

/// Ablations of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// No discrimination loss term at all (not even computed).
    WithoutDl,
    /// Unit degree weights in the compatibility estimate.
    WithoutDw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmgnnConfig {
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    /// Weight of the discrimination loss.
    pub lambda: f64,
    pub structure_info: bool,
    pub relu_variant: bool,
    pub sym_raw: bool,
    pub lr: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub ablation: Ablation,
}

impl Default for CmgnnConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 64,
            dropout: 0.5,
            lambda: 1.0,
            structure_info: false,
            relu_variant: false,
            sym_raw: false,
            lr: 0.01,
            weight_decay: 5e-4,
            patience: 200,
            max_epochs: 2000,
            ablation: Ablation::Full,
        }
    }
}

impl CmgnnConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn arch(&self) -> CmgnnArch {
        CmgnnArch {
            layers: self.layers,
            hidden: self.hidden,
            dropout: self.dropout,
            structure_info: self.structure_info,
            relu_variant: self.relu_variant,
            sym_raw: self.sym_raw,
            ..CmgnnArch::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            patience: self.patience,
            max_epochs: self.max_epochs,
        }
    }

    pub fn weighting(&self) -> DegreeWeighting {
        match self.ablation {
            Ablation::WithoutDw => DegreeWeighting::Unit,
            _ => DegreeWeighting::Thresholded,
        }
    }
}

/// A CMGNN model bound to a graph and split, with its compatibility state.
pub struct CmgnnTrainable<'a> {
    pub model: CmgnnModel,
    pub inputs: CmgnnInputs,
    pub guidance: Guidance,
    pub estimate: CmEstimate,
    pub options: CmgnnOptions,
    graph: &'a Graph,
    train: Vec<usize>,
    lambda: f64,
    ablation: Ablation,
    weighting: DegreeWeighting,
    /// Refresh attempts whose estimate failed; the previous `M^` was kept.
    pub failed_refreshes: Vec<(usize, String)>,
}

impl<'a> CmgnnTrainable<'a> {
    pub fn new(
        g: &'a Graph,
        split: &Split,
        cfg: &CmgnnConfig,
        store: &mut ParamStore,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.arch();
        let prototypes = build_prototypes(g, &split.train)?;
        let inputs = CmgnnInputs::new(g, prototypes, arch.sym_raw)?;
        let mut init = rng::seeded(seed, rng::stream::INIT);
        let model = CmgnnModel::new(
            &arch,
            g.n_nodes(),
            g.n_features(),
            g.n_classes(),
            store,
            &mut init,
        )?;
        let soft = bootstrap_soft_labels(g.labels(), g.n_classes(), &split.train)?;
        let weighting = cfg.weighting();
        let estimate = match estimate_cm(g, soft.view(), weighting) {
            Ok(e) => e,
            // no training node has a neighbour: start from pure homophily
            Err(Error::Numerical(_)) => CmEstimate {
                m_hat: CompatibilityMatrix::identity(g.n_classes()),
                confidence: vec![0.0; g.n_nodes()],
                degree_weights: vec![0.0; g.n_nodes()],
                epoch: None,
            },
            Err(e) => return Err(e),
        };
        let guidance = Self::guidance_for(&soft, &estimate)?;
        Ok(Self {
            model,
            inputs,
            guidance,
            estimate,
            options: CmgnnOptions::default(),
            graph: g,
            train: split.train.clone(),
            lambda: cfg.lambda,
            ablation: cfg.ablation,
            weighting,
            failed_refreshes: Vec::new(),
        })
    }

    fn guidance_for(soft: &Array2<f64>, est: &CmEstimate) -> Result<Guidance> {
        Ok(Guidance {
            m_hat: est.m_hat.to_array(),
            b_sup: supplementary_guidance(soft.view(), &est.m_hat)?,
        })
    }

    /// Replaces `C^` by the softmaxed logits (training rows re-imposed) and
    /// re-estimates `M^` and `B^sup`.
    pub fn refresh(&mut self, epoch: usize, logits: &Array2<f64>) -> Result<bool> {
        let mut soft = softmax_rows(logits);
        impose_training_labels(&mut soft, self.graph.labels(), &self.train)?;
        match estimate_cm(self.graph, soft.view(), self.weighting) {
            Ok(mut est) => {
                est.epoch = Some(epoch);
                self.guidance = Self::guidance_for(&soft, &est)?;
                self.estimate = est;
                Ok(true)
            }
            Err(Error::Numerical(m)) => {
                self.failed_refreshes.push((epoch, m));
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }
}

impl Trainable for CmgnnTrainable<'_> {
    fn forward(&self, tape: &mut Tape, store: &ParamStore, rng: &mut Rng) -> Result<ForwardPass> {
        let out = self.model.forward(
            tape,
            store,
            &self.inputs,
            &self.guidance,
            rng,
            &self.options,
        )?;
        let extra_loss = if self.ablation == Ablation::WithoutDl || !tape.is_train() {
            None
        } else {
            let dis = discrimination_loss(tape, &self.guidance.m_hat, out.z_ptt)?;
            Some(tape.scale(dis, self.lambda)?)
        };
        Ok(ForwardPass {
            logits: out.logits,
            extra_loss,
        })
    }

    fn on_improvement(
        &mut self,
        _store: &ParamStore,
        epoch: usize,
        logits: &Array2<f64>,
    ) -> Result<bool> {
        self.refresh(epoch, logits)
    }
}

/// Serialized outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: CmgnnConfig,
    pub seed: u64,
    pub split_id: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_curve: Vec<f64>,
    pub loss_curve: Vec<f64>,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub estimate: CmSnapshot,
    pub epoch_ms: Vec<f64>,
    pub refresh_epochs: Vec<usize>,
    pub failed_refreshes: Vec<(usize, String)>,
    pub test_predictions: Vec<usize>,
    pub diverged: Option<String>,
}

/// Trains CMGNN on one split.
pub fn train_cmgnn(
    g: &Graph,
    split: &Split,
    split_id: usize,
    cfg: &CmgnnConfig,
    seed: u64,
) -> Result<RunResult> {
    let mut store = ParamStore::new();
    let mut t = CmgnnTrainable::new(g, split, cfg, &mut store, seed)?;
    let rep: FitReport = fit(
        &mut t,
        &mut store,
        g.labels(),
        split,
        &cfg.train_config(),
        seed,
    )?;
    Ok(RunResult {
        config: *cfg,
        seed,
        split_id,
        best_epoch: rep.best_epoch,
        epochs_run: rep.epochs_run,
        val_curve: rep.val_curve,
        loss_curve: rep.loss_curve,
        best_val_accuracy: rep.best_val_accuracy,
        test_accuracy: rep.test_accuracy,
        estimate: t.estimate.snapshot(),
        epoch_ms: rep.epoch_ms,
        refresh_epochs: rep.refresh_epochs,
        failed_refreshes: t.failed_refreshes,
        test_predictions: rep.test_predictions,
        diverged: rep.diverged,
    })
}
