//! The classification pipeline: integration matrix, readout, optional MLP
//! head and cross-entropy loss, with the matching backward pass.

mod cv;
mod train;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::NeuralKForm;
use crate::nn::{Activation, GradientBuffer, Mlp, Trace};
use crate::quadrature::{
    integration_matrix_backward_into, integration_matrix_cached, IntegrationCache, QuadraturePlan,
};
use crate::simplicial::{ChainTuple, Embedding, SimplicialComplex};

pub use cv::{kfold_cv, stratified_folds, CvReport, FoldReport, Split};
pub use train::{
    evaluate, train, train_model, write_representations_csv, Evaluation, MetricRecord, PlateauScheduler, TrainOutcome,
};

/// Column statistic collapsing an integration matrix to one vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReadoutKind {
    #[serde(rename = "sum")]
    ColumnSum,
    #[serde(rename = "l1")]
    ColumnL1,
    #[serde(rename = "l2")]
    ColumnL2,
}

impl ReadoutKind {
    pub fn apply(self, x: &Array2<f64>) -> Vec<f64> {
        x.columns()
            .into_iter()
            .map(|col| match self {
                ReadoutKind::ColumnSum => col.sum(),
                ReadoutKind::ColumnL1 => col.iter().map(|v| v.abs()).sum(),
                ReadoutKind::ColumnL2 => col.iter().map(|v| v * v).sum::<f64>().sqrt(),
            })
            .collect()
    }

    /// `dLoss/dX` from `dLoss/dreadout`. The L1 subgradient at 0 and the L2
    /// gradient of an all-zero column are taken to be 0.
    pub fn backward(self, x: &Array2<f64>, readout: &[f64], upstream: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn(x.dim(), |(i, j)| {
            let v = x[[i, j]];
            let local = match self {
                ReadoutKind::ColumnSum => 1.0,
                ReadoutKind::ColumnL1 => {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                ReadoutKind::ColumnL2 => {
                    if readout[j] > 0.0 {
                        v / readout[j]
                    } else {
                        0.0
                    }
                }
            };
            upstream[j] * local
        })
    }
}

/// `-log softmax(logits)[label]`, shifted by the maximum logit.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// `softmax(logits) - onehot(label)`.
pub fn cross_entropy_grad(logits: &[f64], label: usize) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().enumerate().map(|(i, e)| e / total - if i == label { 1.0 } else { 0.0 }).collect()
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One embedded chain datum with its class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub complex: SimplicialComplex,
    pub embedding: Embedding,
    pub chains: ChainTuple,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub items: Vec<Item>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(items: Vec<Item>, num_classes: usize) -> Result<Self> {
        let data = Dataset { items, num_classes };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let n = self.ambient_dim();
        let k = self.items[0].chains.dim();
        for (i, item) in self.items.iter().enumerate() {
            if item.label >= self.num_classes {
                return Err(Error::InvalidArgument(format!(
                    "item {i} has label {} but there are {} classes",
                    item.label, self.num_classes
                )));
            }
            if item.embedding.ambient_dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "item {i} is embedded in R^{}",
                    item.embedding.ambient_dim()
                )));
            }
            if item.chains.dim() != k {
                return Err(Error::DimensionMismatch(format!("item {i} carries {}-chains", item.chains.dim())));
            }
            item.embedding.check_covers(&item.complex)?;
            item.chains.validate(&item.complex)?;
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.items[0].embedding.ambient_dim()
    }

    pub fn chain_dim(&self) -> usize {
        self.items[0].chains.dim()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The same data with every chain replaced by the standard basis of
    /// `k`-simplices; used to compare form degrees on one dataset.
    pub fn with_standard_chains(&self, k: usize) -> Result<Dataset> {
        let items = self
            .items
            .iter()
            .map(|item| Ok(Item { chains: item.complex.standard_basis_chains(k)?, ..item.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(items, self.num_classes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Softmax directly over the readout; needs one form per class.
    None,
    /// `Linear[l, H] - act - Linear[H, H/2] - act - Linear[H/2, classes]`.
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub hidden_dim: usize,
    /// Subdivision steps per simplex edge.
    pub steps: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub seed: u64,
    pub readout: ReadoutKind,
    pub k: usize,
    pub num_forms: usize,
    pub activation: Activation,
    pub head: HeadKind,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 16,
            hidden_dim: 16,
            steps: 5,
            max_epochs: 100,
            early_stop_patience: 40,
            plateau_factor: 0.5,
            plateau_patience: 10,
            min_lr: 1e-6,
            seed: 0,
            readout: ReadoutKind::ColumnL2,
            k: 1,
            num_forms: 5,
            activation: Activation::Relu,
            head: HeadKind::Mlp,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    /// Headless 1-form classifier for the three path classes.
    pub fn for_paths() -> Self {
        TrainConfig {
            k: 1,
            num_forms: 3,
            head: HeadKind::None,
            readout: ReadoutKind::ColumnSum,
            lr: 1e-2,
            ..Default::default()
        }
    }

    /// Headless 2-form classifier for the two surface classes.
    pub fn for_surfaces() -> Self {
        TrainConfig {
            k: 2,
            num_forms: 2,
            head: HeadKind::None,
            readout: ReadoutKind::ColumnSum,
            lr: 1e-2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr > 0.0 && self.lr.is_finite()),
            ("batch_size", self.batch_size > 0),
            ("hidden_dim", self.hidden_dim > 0),
            ("steps", self.steps > 0),
            ("num_forms", self.num_forms > 0),
            ("plateau_factor", self.plateau_factor > 0.0 && self.plateau_factor <= 1.0),
            ("min_lr", self.min_lr >= 0.0),
        ];
        match positive.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(Error::InvalidArgument(format!("invalid value for {name}"))),
            None => Ok(()),
        }
    }

    /// Hidden widths `[H, H/2]` shared by the form network and the head.
    pub fn hidden_layers(&self) -> Vec<usize> {
        vec![self.hidden_dim, (self.hidden_dim / 2).max(1)]
    }
}

/// A neural k-form followed by a readout and an optional MLP head.
#[derive(Clone, Debug, PartialEq)]
pub struct KFormClassifier {
    pub form: NeuralKForm,
    pub readout: ReadoutKind,
    pub head: Option<Mlp>,
    plan: QuadraturePlan,
    num_classes: usize,
}

/// Intermediate values from [`KFormClassifier::forward`].
pub struct ForwardCache {
    pub matrix: Array2<f64>,
    pub representation: Vec<f64>,
    integration: IntegrationCache,
    head: Option<Trace>,
}

/// Parameter gradients of a classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierGrads {
    pub form: GradientBuffer,
    pub head: Option<GradientBuffer>,
}

impl ClassifierGrads {
    pub fn zeros_like(model: &KFormClassifier) -> Self {
        ClassifierGrads {
            form: GradientBuffer::zeros_like(model.form.psi()),
            head: model.head.as_ref().map(GradientBuffer::zeros_like),
        }
    }

    pub fn add_assign(&mut self, other: &ClassifierGrads) {
        self.form.add_assign(&other.form);
        if let (Some(a), Some(b)) = (&mut self.head, &other.head) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.form.scale(factor);
        if let Some(h) = &mut self.head {
            h.scale(factor);
        }
    }

    /// Form gradients followed by head gradients, matching
    /// [`KFormClassifier::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.form.values().to_vec();
        if let Some(h) = &self.head {
            v.extend_from_slice(h.values());
        }
        v
    }
}

impl KFormClassifier {
    pub fn new(
        form: NeuralKForm,
        readout: ReadoutKind,
        head: Option<Mlp>,
        steps: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument("a classifier needs at least two classes".into()));
        }
        match &head {
            Some(h) if h.input_dim() != form.num_forms() || h.output_dim() != num_classes => {
                return Err(Error::ShapeMismatch(format!(
                    "head {:?} does not map {} readouts to {num_classes} classes",
                    h.sizes(),
                    form.num_forms()
                )))
            }
            None if form.num_forms() != num_classes => {
                return Err(Error::ShapeMismatch(format!(
                    "without a head the {} forms must match the {num_classes} classes",
                    form.num_forms()
                )))
            }
            _ => {}
        }
        let plan = QuadraturePlan::new(form.k(), steps)?;
        Ok(KFormClassifier { form, readout, head, plan, num_classes })
    }

    /// Randomly initialized model for data in `R^n` as described by `cfg`.
    pub fn from_config<R: Rng + ?Sized>(cfg: &TrainConfig, n: usize, num_classes: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let hidden = cfg.hidden_layers();
        let form = NeuralKForm::new(n, cfg.k, cfg.num_forms, &hidden, cfg.activation, rng)?;
        let head = match cfg.head {
            HeadKind::None => None,
            HeadKind::Mlp => {
                let sizes: Vec<usize> =
                    std::iter::once(cfg.num_forms).chain(hidden.iter().copied()).chain([num_classes]).collect();
                Some(Mlp::new(&sizes, cfg.activation, rng)?)
            }
        };
        KFormClassifier::new(form, cfg.readout, head, cfg.steps, num_classes)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn plan(&self) -> &QuadraturePlan {
        &self.plan
    }

    pub fn steps(&self) -> usize {
        self.plan.steps()
    }

    pub fn num_params(&self) -> usize {
        self.form.psi().num_params() + self.head.as_ref().map_or(0, Mlp::num_params)
    }

    /// Form parameters followed by head parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.form.psi().params().to_vec();
        if let Some(h) = &self.head {
            v.extend_from_slice(h.params());
        }
        v
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.num_params()
            )));
        }
        let (f, h) = params.split_at(self.form.psi().num_params());
        self.form.psi_mut().params_mut().copy_from_slice(f);
        if let Some(head) = &mut self.head {
            head.params_mut().copy_from_slice(h);
        }
        Ok(())
    }

    pub fn forward(&self, item: &Item) -> Result<(Vec<f64>, ForwardCache)> {
        let (matrix, integration) =
            integration_matrix_cached(&self.form, &item.complex, &item.embedding, &item.chains, &self.plan)?;
        let representation = self.readout.apply(&matrix);
        let (logits, head) = match &self.head {
            Some(h) => {
                let trace = h.forward_batch(&representation, 1)?;
                (trace.output().to_vec(), Some(trace))
            }
            None => (representation.clone(), None),
        };
        Ok((logits, ForwardCache { matrix, representation, integration, head }))
    }

    /// The readout vector of an item, before the head.
    pub fn represent(&self, item: &Item) -> Result<Vec<f64>> {
        Ok(self.forward(item)?.1.representation)
    }

    pub fn logits(&self, item: &Item) -> Result<Vec<f64>> {
        Ok(self.forward(item)?.0)
    }

    /// Gradients of an arbitrary loss given `dLoss/dlogits`.
    pub fn backward_from_logits(&self, cache: &ForwardCache, dlogits: &[f64]) -> Result<ClassifierGrads> {
        let mut grads = ClassifierGrads::zeros_like(self);
        let drep = match (&self.head, &cache.head, &mut grads.head) {
            (Some(h), Some(trace), Some(hg)) => h.backward_batch(trace, dlogits, hg)?,
            (None, None, None) => dlogits.to_vec(),
            _ => return Err(Error::InvalidArgument("forward cache does not belong to this model".into())),
        };
        let dx = self.readout.backward(&cache.matrix, &cache.representation, &drep);
        integration_matrix_backward_into(&self.form, &cache.integration, &dx, &mut grads.form)?;
        Ok(grads)
    }

    /// Cross-entropy gradients for one item.
    pub fn backward(&self, cache: &ForwardCache, logits: &[f64], label: usize) -> Result<ClassifierGrads> {
        self.backward_from_logits(cache, &cross_entropy_grad(logits, label))
    }

    /// Loss and gradients for one item.
    pub fn loss_and_grads(&self, item: &Item) -> Result<(f64, Vec<f64>, ClassifierGrads)> {
        let (logits, cache) = self.forward(item)?;
        let loss = cross_entropy(&logits, item.label);
        let grads = self.backward(&cache, &logits, item.label)?;
        Ok((loss, logits, grads))
    }
}
