//! Central finite-difference checks of the analytic gradients, from a bare
//! function up to the full classification pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forms::NeuralKForm;
use crate::model::{cross_entropy, Item, KFormClassifier, ReadoutKind};
use crate::nn::{Activation, Mlp};
use crate::simplicial::{Chain, ChainTuple, Embedding, SimplicialComplex};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub eps: f64,
    pub tolerance: f64,
    /// Lower bound on the denominator of the relative error.
    pub floor: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { eps: 1e-5, tolerance: 1e-4, floor: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub name: String,
    pub num_params: usize,
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub passed: bool,
}

/// `|a - f| / max(|a|, |f|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against central differences of `loss` at `params`.
pub fn check_gradient<F>(
    name: &str,
    loss: F,
    params: &[f64],
    analytic: &[f64],
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    assert_eq!(params.len(), analytic.len(), "one analytic entry per parameter");
    let mut probe = params.to_vec();
    let (mut worst, mut worst_param) = (0.0f64, 0);
    for i in 0..params.len() {
        probe[i] = params[i] + cfg.eps;
        let up = loss(&probe)?;
        probe[i] = params[i] - cfg.eps;
        let down = loss(&probe)?;
        probe[i] = params[i];
        let err = relative_error(analytic[i], (up - down) / (2.0 * cfg.eps), cfg.floor);
        if err > worst || err.is_nan() {
            worst = err;
            worst_param = i;
        }
    }
    Ok(GradcheckReport {
        name: name.to_string(),
        num_params: params.len(),
        max_rel_error: worst,
        worst_param,
        passed: worst < cfg.tolerance,
    })
}

/// A random item whose chains are `k`-chains on a small 2-complex in `R^n`.
pub fn random_item<R: Rng + ?Sized>(n: usize, k: usize, num_chains: usize, rng: &mut R) -> Result<Item> {
    let complex = SimplicialComplex::build([[0, 1, 2], [1, 2, 3], [2, 3, 4], [0, 4, 5]], 6)?;
    let coords: Vec<f64> = (0..6 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let count = complex.count(k);
    let chains = (0..num_chains)
        .map(|_| {
            let terms: Vec<(usize, f64)> =
                (0..3).map(|_| (rng.random_range(0..count), rng.random_range(-2.0..2.0))).collect();
            Chain::new(k, terms)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Item { complex, embedding: Embedding::new(n, coords)?, chains: ChainTuple::new(chains)?, label: 0 })
}

/// A seeded tanh pipeline with an MLP head and a smooth readout.
pub fn random_pipeline(k: usize, readout: ReadoutKind, seed: u64) -> Result<(KFormClassifier, Item)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, forms, classes) = (3, 3, 3);
    let form = NeuralKForm::new(n, k, forms, &[6, 4], Activation::Tanh, &mut rng)?;
    let head = Mlp::new(&[forms, 5, classes], Activation::Tanh, &mut rng)?;
    let model = KFormClassifier::new(form, readout, Some(head), 3, classes)?;
    let mut item = random_item(n, k, 4, &mut rng)?;
    item.label = rng.random_range(0..classes);
    Ok((model, item))
}

/// Finite-difference check of every parameter of the cross-entropy loss
/// of `model` on `item`. With `corrupt` the analytic gradient is perturbed
/// first, which must make the check fail.
pub fn check_pipeline(
    name: &str,
    model: &KFormClassifier,
    item: &Item,
    corrupt: bool,
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport> {
    let (_, _, grads) = model.loss_and_grads(item)?;
    let mut analytic = grads.flatten();
    if corrupt {
        let i = analytic.len() / 2;
        analytic[i] += 0.1 * analytic[i].abs().max(1.0);
    }
    let loss = |p: &[f64]| {
        let mut m = model.clone();
        m.set_params(p)?;
        Ok(cross_entropy(&m.logits(item)?, item.label))
    };
    check_gradient(name, loss, &model.params(), &analytic, cfg)
}

/// `instances` seeded pipelines cycling through `k = 0, 1, 2` and the sum
/// and L2 readouts.
pub fn pipeline_suite(
    seed: u64,
    instances: usize,
    corrupt: bool,
    cfg: &GradcheckConfig,
) -> Result<Vec<GradcheckReport>> {
    (0..instances)
        .map(|i| {
            let k = i % 3;
            let readout = if (i / 3) % 2 == 0 { ReadoutKind::ColumnSum } else { ReadoutKind::ColumnL2 };
            let s = seed.wrapping_add(i as u64);
            let (model, item) = random_pipeline(k, readout, s)?;
            let name = format!("pipeline k={k} readout={readout:?} seed={s}");
            check_pipeline(&name, &model, &item, corrupt, cfg)
        })
        .collect()
}
