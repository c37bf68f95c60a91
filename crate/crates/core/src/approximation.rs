//! Least-squares fitting of a neural k-form to a fixed target form, by
//! matching coefficient functions on a regular grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::NeuralKForm;
use crate::nn::{Activation, Adam, Optimizer};

/// `e * exp(-1 / (1 - r^2))` for `r < 1`, else 0; peaks at 1.
pub fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// A smooth 1-form on `R^2` supported in the unit disk:
/// `bump(|p|) * (sin(3x) dx + cos(2y) dy)`.
pub fn compact_target(p: &[f64]) -> Vec<f64> {
    let b = bump((p[0] * p[0] + p[1] * p[1]).sqrt());
    vec![b * (3.0 * p[0]).sin(), b * (2.0 * p[1]).cos()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Width of the single hidden layer.
    pub width: usize,
    pub iterations: usize,
    pub lr: f64,
    /// Grid points per axis.
    pub grid: usize,
    /// The grid covers `[-half_width, half_width]^n`.
    pub half_width: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            width: 64,
            iterations: 2000,
            lr: 1e-2,
            grid: 32,
            half_width: 1.25,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub form: NeuralKForm,
    /// Mean squared coefficient error on the training grid.
    pub train_error: f64,
    /// The same on the grid of cell midpoints.
    pub test_error: f64,
}

fn grid_points(n: usize, per_axis: usize, lo: f64, step: f64) -> Vec<f64> {
    let total = per_axis.pow(n as u32);
    let mut out = Vec::with_capacity(total * n);
    for mut idx in 0..total {
        for _ in 0..n {
            out.push(lo + step * (idx % per_axis) as f64);
            idx /= per_axis;
        }
    }
    out
}

/// Mean squared difference between the coefficients of `form` and `target`
/// over `points` (row major, `n` per point).
pub fn coefficient_error(form: &NeuralKForm, target: &dyn Fn(&[f64]) -> Vec<f64>, points: &[f64]) -> Result<f64> {
    let n = form.n();
    let batch = points.len() / n;
    let out = form.psi().forward_batch(points, batch)?.into_output();
    let width = form.psi().output_dim();
    let mut total = 0.0;
    for (b, p) in points.chunks(n).enumerate() {
        for (o, t) in out[b * width..(b + 1) * width].iter().zip(target(p)) {
            total += (o - t).powi(2);
        }
    }
    Ok(total / (batch * width) as f64)
}

/// Fits a single `k`-form on `R^n` with one hidden layer to `target`, which
/// returns the `C(n, k)` coefficients in multi-index order, by full-batch
/// Adam on the squared coefficient error.
pub fn fit_form(n: usize, k: usize, target: &dyn Fn(&[f64]) -> Vec<f64>, cfg: &FitConfig) -> Result<FitOutcome> {
    if cfg.grid < 2 || cfg.width == 0 || cfg.half_width.is_nan() || cfg.half_width <= 0.0 {
        return Err(Error::InvalidArgument("fit needs grid >= 2, width >= 1 and a positive extent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut form = NeuralKForm::new(n, k, 1, &[cfg.width], cfg.activation, &mut rng)?;
    let step = 2.0 * cfg.half_width / (cfg.grid - 1) as f64;
    let train = grid_points(n, cfg.grid, -cfg.half_width, step);
    let test = grid_points(n, cfg.grid - 1, -cfg.half_width + step / 2.0, step);
    let batch = train.len() / n;
    let width = form.psi().output_dim();
    let targets: Vec<f64> = train
        .chunks(n)
        .flat_map(|p| {
            let t = target(p);
            assert_eq!(t.len(), width, "target must return one coefficient per multi-index");
            t
        })
        .collect();
    let scale = 2.0 / (batch * width) as f64;
    let mut adam = Adam::new(cfg.lr);
    for _ in 0..cfg.iterations {
        let out = form.psi().forward_batch(&train, batch)?.into_output();
        let upstream: Vec<f64> = out.iter().zip(&targets).map(|(o, t)| scale * (o - t)).collect();
        let (grads, _) = form.psi().backward(&train, batch, &upstream)?;
        adam.step(form.psi_mut().params_mut(), grads.values())?;
    }
    let train_error = coefficient_error(&form, target, &train)?;
    let test_error = coefficient_error(&form, target, &test)?;
    Ok(FitOutcome { form, train_error, test_error })
}
