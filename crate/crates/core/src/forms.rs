//! Neural k-forms and the pieces needed to evaluate them on simplices.

use itertools::Itertools;
use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};
use crate::simplicial::{Embedding, SimplicialComplex};

/// The `C(n, k)` increasing k-tuples over `0..n` in lexicographic order.
///
/// Indices are zero based; [`MultiIndexTable::one_based`] gives the
/// conventional `dx_1 ... dx_n` labelling. The order is part of the
/// checkpoint format and never changes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndexTable {
    n: usize,
    k: usize,
    indices: Vec<Vec<usize>>,
}

impl MultiIndexTable {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidArgument(format!("form degree {k} exceeds ambient dimension {n}")));
        }
        let indices = (0..n).combinations(k).collect();
        Ok(MultiIndexTable { n, k, indices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn rank(&self, index: &[usize]) -> Option<usize> {
        self.indices.binary_search_by(|i| i.as_slice().cmp(index)).ok()
    }

    pub fn one_based(&self) -> Vec<Vec<usize>> {
        self.indices.iter().map(|i| i.iter().map(|v| v + 1).collect()).collect()
    }

    /// Column label such as `dx1dx3`, or `1` for the 0-form basis.
    pub fn label(&self, rank: usize) -> String {
        let index = &self.indices[rank];
        if index.is_empty() {
            "1".to_string()
        } else {
            index.iter().map(|i| format!("dx{}", i + 1)).collect()
        }
    }
}

/// Jacobian of the affine map sending the standard simplex onto the
/// embedded simplex: column `j` is `phi(v_{j+1}) - phi(v_0)`.
pub fn affine_jacobian(embedding: &Embedding, vertices: &[usize]) -> Result<Array2<f64>> {
    let n = embedding.ambient_dim();
    if let Some(&missing) = vertices.iter().find(|&&v| v >= embedding.num_points()) {
        return Err(Error::VertexOutOfRange { index: missing, num_vertices: embedding.num_points() });
    }
    let (&v0, rest) =
        vertices.split_first().ok_or_else(|| Error::InvalidArgument("simplex without vertices".into()))?;
    let base = embedding.point(v0);
    Ok(Array2::from_shape_fn((n, rest.len()), |(i, j)| embedding.point(rest[j])[i] - base[i]))
}

/// [`affine_jacobian`] of the `index`-th k-simplex of a complex.
pub fn simplex_jacobian(
    complex: &SimplicialComplex,
    embedding: &Embedding,
    k: usize,
    index: usize,
) -> Result<Array2<f64>> {
    affine_jacobian(embedding, complex.simplex(k, index)?)
}

/// The monomial form `dx_I` on the columns of `jacobian`: the determinant of
/// the rows selected by `index`. Equals 1 for the empty index.
pub fn epsilon(jacobian: &Array2<f64>, index: &[usize]) -> Result<f64> {
    let (n, k) = jacobian.dim();
    if index.len() != k {
        return Err(Error::InvalidArgument(format!("multi-index of length {} for {k} vectors", index.len())));
    }
    if index.windows(2).any(|w| w[0] >= w[1]) || index.iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument(format!("malformed multi-index {index:?} in dimension {n}")));
    }
    Ok(minor(jacobian, index))
}

/// All `dx_I` values of `jacobian` in table order.
pub fn epsilons(jacobian: &Array2<f64>, table: &MultiIndexTable) -> Vec<f64> {
    table.indices().iter().map(|i| minor(jacobian, i)).collect()
}

fn minor(d: &Array2<f64>, rows: &[usize]) -> f64 {
    let m = |r: usize, c: usize| d[[rows[r], c]];
    match rows.len() {
        0 => 1.0,
        1 => m(0, 0),
        2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
        3 => {
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        }
        k => {
            let mut a: Vec<f64> = (0..k * k).map(|x| m(x / k, x % k)).collect();
            lu_determinant(&mut a, k)
        }
    }
}

/// Determinant by Gaussian elimination with partial pivoting; `a` is row
/// major and destroyed.
fn lu_determinant(a: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x * k + col].abs().total_cmp(&a[y * k + col].abs())).unwrap();
        if a[pivot * k + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(pivot * k + j, col * k + j);
            }
            det = -det;
        }
        let p = a[col * k + col];
        det *= p;
        for row in col + 1..k {
            let f = a[row * k + col] / p;
            for j in col..k {
                a[row * k + j] -= f * a[col * k + j];
            }
        }
    }
    det
}

/// `l` learnable k-forms on `R^n` sharing one MLP.
///
/// The network maps a point to `C(n, k) * l` values; the coefficient of
/// `dx_I` in form `j` sits at output `j * C(n, k) + rank(I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralKForm {
    psi: Mlp,
    num_forms: usize,
    table: MultiIndexTable,
}

impl NeuralKForm {
    /// A freshly initialized form with the given hidden layer widths.
    pub fn new<R: Rng + ?Sized>(
        n: usize,
        k: usize,
        num_forms: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let table = MultiIndexTable::new(n, k)?;
        let sizes: Vec<usize> =
            std::iter::once(n).chain(hidden.iter().copied()).chain([table.len() * num_forms]).collect();
        NeuralKForm::from_mlp(Mlp::new(&sizes, activation, rng)?, n, k, num_forms)
    }

    pub fn from_mlp(psi: Mlp, n: usize, k: usize, num_forms: usize) -> Result<Self> {
        let table = MultiIndexTable::new(n, k)?;
        if num_forms == 0 {
            return Err(Error::InvalidArgument("a neural form needs at least one form".into()));
        }
        if psi.input_dim() != n || psi.output_dim() != table.len() * num_forms {
            return Err(Error::ShapeMismatch(format!(
                "network {:?} cannot carry {num_forms} {k}-forms on R^{n}",
                psi.sizes()
            )));
        }
        Ok(NeuralKForm { psi, num_forms, table })
    }

    pub fn psi(&self) -> &Mlp {
        &self.psi
    }

    pub fn psi_mut(&mut self) -> &mut Mlp {
        &mut self.psi
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    pub fn k(&self) -> usize {
        self.table.k()
    }

    pub fn num_forms(&self) -> usize {
        self.num_forms
    }

    pub fn table(&self) -> &MultiIndexTable {
        &self.table
    }

    /// Output position of the `dx_I` coefficient of form `j`.
    pub fn slot(&self, index_rank: usize, form: usize) -> usize {
        form * self.table.len() + index_rank
    }

    /// Coefficient functions at `p` as an `l x C(n, k)` matrix.
    pub fn eval_scalings(&self, p: &[f64]) -> Result<Array2<f64>> {
        if p.len() != self.n() {
            return Err(Error::DimensionMismatch(format!("point of length {} in R^{}", p.len(), self.n())));
        }
        let out = self.psi.forward(p)?;
        Ok(Array2::from_shape_vec((self.num_forms, self.table.len()), out).expect("layout size"))
    }

    /// The forms `omega R` for an `l x l'` matrix `R`: form `j'` of the
    /// result is `sum_j R[j, j'] omega_j`. Exact because the last layer is
    /// linear.
    pub fn mix(&self, right: &Array2<f64>) -> Result<NeuralKForm> {
        if right.nrows() != self.num_forms {
            return Err(Error::ShapeMismatch(format!(
                "mixing matrix has {} rows for {} forms",
                right.nrows(),
                self.num_forms
            )));
        }
        let c = self.table.len();
        let last = self.psi.num_layers() - 1;
        let n_in = self.psi.sizes()[last];
        let mut sizes = self.psi.sizes().to_vec();
        *sizes.last_mut().unwrap() = c * right.ncols();
        let mut mixed = Mlp::zeros(&sizes, self.psi.activation())?;
        for l in 0..last {
            mixed.weights_mut(l).copy_from_slice(self.psi.weights(l));
            mixed.bias_mut(l).copy_from_slice(self.psi.bias(l));
        }
        let (w, b) = (self.psi.weights(last), self.psi.bias(last));
        let mut new_w = vec![0.0; c * right.ncols() * n_in];
        let mut new_b = vec![0.0; c * right.ncols()];
        for jp in 0..right.ncols() {
            for i in 0..c {
                let dst = jp * c + i;
                for j in 0..self.num_forms {
                    let r = right[[j, jp]];
                    let src = j * c + i;
                    new_b[dst] += r * b[src];
                    for h in 0..n_in {
                        new_w[dst * n_in + h] += r * w[src * n_in + h];
                    }
                }
            }
        }
        mixed.weights_mut(last).copy_from_slice(&new_w);
        mixed.bias_mut(last).copy_from_slice(&new_b);
        NeuralKForm::from_mlp(mixed, self.n(), self.k(), right.ncols())
    }
}
