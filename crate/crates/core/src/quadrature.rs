//! Integration of neural k-forms over embedded simplices and chains.
//!
//! The standard simplex `{t : t_i >= 0, sum t_i <= 1}` is cut into `h^k`
//! congruent sub-simplices by the edgewise (Freudenthal) subdivision, and
//! the pulled-back integrand is averaged over the vertices of each cell:
//!
//! ```text
//! int g  ~=  sum_cells vol(cell) / (k + 1) * sum_{v in cell} g(v)
//! ```
//!
//! For `k = 1` this is the trapezoid rule. Subdivision vertices shared by
//! several cells are evaluated once with their weights summed.

use std::collections::BTreeMap;

use itertools::Itertools;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::forms::{epsilons, simplex_jacobian, NeuralKForm};
use crate::nn::{GradientBuffer, Trace};
use crate::simplicial::{Chain, ChainTuple, Embedding, SimplicialComplex};

/// `m x l` matrix whose entry `(i, j)` integrates form `j` over chain `i`.
pub type IntegrationMatrix = Array2<f64>;

/// One cell of a subdivided standard simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Vertices as integer multiples of `1/h` in simplex coordinates.
    pub lattice: Vec<Vec<usize>>,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexSubdivision {
    k: usize,
    h: usize,
    cells: Vec<Cell>,
}

impl SimplexSubdivision {
    /// Edgewise subdivision of the standard k-simplex into `h^k` cells of
    /// volume `1 / (k! h^k)`.
    ///
    /// Cells are the Kuhn simplices `b, b + e_p0, b + e_p0 + e_p1, ...` of
    /// the integer grid that lie inside `h >= y_1 >= ... >= y_k >= 0`,
    /// mapped to simplex coordinates by `t_i = (y_i - y_{i+1}) / h`, which
    /// preserves volume.
    pub fn new(k: usize, h: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("subdivision needs k >= 1".into()));
        }
        if h == 0 {
            return Err(Error::InvalidArgument("subdivision needs at least one step".into()));
        }
        let volume = 1.0 / (factorial(k) * (h as f64).powi(k as i32));
        let inside = |y: &[usize]| y[0] <= h && y.windows(2).all(|w| w[0] >= w[1]);
        let perms: Vec<Vec<usize>> = (0..k).permutations(k).collect();
        let mut cells = Vec::with_capacity(h.pow(k as u32));
        for base in (0..k).map(|_| 0..h).multi_cartesian_product() {
            // The cell's first vertex must satisfy the ordering too.
            if !inside(&base) {
                continue;
            }
            for perm in &perms {
                let mut y = base.clone();
                let mut verts = vec![y.clone()];
                let mut ok = true;
                for &axis in perm {
                    y[axis] += 1;
                    if !inside(&y) {
                        ok = false;
                        break;
                    }
                    verts.push(y.clone());
                }
                if ok {
                    let lattice = verts
                        .iter()
                        .map(|y| (0..k).map(|i| y[i] - y.get(i + 1).copied().unwrap_or(0)).collect())
                        .collect();
                    cells.push(Cell { lattice, volume });
                }
            }
        }
        debug_assert_eq!(cells.len(), h.pow(k as u32));
        Ok(SimplexSubdivision { k, h, cells })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn steps(&self) -> usize {
        self.h
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Vertex `v` of cell `c` in simplex coordinates.
    pub fn vertex(&self, c: usize, v: usize) -> Vec<f64> {
        self.cells[c].lattice[v].iter().map(|&a| a as f64 / self.h as f64).collect()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Deduplicated evaluation nodes of a subdivision with their weights.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraturePlan {
    k: usize,
    h: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadraturePlan {
    /// Vertex-average rule on the `h`-step subdivision. For `k = 0` this is
    /// point evaluation: one node with weight 1.
    pub fn new(k: usize, h: usize) -> Result<Self> {
        if k == 0 {
            return Ok(QuadraturePlan { k, h, nodes: Vec::new(), weights: vec![1.0] });
        }
        let sub = SimplexSubdivision::new(k, h)?;
        let mut acc: BTreeMap<&[usize], f64> = BTreeMap::new();
        for cell in sub.cells() {
            let w = cell.volume / (k + 1) as f64;
            for v in &cell.lattice {
                *acc.entry(v.as_slice()).or_insert(0.0) += w;
            }
        }
        let nodes = acc.keys().flat_map(|v| v.iter().map(|&a| a as f64 / h as f64)).collect();
        let weights = acc.into_values().collect();
        Ok(QuadraturePlan { k, h, nodes, weights })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn steps(&self) -> usize {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.k..(i + 1) * self.k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Integrals of every form over one simplex, with what backward needs.
struct SimplexEval {
    eps: Vec<f64>,
    integrals: Vec<f64>,
    /// `None` when the simplex is degenerate and the network was not run.
    trace: Option<Trace>,
}

fn check_form(form: &NeuralKForm, embedding: &Embedding, plan: &QuadraturePlan) -> Result<()> {
    if form.n() != embedding.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "form on R^{} applied to an embedding in R^{}",
            form.n(),
            embedding.ambient_dim()
        )));
    }
    if form.k() != plan.k() {
        return Err(Error::DimensionMismatch(format!(
            "{}-form integrated with a degree-{} quadrature plan",
            form.k(),
            plan.k()
        )));
    }
    Ok(())
}

fn eval_simplex(
    form: &NeuralKForm,
    complex: &SimplicialComplex,
    embedding: &Embedding,
    index: usize,
    plan: &QuadraturePlan,
) -> Result<SimplexEval> {
    let (n, k, c, l) = (form.n(), form.k(), form.table().len(), form.num_forms());
    let jac = simplex_jacobian(complex, embedding, k, index)?;
    let eps = epsilons(&jac, form.table());
    if eps.iter().all(|&e| e == 0.0) {
        return Ok(SimplexEval { eps, integrals: vec![0.0; l], trace: None });
    }
    let base = embedding.point(complex.simplex(k, index)?[0]);
    let mut points = Vec::with_capacity(plan.num_nodes() * n);
    for node in 0..plan.num_nodes() {
        let t = plan.node(node);
        for i in 0..n {
            let mut x = base[i];
            for (a, &ta) in t.iter().enumerate() {
                x += ta * jac[[i, a]];
            }
            points.push(x);
        }
    }
    let trace = form.psi().forward_batch(&points, plan.num_nodes())?;
    let mut integrals = vec![0.0; l];
    for (row, &w) in trace.output().chunks_exact(c * l).zip(plan.weights()) {
        for (j, acc) in integrals.iter_mut().enumerate() {
            let mut g = 0.0;
            for (alpha, e) in row[j * c..(j + 1) * c].iter().zip(&eps) {
                g += alpha * e;
            }
            *acc += w * g;
        }
    }
    Ok(SimplexEval { eps, integrals, trace: Some(trace) })
}

/// Integral of form `j` over the `index`-th k-simplex, `k >= 1`.
///
/// 0-forms are evaluated at points rather than integrated; use
/// [`evaluate_points`].
pub fn integrate_simplex(
    form: &NeuralKForm,
    j: usize,
    complex: &SimplicialComplex,
    embedding: &Embedding,
    index: usize,
    plan: &QuadraturePlan,
) -> Result<f64> {
    if form.k() == 0 {
        return Err(Error::InvalidArgument("0-forms are evaluated with evaluate_points".into()));
    }
    check_form(form, embedding, plan)?;
    check_form_index(form, j)?;
    Ok(eval_simplex(form, complex, embedding, index, plan)?.integrals[j])
}

fn check_form_index(form: &NeuralKForm, j: usize) -> Result<()> {
    if j >= form.num_forms() {
        return Err(Error::InvalidArgument(format!("form index {j} out of {}", form.num_forms())));
    }
    Ok(())
}

/// Values of a 0-form at the given vertices, one row per vertex.
pub fn evaluate_points(form: &NeuralKForm, embedding: &Embedding, vertices: &[usize]) -> Result<Array2<f64>> {
    if form.k() != 0 {
        return Err(Error::InvalidArgument(format!("{}-forms must be integrated, not evaluated", form.k())));
    }
    if form.n() != embedding.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "form on R^{} applied to an embedding in R^{}",
            form.n(),
            embedding.ambient_dim()
        )));
    }
    let mut out = Array2::zeros((vertices.len(), form.num_forms()));
    for (row, &v) in vertices.iter().enumerate() {
        if v >= embedding.num_points() {
            return Err(Error::VertexOutOfRange { index: v, num_vertices: embedding.num_points() });
        }
        let y = form.psi().forward(embedding.point(v))?;
        out.row_mut(row).iter_mut().zip(y).for_each(|(o, y)| *o = y);
    }
    Ok(out)
}

/// `sum_sigma lambda_sigma * int_sigma omega_j`.
pub fn integrate_chain(
    form: &NeuralKForm,
    j: usize,
    complex: &SimplicialComplex,
    embedding: &Embedding,
    chain: &Chain,
    plan: &QuadraturePlan,
) -> Result<f64> {
    check_form_index(form, j)?;
    let tuple = ChainTuple::new(vec![chain.clone()])?;
    Ok(integration_matrix(form, complex, embedding, &tuple, plan)?[[0, j]])
}

/// Forward state kept for [`integration_matrix_backward`].
pub struct IntegrationCache {
    simplices: Vec<SimplexEval>,
    /// Per chain, `(position in simplices, coefficient)`.
    chain_terms: Vec<Vec<(usize, f64)>>,
    weights: Vec<f64>,
    num_forms: usize,
}

impl IntegrationCache {
    pub fn num_chains(&self) -> usize {
        self.chain_terms.len()
    }
}

pub fn integration_matrix(
    form: &NeuralKForm,
    complex: &SimplicialComplex,
    embedding: &Embedding,
    chains: &ChainTuple,
    plan: &QuadraturePlan,
) -> Result<IntegrationMatrix> {
    Ok(integration_matrix_cached(form, complex, embedding, chains, plan)?.0)
}

/// The integration matrix together with the cache needed to differentiate
/// it. Each simplex touched by any chain is integrated once for all forms.
pub fn integration_matrix_cached(
    form: &NeuralKForm,
    complex: &SimplicialComplex,
    embedding: &Embedding,
    chains: &ChainTuple,
    plan: &QuadraturePlan,
) -> Result<(IntegrationMatrix, IntegrationCache)> {
    check_form(form, embedding, plan)?;
    embedding.check_covers(complex)?;
    if chains.dim() != form.k() {
        return Err(Error::DimensionMismatch(format!("{}-chains integrated against {}-forms", chains.dim(), form.k())));
    }
    chains.validate(complex)?;

    let mut position: BTreeMap<usize, usize> = BTreeMap::new();
    for chain in chains.chains() {
        for &(s, _) in chain.terms() {
            position.entry(s).or_insert(0);
        }
    }
    let mut simplices = Vec::with_capacity(position.len());
    for (slot, (&s, pos)) in position.iter_mut().enumerate() {
        *pos = slot;
        simplices.push(eval_simplex(form, complex, embedding, s, plan)?);
    }

    let l = form.num_forms();
    let mut x = Array2::zeros((chains.len(), l));
    let mut chain_terms = Vec::with_capacity(chains.len());
    for (i, chain) in chains.chains().iter().enumerate() {
        let terms: Vec<(usize, f64)> = chain.terms().iter().map(|&(s, lambda)| (position[&s], lambda)).collect();
        for &(slot, lambda) in &terms {
            for j in 0..l {
                x[[i, j]] += lambda * simplices[slot].integrals[j];
            }
        }
        chain_terms.push(terms);
    }
    let cache = IntegrationCache { simplices, chain_terms, weights: plan.weights().to_vec(), num_forms: l };
    Ok((x, cache))
}

/// Accumulates `dLoss/dpsi` for `upstream = dLoss/dX` into `grads`.
///
/// Only the network receives gradient; the embedding is data.
pub fn integration_matrix_backward_into(
    form: &NeuralKForm,
    cache: &IntegrationCache,
    upstream: &Array2<f64>,
    grads: &mut GradientBuffer,
) -> Result<()> {
    if upstream.dim() != (cache.num_chains(), cache.num_forms) || form.num_forms() != cache.num_forms {
        return Err(Error::ShapeMismatch(format!(
            "upstream {:?} for a {} x {} integration matrix",
            upstream.dim(),
            cache.num_chains(),
            cache.num_forms
        )));
    }
    let (c, l) = (form.table().len(), form.num_forms());
    let mut coeff = vec![0.0; cache.simplices.len() * l];
    for (i, terms) in cache.chain_terms.iter().enumerate() {
        for &(slot, lambda) in terms {
            for j in 0..l {
                coeff[slot * l + j] += upstream[[i, j]] * lambda;
            }
        }
    }
    for (slot, simplex) in cache.simplices.iter().enumerate() {
        let Some(trace) = &simplex.trace else { continue };
        let cs = &coeff[slot * l..(slot + 1) * l];
        if cs.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut up = vec![0.0; cache.weights.len() * c * l];
        for (row, &w) in up.chunks_exact_mut(c * l).zip(&cache.weights) {
            for j in 0..l {
                for (dst, e) in row[j * c..(j + 1) * c].iter_mut().zip(&simplex.eps) {
                    *dst = w * cs[j] * e;
                }
            }
        }
        form.psi().backward_batch(trace, &up, grads)?;
    }
    Ok(())
}

pub fn integration_matrix_backward(
    form: &NeuralKForm,
    cache: &IntegrationCache,
    upstream: &Array2<f64>,
) -> Result<GradientBuffer> {
    let mut grads = GradientBuffer::zeros_like(form.psi());
    integration_matrix_backward_into(form, cache, upstream, &mut grads)?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::{Activation, Mlp};
    use crate::simplicial::path_to_complex;

    fn constant_form(n: usize, k: usize, coeffs: &[f64]) -> NeuralKForm {
        let mut psi = Mlp::zeros(&[n, coeffs.len()], Activation::Identity).unwrap();
        psi.bias_mut(0).copy_from_slice(coeffs);
        let c = crate::forms::MultiIndexTable::new(n, k).unwrap().len();
        NeuralKForm::from_mlp(psi, n, k, coeffs.len() / c).unwrap()
    }

    #[test]
    fn interval_halving() {
        let s = SimplexSubdivision::new(1, 2).unwrap();
        assert_eq!(s.cells().len(), 2);
        assert_eq!(s.vertex(0, 0), vec![0.0]);
        assert_eq!(s.vertex(0, 1), vec![0.5]);
        assert_eq!(s.vertex(1, 1), vec![1.0]);
        assert!(s.cells().iter().all(|c| c.volume == 0.5));
    }

    #[test]
    fn single_triangle_cell() {
        let s = SimplexSubdivision::new(2, 1).unwrap();
        assert_eq!(s.cells().len(), 1);
        assert_eq!(s.cells()[0].volume, 0.5);
        let mut verts = s.cells()[0].lattice.clone();
        verts.sort();
        assert_eq!(verts, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
    }

    /// Signed volume of a cell from its vertices, independent of the stored
    /// volume.
    fn cell_volume(sub: &SimplexSubdivision, c: usize) -> f64 {
        let k = sub.k();
        let v0 = sub.vertex(c, 0);
        let m = Array2::from_shape_fn((k, k), |(i, j)| sub.vertex(c, j + 1)[i] - v0[i]);
        let all: Vec<usize> = (0..k).collect();
        crate::forms::epsilon(&m, &all).unwrap().abs() / factorial(k)
    }

    #[test]
    fn subdivision_volumes_and_containment() {
        for (k, h) in [(2, 2), (2, 5), (3, 3), (4, 2)] {
            let s = SimplexSubdivision::new(k, h).unwrap();
            assert_eq!(s.cells().len(), h.pow(k as u32));
            let total: f64 = (0..s.cells().len()).map(|c| cell_volume(&s, c)).sum();
            assert!((total - 1.0 / factorial(k)).abs() < 1e-12, "k={k} h={h}: {total}");
            for c in 0..s.cells().len() {
                assert!((cell_volume(&s, c) - s.cells()[c].volume).abs() < 1e-12);
                for v in 0..=k {
                    let t = s.vertex(c, v);
                    assert!(t.iter().all(|&x| x >= 0.0) && t.iter().sum::<f64>() <= 1.0 + 1e-12);
                }
            }
        }
        let s = SimplexSubdivision::new(2, 2).unwrap();
        assert!(s.cells().iter().all(|c| c.volume == 0.125));
        assert!(SimplexSubdivision::new(2, 0).is_err());
    }

    #[test]
    fn plan_weights() {
        let p = QuadraturePlan::new(1, 4).unwrap();
        assert_eq!(p.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
        for (k, h) in [(2, 5), (3, 4)] {
            let p = QuadraturePlan::new(k, h).unwrap();
            // Lattice points with coordinates summing to at most h.
            let expected_nodes = (1..=k).map(|i| (h + i) as f64 / i as f64).product::<f64>().round() as usize;
            assert_eq!(p.num_nodes(), expected_nodes);
            assert!(p.weights().iter().all(|&w| w > 0.0));
            assert!((p.weights().iter().sum::<f64>() - 1.0 / factorial(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_dx_over_segment() {
        let form = constant_form(2, 1, &[1.0, 0.0]);
        let c = SimplicialComplex::build([[0, 1]], 2).unwrap();
        let e = Embedding::from_points(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        for h in [1, 2, 5, 17] {
            let plan = QuadraturePlan::new(1, h).unwrap();
            let v = integrate_simplex(&form, 0, &c, &e, 0, &plan).unwrap();
            assert!((v - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn x_dy_over_diagonal() {
        // psi(x) = (0, x1): the form x1 dx2.
        let mut psi = Mlp::zeros(&[2, 2], Activation::Identity).unwrap();
        psi.weights_mut(0).copy_from_slice(&[0.0, 0.0, 1.0, 0.0]);
        let form = NeuralKForm::from_mlp(psi, 2, 1, 1).unwrap();
        let c = SimplicialComplex::build([[0, 1]], 2).unwrap();
        let e = Embedding::from_points(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        for h in [1, 3, 8] {
            let plan = QuadraturePlan::new(1, h).unwrap();
            assert!((integrate_simplex(&form, 0, &c, &e, 0, &plan).unwrap() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn area_form_over_triangle() {
        let form = constant_form(3, 2, &[1.0, 0.0, 0.0]);
        let c = SimplicialComplex::build([[0, 1, 2]], 3).unwrap();
        let e = Embedding::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let plan = QuadraturePlan::new(2, 5).unwrap();
        assert!((integrate_simplex(&form, 0, &c, &e, 0, &plan).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn zero_forms_route_to_point_evaluation() {
        let form = constant_form(2, 0, &[2.0, -1.0]);
        let c = SimplicialComplex::build([[0, 1]], 2).unwrap();
        let e = Embedding::from_points(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let plan = QuadraturePlan::new(0, 5).unwrap();
        assert!(integrate_simplex(&form, 0, &c, &e, 0, &plan).is_err());
        assert_eq!(evaluate_points(&form, &e, &[0, 1]).unwrap(), array![[2.0, -1.0], [2.0, -1.0]]);

        // Identity network on R^2 as two 0-forms reproduces coordinates.
        let mut psi = Mlp::zeros(&[2, 2], Activation::Identity).unwrap();
        psi.weights_mut(0).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let id = NeuralKForm::from_mlp(psi, 2, 0, 2).unwrap();
        assert_eq!(evaluate_points(&id, &e, &[1, 0]).unwrap(), array![[3.0, 4.0], [0.0, 0.0]]);

        let basis = c.standard_basis_chains(0).unwrap();
        let x = integration_matrix(&id, &c, &e, &basis, &plan).unwrap();
        assert_eq!(x, evaluate_points(&id, &e, &[0, 1]).unwrap());
    }

    #[test]
    fn chain_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let form = NeuralKForm::new(2, 1, 1, &[6], Activation::Tanh, &mut rng).unwrap();
        let c = SimplicialComplex::build([[0, 1], [1, 2]], 3).unwrap();
        let e = Embedding::from_points(&[[0.0, 0.0], [1.0, 0.3], [0.2, 1.4]]).unwrap();
        let plan = QuadraturePlan::new(1, 5).unwrap();
        let i1 = integrate_simplex(&form, 0, &c, &e, 0, &plan).unwrap();
        let i2 = integrate_simplex(&form, 0, &c, &e, 1, &plan).unwrap();
        let chain = Chain::new(1, [(0, 2.0), (1, -1.0)]).unwrap();
        let v = integrate_chain(&form, 0, &c, &e, &chain, &plan).unwrap();
        assert!((v - (2.0 * i1 - i2)).abs() < 1e-14);
        assert_eq!(integrate_chain(&form, 0, &c, &e, &Chain::zero(1), &plan).unwrap(), 0.0);
        assert!(integrate_chain(&form, 0, &c, &e, &Chain::zero(2), &plan).is_err());
    }

    #[test]
    fn polyline_against_dx_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<[f64; 2]> = (0..11).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let path = path_to_complex(&pts).unwrap();
        let form = constant_form(2, 1, &[1.0, 0.0]);
        let plan = QuadraturePlan::new(1, 3).unwrap();
        let v = integrate_chain(&form, 0, &path.complex, &path.embedding, &path.chain, &plan).unwrap();
        assert!((v - (pts[10][0] - pts[0][0])).abs() < 1e-12);
    }

    #[test]
    fn path_displacement_matrix() {
        let path = path_to_complex(&[[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]]).unwrap();
        let form = constant_form(2, 1, &[1.0, 0.0, 0.0, 1.0]);
        let plan = QuadraturePlan::new(1, 5).unwrap();
        let basis = path.complex.standard_basis_chains(1).unwrap();
        let x = integration_matrix(&form, &path.complex, &path.embedding, &basis, &plan).unwrap();
        let want = array![[1.0, 0.0], [0.0, 2.0]];
        assert!(x.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-14), "{x}");
    }

    #[test]
    fn single_simplex_matrix_matches_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let form = NeuralKForm::new(3, 2, 1, &[5], Activation::Tanh, &mut rng).unwrap();
        let c = SimplicialComplex::build([[0, 1, 2]], 3).unwrap();
        let e = Embedding::from_points(&[[0.1, 0.0, 0.3], [1.0, 0.2, 0.0], [0.0, 1.0, 0.5]]).unwrap();
        let plan = QuadraturePlan::new(2, 4).unwrap();
        let x = integration_matrix(&form, &c, &e, &c.standard_basis_chains(2).unwrap(), &plan).unwrap();
        assert_eq!(x.dim(), (1, 1));
        assert_eq!(x[[0, 0]], integrate_simplex(&form, 0, &c, &e, 0, &plan).unwrap());
    }

    #[test]
    fn degenerate_simplex_integrates_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let form = NeuralKForm::new(2, 1, 2, &[4], Activation::Relu, &mut rng).unwrap();
        let c = SimplicialComplex::build([[0, 1]], 2).unwrap();
        let e = Embedding::from_points(&[[0.4, 0.4], [0.4, 0.4]]).unwrap();
        let plan = QuadraturePlan::new(1, 5).unwrap();
        let x = integration_matrix(&form, &c, &e, &c.standard_basis_chains(1).unwrap(), &plan).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_gradient_is_geometry() {
        // Single linear layer: dX/db_(I,j) = sum lambda * weight * eps_I.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = Mlp::new(&[2, 4], Activation::Identity, &mut rng).unwrap();
        let form = NeuralKForm::from_mlp(psi, 2, 1, 2).unwrap();
        let c = SimplicialComplex::build([[0, 1]], 2).unwrap();
        let e = Embedding::from_points(&[[0.5, -1.0], [2.0, 3.0]]).unwrap();
        let chains = ChainTuple::new(vec![Chain::simplex(1, 0, -2.0)]).unwrap();
        let plan = QuadraturePlan::new(1, 5).unwrap();
        let (_, cache) = integration_matrix_cached(&form, &c, &e, &chains, &plan).unwrap();
        let up = array![[0.0, 1.0]];
        let g = integration_matrix_backward(&form, &cache, &up).unwrap();
        // Form 1, dx1 then dx2; the weights sum to 1.
        assert!(g.bias(0)[..2].iter().all(|&v| v == 0.0));
        assert!((g.bias(0)[2] - (-2.0 * 1.5)).abs() < 1e-14);
        assert!((g.bias(0)[3] - (-2.0 * 4.0)).abs() < 1e-14);

        let zero = integration_matrix_backward(&form, &cache, &array![[0.0, 0.0]]).unwrap();
        assert!(zero.is_zero());
        assert!(integration_matrix_backward(&form, &cache, &array![[0.0]]).is_err());
    }
}
