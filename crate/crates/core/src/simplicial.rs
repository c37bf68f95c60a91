//! Combinatorial simplicial complexes, vertex embeddings and real chains.
//!
//! Simplices are stored as strictly increasing vertex tuples, sorted
//! lexicographically within each dimension. The stored tuple order is the
//! positive orientation; a reversed orientation is expressed by a negative
//! chain coefficient.

use std::collections::BTreeSet;

use itertools::Itertools;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite abstract simplicial complex closed under taking faces.
///
/// Every vertex `0..num_vertices` is present as a 0-simplex, including
/// isolated ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ComplexRepr", into = "ComplexRepr")]
pub struct SimplicialComplex {
    num_vertices: usize,
    simplices: Vec<Vec<Vec<usize>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexRepr {
    num_vertices: usize,
    simplices: Vec<Vec<Vec<usize>>>,
}

impl From<SimplicialComplex> for ComplexRepr {
    fn from(c: SimplicialComplex) -> Self {
        ComplexRepr { num_vertices: c.num_vertices, simplices: c.simplices }
    }
}

impl TryFrom<ComplexRepr> for SimplicialComplex {
    type Error = Error;

    fn try_from(raw: ComplexRepr) -> Result<Self> {
        let all = raw.simplices.iter().flatten().cloned();
        let built = SimplicialComplex::build(all, raw.num_vertices)?;
        if built.simplices != raw.simplices {
            return Err(Error::InvalidArgument(
                "serialized complex is not face-closed and lexicographically ordered".into(),
            ));
        }
        Ok(built)
    }
}

impl SimplicialComplex {
    /// Builds a complex from arbitrary simplices, adding every missing face.
    ///
    /// Input tuples may be unsorted and may span several dimensions; repeated
    /// simplices collapse to one.
    pub fn build<I, S>(simplices: I, num_vertices: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[usize]>,
    {
        let mut by_dim: Vec<BTreeSet<Vec<usize>>> = vec![(0..num_vertices).map(|v| vec![v]).collect()];
        for tuple in simplices {
            let tuple = tuple.as_ref();
            if tuple.is_empty() {
                return Err(Error::InvalidArgument("empty simplex".into()));
            }
            if let Some(&index) = tuple.iter().find(|&&v| v >= num_vertices) {
                return Err(Error::VertexOutOfRange { index, num_vertices });
            }
            let mut sorted = tuple.to_vec();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::DegenerateSimplex(tuple.to_vec()));
            }
            let top = sorted.len() - 1;
            if by_dim.len() <= top {
                by_dim.resize_with(top + 1, BTreeSet::new);
            }
            // Every nonempty subset of a simplex is a face.
            for size in 2..=sorted.len() {
                for face in sorted.iter().copied().combinations(size) {
                    by_dim[size - 1].insert(face);
                }
            }
        }
        while by_dim.len() > 1 && by_dim.last().is_some_and(BTreeSet::is_empty) {
            by_dim.pop();
        }
        Ok(SimplicialComplex { num_vertices, simplices: by_dim.into_iter().map(|s| s.into_iter().collect()).collect() })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Highest dimension with at least one simplex.
    pub fn dimension(&self) -> usize {
        self.simplices.len().saturating_sub(1)
    }

    /// The k-simplices in their stored order, or an empty slice.
    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        self.simplices.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn simplex(&self, k: usize, index: usize) -> Result<&[usize]> {
        self.simplices(k).get(index).map(Vec::as_slice).ok_or(Error::SimplexOutOfRange {
            dim: k,
            index,
            count: self.count(k),
        })
    }

    /// Position of an increasing vertex tuple within its dimension.
    pub fn index_of(&self, vertices: &[usize]) -> Option<usize> {
        let k = vertices.len().checked_sub(1)?;
        self.simplices(k).binary_search_by(|s| s.as_slice().cmp(vertices)).ok()
    }

    /// True when every (k-1)-face of every stored k-simplex is stored.
    pub fn is_face_closed(&self) -> bool {
        (1..self.simplices.len()).all(|k| {
            self.simplices[k]
                .iter()
                .all(|s| s.iter().copied().combinations(k).all(|face| self.index_of(&face).is_some()))
        })
    }

    /// One chain per k-simplex with coefficient +1, in stored order.
    pub fn standard_basis_chains(&self, k: usize) -> Result<ChainTuple> {
        if k > self.dimension() || self.count(k) == 0 {
            return Err(Error::MissingDimension(k));
        }
        let chains = (0..self.count(k)).map(|i| Chain::simplex(k, i, 1.0)).collect();
        ChainTuple::new(chains)
    }

    pub fn validate_chain(&self, chain: &Chain) -> Result<()> {
        let count = self.count(chain.dim);
        match chain.terms.iter().find(|(i, _)| *i >= count) {
            Some(&(index, _)) => Err(Error::SimplexOutOfRange { dim: chain.dim, index, count }),
            None => Ok(()),
        }
    }
}

/// Per-vertex coordinates in `R^n`, row major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EmbeddingRepr", into = "EmbeddingRepr")]
pub struct Embedding {
    ambient_dim: usize,
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingRepr {
    ambient_dim: usize,
    coords: Vec<f64>,
}

impl From<Embedding> for EmbeddingRepr {
    fn from(e: Embedding) -> Self {
        EmbeddingRepr { ambient_dim: e.ambient_dim, coords: e.coords }
    }
}

impl TryFrom<EmbeddingRepr> for Embedding {
    type Error = Error;

    fn try_from(raw: EmbeddingRepr) -> Result<Self> {
        Embedding::new(raw.ambient_dim, raw.coords)
    }
}

impl Embedding {
    pub fn new(ambient_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(ambient_dim) {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates do not split into rows of {ambient_dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding coordinates"));
        }
        Ok(Embedding { ambient_dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let ambient_dim = points.first().map_or(0, |p| p.as_ref().len());
        if let Some(bad) = points.iter().find(|p| p.as_ref().len() != ambient_dim) {
            return Err(Error::DimensionMismatch(format!(
                "point of length {} in a set of length-{ambient_dim} points",
                bad.as_ref().len()
            )));
        }
        Embedding::new(ambient_dim, points.iter().flat_map(|p| p.as_ref().iter().copied()).collect())
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn num_points(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    pub fn point(&self, vertex: usize) -> &[f64] {
        &self.coords[vertex * self.ambient_dim..(vertex + 1) * self.ambient_dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Errors unless there is exactly one point per vertex of `complex`.
    pub fn check_covers(&self, complex: &SimplicialComplex) -> Result<()> {
        if self.num_points() != complex.num_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "embedding has {} points but the complex has {} vertices",
                self.num_points(),
                complex.num_vertices()
            )));
        }
        Ok(())
    }
}

/// A sparse real combination of the k-simplices of some complex.
///
/// Terms are kept sorted by simplex index with no repeats and no zero
/// coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    dim: usize,
    terms: Vec<(usize, f64)>,
}

impl Chain {
    /// Builds a canonical chain: repeated indices are summed and zeros dropped.
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut terms: Vec<_> = terms.into_iter().collect();
        if terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite("chain coefficients"));
        }
        terms.sort_by_key(|&(i, _)| i);
        let mut chain = Chain { dim, terms: Vec::with_capacity(terms.len()) };
        for (i, c) in terms {
            match chain.terms.last_mut() {
                Some((last, acc)) if *last == i => *acc += c,
                _ => chain.terms.push((i, c)),
            }
        }
        chain.terms.retain(|&(_, c)| c != 0.0);
        Ok(chain)
    }

    pub fn zero(dim: usize) -> Self {
        Chain { dim, terms: Vec::new() }
    }

    pub fn simplex(dim: usize, index: usize, coeff: f64) -> Self {
        Chain::new(dim, [(index, coeff)]).expect("finite coefficient")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Chain> {
        Chain::new(self.dim, self.terms.iter().map(|&(i, c)| (i, c * factor)))
    }
}

/// An ordered, nonempty tuple of chains of one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Chain>", into = "Vec<Chain>")]
pub struct ChainTuple {
    dim: usize,
    chains: Vec<Chain>,
}

impl TryFrom<Vec<Chain>> for ChainTuple {
    type Error = Error;

    fn try_from(chains: Vec<Chain>) -> Result<Self> {
        ChainTuple::new(chains)
    }
}

impl From<ChainTuple> for Vec<Chain> {
    fn from(t: ChainTuple) -> Self {
        t.chains
    }
}

impl ChainTuple {
    pub fn new(chains: Vec<Chain>) -> Result<Self> {
        let dim =
            chains.first().ok_or_else(|| Error::InvalidArgument("a chain tuple needs at least one chain".into()))?.dim;
        if chains.iter().any(|c| c.dim != dim) {
            return Err(Error::DimensionMismatch("chains of a tuple must share one dimension".into()));
        }
        Ok(ChainTuple { dim, chains })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn validate(&self, complex: &SimplicialComplex) -> Result<()> {
        self.chains.iter().try_for_each(|c| complex.validate_chain(c))
    }

    /// The left action of a real `m' x m` matrix: row `i` of the result is
    /// `sum_j L[i, j] * chain_j`.
    pub fn apply_matrix_left(&self, left: &Array2<f64>) -> Result<ChainTuple> {
        if left.ncols() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "matrix with {} columns applied to {} chains",
                left.ncols(),
                self.len()
            )));
        }
        let chains = left
            .rows()
            .into_iter()
            .map(|row| {
                let terms = row
                    .iter()
                    .zip(&self.chains)
                    .flat_map(|(&weight, chain)| chain.terms.iter().map(move |&(i, c)| (i, weight * c)));
                Chain::new(self.dim, terms)
            })
            .collect::<Result<Vec<_>>>()?;
        ChainTuple::new(chains)
    }
}

/// A polyline as an embedded 1-complex plus the chain traversing it.
#[derive(Clone, Debug)]
pub struct EmbeddedPath {
    pub complex: SimplicialComplex,
    pub embedding: Embedding,
    pub chain: Chain,
}

/// Turns an ordered list of points into a path complex and its directed chain.
///
/// Vertices are numbered by lexicographic order of their coordinates (ties by
/// position), so the complex and embedding depend only on the point set and
/// the traversal direction is carried entirely by the chain: each edge gets
/// coefficient +1 when the path runs from its lower to its higher vertex and
/// -1 otherwise. Reversing the point list negates the chain.
pub fn path_to_complex<P: AsRef<[f64]>>(points: &[P]) -> Result<EmbeddedPath> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!("a path needs at least 2 points, got {}", points.len())));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a].as_ref(), points[b].as_ref());
        pa.iter()
            .zip(pb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut vertex_of = vec![0; points.len()];
    for (rank, &pos) in order.iter().enumerate() {
        vertex_of[pos] = rank;
    }
    let sorted_points: Vec<&[f64]> = order.iter().map(|&pos| points[pos].as_ref()).collect();
    let embedding = Embedding::from_points(&sorted_points)?;

    let steps: Vec<(usize, usize)> = vertex_of.windows(2).map(|w| (w[0], w[1])).collect();
    let complex = SimplicialComplex::build(steps.iter().map(|&(a, b)| [a, b]), points.len())?;
    let terms = steps.iter().map(|&(a, b)| {
        let edge = if a < b { [a, b] } else { [b, a] };
        let index = complex.index_of(&edge).expect("edge inserted above");
        (index, if a < b { 1.0 } else { -1.0 })
    });
    let chain = Chain::new(1, terms)?;
    Ok(EmbeddedPath { complex, embedding, chain })
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn triangle_is_face_closed() {
        let c = SimplicialComplex::build([[0, 1, 2]], 3).unwrap();
        assert_eq!((c.count(0), c.count(1), c.count(2)), (3, 3, 1));
        assert_eq!(c.simplices(1), &[vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert!(c.is_face_closed());
    }

    #[test]
    fn edge_list_gives_path_complex() {
        let c = SimplicialComplex::build([[0, 1], [2, 1]], 3).unwrap();
        assert_eq!(c.dimension(), 1);
        assert_eq!(c.simplices(1), &[vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn rejects_bad_tuples() {
        assert!(matches!(SimplicialComplex::build([[0, 0, 1]], 3), Err(Error::DegenerateSimplex(_))));
        assert!(matches!(SimplicialComplex::build([[0, 3]], 3), Err(Error::VertexOutOfRange { index: 3, .. })));
    }

    #[test]
    fn standard_basis() {
        let path = SimplicialComplex::build([[0, 1], [1, 2]], 3).unwrap();
        let b = path.standard_basis_chains(1).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.chains()[1].terms(), &[(1, 1.0)]);

        let tri = SimplicialComplex::build([[0, 1, 2]], 3).unwrap();
        assert_eq!(tri.standard_basis_chains(2).unwrap().len(), 1);
        assert!(matches!(tri.standard_basis_chains(3), Err(Error::MissingDimension(3))));
    }

    #[test]
    fn chain_canonicalization() {
        let c = Chain::new(1, [(3, 1.0), (1, 2.0), (3, -1.0), (2, 0.0)]).unwrap();
        assert_eq!(c.terms(), &[(1, 2.0)]);
        assert!(Chain::new(1, [(0, f64::NAN)]).is_err());
    }

    #[test]
    fn matrix_action_examples() {
        let c = SimplicialComplex::build([[0, 1], [1, 2]], 3).unwrap();
        let beta = c.standard_basis_chains(1).unwrap();

        assert_eq!(beta.apply_matrix_left(&Array2::eye(2)).unwrap(), beta);

        let swapped = beta.apply_matrix_left(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(swapped.chains()[0], beta.chains()[1]);
        assert_eq!(swapped.chains()[1], beta.chains()[0]);

        let combo = beta.apply_matrix_left(&array![[2.0, -1.0]]).unwrap();
        assert_eq!(combo.len(), 1);
        assert_eq!(combo.chains()[0].terms(), &[(0, 2.0), (1, -1.0)]);

        assert!(matches!(beta.apply_matrix_left(&Array2::eye(3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn path_examples() {
        let pts = [[0.0, 0.0], [1.0, 0.5], [0.5, 2.0]];
        let p = path_to_complex(&pts).unwrap();
        assert_eq!(p.complex.count(1), 2);
        assert_eq!(p.chain.terms().len(), 2);

        let same = path_to_complex(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(same.complex.count(1), 1);

        let mut rev = pts;
        rev.reverse();
        let r = path_to_complex(&rev).unwrap();
        assert_eq!(r.complex, p.complex);
        assert_eq!(r.embedding, p.embedding);
        assert_eq!(r.chain, p.chain.scaled(-1.0).unwrap());

        assert!(path_to_complex(&[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn json_roundtrip_revalidates() {
        let c = SimplicialComplex::build([[0, 1, 2]], 3).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<SimplicialComplex>(&s).unwrap(), c);
        let open = r#"{"num_vertices":3,"simplices":[[[0],[1],[2]],[],[[0,1,2]]]}"#;
        assert!(serde_json::from_str::<SimplicialComplex>(open).is_err());
    }

    fn arb_complex() -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
        (2usize..8).prop_flat_map(|n| {
            let tuple = proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n.min(4));
            (Just(n), proptest::collection::vec(tuple, 0..6))
        })
    }

    proptest! {
        #[test]
        fn build_is_always_face_closed((n, tuples) in arb_complex()) {
            let c = SimplicialComplex::build(&tuples, n).unwrap();
            prop_assert!(c.is_face_closed());
            for t in &tuples {
                prop_assert!(c.index_of(t).is_some());
            }
        }

        #[test]
        fn matrix_action_is_linear(
            a in proptest::collection::vec(-3i32..3, 6),
            b in proptest::collection::vec(-3i32..3, 6),
        ) {
            let c = SimplicialComplex::build([[0, 1, 2], [1, 2, 3]], 4).unwrap();
            let beta = c.standard_basis_chains(1).unwrap().apply_matrix_left(
                &Array2::from_shape_fn((3, 5), |(i, j)| (i * 5 + j) as f64 - 7.0),
            ).unwrap();
            let l1 = Array2::from_shape_vec((2, 3), a.iter().map(|&x| x as f64).collect()).unwrap();
            let l2 = Array2::from_shape_vec((2, 3), b.iter().map(|&x| x as f64).collect()).unwrap();
            let lhs = beta.apply_matrix_left(&(&l1 + &l2)).unwrap();
            let (r1, r2) = (beta.apply_matrix_left(&l1).unwrap(), beta.apply_matrix_left(&l2).unwrap());
            for i in 0..2 {
                let sum = Chain::new(1, r1.chains()[i].terms().iter().chain(r2.chains()[i].terms()).copied()).unwrap();
                prop_assert_eq!(&lhs.chains()[i], &sum);
            }
        }
    }
}
