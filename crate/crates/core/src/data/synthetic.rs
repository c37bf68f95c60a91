use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Item};
use crate::simplicial::{path_to_complex, Chain, ChainTuple, Embedding, SimplicialComplex};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathDatasetSpec {
    pub samples_per_class: usize,
    pub points: usize,
    /// Standard deviation of the per-point jitter, in units of the unit square.
    pub noise: f64,
    /// Each path is shifted by a uniform draw from `[-translation, translation]^2`.
    pub translation: f64,
    pub seed: u64,
}

impl Default for PathDatasetSpec {
    fn default() -> Self {
        PathDatasetSpec { samples_per_class: 100, points: 20, noise: 0.02, translation: 0.1, seed: 0 }
    }
}

impl PathDatasetSpec {
    pub const NUM_CLASSES: usize = 3;

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidArgument(format!("paths need at least 2 points, got {}", self.points)));
        }
        if self.samples_per_class == 0 {
            return Err(Error::InvalidArgument("samples_per_class must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !(self.translation >= 0.0 && self.translation.is_finite())
        {
            return Err(Error::InvalidArgument("noise and translation must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Noise-free template point of `class` at parameter `t` in `[0, 1]`.
///
/// Classes 0 and 1 trace the same half circle in opposite directions, so
/// they differ only in orientation. Class 2 is an S-curve over the same
/// region.
pub fn path_template(class: usize, t: f64) -> [f64; 2] {
    let arc = |theta: f64| [0.5 + 0.35 * theta.cos(), 0.3 + 0.35 * theta.sin()];
    match class {
        0 => arc(PI * t),
        1 => arc(PI * (1.0 - t)),
        _ => [0.15 + 0.7 * t, 0.45 + 0.2 * (2.0 * PI * t).sin()],
    }
}

/// Three classes of noisy, translated polylines in the plane.
pub fn gen_paths(spec: &PathDatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut items = Vec::with_capacity(spec.samples_per_class * PathDatasetSpec::NUM_CLASSES);
    for class in 0..PathDatasetSpec::NUM_CLASSES {
        for _ in 0..spec.samples_per_class {
            let shift = [
                rng.random_range(-spec.translation..=spec.translation),
                rng.random_range(-spec.translation..=spec.translation),
            ];
            let points: Vec<[f64; 2]> = (0..spec.points)
                .map(|i| {
                    let p = path_template(class, i as f64 / (spec.points - 1) as f64);
                    [p[0] + shift[0] + jitter.sample(&mut rng), p[1] + shift[1] + jitter.sample(&mut rng)]
                })
                .collect();
            let path = path_to_complex(&points)?;
            items.push(Item {
                complex: path.complex,
                embedding: path.embedding,
                chains: ChainTuple::new(vec![path.chain])?,
                label: class,
            });
        }
    }
    Dataset::new(items, PathDatasetSpec::NUM_CLASSES)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceDatasetSpec {
    /// Vertices per side of the parameter grid.
    pub grid: usize,
    pub samples_per_class: usize,
    /// Standard deviation of the height noise.
    pub noise: f64,
    /// Each surface is shifted in x and y by a uniform draw from
    /// `[-translation, translation]`.
    pub translation: f64,
    pub seed: u64,
}

impl Default for SurfaceDatasetSpec {
    fn default() -> Self {
        SurfaceDatasetSpec { grid: 10, samples_per_class: 100, noise: 0.1, translation: 0.5, seed: 0 }
    }
}

impl SurfaceDatasetSpec {
    pub const NUM_CLASSES: usize = 2;

    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::InvalidArgument(format!("grid must be at least 2, got {}", self.grid)));
        }
        if self.samples_per_class == 0 {
            return Err(Error::InvalidArgument("samples_per_class must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !(self.translation >= 0.0 && self.translation.is_finite())
        {
            return Err(Error::InvalidArgument("noise and translation must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// The `g x g` grid triangulation of the square shared by every surface,
/// with one chain per triangle. Vertex `i * g + j` sits at column `j`, row
/// `i`; every square is cut along the diagonal from its lowest to its
/// highest vertex. Chain signs orient every triangle like the parameter
/// plane, so a column sum is the integral over the whole surface.
pub fn grid_triangulation(g: usize) -> Result<(SimplicialComplex, ChainTuple)> {
    if g < 2 {
        return Err(Error::InvalidArgument(format!("grid must be at least 2, got {g}")));
    }
    let mut triangles = Vec::with_capacity(2 * (g - 1) * (g - 1));
    for i in 0..g - 1 {
        for j in 0..g - 1 {
            let v00 = i * g + j;
            let (v01, v10, v11) = (v00 + 1, v00 + g, v00 + g + 1);
            triangles.push([v00, v01, v11]);
            triangles.push([v00, v10, v11]);
        }
    }
    let complex = SimplicialComplex::build(&triangles, g * g)?;
    let chains = triangles
        .iter()
        .map(|t| {
            let index = complex.index_of(t).expect("triangle inserted above");
            // (v00, v10, v11) has columns (0, dy), (dx, dy): negatively oriented.
            let sign = if t[1] == t[0] + 1 { 1.0 } else { -1.0 };
            Chain::new(2, [(index, sign)])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((complex, ChainTuple::new(chains)?))
}

/// Two classes of noisy graphs of `sin x` and `sin y` over `[0, 2pi]^2`, all
/// sharing one triangulation.
pub fn gen_surfaces(spec: &SurfaceDatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let g = spec.grid;
    let (complex, chains) = grid_triangulation(g)?;
    let coord = |i: usize| 2.0 * PI * i as f64 / (g - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut items = Vec::with_capacity(spec.samples_per_class * SurfaceDatasetSpec::NUM_CLASSES);
    for class in 0..SurfaceDatasetSpec::NUM_CLASSES {
        for _ in 0..spec.samples_per_class {
            let tx = rng.random_range(-spec.translation..=spec.translation);
            let ty = rng.random_range(-spec.translation..=spec.translation);
            let mut coords = Vec::with_capacity(3 * g * g);
            for i in 0..g {
                for j in 0..g {
                    let (x, y) = (coord(j), coord(i));
                    let z = if class == 0 { x.sin() } else { y.sin() };
                    coords.extend_from_slice(&[x + tx, y + ty, z + noise.sample(&mut rng)]);
                }
            }
            items.push(Item {
                complex: complex.clone(),
                embedding: Embedding::new(3, coords)?,
                chains: chains.clone(),
                label: class,
            });
        }
    }
    Dataset::new(items, SurfaceDatasetSpec::NUM_CLASSES)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::affine_jacobian;

    #[test]
    fn noiseless_paths_are_translates() {
        let spec = PathDatasetSpec { samples_per_class: 4, points: 7, noise: 0.0, ..Default::default() };
        let data = gen_paths(&spec).unwrap();
        assert_eq!(data.len(), 12);
        for class in data.items.chunks(4) {
            let first = &class[0];
            for item in class {
                assert_eq!(item.complex, first.complex);
                assert_eq!(item.chains, first.chains);
                let d0: Vec<f64> = (1..7)
                    .flat_map(|v| {
                        let (a, b) = (item.embedding.point(v), item.embedding.point(0));
                        [a[0] - b[0], a[1] - b[1]]
                    })
                    .collect();
                let d1: Vec<f64> = (1..7)
                    .flat_map(|v| {
                        let (a, b) = (first.embedding.point(v), first.embedding.point(0));
                        [a[0] - b[0], a[1] - b[1]]
                    })
                    .collect();
                for (x, y) in d0.iter().zip(&d1) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn opposite_arcs_share_points_not_orientation() {
        let spec = PathDatasetSpec { samples_per_class: 1, points: 9, noise: 0.0, translation: 0.0, seed: 0 };
        let data = gen_paths(&spec).unwrap();
        let (a, b) = (&data.items[0], &data.items[1]);
        assert_eq!(a.complex, b.complex);
        for v in 0..9 {
            for d in 0..2 {
                assert!((a.embedding.point(v)[d] - b.embedding.point(v)[d]).abs() < 1e-15);
            }
        }
        let negated: Vec<(usize, f64)> = a.chains.chains()[0].terms().iter().map(|&(s, c)| (s, -c)).collect();
        assert_eq!(b.chains.chains()[0].terms(), negated.as_slice());
    }

    #[test]
    fn two_point_paths_are_single_edges() {
        let spec = PathDatasetSpec { points: 2, samples_per_class: 3, ..Default::default() };
        for item in gen_paths(&spec).unwrap().items {
            assert_eq!(item.complex.count(1), 1);
            assert_eq!(item.chains.chains()[0].terms().len(), 1);
        }
        assert!(gen_paths(&PathDatasetSpec { points: 1, ..Default::default() }).is_err());
        assert!(gen_paths(&PathDatasetSpec { noise: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn generators_are_seeded() {
        let spec = PathDatasetSpec { samples_per_class: 5, seed: 9, ..Default::default() };
        assert_eq!(gen_paths(&spec).unwrap(), gen_paths(&spec).unwrap());
        assert_ne!(gen_paths(&spec).unwrap(), gen_paths(&PathDatasetSpec { seed: 10, ..spec }).unwrap());
        let s = SurfaceDatasetSpec { samples_per_class: 2, grid: 4, ..Default::default() };
        assert_eq!(gen_surfaces(&s).unwrap(), gen_surfaces(&s).unwrap());
    }

    #[test]
    fn surface_shape() {
        let spec = SurfaceDatasetSpec { samples_per_class: 3, ..Default::default() };
        let data = gen_surfaces(&spec).unwrap();
        assert_eq!(data.len(), 6);
        for item in &data.items {
            assert_eq!(item.complex.count(2), 162);
            assert_eq!(item.chains.len(), 162);
            assert_eq!(item.complex, data.items[0].complex);
        }
        assert!(gen_surfaces(&SurfaceDatasetSpec { grid: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn noiseless_surfaces_are_archetypes() {
        let spec = SurfaceDatasetSpec { samples_per_class: 2, grid: 5, noise: 0.0, translation: 0.0, seed: 3 };
        let data = gen_surfaces(&spec).unwrap();
        assert_eq!(data.items[0], data.items[1]);
        assert_eq!(data.items[2], data.items[3]);
        assert_ne!(data.items[0].embedding, data.items[2].embedding);
        let p = data.items[2].embedding.point(7);
        assert!((p[2] - p[1].sin()).abs() < 1e-15);
    }

    #[test]
    fn chain_signs_orient_the_plane() {
        let (complex, chains) = grid_triangulation(4).unwrap();
        let flat: Vec<[f64; 2]> = (0..16).map(|v| [(v % 4) as f64, (v / 4) as f64]).collect();
        let emb = Embedding::from_points(&flat).unwrap();
        for chain in chains.chains() {
            let &(s, sign) = &chain.terms()[0];
            let j = affine_jacobian(&emb, complex.simplex(2, s).unwrap()).unwrap();
            let det = j[[0, 0]] * j[[1, 1]] - j[[0, 1]] * j[[1, 0]];
            assert_eq!(sign * det, 1.0);
        }
    }
}
