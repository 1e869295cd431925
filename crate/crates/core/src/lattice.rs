//! Discrete Laplacian on a truncated integer lattice with a cube subsystem.
//!
//! The ambient operator is `sum_j Delta_j`, `(Delta_j f)(n) = f(n+e_j) - 2 f(n) + f(n-e_j)`,
//! on a box of `M^dims` sites with zero values outside the box. The cube
//! `Q` of `N^dims` sites is the observable part; every other box site is
//! hidden. The sign is kept as written, so the operator is negative
//! semidefinite.

use serde::{Deserialize, Serialize};

use crate::decomposition::{verify_theorem, TheoremReport};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};
use crate::subspace::numeric_rank;
use crate::system::{BlockSystem, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Sites per axis of the box, `M`.
    pub box_size: usize,
    /// Sites per axis of the cube, `N`.
    pub cube: usize,
    /// Low corner of the cube inside the box; only the first `dims` entries are used.
    pub offset: [usize; 3],
    pub dims: usize,
}

impl LatticeSpec {
    /// Cube of side `cube` centred as well as possible in a box of side `box_size`.
    pub fn centered(dims: usize, box_size: usize, cube: usize) -> Self {
        let o = box_size.saturating_sub(cube) / 2;
        Self {
            box_size,
            cube,
            offset: [o; 3],
            dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dims) {
            return Err(Error::InvalidArgument(format!("dims must be 1, 2 or 3, got {}", self.dims)));
        }
        if self.cube == 0 || self.box_size == 0 {
            return Err(Error::InvalidArgument("box and cube sizes must be positive".into()));
        }
        if self.cube > self.box_size {
            return Err(Error::InvalidArgument(format!(
                "cube {} does not fit in box {}",
                self.cube, self.box_size
            )));
        }
        if self.cube == self.box_size {
            return Err(Error::InvalidArgument("cube fills the box; hidden space would be empty".into()));
        }
        for j in 0..self.dims {
            if self.offset[j] + self.cube > self.box_size {
                return Err(Error::InvalidArgument(format!(
                    "cube sticks out of the box along axis {j}"
                )));
            }
        }
        Ok(())
    }

    /// At least one box site separates the cube from the box boundary on every axis.
    pub fn is_interior(&self) -> bool {
        (0..self.dims).all(|j| self.offset[j] >= 1 && self.offset[j] + self.cube < self.box_size)
    }

    pub fn sites(&self) -> usize {
        self.box_size.pow(self.dims as u32)
    }

    fn coords(&self, index: usize) -> [usize; 3] {
        let mut c = [0; 3];
        let mut rest = index;
        for cj in c.iter_mut().take(self.dims) {
            *cj = rest % self.box_size;
            rest /= self.box_size;
        }
        c
    }

    fn index(&self, c: &[usize; 3]) -> usize {
        (0..self.dims).rev().fold(0, |acc, j| acc * self.box_size + c[j])
    }

    fn in_cube(&self, c: &[usize; 3]) -> bool {
        (0..self.dims).all(|j| c[j] >= self.offset[j] && c[j] < self.offset[j] + self.cube)
    }

    /// Box neighbours of a site.
    fn neighbours(&self, c: &[usize; 3]) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(2 * self.dims);
        for j in 0..self.dims {
            if c[j] > 0 {
                let mut n = *c;
                n[j] -= 1;
                out.push(n);
            }
            if c[j] + 1 < self.box_size {
                let mut n = *c;
                n[j] += 1;
                out.push(n);
            }
        }
        out
    }

    /// Box site indices in the cube and outside it, each in lexicographic order.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.sites()).partition(|&i| self.in_cube(&self.coords(i)))
    }

    /// Cube sites with at least one neighbour outside the cube.
    pub fn surface_sites(&self) -> Vec<usize> {
        self.partition()
            .0
            .into_iter()
            .filter(|&i| {
                let c = self.coords(i);
                self.neighbours(&c).iter().any(|n| !self.in_cube(n))
            })
            .collect()
    }

    /// Lattice distance between two box sites.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        (0..self.dims).map(|j| ca[j].abs_diff(cb[j])).sum()
    }
}

/// The box Laplacian as a dense matrix over box sites.
pub fn box_laplacian(spec: &LatticeSpec) -> CMatrix {
    let d = spec.sites();
    let mut omega = CMatrix::zeros(d, d);
    for i in 0..d {
        let c = spec.coords(i);
        omega[(i, i)] = c64(-2.0 * spec.dims as f64, 0.0);
        for n in spec.neighbours(&c) {
            omega[(i, spec.index(&n))] = c64(1.0, 0.0);
        }
    }
    omega
}

/// Splits the box Laplacian into cube (observable) and exterior (hidden) blocks.
pub fn build_lattice_system(spec: &LatticeSpec) -> Result<BlockSystem> {
    spec.validate()?;
    let omega = box_laplacian(spec);
    let (inside, outside) = spec.partition();
    let pick = |rows: &[usize], cols: &[usize]| {
        CMatrix::from_fn(rows.len(), cols.len(), |i, j| omega[(rows[i], cols[j])])
    };
    BlockSystem::new(
        pick(&inside, &inside),
        pick(&outside, &outside),
        pick(&inside, &outside),
        DEFAULT_TOL,
    )
}

/// `N^dims - (N-2)^dims`: cube sites on the surface; 1 when `N = 1`.
pub fn surface_count_in(cube: usize, dims: usize) -> Result<usize> {
    if cube == 0 {
        return Err(Error::InvalidArgument("cube size must be positive".into()));
    }
    if cube == 1 {
        return Ok(1);
    }
    let d = dims as u32;
    Ok(cube.pow(d) - (cube - 2).pow(d))
}

/// Surface size of an `N x N x N` cube, `6N^2 - 12N + 8` (1 for `N = 1`).
pub fn surface_count(cube: usize) -> Result<usize> {
    if cube == 0 {
        return Err(Error::InvalidArgument("cube size must be positive".into()));
    }
    if cube == 1 {
        return Ok(1);
    }
    Ok(6 * cube * cube + 8 - 12 * cube)
}

/// `12N^2 - 24N + 16`, twice the surface size.
pub fn multiplicity_bound(cube: usize) -> Result<usize> {
    Ok(2 * surface_count(cube)?)
}

/// Metadata attached to generated lattice system files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LatticeMetadata {
    pub box_size: usize,
    pub cube: usize,
    pub offset: [usize; 3],
    pub dims: usize,
    pub surface_count: usize,
    pub multiplicity_bound: usize,
}

impl LatticeMetadata {
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        let surface = surface_count_in(spec.cube, spec.dims)?;
        Ok(Self {
            box_size: spec.box_size,
            cube: spec.cube,
            offset: spec.offset,
            dims: spec.dims,
            surface_count: surface,
            multiplicity_bound: 2 * surface,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LatticeReport {
    pub spec: LatticeSpec,
    pub d1: usize,
    pub d2: usize,
    pub surface_count: usize,
    pub multiplicity_bound: usize,
    pub rank_gamma: usize,
    pub rank_within_surface: bool,
    pub rank_equals_surface: bool,
    pub dim_h1d: usize,
    pub dim_h1c: usize,
    pub dim_h2c: usize,
    pub dim_h2d: usize,
    pub multiplicity_omega_c: usize,
    pub bound_satisfied: bool,
    /// `dim H2d`: hidden degrees of freedom the cube cannot see.
    pub undetectable_hidden_dim: usize,
    pub theorem: TheoremReport,
    pub passed: bool,
}

/// Builds the lattice system and checks the surface, rank and multiplicity claims.
pub fn verify_example(spec: &LatticeSpec) -> Result<LatticeReport> {
    spec.validate()?;
    if !spec.is_interior() {
        return Err(Error::InvalidArgument(
            "cube must be separated from the box boundary on every axis".into(),
        ));
    }
    let sys = build_lattice_system(spec)?;
    let theorem = verify_theorem(&sys)?;
    let surface = surface_count_in(spec.cube, spec.dims)?;
    let bound = 2 * surface;
    let rank_gamma = numeric_rank(sys.gamma(), sys.tol())?;
    let bound_satisfied = theorem.multiplicity_omega_c <= bound;
    let rank_within_surface = rank_gamma <= surface;
    let passed = theorem.passed && bound_satisfied && rank_within_surface;
    Ok(LatticeReport {
        spec: *spec,
        d1: sys.d1(),
        d2: sys.d2(),
        surface_count: surface,
        multiplicity_bound: bound,
        rank_gamma,
        rank_within_surface,
        rank_equals_surface: rank_gamma == surface,
        dim_h1d: theorem.dim_h1d,
        dim_h1c: theorem.dim_h1c,
        dim_h2c: theorem.dim_h2c,
        dim_h2d: theorem.dim_h2d,
        multiplicity_omega_c: theorem.multiplicity_omega_c,
        bound_satisfied,
        undetectable_hidden_dim: theorem.dim_h2d,
        theorem,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro_norm;
    use crate::system::assemble_full;

    #[test]
    fn one_dimensional_three_sites() {
        let spec = LatticeSpec {
            box_size: 3,
            cube: 1,
            offset: [1, 0, 0],
            dims: 1,
        };
        let lap = box_laplacian(&spec);
        let expected = CMatrix::from_row_iterator(
            3,
            3,
            [-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0].iter().map(|&x| c64(x, 0.0)),
        );
        assert_eq!(lap, expected);
        let sys = build_lattice_system(&spec).unwrap();
        assert_eq!(sys.gamma(), &CMatrix::from_row_slice(1, 2, &[c64(1.0, 0.0), c64(1.0, 0.0)]));
        assert_eq!(sys.omega1()[(0, 0)], c64(-2.0, 0.0));
    }

    #[test]
    fn formulas() {
        assert_eq!(surface_count(2).unwrap(), 8);
        assert_eq!(surface_count(3).unwrap(), 26);
        assert_eq!(surface_count(1).unwrap(), 1);
        assert!(surface_count(0).is_err());
        assert_eq!(multiplicity_bound(2).unwrap(), 16);
        assert_eq!(multiplicity_bound(3).unwrap(), 52);
        for n in 2..20 {
            assert_eq!(surface_count(n).unwrap(), n.pow(3) - (n - 2).pow(3));
            assert_eq!(surface_count(n).unwrap(), surface_count_in(n, 3).unwrap());
            assert_eq!(multiplicity_bound(n).unwrap(), 2 * surface_count(n).unwrap());
        }
        assert_eq!(surface_count_in(5, 1).unwrap(), 2);
    }

    #[test]
    fn surface_sites_match_formula() {
        for (n, m) in [(2, 4), (3, 5), (4, 7)] {
            let spec = LatticeSpec::centered(3, m, n);
            assert!(spec.is_interior());
            assert_eq!(spec.surface_sites().len(), surface_count(n).unwrap());
        }
    }

    #[test]
    fn rank_of_small_cube_coupling() {
        let spec = LatticeSpec::centered(3, 4, 2);
        let sys = build_lattice_system(&spec).unwrap();
        assert_eq!(numeric_rank(sys.gamma(), 1e-10).unwrap(), 8);
    }

    #[test]
    fn laplacian_is_exactly_symmetric_and_coupling_is_local() {
        let spec = LatticeSpec::centered(3, 5, 3);
        let sys = build_lattice_system(&spec).unwrap();
        let omega = assemble_full(&sys).omega;
        assert_eq!(fro_norm(&(&omega - omega.adjoint())), 0.0);
        let (inside, outside) = spec.partition();
        let surface = spec.surface_sites();
        for i in 0..sys.d1() {
            for j in 0..sys.d2() {
                if sys.gamma()[(i, j)].norm() != 0.0 {
                    assert!(surface.contains(&inside[i]));
                    assert_eq!(spec.distance(inside[i], outside[j]), 1);
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = LatticeSpec::centered(3, 4, 2);
        spec.offset = [3, 1, 1];
        assert!(spec.validate().is_err());
        assert!(!LatticeSpec { box_size: 4, cube: 2, offset: [0, 1, 1], dims: 3 }.is_interior());
        assert!(LatticeSpec::centered(4, 4, 2).validate().is_err());
        assert!(verify_example(&LatticeSpec { box_size: 4, cube: 2, offset: [0, 1, 1], dims: 3 }).is_err());
    }

    #[test]
    fn one_dimensional_example() {
        let r = verify_example(&LatticeSpec::centered(1, 8, 2)).unwrap();
        assert_eq!(r.rank_gamma, 2);
        assert!(r.multiplicity_omega_c <= 4);
        assert!(r.passed, "{:?}", r.theorem.failures());
    }
}
