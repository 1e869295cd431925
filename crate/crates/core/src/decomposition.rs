//! Four-way split of a conservative system into coupled and decoupled parts
//! of its observable and hidden spaces, with the checks that go with it.
//!
//! For `H = H1 (+) H2` and frequency operator `Omega`:
//!
//! * `H2c = O(H1) - H1`, `H2d = H2 - H2c`
//! * `H1c = O(H2) - H2`, `H1d = H1 - H1c`
//!
//! where `O(S)` is the orbit of `S` under `Omega`. The same coupled spaces are
//! also reached from the coupling ranges alone, `H1c = O_{Omega1}(Ran Gamma)`
//! and `H2c = O_{Omega2}(Ran Gamma^H)`; both routes are always computed and
//! cross-checked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, fro_norm, op_norm, symmetrize, CMatrix, CERT_FACTOR};
use crate::subspace::{
    complement, containment_residual, numeric_rank, orbit, projector_distance, range_basis, sum,
    OrbitSolver, SubspaceBasis,
};
use crate::system::{assemble_full, decoupled_parts, BlockSystem};

/// Relative eigenvalue gap below which two eigenvalues count as one.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FourWayDecomposition {
    pub h1d: SubspaceBasis,
    pub h1c: SubspaceBasis,
    pub h2c: SubspaceBasis,
    pub h2d: SubspaceBasis,
    pub omega1d: CMatrix,
    pub omega1c: CMatrix,
    pub omega2c: CMatrix,
    pub omega2d: CMatrix,
    pub gamma_c: CMatrix,
    /// Projector distances between the orbit-of-complement definition and the
    /// coupling-range route, for `H1c` and `H2c`.
    pub route_distances: (f64, f64),
    pub tol: f64,
}

impl FourWayDecomposition {
    pub fn d1(&self) -> usize {
        self.h1d.ambient_dim()
    }

    pub fn d2(&self) -> usize {
        self.h2d.ambient_dim()
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.h1d.dim(), self.h1c.dim(), self.h2c.dim(), self.h2d.dim()]
    }

    /// Frequency operator of the coupled core `H1c (+) H2c`.
    pub fn omega_c(&self) -> CMatrix {
        let (k1, k2) = (self.h1c.dim(), self.h2c.dim());
        let mut m = crate::linalg::block_diag(&self.omega1c, &self.omega2c);
        m.view_mut((0, k1), (k1, k2)).copy_from(&self.gamma_c);
        m.view_mut((k1, 0), (k2, k1)).copy_from(&self.gamma_c.adjoint());
        m
    }

    /// Unitary whose columns are the bases of `H1d, H1c, H2c, H2d`, in that
    /// order, embedded in `C^(d1+d2)`.
    pub fn basis_matrix(&self) -> CMatrix {
        let (d1, d2) = (self.d1(), self.d2());
        let d = d1 + d2;
        let parts = [
            self.h1d.embed(0, d),
            self.h1c.embed(0, d),
            self.h2c.embed(d1, d),
            self.h2d.embed(d1, d),
        ];
        let mut q = CMatrix::zeros(d, d);
        let mut col = 0;
        for p in &parts {
            q.columns_mut(col, p.dim()).copy_from(p.matrix());
            col += p.dim();
        }
        q
    }

    /// The core `(H1c, H2c)` as a system of its own.
    pub fn core_system(&self) -> Option<BlockSystem> {
        if self.h1c.is_zero() || self.h2c.is_zero() {
            return None;
        }
        BlockSystem::new(
            self.omega1c.clone(),
            self.omega2c.clone(),
            self.gamma_c.clone(),
            self.tol,
        )
        .ok()
    }
}

fn restrict_operator(a: &CMatrix, basis: &SubspaceBasis) -> CMatrix {
    symmetrize(&basis.matrix().ad_mul(&(a * basis.matrix())))
}

/// Coupled subspace of one side by definition: `O(H_other) - H_other`,
/// re-expressed in the coordinates of this side.
fn coupled_by_definition(
    omega: &OrbitSolver,
    other: &SubspaceBasis,
    offset: usize,
    len: usize,
    tol: f64,
) -> Result<SubspaceBasis> {
    let closure = omega.orbit(other)?;
    let extra = complement(&closure, other, tol)?;
    let (coords, leak) = extra.restrict(offset, len)?;
    if leak > CERT_FACTOR * tol {
        return Err(Error::CoordinateLeak { residual: leak });
    }
    Ok(coords)
}

/// Computes the four-way decomposition of `sys`.
pub fn decompose(sys: &BlockSystem) -> Result<FourWayDecomposition> {
    let tol = sys.tol();
    let (d1, d2) = (sys.d1(), sys.d2());
    let d = d1 + d2;
    let omega = OrbitSolver::new(&assemble_full(sys).omega, tol)?;

    let h1 = SubspaceBasis::coordinate(d, 0, d1, tol);
    let h2 = SubspaceBasis::coordinate(d, d1, d2, tol);
    let h2c = coupled_by_definition(&omega, &h1, d1, d2, tol)?;
    let h1c = coupled_by_definition(&omega, &h2, 0, d1, tol)?;
    let h2d = complement(&SubspaceBasis::full(d2, tol), &h2c, tol)?;
    let h1d = complement(&SubspaceBasis::full(d1, tol), &h1c, tol)?;

    let h1c_fast = orbit(sys.omega1(), &range_basis(sys.gamma(), tol)?, tol)?;
    let h2c_fast = orbit(sys.omega2(), &range_basis(&sys.gamma().adjoint(), tol)?, tol)?;
    let route_distances = (
        projector_distance(&h1c, &h1c_fast)?,
        projector_distance(&h2c, &h2c_fast)?,
    );
    let allowed = CERT_FACTOR * tol;
    if route_distances.0 > allowed || route_distances.1 > allowed {
        return Err(Error::FastPathMismatch {
            h1c_distance: route_distances.0,
            h2c_distance: route_distances.1,
            allowed,
        });
    }

    let gamma_c = h1c.matrix().ad_mul(&(sys.gamma() * h2c.matrix()));
    Ok(FourWayDecomposition {
        omega1d: restrict_operator(sys.omega1(), &h1d),
        omega1c: restrict_operator(sys.omega1(), &h1c),
        omega2c: restrict_operator(sys.omega2(), &h2c),
        omega2d: restrict_operator(sys.omega2(), &h2d),
        gamma_c,
        h1d,
        h1c,
        h2c,
        h2d,
        route_distances,
        tol,
    })
}

/// Largest Frobenius norm among the blocks of `Q^H Omega Q` that must vanish,
/// where `Q` is the decomposition basis. Only `1d-1d`, `1c-1c`, `1c-2c`,
/// `2c-1c`, `2c-2c` and `2d-2d` may be nonzero.
pub fn verify_block_form(sys: &BlockSystem, dec: &FourWayDecomposition) -> f64 {
    let omega = assemble_full(sys).omega;
    let q = dec.basis_matrix();
    let t = q.ad_mul(&(&omega * &q));
    let dims = dec.dims();
    let starts = [0, dims[0], dims[0] + dims[1], dims[0] + dims[1] + dims[2]];
    let allowed = |i: usize, j: usize| i == j || (i, j) == (1, 2) || (i, j) == (2, 1);
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            if allowed(i, j) || dims[i] == 0 || dims[j] == 0 {
                continue;
            }
            let block = t.view((starts[i], starts[j]), (dims[i], dims[j])).into_owned();
            worst = worst.max(fro_norm(&block));
        }
    }
    worst
}

/// Eigenvalue clusters of a Hermitian matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectralClusters {
    /// Cluster sizes in ascending eigenvalue order.
    pub sizes: Vec<usize>,
    /// Largest gap merged into a cluster (0 if every cluster is a singleton).
    pub max_gap_within: f64,
    /// Smallest gap separating two clusters (infinite if there is one cluster).
    pub min_gap_between: f64,
    /// Absolute gap threshold used, `cluster_tol * max(1, ||A||)`.
    pub threshold: f64,
}

impl SpectralClusters {
    pub fn multiplicity(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Groups sorted eigenvalues whose consecutive gaps are at most
/// `cluster_tol * max(1, ||a||)`.
pub fn spectral_clusters(a: &CMatrix, cluster_tol: f64) -> SpectralClusters {
    let values = eigh(a).values;
    let norm = values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let threshold = cluster_tol * norm.max(1.0);
    let mut sizes = Vec::new();
    let mut max_gap_within = 0.0f64;
    let mut min_gap_between = f64::INFINITY;
    let mut current = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if i == 0 {
            current = 1;
            continue;
        }
        let gap = v - values[i - 1];
        if gap <= threshold {
            current += 1;
            max_gap_within = max_gap_within.max(gap);
        } else {
            sizes.push(current);
            current = 1;
            min_gap_between = min_gap_between.min(gap);
        }
    }
    if current > 0 {
        sizes.push(current);
    }
    SpectralClusters {
        sizes,
        max_gap_within,
        min_gap_between,
        threshold,
    }
}

/// Largest eigenvalue-cluster size, i.e. the spectral multiplicity of a
/// Hermitian matrix (the least number of cyclic generating vectors).
pub fn multiplicity(a: &CMatrix, cluster_tol: f64) -> usize {
    spectral_clusters(a, cluster_tol).multiplicity()
}

/// True when both decoupled parts vanish.
pub fn is_reconstructible(sys: &BlockSystem) -> Result<bool> {
    let dec = decompose(sys)?;
    Ok(dec.h1d.is_zero() && dec.h2d.is_zero())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedDistance {
    pub name: String,
    pub distance: f64,
}

fn named(name: &str, distance: f64) -> NamedDistance {
    NamedDistance {
        name: name.to_string(),
        distance,
    }
}

/// Outcome of checking the reconstruction theorem on one system.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TheoremReport {
    pub tol: f64,
    pub cluster_tol: f64,
    /// Every distance or residual below must be at most this.
    pub threshold: f64,
    pub d1: usize,
    pub d2: usize,
    pub dim_h1d: usize,
    pub dim_h1c: usize,
    pub dim_h2c: usize,
    pub dim_h2d: usize,
    /// Pairwise distances among `H1c (+) H2c`, `O(H1c)`, `O(H2c)` and
    /// `O(Ran coupling)`.
    pub orbit_equalities: Vec<NamedDistance>,
    /// Intermediate identities linking `O(Ran coupling)` to the orbits of the
    /// diagonal blocks on the coupling ranges.
    pub chain_identities: Vec<NamedDistance>,
    /// `Ran Gamma` inside `H1c`, `Ran Gamma^H` inside `H2c`.
    pub containment_residuals: Vec<NamedDistance>,
    /// Largest required-zero block divided by `||Omega||`.
    pub block_form_residual: f64,
    pub rank_gamma: usize,
    pub multiplicity_omega_c: usize,
    pub cluster_sizes: Vec<usize>,
    pub min_cluster_gap: f64,
    pub bound: usize,
    pub bound_satisfied: bool,
    pub reconstructible_core: bool,
    pub passed: bool,
}

impl TheoremReport {
    pub fn max_orbit_distance(&self) -> f64 {
        self.orbit_equalities
            .iter()
            .chain(&self.chain_identities)
            .map(|d| d.distance)
            .fold(0.0, f64::max)
    }

    /// Descriptions of every check that exceeded its threshold.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for d in self
            .orbit_equalities
            .iter()
            .chain(&self.chain_identities)
            .chain(&self.containment_residuals)
        {
            if !(d.distance <= self.threshold) {
                out.push(format!("{} = {:e} > {:e}", d.name, d.distance, self.threshold));
            }
        }
        if !(self.block_form_residual <= self.threshold) {
            out.push(format!(
                "block form residual = {:e} > {:e}",
                self.block_form_residual, self.threshold
            ));
        }
        if !self.bound_satisfied {
            out.push(format!(
                "multiplicity {} exceeds bound {}",
                self.multiplicity_omega_c, self.bound
            ));
        }
        if !self.reconstructible_core {
            out.push("coupled core is not reconstructible".to_string());
        }
        out
    }
}

pub fn verify_theorem(sys: &BlockSystem) -> Result<TheoremReport> {
    verify_theorem_with(sys, DEFAULT_CLUSTER_TOL)
}

pub fn verify_theorem_with(sys: &BlockSystem, cluster_tol: f64) -> Result<TheoremReport> {
    let tol = sys.tol();
    let (d1, d2) = (sys.d1(), sys.d2());
    let d = d1 + d2;
    let threshold = CERT_FACTOR * tol;
    let dec = decompose(sys)?;
    let omega = assemble_full(sys).omega;
    let (uncoupled, coupling) = decoupled_parts(sys);

    let h1c = dec.h1c.embed(0, d);
    let h2c = dec.h2c.embed(d1, d);
    let core = sum(&h1c, &h2c, tol)?;
    let solver = OrbitSolver::new(&omega, tol)?;
    let orbit_h1c = solver.orbit(&h1c)?;
    let orbit_h2c = solver.orbit(&h2c)?;
    let coupling_range = range_basis(&coupling, tol)?;
    let orbit_range = solver.orbit(&coupling_range)?;

    let four = [
        ("H1c+H2c", &core),
        ("O(H1c)", &orbit_h1c),
        ("O(H2c)", &orbit_h2c),
        ("O(Ran coupling)", &orbit_range),
    ];
    let mut orbit_equalities = Vec::new();
    for i in 0..four.len() {
        for j in (i + 1)..four.len() {
            let dist = projector_distance(four[i].1, four[j].1)?;
            orbit_equalities.push(named(&format!("{} vs {}", four[i].0, four[j].0), dist));
        }
    }

    let gamma_range = range_basis(sys.gamma(), tol)?;
    let gamma_adj_range = range_basis(&sys.gamma().adjoint(), tol)?;
    let orbit_range_uncoupled = orbit(&uncoupled, &coupling_range, tol)?;
    let block_orbits = sum(
        &orbit(sys.omega1(), &gamma_range, tol)?.embed(0, d),
        &orbit(sys.omega2(), &gamma_adj_range, tol)?.embed(d1, d),
        tol,
    )?;
    let range_split = sum(&gamma_range.embed(0, d), &gamma_adj_range.embed(d1, d), tol)?;
    let chain_identities = vec![
        named(
            "O(Ran coupling) vs O_uncoupled(Ran coupling)",
            projector_distance(&orbit_range, &orbit_range_uncoupled)?,
        ),
        named(
            "O_uncoupled(Ran coupling) vs O_Omega1(Ran Gamma)+O_Omega2(Ran Gamma^H)",
            projector_distance(&orbit_range_uncoupled, &block_orbits)?,
        ),
        named(
            "Ran coupling vs Ran Gamma + Ran Gamma^H",
            projector_distance(&coupling_range, &range_split)?,
        ),
        named("H1c vs O_Omega1(Ran Gamma)", dec.route_distances.0),
        named("H2c vs O_Omega2(Ran Gamma^H)", dec.route_distances.1),
    ];
    let containment_residuals = vec![
        named("Ran Gamma in H1c", containment_residual(&dec.h1c, &gamma_range)?),
        named("Ran Gamma^H in H2c", containment_residual(&dec.h2c, &gamma_adj_range)?),
    ];

    let omega_norm = op_norm(&omega);
    let block_form_residual = verify_block_form(sys, &dec) / omega_norm.max(f64::MIN_POSITIVE);

    let rank_gamma = numeric_rank(sys.gamma(), tol)?;
    let clusters = spectral_clusters(&dec.omega_c(), cluster_tol);
    let multiplicity_omega_c = clusters.multiplicity();
    let bound = (2 * rank_gamma).min(dec.h1c.dim()).min(dec.h2c.dim());
    let bound_satisfied = multiplicity_omega_c <= bound;
    let reconstructible_core = match dec.core_system() {
        Some(core_sys) => is_reconstructible(&core_sys)?,
        None => dec.h1c.is_zero() && dec.h2c.is_zero(),
    };

    let mut report = TheoremReport {
        tol,
        cluster_tol,
        threshold,
        d1,
        d2,
        dim_h1d: dec.h1d.dim(),
        dim_h1c: dec.h1c.dim(),
        dim_h2c: dec.h2c.dim(),
        dim_h2d: dec.h2d.dim(),
        orbit_equalities,
        chain_identities,
        containment_residuals,
        block_form_residual,
        rank_gamma,
        multiplicity_omega_c,
        cluster_sizes: clusters.sizes,
        min_cluster_gap: clusters.min_gap_between,
        bound,
        bound_satisfied,
        reconstructible_core,
        passed: false,
    };
    report.passed = report.failures().is_empty();
    Ok(report)
}

/// Serializable summary of a decomposition.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecompositionReport {
    pub tol: f64,
    pub d1: usize,
    pub d2: usize,
    pub dim_h1d: usize,
    pub dim_h1c: usize,
    pub dim_h2c: usize,
    pub dim_h2d: usize,
    pub route_distance_h1c: f64,
    pub route_distance_h2c: f64,
    pub omega_norm: f64,
    /// Largest required-zero block divided by `||Omega||`.
    pub block_form_residual: f64,
    pub threshold: f64,
    pub reconstructible: bool,
    pub passed: bool,
}

impl DecompositionReport {
    pub fn new(sys: &BlockSystem, dec: &FourWayDecomposition) -> Self {
        let omega_norm = op_norm(&assemble_full(sys).omega);
        let block_form_residual = verify_block_form(sys, dec) / omega_norm.max(f64::MIN_POSITIVE);
        let threshold = CERT_FACTOR * dec.tol;
        let [h1d, h1c, h2c, h2d] = dec.dims();
        Self {
            tol: dec.tol,
            d1: dec.d1(),
            d2: dec.d2(),
            dim_h1d: h1d,
            dim_h1c: h1c,
            dim_h2c: h2c,
            dim_h2d: h2d,
            route_distance_h1c: dec.route_distances.0,
            route_distance_h2c: dec.route_distances.1,
            omega_norm,
            block_form_residual,
            threshold,
            reconstructible: h1d == 0 && h2d == 0,
            passed: block_form_residual <= threshold,
        }
    }
}
