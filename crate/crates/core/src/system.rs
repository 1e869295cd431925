//! Conservative systems split into observable and hidden parts.
//!
//! A [`BlockSystem`] holds the frequency operator in block form
//! `[[omega1, gamma], [gamma^H, omega2]]` with respect to `C^d1 (+) C^d2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diag, c64, check_hermitian, symmetrize, CMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    omega1: CMatrix,
    omega2: CMatrix,
    gamma: CMatrix,
    tol: f64,
}

impl BlockSystem {
    /// Validates shapes and Hermiticity (`||A - A^H|| <= tol ||A||`), then
    /// symmetrizes both diagonal blocks so they are exactly Hermitian.
    pub fn new(omega1: CMatrix, omega2: CMatrix, gamma: CMatrix, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let (d1, d2) = (omega1.nrows(), omega2.nrows());
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidArgument(
                "observable and hidden spaces must both be nonzero".into(),
            ));
        }
        check_hermitian(&omega1, tol, "omega1")?;
        check_hermitian(&omega2, tol, "omega2")?;
        if gamma.nrows() != d1 {
            return Err(Error::DimensionMismatch {
                expected: d1,
                found: gamma.nrows(),
                context: "gamma rows must equal d1",
            });
        }
        if gamma.ncols() != d2 {
            return Err(Error::DimensionMismatch {
                expected: d2,
                found: gamma.ncols(),
                context: "gamma columns must equal d2",
            });
        }
        Ok(Self {
            omega1: symmetrize(&omega1),
            omega2: symmetrize(&omega2),
            gamma,
            tol,
        })
    }

    pub fn d1(&self) -> usize {
        self.omega1.nrows()
    }

    pub fn d2(&self) -> usize {
        self.omega2.nrows()
    }

    pub fn dim(&self) -> usize {
        self.d1() + self.d2()
    }

    pub fn omega1(&self) -> &CMatrix {
        &self.omega1
    }

    pub fn omega2(&self) -> &CMatrix {
        &self.omega2
    }

    pub fn gamma(&self) -> &CMatrix {
        &self.gamma
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// The same system with the roles of observable and hidden parts exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            omega1: self.omega2.clone(),
            omega2: self.omega1.clone(),
            gamma: self.gamma.adjoint(),
            tol: self.tol,
        }
    }
}

/// The full frequency operator together with its observable/hidden split.
#[derive(Debug, Clone, PartialEq)]
pub struct FullOperator {
    pub omega: CMatrix,
    pub split: (usize, usize),
}

impl FullOperator {
    /// Extracts the blocks back into a [`BlockSystem`].
    pub fn to_block_system(&self, tol: f64) -> Result<BlockSystem> {
        let (d1, d2) = self.split;
        BlockSystem::new(
            self.omega.view((0, 0), (d1, d1)).into_owned(),
            self.omega.view((d1, d1), (d2, d2)).into_owned(),
            self.omega.view((0, d1), (d1, d2)).into_owned(),
            tol,
        )
    }
}

/// `[[omega1, gamma], [gamma^H, omega2]]`.
pub fn assemble_full(sys: &BlockSystem) -> FullOperator {
    let (d1, d2) = (sys.d1(), sys.d2());
    let mut omega = block_diag(&sys.omega1, &sys.omega2);
    omega.view_mut((0, d1), (d1, d2)).copy_from(&sys.gamma);
    omega.view_mut((d1, 0), (d2, d1)).copy_from(&sys.gamma.adjoint());
    FullOperator {
        omega,
        split: (d1, d2),
    }
}

/// The uncoupled part `diag(omega1, omega2)` and the coupling part
/// `[[0, gamma], [gamma^H, 0]]`. Their sum is the full operator exactly,
/// since every entry is placed rather than computed.
pub fn decoupled_parts(sys: &BlockSystem) -> (CMatrix, CMatrix) {
    let (d1, d2) = (sys.d1(), sys.d2());
    let uncoupled = block_diag(&sys.omega1, &sys.omega2);
    let mut coupling = CMatrix::zeros(d1 + d2, d1 + d2);
    coupling.view_mut((0, d1), (d1, d2)).copy_from(&sys.gamma);
    coupling.view_mut((d1, 0), (d2, d1)).copy_from(&sys.gamma.adjoint());
    (uncoupled, coupling)
}

fn gaussian_c64(rng: &mut ChaCha8Rng) -> num_complex::Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Exactly Hermitian random matrix with spectrum of order one.
pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m[(i, i)] = c64(d * scale, 0.0);
        for j in (i + 1)..n {
            let z = gaussian_c64(rng) * scale;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

/// Deterministic pseudo-random system whose coupling has exactly
/// `coupling_rank` (a sum of that many outer products).
pub fn random_system(d1: usize, d2: usize, coupling_rank: usize, seed: u64) -> Result<BlockSystem> {
    if coupling_rank > d1.min(d2) {
        return Err(Error::InvalidArgument(format!(
            "coupling rank {coupling_rank} exceeds min(d1, d2) = {}",
            d1.min(d2)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega1 = random_hermitian(&mut rng, d1);
    let omega2 = random_hermitian(&mut rng, d2);
    let left = random_matrix(&mut rng, d1, coupling_rank);
    let right = random_matrix(&mut rng, d2, coupling_rank);
    let norm = 1.0 / (d1.max(d2) as f64).sqrt();
    let gamma = (left * right.adjoint()).map(|z| z * norm);
    BlockSystem::new(omega1, omega2, gamma, DEFAULT_TOL)
}

/// A complex number as `[re, im]`.
pub type ComplexPair = [f64; 2];

pub fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn rows_to_matrix(field: &str, rows: &[Vec<ComplexPair>], nrows: usize, ncols: usize) -> Result<CMatrix> {
    if rows.len() != nrows {
        return Err(Error::Format(format!(
            "field `{field}`: expected {nrows} rows, found {}",
            rows.len()
        )));
    }
    let mut m = CMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Format(format!(
                "field `{field}` row {i}: expected {ncols} entries, found {}",
                row.len()
            )));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::Format(format!("field `{field}` entry ({i},{j}) is not finite")));
            }
            m[(i, j)] = c64(re, im);
        }
    }
    Ok(m)
}

/// On-disk system description shared by every CLI command.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemFile {
    pub d1: usize,
    pub d2: usize,
    pub tol: f64,
    pub omega1: Vec<Vec<ComplexPair>>,
    pub omega2: Vec<Vec<ComplexPair>>,
    pub gamma: Vec<Vec<ComplexPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl SystemFile {
    pub fn from_system(sys: &BlockSystem) -> Self {
        Self {
            d1: sys.d1(),
            d2: sys.d2(),
            tol: sys.tol(),
            omega1: matrix_to_rows(sys.omega1()),
            omega2: matrix_to_rows(sys.omega2()),
            gamma: matrix_to_rows(sys.gamma()),
            metadata: None,
        }
    }

    pub fn to_system(&self) -> Result<BlockSystem> {
        let omega1 = rows_to_matrix("omega1", &self.omega1, self.d1, self.d1)?;
        let omega2 = rows_to_matrix("omega2", &self.omega2, self.d2, self.d2)?;
        let gamma = rows_to_matrix("gamma", &self.gamma, self.d1, self.d2)?;
        BlockSystem::new(omega1, omega2, gamma, self.tol).map_err(|e| match e {
            Error::Format(_) => e,
            other => Error::Format(other.to_string()),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Format(format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }
}

pub fn system_to_json(sys: &BlockSystem) -> String {
    SystemFile::from_system(sys).to_json()
}

pub fn system_from_json(text: &str) -> Result<BlockSystem> {
    SystemFile::from_json(text)?.to_system()
}
