//! The Terracini matrix of a rank-1 tuple and the geometric condition number
//! kappa, the inverse smallest singular value, with an explicit infinity
//! policy and an independent oracle path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::tangent_basis;
use crate::sampling::{derive_stream, standard_normals, DOMAIN_ORACLE};
use crate::tensor::Rank1Tuple;

/// Internal seed for the oracle's randomized rotations; fixed so the oracle
/// is a deterministic function of its input.
const ORACLE_SEED: u64 = 0x6f72_6163_6c65_3031;

/// kappa as a tagged extended real: a finite positive value or the infinity
/// flag. Floating-point infinities never circulate inside statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(*x),
            ExtendedReal::Infinite => None,
        }
    }

    /// Collapses to f64, mapping the infinity flag to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => *x,
            ExtendedReal::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{}", x),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

/// The Pi x (r n) block matrix whose i-th block of n columns is the tangent
/// basis of the i-th term, in the canonical vectorization order.
#[derive(Debug, Clone)]
pub struct TerraciniMatrix {
    matrix: DMatrix<f64>,
    block_dim: usize,
}

impl TerraciniMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Number of columns per tangent block (the Segre dimension n).
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// View of the i-th tangent block (n columns).
    pub fn block(&self, i: usize) -> nalgebra::DMatrixView<'_, f64> {
        self.matrix.view((0, i * self.block_dim), (self.matrix.nrows(), self.block_dim))
    }

    /// Debug dump: Pi rows of comma-separated entries, canonical order.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| format!("{}", self.matrix[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// The result of a condition number computation.
#[derive(Debug, Clone)]
pub struct ConditionResult {
    /// 1/sigma_min, or the infinity flag.
    pub kappa: ExtendedReal,
    /// The (r n)-th singular value of the Terracini matrix; exactly 0.0 in
    /// the shape-forced case, where rank(T) <= Pi < r n.
    pub sigma_min: f64,
    pub rows: usize,
    pub cols: usize,
    /// True when r n > Pi, which forces kappa = infinity for every tuple of
    /// that shape.
    pub shape_forced_infinite: bool,
}

impl ConditionResult {
    pub fn is_infinite(&self) -> bool {
        !self.kappa.is_finite()
    }
}

/// Assembles the Terracini matrix of a tuple: block i is
/// `tangent_basis(term i)`.
pub fn terracini_matrix(t: &Rank1Tuple) -> Result<TerraciniMatrix> {
    let n = t.format().segre_dim();
    let ambient = t.format().ambient_dim();
    let mut matrix = DMatrix::zeros(ambient, t.r() * n);
    for (i, term) in t.terms().iter().enumerate() {
        let basis = tangent_basis(term)?;
        matrix.view_mut((0, i * n), (ambient, n)).copy_from(basis.as_matrix());
    }
    Ok(TerraciniMatrix { matrix, block_dim: n })
}

/// Below this, sigma_min is indistinguishable from an exact rank drop:
/// 1e-14 times an upper bound for the spectral norm (the max column
/// absolute sum).
fn infinity_threshold(m: &DMatrix<f64>) -> f64 {
    let mut max_col_sum: f64 = 0.0;
    for j in 0..m.ncols() {
        max_col_sum = max_col_sum.max(m.column(j).iter().map(|x| x.abs()).sum());
    }
    1e-14 * max_col_sum
}

/// The geometric condition number of a rank-1 tuple: the inverse of the
/// (r n)-th singular value of its Terracini matrix.
///
/// If r n > Pi the singular value is structurally zero and the result is the
/// infinity flag with `shape_forced_infinite` set. Otherwise sigma_min below
/// the infinity threshold also reports the flag.
pub fn condition_number(t: &Rank1Tuple) -> Result<ConditionResult> {
    let tm = terracini_matrix(t)?;
    let (rows, cols) = (tm.rows(), tm.cols());
    if cols > rows {
        return Ok(ConditionResult {
            kappa: ExtendedReal::Infinite,
            sigma_min: 0.0,
            rows,
            cols,
            shape_forced_infinite: true,
        });
    }
    let sv = tm.as_matrix().clone().singular_values();
    let sigma_min = sv[sv.len() - 1];
    let kappa = if sigma_min < infinity_threshold(tm.as_matrix()) {
        ExtendedReal::Infinite
    } else {
        ExtendedReal::Finite(1.0 / sigma_min)
    };
    Ok(ConditionResult {
        kappa,
        sigma_min,
        rows,
        cols,
        shape_forced_infinite: false,
    })
}

/// Independent verification path for [`condition_number`]: assembles the
/// Terracini matrix with a different orthonormal frame per block (each
/// tangent basis rotated by a seeded random orthogonal matrix), forms the
/// pseudoinverse explicitly through a full SVD, and returns its spectral
/// norm computed by a second SVD.
pub fn condition_oracle(t: &Rank1Tuple) -> Result<f64> {
    let n = t.format().segre_dim();
    let ambient = t.format().ambient_dim();
    if t.r() * n > ambient {
        return Err(Error::InvalidArgument(format!(
            "oracle needs r n <= Pi, got {} x {} blocks in R^{}",
            t.r(),
            n,
            ambient
        )));
    }
    let mut rng = derive_stream(ORACLE_SEED, DOMAIN_ORACLE, 0, 0, 0);
    let mut matrix = DMatrix::zeros(ambient, t.r() * n);
    for (i, term) in t.terms().iter().enumerate() {
        let basis = tangent_basis(term)?;
        // Random orthogonal Q from the QR factorization of a Gaussian
        // matrix, sign-fixed to a positive R diagonal.
        let g = DMatrix::from_vec(n, n, standard_normals(&mut rng, n * n));
        let qr = g.qr();
        let r_mat = qr.r();
        let mut q = qr.q();
        for j in 0..n {
            if r_mat[(j, j)] < 0.0 {
                for ii in 0..n {
                    q[(ii, j)] = -q[(ii, j)];
                }
            }
        }
        let rotated = basis.as_matrix() * q;
        matrix.view_mut((0, i * n), (ambient, n)).copy_from(&rotated);
    }
    let pinv = matrix
        .pseudo_inverse(0.0)
        .map_err(|e| Error::InvalidArgument(format!("pseudoinverse failed: {e}")))?;
    Ok(pinv.singular_values()[0])
}
