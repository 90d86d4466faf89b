//! Segre tangent bases and distances: Fubini-Study (pointwise, product, and
//! weighted forms) and subspace distances from principal angles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{Rank1Tensor, Rank1Tuple};

/// Angles below this are recomputed through the sine-based formulation,
/// where arccos of a cross-Gram singular value loses all precision.
const SINE_REFINEMENT_CUTOFF: f64 = 1e-4;

/// A list of k orthonormal vectors in R^m, stored as matrix columns.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    columns: DMatrix<f64>,
}

impl OrthoBasis {
    /// Validates orthonormality: the Gram matrix must equal the identity
    /// within 1e-12 entrywise.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let basis = OrthoBasis { columns };
        let dev = basis.max_gram_deviation();
        if dev > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal: max |Gram - I| = {:.3e}",
                dev
            )));
        }
        Ok(basis)
    }

    /// For internally constructed bases that are orthonormal by construction.
    pub(crate) fn from_columns_unchecked(columns: DMatrix<f64>) -> Self {
        OrthoBasis { columns }
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Number of basis vectors.
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Largest entrywise deviation of the Gram matrix from the identity.
    pub fn max_gram_deviation(&self) -> f64 {
        let gram = self.columns.transpose() * &self.columns;
        let k = gram.nrows();
        let mut dev: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[(i, j)] - target).abs());
            }
        }
        dev
    }
}

/// A linear subspace of R^m represented by an orthonormal basis.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: OrthoBasis,
}

impl Subspace {
    pub fn new(basis: OrthoBasis) -> Self {
        Subspace { basis }
    }

    /// Orthonormalizes the columns of `m` (thin QR) and wraps the result.
    pub fn orthonormalize(m: DMatrix<f64>) -> Result<Self> {
        if m.ncols() == 0 || m.nrows() < m.ncols() {
            return Err(Error::InvalidArgument(format!(
                "cannot span a {}-dimensional subspace of R^{}",
                m.ncols(),
                m.nrows()
            )));
        }
        let q = m.qr().q();
        Ok(Subspace {
            basis: OrthoBasis::from_columns_unchecked(q),
        })
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ambient_dim()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Principal angles between two subspaces, stored nondecreasing, in
/// [0, pi/2], radians.
#[derive(Debug, Clone)]
pub struct PrincipalAngles {
    angles: Vec<f64>,
}

impl PrincipalAngles {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// The largest principal angle.
    pub fn max_angle(&self) -> f64 {
        self.angles.last().copied().unwrap_or(0.0)
    }
}

/// An orthonormal basis of the orthogonal complement of `v` in R^m
/// (m - 1 vectors), via the Householder reflector that carries `v` to a
/// multiple of e_1: the reflector's remaining columns span v-perp exactly.
/// Deterministic for fixed input.
pub fn orthonormal_complement(v: &[f64]) -> Result<OrthoBasis> {
    let m = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if m == 0 || norm == 0.0 {
        return Err(Error::InvalidArgument("complement of the zero vector is undefined".into()));
    }
    // w = v + sign(v_1) ||v|| e_1; H = I - 2 w w^T / ||w||^2 maps v to
    // -sign(v_1) ||v|| e_1, so columns 2..m of H are orthonormal and
    // orthogonal to v.
    let mut w: Vec<f64> = v.to_vec();
    let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign * norm;
    let wn2: f64 = w.iter().map(|x| x * x).sum();
    let mut cols = DMatrix::zeros(m, m - 1);
    for j in 1..m {
        let coef = 2.0 * w[j] / wn2;
        for i in 0..m {
            let e = if i == j { 1.0 } else { 0.0 };
            cols[(i, j - 1)] = e - coef * w[i];
        }
    }
    Ok(OrthoBasis::from_columns_unchecked(cols))
}

/// Canonical-order Kronecker fold of a list of vectors (first factor varies
/// fastest), matching the tensor vectorization order.
fn kron_fold(parts: &[&[f64]]) -> Vec<f64> {
    let mut acc = vec![1.0];
    for f in parts {
        let mut next = Vec::with_capacity(acc.len() * f.len());
        for &fj in f.iter() {
            for &ai in &acc {
                next.push(fj * ai);
            }
        }
        acc = next;
    }
    acc
}

/// Orthonormal basis of the tangent space to the Segre manifold (of rank-1
/// tensors, as a cone) at `t`, vectorized into R^Pi.
///
/// With unit factors u_1, ..., u_d the basis is: the point u_1 (x) ... (x) u_d
/// itself, plus, for every mode k and every vector w in the orthonormal
/// complement of u_k, the tensor with factor k replaced by w. These
/// n = 1 - d + sum n_k vectors are pairwise orthonormal.
pub fn tangent_basis(t: &Rank1Tensor) -> Result<OrthoBasis> {
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(t.order());
    for (k, f) in t.factors().iter().enumerate() {
        let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(format!("factor {} is the zero vector", k + 1)));
        }
        units.push(f.iter().map(|x| x / norm).collect());
    }
    let d = units.len();
    let format = t.format();
    let ambient = format.ambient_dim();
    let n = format.segre_dim();

    // Partial products of the unit factors below and above each mode keep
    // every tangent column at O(ambient) cost.
    let unit_slices: Vec<&[f64]> = units.iter().map(Vec::as_slice).collect();
    let mut columns = DMatrix::zeros(ambient, n);
    let mut col = 0;
    columns.set_column(col, &DVector::from_vec(kron_fold(&unit_slices)));
    col += 1;
    for k in 0..d {
        let prefix = kron_fold(&unit_slices[..k]);
        let suffix = kron_fold(&unit_slices[k + 1..]);
        let comp = orthonormal_complement(&units[k])?;
        for j in 0..comp.len() {
            let w: Vec<f64> = comp.as_matrix().column(j).iter().copied().collect();
            let v = kron_fold(&[prefix.as_slice(), w.as_slice(), suffix.as_slice()]);
            columns.set_column(col, &DVector::from_vec(v));
            col += 1;
        }
    }
    debug_assert_eq!(col, n);
    Ok(OrthoBasis::from_columns_unchecked(columns))
}

/// Fubini-Study distance between the projective classes of two nonzero
/// vectors: arccos(|<x,y>| / (||x|| ||y||)), in [0, pi/2]. Evaluated through
/// atan2 of the orthogonal residual so small angles keep full relative
/// precision (the sine-based formulation).
pub fn fubini_study_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::InvalidArgument("projective distance of the zero vector is undefined".into()));
    }
    let c: f64 = x.iter().zip(y).map(|(a, b)| (a / nx) * (b / ny)).sum();
    let mut s2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let r = b / ny - c * (a / nx);
        s2 += r * r;
    }
    Ok(s2.sqrt().atan2(c.abs()))
}

/// Product Fubini-Study distance between componentwise projective tuples:
/// the square root of the sum of squared componentwise distances.
pub fn product_fs_distance(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!(
            "component count mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut sum = 0.0;
    for (a, b) in p.iter().zip(q) {
        let d = fubini_study_distance(a, b)?;
        sum += d * d;
    }
    Ok(sum.sqrt())
}

/// Weighted distance between two rank-1 tuples of a common format: per term,
/// d_w^2 = sum_k (n - n_k) d_P(p_k, q_k)^2 with n the Segre dimension; the
/// tuple distance is the square root of the sum over terms.
pub fn weighted_distance(p: &Rank1Tuple, q: &Rank1Tuple) -> Result<f64> {
    if p.format() != q.format() || p.r() != q.r() {
        return Err(Error::InvalidArgument(format!(
            "tuple mismatch: {} with r = {} vs {} with r = {}",
            p.format(),
            p.r(),
            q.format(),
            q.r()
        )));
    }
    let n = p.format().segre_dim() as f64;
    let mut total = 0.0;
    for (tp, tq) in p.terms().iter().zip(q.terms()) {
        for (k, (fp, fq)) in tp.factors().iter().zip(tq.factors()).enumerate() {
            let weight = n - p.format().dims()[k] as f64;
            let d = fubini_study_distance(fp, fq)?;
            total += weight * d * d;
        }
    }
    Ok(total.sqrt())
}

/// Principal angles between two subspaces of a common ambient space:
/// arccos of the singular values of the cross-Gram matrix (clamped into
/// [0,1]), refined through the sine-based residual SVD below 1e-4 radians.
/// Returns min(dim u, dim v) angles, nondecreasing.
pub fn principal_angles(u: &Subspace, v: &Subspace) -> Result<PrincipalAngles> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::InvalidArgument(format!(
            "ambient dimension mismatch: {} vs {}",
            u.ambient_dim(),
            v.ambient_dim()
        )));
    }
    // Arrange the smaller space second so the residual SVD yields exactly
    // min(p, q) sines.
    let (a, b) = if u.dim() >= v.dim() { (u, v) } else { (v, u) };
    let am = a.basis().as_matrix();
    let bm = b.basis().as_matrix();
    let cross = am.transpose() * bm;
    let q = bm.ncols();
    let sv = cross.clone().singular_values();
    // Descending cosines give nondecreasing angles.
    let mut angles: Vec<f64> = sv.iter().map(|&c| c.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if angles.first().is_some_and(|&t| t < SINE_REFINEMENT_CUTOFF) {
        let residual = bm - am * cross;
        let mut sines: Vec<f64> = residual.singular_values().iter().copied().collect();
        sines.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for i in 0..q {
            if angles[i] < SINE_REFINEMENT_CUTOFF {
                angles[i] = sines[i].clamp(0.0, 1.0).asin();
            }
        }
    }
    Ok(PrincipalAngles { angles })
}

fn require_equal_dims(u: &Subspace, v: &Subspace) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::InvalidArgument(format!(
            "subspace dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    Ok(())
}

/// Projection distance between equal-dimensional subspaces: the spectral
/// norm of the difference of orthogonal projectors, max_i sin(theta_i).
pub fn projection_distance(u: &Subspace, v: &Subspace) -> Result<f64> {
    require_equal_dims(u, v)?;
    Ok(principal_angles(u, v)?.max_angle().sin())
}

/// Projection distance between tuples of subspaces: the square root of the
/// sum of squared pairwise projection distances.
pub fn projection_distance_tuple(us: &[Subspace], vs: &[Subspace]) -> Result<f64> {
    if us.len() != vs.len() {
        return Err(Error::InvalidArgument("tuple length mismatch".into()));
    }
    let mut sum = 0.0;
    for (u, v) in us.iter().zip(vs) {
        let d = projection_distance(u, v)?;
        sum += d * d;
    }
    Ok(sum.sqrt())
}

/// Riemannian Grassmann distance: sqrt of the sum of squared principal
/// angles.
pub fn grassmann_distance(u: &Subspace, v: &Subspace) -> Result<f64> {
    require_equal_dims(u, v)?;
    let angles = principal_angles(u, v)?;
    Ok(angles.angles().iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Grassmann distance between tuples of subspaces: squared pairwise
/// distances summed across the tuple, then the square root.
pub fn grassmann_distance_tuple(us: &[Subspace], vs: &[Subspace]) -> Result<f64> {
    if us.len() != vs.len() {
        return Err(Error::InvalidArgument("tuple length mismatch".into()));
    }
    let mut sum = 0.0;
    for (u, v) in us.iter().zip(vs) {
        let d = grassmann_distance(u, v)?;
        sum += d * d;
    }
    Ok(sum.sqrt())
}
