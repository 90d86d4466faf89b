//! Tensor formats, rank-1 and dense tensors, products, and vectorization.
//!
//! Vectorization order (public contract, used by all matrix assembly and CSV
//! output): the entry at 1-based multi-index `(i_1, ..., i_d)` of a tensor of
//! format `(n_1, ..., n_d)` maps to flat position
//! `(i_1 - 1) + n_1 (i_2 - 1) + n_1 n_2 (i_3 - 1) + ...`,
//! i.e. the first mode varies fastest.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Shape `(n_1, ..., n_d)` of a tensor space together with the derived
/// ambient dimension and Segre manifold dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorFormat {
    dims: Vec<usize>,
}

impl TensorFormat {
    /// Validated constructor for decomposition work: requires `d >= 1`, all
    /// `n_i >= 1`, and `n_i >= 2` whenever `d >= 2` (a mode of size 1 makes
    /// the Segre geometry degenerate).
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidArgument("format needs at least one mode".into()));
        }
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("mode sizes must be positive".into()));
        }
        if dims.len() >= 2 && dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(format!(
                "mode sizes must be at least 2 for order-{} tensors, got {:?}",
                dims.len(),
                dims
            )));
        }
        Ok(TensorFormat { dims })
    }

    /// Unvalidated constructor for formats derived from raw data, e.g. the
    /// output shape of an outer product of arbitrary nonempty vectors.
    pub(crate) fn raw(dims: Vec<usize>) -> Self {
        TensorFormat { dims }
    }

    /// Mode sizes `(n_1, ..., n_d)`.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes d.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Ambient dimension of the tensor space, the product of all mode sizes.
    pub fn ambient_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Dimension `n = 1 - d + sum n_i` of the (affine cone over the) Segre
    /// manifold of rank-1 tensors.
    pub fn segre_dim(&self) -> usize {
        self.dims.iter().sum::<usize>() + 1 - self.dims.len()
    }
}

impl std::fmt::Display for TensorFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Dimension of the Segre manifold for a format, `1 - d + sum n_i`.
pub fn segre_dimension(format: &TensorFormat) -> usize {
    format.segre_dim()
}

/// A dense tensor stored as a flat entry vector in the canonical
/// vectorization order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    format: TensorFormat,
    entries: Vec<f64>,
}

impl DenseTensor {
    pub fn new(format: TensorFormat, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != format.ambient_dim() {
            return Err(Error::InvalidArgument(format!(
                "entry count {} does not match ambient dimension {} of format {}",
                entries.len(),
                format.ambient_dim(),
                format
            )));
        }
        Ok(DenseTensor { format, entries })
    }

    pub fn format(&self) -> &TensorFormat {
        &self.format
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry at a 0-based multi-index.
    pub fn entry(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.format.order(), "index order mismatch");
        let mut flat = 0;
        let mut stride = 1;
        for (k, (&i, &n)) in index.iter().zip(self.format.dims()).enumerate() {
            assert!(i < n, "index {} out of range in mode {}", i, k + 1);
            flat += i * stride;
            stride *= n;
        }
        self.entries[flat]
    }
}

/// A rank-1 tensor `a_1 (x) a_2 (x) ... (x) a_d` stored in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Tensor {
    factors: Vec<Vec<f64>>,
}

impl Rank1Tensor {
    /// Requires at least one factor; every factor must be nonempty and not
    /// the zero vector.
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("rank-1 tensor needs at least one factor".into()));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.is_empty() {
                return Err(Error::InvalidArgument(format!("factor {} is empty", k + 1)));
            }
            if f.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidArgument(format!("factor {} is the zero vector", k + 1)));
            }
        }
        Ok(Rank1Tensor { factors })
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Format derived from the factor lengths.
    pub fn format(&self) -> TensorFormat {
        TensorFormat::raw(self.factors.iter().map(Vec::len).collect())
    }

    /// Dense form, entries in the canonical vectorization order.
    pub fn to_dense(&self) -> DenseTensor {
        let entries = kron_fold(&self.factors);
        DenseTensor {
            format: self.format(),
            entries,
        }
    }
}

/// An ordered tuple of r rank-1 tensors of a common format: a candidate
/// rank-r decomposition of their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Tuple {
    format: TensorFormat,
    terms: Vec<Rank1Tensor>,
}

impl Rank1Tuple {
    pub fn new(format: TensorFormat, terms: Vec<Rank1Tensor>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("tuple needs at least one term".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            let lens: Vec<usize> = t.factors().iter().map(Vec::len).collect();
            if lens != format.dims() {
                return Err(Error::InvalidArgument(format!(
                    "term {} has factor lengths {:?}, expected {:?}",
                    i + 1,
                    lens,
                    format.dims()
                )));
            }
        }
        Ok(Rank1Tuple { format, terms })
    }

    pub fn format(&self) -> &TensorFormat {
        &self.format
    }

    pub fn terms(&self) -> &[Rank1Tensor] {
        &self.terms
    }

    pub fn r(&self) -> usize {
        self.terms.len()
    }

    /// The sum of the terms as a dense tensor.
    pub fn sum_dense(&self) -> DenseTensor {
        let mut entries = vec![0.0; self.format.ambient_dim()];
        for t in &self.terms {
            for (e, v) in entries.iter_mut().zip(t.to_dense().entries) {
                *e += v;
            }
        }
        DenseTensor {
            format: self.format.clone(),
            entries,
        }
    }
}

/// Flat entries of `f_1 (x) ... (x) f_d` in canonical order: iteratively
/// `acc <- kron(f_k, acc)`, which keeps mode 1 fastest.
fn kron_fold(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(acc.len() * f.len());
        for &fj in f {
            for &ai in &acc {
                next.push(fj * ai);
            }
        }
        acc = next;
    }
    acc
}

/// Outer product of d vectors as a dense tensor; the entry at multi-index
/// `(i_1, ..., i_d)` is the product of the corresponding factor entries.
pub fn outer_product(factors: &[Vec<f64>]) -> Result<DenseTensor> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("outer product needs at least one factor".into()));
    }
    if let Some(k) = factors.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("factor {} is empty", k + 1)));
    }
    let format = TensorFormat::raw(factors.iter().map(Vec::len).collect());
    Ok(DenseTensor {
        entries: kron_fold(factors),
        format,
    })
}

/// The canonical vectorization of a dense tensor, a vector of length
/// `ambient_dim`. Inner products are preserved: this is an isometry.
pub fn vectorize(t: &DenseTensor) -> Vec<f64> {
    t.entries().to_vec()
}

/// Inner product of two rank-1 tensors of a common format, computed in
/// factored form as the product of factorwise dot products. Equals the
/// Euclidean inner product of the vectorizations.
pub fn inner_product(a: &Rank1Tensor, b: &Rank1Tensor) -> Result<f64> {
    let la: Vec<usize> = a.factors().iter().map(Vec::len).collect();
    let lb: Vec<usize> = b.factors().iter().map(Vec::len).collect();
    if la != lb {
        return Err(Error::InvalidArgument(format!(
            "format mismatch: {:?} vs {:?}",
            la, lb
        )));
    }
    Ok(a.factors()
        .iter()
        .zip(b.factors())
        .map(|(fa, fb)| fa.iter().zip(fb).map(|(x, y)| x * y).sum::<f64>())
        .product())
}

/// Mode-k unfolding of a dense tensor: an `n_k x (ambient/n_k)` matrix whose
/// columns enumerate the remaining modes in canonical order.
fn unfold(t: &DenseTensor, mode: usize) -> DMatrix<f64> {
    let dims = t.format().dims();
    let nk = dims[mode];
    let rest = t.format().ambient_dim() / nk;
    let inner: usize = dims[..mode].iter().product();
    let mut m = DMatrix::zeros(nk, rest);
    for (flat, &v) in t.entries().iter().enumerate() {
        let row = (flat / inner) % nk;
        let col = (flat % inner) + inner * (flat / (inner * nk));
        m[(row, col)] = v;
    }
    m
}

/// Recover the factors of a numerically rank-1 dense tensor.
///
/// Every mode-k unfolding must be numerically rank 1, i.e. its second
/// singular value at most `tol` times its first; the dominant left singular
/// vectors are the unit factors. Convention: factors 2..d are unit with a
/// nonnegative first nonzero entry; factor 1 carries the magnitude and the
/// compensating sign.
pub fn extract_factors(t: &DenseTensor, tol: f64) -> Result<Rank1Tensor> {
    let d = t.format().order();
    let norm = t.entries().iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("zero tensor has no rank-1 factorization".into()));
    }
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(d);
    for mode in 0..d {
        let m = unfold(t, mode);
        let svd = m.svd(true, false);
        let sv = &svd.singular_values;
        if sv.len() >= 2 && sv[1] > tol * sv[0] {
            return Err(Error::NotRankOne {
                mode: mode + 1,
                ratio: sv[1] / sv[0],
                tol,
            });
        }
        let u = svd.u.as_ref().expect("left singular vectors requested");
        units.push(u.column(0).iter().copied().collect());
    }
    // Fix signs of the unit factors (modes 2..d); the projection below is
    // taken against the flipped frame, so it absorbs the sign changes.
    for u in units.iter_mut().skip(1) {
        if let Some(&first) = u.iter().find(|&&x| x != 0.0) {
            if first < 0.0 {
                for x in u.iter_mut() {
                    *x = -*x;
                }
            }
        }
    }
    // Magnitude and sign carried by mode 1: project t onto the unit rank-1
    // direction.
    let unit_dense = kron_fold(&units);
    let coeff: f64 = t.entries().iter().zip(&unit_dense).map(|(x, y)| x * y).sum();
    for x in units[0].iter_mut() {
        *x *= coeff;
    }
    Rank1Tensor::new(units)
}
