//! Seeded random tuples: independent Gaussian factors, ill-posed
//! constructions with a shared factor, and additive perturbations.
//!
//! Every random quantity is drawn from a ChaCha8 stream derived from
//! `(seed, domain, index, term, mode)`, so each factor owns a stream and
//! results never depend on evaluation order or thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Rank1Tensor, Rank1Tuple, TensorFormat};

/// Stream domain for the factors of random tuples.
pub const DOMAIN_TUPLE: u64 = 0;
/// Stream domain for ill-posed anchor tuples.
pub const DOMAIN_ANCHOR: u64 = 1;
/// Stream domain for perturbation directions.
pub const DOMAIN_PERTURB: u64 = 2;
/// Stream domain reserved for the condition oracle's rotations.
pub const DOMAIN_ORACLE: u64 = 3;

/// Derives the ChaCha8 stream for one random quantity.
///
/// The 32-byte key is the little-endian concatenation of `seed`, `domain`,
/// `index` (sample or anchor index), and `(term << 32) | mode`. For
/// perturbation streams the `term` word carries the perturbation index
/// instead.
pub fn derive_stream(seed: u64, domain: u64, index: u64, term: u32, mode: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    let packed = ((term as u64) << 32) | mode as u64;
    key[24..32].copy_from_slice(&packed.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Maps a uniform u64 to (0, 1]: the high 53 bits, shifted into (0, 2^53],
/// times 2^-53. The left endpoint is excluded so logarithms are safe.
fn unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Draws `count` standard normal variates by the Box-Muller transform:
/// each uniform pair (u1, u2) in (0, 1] yields
/// sqrt(-2 ln u1) * (cos(2 pi u2), sin(2 pi u2)).
pub fn standard_normals(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u1 = unit_open(rng.next_u64());
        let u2 = unit_open(rng.next_u64());
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        out.push(radius * angle.cos());
        if out.len() < count {
            out.push(radius * angle.sin());
        }
    }
    out
}

/// A sampling plan: format, rank, master seed, and number of samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSpec {
    format: TensorFormat,
    r: usize,
    seed: u64,
    count: usize,
}

impl SampleSpec {
    pub fn new(format: TensorFormat, r: usize, seed: u64, count: usize) -> Result<Self> {
        if r < 1 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if count < 1 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        Ok(SampleSpec { format, r, seed, count })
    }

    pub fn format(&self) -> &TensorFormat {
        &self.format
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Draws sample `index` of the plan: r terms of d factors, each factor an
/// independent standard Gaussian vector from its own derived stream.
pub fn random_rank1_tuple(spec: &SampleSpec, index: usize) -> Result<Rank1Tuple> {
    if index >= spec.count {
        return Err(Error::InvalidArgument(format!(
            "sample index {} out of range for count {}",
            index, spec.count
        )));
    }
    let dims = spec.format.dims();
    let mut terms = Vec::with_capacity(spec.r);
    for term in 0..spec.r {
        let mut factors = Vec::with_capacity(dims.len());
        for (mode, &m) in dims.iter().enumerate() {
            let mut rng =
                derive_stream(spec.seed, DOMAIN_TUPLE, index as u64, term as u32, mode as u32);
            factors.push(standard_normals(&mut rng, m));
        }
        terms.push(Rank1Tensor::new(factors)?);
    }
    Rank1Tuple::new(spec.format.clone(), terms)
}

fn illposed_shared_factor(
    format: &TensorFormat,
    r: usize,
    rng: &mut ChaCha8Rng,
    shared_mode: usize,
) -> Result<Rank1Tuple> {
    if format.order() != 3 {
        return Err(Error::UnsupportedFormat(format!(
            "ill-posed constructions need order 3, got order {}",
            format.order()
        )));
    }
    if r < 2 {
        return Err(Error::InvalidArgument(
            "ill-posed constructions need rank at least 2".into(),
        ));
    }
    let dims = format.dims();
    let mut terms: Vec<Rank1Tensor> = Vec::with_capacity(r);
    for _ in 0..r - 1 {
        let factors: Vec<Vec<f64>> =
            dims.iter().map(|&m| standard_normals(rng, m)).collect();
        terms.push(Rank1Tensor::new(factors)?);
    }
    // Final term: reuse the first term's factor in the shared mode, draw
    // the remaining modes fresh.
    let mut factors = Vec::with_capacity(3);
    for (mode, &m) in dims.iter().enumerate() {
        if mode == shared_mode {
            factors.push(terms[0].factors()[shared_mode].clone());
        } else {
            factors.push(standard_normals(rng, m));
        }
    }
    terms.push(Rank1Tensor::new(factors)?);
    Rank1Tuple::new(format.clone(), terms)
}

/// An order-3 tuple whose last term reuses the first term's mode-1 factor.
/// The tangent spaces of the two terms then share the direction spanned by
/// the common factor tensored with either term's remaining factors, so the
/// Terracini matrix is column-rank deficient and kappa is infinite.
pub fn illposed_shared_first_factor(
    format: &TensorFormat,
    r: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Rank1Tuple> {
    illposed_shared_factor(format, r, rng, 0)
}

/// As [`illposed_shared_first_factor`], sharing the mode-3 factor instead.
pub fn illposed_shared_third_factor(
    format: &TensorFormat,
    r: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Rank1Tuple> {
    illposed_shared_factor(format, r, rng, 2)
}

/// Additively perturbs every factor: f + scale * g with g standard
/// Gaussian. The direction g is always drawn, so a scale of zero consumes
/// the same stream state as any other scale.
pub fn perturb_tuple(t: &Rank1Tuple, scale: f64, rng: &mut ChaCha8Rng) -> Result<Rank1Tuple> {
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "perturbation scale must be finite and nonnegative, got {scale}"
        )));
    }
    let mut terms = Vec::with_capacity(t.r());
    for term in t.terms() {
        let mut factors = Vec::with_capacity(term.factors().len());
        for f in term.factors() {
            let g = standard_normals(rng, f.len());
            factors.push(f.iter().zip(&g).map(|(x, y)| x + scale * y).collect());
        }
        terms.push(Rank1Tensor::new(factors)?);
    }
    Rank1Tuple::new(t.format().clone(), terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fubini_study_distance, tangent_basis, weighted_distance};
    use crate::tensor::vectorize;
    use nalgebra::DVector;
    use std::collections::HashSet;
    use std::hash::{DefaultHasher, Hash, Hasher};

    fn spec(dims: &[usize], r: usize, seed: u64, count: usize) -> SampleSpec {
        SampleSpec::new(TensorFormat::new(dims.to_vec()).unwrap(), r, seed, count).unwrap()
    }

    #[test]
    fn streams_are_deterministic() {
        let s = spec(&[7, 7, 2], 7, 42, 10);
        let a = random_rank1_tuple(&s, 3).unwrap();
        let b = random_rank1_tuple(&s, 3).unwrap();
        assert_eq!(a, b);
        let c = random_rank1_tuple(&s, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn index_must_be_in_range() {
        let s = spec(&[2, 2, 2], 2, 0, 5);
        assert!(random_rank1_tuple(&s, 5).is_err());
        assert!(random_rank1_tuple(&s, 4).is_ok());
    }

    #[test]
    fn normals_have_chi_square_mean() {
        // ||a||^2 for a Gaussian factor in R^7 is chi-square with mean 7
        // and variance 14; the mean over 100_000 samples should land
        // within three standard errors.
        let mut rng = derive_stream(7, DOMAIN_TUPLE, 0, 0, 0);
        let samples = 100_000;
        let mut total = 0.0;
        for _ in 0..samples {
            let a = standard_normals(&mut rng, 7);
            total += a.iter().map(|x| x * x).sum::<f64>();
        }
        let mean = total / samples as f64;
        let stderr = (14.0f64 / samples as f64).sqrt();
        assert!((mean - 7.0).abs() < 3.0 * stderr, "mean {mean}");
    }

    #[test]
    fn no_collisions_across_streams() {
        let s = spec(&[7, 7, 2], 2, 1, 100_000);
        let mut seen = HashSet::with_capacity(100_000);
        for index in 0..100_000 {
            let t = random_rank1_tuple(&s, index).unwrap();
            let mut h = DefaultHasher::new();
            for term in t.terms() {
                for f in term.factors() {
                    for x in f {
                        x.to_bits().hash(&mut h);
                    }
                }
            }
            assert!(seen.insert(h.finish()), "collision at index {index}");
        }
    }

    #[test]
    fn illposed_shares_the_right_factor() {
        let format = TensorFormat::new(vec![11, 10, 5]).unwrap();
        let mut rng = derive_stream(3, DOMAIN_ANCHOR, 0, 0, 0);
        let t = illposed_shared_first_factor(&format, 4, &mut rng).unwrap();
        assert_eq!(t.r(), 4);
        assert_eq!(t.terms()[3].factors()[0], t.terms()[0].factors()[0]);
        assert_ne!(t.terms()[3].factors()[1], t.terms()[0].factors()[1]);

        let mut rng = derive_stream(3, DOMAIN_ANCHOR, 0, 0, 0);
        let u = illposed_shared_third_factor(&format, 4, &mut rng).unwrap();
        assert_eq!(u.terms()[3].factors()[2], u.terms()[0].factors()[2]);
        assert_ne!(u.terms()[3].factors()[0], u.terms()[0].factors()[0]);
    }

    #[test]
    fn illposed_is_deterministic() {
        let format = TensorFormat::new(vec![7, 7, 3]).unwrap();
        let mut r1 = derive_stream(5, DOMAIN_ANCHOR, 2, 0, 0);
        let mut r2 = derive_stream(5, DOMAIN_ANCHOR, 2, 0, 0);
        let a = illposed_shared_first_factor(&format, 7, &mut r1).unwrap();
        let b = illposed_shared_first_factor(&format, 7, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn illposed_rejects_bad_arguments() {
        let mut rng = derive_stream(0, DOMAIN_ANCHOR, 0, 0, 0);
        let order4 = TensorFormat::new(vec![2, 2, 2, 2]).unwrap();
        assert!(matches!(
            illposed_shared_first_factor(&order4, 2, &mut rng),
            Err(Error::UnsupportedFormat(_))
        ));
        let order3 = TensorFormat::new(vec![3, 3, 3]).unwrap();
        assert!(matches!(
            illposed_shared_first_factor(&order3, 1, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn shared_direction_lies_in_both_tangent_spaces() {
        // With terms a_1 x b_1 x c and a_r x b_r x c sharing the mode-3
        // factor c, the cross direction a_1 x b_r x c lies in both tangent
        // spaces: as a_1 x y x c with y = b_r at the first term, and as
        // x x b_r x c with x = a_1 at the last. This intersection is what
        // collapses sigma_min to zero.
        let format = TensorFormat::new(vec![5, 4, 3]).unwrap();
        let mut rng = derive_stream(8, DOMAIN_ANCHOR, 1, 0, 0);
        let t = illposed_shared_third_factor(&format, 3, &mut rng).unwrap();
        let cross = crate::tensor::outer_product(&[
            t.terms()[0].factors()[0].clone(),
            t.terms()[2].factors()[1].clone(),
            t.terms()[2].factors()[2].clone(),
        ])
        .unwrap();
        let v = DVector::from_vec(vectorize(&cross));
        let v = &v / v.norm();
        for idx in [0, 2] {
            let basis = tangent_basis(&t.terms()[idx]).unwrap();
            let coeffs = basis.as_matrix().transpose() * &v;
            let residual = (&v - basis.as_matrix() * coeffs).norm();
            assert!(residual < 1e-12, "residual {residual} for term {idx}");
        }
    }

    #[test]
    fn perturbation_with_zero_scale_is_identity() {
        let s = spec(&[5, 4, 3], 2, 13, 1);
        let t = random_rank1_tuple(&s, 0).unwrap();
        let mut rng = derive_stream(13, DOMAIN_PERTURB, 0, 0, 0);
        let p = perturb_tuple(&t, 0.0, &mut rng).unwrap();
        assert_eq!(t, p);
    }

    #[test]
    fn perturbation_rejects_bad_scale() {
        let s = spec(&[2, 2, 2], 1, 0, 1);
        let t = random_rank1_tuple(&s, 0).unwrap();
        let mut rng = derive_stream(0, DOMAIN_PERTURB, 0, 0, 0);
        assert!(perturb_tuple(&t, -0.5, &mut rng).is_err());
        assert!(perturb_tuple(&t, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn perturbation_displacement_matches_small_angle_scale() {
        // For a unit factor f in R^7 and scale s, the Fubini-Study
        // displacement of f + s g is about s ||g_perp||, whose mean is
        // s E[chi_6] = s sqrt(2) Gamma(7/2) / Gamma(3) = 2.3472... Accept
        // 5 percent around that over 10_000 trials.
        let m = 7;
        let scale = 1e-2;
        let expected = 2.3472 * scale;
        let mut rng = derive_stream(17, DOMAIN_PERTURB, 0, 0, 0);
        let mut f = vec![0.0; m];
        f[0] = 1.0;
        let mut total = 0.0;
        let trials = 10_000;
        for _ in 0..trials {
            let g = standard_normals(&mut rng, m);
            let p: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + scale * y).collect();
            total += fubini_study_distance(&f, &p).unwrap();
        }
        let mean = total / trials as f64;
        assert!(
            (mean - expected).abs() < 0.05 * expected,
            "mean {mean}, expected {expected}"
        );
    }

    #[test]
    fn perturbation_distance_shrinks_with_scale() {
        let s = spec(&[7, 7, 2], 3, 29, 1);
        let t = random_rank1_tuple(&s, 0).unwrap();
        let mut means = Vec::new();
        for (i, scale) in [1e-1, 1e-2, 1e-3].into_iter().enumerate() {
            let mut total = 0.0;
            let trials = 1000;
            for p in 0..trials {
                let mut rng = derive_stream(29, DOMAIN_PERTURB, i as u64, p, 0);
                let perturbed = perturb_tuple(&t, scale, &mut rng).unwrap();
                total += weighted_distance(&t, &perturbed).unwrap();
            }
            means.push(total / trials as f64);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }
}
