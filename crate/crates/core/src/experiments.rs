//! Monte Carlo experiments over the condition number: empirical ccdf
//! tables, power-law tail fits, quantiles, and perturbation sweeps around
//! ill-posed anchors, with deterministic CSV and JSON serialization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::{condition_number, ExtendedReal};
use crate::error::{Error, Result};
use crate::geometry::weighted_distance;
use crate::sampling::{
    derive_stream, illposed_shared_first_factor, perturb_tuple, random_rank1_tuple, SampleSpec,
    DOMAIN_ANCHOR, DOMAIN_PERTURB,
};
use crate::tensor::TensorFormat;

/// Empirical complementary cdf of X = kappa^power.
///
/// One row per finite sample, sorted ascending; `ccdf[i]` is the strict
/// tail probability P[X > xs[i]], with infinite samples counted as greater
/// than every finite value. Tied samples share one tail probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfTable {
    xs: Vec<f64>,
    ccdf: Vec<f64>,
    infinite_count: usize,
    total: usize,
    power: u32,
}

impl CcdfTable {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ccdf(&self) -> &[f64] {
        &self.ccdf
    }

    pub fn infinite_count(&self) -> usize {
        self.infinite_count
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Mean of the finite samples of X.
    pub fn finite_mean(&self) -> f64 {
        self.xs.iter().sum::<f64>() / self.xs.len() as f64
    }
}

/// Least-squares fit of ccdf(x) = a x^(-b) on log-log coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    /// Ccdf window (low, high) that selected the fitted points.
    pub window: (f64, f64),
    /// Standard error of the slope, reported alongside b.
    pub b_stderr: f64,
    pub n_points: usize,
}

/// One row of a perturbation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbRecord {
    pub r: usize,
    pub anchor_index: usize,
    pub perturb_index: usize,
    pub dist_w: f64,
    pub inv_kappa: f64,
}

/// Draws every sample of the plan and returns the condition numbers in
/// sample order. Work is distributed over the current rayon pool; each
/// sample owns its derived streams, so the output is independent of the
/// thread count.
pub fn sample_condition_numbers(spec: &SampleSpec) -> Result<Vec<ExtendedReal>> {
    (0..spec.count())
        .into_par_iter()
        .map(|index| {
            let t = random_rank1_tuple(spec, index)?;
            Ok(condition_number(&t)?.kappa)
        })
        .collect()
}

/// Builds the empirical ccdf table of X = kappa^power from raw samples.
/// Requires power >= 1 and at least one finite sample.
pub fn estimate_ccdf(samples: &[ExtendedReal], power: u32) -> Result<CcdfTable> {
    if power == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let total = samples.len();
    let mut xs = Vec::with_capacity(total);
    let mut infinite_count = 0usize;
    for s in samples {
        match s {
            ExtendedReal::Finite(k) => {
                let x = k.powi(power as i32);
                // A power large enough to overflow joins the infinite tail.
                if x.is_finite() {
                    xs.push(x);
                } else {
                    infinite_count += 1;
                }
            }
            ExtendedReal::Infinite => infinite_count += 1,
        }
    }
    if xs.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    xs.sort_unstable_by(f64::total_cmp);
    let m = xs.len();
    let mut ccdf = vec![0.0; m];
    let mut end = m;
    while end > 0 {
        let value = xs[end - 1];
        let mut start = end - 1;
        while start > 0 && xs[start - 1] == value {
            start -= 1;
        }
        let greater = (m - end) + infinite_count;
        let p = greater as f64 / total as f64;
        for slot in ccdf.iter_mut().take(end).skip(start) {
            *slot = p;
        }
        end = start;
    }
    Ok(CcdfTable { xs, ccdf, infinite_count, total, power })
}

/// The p-quantile of the upper tail: the smallest x with ccdf(x) <= p.
/// Returns the infinity flag when the infinite mass alone exceeds p.
pub fn quantile(table: &CcdfTable, p: f64) -> Result<ExtendedReal> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    if table.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let infinite_mass = table.infinite_count as f64 / table.total as f64;
    if infinite_mass > p {
        return Ok(ExtendedReal::Infinite);
    }
    let idx = table.ccdf.partition_point(|&c| c > p);
    debug_assert!(idx < table.xs.len());
    Ok(ExtendedReal::Finite(table.xs[idx]))
}

/// Default fitting window on the ccdf axis: low = max(1e-5, 100 / total)
/// so at least about 100 samples sit below the window, high = 1e-2.
pub fn default_window(total: usize) -> (f64, f64) {
    ((1e-5f64).max(100.0 / total as f64), 1e-2)
}

/// Fits ccdf(x) = a x^(-b) by ordinary least squares on (ln x, ln ccdf),
/// restricted to points whose ccdf lies in the window. Needs at least 10
/// points in the window.
pub fn fit_tail(table: &CcdfTable, window: (f64, f64)) -> Result<TailFit> {
    fit_tail_points(&table.xs, &table.ccdf, window)
}

/// As [`fit_tail`], on raw (x, ccdf) columns.
pub fn fit_tail_points(xs: &[f64], ccdf: &[f64], window: (f64, f64)) -> Result<TailFit> {
    if xs.len() != ccdf.len() {
        return Err(Error::InvalidArgument(format!(
            "mismatched columns: {} x values, {} ccdf values",
            xs.len(),
            ccdf.len()
        )));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window must satisfy 0 < low <= high <= 1, got ({lo}, {hi})"
        )));
    }
    let points: Vec<(f64, f64)> = xs
        .iter()
        .zip(ccdf)
        .filter(|(x, c)| **c >= lo && **c <= hi && **x > 0.0)
        .map(|(x, c)| (x.ln(), c.ln()))
        .collect();
    if points.len() < 10 {
        return Err(Error::InsufficientData { need: 10, got: points.len() });
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "window points share a single x value; slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in &points {
        let residual = y - (slope * x + intercept);
        ss_res += residual * residual;
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let b_stderr = if points.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(TailFit {
        a: intercept.exp(),
        b: -slope,
        r_squared,
        window,
        b_stderr,
        n_points: points.len(),
    })
}

/// Perturbation sweep around shared-first-factor anchors: draws `anchors`
/// ill-posed tuples, perturbs each one `perturbs` times at the given scale,
/// and records the weighted distance to the anchor next to 1/kappa of the
/// perturbed tuple (0 when kappa is infinite). Row order is (anchor,
/// perturbation), independent of the thread count.
pub fn perturbation_sweep(
    format: &TensorFormat,
    r: usize,
    anchors: usize,
    perturbs: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<PerturbRecord>> {
    if anchors < 1 || perturbs < 1 {
        return Err(Error::InvalidArgument(
            "anchor and perturbation counts must be at least 1".into(),
        ));
    }
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "perturbation scale must be finite and nonnegative, got {scale}"
        )));
    }
    let anchor_tuples: Vec<_> = (0..anchors)
        .map(|a| {
            let mut rng = derive_stream(seed, DOMAIN_ANCHOR, a as u64, 0, 0);
            illposed_shared_first_factor(format, r, &mut rng)
        })
        .collect::<Result<_>>()?;
    (0..anchors * perturbs)
        .into_par_iter()
        .map(|idx| {
            let a = idx / perturbs;
            let p = idx % perturbs;
            let mut rng = derive_stream(seed, DOMAIN_PERTURB, a as u64, p as u32, 0);
            let perturbed = perturb_tuple(&anchor_tuples[a], scale, &mut rng)?;
            let dist_w = weighted_distance(&anchor_tuples[a], &perturbed)?;
            let inv_kappa = match condition_number(&perturbed)?.kappa {
                ExtendedReal::Finite(k) => 1.0 / k,
                ExtendedReal::Infinite => 0.0,
            };
            Ok(PerturbRecord { r, anchor_index: a, perturb_index: p, dist_w, inv_kappa })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CcdfRow {
    x: f64,
    ccdf: f64,
}

fn write_err(context: &str, e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("{context}: {e}"))
}

/// Writes the table as CSV with header `x,ccdf`, one row per finite sample.
pub fn write_ccdf_csv<W: std::io::Write>(table: &CcdfTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (x, c) in table.xs.iter().zip(&table.ccdf) {
        wtr.serialize(CcdfRow { x: *x, ccdf: *c })
            .map_err(|e| write_err("failed to write ccdf csv", e))?;
    }
    wtr.flush().map_err(|e| write_err("failed to write ccdf csv", e))
}

#[derive(Serialize)]
struct CcdfSidecar<'a> {
    total: usize,
    infinite_count: usize,
    power: u32,
    format: &'a [usize],
    r: usize,
    seed: u64,
}

/// Writes the JSON sidecar describing how a ccdf table was generated.
pub fn write_ccdf_sidecar<W: std::io::Write>(
    table: &CcdfTable,
    spec: &SampleSpec,
    mut w: W,
) -> Result<()> {
    let sidecar = CcdfSidecar {
        total: table.total,
        infinite_count: table.infinite_count,
        power: table.power,
        format: spec.format().dims(),
        r: spec.r(),
        seed: spec.seed(),
    };
    serde_json::to_writer_pretty(&mut w, &sidecar)
        .map_err(|e| write_err("failed to write ccdf sidecar", e))?;
    writeln!(w).map_err(|e| write_err("failed to write ccdf sidecar", e))
}

/// Reads a ccdf CSV written by [`write_ccdf_csv`], returning the x and
/// ccdf columns.
pub fn read_ccdf_csv<R: std::io::Read>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| write_err("failed to read ccdf csv", e))?;
    if headers != vec!["x", "ccdf"] {
        return Err(Error::UnsupportedFormat(format!(
            "expected ccdf csv header `x,ccdf`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut ccdf = Vec::new();
    for row in rdr.deserialize() {
        let row: CcdfRow = row.map_err(|e| write_err("failed to read ccdf csv", e))?;
        xs.push(row.x);
        ccdf.push(row.ccdf);
    }
    Ok((xs, ccdf))
}

#[derive(Serialize)]
struct TailFitJson {
    a: f64,
    b: f64,
    r_squared: f64,
    window_low: f64,
    window_high: f64,
    n_points: usize,
}

/// Writes a tail fit as JSON with keys a, b, r_squared, window_low,
/// window_high, n_points.
pub fn write_tailfit_json<W: std::io::Write>(fit: &TailFit, mut w: W) -> Result<()> {
    let json = TailFitJson {
        a: fit.a,
        b: fit.b,
        r_squared: fit.r_squared,
        window_low: fit.window.0,
        window_high: fit.window.1,
        n_points: fit.n_points,
    };
    serde_json::to_writer_pretty(&mut w, &json)
        .map_err(|e| write_err("failed to write tail fit", e))?;
    writeln!(w).map_err(|e| write_err("failed to write tail fit", e))
}

/// Writes sweep rows as CSV with header
/// `r,anchor_index,perturb_index,dist_w,inv_kappa`.
pub fn write_perturb_csv<W: std::io::Write>(records: &[PerturbRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for rec in records {
        wtr.serialize(rec)
            .map_err(|e| write_err("failed to write sweep csv", e))?;
    }
    wtr.flush().map_err(|e| write_err("failed to write sweep csv", e))
}
