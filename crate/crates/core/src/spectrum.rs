//! Eigenanalysis of the empirical correlation matrix of volatility-normalized
//! returns, and the Marcenko-Pastur noise band it is compared against.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::estimators::VolSeries;
use crate::panel::ReturnPanel;

/// Assets need normalized returns on this share of the dates to enter the matrix.
pub const MIN_COVERAGE: f64 = 0.8;
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Bin width of the `√λ` histogram.
pub const SQRT_LAMBDA_BIN: f64 = 0.0626;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    /// Panel column of each row/column of `matrix`.
    pub assets: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub n_obs: usize,
}

/// Pairwise-complete Pearson correlations of `r_i / σ_i`.
///
/// Assets whose normalized return is available on fewer than 80% of the
/// dates are dropped.
pub fn correlation_matrix(panel: &ReturnPanel, vols: &VolSeries) -> Result<CorrelationMatrix> {
    let (n, m) = (panel.n_dates(), panel.n_assets());
    if vols.values.rows() != n || vols.values.cols() != m {
        return Err(Error::InvalidInput("volatility panel is not aligned with returns".into()));
    }
    let mut columns = Vec::new();
    let mut assets = Vec::new();
    for a in 0..m {
        let col: Vec<f64> = (0..n)
            .map(|t| match (panel.returns.get(t, a), vols.usable(t, a)) {
                (Some(r), Some(s)) => r / s,
                _ => f64::NAN,
            })
            .collect();
        let present = col.iter().filter(|v| v.is_finite()).count();
        if present as f64 >= MIN_COVERAGE * n as f64 && present >= 2 {
            columns.push(col);
            assets.push(a);
        }
    }
    if columns.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} assets have enough normalized returns, at least 2 required",
            columns.len()
        )));
    }
    let k = columns.len();
    let mut matrix = DMatrix::identity(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let c = pairwise_pearson(&columns[i], &columns[j]);
            matrix[(i, j)] = c;
            matrix[(j, i)] = c;
        }
    }
    Ok(CorrelationMatrix {
        assets,
        matrix,
        n_obs: n,
    })
}

fn pairwise_pearson(a: &[f64], b: &[f64]) -> f64 {
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        if x.is_finite() && y.is_finite() {
            n += 1.0;
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
    }
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    if n < 2.0 || den <= 0.0 {
        return 0.0;
    }
    ((n * sxy - sx * sy) / den).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `α` is the unit eigenvector of `eigenvalues[α]`.
    pub eigenvectors: DMatrix<f64>,
    pub n: usize,
    pub t_obs: usize,
    pub mp_lambda_min: f64,
    pub mp_lambda_max: f64,
}

impl EigenSpectrum {
    /// `Σ_α λ_α (w̃·V_α)²`, the variance of a portfolio with rescaled weights `w̃_i = w_i σ_i`.
    pub fn spectral_variance(&self, w_tilde: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w_tilde);
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(a, l)| l * self.eigenvectors.column(a).dot(&w).powi(2))
            .sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "eigenvalue", "sqrt_eigenvalue", "is_signal"])?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                format!("{l:.10}"),
                format!("{:.10}", l.max(0.0).sqrt()),
                (*l > self.mp_lambda_max).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full eigendecomposition of a symmetric matrix, sorted by decreasing eigenvalue.
///
/// `t_obs` only feeds the Marcenko-Pastur bounds attached to the result.
pub fn eigen_decompose(c: &DMatrix<f64>, t_obs: usize) -> Result<EigenSpectrum> {
    if !c.is_square() {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    let n = c.nrows();
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (c[(i, j)] - c[(j, i)]).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(c.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    let (mp_lambda_min, mp_lambda_max) = if t_obs > 0 { mp_bounds(n, t_obs) } else { (f64::NAN, f64::NAN) };
    Ok(EigenSpectrum {
        eigenvalues,
        eigenvectors,
        n,
        t_obs,
        mp_lambda_min,
        mp_lambda_max,
    })
}

/// `((1 − √q)², (1 + √q)²)` with `q = N / T`.
pub fn mp_bounds(n_assets: usize, n_obs: usize) -> (f64, f64) {
    let sq = (n_assets as f64 / n_obs as f64).sqrt();
    ((1.0 - sq).powi(2), (1.0 + sq).powi(2))
}

fn bounds_of_q(q: f64) -> (f64, f64) {
    ((1.0 - q.sqrt()).powi(2), (1.0 + q.sqrt()).powi(2))
}

/// Marcenko-Pastur density `sqrt(4qλ − (λ+q−1)²) / (2πqλ)` on its support, 0 elsewhere.
pub fn mp_density(lambda: f64, q: f64) -> f64 {
    let (lo, hi) = bounds_of_q(q);
    if lambda <= lo || lambda >= hi || lambda <= 0.0 {
        return 0.0;
    }
    let d = 4.0 * q * lambda - (lambda + q - 1.0).powi(2);
    d.max(0.0).sqrt() / (2.0 * PI * q * lambda)
}

/// Integral of the density from `λ_min` to `lambda`.
///
/// Uses `λ = λ_min + (λ_max − λ_min)(1 − cos θ)/2`, which removes the square-root
/// edges and leaves a smooth integrand for composite Simpson. For `q > 1` the
/// point mass at zero is not included.
pub fn mp_cdf(lambda: f64, q: f64) -> f64 {
    let (lo, hi) = bounds_of_q(q);
    if lambda <= lo {
        return 0.0;
    }
    let theta_end = if lambda >= hi {
        PI
    } else {
        (1.0 - 2.0 * (lambda - lo) / (hi - lo)).clamp(-1.0, 1.0).acos()
    };
    let half = (hi - lo) / 2.0;
    let f = |th: f64| {
        let l = lo + half * (1.0 - th.cos());
        if l <= 0.0 {
            return 0.0;
        }
        (half * th.sin()).powi(2) / (2.0 * PI * q * l)
    };
    let steps = 4000;
    let h = theta_end / steps as f64;
    let mut s = f(0.0) + f(theta_end);
    for k in 1..steps {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `eigenvalues` and the Marcenko-Pastur law with ratio `q`.
pub fn mp_ks_distance(eigenvalues: &[f64], q: f64) -> f64 {
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let f = mp_cdf(*l, q);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumClassification {
    /// Largest eigenvalue, reported on its own.
    pub market: f64,
    /// Eigenvalues above `λ_max`, market included, descending.
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
    pub sqrt_lambda_max: f64,
    /// `√λ` histogram of every eigenvalue except the market one.
    pub histogram: Vec<HistogramBin>,
}

impl SpectrumClassification {
    /// Signal eigenvalues other than the market one.
    pub fn n_signal_factors(&self) -> usize {
        self.signal.len().saturating_sub(1)
    }

    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sqrt_lambda_lo", "sqrt_lambda_hi", "count"])?;
        for b in &self.histogram {
            w.write_record([format!("{:.4}", b.lo), format!("{:.4}", b.hi), b.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn classify_spectrum(spec: &EigenSpectrum) -> SpectrumClassification {
    let (signal, noise): (Vec<f64>, Vec<f64>) = spec.eigenvalues.iter().partition(|l| **l > spec.mp_lambda_max);
    let market = spec.eigenvalues.first().copied().unwrap_or(f64::NAN);
    let roots: Vec<f64> = spec.eigenvalues.iter().skip(1).map(|l| l.max(0.0).sqrt()).collect();
    let top = roots.iter().copied().fold(0.0, f64::max);
    let n_bins = (top / SQRT_LAMBDA_BIN).floor() as usize + 1;
    let mut histogram: Vec<HistogramBin> = (0..n_bins)
        .map(|k| HistogramBin {
            lo: k as f64 * SQRT_LAMBDA_BIN,
            hi: (k + 1) as f64 * SQRT_LAMBDA_BIN,
            count: 0,
        })
        .collect();
    for r in roots {
        let k = ((r / SQRT_LAMBDA_BIN).floor() as usize).min(n_bins - 1);
        histogram[k].count += 1;
    }
    SpectrumClassification {
        market,
        signal,
        noise,
        sqrt_lambda_max: spec.mp_lambda_max.sqrt(),
        histogram,
    }
}

/// Columns demeaned and scaled to unit population variance.
///
/// On such a sample the correlation matrix is exactly `ZᵀZ / T`, so the
/// portfolio identities below hold to rounding error.
pub fn standardize(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = x.nrows() as f64;
    if x.nrows() < 2 || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("static sample needs two or more complete rows".into()));
    }
    let mut z = x.clone();
    for mut col in z.column_iter_mut() {
        let mean = col.sum() / t;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / t).sqrt();
        if sd <= 0.0 {
            return Err(Error::InvalidInput("constant column in static sample".into()));
        }
        col /= sd;
    }
    Ok(z)
}

/// `ZᵀZ / T` of a standardized sample.
pub fn sample_correlation(z: &DMatrix<f64>) -> DMatrix<f64> {
    let c = z.transpose() * z / z.nrows() as f64;
    // symmetrize rounding
    (&c + c.transpose()) * 0.5
}

/// `⟨r_π²⟩` of the portfolio `Σ w̃_i z_i` over the sample.
pub fn portfolio_second_moment(z: &DMatrix<f64>, w_tilde: &[f64]) -> f64 {
    let r = z * DVector::from_column_slice(w_tilde);
    r.norm_squared() / z.nrows() as f64
}

/// In-sample FCL²: `⟨r_π²⟩ / Σ w̃_i²`.
pub fn in_sample_fcl_squared(z: &DMatrix<f64>, w_tilde: &[f64]) -> f64 {
    portfolio_second_moment(z, w_tilde) / w_tilde.iter().map(|w| w * w).sum::<f64>()
}
