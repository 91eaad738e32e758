//! Quantitative sample-quality metrics.
//!
//! The symmetric KL estimator is grid-based: samples are histogrammed into a
//! regular grid, the analytic density is evaluated at the cell centers and
//! normalized on the same grid, both pmfs are smoothed by a small epsilon per
//! cell, and `KL(p||q) + KL(q||p)` is returned. The construction is this
//! crate's definition of the metric; absolute values are comparable only
//! between runs of this pipeline.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dist::GaussianMixture;
use crate::error::{Error, Result};
use crate::util::logsumexp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDim {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

/// Regular evaluation grid with per-cell smoothing epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: Vec<GridDim>,
    /// Additive smoothing applied to both pmfs before the KL sums.
    pub smoothing: f64,
}

impl GridSpec {
    pub fn new(dims: Vec<GridDim>, smoothing: f64) -> Result<Self> {
        for d in &dims {
            if !(d.lo < d.hi) {
                return Err(Error::Config(format!("grid needs lo < hi, got [{}, {}]", d.lo, d.hi)));
            }
            if d.bins < 10 {
                return Err(Error::Config(format!("grid needs >= 10 bins, got {}", d.bins)));
            }
        }
        if smoothing < 0.0 {
            return Err(Error::Config("grid smoothing must be >= 0".into()));
        }
        Ok(Self { dims, smoothing })
    }

    /// Square 2D grid, default choice for the mixture experiments.
    pub fn square_2d(lo: f64, hi: f64, bins: usize) -> Self {
        Self::new(
            vec![GridDim { lo, hi, bins }, GridDim { lo, hi, bins }],
            1e-10,
        )
        .expect("static grid parameters are valid")
    }

    /// 1D grid, default choice for the bounded-interval targets.
    pub fn interval(lo: f64, hi: f64, bins: usize) -> Self {
        Self::new(vec![GridDim { lo, hi, bins }], 1e-10).expect("static grid parameters are valid")
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn num_cells(&self) -> usize {
        self.dims.iter().map(|d| d.bins).product()
    }

    /// Flat index of the cell containing `x`; out-of-range coordinates clip to
    /// the boundary cells. Returns `(index, clipped)`.
    pub fn locate(&self, x: ArrayView1<f64>) -> (usize, bool) {
        let mut idx = 0;
        let mut clipped = false;
        for (d, &xi) in self.dims.iter().zip(x.iter()) {
            let w = (d.hi - d.lo) / d.bins as f64;
            let mut b = ((xi - d.lo) / w).floor() as isize;
            if b < 0 {
                b = 0;
                clipped = true;
            }
            if b >= d.bins as isize {
                b = d.bins as isize - 1;
                if xi > d.hi {
                    clipped = true;
                }
            }
            idx = idx * d.bins + b as usize;
        }
        (idx, clipped)
    }

    /// Center coordinates of the flat-indexed cell (row-major over dims).
    pub fn cell_center(&self, mut index: usize) -> Array1<f64> {
        let mut coords = Array1::zeros(self.ndim());
        for (j, d) in self.dims.iter().enumerate().rev() {
            let b = index % d.bins;
            index /= d.bins;
            let w = (d.hi - d.lo) / d.bins as f64;
            coords[j] = d.lo + (b as f64 + 0.5) * w;
        }
        coords
    }
}

/// Histogram pmf of the samples plus the fraction that had to be clipped into
/// boundary cells.
pub fn histogram_pmf(samples: ArrayView2<f64>, grid: &GridSpec) -> Result<(Vec<f64>, f64)> {
    if samples.ncols() != grid.ndim() {
        return Err(Error::Dimension {
            context: "histogram sample dimension",
            expected: grid.ndim(),
            got: samples.ncols(),
        });
    }
    let mut counts = vec![0.0f64; grid.num_cells()];
    let mut clipped = 0usize;
    for row in samples.axis_iter(Axis(0)) {
        let (idx, clip) = grid.locate(row);
        counts[idx] += 1.0;
        if clip {
            clipped += 1;
        }
    }
    let n = samples.nrows() as f64;
    for c in counts.iter_mut() {
        *c /= n;
    }
    Ok((counts, clipped as f64 / n))
}

/// Discretizes a log density at the cell centers and normalizes over the grid
/// (in log space, so sharply peaked densities do not overflow).
pub fn density_pmf<F: Fn(ArrayView1<f64>) -> f64>(log_density: F, grid: &GridSpec) -> Vec<f64> {
    let n = grid.num_cells();
    let mut logs = Vec::with_capacity(n);
    for i in 0..n {
        let c = grid.cell_center(i);
        logs.push(log_density(c.view()));
    }
    let z = logsumexp(&logs);
    logs.into_iter().map(|l| (l - z).exp()).collect()
}

/// `KL(p~||q~) + KL(q~||p~)` after smoothing both pmfs with `eps` per cell and
/// renormalizing. Symmetric in its arguments by construction; zero only for
/// identical inputs.
pub fn symmetric_kl_pmf(p: &[f64], q: &[f64], eps: f64) -> f64 {
    assert_eq!(p.len(), q.len(), "pmfs must share a grid");
    let zp: f64 = p.iter().sum::<f64>() + eps * p.len() as f64;
    let zq: f64 = q.iter().sum::<f64>() + eps * q.len() as f64;
    let mut kl_pq = 0.0;
    let mut kl_qp = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        let ps = (pi + eps) / zp;
        let qs = (qi + eps) / zq;
        kl_pq += ps * (ps / qs).ln();
        kl_qp += qs * (qs / ps).ln();
    }
    kl_pq + kl_qp
}

#[derive(Debug, Clone, Copy)]
pub struct SymKlReport {
    pub sym_kl: f64,
    /// Fraction of samples that fell outside the grid and were counted in
    /// boundary cells.
    pub clip_fraction: f64,
}

/// Grid-based symmetric KL between a sample set and an analytic log density.
/// Requires at least 1000 samples.
pub fn symmetric_kl<F: Fn(ArrayView1<f64>) -> f64>(
    samples: ArrayView2<f64>,
    log_density: F,
    grid: &GridSpec,
) -> Result<SymKlReport> {
    if samples.nrows() < 1000 {
        return Err(Error::InsufficientData(format!(
            "symmetric KL needs >= 1000 samples, got {}",
            samples.nrows()
        )));
    }
    let (q_hat, clip_fraction) = histogram_pmf(samples, grid)?;
    let p_hat = density_pmf(log_density, grid);
    Ok(SymKlReport {
        sym_kl: symmetric_kl_pmf(&p_hat, &q_hat, grid.smoothing),
        clip_fraction,
    })
}

/// Mode-coverage against a mixture: a mode is hit when at least 1% of samples
/// fall within `k_sigma * sigma` of its mean; the second value is the share of
/// samples within `k_sigma * sigma` of any mode.
pub fn mode_coverage(
    samples: ArrayView2<f64>,
    mix: &GaussianMixture,
    k_sigma: f64,
) -> (usize, f64) {
    let radius = k_sigma * mix.std();
    let r2 = radius * radius;
    let n = samples.nrows();
    let mut per_mode = vec![0usize; mix.num_components()];
    let mut near_any = 0usize;
    for row in samples.axis_iter(Axis(0)) {
        let mut hit_any = false;
        for (k, m) in mix.means().axis_iter(Axis(0)).enumerate() {
            let d2: f64 = row.iter().zip(m.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 <= r2 {
                per_mode[k] += 1;
                hit_any = true;
            }
        }
        if hit_any {
            near_any += 1;
        }
    }
    let threshold = (n as f64 * 0.01).ceil() as usize;
    let modes_hit = per_mode.iter().filter(|&&c| c >= threshold.max(1)).count();
    (modes_hit, near_any as f64 / n as f64)
}

/// Fraction of samples with any coordinate outside `[lo, hi]`.
pub fn out_of_domain_fraction(samples: ArrayView2<f64>, lo: f64, hi: f64) -> f64 {
    let n = samples.nrows();
    if n == 0 {
        return 0.0;
    }
    let out = samples
        .axis_iter(Axis(0))
        .filter(|row| row.iter().any(|&x| x < lo || x > hi))
        .count();
    out as f64 / n as f64
}

/// One row of a training metric trace.
#[derive(Debug, Clone, Copy)]
pub struct MetricRow {
    pub iteration: u64,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub beta: f64,
    pub sym_kl: f64,
    /// Modes hit, for mixture targets.
    pub mode_coverage: Option<f64>,
}

/// Everything periodic evaluation needs: the grid, the analytic density, and
/// (for mixture targets) the mixture for mode-coverage counting.
#[derive(Clone)]
pub struct EvalContext {
    pub grid: GridSpec,
    pub log_density: std::sync::Arc<dyn Fn(ArrayView1<f64>) -> f64 + Send + Sync>,
    pub mixture: Option<GaussianMixture>,
    pub bounds: Option<(f64, f64)>,
    pub n_samples: usize,
    pub k_sigma: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOutcome {
    pub sym_kl: f64,
    pub clip_fraction: f64,
    pub modes_hit: Option<usize>,
    pub high_quality_fraction: Option<f64>,
    pub out_of_domain: Option<f64>,
}

impl EvalContext {
    pub fn for_target(spec: &crate::dist::TargetSpec, n_samples: usize) -> Self {
        Self {
            grid: spec.default_grid.clone(),
            log_density: spec.log_density_fn(),
            mixture: spec.mixture.clone(),
            bounds: spec.bounds(),
            n_samples,
            k_sigma: 3.0,
        }
    }

    pub fn evaluate(&self, samples: ArrayView2<f64>) -> Result<EvalOutcome> {
        let report = symmetric_kl(samples, |x| (self.log_density)(x), &self.grid)?;
        let (modes_hit, high_quality_fraction) = match &self.mixture {
            Some(mix) => {
                let (hit, frac) = mode_coverage(samples, mix, self.k_sigma);
                (Some(hit), Some(frac))
            }
            None => (None, None),
        };
        let out_of_domain = self
            .bounds
            .map(|(lo, hi)| out_of_domain_fraction(samples, lo, hi));
        Ok(EvalOutcome {
            sym_kl: report.sym_kl,
            clip_fraction: report.clip_fraction,
            modes_hit,
            high_quality_fraction,
            out_of_domain,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{stream_rng, Stream};
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
    }

    #[test]
    fn identical_pmfs_give_zero() {
        let grid = GridSpec::interval(-1.0, 1.0, 50);
        let p = density_pmf(|x| normal_logpdf(x[0], 0.0, 0.1), &grid);
        assert_eq!(symmetric_kl_pmf(&p, &p, grid.smoothing), 0.0);
    }

    #[test]
    fn symmetric_kl_is_symmetric_and_nonnegative() {
        let grid = GridSpec::interval(-2.0, 2.0, 64);
        let p = density_pmf(|x| normal_logpdf(x[0], 0.0, 0.3), &grid);
        let q = density_pmf(|x| normal_logpdf(x[0], 0.5, 0.2), &grid);
        let a = symmetric_kl_pmf(&p, &q, 1e-10);
        let b = symmetric_kl_pmf(&q, &p, 1e-10);
        assert!(a > 0.0);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gaussian_pair_matches_closed_form() {
        // Symmetric KL between N(0,1) and N(1,1) is exactly 1.0; the grid
        // estimate with 1e6 samples and 400 bins lands within 10%.
        let mut rng = stream_rng(3, Stream::Eval);
        let n = 1_000_000;
        let samples = Array2::from_shape_fn((n, 1), |_| {
            1.0 + rng.sample::<f64, _>(StandardNormal)
        });
        let grid = GridSpec::new(vec![GridDim { lo: -6.0, hi: 7.0, bins: 400 }], 1e-10).unwrap();
        let report = symmetric_kl(samples.view(), |x| normal_logpdf(x[0], 0.0, 1.0), &grid).unwrap();
        assert!(
            (report.sym_kl - 1.0).abs() < 0.1,
            "estimate {} should be within 10% of 1.0",
            report.sym_kl
        );
        assert!(report.clip_fraction < 1e-4);
    }

    #[test]
    fn clip_fraction_counts_out_of_grid_samples() {
        let grid = GridSpec::interval(-1.0, 1.0, 10);
        let samples = array![[-2.0], [0.0], [2.0], [0.5]];
        let (pmf, clip) = histogram_pmf(samples.view(), &grid).unwrap();
        assert_eq!(clip, 0.5);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_does_not_degrade_with_more_samples() {
        // Consistency regression: doubling n should not move the median
        // estimate by more than Monte-Carlo noise.
        let grid = GridSpec::interval(-4.0, 4.0, 100);
        let eval = |n: usize, seed: u64| -> f64 {
            let mut rng = stream_rng(seed, Stream::Eval);
            let samples =
                Array2::from_shape_fn((n, 1), |_| rng.sample::<f64, _>(StandardNormal));
            symmetric_kl(samples.view(), |x| normal_logpdf(x[0], 0.0, 1.0), &grid)
                .unwrap()
                .sym_kl
        };
        let mut small: Vec<f64> = (0..5).map(|s| eval(20_000, s)).collect();
        let mut large: Vec<f64> = (0..5).map(|s| eval(40_000, 100 + s)).collect();
        small.sort_by(|a, b| a.partial_cmp(b).unwrap());
        large.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // More samples -> fewer empty cells -> the floor shrinks.
        assert!(large[2] <= small[2] * 1.10, "large {} small {}", large[2], small[2]);
    }

    #[test]
    fn mode_coverage_counts_hits() {
        let mix = GaussianMixture::gmm8();
        // All 8 mode centers, equally: full coverage.
        let centers = mix.means().to_owned();
        let (hit, frac) = mode_coverage(centers.view(), &mix, 3.0);
        assert_eq!(hit, 8);
        assert_eq!(frac, 1.0);

        // Collapse onto one mode.
        let collapsed = Array2::from_shape_fn((100, 2), |(_, j)| if j == 0 { 2.0 } else { 0.0 });
        let (hit, frac) = mode_coverage(collapsed.view(), &mix, 3.0);
        assert_eq!(hit, 1);
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn mode_coverage_uniform_background_fraction() {
        // Uniform samples on [-3,3]^2 against sigma = 0.02, k = 3: the covered
        // area fraction is 8 * pi * 0.06^2 / 36 ~ 0.25%.
        let mix = GaussianMixture::gmm8();
        let mut rng = stream_rng(12, Stream::Eval);
        let samples = Array2::from_shape_fn((200_000, 2), |_| rng.random_range(-3.0..3.0));
        let (_, frac) = mode_coverage(samples.view(), &mix, 3.0);
        let expect = 8.0 * std::f64::consts::PI * 0.06 * 0.06 / 36.0;
        assert!(
            (frac - expect).abs() < 0.5 * expect + 2e-4,
            "fraction {frac} expected about {expect}"
        );
    }

    #[test]
    fn out_of_domain_counting() {
        let samples = array![[-2.0], [0.0], [2.0]];
        let f = out_of_domain_fraction(samples.view(), -1.0, 1.0);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }
}
