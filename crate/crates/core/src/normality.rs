//! Per-class PCA and Shapiro–Wilk testing of principal-component scores.
//!
//! The Shapiro–Wilk coefficients and p-values follow Royston's approximation
//! (algorithm AS R94), valid for `3 <= n <= 5000`. Expected normal order
//! statistics use Blom's scores `Φ⁻¹((i − 3/8) / (n + 1/4))`.

use std::fmt::Write as _;

use crate::archive::EmbeddingArchive;
use crate::error::{GdcError, Result};
use crate::linalg::{sym_eig, SymMatrix};
use crate::scalar::{dot, Real};

pub const SW_MIN_N: usize = 3;
pub const SW_MAX_N: usize = 5000;
pub const DEFAULT_COMPONENTS: usize = 30;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Inverse standard normal CDF (Wichura's AS 241, `PPND16`).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r + 3.930_789_580_009_271e4) * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den =
            ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r + 1.519_866_656_361_645_7e-2) * r
                + 1.481_039_764_274_800_8e-1)
                * r
                + 6.897_673_349_851e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den =
            ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5) * r
                + 7.868_691_311_456_133e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 1.369_298_809_227_358e-1)
                * r
                + 5.998_322_065_558_88e-1)
                * r
                + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(Z > x)` without cancellation in the upper tail.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Shapiro–Wilk statistic and p-value for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwResult {
    pub n: usize,
    pub w: f64,
    pub p_value: f64,
}

/// Royston's approximate coefficients for the upper half of the order
/// statistics, largest first. The full antisymmetric vector has unit norm.
fn sw_coefficients(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    // Blom scores for the lower half; negative.
    let m: Vec<f64> = (1..=half).map(|i| normal_quantile((i as f64 - 0.375) / an25)).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

fn sw_p_value(w: f64, n: usize) -> f64 {
    const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    const G: [f64; 2] = [-2.273, 0.459];
    const SMALL: f64 = 1e-19;

    if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        return p.clamp(0.0, 1.0);
    }
    let an = n as f64;
    let y = (1.0 - w).ln();
    let (z, m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return SMALL;
        }
        (-(gamma - y).ln(), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (y, poly(&C5, xx), poly(&C6, xx).exp())
    };
    normal_upper_tail((z - m) / s).clamp(0.0, 1.0)
}

/// Shapiro–Wilk normality test. Ordering of `sample` is irrelevant.
pub fn shapiro_wilk<T: Real>(sample: &[T]) -> Result<SwResult> {
    let n = sample.len();
    if n < SW_MIN_N {
        return Err(GdcError::SampleTooSmall(n));
    }
    if n > SW_MAX_N {
        return Err(GdcError::SampleTooLarge(n));
    }
    let mut x: Vec<f64> = sample.iter().map(|v| v.to_f64_lossy()).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GdcError::NonFinite { context: "Shapiro-Wilk sample".into() });
    }
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let range = x[n - 1] - x[0];
    if !(range > 0.0) {
        return Err(GdcError::ConstantSample);
    }
    // Location and scale are removed before anything else is accumulated.
    let mean = x.iter().sum::<f64>() / n as f64;
    for v in &mut x {
        *v = (*v - mean) / range;
    }
    let ssx: f64 = x.iter().map(|v| v * v).sum();
    if !(ssx > 0.0) {
        return Err(GdcError::ConstantSample);
    }
    let a = sw_coefficients(n);
    let ssa = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
    let sax: f64 = a.iter().enumerate().map(|(i, c)| c * (x[n - 1 - i] - x[i])).sum();
    let w = (sax * sax / (ssa * ssx)).min(1.0);
    Ok(SwResult { n, w, p_value: sw_p_value(w, n) })
}

/// Projection of one class's embeddings onto its leading principal axes.
#[derive(Debug, Clone)]
pub struct PcaProjection<T> {
    pub class_label: String,
    /// Unit principal axes, most variance first.
    pub axes: Vec<Vec<T>>,
    /// Leading `min(n, d)` covariance eigenvalues, descending, clamped at zero.
    pub explained_variance: Vec<T>,
    /// Row-major `n x c` scores of the centered data.
    pub scores: Vec<T>,
    pub n: usize,
}

impl<T: Real> PcaProjection<T> {
    pub fn components(&self) -> usize {
        self.axes.len()
    }

    pub fn score_column(&self, j: usize) -> Vec<T> {
        let c = self.components();
        self.scores.iter().skip(j).step_by(c).copied().collect()
    }

    pub fn explained_ratio(&self) -> Vec<T> {
        let total: T = self.explained_variance.iter().copied().sum();
        self.explained_variance.iter().map(|v| *v / total).collect()
    }
}

fn orthonormalize<T: Real>(axes: &mut [Vec<T>], d: usize) {
    for j in 0..axes.len() {
        let (done, rest) = axes.split_at_mut(j);
        let v = &mut rest[0];
        for u in done.iter() {
            let proj = dot(u, v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * *ui;
            }
        }
        let mut norm = dot(v, v).sqrt();
        if norm < T::lit(1e-6) {
            // Null direction: complete the basis with a coordinate axis.
            for k in 0..d {
                v.iter_mut().for_each(|x| *x = T::zero());
                v[k] = T::one();
                for u in done.iter() {
                    let proj = dot(u, v);
                    for (vi, ui) in v.iter_mut().zip(u) {
                        *vi -= proj * *ui;
                    }
                }
                norm = dot(v, v).sqrt();
                if norm > T::lit(0.5) {
                    break;
                }
            }
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// PCA of `n` rows of width `d` onto `c` components.
///
/// Uses the `d x d` covariance when `n >= d`, otherwise the `n x n` Gram matrix
/// of the centered rows, which has the same non-zero spectrum.
pub fn pca_project<T: Real>(rows: &[T], n: usize, d: usize, c: usize, label: &str) -> Result<PcaProjection<T>> {
    if rows.len() != n * d || d == 0 {
        return Err(GdcError::DimensionMismatch { expected: n * d, found: rows.len() });
    }
    if n < 2 {
        return Err(GdcError::TooFewSamples { n, required: 2 });
    }
    let max_c = (n - 1).min(d);
    if c == 0 || c > max_c {
        return Err(GdcError::ComponentCountOutOfRange { c, max: max_c });
    }
    let mut mean = vec![T::zero(); d];
    for row in rows.chunks_exact(d) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += *x;
        }
    }
    let inv_n = T::one() / T::from_count(n);
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let centered: Vec<T> =
        rows.chunks_exact(d).flat_map(|r| r.iter().zip(&mean).map(|(x, m)| *x - *m).collect::<Vec<_>>()).collect();

    let (eigenvalues, mut axes) = if n >= d {
        let cov = SymMatrix::sample_covariance(&centered, n, d, &vec![T::zero(); d]);
        let spec = sym_eig(&cov)?;
        let axes = spec.vectors().take(c).map(|v| v.to_vec()).collect::<Vec<_>>();
        (spec.values, axes)
    } else {
        let gram =
            SymMatrix::from_fn(n, |a, b| dot(&centered[a * d..(a + 1) * d], &centered[b * d..(b + 1) * d]) * inv_n);
        let spec = sym_eig(&gram)?;
        let axes = spec
            .vectors()
            .take(c)
            .map(|u| {
                let mut v = vec![T::zero(); d];
                for (row, ua) in centered.chunks_exact(d).zip(u) {
                    for (vi, x) in v.iter_mut().zip(row) {
                        *vi += *ua * *x;
                    }
                }
                v
            })
            .collect::<Vec<_>>();
        (spec.values, axes)
    };
    orthonormalize(&mut axes, d);

    let explained_variance = eigenvalues.into_iter().take(n.min(d)).map(|v| v.max(T::zero())).collect();
    let mut scores = Vec::with_capacity(n * c);
    for row in centered.chunks_exact(d) {
        for axis in &axes {
            scores.push(dot(row, axis));
        }
    }
    Ok(PcaProjection { class_label: label.to_string(), axes, explained_variance, scores, n })
}

#[derive(Debug, Clone)]
pub struct ClassNormality {
    pub label: String,
    pub results: Vec<SwResult>,
    pub pass_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct NormalityReport {
    pub alpha: f64,
    pub components: usize,
    pub classes: Vec<ClassNormality>,
    /// Share of all tested components (pooled across classes) with `p > alpha`.
    pub pass_fraction: f64,
}

impl NormalityReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "normality audit: {} components per class, alpha = {}", self.components, self.alpha);
        let width = self.classes.iter().map(|c| c.label.len()).max().unwrap_or(5).max(5);
        let _ =
            writeln!(out, "{:<width$}  {:>6}  {:>9}  {:>9}  {:>9}", "class", "passed", "fraction", "min W", "median p");
        for c in &self.classes {
            let passed = c.results.iter().filter(|r| r.p_value > self.alpha).count();
            let min_w = c.results.iter().map(|r| r.w).fold(f64::INFINITY, f64::min);
            let mut ps: Vec<f64> = c.results.iter().map(|r| r.p_value).collect();
            ps.sort_by(|a, b| a.partial_cmp(b).expect("finite p"));
            let median = ps[ps.len() / 2];
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>9.4}  {:>9.5}  {:>9.4}",
                c.label,
                format!("{passed}/{}", c.results.len()),
                c.pass_fraction,
                min_w,
                median
            );
        }
        let total: usize = self.classes.iter().map(|c| c.results.len()).sum();
        let _ = writeln!(out, "pooled pass fraction: {:.4} over {} components", self.pass_fraction, total);
        out
    }
}

/// Per-class PCA followed by a Shapiro–Wilk test on each of the first `c`
/// score columns. A component passes when its p-value exceeds `alpha`.
pub fn audit<T: Real>(archive: &EmbeddingArchive, c: usize, alpha: f64) -> Result<NormalityReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GdcError::InvalidAlpha(alpha));
    }
    if archive.classes().is_empty() {
        return Err(GdcError::EmptyInput("archive has no classes"));
    }
    let d = archive.dim();
    let required = (c + 1).max(4);
    let mut classes = Vec::with_capacity(archive.classes().len());
    let (mut passed_total, mut tested_total) = (0usize, 0usize);
    for block in archive.classes() {
        let n = block.n_rows(d);
        let annotate = |e| GdcError::in_class(block.label.clone(), e);
        if n < required {
            return Err(annotate(GdcError::TooFewSamples { n, required }));
        }
        let proj = pca_project(&block.rows_as::<T>(), n, d, c, &block.label).map_err(annotate)?;
        let results =
            (0..c).map(|j| shapiro_wilk(&proj.score_column(j))).collect::<Result<Vec<_>>>().map_err(annotate)?;
        let passed = results.iter().filter(|r| r.p_value > alpha).count();
        passed_total += passed;
        tested_total += results.len();
        classes.push(ClassNormality {
            label: block.label.clone(),
            pass_fraction: passed as f64 / results.len() as f64,
            results,
        });
    }
    Ok(NormalityReport { alpha, components: c, classes, pass_fraction: passed_total as f64 / tested_total as f64 })
}
