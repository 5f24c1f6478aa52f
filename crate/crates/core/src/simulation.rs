//! Monte Carlo coverage harness: covariate and error generators, and
//! per-design-draw coverage of normal-approximation intervals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Error, Result};
use crate::estimators::{bread, dc_meat, estimate_exch_params, hc_meat, sandwich_with_bread, ExchParams, SeKind};
use crate::exec::{map_indexed, Execution};
use crate::forms::PatternForms;
use crate::relational::{Layout, RelationalDataset};
use crate::rng::{stream, Purpose};

/// Number of coefficients in the simulation regression.
pub const SIM_P: usize = 4;

/// Bilinear mixed-effects error parameters (standard deviations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BilinearParams {
    pub d: usize,
    pub rho_ab: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_z: f64,
    pub sigma_gamma: f64,
    pub sigma_eps: f64,
}

impl Default for BilinearParams {
    fn default() -> Self {
        Self {
            d: 2,
            rho_ab: 0.5,
            sigma_a: 0.957,
            sigma_b: 0.677,
            sigma_z: 0.677,
            sigma_gamma: 0.677,
            sigma_eps: 0.866,
        }
    }
}

impl BilinearParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_ab.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|rho_ab| = {} must be < 1", self.rho_ab.abs())));
        }
        let sds = [self.sigma_a, self.sigma_b, self.sigma_z, self.sigma_gamma, self.sigma_eps];
        if sds.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("standard deviations must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Per-entry variance `σ_a² + σ_b² + dσ_z⁴ + σ_γ² + σ_ε²`.
    pub fn total_variance(&self) -> f64 {
        self.sigma_a.powi(2)
            + self.sigma_b.powi(2)
            + self.d as f64 * self.sigma_z.powi(4)
            + self.sigma_gamma.powi(2)
            + self.sigma_eps.powi(2)
    }

    /// The implied exchangeable covariance.
    pub fn exch_params(&self) -> ExchParams {
        let sr = self.rho_ab * self.sigma_a * self.sigma_b;
        ExchParams::new(
            self.total_variance(),
            2.0 * sr + self.d as f64 * self.sigma_z.powi(4) + self.sigma_gamma.powi(2),
            self.sigma_b.powi(2),
            self.sigma_a.powi(2),
            sr,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModel {
    Iid,
    Bilinear,
    NonExch,
    /// All errors zero; a smoke case.
    Zero,
}

fn default_draws() -> usize {
    50
}
fn default_reps() -> usize {
    200
}
fn default_beta() -> [f64; SIM_P] {
    [1.0; SIM_P]
}
fn default_estimators() -> Vec<SeKind> {
    SeKind::ALL.to_vec()
}
fn default_ci() -> f64 {
    0.95
}
fn default_model() -> ErrorModel {
    ErrorModel::Iid
}

/// A coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub n: usize,
    #[serde(default = "default_draws")]
    pub n_design_draws: usize,
    #[serde(default = "default_reps")]
    pub n_error_reps: usize,
    #[serde(default = "default_beta")]
    pub beta_true: [f64; SIM_P],
    #[serde(default = "default_model")]
    pub error_model: ErrorModel,
    #[serde(default)]
    pub bilinear: BilinearParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<SeKind>,
    #[serde(default = "default_ci")]
    pub ci_level: f64,
}

impl SimDesign {
    pub fn new(n: usize, error_model: ErrorModel, seed: u64) -> Self {
        Self {
            n,
            n_design_draws: default_draws(),
            n_error_reps: default_reps(),
            beta_true: default_beta(),
            error_model,
            bilinear: BilinearParams::default(),
            seed,
            estimators: default_estimators(),
            ci_level: default_ci(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InsufficientActors {
                required: 3,
                actual: self.n,
            });
        }
        if self.n_design_draws == 0 || self.n_error_reps < 2 {
            return Err(Error::InvalidParameter(
                "need at least one design draw and two error replicates".into(),
            ));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidParameter(format!("ci_level {} outside (0, 1)", self.ci_level)));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidParameter("no estimators requested".into()));
        }
        self.bilinear.validate()
    }
}

/// Directed design `(1, 1[x₂ᵢ∈C]1[x₂ⱼ∈C], |x₃ᵢ − x₃ⱼ|, x₄ᵢⱼ)` with
/// `C = {x₂ = 1}`, in canonical dyad order.
///
/// For `n ≥ 3`, while the binary column is constant one actor's `x₂` is
/// flipped at random.
pub fn gen_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let mut x2: Vec<bool> = (0..n).map(|_| coin.sample(rng)).collect();
    if n >= 3 {
        // constant iff fewer than two members or everyone is a member
        while {
            let members = x2.iter().filter(|&&b| b).count();
            members < 2 || members == n
        } {
            let k = rng.random_range(0..n);
            x2[k] = !x2[k];
        }
    }
    let x3: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let layout = Layout::directed(n);
    let mut x = DMatrix::zeros(layout.len(), SIM_P);
    for (pos, d) in layout.dyads().enumerate() {
        x[(pos, 0)] = 1.0;
        x[(pos, 1)] = f64::from(u8::from(x2[d.i] && x2[d.j]));
        x[(pos, 2)] = (x3[d.i] - x3[d.j]).abs();
        x[(pos, 3)] = rng.sample(StandardNormal);
    }
    x
}

/// IID `N(0, 3)` errors in canonical order.
pub fn gen_errors_iid<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    let dist = Normal::new(0.0, 3f64.sqrt()).expect("valid sd");
    DVector::from_fn(n * n.saturating_sub(1), |_, _| dist.sample(rng))
}

/// Bilinear errors `ξᵢⱼ = aᵢ + bⱼ + zᵢᵀzⱼ + γ₍ᵢⱼ₎ + εᵢⱼ` in canonical order.
pub fn gen_errors_bilinear<R: Rng + ?Sized>(n: usize, params: &BilinearParams, rng: &mut R) -> Result<DVector<f64>> {
    params.validate()?;
    let std = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    let rho = params.rho_ab;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let (u, v) = (std(rng), std(rng));
        a[i] = params.sigma_a * u;
        b[i] = params.sigma_b * (rho * u + (1.0 - rho * rho).sqrt() * v);
    }
    let z: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..params.d).map(|_| params.sigma_z * std(rng)).collect())
        .collect();
    let mut gamma = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let g = params.sigma_gamma * std(rng);
            gamma[(i, j)] = g;
            gamma[(j, i)] = g;
        }
    }
    let layout = Layout::directed(n);
    let mut out = DVector::zeros(layout.len());
    for (pos, d) in layout.dyads().enumerate() {
        let zz: f64 = z[d.i].iter().zip(&z[d.j]).map(|(p, q)| p * q).sum();
        out[pos] = a[d.i] + b[d.j] + zz + gamma[(d.i, d.j)] + params.sigma_eps * std(rng);
    }
    Ok(out)
}

/// Non-exchangeable errors: a shared `τ ~ N(0, 9n/(4⌊n/2⌋))` on the block of
/// dyads among the first `⌊n/2⌋` actors, plus IID `N(0, 3/4)` noise.
pub fn gen_errors_nonexch<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    let half = n / 2;
    let tau = if half > 0 {
        let var = 9.0 * n as f64 / (4.0 * half as f64);
        var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    let eps = Normal::new(0.0, 0.75f64.sqrt()).expect("valid sd");
    let layout = Layout::directed(n);
    DVector::from_iterator(
        layout.len(),
        layout.dyads().map(|d| {
            let block = if d.i < half && d.j < half { tau } else { 0.0 };
            block + eps.sample(rng)
        }),
    )
}

/// Errors from the configured model.
pub fn gen_errors<R: Rng + ?Sized>(
    model: ErrorModel,
    n: usize,
    bilinear: &BilinearParams,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(match model {
        ErrorModel::Iid => gen_errors_iid(n, rng),
        ErrorModel::Bilinear => gen_errors_bilinear(n, bilinear, rng)?,
        ErrorModel::NonExch => gen_errors_nonexch(n, rng),
        ErrorModel::Zero => DVector::zeros(n * n.saturating_sub(1)),
    })
}

/// Two-sided normal multiplier for a confidence level.
pub fn z_multiplier(level: f64) -> f64 {
    NormalDist::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Per-draw quantities cached across error replicates.
struct DrawCache {
    x: DMatrix<f64>,
    xt: DMatrix<f64>,
    bread: DMatrix<f64>,
    forms: PatternForms,
}

impl DrawCache {
    fn new(x: DMatrix<f64>, n: usize) -> Result<Self> {
        let bread = bread(&x)?;
        let forms = PatternForms::quadratic(&x, n);
        Ok(Self {
            xt: x.transpose(),
            x,
            bread,
            forms,
        })
    }
}

/// Standard errors of one replicate for each requested estimator.
fn replicate_ses(
    cache: &DrawCache,
    residuals: &[f64],
    n: usize,
    estimators: &[SeKind],
) -> Vec<std::result::Result<DVector<f64>, String>> {
    estimators
        .iter()
        .map(|&kind| {
            let meat = match kind {
                SeKind::Hc => hc_meat(&cache.x, residuals),
                SeKind::Dc => dc_meat(&cache.x, residuals, n),
                SeKind::Exch => estimate_exch_params(residuals, n).map(|p| cache.forms.combine(p.slots())),
            }
            .map_err(|e| e.to_string())?;
            let vcov = sandwich_with_bread(&cache.bread, &meat);
            let diag = vcov.diagonal();
            if diag.iter().any(|v| !v.is_finite() || *v < -1e-12 * vcov.amax()) {
                return Err("invalid covariance diagonal".to_string());
            }
            Ok(diag.map(|v| v.max(0.0).sqrt()))
        })
        .collect()
}

struct RepOut {
    beta_hat: DVector<f64>,
    ses: Vec<std::result::Result<DVector<f64>, String>>,
}

/// An estimator failure on one replicate; the sweep continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub draw: usize,
    pub rep: usize,
    pub estimator: SeKind,
    pub message: String,
}

/// Coverage and SE statistics for one (estimator, coefficient).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub estimator: SeKind,
    pub coefficient: usize,
    /// Fraction of covering intervals, one per design draw.
    pub coverage: Vec<f64>,
    /// Mean SE minus MC-true SE, one per design draw.
    pub se_error: Vec<f64>,
    /// Standard deviation of the SE across replicates, one per design draw.
    pub se_sd: Vec<f64>,
    pub median_coverage: f64,
    pub coverage_q10: f64,
    pub coverage_q90: f64,
}

impl CoverageCell {
    /// Width of the 10–90% inter-design coverage band.
    pub fn coverage_spread(&self) -> f64 {
        self.coverage_q90 - self.coverage_q10
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub design: SimDesign,
    pub z: f64,
    /// Standard deviation of β̂ across replicates, per draw and coefficient.
    pub mc_true_se: Vec<[f64; SIM_P]>,
    pub cells: Vec<CoverageCell>,
    pub failures: Vec<FailureRecord>,
}

impl SimReport {
    pub fn cell(&self, estimator: SeKind, coefficient: usize) -> Option<&CoverageCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.coefficient == coefficient)
    }
}

/// Quantile with the crate-wide convention (statrs order statistics).
pub fn quantile(values: &[f64], tau: f64) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return f64::NAN;
    }
    Data::new(finite).quantile(tau)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// Fixed design matrices for every draw of a design.
pub fn design_draws(design: &SimDesign, exec: Execution) -> Vec<DMatrix<f64>> {
    map_indexed(exec, design.n_design_draws, |d| {
        gen_covariates(design.n, &mut stream(design.seed, Purpose::Design, d as u64, 0))
    })
}

/// Run the coverage experiment. Each replicate's randomness depends only on
/// `(seed, draw, rep)`.
pub fn run_coverage(design: &SimDesign, exec: Execution) -> Result<SimReport> {
    design.validate()?;
    let n = design.n;
    let draws = design.n_design_draws;
    let reps = design.n_error_reps;
    let beta = DVector::from_column_slice(&design.beta_true);
    let caches: Vec<DrawCache> = design_draws(design, exec)
        .into_iter()
        .map(|x| DrawCache::new(x, n))
        .collect::<Result<_>>()?;

    let outputs: Vec<Result<RepOut>> = map_indexed(exec, draws * reps, |job| {
        let (d, r) = (job / reps, job % reps);
        let cache = &caches[d];
        let mut rng = stream(design.seed, Purpose::Errors, d as u64, r as u64);
        let xi = gen_errors(design.error_model, n, &design.bilinear, &mut rng)?;
        let y = &cache.x * &beta + xi;
        let beta_hat = &cache.bread * (&cache.xt * &y);
        let residuals = &y - &cache.x * &beta_hat;
        let ses = replicate_ses(cache, residuals.as_slice(), n, &design.estimators);
        Ok(RepOut { beta_hat, ses })
    });

    let z = z_multiplier(design.ci_level);
    let k_est = design.estimators.len();
    let mut failures = Vec::new();
    let mut mc_true_se = Vec::with_capacity(draws);
    // [estimator][coefficient] → per-draw series
    let mut coverage = vec![vec![Vec::new(); SIM_P]; k_est];
    let mut se_error = coverage.clone();
    let mut se_sd = coverage.clone();

    let mut outputs = outputs.into_iter();
    for d in 0..draws {
        let draw_out: Vec<RepOut> = outputs.by_ref().take(reps).collect::<Result<_>>()?;
        let mut true_se = [0.0; SIM_P];
        for (c, slot) in true_se.iter_mut().enumerate() {
            let b: Vec<f64> = draw_out.iter().map(|o| o.beta_hat[c]).collect();
            *slot = mean_sd(&b).1;
        }
        mc_true_se.push(true_se);
        for (k, &kind) in design.estimators.iter().enumerate() {
            let mut ok: Vec<(usize, &DVector<f64>)> = Vec::with_capacity(reps);
            for (r, o) in draw_out.iter().enumerate() {
                match &o.ses[k] {
                    Ok(se) => ok.push((r, se)),
                    Err(msg) => failures.push(FailureRecord {
                        draw: d,
                        rep: r,
                        estimator: kind,
                        message: msg.clone(),
                    }),
                }
            }
            for c in 0..SIM_P {
                let covered = ok
                    .iter()
                    .filter(|(r, se)| (draw_out[*r].beta_hat[c] - design.beta_true[c]).abs() <= z * se[c])
                    .count();
                let frac = if ok.is_empty() {
                    f64::NAN
                } else {
                    covered as f64 / ok.len() as f64
                };
                let ses: Vec<f64> = ok.iter().map(|(_, se)| se[c]).collect();
                let (mean, sd) = mean_sd(&ses);
                coverage[k][c].push(frac);
                se_error[k][c].push(mean - true_se[c]);
                se_sd[k][c].push(sd);
            }
        }
    }

    let mut cells = Vec::with_capacity(k_est * SIM_P);
    for (k, &kind) in design.estimators.iter().enumerate() {
        for c in 0..SIM_P {
            let cov = std::mem::take(&mut coverage[k][c]);
            cells.push(CoverageCell {
                estimator: kind,
                coefficient: c,
                median_coverage: quantile(&cov, 0.5),
                coverage_q10: quantile(&cov, 0.1),
                coverage_q90: quantile(&cov, 0.9),
                coverage: cov,
                se_error: std::mem::take(&mut se_error[k][c]),
                se_sd: std::mem::take(&mut se_sd[k][c]),
            });
        }
    }
    Ok(SimReport {
        design: design.clone(),
        z,
        mc_true_se,
        cells,
        failures,
    })
}

/// A synthetic gravity-style trade panel.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityFixture {
    pub dataset: RelationalDataset,
    pub actor_labels: Vec<String>,
    pub layer_labels: Vec<String>,
    pub covariate_names: Vec<String>,
    pub beta_true: Vec<f64>,
}

/// Panel of `layers` yearly directed trade layers among `n` countries:
/// intercept, sender and receiver log-GDP, log-distance and a symmetric
/// agreement indicator. Errors carry actor effects shared across years plus
/// yearly bilinear noise.
pub fn gravity_panel_fixture(n: usize, layers: usize, seed: u64) -> Result<GravityFixture> {
    if n < 3 || layers == 0 {
        return Err(Error::InvalidParameter("fixture needs n ≥ 3 and at least one layer".into()));
    }
    let mut rng = stream(seed, Purpose::Fixture, 0, 0);
    let std = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let base_gdp: Vec<f64> = (0..n).map(|_| 10.0 + std(&mut rng)).collect();
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
        .collect();
    let agree_coin = Bernoulli::new(0.3).expect("valid probability");
    let mut agreement = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = f64::from(u8::from(agree_coin.sample(&mut rng)));
            agreement[(i, j)] = v;
            agreement[(j, i)] = v;
        }
    }
    let shared_sender: Vec<f64> = (0..n).map(|_| 0.5 * std(&mut rng)).collect();
    let shared_receiver: Vec<f64> = (0..n).map(|_| 0.4 * std(&mut rng)).collect();
    let yearly = BilinearParams {
        sigma_a: 0.4,
        sigma_b: 0.3,
        sigma_z: 0.4,
        sigma_gamma: 0.3,
        sigma_eps: 0.5,
        ..BilinearParams::default()
    };
    let beta_true = vec![-5.0, 0.8, 0.7, -1.1, 0.5];
    let layout = Layout::new(n, layers, true);
    let m = layout.per_layer();
    let mut x = DMatrix::zeros(layout.len(), beta_true.len());
    let mut y = DVector::zeros(layout.len());
    for r in 0..layers {
        let gdp: Vec<f64> = base_gdp
            .iter()
            .map(|g| g + 0.03 * r as f64 + 0.05 * std(&mut rng))
            .collect();
        let noise = gen_errors_bilinear(n, &yearly, &mut rng)?;
        for pos in 0..m {
            let d = layout.dyad(r * m + pos);
            let (xi, yi) = coords[d.i];
            let (xj, yj) = coords[d.j];
            let dist = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt().max(0.1);
            let row = r * m + pos;
            let values = [1.0, gdp[d.i], gdp[d.j], dist.ln(), agreement[(d.i, d.j)]];
            let mut mean = 0.0;
            for (c, v) in values.iter().enumerate() {
                x[(row, c)] = *v;
                mean += beta_true[c] * v;
            }
            y[row] = mean + shared_sender[d.i] + shared_receiver[d.j] + noise[pos];
        }
    }
    Ok(GravityFixture {
        dataset: RelationalDataset::new(layout, y, x)?,
        actor_labels: (0..n).map(|i| format!("C{:02}", i + 1)).collect(),
        layer_labels: (0..layers).map(|r| format!("{}", 2001 + r)).collect(),
        covariate_names: ["intercept", "log_gdp_sender", "log_gdp_receiver", "log_distance", "agreement"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        beta_true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bilinear_defaults_total_variance() {
        let p = BilinearParams::default();
        assert!((p.total_variance() - 3.0).abs() < 0.01);
        assert!((p.exch_params().phi_c - 0.957f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn covariates_shape_and_fix() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in 3..12 {
            for _ in 0..20 {
                let x = gen_covariates(n, &mut rng);
                let col = x.column(1);
                assert!(col.iter().any(|&v| v != col[0]), "binary column constant at n={n}");
                assert!(x.column(2).iter().all(|&v| v >= 0.0));
                assert!(x.column(0).iter().all(|&v| v == 1.0));
                let l = Layout::directed(n);
                for (pos, d) in l.dyads().enumerate() {
                    let back = l.position(d.reversed()).unwrap();
                    assert_eq!(x[(pos, 1)], x[(back, 1)]);
                    assert_eq!(x[(pos, 2)], x[(back, 2)]);
                }
            }
        }
    }

    #[test]
    fn degenerate_sigmas_reduce_to_iid() {
        let p = BilinearParams {
            sigma_a: 0.0,
            sigma_b: 0.0,
            sigma_z: 0.0,
            sigma_gamma: 0.0,
            sigma_eps: 1.0,
            ..BilinearParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let e = gen_errors_bilinear(40, &p, &mut rng).unwrap();
        let est = estimate_exch_params(e.as_slice(), 40).unwrap();
        assert!((est.sigma2 - 1.0).abs() < 0.06);
        for v in [est.phi_a, est.phi_b, est.phi_c, est.phi_d] {
            assert!(v.abs() < 0.05);
        }
        let bad = BilinearParams {
            rho_ab: 1.0,
            ..BilinearParams::default()
        };
        assert!(gen_errors_bilinear(5, &bad, &mut rng).is_err());
    }

    #[test]
    fn nonexch_variances_follow_formula() {
        let n = 10;
        let reps = 4000;
        let l = Layout::directed(n);
        let inside = l.position(crate::relational::DyadIndex::pair(0, 1)).unwrap();
        let outside = l.position(crate::relational::DyadIndex::pair(7, 8)).unwrap();
        let (mut si, mut so) = (0.0, 0.0);
        for r in 0..reps {
            let e = gen_errors_nonexch(n, &mut stream(5, Purpose::Errors, 0, r));
            si += e[inside] * e[inside];
            so += e[outside] * e[outside];
        }
        let vi = si / reps as f64;
        let vo = so / reps as f64;
        let expect_in = 9.0 * n as f64 / (4.0 * (n / 2) as f64) + 0.75;
        assert!((vi - expect_in).abs() < 4.0 * expect_in * (2.0 / reps as f64).sqrt(), "{vi}");
        assert!((vo - 0.75).abs() < 4.0 * 0.75 * (2.0 / reps as f64).sqrt(), "{vo}");
    }

    #[test]
    fn z_multiplier_matches_table() {
        assert!((z_multiplier(0.95) - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn coverage_smoke_and_determinism() {
        let mut design = SimDesign::new(8, ErrorModel::Iid, 3);
        design.n_design_draws = 3;
        design.n_error_reps = 20;
        let a = run_coverage(&design, Execution::Parallel).unwrap();
        let b = run_coverage(&design, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 12);
        for c in &a.cells {
            assert_eq!(c.coverage.len(), 3);
            assert!(c.coverage.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        design.error_model = ErrorModel::Zero;
        let z = run_coverage(&design, Execution::Parallel).unwrap();
        assert!(z.mc_true_se.iter().all(|s| s.iter().all(|v| *v < 1e-10)));
    }

    #[test]
    fn gravity_fixture_is_full_rank() {
        let f = gravity_panel_fixture(10, 3, 1).unwrap();
        assert_eq!(f.dataset.layers(), 3);
        assert_eq!(f.dataset.x().nrows(), 270);
        assert!(crate::estimators::dependent_columns(f.dataset.x()).is_empty());
    }
}
