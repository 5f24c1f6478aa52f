//! Generalized estimating equations with an exchangeable working covariance.
//!
//! Each iteration weights the normal equations by the inverse of the
//! current working covariance (applied matrix-free through its six-slot
//! pattern), then re-estimates the working parameters from the new
//! residuals. The final covariance is a sandwich around the weighted design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array::{estimate_array_params, ArrayExchParams, ArrayStructure};
use crate::error::{Error, Result};
use crate::estimators::{
    dependent_columns, estimate_exch_params, ols_fit, sandwich_with_bread, symmetrize, ExchParams,
    SeKind,
};
use crate::fit::meat_for;
use crate::inversion::{apply_block_pair, enforce_array_pd, enforce_pd, invert_array_exch, invert_exch, SixParams};
use crate::relational::RelationalDataset;

/// Working covariance structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkingStructure {
    /// Single directed layer.
    Exch,
    /// Multi-layer directed array with full exchangeability.
    FullExch,
}

/// Working parameters for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorkingParams {
    Exch(ExchParams),
    Array(ArrayExchParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeeConfig {
    pub max_iter: usize,
    /// Threshold on `‖Δβ‖∞ / max(‖β‖∞, 1)`.
    pub tol: f64,
    pub structure: WorkingStructure,
    pub se_kind: SeKind,
    /// Held fixed instead of re-estimated when present.
    pub fixed_params: Option<WorkingParams>,
}

impl Default for GeeConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
            structure: WorkingStructure::Exch,
            se_kind: SeKind::Exch,
            fixed_params: None,
        }
    }
}

impl GeeConfig {
    pub fn for_dataset(ds: &RelationalDataset) -> Self {
        Self {
            structure: if ds.layers() > 1 {
                WorkingStructure::FullExch
            } else {
                WorkingStructure::Exch
            },
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeeResult {
    pub beta_hat: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Working parameters used at each iteration, after PD enforcement.
    pub param_trajectory: Vec<WorkingParams>,
    pub shrink_events: usize,
    pub residuals: DVector<f64>,
}

/// Consecutive increases in the coefficient change that trigger damping.
const OSCILLATION_RUN: usize = 3;

struct Weight {
    p1: SixParams,
    p2: SixParams,
    scale_only: bool,
}

impl Weight {
    fn apply(&self, m: &DMatrix<f64>, n: usize, layers: usize) -> Result<DMatrix<f64>> {
        if self.scale_only {
            return Ok(m * self.p1.0[0]);
        }
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            let w = apply_block_pair(&self.p1, &self.p2, col.as_slice(), n, layers)?;
            out.set_column(c, &w);
        }
        Ok(out)
    }
}

fn is_iid(p: &ExchParams) -> bool {
    p.phi_a == 0.0 && p.phi_b == 0.0 && p.phi_c == 0.0 && p.phi_d == 0.0
}

fn weight_for(params: &WorkingParams, n: usize) -> Result<Weight> {
    match params {
        WorkingParams::Exch(p) => {
            if p.sigma2 <= 0.0 {
                return Ok(Weight {
                    p1: SixParams::identity(),
                    p2: SixParams::default(),
                    scale_only: true,
                });
            }
            if is_iid(p) {
                return Ok(Weight {
                    p1: SixParams::identity().scale(1.0 / p.sigma2),
                    p2: SixParams::default(),
                    scale_only: true,
                });
            }
            Ok(Weight {
                p1: invert_exch(p, n)?,
                p2: SixParams::default(),
                scale_only: false,
            })
        }
        WorkingParams::Array(a) => {
            if a.blocks[0].sigma2 <= 0.0 {
                return Ok(Weight {
                    p1: SixParams::identity(),
                    p2: SixParams::default(),
                    scale_only: true,
                });
            }
            let (p1, p2) = invert_array_exch(a, n)?;
            Ok(Weight {
                p1,
                p2,
                scale_only: false,
            })
        }
    }
}

fn estimate_working(residuals: &[f64], ds: &RelationalDataset, structure: WorkingStructure) -> Result<WorkingParams> {
    Ok(match structure {
        WorkingStructure::Exch => WorkingParams::Exch(estimate_exch_params(residuals, ds.n())?),
        WorkingStructure::FullExch => WorkingParams::Array(estimate_array_params(
            residuals,
            ds.n(),
            ds.layers(),
            ArrayStructure::FullExch,
        )?),
    })
}

fn enforce(params: WorkingParams, n: usize) -> Result<(WorkingParams, usize)> {
    Ok(match params {
        WorkingParams::Exch(p) if p.sigma2 <= 0.0 => (WorkingParams::Exch(p), 0),
        WorkingParams::Exch(p) => {
            let (q, k) = enforce_pd(&p, n)?;
            (WorkingParams::Exch(q), k)
        }
        WorkingParams::Array(a) if a.blocks[0].sigma2 <= 0.0 => (WorkingParams::Array(a), 0),
        WorkingParams::Array(a) => {
            let (q, k) = enforce_array_pd(&a, n)?;
            (WorkingParams::Array(q), k)
        }
    })
}

/// `prev + step (next − prev)` slot by slot.
fn blend(prev: &WorkingParams, next: &WorkingParams, step: f64) -> WorkingParams {
    let mix = |a: &ExchParams, b: &ExchParams| {
        let (sa, sb) = (a.slots(), b.slots());
        ExchParams::from_slots(std::array::from_fn(|k| sa[k] + step * (sb[k] - sa[k])))
    };
    match (prev, next) {
        (WorkingParams::Exch(a), WorkingParams::Exch(b)) => WorkingParams::Exch(mix(a, b)),
        (WorkingParams::Array(a), WorkingParams::Array(b)) => {
            let mut out = b.clone();
            for (o, (x, y)) in out.blocks.iter_mut().zip(a.blocks.iter().zip(&b.blocks)) {
                *o = mix(x, y);
            }
            WorkingParams::Array(out)
        }
        _ => next.clone(),
    }
}

fn solve_weighted(x: &DMatrix<f64>, wx: &DMatrix<f64>, wy: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let a = symmetrize(x.transpose() * wx);
    let inv = a.clone().cholesky().map(|c| c.inverse()).or_else(|| a.try_inverse()).ok_or_else(|| {
        Error::SingularDesign {
            columns: dependent_columns(wx),
        }
    })?;
    let beta = &inv * (x.transpose() * wy);
    Ok((beta, inv))
}

fn relative_change(prev: &DVector<f64>, next: &DVector<f64>) -> f64 {
    (next - prev).amax() / next.amax().max(1.0)
}

/// Iteratively reweighted least squares with an exchangeable working
/// covariance, starting from OLS.
pub fn gee_fit(ds: &RelationalDataset, cfg: &GeeConfig) -> Result<GeeResult> {
    cfg.validate()?;
    if !ds.directed() {
        return Err(Error::Unsupported("GEE requires directed data".into()));
    }
    let (n, layers) = (ds.n(), ds.layers());
    if n < 3 {
        return Err(Error::InsufficientActors {
            required: 3,
            actual: n,
        });
    }
    match (cfg.structure, layers) {
        (WorkingStructure::Exch, 1) => {}
        (WorkingStructure::FullExch, l) if l >= 2 => {}
        (WorkingStructure::Exch, l) => {
            return Err(Error::Unsupported(format!(
                "single-layer working structure on {l} layers"
            )))
        }
        (WorkingStructure::FullExch, l) => {
            return Err(Error::InsufficientLayers {
                required: 2,
                actual: l,
            })
        }
    }
    if let Some(fixed) = &cfg.fixed_params {
        let ok = matches!(
            (fixed, cfg.structure),
            (WorkingParams::Exch(_), WorkingStructure::Exch) | (WorkingParams::Array(_), WorkingStructure::FullExch)
        );
        if !ok {
            return Err(Error::InvalidParameter("fixed parameters do not match the working structure".into()));
        }
    }

    let (y, x) = ds.vectorize();
    let mut beta = ols_fit(ds)?.beta_hat;
    let mut residuals = y - x * &beta;
    let mut trajectory = Vec::new();
    let mut shrink_events = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut step = 1.0;
    let mut last_change = f64::INFINITY;
    let mut rising = 0;
    let mut prev_params: Option<WorkingParams> = None;
    let mut weighted = (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));

    while iterations < cfg.max_iter {
        iterations += 1;
        let raw = match &cfg.fixed_params {
            Some(p) => p.clone(),
            None => estimate_working(residuals.as_slice(), ds, cfg.structure)?,
        };
        let target = match &prev_params {
            Some(prev) if step < 1.0 => blend(prev, &raw, step),
            _ => raw,
        };
        let (params, shrinks) = enforce(target, n)?;
        shrink_events += shrinks;
        let w = weight_for(&params, n)?;
        let wx = w.apply(x, n, layers)?;
        let wy = w.apply(&DMatrix::from_column_slice(y.len(), 1, y.as_slice()), n, layers)?;
        let (next, inv) = solve_weighted(x, &wx, &wy.column(0).into_owned())?;
        let change = relative_change(&beta, &next);
        if !change.is_finite() {
            return Err(Error::NotInvertible("non-finite GEE update".into()));
        }
        beta = next;
        residuals = y - x * &beta;
        trajectory.push(params.clone());
        prev_params = Some(params);
        weighted = (wx, inv);
        if change < cfg.tol {
            converged = true;
            break;
        }
        if change > last_change {
            rising += 1;
            if rising >= OSCILLATION_RUN {
                step *= 0.5;
                rising = 0;
            }
        } else {
            rising = 0;
        }
        last_change = change;
    }

    let (wx, inv) = weighted;
    let (meat, _) = meat_for(ds, &wx, residuals.as_slice(), cfg.se_kind, ArrayStructure::FullExch)?;
    let vcov = sandwich_with_bread(&inv, &meat);
    Ok(GeeResult {
        beta_hat: beta,
        vcov,
        iterations,
        converged,
        param_trajectory: trajectory,
        shrink_events,
        residuals,
    })
}
