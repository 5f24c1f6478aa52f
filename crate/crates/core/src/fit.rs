//! One-call OLS fits with a chosen sandwich variance, dispatching on
//! directedness and layer count.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array::{
    array_dc_meat, array_exch_meat, estimate_array_params, estimate_undirected_array_params,
    undirected_array_exch_meat, ArrayExchParams, ArrayStructure, UndirectedArrayParams,
};
use crate::error::{Error, Result};
use crate::estimators::{
    bread, dc_meat, estimate_exch_params, estimate_undirected_params, exch_meat, hc_meat, ols_fit,
    sandwich_with_bread, undirected_dc_meat, undirected_exch_meat, undirected_residual_matrix, ExchParams,
    SeKind, UndirectedParams,
};
use crate::relational::RelationalDataset;

/// Exchangeable parameters estimated alongside a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedParams {
    Directed(ExchParams),
    Array(ArrayExchParams),
    Undirected(UndirectedParams),
    UndirectedArray(UndirectedArrayParams),
}

/// Point estimates with a sandwich covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub vcov: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub se_kind: SeKind,
    /// Present for exchangeable fits.
    pub params: Option<FittedParams>,
    /// 2-norm condition number of `X`.
    pub design_condition: f64,
}

impl FitResult {
    pub fn standard_errors(&self) -> DVector<f64> {
        self.vcov.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// 2-norm condition number of a design matrix.
pub fn condition_number(x: &DMatrix<f64>) -> f64 {
    let sv = x.singular_values();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

/// Meat of the requested kind for a dataset's design and residuals.
/// Array structures other than full exchangeability are directed-only.
pub fn meat_for(
    ds: &RelationalDataset,
    x: &DMatrix<f64>,
    residuals: &[f64],
    se: SeKind,
    structure: ArrayStructure,
) -> Result<(DMatrix<f64>, Option<FittedParams>)> {
    let (n, layers, directed) = (ds.n(), ds.layers(), ds.directed());
    let layout = ds.layout();
    Ok(match (se, directed, layers) {
        (SeKind::Hc, ..) => (hc_meat(x, residuals)?, None),
        (SeKind::Dc, true, 1) => (dc_meat(x, residuals, n)?, None),
        (SeKind::Dc, false, 1) => (undirected_dc_meat(x, residuals, n)?, None),
        (SeKind::Dc, _, _) => (array_dc_meat(x, residuals, layout)?, None),
        (SeKind::Exch, true, 1) => {
            let p = estimate_exch_params(residuals, n)?;
            (exch_meat(x, &p, n)?, Some(FittedParams::Directed(p)))
        }
        (SeKind::Exch, false, 1) => {
            let p = estimate_undirected_params(&undirected_residual_matrix(residuals, n)?)?;
            (undirected_exch_meat(x, &p, n)?, Some(FittedParams::Undirected(p)))
        }
        (SeKind::Exch, true, _) => {
            let p = estimate_array_params(residuals, n, layers, structure)?;
            (array_exch_meat(x, &p, n)?, Some(FittedParams::Array(p)))
        }
        (SeKind::Exch, false, _) => {
            if structure != ArrayStructure::FullExch {
                return Err(Error::Unsupported(format!(
                    "undirected arrays support only full exchangeability, not {structure:?}"
                )));
            }
            let p = estimate_undirected_array_params(residuals, n, layers)?;
            (
                undirected_array_exch_meat(x, &p, n, layers)?,
                Some(FittedParams::UndirectedArray(p)),
            )
        }
    })
}

/// OLS with the requested sandwich covariance. `structure` applies only to
/// exchangeable fits of multi-layer data.
pub fn fit(ds: &RelationalDataset, se: SeKind, structure: ArrayStructure) -> Result<FitResult> {
    let ols = ols_fit(ds)?;
    let x = ds.x();
    let b = bread(x)?;
    let (meat, params) = meat_for(ds, x, ols.residuals.as_slice(), se, structure)?;
    let vcov = sandwich_with_bread(&b, &meat);
    if vcov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotInvertible("non-finite covariance estimate".into()));
    }
    Ok(FitResult {
        beta_hat: ols.beta_hat,
        vcov,
        residuals: ols.residuals,
        se_kind: se,
        params,
        design_condition: condition_number(x),
    })
}
