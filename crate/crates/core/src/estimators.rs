//! OLS fitting and sandwich variance estimators for a single relational layer.
//!
//! Three meats are provided: HC0 (diagonal), dyadic clustering (DC, raw
//! residual products for every actor-sharing pair) and exchangeable (EXCH,
//! five pooled residual-product averages). None of them materializes the
//! `n(n-1) × n(n-1)` error covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{PatternForms, UndirectedForms};
use crate::relational::{config_counts, undirected_shared_count, DyadIndex, Layout, RelationalDataset};

/// Exchangeable covariance parameters for one directed layer.
///
/// `phi_a` is the reciprocal covariance, `phi_b` common receiver, `phi_c`
/// common sender and `phi_d` sender/receiver. Pairs sharing no actor have
/// zero covariance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExchParams {
    pub sigma2: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub phi_c: f64,
    pub phi_d: f64,
}

impl ExchParams {
    pub fn new(sigma2: f64, phi_a: f64, phi_b: f64, phi_c: f64, phi_d: f64) -> Self {
        Self {
            sigma2,
            phi_a,
            phi_b,
            phi_c,
            phi_d,
        }
    }

    /// Identity-scaled covariance `σ² I`.
    pub fn iid(sigma2: f64) -> Self {
        Self::new(sigma2, 0.0, 0.0, 0.0, 0.0)
    }

    /// Values in slot order `(Same, Reciprocal, CommonReceiver, CommonSender,
    /// SenderReceiver)`.
    pub fn slots(&self) -> [f64; 5] {
        [self.sigma2, self.phi_a, self.phi_b, self.phi_c, self.phi_d]
    }

    pub fn from_slots(s: [f64; 5]) -> Self {
        Self::new(s[0], s[1], s[2], s[3], s[4])
    }

    /// Six-slot form with a zero disjoint slot.
    pub fn six(&self) -> [f64; 6] {
        let s = self.slots();
        [s[0], s[1], s[2], s[3], s[4], 0.0]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_slots(self.slots().map(|v| v * c))
    }

    /// Covariances scaled by `c`, variance unchanged.
    pub fn shrink_covariances(&self, c: f64) -> Self {
        Self::new(
            self.sigma2,
            self.phi_a * c,
            self.phi_b * c,
            self.phi_c * c,
            self.phi_d * c,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.slots().iter().all(|v| v.is_finite())
    }
}

/// Undirected exchangeable parameters: variance `theta` and shared-actor
/// covariance `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UndirectedParams {
    pub theta: f64,
    pub phi: f64,
}

/// Which meat a sandwich variance uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeKind {
    Hc,
    Dc,
    Exch,
}

impl SeKind {
    pub const ALL: [SeKind; 3] = [SeKind::Hc, SeKind::Dc, SeKind::Exch];

    pub fn name(self) -> &'static str {
        match self {
            SeKind::Hc => "hc",
            SeKind::Dc => "dc",
            SeKind::Exch => "exch",
        }
    }
}

impl std::str::FromStr for SeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hc" => Ok(SeKind::Hc),
            "dc" => Ok(SeKind::Dc),
            "exch" => Ok(SeKind::Exch),
            other => Err(Error::InvalidParameter(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Relative tolerance for detecting linearly dependent design columns.
const RANK_TOL: f64 = 1e-10;

/// Columns of `x` that are (numerically) linear combinations of earlier
/// columns, found by modified Gram–Schmidt.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for c in 0..x.ncols() {
        let mut v: DVector<f64> = x.column(c).into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= RANK_TOL * norm0 {
            dependent.push(c);
        } else {
            basis.push(v / norm);
        }
    }
    dependent
}

/// `(XᵀX)⁻¹`, failing with the dependent column set when `X` is rank
/// deficient.
pub fn bread(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let deficient = dependent_columns(x);
    if !deficient.is_empty() || x.nrows() < x.ncols() {
        return Err(Error::SingularDesign {
            columns: deficient,
        });
    }
    let xtx = x.transpose() * x;
    xtx.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::SingularDesign {
            columns: dependent_columns(x),
        })
}

/// OLS coefficients and residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
}

/// OLS via Householder QR of `X`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "response length",
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    let deficient = dependent_columns(x);
    if !deficient.is_empty() || x.nrows() < x.ncols() {
        return Err(Error::SingularDesign {
            columns: deficient,
        });
    }
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    let beta_hat = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { columns: vec![] })?;
    let residuals = y - x * &beta_hat;
    Ok(OlsFit {
        beta_hat,
        residuals,
    })
}

/// OLS fit of a relational dataset.
pub fn ols_fit(ds: &RelationalDataset) -> Result<OlsFit> {
    let (y, x) = ds.vectorize();
    ols(x, y)
}

fn require_directed_layer(len: usize, n: usize, what: &'static str) -> Result<()> {
    let m = n * n.saturating_sub(1);
    if len != m {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: m,
            actual: len,
        });
    }
    Ok(())
}

/// Exchangeable parameters from directed single-layer residuals by averaging
/// residual products within each configuration. `O(n²)` via row and column
/// residual sums.
pub fn estimate_exch_params(residuals: &[f64], n: usize) -> Result<ExchParams> {
    if n < 3 {
        return Err(Error::InsufficientActors {
            required: 3,
            actual: n,
        });
    }
    require_directed_layer(residuals.len(), n, "residual length")?;
    let layout = Layout::directed(n);
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    let mut pos = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            rows[i] += residuals[pos];
            cols[j] += residuals[pos];
            pos += 1;
        }
    }
    let (mut s2, mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut pos = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = residuals[pos];
            let eji = residuals[layout.position_unchecked(DyadIndex::pair(j, i))];
            s2 += e * e;
            sa += e * eji;
            sb += e * (cols[j] - e);
            sc += e * (rows[i] - e);
            sd += e * (cols[i] + rows[j] - 2.0 * eji);
            pos += 1;
        }
    }
    let nf = n as f64;
    let d = nf * (nf - 1.0);
    let t = d * (nf - 2.0);
    Ok(ExchParams::new(s2 / d, sa / d, sb / t, sc / t, sd / (2.0 * t)))
}

/// `Xᵀ Ω̂_E X` for a directed layer.
pub fn exch_meat(x: &DMatrix<f64>, params: &ExchParams, n: usize) -> Result<DMatrix<f64>> {
    require_directed_layer(x.nrows(), n, "design rows")?;
    Ok(PatternForms::quadratic(x, n).combine(params.slots()))
}

/// DC meat from residual-weighted rows `w_a = e_a x_a` of a directed layout
/// with any number of layers: overlap depends only on the actors, so rows of
/// the same dyad are pooled across layers first.
pub(crate) fn dc_meat_pooled(weighted: &DMatrix<f64>, layout: Layout) -> DMatrix<f64> {
    let n = layout.n;
    let p = weighted.ncols();
    let m = layout.per_layer();
    let mut pooled = DMatrix::zeros(m, p);
    for r in 0..layout.layers {
        pooled += weighted.rows(r * m, m);
    }
    let mut actor = DMatrix::zeros(n, p);
    for pos in 0..m {
        let d = layout.dyad(pos);
        for c in 0..p {
            let v = pooled[(pos, c)];
            actor[(d.i, c)] += v;
            actor[(d.j, c)] += v;
        }
    }
    let mut meat = actor.transpose() * &actor - pooled.transpose() * &pooled;
    if layout.directed {
        let mut rec = DMatrix::zeros(m, p);
        let single = Layout::directed(n);
        for pos in 0..m {
            let back = single.position_unchecked(single.dyad(pos).reversed());
            rec.set_row(pos, &pooled.row(back));
        }
        meat -= pooled.transpose() * rec;
    }
    meat
}

fn weighted_rows(x: &DMatrix<f64>, e: &[f64]) -> DMatrix<f64> {
    let mut w = x.clone();
    for (mut row, ei) in w.row_iter_mut().zip(e) {
        row *= *ei;
    }
    w
}

/// `Xᵀ Ω̂_DC X` for a directed layer, `Ω̂_DC = eeᵀ ∘ 1[{i,j}∩{k,l} ≠ ∅]`.
pub fn dc_meat(x: &DMatrix<f64>, residuals: &[f64], n: usize) -> Result<DMatrix<f64>> {
    require_directed_layer(x.nrows(), n, "design rows")?;
    require_directed_layer(residuals.len(), n, "residual length")?;
    Ok(dc_meat_pooled(&weighted_rows(x, residuals), Layout::directed(n)))
}

/// HC0 meat `Σ e_a² x_a x_aᵀ`.
pub fn hc_meat(x: &DMatrix<f64>, residuals: &[f64]) -> Result<DMatrix<f64>> {
    if x.nrows() != residuals.len() {
        return Err(Error::DimensionMismatch {
            context: "residual length",
            expected: x.nrows(),
            actual: residuals.len(),
        });
    }
    let w = weighted_rows(x, residuals);
    Ok(w.transpose() * w)
}

/// Symmetrize in place by `(M + Mᵀ)/2`.
pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `B M B` for a precomputed bread `B`.
pub fn sandwich_with_bread(bread: &DMatrix<f64>, meat: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(bread * meat * bread)
}

/// `(XᵀX)⁻¹ M (XᵀX)⁻¹`.
pub fn sandwich_vcov(x: &DMatrix<f64>, meat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if meat.nrows() != x.ncols() || meat.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch {
            context: "meat dimension",
            expected: x.ncols(),
            actual: meat.nrows(),
        });
    }
    Ok(sandwich_with_bread(&bread(x)?, meat))
}

/// HC0 sandwich covariance.
pub fn hc_vcov(x: &DMatrix<f64>, residuals: &[f64]) -> Result<DMatrix<f64>> {
    sandwich_vcov(x, &hc_meat(x, residuals)?)
}

/// Expand undirected residuals (upper-triangle order) into the symmetric
/// `n × n` matrix with zero diagonal.
pub fn undirected_residual_matrix(residuals: &[f64], n: usize) -> Result<DMatrix<f64>> {
    let layout = Layout::new(n, 1, false);
    if residuals.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            context: "undirected residual length",
            expected: layout.len(),
            actual: residuals.len(),
        });
    }
    let mut e = DMatrix::zeros(n, n);
    for (pos, d) in layout.dyads().enumerate() {
        e[(d.i, d.j)] = residuals[pos];
        e[(d.j, d.i)] = residuals[pos];
    }
    Ok(e)
}

/// Undirected `(θ̂, φ̂)` from the symmetric zero-diagonal residual matrix:
/// `θ̂ = tr(EE)/(n(n−1))`, `φ̂ = (1ᵀEE1 − tr(EE))/(n(n−1)(n−2))`.
pub fn estimate_undirected_params(e: &DMatrix<f64>) -> Result<UndirectedParams> {
    let n = e.nrows();
    if e.ncols() != n {
        return Err(Error::InvalidResiduals("residual matrix is not square".into()));
    }
    if n < 3 {
        return Err(Error::InsufficientActors {
            required: 3,
            actual: n,
        });
    }
    let scale = e.abs().max().max(f64::MIN_POSITIVE);
    for i in 0..n {
        if e[(i, i)] != 0.0 {
            return Err(Error::InvalidResiduals(format!("nonzero diagonal at {i}")));
        }
        for j in (i + 1)..n {
            if (e[(i, j)] - e[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidResiduals(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    let ee = e * e;
    let tr = ee.trace();
    let total = ee.sum();
    let nf = n as f64;
    Ok(UndirectedParams {
        theta: tr / (nf * (nf - 1.0)),
        phi: (total - tr) / undirected_shared_count(n) as f64,
    })
}

/// `Xᵀ Ω̂ X` for an undirected layer with `Ω̂ = θ I + φ S_shared`.
pub fn undirected_exch_meat(x: &DMatrix<f64>, params: &UndirectedParams, n: usize) -> Result<DMatrix<f64>> {
    let m = Layout::new(n, 1, false).len();
    if x.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "design rows",
            expected: m,
            actual: x.nrows(),
        });
    }
    Ok(UndirectedForms::new(x.rows(0, m), x.rows(0, m), n).combine(params.theta, params.phi))
}

/// Undirected DC meat.
pub fn undirected_dc_meat(x: &DMatrix<f64>, residuals: &[f64], n: usize) -> Result<DMatrix<f64>> {
    let layout = Layout::new(n, 1, false);
    if x.nrows() != layout.len() || residuals.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            context: "undirected rows",
            expected: layout.len(),
            actual: x.nrows().min(residuals.len()),
        });
    }
    Ok(dc_meat_pooled(&weighted_rows(x, residuals), layout))
}

/// Expected configuration counts as floats, for divisors.
pub(crate) fn counts_f64(n: usize) -> [f64; 6] {
    config_counts(n).map(|c| c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::classify_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_omega(n: usize, f: impl Fn(usize, usize, crate::relational::PairConfig) -> f64) -> DMatrix<f64> {
        let l = Layout::directed(n);
        let m = l.len();
        DMatrix::from_fn(m, m, |a, b| f(a, b, classify_pair(l.dyad(a), l.dyad(b))))
    }

    fn rand_vec(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_residuals_give_zero_params() {
        let p = estimate_exch_params(&[0.0; 12], 4).unwrap();
        assert_eq!(p, ExchParams::default());
    }

    #[test]
    fn n3_worked_example() {
        // E = [[., 1, 2], [3, ., 4], [5, 6, .]] in canonical order.
        let e = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let p = estimate_exch_params(&e, 3).unwrap();
        assert!((p.sigma2 - 91.0 / 6.0).abs() < 1e-12);
        // Reciprocal products summed over ordered dyads: 2(1·3 + 2·5 + 4·6) / 6.
        assert!((p.phi_a - 37.0 / 3.0).abs() < 1e-12);
        // Brute force over classified pairs.
        let l = Layout::directed(3);
        let mut sums = [0.0; 6];
        let mut counts = [0.0; 6];
        for (a, da) in l.dyads().enumerate() {
            for (b, db) in l.dyads().enumerate() {
                let s = classify_pair(da, db).slot();
                sums[s] += e[a] * e[b];
                counts[s] += 1.0;
            }
        }
        assert!((p.phi_b - sums[2] / counts[2]).abs() < 1e-12);
        assert!((p.phi_c - sums[3] / counts[3]).abs() < 1e-12);
        assert!((p.phi_d - sums[4] / counts[4]).abs() < 1e-12);
    }

    #[test]
    fn rejects_too_few_actors() {
        assert!(matches!(
            estimate_exch_params(&[1.0, 2.0], 2),
            Err(Error::InsufficientActors { .. })
        ));
    }

    #[test]
    fn exch_meat_identity_and_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(20, 2, |_, _| rng.random_range(-1.0..1.0));
        let m = exch_meat(&x, &ExchParams::iid(1.0), 5).unwrap();
        assert!((m - x.transpose() * &x).abs().max() < 1e-12);

        let ones = DMatrix::from_element(12, 1, 1.0);
        let m = exch_meat(&ones, &ExchParams::new(0.0, 1.0, 0.0, 0.0, 0.0), 4).unwrap();
        assert!((m[(0, 0)] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn meats_match_dense_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 3..=6 {
            let m = n * (n - 1);
            let x = DMatrix::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0));
            let e = rand_vec(m, &mut rng);
            let params = ExchParams::new(1.3, 0.4, -0.2, 0.3, 0.1);
            let s = params.six();
            let omega = dense_omega(n, |_, _, c| s[c.slot()]);
            let expect = x.transpose() * &omega * &x;
            assert!((exch_meat(&x, &params, n).unwrap() - &expect).abs().max() < 1e-10);

            let omega_dc = dense_omega(n, |a, b, c| if c.shares_actor() { e[a] * e[b] } else { 0.0 });
            let expect = x.transpose() * &omega_dc * &x;
            assert!((dc_meat(&x, &e, n).unwrap() - expect).abs().max() < 1e-10);

            let omega_hc = DMatrix::from_diagonal(&DVector::from_iterator(m, e.iter().map(|v| v * v)));
            let expect = x.transpose() * &omega_hc * &x;
            assert!((hc_meat(&x, &e).unwrap() - expect).abs().max() < 1e-10);
        }
    }

    #[test]
    fn dc_single_residual_intercept() {
        let mut e = vec![0.0; 12];
        e[Layout::directed(4).position(DyadIndex::pair(1, 2)).unwrap()] = 1.0;
        let x = DMatrix::from_element(12, 1, 1.0);
        let m = dc_meat(&x, &e, 4).unwrap();
        assert!((m[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(dc_meat(&x, &[0.0; 12], 4).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn sandwich_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
        let xtx = x.transpose() * &x;
        let inv = xtx.clone().try_inverse().unwrap();
        let v = sandwich_vcov(&x, &xtx).unwrap();
        assert!((v - &inv).abs().max() < 1e-10);
        let z = sandwich_vcov(&x, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(z.abs().max(), 0.0);
        let c = 1.7;
        let hc = hc_vcov(&x, &[c; 20]).unwrap();
        assert!((hc - inv * (c * c)).abs().max() < 1e-10);
    }

    #[test]
    fn singular_design_reports_columns() {
        let x = DMatrix::from_fn(12, 3, |r, c| if c == 2 { 2.0 } else if c == 0 { 1.0 } else { r as f64 });
        match bread(&x) {
            Err(Error::SingularDesign { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ols_noiseless_and_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(30, 4, |_, c| if c == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let y = &x * DVector::from_element(4, 1.0);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.beta_hat.add_scalar(-1.0)).abs().max() < 1e-12);
        assert!(fit.residuals.abs().max() < 1e-12);

        let ones = DMatrix::from_element(6, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0]);
        let fit = ols(&ones, &y).unwrap();
        assert!((fit.beta_hat[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn undirected_params_examples() {
        let z = DMatrix::zeros(4, 4);
        assert_eq!(estimate_undirected_params(&z).unwrap(), UndirectedParams::default());
        let mut e = DMatrix::zeros(3, 3);
        e[(0, 1)] = 1.0;
        e[(1, 0)] = 1.0;
        let p = estimate_undirected_params(&e).unwrap();
        assert!((p.theta - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.phi, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let mut e = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random_range(-1.0..1.0);
                e[(i, j)] = v;
                e[(j, i)] = v;
            }
        }
        // Brute force: mean of e_ij e_ik over ordered pairs of distinct
        // unordered dyads sharing exactly one actor.
        let dyads: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let (mut sum, mut count) = (0.0, 0.0);
        for &(a, b) in &dyads {
            for &(c, d) in &dyads {
                let shared = [a, b].iter().filter(|t| **t == c || **t == d).count();
                if shared == 1 {
                    sum += e[(a, b)] * e[(c, d)];
                    count += 1.0;
                }
            }
        }
        let p = estimate_undirected_params(&e).unwrap();
        assert!((p.phi - sum / count).abs() < 1e-12);

        let mut bad = e.clone();
        bad[(0, 1)] += 1.0;
        assert!(estimate_undirected_params(&bad).is_err());
        let mut bad = e;
        bad[(2, 2)] = 1.0;
        assert!(estimate_undirected_params(&bad).is_err());
    }

    #[test]
    fn undirected_dc_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 5;
        let l = Layout::new(n, 1, false);
        let m = l.len();
        let x = DMatrix::from_fn(m, 2, |_, _| rng.random_range(-1.0..1.0));
        let e = rand_vec(m, &mut rng);
        let omega = DMatrix::from_fn(m, m, |a, b| {
            let (da, db) = (l.dyad(a), l.dyad(b));
            let overlap = da.i == db.i || da.i == db.j || da.j == db.i || da.j == db.j;
            if overlap {
                e[a] * e[b]
            } else {
                0.0
            }
        });
        let expect = x.transpose() * omega * &x;
        assert!((undirected_dc_meat(&x, &e, n).unwrap() - expect).abs().max() < 1e-12);
    }
}
