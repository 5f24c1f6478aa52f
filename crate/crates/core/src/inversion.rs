//! Constant-cost inversion of exchangeable covariance patterns and
//! positive-definiteness screens.
//!
//! The inverse of a directed exchangeable pattern has the same six-slot
//! structure (including a generally nonzero disjoint slot), and its slot
//! values solve a 6 × 6 linear system `C(φ, n) p = e₁` whose size does not
//! depend on `n`.

use nalgebra::{DMatrix, DVector, Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::array::{ArrayExchParams, ArrayStructure};
use crate::error::{Error, Result};
use crate::estimators::ExchParams;
use crate::forms::apply_pattern;
use crate::relational::{classify_pair, Layout};

/// Six slot values `(Same, Reciprocal, CommonReceiver, CommonSender,
/// SenderReceiver, Disjoint)` of an exchangeable pattern or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SixParams(pub [f64; 6]);

impl SixParams {
    pub fn identity() -> Self {
        Self([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.map(|v| v * c))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<ExchParams> for SixParams {
    fn from(p: ExchParams) -> Self {
        Self(p.six())
    }
}

/// The 6 × 6 matrix `C(φ, n)` with `(C p)_r = (Ω(φ) Ω(p))` evaluated at a
/// representative dyad pair of configuration `r`.
pub fn build_c_matrix(phi: &SixParams, n: usize) -> Matrix6<f64> {
    let [f1, f2, f3, f4, f5, f6] = phi.0;
    let n = n as f64;
    let (n2, n3, n4, n5) = (n - 2.0, n - 3.0, n - 4.0, n - 5.0);
    Matrix6::from_row_slice(&[
        // Same
        f1,
        f2,
        n2 * f3,
        n2 * f4,
        2.0 * n2 * f5,
        n2 * n3 * f6,
        // Reciprocal
        f2,
        f1,
        n2 * f5,
        n2 * f5,
        n2 * (f3 + f4),
        n2 * n3 * f6,
        // CommonReceiver
        f3,
        f5,
        f1 + n3 * f3,
        f5 + n3 * f6,
        f2 + f4 + n3 * (f5 + f6),
        n3 * (f4 + f5 + n4 * f6),
        // CommonSender
        f4,
        f5,
        f5 + n3 * f6,
        f1 + n3 * f4,
        f2 + f3 + n3 * (f5 + f6),
        n3 * (f3 + f5 + n4 * f6),
        // SenderReceiver
        f5,
        f4,
        f2 + n3 * f5,
        f3 + n3 * f6,
        f1 + f5 + n3 * (f4 + f6),
        n3 * (f3 + f5 + n4 * f6),
        // Disjoint
        f6,
        f6,
        f4 + f5 + n4 * f6,
        f3 + f5 + n4 * f6,
        f3 + f4 + 2.0 * f5 + 2.0 * n4 * f6,
        f1 + f2 + n4 * (f3 + f4 + 2.0 * f5 + n5 * f6),
    ])
}

/// Reciprocal condition number below which a slot system counts as singular.
const SINGULAR_RCOND: f64 = 1e-13;

fn solve_small(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !max.is_finite() || max == 0.0 || min / max < SINGULAR_RCOND {
        return Err(Error::NotInvertible(format!(
            "slot system reciprocal condition {:.3e}",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::NotInvertible("singular slot system".into()))
}

fn unit(len: usize) -> DVector<f64> {
    let mut b = DVector::zeros(len);
    b[0] = 1.0;
    b
}

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InsufficientActors {
            required: 3,
            actual: n,
        });
    }
    Ok(())
}

/// Slots of `Ω_E⁻¹` for a directed single-layer exchangeable covariance.
pub fn invert_exch(params: &ExchParams, n: usize) -> Result<SixParams> {
    invert_six(&SixParams::from(*params), n)
}

/// Slots of `Ω(φ)⁻¹` for an arbitrary six-slot pattern.
pub fn invert_six(phi: &SixParams, n: usize) -> Result<SixParams> {
    check_n(n)?;
    if !phi.is_finite() {
        return Err(Error::InvalidParameter("non-finite covariance parameters".into()));
    }
    if n < CLOSED_FORM_MIN_N {
        let inv = dense_inverse(dense_pattern(phi, n))?;
        return Ok(row_slots(&inv, n, 0));
    }
    let c = build_c_matrix(phi, n);
    let p = solve_small(DMatrix::from_fn(6, 6, |i, j| c[(i, j)]), unit(6))?;
    Ok(SixParams(std::array::from_fn(|k| p[k])))
}

/// Smallest `n` for which the closed-form slot system is used; smaller
/// patterns are inverted densely.
pub const CLOSED_FORM_MIN_N: usize = 6;

fn dense_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sv = m.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if !max.is_finite() || max == 0.0 || min / max < SINGULAR_RCOND {
        return Err(Error::NotInvertible("covariance matrix is singular".into()));
    }
    m.try_inverse()
        .ok_or_else(|| Error::NotInvertible("covariance matrix is singular".into()))
}

/// Slot values read off the first row of a materialized pattern, against
/// the dyads of the layer starting at column `offset`.
fn row_slots(m: &DMatrix<f64>, n: usize, offset: usize) -> SixParams {
    let l = Layout::directed(n);
    let mut out = [0.0; 6];
    for (b, db) in l.dyads().enumerate() {
        out[classify_pair(l.dyad(0), db).slot()] = m[(0, offset + b)];
    }
    SixParams(out)
}

/// Inverse slots `(p_within, p_cross)` of a full-exchangeable array
/// covariance, from the coupled 12 × 12 system
///
/// ```text
/// C(φ₁) p₁ + (R−1) C(φ₂) p₂ = e₁
/// C(φ₂) p₁ + C(φ₁) p₂ + (R−2) C(φ₂) p₂ = 0
/// ```
pub fn invert_array_exch(params: &ArrayExchParams, n: usize) -> Result<(SixParams, SixParams)> {
    check_n(n)?;
    let layers = params.layers;
    if layers < 2 {
        return Err(Error::InsufficientLayers {
            required: 2,
            actual: layers,
        });
    }
    let (phi1, phi2) = params.full_exch_six()?;
    if params.structure == ArrayStructure::LayerIndependent {
        return Ok((invert_six(&SixParams(phi1), n)?, SixParams::default()));
    }
    invert_block_pair(&SixParams(phi1), &SixParams(phi2), n, layers)
}

/// Inverse of the block pattern with `phi1` on the diagonal blocks and
/// `phi2` on every off-diagonal block.
pub fn invert_block_pair(phi1: &SixParams, phi2: &SixParams, n: usize, layers: usize) -> Result<(SixParams, SixParams)> {
    check_n(n)?;
    if n < CLOSED_FORM_MIN_N {
        let inv = dense_inverse(dense_block_pair(phi1, phi2, n, layers))?;
        let m = n * (n - 1);
        return Ok((row_slots(&inv, n, 0), row_slots(&inv, n, m)));
    }
    let c1 = build_c_matrix(phi1, n);
    let c2 = build_c_matrix(phi2, n);
    let r = layers as f64;
    let mut a = DMatrix::<f64>::zeros(12, 12);
    a.fixed_view_mut::<6, 6>(0, 0).copy_from(&c1);
    a.fixed_view_mut::<6, 6>(0, 6).copy_from(&(c2 * (r - 1.0)));
    a.fixed_view_mut::<6, 6>(6, 0).copy_from(&c2);
    a.fixed_view_mut::<6, 6>(6, 6).copy_from(&(c1 + c2 * (r - 2.0)));
    let p = solve_small(a, unit(12))?;
    Ok((
        SixParams(std::array::from_fn(|k| p[k])),
        SixParams(std::array::from_fn(|k| p[6 + k])),
    ))
}

/// `Ω(p) v` for a single directed layer in `O(n²)`.
pub fn apply_inverse(p: &SixParams, v: &[f64], n: usize) -> Result<DVector<f64>> {
    let m = n * n.saturating_sub(1);
    if v.len() != m {
        return Err(Error::DimensionMismatch {
            context: "vector length",
            expected: m,
            actual: v.len(),
        });
    }
    Ok(apply_pattern(&p.0, v, n))
}

/// Block pattern `(p1 on the diagonal, p2 off it)` applied to a stacked
/// directed array: `(P₁ − P₂) v_r + P₂ Σ_s v_s`.
pub fn apply_block_pair(p1: &SixParams, p2: &SixParams, v: &[f64], n: usize, layers: usize) -> Result<DVector<f64>> {
    let m = n * n.saturating_sub(1);
    if v.len() != m * layers {
        return Err(Error::DimensionMismatch {
            context: "array vector length",
            expected: m * layers,
            actual: v.len(),
        });
    }
    let diff = SixParams(std::array::from_fn(|k| p1.0[k] - p2.0[k]));
    let mut total = vec![0.0; m];
    for r in 0..layers {
        for (acc, x) in total.iter_mut().zip(&v[r * m..(r + 1) * m]) {
            *acc += x;
        }
    }
    let common = apply_pattern(&p2.0, &total, n);
    let mut out = DVector::zeros(m * layers);
    for r in 0..layers {
        let own = apply_pattern(&diff.0, &v[r * m..(r + 1) * m], n);
        out.rows_mut(r * m, m).copy_from(&(own + &common));
    }
    Ok(out)
}

/// Materialize the `n(n−1) × n(n−1)` pattern matrix. Intended for small `n`.
pub fn dense_pattern(p: &SixParams, n: usize) -> DMatrix<f64> {
    let l = Layout::directed(n);
    let m = l.len();
    DMatrix::from_fn(m, m, |a, b| p.0[classify_pair(l.dyad(a), l.dyad(b)).slot()])
}

/// Materialize a block pattern over `layers` stacked layers.
pub fn dense_block_pair(p1: &SixParams, p2: &SixParams, n: usize, layers: usize) -> DMatrix<f64> {
    let d1 = dense_pattern(p1, n);
    let d2 = dense_pattern(p2, n);
    let m = d1.nrows();
    let mut out = DMatrix::zeros(m * layers, m * layers);
    for r in 0..layers {
        for s in 0..layers {
            let src = if r == s { &d1 } else { &d2 };
            out.view_mut((r * m, s * m), (m, m)).copy_from(src);
        }
    }
    out
}

/// An eigenvalue with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub value: f64,
    pub multiplicity: usize,
}

/// Outcome of a positive-definiteness screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdCheck {
    pub positive_definite: bool,
    pub eigenvalues: Vec<Eigenvalue>,
    /// The closed-form `±` pair had a negative discriminant; the verdict
    /// comes from a numerical eigencheck instead.
    pub complex_pair: bool,
}

impl PdCheck {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.value)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Closed-form spectrum of the undirected exchangeable correlation matrix
/// with shared-actor correlation `a`; positive definite iff
/// `a ∈ (−1/(2(n−2)), 1/2)`.
pub fn check_pd_undirected(a: f64, n: usize) -> Result<PdCheck> {
    if n < 4 {
        return Err(Error::InsufficientActors {
            required: 4,
            actual: n,
        });
    }
    let nf = n as f64;
    let eigenvalues = vec![
        Eigenvalue {
            value: 1.0 + 2.0 * (nf - 2.0) * a,
            multiplicity: 1,
        },
        Eigenvalue {
            value: 1.0 - 2.0 * a,
            multiplicity: n * (n - 3) / 2,
        },
        Eigenvalue {
            value: 1.0 + (nf - 4.0) * a,
            multiplicity: n - 1,
        },
    ];
    Ok(PdCheck {
        positive_definite: eigenvalues.iter().all(|e| e.value > 0.0),
        eigenvalues,
        complex_pair: false,
    })
}

/// Largest `n(n−1)` for which a dense eigendecomposition is used as the
/// numerical fallback.
const DENSE_FALLBACK_MAX: usize = 1000;

fn numeric_eigenvalues(six: &SixParams, n: usize) -> Vec<Eigenvalue> {
    if n * (n - 1) <= DENSE_FALLBACK_MAX {
        let eig = SymmetricEigen::new(dense_pattern(six, n)).eigenvalues;
        let mut vals: Vec<f64> = eig.iter().copied().collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        let mut out: Vec<Eigenvalue> = Vec::new();
        for v in vals {
            match out.last_mut() {
                Some(last) if (last.value - v).abs() <= 1e-9 * (1.0 + v.abs()) => last.multiplicity += 1,
                _ => out.push(Eigenvalue {
                    value: v,
                    multiplicity: 1,
                }),
            }
        }
        out
    } else {
        // The spectrum of Ω is contained in that of C(φ, n).
        build_c_matrix(six, n)
            .complex_eigenvalues()
            .iter()
            .map(|z| Eigenvalue {
                value: if z.im.abs() > 1e-9 { f64::NEG_INFINITY } else { z.re },
                multiplicity: 0,
            })
            .collect()
    }
}

/// Closed-form spectrum of the directed exchangeable correlation matrix with
/// correlations `a` (reciprocal), `b` (common receiver), `c` (common sender)
/// and `d` (sender/receiver).
pub fn check_pd_directed(a: f64, b: f64, c: f64, d: f64, n: usize) -> Result<PdCheck> {
    if n < 5 {
        return Err(Error::InsufficientActors {
            required: 5,
            actual: n,
        });
    }
    let nf = n as f64;
    let half = (n - 1) * (n - 2) / 2;
    let alpha = (c * c + b * b) * (nf * nf - 2.0 * nf + 1.0)
        + 4.0 * d * d * (nf * nf - 6.0 * nf + 9.0)
        + 2.0 * b * c * (1.0 - nf * nf + 2.0 * nf);
    let beta = a * d * (8.0 * nf - 24.0) + (b + c) * d * (12.0 - 4.0 * nf) + 4.0 * a * (a - (b + c));
    let disc = alpha + beta;
    let centre = ((nf - 3.0) * (b + c) - 2.0 * d + 2.0) / 2.0;
    if disc < 0.0 {
        let eigenvalues = numeric_eigenvalues(&SixParams([1.0, a, b, c, d, 0.0]), n);
        return Ok(PdCheck {
            positive_definite: eigenvalues.iter().all(|e| e.value > 0.0),
            eigenvalues,
            complex_pair: true,
        });
    }
    let root = disc.sqrt() / 2.0;
    let eigenvalues = vec![
        Eigenvalue {
            value: 1.0 + a + (nf - 2.0) * (b + c) + 2.0 * (nf - 2.0) * d,
            multiplicity: 1,
        },
        Eigenvalue {
            value: 1.0 + a - (b + c + 2.0 * d),
            multiplicity: half - 1,
        },
        Eigenvalue {
            value: 1.0 - (a + b + c) + 2.0 * d,
            multiplicity: half,
        },
        Eigenvalue {
            value: centre + root,
            multiplicity: n - 1,
        },
        Eigenvalue {
            value: centre - root,
            multiplicity: n - 1,
        },
    ];
    Ok(PdCheck {
        positive_definite: eigenvalues.iter().all(|e| e.value > 0.0),
        eigenvalues,
        complex_pair: false,
    })
}

/// Closed-form screens whose smallest eigenvalue lies this close to zero are
/// re-checked numerically.
const PD_MARGIN: f64 = 1e-6;

/// Whether the five-slot pattern (disjoint slot zero) is positive definite.
pub fn is_positive_definite(slots: [f64; 5], n: usize) -> bool {
    let s0 = slots[0];
    if !(s0 > 0.0) || slots.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let six = SixParams([s0, slots[1], slots[2], slots[3], slots[4], 0.0]);
    if n < 5 {
        return numeric_eigenvalues(&six, n).iter().all(|e| e.value > 0.0);
    }
    let corr = |v: f64| v / s0;
    match check_pd_directed(corr(slots[1]), corr(slots[2]), corr(slots[3]), corr(slots[4]), n) {
        Ok(check) if check.complex_pair => check.positive_definite,
        Ok(check) => {
            let min = check.min_eigenvalue();
            if min.abs() <= PD_MARGIN {
                let corr_six = six.scale(1.0 / s0);
                numeric_eigenvalues(&corr_six, n).iter().all(|e| e.value > 0.0)
            } else {
                min > 0.0
            }
        }
        Err(_) => false,
    }
}

/// Maximum number of halvings before covariances are zeroed outright.
const MAX_SHRINKS: usize = 60;

/// Halve the covariances until the exchangeable pattern is positive
/// definite. Returns the adjusted parameters and the number of halvings.
pub fn enforce_pd(params: &ExchParams, n: usize) -> Result<(ExchParams, usize)> {
    if !(params.sigma2 > 0.0) {
        return Err(Error::NotInvertible(format!(
            "variance {} is not positive",
            params.sigma2
        )));
    }
    let mut current = *params;
    for shrinks in 0..=MAX_SHRINKS {
        if is_positive_definite(current.slots(), n) {
            return Ok((current, shrinks));
        }
        current = current.shrink_covariances(0.5);
    }
    Ok((ExchParams::iid(params.sigma2), MAX_SHRINKS + 1))
}

/// Whether a full-exchangeable array covariance is positive definite. Its
/// spectrum is that of `Ω₁ − Ω₂` together with `Ω₁ + (R−1)Ω₂`.
pub fn is_array_positive_definite(params: &ArrayExchParams, n: usize) -> Result<bool> {
    let (w, c) = params.full_exch_six()?;
    let r = params.layers as f64;
    let diff: [f64; 5] = std::array::from_fn(|k| w[k] - c[k]);
    let sum: [f64; 5] = std::array::from_fn(|k| w[k] + (r - 1.0) * c[k]);
    Ok(is_positive_definite(diff, n) && is_positive_definite(sum, n))
}

/// Array analogue of [`enforce_pd`]: halves every covariance (within-layer
/// covariances and all cross-layer slots), keeping the variance.
pub fn enforce_array_pd(params: &ArrayExchParams, n: usize) -> Result<(ArrayExchParams, usize)> {
    let sigma2 = params.blocks[0].sigma2;
    if !(sigma2 > 0.0) {
        return Err(Error::NotInvertible(format!("variance {sigma2} is not positive")));
    }
    let mut current = params.clone();
    for shrinks in 0..=MAX_SHRINKS {
        if is_array_positive_definite(&current, n)? {
            return Ok((current, shrinks));
        }
        current.blocks[0] = current.blocks[0].shrink_covariances(0.5);
        for b in current.blocks.iter_mut().skip(1) {
            *b = b.scale(0.5);
        }
    }
    let mut zeroed = params.clone();
    zeroed.blocks[0] = ExchParams::iid(sigma2);
    for b in zeroed.blocks.iter_mut().skip(1) {
        *b = ExchParams::default();
    }
    Ok((zeroed, MAX_SHRINKS + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use nalgebra::SVector;
    use rand_chacha::ChaCha8Rng;

    fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> ExchParams {
        loop {
            let s = rng.random_range(0.5..3.0);
            let p = ExchParams::new(
                s,
                s * rng.random_range(-0.4..0.4),
                s * rng.random_range(-0.1..0.2),
                s * rng.random_range(-0.1..0.2),
                s * rng.random_range(-0.1..0.1),
            );
            let dense = dense_pattern(&p.into(), n);
            if SymmetricEigen::new(dense).eigenvalues.min() > 1e-3 {
                return p;
            }
        }
    }

    #[test]
    fn c_matrix_identity_and_first_row() {
        let c = build_c_matrix(&SixParams::identity(), 7);
        assert_eq!(c, Matrix6::identity());
        let phi = SixParams([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let n = 6.0;
        let c = build_c_matrix(&phi, 6);
        let row: Vec<f64> = c.row(0).iter().copied().collect();
        assert_eq!(
            row,
            vec![1.0, 2.0, (n - 2.0) * 3.0, (n - 2.0) * 4.0, 2.0 * (n - 2.0) * 5.0, (n - 2.0) * (n - 3.0) * 6.0]
        );
    }

    fn slots_of(m: &DMatrix<f64>, n: usize) -> SixParams {
        let l = Layout::directed(n);
        let mut out = [0.0; 6];
        for (b, db) in l.dyads().enumerate() {
            out[classify_pair(l.dyad(0), db).slot()] = m[(0, b)];
        }
        SixParams(out)
    }

    #[test]
    fn c_matrix_maps_square_to_cube() {
        // Ω(φ)² is again a pattern, so C(φ) applied to its slots must give
        // the slots of Ω(φ)³. Pins the slot ↔ configuration mapping.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 4..=7 {
            let phi = SixParams(std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
            let d = dense_pattern(&phi, n);
            let sq = &d * &d;
            let cube = slots_of(&(&sq * &d), n);
            let cp = build_c_matrix(&phi, n) * SVector::<f64, 6>::from_column_slice(&slots_of(&sq, n).0);
            for k in 0..6 {
                assert!((cp[k] - cube.0[k]).abs() < 1e-9, "n={n} slot={k}");
            }
        }
    }

    #[test]
    fn identity_inverts_to_identity() {
        for n in 3..8 {
            let p = invert_exch(&ExchParams::iid(1.0), n).unwrap();
            for (k, v) in p.0.iter().enumerate() {
                let expect = if k == 0 { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn inverse_matches_dense_small_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 3..=8 {
            for _ in 0..5 {
                let params = random_pd(&mut rng, n);
                let p = invert_exch(&params, n).unwrap();
                let dense_inv = dense_pattern(&params.into(), n).try_inverse().unwrap();
                let diff = (dense_pattern(&p, n) - dense_inv).abs().max();
                assert!(diff < 1e-8, "n={n} diff={diff}");
            }
        }
    }

    #[test]
    fn closed_form_also_exact_below_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for n in 4..CLOSED_FORM_MIN_N {
            let params = random_pd(&mut rng, n);
            let c = build_c_matrix(&params.into(), n);
            let p = solve_small(DMatrix::from_fn(6, 6, |i, j| c[(i, j)]), unit(6)).unwrap();
            let dense = invert_exch(&params, n).unwrap();
            for k in 0..6 {
                assert!((p[k] - dense.0[k]).abs() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn block_inverse_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for (n, layers) in [(4, 2), (5, 3), (6, 2), (7, 3)] {
            let within = random_pd(&mut rng, n);
            let cross = within.scale(0.3);
            let arr = ArrayExchParams::full_exch(layers, within, cross);
            let (p1, p2) = invert_array_exch(&arr, n).unwrap();
            let dense_inv = dense_block_pair(&within.into(), &cross.into(), n, layers)
                .try_inverse()
                .unwrap();
            let diff = (dense_block_pair(&p1, &p2, n, layers) - dense_inv).abs().max();
            assert!(diff < 1e-8, "n={n} R={layers} diff={diff}");
            let v: Vec<f64> = (0..n * (n - 1) * layers).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = apply_block_pair(&p1, &p2, &v, n, layers).unwrap();
            let slow = dense_block_pair(&p1, &p2, n, layers) * DVector::from_column_slice(&v);
            assert!((fast - slow).abs().max() < 1e-10);
        }
    }

    #[test]
    fn homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = random_pd(&mut rng, 7);
        let p = invert_exch(&params, 7).unwrap();
        let q = invert_exch(&params.scale(4.0), 7).unwrap();
        for k in 0..6 {
            assert!((q.0[k] - p.0[k] / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        // Ω = J − I pattern with σ² = 0 on n = 4 is singular.
        assert!(matches!(
            invert_exch(&ExchParams::default(), 5),
            Err(Error::NotInvertible(_))
        ));
    }

    #[test]
    fn apply_inverse_identity_and_zero() {
        let v: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let out = apply_inverse(&SixParams::identity(), &v, 5).unwrap();
        assert_eq!(out.as_slice(), v.as_slice());
        let z = apply_inverse(&SixParams([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), &[0.0; 20], 5).unwrap();
        assert_eq!(z.abs().max(), 0.0);
        assert!(apply_inverse(&SixParams::identity(), &v[..19], 5).is_err());
    }

    #[test]
    fn block_inverse_reduces_when_cross_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let params = random_pd(&mut rng, 6);
        let arr = ArrayExchParams::full_exch(3, params, ExchParams::default());
        let (p1, p2) = invert_array_exch(&arr, 6).unwrap();
        let single = invert_exch(&params, 6).unwrap();
        for k in 0..6 {
            assert!((p1.0[k] - single.0[k]).abs() < 1e-12);
            assert!(p2.0[k].abs() < 1e-12);
        }
    }

    #[test]
    fn undirected_eigen_table_example() {
        let c = check_pd_undirected(0.4, 5).unwrap();
        let vals: Vec<(f64, usize)> = c.eigenvalues.iter().map(|e| (e.value, e.multiplicity)).collect();
        let expect = [(3.4, 1), (0.2, 5), (1.4, 4)];
        for ((v, m), (ev, em)) in vals.iter().zip(expect) {
            assert!((v - ev).abs() < 1e-12);
            assert_eq!(*m, em);
        }
        assert!(c.positive_definite);
        let z = check_pd_undirected(0.0, 6).unwrap();
        assert!(z.eigenvalues.iter().all(|e| e.value == 1.0));
    }

    #[test]
    fn directed_multiplicities_sum() {
        for n in 5..12 {
            let c = check_pd_directed(0.0, 0.0, 0.0, 0.0, n).unwrap();
            assert_eq!(c.eigenvalues.iter().map(|e| e.multiplicity).sum::<usize>(), n * (n - 1));
            assert!(c.eigenvalues.iter().all(|e| (e.value - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn enforce_pd_shrinks_until_pd() {
        let bad = ExchParams::new(1.0, 0.9, 0.6, 0.6, 0.6);
        assert!(!is_positive_definite(bad.slots(), 8));
        let (fixed, shrinks) = enforce_pd(&bad, 8).unwrap();
        assert!(shrinks > 0);
        assert!(is_positive_definite(fixed.slots(), 8));
        assert_eq!(fixed.sigma2, 1.0);
        let good = ExchParams::new(1.0, 0.1, 0.05, 0.05, 0.02);
        assert_eq!(enforce_pd(&good, 8).unwrap(), (good, 0));
    }
}
