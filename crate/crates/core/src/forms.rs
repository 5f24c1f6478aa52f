//! Matrix-free aggregation identities for exchangeable patterns.
//!
//! Every exchangeable covariance pattern over one directed layer is a linear
//! combination of six 0/1 matrices `S_c`, one per [`PairConfig`]. The
//! quadratic (and bilinear) forms `Xᵀ S_c Y` can be written in terms of
//! actor-level row sums `R_t = Σ_j x_tj`, column sums `C_t = Σ_i x_it` and
//! the reciprocal cross term `T = Σ x_ij y_jiᵀ`, so nothing of size
//! `n(n-1) × n(n-1)` is ever built:
//!
//! - common sender:   `Σ_t R_t R'_tᵀ − XᵀY`
//! - common receiver: `Σ_t C_t C'_tᵀ − XᵀY`
//! - sender/receiver: `Σ_t (R_t C'_tᵀ + C_t R'_tᵀ) − 2T`

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::relational::{Layout, PairConfig};

/// Actor-level row and column sums of a design block (`n × p` each).
struct ActorSums {
    rows: DMatrix<f64>,
    cols: DMatrix<f64>,
}

fn actor_sums(x: &DMatrixView<'_, f64>, n: usize) -> ActorSums {
    let p = x.ncols();
    let mut rows = DMatrix::zeros(n, p);
    let mut cols = DMatrix::zeros(n, p);
    for c in 0..p {
        let col = x.column(c);
        let mut pos = 0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = col[pos];
                rows[(i, c)] += v;
                cols[(j, c)] += v;
                pos += 1;
            }
        }
    }
    ActorSums { rows, cols }
}

/// Rows of `x` reordered so that row `(i, j)` holds the entry of `(j, i)`.
fn reciprocal_rows(x: &DMatrixView<'_, f64>, n: usize) -> DMatrix<f64> {
    let layout = Layout::directed(n);
    let p = x.ncols();
    let mut out = DMatrix::zeros(x.nrows(), p);
    for pos in 0..x.nrows() {
        let src = layout.position_unchecked(layout.dyad(pos).reversed());
        for c in 0..p {
            out[(pos, c)] = x[(src, c)];
        }
    }
    out
}

/// The five forms `Xᵀ S_c Y` for the configurations that share an actor.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternForms {
    pub same: DMatrix<f64>,
    pub reciprocal: DMatrix<f64>,
    pub common_receiver: DMatrix<f64>,
    pub common_sender: DMatrix<f64>,
    pub sender_receiver: DMatrix<f64>,
}

impl PatternForms {
    /// Forms between two directed single-layer blocks over the same `n`
    /// actors, in `O(n²p²)` time and `O(np)` extra memory.
    pub fn directed(left: DMatrixView<'_, f64>, right: DMatrixView<'_, f64>, n: usize) -> Self {
        debug_assert_eq!(left.nrows(), n * (n - 1));
        debug_assert_eq!(right.nrows(), n * (n - 1));
        let same = left.transpose() * right;
        let right_rec = reciprocal_rows(&right, n);
        let reciprocal = left.transpose() * &right_rec;
        let ls = actor_sums(&left, n);
        let rs = actor_sums(&right, n);
        let common_sender = ls.rows.transpose() * &rs.rows - &same;
        let common_receiver = ls.cols.transpose() * &rs.cols - &same;
        let sender_receiver = ls.rows.transpose() * &rs.cols + ls.cols.transpose() * &rs.rows
            - &reciprocal * 2.0;
        Self {
            same,
            reciprocal,
            common_receiver,
            common_sender,
            sender_receiver,
        }
    }

    /// Quadratic forms `Xᵀ S_c X`.
    pub fn quadratic(x: &DMatrix<f64>, n: usize) -> Self {
        let v = x.rows(0, x.nrows());
        Self::directed(v, x.rows(0, x.nrows()), n)
    }

    pub fn get(&self, config: PairConfig) -> Option<&DMatrix<f64>> {
        match config {
            PairConfig::Same => Some(&self.same),
            PairConfig::Reciprocal => Some(&self.reciprocal),
            PairConfig::CommonReceiver => Some(&self.common_receiver),
            PairConfig::CommonSender => Some(&self.common_sender),
            PairConfig::SenderReceiver => Some(&self.sender_receiver),
            PairConfig::Disjoint => None,
        }
    }

    /// `Σ_c w_c Xᵀ S_c Y` with weights in slot order
    /// `(Same, Reciprocal, CommonReceiver, CommonSender, SenderReceiver)`.
    pub fn combine(&self, w: [f64; 5]) -> DMatrix<f64> {
        &self.same * w[0]
            + &self.reciprocal * w[1]
            + &self.common_receiver * w[2]
            + &self.common_sender * w[3]
            + &self.sender_receiver * w[4]
    }

    pub fn transpose(&self) -> Self {
        Self {
            same: self.same.transpose(),
            reciprocal: self.reciprocal.transpose(),
            common_receiver: self.common_receiver.transpose(),
            common_sender: self.common_sender.transpose(),
            sender_receiver: self.sender_receiver.transpose(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            same: &self.same - &other.same,
            reciprocal: &self.reciprocal - &other.reciprocal,
            common_receiver: &self.common_receiver - &other.common_receiver,
            common_sender: &self.common_sender - &other.common_sender,
            sender_receiver: &self.sender_receiver - &other.sender_receiver,
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.same += &other.same;
        self.reciprocal += &other.reciprocal;
        self.common_receiver += &other.common_receiver;
        self.common_sender += &other.common_sender;
        self.sender_receiver += &other.sender_receiver;
    }
}

/// Sums of `e_a f_b` over ordered dyad pairs `(a, b)` in each of the six
/// configurations, indexed by [`PairConfig::slot`]. `e` and `f` are single
/// directed layers.
pub fn pair_sums(e: &[f64], f: &[f64], n: usize) -> [f64; 6] {
    let m = n * (n - 1);
    debug_assert_eq!(e.len(), m);
    debug_assert_eq!(f.len(), m);
    let mut row_e = vec![0.0; n];
    let mut col_e = vec![0.0; n];
    let mut row_f = vec![0.0; n];
    let mut col_f = vec![0.0; n];
    let mut same = 0.0;
    let mut recip = 0.0;
    let layout = Layout::directed(n);
    let mut pos = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            row_e[i] += e[pos];
            col_e[j] += e[pos];
            row_f[i] += f[pos];
            col_f[j] += f[pos];
            same += e[pos] * f[pos];
            let back = layout.position_unchecked(crate::relational::DyadIndex::pair(j, i));
            recip += e[pos] * f[back];
            pos += 1;
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let sender = dot(&row_e, &row_f) - same;
    let receiver = dot(&col_e, &col_f) - same;
    let sr = dot(&row_e, &col_f) + dot(&col_e, &row_f) - 2.0 * recip;
    let total = e.iter().sum::<f64>() * f.iter().sum::<f64>();
    let disjoint = total - same - recip - sender - receiver - sr;
    [same, recip, receiver, sender, sr, disjoint]
}

/// Apply the six-slot directed pattern `Ω(w)` to a single-layer vector in
/// `O(n²)`. Slots are in [`PairConfig::slot`] order.
pub fn apply_pattern(w: &[f64; 6], v: &[f64], n: usize) -> DVector<f64> {
    let m = n * (n - 1);
    debug_assert_eq!(v.len(), m);
    let layout = Layout::directed(n);
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    let mut pos = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            rows[i] += v[pos];
            cols[j] += v[pos];
            pos += 1;
        }
    }
    let total: f64 = rows.iter().sum();
    let mut out = DVector::zeros(m);
    let mut pos = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let vij = v[pos];
            let vji = v[layout.position_unchecked(crate::relational::DyadIndex::pair(j, i))];
            let sender = rows[i] - vij;
            let receiver = cols[j] - vij;
            let sr = cols[i] - vji + rows[j] - vji;
            let disjoint = total - vij - vji - sender - receiver - sr;
            out[pos] = w[0] * vij
                + w[1] * vji
                + w[2] * receiver
                + w[3] * sender
                + w[4] * sr
                + w[5] * disjoint;
            pos += 1;
        }
    }
    out
}

/// Undirected single-layer forms: `XᵀY` and the shared-actor form
/// `Σ_t A_t A'_tᵀ − 2XᵀY`, with `A_t` the sum over dyads containing `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedForms {
    pub same: DMatrix<f64>,
    pub shared: DMatrix<f64>,
}

fn undirected_actor_sums(x: &DMatrixView<'_, f64>, n: usize) -> DMatrix<f64> {
    let p = x.ncols();
    let mut a = DMatrix::zeros(n, p);
    for c in 0..p {
        let col = x.column(c);
        let mut pos = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                a[(i, c)] += col[pos];
                a[(j, c)] += col[pos];
                pos += 1;
            }
        }
    }
    a
}

impl UndirectedForms {
    pub fn new(left: DMatrixView<'_, f64>, right: DMatrixView<'_, f64>, n: usize) -> Self {
        let same = left.transpose() * right;
        let al = undirected_actor_sums(&left, n);
        let ar = undirected_actor_sums(&right, n);
        let shared = al.transpose() * ar - &same * 2.0;
        Self { same, shared }
    }

    pub fn combine(&self, theta: f64, phi: f64) -> DMatrix<f64> {
        &self.same * theta + &self.shared * phi
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            same: &self.same - &other.same,
            shared: &self.shared - &other.shared,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::classify_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn brute_form(x: &DMatrix<f64>, y: &DMatrix<f64>, n: usize, config: PairConfig) -> DMatrix<f64> {
        let l = Layout::directed(n);
        let mut out = DMatrix::zeros(x.ncols(), y.ncols());
        for (a, da) in l.dyads().enumerate() {
            for (b, db) in l.dyads().enumerate() {
                if classify_pair(da, db) == config {
                    out += x.row(a).transpose() * y.row(b);
                }
            }
        }
        out
    }

    #[test]
    fn forms_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 3..=6 {
            let m = n * (n - 1);
            let x = random_matrix(m, 3, &mut rng);
            let y = random_matrix(m, 2, &mut rng);
            let f = PatternForms::directed(x.rows(0, m), y.rows(0, m), n);
            for c in &PairConfig::ALL[..5] {
                let diff = (f.get(*c).unwrap() - brute_form(&x, &y, n, *c)).abs().max();
                assert!(diff < 1e-12, "n={n} {c:?} diff={diff}");
            }
        }
    }

    #[test]
    fn pair_sums_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=6 {
            let m = n * (n - 1);
            let e: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let l = Layout::directed(n);
            let mut brute = [0.0; 6];
            for (a, da) in l.dyads().enumerate() {
                for (b, db) in l.dyads().enumerate() {
                    brute[classify_pair(da, db).slot()] += e[a] * f[b];
                }
            }
            let got = pair_sums(&e, &f, n);
            for s in 0..6 {
                assert!((got[s] - brute[s]).abs() < 1e-12, "n={n} slot={s}");
            }
        }
    }

    #[test]
    fn apply_pattern_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 3..=6 {
            let l = Layout::directed(n);
            let m = l.len();
            let w: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dense = DMatrix::from_fn(m, m, |a, b| w[classify_pair(l.dyad(a), l.dyad(b)).slot()]);
            let expect = &dense * DVector::from_column_slice(&v);
            let got = apply_pattern(&w, &v, n);
            assert!((got - expect).abs().max() < 1e-12);
        }
    }

    #[test]
    fn undirected_forms_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in 3..=6 {
            let l = Layout::new(n, 1, false);
            let m = l.len();
            let x = random_matrix(m, 2, &mut rng);
            let f = UndirectedForms::new(x.rows(0, m), x.rows(0, m), n);
            let mut shared = DMatrix::zeros(2, 2);
            for (a, da) in l.dyads().enumerate() {
                for (b, db) in l.dyads().enumerate() {
                    let common = [da.i, da.j].iter().filter(|t| **t == db.i || **t == db.j).count();
                    if a != b && common == 1 {
                        shared += x.row(a).transpose() * x.row(b);
                    }
                }
            }
            assert!((f.shared - shared).abs().max() < 1e-12);
        }
    }
}
