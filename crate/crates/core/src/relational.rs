//! Relational array data model.
//!
//! Observations are indexed by ordered dyads `(i, j)` with `i != j` within a
//! layer `r`. The canonical flattening is layer-major; within a layer, directed
//! dyads are in lexicographic `(i, j)` order skipping the diagonal, and
//! undirected dyads keep only the upper triangle `i < j` in lexicographic
//! order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered dyad `(i, j)` in layer `r`. Actors are dense 0-based ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadIndex {
    pub i: usize,
    pub j: usize,
    pub r: usize,
}

impl DyadIndex {
    pub fn new(i: usize, j: usize, r: usize) -> Self {
        Self { i, j, r }
    }

    /// Dyad in layer 0.
    pub fn pair(i: usize, j: usize) -> Self {
        Self { i, j, r: 0 }
    }

    pub fn reversed(self) -> Self {
        Self {
            i: self.j,
            j: self.i,
            r: self.r,
        }
    }
}

impl std::fmt::Display for DyadIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, layer {})", self.i, self.j, self.r)
    }
}

/// How two ordered dyads share actors.
///
/// `Same` is the variance slot; the remaining variants are the five
/// distinguishable covariance configurations between relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairConfig {
    Same,
    Reciprocal,
    CommonReceiver,
    CommonSender,
    SenderReceiver,
    Disjoint,
}

impl PairConfig {
    pub const ALL: [PairConfig; 6] = [
        PairConfig::Same,
        PairConfig::Reciprocal,
        PairConfig::CommonReceiver,
        PairConfig::CommonSender,
        PairConfig::SenderReceiver,
        PairConfig::Disjoint,
    ];

    /// Position in the six-slot ordering `(Same, Reciprocal, CommonReceiver,
    /// CommonSender, SenderReceiver, Disjoint)`.
    pub fn slot(self) -> usize {
        match self {
            PairConfig::Same => 0,
            PairConfig::Reciprocal => 1,
            PairConfig::CommonReceiver => 2,
            PairConfig::CommonSender => 3,
            PairConfig::SenderReceiver => 4,
            PairConfig::Disjoint => 5,
        }
    }

    pub fn shares_actor(self) -> bool {
        self != PairConfig::Disjoint
    }
}

/// Classify the ordered pair of dyads `a = (i, j)`, `b = (k, l)`. Layers are
/// ignored.
pub fn classify_pair(a: DyadIndex, b: DyadIndex) -> PairConfig {
    let (i, j, k, l) = (a.i, a.j, b.i, b.j);
    if i == k && j == l {
        PairConfig::Same
    } else if i == l && j == k {
        PairConfig::Reciprocal
    } else if i == k {
        PairConfig::CommonSender
    } else if j == l {
        PairConfig::CommonReceiver
    } else if i == l || j == k {
        PairConfig::SenderReceiver
    } else {
        PairConfig::Disjoint
    }
}

/// Number of ordered dyad pairs in each configuration for `n` actors,
/// indexed by [`PairConfig::slot`].
pub fn config_counts(n: usize) -> [u64; 6] {
    if n < 2 {
        return [0; 6];
    }
    let n = n as u64;
    let d = n * (n - 1);
    let t = d * (n - 2);
    let disjoint = if n >= 4 { t * (n - 3) } else { 0 };
    [d, d, t, t, 2 * t, disjoint]
}

/// Number of ordered pairs of distinct undirected dyads sharing exactly one
/// actor, `n(n-1)(n-2)`.
pub fn undirected_shared_count(n: usize) -> u64 {
    if n < 3 {
        return 0;
    }
    let n = n as u64;
    n * (n - 1) * (n - 2)
}

/// The canonical bijection between dyads and flat positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n: usize,
    pub layers: usize,
    pub directed: bool,
}

impl Layout {
    pub fn new(n: usize, layers: usize, directed: bool) -> Self {
        Self { n, layers, directed }
    }

    pub fn directed(n: usize) -> Self {
        Self::new(n, 1, true)
    }

    /// Observations per layer.
    pub fn per_layer(&self) -> usize {
        let d = self.n * self.n.saturating_sub(1);
        if self.directed {
            d
        } else {
            d / 2
        }
    }

    pub fn len(&self) -> usize {
        self.per_layer() * self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, d: DyadIndex) -> Result<()> {
        if d.i == d.j {
            return Err(Error::InvalidDyad(format!("self-relation {d}")));
        }
        if d.i >= self.n || d.j >= self.n {
            return Err(Error::InvalidDyad(format!("{d} outside {} actors", self.n)));
        }
        if d.r >= self.layers {
            return Err(Error::InvalidDyad(format!(
                "{d} outside {} layers",
                self.layers
            )));
        }
        Ok(())
    }

    /// Flat position of a dyad. Undirected layouts accept either orientation.
    pub fn position(&self, d: DyadIndex) -> Result<usize> {
        self.check(d)?;
        Ok(self.position_unchecked(d))
    }

    #[inline]
    pub(crate) fn position_unchecked(&self, d: DyadIndex) -> usize {
        let n = self.n;
        let within = if self.directed {
            d.i * (n - 1) + d.j - usize::from(d.j > d.i)
        } else {
            let (i, j) = if d.i < d.j { (d.i, d.j) } else { (d.j, d.i) };
            i * n - i * (i + 1) / 2 + (j - i - 1)
        };
        d.r * self.per_layer() + within
    }

    /// Dyad at a flat position (undirected layouts return `i < j`).
    pub fn dyad(&self, pos: usize) -> DyadIndex {
        let m = self.per_layer();
        let r = pos / m;
        let mut w = pos % m;
        let n = self.n;
        if self.directed {
            let i = w / (n - 1);
            let c = w % (n - 1);
            let j = if c >= i { c + 1 } else { c };
            DyadIndex::new(i, j, r)
        } else {
            let mut i = 0;
            while w >= n - 1 - i {
                w -= n - 1 - i;
                i += 1;
            }
            DyadIndex::new(i, i + 1 + w, r)
        }
    }

    /// All dyads in canonical order.
    pub fn dyads(&self) -> impl Iterator<Item = DyadIndex> + '_ {
        (0..self.len()).map(move |p| self.dyad(p))
    }
}

/// One observation in long form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub dyad: DyadIndex,
    pub y: f64,
    pub x: Vec<f64>,
}

/// A complete relational array with its response vector and design matrix
/// stored in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalDataset {
    layout: Layout,
    y: DVector<f64>,
    x: DMatrix<f64>,
}

/// Tolerance for reconciling the two orientations of an undirected dyad.
pub const UNDIRECTED_DUPLICATE_TOL: f64 = 1e-12;

impl RelationalDataset {
    /// Build from already vectorized data.
    pub fn new(layout: Layout, y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if layout.n < 2 {
            return Err(Error::InsufficientActors {
                required: 2,
                actual: layout.n,
            });
        }
        if layout.layers == 0 {
            return Err(Error::InsufficientLayers {
                required: 1,
                actual: 0,
            });
        }
        if y.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                context: "response length",
                expected: layout.len(),
                actual: y.len(),
            });
        }
        if x.nrows() != layout.len() {
            return Err(Error::DimensionMismatch {
                context: "design rows",
                expected: layout.len(),
                actual: x.nrows(),
            });
        }
        Ok(Self { layout, y, x })
    }

    /// Build from long-form observations in any order. Every dyad must be
    /// present exactly once; undirected layouts also accept both orientations
    /// of a pair provided they agree.
    pub fn from_observations<I>(layout: Layout, p: usize, observations: I) -> Result<Self>
    where
        I: IntoIterator<Item = Observation>,
    {
        let len = layout.len();
        let mut y = DVector::<f64>::zeros(len);
        let mut x = DMatrix::<f64>::zeros(len, p);
        let mut seen = vec![false; len];
        for obs in observations {
            if obs.x.len() != p {
                return Err(Error::DimensionMismatch {
                    context: "covariate row length",
                    expected: p,
                    actual: obs.x.len(),
                });
            }
            let pos = layout.position(obs.dyad)?;
            if seen[pos] {
                if layout.directed {
                    return Err(Error::InvalidDyad(format!("duplicate {}", obs.dyad)));
                }
                let agrees = (y[pos] - obs.y).abs() <= UNDIRECTED_DUPLICATE_TOL
                    && obs
                        .x
                        .iter()
                        .enumerate()
                        .all(|(c, v)| (x[(pos, c)] - v).abs() <= UNDIRECTED_DUPLICATE_TOL);
                if !agrees {
                    return Err(Error::InvalidDyad(format!(
                        "undirected duplicate {} disagrees with its reverse",
                        obs.dyad
                    )));
                }
                continue;
            }
            seen[pos] = true;
            y[pos] = obs.y;
            for (c, v) in obs.x.iter().enumerate() {
                x[(pos, c)] = *v;
            }
        }
        let missing = seen.iter().filter(|s| !**s).count();
        if missing > 0 {
            let first = seen.iter().position(|s| !*s).unwrap_or(0);
            return Err(Error::IncompleteData {
                missing,
                expected: len,
                first: layout.dyad(first).to_string(),
            });
        }
        Self::new(layout, y, x)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn layers(&self) -> usize {
        self.layout.layers
    }

    pub fn directed(&self) -> bool {
        self.layout.directed
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Response vector and design matrix in canonical order.
    pub fn vectorize(&self) -> (&DVector<f64>, &DMatrix<f64>) {
        (&self.y, &self.x)
    }

    /// Long-form observations in canonical order; the inverse of
    /// [`RelationalDataset::from_observations`].
    pub fn devectorize(&self) -> Vec<Observation> {
        (0..self.layout.len())
            .map(|pos| Observation {
                dyad: self.layout.dyad(pos),
                y: self.y[pos],
                x: self.x.row(pos).iter().copied().collect(),
            })
            .collect()
    }

    /// Replace the response, keeping covariates and layout.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.layout, y, self.x.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_counts(n: usize) -> [u64; 6] {
        let layout = Layout::directed(n);
        let mut counts = [0u64; 6];
        for a in layout.dyads() {
            for b in layout.dyads() {
                counts[classify_pair(a, b).slot()] += 1;
            }
        }
        counts
    }

    #[test]
    fn classify_examples() {
        let d = DyadIndex::pair;
        assert_eq!(classify_pair(d(1, 2), d(1, 2)), PairConfig::Same);
        assert_eq!(classify_pair(d(1, 2), d(2, 1)), PairConfig::Reciprocal);
        assert_eq!(classify_pair(d(1, 2), d(3, 1)), PairConfig::SenderReceiver);
        assert_eq!(classify_pair(d(1, 2), d(2, 3)), PairConfig::SenderReceiver);
        assert_eq!(classify_pair(d(1, 2), d(1, 3)), PairConfig::CommonSender);
        assert_eq!(classify_pair(d(1, 2), d(3, 2)), PairConfig::CommonReceiver);
        assert_eq!(classify_pair(d(1, 2), d(3, 4)), PairConfig::Disjoint);
    }

    #[test]
    fn counts_match_enumeration() {
        assert_eq!(brute_counts(3), [6, 6, 6, 6, 12, 0]);
        assert_eq!(config_counts(3), [6, 6, 6, 6, 12, 0]);
        assert_eq!(config_counts(2), [2, 2, 0, 0, 0, 0]);
        assert_eq!(brute_counts(4).iter().sum::<u64>(), 144);
        for n in 2..=10 {
            let c = config_counts(n);
            assert_eq!(c, brute_counts(n), "n = {n}");
            let d = (n * (n - 1)) as u64;
            assert_eq!(c.iter().sum::<u64>(), d * d);
        }
    }

    #[test]
    fn directed_order() {
        let l = Layout::directed(3);
        let got: Vec<_> = l.dyads().map(|d| (d.i, d.j)).collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }

    #[test]
    fn layer_major_order() {
        let l = Layout::new(3, 2, true);
        let layers: Vec<_> = l.dyads().map(|d| d.r).collect();
        assert_eq!(layers, vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        assert_eq!(l.position(DyadIndex::new(0, 1, 1)).unwrap(), 6);
    }

    #[test]
    fn undirected_order() {
        let l = Layout::new(3, 1, false);
        let got: Vec<_> = l.dyads().map(|d| (d.i, d.j)).collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(l.position(DyadIndex::pair(2, 1)).unwrap(), 2);
    }

    #[test]
    fn position_roundtrip() {
        for &directed in &[true, false] {
            for n in 2..9 {
                let l = Layout::new(n, 3, directed);
                for p in 0..l.len() {
                    assert_eq!(l.position(l.dyad(p)).unwrap(), p);
                }
            }
        }
    }

    #[test]
    fn rejects_diagonal_and_out_of_range() {
        let l = Layout::directed(4);
        assert!(l.position(DyadIndex::pair(1, 1)).is_err());
        assert!(l.position(DyadIndex::pair(0, 4)).is_err());
        assert!(l.position(DyadIndex::new(0, 1, 1)).is_err());
    }

    #[test]
    fn missing_dyad_is_incomplete() {
        let l = Layout::directed(3);
        let obs: Vec<_> = l
            .dyads()
            .skip(1)
            .map(|d| Observation {
                dyad: d,
                y: 1.0,
                x: vec![1.0],
            })
            .collect();
        let err = RelationalDataset::from_observations(l, 1, obs).unwrap_err();
        assert!(matches!(err, Error::IncompleteData { missing: 1, .. }));
    }

    #[test]
    fn undirected_duplicates_must_agree() {
        let l = Layout::new(3, 1, false);
        let mut obs: Vec<_> = l
            .dyads()
            .map(|d| Observation {
                dyad: d,
                y: (d.i + d.j) as f64,
                x: vec![1.0],
            })
            .collect();
        obs.push(Observation {
            dyad: DyadIndex::pair(1, 0),
            y: 1.0,
            x: vec![1.0],
        });
        assert!(RelationalDataset::from_observations(l, 1, obs.clone()).is_ok());
        obs.last_mut().unwrap().y = 2.0;
        assert!(RelationalDataset::from_observations(l, 1, obs).is_err());
    }
}
