//! Exchangeable structures for multi-layer relational arrays.
//!
//! The covariance of a stacked array is a grid of `R × R` blocks, each an
//! exchangeable pattern over one pair of layers. Structures differ in which
//! blocks share parameters:
//!
//! - `FullExch`: one within-layer block and one cross-layer block (10 values)
//! - `LayerIndependent`: within-layer block only, cross blocks zero
//! - `Stationary`: one block per lag `|r − s|` (`5R` values)
//! - `Unrestricted`: one block per unordered layer pair (`5(C(R,2) + R)`)
//!
//! Each block carries five slots in the order of [`ExchParams::slots`]. In a
//! cross-layer block the `Same` slot holds the covariance of one dyad across
//! two layers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{counts_f64, dc_meat_pooled, ExchParams, UndirectedParams};
use crate::forms::{pair_sums, PatternForms, UndirectedForms};
use crate::relational::{undirected_shared_count, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrayStructure {
    FullExch,
    Stationary,
    Unrestricted,
    LayerIndependent,
}

impl std::str::FromStr for ArrayStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-exch" | "full" => Ok(Self::FullExch),
            "stationary" => Ok(Self::Stationary),
            "unrestricted" => Ok(Self::Unrestricted),
            "independent" | "layer-independent" => Ok(Self::LayerIndependent),
            other => Err(Error::InvalidParameter(format!("unknown array structure `{other}`"))),
        }
    }
}

/// Parameter blocks of an array structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayExchParams {
    pub structure: ArrayStructure,
    pub layers: usize,
    pub blocks: Vec<ExchParams>,
}

fn unordered_pair_index(r: usize, s: usize, layers: usize) -> usize {
    let (a, b) = if r <= s { (r, s) } else { (s, r) };
    // pairs (k, l), k ≤ l, in lexicographic order
    a * layers - a * a.saturating_sub(1) / 2 + (b - a)
}

impl ArrayExchParams {
    /// Expected number of blocks for a structure.
    pub fn block_count(structure: ArrayStructure, layers: usize) -> usize {
        match structure {
            ArrayStructure::FullExch => 2,
            ArrayStructure::LayerIndependent => 1,
            ArrayStructure::Stationary => layers,
            ArrayStructure::Unrestricted => layers * (layers + 1) / 2,
        }
    }

    pub fn new(structure: ArrayStructure, layers: usize, blocks: Vec<ExchParams>) -> Result<Self> {
        let expected = Self::block_count(structure, layers);
        if blocks.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "array parameter blocks",
                expected,
                actual: blocks.len(),
            });
        }
        Ok(Self {
            structure,
            layers,
            blocks,
        })
    }

    /// Full exchangeability from a within-layer and a cross-layer block.
    pub fn full_exch(layers: usize, within: ExchParams, cross: ExchParams) -> Self {
        Self {
            structure: ArrayStructure::FullExch,
            layers,
            blocks: vec![within, cross],
        }
    }

    /// Block index governing layers `(r, s)`, or `None` for a structurally
    /// zero block.
    pub fn block_index(&self, r: usize, s: usize) -> Option<usize> {
        match self.structure {
            ArrayStructure::FullExch => Some(usize::from(r != s)),
            ArrayStructure::LayerIndependent => (r == s).then_some(0),
            ArrayStructure::Stationary => Some(r.abs_diff(s)),
            ArrayStructure::Unrestricted => Some(unordered_pair_index(r, s, self.layers)),
        }
    }

    pub fn block(&self, r: usize, s: usize) -> Option<&ExchParams> {
        self.block_index(r, s).map(|k| &self.blocks[k])
    }

    /// Number of free nonzero covariance values in the structure.
    pub fn distinct_slot_count(&self) -> usize {
        5 * self.blocks.len()
    }

    /// Within-layer and cross-layer six-slot vectors of a full-exchangeable
    /// structure (cross zero when layers are independent).
    pub fn full_exch_six(&self) -> Result<([f64; 6], [f64; 6])> {
        match self.structure {
            ArrayStructure::FullExch => Ok((self.blocks[0].six(), self.blocks[1].six())),
            ArrayStructure::LayerIndependent => Ok((self.blocks[0].six(), [0.0; 6])),
            other => Err(Error::Unsupported(format!(
                "{other:?} has no full-exchangeable block pair"
            ))),
        }
    }
}

fn check_array(len: usize, n: usize, layers: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InsufficientActors {
            required: 3,
            actual: n,
        });
    }
    if layers < 2 {
        return Err(Error::InsufficientLayers {
            required: 2,
            actual: layers,
        });
    }
    let expected = n * (n - 1) * layers;
    if len != expected {
        return Err(Error::DimensionMismatch {
            context: "array length",
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// Average residual products per (configuration, layer relation) class.
///
/// `residuals` is a complete directed array in canonical layer-major order.
pub fn estimate_array_params(
    residuals: &[f64],
    n: usize,
    layers: usize,
    structure: ArrayStructure,
) -> Result<ArrayExchParams> {
    check_array(residuals.len(), n, layers)?;
    let m = n * (n - 1);
    let layer = |r: usize| &residuals[r * m..(r + 1) * m];
    let counts = counts_f64(n);
    let average = |sums: [f64; 6], ordered_pairs: f64| {
        ExchParams::from_slots(std::array::from_fn(|c| sums[c] / (ordered_pairs * counts[c])))
    };
    let add = |acc: &mut [f64; 6], s: [f64; 6], w: f64| {
        for c in 0..6 {
            acc[c] += w * s[c];
        }
    };

    let mut within = [0.0; 6];
    let diag: Vec<[f64; 6]> = (0..layers).map(|r| pair_sums(layer(r), layer(r), n)).collect();
    for s in &diag {
        add(&mut within, *s, 1.0);
    }
    let r_f = layers as f64;

    let blocks = match structure {
        ArrayStructure::FullExch | ArrayStructure::LayerIndependent => {
            let within = average(within, r_f);
            if structure == ArrayStructure::LayerIndependent {
                vec![within]
            } else {
                let mut pooled = vec![0.0; m];
                for r in 0..layers {
                    for (acc, v) in pooled.iter_mut().zip(layer(r)) {
                        *acc += v;
                    }
                }
                let mut cross = pair_sums(&pooled, &pooled, n);
                add(&mut cross, within_sums_total(&diag), -1.0);
                vec![within, average(cross, r_f * (r_f - 1.0))]
            }
        }
        ArrayStructure::Stationary => {
            let mut lag_sums = vec![[0.0; 6]; layers];
            let mut lag_pairs = vec![0.0; layers];
            for r in 0..layers {
                add(&mut lag_sums[0], diag[r], 1.0);
                lag_pairs[0] += 1.0;
                for s in (r + 1)..layers {
                    add(&mut lag_sums[s - r], pair_sums(layer(r), layer(s), n), 2.0);
                    lag_pairs[s - r] += 2.0;
                }
            }
            lag_sums
                .into_iter()
                .zip(lag_pairs)
                .map(|(s, k)| average(s, k))
                .collect()
        }
        ArrayStructure::Unrestricted => {
            let mut blocks = Vec::with_capacity(layers * (layers + 1) / 2);
            for r in 0..layers {
                for s in r..layers {
                    if r == s {
                        blocks.push(average(diag[r], 1.0));
                    } else {
                        blocks.push(average(pair_sums(layer(r), layer(s), n), 1.0));
                    }
                }
            }
            blocks
        }
    };
    ArrayExchParams::new(structure, layers, blocks)
}

fn within_sums_total(diag: &[[f64; 6]]) -> [f64; 6] {
    let mut acc = [0.0; 6];
    for s in diag {
        for c in 0..6 {
            acc[c] += s[c];
        }
    }
    acc
}

fn check_design(x: &DMatrix<f64>, layout: Layout) -> Result<()> {
    if x.nrows() != layout.len() {
        return Err(Error::DimensionMismatch {
            context: "array design rows",
            expected: layout.len(),
            actual: x.nrows(),
        });
    }
    Ok(())
}

/// `Xᵀ Ω̂ X` for a directed array under any structure, block by block.
pub fn array_exch_meat(x: &DMatrix<f64>, params: &ArrayExchParams, n: usize) -> Result<DMatrix<f64>> {
    let layers = params.layers;
    let layout = Layout::new(n, layers, true);
    check_design(x, layout)?;
    let m = layout.per_layer();
    let block = |r: usize| x.rows(r * m, m);
    let p = x.ncols();
    let diag: Vec<PatternForms> = (0..layers)
        .map(|r| PatternForms::directed(block(r), block(r), n))
        .collect();
    let mut meat = DMatrix::zeros(p, p);
    match params.structure {
        ArrayStructure::FullExch | ArrayStructure::LayerIndependent => {
            let within = params.blocks[0].slots();
            for f in &diag {
                meat += f.combine(within);
            }
            if params.structure == ArrayStructure::FullExch {
                // Σ_{r≠s} F(X_r, X_s) = F(ΣX_r, ΣX_r) − Σ_r F(X_r, X_r)
                let mut pooled = DMatrix::zeros(m, p);
                for r in 0..layers {
                    pooled += block(r);
                }
                let mut cross = PatternForms::quadratic(&pooled, n);
                for f in &diag {
                    cross = cross.sub(f);
                }
                meat += cross.combine(params.blocks[1].slots());
            }
        }
        ArrayStructure::Stationary | ArrayStructure::Unrestricted => {
            for r in 0..layers {
                if let Some(b) = params.block(r, r) {
                    meat += diag[r].combine(b.slots());
                }
                for s in (r + 1)..layers {
                    if let Some(b) = params.block(r, s) {
                        let g = PatternForms::directed(block(r), block(s), n).combine(b.slots());
                        meat += &g + g.transpose();
                    }
                }
            }
        }
    }
    Ok(meat)
}

/// Array DC meat: residual products for every pair of observations whose
/// dyads share an actor, regardless of layer.
pub fn array_dc_meat(x: &DMatrix<f64>, residuals: &[f64], layout: Layout) -> Result<DMatrix<f64>> {
    check_design(x, layout)?;
    if residuals.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            context: "array residual length",
            expected: layout.len(),
            actual: residuals.len(),
        });
    }
    let mut w = x.clone();
    for (mut row, e) in w.row_iter_mut().zip(residuals) {
        row *= *e;
    }
    Ok(dc_meat_pooled(&w, layout))
}

/// Undirected full-exchangeable array parameters: `(θ, φ)` within a layer and
/// `(same dyad, shared actor)` across layers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UndirectedArrayParams {
    pub within: UndirectedParams,
    pub cross: UndirectedParams,
}

fn undirected_sums(e: &[f64], n: usize) -> (f64, f64) {
    let mut actor = vec![0.0; n];
    let mut same = 0.0;
    let mut pos = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            actor[i] += e[pos];
            actor[j] += e[pos];
            same += e[pos] * e[pos];
            pos += 1;
        }
    }
    let shared = actor.iter().map(|a| a * a).sum::<f64>() - 2.0 * same;
    (same, shared)
}

/// Estimate undirected full-exchangeable array parameters.
pub fn estimate_undirected_array_params(residuals: &[f64], n: usize, layers: usize) -> Result<UndirectedArrayParams> {
    if n < 3 {
        return Err(Error::InsufficientActors {
            required: 3,
            actual: n,
        });
    }
    if layers < 2 {
        return Err(Error::InsufficientLayers {
            required: 2,
            actual: layers,
        });
    }
    let layout = Layout::new(n, layers, false);
    let m = layout.per_layer();
    if residuals.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            context: "undirected array length",
            expected: layout.len(),
            actual: residuals.len(),
        });
    }
    let (mut same, mut shared) = (0.0, 0.0);
    let mut pooled = vec![0.0; m];
    for r in 0..layers {
        let e = &residuals[r * m..(r + 1) * m];
        let (a, b) = undirected_sums(e, n);
        same += a;
        shared += b;
        for (acc, v) in pooled.iter_mut().zip(e) {
            *acc += v;
        }
    }
    let (ps, pb) = undirected_sums(&pooled, n);
    let rf = layers as f64;
    let cross_pairs = rf * (rf - 1.0);
    let mf = m as f64;
    let sh = undirected_shared_count(n) as f64;
    Ok(UndirectedArrayParams {
        within: UndirectedParams {
            theta: same / (rf * mf),
            phi: shared / (rf * sh),
        },
        cross: UndirectedParams {
            theta: (ps - same) / (cross_pairs * mf),
            phi: (pb - shared) / (cross_pairs * sh),
        },
    })
}

/// `Xᵀ Ω̂ X` for an undirected full-exchangeable array.
pub fn undirected_array_exch_meat(
    x: &DMatrix<f64>,
    params: &UndirectedArrayParams,
    n: usize,
    layers: usize,
) -> Result<DMatrix<f64>> {
    let layout = Layout::new(n, layers, false);
    check_design(x, layout)?;
    let m = layout.per_layer();
    let p = x.ncols();
    let mut meat = DMatrix::zeros(p, p);
    let mut pooled = DMatrix::zeros(m, p);
    let mut diag_sum: Option<UndirectedForms> = None;
    for r in 0..layers {
        let b = x.rows(r * m, m);
        pooled += &b;
        let f = UndirectedForms::new(b, x.rows(r * m, m), n);
        meat += f.combine(params.within.theta, params.within.phi);
        diag_sum = Some(match diag_sum {
            None => f,
            Some(acc) => UndirectedForms {
                same: acc.same + f.same,
                shared: acc.shared + f.shared,
            },
        });
    }
    if let Some(d) = diag_sum {
        let cross = UndirectedForms::new(pooled.rows(0, m), pooled.rows(0, m), n).sub(&d);
        meat += cross.combine(params.cross.theta, params.cross.phi);
    }
    Ok(meat)
}
