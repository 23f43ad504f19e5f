//! Cosine similarity, exhaustive k-NN over sparse vectors, and the
//! margin-based score used to suppress hub sentences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::SparseVector;

/// Floor for the ratio-margin denominator.
const MARGIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginVariant {
    Ratio,
    Distance,
    Absolute,
}

impl std::fmt::Display for MarginVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MarginVariant::Ratio => "ratio",
            MarginVariant::Distance => "distance",
            MarginVariant::Absolute => "absolute",
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarginConfig {
    pub k: usize,
    pub variant: MarginVariant,
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig {
            k: 4,
            variant: MarginVariant::Ratio,
        }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return 0.0;
    }
    a.dot(b) / (a.norm() * b.norm())
}

/// The min(k, |pool|) largest cosines against the pool, descending, ties
/// broken by ascending index.
pub fn knn_cosines(
    query: &SparseVector,
    pool: &[SparseVector],
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    if pool.is_empty() {
        return Err(Error::data("k-NN over an empty pool"));
    }
    let mut scored: Vec<(usize, f64)> = pool
        .iter()
        .enumerate()
        .map(|(i, v)| (i, cosine(query, v)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(k.min(pool.len()));
    Ok(scored)
}

/// Margin from precomputed neighborhood cosines. With
/// m = sum(nn_x)/(2k_x) + sum(nn_y)/(2k_y): ratio = a/m (m floored),
/// distance = a - m, absolute = a.
pub fn margin_from_cosines(
    cos_xy: f64,
    nn_x: &[f64],
    nn_y: &[f64],
    variant: MarginVariant,
) -> f64 {
    if variant == MarginVariant::Absolute {
        return cos_xy;
    }
    let side = |nn: &[f64]| {
        if nn.is_empty() {
            0.0
        } else {
            nn.iter().sum::<f64>() / (2.0 * nn.len() as f64)
        }
    };
    let m = side(nn_x) + side(nn_y);
    match variant {
        MarginVariant::Ratio => cos_xy / m.max(MARGIN_EPS),
        MarginVariant::Distance => cos_xy - m,
        MarginVariant::Absolute => unreachable!(),
    }
}

/// Margin score of a candidate pair. `pool_x` holds the candidate targets x
/// competes against; `pool_y` the candidate sources for y. k is clamped to
/// each pool's size.
pub fn margin_score(
    x: &SparseVector,
    y: &SparseVector,
    pool_x: &[SparseVector],
    pool_y: &[SparseVector],
    cfg: &MarginConfig,
) -> Result<f64> {
    let a = cosine(x, y);
    if cfg.variant == MarginVariant::Absolute {
        return Ok(a);
    }
    let nn_x: Vec<f64> = knn_cosines(x, pool_x, cfg.k)?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let nn_y: Vec<f64> = knn_cosines(y, pool_y, cfg.k)?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    Ok(margin_from_cosines(a, &nn_x, &nn_y, cfg.variant))
}
