//! Alignment quality scoring: precision/recall/F1 against gold pairs,
//! inter-annotator match rate, and a paired approximate-randomization
//! significance test on the F1 difference.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::AlignmentSet;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, XorShift64};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred: usize,
    pub n_gold: usize,
    pub n_correct: usize,
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn prf_from_counts(n_correct: usize, n_pred: usize, n_gold: usize) -> Prf {
    let precision = if n_pred > 0 {
        n_correct as f64 / n_pred as f64
    } else {
        0.0
    };
    let recall = if n_gold > 0 {
        n_correct as f64 / n_gold as f64
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f1: f1_of(precision, recall),
        n_pred,
        n_gold,
        n_correct,
    }
}

/// BUCC-style scoring: a predicted pair is correct only on an exact
/// (src_id, tgt_id) match.
pub fn prf(pred: &AlignmentSet, gold: &AlignmentSet) -> Result<Prf> {
    if pred.level != gold.level {
        return Err(Error::data(format!(
            "level mismatch: predictions are {} but gold is {}",
            pred.level, gold.level
        )));
    }
    let gold_set = gold.pair_set();
    let n_correct = pred
        .pairs
        .iter()
        .filter(|p| gold_set.contains(&(p.src_id.as_str(), p.tgt_id.as_str())))
        .count();
    Ok(prf_from_counts(n_correct, pred.len(), gold.len()))
}

/// Inter-annotator match rate: the fraction of universe items whose assigned
/// partner (or absence of one) agrees between the two alignments. Universe
/// items are source-side ids; a pair whose src lies outside the universe is
/// an error.
pub fn agreement(
    a: &AlignmentSet,
    b: &AlignmentSet,
    universe: &BTreeSet<String>,
) -> Result<f64> {
    if universe.is_empty() {
        return Err(Error::data("agreement universe is empty"));
    }
    let partner_map = |set: &AlignmentSet| -> Result<HashMap<String, String>> {
        let mut map = HashMap::new();
        for p in &set.pairs {
            if !universe.contains(&p.src_id) {
                return Err(Error::data(format!(
                    "item {} outside the agreement universe",
                    p.src_id
                )));
            }
            map.insert(p.src_id.clone(), p.tgt_id.clone());
        }
        Ok(map)
    };
    let map_a = partner_map(a)?;
    let map_b = partner_map(b)?;
    let matches = universe
        .iter()
        .filter(|item| map_a.get(*item) == map_b.get(*item))
        .count();
    Ok(matches as f64 / universe.len() as f64)
}

/// Paired approximate randomization on the F1 gap between two systems.
/// The exchangeable unit is a target id; each resample swaps the two systems'
/// predictions for a unit with probability 1/2. p = (r + 1) / (n + 1) where r
/// counts resamples with |gap| at least the observed |gap|.
pub fn significance(
    pred_a: &AlignmentSet,
    pred_b: &AlignmentSet,
    gold: &AlignmentSet,
    n_resamples: usize,
    seed: u64,
) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::data("significance test requires non-empty gold"));
    }
    if pred_a.level != gold.level || pred_b.level != gold.level {
        return Err(Error::data("significance test requires matching levels"));
    }
    if n_resamples < 100 {
        return Err(Error::data("significance test requires at least 100 resamples"));
    }

    let gold_set = gold.pair_set();
    let n_gold = gold.len();

    // Per-unit prediction counts: (n_pred, n_correct) for each system.
    let mut units: BTreeSet<String> = BTreeSet::new();
    let mut counts: HashMap<&str, [(usize, usize); 2]> = HashMap::new();
    for (idx, set) in [pred_a, pred_b].into_iter().enumerate() {
        for p in &set.pairs {
            units.insert(p.tgt_id.clone());
            let entry = counts.entry(p.tgt_id.as_str()).or_insert([(0, 0); 2]);
            entry[idx].0 += 1;
            if gold_set.contains(&(p.src_id.as_str(), p.tgt_id.as_str())) {
                entry[idx].1 += 1;
            }
        }
    }
    let unit_counts: Vec<[(usize, usize); 2]> = units
        .iter()
        .map(|u| counts.get(u.as_str()).copied().unwrap_or([(0, 0); 2]))
        .collect();

    let gap = |assignment: &dyn Fn(usize) -> bool| -> f64 {
        let mut a = (0usize, 0usize);
        let mut b = (0usize, 0usize);
        for (i, uc) in unit_counts.iter().enumerate() {
            let (ca, cb) = if assignment(i) {
                (uc[1], uc[0]) // swapped
            } else {
                (uc[0], uc[1])
            };
            a.0 += ca.0;
            a.1 += ca.1;
            b.0 += cb.0;
            b.1 += cb.1;
        }
        let f1_a = prf_from_counts(a.1, a.0, n_gold).f1;
        let f1_b = prf_from_counts(b.1, b.0, n_gold).f1;
        (f1_a - f1_b).abs()
    };

    let observed = gap(&|_| false);
    let mut extreme = 0usize;
    for r in 0..n_resamples {
        let mut rng = XorShift64::new(derive_seed(seed, &format!("resample{r}")));
        let flips: Vec<bool> = (0..unit_counts.len()).map(|_| rng.gen_bool()).collect();
        if gap(&|i| flips[i]) >= observed - 1e-12 {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (n_resamples + 1) as f64)
}
