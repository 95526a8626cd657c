//! Agreement and flip statistics over action sequences from repeated runs.
//!
//! Actions are `1` buy, `0` hold, `-1` sell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StabilityError {
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sequence is empty")]
    EmptySequence,
    #[error("need at least {0} runs")]
    TooFewRuns(usize),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

fn same_length(a: &[i8], b: &[i8]) -> Result<(), StabilityError> {
    if a.len() != b.len() {
        return Err(StabilityError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn check_bundle(runs: &[Vec<i8>], min_runs: usize) -> Result<usize, StabilityError> {
    if runs.len() < min_runs {
        return Err(StabilityError::TooFewRuns(min_runs));
    }
    let n = runs[0].len();
    for r in runs {
        same_length(&runs[0], r)?;
    }
    if n == 0 {
        return Err(StabilityError::EmptySequence);
    }
    Ok(n)
}

/// Fraction of steps where both sequences take the same action.
pub fn pairwise_agreement(a: &[i8], b: &[i8]) -> Result<f64, StabilityError> {
    same_length(a, b)?;
    if a.is_empty() {
        return Err(StabilityError::EmptySequence);
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Symmetric matrix of pairwise agreements with a unit diagonal.
pub fn pairwise_matrix(runs: &[Vec<i8>]) -> Result<Vec<Vec<f64>>, StabilityError> {
    check_bundle(runs, 1)?;
    let k = runs.len();
    let mut m = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = pairwise_agreement(&runs[i], &runs[j])?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepwiseMode {
    /// Share of runs choosing the most common action.
    #[default]
    Modal,
    /// Intersection over union of the runs' action sets: 1 when unanimous, else 0.
    Jaccard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stepwise {
    pub series: Vec<f64>,
    pub mean: f64,
    /// Fraction of steps where not every run agrees.
    pub disagreement_rate: f64,
}

fn counts(actions: impl Iterator<Item = i8>) -> [usize; 3] {
    let mut c = [0usize; 3];
    for a in actions {
        c[(a.clamp(-1, 1) + 1) as usize] += 1;
    }
    c
}

/// Most common action; any tie for the top count resolves to hold.
fn modal(c: [usize; 3]) -> i8 {
    let top = *c.iter().max().unwrap();
    if c[1] == top || c.iter().filter(|&&n| n == top).count() > 1 {
        0
    } else if c[0] == top {
        -1
    } else {
        1
    }
}

pub fn stepwise_agreement(runs: &[Vec<i8>], mode: StepwiseMode) -> Result<Stepwise, StabilityError> {
    let n = check_bundle(runs, 2)?;
    let k = runs.len() as f64;
    let series: Vec<f64> = (0..n)
        .map(|t| {
            let c = counts(runs.iter().map(|r| r[t]));
            let top = *c.iter().max().unwrap() as f64;
            match mode {
                StepwiseMode::Modal => top / k,
                StepwiseMode::Jaccard => {
                    if top == k {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    let unanimous = (0..n).filter(|&t| runs.iter().all(|r| r[t] == runs[0][t])).count();
    Ok(Stepwise {
        mean: series.iter().sum::<f64>() / n as f64,
        disagreement_rate: (n - unanimous) as f64 / n as f64,
        series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub buy: f64,
    pub hold: f64,
    pub sell: f64,
}

pub fn action_distribution(seq: &[i8]) -> Result<ActionDistribution, StabilityError> {
    if seq.is_empty() {
        return Err(StabilityError::EmptySequence);
    }
    let c = counts(seq.iter().copied());
    let n = seq.len() as f64;
    Ok(ActionDistribution {
        buy: c[2] as f64 / n,
        hold: c[1] as f64 / n,
        sell: c[0] as f64 / n,
    })
}

/// Per-step modal action across runs, ties to hold.
pub fn modal_sequence(runs: &[Vec<i8>]) -> Result<Vec<i8>, StabilityError> {
    let n = check_bundle(runs, 1)?;
    Ok((0..n).map(|t| modal(counts(runs.iter().map(|r| r[t])))).collect())
}

/// Agreement between the modal sequences of two bundles.
pub fn temperature_agreement(a: &[Vec<i8>], b: &[Vec<i8>]) -> Result<f64, StabilityError> {
    let ma = modal_sequence(a)?;
    let mb = modal_sequence(b)?;
    pairwise_agreement(&ma, &mb)
}

/// Share of non-hold actions reversed by the next non-hold action within `horizon` steps.
///
/// The denominator counts non-hold actions that have a later non-hold action at
/// all; a final trailing action cannot be judged and is left out.
pub fn flip_rate(seq: &[i8], horizon: usize) -> Result<f64, StabilityError> {
    if horizon == 0 {
        return Err(StabilityError::ZeroHorizon);
    }
    let moves: Vec<(usize, i8)> = seq
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0)
        .map(|(i, a)| (i, *a))
        .collect();
    if moves.len() < 2 {
        return Ok(0.0);
    }
    let flips = moves
        .windows(2)
        .filter(|w| w[1].1 == -w[0].1 && w[1].0 - w[0].0 <= horizon)
        .count();
    Ok(flips as f64 / (moves.len() - 1) as f64)
}

/// Everything `stability analyze` reports for one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub runs: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub stepwise: Stepwise,
    pub stepwise_jaccard: Stepwise,
    pub distributions: Vec<ActionDistribution>,
    pub flip_rates: Vec<f64>,
}

pub fn agreement_report(
    labels: Vec<String>,
    runs: &[Vec<i8>],
    flip_horizon: usize,
) -> Result<AgreementReport, StabilityError> {
    Ok(AgreementReport {
        runs: labels,
        matrix: pairwise_matrix(runs)?,
        stepwise: stepwise_agreement(runs, StepwiseMode::Modal)?,
        stepwise_jaccard: stepwise_agreement(runs, StepwiseMode::Jaccard)?,
        distributions: runs.iter().map(|r| action_distribution(r)).collect::<Result<_, _>>()?,
        flip_rates: runs
            .iter()
            .map(|r| flip_rate(r, flip_horizon))
            .collect::<Result<_, _>>()?,
    })
}
