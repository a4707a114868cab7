use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AnnotationError, AssignmentPlan, Decision, LabelRecord};

fn by_post(labels: &[LabelRecord]) -> Result<HashMap<&str, Decision>, AnnotationError> {
    let mut m = HashMap::with_capacity(labels.len());
    for l in labels {
        if m.insert(l.post_id.as_str(), l.decision).is_some() {
            return Err(AnnotationError::BatchMismatch(format!("post {} labelled twice", l.post_id)));
        }
    }
    Ok(m)
}

/// Decisions of two annotators over the same posts, in `a`'s order.
fn align(a: &[LabelRecord], b: &[LabelRecord]) -> Result<(Vec<Decision>, Vec<Decision>), AnnotationError> {
    let ma = by_post(a)?;
    let mb = by_post(b)?;
    if ma.len() != mb.len() {
        return Err(AnnotationError::BatchMismatch(format!("{} posts vs {}", ma.len(), mb.len())));
    }
    let mut da = Vec::with_capacity(a.len());
    let mut db = Vec::with_capacity(a.len());
    for l in a {
        let Some(&d) = mb.get(l.post_id.as_str()) else {
            return Err(AnnotationError::BatchMismatch(format!("post {} only labelled by one side", l.post_id)));
        };
        da.push(l.decision);
        db.push(d);
    }
    Ok((da, db))
}

fn check_lengths(a: &[Decision], b: &[Decision]) -> Result<(), AnnotationError> {
    if a.len() != b.len() {
        return Err(AnnotationError::BatchMismatch(format!("{} decisions vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(AnnotationError::EmptyBatch);
    }
    Ok(())
}

/// Share of posts with equal decisions; characteristics are ignored.
pub fn percent_agreement_decisions(a: &[Decision], b: &[Decision]) -> Result<f64, AnnotationError> {
    check_lengths(a, b)?;
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

/// Cohen's kappa from exact integer counts. When chance agreement is 1 the
/// result is 1.0 if every decision matches and 0.0 otherwise.
pub fn cohen_kappa_decisions(a: &[Decision], b: &[Decision]) -> Result<f64, AnnotationError> {
    check_lengths(a, b)?;
    let n = a.len() as i128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as i128;
    let ya = a.iter().filter(|d| d.is_yes()).count() as i128;
    let yb = b.iter().filter(|d| d.is_yes()).count() as i128;
    // p_o = agree/n, p_e = expected/n^2
    let expected = ya * yb + (n - ya) * (n - yb);
    let denom = n * n - expected;
    if denom == 0 {
        return Ok(if agree == n { 1.0 } else { 0.0 });
    }
    Ok((agree * n - expected) as f64 / denom as f64)
}

pub fn percent_agreement(a: &[LabelRecord], b: &[LabelRecord]) -> Result<f64, AnnotationError> {
    let (da, db) = align(a, b)?;
    percent_agreement_decisions(&da, &db)
}

pub fn cohen_kappa(a: &[LabelRecord], b: &[LabelRecord]) -> Result<f64, AnnotationError> {
    let (da, db) = align(a, b)?;
    cohen_kappa_decisions(&da, &db)
}

/// Fleiss' kappa over items x annotators. A single class everywhere gives
/// chance agreement 1 and the result 0.0.
pub fn fleiss_kappa(matrix: &[Vec<Decision>]) -> Result<f64, AnnotationError> {
    let Some(first) = matrix.first() else {
        return Err(AnnotationError::EmptyBatch);
    };
    let m = first.len();
    if m < 2 {
        return Err(AnnotationError::RaggedMatrix(format!("need at least 2 annotators per item, got {m}")));
    }
    if let Some((i, row)) = matrix.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(AnnotationError::RaggedMatrix(format!("item {i} has {} annotators, expected {m}", row.len())));
    }
    let n_items = matrix.len() as f64;
    let mf = m as f64;
    let mut p_bar = 0.0;
    let mut yes_total = 0usize;
    for row in matrix {
        let yes = row.iter().filter(|d| d.is_yes()).count();
        yes_total += yes;
        let no = m - yes;
        p_bar += ((yes * yes + no * no) as f64 - mf) / (mf * (mf - 1.0));
    }
    p_bar /= n_items;
    let p_yes = yes_total as f64 / (n_items * mf);
    let p_e = p_yes * p_yes + (1.0 - p_yes) * (1.0 - p_yes);
    if yes_total == 0 || yes_total == matrix.len() * m {
        return Ok(0.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub pair: (String, String),
    /// Per round; None until both members finish the batch.
    pub agreement: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marginal {
    pub annotator: String,
    pub round: u32,
    pub yes: usize,
    pub no: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementTimeline {
    pub rows: Vec<PairRow>,
    /// Mean over pairs with a finished round.
    pub averages: Vec<Option<f64>>,
    pub marginals: Vec<Marginal>,
}

/// Latest record per (annotator, post).
fn index(records: &[LabelRecord]) -> HashMap<(&str, &str), &LabelRecord> {
    let mut m = HashMap::new();
    for r in records {
        m.insert((r.annotator_id.as_str(), r.post_id.as_str()), r);
    }
    m
}

/// Agreement for one pair on one round's batch (0-based), if both have finished it.
pub fn pair_round_agreement(
    plan: &AssignmentPlan,
    pair: usize,
    round: usize,
    records: &[LabelRecord],
) -> Option<f64> {
    let idx = index(records);
    pair_round_with(&idx, plan, pair, round)
}

fn pair_round_with(
    idx: &HashMap<(&str, &str), &LabelRecord>,
    plan: &AssignmentPlan,
    pair: usize,
    round: usize,
) -> Option<f64> {
    let (a, b) = &plan.pairs[pair];
    let batch = plan.rounds[pair].get(round)?;
    let mut da = Vec::with_capacity(batch.len());
    let mut db = Vec::with_capacity(batch.len());
    for p in batch {
        da.push(idx.get(&(a.as_str(), p.as_str()))?.decision);
        db.push(idx.get(&(b.as_str(), p.as_str()))?.decision);
    }
    percent_agreement_decisions(&da, &db).ok()
}

/// Pairs x rounds agreement table with per-round averages and each
/// annotator's Yes/No counts per round.
pub fn agreement_timeline(plan: &AssignmentPlan, records: &[LabelRecord]) -> AgreementTimeline {
    let idx = index(records);
    let n_rounds = plan.n_rounds();
    let rows: Vec<PairRow> = (0..plan.pairs.len())
        .map(|p| PairRow {
            pair: plan.pairs[p].clone(),
            agreement: (0..n_rounds).map(|r| pair_round_with(&idx, plan, p, r)).collect(),
        })
        .collect();
    let averages = (0..n_rounds)
        .map(|r| {
            let done: Vec<f64> = rows.iter().filter_map(|row| row.agreement[r]).collect();
            (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
        })
        .collect();
    let mut marginals = Vec::new();
    for (p, (a, b)) in plan.pairs.iter().enumerate() {
        for ann in [a, b] {
            for (r, batch) in plan.rounds[p].iter().enumerate() {
                let (mut yes, mut no) = (0, 0);
                for post in batch {
                    match idx.get(&(ann.as_str(), post.as_str())).map(|l| l.decision) {
                        Some(Decision::Yes) => yes += 1,
                        Some(Decision::No) => no += 1,
                        None => {}
                    }
                }
                marginals.push(Marginal { annotator: ann.clone(), round: r as u32 + 1, yes, no });
            }
        }
    }
    AgreementTimeline { rows, averages, marginals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Decision::{No as N, Yes as Y};

    #[test]
    fn percent_examples() {
        assert_eq!(percent_agreement_decisions(&[Y, N, N, Y], &[Y, N, Y, Y]).unwrap(), 0.75);
        assert_eq!(percent_agreement_decisions(&[Y, N], &[Y, N]).unwrap(), 1.0);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohen_kappa_decisions(&[Y, Y, N, N], &[Y, Y, N, Y]).unwrap(), 0.5);
        assert_eq!(cohen_kappa_decisions(&[Y, N, Y], &[Y, N, Y]).unwrap(), 1.0);
        assert_eq!(cohen_kappa_decisions(&[N, N], &[N, N]).unwrap(), 1.0);
        let a = vec![N; 100];
        let mut b = vec![N; 100];
        b[17] = Y;
        assert_eq!(cohen_kappa_decisions(&a, &b).unwrap(), 0.0);
        assert!(matches!(cohen_kappa_decisions(&a, &b[1..]), Err(AnnotationError::BatchMismatch(_))));
    }

    #[test]
    fn fleiss_edges() {
        assert_eq!(fleiss_kappa(&[vec![Y, Y, Y], vec![N, N, N]]).unwrap(), 1.0);
        assert_eq!(fleiss_kappa(&[vec![N, N], vec![N, N]]).unwrap(), 0.0);
        assert!(matches!(fleiss_kappa(&[vec![Y, N], vec![Y]]), Err(AnnotationError::RaggedMatrix(_))));
        assert!(matches!(fleiss_kappa(&[vec![Y]]), Err(AnnotationError::RaggedMatrix(_))));
    }
}
