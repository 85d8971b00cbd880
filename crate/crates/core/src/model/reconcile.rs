//! Merging freshly extracted intents and dimensions into the live panel.
//!
//! Identity is by normalized text (case-folded, trimmed, whitespace
//! collapsed). Matches keep their id; kept intents always survive; user
//! settings on dimensions win over re-proposed initial values.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::types::*;
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq)]
pub struct IntentProposal {
    pub text: String,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionProposal {
    pub title: String,
    pub domain: DimensionDomain,
    pub initial: DimensionValue,
    pub value_descriptions: BTreeMap<String, String>,
}

/// Reconciles a proposal list against the existing intents.
///
/// Output order: surviving existing intents in their existing order, then new
/// intents in proposal order. When more than [`MAX_INTENTS`] remain, non-kept
/// candidates with the lowest salience are dropped first (ties broken by
/// proposal order, later ones dropped first).
pub fn reconcile_intents(
    existing: &[Intent],
    proposals: &[IntentProposal],
    turn: u32,
    counters: &mut IdCounters,
) -> Vec<Intent> {
    let mut seen = HashSet::new();
    let proposals: Vec<(usize, &IntentProposal)> = proposals
        .iter()
        .filter(|p| !p.text.trim().is_empty() && seen.insert(normalize(&p.text)))
        .enumerate()
        .collect();

    let by_norm: HashMap<String, usize> =
        existing.iter().enumerate().map(|(i, it)| (normalize(&it.text), i)).collect();

    // Candidates: (existing index | None, proposal order, salience)
    let mut matched: HashMap<usize, (usize, f64)> = HashMap::new();
    let mut fresh: Vec<(usize, f64, &str)> = Vec::new();
    for (order, p) in &proposals {
        match by_norm.get(&normalize(&p.text)) {
            Some(&idx) => {
                matched.entry(idx).or_insert((*order, p.salience));
            }
            None => fresh.push((*order, p.salience, p.text.trim())),
        }
    }

    let kept_count = existing.iter().filter(|i| i.kept).count();
    let budget = MAX_INTENTS.saturating_sub(kept_count);

    // Rank non-kept candidates by salience, descending; ties by proposal order.
    #[derive(Clone, Copy)]
    enum Cand {
        Existing(usize),
        Fresh(usize),
    }
    let mut ranked: Vec<(f64, usize, Cand)> = Vec::new();
    for (&idx, &(order, sal)) in &matched {
        if !existing[idx].kept {
            ranked.push((sal, order, Cand::Existing(idx)));
        }
    }
    for (fi, &(order, sal, _)) in fresh.iter().enumerate() {
        ranked.push((sal, order, Cand::Fresh(fi)));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.truncate(budget);

    let mut keep_existing: HashSet<usize> =
        existing.iter().enumerate().filter(|(_, i)| i.kept).map(|(i, _)| i).collect();
    let mut keep_fresh: Vec<usize> = Vec::new();
    for (_, _, c) in ranked {
        match c {
            Cand::Existing(i) => {
                keep_existing.insert(i);
            }
            Cand::Fresh(f) => keep_fresh.push(f),
        }
    }
    keep_fresh.sort_by_key(|&f| fresh[f].0);

    let mut out: Vec<Intent> = existing
        .iter()
        .enumerate()
        .filter(|(i, _)| keep_existing.contains(i))
        .map(|(_, it)| it.clone())
        .collect();
    for f in keep_fresh {
        out.push(Intent {
            id: counters.intent(),
            text: fresh[f].2.to_string(),
            kept: false,
            origin: IntentOrigin::Extracted,
            created_turn: turn,
        });
    }
    out
}

/// Reconciles proposed dimensions against the existing ones.
///
/// A proposal whose normalized title matches an existing dimension keeps that
/// dimension's id and current value. The proposed domain and descriptions are
/// adopted only when the ui kind is unchanged and the current value still fits
/// the new domain; otherwise the existing dimension is kept as is. At most
/// [`MAX_DIMENSIONS`] proposals are taken, in proposal order.
pub fn reconcile_dimensions(
    existing: &[Dimension],
    proposals: &[DimensionProposal],
    counters: &mut IdCounters,
) -> Vec<Dimension> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in proposals {
        if out.len() == MAX_DIMENSIONS {
            break;
        }
        let key = normalize(&p.title);
        if key.is_empty() || !seen.insert(key.clone()) {
            continue;
        }
        match existing.iter().find(|d| normalize(&d.title) == key) {
            Some(old) => out.push(merge_dimension(old, p)),
            None => out.push(Dimension {
                id: counters.dimension(),
                title: p.title.trim().to_string(),
                domain: p.domain.clone(),
                current: p.initial.clone(),
                value_descriptions: p.value_descriptions.clone(),
            }),
        }
    }
    out
}

fn merge_dimension(old: &Dimension, p: &DimensionProposal) -> Dimension {
    if old.ui_kind() != p.domain.ui_kind() {
        return old.clone();
    }
    let mut domain = p.domain.clone();
    if let (DimensionDomain::Hashtag { tags }, DimensionValue::Hashtag(current)) =
        (&mut domain, &old.current)
    {
        for t in current {
            if !tags.contains(t) {
                tags.push(t.clone());
            }
        }
    }
    if value_in_domain(&domain, &old.current).is_err() {
        return old.clone();
    }
    let mut value_descriptions = p.value_descriptions.clone();
    for (k, v) in &old.value_descriptions {
        value_descriptions.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Dimension {
        id: old.id,
        title: old.title.clone(),
        domain,
        current: old.current.clone(),
        value_descriptions,
    }
}
