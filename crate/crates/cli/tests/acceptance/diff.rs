use std::cell::Cell;

use anyhow::{anyhow, Result};
use intentflow_core::diff::{diff_text, diff_tokens, TokenEdit};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use crate::common::runner;

const PAIRS: u32 = 500;

/// Textbook O(nm) longest common subsequence length.
fn lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] { t[i + 1][j + 1] + 1 } else { t[i + 1][j].max(t[i][j + 1]) };
        }
    }
    t[0][0]
}

/// Brute-force LCS over every subsequence of `a`, for tiny inputs.
fn lcs_brute(a: &[String], b: &[String]) -> usize {
    let is_subseq = |sub: &[&String]| {
        let mut it = b.iter();
        sub.iter().all(|x| it.any(|y| y == *x))
    };
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
            is_subseq(&sub).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

fn tokens(max: usize) -> impl Strategy<Value = Vec<String>> {
    // A small vocabulary makes common subsequences likely.
    prop::collection::vec(prop::sample::select(vec!["the", "leaf", "light", "sugar", "water", "CO2", "makes", "a", "é"]), 0..=max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn pair(max: usize) -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
    prop_oneof![
        (tokens(max), tokens(max)),
        // Related pairs: b is an edited copy of a.
        (tokens(max), prop::collection::vec((any::<bool>(), 0usize..9), 0..20)).prop_map(move |(a, edits)| {
            let mut b = a.clone();
            for (insert, at) in edits {
                let at = if b.is_empty() { 0 } else { at * 7919 % (b.len() + usize::from(insert)) };
                if insert && b.len() < max {
                    b.insert(at, "new".into());
                } else if !insert && at < b.len() {
                    b.remove(at);
                }
            }
            (a, b)
        }),
    ]
}

fn check_pair(a: &[String], b: &[String]) -> Result<usize, TestCaseError> {
    let script = diff_tokens(a, b);
    let (mut i, mut j, mut cost) = (0, 0, 0);
    for op in &script {
        match *op {
            TokenEdit::Equal(x, y) => {
                prop_assert!(x == i && y == j && a[x] == b[y], "bad equal {:?}", op);
                i += 1;
                j += 1;
            }
            TokenEdit::Delete(x) => {
                prop_assert_eq!(x, i);
                i += 1;
                cost += 1;
            }
            TokenEdit::Insert(y) => {
                prop_assert_eq!(y, j);
                j += 1;
                cost += 1;
            }
        }
    }
    prop_assert_eq!((i, j), (a.len(), b.len()), "script does not cover both sides");
    let oracle = a.len() + b.len() - 2 * lcs(a, b);
    prop_assert_eq!(cost, oracle, "edit cost differs from the LCS oracle");

    let (old, new) = (a.join(" "), b.join("  "));
    let view = diff_text(&old, &new);
    prop_assert_eq!(view.reconstruct_old(), old);
    prop_assert_eq!(view.reconstruct_new(), new);
    Ok(cost)
}

pub fn check() -> Result<String> {
    let mut r = runner(PAIRS);
    let worst = Cell::new(0);
    r.run(&pair(200), |(a, b)| {
        worst.set(worst.get().max(check_pair(&a, &b)?));
        Ok(())
    })
    .map_err(|e| anyhow!("{e}"))?;

    // The dynamic-programming oracle itself, against exhaustive search.
    let mut r = runner(200);
    r.run(&(tokens(10), tokens(10)), |(a, b)| {
        prop_assert_eq!(lcs(&a, &b), lcs_brute(&a, &b));
        Ok(())
    })
    .map_err(|e| anyhow!("oracle self-check: {e}"))?;
    Ok(format!("{PAIRS} pairs up to 200 tokens match the LCS edit cost (max cost {}); both reconstructions exact", worst.get()))
}
