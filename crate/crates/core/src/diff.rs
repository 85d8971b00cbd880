//! Word-level diff between two documents.
//!
//! Text is split into alternating runs of whitespace and non-whitespace, so
//! punctuation stays attached to its word and the segments concatenate back
//! to the inputs exactly. The edit script is a shortest one (minimal number of
//! inserted plus deleted tokens), found with Myers' linear-space
//! divide-and-conquer over middle snakes.

use std::ops::{Index, IndexMut, Range};

use serde::{Deserialize, Serialize};

use crate::model::OutputDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Equal,
    Inserted,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSegment {
    pub kind: SegmentKind,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffView {
    pub segments: Vec<DiffSegment>,
}

impl DiffView {
    pub fn reconstruct_old(&self) -> String {
        self.join(SegmentKind::Deleted)
    }

    pub fn reconstruct_new(&self) -> String {
        self.join(SegmentKind::Inserted)
    }

    pub fn has_changes(&self) -> bool {
        self.segments.iter().any(|s| s.kind != SegmentKind::Equal)
    }

    fn join(&self, side: SegmentKind) -> String {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Equal || s.kind == side)
            .map(|s| s.text.as_str())
            .collect()
    }
}

/// One step of a token edit script.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenEdit {
    /// `old[i] == new[j]`
    Equal(usize, usize),
    Delete(usize),
    Insert(usize),
}

impl TokenEdit {
    pub fn is_change(&self) -> bool {
        !matches!(self, TokenEdit::Equal(..))
    }
}

/// Splits text into maximal whitespace and non-whitespace runs.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut prev_ws: Option<bool> = None;
    for (i, c) in text.char_indices() {
        let ws = c.is_whitespace();
        if prev_ws.is_some_and(|p| p != ws) {
            out.push(&text[start..i]);
            start = i;
        }
        prev_ws = Some(ws);
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

pub fn compute_diff(old: &OutputDocument, new: &OutputDocument) -> DiffView {
    diff_text(old.canonical_text(), new.canonical_text())
}

pub fn diff_text(old: &str, new: &str) -> DiffView {
    let a = tokenize(old);
    let b = tokenize(new);
    let ops = diff_tokens(&a, &b);

    let mut segments: Vec<DiffSegment> = Vec::new();
    let mut deleted = String::new();
    let mut inserted = String::new();
    let mut equal = String::new();
    let push = |segments: &mut Vec<DiffSegment>, kind, text: &mut String| {
        if !text.is_empty() {
            segments.push(DiffSegment { kind, text: std::mem::take(text) });
        }
    };
    for op in ops {
        match op {
            TokenEdit::Equal(i, _) => {
                push(&mut segments, SegmentKind::Deleted, &mut deleted);
                push(&mut segments, SegmentKind::Inserted, &mut inserted);
                equal.push_str(a[i]);
            }
            TokenEdit::Delete(i) => {
                push(&mut segments, SegmentKind::Equal, &mut equal);
                deleted.push_str(a[i]);
            }
            TokenEdit::Insert(j) => {
                push(&mut segments, SegmentKind::Equal, &mut equal);
                inserted.push_str(b[j]);
            }
        }
    }
    push(&mut segments, SegmentKind::Equal, &mut equal);
    push(&mut segments, SegmentKind::Deleted, &mut deleted);
    push(&mut segments, SegmentKind::Inserted, &mut inserted);
    DiffView { segments }
}

/// Shortest edit script between two token sequences. Within every run of
/// changes, deletions come before insertions.
pub fn diff_tokens<T: PartialEq>(old: &[T], new: &[T]) -> Vec<TokenEdit> {
    let mut raw = Vec::with_capacity(old.len() + new.len());
    let max_d = (old.len() + new.len()).div_ceil(2) + 1;
    let mut vf = V::new(max_d);
    let mut vb = V::new(max_d);
    conquer(old, new, 0..old.len(), 0..new.len(), &mut vf, &mut vb, &mut raw);

    // Reorder each change run: deletes first, then inserts.
    let mut out = Vec::with_capacity(raw.len());
    let mut dels = Vec::new();
    let mut ins = Vec::new();
    for op in raw {
        match op {
            TokenEdit::Equal(..) => {
                out.append(&mut dels);
                out.append(&mut ins);
                out.push(op);
            }
            TokenEdit::Delete(_) => dels.push(op),
            TokenEdit::Insert(_) => ins.push(op),
        }
    }
    out.append(&mut dels);
    out.append(&mut ins);
    out
}

/// Furthest-reaching x per diagonal, indexable by negative diagonals.
struct V {
    offset: isize,
    v: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        V { offset: max_d as isize + 1, v: vec![0; 2 * max_d + 3] }
    }
}

impl Index<isize> for V {
    type Output = usize;

    fn index(&self, k: isize) -> &usize {
        &self.v[(k + self.offset) as usize]
    }
}

impl IndexMut<isize> for V {
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.v[(k + self.offset) as usize]
    }
}

struct Snake {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

/// Finds the middle snake of `a` vs `b` (both non-empty, with differing first
/// and last elements).
fn middle_snake<T: PartialEq>(a: &[T], b: &[T], vf: &mut V, vb: &mut V) -> Snake {
    let n = a.len() as isize;
    let m = b.len() as isize;
    let delta = n - m;
    let odd = delta & 1 == 1;
    vf[1] = 0;
    vb[1] = 0;
    let d_max = (n + m + 1) / 2;
    for d in 0..=d_max {
        let mut k = -d;
        while k <= d {
            let mut x = if k == -d || (k != d && vf[k - 1] < vf[k + 1]) { vf[k + 1] } else { vf[k - 1] + 1 };
            let mut y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            while (x as isize) < n && (y as isize) < m && a[x] == b[y] {
                x += 1;
                y += 1;
            }
            vf[k] = x;
            if odd && (k - delta).abs() < d && (vf[k] + vb[delta - k]) as isize >= n {
                return Snake { x0, y0, x1: x, y1: y };
            }
            k += 2;
        }
        let mut k = -d;
        while k <= d {
            let mut x = if k == -d || (k != d && vb[k - 1] < vb[k + 1]) { vb[k + 1] } else { vb[k - 1] + 1 };
            let mut y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            while (x as isize) < n && (y as isize) < m && a[a.len() - 1 - x] == b[b.len() - 1 - y] {
                x += 1;
                y += 1;
            }
            vb[k] = x;
            if !odd && (k - delta).abs() <= d && (vb[k] + vf[delta - k]) as isize >= n {
                return Snake { x0: a.len() - x, y0: b.len() - y, x1: a.len() - x0, y1: b.len() - y0 };
            }
            k += 2;
        }
    }
    unreachable!("middle snake always exists within d_max")
}

fn conquer<T: PartialEq>(
    old: &[T],
    new: &[T],
    mut ra: Range<usize>,
    mut rb: Range<usize>,
    vf: &mut V,
    vb: &mut V,
    out: &mut Vec<TokenEdit>,
) {
    while ra.start < ra.end && rb.start < rb.end && old[ra.start] == new[rb.start] {
        out.push(TokenEdit::Equal(ra.start, rb.start));
        ra.start += 1;
        rb.start += 1;
    }
    let mut suffix = 0;
    while ra.start < ra.end - suffix
        && rb.start < rb.end - suffix
        && old[ra.end - suffix - 1] == new[rb.end - suffix - 1]
    {
        suffix += 1;
    }
    let (sa, sb) = (ra.end - suffix, rb.end - suffix);

    if ra.start == sa {
        out.extend((rb.start..sb).map(TokenEdit::Insert));
    } else if rb.start == sb {
        out.extend((ra.start..sa).map(TokenEdit::Delete));
    } else {
        let snake = middle_snake(&old[ra.start..sa], &new[rb.start..sb], vf, vb);
        let (x0, y0) = (ra.start + snake.x0, rb.start + snake.y0);
        let (x1, y1) = (ra.start + snake.x1, rb.start + snake.y1);
        conquer(old, new, ra.start..x0, rb.start..y0, vf, vb, out);
        out.extend((x0..x1).zip(y0..y1).map(|(i, j)| TokenEdit::Equal(i, j)));
        conquer(old, new, x1..sa, y1..sb, vf, vb, out);
    }
    out.extend((sa..ra.end).zip(sb..rb.end).map(|(i, j)| TokenEdit::Equal(i, j)));
}
