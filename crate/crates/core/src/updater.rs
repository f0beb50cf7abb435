//! Insertions and deletions on the encoded text, and edit-script files.

use crate::encoder::assemble;
use crate::error::{Result, SigdexError};
use crate::lce_engine::{uniq_of_string, uniq_of_substring};
use crate::lcp_core::ParseParams;
use crate::sig_store::{Sig, SignatureDag};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EditOp {
    Insert { y: Vec<u8>, i: u64 },
    InsertCopy { j: u64, y: u64, i: u64 },
    Delete { j: u64, y: u64 },
}

impl EditOp {
    /// Length of the inserted or deleted substring.
    pub fn size(&self) -> u64 {
        match self {
            EditOp::Insert { y, .. } => y.len() as u64,
            EditOp::InsertCopy { y, .. } | EditOp::Delete { y, .. } => *y,
        }
    }

    /// Applies the edit to a plain byte string.
    pub fn apply_naive(&self, t: &mut Vec<u8>) {
        match self {
            EditOp::Insert { y, i } => {
                let at = (*i - 1) as usize;
                t.splice(at..at, y.iter().copied());
            }
            EditOp::InsertCopy { j, y, i } => {
                let src = t[(*j - 1) as usize..(*j - 1 + *y) as usize].to_vec();
                let at = (*i - 1) as usize;
                t.splice(at..at, src);
            }
            EditOp::Delete { j, y } => {
                t.drain((*j - 1) as usize..(*j - 1 + *y) as usize);
            }
        }
    }
}

fn uniq_pieces(dag: &SignatureDag, params: &ParseParams, root: Option<Sig>, j: u64, y: u64) -> Result<Vec<(Sig, u64)>> {
    if y == 0 {
        return Ok(Vec::new());
    }
    let root = root.ok_or_else(|| SigdexError::internal("range of an empty text"))?;
    let (u, _) = uniq_of_substring(dag, params, root, j, y)?;
    Ok(u.pieces())
}

fn with_visits(dag: &mut SignatureDag, params: &ParseParams, root: Option<Sig>, j: u64, y: u64) -> Result<Vec<(Sig, u64)>> {
    if y == 0 {
        return Ok(Vec::new());
    }
    let r = root.ok_or_else(|| SigdexError::internal("range of an empty text"))?;
    let (u, v) = uniq_of_substring(dag, params, r, j, y)?;
    dag.stats.nodes_visited += v;
    Ok(u.pieces())
}

fn splice(dag: &mut SignatureDag, params: &ParseParams, pieces: Vec<(Sig, u64)>) -> Result<()> {
    let root = assemble(dag, params, &pieces)?;
    dag.replace_root(root)
}

fn capacity(dag: &SignatureDag, new_len: u64) -> Result<()> {
    if new_len > dag.m() / 4 {
        return Err(SigdexError::CapacityExhausted(dag.m()));
    }
    Ok(())
}

/// Inserts `y` so that it starts at position `i` of the new text.
pub fn insert(dag: &mut SignatureDag, params: &ParseParams, y: &[u8], i: u64) -> Result<()> {
    let n = dag.text_len();
    if i < 1 || i > n + 1 {
        return Err(SigdexError::invalid(format!("insert position {i} outside 1..{}", n + 1)));
    }
    if y.is_empty() {
        return Ok(());
    }
    capacity(dag, n + y.len() as u64)?;
    let root = dag.root();
    let mut pieces = with_visits(dag, params, root, 1, i - 1)?;
    pieces.extend(uniq_of_string(dag, params, y)?.pieces());
    pieces.extend(with_visits(dag, params, root, i, n + 1 - i)?);
    splice(dag, params, pieces)
}

/// Inserts a copy of `T[j..j+y-1]` at position `i`.
pub fn insert_copy(dag: &mut SignatureDag, params: &ParseParams, j: u64, y: u64, i: u64) -> Result<()> {
    let n = dag.text_len();
    if y == 0 || j < 1 || j + y - 1 > n {
        return Err(SigdexError::invalid(format!("source range {j}+{y} outside 1..{n}")));
    }
    if i < 1 || i > n + 1 {
        return Err(SigdexError::invalid(format!("insert position {i} outside 1..{}", n + 1)));
    }
    capacity(dag, n + y)?;
    let root = dag.root();
    let mut pieces = with_visits(dag, params, root, 1, i - 1)?;
    pieces.extend(with_visits(dag, params, root, j, y)?);
    pieces.extend(with_visits(dag, params, root, i, n + 1 - i)?);
    splice(dag, params, pieces)
}

/// Removes `T[j..j+y-1]`.
pub fn delete(dag: &mut SignatureDag, params: &ParseParams, j: u64, y: u64) -> Result<()> {
    let n = dag.text_len();
    if y == 0 || j < 1 || j + y - 1 > n {
        return Err(SigdexError::invalid(format!("delete range {j}+{y} outside 1..{n}")));
    }
    let root = dag.root();
    let mut pieces = with_visits(dag, params, root, 1, j - 1)?;
    pieces.extend(with_visits(dag, params, root, j + y, n + 1 - j - y)?);
    splice(dag, params, pieces)
}

pub fn apply(dag: &mut SignatureDag, params: &ParseParams, op: &EditOp) -> Result<()> {
    match op {
        EditOp::Insert { y, i } => insert(dag, params, y, *i),
        EditOp::InsertCopy { j, y, i } => insert_copy(dag, params, *j, *y, *i),
        EditOp::Delete { j, y } => delete(dag, params, *j, *y),
    }
}

/// Uniq pieces of a range of the current text, read-only.
pub fn range_pieces(dag: &SignatureDag, params: &ParseParams, j: u64, y: u64) -> Result<Vec<(Sig, u64)>> {
    uniq_pieces(dag, params, dag.root(), j, y)
}

/// Escapes bytes for the `I` line of an edit script.
pub fn escape(y: &[u8]) -> String {
    let mut s = String::new();
    for &c in y {
        match c {
            b'\\' => s.push_str("\\\\"),
            b' ' => s.push_str("\\s"),
            b'\n' => s.push_str("\\n"),
            b'\t' => s.push_str("\\t"),
            b'\r' => s.push_str("\\r"),
            0x21..=0x7e => s.push(c as char),
            _ => s.push_str(&format!("\\x{c:02x}")),
        }
    }
    s
}

pub fn unescape(s: &str) -> Result<Vec<u8>> {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    while i < b.len() {
        if b[i] != b'\\' {
            out.push(b[i]);
            i += 1;
            continue;
        }
        let bad = || SigdexError::format(format!("bad escape in {s:?}"));
        match b.get(i + 1).ok_or_else(bad)? {
            b'\\' => out.push(b'\\'),
            b's' => out.push(b' '),
            b'n' => out.push(b'\n'),
            b't' => out.push(b'\t'),
            b'r' => out.push(b'\r'),
            b'x' => {
                let hex = s.get(i + 2..i + 4).ok_or_else(bad)?;
                out.push(u8::from_str_radix(hex, 16).map_err(|_| bad())?);
                i += 2;
            }
            _ => return Err(bad()),
        }
        i += 2;
    }
    Ok(out)
}

pub fn parse_script(text: &str) -> Result<Vec<EditOp>> {
    let mut ops = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || SigdexError::format(format!("line {}: {line:?}", ln + 1));
        let num = |x: Option<&str>| -> Result<u64> { x.ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let mut f = line.splitn(3, ' ');
        match f.next() {
            Some("I") => {
                let i = num(f.next())?;
                let y = unescape(f.next().ok_or_else(bad)?)?;
                ops.push(EditOp::Insert { y, i });
            }
            Some("C") => {
                let mut g = line[1..].split_whitespace();
                let (j, y, i) = (num(g.next())?, num(g.next())?, num(g.next())?);
                if g.next().is_some() {
                    return Err(bad());
                }
                ops.push(EditOp::InsertCopy { j, y, i });
            }
            Some("D") => {
                let mut g = line[1..].split_whitespace();
                let (j, y) = (num(g.next())?, num(g.next())?);
                if g.next().is_some() {
                    return Err(bad());
                }
                ops.push(EditOp::Delete { j, y });
            }
            _ => return Err(bad()),
        }
    }
    Ok(ops)
}

pub fn format_script(ops: &[EditOp]) -> String {
    let mut s = String::new();
    for op in ops {
        match op {
            EditOp::Insert { y, i } => s.push_str(&format!("I {i} {}\n", escape(y))),
            EditOp::InsertCopy { j, y, i } => s.push_str(&format!("C {j} {y} {i}\n")),
            EditOp::Delete { j, y } => s.push_str(&format!("D {j} {y}\n")),
        }
    }
    s
}
