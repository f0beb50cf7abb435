//! Pattern matching over the grammar: primary occurrences found by
//! rectangle reporting on a plane of (reversed left part, right part)
//! points, expanded to all occurrences by walking parents upward.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Result, SigdexError};
use crate::lce_engine::{compare_operands, uniq_of_string, Operand};
use crate::lcp_core::ParseParams;
use crate::sig_store::{Assignment, Sig, SignatureDag, StoreEvent};

/// Labels are spread over the full `u64` range; the plane tree only resolves
/// the top `64 - LEAF_BITS` bits and filters by exact label below that.
const LEAF_BITS: u32 = 32;

/// The two string parts of a point: `left` and `right` as operands.
pub fn point_parts(dag: &SignatureDag, e: Sig) -> Option<(Operand, Operand)> {
    match dag.try_node(e)?.assign {
        Assignment::Pair(l, r) => Some((Operand::of(l), Operand::of(r))),
        Assignment::Run(b, d) if d >= 2 => Some((Operand::of(b), Operand { sig: b, count: d - 1 })),
        _ => None,
    }
}

/// Up to `m` characters of `o`, from the front, or from the back in reverse.
pub fn operand_affix(dag: &SignatureDag, o: Operand, m: u64, reversed: bool) -> Vec<u8> {
    let lb = dag.length(o.sig);
    let total = m.min(lb * o.count);
    let mut out = Vec::with_capacity(total as usize);
    while (out.len() as u64) < total {
        let take = (total - out.len() as u64).min(lb);
        if reversed {
            let mut s = dag.expand(o.sig, lb - take + 1, lb).expect("range inside node");
            s.reverse();
            out.extend(s);
        } else {
            out.extend(dag.expand(o.sig, 1, take).expect("range inside node"));
        }
    }
    out
}

/// Order of the first `|s|` characters of `o` against `s`.
fn cmp_truncated(dag: &SignatureDag, o: Operand, s: &[u8], reversed: bool) -> Ordering {
    operand_affix(dag, o, s.len() as u64, reversed).as_slice().cmp(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Key {
    sig: Sig,
    count: u64,
}

impl From<Operand> for Key {
    fn from(o: Operand) -> Self {
        Key { sig: o.sig, count: o.count }
    }
}

impl Key {
    fn op(self) -> Operand {
        Operand { sig: self.sig, count: self.count }
    }
}

/// One axis: distinct operands in string order (forward or reversed), each
/// with an order-preserving label and a use count.
#[derive(Clone, Debug, Default)]
struct Axis {
    reversed: bool,
    keys: Vec<(u64, Key)>,
    info: HashMap<Key, (u64, u32)>,
}

impl Axis {
    fn new(reversed: bool) -> Self {
        Axis { reversed, ..Default::default() }
    }

    fn cmp_keys(&self, dag: &SignatureDag, a: Key, b: Key) -> Ordering {
        compare_operands(dag, a.op(), b.op(), self.reversed)
            .expect("axis keys are live")
            .then(a.cmp(&b))
    }

    /// Adds one use of `k`. Returns true when every label was reassigned.
    fn acquire(&mut self, dag: &SignatureDag, k: Key) -> bool {
        if let Some(x) = self.info.get_mut(&k) {
            x.1 += 1;
            return false;
        }
        let pos = self.keys.partition_point(|&(_, e)| self.cmp_keys(dag, e, k) == Ordering::Less);
        let lo = if pos == 0 { 0 } else { self.keys[pos - 1].0 };
        let hi = if pos == self.keys.len() { u64::MAX } else { self.keys[pos].0 };
        if hi - lo >= 2 {
            let lab = lo + (hi - lo) / 2;
            self.keys.insert(pos, (lab, k));
            self.info.insert(k, (lab, 1));
            false
        } else {
            self.keys.insert(pos, (0, k));
            self.info.insert(k, (0, 1));
            self.relabel();
            true
        }
    }

    fn relabel(&mut self) {
        let gap = u64::MAX / (self.keys.len() as u64 + 1);
        for (i, (lab, k)) in self.keys.iter_mut().enumerate() {
            *lab = gap * (i as u64 + 1);
            self.info.get_mut(k).unwrap().0 = *lab;
        }
    }

    fn release(&mut self, k: Key) -> Result<()> {
        let (lab, cnt) = *self.info.get(&k).ok_or_else(|| SigdexError::internal("axis key missing"))?;
        if cnt > 1 {
            self.info.get_mut(&k).unwrap().1 -= 1;
            return Ok(());
        }
        self.info.remove(&k);
        let pos = self.keys.partition_point(|&(l, _)| l < lab);
        if self.keys.get(pos) != Some(&(lab, k)) {
            return Err(SigdexError::internal("axis label out of order"));
        }
        self.keys.remove(pos);
        Ok(())
    }

    fn label(&self, k: Key) -> u64 {
        self.info[&k].0
    }

    /// Label range of the keys whose string (in axis direction) starts with `s`.
    fn range(&self, dag: &SignatureDag, s: &[u8]) -> Option<(u64, u64)> {
        let lo = self.keys.partition_point(|&(_, k)| cmp_truncated(dag, k.op(), s, self.reversed) == Ordering::Less);
        let hi = self.keys.partition_point(|&(_, k)| cmp_truncated(dag, k.op(), s, self.reversed) != Ordering::Greater);
        (lo < hi).then(|| (self.keys[lo].0, self.keys[hi - 1].0))
    }
}

/// Axis keys of one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Point {
    x: Key,
    y: Key,
}

/// Dynamic point set with rectangle reporting: a binary trie over the high
/// bits of x labels whose nodes hold their points sorted by y.
#[derive(Clone, Debug, Default)]
pub struct IndexPlane {
    xaxis: Axis,
    yaxis: Axis,
    points: BTreeMap<Sig, Point>,
    tree: HashMap<(u32, u64), BTreeSet<(u64, u64, Sig)>>,
}

impl IndexPlane {
    pub fn new() -> Self {
        IndexPlane { xaxis: Axis::new(true), yaxis: Axis::new(false), ..Default::default() }
    }

    /// Plane of every Pair node and every Run node with exponent at least 2.
    pub fn build(dag: &SignatureDag) -> Self {
        let mut p = IndexPlane::new();
        for (e, _) in dag.iter() {
            p.add(dag, e);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, e: Sig) -> bool {
        self.points.contains_key(&e)
    }

    fn tree_insert(&mut self, e: Sig, x: u64, y: u64) {
        for k in LEAF_BITS..=64 {
            let pre = if k == 64 { 0 } else { x >> k };
            self.tree.entry((k, pre)).or_default().insert((y, x, e));
        }
    }

    fn tree_remove(&mut self, e: Sig, x: u64, y: u64) {
        for k in LEAF_BITS..=64 {
            let pre = if k == 64 { 0 } else { x >> k };
            if let Some(s) = self.tree.get_mut(&(k, pre)) {
                s.remove(&(y, x, e));
                if s.is_empty() {
                    self.tree.remove(&(k, pre));
                }
            }
        }
    }

    fn rebuild_tree(&mut self) {
        self.tree.clear();
        let pts: Vec<(Sig, Point)> = self.points.iter().map(|(&e, &p)| (e, p)).collect();
        for (e, p) in pts {
            let (x, y) = (self.xaxis.label(p.x), self.yaxis.label(p.y));
            self.tree_insert(e, x, y);
        }
    }

    /// Adds the point of `e` if `e` is a Pair or a Run with exponent >= 2.
    pub fn add(&mut self, dag: &SignatureDag, e: Sig) -> bool {
        let Some((l, r)) = point_parts(dag, e) else { return false };
        let p = Point { x: l.into(), y: r.into() };
        let rx = self.xaxis.acquire(dag, p.x);
        let ry = self.yaxis.acquire(dag, p.y);
        self.points.insert(e, p);
        if rx || ry {
            self.rebuild_tree();
        } else {
            let (x, y) = (self.xaxis.label(p.x), self.yaxis.label(p.y));
            self.tree_insert(e, x, y);
        }
        true
    }

    /// Removes the point of `e`; no string comparisons, so `e` may be dead.
    pub fn remove(&mut self, e: Sig) -> Result<()> {
        let p = self.points.remove(&e).ok_or_else(|| SigdexError::internal(format!("no point for {e}")))?;
        let (x, y) = (self.xaxis.label(p.x), self.yaxis.label(p.y));
        self.tree_remove(e, x, y);
        self.xaxis.release(p.x)?;
        self.yaxis.release(p.y)
    }

    /// Applies store events: every touched signature loses its old point,
    /// then live ones get a fresh point.
    pub fn sync(&mut self, dag: &SignatureDag, events: &[StoreEvent]) -> Result<()> {
        let touched: BTreeSet<Sig> = events
            .iter()
            .map(|ev| match *ev {
                StoreEvent::Added(e) | StoreEvent::Removed(e, _) => e,
            })
            .collect();
        for &e in &touched {
            if self.points.contains_key(&e) {
                self.remove(e)?;
            }
        }
        for &e in &touched {
            if dag.contains(e) {
                self.add(dag, e);
            }
        }
        Ok(())
    }

    /// Points with x label in `[x1, x2]` and y label in `[y1, y2]`.
    pub fn report(&self, x1: u64, x2: u64, y1: u64, y2: u64) -> Vec<Sig> {
        let mut out = Vec::new();
        if x1 > x2 || y1 > y2 {
            return out;
        }
        self.report_rec(64, 0, x1, x2, y1, y2, &mut out);
        out.sort_unstable();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn report_rec(&self, k: u32, pre: u64, x1: u64, x2: u64, y1: u64, y2: u64, out: &mut Vec<Sig>) {
        let Some(set) = self.tree.get(&(k, pre)) else { return };
        let lo = (pre as u128) << k;
        let hi = lo + (1u128 << k) - 1;
        if hi < x1 as u128 || lo > x2 as u128 {
            return;
        }
        let inside = lo >= x1 as u128 && hi <= x2 as u128;
        if inside || k == LEAF_BITS {
            for &(_, x, e) in set.range((y1, 0, 0)..=(y2, u64::MAX, Sig::MAX)) {
                if x >= x1 && x <= x2 {
                    out.push(e);
                }
            }
            return;
        }
        let base = if k == 64 { 0 } else { pre << 1 };
        self.report_rec(k - 1, base, x1, x2, y1, y2, out);
        self.report_rec(k - 1, base | 1, x1, x2, y1, y2, out);
    }

    /// Label rectangle of the points whose left part ends with `p[..j]` and
    /// whose right part starts with `p[j..]`.
    pub fn pattern_ranges(&self, dag: &SignatureDag, p: &[u8], j: usize) -> Option<(u64, u64, u64, u64)> {
        if j < 1 || j >= p.len() {
            return None;
        }
        let left: Vec<u8> = p[..j].iter().rev().copied().collect();
        let (x1, x2) = self.xaxis.range(dag, &left)?;
        let (y1, y2) = self.yaxis.range(dag, &p[j..])?;
        Some((x1, x2, y1, y2))
    }

    /// Current (x, y) labels of the point of `e`.
    pub fn labels(&self, e: Sig) -> Option<(u64, u64)> {
        let p = self.points.get(&e)?;
        Some((self.xaxis.label(p.x), self.yaxis.label(p.y)))
    }

    /// Every point with its labels.
    pub fn labelled_points(&self) -> Vec<(Sig, u64, u64)> {
        self.points.keys().map(|&e| {
            let (x, y) = self.labels(e).unwrap();
            (e, x, y)
        }).collect()
    }

    /// Points with their parts, for audits.
    pub fn snapshot(&self) -> Vec<(Sig, (Sig, u64), (Sig, u64))> {
        self.points.iter().map(|(&e, p)| (e, (p.x.sig, p.x.count), (p.y.sig, p.y.count))).collect()
    }

    /// Checks labels, counts, the trie and the axis orders by full expansion.
    pub fn audit(&self, dag: &SignatureDag) -> Result<()> {
        let fresh = IndexPlane::build(dag);
        if fresh.snapshot() != self.snapshot() {
            return Err(SigdexError::internal("plane differs from a rebuild"));
        }
        for ax in [&self.xaxis, &self.yaxis] {
            let order: Vec<Key> = ax.keys.iter().map(|k| k.1).collect();
            let other = if ax.reversed { &fresh.xaxis } else { &fresh.yaxis };
            if order != other.keys.iter().map(|k| k.1).collect::<Vec<_>>() {
                return Err(SigdexError::internal("axis order differs from a rebuild"));
            }
            for w in ax.keys.windows(2) {
                if w[0].0 >= w[1].0 {
                    return Err(SigdexError::internal("axis labels not increasing"));
                }
                let s = |k: Key| operand_affix(dag, k.op(), u64::MAX, ax.reversed);
                if s(w[0].1) > s(w[1].1) {
                    return Err(SigdexError::internal("axis strings out of order"));
                }
            }
            let mut uses: HashMap<Key, u32> = HashMap::new();
            for p in self.points.values() {
                *uses.entry(if ax.reversed { p.x } else { p.y }).or_default() += 1;
            }
            if uses.len() != ax.info.len() || uses.iter().any(|(k, &c)| ax.info.get(k).map(|x| x.1) != Some(c)) {
                return Err(SigdexError::internal("axis use counts wrong"));
            }
        }
        let top = self.tree.get(&(64, 0)).map_or(0, BTreeSet::len);
        if top != self.points.len() {
            return Err(SigdexError::internal("plane trie size mismatch"));
        }
        Ok(())
    }
}

/// A primary occurrence: the pattern starts at `offset` (1-based) inside
/// `val(sig)` and straddles the split of `sig`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimaryOcc {
    pub sig: Sig,
    pub offset: u64,
}

/// Split positions of `p` to query. With `all_splits` every split is used,
/// which is needed for grammars that are not signature encodings.
pub fn split_positions(dag: &mut SignatureDag, params: &ParseParams, p: &[u8], all_splits: bool) -> Result<Vec<usize>> {
    if p.len() < 2 {
        return Ok(Vec::new());
    }
    if all_splits {
        return Ok((1..p.len()).collect());
    }
    if p.iter().all(|&c| c == p[0]) {
        return Ok(vec![1]);
    }
    let u = uniq_of_string(dag, params, p)?.pow_runs();
    let mut out = Vec::with_capacity(u.len());
    let mut at = 0u64;
    for w in u.windows(2) {
        at += dag.length(w[0].0) * w[0].1;
        out.push(at as usize);
    }
    Ok(out)
}

/// Primary occurrences of `p` (|p| >= 2) through the plane.
pub fn primary_from_splits(dag: &SignatureDag, plane: &IndexPlane, p: &[u8], splits: &[usize]) -> BTreeSet<PrimaryOcc> {
    let mut out = BTreeSet::new();
    for &j in splits {
        let Some((x1, x2, y1, y2)) = plane.pattern_ranges(dag, p, j) else { continue };
        for e in plane.report(x1, x2, y1, y2) {
            let left = point_parts(dag, e).unwrap().0;
            out.insert(PrimaryOcc { sig: e, offset: dag.length(left.sig) - j as u64 + 1 });
        }
    }
    out
}

/// Calls `f` with the 1-based start of every occurrence of `e` in the
/// derivation tree of `root`, walking parent links upward.
pub fn for_each_vocc(dag: &SignatureDag, root: Sig, e: Sig, f: &mut dyn FnMut(u64)) {
    let mut st = vec![(e, 0u64)];
    while let Some((x, off)) = st.pop() {
        if x == root {
            f(off + 1);
        }
        for p in dag.node(x).parents() {
            match dag.assign(p) {
                Assignment::Pair(l, r) => {
                    if l == x {
                        st.push((p, off));
                    }
                    if r == x {
                        st.push((p, off + dag.length(l)));
                    }
                }
                Assignment::Run(b, k) => {
                    let lb = dag.length(b);
                    for c in 0..k {
                        st.push((p, off + c * lb));
                    }
                }
                Assignment::Char(_) => {}
            }
        }
    }
}

/// Streams every occurrence start of `p` in the text under `root`.
pub fn for_each_occurrence(
    dag: &SignatureDag,
    plane: &IndexPlane,
    root: Sig,
    p: &[u8],
    splits: &[usize],
    f: &mut dyn FnMut(u64),
) {
    if p.is_empty() || p.len() as u64 > dag.length(root) {
        return;
    }
    if p.len() == 1 {
        if let Some(c) = dag.lookup(&Assignment::Char(p[0])) {
            for_each_vocc(dag, root, c, f);
        }
        return;
    }
    for occ in primary_from_splits(dag, plane, p, splits) {
        let mut shifts = vec![occ.offset - 1];
        if let Assignment::Run(b, _) = dag.assign(occ.sig) {
            let (lb, le) = (dag.length(b), dag.length(occ.sig));
            let mut s = occ.offset - 1 + lb;
            while s + p.len() as u64 <= le {
                shifts.push(s);
                s += lb;
            }
        }
        for_each_vocc(dag, root, occ.sig, &mut |v| {
            for &s in &shifts {
                f(v + s);
            }
        });
    }
}

/// Brute-force primary occurrences straight from the definition.
pub fn primary_naive(dag: &SignatureDag, p: &[u8]) -> BTreeSet<PrimaryOcc> {
    let mut out = BTreeSet::new();
    for (e, _) in dag.iter() {
        let Some((l, r)) = point_parts(dag, e) else { continue };
        for j in 1..p.len() {
            let ls = operand_affix(dag, l, j as u64, true);
            let rs = operand_affix(dag, r, (p.len() - j) as u64, false);
            if ls.len() == j && rs.len() == p.len() - j && ls.iter().rev().eq(&p[..j]) && rs == p[j..] {
                out.insert(PrimaryOcc { sig: e, offset: dag.length(l.sig) - j as u64 + 1 });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affixes() {
        let mut d = SignatureDag::new(1 << 10);
        let a = d.char_sig(b'a').unwrap();
        let b = d.char_sig(b'b').unwrap();
        let ab = d.pair(a, b).unwrap();
        let o = Operand { sig: ab, count: 3 };
        assert_eq!(operand_affix(&d, o, 5, false), b"ababa".to_vec());
        assert_eq!(operand_affix(&d, o, 3, true), b"bab".to_vec());
        assert_eq!(operand_affix(&d, o, 100, false).len(), 6);
    }

    #[test]
    fn empty_plane() {
        let p = IndexPlane::new();
        assert!(p.report(0, u64::MAX, 0, u64::MAX).is_empty());
        assert!(p.report(5, 4, 0, 1).is_empty());
    }
}
