//! Common sequences and longest-common-extension queries.

use crate::error::{Result, SigdexError};
use crate::lcp_core::{bits_unchecked, eblock, epow_iter, ParseParams};
use crate::sig_store::{Assignment, Level, Sig, SignatureDag};

/// One trimmed level of a common sequence: the single-run affixes at the
/// shrink level and the block-aligned trims of the power level above it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniqLevel {
    pub lhat: (Sig, u64),
    pub l: Vec<Sig>,
    pub r: Vec<Sig>,
    pub rhat: (Sig, u64),
}

/// `Uniq(P)` with its per-level decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommonSequence {
    pub levels: Vec<UniqLevel>,
    pub core: Vec<(Sig, u64)>,
}

impl CommonSequence {
    pub fn h(&self) -> usize {
        self.levels.len()
    }

    /// Pieces in text order, before run merging.
    pub fn pieces(&self) -> Vec<(Sig, u64)> {
        let mut out = Vec::new();
        for lv in &self.levels {
            out.push(lv.lhat);
            out.extend(lv.l.iter().map(|&x| (x, 1)));
        }
        out.extend_from_slice(&self.core);
        for lv in self.levels.iter().rev() {
            out.extend(lv.r.iter().map(|&x| (x, 1)));
            out.push(lv.rhat);
        }
        out
    }

    pub fn pow_runs(&self) -> Vec<(Sig, u64)> {
        epow_iter(self.pieces())
    }

    pub fn expand(&self, dag: &SignatureDag) -> Vec<u8> {
        let mut out = Vec::new();
        for (s, k) in self.pieces() {
            let v = dag.expand_all(s);
            for _ in 0..k {
                out.extend_from_slice(&v);
            }
        }
        out
    }
}

fn as_u64(x: &[Sig]) -> Vec<u64> {
    x.iter().map(|&s| s as u64).collect()
}

/// Left trim: the least `l >= delta_l` with `d[l]` set.
fn left_trim(d: &[bool], params: &ParseParams) -> Result<usize> {
    (params.delta_l..d.len())
        .find(|&i| d[i])
        .ok_or_else(|| SigdexError::internal("no left trim boundary"))
}

/// Right trim length: the least `r >= delta_r + 1` with `d[n - r]` set.
fn right_trim(d: &[bool], params: &ParseParams) -> Result<usize> {
    let n = d.len();
    (params.delta_r + 1..=n)
        .find(|&r| d[n - r])
        .ok_or_else(|| SigdexError::internal("no right trim boundary"))
}

/// Computes `Uniq(p)`, materializing every signature it needs.
pub fn uniq_of_string(dag: &mut SignatureDag, params: &ParseParams, p: &[u8]) -> Result<CommonSequence> {
    if p.is_empty() {
        return Err(SigdexError::invalid("uniq of empty string"));
    }
    let mut chars = Vec::with_capacity(p.len());
    for &c in p {
        chars.push((dag.char_sig(c)?, 1));
    }
    let mut s = epow_iter(chars);
    let k = params.core_limit();
    let mut levels = Vec::new();
    loop {
        if s.len() <= k {
            return Ok(CommonSequence { levels, core: s });
        }
        let lhat = s[0];
        let rhat = s[s.len() - 1];
        let mut w = Vec::with_capacity(s.len() - 2);
        for &(b, e) in &s[1..s.len() - 1] {
            w.push(dag.run(b, e)?);
        }
        let d = bits_unchecked(&as_u64(&w), params)?;
        let l = left_trim(&d, params)?;
        let r = right_trim(&d, params)?;
        let n = w.len();
        if l >= n - r {
            return Err(SigdexError::internal("trims overlap"));
        }
        let mut next = Vec::new();
        for blk in eblock(&w[l..n - r], &d[l..n - r])? {
            next.push((dag.sig_plus(blk)?, 1));
        }
        levels.push(UniqLevel { lhat, l: w[..l].to_vec(), r: w[n - r..].to_vec(), rhat });
        s = epow_iter(next);
    }
}

/// Walks the elements of one level of a derivation tree.
///
/// The element at level `λ` covering a position is the topmost node on the
/// root-to-leaf path whose level tag is `λ`.
pub(crate) struct LevelFinger<'a> {
    dag: &'a SignatureDag,
    root: Sig,
    level: Level,
    // (node, start, chosen child)
    stack: Vec<(Sig, u64, u64)>,
    cur: Option<(Sig, u64)>,
    pub visits: u64,
}

impl<'a> LevelFinger<'a> {
    pub fn new(dag: &'a SignatureDag, root: Sig, level: Level) -> Self {
        LevelFinger { dag, root, level, stack: Vec::new(), cur: None, visits: 0 }
    }

    fn nchildren(&self, x: Sig) -> u64 {
        match self.dag.assign(x) {
            Assignment::Char(_) => 0,
            Assignment::Pair(..) => 2,
            Assignment::Run(_, k) => k,
        }
    }

    fn child(&self, x: Sig, start: u64, idx: u64) -> (Sig, u64) {
        match self.dag.assign(x) {
            Assignment::Pair(l, r) => {
                if idx == 0 {
                    (l, start)
                } else {
                    (r, start + self.dag.length(l))
                }
            }
            Assignment::Run(b, _) => (b, start + idx * self.dag.length(b)),
            Assignment::Char(_) => unreachable!(),
        }
    }

    fn check(&self, x: Sig) -> Result<bool> {
        let lv = self.dag.level(x);
        if lv == self.level {
            Ok(true)
        } else if lv < self.level {
            Err(SigdexError::internal(format!("level {} skipped below node {x}", self.level)))
        } else {
            Ok(false)
        }
    }

    /// Element containing 0-based position `pos`, as (signature, start).
    pub fn seek(&mut self, pos: u64) -> Result<(Sig, u64)> {
        self.stack.clear();
        let (mut x, mut s) = (self.root, 0u64);
        self.visits += 1;
        while !self.check(x)? {
            let idx = match self.dag.assign(x) {
                Assignment::Pair(l, _) => u64::from(pos >= s + self.dag.length(l)),
                Assignment::Run(b, _) => (pos - s) / self.dag.length(b),
                Assignment::Char(_) => unreachable!(),
            };
            self.stack.push((x, s, idx));
            (x, s) = self.child(x, s, idx);
            self.visits += 1;
        }
        self.cur = Some((x, s));
        Ok((x, s))
    }

    fn descend(&mut self, mut x: Sig, mut s: u64, leftmost: bool) -> Result<(Sig, u64)> {
        self.visits += 1;
        while !self.check(x)? {
            let idx = if leftmost { 0 } else { self.nchildren(x) - 1 };
            self.stack.push((x, s, idx));
            (x, s) = self.child(x, s, idx);
            self.visits += 1;
        }
        self.cur = Some((x, s));
        Ok((x, s))
    }

    pub fn next(&mut self) -> Result<Option<(Sig, u64)>> {
        while let Some((x, s, idx)) = self.stack.pop() {
            if idx + 1 < self.nchildren(x) {
                self.stack.push((x, s, idx + 1));
                let (c, cs) = self.child(x, s, idx + 1);
                return self.descend(c, cs, true).map(Some);
            }
        }
        self.cur = None;
        Ok(None)
    }

    pub fn prev(&mut self) -> Result<Option<(Sig, u64)>> {
        while let Some((x, s, idx)) = self.stack.pop() {
            if idx > 0 {
                self.stack.push((x, s, idx - 1));
                let (c, cs) = self.child(x, s, idx - 1);
                return self.descend(c, cs, false).map(Some);
            }
        }
        self.cur = None;
        Ok(None)
    }
}

/// Base and repetition count of a power-level element clipped to `[a, b)`.
fn clip_run(dag: &SignatureDag, x: Sig, start: u64, a: u64, b: u64) -> Result<(Sig, u64)> {
    let Assignment::Run(base, k) = dag.assign(x) else {
        return Err(SigdexError::internal(format!("power element {x} is not a run")));
    };
    let bl = dag.length(base);
    let lo = a.max(start);
    let hi = b.min(start + k * bl);
    if !(hi - lo).is_multiple_of(bl) || !(lo - start).is_multiple_of(bl) {
        return Err(SigdexError::internal("interval not aligned to run copies"));
    }
    Ok((base, (hi - lo) / bl))
}

/// `Uniq(val(e)[j..j+y-1])` read off the derivation tree of `e` without
/// creating signatures. Returns the sequence and the number of nodes visited.
pub fn uniq_of_substring(
    dag: &SignatureDag,
    params: &ParseParams,
    e: Sig,
    j: u64,
    y: u64,
) -> Result<(CommonSequence, u64)> {
    let n = dag.try_node(e).ok_or_else(|| SigdexError::invalid("unknown signature"))?.len;
    if j < 1 || y < 1 || j + y - 1 > n {
        return Err(SigdexError::invalid(format!("range {j}+{y} outside 1..{n}")));
    }
    let (mut a, mut b) = (j - 1, j - 1 + y);
    let k = params.core_limit();
    let u = params.window();
    let cap = 2 * u + 4;
    let mut levels = Vec::new();
    let mut visits = 0;
    let mut t = 0;
    loop {
        let lp = Level::pow(t);
        let mut f = LevelFinger::new(dag, e, lp);
        let mut left = vec![f.seek(a)?];
        while left.len() < cap {
            let (x, s) = *left.last().unwrap();
            if s + dag.length(x) >= b {
                break;
            }
            match f.next()? {
                Some(nx) => left.push(nx),
                None => break,
            }
        }
        visits += f.visits;
        let (lx, ls) = *left.last().unwrap();
        let complete = ls + dag.length(lx) >= b;
        if complete {
            let mut runs = Vec::with_capacity(left.len());
            for &(x, s) in &left {
                runs.push(clip_run(dag, x, s, a, b)?);
            }
            if runs.len() <= k {
                return Ok((CommonSequence { levels, core: runs }, visits));
            }
            let m = runs.len();
            let w: Vec<Sig> = left[1..m - 1].iter().map(|&(x, _)| x).collect();
            let starts: Vec<u64> = left[1..m - 1].iter().map(|&(_, s)| s).collect();
            let d = bits_unchecked(&as_u64(&w), params)?;
            let l = left_trim(&d, params)?;
            let r = right_trim(&d, params)?;
            let nw = w.len();
            if l >= nw - r {
                return Err(SigdexError::internal("trims overlap"));
            }
            levels.push(UniqLevel { lhat: runs[0], l: w[..l].to_vec(), r: w[nw - r..].to_vec(), rhat: runs[m - 1] });
            a = starts[l];
            b = starts[nw - r];
        } else {
            let (fx, fs) = left[0];
            let lhat = clip_run(dag, fx, fs, a, b)?;
            let pre: Vec<Sig> = left[1..=u].iter().map(|&(x, _)| x).collect();
            let pre_starts: Vec<u64> = left[1..=u].iter().map(|&(_, s)| s).collect();
            let mut g = LevelFinger::new(dag, e, lp);
            let (gx, gs) = g.seek(b - 1)?;
            let rhat = clip_run(dag, gx, gs, a, b)?;
            let mut suf = Vec::with_capacity(u);
            for _ in 0..u {
                suf.push(g.prev()?.ok_or_else(|| SigdexError::internal("ran off the left end"))?);
            }
            visits += g.visits;
            suf.reverse();
            let dl = bits_unchecked(&as_u64(&pre), params)?;
            let l = left_trim(&dl, params)?;
            let sw: Vec<Sig> = suf.iter().map(|&(x, _)| x).collect();
            let dr = bits_unchecked(&as_u64(&sw), params)?;
            let r = right_trim(&dr, params)?;
            levels.push(UniqLevel { lhat, l: pre[..l].to_vec(), r: sw[u - r..].to_vec(), rhat });
            a = pre_starts[l];
            b = suf[u - r].1;
        }
        t += 1;
    }
}

/// Stack of pending (node, repetitions) items; the top is the next item in
/// reading order (left to right, or right to left when `rev`).
struct Cursor<'a> {
    dag: &'a SignatureDag,
    stack: Vec<(Sig, u64)>,
    rev: bool,
    visits: u64,
}

impl<'a> Cursor<'a> {
    fn new(dag: &'a SignatureDag, root: Sig, count: u64, rev: bool) -> Self {
        Cursor { dag, stack: vec![(root, count)], rev, visits: 1 }
    }

    fn split_top(&mut self) {
        let (x, c) = self.stack.pop().unwrap();
        if c > 1 {
            self.stack.push((x, c - 1));
        }
        match self.dag.assign(x) {
            Assignment::Pair(l, r) => {
                if self.rev {
                    self.stack.push((l, 1));
                    self.stack.push((r, 1));
                } else {
                    self.stack.push((r, 1));
                    self.stack.push((l, 1));
                }
                self.visits += 2;
            }
            Assignment::Run(b, k) => {
                self.stack.push((b, k));
                self.visits += 1;
            }
            Assignment::Char(_) => unreachable!("split of a character"),
        }
    }

    fn skip(&mut self, mut k: u64) {
        while k > 0 {
            let (x, c) = *self.stack.last().unwrap();
            let lx = self.dag.length(x);
            if c * lx <= k {
                self.stack.pop();
                k -= c * lx;
                continue;
            }
            let q = k / lx;
            if q > 0 {
                self.stack.last_mut().unwrap().1 -= q;
                k -= q * lx;
            }
            if k > 0 {
                self.split_top();
            }
        }
    }

    fn consume(&mut self, m: u64) {
        let top = self.stack.last_mut().unwrap();
        top.1 -= m;
        if top.1 == 0 {
            self.stack.pop();
        }
    }
}

fn run_lce(a: &mut Cursor, b: &mut Cursor) -> u64 {
    let dag = a.dag;
    let mut ell = 0;
    loop {
        let (Some(&(x1, c1)), Some(&(x2, c2))) = (a.stack.last(), b.stack.last()) else { break };
        if x1 == x2 {
            let m = c1.min(c2);
            ell += m * dag.length(x1);
            a.consume(m);
            b.consume(m);
            continue;
        }
        let (l1, l2) = (dag.length(x1), dag.length(x2));
        if l1 > l2 {
            a.split_top();
        } else if l2 > l1 {
            b.split_top();
        } else {
            let c1 = matches!(dag.assign(x1), Assignment::Char(_));
            let c2 = matches!(dag.assign(x2), Assignment::Char(_));
            if c1 && c2 {
                break;
            }
            if !c1 {
                a.split_top();
            }
            if !c2 {
                b.split_top();
            }
        }
    }
    ell
}

/// An LCE operand: the string `val(sig)^count`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Operand {
    pub sig: Sig,
    pub count: u64,
}

impl Operand {
    pub fn of(sig: Sig) -> Self {
        Operand { sig, count: 1 }
    }
    pub fn len(&self, dag: &SignatureDag) -> u64 {
        dag.length(self.sig) * self.count
    }
}

fn check_operand(dag: &SignatureDag, o: Operand, pos: u64) -> Result<u64> {
    let n = dag.try_node(o.sig).ok_or_else(|| SigdexError::invalid(format!("unknown signature {}", o.sig)))?.len
        * o.count;
    if pos < 1 || pos > n || o.count == 0 {
        return Err(SigdexError::invalid(format!("position {pos} outside 1..{n}")));
    }
    Ok(n)
}

/// Forward LCE with the number of nodes visited.
pub fn lce_operands(dag: &SignatureDag, a: Operand, b: Operand, i: u64, j: u64) -> Result<(u64, u64)> {
    check_operand(dag, a, i)?;
    check_operand(dag, b, j)?;
    let mut ca = Cursor::new(dag, a.sig, a.count, false);
    let mut cb = Cursor::new(dag, b.sig, b.count, false);
    ca.skip(i - 1);
    cb.skip(j - 1);
    let ell = run_lce(&mut ca, &mut cb);
    Ok((ell, ca.visits + cb.visits))
}

/// Backward LCE: common suffix of `a[..i]` and `b[..j]`, with visits.
pub fn lce_backward_operands(dag: &SignatureDag, a: Operand, b: Operand, i: u64, j: u64) -> Result<(u64, u64)> {
    let na = check_operand(dag, a, i)?;
    let nb = check_operand(dag, b, j)?;
    let mut ca = Cursor::new(dag, a.sig, a.count, true);
    let mut cb = Cursor::new(dag, b.sig, b.count, true);
    ca.skip(na - i);
    cb.skip(nb - j);
    let ell = run_lce(&mut ca, &mut cb);
    Ok((ell, ca.visits + cb.visits))
}

pub fn lce_counted(dag: &SignatureDag, e1: Sig, e2: Sig, i: u64, j: u64) -> Result<(u64, u64)> {
    lce_operands(dag, Operand::of(e1), Operand::of(e2), i, j)
}

pub fn lce_backward_counted(dag: &SignatureDag, e1: Sig, e2: Sig, i: u64, j: u64) -> Result<(u64, u64)> {
    lce_backward_operands(dag, Operand::of(e1), Operand::of(e2), i, j)
}

pub fn lce(dag: &SignatureDag, e1: Sig, e2: Sig, i: u64, j: u64) -> Result<u64> {
    lce_counted(dag, e1, e2, i, j).map(|x| x.0)
}

pub fn lce_backward(dag: &SignatureDag, e1: Sig, e2: Sig, i: u64, j: u64) -> Result<u64> {
    lce_backward_counted(dag, e1, e2, i, j).map(|x| x.0)
}

pub fn lcp_sig(dag: &SignatureDag, e1: Sig, e2: Sig) -> Result<u64> {
    lce(dag, e1, e2, 1, 1)
}

pub fn lcs_sig(dag: &SignatureDag, e1: Sig, e2: Sig) -> Result<u64> {
    let (i, j) = (
        dag.try_node(e1).ok_or_else(|| SigdexError::invalid("unknown signature"))?.len,
        dag.try_node(e2).ok_or_else(|| SigdexError::invalid("unknown signature"))?.len,
    );
    lce_backward(dag, e1, e2, i, j)
}

/// Lexicographic comparison of two operands (forward or reversed strings).
pub fn compare_operands(dag: &SignatureDag, a: Operand, b: Operand, reversed: bool) -> Result<std::cmp::Ordering> {
    let (na, nb) = (a.len(dag), b.len(dag));
    let ell = if reversed {
        lce_backward_operands(dag, a, b, na, nb)?.0
    } else {
        lce_operands(dag, a, b, 1, 1)?.0
    };
    if ell == na || ell == nb {
        return Ok(na.cmp(&nb));
    }
    let at = |o: Operand, k: u64| dag.char_at(o.sig, (k - 1) % dag.length(o.sig) + 1);
    let (ca, cb) = if reversed { (at(a, na - ell), at(b, nb - ell)) } else { (at(a, ell + 1), at(b, ell + 1)) };
    Ok(ca.cmp(&cb))
}
