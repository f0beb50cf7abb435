//! Builders from LZ77 factorizations and straight-line programs, SLP
//! export, and string queries on SLP variables.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::encoder::assemble;
use crate::error::{Result, SigdexError};
use crate::lce_engine::{lce, lcp_sig, CommonSequence, UniqLevel};
use crate::lcp_core::{bits_unchecked, eblock, epow_iter, ParseParams};
use crate::sig_store::{Assignment, Sig, SignatureDag};
use crate::updater;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lz77Factor {
    Literal(u8),
    /// Copy of `len` characters starting at the 1-based position `src`.
    Copy { src: u64, len: u64 },
}

impl Lz77Factor {
    pub fn len(&self) -> u64 {
        match self {
            Lz77Factor::Literal(_) => 1,
            Lz77Factor::Copy { len, .. } => *len,
        }
    }
}

/// Suffix array by prefix doubling.
fn suffix_array(t: &[u8]) -> Vec<usize> {
    let n = t.len();
    let mut sa: Vec<usize> = (0..n).collect();
    let mut rank: Vec<usize> = t.iter().map(|&c| c as usize).collect();
    let mut tmp = vec![0; n];
    let mut k = 1;
    if n < 2 {
        return sa;
    }
    loop {
        let key = |i: usize| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i));
        tmp[sa[0]] = 0;
        for w in 1..n {
            tmp[sa[w]] = tmp[sa[w - 1]] + usize::from(key(sa[w - 1]) != key(sa[w]));
        }
        std::mem::swap(&mut rank, &mut tmp);
        if rank[sa[n - 1]] == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

/// Kasai: `lcp[r]` is the common prefix of the suffixes ranked `r - 1` and `r`.
fn lcp_array(t: &[u8], sa: &[usize], rank: &[usize]) -> Vec<u64> {
    let n = t.len();
    let mut lcp = vec![0u64; n];
    let mut h = 0;
    for i in 0..n {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < n && j + h < n && t[i + h] == t[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h as u64;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

/// Greedy LZ77 without self-references; copies point at the leftmost source.
pub fn lz77_parse(t: &[u8]) -> Vec<Lz77Factor> {
    let n = t.len();
    if n == 0 {
        return Vec::new();
    }
    let sa = suffix_array(t);
    let mut rank = vec![0; n];
    for (r, &i) in sa.iter().enumerate() {
        rank[i] = r;
    }
    let lcp = SparseMin::new(&lcp_array(t, &sa, &rank));
    let pos = SparseMin::new(&sa.iter().map(|&i| i as u64).collect::<Vec<_>>());
    // leftmost start among suffixes sharing `l` characters with suffix p
    let source = |p: usize, l: u64| -> u64 {
        let r = rank[p];
        let (mut lo, mut hi) = (0, r);
        while lo < hi {
            let m = (lo + hi) / 2;
            if lcp.min(m + 1, r + 1) >= l { hi = m } else { lo = m + 1 }
        }
        let first = lo;
        let (mut lo, mut hi) = (r, n - 1);
        while lo < hi {
            let m = (lo + hi).div_ceil(2);
            if lcp.min(r + 1, m + 1) >= l { lo = m } else { hi = m - 1 }
        }
        pos.min(first, lo + 1)
    };
    let mut out = Vec::new();
    let mut p = 0;
    while p < n {
        // a source for length l must end by p; this is monotone in l
        let ok = |l: u64| source(p, l) + l <= p as u64;
        let (mut lo, mut hi) = (0u64, (n - p).min(p) as u64);
        while lo < hi {
            let m = (lo + hi).div_ceil(2);
            if ok(m) { lo = m } else { hi = m - 1 }
        }
        if lo == 0 {
            out.push(Lz77Factor::Literal(t[p]));
            p += 1;
        } else {
            out.push(Lz77Factor::Copy { src: source(p, lo) + 1, len: lo });
            p += lo as usize;
        }
    }
    out
}

pub fn lz77_decode(f: &[Lz77Factor]) -> Result<Vec<u8>> {
    let mut t: Vec<u8> = Vec::new();
    for x in f {
        match *x {
            Lz77Factor::Literal(c) => t.push(c),
            Lz77Factor::Copy { src, len } => {
                if src < 1 || len < 1 || src - 1 + len > t.len() as u64 {
                    return Err(SigdexError::invalid(format!("copy {src}+{len} reaches past the prefix")));
                }
                let s = (src - 1) as usize;
                for k in 0..len as usize {
                    t.push(t[s + k]);
                }
            }
        }
    }
    Ok(t)
}

pub fn format_lz77(f: &[Lz77Factor]) -> String {
    let mut s = String::from("LZ77\n");
    for x in f {
        match x {
            Lz77Factor::Literal(c) => s.push_str(&format!("L {c}\n")),
            Lz77Factor::Copy { src, len } => s.push_str(&format!("C {src} {len}\n")),
        }
    }
    s
}

pub fn parse_lz77(text: &str) -> Result<Vec<Lz77Factor>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("LZ77") {
        return Err(SigdexError::format("missing LZ77 header"));
    }
    let mut out = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || SigdexError::format(format!("bad factor line {line:?}"));
        let num = |x: &str| x.parse::<u64>().map_err(|_| bad());
        match f.as_slice() {
            ["L", c] => out.push(Lz77Factor::Literal(u8::try_from(num(c)?).map_err(|_| bad())?)),
            ["C", s, l] => out.push(Lz77Factor::Copy { src: num(s)?, len: num(l)? }),
            _ => return Err(bad()),
        }
    }
    if !matches!(out.first(), Some(Lz77Factor::Literal(_))) {
        return Err(SigdexError::format("first factor must be a literal"));
    }
    Ok(out)
}

/// Replays the factorization left to right as appends and copies.
pub fn build_from_lz77(dag: &mut SignatureDag, params: &ParseParams, f: &[Lz77Factor]) -> Result<Sig> {
    if f.is_empty() {
        return Err(SigdexError::invalid("empty factorization"));
    }
    dag.replace_root(None)?;
    let total: u64 = f.iter().map(Lz77Factor::len).sum();
    let mut out = Appender::new(total, dag.m());
    for x in f {
        match *x {
            Lz77Factor::Literal(c) => out.push(dag, params, c)?,
            Lz77Factor::Copy { src, len } => {
                if src < 1 || len < 1 || src - 1 + len > out.len() {
                    return Err(SigdexError::invalid(format!("copy {src}+{len} reaches past the prefix")));
                }
                out.copy(dag, params, src, len)?
            }
        }
    }
    out.finish(dag, params)?;
    Ok(dag.root().unwrap())
}

/// Appends to the end of the text. Characters and short copies gather in a
/// buffer that is inserted as one chunk; long copies go straight to the
/// updater.
struct Appender {
    pending: Vec<u8>,
    stored: u64,
    chunk: usize,
}

impl Appender {
    fn new(total: u64, m: u64) -> Self {
        Appender { pending: Vec::new(), stored: 0, chunk: crate::encoder::chunk_len(total, m) }
    }

    fn len(&self) -> u64 {
        self.stored + self.pending.len() as u64
    }

    fn push(&mut self, dag: &mut SignatureDag, params: &ParseParams, c: u8) -> Result<()> {
        self.pending.push(c);
        self.spill(dag, params)
    }

    fn copy(&mut self, dag: &mut SignatureDag, params: &ParseParams, src: u64, len: u64) -> Result<()> {
        if len as usize > self.chunk {
            self.finish(dag, params)?;
            updater::insert_copy(dag, params, src, len, self.stored + 1)?;
            self.stored += len;
            return Ok(());
        }
        let end = src + len - 1;
        if src <= self.stored {
            let got = dag.expand(dag.root().unwrap(), src, end.min(self.stored))?;
            self.pending.extend_from_slice(&got);
        }
        for p in src.max(self.stored + 1)..=end {
            self.pending.push(self.pending[(p - self.stored - 1) as usize]);
        }
        self.spill(dag, params)
    }

    fn spill(&mut self, dag: &mut SignatureDag, params: &ParseParams) -> Result<()> {
        if self.pending.len() >= self.chunk {
            self.finish(dag, params)?;
        }
        Ok(())
    }

    fn finish(&mut self, dag: &mut SignatureDag, params: &ParseParams) -> Result<()> {
        if !self.pending.is_empty() {
            updater::insert(dag, params, &self.pending, self.stored + 1)?;
            self.stored += self.pending.len() as u64;
            self.pending.clear();
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlpRule {
    Char(u8),
    /// Children as 1-based variable indices.
    Pair(usize, usize),
}

/// A straight-line program; `rules[i - 1]` defines `X_i`, the start is `X_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slp {
    rules: Vec<SlpRule>,
}

impl Slp {
    /// Validates index order, redundancy and usefulness.
    pub fn new(rules: Vec<SlpRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(SigdexError::invalid("SLP without variables"));
        }
        let mut seen = BTreeMap::new();
        for (k, r) in rules.iter().enumerate() {
            let i = k + 1;
            if let SlpRule::Pair(l, rr) = *r {
                if l < 1 || rr < 1 || l >= i || rr >= i {
                    return Err(SigdexError::invalid(format!("X_{i} refers forward")));
                }
            }
            if let Some(j) = seen.insert(*r, i) {
                return Err(SigdexError::invalid(format!("X_{j} and X_{i} are redundant")));
            }
        }
        let mut used = vec![false; rules.len() + 1];
        used[rules.len()] = true;
        for i in (1..=rules.len()).rev() {
            if !used[i] {
                return Err(SigdexError::invalid(format!("X_{i} is useless")));
            }
            if let SlpRule::Pair(l, r) = rules[i - 1] {
                used[l] = true;
                used[r] = true;
            }
        }
        Ok(Slp { rules })
    }

    pub fn n(&self) -> usize {
        self.rules.len()
    }

    pub fn rule(&self, i: usize) -> SlpRule {
        self.rules[i - 1]
    }

    pub fn rules(&self) -> &[SlpRule] {
        &self.rules
    }

    /// `|val(X_i)|` for every variable (index 0 unused).
    pub fn lengths(&self) -> Vec<u64> {
        let mut len = vec![0u64; self.n() + 1];
        for i in 1..=self.n() {
            len[i] = match self.rule(i) {
                SlpRule::Char(_) => 1,
                SlpRule::Pair(l, r) => len[l].saturating_add(len[r]),
            };
        }
        len
    }

    /// Naive expansion of `X_i`.
    pub fn expand(&self, i: usize) -> Vec<u8> {
        let mut out = Vec::new();
        let mut st = vec![i];
        while let Some(x) = st.pop() {
            match self.rule(x) {
                SlpRule::Char(c) => out.push(c),
                SlpRule::Pair(l, r) => {
                    st.push(r);
                    st.push(l);
                }
            }
        }
        out
    }

    pub fn text(&self) -> Vec<u8> {
        self.expand(self.n())
    }

    /// The SLP with every pair swapped, deriving the reversed strings.
    pub fn reversed(&self) -> Slp {
        let rules = self
            .rules
            .iter()
            .map(|r| match *r {
                SlpRule::Pair(l, r) => SlpRule::Pair(r, l),
                c => c,
            })
            .collect();
        Slp { rules }
    }

    pub fn parse(text: &str) -> Result<Slp> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| SigdexError::format("empty SLP file"))?;
        let h: Vec<&str> = head.split_whitespace().collect();
        let n: usize = match h.as_slice() {
            ["SLP", n] => n.parse().map_err(|_| SigdexError::format("bad SLP header"))?,
            _ => return Err(SigdexError::format("bad SLP header")),
        };
        let mut rules = Vec::with_capacity(n);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || SigdexError::format(format!("bad SLP line {line:?}"));
            let num = |x: &str| x.parse::<usize>().map_err(|_| bad());
            let (i, r) = match f.as_slice() {
                [i, "C", c] => (num(i)?, SlpRule::Char(u8::try_from(num(c)?).map_err(|_| bad())?)),
                [i, "P", l, r] => (num(i)?, SlpRule::Pair(num(l)?, num(r)?)),
                _ => return Err(bad()),
            };
            if i != rules.len() + 1 {
                return Err(SigdexError::format(format!("expected X_{} got X_{i}", rules.len() + 1)));
            }
            rules.push(r);
        }
        if rules.len() != n {
            return Err(SigdexError::format(format!("header says {n} rules, found {}", rules.len())));
        }
        Slp::new(rules).map_err(|e| SigdexError::format(e.to_string()))
    }

    pub fn format(&self) -> String {
        let mut s = format!("SLP {}\n", self.n());
        for (k, r) in self.rules.iter().enumerate() {
            match r {
                SlpRule::Char(c) => s.push_str(&format!("{} C {c}\n", k + 1)),
                SlpRule::Pair(l, r) => s.push_str(&format!("{} P {l} {r}\n", k + 1)),
            }
        }
        s
    }

    /// Eleven-variable grammar deriving "CABCABBCABCABCAB".
    pub fn example() -> Slp {
        use SlpRule::*;
        Slp::new(vec![
            Char(b'A'),
            Char(b'B'),
            Char(b'C'),
            Pair(3, 1),
            Pair(4, 2),
            Pair(5, 5),
            Pair(2, 3),
            Pair(1, 2),
            Pair(7, 8),
            Pair(6, 9),
            Pair(10, 6),
        ])
        .unwrap()
    }

    /// 1-based leftmost occurrence of every variable in `val(X_n)`.
    pub fn leftmost_occurrences(&self) -> Vec<u64> {
        let len = self.lengths();
        let mut occ = vec![u64::MAX; self.n() + 1];
        occ[self.n()] = 1;
        for i in (1..=self.n()).rev() {
            if let SlpRule::Pair(l, r) = self.rule(i) {
                occ[l] = occ[l].min(occ[i]);
                occ[r] = occ[r].min(occ[i] + len[l]);
            }
        }
        occ
    }
}

/// Builds `val(X_n)` by a depth-first walk: the first visit of a variable
/// spells it out, later visits copy its first occurrence.
pub fn build_from_slp_gfact(dag: &mut SignatureDag, params: &ParseParams, slp: &Slp) -> Result<Sig> {
    let len = slp.lengths();
    if len[slp.n()] > dag.m() / 4 {
        return Err(SigdexError::CapacityExhausted(dag.m()));
    }
    dag.replace_root(None)?;
    let mut first = vec![0u64; slp.n() + 1];
    let mut out = Appender::new(len[slp.n()], dag.m());
    let mut st = vec![slp.n()];
    while let Some(x) = st.pop() {
        if first[x] != 0 {
            out.copy(dag, params, first[x], len[x])?;
            continue;
        }
        first[x] = out.len() + 1;
        match slp.rule(x) {
            SlpRule::Char(c) => out.push(dag, params, c)?,
            SlpRule::Pair(l, r) => {
                st.push(r);
                st.push(l);
            }
        }
    }
    out.finish(dag, params)?;
    Ok(dag.root().unwrap())
}

/// State of one variable at one shrink level of the level-wise builder.
#[derive(Clone, Debug)]
enum VarState {
    /// More than the core limit of runs: affix runs, border windows of the
    /// power sequence, its trims and the runs created over this variable's seam.
    Large {
        first: (Sig, u64),
        last: (Sig, u64),
        u: Vec<Sig>,
        v: Vec<Sig>,
        ltrim: Vec<Sig>,
        rtrim: Vec<Sig>,
        z: Vec<Sig>,
    },
    Core(Vec<(Sig, u64)>),
    Gone,
}

impl VarState {
    fn entries(&self) -> usize {
        match self {
            VarState::Large { u, v, ltrim, rtrim, z, .. } => 2 + u.len() + v.len() + ltrim.len() + rtrim.len() + z.len(),
            VarState::Core(c) => c.len(),
            VarState::Gone => 0,
        }
    }
}

/// Result of the level-wise builder.
#[derive(Clone, Debug)]
pub struct LevelwiseOutcome {
    /// `id(val(X_i))` for each requested variable, in request order.
    pub sigs: Vec<Sig>,
    /// Largest number of run entries held at once.
    pub peak_state: usize,
    pub levels: usize,
    /// Longest seam sequence (`z` or the new symbols over a seam) seen.
    pub max_middle: usize,
}

fn runs_to_sigs(dag: &mut SignatureDag, runs: &[(Sig, u64)]) -> Result<Vec<Sig>> {
    runs.iter().map(|&(b, k)| dag.run(b, k)).collect()
}

fn trim_left(params: &ParseParams, w: &[Sig]) -> Result<Vec<Sig>> {
    let d = bits_unchecked(&w.iter().map(|&x| x as u64).collect::<Vec<_>>(), params)?;
    let l = (params.delta_l..d.len()).find(|&i| d[i]).ok_or_else(|| SigdexError::internal("no left trim"))?;
    Ok(w[..l].to_vec())
}

fn trim_right(params: &ParseParams, w: &[Sig]) -> Result<Vec<Sig>> {
    let d = bits_unchecked(&w.iter().map(|&x| x as u64).collect::<Vec<_>>(), params)?;
    let n = d.len();
    let r = (params.delta_r + 1..=n).find(|&r| d[n - r]).ok_or_else(|| SigdexError::internal("no right trim"))?;
    Ok(w[n - r..].to_vec())
}

/// Level-wise construction over the SLP: for every level only the current
/// per-variable states are kept. Produces `id(val(X_i))` for `targets`.
pub fn slp_levelwise(dag: &mut SignatureDag, params: &ParseParams, slp: &Slp, targets: &[usize]) -> Result<LevelwiseOutcome> {
    let n = slp.n();
    let len = slp.lengths();
    for &t in targets {
        if t < 1 || t > n {
            return Err(SigdexError::invalid(format!("no variable X_{t}")));
        }
        if len[t] > dag.m() / 4 {
            return Err(SigdexError::CapacityExhausted(dag.m()));
        }
    }
    let k = params.core_limit();
    let uw = params.window();
    let mut want = vec![false; n + 1];
    for &t in targets {
        want[t] = true;
    }
    let mut records: Vec<Vec<UniqLevel>> = vec![Vec::new(); n + 1];
    let mut cores: Vec<Option<Vec<(Sig, u64)>>> = vec![None; n + 1];
    let mut zhat: Vec<Vec<Sig>> = vec![Vec::new(); n + 1];
    let mut prev: Vec<VarState> = vec![VarState::Large { first: (0, 0), last: (0, 0), u: vec![], v: vec![], ltrim: vec![], rtrim: vec![], z: vec![] }; n + 1];
    let mut peak = 0;
    let mut max_middle = 0;
    let mut t = 0usize;
    loop {
        let mut cur: Vec<VarState> = vec![VarState::Gone; n + 1];
        for x in 1..=n {
            if !matches!(prev[x], VarState::Large { .. }) {
                continue;
            }
            cur[x] = match slp.rule(x) {
                SlpRule::Char(c) => {
                    if t == 0 {
                        VarState::Core(vec![(dag.char_sig(c)?, 1)])
                    } else {
                        VarState::Gone
                    }
                }
                SlpRule::Pair(l, r) => {
                    let mut mid: Vec<(Sig, u64)> = Vec::new();
                    match &cur[l] {
                        VarState::Large { last, .. } => mid.push(*last),
                        VarState::Core(c) => mid.extend_from_slice(c),
                        VarState::Gone => {}
                    }
                    mid.extend(zhat[x].iter().map(|&s| (s, 1)));
                    match &cur[r] {
                        VarState::Large { first, .. } => mid.push(*first),
                        VarState::Core(c) => mid.extend_from_slice(c),
                        VarState::Gone => {}
                    }
                    let mid = epow_iter(mid);
                    let ll = matches!(cur[l], VarState::Large { .. });
                    let lr = matches!(cur[r], VarState::Large { .. });
                    if !ll && !lr && mid.len() <= k {
                        VarState::Core(mid)
                    } else {
                        let m = mid.len();
                        let (first, zs, ze) = match &cur[l] {
                            VarState::Large { first, .. } => (*first, 0, m),
                            _ => (mid[0], 1, m),
                        };
                        let (last, ze) = match &cur[r] {
                            VarState::Large { last, .. } => (*last, ze),
                            _ => (mid[m - 1], ze - 1),
                        };
                        let z = runs_to_sigs(dag, &mid[zs..ze.max(zs)])?;
                        let mut u: Vec<Sig> = match &cur[l] {
                            VarState::Large { u, .. } => u.clone(),
                            _ => z.clone(),
                        };
                        if let (false, VarState::Large { u: ur, .. }) = (ll, &cur[r]) {
                            u.extend_from_slice(ur);
                        }
                        u.truncate(uw);
                        let mut v: Vec<Sig> = match &cur[r] {
                            VarState::Large { v, .. } => v.clone(),
                            _ => z.clone(),
                        };
                        if let (false, VarState::Large { v: vl, .. }) = (lr, &cur[l]) {
                            let mut w = vl.clone();
                            w.extend_from_slice(&v);
                            v = w;
                        }
                        if v.len() > uw {
                            v.drain(..v.len() - uw);
                        }
                        let ltrim = match &cur[l] {
                            VarState::Large { ltrim, .. } => ltrim.clone(),
                            _ => trim_left(params, &u)?,
                        };
                        let rtrim = match &cur[r] {
                            VarState::Large { rtrim, .. } => rtrim.clone(),
                            _ => trim_right(params, &v)?,
                        };
                        VarState::Large { first, last, u, v, ltrim, rtrim, z }
                    }
                }
            };
        }
        // power stage: new shrink symbols over each seam
        let mut next_zhat: Vec<Vec<Sig>> = vec![Vec::new(); n + 1];
        for x in 1..=n {
            let SlpRule::Pair(l, r) = slp.rule(x) else { continue };
            let VarState::Large { ltrim, rtrim, z, .. } = &cur[x] else { continue };
            let mut q: Vec<Sig> = Vec::new();
            let qs = match &cur[l] {
                VarState::Large { v, rtrim: rl, .. } => {
                    q.extend_from_slice(v);
                    v.len() - rl.len()
                }
                _ => ltrim.len(),
            };
            q.extend_from_slice(z);
            let qe = match &cur[r] {
                VarState::Large { u, ltrim: lr, .. } => {
                    let e = q.len() + lr.len();
                    q.extend_from_slice(u);
                    e
                }
                _ => q.len() - rtrim.len(),
            };
            if qs > qe {
                return Err(SigdexError::internal(format!("seam of X_{x} inverted at level {t}")));
            }
            if qs == qe {
                continue;
            }
            let d = bits_unchecked(&q.iter().map(|&s| s as u64).collect::<Vec<_>>(), params)?;
            if !d[qs] || (qe < q.len() && !d[qe]) {
                return Err(SigdexError::internal(format!("seam of X_{x} not block aligned")));
            }
            for blk in eblock(&q[qs..qe], &d[qs..qe])? {
                next_zhat[x].push(dag.sig_plus(blk)?);
            }
        }
        for st in &cur {
            if let VarState::Large { u, v, z, .. } = st {
                if u.len() != uw || v.len() != uw {
                    return Err(SigdexError::internal("border window of wrong length"));
                }
                max_middle = max_middle.max(z.len());
            }
        }
        max_middle = max_middle.max(next_zhat.iter().map(Vec::len).max().unwrap_or(0));
        let mut state: usize = cur.iter().map(VarState::entries).sum::<usize>() + next_zhat.iter().map(Vec::len).sum::<usize>();
        for x in 1..=n {
            if !want[x] {
                continue;
            }
            match &cur[x] {
                VarState::Large { first, last, ltrim, rtrim, .. } => records[x].push(UniqLevel {
                    lhat: *first,
                    l: ltrim.clone(),
                    r: rtrim.clone(),
                    rhat: *last,
                }),
                VarState::Core(c) => cores[x] = Some(c.clone()),
                VarState::Gone => {}
            }
            state += records[x].iter().map(|r| 2 + r.l.len() + r.r.len()).sum::<usize>();
        }
        peak = peak.max(state);
        t += 1;
        if targets.iter().all(|&x| cores[x].is_some()) {
            break;
        }
        prev = cur;
        zhat = next_zhat;
    }
    let mut sigs = Vec::with_capacity(targets.len());
    for &x in targets {
        let cs = CommonSequence { levels: records[x].clone(), core: cores[x].clone().unwrap() };
        let root = assemble(dag, params, &cs.pieces())?.ok_or_else(|| SigdexError::internal("empty variable"))?;
        sigs.push(root);
    }
    Ok(LevelwiseOutcome { sigs, peak_state: peak, levels: t, max_middle })
}

/// Level-wise build of `val(X_n)`; becomes the root.
pub fn build_from_slp_levelwise(dag: &mut SignatureDag, params: &ParseParams, slp: &Slp) -> Result<(Sig, LevelwiseOutcome)> {
    let out = slp_levelwise(dag, params, slp, &[slp.n()])?;
    let root = out.sigs[0];
    dag.replace_root(Some(root))?;
    Ok((root, out))
}

/// `id(val(X_i))` for every variable; each result is pinned in the store.
pub fn signatures_for_all_variables(dag: &mut SignatureDag, params: &ParseParams, slp: &Slp) -> Result<Vec<Sig>> {
    let all: Vec<usize> = (1..=slp.n()).collect();
    let out = slp_levelwise(dag, params, slp, &all)?;
    for &s in &out.sigs {
        dag.pin(s);
    }
    dag.sweep();
    Ok(out.sigs)
}

/// Lexicographic order of two encoded strings.
pub fn compare_sigs(dag: &SignatureDag, a: Sig, b: Sig) -> Result<Ordering> {
    let l = lcp_sig(dag, a, b)?;
    let (na, nb) = (dag.length(a), dag.length(b));
    if l == na || l == nb {
        return Ok(na.cmp(&nb));
    }
    Ok(dag.char_at(a, l + 1).cmp(&dag.char_at(b, l + 1)))
}

/// Variables (1-based) in lexicographic order of their values, ties by index.
pub fn sort_variables(dag: &SignatureDag, sigs: &[Sig]) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (1..=sigs.len()).collect();
    let mut err = None;
    idx.sort_by(|&i, &j| match compare_sigs(dag, sigs[i - 1], sigs[j - 1]) {
        Ok(o) => o.then(i.cmp(&j)),
        Err(e) => {
            err = Some(e);
            Ordering::Equal
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(idx),
    }
}

/// Converts the grammar under `root` to a plain SLP; runs become doubling
/// chains, exponent-1 runs alias their base. The start rule is last.
pub fn export_to_slp(dag: &SignatureDag, root: Option<Sig>) -> Result<Slp> {
    let root = root.ok_or_else(|| SigdexError::invalid("export of an empty text"))?;
    let mut rules: Vec<SlpRule> = Vec::new();
    let mut index: BTreeMap<SlpRule, usize> = BTreeMap::new();
    let mut var: BTreeMap<Sig, usize> = BTreeMap::new();
    let mut mk = |r: SlpRule, rules: &mut Vec<SlpRule>| -> usize {
        *index.entry(r).or_insert_with(|| {
            rules.push(r);
            rules.len()
        })
    };
    let mut st = vec![(root, false)];
    while let Some((e, done)) = st.pop() {
        if var.contains_key(&e) {
            continue;
        }
        let a = dag.assign(e);
        if !done {
            st.push((e, true));
            for c in a.children().collect::<Vec<_>>().into_iter().rev() {
                if !var.contains_key(&c) {
                    st.push((c, false));
                }
            }
            continue;
        }
        let v = match a {
            Assignment::Char(c) => mk(SlpRule::Char(c), &mut rules),
            Assignment::Pair(l, r) => mk(SlpRule::Pair(var[&l], var[&r]), &mut rules),
            Assignment::Run(b, k) => {
                let vb = var[&b];
                if k == 1 {
                    vb
                } else {
                    let top = 63 - k.leading_zeros();
                    let mut pow = vec![vb];
                    for i in 1..=top as usize {
                        let p = pow[i - 1];
                        pow.push(mk(SlpRule::Pair(p, p), &mut rules));
                    }
                    let mut acc = pow[top as usize];
                    for i in (0..top as usize).rev() {
                        if k >> i & 1 == 1 {
                            acc = mk(SlpRule::Pair(acc, pow[i]), &mut rules);
                        }
                    }
                    acc
                }
            }
        };
        var.insert(e, v);
    }
    let start = var[&root];
    if start != rules.len() {
        return Err(SigdexError::internal("start rule is not last"));
    }
    Slp::new(rules)
}

/// Loads an SLP verbatim as a grammar in the store (no re-parsing), e.g. to
/// index a given grammar directly. Returns the signature of every variable.
pub fn load_grammar(dag: &mut SignatureDag, slp: &Slp) -> Result<Vec<Sig>> {
    let mut sig = Vec::with_capacity(slp.n());
    for i in 1..=slp.n() {
        let s = match slp.rule(i) {
            SlpRule::Char(c) => dag.char_sig(c)?,
            SlpRule::Pair(l, r) => dag.pair(sig[l - 1], sig[r - 1])?,
        };
        sig.push(s);
    }
    dag.replace_root(Some(sig[slp.n() - 1]))?;
    Ok(sig)
}

/// Sparse table of range minima.
#[derive(Clone, Debug)]
pub struct SparseMin {
    table: Vec<Vec<u64>>,
}

impl SparseMin {
    pub fn new(a: &[u64]) -> Self {
        let mut table = vec![a.to_vec()];
        let mut w = 1;
        while 2 * w <= a.len() {
            let p = table.last().unwrap();
            let row: Vec<u64> = (0..=a.len() - 2 * w).map(|i| p[i].min(p[i + w])).collect();
            table.push(row);
            w *= 2;
        }
        SparseMin { table }
    }

    /// Minimum of `a[i..j]` (half-open, nonempty).
    pub fn min(&self, i: usize, j: usize) -> u64 {
        let k = (usize::BITS - 1 - (j - i).leading_zeros()) as usize;
        self.table[k][i].min(self.table[k][j - (1 << k)])
    }
}

/// Lexicographic order of the variables plus constant-time LCP between any two.
#[derive(Clone, Debug)]
pub struct VariableLcp {
    sigs: Vec<Sig>,
    lens: Vec<u64>,
    order: Vec<usize>,
    rank: Vec<usize>,
    rmq: SparseMin,
}

impl VariableLcp {
    pub fn new(dag: &SignatureDag, sigs: &[Sig]) -> Result<Self> {
        let order = sort_variables(dag, sigs)?;
        let mut rank = vec![0; sigs.len() + 1];
        for (p, &i) in order.iter().enumerate() {
            rank[i] = p;
        }
        let mut adj = Vec::with_capacity(order.len().saturating_sub(1));
        for w in order.windows(2) {
            adj.push(lcp_sig(dag, sigs[w[0] - 1], sigs[w[1] - 1])?);
        }
        let lens = sigs.iter().map(|&s| dag.length(s)).collect();
        Ok(VariableLcp { sigs: sigs.to_vec(), lens, order, rank, rmq: SparseMin::new(&adj) })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn lcp(&self, i: usize, j: usize) -> Result<u64> {
        let n = self.sigs.len();
        if i < 1 || j < 1 || i > n || j > n {
            return Err(SigdexError::invalid(format!("variable index outside 1..{n}")));
        }
        if i == j {
            return Ok(self.lens[i - 1]);
        }
        let (a, b) = (self.rank[i].min(self.rank[j]), self.rank[i].max(self.rank[j]));
        Ok(self.rmq.min(a, b))
    }
}

/// LCP and LCS on the variables of an SLP. Suffix queries run on the
/// reversed grammar.
pub struct SlpQueries {
    pub slp: Slp,
    pub forward: Vec<Sig>,
    pub backward: Vec<Sig>,
    fwd: VariableLcp,
    bwd: VariableLcp,
    occ: Vec<u64>,
}

impl SlpQueries {
    pub fn new(dag: &mut SignatureDag, params: &ParseParams, slp: &Slp) -> Result<Self> {
        let forward = signatures_for_all_variables(dag, params, slp)?;
        let rev = slp.reversed();
        let backward = signatures_for_all_variables(dag, params, &rev)?;
        let fwd = VariableLcp::new(dag, &forward)?;
        let bwd = VariableLcp::new(dag, &backward)?;
        Ok(SlpQueries { slp: slp.clone(), forward, backward, fwd, bwd, occ: slp.leftmost_occurrences() })
    }

    pub fn order(&self) -> &[usize] {
        self.fwd.order()
    }

    pub fn variable_lcp(&self, i: usize, j: usize) -> Result<u64> {
        self.fwd.lcp(i, j)
    }

    pub fn variable_lcs(&self, i: usize, j: usize) -> Result<u64> {
        self.bwd.lcp(i, j)
    }

    /// LCE between `val(X_i)[a..]` and `val(X_j)[b..]` through the leftmost
    /// occurrences of both variables in the start string.
    pub fn lce_on_variables(&self, dag: &SignatureDag, i: usize, j: usize, a: u64, b: u64) -> Result<u64> {
        let n = self.slp.n();
        if i < 1 || j < 1 || i > n || j > n {
            return Err(SigdexError::invalid(format!("variable index outside 1..{n}")));
        }
        let (li, lj) = (dag.length(self.forward[i - 1]), dag.length(self.forward[j - 1]));
        if a < 1 || b < 1 || a > li || b > lj {
            return Err(SigdexError::invalid("position outside the variable"));
        }
        let s = self.forward[n - 1];
        let l = lce(dag, s, s, self.occ[i] + a - 1, self.occ[j] + b - 1)?;
        Ok(l.min(li - a + 1).min(lj - b + 1))
    }

    /// Drops the pins taken for the variable signatures.
    pub fn release(self, dag: &mut SignatureDag) -> Result<()> {
        for s in self.forward.into_iter().chain(self.backward) {
            dag.unpin(s)?;
        }
        Ok(())
    }
}
