//! The signature dictionary as a DAG.
//!
//! Invariants checked by [`SignatureDag::audit`]:
//! - the reverse map is a bijection onto the nodes,
//! - stored lengths match lengths recomputed bottom-up,
//! - refcount(e) = occurrences of e in right-hand sides (+1 for the root),
//! - free ids form maximal intervals covering exactly the unused part of [1..M],
//! - no cycles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Result, SigdexError};

pub type Sig = u32;

/// Right-hand side of a signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assignment {
    Char(u8),
    Pair(Sig, Sig),
    Run(Sig, u64),
}

impl Assignment {
    pub fn children(&self) -> impl Iterator<Item = Sig> {
        let (a, b) = match *self {
            Assignment::Char(_) => (None, None),
            Assignment::Pair(l, r) => (Some(l), Some(r)),
            Assignment::Run(b, _) => (Some(b), None),
        };
        a.into_iter().chain(b)
    }
}

/// Level tag: `2t` is the shrink level `t`, `2t + 1` the power level `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(pub u32);

impl Level {
    pub fn shrink(t: u32) -> Level {
        Level(2 * t)
    }
    pub fn pow(t: u32) -> Level {
        Level(2 * t + 1)
    }
    pub fn t(self) -> u32 {
        self.0 / 2
    }
    pub fn is_pow(self) -> bool {
        self.0 % 2 == 1
    }
    pub fn next(self) -> Level {
        Level(self.0 + 1)
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{} {}", self.t(), if self.is_pow() { "W" } else { "S" })
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub assign: Assignment,
    pub len: u64,
    pub level: Level,
    refcount: u32,
    parents: BTreeSet<Sig>,
}

impl Node {
    pub fn refcount(&self) -> u32 {
        self.refcount
    }
    pub fn parents(&self) -> impl Iterator<Item = Sig> + '_ {
        self.parents.iter().copied()
    }
}

/// Per-operation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub nodes_visited: u64,
    pub dict_lookups: u64,
    pub signatures_created: u64,
    pub signatures_removed: u64,
}

impl QueryStats {
    pub fn add(&mut self, other: &QueryStats) {
        self.nodes_visited += other.nodes_visited;
        self.dict_lookups += other.dict_lookups;
        self.signatures_created += other.signatures_created;
        self.signatures_removed += other.signatures_removed;
    }
    pub fn churn(&self) -> u64 {
        self.signatures_created + self.signatures_removed
    }
    pub fn to_lines(&self) -> String {
        format!(
            "nodes_visited={}\ndict_lookups={}\nsignatures_created={}\nsignatures_removed={}\n",
            self.nodes_visited, self.dict_lookups, self.signatures_created, self.signatures_removed
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoreEvent {
    Added(Sig),
    Removed(Sig, Assignment),
}

/// Constants of the measured bounds. The algorithms only guarantee the
/// asymptotic shape; these fix the factor each test asserts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    /// `|Epow(Uniq(P))| <= c_u (log2|P| log* M + 1)`.
    pub c_u: f64,
    /// Node visits of LCE and substring common sequences.
    pub c_a: f64,
    /// Signatures created plus removed by one edit.
    pub c_e: f64,
    /// Signatures against the LZ77 factor count.
    pub c_z: f64,
    /// Peak state of the level-wise SLP builder.
    pub c_s: f64,
    /// Exported SLP size against `w log2 N`.
    pub c_x: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration { c_u: 16.0, c_a: 64.0, c_e: 64.0, c_z: 32.0, c_s: 64.0, c_x: 2.0 }
    }
}

/// Capacity and calibration settings.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub max_text_len: u64,
    pub m: u64,
    pub cal: Calibration,
}

impl EngineConfig {
    pub fn with_max_len(n: u64) -> Self {
        let n = n.max(1);
        EngineConfig { max_text_len: n, m: 4 * n, cal: Calibration::default() }
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::with_max_len(1 << 20)
    }
}

#[derive(Clone, Debug)]
pub struct SignatureDag {
    m: u64,
    nodes: Vec<Option<Node>>,
    reverse: BTreeMap<Assignment, Sig>,
    free: BTreeMap<Sig, Sig>,
    live: usize,
    root: Option<Sig>,
    pins: BTreeMap<Sig, u32>,
    fresh: Vec<Sig>,
    events: Option<Vec<StoreEvent>>,
    pub stats: QueryStats,
}

fn expect_id(got: Result<Sig>, want: Sig) {
    assert_eq!(got.ok(), Some(want), "example grammar ids");
}

impl SignatureDag {
    /// The run-length grammar used as a running example: 17 signatures for
    /// "CABCABABABABABABABABABCCCC".
    pub fn rlslp_example() -> SignatureDag {
        let mut d = SignatureDag::new(1 << 10);
        expect_id(d.char_sig(b'A'), 1);
        expect_id(d.char_sig(b'B'), 2);
        expect_id(d.char_sig(b'C'), 3);
        expect_id(d.run(3, 4), 4);
        expect_id(d.run(1, 1), 5);
        expect_id(d.run(2, 1), 6);
        expect_id(d.run(3, 1), 7);
        expect_id(d.sig_plus(&[7, 5]), 8);
        expect_id(d.sig_plus(&[7, 5, 6]), 9);
        expect_id(d.sig_plus(&[5, 6]), 10);
        expect_id(d.sig_plus(&[10, 4]), 11);
        expect_id(d.run(9, 2), 12);
        expect_id(d.run(10, 7), 13);
        expect_id(d.run(11, 1), 14);
        expect_id(d.sig_plus(&[12, 13]), 15);
        expect_id(d.sig_plus(&[15, 14]), 16);
        expect_id(d.run(16, 1), 17);
        d.replace_root(Some(17)).unwrap();
        d
    }

    pub fn new(m: u64) -> Self {
        assert!(m >= 1 && m <= u32::MAX as u64, "M out of range");
        let mut free = BTreeMap::new();
        free.insert(1, m as Sig);
        SignatureDag {
            m,
            nodes: vec![None],
            reverse: BTreeMap::new(),
            free,
            live: 0,
            root: None,
            pins: BTreeMap::new(),
            fresh: Vec::new(),
            events: None,
            stats: QueryStats::default(),
        }
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Number of signatures `w`.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn root(&self) -> Option<Sig> {
        self.root
    }

    pub fn text_len(&self) -> u64 {
        self.root.map_or(0, |r| self.length(r))
    }

    pub fn contains(&self, e: Sig) -> bool {
        self.nodes.get(e as usize).is_some_and(|n| n.is_some())
    }

    pub fn node(&self, e: Sig) -> &Node {
        self.nodes[e as usize].as_ref().expect("unknown signature")
    }

    pub fn try_node(&self, e: Sig) -> Option<&Node> {
        self.nodes.get(e as usize).and_then(|n| n.as_ref())
    }

    pub fn assign(&self, e: Sig) -> Assignment {
        self.node(e).assign
    }

    pub fn length(&self, e: Sig) -> u64 {
        self.node(e).len
    }

    pub fn level(&self, e: Sig) -> Level {
        self.node(e).level
    }

    pub fn iter(&self) -> impl Iterator<Item = (Sig, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|n| (i as Sig, n)))
    }

    pub fn lookup(&self, a: &Assignment) -> Option<Sig> {
        self.reverse.get(a).copied()
    }

    pub fn min_free(&self) -> Option<Sig> {
        self.free.keys().next().copied()
    }

    pub fn track_events(&mut self, on: bool) {
        self.events = if on { Some(Vec::new()) } else { None };
    }

    pub fn take_events(&mut self) -> Vec<StoreEvent> {
        match self.events.as_mut() {
            Some(v) => std::mem::take(v),
            None => Vec::new(),
        }
    }

    fn level_for(&self, a: &Assignment) -> Level {
        match *a {
            Assignment::Char(_) => Level(0),
            Assignment::Pair(l, r) => {
                let above = (self.level(r).0 / 2 + 1) * 2;
                Level(above.max(self.level(l).0))
            }
            Assignment::Run(b, _) => {
                let lb = self.level(b).0;
                Level(if lb.is_multiple_of(2) { lb + 1 } else { lb + 2 })
            }
        }
    }

    fn length_for(&self, a: &Assignment) -> u64 {
        match *a {
            Assignment::Char(_) => 1,
            Assignment::Pair(l, r) => self.length(l) + self.length(r),
            Assignment::Run(b, k) => self.length(b) * k,
        }
    }

    fn take_id(&mut self) -> Result<Sig> {
        let (&s, &e) = self.free.iter().next().ok_or(SigdexError::CapacityExhausted(self.m))?;
        self.free.remove(&s);
        if s < e {
            self.free.insert(s + 1, e);
        }
        Ok(s)
    }

    fn give_id(&mut self, id: Sig) {
        let mut start = id;
        let mut end = id;
        if let Some((&s, &e)) = self.free.range(..id).next_back() {
            if e + 1 == id {
                start = s;
                self.free.remove(&s);
            }
        }
        if let Some(&e) = self.free.get(&(id + 1)) {
            self.free.remove(&(id + 1));
            end = e;
        }
        self.free.insert(start, end);
    }

    /// Signature of `a`, creating it with the minimum free id when absent.
    pub fn sig_of(&mut self, a: Assignment) -> Result<Sig> {
        self.stats.dict_lookups += 1;
        if let Some(&e) = self.reverse.get(&a) {
            return Ok(e);
        }
        match a {
            Assignment::Char(_) => {}
            Assignment::Pair(l, r) => {
                if !self.contains(l) || !self.contains(r) {
                    return Err(SigdexError::invalid("pair over unknown signature"));
                }
            }
            Assignment::Run(b, k) => {
                if !self.contains(b) || k == 0 {
                    return Err(SigdexError::invalid("bad run"));
                }
            }
        }
        let id = self.take_id()?;
        self.insert_node(id, a, None);
        self.fresh.push(id);
        self.stats.signatures_created += 1;
        Ok(id)
    }

    fn insert_node(&mut self, id: Sig, a: Assignment, level: Option<Level>) {
        let level = level.unwrap_or_else(|| self.level_for(&a));
        let len = self.length_for(&a);
        for c in a.children() {
            let n = self.nodes[c as usize].as_mut().unwrap();
            n.refcount += 1;
            n.parents.insert(id);
        }
        if self.nodes.len() <= id as usize {
            self.nodes.resize(id as usize + 1, None);
        }
        self.nodes[id as usize] = Some(Node { assign: a, len, level, refcount: 0, parents: BTreeSet::new() });
        self.reverse.insert(a, id);
        self.live += 1;
        if let Some(ev) = self.events.as_mut() {
            ev.push(StoreEvent::Added(id));
        }
    }

    pub fn char_sig(&mut self, c: u8) -> Result<Sig> {
        self.sig_of(Assignment::Char(c))
    }

    pub fn pair(&mut self, l: Sig, r: Sig) -> Result<Sig> {
        self.sig_of(Assignment::Pair(l, r))
    }

    pub fn run(&mut self, b: Sig, k: u64) -> Result<Sig> {
        self.sig_of(Assignment::Run(b, k))
    }

    /// Left fold of a block of 2..=4 signatures into nested pairs.
    pub fn sig_plus(&mut self, x: &[Sig]) -> Result<Sig> {
        if !(2..=4).contains(&x.len()) {
            return Err(SigdexError::invalid(format!("sig_plus on {} symbols", x.len())));
        }
        let mut acc = self.pair(x[0], x[1])?;
        for &y in &x[2..] {
            acc = self.pair(acc, y)?;
        }
        Ok(acc)
    }

    pub fn retain(&mut self, e: Sig) -> u32 {
        let n = self.nodes[e as usize].as_mut().expect("retain of unknown signature");
        n.refcount += 1;
        n.refcount
    }

    pub fn release(&mut self, e: Sig) -> Result<u32> {
        let n = self.nodes[e as usize].as_mut().ok_or_else(|| SigdexError::internal("release of unknown"))?;
        if n.refcount == 0 {
            return Err(SigdexError::internal(format!("refcount of {e} below zero")));
        }
        n.refcount -= 1;
        Ok(n.refcount)
    }

    /// Deletes `from` if its refcount is zero, cascading into children.
    pub fn remove_useless(&mut self, from: Sig) -> usize {
        let mut stack = vec![from];
        let mut removed = 0;
        while let Some(e) = stack.pop() {
            let Some(n) = self.nodes.get(e as usize).and_then(|n| n.as_ref()) else { continue };
            if n.refcount > 0 {
                continue;
            }
            let n = self.nodes[e as usize].take().unwrap();
            self.reverse.remove(&n.assign);
            self.live -= 1;
            self.give_id(e);
            removed += 1;
            if let Some(ev) = self.events.as_mut() {
                ev.push(StoreEvent::Removed(e, n.assign));
            }
            for c in n.assign.children() {
                if let Some(cn) = self.nodes[c as usize].as_mut() {
                    cn.refcount -= 1;
                    cn.parents.remove(&e);
                    if cn.refcount == 0 {
                        stack.push(c);
                    }
                }
            }
        }
        self.stats.signatures_removed += removed as u64;
        removed
    }

    /// Makes `new` the root (retaining before releasing the old one) and
    /// collects everything unreachable that was created since the last sweep.
    pub fn replace_root(&mut self, new: Option<Sig>) -> Result<()> {
        if let Some(r) = new {
            self.retain(r);
        }
        if let Some(old) = self.root.take() {
            if self.release(old)? == 0 {
                self.remove_useless(old);
            }
        }
        self.root = new;
        self.sweep();
        Ok(())
    }

    /// Keeps `e` alive independently of the root (one extra reference).
    pub fn pin(&mut self, e: Sig) {
        self.retain(e);
        *self.pins.entry(e).or_default() += 1;
    }

    pub fn unpin(&mut self, e: Sig) -> Result<()> {
        let c = self.pins.get_mut(&e).ok_or_else(|| SigdexError::internal(format!("{e} is not pinned")))?;
        *c -= 1;
        if *c == 0 {
            self.pins.remove(&e);
        }
        if self.release(e)? == 0 {
            self.remove_useless(e);
        }
        Ok(())
    }

    pub fn pinned(&self) -> impl Iterator<Item = Sig> + '_ {
        self.pins.keys().copied()
    }

    /// Removes signatures created since the last sweep that nothing references.
    pub fn sweep(&mut self) -> usize {
        let fresh = std::mem::take(&mut self.fresh);
        let mut removed = 0;
        for e in fresh.into_iter().rev() {
            if self.try_node(e).is_some_and(|n| n.refcount == 0) {
                removed += self.remove_useless(e);
            }
        }
        removed
    }

    /// Characters `val(e)[i..=j]` (1-based).
    pub fn expand(&self, e: Sig, i: u64, j: u64) -> Result<Vec<u8>> {
        let n = self.try_node(e).ok_or_else(|| SigdexError::invalid("unknown signature"))?;
        if i < 1 || i > j || j > n.len {
            return Err(SigdexError::invalid(format!("expand range {i}..{j} outside 1..{}", n.len)));
        }
        let mut out = Vec::with_capacity((j - i + 1) as usize);
        self.expand_into(e, i - 1, j, &mut out);
        Ok(out)
    }

    pub fn expand_all(&self, e: Sig) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.length(e) as usize);
        self.expand_into(e, 0, self.length(e), &mut out);
        out
    }

    pub fn text(&self) -> Vec<u8> {
        self.root.map_or_else(Vec::new, |r| self.expand_all(r))
    }

    // half-open [lo, hi) relative to val(e)
    fn expand_into(&self, e: Sig, lo: u64, hi: u64, out: &mut Vec<u8>) {
        match self.assign(e) {
            Assignment::Char(c) => out.push(c),
            Assignment::Pair(l, r) => {
                let ll = self.length(l);
                if lo < ll {
                    self.expand_into(l, lo, hi.min(ll), out);
                }
                if hi > ll {
                    self.expand_into(r, lo.max(ll) - ll, hi - ll, out);
                }
            }
            Assignment::Run(b, _) => {
                let bl = self.length(b);
                let mut c = lo / bl;
                while c * bl < hi {
                    let s = c * bl;
                    self.expand_into(b, lo.max(s) - s, hi.min(s + bl) - s, out);
                    c += 1;
                }
            }
        }
    }

    /// Single character `val(e)[k]`.
    pub fn char_at(&self, mut e: Sig, mut k: u64) -> u8 {
        loop {
            match self.assign(e) {
                Assignment::Char(c) => return c,
                Assignment::Pair(l, r) => {
                    let ll = self.length(l);
                    if k <= ll {
                        e = l;
                    } else {
                        k -= ll;
                        e = r;
                    }
                }
                Assignment::Run(b, _) => {
                    let bl = self.length(b);
                    k = (k - 1) % bl + 1;
                    e = b;
                }
            }
        }
    }

    /// Tree height measured in nodes from `e` down to a character.
    pub fn height(&self, e: Sig) -> u32 {
        let mut memo: BTreeMap<Sig, u32> = BTreeMap::new();
        self.height_memo(e, &mut memo)
    }

    fn height_memo(&self, e: Sig, memo: &mut BTreeMap<Sig, u32>) -> u32 {
        if let Some(&h) = memo.get(&e) {
            return h;
        }
        let h = 1 + self.assign(e).children().map(|c| self.height_memo(c, memo)).max().unwrap_or(0);
        memo.insert(e, h);
        h
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "SIGDEX 1 {} {}", self.m, self.root.unwrap_or(0));
        for (id, n) in self.iter() {
            let _ = match n.assign {
                Assignment::Char(c) => write!(s, "{id} C {c}"),
                Assignment::Pair(l, r) => write!(s, "{id} P {l} {r}"),
                Assignment::Run(b, k) => write!(s, "{id} R {b} {k}"),
            };
            let _ = writeln!(s, " {}", n.level);
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| SigdexError::format("empty dump"))?;
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 4 || h[0] != "SIGDEX" || h[1] != "1" {
            return Err(SigdexError::format(format!("bad header: {head}")));
        }
        let num = |x: &str| -> Result<u64> { x.parse::<u64>().map_err(|_| SigdexError::format(format!("bad number {x:?}"))) };
        let m = num(h[2])?;
        if m == 0 || m > u32::MAX as u64 {
            return Err(SigdexError::format("M out of range"));
        }
        let root = num(h[3])? as Sig;
        let mut defs: BTreeMap<Sig, (Assignment, Level)> = BTreeMap::new();
        let mut last = 0;
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || SigdexError::format(format!("malformed line: {line}"));
            let id = num(f.first().ok_or_else(bad)?)?;
            if id == 0 || id > m || id <= last {
                return Err(SigdexError::format(format!("id {id} out of order or range")));
            }
            last = id;
            let (a, rest) = match *f.get(1).ok_or_else(bad)? {
                "C" if f.len() == 5 => {
                    let c = num(f[2])?;
                    if c > 255 {
                        return Err(bad());
                    }
                    (Assignment::Char(c as u8), &f[3..])
                }
                "P" if f.len() == 6 => (Assignment::Pair(num(f[2])? as Sig, num(f[3])? as Sig), &f[4..]),
                "R" if f.len() == 6 => {
                    let k = num(f[3])?;
                    if k == 0 {
                        return Err(bad());
                    }
                    (Assignment::Run(num(f[2])? as Sig, k), &f[4..])
                }
                _ => return Err(bad()),
            };
            let lt = rest[0].strip_prefix('L').ok_or_else(bad)?;
            let t = num(lt)? as u32;
            let level = match rest[1] {
                "S" => Level::shrink(t),
                "W" => Level::pow(t),
                _ => return Err(bad()),
            };
            defs.insert(id as Sig, (a, level));
        }
        for (id, (a, _)) in &defs {
            for c in a.children() {
                if !defs.contains_key(&c) {
                    return Err(SigdexError::format(format!("{id} refers to missing {c}")));
                }
            }
        }
        if root != 0 && !defs.contains_key(&root) {
            return Err(SigdexError::format("root is not defined"));
        }
        // children before parents, detecting cycles
        let mut order = Vec::with_capacity(defs.len());
        let mut state: BTreeMap<Sig, u8> = BTreeMap::new();
        for &start in defs.keys() {
            if state.contains_key(&start) {
                continue;
            }
            let mut stack = vec![(start, false)];
            while let Some((e, done)) = stack.pop() {
                if done {
                    state.insert(e, 2);
                    order.push(e);
                    continue;
                }
                match state.get(&e) {
                    Some(2) => continue,
                    Some(1) => return Err(SigdexError::format(format!("cycle through {e}"))),
                    _ => {}
                }
                state.insert(e, 1);
                stack.push((e, true));
                for c in defs[&e].0.children() {
                    match state.get(&c) {
                        Some(2) => {}
                        Some(1) => return Err(SigdexError::format(format!("cycle through {c}"))),
                        _ => stack.push((c, false)),
                    }
                }
            }
        }
        let mut dag = SignatureDag::new(m);
        dag.free.clear();
        for e in order {
            let (a, level) = defs[&e];
            if dag.reverse.contains_key(&a) {
                return Err(SigdexError::format(format!("duplicate assignment at {e}")));
            }
            if level != dag.level_for(&a) {
                return Err(SigdexError::format(format!("level tag of {e} inconsistent with its children")));
            }
            dag.insert_node(e, a, Some(level));
        }
        let mut next = 1u64;
        for &id in defs.keys() {
            if (id as u64) > next {
                dag.free.insert(next as Sig, id - 1);
            }
            next = id as u64 + 1;
        }
        if next <= m {
            dag.free.insert(next as Sig, m as Sig);
        }
        if root != 0 {
            dag.retain(root);
            dag.root = Some(root);
        }
        Ok(dag)
    }

    /// Structural check plus the level discipline of a signature encoding:
    /// pairs join a power node on the right with a power node of the same
    /// level or a pair of the next shrink level on the left, and runs sit
    /// directly on shrink nodes.
    pub fn audit_encoding(&self) -> Result<()> {
        self.audit()?;
        for (id, n) in self.iter() {
            match n.assign {
                Assignment::Pair(l, r) => {
                    let (ll, lr) = (self.level(l), self.level(r));
                    if !lr.is_pow() || (ll != lr && ll != lr.next()) {
                        return Err(SigdexError::internal(format!("pair {id} mixes levels")));
                    }
                }
                Assignment::Run(b, _) => {
                    if self.level(b).is_pow() {
                        return Err(SigdexError::internal(format!("run {id} over a power node")));
                    }
                }
                Assignment::Char(_) => {}
            }
        }
        if let Some(r) = self.root {
            if !self.level(r).is_pow() {
                return Err(SigdexError::internal("root is not a power node"));
            }
        }
        Ok(())
    }

    /// Full consistency check; returns a description of the first violation.
    pub fn audit(&self) -> Result<()> {
        let err = |m: String| Err(SigdexError::internal(m));
        let cap = self.nodes.len();
        let mut counts = vec![0u32; cap];
        // parents in ascending order, since nodes are visited by id
        let mut parents: Vec<Vec<Sig>> = vec![Vec::new(); cap];
        for (a, &id) in &self.reverse {
            if self.try_node(id).map(|n| &n.assign) != Some(a) {
                return err(format!("reverse map entry for {id} is stale"));
            }
        }
        for (id, n) in self.iter() {
            for c in n.assign.children() {
                if !self.contains(c) {
                    return err(format!("{id} refers to missing {c}"));
                }
                counts[c as usize] += 1;
                let ps = &mut parents[c as usize];
                if ps.last() != Some(&id) {
                    ps.push(id);
                }
            }
        }
        if self.reverse.len() != self.live {
            return err("reverse map size differs from node count".into());
        }
        if let Some(r) = self.root {
            if !self.contains(r) {
                return err("root missing".into());
            }
            counts[r as usize] += 1;
        }
        for (&p, &c) in &self.pins {
            if !self.contains(p) {
                return err(format!("pinned {p} missing"));
            }
            counts[p as usize] += c;
        }
        for (id, n) in self.iter() {
            let want = counts[id as usize];
            if n.refcount != want {
                return err(format!("refcount of {id} is {} but recount gives {want}", n.refcount));
            }
            if want == 0 {
                return err(format!("{id} is useless"));
            }
            if !n.parents.iter().eq(parents[id as usize].iter()) {
                return err(format!("parent set of {id} is stale"));
            }
            if n.len != self.length_for(&n.assign) {
                return err(format!("length of {id} is stale"));
            }
            if n.level != self.level_for(&n.assign) {
                return err(format!("level of {id} is inconsistent"));
            }
        }
        let mut expect_free = Vec::new();
        let mut next = 1u64;
        for (id, _) in self.iter() {
            if id as u64 > next {
                expect_free.push((next as Sig, id - 1));
            }
            next = id as u64 + 1;
        }
        if next <= self.m {
            expect_free.push((next as Sig, self.m as Sig));
        }
        if !self.free.iter().map(|(&a, &b)| (a, b)).eq(expect_free) {
            return err("free intervals out of sync".into());
        }
        // 0 unseen, 1 on the current path, 2 finished
        let mut state = vec![0u8; cap];
        for (start, _) in self.iter() {
            if state[start as usize] != 0 {
                continue;
            }
            let mut stack = vec![(start, false)];
            while let Some((e, done)) = stack.pop() {
                if done {
                    state[e as usize] = 2;
                    continue;
                }
                if state[e as usize] == 2 {
                    continue;
                }
                state[e as usize] = 1;
                stack.push((e, true));
                for c in self.assign(e).children() {
                    match state[c as usize] {
                        1 => return err(format!("cycle through {c}")),
                        2 => {}
                        _ => stack.push((c, false)),
                    }
                }
            }
        }
        Ok(())
    }
}
