//! One text, its signature store and an optional pattern index.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::encoder;
use crate::error::{Result, SigdexError};
use crate::importers::{self, Lz77Factor, Slp};
use crate::lce_engine::{self, Operand};
use crate::lcp_core::ParseParams;
use crate::pm_index::{self, IndexPlane, PrimaryOcc};
use crate::sig_store::{Calibration, EngineConfig, QueryStats, Sig, SignatureDag};
use crate::updater::{self, EditOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builder {
    /// Chunked insertion for texts, full expansion for other inputs.
    Naive,
    Linear,
    Gfact,
    Levelwise,
}

impl FromStr for Builder {
    type Err = SigdexError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Builder::Naive),
            "linear" => Ok(Builder::Linear),
            "gfact" => Ok(Builder::Gfact),
            "levelwise" => Ok(Builder::Levelwise),
            _ => Err(SigdexError::invalid(format!("unknown builder {s:?}"))),
        }
    }
}

impl fmt::Display for Builder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Builder::Naive => "naive",
            Builder::Linear => "linear",
            Builder::Gfact => "gfact",
            Builder::Levelwise => "levelwise",
        })
    }
}

pub struct Engine {
    pub dag: SignatureDag,
    pub params: ParseParams,
    index: Option<IndexPlane>,
    /// Query every split of a pattern; needed when the store holds a grammar
    /// that was loaded verbatim rather than parsed.
    all_splits: bool,
    /// Counters of the last operation.
    pub last: QueryStats,
    pub cal: Calibration,
}

impl Engine {
    pub fn new(cfg: &EngineConfig) -> Self {
        let mut e = Engine::from_dag(SignatureDag::new(cfg.m));
        e.cal = cfg.cal;
        e
    }

    pub fn from_dag(dag: SignatureDag) -> Self {
        let params = ParseParams::new(dag.m());
        Engine { dag, params, index: None, all_splits: false, last: QueryStats::default(), cal: Calibration::default() }
    }

    /// Loads a grammar verbatim (no re-parsing). Pattern queries then use
    /// every split position.
    pub fn from_raw_slp(cfg: &EngineConfig, slp: &Slp) -> Result<Self> {
        let mut e = Engine::new(cfg);
        importers::load_grammar(&mut e.dag, slp)?;
        e.all_splits = true;
        Ok(e)
    }

    pub fn len(&self) -> u64 {
        self.dag.text_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn root(&self) -> Option<Sig> {
        self.dag.root()
    }

    pub fn text(&self) -> Vec<u8> {
        self.dag.text()
    }

    pub fn all_splits(&self) -> bool {
        self.all_splits
    }

    pub fn set_all_splits(&mut self, on: bool) {
        self.all_splits = on;
    }

    fn begin(&mut self) {
        self.dag.stats = QueryStats::default();
    }

    fn finish(&mut self) -> Result<()> {
        self.last = self.dag.stats;
        if let Some(ix) = self.index.as_mut() {
            let ev = self.dag.take_events();
            ix.sync(&self.dag, &ev)?;
        }
        Ok(())
    }

    fn guarded<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.begin();
        let r = f(self);
        self.finish()?;
        r
    }

    pub fn build_text(&mut self, t: &[u8], b: Builder) -> Result<Sig> {
        self.all_splits = false;
        self.guarded(|e| match b {
            Builder::Naive => encoder::encode_text(&mut e.dag, &e.params, t),
            Builder::Linear => {
                e.dag.replace_root(None)?;
                let r = encoder::encode_text_linear(&mut e.dag, &e.params, t)?;
                e.dag.replace_root(Some(r))?;
                Ok(r)
            }
            _ => Err(SigdexError::invalid(format!("builder {b} does not apply to texts"))),
        })
    }

    pub fn build_lz77(&mut self, f: &[Lz77Factor], b: Builder) -> Result<Sig> {
        self.all_splits = false;
        match b {
            Builder::Naive | Builder::Gfact => self.guarded(|e| importers::build_from_lz77(&mut e.dag, &e.params, f)),
            Builder::Linear => {
                let t = importers::lz77_decode(f)?;
                self.build_text(&t, Builder::Linear)
            }
            Builder::Levelwise => Err(SigdexError::invalid("builder levelwise does not apply to LZ77 input")),
        }
    }

    pub fn build_slp(&mut self, slp: &Slp, b: Builder) -> Result<Sig> {
        self.all_splits = false;
        match b {
            Builder::Naive => self.build_text(&slp.text(), Builder::Naive),
            Builder::Linear => self.build_text(&slp.text(), Builder::Linear),
            Builder::Gfact => self.guarded(|e| importers::build_from_slp_gfact(&mut e.dag, &e.params, slp)),
            Builder::Levelwise => self.guarded(|e| importers::build_from_slp_levelwise(&mut e.dag, &e.params, slp).map(|x| x.0)),
        }
    }

    fn parsed_only(&self) -> Result<()> {
        if self.all_splits {
            return Err(SigdexError::invalid("edits need a parsed encoding, not a verbatim grammar"));
        }
        Ok(())
    }

    pub fn insert(&mut self, y: &[u8], i: u64) -> Result<()> {
        self.apply(&EditOp::Insert { y: y.to_vec(), i })
    }

    pub fn insert_copy(&mut self, j: u64, y: u64, i: u64) -> Result<()> {
        self.apply(&EditOp::InsertCopy { j, y, i })
    }

    pub fn delete(&mut self, j: u64, y: u64) -> Result<()> {
        self.apply(&EditOp::Delete { j, y })
    }

    pub fn apply(&mut self, op: &EditOp) -> Result<()> {
        self.parsed_only()?;
        self.guarded(|e| updater::apply(&mut e.dag, &e.params, op))
    }

    fn root_or_err(&self) -> Result<Sig> {
        self.root().ok_or_else(|| SigdexError::invalid("empty text"))
    }

    pub fn lce(&mut self, i: u64, j: u64) -> Result<u64> {
        let r = self.root_or_err()?;
        let (l, v) = lce_engine::lce_counted(&self.dag, r, r, i, j)?;
        self.last = QueryStats { nodes_visited: v, ..Default::default() };
        Ok(l)
    }

    pub fn lce_backward(&mut self, i: u64, j: u64) -> Result<u64> {
        let r = self.root_or_err()?;
        let (l, v) = lce_engine::lce_backward_counted(&self.dag, r, r, i, j)?;
        self.last = QueryStats { nodes_visited: v, ..Default::default() };
        Ok(l)
    }

    /// Longest common prefix of the substrings `T[i..i+a)` and `T[j..j+b)`.
    pub fn lcp(&mut self, i: u64, a: u64, j: u64, b: u64) -> Result<u64> {
        self.check_range(i, a)?;
        self.check_range(j, b)?;
        Ok(self.lce(i, j)?.min(a).min(b))
    }

    /// Longest common suffix of the substrings `T[i..i+a)` and `T[j..j+b)`.
    pub fn lcs(&mut self, i: u64, a: u64, j: u64, b: u64) -> Result<u64> {
        self.check_range(i, a)?;
        self.check_range(j, b)?;
        Ok(self.lce_backward(i + a - 1, j + b - 1)?.min(a).min(b))
    }

    fn check_range(&self, i: u64, y: u64) -> Result<()> {
        if y == 0 || i < 1 || i + y - 1 > self.len() {
            return Err(SigdexError::invalid(format!("range {i}+{y} outside 1..{}", self.len())));
        }
        Ok(())
    }

    pub fn index_enabled(&self) -> bool {
        self.index.is_some()
    }

    /// Builds the pattern index and keeps it current across edits.
    pub fn enable_index(&mut self) {
        if self.index.is_none() {
            self.dag.track_events(true);
            self.index = Some(IndexPlane::build(&self.dag));
        }
    }

    pub fn index(&self) -> Option<&IndexPlane> {
        self.index.as_ref()
    }

    /// Split positions for `p` plus a clean-up of the temporary signatures.
    fn splits(&mut self, p: &[u8]) -> Result<Vec<usize>> {
        self.enable_index();
        let s = pm_index::split_positions(&mut self.dag, &self.params, p, self.all_splits);
        self.dag.sweep();
        self.dag.take_events();
        s
    }

    pub fn primary_occurrences(&mut self, p: &[u8]) -> Result<BTreeSet<PrimaryOcc>> {
        let splits = self.splits(p)?;
        let plane = self.index.as_ref().unwrap();
        Ok(pm_index::primary_from_splits(&self.dag, plane, p, &splits))
    }

    /// Streams occurrence starts of `p` (unordered).
    pub fn for_each_occurrence(&mut self, p: &[u8], f: &mut dyn FnMut(u64)) -> Result<()> {
        let Some(root) = self.root() else { return Ok(()) };
        let splits = self.splits(p)?;
        let plane = self.index.as_ref().unwrap();
        pm_index::for_each_occurrence(&self.dag, plane, root, p, &splits, f);
        Ok(())
    }

    /// Sorted occurrence starts of `p`.
    pub fn occurrences(&mut self, p: &[u8]) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        self.for_each_occurrence(p, &mut |x| out.push(x))?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Structural audit, encoding discipline (unless verbatim), decoding of
    /// the root and the index against a rebuild.
    pub fn verify(&self) -> Result<()> {
        if self.all_splits {
            self.dag.audit()?;
        } else {
            self.dag.audit_encoding()?;
        }
        if let Some(ix) = &self.index {
            ix.audit(&self.dag)?;
        }
        Ok(())
    }

    pub fn sort_variables_of(&mut self, slp: &Slp) -> Result<Vec<usize>> {
        let sigs = importers::signatures_for_all_variables(&mut self.dag, &self.params, slp)?;
        let order = importers::sort_variables(&self.dag, &sigs);
        for s in sigs {
            self.dag.unpin(s)?;
        }
        order
    }

    pub fn export_slp(&self) -> Result<Slp> {
        importers::export_to_slp(&self.dag, self.root())
    }

    /// Order of two substrings `T[i..i+a)` and `T[j..j+b)`.
    pub fn compare(&mut self, i: u64, a: u64, j: u64, b: u64) -> Result<std::cmp::Ordering> {
        let l = self.lcp(i, a, j, b)?;
        if l == a || l == b {
            return Ok(a.cmp(&b));
        }
        let r = self.root_or_err()?;
        Ok(self.dag.char_at(r, i + l).cmp(&self.dag.char_at(r, j + l)))
    }

    /// `N=<text length> w=<signatures>` plus the tower height.
    pub fn stats_line(&self) -> String {
        format!("N={} w={}", self.len(), self.dag.len())
    }

    pub fn dump(&self) -> String {
        let mut s = self.dag.serialize();
        if self.all_splits {
            s.push_str("# verbatim\n");
        }
        s
    }

    pub fn load(text: &str) -> Result<Self> {
        let dag = SignatureDag::deserialize(text)?;
        let mut e = Engine::from_dag(dag);
        e.all_splits = text.lines().any(|l| l.trim() == "# verbatim");
        Ok(e)
    }

    /// Operand view of a substring root, for tests and tools.
    pub fn root_operand(&self) -> Option<Operand> {
        self.root().map(Operand::of)
    }
}
