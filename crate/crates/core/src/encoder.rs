//! Building signature encodings: the level tower, the generic assembler used
//! by every update, and the two text builders.

use std::collections::BTreeSet;

use crate::error::{Result, SigdexError};
use crate::lce_engine::LevelFinger;
use crate::lcp_core::{bits_unchecked, eblock, epow_iter, log_star, ParseParams};
use crate::sig_store::{Level, Sig, SignatureDag};
use crate::updater;

#[derive(Clone, Copy, Debug)]
struct Piece {
    sig: Sig,
    count: u64,
    level: Level,
}

/// Level-`level` elements at the right end of `pieces`, at most `need`, in text order.
fn context_left(dag: &SignatureDag, pieces: &[Piece], level: Level, need: usize) -> Result<Vec<Sig>> {
    let mut out = Vec::with_capacity(need);
    'outer: for p in pieces.iter().rev() {
        for _ in 0..p.count {
            let mut f = LevelFinger::new(dag, p.sig, level);
            let mut cur = f.seek(dag.length(p.sig) - 1)?;
            loop {
                if out.len() == need {
                    break 'outer;
                }
                out.push(cur.0);
                match f.prev()? {
                    Some(c) => cur = c,
                    None => break,
                }
            }
        }
    }
    out.reverse();
    Ok(out)
}

fn context_right(dag: &SignatureDag, pieces: &[Piece], level: Level, need: usize) -> Result<Vec<Sig>> {
    let mut out = Vec::with_capacity(need);
    'outer: for p in pieces {
        for _ in 0..p.count {
            let mut f = LevelFinger::new(dag, p.sig, level);
            let mut cur = f.seek(0)?;
            loop {
                if out.len() == need {
                    break 'outer;
                }
                out.push(cur.0);
                match f.next()? {
                    Some(c) => cur = c,
                    None => break,
                }
            }
        }
    }
    Ok(out)
}

/// Builds the root of the text spelled by `pieces`.
///
/// Every piece must be a node of the target encoding (a common-sequence
/// element); run pieces at a shrink level may be partial runs. Levels are
/// processed bottom-up, re-parsing only the segments sitting at the lowest
/// remaining level, with context taken from the neighbouring pieces.
pub fn assemble(dag: &mut SignatureDag, params: &ParseParams, pieces: &[(Sig, u64)]) -> Result<Option<Sig>> {
    let mut ps: Vec<Piece> = pieces
        .iter()
        .filter(|p| p.1 > 0)
        .map(|&(sig, count)| Piece { sig, count, level: dag.level(sig) })
        .collect();
    if ps.is_empty() {
        return Ok(None);
    }
    loop {
        if ps.len() == 1 && ps[0].count == 1 && ps[0].level.is_pow() {
            return Ok(Some(ps[0].sig));
        }
        let lam = ps.iter().map(|p| p.level).min().unwrap();
        let mut out: Vec<Piece> = Vec::with_capacity(ps.len());
        let mut i = 0;
        while i < ps.len() {
            if ps[i].level != lam {
                out.push(ps[i]);
                i += 1;
                continue;
            }
            let mut e = i;
            while e < ps.len() && ps[e].level == lam {
                e += 1;
            }
            if lam.is_pow() {
                let mut elems = Vec::new();
                for p in &ps[i..e] {
                    for _ in 0..p.count {
                        elems.push(p.sig);
                    }
                }
                let cl = context_left(dag, &ps[..i], lam, params.delta_l)?;
                let cr = context_right(dag, &ps[e..], lam, params.delta_r)?;
                let mut seq: Vec<u64> = Vec::with_capacity(cl.len() + elems.len() + cr.len());
                seq.extend(cl.iter().chain(&elems).chain(&cr).map(|&x| x as u64));
                if seq.len() < 2 {
                    return Err(SigdexError::internal("lone element below the top level"));
                }
                let d = bits_unchecked(&seq, params)?;
                let (s0, s1) = (cl.len(), cl.len() + elems.len());
                if !d[s0] || (!cr.is_empty() && !d[s1]) {
                    return Err(SigdexError::internal("segment not aligned to blocks"));
                }
                for blk in eblock(&elems, &d[s0..s1])? {
                    let sig = dag.sig_plus(blk)?;
                    out.push(Piece { sig, count: 1, level: lam.next() });
                }
            } else {
                for (b, k) in epow_iter(ps[i..e].iter().map(|p| (p.sig, p.count))) {
                    let sig = dag.run(b, k)?;
                    out.push(Piece { sig, count: 1, level: lam.next() });
                }
            }
            i = e;
        }
        ps = out;
    }
}

/// Chunk length for the block-wise builder.
pub fn chunk_len(n: u64, m: u64) -> usize {
    let lg = (n.max(2) as f64).log2();
    let b = (lg * log_star(m) as f64).ceil() as usize;
    b.max(64)
}

/// Encodes `t` by appending chunks with the insertion routine; becomes the root.
pub fn encode_text(dag: &mut SignatureDag, params: &ParseParams, t: &[u8]) -> Result<Sig> {
    check_len(dag, t)?;
    dag.replace_root(None)?;
    let b = chunk_len(t.len() as u64, dag.m());
    let mut pos = 1u64;
    for chunk in t.chunks(b) {
        updater::insert(dag, params, chunk, pos)?;
        pos += chunk.len() as u64;
    }
    Ok(dag.root().unwrap())
}

fn check_len(dag: &SignatureDag, t: &[u8]) -> Result<()> {
    if t.is_empty() {
        return Err(SigdexError::invalid("empty text"));
    }
    if t.len() as u64 > dag.m() / 4 {
        return Err(SigdexError::CapacityExhausted(dag.m()));
    }
    Ok(())
}

/// One power level: a Run signature per maximal run of `shrink`. Distinct
/// runs get their signatures in sorted (symbol, exponent) order first.
pub fn pow_level(dag: &mut SignatureDag, shrink: &[Sig]) -> Result<Vec<Sig>> {
    let runs = epow_iter(shrink.iter().map(|&x| (x, 1)));
    let distinct: BTreeSet<(Sig, u64)> = runs.iter().copied().collect();
    for &(b, k) in &distinct {
        dag.run(b, k)?;
    }
    runs.iter().map(|&(b, k)| dag.run(b, k)).collect()
}

/// One shrink level: block the power sequence and name each block. Distinct
/// blocks get their signatures in (length, symbols) order first.
pub fn shrink_level(dag: &mut SignatureDag, params: &ParseParams, pow: &[Sig]) -> Result<Vec<Sig>> {
    if pow.len() < 2 {
        return Err(SigdexError::invalid("shrink of a converged level"));
    }
    let d = bits_unchecked(&pow.iter().map(|&x| x as u64).collect::<Vec<_>>(), params)?;
    let blocks = eblock(pow, &d)?;
    let distinct: BTreeSet<(usize, &[Sig])> = blocks.iter().map(|b| (b.len(), *b)).collect();
    for (_, b) in distinct {
        dag.sig_plus(b)?;
    }
    blocks.into_iter().map(|b| dag.sig_plus(b)).collect()
}

/// Builds the whole tower level by level. Does not touch the root.
pub fn encode_text_linear(dag: &mut SignatureDag, params: &ParseParams, t: &[u8]) -> Result<Sig> {
    check_len(dag, t)?;
    let alphabet: BTreeSet<u8> = t.iter().copied().collect();
    let mut csig = [0 as Sig; 256];
    for c in alphabet {
        csig[c as usize] = dag.char_sig(c)?;
    }
    let mut s: Vec<Sig> = t.iter().map(|&c| csig[c as usize]).collect();
    loop {
        let pow = pow_level(dag, &s)?;
        if pow.len() == 1 {
            return Ok(pow[0]);
        }
        s = shrink_level(dag, params, &pow)?;
    }
}

/// Tower height of an encoding root (number of shrink levels above 0).
pub fn tower_height(dag: &SignatureDag, root: Sig) -> u32 {
    dag.level(root).t()
}
