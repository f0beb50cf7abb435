//! Locally consistent parsing: boundary bits, block decomposition and run grouping.
//!
//! Every bit produced by [`boundary_bits`] is a function of the window
//! `p~[i - delta_l ..= i + delta_r]` where out-of-range entries read as 0.

use crate::error::{Result, SigdexError};

/// Iterated base-2 logarithm: the least `k` with `log2^(k)(w) <= 1`.
pub fn log_star(w: u64) -> u32 {
    let mut x = w as f64;
    let mut k = 0;
    while x > 1.0 {
        x = x.log2();
        k += 1;
    }
    k
}

/// Parameters of the parsing function. `w` bounds the symbol values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseParams {
    pub w: u64,
    pub log_star_w: u32,
    pub delta_l: usize,
    pub delta_r: usize,
}

impl ParseParams {
    pub fn new(w: u64) -> Self {
        let w = w.max(1);
        let ls = log_star(w);
        ParseParams {
            w,
            log_star_w: ls,
            // Reduction passes (ls + 2) plus three recolouring passes, the
            // extremum test and the right-edge repair each reach further left.
            delta_l: ls as usize + 10,
            delta_r: 4,
        }
    }

    /// Number of alphabet-reduction passes.
    pub fn reduction_passes(&self) -> usize {
        self.log_star_w as usize + 2
    }

    /// Convergence threshold on run count for common sequences.
    pub fn core_limit(&self) -> usize {
        self.delta_l + self.delta_r + 9
    }

    /// Border window length used by the level-wise SLP builder.
    pub fn window(&self) -> usize {
        self.delta_l + self.delta_r + 4
    }
}

/// One alphabet-reduction step: `c'[i] = 2l + bit_l(c[i])` where `l` is the
/// lowest bit in which `c[i]` and its left neighbour differ.
fn reduce_once(c: &mut [u64]) {
    let mut prev = if c[0] == 0 { 1 } else { 0 };
    for x in c.iter_mut() {
        let cur = *x;
        let l = (cur ^ prev).trailing_zeros() as u64;
        *x = 2 * l + ((cur >> l) & 1);
        prev = cur;
    }
}

fn eliminate(c: &mut [u64]) {
    let n = c.len();
    for colour in 3..6u64 {
        for i in 0..n {
            if c[i] != colour {
                continue;
            }
            let left = if i > 0 { Some(c[i - 1]) } else { None };
            let right = if i + 1 < n { Some(c[i + 1]) } else { None };
            c[i] = (0..3u64)
                .find(|&v| left != Some(v) && right != Some(v))
                .expect("three colours, two neighbours");
        }
    }
}

fn check_seq(p: &[u64], w: u64) -> Result<()> {
    if p.len() < 2 {
        return Err(SigdexError::invalid("boundary bits need at least two symbols"));
    }
    for (i, &x) in p.iter().enumerate() {
        if x == 0 || x > w {
            return Err(SigdexError::invalid(format!("symbol {x} at {i} outside [1..{w}]")));
        }
        if i > 0 && p[i - 1] == x {
            return Err(SigdexError::invalid(format!("equal neighbours at {}", i - 1)));
        }
    }
    Ok(())
}

/// Three-colouring of `p` after reduction and elimination.
pub fn colours(p: &[u64], params: &ParseParams) -> Vec<u64> {
    let mut c = p.to_vec();
    for _ in 0..params.reduction_passes() {
        reduce_once(&mut c);
    }
    debug_assert!(c.iter().all(|&x| x < 6));
    eliminate(&mut c);
    c
}

/// Boundary bits `d` for `p`.
pub fn boundary_bits(p: &[u64], params: &ParseParams) -> Result<Vec<bool>> {
    check_seq(p, params.w)?;
    bits_unchecked(p, params)
}

pub(crate) fn bits_unchecked(p: &[u64], params: &ParseParams) -> Result<Vec<bool>> {
    let n = p.len();
    let mut d = vec![false; n];
    d[0] = true;
    if n <= 4 {
        return Ok(d);
    }
    let c = colours(p, params);
    let is_max = |i: usize| (i == 0 || c[i] > c[i - 1]) && (i + 1 == n || c[i] > c[i + 1]);
    let is_min = |i: usize| (i == 0 || c[i] < c[i - 1]) && (i + 1 == n || c[i] < c[i + 1]);
    let raw: Vec<bool> = (0..n)
        .map(|i| is_max(i) || (is_min(i) && !(i > 0 && is_max(i - 1))))
        .collect();
    for i in 1..n {
        d[i] = raw[i] && !d[i - 1];
    }
    d[0] = true;
    d[1] = false;
    d[n - 1] = false;
    let j = (0..n).rev().find(|&i| d[i]).unwrap_or(0);
    let last = n - j;
    if last > 4 {
        if last > 6 {
            return Err(SigdexError::internal("boundary repair: trailing block too long"));
        }
        d[j + 2] = true;
    }
    validate_bits(&d)?;
    Ok(d)
}

/// Checks the four structural properties of a bit sequence.
pub fn validate_bits(d: &[bool]) -> Result<()> {
    let n = d.len();
    if n < 2 || !d[0] || d[n - 1] {
        return Err(SigdexError::internal("boundary bits: bad ends"));
    }
    for i in 0..n - 1 {
        if d[i] && d[i + 1] {
            return Err(SigdexError::internal(format!("boundary bits: adjacent ones at {i}")));
        }
    }
    for i in 0..n.saturating_sub(4) {
        if !(d[i] || d[i + 1] || d[i + 2] || d[i + 3]) {
            return Err(SigdexError::internal(format!("boundary bits: gap at {i}")));
        }
    }
    Ok(())
}

/// Splits `p` into blocks starting wherever `d` is set.
pub fn eblock<'a, T>(p: &'a [T], d: &[bool]) -> Result<Vec<&'a [T]>> {
    if p.len() != d.len() {
        return Err(SigdexError::invalid("eblock: length mismatch"));
    }
    if p.is_empty() {
        return Ok(Vec::new());
    }
    if !d[0] {
        return Err(SigdexError::invalid("eblock: first bit must be set"));
    }
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=p.len() {
        if i == p.len() || d[i] {
            let len = i - start;
            if !(2..=4).contains(&len) {
                return Err(SigdexError::invalid(format!("eblock: block of length {len}")));
            }
            out.push(&p[start..i]);
            start = i;
        }
    }
    Ok(out)
}

/// Run-length grouping.
pub fn epow<T: PartialEq + Copy>(s: &[T]) -> Result<Vec<(T, u64)>> {
    if s.is_empty() {
        return Err(SigdexError::invalid("epow: empty input"));
    }
    Ok(epow_iter(s.iter().map(|&x| (x, 1))))
}

/// Merges adjacent equal symbols of an already run-length sequence.
pub fn epow_iter<T: PartialEq + Copy>(it: impl IntoIterator<Item = (T, u64)>) -> Vec<(T, u64)> {
    let mut out: Vec<(T, u64)> = Vec::new();
    for (x, k) in it {
        if k == 0 {
            continue;
        }
        match out.last_mut() {
            Some((y, m)) if *y == x => *m += k,
            _ => out.push((x, k)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_star_values() {
        assert_eq!(log_star(1), 0);
        assert_eq!(log_star(2), 1);
        assert_eq!(log_star(4), 2);
        assert_eq!(log_star(16), 3);
        assert_eq!(log_star(65536), 4);
        assert_eq!(log_star(1 << 20), 5);
    }

    #[test]
    fn reduction_reaches_six_colours() {
        for bits in 1..64u32 {
            let w = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
            let params = ParseParams::new(w);
            let mut bound = w;
            for _ in 0..params.reduction_passes() {
                let len = 64 - bound.leading_zeros() as u64;
                bound = 2 * (len.max(1) - 1) + 1;
            }
            assert!(bound <= 5, "w={w} bound={bound}");
        }
    }

    #[test]
    fn block_example() {
        let p = [1, 2, 3, 2, 5, 7, 6, 4, 3, 4, 3, 4, 1, 2, 3, 4, 5];
        let d: Vec<bool> = [1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0]
            .iter()
            .map(|&b| b == 1)
            .collect();
        validate_bits(&d).unwrap();
        let blocks = eblock(&p, &d).unwrap();
        let want: Vec<&[u64]> = vec![&[1, 2, 3], &[2, 5], &[7, 6, 4], &[3, 4, 3, 4], &[1, 2], &[3, 4, 5]];
        assert_eq!(blocks, want);
    }

    #[test]
    fn computed_bits_on_example() {
        let p = [1, 2, 3, 2, 5, 7, 6, 4, 3, 4, 3, 4, 1, 2, 3, 4, 5];
        let params = ParseParams::new(7);
        let d = boundary_bits(&p, &params).unwrap();
        let blocks = eblock(&p, &d).unwrap();
        assert_eq!(blocks.concat(), p.to_vec());
    }

    #[test]
    fn two_symbols() {
        let d = boundary_bits(&[1, 2], &ParseParams::new(7)).unwrap();
        assert_eq!(d, vec![true, false]);
        assert_eq!(eblock(&[1, 2], &d).unwrap(), vec![&[1u64, 2][..]]);
    }

    #[test]
    fn rejects_bad_input() {
        let params = ParseParams::new(7);
        assert!(boundary_bits(&[1], &params).is_err());
        assert!(boundary_bits(&[1, 1], &params).is_err());
        assert!(boundary_bits(&[1, 8], &params).is_err());
        assert!(boundary_bits(&[0, 2], &params).is_err());
        assert!(eblock(&[1, 2, 3], &[true, false]).is_err());
        assert!(epow::<u8>(&[]).is_err());
    }

    #[test]
    fn epow_examples() {
        let s = b"aabbbbbabb";
        assert_eq!(epow(s).unwrap(), vec![(b'a', 2), (b'b', 5), (b'a', 1), (b'b', 2)]);
        assert_eq!(epow(b"a").unwrap(), vec![(b'a', 1)]);
        assert_eq!(epow(b"abab").unwrap().len(), 4);
    }

    fn all_colourings(n: usize, out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 1..=7u64 {
            if cur.last() != Some(&v) {
                cur.push(v);
                all_colourings(n, out, cur);
                cur.pop();
            }
        }
    }

    #[test]
    fn exhaustive_short_sequences() {
        let params = ParseParams::new(7);
        for n in 2..=7 {
            let mut all = Vec::new();
            all_colourings(n, &mut all, &mut Vec::new());
            for p in all {
                let d = boundary_bits(&p, &params).unwrap();
                let blocks = eblock(&p, &d).unwrap();
                assert_eq!(blocks.concat(), p);
            }
        }
    }
}
