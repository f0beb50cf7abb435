#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sigdex::importers::{Slp, SlpRule};
use sigdex::updater::EditOp;

pub fn naive_lce(t: &[u8], i: u64, j: u64) -> u64 {
    t[(i - 1) as usize..].iter().zip(&t[(j - 1) as usize..]).take_while(|(a, b)| a == b).count() as u64
}

pub fn naive_lce_back(t: &[u8], i: u64, j: u64) -> u64 {
    t[..i as usize].iter().rev().zip(t[..j as usize].iter().rev()).take_while(|(a, b)| a == b).count() as u64
}

pub fn naive_find(t: &[u8], p: &[u8]) -> Vec<u64> {
    if p.is_empty() || p.len() > t.len() {
        return Vec::new();
    }
    (0..=t.len() - p.len()).filter(|&i| &t[i..i + p.len()] == p).map(|i| i as u64 + 1).collect()
}

pub fn random_text(rng: &mut ChaCha8Rng, n: usize, sigma: u8) -> Vec<u8> {
    (0..n).map(|_| b'a' + rng.gen_range(0..sigma)).collect()
}

pub fn fibonacci(n: usize) -> Vec<u8> {
    let (mut a, mut b) = (b"a".to_vec(), b"ab".to_vec());
    while b.len() < n {
        let c = [b.clone(), a].concat();
        a = b;
        b = c;
    }
    b.truncate(n);
    b
}

pub fn thue_morse(n: usize) -> Vec<u8> {
    (0..n).map(|i| if (i as u64).count_ones().is_multiple_of(2) { b'a' } else { b'b' }).collect()
}

pub fn unary(n: usize) -> Vec<u8> {
    vec![b'a'; n]
}

pub fn periodic(n: usize) -> Vec<u8> {
    b"ab".iter().copied().cycle().take(n).collect()
}

/// Random SLP whose children lean towards recent rules so that texts grow.
pub fn random_slp(rng: &mut ChaCha8Rng, sigma: u8, pairs: usize, cap: u64) -> Slp {
    let mut rules: Vec<SlpRule> = (0..sigma).map(|c| SlpRule::Char(b'a' + c)).collect();
    let mut len: Vec<u64> = vec![1; sigma as usize];
    let mut seen: BTreeSet<SlpRule> = rules.iter().copied().collect();
    for _ in 0..pairs * 4 {
        if rules.len() >= sigma as usize + pairs {
            break;
        }
        let n = rules.len();
        let pick = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.6) {
                n - 1 - rng.gen_range(0..n.min(6))
            } else {
                rng.gen_range(0..n)
            }
        };
        let (l, r) = (pick(rng), pick(rng));
        if len[l] + len[r] > cap {
            continue;
        }
        let rule = SlpRule::Pair(l + 1, r + 1);
        if seen.insert(rule) {
            rules.push(rule);
            len.push(len[l] + len[r]);
        }
    }
    // keep what the last rule reaches, renumbered in order
    let n = rules.len();
    let mut used = vec![false; n + 1];
    used[n] = true;
    for i in (1..=n).rev() {
        if let (true, SlpRule::Pair(l, r)) = (used[i], rules[i - 1]) {
            used[l] = true;
            used[r] = true;
        }
    }
    let mut map = vec![0; n + 1];
    let mut out = Vec::new();
    for i in 1..=n {
        if used[i] {
            out.push(match rules[i - 1] {
                SlpRule::Pair(l, r) => SlpRule::Pair(map[l], map[r]),
                c => c,
            });
            map[i] = out.len();
        }
    }
    Slp::new(out).unwrap()
}

/// A random edit that keeps the text within `cap` characters.
pub fn random_op(rng: &mut ChaCha8Rng, n: u64, sigma: u8, cap: u64) -> EditOp {
    loop {
        let ylen = rng.gen_range(1..40);
        let op = match rng.gen_range(0..3) {
            _ if n == 0 => EditOp::Insert { y: random_text(rng, ylen, sigma), i: 1 },
            0 => {
                let i = rng.gen_range(1..=n + 1);
                EditOp::Insert { y: random_text(rng, ylen, sigma), i }
            }
            1 => {
                let j = rng.gen_range(1..=n);
                let y = rng.gen_range(1..=(n - j + 1).min(400));
                EditOp::InsertCopy { j, y, i: rng.gen_range(1..=n + 1) }
            }
            _ => {
                let j = rng.gen_range(1..=n);
                let y = rng.gen_range(1..=(n - j + 1).min(200));
                EditOp::Delete { j, y }
            }
        };
        if matches!(op, EditOp::Delete { .. }) || n + op.size() <= cap {
            return op;
        }
    }
}

pub fn log_star(m: u64) -> f64 {
    sigdex::lcp_core::log_star(m) as f64
}

pub fn log2(x: u64) -> f64 {
    (x.max(1) as f64).log2()
}
