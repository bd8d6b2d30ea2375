//! Brute-force reference implementations used by the integration tests.
#![allow(dead_code)]

/// Generalized Kendall distance by enumerating every pair of the union.
pub fn kendall(a: &[u32], b: &[u32]) -> f64 {
    let mut union: Vec<u32> = a.to_vec();
    for x in b {
        if !union.contains(x) {
            union.push(*x);
        }
    }
    let n = union.len();
    if n < 2 {
        let shared = n == 1 && a.contains(&union[0]) && b.contains(&union[0]);
        return if n == 0 || shared { 0.0 } else { 1.0 };
    }
    // Some(true) when x is above y, None when neither is ranked
    let above = |r: &[u32], x: u32, y: u32| -> Option<bool> {
        match (r.iter().position(|&e| e == x), r.iter().position(|&e| e == y)) {
            (Some(px), Some(py)) => Some(px < py),
            (Some(_), None) => Some(true),
            (None, Some(_)) => Some(false),
            (None, None) => None,
        }
    };
    let mut penalty = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (union[i], union[j]);
            match (above(a, x, y), above(b, x, y)) {
                (Some(p), Some(q)) if p == q => {}
                _ => penalty += 1,
            }
        }
    }
    penalty as f64 / (n * (n - 1) / 2) as f64
}

/// Every ordered subset (ranking) of `0..n`, including the empty one.
pub fn rankings(n: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for r in &frontier {
            for x in 0..n {
                if !r.contains(&x) {
                    let mut e: Vec<u32> = r.clone();
                    e.push(x);
                    next.push(e);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Every permutation of `0..n`.
pub fn permutations(n: u32) -> Vec<Vec<u32>> {
    rankings(n).into_iter().filter(|r| r.len() == n as usize).collect()
}

/// sup |F_x − F_y| evaluated at every sample point, as the exact ratio
/// max |c_x·m − c_y·n| / (n·m).
pub fn ks_d(x: &[f64], y: &[f64]) -> f64 {
    let count = |s: &[f64], v: f64| s.iter().filter(|&&a| a <= v).count() as i64;
    let (n, m) = (x.len() as i64, y.len() as i64);
    let num = x
        .iter()
        .chain(y)
        .map(|&v| (count(x, v) * m - count(y, v) * n).abs())
        .max()
        .unwrap_or(0);
    num as f64 / (n * m) as f64
}

/// Multisets of size `m` over `symbols`, as sorted vectors.
pub fn multisets(symbols: &[f64], m: usize) -> Vec<Vec<f64>> {
    fn go(symbols: &[f64], m: usize, start: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..symbols.len() {
            cur.push(symbols[i]);
            go(symbols, m, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(symbols, m, 0, &mut Vec::new(), &mut out);
    out
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

pub fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).log2())
        .sum()
}
