//! Small permutation utilities.

/// Permutation of `0..n` in one-line notation: `p[i]` is the image of `i`.
pub type Perm = Vec<usize>;

/// All permutations of `0..n` in lexicographic order.
pub fn all_perms(n: usize) -> Vec<Perm> {
    let mut out = Vec::new();
    let mut p: Perm = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else { break };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

pub fn inverse(p: &[usize]) -> Perm {
    let mut inv = vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

/// `(a ∘ b)(i) = a(b(i))`.
pub fn compose(a: &[usize], b: &[usize]) -> Perm {
    b.iter().map(|&i| a[i]).collect()
}

/// Cycle lengths sorted in decreasing order.
pub fn cycle_type(p: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; p.len()];
    let mut out = Vec::new();
    for s in 0..p.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            i = p[i];
            len += 1;
        }
        out.push(len);
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

pub fn num_cycles(p: &[usize]) -> usize {
    cycle_type(p).len()
}

/// Length of the longest strictly increasing subsequence (patience sorting).
pub fn longest_increasing(seq: &[usize]) -> usize {
    let mut piles: Vec<usize> = Vec::new();
    for &x in seq {
        match piles.binary_search(&x) {
            Ok(_) => {}
            Err(pos) if pos == piles.len() => piles.push(x),
            Err(pos) => piles[pos] = x,
        }
    }
    piles.len()
}
