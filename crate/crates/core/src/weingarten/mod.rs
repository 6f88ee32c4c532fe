//! Weingarten calculus for Haar-random unitaries and their U(1)-block version.

mod moment;
mod perm;
mod poly;

pub use moment::{
    evaluate_terms, format_terms, haar_moment, operator_moment, parse_word, u1_haar_moment, BlockMoment, Index, OperatorTerm, WiringFactor,
    WiringSpec, WordItem,
};
pub use perm::{all_perms, compose, cycle_type, inverse, longest_increasing, num_cycles, Perm};
pub use poly::{Poly, SymbolicRational};

use crate::error::{Error, Result};

pub(crate) use poly::ratio_to_f64;

/// Largest moment order with a closed-form Weingarten table.
pub const MAX_ORDER: usize = 4;

fn normalize_partition(cycle_type: &[usize]) -> Result<Vec<usize>> {
    if cycle_type.contains(&0) {
        return Err(Error::Domain(format!("cycle type {cycle_type:?} has a zero part")));
    }
    let mut ct = cycle_type.to_vec();
    ct.sort_unstable_by(|a, b| b.cmp(a));
    Ok(ct)
}

/// Unitary Weingarten function `Wg(cycle_type, L)` as a rational function of `L`.
pub fn wg_unitary(cycle_type: &[usize]) -> Result<SymbolicRational> {
    let ct = normalize_partition(cycle_type)?;
    let p: usize = ct.iter().sum();
    if p > MAX_ORDER {
        return Err(Error::Unsupported(format!("Weingarten order {p} exceeds {MAX_ORDER}")));
    }
    let c = Poly::constant;
    let r = |num: Poly, roots: &[i128]| SymbolicRational::from_roots(num, roots);
    const R2: [i128; 3] = [0, 1, -1];
    const R3: [i128; 5] = [0, 1, -1, 2, -2];
    const R4: [i128; 8] = [0, 0, 1, -1, 2, -2, 3, -3];
    const R4_NO_TWO: [i128; 5] = [0, 1, -1, 3, -3];
    let out = match ct.as_slice() {
        [] => SymbolicRational::one(),
        [1] => r(c(1), &[0]),
        [1, 1] => r(c(1), &[1, -1]),
        [2] => r(c(-1), &R2),
        [1, 1, 1] => r(Poly::new(vec![-2, 0, 1]), &R3),
        [2, 1] => r(c(-1), &R3[1..]),
        [3] => r(c(2), &R3),
        [1, 1, 1, 1] => r(Poly::new(vec![6, 0, -8, 0, 1]), &R4),
        [2, 1, 1] => r(c(-1), &R4_NO_TWO),
        [3, 1] => r(Poly::new(vec![-3, 0, 2]), &R4),
        [2, 2] => r(Poly::new(vec![6, 0, 1]), &R4),
        [4] => r(c(-5), &R4[1..]),
        _ => unreachable!("all partitions of p <= 4 are listed"),
    };
    Ok(out)
}

/// Numeric `Wg(cycle_type, L)`; requires `L >= p`.
pub fn wg_unitary_at(cycle_type: &[usize], l: u64) -> Result<f64> {
    let p: usize = cycle_type.iter().sum();
    if (l as usize) < p {
        return Err(Error::SingularDimension(format!("Weingarten order {p} needs L >= {p}, got {l}")));
    }
    wg_unitary(cycle_type)?.eval_f64(l as f64)
}

/// Circular orthogonal ensemble constants for `p <= 2`, taken verbatim.
pub fn wg_coe(cycle_type: &[usize]) -> Result<SymbolicRational> {
    let ct = normalize_partition(cycle_type)?;
    let c = Poly::constant;
    match ct.as_slice() {
        [1] => Ok(SymbolicRational::from_roots(c(1), &[-1])),
        [1, 1] => Ok(SymbolicRational::from_roots(Poly::new(vec![2, 1]), &[0, -1, -3])),
        [2] => Ok(SymbolicRational::from_roots(c(-1), &[0, -1, -3])),
        _ => Err(Error::Unsupported(format!("orthogonal Weingarten for cycle type {ct:?} is not provided"))),
    }
}

/// Number of permutations of `k` elements whose longest increasing
/// subsequence has length at most `l`. Equals `E|Tr U|^{2k}` over `U(l)`.
pub fn lis_count(k: usize, l: usize) -> Result<u64> {
    if k == 0 || k > 8 {
        return Err(Error::Unsupported(format!("lis_count enumerates S_k only for 1 <= k <= 8, got {k}")));
    }
    Ok(all_perms(k).iter().filter(|p| longest_increasing(p) <= l).count() as u64)
}
