//! Deterministic pairwise (tree) summation.
//!
//! Every reduction in the crate goes through these helpers so that results do
//! not depend on evaluation order or thread count: the tree shape is a fixed
//! function of the index range alone, and the parallel variants merely decide
//! which subtrees run on which thread. Sequential and parallel calls produce
//! bit-identical sums.

use num_complex::Complex64;
use rayon::join;

/// Below this many terms the tree bottoms out into a left-to-right fold.
const LEAF: usize = 8;

/// Ranges at least this long are split across threads in the `par_*` variants.
const PAR_THRESHOLD: usize = 1024;

pub fn sum_f64(values: &[f64]) -> f64 {
    map_sum_f64(values.len(), |i| values[i])
}

pub fn sum_complex(values: &[Complex64]) -> Complex64 {
    map_sum_complex(values.len(), |i| values[i])
}

/// Pairwise sum of `f(0), ..., f(n-1)` without materializing the terms.
pub fn map_sum_f64<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    range_sum_f64(0, n, &f)
}

pub fn map_sum_complex<F: Fn(usize) -> Complex64>(n: usize, f: F) -> Complex64 {
    range_sum_complex(0, n, &f)
}

/// Parallel pairwise sum; identical tree (and result) as [`map_sum_f64`].
pub fn par_map_sum_f64<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    par_range_sum_f64(0, n, &f)
}

pub fn par_map_sum_complex<F: Fn(usize) -> Complex64 + Sync>(n: usize, f: F) -> Complex64 {
    par_range_sum_complex(0, n, &f)
}

fn range_sum_f64<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
    let n = hi - lo;
    if n <= LEAF {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        return acc;
    }
    let mid = lo + n / 2;
    range_sum_f64(lo, mid, f) + range_sum_f64(mid, hi, f)
}

fn range_sum_complex<F: Fn(usize) -> Complex64>(lo: usize, hi: usize, f: &F) -> Complex64 {
    let n = hi - lo;
    if n <= LEAF {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in lo..hi {
            acc += f(i);
        }
        return acc;
    }
    let mid = lo + n / 2;
    range_sum_complex(lo, mid, f) + range_sum_complex(mid, hi, f)
}

fn par_range_sum_f64<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
    let n = hi - lo;
    if n < PAR_THRESHOLD {
        return range_sum_f64(lo, hi, f);
    }
    let mid = lo + n / 2;
    let (a, b) = join(
        || par_range_sum_f64(lo, mid, f),
        || par_range_sum_f64(mid, hi, f),
    );
    a + b
}

fn par_range_sum_complex<F: Fn(usize) -> Complex64 + Sync>(
    lo: usize,
    hi: usize,
    f: &F,
) -> Complex64 {
    let n = hi - lo;
    if n < PAR_THRESHOLD {
        return range_sum_complex(lo, hi, f);
    }
    let mid = lo + n / 2;
    let (a, b) = join(
        || par_range_sum_complex(lo, mid, f),
        || par_range_sum_complex(mid, hi, f),
    );
    a + b
}
