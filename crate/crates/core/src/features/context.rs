use ndarray::{s, Array2, ArrayView2};

use crate::Real;

/// Base feature width per cepstral coefficient: static, Δ and ΔΔ.
pub const BASE_DIM_FACTOR: usize = 3;

#[inline]
fn clamp_index(i: isize, last: usize) -> usize {
    i.clamp(0, last as isize) as usize
}

/// Δ of column `k` at row `m` via the ±1 central difference with edge replication.
#[inline]
pub(crate) fn delta<T: Real>(rows: &dyn Fn(usize) -> T, m: usize, last: usize) -> T {
    let half = T::lit(0.5);
    (rows(clamp_index(m as isize + 1, last)) - rows(clamp_index(m as isize - 1, last))) * half
}

/// One base row `[c, Δc, ΔΔc]` computed from a cepstral sequence accessor.
/// `last` is the index of the final row in the sequence.
pub(crate) fn base_row<'a, T: Real>(
    mfcc: &dyn Fn(usize) -> ndarray::ArrayView1<'a, T>,
    m: usize,
    last: usize,
) -> Vec<T> {
    let ceps = mfcc(m).len();
    let mut out = Vec::with_capacity(BASE_DIM_FACTOR * ceps);
    out.extend(mfcc(m).iter().copied());
    for k in 0..ceps {
        out.push(delta(&|i| mfcc(i)[k], m, last));
    }
    for k in 0..ceps {
        let d = |i: usize| delta(&|j| mfcc(j)[k], i, last);
        out.push(delta(&d, m, last));
    }
    out
}

/// Appends first and second temporal differences: `N × C` → `N × 3C`.
pub fn append_deltas<T: Real>(mfcc: ArrayView2<T>) -> Array2<T> {
    let n = mfcc.nrows();
    let ceps = mfcc.ncols();
    let mut out = Array2::zeros((n, BASE_DIM_FACTOR * ceps));
    if n == 0 {
        return out;
    }
    let rows = |i: usize| mfcc.row(i);
    for m in 0..n {
        let row = base_row(&rows, m, n - 1);
        out.row_mut(m).assign(&ndarray::ArrayView1::from(&row[..]));
    }
    out
}

/// Concatenates `2J+1` neighbouring base rows (edge-replicated) per frame.
pub fn concat_context<T: Real>(base: ArrayView2<T>, j: usize) -> Array2<T> {
    let n = base.nrows();
    let width = base.ncols();
    let mut out = Array2::zeros((n, width * (2 * j + 1)));
    if n == 0 {
        return out;
    }
    for row in 0..n {
        for (slot, offset) in (-(j as isize)..=j as isize).enumerate() {
            let src = clamp_index(row as isize + offset, n - 1);
            out.slice_mut(s![row, slot * width..(slot + 1) * width])
                .assign(&base.row(src));
        }
    }
    out
}
