//! Symmetric Lanczos with full reorthogonalization plus an implicit-shift QL
//! solver for the projected tridiagonal problem.

use log::warn;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::markov::MarkovMatrix;
use super::sparse::CsrMatrix;
use crate::error::{Result, VadError};
use crate::Real;

/// Leading eigenpairs of a Markov matrix.
#[derive(Debug, Clone)]
pub struct Decomposition<T> {
    /// Sorted by decreasing magnitude; `eigenvalues[0] = 1`.
    pub eigenvalues: Vec<T>,
    /// Right eigenvectors of `P` as columns, unit Euclidean norm.
    pub right: Array2<T>,
    /// Orthonormal eigenvectors of the symmetric conjugate, as columns.
    pub conjugate: Array2<T>,
}

/// Eigenvalues (ascending) and eigenvectors (columns) of the symmetric
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
pub(crate) fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<(Vec<T>, Array2<T>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 100 {
                    return Err(VadError::EigensolverFailed(
                        "tridiagonal QL did not converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok((values, vectors))
}

fn dot<T: Real>(a: &Array1<T>, b: &Array1<T>) -> T {
    a.dot(b)
}

/// Lanczos iteration settings.
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            seed: 0x5EED,
        }
    }
}

/// Top `count` eigenpairs by |λ| of a symmetric sparse matrix.
/// Returns (values sorted by decreasing |λ|, orthonormal vectors as columns).
pub fn lanczos_top<T: Real>(
    a: &CsrMatrix<T>,
    count: usize,
    options: LanczosOptions,
) -> Result<(Vec<T>, Array2<T>)> {
    let n = a.n();
    if count == 0 || count > n {
        return Err(VadError::EigensolverFailed(format!(
            "cannot extract {count} eigenpairs from a {n}×{n} matrix"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let tol = T::lit(options.tolerance);
    let random_unit = |rng: &mut ChaCha8Rng, basis: &[Array1<T>]| -> Option<Array1<T>> {
        for _ in 0..8 {
            let mut v: Array1<T> =
                Array1::from_shape_fn(n, |_| T::lit(StandardNormal.sample(rng)));
            for _ in 0..2 {
                for q in basis {
                    let c = dot(q, &v);
                    v.scaled_add(-c, q);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > T::lit(1e-8) {
                return Some(v / norm);
            }
        }
        None
    };

    let mut basis: Vec<Array1<T>> = Vec::new();
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut q = random_unit(&mut rng, &basis)
        .ok_or_else(|| VadError::EigensolverFailed("no start vector".into()))?;
    let first_check = (2 * count + 10).min(n);
    let mut next_check = first_check;
    loop {
        let mut w = a.matvec(q.view());
        let a_j = dot(&q, &w);
        w.scaled_add(-a_j, &q);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            w.scaled_add(-b, prev);
        }
        basis.push(q);
        alpha.push(a_j);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.scaled_add(-c, v);
            }
        }
        let b_j = dot(&w, &w).sqrt();
        let m = basis.len();
        if m >= next_check || m == n {
            let (theta, s) = tridiagonal_eigen(&alpha, &beta)?;
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&x, &y| {
                theta[y]
                    .abs()
                    .partial_cmp(&theta[x].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(theta[y].partial_cmp(&theta[x]).unwrap_or(std::cmp::Ordering::Equal))
            });
            let wanted = &idx[..count.min(m)];
            let converged = m == n
                || (m >= count
                    && wanted
                        .iter()
                        .all(|&i| (b_j * s[[m - 1, i]]).abs() <= tol * theta[i].abs().max(T::one())));
            if converged {
                let values: Vec<T> = wanted.iter().map(|&i| theta[i]).collect();
                let mut vectors = Array2::<T>::zeros((n, count));
                for (c, &i) in wanted.iter().enumerate() {
                    for (r, v) in basis.iter().enumerate() {
                        vectors.column_mut(c).scaled_add(s[[r, i]], v);
                    }
                    let norm = vectors.column(c).dot(&vectors.column(c)).sqrt();
                    vectors.column_mut(c).mapv_inplace(|x| x / norm);
                }
                return Ok((values, vectors));
            }
            next_check = (m + 10).min(n);
        }
        if b_j <= T::lit(1e-10) {
            // invariant subspace exhausted: restart orthogonally
            q = random_unit(&mut rng, &basis).ok_or_else(|| {
                VadError::EigensolverFailed("Krylov restart failed".into())
            })?;
            beta.push(T::zero());
        } else {
            q = w / b_j;
            beta.push(b_j);
        }
    }
}

/// Flips the sign so that the largest-magnitude entry is positive
/// (first such entry on ties). Returns whether a flip happened.
pub(crate) fn fix_sign<T: Real>(v: &mut ndarray::ArrayViewMut1<T>) -> bool {
    let mut best = T::zero();
    let mut sign = T::one();
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if x < T::zero() { -T::one() } else { T::one() };
        }
    }
    if sign < T::zero() {
        v.mapv_inplace(|x| -x);
        true
    } else {
        false
    }
}

/// Top `d + 1` eigenpairs of `P` through its symmetric conjugate.
pub fn eigendecompose<T: Real>(markov: &MarkovMatrix<T>, d: usize) -> Result<Decomposition<T>> {
    eigendecompose_with(markov, d, LanczosOptions::default())
}

pub fn eigendecompose_with<T: Real>(
    markov: &MarkovMatrix<T>,
    d: usize,
    options: LanczosOptions,
) -> Result<Decomposition<T>> {
    let n = markov.n();
    if d + 1 > n {
        return Err(VadError::InsufficientData(format!(
            "need at least {} points for {d} diffusion coordinates",
            d + 1
        )));
    }
    let a = markov.symmetric_conjugate();
    let (values, mut phi) = lanczos_top(&a, d + 1, options)?;
    let inv_sqrt: Array1<T> = markov
        .degree_tilde
        .iter()
        .map(|&x| T::one() / x.sqrt())
        .collect();
    let mut right = Array2::zeros((n, d + 1));
    for c in 0..=d {
        let mut psi = &phi.column(c) * &inv_sqrt;
        let norm = psi.dot(&psi).sqrt();
        psi /= norm;
        if fix_sign(&mut psi.view_mut()) {
            phi.column_mut(c).mapv_inplace(|x| -x);
        }
        right.column_mut(c).assign(&psi);
    }
    let slack = T::lit(1e-9);
    for (j, &l) in values.iter().enumerate() {
        if l.abs() > T::one() + slack {
            return Err(VadError::EigensolverFailed(format!(
                "eigenvalue {j} = {l} exceeds 1 in magnitude"
            )));
        }
        if j > 0 && l <= T::zero() {
            warn!("retained eigenvalue {j} = {l} is not positive");
        }
    }
    Ok(Decomposition {
        eigenvalues: values,
        right,
        conjugate: phi,
    })
}
