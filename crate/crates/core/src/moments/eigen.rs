use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, eigenvalues descending, column `k` of
/// `eigenvectors` paired with `eigenvalues[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem<R: Real> {
    pub eigenvalues: DVector<R>,
    pub eigenvectors: DMatrix<R>,
}

impl<R: Real> EigenSystem<R> {
    pub fn vector(&self, k: usize) -> DVector<R> {
        self.eigenvectors.column(k).into_owned()
    }

    /// VΛV′.
    pub fn reconstruct(&self) -> DMatrix<R> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

/// Symmetric eigendecomposition with a deterministic sign rule: the
/// largest-magnitude entry of every eigenvector is positive, ties going to
/// the lowest index. Equal eigenvalues are ordered by that entry's index.
pub fn sym_eigen<R: Real>(s: &DMatrix<R>) -> Result<EigenSystem<R>> {
    let (n, m) = s.shape();
    if n != m || n == 0 {
        return Err(invalid(format!("expected a nonempty square matrix, got {n}x{m}")));
    }
    let norm = s.norm();
    let asym = (s - s.transpose()).amax();
    let tolerance = R::tol(1e-10) * norm;
    if asym > tolerance {
        return Err(Error::NotSymmetric { asymmetry: asym.as_f64(), tolerance: tolerance.as_f64() });
    }
    let sym = (s + s.transpose()) * R::lit(0.5);
    let eig = SymmetricEigen::new(sym);

    let mut vecs: Vec<(R, DVector<R>, usize)> = (0..n)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            let lead = sign_normalize(&mut v);
            (eig.eigenvalues[k], v, lead)
        })
        .collect();
    vecs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.2.cmp(&b.2)));

    let eigenvalues = DVector::from_iterator(n, vecs.iter().map(|v| v.0));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (k, (_, v, _)) in vecs.iter().enumerate() {
        eigenvectors.set_column(k, v);
    }
    Ok(EigenSystem { eigenvalues, eigenvectors })
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is
/// positive; returns that index.
pub(crate) fn sign_normalize<R: Real>(v: &mut DVector<R>) -> usize {
    let lead = lead_index(v.as_slice());
    if v[lead] < R::zero() {
        v.neg_mut();
    }
    lead
}

/// Index of the largest-magnitude entry, lowest index among near-ties.
pub(crate) fn lead_index<R: Real>(v: &[R]) -> usize {
    let big = v.iter().fold(R::zero(), |m, x| m.max(x.mag()));
    let cut = big - R::tol(1e-12) * big;
    v.iter().position(|x| x.mag() >= cut).unwrap_or(0)
}
