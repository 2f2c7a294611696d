//! Conversions used by the JSON representations: matrices as nested row
//! arrays, complex numbers as `[re, im]` pairs.

use crate::scalar::Real;
use nalgebra::{Complex, DMatrix, DVector};

pub fn matrix_rows<R: Real>(m: &DMatrix<R>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|x| x.as_f64()).collect()).collect()
}

pub fn vector_f64<R: Real>(v: &DVector<R>) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

pub fn complex_pair<R: Real>(z: &Complex<R>) -> [f64; 2] {
    [z.re.as_f64(), z.im.as_f64()]
}

pub fn complex_vector<R: Real>(v: &DVector<Complex<R>>) -> Vec<[f64; 2]> {
    v.iter().map(complex_pair).collect()
}

pub fn complex_matrix_rows<R: Real>(m: &DMatrix<Complex<R>>) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|r| r.iter().map(complex_pair).collect()).collect()
}
