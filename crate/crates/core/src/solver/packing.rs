//! Real coordinates for block-Hermitian matrices.
//!
//! Block `N` of dimension `d` takes `d²` reals: the `d` diagonal entries,
//! then `√2·Re` and `√2·Im` of each strict-upper entry, column by column.
//! The √2 makes the map an isometry onto the Frobenius norm, so Euclidean
//! quantities in packed space equal Frobenius quantities on the blocks.
//! Coordinate 0 is the vacuum block's single entry.

use faer::{c64, Mat};

use crate::liouvillian::BlockDensityMatrix;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Debug)]
pub(crate) struct Packing {
    rungs: usize,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl Packing {
    pub fn new(rungs: usize, dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut len = 0;
        for &d in &dims {
            offsets.push(len);
            len += d * d;
        }
        Self { rungs, dims, offsets, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn segment<'a>(&self, n: usize, x: &'a [f64]) -> &'a [f64] {
        let d = self.dims[n];
        &x[self.offsets[n]..self.offsets[n] + d * d]
    }

    pub fn pack(&self, rho: &BlockDensityMatrix) -> Vec<f64> {
        let mut x = vec![0.0; self.len];
        self.pack_into(rho, &mut x);
        x
    }

    /// Uses the Hermitian part of each block.
    pub fn pack_into(&self, rho: &BlockDensityMatrix, x: &mut [f64]) {
        for (n, b) in rho.blocks().iter().enumerate() {
            pack_block(b, &mut x[self.offsets[n]..self.offsets[n] + b.nrows() * b.nrows()]);
        }
    }

    pub fn unpack(&self, x: &[f64]) -> BlockDensityMatrix {
        let mut rho = BlockDensityMatrix::zeros(self.rungs);
        self.unpack_into(x, &mut rho);
        rho
    }

    pub fn unpack_into(&self, x: &[f64], rho: &mut BlockDensityMatrix) {
        for (n, b) in rho.blocks_mut().iter_mut().enumerate() {
            let d = b.nrows();
            unpack_block(&x[self.offsets[n]..self.offsets[n] + d * d], b);
        }
    }

    /// Sum of diagonal coordinates, i.e. the trace.
    pub fn trace(&self, x: &[f64]) -> f64 {
        self.dims
            .iter()
            .zip(&self.offsets)
            .map(|(&d, &o)| x[o..o + d].iter().sum::<f64>())
            .sum()
    }

    pub fn scale_to_unit_trace(&self, x: &mut [f64]) -> bool {
        let t = self.trace(x);
        if !(t.abs() > f64::MIN_POSITIVE) || !t.is_finite() {
            return false;
        }
        let inv = 1.0 / t;
        x.iter_mut().for_each(|v| *v *= inv);
        true
    }

    /// `Σ_N sqrt(d_N) ||X^N||_F`, an upper bound on the summed trace norm.
    pub fn trace_norm_bound(&self, x: &[f64]) -> f64 {
        (0..self.dims.len())
            .map(|n| (self.dims[n] as f64).sqrt() * norm2(self.segment(n, x)))
            .sum()
    }
}

pub(crate) fn pack_block(b: &Mat<c64>, out: &mut [f64]) {
    let d = b.nrows();
    for i in 0..d {
        out[i] = b[(i, i)].re;
    }
    let mut k = d;
    for j in 1..d {
        for i in 0..j {
            let z = (b[(i, j)] + b[(j, i)].conj()) * 0.5;
            out[k] = SQRT2 * z.re;
            out[k + 1] = SQRT2 * z.im;
            k += 2;
        }
    }
}

pub(crate) fn unpack_block(x: &[f64], b: &mut Mat<c64>) {
    let d = b.nrows();
    for i in 0..d {
        b[(i, i)] = c64::new(x[i], 0.0);
    }
    let mut k = d;
    for j in 1..d {
        for i in 0..j {
            let z = c64::new(x[k], x[k + 1]) * (1.0 / SQRT2);
            b[(i, j)] = z;
            b[(j, i)] = z.conj();
            k += 2;
        }
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(b, a)| *b += alpha * a);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::sector_dims;

    #[test]
    fn roundtrip_and_isometry() {
        let dims = sector_dims(2);
        let p = Packing::new(2, dims);
        assert_eq!(p.len(), 70);
        let x: Vec<f64> = (0..p.len()).map(|k| ((k * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let rho = p.unpack(&x);
        assert_eq!(rho.hermiticity_error(), 0.0);
        let y = p.pack(&rho);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((norm2(&x) - rho.frobenius_norm()).abs() < 1e-13);
        assert!((p.trace(&x) - rho.trace()).abs() < 1e-14);
        assert!((p.trace_norm_bound(&x) - rho.trace_norm_bound()).abs() < 1e-13);
    }
}
