use crate::matrix::Matrix;
use crate::{Error, Result};

/// Signs of the four non-negative passes, in the order of [`FourPassOperands::passes`].
pub const PASS_SIGNS: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// Non-negative operands for computing a signed product on intensity-only
/// hardware:
/// `AB = A+ B+ - |A-| B+ - A+ |B-| + |A-| |B-|`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourPassOperands {
    pub lhs_pos: Matrix,
    pub lhs_neg: Matrix,
    pub rhs_pos: Matrix,
    pub rhs_neg: Matrix,
}

impl FourPassOperands {
    /// The four `(lhs, rhs, sign)` passes.
    pub fn passes(&self) -> [(&Matrix, &Matrix, f64); 4] {
        [
            (&self.lhs_pos, &self.rhs_pos, PASS_SIGNS[0]),
            (&self.lhs_neg, &self.rhs_pos, PASS_SIGNS[1]),
            (&self.lhs_pos, &self.rhs_neg, PASS_SIGNS[2]),
            (&self.lhs_neg, &self.rhs_neg, PASS_SIGNS[3]),
        ]
    }

    /// Signed sum of the four pass products.
    pub fn recombine(&self) -> Result<Matrix> {
        let mut acc = Matrix::zeros(self.lhs_pos.rows(), self.rhs_pos.cols());
        for (a, b, sign) in self.passes() {
            let p = a.matmul(b)?;
            for (o, v) in acc.as_mut_slice().iter_mut().zip(p.as_slice()) {
                *o += sign * v;
            }
        }
        Ok(acc)
    }
}

fn split(m: &Matrix) -> (Matrix, Matrix) {
    (m.map(|v| if v > 0.0 { v } else { 0.0 }), m.map(|v| if v < 0.0 { -v } else { 0.0 }))
}

/// Splits `lhs` and `rhs` into positive parts and magnitudes of negative parts.
pub fn four_pass_decompose(lhs: &Matrix, rhs: &Matrix) -> Result<FourPassOperands> {
    if lhs.cols() != rhs.rows() {
        return Err(Error::Dimension(alloc::format!(
            "cannot multiply {}x{} by {}x{}",
            lhs.rows(),
            lhs.cols(),
            rhs.rows(),
            rhs.cols()
        )));
    }
    let (lhs_pos, lhs_neg) = split(lhs);
    let (rhs_pos, rhs_neg) = split(rhs);
    Ok(FourPassOperands { lhs_pos, lhs_neg, rhs_pos, rhs_neg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mixed_sign_row_vector() {
        let w = Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let x = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let ops = four_pass_decompose(&w, &x).unwrap();
        let terms: vec::Vec<f64> =
            ops.passes().iter().map(|(a, b, _)| a.matmul(b).unwrap().get(0, 0)).collect();
        // W+X+ = 3, |W-|X+ = 8, X has no negative part
        assert_eq!(terms, vec![3.0, 8.0, 0.0, 0.0]);
        assert_eq!(ops.recombine().unwrap().get(0, 0), -5.0);
        assert_eq!(w.matmul(&x).unwrap().get(0, 0), -5.0);
    }

    #[test]
    fn non_negative_operands_use_only_first_pass() {
        let w = Matrix::from_fn(3, 4, |r, c| (r + c) as f64);
        let x = Matrix::from_fn(4, 2, |r, c| (r * c) as f64 + 0.5);
        let ops = four_pass_decompose(&w, &x).unwrap();
        let passes = ops.passes();
        for (a, b, _) in &passes[1..] {
            assert!(a.matmul(b).unwrap().as_slice().iter().all(|&v| v == 0.0));
        }
        assert_eq!(passes[0].0.matmul(passes[0].1).unwrap(), w.matmul(&x).unwrap());
    }

    #[test]
    fn shape_mismatch() {
        assert!(four_pass_decompose(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn reconstructs_operands() {
        let w = Matrix::from_fn(3, 3, |r, c| r as f64 - c as f64);
        let ops = four_pass_decompose(&w, &Matrix::zeros(3, 1)).unwrap();
        assert_eq!(ops.lhs_pos.sub(&ops.lhs_neg).unwrap(), w);
        assert!(ops.lhs_neg.as_slice().iter().all(|&v| v >= 0.0));
    }
}
