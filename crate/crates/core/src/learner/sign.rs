use crate::error::{Error, Result};

use super::model::GradientVector;

/// A vector over {-1, +1}. Zero is not representable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignReport(Vec<i8>);

impl SignReport {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(k) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::arg(format!(
                "sign entry {k} is {}, expected -1 or +1",
                signs[k]
            )));
        }
        Ok(SignReport(signs))
    }

    /// Sign of each value, with `sign(0) = +1`.
    pub fn from_values(values: &[f64]) -> Self {
        SignReport(values.iter().map(|&v| sign(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = i8> + '_ {
        self.0.iter().copied()
    }

    pub fn negated(&self) -> Self {
        SignReport(self.0.iter().map(|&s| -s).collect())
    }

    /// Number of coordinates where `self` and `other` agree.
    pub fn agreements(&self, other: &SignReport) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a == b).count()
    }
}

#[inline]
pub fn sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// One-bit quantization of a gradient.
pub fn sign_quantize(gradient: &GradientVector) -> SignReport {
    SignReport::from_values(&gradient.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gv(values: Vec<f64>) -> GradientVector {
        GradientVector {
            values,
            batch_size: 1,
        }
    }

    #[test]
    fn zero_maps_to_plus_one() {
        let s = sign_quantize(&gv(vec![0.3, -1.2, 0.0]));
        assert_eq!(s.as_slice(), &[1, -1, 1]);
    }

    #[test]
    fn all_negative() {
        let s = sign_quantize(&gv(vec![-0.1, -5.0, -1e-300]));
        assert_eq!(s.as_slice(), &[-1, -1, -1]);
    }

    #[test]
    fn rejects_zero_entries() {
        assert!(SignReport::new(vec![1, 0, -1]).is_err());
    }

    proptest! {
        #[test]
        fn output_is_unit_magnitude(values in prop::collection::vec(-1e3f64..1e3, 0..64)) {
            let s = sign_quantize(&gv(values));
            prop_assert!(s.iter().all(|v| v == 1 || v == -1));
        }

        #[test]
        fn odd_symmetry(values in prop::collection::vec(
            prop_oneof![-1e3f64..-1e-9, 1e-9f64..1e3], 1..64)
        ) {
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            prop_assert_eq!(sign_quantize(&gv(neg)), sign_quantize(&gv(values)).negated());
        }
    }
}
