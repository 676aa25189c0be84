//! Normalized probability vectors over a finite vocabulary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::VocabId;

/// Absolute tolerance on `sum(mass) == 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A categorical distribution. Entries are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    mass: Vec<f64>,
}

impl Categorical {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::Contract("categorical over an empty vocabulary".into()));
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| !m.is_finite() || **m < 0.0) {
            return Err(Error::Contract(format!("invalid mass {m} at id {i}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Contract(format!(
                "categorical mass sums to {total}, expected 1"
            )));
        }
        Ok(Self { mass })
    }

    /// Normalizes non-negative weights. Fails when the total weight is zero.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Contract("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Contract("weights sum to zero".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(vocab_size: usize) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::Parameter("uniform over an empty vocabulary".into()));
        }
        Ok(Self {
            mass: vec![1.0 / vocab_size as f64; vocab_size],
        })
    }

    pub fn one_hot(vocab_size: usize, id: VocabId) -> Result<Self> {
        if id.0 >= vocab_size {
            return Err(Error::Index(format!("{id} outside vocabulary of size {vocab_size}")));
        }
        let mut mass = vec![0.0; vocab_size];
        mass[id.0] = 1.0;
        Ok(Self { mass })
    }

    #[inline]
    pub fn vocab_size(&self) -> usize {
        self.mass.len()
    }

    #[inline]
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Mass of `id`; zero for ids outside the vocabulary.
    #[inline]
    pub fn prob(&self, id: VocabId) -> f64 {
        self.mass.get(id.0).copied().unwrap_or(0.0)
    }

    pub fn max_mass(&self) -> f64 {
        self.mass.iter().copied().fold(0.0, f64::max)
    }

    /// Ids with strictly positive mass, ascending.
    pub fn support(&self) -> impl Iterator<Item = (VocabId, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, m)| (VocabId(i), *m))
    }

    fn check_same_vocab(&self, other: &Categorical) -> Result<()> {
        if self.mass.len() != other.mass.len() {
            return Err(Error::Contract(format!(
                "vocabulary mismatch: {} vs {}",
                self.mass.len(),
                other.mass.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;

    fn try_from(mass: Vec<f64>) -> Result<Self> {
        Categorical::new(mass)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.mass
    }
}

/// Total variation distance, `0.5 * sum |a(x) - b(x)|`.
pub fn tvd(a: &Categorical, b: &Categorical) -> Result<f64> {
    a.check_same_vocab(b)?;
    let l1: f64 = a.mass.iter().zip(&b.mass).map(|(x, y)| (x - y).abs()).sum();
    Ok(0.5 * l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cat(m: &[f64]) -> Categorical {
        Categorical::new(m.to_vec()).unwrap()
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        assert!(Categorical::new(vec![0.5, 0.6]).is_err());
        assert!(Categorical::new(vec![1.5, -0.5]).is_err());
        assert!(Categorical::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Categorical::new(vec![]).is_err());
        assert!(Categorical::new(vec![0.5, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn tvd_examples() {
        let a = cat(&[0.5, 0.3, 0.2]);
        assert_eq!(tvd(&a, &a).unwrap(), 0.0);
        assert_eq!(tvd(&cat(&[1.0, 0.0]), &cat(&[0.0, 1.0])).unwrap(), 1.0);
        let b = cat(&[0.2, 0.5, 0.3]);
        assert!((tvd(&a, &b).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn tvd_dimension_mismatch() {
        assert!(tvd(&cat(&[1.0]), &cat(&[0.5, 0.5])).is_err());
    }

    fn arb_categorical(v: usize) -> impl Strategy<Value = Categorical> {
        proptest::collection::vec(0.0f64..1.0, v).prop_filter_map("zero weight", |w| {
            Categorical::from_weights(w).ok()
        })
    }

    proptest! {
        #[test]
        fn tvd_is_a_metric(
            (a, b, c) in (2usize..8).prop_flat_map(|v| (arb_categorical(v), arb_categorical(v), arb_categorical(v)))
        ) {
            let ab = tvd(&a, &b).unwrap();
            let ba = tvd(&b, &a).unwrap();
            let bc = tvd(&b, &c).unwrap();
            let ac = tvd(&a, &c).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!(tvd(&a, &a).unwrap() == 0.0);
            let equal = a.masses().iter().zip(b.masses()).all(|(x, y)| (x - y).abs() < 1e-12);
            prop_assert_eq!(equal, ab < 1e-12);
        }
    }
}
