//! Points on the probability simplex over actions and states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a vector sums to one.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Entrywise L1 distance between two equal-length probability vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "distribution length",
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

/// Checks nonnegativity and unit mass within [`SIMPLEX_TOL`].
pub fn check_simplex(probs: &[f64]) -> std::result::Result<(), String> {
    if probs.is_empty() {
        return Err("empty probability vector".to_string());
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(format!("entry {i} is {p}"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("entries sum to {total}"));
    }
    Ok(())
}

macro_rules! simplex_newtype {
    ($(#[$meta:meta])* $name:ident, $index:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(probs: Vec<f64>) -> Result<Self> {
                check_simplex(&probs).map_err(Error::InvalidDistribution)?;
                Ok(Self(probs))
            }

            #[doc = concat!("Point mass on the given ", $index, ".")]
            pub fn point_mass(len: usize, at: usize) -> Result<Self> {
                if at >= len {
                    return Err(Error::OutOfRange { what: $index, index: at, size: len });
                }
                let mut probs = vec![0.0; len];
                probs[at] = 1.0;
                Ok(Self(probs))
            }

            pub fn uniform(len: usize) -> Result<Self> {
                if len == 0 {
                    return Err(Error::InvalidDistribution("empty probability vector".into()));
                }
                Ok(Self(vec![1.0 / len as f64; len]))
            }

            pub fn probs(&self) -> &[f64] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn l1_distance(&self, other: &Self) -> Result<f64> {
                l1_distance(&self.0, &other.0)
            }

            /// Entrywise mean of several distributions of equal length.
            pub fn average<'a, I>(items: I) -> Result<Self>
            where
                I: IntoIterator<Item = &'a Self>,
            {
                let mut acc: Vec<f64> = Vec::new();
                let mut count = 0usize;
                for d in items {
                    if count == 0 {
                        acc = vec![0.0; d.len()];
                    } else if d.len() != acc.len() {
                        return Err(Error::DimensionMismatch {
                            what: "distribution length",
                            expected: acc.len(),
                            actual: d.len(),
                        });
                    }
                    for (a, p) in acc.iter_mut().zip(&d.0) {
                        *a += p;
                    }
                    count += 1;
                }
                if count == 0 {
                    return Err(Error::InvalidDistribution("average of no distributions".into()));
                }
                acc.iter_mut().for_each(|a| *a /= count as f64);
                Self::new(acc)
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;
            fn try_from(probs: Vec<f64>) -> Result<Self> {
                Self::new(probs)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(d: $name) -> Vec<f64> {
                d.0
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

simplex_newtype!(
    /// Population distribution over actions.
    ActionDist,
    "action"
);
simplex_newtype!(
    /// Population distribution over states.
    StateDist,
    "state"
);
