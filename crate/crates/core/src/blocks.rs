use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockGenerator {
    /// `n(k) = 2^{k-1}`.
    Dyadic,
    /// `n(1) = 1`, `n(k) = 2^{2^{k-1}}` for `k ≥ 2`.
    SuperDyadic,
    /// `n(k) = 2^{(k-1)²}`.
    Squared,
    Explicit,
}

impl std::str::FromStr for BlockGenerator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dyadic" => Ok(Self::Dyadic),
            "super_dyadic" => Ok(Self::SuperDyadic),
            "squared" => Ok(Self::Squared),
            "explicit" => Ok(Self::Explicit),
            _ => Err(Error::Config(format!("unknown block generator '{s}'"))),
        }
    }
}

/// Strictly increasing block boundaries `n(1) < n(2) < ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSequence {
    pub indices: Vec<BigUint>,
    pub generator: BlockGenerator,
}

impl BlockSequence {
    pub fn generate(generator: BlockGenerator, count: usize) -> Result<Self> {
        let two = BigUint::from(2u32);
        let indices = (1..=count)
            .map(|k| match generator {
                BlockGenerator::Dyadic => Ok(two.pow((k - 1) as u32)),
                BlockGenerator::SuperDyadic if k == 1 => Ok(BigUint::one()),
                BlockGenerator::SuperDyadic => Ok(two.pow(1u32 << (k - 1).min(31))),
                BlockGenerator::Squared => Ok(two.pow(((k - 1) * (k - 1)) as u32)),
                BlockGenerator::Explicit => Err(Error::arg("explicit sequences are built with `explicit`")),
            })
            .collect::<Result<Vec<_>>>()?;
        if generator == BlockGenerator::SuperDyadic && count > 20 {
            return Err(Error::arg("super-dyadic sequences are limited to 20 terms"));
        }
        Self::new(indices, generator)
    }

    pub fn explicit(indices: Vec<BigUint>) -> Result<Self> {
        Self::new(indices, BlockGenerator::Explicit)
    }

    pub fn from_usize(indices: &[usize]) -> Result<Self> {
        Self::explicit(indices.iter().map(|&i| BigUint::from(i)).collect())
    }

    fn new(indices: Vec<BigUint>, generator: BlockGenerator) -> Result<Self> {
        if indices.is_empty() || indices[0] == BigUint::from(0u32) {
            return Err(Error::arg("block indices must be positive and non-empty"));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("block indices must be strictly increasing"));
        }
        Ok(Self { indices, generator })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn starts_at_one(&self) -> bool {
        self.indices[0].is_one()
    }

    /// Consecutive pairs `(n(k), n(k+1))` as machine integers.
    pub fn pairs_usize(&self) -> Result<Vec<(usize, usize)>> {
        let v: Vec<usize> = self
            .indices
            .iter()
            .map(|x| x.to_usize().ok_or_else(|| Error::Range(format!("block index {x} too large"))))
            .collect::<Result<_>>()?;
        Ok(v.windows(2).map(|w| (w[0], w[1])).collect())
    }
}
