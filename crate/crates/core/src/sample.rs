use crate::error::{Error, Result};

/// `n` observed pairs of nonnegative counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedSample {
    xs: Vec<u32>,
    ys: Vec<u32>,
}

impl PairedSample {
    pub fn new(xs: Vec<u32>, ys: Vec<u32>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidParameter(format!(
                "coordinate lengths differ ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a paired sample needs at least 2 pairs, got {}",
                xs.len()
            )));
        }
        Ok(Self { xs, ys })
    }

    pub fn from_pairs(pairs: &[(u32, u32)]) -> Result<Self> {
        let (xs, ys) = pairs.iter().copied().unzip();
        Self::new(xs, ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[u32] {
        &self.xs
    }

    pub fn ys(&self) -> &[u32] {
        &self.ys
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}
