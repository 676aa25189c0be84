//! Token grids and raster/2D coordinate algebra.
//!
//! A grid is generated in raster (row-major) order, so a partially generated
//! grid is always a raster prefix. Cell `(i, j)` has raster index `i * width + j`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a token in a finite vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VocabId(pub usize);

impl VocabId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VocabId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Parameter(format!(
                "grid shape must be at least 1x1, got {height}x{width}"
            )));
        }
        Ok(Self { height, width })
    }

    /// Number of cells, `height * width`.
    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn raster_to_coord(&self, t: usize) -> Result<(usize, usize)> {
        if t >= self.len() {
            return Err(Error::Index(format!(
                "raster index {t} outside {}x{} grid",
                self.height, self.width
            )));
        }
        Ok((t / self.width, t % self.width))
    }

    pub fn coord_to_raster(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.height || j >= self.width {
            return Err(Error::Index(format!(
                "coordinate ({i}, {j}) outside {}x{} grid",
                self.height, self.width
            )));
        }
        Ok(i * self.width + j)
    }

    /// Shape after dividing both sides by `r`.
    pub fn downscaled(&self, r: usize) -> Result<GridShape> {
        if r == 0 || !self.height.is_multiple_of(r) || !self.width.is_multiple_of(r) {
            return Err(Error::Parameter(format!(
                "{}x{} grid is not divisible by ratio {r}",
                self.height, self.width
            )));
        }
        GridShape::new(self.height / r, self.width / r)
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// A raster-ordered, possibly partial, grid of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenGrid {
    shape: GridShape,
    vocab_size: usize,
    tokens: Vec<VocabId>,
}

impl TokenGrid {
    pub fn empty(shape: GridShape, vocab_size: usize) -> Self {
        Self {
            shape,
            vocab_size,
            tokens: Vec::with_capacity(shape.len()),
        }
    }

    pub fn from_tokens(shape: GridShape, vocab_size: usize, tokens: Vec<VocabId>) -> Result<Self> {
        if tokens.len() > shape.len() {
            return Err(Error::Contract(format!(
                "{} tokens exceed {shape} grid capacity",
                tokens.len()
            )));
        }
        if let Some(bad) = tokens.iter().find(|t| t.0 >= vocab_size) {
            return Err(Error::Contract(format!(
                "token {bad} outside vocabulary of size {vocab_size}"
            )));
        }
        Ok(Self {
            shape,
            vocab_size,
            tokens,
        })
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    #[inline]
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    #[inline]
    pub fn tokens(&self) -> &[VocabId] {
        &self.tokens
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.tokens.len() == self.shape.len()
    }

    pub fn push(&mut self, token: VocabId) -> Result<()> {
        if self.is_complete() {
            return Err(Error::Contract(format!("{} grid is already full", self.shape)));
        }
        self.check_token(token)?;
        self.tokens.push(token);
        Ok(())
    }

    /// Overwrites an already generated position.
    pub fn set(&mut self, position: usize, token: VocabId) -> Result<()> {
        self.check_token(token)?;
        match self.tokens.get_mut(position) {
            Some(slot) => {
                *slot = token;
                Ok(())
            }
            None => Err(Error::Index(format!(
                "position {position} not yet generated (prefix length {})",
                self.tokens.len()
            ))),
        }
    }

    pub fn truncate(&mut self, len: usize) {
        self.tokens.truncate(len);
    }

    /// Row-major nested rows of a complete grid; the last row may be partial.
    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.tokens
            .chunks(self.shape.width)
            .map(|row| row.iter().map(|t| t.0).collect())
            .collect()
    }

    fn check_token(&self, token: VocabId) -> Result<()> {
        if token.0 >= self.vocab_size {
            return Err(Error::Contract(format!(
                "token {token} outside vocabulary of size {}",
                self.vocab_size
            )));
        }
        Ok(())
    }
}
