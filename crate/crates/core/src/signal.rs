use serde::{Deserialize, Serialize};

use crate::error::{Result, RtwError};

/// A discrete trajectory stored as consecutive points of `width` coordinates each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal<T> {
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Signal<T> {
    pub fn new(width: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || data.len() % width != 0 {
            return Err(RtwError::DimensionMismatch { expected: width, found: data.len() });
        }
        Ok(Self { width, data })
    }

    pub fn from_points<P: AsRef<[T]>>(width: usize, points: impl IntoIterator<Item = P>) -> Result<Self> {
        let mut data = Vec::new();
        for p in points {
            let p = p.as_ref();
            if p.len() != width {
                return Err(RtwError::DimensionMismatch { expected: width, found: p.len() });
            }
            data.extend_from_slice(p);
        }
        Self::new(width, data)
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn point(&self, t: usize) -> &[T] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn point_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Picks the points at `indices` (storage order, zero based).
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.width);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Self { width: self.width, data }
    }
}
