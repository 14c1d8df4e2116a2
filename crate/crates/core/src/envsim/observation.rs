use alloc::vec::Vec;

use crate::{Error, Result};

/// Stack of `frames` grayscale images, frame-major then row-major, values in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelObservation {
    height: usize,
    width: usize,
    frames: usize,
    data: Vec<f64>,
}

impl PixelObservation {
    pub fn new(height: usize, width: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || frames == 0 || data.len() != height * width * frames {
            return Err(Error::contract("observation length must equal frames·height·width"));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract("observation values must lie in [0, 1]"));
        }
        Ok(Self { height, width, frames, data })
    }

    pub(crate) fn from_parts(height: usize, width: usize, frames: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * frames);
        Self { height, width, frames, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn frame_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[i * n..(i + 1) * n]
    }

    /// The most recent frame as a one-frame observation.
    pub fn last_frame(&self) -> PixelObservation {
        Self::from_parts(self.height, self.width, 1, self.frame(self.frames - 1).to_vec())
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }
}
