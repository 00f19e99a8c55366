//! Frame/patch grid layout and the flat token id mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions of the multi-view token grid.
///
/// A scene is `frames` views, each partitioned into `rows × cols` patches of
/// `patch_size` pixels. Token ids are flat: frame-major, then row-major within
/// the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGrid {
    /// Number of views.
    pub frames: usize,
    /// Patch rows per view.
    pub rows: usize,
    /// Patch columns per view.
    pub cols: usize,
    /// Patch side length in pixels.
    pub patch_size: usize,
}

impl FrameGrid {
    pub fn new(frames: usize, rows: usize, cols: usize, patch_size: usize) -> Result<Self> {
        let grid = FrameGrid {
            frames,
            rows,
            cols,
            patch_size,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 1 || self.rows < 1 || self.cols < 1 || self.patch_size < 1 {
            return Err(Error::invalid(
                "frame grid",
                format!(
                    "all dimensions must be >= 1 (frames={}, rows={}, cols={}, patch_size={})",
                    self.frames, self.rows, self.cols, self.patch_size
                ),
            ));
        }
        Ok(())
    }

    /// Total token count across all frames.
    pub fn token_count(&self) -> usize {
        self.frames * self.rows * self.cols
    }

    /// Tokens per frame.
    pub fn tokens_per_frame(&self) -> usize {
        self.rows * self.cols
    }

    /// Image width in pixels.
    pub fn image_width(&self) -> usize {
        self.cols * self.patch_size
    }

    /// Image height in pixels.
    pub fn image_height(&self) -> usize {
        self.rows * self.patch_size
    }

    /// Flat id of the token at (frame, row, col).
    pub fn flat_id(&self, frame: usize, row: usize, col: usize) -> Result<usize> {
        if frame >= self.frames || row >= self.rows || col >= self.cols {
            return Err(Error::invalid(
                "token position",
                format!(
                    "({frame}, {row}, {col}) out of range {}x{}x{}",
                    self.frames, self.rows, self.cols
                ),
            ));
        }
        Ok(frame * self.rows * self.cols + row * self.cols + col)
    }

    /// Inverse of [`FrameGrid::flat_id`].
    pub fn token_position(&self, id: usize) -> Result<(usize, usize, usize)> {
        if id >= self.token_count() {
            return Err(Error::invalid(
                "token id",
                format!("{id} out of range 0..{}", self.token_count()),
            ));
        }
        let per_frame = self.tokens_per_frame();
        let frame = id / per_frame;
        let rest = id % per_frame;
        Ok((frame, rest / self.cols, rest % self.cols))
    }

    /// Frame index that owns a token id.
    pub fn frame_of(&self, id: usize) -> usize {
        id / self.tokens_per_frame()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_id_is_bijective() {
        let grid = FrameGrid::new(3, 4, 5, 16).unwrap();
        let mut seen = vec![false; grid.token_count()];
        for s in 0..3 {
            for h in 0..4 {
                for w in 0..5 {
                    let id = grid.flat_id(s, h, w).unwrap();
                    assert!(!seen[id]);
                    seen[id] = true;
                    assert_eq!(grid.token_position(id).unwrap(), (s, h, w));
                }
            }
        }
        assert!(seen.iter().all(|&v| v));
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(FrameGrid::new(0, 4, 5, 16).is_err());
        assert!(FrameGrid::new(3, 4, 5, 0).is_err());
    }

    #[test]
    fn out_of_range_lookups_fail() {
        let grid = FrameGrid::new(2, 2, 2, 8).unwrap();
        assert!(grid.flat_id(2, 0, 0).is_err());
        assert!(grid.token_position(8).is_err());
    }
}
