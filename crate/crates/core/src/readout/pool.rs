use crate::error::{input_err, Result};
use crate::grid::RealGrid;

/// Block means over non-overlapping `pool_h x pool_w` tiles.
///
/// The grid dimensions must be exact multiples of the pool size.
pub fn pool_average(grid: &RealGrid, pool_h: usize, pool_w: usize) -> Result<RealGrid> {
    let (h, w) = grid.dims();
    if pool_h == 0 || pool_w == 0 || h % pool_h != 0 || w % pool_w != 0 {
        return input_err(format!("{h}x{w} frame is not divisible into {pool_h}x{pool_w} pools"));
    }
    let (oh, ow) = (h / pool_h, w / pool_w);
    let mut sums = vec![0.0; oh * ow];
    for r in 0..h {
        let out_row = &mut sums[(r / pool_h) * ow..(r / pool_h + 1) * ow];
        for (c, v) in grid.row(r).iter().enumerate() {
            out_row[c / pool_w] += v;
        }
    }
    let area = (pool_h * pool_w) as f64;
    sums.iter_mut().for_each(|s| *s /= area);
    RealGrid::new(oh, ow, sums)
}

/// Row-major flattening.
pub fn flatten(grid: &RealGrid) -> Vec<f64> {
    grid.data().to_vec()
}

/// Inverse of [`flatten`].
pub fn reshape(row: &[f64], height: usize, width: usize) -> Result<RealGrid> {
    RealGrid::new(height, width, row.to_vec())
}
