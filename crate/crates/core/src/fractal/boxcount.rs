use crate::error::{Error, Result};
use crate::stats::{linear_fit, LineFit};

/// Number of boxes of `box_cells` x `box_cells` cells containing at least
/// one marked cell of a row-major `cells` x `cells` mask.
pub fn box_counts(mask: &[bool], cells: usize, box_cells: usize) -> usize {
    assert_eq!(mask.len(), cells * cells);
    let per_axis = cells.div_ceil(box_cells);
    let mut hit = vec![false; per_axis * per_axis];
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (r, c) = (i / cells, i % cells);
        hit[(r / box_cells) * per_axis + c / box_cells] = true;
    }
    hit.iter().filter(|&&h| h).count()
}

/// Slope of log count against log(boxes per axis) over the given box sizes.
pub fn box_dimension(mask: &[bool], cells: usize, box_sizes: &[usize]) -> Result<LineFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &b in box_sizes {
        let count = box_counts(mask, cells, b);
        if count > 0 {
            xs.push((cells as f64 / b as f64).ln());
            ys.push((count as f64).ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("box dimension needs two nonempty box sizes".into()));
    }
    Ok(linear_fit(&xs, &ys))
}

pub fn full_square(cells: usize) -> Vec<bool> {
    vec![true; cells * cells]
}

/// Horizontal segment through the middle row.
pub fn segment(cells: usize) -> Vec<bool> {
    let mut m = vec![false; cells * cells];
    let r = cells / 2;
    m[r * cells..(r + 1) * cells].iter_mut().for_each(|v| *v = true);
    m
}

/// Product of two middle-thirds Cantor sets on a 3^level grid.
pub fn cantor_dust(level: u32) -> Vec<bool> {
    let cells = 3usize.pow(level);
    let in_cantor = |mut i: usize| {
        for _ in 0..level {
            if i % 3 == 1 {
                return false;
            }
            i /= 3;
        }
        true
    };
    let line: Vec<bool> = (0..cells).map(in_cantor).collect();
    let mut m = vec![false; cells * cells];
    for r in 0..cells {
        for c in 0..cells {
            m[r * cells + c] = line[r] && line[c];
        }
    }
    m
}
