//! Zero-padded box sums over row-major grids.
//!
//! A window is described by inclusive offsets `lo..=hi` applied to both axes,
//! so cell `(r, c)` gathers `src[r + dr][c + dc]` for `dr, dc` in `lo..=hi`.
//! Neighbours outside the grid contribute zero. The sums are computed
//! separably with running prefix sums along rows and then columns.

/// Offsets `(lo, hi)` of a `w`-wide window. Odd widths are centered; even
/// widths lean backward, so `w = 10` covers `-5..=4`.
pub fn window_offsets(w: usize) -> (isize, isize) {
    assert!(w >= 1, "window width must be positive");
    let lo = -((w / 2) as isize);
    let hi = w as isize - 1 - (w / 2) as isize;
    (lo, hi)
}

/// Windowed sums with offsets `lo..=hi` on both axes.
pub fn box_sum(src: &[f64], rows: usize, cols: usize, lo: isize, hi: isize) -> Vec<f64> {
    assert_eq!(src.len(), rows * cols);
    assert!(lo <= hi);
    let mut horiz = vec![0.0; rows * cols];
    let mut prefix = vec![0.0; cols.max(rows) + 1];
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        running_window(row, 1, cols, lo, hi, &mut prefix, &mut horiz[r * cols..], 1);
    }
    let mut out = vec![0.0; rows * cols];
    let mut column = vec![0.0; rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = horiz[r * cols + c];
        }
        running_window(&column, 1, rows, lo, hi, &mut prefix, &mut out[c..], cols);
    }
    out
}

/// Windowed mean: [`box_sum`] divided by a fixed divisor (never by the
/// in-bounds count).
pub fn box_mean(src: &[f64], rows: usize, cols: usize, w: usize) -> Vec<f64> {
    let (lo, hi) = window_offsets(w);
    let divisor = (w * w) as f64;
    let mut out = box_sum(src, rows, cols, lo, hi);
    out.iter_mut().for_each(|v| *v /= divisor);
    out
}

/// Adjoint of [`box_mean`]: the mirrored window with the same divisor.
pub fn box_mean_adjoint(src: &[f64], rows: usize, cols: usize, w: usize) -> Vec<f64> {
    let (lo, hi) = window_offsets(w);
    let divisor = (w * w) as f64;
    let mut out = box_sum(src, rows, cols, -hi, -lo);
    out.iter_mut().for_each(|v| *v /= divisor);
    out
}

#[allow(clippy::too_many_arguments)]
fn running_window(
    line: &[f64],
    stride: usize,
    len: usize,
    lo: isize,
    hi: isize,
    prefix: &mut [f64],
    out: &mut [f64],
    out_stride: usize,
) {
    prefix[0] = 0.0;
    for i in 0..len {
        prefix[i + 1] = prefix[i] + line[i * stride];
    }
    let n = len as isize;
    for i in 0..n {
        let a = (i + lo).clamp(0, n);
        let b = (i + hi + 1).clamp(0, n);
        out[i as usize * out_stride] = if b > a {
            prefix[b as usize] - prefix[a as usize]
        } else {
            0.0
        };
    }
}
