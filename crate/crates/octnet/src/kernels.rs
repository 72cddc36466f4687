//! Dense convolution kernels built on im2col and GEMM.

/// Geometry of a 2D sliding window over one image.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Window {
    pub fn out_h(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Unfolds `img` (C×H×W) into a `(C·k·k) × (Ho·Wo)` matrix.
pub(crate) fn im2col(img: &[f64], win: &Window, cols: &mut [f64]) {
    let (oh, ow) = (win.out_h(), win.out_w());
    let k = win.kernel;
    let ncols = oh * ow;
    for c in 0..win.channels {
        let plane = &img[c * win.height * win.width..(c + 1) * win.height * win.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for oy in 0..oh {
                    let iy = (oy * win.stride + ky) as isize - win.pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= win.height as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * win.width..(iy as usize + 1) * win.width];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * win.stride + kx) as isize - win.pad as isize;
                        *v = if ix < 0 || ix >= win.width as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters and accumulates columns back into `img`.
pub(crate) fn col2im(cols: &[f64], win: &Window, img: &mut [f64]) {
    let (oh, ow) = (win.out_h(), win.out_w());
    let k = win.kernel;
    let ncols = oh * ow;
    for c in 0..win.channels {
        let plane = &mut img[c * win.height * win.width..(c + 1) * win.height * win.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for oy in 0..oh {
                    let iy = (oy * win.stride + ky) as isize - win.pad as isize;
                    if iy < 0 || iy >= win.height as isize {
                        continue;
                    }
                    let line = &mut plane[iy as usize * win.width..(iy as usize + 1) * win.width];
                    for ox in 0..ow {
                        let ix = (ox * win.stride + kx) as isize - win.pad as isize;
                        if ix >= 0 && ix < win.width as isize {
                            line[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Trans {
    No,
    Yes,
}

/// `c = beta·c + a·b` where `a` is `m×k` and `b` is `k×n` after the requested
/// transpositions; all buffers are row-major and contiguous.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: Trans,
    b: &[f64],
    tb: Trans,
    beta: f64,
    c: &mut [f64],
) {
    let (rsa, csa) = match ta {
        Trans::No => (k as isize, 1),
        Trans::Yes => (1, m as isize),
    };
    let (rsb, csb) = match tb {
        Trans::No => (n as isize, 1),
        Trans::Yes => (1, k as isize),
    };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices are at least as long as the strided views imply.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let win = Window {
            channels: 2,
            height: 5,
            width: 4,
            kernel: 3,
            stride: 2,
            pad: 1,
        };
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..win.col_rows() * win.col_cols())
            .map(|i| (i as f64 * 0.11).cos())
            .collect();
        let mut cx = vec![0.0; y.len()];
        im2col(&x, &win, &mut cx);
        let mut ay = vec![0.0; x.len()];
        col2im(&y, &win, &mut ay);
        let lhs: f64 = cx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gemm_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, &a, Trans::No, &b, Trans::No, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(2, 2, 2, &a, Trans::Yes, &b, Trans::No, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(2, 2, 2, &a, Trans::No, &b, Trans::Yes, 0.0, &mut c);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }
}
