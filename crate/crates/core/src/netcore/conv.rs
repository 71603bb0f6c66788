//! 3x3 convolution and transposed convolution, stride 1, zero padding 1.
//!
//! Both directions are evaluated as nine strided GEMMs against a zero-padded
//! copy of the input. With the padded row width `pw = w + 2`, shifting the
//! window by tap `(u, v)` is a flat offset of `u * pw + v`, so the output is
//! first produced in a "padded-width" layout (rows of `pw` entries, the last
//! two of which are discarded) and then compacted.

use crate::error::{Error, Result};

use super::{Real, Tensor4};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConvMode {
    Conv,
    Deconv,
}

impl ConvMode {
    fn flipped(self) -> bool {
        matches!(self, ConvMode::Deconv)
    }
}

/// Kernels are stored `(out_channels, in_channels, 3, 3)` for both modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub mode: ConvMode,
    pub kernels: Vec<T>,
    pub biases: Vec<T>,
}

/// Gradient accumulators matching a [`ConvLayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub kernels: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> ConvGrads<T> {
    pub fn zeros_like(p: &ConvLayerParams<T>) -> Self {
        Self {
            kernels: vec![T::zero(); p.kernels.len()],
            biases: vec![T::zero(); p.biases.len()],
        }
    }

    pub fn clear(&mut self) {
        self.kernels.iter_mut().for_each(|v| *v = T::zero());
        self.biases.iter_mut().for_each(|v| *v = T::zero());
    }
}

impl<T: Real> ConvLayerParams<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, mode: ConvMode) -> Self {
        Self {
            in_channels,
            out_channels,
            mode,
            kernels: vec![T::zero(); out_channels * in_channels * TAPS],
            biases: vec![T::zero(); out_channels],
        }
    }

    pub fn param_count(&self) -> usize {
        self.kernels.len() + self.biases.len()
    }

    pub fn kernel(&self, o: usize, c: usize, u: usize, v: usize) -> T {
        self.kernels[(o * self.in_channels + c) * TAPS + u * KERNEL + v]
    }

    pub fn kernel_mut(&mut self, o: usize, c: usize, u: usize, v: usize) -> &mut T {
        &mut self.kernels[(o * self.in_channels + c) * TAPS + u * KERNEL + v]
    }

    /// Applies the layer according to its mode.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        correlate_forward(x, self, self.mode.flipped())
    }

    /// Back-propagates `dy` through the layer evaluated at input `x`,
    /// accumulating parameter gradients into `grads` and returning `dL/dx`.
    pub fn backward(&self, x: &Tensor4<T>, dy: &Tensor4<T>, grads: &mut ConvGrads<T>) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let [n, _, h, w] = x.dims();
        if dy.dims() != [n, self.out_channels, h, w] {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match layer output {:?}",
                dy.dims(),
                [n, self.out_channels, h, w]
            )));
        }
        if grads.kernels.len() != self.kernels.len() || grads.biases.len() != self.biases.len() {
            return Err(Error::Shape("gradient buffers do not match layer".into()));
        }
        let flip = self.mode.flipped();
        let g = Geometry::new(h, w);
        let (cin, cout) = (self.in_channels, self.out_channels);
        let mut dx = Tensor4::zeros([n, cin, h, w]);
        let mut z = vec![T::zero(); cin * g.n];
        for b in 0..n {
            let dyb = dy.sample(b);

            for o in 0..cout {
                let s: f64 = dyb[o * h * w..(o + 1) * h * w].iter().map(|v| v.as_f64()).sum();
                grads.biases[o] = grads.biases[o] + T::from_f64(s);
            }

            // dL/dK[o, c, tap] = sum_p dy[o, p] * xpad[c, p + off(tap)]
            let xp = pad(x.sample(b), cin, &g);
            let dz = to_padded_width(dyb, cout, &g);
            for tap in 0..TAPS {
                let off = g.offset(tap, flip);
                unsafe {
                    T::gemm(
                        cout,
                        g.n,
                        cin,
                        T::one(),
                        dz.as_ptr(),
                        g.n as isize,
                        1,
                        xp.as_ptr().add(off),
                        1,
                        g.plane as isize,
                        T::one(),
                        grads.kernels.as_mut_ptr().add(tap),
                        (cin * TAPS) as isize,
                        TAPS as isize,
                    );
                }
            }

            // dL/dx is the adjoint map: transposed channel roles, mirrored taps.
            let dyp = pad(dyb, cout, &g);
            z.iter_mut().for_each(|v| *v = T::zero());
            unsafe {
                correlate(&self.kernels, TAPS as isize, (cin * TAPS) as isize, cin, cout, &dyp, &g, !flip, &mut z);
            }
            from_padded_width(&z, cin, &g, None, dx.sample_mut(b));
        }
        Ok(dx)
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        if x.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "layer expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        Ok(())
    }
}

/// Stride-1, padding-1 convolution (cross-correlation):
/// `out(b,o,i,j) = bias(o) + sum_{c,u,v} x(b,c,i+u-1,j+v-1) * k(o,c,u,v)`.
pub fn conv2d_forward<T: Real>(x: &Tensor4<T>, p: &ConvLayerParams<T>) -> Result<Tensor4<T>> {
    correlate_forward(x, p, false)
}

/// Stride-1, padding-1 transposed convolution:
/// `out(b,o,i,j) = bias(o) + sum_{c,u,v} x(b,c,i-u+1,j-v+1) * k(o,c,u,v)`.
///
/// Each input cell is scattered over the 3x3 neighbourhood of its output
/// location. With zero bias this is the adjoint of [`conv2d_forward`] once
/// the kernel's channel roles are swapped.
pub fn deconv2d_forward<T: Real>(x: &Tensor4<T>, p: &ConvLayerParams<T>) -> Result<Tensor4<T>> {
    correlate_forward(x, p, true)
}

/// Same kernel with input and output channel roles exchanged.
pub fn transpose_roles<T: Real>(p: &ConvLayerParams<T>, mode: ConvMode) -> ConvLayerParams<T> {
    let mut t = ConvLayerParams::zeros(p.out_channels, p.in_channels, mode);
    for o in 0..p.out_channels {
        for c in 0..p.in_channels {
            for u in 0..KERNEL {
                for v in 0..KERNEL {
                    *t.kernel_mut(c, o, u, v) = p.kernel(o, c, u, v);
                }
            }
        }
    }
    t
}

fn correlate_forward<T: Real>(x: &Tensor4<T>, p: &ConvLayerParams<T>, flip: bool) -> Result<Tensor4<T>> {
    p.check_input(x)?;
    let [n, _, h, w] = x.dims();
    let g = Geometry::new(h, w);
    let (cin, cout) = (p.in_channels, p.out_channels);
    let mut out = Tensor4::zeros([n, cout, h, w]);
    let mut z = vec![T::zero(); cout * g.n];
    for b in 0..n {
        let xp = pad(x.sample(b), cin, &g);
        z.iter_mut().for_each(|v| *v = T::zero());
        unsafe {
            correlate(&p.kernels, (cin * TAPS) as isize, TAPS as isize, cout, cin, &xp, &g, flip, &mut z);
        }
        from_padded_width(&z, cout, &g, Some(&p.biases), out.sample_mut(b));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    h: usize,
    w: usize,
    pw: usize,
    plane: usize,
    /// Columns of the padded-width output: `h * pw - 2`.
    n: usize,
}

impl Geometry {
    fn new(h: usize, w: usize) -> Self {
        let pw = w + 2;
        Self {
            h,
            w,
            pw,
            plane: (h + 2) * pw,
            n: h * pw - 2,
        }
    }

    fn offset(&self, tap: usize, flip: bool) -> usize {
        let (u, v) = (tap / KERNEL, tap % KERNEL);
        let (u, v) = if flip { (KERNEL - 1 - u, KERNEL - 1 - v) } else { (u, v) };
        u * self.pw + v
    }
}

fn pad<T: Real>(src: &[T], channels: usize, g: &Geometry) -> Vec<T> {
    let mut dst = vec![T::zero(); channels * g.plane];
    for c in 0..channels {
        for i in 0..g.h {
            let s = (c * g.h + i) * g.w;
            let d = c * g.plane + (i + 1) * g.pw + 1;
            dst[d..d + g.w].copy_from_slice(&src[s..s + g.w]);
        }
    }
    dst
}

fn to_padded_width<T: Real>(src: &[T], channels: usize, g: &Geometry) -> Vec<T> {
    let mut dst = vec![T::zero(); channels * g.n];
    for c in 0..channels {
        for i in 0..g.h {
            let s = (c * g.h + i) * g.w;
            let d = c * g.n + i * g.pw;
            dst[d..d + g.w].copy_from_slice(&src[s..s + g.w]);
        }
    }
    dst
}

fn from_padded_width<T: Real>(z: &[T], channels: usize, g: &Geometry, bias: Option<&[T]>, dst: &mut [T]) {
    for c in 0..channels {
        let beta = bias.map_or(T::zero(), |b| b[c]);
        for i in 0..g.h {
            let s = c * g.n + i * g.pw;
            let d = (c * g.h + i) * g.w;
            for (o, &v) in dst[d..d + g.w].iter_mut().zip(&z[s..s + g.w]) {
                *o = v + beta;
            }
        }
    }
}

/// `z[r, p] += sum_tap sum_s A(r, s, tap) * xp[s, p + off(tap)]` where
/// `A(r, s, tap) = kernels[r * rsa + s * csa + tap]`.
#[allow(clippy::too_many_arguments)]
unsafe fn correlate<T: Real>(
    kernels: &[T],
    rsa: isize,
    csa: isize,
    rows: usize,
    inner: usize,
    xp: &[T],
    g: &Geometry,
    flip: bool,
    z: &mut [T],
) {
    debug_assert_eq!(xp.len(), inner * g.plane);
    debug_assert_eq!(z.len(), rows * g.n);
    for tap in 0..TAPS {
        let off = g.offset(tap, flip);
        T::gemm(
            rows,
            inner,
            g.n,
            T::one(),
            kernels.as_ptr().add(tap),
            rsa,
            csa,
            xp.as_ptr().add(off),
            g.plane as isize,
            1,
            T::one(),
            z.as_mut_ptr(),
            g.n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(channels: usize, mode: ConvMode) -> ConvLayerParams<f64> {
        let mut p = ConvLayerParams::zeros(channels, channels, mode);
        for c in 0..channels {
            *p.kernel_mut(c, c, 1, 1) = 1.0;
        }
        p
    }

    #[test]
    fn identity_kernel_is_identity() {
        let x = Tensor4::from_vec([2, 1, 4, 5], (0..40).map(|v| v as f64 * 0.25 - 3.0).collect()).unwrap();
        assert_eq!(conv2d_forward(&x, &identity(1, ConvMode::Conv)).unwrap(), x);
        assert_eq!(deconv2d_forward(&x, &identity(1, ConvMode::Deconv)).unwrap(), x);
    }

    #[test]
    fn ones_kernel_counts_padding() {
        let x = Tensor4::from_vec([1, 1, 5, 5], vec![1.0f64; 25]).unwrap();
        let mut p = ConvLayerParams::zeros(1, 1, ConvMode::Conv);
        p.kernels.iter_mut().for_each(|k| *k = 1.0);
        let y = conv2d_forward(&x, &p).unwrap();
        assert_eq!(y.get(0, 0, 2, 2), 9.0);
        assert_eq!(y.get(0, 0, 0, 2), 6.0);
        assert_eq!(y.get(0, 0, 2, 4), 6.0);
        assert_eq!(y.get(0, 0, 0, 0), 4.0);
        assert_eq!(y.get(0, 0, 4, 4), 4.0);
    }

    #[test]
    fn impulse_stamps_kernel() {
        let mut x = Tensor4::<f64>::zeros([1, 1, 7, 7]);
        x.set(0, 0, 3, 3, 1.0);
        let mut p = ConvLayerParams::zeros(1, 1, ConvMode::Deconv);
        for (i, k) in p.kernels.iter_mut().enumerate() {
            *k = (i as f64 + 1.0) * 0.5;
        }
        let y = deconv2d_forward(&x, &p).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let expected = if (2..=4).contains(&i) && (2..=4).contains(&j) {
                    p.kernel(0, 0, i - 2, j - 2)
                } else {
                    0.0
                };
                assert_eq!(y.get(0, 0, i, j), expected, "({i},{j})");
            }
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let x = Tensor4::<f32>::zeros([1, 2, 4, 4]);
        let p = ConvLayerParams::<f32>::zeros(3, 1, ConvMode::Conv);
        assert!(matches!(p.forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn one_by_one_grid_keeps_shape() {
        let x = Tensor4::from_vec([1, 2, 1, 1], vec![1.5f32, -2.0]).unwrap();
        let mut p = ConvLayerParams::<f32>::zeros(2, 3, ConvMode::Conv);
        p.kernels.iter_mut().enumerate().for_each(|(i, k)| *k = i as f32 * 0.1);
        let y = p.forward(&x).unwrap();
        assert_eq!(y.dims(), [1, 3, 1, 1]);
        // only the centre tap sees data
        let expected = 1.5 * p.kernel(1, 0, 1, 1) - 2.0 * p.kernel(1, 1, 1, 1);
        assert!((y.get(0, 1, 0, 0) - expected).abs() < 1e-6);
    }

    #[test]
    fn backward_requires_matching_gradient() {
        let p = ConvLayerParams::<f64>::zeros(1, 2, ConvMode::Conv);
        let x = Tensor4::zeros([1, 1, 4, 4]);
        let dy = Tensor4::zeros([1, 1, 4, 4]);
        let mut g = ConvGrads::zeros_like(&p);
        assert!(p.backward(&x, &dy, &mut g).is_err());
    }
}
