//! Per-example layer kernels operating on raw row-major slices.
//!
//! Convolutions are lowered to GEMM over im2col tiles. Tiles cover whole
//! output rows and are sized so the column buffer stays around
//! `COL_BUDGET` elements; the backward pass rebuilds each tile from the
//! stored layer input instead of keeping every column buffer alive.

use crate::net::Scalar;

const COL_BUDGET: usize = 1 << 20;

/// Geometry of a same-padded, stride-1 convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvGeom {
    fn k_dim(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn plane(&self) -> usize {
        self.height * self.width
    }

    fn tile_rows(&self) -> usize {
        (COL_BUDGET / (self.k_dim() * self.width)).clamp(1, self.height)
    }

    fn tiles(&self) -> impl Iterator<Item = (usize, usize)> {
        let step = self.tile_rows();
        let h = self.height;
        (0..h).step_by(step).map(move |y0| (y0, step.min(h - y0)))
    }
}

/// Gathers the receptive fields of output rows `y0..y0 + rows` into a
/// `k_dim x (rows * width)` matrix, zero outside the image.
fn im2col<T: Scalar>(g: &ConvGeom, input: &[T], y0: usize, rows: usize, col: &mut [T]) {
    let (h, w, k) = (g.height, g.width, g.kernel);
    let pad = (k / 2) as isize;
    let n = rows * w;
    for ci in 0..g.in_channels {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let dst = &mut col[r * n..(r + 1) * n];
                let shift = kx as isize - pad;
                for ty in 0..rows {
                    let sy = (y0 + ty) as isize + ky as isize - pad;
                    let drow = &mut dst[ty * w..(ty + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        drow.fill(T::ZERO);
                        continue;
                    }
                    let srow = &plane[sy as usize * w..(sy as usize + 1) * w];
                    let lo = (-shift).max(0) as usize;
                    let hi = (w as isize - shift).min(w as isize).max(lo as isize) as usize;
                    drow[..lo].fill(T::ZERO);
                    drow[hi..].fill(T::ZERO);
                    let s0 = (lo as isize + shift) as usize;
                    drow[lo..hi].copy_from_slice(&srow[s0..s0 + (hi - lo)]);
                }
            }
        }
    }
}

/// Scatter-adds a column matrix back onto the input gradient.
fn col2im<T: Scalar>(g: &ConvGeom, col: &[T], y0: usize, rows: usize, dinput: &mut [T]) {
    let (h, w, k) = (g.height, g.width, g.kernel);
    let pad = (k / 2) as isize;
    let n = rows * w;
    for ci in 0..g.in_channels {
        let plane = &mut dinput[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let src = &col[r * n..(r + 1) * n];
                let shift = kx as isize - pad;
                for ty in 0..rows {
                    let sy = (y0 + ty) as isize + ky as isize - pad;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let lo = (-shift).max(0) as usize;
                    let hi = (w as isize - shift).min(w as isize).max(lo as isize) as usize;
                    let s0 = (lo as isize + shift) as usize;
                    let drow = &mut plane[sy as usize * w + s0..sy as usize * w + s0 + (hi - lo)];
                    for (d, &v) in drow.iter_mut().zip(&src[ty * w + lo..ty * w + hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Scalar>(g: &ConvGeom, input: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    let (kd, hw) = (g.k_dim(), g.plane());
    for f in 0..g.filters {
        out[f * hw..(f + 1) * hw].fill(bias[f]);
    }
    let mut col = vec![T::ZERO; kd * g.tile_rows() * g.width];
    for (y0, rows) in g.tiles() {
        let n = rows * g.width;
        im2col(g, input, y0, rows, &mut col[..kd * n]);
        T::gemm(
            g.filters,
            kd,
            n,
            weight,
            (kd as isize, 1),
            &col[..kd * n],
            (n as isize, 1),
            T::ONE,
            &mut out[y0 * g.width..],
            (hw as isize, 1),
        );
    }
}

/// Accumulates weight/bias gradients and, when `dinput` is given, writes the
/// input gradient (overwriting it).
pub(crate) fn conv_backward<T: Scalar>(
    g: &ConvGeom,
    input: &[T],
    weight: &[T],
    dout: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    mut dinput: Option<&mut [T]>,
) {
    let (kd, hw) = (g.k_dim(), g.plane());
    for f in 0..g.filters {
        let mut s = T::ZERO;
        for &v in &dout[f * hw..(f + 1) * hw] {
            s += v;
        }
        dbias[f] += s;
    }
    if let Some(d) = dinput.as_deref_mut() {
        d.fill(T::ZERO);
    }
    let cap = kd * g.tile_rows() * g.width;
    let mut col = vec![T::ZERO; cap];
    let mut dcol = if dinput.is_some() {
        vec![T::ZERO; cap]
    } else {
        Vec::new()
    };
    for (y0, rows) in g.tiles() {
        let n = rows * g.width;
        im2col(g, input, y0, rows, &mut col[..kd * n]);
        let dout_tile = &dout[y0 * g.width..];
        // dW += dOut_tile * col^T
        T::gemm(
            g.filters,
            n,
            kd,
            dout_tile,
            (hw as isize, 1),
            &col[..kd * n],
            (1, n as isize),
            T::ONE,
            dweight,
            (kd as isize, 1),
        );
        if let Some(d) = dinput.as_deref_mut() {
            // dcol = W^T * dOut_tile
            T::gemm(
                kd,
                g.filters,
                n,
                weight,
                (1, kd as isize),
                dout_tile,
                (hw as isize, 1),
                T::ZERO,
                &mut dcol[..kd * n],
                (n as isize, 1),
            );
            col2im(g, &dcol[..kd * n], y0, rows, d);
        }
    }
}

/// Non-overlapping max pooling; returns the flat input index of each window's
/// maximum (first one on ties).
pub(crate) fn maxpool_forward<T: Scalar>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    size: usize,
    out: &mut [T],
) -> Vec<u32> {
    let (oh, ow) = (h / size, w / size);
    let mut argmax = vec![0u32; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_i = ch * h * w + oy * size * w + ox * size;
                let mut best = input[best_i];
                for dy in 0..size {
                    for dx in 0..size {
                        let i = ch * h * w + (oy * size + dy) * w + ox * size + dx;
                        if input[i] > best {
                            best = input[i];
                            best_i = i;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_i as u32;
            }
        }
    }
    argmax
}

pub(crate) fn maxpool_backward<T: Scalar>(dout: &[T], argmax: &[u32], dinput: &mut [T]) {
    dinput.fill(T::ZERO);
    for (&d, &i) in dout.iter().zip(argmax) {
        dinput[i as usize] += d;
    }
}

pub(crate) fn dense_forward<T: Scalar>(input: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    let n_in = input.len();
    for (u, o) in out.iter_mut().enumerate() {
        let row = &weight[u * n_in..(u + 1) * n_in];
        let mut s = bias[u];
        for (&wv, &x) in row.iter().zip(input) {
            s += wv * x;
        }
        *o = s;
    }
}

pub(crate) fn dense_backward<T: Scalar>(
    input: &[T],
    weight: &[T],
    dout: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    dinput: Option<&mut [T]>,
) {
    let n_in = input.len();
    for (u, &d) in dout.iter().enumerate() {
        dbias[u] += d;
        for (dw, &x) in dweight[u * n_in..(u + 1) * n_in].iter_mut().zip(input) {
            *dw += d * x;
        }
    }
    if let Some(dx) = dinput {
        dx.fill(T::ZERO);
        for (u, &d) in dout.iter().enumerate() {
            for (acc, &wv) in dx.iter_mut().zip(&weight[u * n_in..(u + 1) * n_in]) {
                *acc += wv * d;
            }
        }
    }
}
