//! Same-padded, stride-1 2-D convolution kernels over `[C, H, W]` planes.
//!
//! Loops are arranged so the innermost dimension walks contiguous rows;
//! this is the hot path of training.

pub(crate) struct ConvShape {
    pub in_ch: usize,
    pub out_ch: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
}

impl ConvShape {
    fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Valid `(out_start, out_end)` range along a dimension of size `n` for
    /// kernel offset `d`.
    fn span(n: usize, d: isize) -> (usize, usize) {
        let start = if d < 0 { (-d) as usize } else { 0 };
        let end = if d > 0 { n.saturating_sub(d as usize) } else { n };
        (start, end.max(start))
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize, isize, isize)> + '_ {
        let k = self.kernel;
        let half = (k / 2) as isize;
        (0..k).flat_map(move |ky| {
            (0..k).map(move |kx| (ky, kx, ky as isize - half, kx as isize - half))
        })
    }
}

pub(crate) fn forward(s: &ConvShape, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let plane = s.plane();
    let w = s.width;
    let kk = s.kernel * s.kernel;
    let mut out = vec![0.0; s.out_ch * plane];
    for o in 0..s.out_ch {
        let out_plane = &mut out[o * plane..(o + 1) * plane];
        out_plane.fill(bias[o]);
        for c in 0..s.in_ch {
            let in_plane = &input[c * plane..(c + 1) * plane];
            for (ky, kx, dy, dx) in s.offsets() {
                let wt = weight[(o * s.in_ch + c) * kk + ky * s.kernel + kx];
                if wt == 0.0 {
                    continue;
                }
                let (y0, y1) = ConvShape::span(s.height, dy);
                let (x0, x1) = ConvShape::span(w, dx);
                for y in y0..y1 {
                    let src = ((y as isize + dy) as usize) * w;
                    let sx0 = (x0 as isize + dx) as usize;
                    let dst = &mut out_plane[y * w + x0..y * w + x1];
                    let srow = &in_plane[src + sx0..src + sx0 + (x1 - x0)];
                    for (d, v) in dst.iter_mut().zip(srow) {
                        *d += wt * v;
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn backward_input(s: &ConvShape, grad_out: &[f64], weight: &[f64]) -> Vec<f64> {
    let plane = s.plane();
    let w = s.width;
    let kk = s.kernel * s.kernel;
    let mut grad_in = vec![0.0; s.in_ch * plane];
    for o in 0..s.out_ch {
        let g_plane = &grad_out[o * plane..(o + 1) * plane];
        for c in 0..s.in_ch {
            let gi_plane = &mut grad_in[c * plane..(c + 1) * plane];
            for (ky, kx, dy, dx) in s.offsets() {
                let wt = weight[(o * s.in_ch + c) * kk + ky * s.kernel + kx];
                let (y0, y1) = ConvShape::span(s.height, dy);
                let (x0, x1) = ConvShape::span(w, dx);
                for y in y0..y1 {
                    let dst = ((y as isize + dy) as usize) * w;
                    let dx0 = (x0 as isize + dx) as usize;
                    let grow = &g_plane[y * w + x0..y * w + x1];
                    let drow = &mut gi_plane[dst + dx0..dst + dx0 + (x1 - x0)];
                    for (d, g) in drow.iter_mut().zip(grow) {
                        *d += wt * g;
                    }
                }
            }
        }
    }
    grad_in
}

pub(crate) fn backward_params(s: &ConvShape, grad_out: &[f64], input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let plane = s.plane();
    let w = s.width;
    let kk = s.kernel * s.kernel;
    let mut grad_w = vec![0.0; s.out_ch * s.in_ch * kk];
    let mut grad_b = vec![0.0; s.out_ch];
    for o in 0..s.out_ch {
        let g_plane = &grad_out[o * plane..(o + 1) * plane];
        grad_b[o] = g_plane.iter().sum();
        for c in 0..s.in_ch {
            let in_plane = &input[c * plane..(c + 1) * plane];
            for (ky, kx, dy, dx) in s.offsets() {
                let (y0, y1) = ConvShape::span(s.height, dy);
                let (x0, x1) = ConvShape::span(w, dx);
                let mut acc = 0.0;
                for y in y0..y1 {
                    let src = ((y as isize + dy) as usize) * w;
                    let sx0 = (x0 as isize + dx) as usize;
                    let grow = &g_plane[y * w + x0..y * w + x1];
                    let irow = &in_plane[src + sx0..src + sx0 + (x1 - x0)];
                    acc += grow.iter().zip(irow).map(|(g, v)| g * v).sum::<f64>();
                }
                grad_w[(o * s.in_ch + c) * kk + ky * s.kernel + kx] = acc;
            }
        }
    }
    (grad_w, grad_b)
}
