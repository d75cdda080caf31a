//! Small dense-algebra helpers. Reduction order is fixed, so results are
//! bit-reproducible for a given build.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// out = W x + b, W row-major [rows, cols].
pub fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let cols = x.len();
    out.clear();
    out.extend(
        w.chunks_exact(cols)
            .zip(b)
            .map(|(row, bias)| dot(row, x) + bias),
    );
}

/// Backward pass of `affine`: accumulates dW += dy x^T and db += dy, and
/// optionally writes dx = W^T dy.
pub fn affine_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut Vec<f64>>,
) {
    let cols = x.len();
    for ((g, gw), dbi) in dy.iter().zip(dw.chunks_exact_mut(cols)).zip(db.iter_mut()) {
        if *g != 0.0 {
            axpy(*g, x, gw);
            *dbi += g;
        }
    }
    if let Some(dx) = dx {
        dx.clear();
        dx.resize(cols, 0.0);
        for (g, row) in dy.iter().zip(w.chunks_exact(cols)) {
            if *g != 0.0 {
                axpy(*g, row, dx);
            }
        }
    }
}

pub fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes gradient entries where the forward pre-activation was not positive.
pub fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, z) in grad.iter_mut().zip(pre) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
}
