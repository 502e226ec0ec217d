//! Small row-major matrices and the one-axis contraction kernel used for sum
//! factorization on `n1 × n2 × n3` tensors stored with the first index fastest.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// A single row vector.
    pub fn row(values: Vec<f64>) -> Self {
        let cols = values.len();
        Self::from_rows(1, cols, values)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && self
                .data
                .iter()
                .enumerate()
                .all(|(k, &v)| v == if k / self.cols == k % self.cols { 1.0 } else { 0.0 })
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Shape of a tensor after replacing the extent along `axis`.
pub fn with_extent(dims: [usize; 3], axis: usize, n: usize) -> [usize; 3] {
    let mut d = dims;
    d[axis] = n;
    d
}

pub fn tensor_len(dims: [usize; 3]) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn contract(
    a: &[f64],
    row_stride: usize,
    col_stride: usize,
    nout: usize,
    nin: usize,
    axis: usize,
    dims: [usize; 3],
    input: &[f64],
    out: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(dims[axis], nin);
    let pre: usize = dims[..axis].iter().product();
    let post: usize = dims[axis + 1..].iter().product();
    debug_assert_eq!(input.len(), pre * nin * post);
    debug_assert_eq!(out.len(), pre * nout * post);
    if !accumulate {
        out.fill(0.0);
    }
    if pre == 1 {
        for q in 0..post {
            let src = &input[q * nin..(q + 1) * nin];
            for r in 0..nout {
                let mut s = 0.0;
                for (c, x) in src.iter().enumerate() {
                    s += a[r * row_stride + c * col_stride] * x;
                }
                out[q * nout + r] += s;
            }
        }
        return;
    }
    for q in 0..post {
        for r in 0..nout {
            let o = (q * nout + r) * pre;
            for c in 0..nin {
                let coef = a[r * row_stride + c * col_stride];
                let i = (q * nin + c) * pre;
                let src = &input[i..i + pre];
                let dst = &mut out[o..o + pre];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += coef * s;
                }
            }
        }
    }
}

/// `out = A ×_axis input`: applies `a` (rows × cols) along `axis`.
pub fn apply_axis(a: &Dense, axis: usize, dims: [usize; 3], input: &[f64], out: &mut [f64]) {
    contract(&a.data, a.cols, 1, a.rows, a.cols, axis, dims, input, out, false);
}

/// Same as [`apply_axis`] with `a` transposed.
pub fn apply_axis_t(a: &Dense, axis: usize, dims: [usize; 3], input: &[f64], out: &mut [f64]) {
    contract(&a.data, 1, a.cols, a.cols, a.rows, axis, dims, input, out, false);
}

/// Accumulating variant of [`apply_axis_t`].
pub fn apply_axis_t_add(a: &Dense, axis: usize, dims: [usize; 3], input: &[f64], out: &mut [f64]) {
    contract(&a.data, 1, a.cols, a.cols, a.rows, axis, dims, input, out, true);
}

/// Accumulating variant of [`apply_axis`].
pub fn apply_axis_add(a: &Dense, axis: usize, dims: [usize; 3], input: &[f64], out: &mut [f64]) {
    contract(&a.data, a.cols, 1, a.rows, a.cols, axis, dims, input, out, true);
}

/// Applies a Kronecker product of per-axis factors (`factors[k]` acts on axis
/// `k`), or its transpose, to a tensor of extent `dims_in`. Returns the output
/// extent. `tmp` holds intermediate tensors between calls.
pub fn apply_kron(
    factors: &[Dense; 3],
    transpose: bool,
    dims_in: [usize; 3],
    input: &[f64],
    out: &mut [f64],
    tmp: &mut [Vec<f64>; 2],
) -> [usize; 3] {
    let mut dims = dims_in;
    let [a, b] = tmp;
    // shrinking contractions first keeps the intermediate tensors small
    let growth = |k: usize| {
        let f = &factors[k];
        let (o, i) = if transpose { (f.cols, f.rows) } else { (f.rows, f.cols) };
        o as f64 / i as f64
    };
    let mut buf = [0usize; 3];
    let mut len = 0;
    for k in 0..3 {
        if !factors[k].is_identity() {
            buf[len] = k;
            len += 1;
        }
    }
    let order = &mut buf[..len];
    order.sort_unstable_by(|&x, &y| growth(x).total_cmp(&growth(y)));
    if order.is_empty() {
        out.copy_from_slice(input);
        return dims;
    }
    for (step, &axis) in order.iter().enumerate() {
        let f = &factors[axis];
        let n_out = if transpose { f.cols } else { f.rows };
        let new_dims = with_extent(dims, axis, n_out);
        b.resize(tensor_len(new_dims), 0.0);
        let src: &[f64] = if step == 0 { input } else { a };
        if transpose {
            apply_axis_t(f, axis, dims, src, b);
        } else {
            apply_axis(f, axis, dims, src, b);
        }
        std::mem::swap(a, b);
        dims = new_dims;
    }
    out.copy_from_slice(&a[..tensor_len(dims)]);
    dims
}
