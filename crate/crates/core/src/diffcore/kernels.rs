//! Dense kernels shared by the tape and the tape-free inference path, so
//! both produce bit-identical values.

/// `out[m×n] = a[m×k] · b[k×n]`.
///
/// Zero entries of `a` are skipped; pixel inputs are mostly background and
/// this makes the first encoder layer several times cheaper.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out[k×n] += aᵀ · g` for `a[m×k]`, `g[m×n]`.
pub fn matmul_at_b_acc(a: &[f64], g: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += aip * gv;
            }
        }
    }
}

/// `out[m×k] += g · bᵀ` for `g[m×n]`, `b[k×n]`.
pub fn matmul_a_bt_acc(g: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    let bt = transpose(b, k, n);
    for i in 0..m {
        let orow = &mut out[i * k..(i + 1) * k];
        for j in 0..n {
            let gij = g[i * n + j];
            if gij == 0.0 {
                continue;
            }
            let btrow = &bt[j * k..(j + 1) * k];
            for (o, &bv) in orow.iter_mut().zip(btrow) {
                *o += gij * bv;
            }
        }
    }
}

pub fn transpose(a: &[f64], rows: usize, cols: usize) -> alloc::vec::Vec<f64> {
    let mut t = alloc::vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// Adds a bias row to every row of `x[m×n]`.
pub fn add_row(x: &mut [f64], bias: &[f64]) {
    let n = bias.len();
    for row in x.chunks_exact_mut(n) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}
