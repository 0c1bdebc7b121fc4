//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the library's numerics.
#![allow(dead_code)]

use distcomp::model::LtiPlant;
use distcomp::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `e^{A}` by scaling and squaring with a degree-20 Taylor series.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scaled = a / 2f64.powi(s);
    let mut term = Matrix::identity(n, n);
    let mut sum = Matrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Characteristic polynomial `det(sI − A)` by the Faddeev–LeVerrier
/// recursion, monic, coefficients lowest degree first.
pub fn charpoly(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = Matrix::zeros(n, n);
    for k in 1..=n {
        m = a * &m + Matrix::identity(n, n) * c[n - k + 1];
        c[n - k] = -(a * &m).trace() / k as f64;
    }
    c
}

/// Monic polynomial with the given real roots and complex pairs `(re, im)`.
pub fn poly_from_roots(real: &[f64], pairs: &[(f64, f64)]) -> Vec<f64> {
    let mut p = vec![1.0];
    let mul = |p: &Vec<f64>, f: &[f64]| {
        let mut out = vec![0.0; p.len() + f.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for &r in real {
        p = mul(&p, &[-r, 1.0]);
    }
    for &(re, im) in pairs {
        p = mul(&p, &[re * re + im * im, -2.0 * re, 1.0]);
    }
    p
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random Hurwitz matrix: a random matrix shifted left of its Gershgorin discs.
pub fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut a = random_matrix(rng, n, n);
    let radius = (0..n).map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
    for i in 0..n {
        a[(i, i)] -= radius + rng.random_range(0.2..1.0);
    }
    a
}

/// Random plant passing the library's structural preconditions.
pub fn random_plant(rng: &mut ChaCha8Rng, n: usize, n_in: usize, n_out: usize, n_dist: usize) -> LtiPlant {
    loop {
        let a = random_hurwitz(rng, n);
        let b = random_matrix(rng, n, n_in);
        let c = random_matrix(rng, n_out, n);
        let e = random_matrix(rng, n, n_dist);
        let x0 = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if let Ok(p) = LtiPlant::new(a, b, c, e, x0) {
            return p;
        }
    }
}

/// Companion-form Hurwitz filter `(G, L)` of order `q` with poles `−1, −2, …`.
pub fn companion_filter(q: usize, gain: f64) -> (Matrix, Vector) {
    let reals: Vec<f64> = (1..=q).map(|k| -(k as f64)).collect();
    let p = poly_from_roots(&reals, &[]);
    let mut g = Matrix::zeros(q, q);
    for i in 0..q - 1 {
        g[(i, i + 1)] = 1.0;
    }
    for j in 0..q {
        g[(q - 1, j)] = -p[j];
    }
    let mut l = Vector::zeros(q);
    l[q - 1] = gain;
    (g, l)
}
