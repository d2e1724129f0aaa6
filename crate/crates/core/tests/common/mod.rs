//! Reference computations that share no code with the library.

#![allow(dead_code)]

/// Classical RK4 for `-y'' + q y = lambda y` on `[0, 1]` from `y(0) = y0`,
/// `y'(0) = dy0`. Returns `(y(1), y'(1))`.
pub fn rk4_edge(q: &dyn Fn(f64) -> f64, lambda: f64, y0: f64, dy0: f64, steps: usize) -> (f64, f64) {
    let h = 1.0 / steps as f64;
    let (mut y, mut p) = (y0, dy0);
    let f = |z: f64, y: f64| (q(z) - lambda) * y;
    for i in 0..steps {
        let z = i as f64 * h;
        let (k1y, k1p) = (p, f(z, y));
        let (k2y, k2p) = (p + 0.5 * h * k1p, f(z + 0.5 * h, y + 0.5 * h * k1y));
        let (k3y, k3p) = (p + 0.5 * h * k2p, f(z + 0.5 * h, y + 0.5 * h * k2y));
        let (k4y, k4p) = (p + h * k3p, f(z + h, y + h * k3y));
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    }
    (y, p)
}

/// `(S(1), S'(1), C(1), C'(1))` by RK4 with Richardson extrapolation.
pub fn fundamental(q: &dyn Fn(f64) -> f64, lambda: f64) -> [f64; 4] {
    let steps = 4000;
    let run = |n| {
        let s = rk4_edge(q, lambda, 0.0, 1.0, n);
        let c = rk4_edge(q, lambda, 1.0, 0.0, n);
        [s.0, s.1, c.0, c.1]
    };
    let (a, b) = (run(steps), run(2 * steps));
    std::array::from_fn(|i| b[i] + (b[i] - a[i]) / 15.0)
}

/// Number of eigenvalues below `x` of the tridiagonal matrix with diagonal
/// `d` and constant off-diagonal `e`, from the signs of the LDL^T pivots.
fn sturm_count(d: &[f64], e: f64, x: f64) -> usize {
    let mut count = 0;
    let mut piv = d[0] - x;
    if piv < 0.0 {
        count += 1;
    }
    for &di in &d[1..] {
        let p = if piv == 0.0 { f64::EPSILON } else { piv };
        piv = di - x - e * e / p;
        if piv < 0.0 {
            count += 1;
        }
    }
    count
}

fn fd_eigenvalues(q: &dyn Fn(f64) -> f64, points: usize, count: usize) -> Vec<f64> {
    let h = 1.0 / (points + 1) as f64;
    let d: Vec<f64> = (1..=points).map(|i| 2.0 / (h * h) + q(i as f64 * h)).collect();
    let e = -1.0 / (h * h);
    let qmax = (0..=points + 1).map(|i| q(i as f64 * h).abs()).fold(0.0, f64::max);
    (0..count)
        .map(|j| {
            let (mut lo, mut hi) = (-qmax - 1.0, 4.0 / (h * h) + qmax + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sturm_count(&d, e, mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-13 * hi.abs().max(1.0) {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// First `count` Dirichlet eigenvalues from the 2000-point three-point
/// discretization, Richardson-extrapolated against 4000 points.
pub fn dense_dirichlet_eigenvalues(q: &dyn Fn(f64) -> f64, count: usize) -> Vec<f64> {
    let coarse = fd_eigenvalues(q, 1999, count);
    let fine = fd_eigenvalues(q, 3999, count);
    coarse.iter().zip(&fine).map(|(c, f)| f + (f - c) / 3.0).collect()
}

/// The vertex map of the single-vertex region with zero potentials.
pub fn single_vertex_lambda_v(lambda: f64) -> f64 {
    -1.0 / (4.0 * lambda.sqrt().cos())
}
