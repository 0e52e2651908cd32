//! Brute-force oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use modelprox::baseline::QpSubproblem;
use modelprox::{Rng, Vector};

/// Minimum of a 1-D function on `[lo, hi]`: a uniform grid of `coarse`
/// points, then a few zoom rounds around each of the best local minima.
pub fn grid_min_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, coarse: usize) -> (f64, f64) {
    let h = (hi - lo) / (coarse - 1) as f64;
    let vals: Vec<f64> = (0..coarse).map(|i| f(lo + i as f64 * h)).collect();
    let mut minima: Vec<usize> = (0..coarse)
        .filter(|&i| (i == 0 || vals[i] <= vals[i - 1]) && (i + 1 == coarse || vals[i] <= vals[i + 1]))
        .collect();
    minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    minima.truncate(4);
    let mut best = (lo, f64::INFINITY);
    for &i in &minima {
        let mut center = lo + i as f64 * h;
        let mut width = 2.0 * h;
        let mut local = (center, vals[i]);
        for _ in 0..6 {
            let pts = 2001;
            let step = 2.0 * width / (pts - 1) as f64;
            for j in 0..pts {
                let t = (center - width + j as f64 * step).clamp(lo, hi);
                let v = f(t);
                if v < local.1 {
                    local = (t, v);
                }
            }
            center = local.0;
            width = 4.0 * step;
        }
        if local.1 < best.1 {
            best = local;
        }
    }
    best
}

/// Minimum of a 2-D function on a square: a `k x k` grid, then zoom rounds
/// around the best few grid points.
pub fn grid_min_2d(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, k: usize) -> ((f64, f64), f64) {
    let h = (hi - lo) / (k - 1) as f64;
    let mut cells: Vec<((f64, f64), f64)> = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let (x, y) = (lo + i as f64 * h, lo + j as f64 * h);
            cells.push(((x, y), f(x, y)));
        }
    }
    let coarse_best = cells.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    cells.sort_by(|a, b| a.1.total_cmp(&b.1));
    cells.truncate(8);
    let mut best = ((0.0, 0.0), coarse_best);
    for &(start, v0) in &cells {
        let mut local = (start, v0);
        let mut width = 2.0 * h;
        // halve the window each round unless the best point sits on its
        // edge, so the search can walk along narrow kink valleys
        for _ in 0..80 {
            let pts = 41;
            let step = 2.0 * width / (pts - 1) as f64;
            let (cx, cy) = local.0;
            let mut edge = false;
            for i in 0..pts {
                for j in 0..pts {
                    let x = cx - width + i as f64 * step;
                    let y = cy - width + j as f64 * step;
                    let v = f(x, y);
                    if v < local.1 {
                        local = ((x, y), v);
                        edge = i == 0 || j == 0 || i == pts - 1 || j == pts - 1;
                    }
                }
            }
            if !edge {
                width *= 0.5;
            }
        }
        if local.1 < best.1 {
            best = local;
        }
    }
    best
}

/// `|b + <a, y>| + ||y - x0||^2 / 2`.
pub fn canonical_objective(a: &Vector, b: f64, x0: &Vector, y: &Vector) -> f64 {
    (b + a.dot(y)).abs() + 0.5 * (y - x0).norm_squared()
}

/// Grid minimum of the canonical subproblem along `x0 + t a / ||a||`.
/// Components orthogonal to `a` only add to the proximal term, so the
/// minimizer lies on this line.
pub fn canonical_oracle(a: &Vector, b: f64, x0: &Vector) -> f64 {
    let na = a.norm();
    let c = b + a.dot(x0);
    // y = x0 + t a / ||a||
    let f = |t: f64| (c + t * na).abs() + 0.5 * t * t;
    let r = c.abs() / na + na + 1.0;
    grid_min_1d(f, -r, r, 100_001).1
}

pub fn scalar_objective(u0: f64, b: f64, p: f64, w: f64) -> f64 {
    ((u0 + w).powi(2) - b).abs() + 0.5 * p * w * w
}

/// Grid argmin and minimum of `scalar_objective` over a range that must
/// contain the minimizer (`psi(w) >= p w^2 / 2` and `psi(0)` bound it).
pub fn scalar_oracle(u0: f64, b: f64, p: f64) -> (f64, f64) {
    let r = (2.0 * scalar_objective(u0, b, p, 0.0) / p).sqrt().max(10.0) + 1.0;
    grid_min_1d(|w| scalar_objective(u0, b, p, w), -r, r, 100_001)
}

pub fn random_vector(rng: &mut Rng, d: usize, scale: f64) -> Vector {
    Vector::from_fn(d, |_, _| scale * rng.gaussian())
}

/// Random `(u0, b, penalty)` triple; every tenth has `b < 0` and every
/// tenth (offset by five) has zero residual.
pub fn scalar_triple(rng: &mut Rng, i: usize) -> (f64, f64, f64) {
    let u0 = 6.0 * rng.uniform() - 3.0;
    let p = 10f64.powf(4.0 * rng.uniform() - 2.0);
    let b = match i % 10 {
        0 => -3.0 * rng.uniform() - 1e-3,
        5 => u0 * u0,
        _ => 9.0 * rng.uniform(),
    };
    (u0, b, p)
}

/// Random `d = 2` ADMM subproblem whose minimizer lies in `[-1, 1]^2`:
/// `||z*|| <= alpha max_i ||C_i||` and `alpha` is chosen below `1 / max_i ||C_i||`.
pub fn small_qp(rng: &mut Rng, n: usize) -> QpSubproblem {
    let c = nalgebra::DMatrix::from_fn(n, 2, |_, _| rng.gaussian());
    let r = nalgebra::DVector::from_fn(n, |_, _| rng.gaussian());
    let max_row = (0..n).map(|i| c.row(i).norm()).fold(0.0, f64::max);
    let alpha = (0.1 + 0.9 * rng.uniform()) / max_row;
    QpSubproblem::new(c, r, Vector::zeros(2), alpha).unwrap()
}

pub fn qp_oracle(sub: &QpSubproblem) -> f64 {
    grid_min_2d(|x, y| sub.objective(&Vector::from_vec(vec![x, y])), -2.0, 2.0, 400).1
}
