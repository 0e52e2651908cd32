//! Seeded sampling.
//!
//! Streams come from ChaCha8 keyed by a 64-bit seed. Child streams are keyed by
//! `derive_seed(master, index)`, a SplitMix64 mix of the pair, so every
//! replication or grid cell owns an independent, reproducible stream no
//! matter which thread runs it. Gaussians use the polar-free Box-Muller
//! transform with a cached spare; uniforms take the top 53 bits of a draw.

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of child stream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)))
}

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent child stream `index` of `master`.
    pub fn derive(master: u64, index: u64) -> Self {
        Rng::new(derive_seed(master, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform index in `[0, n)` by multiply-shift. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Uniform point on the unit sphere in `R^d` (normalized Gaussian).
pub fn sample_unit_sphere(d: usize, rng: &mut Rng) -> Result<Vector> {
    if d == 0 {
        return Err(Error::InvalidDimension("sphere dimension must be positive".into()));
    }
    loop {
        let v = Vector::from_iterator(d, (0..d).map(|_| rng.gaussian()));
        let norm = v.norm();
        if norm > 0.0 && norm.is_finite() {
            return Ok(v / norm);
        }
    }
}

/// Haar-distributed `n x d` matrix with orthonormal columns.
///
/// QR of an i.i.d. Gaussian matrix (drawn row by row), then each column of Q
/// is multiplied by the sign of the matching diagonal entry of R.
pub fn sample_orthogonal(n: usize, d: usize, rng: &mut Rng) -> Result<Matrix> {
    if d == 0 || n < d {
        return Err(Error::InvalidShape(format!(
            "orthogonal sample needs n >= d >= 1, got n = {n}, d = {d}"
        )));
    }
    let gauss = DMatrix::from_row_iterator(n, d, (0..n * d).map(|_| rng.gaussian()));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(Matrix::from_dmatrix(&q))
}

/// Laplace quantile function at `u in (0, 1)`.
pub fn laplace_quantile(u: f64, scale: f64) -> f64 {
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

/// Zero-mean Laplace draw by inverse CDF.
pub fn sample_laplace(scale: f64, rng: &mut Rng) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("laplace scale must be positive, got {scale}")));
    }
    Ok(laplace_quantile(rng.uniform_open(), scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_ne!(derive_seed(42, 0), derive_seed(43, 0));
    }

    #[test]
    fn sphere_in_one_dimension_is_a_sign() {
        for seed in 0..20 {
            let v = sample_unit_sphere(1, &mut Rng::new(seed)).unwrap();
            assert!(v[0] == 1.0 || v[0] == -1.0);
        }
    }

    #[test]
    fn sphere_has_unit_norm() {
        let v = sample_unit_sphere(50, &mut Rng::new(7)).unwrap();
        assert!((v.norm() - 1.0).abs() <= 1e-12);
        assert!(matches!(
            sample_unit_sphere(0, &mut Rng::new(7)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn sphere_coordinates_are_centered() {
        let mut rng = Rng::new(11);
        let mut sum = [0.0; 3];
        let draws = 10_000;
        for _ in 0..draws {
            let v = sample_unit_sphere(3, &mut rng).unwrap();
            for j in 0..3 {
                sum[j] += v[j];
            }
        }
        for s in sum {
            assert!((s / draws as f64).abs() < 0.05);
        }
    }

    #[test]
    fn orthogonal_columns() {
        let u = sample_orthogonal(500, 50, &mut Rng::new(3)).unwrap();
        let m = u.to_dmatrix();
        let gram = m.transpose() * &m;
        let err = (gram - DMatrix::<f64>::identity(50, 50)).amax();
        assert!(err <= 1e-10, "max |U^T U - I| = {err}");
        for j in 0..50 {
            assert!((m.column(j).norm() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn orthogonal_edge_shapes() {
        let u = sample_orthogonal(1, 1, &mut Rng::new(5)).unwrap();
        assert!((u.get(0, 0).abs() - 1.0).abs() < 1e-15);
        let a = sample_orthogonal(4, 2, &mut Rng::new(1)).unwrap();
        let b = sample_orthogonal(4, 2, &mut Rng::new(2)).unwrap();
        assert_ne!(a, b);
        assert!(matches!(
            sample_orthogonal(2, 3, &mut Rng::new(1)),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn laplace_moments() {
        let mut rng = Rng::new(2024);
        let draws = 100_000;
        let xs: Vec<f64> = (0..draws).map(|_| sample_laplace(1.0, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 2.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn laplace_median_and_errors() {
        assert_eq!(laplace_quantile(0.5, 1.0), 0.0);
        assert!(sample_laplace(0.0, &mut Rng::new(1)).is_err());
        assert!(sample_laplace(-1.0, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = Rng::new(9);
        let mut hits = [0usize; 7];
        for _ in 0..7_000 {
            hits[rng.below(7)] += 1;
        }
        assert!(hits.iter().all(|&h| h > 800));
    }
}
