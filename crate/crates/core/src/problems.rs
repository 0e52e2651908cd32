//! Robust phase retrieval instances.
//!
//! The loss is `f(x) = (1/n) sum_i |<a_i, x>^2 - b_i|`, i.e. `h(t) = |t|`
//! composed with the smooth residual `c_i(x) = <a_i, x>^2 - b_i`. The sample
//! space is the row index set `{0, .., n-1}`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::models::Sample;
use crate::rng::{sample_laplace, sample_orthogonal, sample_unit_sphere, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Noiseless,
    /// Additive zero-mean Laplace noise with the given scale.
    Laplace { scale: f64 },
    /// Each observation is independently replaced, with probability
    /// `fraction`, by a `Normal(0, variance)` draw.
    Corrupted { fraction: f64, variance: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Noiseless => Ok(()),
            NoiseSpec::Laplace { scale } if scale > 0.0 && scale.is_finite() => Ok(()),
            NoiseSpec::Corrupted { fraction, variance }
                if (0.0..=1.0).contains(&fraction) && variance > 0.0 && variance.is_finite() =>
            {
                Ok(())
            }
            other => Err(Error::InvalidParameter(format!("bad noise spec {other}"))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NoiseSpec::Noiseless => "none",
            NoiseSpec::Laplace { .. } => "laplace",
            NoiseSpec::Corrupted { .. } => "corrupt",
        }
    }

    /// Parameter column of `instance.meta.csv`.
    pub fn param_string(&self) -> String {
        match self {
            NoiseSpec::Noiseless => String::new(),
            NoiseSpec::Laplace { scale } => format!("{scale}"),
            NoiseSpec::Corrupted { fraction, variance } => format!("{fraction}:{variance}"),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Noiseless => write!(f, "none"),
            NoiseSpec::Laplace { scale } => write!(f, "laplace:{scale}"),
            NoiseSpec::Corrupted { fraction, variance } => write!(f, "corrupt:{fraction}:{variance}"),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    /// Accepts `none`, `laplace:SIGMA` and `corrupt:P:VAR`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number {t:?} in noise spec {s:?}")))
        };
        let spec = match parts.as_slice() {
            ["none"] | ["noiseless"] => NoiseSpec::Noiseless,
            ["laplace", scale] => NoiseSpec::Laplace { scale: num(scale)? },
            ["corrupt", p, var] => NoiseSpec::Corrupted {
                fraction: num(p)?,
                variance: num(var)?,
            },
            _ => return Err(Error::InvalidParameter(format!("unknown noise spec {s:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// `A = U R` with `R` a `d x d` diagonal; controls the condition number.
    Ur,
    /// `A = R U` with `R` an `n x n` diagonal; makes the row norms irregular.
    Ru,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::Ur => "ur",
            DesignKind::Ru => "ru",
        })
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ur" => Ok(DesignKind::Ur),
            "ru" => Ok(DesignKind::Ru),
            _ => Err(Error::InvalidParameter(format!("unknown design {s:?} (expected ur or ru)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub kappa: f64,
}

impl DesignSpec {
    pub fn new(kind: DesignKind, kappa: f64) -> Result<Self> {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be >= 1, got {kappa}")));
        }
        Ok(DesignSpec { kind, kappa })
    }

    pub fn well_conditioned() -> Self {
        DesignSpec {
            kind: DesignKind::Ur,
            kappa: 1.0,
        }
    }
}

/// `m` values linearly spaced in `[1, kappa]`; a single value is `kappa`.
pub fn linear_spacing(m: usize, kappa: f64) -> Vec<f64> {
    if m == 1 {
        return vec![kappa];
    }
    (0..m)
        .map(|j| 1.0 + (kappa - 1.0) * j as f64 / (m - 1) as f64)
        .collect()
}

#[derive(Debug, Clone)]
pub struct PhaseRetrievalInstance {
    a: Matrix,
    b: Vec<f64>,
    x_star: Vector,
    design: DesignSpec,
    noise: NoiseSpec,
    seed: u64,
}

impl PhaseRetrievalInstance {
    /// Draws, in order: the planted signal on the sphere, the orthonormal
    /// factor `U`, then per observation the noise.
    pub fn generate(n: usize, d: usize, design: DesignSpec, noise: NoiseSpec, seed: u64) -> Result<Self> {
        if d == 0 || n < d {
            return Err(Error::InvalidShape(format!("need n >= d >= 1, got n = {n}, d = {d}")));
        }
        DesignSpec::new(design.kind, design.kappa)?;
        noise.validate()?;

        let mut rng = Rng::new(seed);
        let x_star = sample_unit_sphere(d, &mut rng)?;
        let mut a = sample_orthogonal(n, d, &mut rng)?;
        match design.kind {
            DesignKind::Ur => {
                for (j, r) in linear_spacing(d, design.kappa).into_iter().enumerate() {
                    a.scale_col(j, r);
                }
            }
            DesignKind::Ru => {
                for (i, r) in linear_spacing(n, design.kappa).into_iter().enumerate() {
                    a.scale_row(i, r);
                }
            }
        }

        let mut b: Vec<f64> = a.mul_vec(&x_star).iter().map(|v| v * v).collect();
        match noise {
            NoiseSpec::Noiseless => {}
            NoiseSpec::Laplace { scale } => {
                for bi in &mut b {
                    *bi += sample_laplace(scale, &mut rng)?;
                }
            }
            NoiseSpec::Corrupted { fraction, variance } => {
                let sd = variance.sqrt();
                for bi in &mut b {
                    let u = rng.uniform();
                    let replacement = sd * rng.gaussian();
                    if u < fraction {
                        *bi = replacement;
                    }
                }
            }
        }

        Ok(PhaseRetrievalInstance {
            a,
            b,
            x_star,
            design,
            noise,
            seed,
        })
    }

    /// Instance from explicit data; `x_star` is informational.
    pub fn from_parts(a: Matrix, b: Vec<f64>, x_star: Vector) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidShape("empty design matrix".into()));
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if x_star.len() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.ncols(),
                got: x_star.len(),
            });
        }
        if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("instance data"));
        }
        Ok(PhaseRetrievalInstance {
            a,
            b,
            x_star,
            design: DesignSpec::well_conditioned(),
            noise: NoiseSpec::Noiseless,
            seed: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn design_matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn observations(&self) -> &[f64] {
        &self.b
    }

    pub fn x_star(&self) -> &Vector {
        &self.x_star
    }

    pub fn design(&self) -> DesignSpec {
        self.design
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample(&self, i: usize) -> Result<Sample<'_>> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(Sample::new(self.a.row(i), self.b[i]))
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `(1/n) sum_i |<a_i, x>^2 - b_i|`.
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &Vector) -> f64 {
        let xs = x.as_slice();
        let total: f64 = (0..self.n())
            .map(|i| {
                let t = crate::linalg::dot(self.a.row_slice(i), xs);
                (t * t - self.b[i]).abs()
            })
            .sum();
        total / self.n() as f64
    }

    /// Residual `c_i(x)` and its gradient `2 <a_i, x> a_i`.
    pub fn residual_and_grad(&self, i: usize, x: &Vector) -> Result<(f64, Vector)> {
        let s = self.sample(i)?;
        self.check_dim(x)?;
        Ok((s.residual(x), s.residual_grad(x)))
    }

    /// `sign(c_i(x)) * grad c_i(x)`, with `sign(0) = 0`.
    pub fn subgradient(&self, i: usize, x: &Vector) -> Result<Vector> {
        let s = self.sample(i)?;
        self.check_dim(x)?;
        Ok(s.subgradient(x))
    }

    /// `2 ||a_i||^2`: `h` is 1-Lipschitz and `grad c_i` is `2 ||a_i||^2`-Lipschitz.
    pub fn weak_convexity_constant(&self, i: usize) -> Result<f64> {
        Ok(self.sample(i)?.weak_convexity_constant())
    }

    /// Largest per-sample weak convexity constant.
    pub fn max_weak_convexity_constant(&self) -> f64 {
        (0..self.n())
            .map(|i| 2.0 * self.a.row(i).norm_squared())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn toy() -> PhaseRetrievalInstance {
        PhaseRetrievalInstance::from_parts(
            Matrix::from_rows(&[vec![1.0, 0.0]]),
            vec![4.0],
            Vector::from_vec(vec![2.0, 0.0]),
        )
        .unwrap()
    }

    fn singular_values(inst: &PhaseRetrievalInstance) -> Vec<f64> {
        let mut sv: Vec<f64> = inst.design_matrix().to_dmatrix().singular_values().iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        sv
    }

    #[test]
    fn kappa_one_is_orthonormal() {
        let inst = PhaseRetrievalInstance::generate(500, 50, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 1)
            .unwrap();
        for s in singular_values(&inst) {
            assert!((s - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn ur_condition_number_matches_kappa() {
        let design = DesignSpec::new(DesignKind::Ur, 10.0).unwrap();
        let inst = PhaseRetrievalInstance::generate(500, 50, design, NoiseSpec::Noiseless, 2).unwrap();
        let sv = singular_values(&inst);
        let ratio = sv.last().unwrap() / sv[0];
        assert!((ratio - 10.0).abs() <= 1e-8, "ratio {ratio}");
    }

    #[test]
    fn ru_rows_are_scaled_orthonormal_rows() {
        let design = DesignSpec::new(DesignKind::Ru, 10.0).unwrap();
        let inst = PhaseRetrievalInstance::generate(60, 8, design, NoiseSpec::Noiseless, 3).unwrap();
        let scales = linear_spacing(60, 10.0);
        let mut u = inst.design_matrix().clone();
        for (i, r) in scales.iter().enumerate() {
            u.scale_row(i, 1.0 / r);
        }
        let u = u.to_dmatrix();
        let gram = u.transpose() * &u;
        assert!((gram - nalgebra::DMatrix::<f64>::identity(8, 8)).amax() < 1e-12);
    }

    #[test]
    fn planted_signal_interpolates() {
        for seed in 0..5 {
            let inst =
                PhaseRetrievalInstance::generate(40, 6, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, seed)
                    .unwrap();
            assert!(inst.objective(inst.x_star()).unwrap() <= 1e-12);
            let neg = -inst.x_star();
            assert!(inst.objective(&neg).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn corruption_replaces_some_observations() {
        let noise = NoiseSpec::Corrupted {
            fraction: 0.1,
            variance: 25.0,
        };
        let inst = PhaseRetrievalInstance::generate(500, 10, DesignSpec::well_conditioned(), noise, 4).unwrap();
        let clean: Vec<f64> = inst.design_matrix().mul_vec(inst.x_star()).iter().map(|v| v * v).collect();
        let changed = clean.iter().zip(inst.observations()).filter(|(c, b)| c != b).count();
        assert!((20..=80).contains(&changed), "changed {changed}");
    }

    #[test]
    fn generation_errors() {
        let r = PhaseRetrievalInstance::generate(3, 5, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 0);
        assert!(matches!(r, Err(Error::InvalidShape(_))));
        assert!(DesignSpec::new(DesignKind::Ur, 0.5).is_err());
        assert!("corrupt:1.5:25".parse::<NoiseSpec>().is_err());
        assert!("laplace:0".parse::<NoiseSpec>().is_err());
        assert_eq!("laplace:1".parse::<NoiseSpec>().unwrap(), NoiseSpec::Laplace { scale: 1.0 });
    }

    #[test]
    fn spacing_edges() {
        assert_eq!(linear_spacing(1, 7.0), vec![7.0]);
        assert_eq!(linear_spacing(3, 3.0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn toy_oracles() {
        let inst = toy();
        let x = Vector::from_vec(vec![3.0, 0.0]);
        assert_eq!(inst.objective(&x).unwrap(), 5.0);
        let (c, g) = inst.residual_and_grad(0, &x).unwrap();
        assert_eq!(c, 5.0);
        assert_eq!(g.as_slice(), &[6.0, 0.0]);
        assert_eq!(inst.subgradient(0, &x).unwrap().as_slice(), &[6.0, 0.0]);
        let kink = Vector::from_vec(vec![2.0, 0.0]);
        assert_eq!(inst.subgradient(0, &kink).unwrap().as_slice(), &[0.0, 0.0]);
        let below = Vector::from_vec(vec![1.0, 0.0]);
        assert_eq!(inst.subgradient(0, &below).unwrap().as_slice(), &[-2.0, 0.0]);
        let (c0, g0) = inst.residual_and_grad(0, &Vector::zeros(2)).unwrap();
        assert_eq!(c0, -4.0);
        assert_eq!(g0.norm(), 0.0);
        assert_eq!(inst.weak_convexity_constant(0).unwrap(), 2.0);
    }

    #[test]
    fn oracle_errors() {
        let inst = toy();
        assert!(matches!(
            inst.residual_and_grad(1, &Vector::zeros(2)),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(inst.objective(&Vector::zeros(3)), Err(Error::DimensionMismatch { .. })));
        let wide = PhaseRetrievalInstance::from_parts(
            Matrix::from_rows(&[vec![3.0, 4.0]]),
            vec![1.0],
            Vector::zeros(2),
        )
        .unwrap();
        assert_eq!(wide.weak_convexity_constant(0).unwrap(), 50.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let inst = PhaseRetrievalInstance::generate(20, 5, DesignSpec::well_conditioned(), NoiseSpec::Noiseless, 8)
            .unwrap();
        let mut rng = Rng::new(99);
        let x = sample_unit_sphere(5, &mut rng).unwrap() * 1.3;
        for i in 0..inst.n() {
            let (_, g) = inst.residual_and_grad(i, &x).unwrap();
            let h = 1e-6;
            for j in 0..5 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (inst.residual_and_grad(i, &xp).unwrap().0 - inst.residual_and_grad(i, &xm).unwrap().0)
                    / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-6 * g.norm().max(1e-3), "coord {j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn weak_convexity_midpoint_probe() {
        let inst = PhaseRetrievalInstance::generate(30, 10, DesignSpec::new(DesignKind::Ru, 4.0).unwrap(),
            NoiseSpec::Laplace { scale: 0.1 }, 12).unwrap();
        let mut rng = Rng::new(5);
        let x0 = sample_unit_sphere(10, &mut rng).unwrap();
        for trial in 0..1000 {
            let i = trial % inst.n();
            let s = inst.sample(i).unwrap();
            let lam = s.weak_convexity_constant();
            let reg = |y: &Vector| s.value(y) + 0.5 * lam * (y - &x0).norm_squared();
            let y = sample_unit_sphere(10, &mut rng).unwrap() * (2.0 * rng.uniform());
            let z = sample_unit_sphere(10, &mut rng).unwrap() * (2.0 * rng.uniform());
            let mid = (&y + &z) * 0.5;
            assert!(reg(&mid) <= 0.5 * (reg(&y) + reg(&z)) + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn objective_is_nonnegative_and_matches_single_sample(
            a in proptest::collection::vec(-3.0f64..3.0, 3),
            x in proptest::collection::vec(-3.0f64..3.0, 3),
            b in -5.0f64..5.0,
        ) {
            let inst = PhaseRetrievalInstance::from_parts(
                Matrix::from_rows(&[a]), vec![b], Vector::zeros(3)).unwrap();
            let x = Vector::from_vec(x);
            let f = inst.objective(&x).unwrap();
            prop_assert!(f >= 0.0);
            let (c, _) = inst.residual_and_grad(0, &x).unwrap();
            prop_assert!((f - c.abs()).abs() <= 1e-12 * (1.0 + f));
        }

        #[test]
        fn subgradient_lower_bound_with_weak_convexity(
            seed in 0u64..1000,
            dir in proptest::collection::vec(-1.0f64..1.0, 4),
            r in 0.0f64..0.1,
        ) {
            let inst = PhaseRetrievalInstance::generate(8, 4, DesignSpec::new(DesignKind::Ur, 3.0).unwrap(),
                NoiseSpec::Laplace { scale: 0.05 }, seed).unwrap();
            let mut rng = Rng::new(seed ^ 0xabc);
            let x = sample_unit_sphere(4, &mut rng).unwrap();
            let dir = Vector::from_vec(dir);
            let step = if dir.norm() > 0.0 { dir.normalize() * r } else { Vector::zeros(4) };
            let y = &x + &step;
            for i in 0..inst.n() {
                let s = inst.sample(i).unwrap();
                let g = s.subgradient(&x);
                let lam = s.weak_convexity_constant();
                let lower = s.value(&x) + g.dot(&step) - 0.5 * lam * step.norm_squared();
                prop_assert!(s.value(&y) >= lower - 1e-9);
            }
        }
    }
}
