//! Complex dense linear-algebra aliases and small helpers shared by the
//! operator-side modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// `⟨f, g⟩ = Σ f_i conj(g_i)`: linear in the first argument.
pub fn inner(f: &CVector, g: &CVector) -> C64 {
    g.dotc(f)
}

pub fn canonical(dim: usize, index: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[index] = C64::new(1.0, 0.0);
    v
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Squared Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Max deviation of the Gram matrix of `vectors` from the identity.
pub fn gram_deviation(vectors: &[CVector]) -> f64 {
    let mut worst = 0.0_f64;
    for (a, u) in vectors.iter().enumerate() {
        for (b, v) in vectors.iter().enumerate().skip(a) {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((inner(u, v) - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Uniform sample on the closed unit disc.
pub fn unit_disc<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let radius: f64 = rng.random::<f64>().sqrt();
    let angle: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    C64::from_polar(radius, angle)
}

/// Random unit vector with independent standard-normal-like components
/// (Box–Muller), normalized.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| {
            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.random::<f64>();
            let radius = (-2.0 * u1.ln()).sqrt();
            C64::from_polar(radius, std::f64::consts::TAU * u2)
        });
        let n = v.norm();
        if n > 1e-12 {
            return v.unscale(n);
        }
    }
}

/// Matrix whose columns are the given vectors.
pub fn columns(vectors: &[CVector], dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        m.set_column(c, v);
    }
    m
}
