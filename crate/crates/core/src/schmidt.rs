//! Schmidt decomposition `J = Σ s_n ⟨·, p_n⟩ q_n`, the quarter-power operator
//! `A = Σ s_n^{1/4} ⟨·, p_n⟩ q_n`, its Schwarz bounds and the nuclearity sum
//! `Σ s_n^{1/2}`.
//!
//! The SVD is one-sided (Hestenes) Jacobi on the columns. For a column pair
//! with `γ = a_p^* a_q = |γ| e^{iφ}` the column `a_q` is first rotated by
//! `e^{-iφ}`, which makes the pair's Gram matrix real so the classical real
//! rotation applies unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{random_unit, CMatrix, CVector, C64};

pub const MAX_SWEEPS: usize = 60;
/// Relative drop tolerance below `s_1`.
pub const DEFAULT_DROP_TOL: f64 = 1e-12;
pub const SCHWARZ_TOLERANCE: f64 = 1e-9;
/// Tail share of `Σ s_n^{1/2}` above which nuclearity is flagged.
pub const TAIL_FLAG_SHARE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchmidtError {
    #[error("Jacobi SVD did not converge after {sweeps} sweeps (off-diagonal {residual:.3e})")]
    ConvergenceFailure { sweeps: usize, residual: f64 },
    #[error("Schwarz certificate violated for {side}: excess {excess:.3e}")]
    CertificateViolation { side: &'static str, excess: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `m = U diag(s) V^*` with `s` non-increasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
    pub sweeps: usize,
}

pub fn jacobi_svd(m: &CMatrix) -> Result<Svd, SchmidtError> {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = CMatrix::identity(cols, cols);
    let eps = f64::EPSILON * (cols.max(1) as f64);
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        let mut residual = 0.0_f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 {
                    continue;
                }
                let rel = g / (alpha * beta).sqrt();
                residual = residual.max(rel);
                if rel <= eps {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, phase, c, s);
                rotate(&mut v, p, q, phase, c, s);
            }
        }
        sweeps += 1;
        if !rotated {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(SchmidtError::ConvergenceFailure { sweeps, residual });
        }
    }
    let mut order: Vec<(usize, f64)> = (0..cols).map(|j| (j, a.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut u = CMatrix::zeros(rows, cols);
    let mut vs = CMatrix::zeros(cols, cols);
    let mut singular_values = Vec::with_capacity(cols);
    for (dst, &(src, sigma)) in order.iter().enumerate() {
        if sigma > 0.0 {
            u.set_column(dst, &a.column(src).unscale(sigma));
        }
        vs.set_column(dst, &v.column(src));
        singular_values.push(sigma);
    }
    Ok(Svd {
        u,
        singular_values,
        v: vs,
        sweeps,
    })
}

/// Columns `p, q` ← `(c x_p - s e^{-iφ} x_q, s x_p + c e^{-iφ} x_q)`.
fn rotate(x: &mut CMatrix, p: usize, q: usize, phase: C64, c: f64, s: f64) {
    for i in 0..x.nrows() {
        let xp = x[(i, p)];
        let xq = x[(i, q)] * phase;
        x[(i, p)] = xp * c - xq * s;
        x[(i, q)] = xp * s + xq * c;
    }
}

/// Kept Schmidt triples `(s_n, p_n, q_n)` with `J p_n = s_n q_n`.
#[derive(Clone, Debug, Serialize)]
pub struct SchmidtData {
    pub singulars: Vec<f64>,
    /// discarded singular values, below `drop_tol · s_1`
    pub dropped: Vec<f64>,
    pub drop_tol: f64,
    pub sweeps: usize,
    #[serde(skip)]
    pub left: Vec<CVector>,
    #[serde(skip)]
    pub right: Vec<CVector>,
}

impl SchmidtData {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    /// `(Σ_dropped s_n²)^{1/2}`, the Hilbert–Schmidt size of the discarded part.
    pub fn tail_mass(&self) -> f64 {
        self.dropped.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// `Σ s_n ⟨·, p_n⟩ q_n` over the kept triples.
    pub fn reconstruct(&self, dim_out: usize, dim_in: usize) -> CMatrix {
        self.weighted_sum(dim_out, dim_in, |s| s)
    }

    fn weighted_sum(&self, dim_out: usize, dim_in: usize, weight: impl Fn(f64) -> f64) -> CMatrix {
        let mut m = CMatrix::zeros(dim_out, dim_in);
        for ((s, p), q) in self.singulars.iter().zip(&self.right).zip(&self.left) {
            m += (q * p.adjoint()) * C64::new(weight(*s), 0.0);
        }
        m
    }
}

pub fn schmidt_decompose(j: &CMatrix, drop_tol: f64) -> Result<SchmidtData, SchmidtError> {
    if !(drop_tol >= 0.0 && drop_tol.is_finite()) {
        return Err(SchmidtError::InvalidParameter(format!(
            "drop_tol must be non-negative, got {drop_tol}"
        )));
    }
    let svd = jacobi_svd(j)?;
    let top = svd.singular_values.first().copied().unwrap_or(0.0);
    let threshold = drop_tol * top;
    let mut data = SchmidtData {
        singulars: Vec::new(),
        dropped: Vec::new(),
        drop_tol,
        sweeps: svd.sweeps,
        left: Vec::new(),
        right: Vec::new(),
    };
    for (n, &s) in svd.singular_values.iter().enumerate() {
        if s > 0.0 && s >= threshold {
            data.singulars.push(s);
            data.left.push(svd.u.column(n).into_owned());
            data.right.push(svd.v.column(n).into_owned());
        } else if s > 0.0 {
            data.dropped.push(s);
        }
    }
    Ok(data)
}

/// `A = Σ s_n^{1/4} ⟨·, p_n⟩ q_n`.
#[derive(Clone, Debug)]
pub struct QuarterPowerA {
    pub matrix: CMatrix,
    pub singulars: Vec<f64>,
}

pub fn quarter_power(sd: &SchmidtData, dim_out: usize, dim_in: usize) -> QuarterPowerA {
    QuarterPowerA {
        matrix: sd.weighted_sum(dim_out, dim_in, |s| s.powf(0.25)),
        singulars: sd.singulars.iter().map(|s| s.powf(0.25)).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SchwarzReport {
    pub samples: usize,
    pub seed: u64,
    /// `min_f (‖Jf‖^{1/4} - ‖Af‖)`
    pub min_slack: f64,
    /// `min_f (‖J^* f‖^{1/4} - ‖A^* f‖)`
    pub min_slack_adjoint: f64,
    pub violations: usize,
}

/// Checks `‖Af‖ ≤ ‖Jf‖^{1/4}` and `‖A^* f‖ ≤ ‖J^* f‖^{1/4}` on seeded random
/// unit vectors.
pub fn schwarz_certify(
    a: &QuarterPowerA,
    j: &CMatrix,
    samples: usize,
    seed: u64,
) -> Result<SchwarzReport, SchmidtError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut min_slack_adjoint = f64::INFINITY;
    let a_adj = a.matrix.adjoint();
    let j_adj = j.adjoint();
    for _ in 0..samples {
        let f = random_unit(&mut rng, j.ncols());
        min_slack = min_slack.min((j * &f).norm().powf(0.25) - (&a.matrix * &f).norm());
        let g = random_unit(&mut rng, j.nrows());
        min_slack_adjoint = min_slack_adjoint.min((&j_adj * &g).norm().powf(0.25) - (&a_adj * &g).norm());
    }
    if min_slack < -SCHWARZ_TOLERANCE {
        return Err(SchmidtError::CertificateViolation {
            side: "A",
            excess: -min_slack,
        });
    }
    if min_slack_adjoint < -SCHWARZ_TOLERANCE {
        return Err(SchmidtError::CertificateViolation {
            side: "A*",
            excess: -min_slack_adjoint,
        });
    }
    Ok(SchwarzReport {
        samples,
        seed,
        min_slack,
        min_slack_adjoint,
        violations: 0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NuclearityReport {
    /// `Σ s_n^{1/2}` over kept triples
    pub kept_sum: f64,
    /// `Σ s_n^{1/2}` over the discarded values
    pub tail_bound: f64,
    pub tail_flagged: bool,
}

pub fn nuclearity_report(sd: &SchmidtData) -> NuclearityReport {
    let kept_sum: f64 = sd.singulars.iter().map(|s| s.sqrt()).sum();
    let tail_bound: f64 = sd.dropped.iter().map(|s| s.sqrt()).sum();
    NuclearityReport {
        kept_sum,
        tail_bound,
        tail_flagged: tail_bound > TAIL_FLAG_SHARE * kept_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{canonical, gram_deviation, unit_disc};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| unit_disc(&mut rng))
    }

    fn nalgebra_singulars(m: &CMatrix) -> Vec<f64> {
        let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    #[test]
    fn zero_has_rank_zero() {
        let sd = schmidt_decompose(&CMatrix::zeros(5, 5), DEFAULT_DROP_TOL).unwrap();
        assert_eq!(sd.rank(), 0);
        assert_eq!(nuclearity_report(&sd).kept_sum, 0.0);
        let a = quarter_power(&sd, 5, 5);
        let rep = schwarz_certify(&a, &CMatrix::zeros(5, 5), 10, 1).unwrap();
        assert_eq!(rep.min_slack, 0.0);
    }

    #[test]
    fn rank_one_quarter_power() {
        let p = canonical(4, 1);
        let q = (canonical(4, 0) + canonical(4, 3)).unscale(2f64.sqrt());
        let j = (&q * p.adjoint()) * C64::new(1e-4, 0.0);
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        assert_eq!(sd.rank(), 1);
        assert_relative_eq!(sd.singulars[0], 1e-4, epsilon = 1e-18);
        let a = quarter_power(&sd, 4, 4);
        let expected = (&q * p.adjoint()) * C64::new(0.1, 0.0);
        assert!((&a.matrix - expected).norm() < 1e-14);
        // equality case of the Schwarz bound
        let af = (&a.matrix * &sd.right[0]).norm();
        assert_relative_eq!(af, (&j * &sd.right[0]).norm().powf(0.25), epsilon = 1e-12);
    }

    #[test]
    fn unit_singulars_are_fixed() {
        let j = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]));
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        let a = quarter_power(&sd, 2, 2);
        assert!(a.singulars.iter().all(|s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn nuclearity_arithmetic() {
        let j = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1e-4, 0.0), C64::new(1e-8, 0.0)]));
        let rep = nuclearity_report(&schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap());
        assert_relative_eq!(rep.kept_sum, 0.0101, epsilon = 1e-15);
        assert!(!rep.tail_flagged);
    }

    #[test]
    fn drop_tolerance_moves_values_to_tail() {
        let j = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1e-13, 0.0)]));
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        assert_eq!(sd.rank(), 1);
        assert_eq!(sd.dropped.len(), 1);
        assert_relative_eq!(sd.tail_mass(), 1e-13, epsilon = 1e-25);
    }

    #[test]
    fn random_reconstruction_and_oracle() {
        for seed in 0..5 {
            let j = random_matrix(8, seed);
            let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
            assert!((sd.reconstruct(8, 8) - &j).norm() <= 1e-10);
            assert!(gram_deviation(&sd.left) < 1e-10);
            assert!(gram_deviation(&sd.right) < 1e-10);
            for ((s, p), q) in sd.singulars.iter().zip(&sd.right).zip(&sd.left) {
                assert!((&j * p - q * C64::new(*s, 0.0)).norm() < 1e-10);
            }
            for (a, b) in sd.singulars.iter().zip(nalgebra_singulars(&j)) {
                assert_relative_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quarter_power_matches_eighth_root_oracle() {
        let j = random_matrix(6, 11);
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        let a = quarter_power(&sd, 6, 6);
        for (sa, sj) in nalgebra_singulars(&a.matrix).iter().zip(nalgebra_singulars(&j)) {
            assert_relative_eq!(sa.powi(4), sj, epsilon = 1e-9);
        }
        // ‖Af‖ = ‖(J^*J)^{1/8} f‖ via an independent eigendecomposition
        let eig = (j.adjoint() * &j).symmetric_eigen();
        let root = &eig.eigenvectors
            * CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.max(0.0).powf(0.125), 0.0)))
            * eig.eigenvectors.adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = random_unit(&mut rng, 6);
            assert_relative_eq!((&a.matrix * &f).norm(), (&root * &f).norm(), epsilon = 1e-10);
        }
    }

    #[test]
    fn schwarz_holds_on_random_matrices() {
        let j = random_matrix(8, 5) * C64::new(0.2, 0.0);
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        let a = quarter_power(&sd, 8, 8);
        let rep = schwarz_certify(&a, &j, 100, 9).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.min_slack >= -SCHWARZ_TOLERANCE);
    }

    #[test]
    fn corrupted_a_is_caught() {
        let j = random_matrix(4, 2);
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        let mut a = quarter_power(&sd, 4, 4);
        a.matrix *= C64::new(2.0, 0.0);
        assert!(matches!(
            schwarz_certify(&a, &j, 20, 0),
            Err(SchmidtError::CertificateViolation { .. })
        ));
    }

    #[test]
    fn rank_deficient_complex_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = CMatrix::from_fn(7, 3, |_, _| unit_disc(&mut rng));
        let y = CMatrix::from_fn(3, 7, |_, _| unit_disc(&mut rng));
        let j = x * y;
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        assert_eq!(sd.rank(), 3);
        assert!((sd.reconstruct(7, 7) - &j).norm() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn singulars_are_sorted_and_reconstruct(seed in 0u64..10_000, n in 1usize..10) {
            let j = random_matrix(n, seed);
            let svd = jacobi_svd(&j).unwrap();
            prop_assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
            let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
            prop_assert!((sd.reconstruct(n, n) - &j).norm() <= 1e-10);
        }
    }
}
