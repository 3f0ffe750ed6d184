//! Operator families `{B_r}`, the witness sequence `{v_n}`, the decay profile
//! `n ↦ sup_r ‖B_r^* v_n‖` and the greedy choice of the subsequence `{e_k}`.

use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{canonical, gram_deviation, unit_disc, CMatrix, CVector, C64};

pub const POWER_ITERATIONS: usize = 50;
pub const POWER_TOLERANCE: f64 = 1e-10;
/// Norm estimates above `1 + NORM_SLACK` trigger a rescale.
pub const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("malformed operator input: {0}")]
    MalformedConfig(String),
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquareMatrix { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown preset `{0}` (expected zero, diagonal-decay, weighted-shift or random-compact)")]
    UnknownPreset(String),
    #[error("decay condition fails within the truncation: smallest sup_r ‖B_r^* v_n‖^(1/4) is {floor:.6}, first target is {target:.6}")]
    ConditionFails { floor: f64, target: f64 },
    #[error("witness sequence is not orthonormal (Gram deviation {0:.3e})")]
    NotOrthonormal(f64),
}

impl OperatorError {
    /// Errors caused by the input description rather than the mathematics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, OperatorError::ConditionFails { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    DiagonalDecay,
    WeightedShift,
    RandomCompact,
}

impl std::str::FromStr for Preset {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "zero" => Ok(Preset::Zero),
            "diagonal-decay" => Ok(Preset::DiagonalDecay),
            "weighted-shift" => Ok(Preset::WeightedShift),
            "random-compact" => Ok(Preset::RandomCompact),
            other => Err(OperatorError::UnknownPreset(other.to_string())),
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::DiagonalDecay => "diagonal-decay",
            Preset::WeightedShift => "weighted-shift",
            Preset::RandomCompact => "random-compact",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PresetParams {
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
    pub decay_exponent: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            dim: 48,
            count: 3,
            seed: 0,
            decay_exponent: 1.0,
        }
    }
}

/// Normalized family `{B_r}`, `r = 1..=R`, on `C^N`.
#[derive(Clone, Debug)]
pub struct OperatorFamily {
    label: String,
    matrices: Vec<CMatrix>,
    raw_norms: Vec<f64>,
    norms: Vec<f64>,
}

/// Operator norm estimate by power iteration on `B^* B`.
pub fn estimate_norm(b: &CMatrix) -> f64 {
    let n = b.ncols();
    if n == 0 || b.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    // fixed start with full support so no singular direction is missed
    let mut v = CVector::from_fn(n, |i, _| C64::new(1.0, 0.5 / (i as f64 + 1.0)));
    v.unscale_mut(v.norm());
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = b.adjoint() * (b * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return (b * &v).norm();
        }
        let next = norm.sqrt();
        v = w.unscale(norm);
        let converged = (next - estimate).abs() <= POWER_TOLERANCE * next;
        estimate = next;
        if converged {
            break;
        }
    }
    // Rayleigh value at the final iterate is the sharper lower estimate
    estimate.max((b * &v).norm())
}

impl OperatorFamily {
    /// Validates shapes and rescales every `B_r` with estimated norm above 1.
    pub fn from_matrices(label: impl Into<String>, matrices: Vec<CMatrix>) -> Result<Self, OperatorError> {
        if matrices.is_empty() {
            return Err(OperatorError::MalformedConfig("family is empty".into()));
        }
        let dim = matrices[0].nrows();
        for (r, m) in matrices.iter().enumerate() {
            if m.nrows() != m.ncols() {
                return Err(OperatorError::NonSquareMatrix {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            if m.nrows() != dim {
                return Err(OperatorError::DimensionMismatch(format!(
                    "B_{} is {}x{}, B_1 is {dim}x{dim}",
                    r + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(OperatorError::MalformedConfig(format!(
                    "B_{} has non-finite entries",
                    r + 1
                )));
            }
        }
        if dim == 0 {
            return Err(OperatorError::MalformedConfig("dimension must be positive".into()));
        }
        let raw_norms: Vec<f64> = matrices.par_iter().map(estimate_norm).collect();
        let mut norms = Vec::with_capacity(matrices.len());
        let mut scaled = Vec::with_capacity(matrices.len());
        for (m, &raw) in matrices.into_iter().zip(&raw_norms) {
            if raw > 1.0 + NORM_SLACK {
                let rescaled = m.unscale(raw);
                norms.push(estimate_norm(&rescaled));
                scaled.push(rescaled);
            } else {
                norms.push(raw);
                scaled.push(m);
            }
        }
        Ok(Self {
            label: label.into(),
            matrices: scaled,
            raw_norms,
            norms,
        })
    }

    pub fn preset(preset: Preset, params: &PresetParams) -> Result<Self, OperatorError> {
        let (n, count) = (params.dim, params.count);
        if n == 0 || count == 0 {
            return Err(OperatorError::MalformedConfig("N and R must be positive".into()));
        }
        let phase = |r: usize| C64::from_polar(1.0, std::f64::consts::PI * r as f64 / count as f64);
        let matrices = (0..count)
            .map(|r| match preset {
                Preset::Zero => CMatrix::zeros(n, n),
                Preset::DiagonalDecay => {
                    let diag = DVector::from_fn(n, |m, _| phase(r) * ((m + 1) as f64).powf(-params.decay_exponent));
                    CMatrix::from_diagonal(&diag)
                }
                Preset::WeightedShift => {
                    let mut b = CMatrix::zeros(n, n);
                    for m in 0..n.saturating_sub(1) {
                        // 1-based: B e_m = e_{m+1} / (m + 1)
                        b[(m + 1, m)] = phase(r) / (m + 2) as f64;
                    }
                    b
                }
                Preset::RandomCompact => {
                    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(r as u64 + 1));
                    let mut b = CMatrix::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            b[(i, j)] = unit_disc(&mut rng) / ((i + 1) * (j + 1)) as f64;
                        }
                    }
                    b
                }
            })
            .collect();
        Self::from_matrices(preset.name(), matrices)
    }

    /// Reads the dense text format: header `N R` (or `rows cols R`), then
    /// `R` blocks of row-major `re im` pairs. `#` starts a comment.
    pub fn parse_matrix_text(text: &str, label: impl Into<String>) -> Result<Self, OperatorError> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let malformed = |what: String| OperatorError::MalformedConfig(what);
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| malformed("missing `N R` header".into()))?
            .split_whitespace()
            .collect();
        let dims: Vec<usize> = header
            .iter()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| malformed(format!("expected a non-negative integer in the header, got `{t}`")))
            })
            .collect::<Result<_, _>>()?;
        let (rows, cols, count) = match dims[..] {
            [n, count] => (n, n, count),
            [rows, cols, count] => (rows, cols, count),
            _ => return Err(malformed(format!("header must be `N R`, got `{}`", header.join(" ")))),
        };
        if rows != cols {
            return Err(OperatorError::NonSquareMatrix { rows, cols });
        }
        let tokens: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
        let values = &tokens;
        let expected = 2 * rows * cols * count;
        if values.len() != expected {
            return Err(OperatorError::DimensionMismatch(format!(
                "header announces {count} blocks of {rows}x{cols} ({expected} numbers), found {}",
                values.len()
            )));
        }
        let numbers: Vec<f64> = values
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| malformed(format!("invalid number `{t}`"))))
            .collect::<Result<_, _>>()?;
        let block = rows * cols;
        let matrices = (0..count)
            .map(|r| {
                CMatrix::from_fn(rows, cols, |i, j| {
                    let at = 2 * (r * block + i * cols + j);
                    C64::new(numbers[at], numbers[at + 1])
                })
            })
            .collect();
        Self::from_matrices(label, matrices)
    }

    pub fn load_matrix_file(path: &Path) -> Result<Self, OperatorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OperatorError::MalformedConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_matrix_text(&text, path.display().to_string())
    }

    /// Writes the family in the format read by [`Self::parse_matrix_text`].
    pub fn to_matrix_text(&self) -> String {
        let mut out = format!("{} {}\n", self.dim(), self.count());
        for m in &self.matrices {
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|j| format!("{} {}", m[(i, j)].re, m[(i, j)].im))
                    .collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Family size `R`.
    pub fn count(&self) -> usize {
        self.matrices.len()
    }

    /// `B_r` for 1-based `r`.
    pub fn b(&self, r: usize) -> &CMatrix {
        &self.matrices[r - 1]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    /// `S_r = B_r / r` for 1-based `r`.
    pub fn s(&self, r: usize) -> CMatrix {
        self.matrices[r - 1].unscale(r as f64)
    }

    pub fn raw_norms(&self) -> &[f64] {
        &self.raw_norms
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn was_rescaled(&self) -> Vec<bool> {
        self.raw_norms.iter().map(|&n| n > 1.0 + NORM_SLACK).collect()
    }
}

/// Orthonormal sequence `{v_n}` in coordinates.
#[derive(Clone, Debug)]
pub struct WitnessSequence {
    vectors: Vec<CVector>,
}

impl WitnessSequence {
    pub fn canonical(dim: usize) -> Self {
        Self {
            vectors: (0..dim).map(|i| canonical(dim, i)).collect(),
        }
    }

    pub fn from_vectors(vectors: Vec<CVector>) -> Result<Self, OperatorError> {
        let deviation = gram_deviation(&vectors);
        if deviation > 1e-10 {
            return Err(OperatorError::NotOrthonormal(deviation));
        }
        Ok(Self { vectors })
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// `p(n) = max_{r ≤ R} ‖B_r^* v_n‖` with its non-increasing envelope
/// `max_{m ≥ n} p(m)`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayProfile {
    pub values: Vec<f64>,
    pub envelope: Vec<f64>,
    /// the `r` attaining the max, 1-based
    pub argmax_r: Vec<usize>,
}

pub fn decay_profile(fam: &OperatorFamily, witness: &WitnessSequence) -> Result<DecayProfile, OperatorError> {
    if witness.vectors.iter().any(|v| v.len() != fam.dim()) {
        return Err(OperatorError::DimensionMismatch(format!(
            "witness vectors must have length {}",
            fam.dim()
        )));
    }
    let adjoints: Vec<CMatrix> = fam.matrices.iter().map(|m| m.adjoint()).collect();
    let (values, argmax_r): (Vec<f64>, Vec<usize>) = witness
        .vectors
        .par_iter()
        .map(|v| {
            adjoints
                .iter()
                .enumerate()
                .map(|(r, a)| ((a * v).norm(), r + 1))
                .fold((0.0, 1), |best, cur| if cur.0 > best.0 { cur } else { best })
        })
        .unzip();
    let mut envelope = values.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    Ok(DecayProfile {
        values,
        envelope,
        argmax_r,
    })
}

/// The chosen `{e_k}` with the certificate `Σ_k p(n_k)^{1/4} ≤ M`.
#[derive(Clone, Debug, Serialize)]
pub struct ESelection {
    pub rule_target: f64,
    pub cap: usize,
    /// witness positions `n_k` (1-based)
    pub indices: Vec<usize>,
    /// `p(n_k)^{1/4}`
    pub quarter_values: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// the summability constant: the certified partial sum
    pub m: f64,
    /// `Σ_k t^k = t / (1 - t)`
    pub m_ceiling: f64,
    /// largest gap between `sup_r ‖r S_r^* e_k‖` and `sup_r ‖B_r^* e_k‖`
    pub weighted_gap: f64,
    /// why selection stopped
    pub stop_reason: String,
    #[serde(skip)]
    pub vectors: Vec<CVector>,
}

impl ESelection {
    pub fn k_e(&self) -> usize {
        self.indices.len()
    }

    pub fn holds(&self) -> bool {
        self.partial_sums.iter().all(|&s| s <= self.m * (1.0 + 1e-12)) && self.m <= self.m_ceiling * (1.0 + 1e-12)
    }
}

/// Greedy choice: `e_k` is the first unused `v_n` with `p(n)^{1/4} ≤ t^k`,
/// stopping at `cap` picks (default `N / 4`).
pub fn select_e_sequence(
    fam: &OperatorFamily,
    witness: &WitnessSequence,
    profile: &DecayProfile,
    rule_target: f64,
    cap: Option<usize>,
) -> Result<ESelection, OperatorError> {
    if !(rule_target > 0.0 && rule_target < 1.0) {
        return Err(OperatorError::MalformedConfig(format!(
            "rule_target must lie in (0, 1), got {rule_target}"
        )));
    }
    let len = profile.values.len();
    let cap = cap.unwrap_or(fam.dim() / 4).min(len.saturating_sub(1));
    let quarter: Vec<f64> = profile.values.iter().map(|p| p.powf(0.25)).collect();
    let mut used = vec![false; len];
    let mut indices = Vec::new();
    let mut stop_reason = String::from("cap reached");
    while indices.len() < cap {
        let k = indices.len() as i32 + 1;
        let target = rule_target.powi(k);
        match (0..len).find(|&n| !used[n] && quarter[n] <= target) {
            Some(n) => {
                used[n] = true;
                indices.push(n);
            }
            None => {
                let floor = (0..len)
                    .filter(|&n| !used[n])
                    .map(|n| quarter[n])
                    .fold(f64::INFINITY, f64::min);
                stop_reason = format!("no witness with p^(1/4) <= {target:.6e} (floor {floor:.6e})");
                break;
            }
        }
    }
    if indices.is_empty() {
        let floor = quarter.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(OperatorError::ConditionFails {
            floor,
            target: rule_target,
        });
    }
    let quarter_values: Vec<f64> = indices.iter().map(|&n| quarter[n]).collect();
    let partial_sums: Vec<f64> = quarter_values
        .iter()
        .scan(0.0, |acc, q| {
            *acc += q;
            Some(*acc)
        })
        .collect();
    let weighted_gap = indices
        .iter()
        .map(|&n| {
            let v = &witness.vectors[n];
            let weighted = (1..=fam.count())
                .map(|r| (fam.s(r).adjoint() * v).norm() * r as f64)
                .fold(0.0, f64::max);
            (weighted - profile.values[n]).abs()
        })
        .fold(0.0, f64::max);
    Ok(ESelection {
        rule_target,
        cap,
        indices: indices.iter().map(|n| n + 1).collect(),
        m: *partial_sums.last().unwrap_or(&0.0),
        m_ceiling: rule_target / (1.0 - rule_target),
        partial_sums,
        quarter_values,
        weighted_gap,
        stop_reason,
        vectors: indices.iter().map(|&n| witness.vectors[n].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(dim: usize, count: usize) -> PresetParams {
        PresetParams {
            dim,
            count,
            ..PresetParams::default()
        }
    }

    /// Largest singular value from nalgebra's SVD.
    fn svd_norm(m: &CMatrix) -> f64 {
        m.clone().svd(false, false).singular_values.max()
    }

    #[test]
    fn zero_preset_has_zero_norms_and_profile() {
        let fam = OperatorFamily::preset(Preset::Zero, &params(16, 3)).unwrap();
        assert_eq!(fam.count(), 3);
        assert!(fam.norms().iter().all(|&n| n == 0.0));
        let p = decay_profile(&fam, &WitnessSequence::canonical(16)).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_decay_is_not_rescaled() {
        let fam = OperatorFamily::preset(Preset::DiagonalDecay, &params(24, 3)).unwrap();
        for r in 1..=3 {
            assert_relative_eq!(fam.norms()[r - 1], 1.0, epsilon = 1e-10);
            assert_relative_eq!(svd_norm(fam.b(r)), 1.0, epsilon = 1e-12);
        }
        assert!(fam.was_rescaled().iter().all(|&x| !x));
        let p = decay_profile(&fam, &WitnessSequence::canonical(24)).unwrap();
        for (n, v) in p.values.iter().enumerate() {
            assert_relative_eq!(*v, 1.0 / (n + 1) as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn weighted_shift_profile() {
        let fam = OperatorFamily::preset(Preset::WeightedShift, &params(20, 2)).unwrap();
        let w = WitnessSequence::canonical(20);
        let p = decay_profile(&fam, &w).unwrap();
        assert_eq!(p.values[0], 0.0);
        for n in 2..=20 {
            // direct product B^* e_n
            let direct = (fam.b(1).adjoint() * &w.vectors()[n - 1]).norm();
            assert_relative_eq!(p.values[n - 1], 1.0 / n as f64, epsilon = 1e-14);
            assert_relative_eq!(direct, 1.0 / n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn explicit_matrix_with_norm_two_is_halved() {
        let text = "2 1\n2 0 0 0\n0 0 1 0\n";
        let fam = OperatorFamily::parse_matrix_text(text, "test").unwrap();
        assert_relative_eq!(fam.raw_norms()[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(fam.b(1)[(0, 0)].re, 1.0, epsilon = 1e-10);
        assert_relative_eq!(fam.b(1)[(1, 1)].re, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn matrix_text_round_trips() {
        let fam = OperatorFamily::preset(Preset::RandomCompact, &params(6, 2)).unwrap();
        let back = OperatorFamily::parse_matrix_text(&fam.to_matrix_text(), "rt").unwrap();
        for r in 1..=2 {
            assert!((fam.b(r) - back.b(r)).norm() < 1e-14);
        }
    }

    #[test]
    fn malformed_inputs_are_classified() {
        assert!(matches!(
            OperatorFamily::parse_matrix_text("2 3 1\n", "x"),
            Err(OperatorError::NonSquareMatrix { rows: 2, cols: 3 })
        ));
        assert!(matches!(
            OperatorFamily::parse_matrix_text("2 1\n1 0 0 0\n", "x"),
            Err(OperatorError::DimensionMismatch(_))
        ));
        assert!(matches!(
            OperatorFamily::parse_matrix_text("2 1\n1 0 0 0 a 0 0 0\n", "x"),
            Err(OperatorError::MalformedConfig(_))
        ));
        assert!(matches!(
            OperatorFamily::from_matrices("x", vec![CMatrix::zeros(2, 2), CMatrix::zeros(3, 3)]),
            Err(OperatorError::DimensionMismatch(_))
        ));
        assert!(matches!(
            "identity".parse::<Preset>(),
            Err(OperatorError::UnknownPreset(_))
        ));
        assert!(OperatorError::UnknownPreset("x".into()).is_input_error());
        assert!(!OperatorError::ConditionFails {
            floor: 1.0,
            target: 0.5
        }
        .is_input_error());
    }

    #[test]
    fn identity_fails_the_decay_condition() {
        let fam = OperatorFamily::from_matrices("identity", vec![CMatrix::identity(12, 12)]).unwrap();
        let w = WitnessSequence::canonical(12);
        let p = decay_profile(&fam, &w).unwrap();
        let err = select_e_sequence(&fam, &w, &p, 0.5, None).unwrap_err();
        assert!(matches!(err, OperatorError::ConditionFails { floor, .. } if (floor - 1.0).abs() < 1e-12));
    }

    #[test]
    fn diagonal_decay_selection_grows_geometrically() {
        let fam = OperatorFamily::preset(Preset::DiagonalDecay, &params(300, 1)).unwrap();
        let w = WitnessSequence::canonical(300);
        let p = decay_profile(&fam, &w).unwrap();
        let sel = select_e_sequence(&fam, &w, &p, 0.5, None).unwrap();
        // (1/n)^{1/4} ≤ 2^{-k}  ⇔  n ≥ 16^k
        assert_eq!(sel.indices, vec![16, 256]);
        assert!(sel.m <= 1.0 && sel.holds());
        assert!(sel.weighted_gap < 1e-14);
    }

    #[test]
    fn reference_target_selects_nine() {
        let fam = OperatorFamily::preset(Preset::DiagonalDecay, &params(48, 3)).unwrap();
        let w = WitnessSequence::canonical(48);
        let p = decay_profile(&fam, &w).unwrap();
        let sel = select_e_sequence(&fam, &w, &p, 0.9, None).unwrap();
        assert_eq!(sel.indices, vec![2, 3, 4, 6, 9, 13, 20, 30, 45]);
        assert!(sel.k_e() <= 12);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let fam = OperatorFamily::preset(Preset::RandomCompact, &params(16, 3)).unwrap();
        for r in 1..=3 {
            assert!(fam.norms()[r - 1] <= 1.0 + NORM_SLACK);
            assert_relative_eq!(fam.norms()[r - 1], svd_norm(fam.b(r)), epsilon = 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn normalization_is_idempotent(seed in 0u64..1000, scale in 0.1f64..10.0) {
            let fam = OperatorFamily::preset(Preset::RandomCompact, &PresetParams { dim: 8, count: 2, seed, decay_exponent: 1.0 }).unwrap();
            let scaled: Vec<CMatrix> = fam.matrices().iter().map(|m| m * C64::new(scale, 0.0)).collect();
            let once = OperatorFamily::from_matrices("a", scaled).unwrap();
            let twice = OperatorFamily::from_matrices("b", once.matrices().to_vec()).unwrap();
            for r in 1..=2 {
                prop_assert!((once.b(r) - twice.b(r)).norm() <= 1e-12);
                prop_assert!(once.norms()[r - 1] <= 1.0 + NORM_SLACK);
            }
        }

        #[test]
        fn presets_are_deterministic(seed in 0u64..1000) {
            let p = PresetParams { dim: 6, count: 2, seed, decay_exponent: 1.0 };
            let a = OperatorFamily::preset(Preset::RandomCompact, &p).unwrap();
            let b = OperatorFamily::preset(Preset::RandomCompact, &p).unwrap();
            prop_assert_eq!(a.matrices(), b.matrices());
        }

        #[test]
        fn selection_partial_sums_stay_below_m(t in 0.3f64..0.95, p in 0.5f64..3.0) {
            let fam = OperatorFamily::preset(Preset::DiagonalDecay, &PresetParams { dim: 40, count: 2, seed: 0, decay_exponent: p }).unwrap();
            let w = WitnessSequence::canonical(40);
            let prof = decay_profile(&fam, &w).unwrap();
            if let Ok(sel) = select_e_sequence(&fam, &w, &prof, t, None) {
                prop_assert!(sel.holds());
                prop_assert!(sel.indices.windows(2).all(|x| x[0] < x[1]));
            }
        }
    }
}
