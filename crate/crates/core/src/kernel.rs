//! The unitary `U` as an index pairing and the kernels of `T = U S_r U^{-1}`.
//!
//! `U` sends `x_k ↦ g_k` and `x_k^⊥ ↦ h_k`; the wavelet sequence is relabeled
//! so that `U f_n = u_n`. With `F` the matrix of columns `f_n`, every kernel
//! here is a finite bilinear series
//!
//! `Σ_{m,n} M_{mn} u_m(s) conj(u_n(t))`,
//!
//! assembled in separable form `Σ_l a_l(s) conj(b_l(t))` where `a_l`, `b_l`
//! are coefficient vectors in the `u`-basis. Derivative fields follow by
//! swapping in the derivative profiles of the children, so
//! `∂_s^i ∂_t^j K = Φ_i X (Φ_j Y)^*` with `Φ_i[s, n] = u_n^{(i)}(s)`.

use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{FrameRef, FrameSet, RSplit};
use crate::grid::Grid;
use crate::linalg::{inner, CMatrix, CVector, C64};
use crate::schedule::{BasisPartition, ChildIndex, Family, PerpSchedule, ScheduleError};
use crate::schmidt::{nuclearity_report, quarter_power, NuclearityReport, SchmidtData};
use crate::wavelet::{MotherWavelet, WaveletError};

/// Tolerance of the two-form cross-check of `T^* h_{n(k)}`.
pub const DUAL_FORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("inconsistent pairing: {0}")]
    InconsistentPairing(String),
    #[error("k = {k} exceeds the {available} scheduled e-perp vectors")]
    ScheduleExceeded { k: usize, available: usize },
    #[error("field grids or orders do not match")]
    GridMismatch,
    #[error("coefficient forms disagree by {gap:.3e} at k = {k}")]
    DualFormMismatch { k: usize, gap: f64 },
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// `(i, j)` with `i + j ≤ orders`, by total order then decreasing `i`.
pub fn order_pairs(orders: usize) -> Vec<(usize, usize)> {
    (0..=orders)
        .flat_map(|total| (0..=total).rev().map(move |i| (i, total - i)))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingRow {
    /// position `n` of `f_n` (1-based)
    pub n: usize,
    pub frame: FrameRef,
    pub family: Family,
    /// `k` with `U f_n = g_k` or `h_k`
    pub k: usize,
    pub child: ChildIndex,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitaryPairing {
    pub rows: Vec<PairingRow>,
    /// `n(k)` with `U e_k^⊥ = h_{n(k)}`
    pub schedule: PerpSchedule,
    /// `f`-position of `e_k^⊥`
    pub perp_positions: Vec<usize>,
}

impl UnitaryPairing {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `u_n = U f_n` as a wavelet child.
    pub fn child(&self, n: usize) -> ChildIndex {
        self.rows[n - 1].child
    }

    pub fn children(&self) -> Vec<ChildIndex> {
        self.rows.iter().map(|r| r.child).collect()
    }

    /// Expands `v = Σ c_n f_n` into the coefficient vector `c`; `U v = Σ c_n u_n`.
    pub fn coefficients(&self, frames: &FrameSet, v: &CVector) -> CVector {
        CVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| inner(v, frames.vector(r.frame))),
        )
    }
}

pub fn build_pairing(frames: &FrameSet, part: &BasisPartition) -> Result<UnitaryPairing, KernelError> {
    let x = frames.x_frame();
    let x_perp = frames.x_perp_frame();
    if x.len() > part.g_children().len() {
        return Err(KernelError::InconsistentPairing(format!(
            "{} x's but only {} g's",
            x.len(),
            part.g_children().len()
        )));
    }
    if x_perp.len() > part.h_children().len() {
        return Err(KernelError::InconsistentPairing(format!(
            "{} x-perp vectors but only {} h's",
            x_perp.len(),
            part.h_children().len()
        )));
    }
    let mut role = std::collections::HashMap::new();
    for (k, r) in x.iter().enumerate() {
        role.insert(*r, (Family::G, k + 1, part.g_children()[k]));
    }
    for (k, r) in x_perp.iter().enumerate() {
        role.insert(*r, (Family::H, k + 1, part.h_children()[k]));
    }
    let rows: Vec<PairingRow> = frames
        .f_order()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (family, k, child) = role[r];
            PairingRow {
                n: i + 1,
                frame: *r,
                family,
                k,
                child,
            }
        })
        .collect();
    let n_of_k: Vec<usize> = (1..=frames.e_perp().len())
        .map(|k| {
            x_perp
                .iter()
                .position(|r| *r == FrameRef::EPerp(k))
                .map(|p| p + 1)
                .ok_or_else(|| KernelError::InconsistentPairing(format!("e-perp {k} missing from x-perp")))
        })
        .collect::<Result<_, _>>()?;
    let schedule = PerpSchedule::new(n_of_k, part)?;
    let perp_positions: Vec<usize> = (1..=frames.e_perp().len())
        .map(|k| frames.f_order().iter().position(|r| *r == FrameRef::EPerp(k)).unwrap() + 1)
        .collect();
    for (k, (&n, &pos)) in schedule.n_of_k().iter().zip(&perp_positions).enumerate() {
        if rows[pos - 1].child != part.h_children()[n - 1] {
            return Err(KernelError::InconsistentPairing(format!(
                "U e_{}^⊥ is not h_n({})",
                k + 1,
                k + 1
            )));
        }
    }
    let distinct: std::collections::HashSet<ChildIndex> = rows.iter().map(|r| r.child).collect();
    if distinct.len() != rows.len() {
        return Err(KernelError::InconsistentPairing("forward map is not injective".into()));
    }
    Ok(UnitaryPairing {
        rows,
        schedule,
        perp_positions,
    })
}

/// Coefficients of `T^* h_{n(k)} = Σ_n ⟨S^* e_k^⊥, f_n⟩ u_n`.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientImage {
    pub k: usize,
    #[serde(skip)]
    pub coefficients: CVector,
    /// max gap between `⟨S^* e_k^⊥, f_n⟩` and `k ⟨e_k^⊥, Γ f_n⟩`
    pub dual_gap: f64,
    /// `‖T^* h_{n(k)}‖` from the coefficients
    pub norm: f64,
    /// `C_i` estimates: `Σ_n |c_n| ‖u_n^{(i)}‖ / k` per order
    pub c_bounds: Vec<f64>,
}

pub fn conjugated_h_image(
    k: usize,
    op: &RSplit,
    frames: &FrameSet,
    pairing: &UnitaryPairing,
    mother: &MotherWavelet,
    orders: usize,
) -> Result<CoefficientImage, KernelError> {
    let available = frames.e_perp().len();
    if k == 0 || k > available {
        return Err(KernelError::ScheduleExceeded { k, available });
    }
    let e_perp = &frames.e_perp()[k - 1];
    let image = op.s.adjoint() * e_perp;
    let coefficients = pairing.coefficients(frames, &image);
    let mut dual_gap = 0.0_f64;
    for (n, row) in pairing.rows.iter().enumerate() {
        let f = frames.vector(row.frame);
        let dual = inner(e_perp, &(&op.gamma * f)) * C64::new(k as f64, 0.0);
        dual_gap = dual_gap.max((dual - coefficients[n]).norm());
    }
    if dual_gap > DUAL_FORM_TOLERANCE {
        return Err(KernelError::DualFormMismatch { k, gap: dual_gap });
    }
    let c_bounds = (0..=orders)
        .map(|i| {
            let mut total = 0.0;
            for (c, row) in coefficients.iter().zip(&pairing.rows) {
                total += c.norm() * mother.child_sup(row.child, i)?;
            }
            Ok(total / k as f64)
        })
        .collect::<Result<_, WaveletError>>()?;
    Ok(CoefficientImage {
        k,
        norm: coefficients.norm(),
        coefficients,
        dual_gap,
        c_bounds,
    })
}

/// Sampled `∂_s^i ∂_t^j` fields, rows indexed by `s`, columns by `t`.
#[derive(Clone, Debug)]
pub struct FieldSet {
    pub pairs: Vec<(usize, usize)>,
    pub fields: Vec<CMatrix>,
}

impl FieldSet {
    pub fn zeros(points: usize, orders: usize) -> Self {
        let pairs = order_pairs(orders);
        Self {
            fields: vec![CMatrix::zeros(points, points); pairs.len()],
            pairs,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&CMatrix> {
        self.pairs.iter().position(|&p| p == (i, j)).map(|at| &self.fields[at])
    }

    pub fn values(&self) -> &CMatrix {
        &self.fields[0]
    }

    pub fn orders(&self) -> usize {
        self.pairs.last().map(|p| p.0 + p.1).unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.fields
            .iter()
            .all(|f| f.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            pairs: self.pairs.clone(),
            fields: self.fields.iter().map(|f| f.map(|z| z * factor)).collect(),
        }
    }
}

/// Dominating bounds recorded alongside a series.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SeriesProvenance {
    pub terms: usize,
    /// per `(i, j)`: `Σ_l ‖a_l^{(i)}‖_∞ ‖b_l^{(j)}‖_∞`
    pub dominating: Vec<((usize, usize), f64)>,
    /// per `(i, j)`: bound on the discarded terms
    pub tail: Vec<((usize, usize), f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelProvenance {
    pub r: usize,
    /// `K` is the kernel of `factor · U S_r U^{-1}`
    pub factor: f64,
    pub grid: Grid,
    pub orders: usize,
    pub p: SeriesProvenance,
    pub f: SeriesProvenance,
    pub nuclearity: NuclearityReport,
    pub c_bounds: Vec<Vec<f64>>,
    /// `max |M - F^* S_r F|` for the assembled coefficient matrix `M`
    pub coefficient_error: f64,
}

#[derive(Clone, Debug)]
pub struct KernelField {
    pub r: usize,
    pub factor: f64,
    pub grid: Grid,
    pub p: FieldSet,
    pub f: FieldSet,
    pub k: FieldSet,
    /// coefficient matrix `M` of `K` in the `u`-basis
    pub coefficients: CMatrix,
    pub provenance: KernelProvenance,
}

impl KernelField {
    pub fn orders(&self) -> usize {
        self.k.orders()
    }

    /// The kernel of `B_r = r S_r`: every sample multiplied by `r`.
    pub fn scaled_to_b(&self) -> KernelField {
        let factor = self.r as f64;
        let mut provenance = self.provenance.clone();
        provenance.factor = self.factor * factor;
        KernelField {
            r: self.r,
            factor: self.factor * factor,
            grid: self.grid.clone(),
            p: self.p.scaled(factor),
            f: self.f.scaled(factor),
            k: self.k.scaled(factor),
            coefficients: self.coefficients.map(|z| z * factor),
            provenance,
        }
    }
}

/// Shared inputs of the assembly: pairing, frames and the profile tables
/// `Φ_i` of the paired children on the grid.
pub struct KernelContext<'a> {
    pub mother: &'a MotherWavelet,
    pub pairing: &'a UnitaryPairing,
    pub frames: &'a FrameSet,
    pub grid: Grid,
    pub orders: usize,
    profiles: Vec<CMatrix>,
    child_sups: Vec<Vec<f64>>,
}

impl<'a> KernelContext<'a> {
    pub fn new(
        mother: &'a MotherWavelet,
        pairing: &'a UnitaryPairing,
        frames: &'a FrameSet,
        grid: Grid,
        orders: usize,
    ) -> Result<Self, KernelError> {
        if orders > mother.i_max() {
            return Err(WaveletError::OrderBudgetExceeded {
                order: orders,
                i_max: mother.i_max(),
            }
            .into());
        }
        let points = grid.points();
        let count = pairing.len();
        let mut profiles = vec![CMatrix::zeros(points.len(), count); orders + 1];
        let mut child_sups = vec![Vec::with_capacity(count); orders + 1];
        for (n, child) in pairing.children().into_iter().enumerate() {
            let table = mother.child_profile(child, points, orders)?;
            for (i, profile) in profiles.iter_mut().enumerate() {
                profile.set_column(n, &table.column(i));
                child_sups[i].push(mother.child_sup(child, i)?);
            }
        }
        Ok(Self {
            mother,
            pairing,
            frames,
            grid,
            orders,
            profiles,
            child_sups,
        })
    }

    /// `Φ_i` with `Φ_i[s, n] = u_n^{(i)}(s)`.
    pub fn profile(&self, order: usize) -> &CMatrix {
        &self.profiles[order]
    }

    /// `‖Σ_n c_n u_n^{(i)}‖_∞` bound `Σ_n |c_n| ‖u_n^{(i)}‖_∞`.
    fn sup_bound(&self, c: &CVector, order: usize) -> f64 {
        c.iter().zip(&self.child_sups[order]).map(|(z, s)| z.norm() * s).sum()
    }

    fn separable(&self, x: &CMatrix, y: &CMatrix) -> FieldSet {
        let points = self.grid.len();
        if x.ncols() == 0 {
            return FieldSet::zeros(points, self.orders);
        }
        let ax: Vec<CMatrix> = self.profiles.iter().map(|phi| phi * x).collect();
        let by: Vec<CMatrix> = self.profiles.iter().map(|phi| (phi * y).adjoint()).collect();
        let pairs = order_pairs(self.orders);
        let fields = pairs.iter().map(|&(i, j)| &ax[i] * &by[j]).collect();
        FieldSet { pairs, fields }
    }

    fn dominating(&self, x: &CMatrix, y: &CMatrix) -> Vec<((usize, usize), f64)> {
        order_pairs(self.orders)
            .into_iter()
            .map(|(i, j)| {
                let total = (0..x.ncols())
                    .map(|l| {
                        self.sup_bound(&x.column(l).into_owned(), i) * self.sup_bound(&y.column(l).into_owned(), j)
                    })
                    .sum();
                ((i, j), total)
            })
            .collect()
    }

    /// Separable factors of `P = Σ_k h_{n(k)} ⊗ conj(T^* h_{n(k)})`, first
    /// `max_terms` terms.
    pub fn p_factors(
        &self,
        op: &RSplit,
        max_terms: Option<usize>,
    ) -> Result<(CMatrix, CMatrix, Vec<CoefficientImage>), KernelError> {
        let count = self.pairing.len();
        let terms = max_terms.unwrap_or(usize::MAX).min(self.frames.e_perp().len());
        let mut x = CMatrix::zeros(count, terms);
        let mut y = CMatrix::zeros(count, terms);
        let mut images = Vec::with_capacity(terms);
        for k in 1..=terms {
            let image = conjugated_h_image(k, op, self.frames, self.pairing, self.mother, self.orders)?;
            x[(self.pairing.perp_positions[k - 1] - 1, k - 1)] = C64::new(1.0, 0.0);
            y.set_column(k - 1, &image.coefficients);
            images.push(image);
        }
        Ok((x, y, images))
    }

    pub fn assemble_p(
        &self,
        op: &RSplit,
        max_terms: Option<usize>,
    ) -> Result<(FieldSet, SeriesProvenance), KernelError> {
        let (x, y, _) = self.p_factors(op, max_terms)?;
        Ok((self.separable(&x, &y), self.p_provenance(&x, &y)))
    }

    fn p_provenance(&self, x: &CMatrix, y: &CMatrix) -> SeriesProvenance {
        SeriesProvenance {
            terms: x.ncols(),
            dominating: self.dominating(x, y),
            tail: order_pairs(self.orders).into_iter().map(|p| (p, 0.0)).collect(),
        }
    }

    fn f_provenance(&self, x: &CMatrix, y: &CMatrix, sd: &SchmidtData) -> SeriesProvenance {
        let sums: Vec<f64> = (0..=self.orders).map(|i| self.child_sups[i].iter().sum()).collect();
        let dropped: f64 = sd.dropped.iter().sum();
        SeriesProvenance {
            terms: x.ncols(),
            dominating: self.dominating(x, y),
            // a discarded term has coefficient norms ≤ s^{1/4}, so it is at
            // most s_n (Σ_m ‖u_m^{(i)}‖)(Σ_m ‖u_m^{(j)}‖)
            tail: order_pairs(self.orders)
                .into_iter()
                .map(|(i, j)| ((i, j), dropped * sums[i] * sums[j]))
                .collect(),
        }
    }

    /// Separable factors of `F = Σ_n s_n^{1/2} U A^* q_n ⊗ conj(U A p_n)`.
    pub fn f_factors(&self, sd: &SchmidtData) -> (CMatrix, CMatrix) {
        let dim = self.frames.dim();
        let a = quarter_power(sd, dim, dim);
        let count = self.pairing.len();
        let mut x = CMatrix::zeros(count, sd.rank());
        let mut y = CMatrix::zeros(count, sd.rank());
        for (l, ((s, p), q)) in sd.singulars.iter().zip(&sd.right).zip(&sd.left).enumerate() {
            let a_star_q = a.matrix.adjoint() * q;
            let a_p = &a.matrix * p;
            x.set_column(
                l,
                &(self.pairing.coefficients(self.frames, &a_star_q) * C64::new(s.sqrt(), 0.0)),
            );
            y.set_column(l, &self.pairing.coefficients(self.frames, &a_p));
        }
        (x, y)
    }

    pub fn assemble_f(&self, sd: &SchmidtData) -> (FieldSet, SeriesProvenance) {
        let (x, y) = self.f_factors(sd);
        (self.separable(&x, &y), self.f_provenance(&x, &y, sd))
    }

    /// `K = P + F` for `S_r`.
    pub fn assemble_k(&self, op: &RSplit, sd: &SchmidtData) -> Result<KernelField, KernelError> {
        let (xp, yp, images) = self.p_factors(op, None)?;
        let (xf, yf) = self.f_factors(sd);
        let p = self.separable(&xp, &yp);
        let f = self.separable(&xf, &yf);
        let k = sum_fields(&p, &f)?;
        let coefficients = &xp * yp.adjoint() + &xf * yf.adjoint();
        let fm = self.frames.f_matrix();
        let direct = fm.adjoint() * &op.s * &fm;
        let coefficient_error = crate::linalg::max_abs(&(&coefficients - direct));
        let provenance = KernelProvenance {
            r: op.r,
            factor: 1.0,
            grid: self.grid.clone(),
            orders: self.orders,
            p: self.p_provenance(&xp, &yp),
            f: self.f_provenance(&xf, &yf, sd),
            nuclearity: nuclearity_report(sd),
            c_bounds: images.into_iter().map(|im| im.c_bounds).collect(),
            coefficient_error,
        };
        Ok(KernelField {
            r: op.r,
            factor: 1.0,
            grid: self.grid.clone(),
            p,
            f,
            k,
            coefficients,
            provenance,
        })
    }

    /// `‖∂^i k(s)‖_{L2}` with `k(s) = conj(K(s, ·))`, by Parseval in the
    /// `u`-basis: `K^{(i,0)}(s, ·) = Σ_n w_n conj(u_n)` with `w = M^T φ_i(s)`.
    pub fn carleman_norm(&self, field: &KernelField, s: f64, order: usize) -> Result<f64, KernelError> {
        let phi = CVector::from_iterator(
            self.pairing.len(),
            self.pairing
                .children()
                .into_iter()
                .map(|c| self.mother.child_eval(c, s, order))
                .collect::<Result<Vec<_>, _>>()?,
        );
        Ok((field.coefficients.transpose() * phi).norm())
    }

    /// [`Self::carleman_norm`] at every grid point.
    pub fn carleman_profile(&self, field: &KernelField, order: usize) -> Vec<f64> {
        let w = &self.profiles[order] * &field.coefficients;
        w.row_iter().map(|row| row.norm()).collect()
    }

    /// `(U v)^{(i)}` on the grid for `v` given by its coefficients.
    pub fn synthesize(&self, c: &CVector, order: usize) -> CVector {
        &self.profiles[order] * c
    }
}

/// Pointwise `P + F` for every stored derivative field.
pub fn sum_fields(p: &FieldSet, f: &FieldSet) -> Result<FieldSet, KernelError> {
    if p.pairs != f.pairs || p.fields.iter().zip(&f.fields).any(|(a, b)| a.shape() != b.shape()) {
        return Err(KernelError::GridMismatch);
    }
    Ok(FieldSet {
        pairs: p.pairs.clone(),
        fields: p.fields.iter().zip(&f.fields).map(|(a, b)| a + b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{complete_frame, split_family};
    use crate::linalg::random_unit;
    use crate::operator::{decay_profile, select_e_sequence, OperatorFamily, Preset, PresetParams, WitnessSequence};
    use crate::schedule::{partition_gh, Enumeration};
    use crate::schmidt::{schmidt_decompose, DEFAULT_DROP_TOL};
    use crate::wavelet::BellFunction;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        mother: MotherWavelet,
        frames: FrameSet,
        pairing: UnitaryPairing,
        split: crate::decomposition::SplitOperators,
    }

    fn setup(preset: Preset, dim: usize) -> Setup {
        let fam = OperatorFamily::preset(
            preset,
            &PresetParams {
                dim,
                count: 2,
                seed: 3,
                decay_exponent: 1.0,
            },
        )
        .unwrap();
        let w = WitnessSequence::canonical(dim);
        let prof = decay_profile(&fam, &w).unwrap();
        let sel = select_e_sequence(&fam, &w, &prof, 0.9, None).unwrap();
        let frames = complete_frame(&sel.vectors, dim).unwrap();
        let split = split_family(&fam, &frames).unwrap();
        let part = partition_gh(&Enumeration::new(6).unwrap(), 0.5, None, dim).unwrap();
        let pairing = build_pairing(&frames, &part).unwrap();
        Setup {
            mother: MotherWavelet::new(BellFunction::default(), 256, 2).unwrap(),
            frames,
            pairing,
            split,
        }
    }

    #[test]
    fn order_pairs_layout() {
        assert_eq!(order_pairs(2), vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
    }

    #[test]
    fn pairing_sends_e_perp_to_scheduled_h() {
        let st = setup(Preset::DiagonalDecay, 24);
        let part = partition_gh(&Enumeration::new(6).unwrap(), 0.5, None, 24).unwrap();
        for (k, &n) in st.pairing.schedule.n_of_k().iter().enumerate() {
            let pos = st.pairing.perp_positions[k];
            assert_eq!(st.pairing.child(pos), part.h_children()[n - 1]);
        }
        assert_eq!(st.pairing.len(), 24);
    }

    #[test]
    fn x_goes_to_g() {
        let st = setup(Preset::Zero, 16);
        let frames = st.frames.clone().with_x(vec![1, 2]).unwrap();
        let part = partition_gh(&Enumeration::new(6).unwrap(), 0.5, None, 16).unwrap();
        let pairing = build_pairing(&frames, &part).unwrap();
        let g: Vec<&PairingRow> = pairing.rows.iter().filter(|r| r.family == Family::G).collect();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].frame, FrameRef::E(1));
        assert_eq!(g[0].child, part.g_children()[0]);
    }

    #[test]
    fn coefficients_preserve_norm() {
        let st = setup(Preset::RandomCompact, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let v = random_unit(&mut rng, 20);
            assert_relative_eq!(st.pairing.coefficients(&st.frames, &v).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn h_image_two_forms_and_parseval() {
        let st = setup(Preset::DiagonalDecay, 24);
        for op in &st.split.per_r {
            for k in 1..=st.frames.e_perp().len() {
                let im = conjugated_h_image(k, op, &st.frames, &st.pairing, &st.mother, 2).unwrap();
                assert!(im.dual_gap <= 1e-10);
                let direct = (op.s.adjoint() * &st.frames.e_perp()[k - 1]).norm();
                assert_relative_eq!(im.norm, direct, epsilon = 1e-12);
            }
        }
        let too_far = st.frames.e_perp().len() + 1;
        assert!(matches!(
            conjugated_h_image(too_far, &st.split.per_r[0], &st.frames, &st.pairing, &st.mother, 2),
            Err(KernelError::ScheduleExceeded { .. })
        ));
    }

    #[test]
    fn zero_family_gives_zero_kernel() {
        let st = setup(Preset::Zero, 16);
        let ctx = KernelContext::new(&st.mother, &st.pairing, &st.frames, Grid::new(4.0, 0.25).unwrap(), 2).unwrap();
        let op = &st.split.per_r[0];
        let sd = schmidt_decompose(&op.j, DEFAULT_DROP_TOL).unwrap();
        let k = ctx.assemble_k(op, &sd).unwrap();
        assert!(k.k.fields.iter().all(|f| f.iter().all(|z| z.norm() == 0.0)));
        assert_eq!(ctx.carleman_norm(&k, 0.3, 0).unwrap(), 0.0);
    }

    #[test]
    fn single_term_p_is_a_product() {
        let st = setup(Preset::DiagonalDecay, 24);
        let grid = Grid::new(3.0, 0.25).unwrap();
        let ctx = KernelContext::new(&st.mother, &st.pairing, &st.frames, grid.clone(), 1).unwrap();
        let op = &st.split.per_r[0];
        let (p, _) = ctx.assemble_p(op, Some(1)).unwrap();
        let im = conjugated_h_image(1, op, &st.frames, &st.pairing, &st.mother, 1).unwrap();
        let h = st.pairing.child(st.pairing.perp_positions[0]);
        let children = st.pairing.children();
        for (a, &s) in grid.points().iter().enumerate().step_by(5) {
            for (b, &t) in grid.points().iter().enumerate().step_by(7) {
                let hs = st.mother.child_eval(h, s, 0).unwrap();
                let mut th = C64::new(0.0, 0.0);
                for (c, child) in im.coefficients.iter().zip(&children) {
                    th += c * st.mother.child_eval(*child, t, 0).unwrap();
                }
                assert!((p.values()[(a, b)] - hs * th.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parts_add_up_and_match_coefficients() {
        let st = setup(Preset::WeightedShift, 24);
        let ctx = KernelContext::new(&st.mother, &st.pairing, &st.frames, Grid::new(4.0, 0.1).unwrap(), 2).unwrap();
        for op in &st.split.per_r {
            let sd = schmidt_decompose(&op.j, DEFAULT_DROP_TOL).unwrap();
            let k = ctx.assemble_k(op, &sd).unwrap();
            for ((kf, pf), ff) in k.k.fields.iter().zip(&k.p.fields).zip(&k.f.fields) {
                assert_eq!(kf, &(pf + ff));
            }
            assert!(k.provenance.coefficient_error < 1e-12);
            assert!(k.k.is_finite());
        }
    }

    #[test]
    fn f_coefficients_have_quarter_norms() {
        let st = setup(Preset::RandomCompact, 16);
        let ctx = KernelContext::new(&st.mother, &st.pairing, &st.frames, Grid::new(2.0, 0.5).unwrap(), 0).unwrap();
        let sd = schmidt_decompose(&st.split.per_r[0].j, DEFAULT_DROP_TOL).unwrap();
        let (x, y) = ctx.f_factors(&sd);
        for (l, s) in sd.singulars.iter().enumerate() {
            assert_relative_eq!(y.column(l).norm(), s.powf(0.25), epsilon = 1e-10);
            assert_relative_eq!(x.column(l).norm(), s.powf(0.75), epsilon = 1e-10);
        }
    }

    #[test]
    fn rank_one_f_is_single_term() {
        let st = setup(Preset::DiagonalDecay, 16);
        let grid = Grid::new(2.0, 0.5).unwrap();
        let ctx = KernelContext::new(&st.mother, &st.pairing, &st.frames, grid.clone(), 0).unwrap();
        let p = crate::linalg::canonical(16, 3);
        let q = crate::linalg::canonical(16, 5);
        let j = (&q * p.adjoint()) * C64::new(0.25, 0.0);
        let sd = schmidt_decompose(&j, DEFAULT_DROP_TOL).unwrap();
        let (f, _) = ctx.assemble_f(&sd);
        // (U A^* q)(s) = 0.25^{1/4} (U p)(s), (U A p)(t) = 0.25^{1/4} (U q)(t)
        let up = ctx.synthesize(&st.pairing.coefficients(&st.frames, &p), 0);
        let uq = ctx.synthesize(&st.pairing.coefficients(&st.frames, &q), 0);
        for a in 0..grid.len() {
            for b in 0..grid.len() {
                let expected = up[a] * uq[b].conj() * 0.25;
                assert!((f.values()[(a, b)] - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn carleman_norm_matches_quadrature() {
        let st = setup(Preset::DiagonalDecay, 24);
        let grid = Grid::new(16.0, 0.05).unwrap();
        let ctx = KernelContext::new(&st.mother, &st.pairing, &st.frames, grid.clone(), 0).unwrap();
        let op = &st.split.per_r[0];
        let sd = schmidt_decompose(&op.j, DEFAULT_DROP_TOL).unwrap();
        let k = ctx.assemble_k(op, &sd).unwrap();
        let weights = grid.weights();
        let profile = ctx.carleman_profile(&k, 0);
        for s in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let a = grid.points().iter().position(|&x| (x - s).abs() < 1e-9).unwrap();
            let quad: f64 = (0..grid.len())
                .map(|b| k.k.values()[(a, b)].norm_sqr() * weights[b])
                .sum::<f64>()
                .sqrt();
            let coeff = ctx.carleman_norm(&k, s, 0).unwrap();
            assert_relative_eq!(coeff, profile[a], epsilon = 1e-12);
            assert!((quad - coeff).abs() <= 1e-3 * coeff, "s={s}: {quad} vs {coeff}");
        }
    }

    #[test]
    fn b_kernel_is_r_times_s_kernel() {
        let st = setup(Preset::DiagonalDecay, 16);
        let ctx = KernelContext::new(&st.mother, &st.pairing, &st.frames, Grid::new(2.0, 0.5).unwrap(), 1).unwrap();
        let op = &st.split.per_r[1];
        let sd = schmidt_decompose(&op.j, DEFAULT_DROP_TOL).unwrap();
        let k = ctx.assemble_k(op, &sd).unwrap();
        let b = k.scaled_to_b();
        for (bf, sf) in b.k.fields.iter().zip(&k.k.fields) {
            assert!(bf.iter().zip(sf.iter()).all(|(x, y)| *x == y * 2.0));
        }
    }
}
