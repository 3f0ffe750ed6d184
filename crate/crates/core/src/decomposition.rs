//! Frames `{e_k}`, `{e_k^⊥}`, `{f_n}`, the splitting `S_r = Q_r + J_r^*`,
//! `Γ_r = Λ S_r`, the functional
//!
//! `d(h) = sup_r ‖J_r h‖^{1/4} + sup_r ‖J_r^* h‖^{1/4} + sup_r ‖Γ_r h‖`,
//!
//! the subsequence `{x_k} ⊂ {e_k}` and the Hilbert–Schmidt summability chains.
//!
//! All matrices live in the canonical coordinates of `C^N`; sups over `r` are
//! maxima over the materialized `r ≤ R`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{canonical, gram_deviation, hs_norm_sq, max_abs, CMatrix, CVector, C64};
use crate::operator::{ESelection, OperatorFamily};
use crate::schedule::BasisPartition;
use crate::wavelet::{MotherWavelet, WaveletError};

/// Candidates whose residual after orthogonalization is below this are dropped.
pub const COMPLETION_DROP: f64 = 1e-8;
pub const SPLIT_TOLERANCE: f64 = 1e-12;
pub const UNIT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("frame completion produced {found} perp vectors, {required} required")]
    RankDeficiency { found: usize, required: usize },
    #[error("splitting identity violated by {error:.3e}")]
    ReconstructionFailure { error: f64 },
    #[error("d is defined on unit vectors, got norm {norm}")]
    NotUnitVector { norm: f64 },
    #[error("g-family exhausted at k = {k}: only {available} g's materialized")]
    ScheduleExhausted { k: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

/// Member of `{f_n}`: `e_k` or `e_k^⊥` (1-based `k`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum FrameRef {
    E(usize),
    EPerp(usize),
}

#[derive(Clone, Debug)]
pub struct FrameSet {
    dim: usize,
    e: Vec<CVector>,
    e_perp: Vec<CVector>,
    f_order: Vec<FrameRef>,
    /// positions `m` of `x_k = e_m` (1-based), strictly increasing
    x: Vec<usize>,
}

/// Completes `{e_k}` by modified Gram–Schmidt on the canonical vectors and
/// interleaves `e_1, e_1^⊥, e_2, e_2^⊥, ...` into `{f_n}`.
pub fn complete_frame(e: &[CVector], dim: usize) -> Result<FrameSet, DecompositionError> {
    if e.iter().any(|v| v.len() != dim) {
        return Err(DecompositionError::InvalidParameter(format!(
            "e-vectors must have length {dim}"
        )));
    }
    let required = dim.saturating_sub(e.len());
    if required == 0 {
        return Err(DecompositionError::RankDeficiency { found: 0, required: 1 });
    }
    let mut basis: Vec<CVector> = e.to_vec();
    let mut e_perp = Vec::with_capacity(required);
    for i in 0..dim {
        let mut v = canonical(dim, i);
        // two passes keep the completion orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > COMPLETION_DROP {
            v.unscale_mut(norm);
            basis.push(v.clone());
            e_perp.push(v);
        }
    }
    if e_perp.len() < required {
        return Err(DecompositionError::RankDeficiency {
            found: e_perp.len(),
            required,
        });
    }
    e_perp.truncate(required);
    let mut f_order = Vec::with_capacity(dim);
    for k in 1..=e.len().max(e_perp.len()) {
        if k <= e.len() {
            f_order.push(FrameRef::E(k));
        }
        if k <= e_perp.len() {
            f_order.push(FrameRef::EPerp(k));
        }
    }
    Ok(FrameSet {
        dim,
        e: e.to_vec(),
        e_perp,
        f_order,
        x: Vec::new(),
    })
}

impl FrameSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn e(&self) -> &[CVector] {
        &self.e
    }

    pub fn e_perp(&self) -> &[CVector] {
        &self.e_perp
    }

    pub fn f_order(&self) -> &[FrameRef] {
        &self.f_order
    }

    pub fn vector(&self, r: FrameRef) -> &CVector {
        match r {
            FrameRef::E(k) => &self.e[k - 1],
            FrameRef::EPerp(k) => &self.e_perp[k - 1],
        }
    }

    /// `f_n` for 1-based `n`.
    pub fn f(&self, n: usize) -> &CVector {
        self.vector(self.f_order[n - 1])
    }

    /// Matrix with columns `f_1, ..., f_N`.
    pub fn f_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.f_order.len());
        for (c, r) in self.f_order.iter().enumerate() {
            m.set_column(c, self.vector(*r));
        }
        m
    }

    /// Max deviation of the joint Gram matrix of `{e_k} ∪ {e_k^⊥}` from `I`.
    pub fn gram_deviation(&self) -> f64 {
        let all: Vec<CVector> = self.e.iter().chain(&self.e_perp).cloned().collect();
        gram_deviation(&all)
    }

    /// `E = Σ ⟨·, e_k⟩ e_k`.
    pub fn projection(&self) -> CMatrix {
        projector(&self.e, self.dim)
    }

    /// `Λ = Σ_k (1/k) ⟨·, e_k^⊥⟩ e_k^⊥`.
    pub fn lambda(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (k, v) in self.e_perp.iter().enumerate() {
            m += (v * v.adjoint()) * C64::new(1.0 / (k + 1) as f64, 0.0);
        }
        m
    }

    pub fn with_x(mut self, x: Vec<usize>) -> Result<Self, DecompositionError> {
        if x.windows(2).any(|w| w[1] <= w[0]) || x.iter().any(|&m| m == 0 || m > self.e.len()) {
            return Err(DecompositionError::InvalidParameter(format!(
                "x positions {x:?} are not a subsequence of the {} e's",
                self.e.len()
            )));
        }
        self.x = x;
        Ok(self)
    }

    pub fn x_positions(&self) -> &[usize] {
        &self.x
    }

    /// `{x_k}` as frame references.
    pub fn x_frame(&self) -> Vec<FrameRef> {
        self.x.iter().map(|&m| FrameRef::E(m)).collect()
    }

    /// `{x_k^⊥} = {f_n} \ {x_k}` in `f`-order.
    pub fn x_perp_frame(&self) -> Vec<FrameRef> {
        self.f_order
            .iter()
            .copied()
            .filter(|r| !matches!(r, FrameRef::E(m) if self.x.contains(m)))
            .collect()
    }
}

fn projector(vectors: &[CVector], dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for v in vectors {
        m += v * v.adjoint();
    }
    m
}

/// `Q_r`, `J_r`, `Γ_r` for one `r`.
#[derive(Clone, Debug)]
pub struct RSplit {
    pub r: usize,
    pub s: CMatrix,
    pub q: CMatrix,
    pub j: CMatrix,
    pub gamma: CMatrix,
}

#[derive(Clone, Debug)]
pub struct SplitOperators {
    pub per_r: Vec<RSplit>,
    pub lambda: CMatrix,
    /// `max_r max|S_r - (Q_r + J_r^*)|`
    pub reconstruction_error: f64,
    /// `max_r max|(1 - E) S_r - Σ_k ⟨·, S_r^* e_k^⊥⟩ e_k^⊥|`
    pub rank_form_error: f64,
}

/// `Q = (1 - E) S`, `J = S^* E`, with both consistency checks.
pub fn split_operator(s: &CMatrix, frames: &FrameSet) -> Result<(CMatrix, CMatrix, f64, f64), DecompositionError> {
    let dim = frames.dim;
    let e = frames.projection();
    let q = (CMatrix::identity(dim, dim) - &e) * s;
    let j = s.adjoint() * &e;
    let reconstruction = max_abs(&(s - (&q + j.adjoint())));
    let mut rank_form = CMatrix::zeros(dim, dim);
    for v in &frames.e_perp {
        let w = s.adjoint() * v;
        rank_form += v * w.adjoint();
    }
    let rank_error = max_abs(&(&q - rank_form));
    if reconstruction > SPLIT_TOLERANCE || rank_error > SPLIT_TOLERANCE {
        return Err(DecompositionError::ReconstructionFailure {
            error: reconstruction.max(rank_error),
        });
    }
    Ok((q, j, reconstruction, rank_error))
}

pub fn gamma_operator(s: &CMatrix, lambda: &CMatrix) -> CMatrix {
    lambda * s
}

pub fn split_family(fam: &OperatorFamily, frames: &FrameSet) -> Result<SplitOperators, DecompositionError> {
    let lambda = frames.lambda();
    let per_r: Vec<(RSplit, f64, f64)> = (1..=fam.count())
        .into_par_iter()
        .map(|r| {
            let s = fam.s(r);
            let (q, j, rec, rank) = split_operator(&s, frames)?;
            let gamma = gamma_operator(&s, &lambda);
            Ok((RSplit { r, s, q, j, gamma }, rec, rank))
        })
        .collect::<Result<_, DecompositionError>>()?;
    let reconstruction_error = per_r.iter().map(|x| x.1).fold(0.0, f64::max);
    let rank_form_error = per_r.iter().map(|x| x.2).fold(0.0, f64::max);
    Ok(SplitOperators {
        per_r: per_r.into_iter().map(|x| x.0).collect(),
        lambda,
        reconstruction_error,
        rank_form_error,
    })
}

/// The three terms of `d(h)`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct DTerms {
    pub j_term: f64,
    pub j_adjoint_term: f64,
    pub gamma_term: f64,
    pub total: f64,
}

pub fn d_functional(h: &CVector, split: &SplitOperators) -> Result<DTerms, DecompositionError> {
    let norm = h.norm();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(DecompositionError::NotUnitVector { norm });
    }
    let mut t = DTerms::default();
    for op in &split.per_r {
        t.j_term = t.j_term.max((&op.j * h).norm());
        t.j_adjoint_term = t.j_adjoint_term.max((op.j.adjoint() * h).norm());
        t.gamma_term = t.gamma_term.max((&op.gamma * h).norm());
    }
    t.j_term = t.j_term.powf(0.25);
    t.j_adjoint_term = t.j_adjoint_term.powf(0.25);
    t.total = t.j_term + t.j_adjoint_term + t.gamma_term;
    Ok(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct DLedgerEntry {
    /// position `k` of `e_k`
    pub k: usize,
    /// witness index `n_k` of `e_k`
    pub witness: usize,
    #[serde(flatten)]
    pub terms: DTerms,
}

/// `d(e_k)` over the selected `e`'s.
#[derive(Clone, Debug, Serialize)]
pub struct DLedger {
    pub entries: Vec<DLedgerEntry>,
    /// `d(e_{k+1}) < d(e_k)` for every `k ≥ 2`
    pub decreasing_after_first: bool,
    /// `d(e_K) / d(e_1)`, `None` when `d(e_1) = 0`
    pub final_to_initial: Option<f64>,
}

impl DLedger {
    pub fn d(&self, k: usize) -> f64 {
        self.entries[k - 1].terms.total
    }
}

pub fn d_ledger(split: &SplitOperators, frames: &FrameSet, sel: &ESelection) -> Result<DLedger, DecompositionError> {
    let entries: Vec<DLedgerEntry> = frames
        .e
        .iter()
        .enumerate()
        .map(|(i, h)| {
            Ok(DLedgerEntry {
                k: i + 1,
                witness: sel.indices.get(i).copied().unwrap_or(0),
                terms: d_functional(h, split)?,
            })
        })
        .collect::<Result<_, DecompositionError>>()?;
    let totals: Vec<f64> = entries.iter().map(|e| e.terms.total).collect();
    let decreasing_after_first = totals
        .iter()
        .skip(1)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] < w[0]);
    let final_to_initial = match (totals.first(), totals.last()) {
        (Some(&first), Some(&last)) if first > 0.0 => Some(last / first),
        _ => None,
    };
    Ok(DLedger {
        entries,
        decreasing_after_first,
        final_to_initial,
    })
}

/// Per-order certificate `Σ_k d(x_k) (G_{k,i} + 1) ≤ Σ_k t^k`.
#[derive(Clone, Debug, Serialize)]
pub struct XCertificate {
    pub order: usize,
    pub sum: f64,
    pub ceiling: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct XSelection {
    pub target: f64,
    /// `m` with `x_k = e_m`
    pub positions: Vec<usize>,
    /// `max_{i ≤ I} G_{k,i}`
    pub g_sup: Vec<f64>,
    pub d_values: Vec<f64>,
    pub certificates: Vec<XCertificate>,
    /// the constraint that ended the greedy search
    pub stop_reason: String,
}

/// Greedy `x_k`: the first `e_m` after `x_{k-1}` with
/// `d(e_m) (max_{i ≤ I} G_{k,i} + 1) ≤ t^k`.
pub fn select_x_sequence(
    ledger: &DLedger,
    part: &BasisPartition,
    mother: &MotherWavelet,
    i_max: usize,
    target: f64,
) -> Result<XSelection, DecompositionError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(DecompositionError::InvalidParameter(format!(
            "x target must lie in (0, 1), got {target}"
        )));
    }
    let candidates = ledger.entries.len();
    let mut positions = Vec::new();
    let mut g_sup = Vec::new();
    let mut g_orders: Vec<Vec<f64>> = Vec::new();
    let mut d_values = Vec::new();
    let mut next = 1;
    let mut stop_reason = String::from("all e's used");
    while next <= candidates {
        let k = positions.len() + 1;
        let g = part
            .child(crate::schedule::Family::G, k)
            .ok_or(DecompositionError::ScheduleExhausted {
                k,
                available: part.g_children().len(),
            })?;
        let orders: Vec<f64> = (0..=i_max).map(|i| mother.child_sup(g, i)).collect::<Result<_, _>>()?;
        let sup = orders.iter().copied().fold(0.0, f64::max);
        let bound = target.powi(k as i32);
        match (next..=candidates).find(|&m| ledger.d(m) * (sup + 1.0) <= bound) {
            Some(m) => {
                positions.push(m);
                g_sup.push(sup);
                g_orders.push(orders);
                d_values.push(ledger.d(m));
                next = m + 1;
            }
            None => {
                let best = (next..=candidates).map(|m| ledger.d(m)).fold(f64::INFINITY, f64::min);
                stop_reason = format!(
                    "k = {k}: min d(e_m) (G + 1) = {:.6e} exceeds {bound:.6e} (G = {sup:.6e})",
                    best * (sup + 1.0)
                );
                break;
            }
        }
    }
    let ceiling: f64 = (1..=positions.len()).map(|k| target.powi(k as i32)).sum();
    let certificates = (0..=i_max)
        .map(|i| {
            let sum: f64 = d_values.iter().zip(&g_orders).map(|(d, g)| d * (g[i] + 1.0)).sum();
            XCertificate {
                order: i,
                sum,
                ceiling,
                holds: sum <= ceiling * (1.0 + 1e-12),
            }
        })
        .collect();
    Ok(XSelection {
        target,
        positions,
        g_sup,
        d_values,
        certificates,
        stop_reason,
    })
}

/// One inequality or identity of a summability chain.
#[derive(Clone, Debug, Serialize)]
pub struct ChainLink {
    pub lhs: String,
    pub relation: &'static str,
    pub rhs: String,
    pub lhs_value: f64,
    pub rhs_value: f64,
    pub holds: bool,
}

fn link(lhs: &str, relation: &'static str, rhs: &str, a: f64, b: f64) -> ChainLink {
    let scale = a.abs().max(b.abs());
    let holds = match relation {
        "=" => (a - b).abs() <= 1e-10 * scale + 1e-15,
        _ => a <= b + 1e-12 * scale + 1e-15,
    };
    ChainLink {
        lhs: lhs.into(),
        relation,
        rhs: rhs.into(),
        lhs_value: a,
        rhs_value: b,
        holds,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HsLedger {
    pub m: f64,
    pub j_chain: Vec<ChainLink>,
    pub gamma_chain: Vec<ChainLink>,
    /// `max_r ||J_r|_2^2 - |J_r^*|_2^2|`
    pub adjoint_hs_gap: f64,
    pub holds: bool,
}

/// `Σ_{r ≤ R} r^{-2} Σ_{k ≤ K} k^{-2}`, increasing to `π⁴/36`.
pub fn double_basel(r_max: usize, k_max: usize) -> f64 {
    let basel = |n: usize| -> f64 { (1..=n).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum() };
    basel(r_max) * basel(k_max)
}

/// Truncated values of both Hilbert–Schmidt chains, every link asserted.
pub fn hs_summability_report(split: &SplitOperators, frames: &FrameSet, sel: &ESelection) -> HsLedger {
    let e = &frames.e;
    let count = split.per_r.len();
    let sup_over_r = |f: &dyn Fn(&RSplit, &CVector) -> f64| -> f64 {
        e.iter()
            .map(|v| split.per_r.iter().map(|op| f(op, v)).fold(0.0, f64::max))
            .sum()
    };
    let sum_over_r = |f: &dyn Fn(&RSplit, &CVector) -> f64| -> f64 {
        split
            .per_r
            .iter()
            .map(|op| e.iter().map(|v| f(op, v)).sum::<f64>())
            .sum()
    };
    let j_adj_e = |op: &RSplit, v: &CVector| (op.j.adjoint() * v).norm_squared();
    let j_e = |op: &RSplit, v: &CVector| (&op.j * v).norm_squared();
    let s_adj_e = |op: &RSplit, v: &CVector| (op.s.adjoint() * v).norm_squared();
    let gamma_e = |op: &RSplit, v: &CVector| (&op.gamma * v).norm_squared();

    let inv_r2: f64 = (1..=count).map(|r| 1.0 / (r * r) as f64).sum();
    let weighted: f64 = {
        let sup_sum: f64 = e
            .iter()
            .map(|v| {
                split
                    .per_r
                    .iter()
                    .map(|op| (op.s.adjoint() * v).norm_squared() * (op.r * op.r) as f64)
                    .fold(0.0, f64::max)
            })
            .sum();
        inv_r2 * sup_sum
    };
    let m8 = sel.m.powi(8);
    let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
    let hs_j: f64 = split.per_r.iter().map(|op| hs_norm_sq(&op.j)).sum();
    let hs_j_adj: f64 = split.per_r.iter().map(|op| hs_norm_sq(&op.j.adjoint())).sum();
    let l1 = sup_over_r(&j_adj_e);
    let l2 = sum_over_r(&j_adj_e);
    let l5 = sum_over_r(&j_e);
    let l6 = sum_over_r(&s_adj_e);
    let j_chain = vec![
        link("Σ_k sup_r ‖J_r^* e_k‖²", "<=", "Σ_r Σ_k ‖J_r^* e_k‖²", l1, l2),
        link("Σ_r Σ_k ‖J_r^* e_k‖²", "<=", "Σ_r |J_r^*|_2²", l2, hs_j_adj),
        link("Σ_r |J_r^*|_2²", "=", "Σ_r |J_r|_2²", hs_j_adj, hs_j),
        link("Σ_r |J_r|_2²", "=", "Σ_r Σ_k ‖J_r e_k‖²", hs_j, l5),
        link("Σ_r Σ_k ‖J_r e_k‖²", "=", "Σ_r Σ_k ‖S_r^* e_k‖²", l5, l6),
        link(
            "Σ_r Σ_k ‖S_r^* e_k‖²",
            "<=",
            "Σ_r r^-2 Σ_k sup_r ‖r S_r^* e_k‖²",
            l6,
            weighted,
        ),
        link(
            "Σ_r r^-2 Σ_k sup_r ‖r S_r^* e_k‖²",
            "<=",
            "M^8 Σ_{r≤R} r^-2",
            weighted,
            m8 * inv_r2,
        ),
        link("M^8 Σ_{r≤R} r^-2", "<=", "M^8 π²/6", m8 * inv_r2, m8 * pi2_6),
    ];

    let f = frames.f_matrix();
    let g1 = sup_over_r(&gamma_e);
    let g2 = sum_over_r(&gamma_e);
    let g3: f64 = split.per_r.iter().map(|op| hs_norm_sq(&op.gamma)).sum();
    let g4: f64 = split.per_r.iter().map(|op| hs_norm_sq(&op.gamma.adjoint())).sum();
    let g5: f64 = split
        .per_r
        .iter()
        .map(|op| hs_norm_sq(&(op.s.adjoint() * &split.lambda * &f)))
        .sum();
    let g6 = double_basel(count, frames.e_perp.len());
    let pi4_36 = std::f64::consts::PI.powi(4) / 36.0;
    let gamma_chain = vec![
        link("Σ_k sup_r ‖Γ_r e_k‖²", "<=", "Σ_r Σ_k ‖Γ_r e_k‖²", g1, g2),
        link("Σ_r Σ_k ‖Γ_r e_k‖²", "<=", "Σ_r |Γ_r|_2²", g2, g3),
        link("Σ_r |Γ_r|_2²", "=", "Σ_r |Γ_r^*|_2²", g3, g4),
        link("Σ_r |Γ_r^*|_2²", "=", "Σ_r Σ_n ‖S_r^* Λ f_n‖²", g4, g5),
        link("Σ_r Σ_n ‖S_r^* Λ f_n‖²", "<=", "Σ_r r^-2 Σ_k ‖Λ e_k^⊥‖²", g5, g6),
        link("Σ_r r^-2 Σ_k k^-2", "<=", "π⁴/36", g6, pi4_36),
    ];
    let adjoint_hs_gap = split
        .per_r
        .iter()
        .map(|op| (hs_norm_sq(&op.j) - hs_norm_sq(&op.j.adjoint())).abs())
        .fold(0.0, f64::max);
    let holds = j_chain.iter().chain(&gamma_chain).all(|l| l.holds);
    HsLedger {
        m: sel.m,
        j_chain,
        gamma_chain,
        adjoint_hs_gap,
        holds,
    }
}
