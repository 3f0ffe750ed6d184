//! Lemarié–Meyer mother wavelet
//!
//! `u(s) = (1/2π) ∫ e^{iξ(1/2 + s)} sgn ξ b(|ξ|) dξ`
//!
//! with a `C^∞` bell `b` supported on `[2π/3, 8π/3]`. Pairing `±ξ` turns the
//! integral into a real one over the support of the bell, and every derivative
//! is purely imaginary:
//!
//! `u^{(m)}(s) = i σ_m (1/π) ∫ ξ^m b(ξ) trig_m(ξ (s + 1/2)) dξ`
//!
//! where `trig_m` is `sin` for even `m`, `cos` for odd `m`, and
//! `σ_m = (-1)^{⌊m/2⌋}`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{CMatrix, C64};
use crate::schedule::ChildIndex;

pub const SUPPORT_START: f64 = 2.0 * PI / 3.0;
pub const SUPPORT_MID: f64 = 4.0 * PI / 3.0;
pub const SUPPORT_END: f64 = 8.0 * PI / 3.0;

/// Hard cap on derivative orders any configuration may request.
pub const MAX_ORDER_LIMIT: usize = 6;

const PANEL_POINTS: usize = 16;
/// Arguments `|s + 1/2|` a base node table integrates to ~1e-12.
const BASE_REACH: f64 = 40.0;
/// Node tables with 2^level times the base panel count.
const REFINEMENT_LEVELS: usize = 6;
/// Half-width, in mother-wavelet coordinates, of the window scanned for sup-norms.
const SUP_SCAN_RADIUS: f64 = 64.0;
const SUP_SCAN_STEP: f64 = 0.05;
const SUP_REFINE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveletError {
    #[error("derivative order {order} exceeds the configured budget I_max = {i_max}")]
    OrderBudgetExceeded { order: usize, i_max: usize },
    #[error("invalid wavelet parameter: {0}")]
    InvalidParameter(String),
}

/// Meyer window on `[2π/3, 8π/3]` built from the `exp(-σ/x)` transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BellFunction {
    transition_sharpness: f64,
    vanishing: bool,
}

impl BellFunction {
    pub fn meyer(transition_sharpness: f64) -> Result<Self, WaveletError> {
        if !(transition_sharpness.is_finite() && transition_sharpness > 0.0) {
            return Err(WaveletError::InvalidParameter(format!(
                "bell transition sharpness must be positive, got {transition_sharpness}"
            )));
        }
        Ok(Self {
            transition_sharpness,
            vanishing: false,
        })
    }

    /// `b ≡ 0`. Only useful to exercise degenerate paths.
    pub fn vanishing() -> Self {
        Self {
            transition_sharpness: 1.0,
            vanishing: true,
        }
    }

    pub fn transition_sharpness(&self) -> f64 {
        self.transition_sharpness
    }

    /// Smooth step `ν(x) = θ(x) / (θ(x) + θ(1 - x))`, `θ(x) = exp(-σ/x)` for `x > 0`.
    pub fn transition(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let sigma = self.transition_sharpness;
        // θ(x)/(θ(x)+θ(1-x)) = 1 / (1 + exp(σ/x - σ/(1-x)))
        1.0 / (1.0 + (sigma / x - sigma / (1.0 - x)).exp())
    }

    /// `b(ξ)`; zero outside `[2π/3, 8π/3]`.
    pub fn eval(&self, xi: f64) -> f64 {
        if self.vanishing || !(SUPPORT_START..SUPPORT_END).contains(&xi) {
            return 0.0;
        }
        if xi <= SUPPORT_MID {
            (FRAC_PI_2 * self.transition(3.0 * xi / (2.0 * PI) - 1.0)).sin()
        } else {
            (FRAC_PI_2 * self.transition(3.0 * xi / (4.0 * PI) - 1.0)).cos()
        }
    }
}

impl Default for BellFunction {
    fn default() -> Self {
        Self {
            transition_sharpness: 1.0,
            vanishing: false,
        }
    }
}

/// Composite Gauss–Legendre nodes on the bell support with the bell and `1/π`
/// folded into the weights.
#[derive(Clone, Debug)]
struct NodeTable {
    xi: Vec<f64>,
    weight: Vec<f64>,
    reach: f64,
}

impl NodeTable {
    fn build(bell: &BellFunction, rule: &GaussLegendre, panels_low: usize, panels_high: usize, reach: f64) -> Self {
        let mut xi = Vec::new();
        let mut weight = Vec::new();
        for (a, b, panels) in [
            (SUPPORT_START, SUPPORT_MID, panels_low),
            (SUPPORT_MID, SUPPORT_END, panels_high),
        ] {
            let width = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + width * p as f64;
                let half = 0.5 * width;
                for &(x, w) in rule.as_node_weight_pairs() {
                    let node = lo + half * (x + 1.0);
                    let bw = bell.eval(node);
                    if bw != 0.0 {
                        xi.push(node);
                        weight.push(w * half * bw / PI);
                    }
                }
            }
        }
        Self { xi, weight, reach }
    }

    /// `(1/π) ∫ ξ^m b(ξ) trig_m(ξ a) dξ` for `m = 0..=max_order`.
    fn moments(&self, a: f64, max_order: usize, out: &mut [f64]) {
        out[..=max_order].iter_mut().for_each(|v| *v = 0.0);
        for (&xi, &w) in self.xi.iter().zip(&self.weight) {
            let (sin, cos) = (xi * a).sin_cos();
            let mut power = w;
            for (m, slot) in out.iter_mut().enumerate().take(max_order + 1) {
                *slot += power * if m % 2 == 0 { sin } else { cos };
                power *= xi;
            }
        }
    }
}

/// Immutable mother wavelet with cached sup-norms of its derivatives.
#[derive(Clone, Debug)]
pub struct MotherWavelet {
    bell: BellFunction,
    quadrature_nodes: usize,
    i_max: usize,
    tables: Vec<NodeTable>,
    sup_norms: Vec<f64>,
}

impl MotherWavelet {
    /// Builds the node tables and estimates `‖u^{(i)}‖_C` for `i ≤ i_max`.
    pub fn new(bell: BellFunction, quadrature_nodes: usize, i_max: usize) -> Result<Self, WaveletError> {
        if i_max > MAX_ORDER_LIMIT {
            return Err(WaveletError::InvalidParameter(format!(
                "I_max = {i_max} exceeds the hard limit {MAX_ORDER_LIMIT}"
            )));
        }
        if quadrature_nodes < 2 * PANEL_POINTS {
            return Err(WaveletError::InvalidParameter(format!(
                "need at least {} quadrature nodes, got {quadrature_nodes}",
                2 * PANEL_POINTS
            )));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(PANEL_POINTS).expect("nonzero"));
        let panels = quadrature_nodes.div_ceil(PANEL_POINTS);
        // the upper piece is twice as long as the lower one
        let low = (panels / 3).max(1);
        let high = (panels - low).max(1);
        let tables = (0..REFINEMENT_LEVELS)
            .map(|level| {
                let f = 1usize << level;
                NodeTable::build(&bell, &rule, low * f, high * f, BASE_REACH * f as f64)
            })
            .collect();
        let mut mother = Self {
            bell,
            quadrature_nodes: panels * PANEL_POINTS,
            i_max,
            tables,
            sup_norms: Vec::new(),
        };
        mother.sup_norms = mother.estimate_sup_norms();
        Ok(mother)
    }

    pub fn bell(&self) -> &BellFunction {
        &self.bell
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.quadrature_nodes
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    fn check_order(&self, order: usize) -> Result<(), WaveletError> {
        if order > self.i_max {
            Err(WaveletError::OrderBudgetExceeded {
                order,
                i_max: self.i_max,
            })
        } else {
            Ok(())
        }
    }

    fn table_for(&self, a: f64) -> &NodeTable {
        let a = a.abs();
        self.tables
            .iter()
            .find(|t| a <= t.reach)
            .unwrap_or_else(|| self.tables.last().expect("at least one table"))
    }

    /// `u^{(order)}(s)`.
    pub fn eval(&self, s: f64, order: usize) -> Result<C64, WaveletError> {
        self.check_order(order)?;
        let mut buf = [0.0; MAX_ORDER_LIMIT + 1];
        Ok(self.eval_orders_into(s, order, &mut buf)[order])
    }

    /// `u^{(m)}(s)` for every `m ≤ max_order` at once.
    pub fn eval_orders(&self, s: f64, max_order: usize) -> Result<Vec<C64>, WaveletError> {
        self.check_order(max_order)?;
        let mut buf = [0.0; MAX_ORDER_LIMIT + 1];
        Ok(self.eval_orders_into(s, max_order, &mut buf)[..=max_order].to_vec())
    }

    fn eval_orders_into(
        &self,
        s: f64,
        max_order: usize,
        buf: &mut [f64; MAX_ORDER_LIMIT + 1],
    ) -> [C64; MAX_ORDER_LIMIT + 1] {
        let a = s + 0.5;
        self.table_for(a).moments(a, max_order, buf);
        let mut out = [C64::new(0.0, 0.0); MAX_ORDER_LIMIT + 1];
        for m in 0..=max_order {
            let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
            out[m] = C64::new(0.0, sign * buf[m]);
        }
        out
    }

    /// `u_{jk}^{(order)}(s) = 2^{j/2} 2^{j·order} u^{(order)}(2^j s - k)`.
    pub fn child_eval(&self, idx: ChildIndex, s: f64, order: usize) -> Result<C64, WaveletError> {
        self.check_order(order)?;
        let mut buf = [0.0; MAX_ORDER_LIMIT + 1];
        let scale = 2f64.powi(idx.j);
        let vals = self.eval_orders_into(scale * s - idx.k as f64, order, &mut buf);
        Ok(vals[order] * (scale.sqrt() * scale.powi(order as i32)))
    }

    /// All derivative orders `0..=max_order` of one child on a set of points.
    /// Row `p`, column `m` holds `u_{jk}^{(m)}(points[p])`.
    pub fn child_profile(&self, idx: ChildIndex, points: &[f64], max_order: usize) -> Result<CMatrix, WaveletError> {
        self.check_order(max_order)?;
        let scale = 2f64.powi(idx.j);
        let amp: Vec<f64> = (0..=max_order).map(|m| scale.sqrt() * scale.powi(m as i32)).collect();
        let rows: Vec<[C64; MAX_ORDER_LIMIT + 1]> = points
            .par_iter()
            .map(|&s| {
                let mut buf = [0.0; MAX_ORDER_LIMIT + 1];
                self.eval_orders_into(scale * s - idx.k as f64, max_order, &mut buf)
            })
            .collect();
        Ok(CMatrix::from_fn(points.len(), max_order + 1, |p, m| {
            rows[p][m] * amp[m]
        }))
    }

    /// Cached `‖u^{(order)}‖_{C(R)}`.
    pub fn sup_norm(&self, order: usize) -> Result<f64, WaveletError> {
        self.check_order(order)?;
        Ok(self.sup_norms[order])
    }

    pub fn sup_norms(&self) -> &[f64] {
        &self.sup_norms
    }

    /// `A_i = 2^{(i + 1/2)^2} ‖u^{(i)}‖_C`.
    pub fn a_bound(&self, order: usize) -> Result<f64, WaveletError> {
        let exponent = (order as f64 + 0.5).powi(2);
        Ok(exponent.exp2() * self.sup_norm(order)?)
    }

    /// `(D, A)` for a child and derivative order; `‖u_{jk}^{(i)}‖_C ≤ D·A`.
    /// `D` overflows to `+∞` for `j > 31`, which is still a valid ceiling.
    pub fn bounds_da(&self, idx: ChildIndex, order: usize) -> Result<(f64, f64), WaveletError> {
        Ok((scale_bound(idx.j), self.a_bound(order)?))
    }

    /// `‖u_{jk}^{(order)}‖_C` from the cached mother sup-norm; dilation and
    /// translation only rescale it by `2^{j/2 + j·order}`.
    pub fn child_sup(&self, idx: ChildIndex, order: usize) -> Result<f64, WaveletError> {
        let scale = 2f64.powi(idx.j);
        Ok(self.sup_norm(order)? * scale.sqrt() * scale.powi(order as i32))
    }

    /// Sup-norm of `u^{(order)}` by a coarse scan of the given step over
    /// `[-64, 64]` followed by local refinement of every significant peak.
    pub fn sampled_sup(&self, order: usize, coarse_step: f64) -> Result<f64, WaveletError> {
        self.check_order(order)?;
        if !(coarse_step > 0.0 && coarse_step <= 1.0) {
            return Err(WaveletError::InvalidParameter(format!(
                "sup-norm scan step must lie in (0, 1], got {coarse_step}"
            )));
        }
        Ok(self.scan_sup_norms(order, coarse_step)[order])
    }

    fn estimate_sup_norms(&self) -> Vec<f64> {
        self.scan_sup_norms(self.i_max, SUP_SCAN_STEP)
    }

    fn scan_sup_norms(&self, max_order: usize, coarse_step: f64) -> Vec<f64> {
        let count = (2.0 * SUP_SCAN_RADIUS / coarse_step).round() as usize;
        let xs: Vec<f64> = (0..=count).map(|p| -SUP_SCAN_RADIUS + p as f64 * coarse_step).collect();
        let samples: Vec<[C64; MAX_ORDER_LIMIT + 1]> = xs
            .par_iter()
            .map(|&x| {
                let mut buf = [0.0; MAX_ORDER_LIMIT + 1];
                self.eval_orders_into(x, max_order, &mut buf)
            })
            .collect();
        (0..=max_order)
            .map(|order| {
                let mags: Vec<f64> = samples.iter().map(|v| v[order].norm()).collect();
                let coarse = mags.iter().cloned().fold(0.0, f64::max);
                if coarse == 0.0 {
                    return 0.0;
                }
                let mut best = coarse;
                for p in 1..mags.len() - 1 {
                    let local_max = mags[p] >= mags[p - 1] && mags[p] >= mags[p + 1];
                    if local_max && mags[p] >= 0.5 * coarse {
                        best = best.max(self.refine_peak(xs[p], order, coarse_step));
                    }
                }
                best
            })
            .collect()
    }

    /// Doubles the sampling resolution around a coarse peak until the local
    /// maximum moves by less than the refinement tolerance.
    fn refine_peak(&self, center: f64, order: usize, coarse_step: f64) -> f64 {
        let mut buf = [0.0; MAX_ORDER_LIMIT + 1];
        let mut center = center;
        let mut step = coarse_step;
        let mut previous = self.eval_orders_into(center, order, &mut buf)[order].norm();
        for _ in 0..40 {
            step *= 0.5;
            let mut best = previous;
            let mut best_x = center;
            for p in -4..=4 {
                let x = center + p as f64 * step;
                let v = self.eval_orders_into(x, order, &mut buf)[order].norm();
                if v > best {
                    best = v;
                    best_x = x;
                }
            }
            center = best_x;
            let settled = (best - previous).abs() < SUP_REFINE_TOL * previous.max(1.0);
            previous = best;
            if settled && step < 1e-4 {
                break;
            }
        }
        previous
    }
}

/// `D` factor of the child bound: `2^{j²}` for `j > 0`, `2^{-|j|/2}` otherwise.
pub fn scale_bound(j: i32) -> f64 {
    log2_scale_bound(j).exp2()
}

pub fn log2_scale_bound(j: i32) -> f64 {
    if j > 0 {
        (j as f64).powi(2)
    } else {
        -0.5 * (j.unsigned_abs() as f64)
    }
}

/// Time-domain Gram matrix of children: trapezoid sums on a common lattice
/// fine enough for the highest scale, each child sampled on the window where
/// it exceeds the truncation level.
pub fn gram_matrix(mother: &MotherWavelet, children: &[ChildIndex]) -> CMatrix {
    const RADIUS: f64 = 40.0;
    let j_max = children.iter().map(|c| c.j).max().unwrap_or(0);
    let step = 0.25 * 2f64.powi(-j_max);
    let sampled: Vec<(i64, Vec<C64>)> = children
        .par_iter()
        .map(|&c| {
            let width = 2f64.powi(-c.j);
            let center = width * (c.k as f64 - 0.5);
            let lo = ((center - RADIUS * width) / step).floor() as i64;
            let hi = ((center + RADIUS * width) / step).ceil() as i64;
            let mut buf = [0.0; MAX_ORDER_LIMIT + 1];
            let values = (lo..=hi)
                .map(|m| {
                    let s = m as f64 * step;
                    let scale = 2f64.powi(c.j);
                    mother.eval_orders_into(scale * s - c.k as f64, 0, &mut buf)[0] * scale.sqrt()
                })
                .collect();
            (lo, values)
        })
        .collect();
    let n = children.len();
    let mut gram = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let (lo_a, va) = &sampled[a];
            let (lo_b, vb) = &sampled[b];
            let lo = (*lo_a).max(*lo_b);
            let hi = (lo_a + va.len() as i64).min(lo_b + vb.len() as i64);
            let mut acc = C64::new(0.0, 0.0);
            for m in lo..hi {
                acc += va[(m - lo_a) as usize] * vb[(m - lo_b) as usize].conj();
            }
            gram[(a, b)] = acc * step;
            gram[(b, a)] = (acc * step).conj();
        }
    }
    gram
}
