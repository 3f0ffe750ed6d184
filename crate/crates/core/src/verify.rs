//! Verification suite: representation fidelity, smoothness, vanishing at
//! infinity and the structural certificates of every construction step.
//!
//! Each check yields one [`CheckEntry`]; the report is sorted by check name
//! and passes iff no non-skipped entry fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::VerifyConfig;
use crate::grid::Grid;
use crate::kernel::{FieldSet, KernelContext, KernelField};
use crate::linalg::{max_abs, unit_disc, CMatrix, CVector, C64};
use crate::pipeline::Construction;
use crate::schedule::Enumeration;
use crate::schmidt::{jacobi_svd, quarter_power, schwarz_certify, SCHWARZ_TOLERANCE};
use crate::wavelet::gram_matrix;

/// Tolerance of the wavelet Gram check.
pub const GRAM_TOLERANCE: f64 = 1e-6;
/// Tolerance of exact identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Tolerance of identities that pass through an SVD.
pub const SPECTRAL_TOLERANCE: f64 = 1e-9;
/// Tolerance of the coefficient-matrix and frame checks.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-10;
/// Ratio `d(e_K) / d(e_1)` required of the `d` ledger.
pub const D_DECAY_RATIO: f64 = 0.1;
/// Minimal in-grid `L2` mass of a child used in a test function.
pub const IN_GRID_MASS: f64 = 1.0 - 1e-6;
/// Nodes excluded at each edge by the finite-difference check.
pub const FD_MARGIN: usize = 3;
/// Safety factor of the continuity proxy.
pub const CONTINUITY_SAFETY: f64 = 10.0;
/// Children in the Gram check.
pub const GRAM_CHILDREN: usize = 32;
/// Children per representation test function.
pub const TEST_FUNCTION_TERMS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub tolerance: f64,
    pub message: String,
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl CheckEntry {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64, pass: bool, claim: &str) -> Self {
        let status = if pass { Status::Pass } else { Status::Fail };
        let message = match status {
            Status::Pass => String::new(),
            _ => format!("{claim}: measured {measured:.6e}, tolerance {tolerance:.6e}"),
        };
        Self {
            name: name.into(),
            status,
            measured,
            tolerance,
            message,
            runtime_secs: 0.0,
        }
    }

    /// `measured ≤ tolerance`.
    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, claim: &str) -> Self {
        Self::new(name, measured, tolerance, measured <= tolerance, claim)
    }

    fn skip(name: impl Into<String>, tolerance: f64, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Skip,
            measured: 0.0,
            tolerance,
            message: reason.into(),
            runtime_secs: 0.0,
        }
    }

    fn with_message(mut self, message: impl Into<String>) -> Self {
        let message = message.into();
        if !message.is_empty() {
            self.message = if self.message.is_empty() {
                message
            } else {
                format!("{}; {message}", self.message)
            };
        }
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckEntry>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub verdict: Status,
}

impl VerificationReport {
    pub fn new(mut checks: Vec<CheckEntry>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
        let (passed, failed, skipped) = (count(Status::Pass), count(Status::Fail), count(Status::Skip));
        Self {
            verdict: if failed == 0 { Status::Pass } else { Status::Fail },
            checks,
            passed,
            failed,
            skipped,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Status::Pass
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn timed(f: impl FnOnce() -> CheckEntry) -> CheckEntry {
    let start = Instant::now();
    let mut entry = f();
    entry.runtime_secs = start.elapsed().as_secs_f64();
    entry
}

/// Trapezoid `L2` norm of a sampled function.
fn l2(values: &CVector, weights: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(z, w)| z.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

/// Indices of paired children whose `L2` mass on the grid is at least
/// [`IN_GRID_MASS`].
pub fn in_grid_children(ctx: &KernelContext<'_>) -> Vec<usize> {
    let weights = ctx.grid.weights();
    let phi = ctx.profile(0);
    (0..phi.ncols())
        .filter(|&n| l2(&phi.column(n).into_owned(), &weights).powi(2) >= IN_GRID_MASS)
        .collect()
}

/// Seeded test-function coefficients supported on `candidates`.
pub fn test_functions(count: usize, candidates: &[usize], size: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut c = CVector::zeros(size);
            for _ in 0..TEST_FUNCTION_TERMS.min(candidates.len()) {
                let n = candidates[rng.random_range(0..candidates.len())];
                c[n] += unit_disc(&mut rng);
            }
            c
        })
        .collect()
}

/// Grid quadrature of `∫ K(s,t) f(t) dt` against the coefficient-space image
/// `Σ_m u_m(s) (M c)_m`; returns the largest relative `L2` discrepancy.
pub fn representation_check(
    name: &str,
    ctx: &KernelContext<'_>,
    field: &KernelField,
    count: usize,
    seed: u64,
    tolerance: f64,
) -> CheckEntry {
    let candidates = in_grid_children(ctx);
    if candidates.is_empty() {
        return CheckEntry::skip(name, tolerance, "no paired child has its mass inside the grid");
    }
    let weights = ctx.grid.weights();
    let w = CVector::from_iterator(weights.len(), weights.iter().map(|&x| C64::new(x, 0.0)));
    let mut worst = 0.0_f64;
    for c in test_functions(count, &candidates, ctx.pairing.len(), seed) {
        let f = ctx.synthesize(&c, 0);
        let quadrature = field.k.values() * f.component_mul(&w);
        let exact = ctx.synthesize(&(&field.coefficients * &c), 0);
        let reference = l2(&exact, &weights);
        let gap = l2(&(&quadrature - &exact), &weights);
        let rel = if reference > 0.0 {
            gap / reference
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(rel);
    }
    CheckEntry::at_most(name, worst, tolerance, "integral operator reproduces T f").with_message(format!(
        "{} candidate children, {count} test functions",
        candidates.len()
    ))
}

/// Sixth-order central first difference at `i` of a sequence.
fn fd6(v: impl Fn(usize) -> C64, i: usize, h: f64) -> C64 {
    const C: [f64; 3] = [45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0];
    let mut acc = C64::new(0.0, 0.0);
    for (m, c) in C.iter().enumerate() {
        let d = m + 1;
        acc += (v(i + d) - v(i - d)) * *c;
    }
    acc / h
}

/// Location and relative size of the worst finite-difference mismatch.
#[derive(Clone, Debug, Default)]
struct Mismatch {
    rel: f64,
    at: Option<(usize, usize, (usize, usize))>,
}

/// Finite differences of each stored field against the next stored
/// derivative, plus an adjacent-sample continuity proxy.
pub fn smoothness_check(name: &str, fields: &FieldSet, grid: &Grid, tolerance: f64) -> CheckEntry {
    let n = grid.len();
    if n <= 2 * FD_MARGIN + 1 {
        return CheckEntry::skip(name, tolerance, "grid too small for the finite-difference stencil");
    }
    let h = grid.step();
    let interior = FD_MARGIN..n - FD_MARGIN;
    let mut worst = Mismatch::default();
    for (idx, &(i, j)) in fields.pairs.iter().enumerate() {
        let base = &fields.fields[idx];
        for (next, along_s) in [((i + 1, j), true), ((i, j + 1), false)] {
            let Some(deriv) = fields.get(next.0, next.1) else {
                continue;
            };
            let scale = max_abs(deriv);
            if scale == 0.0 {
                let fd_max = max_abs(base);
                if fd_max > 0.0 {
                    worst = Mismatch {
                        rel: f64::INFINITY,
                        at: Some((0, 0, (i, j))),
                    };
                }
                continue;
            }
            let rows: Vec<(f64, usize, usize)> = interior
                .clone()
                .into_par_iter()
                .map(|a| {
                    let mut best = (0.0, a, FD_MARGIN);
                    for b in interior.clone() {
                        let fd = if along_s {
                            fd6(|x| base[(x, b)], a, h)
                        } else {
                            fd6(|x| base[(a, x)], b, h)
                        };
                        let e = (fd - deriv[(a, b)]).norm() / scale;
                        if e > best.0 {
                            best = (e, a, b);
                        }
                    }
                    best
                })
                .collect();
            for (e, a, b) in rows {
                if e > worst.rel {
                    worst = Mismatch {
                        rel: e,
                        at: Some((a, b, (i, j))),
                    };
                }
            }
        }
    }
    let jump = continuity_proxy(fields, grid);
    let pass = worst.rel <= tolerance && jump.is_none();
    let mut entry = CheckEntry::new(
        name,
        worst.rel,
        tolerance,
        pass,
        "stored derivative fields are consistent",
    );
    if let Some((a, b, (i, j))) = worst.at {
        if worst.rel > tolerance {
            let p = grid.points();
            entry = entry.with_message(format!(
                "worst at field ({i},{j}), s = {}, t = {} (node {a}, {b})",
                p[a], p[b]
            ));
        }
    }
    if let Some(msg) = jump {
        entry = entry.with_message(msg);
    }
    entry
}

/// Flags an adjacent-sample jump above `step × local derivative bound ×`
/// [`CONTINUITY_SAFETY`], using the stored derivative along that direction.
fn continuity_proxy(fields: &FieldSet, grid: &Grid) -> Option<String> {
    let n = grid.len();
    let h = grid.step();
    let p = grid.points();
    for (idx, &(i, j)) in fields.pairs.iter().enumerate() {
        let base = &fields.fields[idx];
        let floor = max_abs(base) * 1e-12;
        for (next, along_s) in [((i + 1, j), true), ((i, j + 1), false)] {
            let Some(deriv) = fields.get(next.0, next.1) else {
                continue;
            };
            let local = |a: usize, b: usize| -> f64 {
                let (lo, hi) = (a.saturating_sub(1), (a + 2).min(n - 1));
                (lo..=hi)
                    .map(|x| {
                        if along_s {
                            deriv[(x, b)].norm()
                        } else {
                            deriv[(b, x)].norm()
                        }
                    })
                    .fold(0.0, f64::max)
            };
            for a in 0..n - 1 {
                for b in 0..n {
                    let (z0, z1) = if along_s {
                        (base[(a, b)], base[(a + 1, b)])
                    } else {
                        (base[(b, a)], base[(b, a + 1)])
                    };
                    let bound = h * local(a, b) * CONTINUITY_SAFETY + floor;
                    if (z1 - z0).norm() > bound {
                        let (s, t) = if along_s { (p[a], p[b]) } else { (p[b], p[a]) };
                        return Some(format!(
                            "jump {:.3e} in field ({i},{j}) near s = {s}, t = {t} exceeds {bound:.3e}",
                            (z1 - z0).norm()
                        ));
                    }
                }
            }
        }
    }
    None
}

/// Maxima of `|F|` over the boundary ring and over the interior of the grid.
pub fn ring_maxima(field: &CMatrix, grid: &Grid, ring_fraction: f64) -> (f64, f64) {
    let n = grid.len();
    let ring: Vec<bool> = (0..n).map(|i| grid.is_boundary(i, ring_fraction)).collect();
    let mut boundary = 0.0_f64;
    let mut interior = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            let v = field[(a, b)].norm();
            if ring[a] || ring[b] {
                boundary = boundary.max(v);
            } else {
                interior = interior.max(v);
            }
        }
    }
    (boundary, interior)
}

fn profile_maxima(values: &[f64], grid: &Grid, ring_fraction: f64) -> (f64, f64) {
    let mut boundary = 0.0_f64;
    let mut interior = 0.0_f64;
    for (i, v) in values.iter().enumerate() {
        if grid.is_boundary(i, ring_fraction) {
            boundary = boundary.max(*v);
        } else {
            interior = interior.max(*v);
        }
    }
    (boundary, interior)
}

/// Boundary-ring over interior maxima of every field and of the Carleman
/// profiles `s ↦ ‖∂^i k(s)‖`.
pub fn vanishing_check(
    name: &str,
    ctx: &KernelContext<'_>,
    field: &KernelField,
    margin_fraction: f64,
    ring_fraction: f64,
) -> CheckEntry {
    let mut ratios: Vec<(String, f64, f64)> = field
        .k
        .pairs
        .iter()
        .zip(&field.k.fields)
        .map(|(&(i, j), f)| {
            let (b, int) = ring_maxima(f, &ctx.grid, ring_fraction);
            (format!("K({i},{j})"), b, int)
        })
        .collect();
    for order in 0..=field.orders() {
        let (b, int) = profile_maxima(&ctx.carleman_profile(field, order), &ctx.grid, ring_fraction);
        ratios.push((format!("k^({order})"), b, int));
    }
    if ratios.iter().all(|(_, _, int)| *int == 0.0) {
        return CheckEntry::skip(name, margin_fraction, "kernel vanishes on the interior");
    }
    let (worst_name, worst) = ratios
        .iter()
        .map(|(n, b, int)| {
            let r = if *int > 0.0 {
                b / int
            } else if *b == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            (n.clone(), r)
        })
        .fold((String::new(), 0.0_f64), |acc, x| if x.1 > acc.1 { x } else { acc });
    let entry = CheckEntry::at_most(name, worst, margin_fraction, "kernel vanishes at infinity")
        .with_message(format!("largest ratio in {worst_name}"));
    if margin_fraction >= 1.0 {
        let mut e = entry.with_message("warning: margin fraction ≥ 1 makes this check degenerate");
        e.status = Status::Pass;
        return e;
    }
    entry
}

/// Boundary maxima of every field over nested extents must strictly
/// decrease as the extent grows.
pub fn nested_extent_check(name: &str, per_extent: &[(f64, Vec<f64>)]) -> CheckEntry {
    if per_extent.iter().all(|(_, b)| b.iter().all(|&x| x == 0.0)) {
        return CheckEntry::skip(name, 1.0, "kernel vanishes on every grid");
    }
    let mut worst = 0.0_f64;
    let mut at = String::new();
    for w in per_extent.windows(2) {
        for (idx, (small, large)) in w[0].1.iter().zip(&w[1].1).enumerate() {
            let r = if *small > 0.0 {
                large / small
            } else if *large == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if r >= worst {
                worst = r;
                at = format!("field {idx}, extents {} → {}", w[0].0, w[1].0);
            }
        }
    }
    let mut entry = CheckEntry::new(
        name,
        worst,
        1.0,
        worst < 1.0,
        "boundary maxima decrease with the grid extent",
    );
    if entry.status == Status::Fail {
        entry = entry.with_message(at);
    }
    entry
}

/// Bitwise `B_r` kernel = `r ×` `S_r` kernel, and its coefficients against
/// `F^* B_r F`.
pub fn scalar_recovery_check(name: &str, c: &Construction, r: usize) -> CheckEntry {
    let s_field = &c.kernels[r - 1];
    let b_field = s_field.scaled_to_b();
    let factor = r as f64;
    let mut bitwise = true;
    for (fs, fb) in s_field.k.fields.iter().zip(&b_field.k.fields) {
        bitwise &= fs.iter().zip(fb.iter()).all(|(a, b)| *a * factor == *b);
    }
    let fm = c.frames.f_matrix();
    let direct = fm.adjoint() * c.analysis.family.b(r) * &fm;
    let gap = max_abs(&(&b_field.coefficients - direct));
    let tolerance = COEFFICIENT_TOLERANCE * factor;
    CheckEntry::new(
        name,
        gap,
        tolerance,
        bitwise && gap <= tolerance,
        "scalar factors pass through the kernel",
    )
    .with_message(if bitwise {
        ""
    } else {
        "samples differ from r × S-kernel"
    })
}

fn structural(c: &Construction, cfg: &VerifyConfig) -> Vec<CheckEntry> {
    let mut out = Vec::new();
    out.push(timed(|| {
        let enumeration = Enumeration::new(c.enumeration.radius().max(3)).expect("radius within limits");
        let children: Vec<_> = enumeration.pairs().iter().copied().take(GRAM_CHILDREN).collect();
        let gram = gram_matrix(&c.mother, &children);
        let dev = max_abs(&(gram - CMatrix::identity(children.len(), children.len())));
        CheckEntry::at_most("wavelet.gram", dev, GRAM_TOLERANCE, "children are orthonormal")
    }));
    out.push(timed(|| {
        CheckEntry::at_most(
            "decomposition.frames",
            c.frames.gram_deviation(),
            COEFFICIENT_TOLERANCE,
            "f-frame is orthonormal",
        )
    }));
    out.push(timed(|| {
        CheckEntry::at_most(
            "decomposition.splitting",
            c.split.reconstruction_error.max(c.split.rank_form_error),
            IDENTITY_TOLERANCE,
            "S = Q + J^*",
        )
    }));
    out.push(timed(|| {
        let failing: Vec<&str> = c
            .hs_ledger
            .j_chain
            .iter()
            .chain(&c.hs_ledger.gamma_chain)
            .filter(|l| !l.holds)
            .map(|l| l.lhs.as_str())
            .collect();
        CheckEntry::new(
            "decomposition.hs_chains",
            failing.len() as f64,
            0.0,
            c.hs_ledger.holds,
            "Hilbert-Schmidt chains hold link by link",
        )
        .with_message(failing.join(", "))
    }));
    out.push(timed(|| {
        let ledger = &c.d_ledger;
        if ledger.entries.len() < 2 || ledger.final_to_initial.is_none() {
            return CheckEntry::skip(
                "decomposition.d_decay",
                D_DECAY_RATIO,
                "d vanishes or fewer than two e's",
            );
        }
        let ratio = ledger.final_to_initial.unwrap_or(0.0);
        CheckEntry::new(
            "decomposition.d_decay",
            ratio,
            D_DECAY_RATIO,
            ledger.decreasing_after_first && ratio < D_DECAY_RATIO,
            "d(e_k) decreases to zero",
        )
        .with_message(format!(
            "strictly decreasing after the first term: {}",
            ledger.decreasing_after_first
        ))
    }));
    out.push(timed(|| {
        let sel = &c.analysis.selection;
        CheckEntry::new(
            "selection.e",
            sel.m,
            sel.m_ceiling,
            sel.holds(),
            "quarter-power sum of the e-selection is bounded",
        )
    }));
    out.push(timed(|| {
        let x = &c.x_selection;
        let worst = x
            .certificates
            .iter()
            .map(|cert| cert.sum - cert.ceiling)
            .fold(f64::NEG_INFINITY, f64::max);
        CheckEntry::new(
            "selection.x",
            worst.max(0.0),
            0.0,
            x.certificates.iter().all(|cert| cert.holds),
            "x-selection certificates hold",
        )
    }));
    out.push(timed(|| {
        let s = &c.summability;
        CheckEntry::new(
            "schedule.summability",
            s.weighted_d_sum,
            s.weighted_d_ceiling,
            s.holds,
            "h-family summability certificates hold",
        )
    }));
    for (r, (op, sd)) in c.split.per_r.iter().zip(&c.schmidt).enumerate() {
        let r = r + 1;
        let dim = c.frames.dim();
        let a = quarter_power(sd, dim, dim);
        out.push(timed(|| {
            let name = format!("schmidt.r{r}.quarter_power");
            let mut from_a = match jacobi_svd(&a.matrix) {
                Ok(svd) => svd.singular_values,
                Err(e) => return CheckEntry::new(name, f64::INFINITY, SPECTRAL_TOLERANCE, false, &e.to_string()),
            };
            let mut from_j = match jacobi_svd(&op.j) {
                Ok(svd) => svd.singular_values,
                Err(e) => return CheckEntry::new(name, f64::INFINITY, SPECTRAL_TOLERANCE, false, &e.to_string()),
            };
            from_a.sort_by(|x, y| y.total_cmp(x));
            from_j.sort_by(|x, y| y.total_cmp(x));
            let gap = from_a
                .iter()
                .zip(&from_j)
                .map(|(sa, sj)| (sa.powi(4) - sj).abs())
                .fold(0.0, f64::max);
            CheckEntry::at_most(name, gap, SPECTRAL_TOLERANCE, "singulars(A)^4 = singulars(J)")
        }));
        out.push(timed(|| {
            let name = format!("schmidt.r{r}.schwarz");
            match schwarz_certify(&a, &op.j, cfg.schwarz_samples, cfg.seed.wrapping_add(r as u64)) {
                Ok(rep) => CheckEntry::at_most(
                    name,
                    (-rep.min_slack.min(rep.min_slack_adjoint)).max(0.0),
                    SCHWARZ_TOLERANCE,
                    "Schwarz certificates for A and A^*",
                )
                .with_message(format!(
                    "{} samples, 0 violations, min slack {:.3e}",
                    rep.samples,
                    rep.min_slack.min(rep.min_slack_adjoint)
                )),
                Err(e) => CheckEntry::new(name, f64::INFINITY, SCHWARZ_TOLERANCE, false, &e.to_string()),
            }
        }));
        out.push(timed(|| {
            let field = &c.kernels[r - 1];
            CheckEntry::at_most(
                format!("kernel.r{r}.coefficients"),
                field.provenance.coefficient_error,
                COEFFICIENT_TOLERANCE,
                "K coefficients equal F^* S F",
            )
        }));
        out.push(timed(|| {
            let field = &c.kernels[r - 1];
            let finite = field.k.is_finite() && field.p.is_finite() && field.f.is_finite();
            let mismatches: usize = field
                .k
                .fields
                .iter()
                .zip(field.p.fields.iter().zip(&field.f.fields))
                .map(|(k, (p, f))| {
                    k.iter()
                        .zip(p.iter().zip(f.iter()))
                        .filter(|(k, (p, f))| **k != **p + **f)
                        .count()
                })
                .sum();
            CheckEntry::new(
                format!("kernel.r{r}.parts"),
                mismatches as f64,
                0.0,
                finite && mismatches == 0,
                "K = P + F with finite fields",
            )
        }));
        out.push(timed(|| {
            scalar_recovery_check(&format!("kernel.r{r}.scalar_recovery"), c, r)
        }));
    }
    out
}

/// `(extent, boundary maximum per field)` for one kernel.
type ExtentMaxima = Vec<(f64, Vec<f64>)>;

/// Boundary maxima of every field of every kernel on nested grids.
fn nested_maxima(c: &Construction, cfg: &VerifyConfig) -> crate::Result<Vec<ExtentMaxima>> {
    let mut per_r = vec![Vec::new(); c.kernels.len()];
    for &extent in &cfg.nested_extents {
        let grid = crate::pipeline::grid_for(&c.config, extent)?;
        let kernels = if grid.same_lattice(&c.grid) && (extent - c.grid.extent()).abs() < 1e-12 {
            None
        } else {
            Some(c.kernels_on(grid.clone())?)
        };
        let fields = kernels.as_deref().unwrap_or(&c.kernels);
        for (r, field) in fields.iter().enumerate() {
            let maxima = field
                .k
                .fields
                .iter()
                .map(|f| ring_maxima(f, &grid, cfg.ring_fraction).0)
                .collect();
            per_r[r].push((extent, maxima));
        }
    }
    Ok(per_r)
}

/// Runs the full suite against a finished construction.
pub fn verify_construction(c: &Construction) -> crate::Result<VerificationReport> {
    let cfg = &c.config.verify;
    let mut checks = structural(c, cfg);
    let ctx = c.context(c.grid.clone())?;
    for (idx, field) in c.kernels.iter().enumerate() {
        let r = idx + 1;
        let seed = cfg.seed.wrapping_mul(31).wrapping_add(r as u64);
        checks.push(timed(|| {
            representation_check(
                &format!("kernel.r{r}.representation"),
                &ctx,
                field,
                cfg.test_functions,
                seed,
                cfg.representation_tolerance,
            )
        }));
        checks.push(timed(|| {
            let b = field.scaled_to_b();
            representation_check(
                &format!("kernel.r{r}.representation_b"),
                &ctx,
                &b,
                cfg.test_functions,
                seed,
                cfg.representation_tolerance,
            )
        }));
        checks.push(timed(|| {
            smoothness_check(&format!("kernel.r{r}.smoothness"), &field.k, &c.grid, cfg.fd_tolerance)
        }));
        checks.push(timed(|| {
            vanishing_check(
                &format!("kernel.r{r}.vanishing"),
                &ctx,
                field,
                cfg.margin_fraction,
                cfg.ring_fraction,
            )
        }));
    }
    let start = Instant::now();
    let nested = nested_maxima(c, cfg)?;
    let elapsed = start.elapsed().as_secs_f64() / nested.len().max(1) as f64;
    for (idx, per_extent) in nested.iter().enumerate() {
        let mut entry = nested_extent_check(&format!("kernel.r{}.nested_extents", idx + 1), per_extent);
        entry.runtime_secs = elapsed;
        checks.push(entry);
    }
    Ok(VerificationReport::new(checks))
}
