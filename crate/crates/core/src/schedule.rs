//! Enumeration of the wavelet children into one sequence `{u_n}`, the split
//! into `{g_k}` and `{h_k}`, and the `n(k)` schedule with its summability
//! certificates.
//!
//! Children `u_{jk}` are enumerated along square shells `max(|j|, |k|) = r`,
//! each shell walked counterclockwise starting right above `(r, -r)`.
//!
//! The `h` family collects whole scales `j = 0, -s, -2s, ...` with
//! `2^{-s/2} ≤ geometric_target`, translations nearest the origin first, so
//! `D` is constant on each block of `m` consecutive `h`'s and drops by the
//! factor `q = 2^{-s/2}` from block to block. That gives the closed-form
//! ceilings
//!
//! * `Σ_k D_{n_k} ≤ m / (1 - q)`
//! * `Σ_k k D_{n(k)} ≤ m² q / (1 - q)² + m (m + 1) / (2 (1 - q))` for any
//!   strictly increasing `n(k)`.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::wavelet::{log2_scale_bound, scale_bound, MotherWavelet, WaveletError};

/// Largest shell radius the enumeration accepts.
pub const MAX_SHELL_RADIUS: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("enumeration index {n} outside the materialized budget of {size} children")]
    BudgetExceeded { n: usize, size: usize },
    #[error("shell budget yields {available} h-children across {scales} scale(s), {required} required")]
    InsufficientNegativeScales {
        available: usize,
        required: usize,
        scales: usize,
    },
    #[error("invalid schedule parameter: {0}")]
    InvalidParameter(String),
    #[error("n(k) schedule invalid: {0}")]
    InvalidPerpSchedule(String),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

/// Scale `j` and translation `k` of `u_{jk}(s) = 2^{j/2} u(2^j s - k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ChildIndex {
    pub j: i32,
    pub k: i32,
}

impl ChildIndex {
    pub fn new(j: i32, k: i32) -> Self {
        Self { j, k }
    }

    /// Point where `|u_{jk}|` concentrates: `2^{-j} (k - 1/2)`.
    pub fn center(&self) -> f64 {
        2f64.powi(-self.j) * (self.k as f64 - 0.5)
    }

    pub fn shell(&self) -> u32 {
        self.j.unsigned_abs().max(self.k.unsigned_abs())
    }
}

/// The `n`-th pair (1-based) of the square-shell ordering.
pub fn enumerate_pairs(n: usize) -> ChildIndex {
    assert!(n >= 1, "enumeration is 1-based");
    if n == 1 {
        return ChildIndex::new(0, 0);
    }
    // shell r holds positions (2r-1)^2 + 1 ..= (2r+1)^2
    let mut r = 1usize;
    while (2 * r + 1).pow(2) < n {
        r += 1;
    }
    let offset = (n - (2 * r - 1).pow(2) - 1) as i64;
    let r = r as i64;
    let (j, k) = if offset < 2 * r {
        (r, -r + 1 + offset)
    } else if offset < 4 * r {
        (r - 1 - (offset - 2 * r), r)
    } else if offset < 6 * r {
        (-r, r - 1 - (offset - 4 * r))
    } else {
        (-r + 1 + (offset - 6 * r), -r)
    };
    ChildIndex::new(j as i32, k as i32)
}

/// Inverse of [`enumerate_pairs`].
pub fn pair_position(idx: ChildIndex) -> usize {
    let r = idx.shell() as i64;
    if r == 0 {
        return 1;
    }
    let (j, k) = (idx.j as i64, idx.k as i64);
    let offset = if j == r && k > -r {
        k + r - 1
    } else if k == r {
        2 * r + (r - 1 - j)
    } else if j == -r {
        4 * r + (r - 1 - k)
    } else {
        6 * r + (j + r - 1)
    };
    ((2 * r - 1).pow(2) + 1 + offset) as usize
}

/// Materialized square-shell enumeration `n ↔ (j_n, k_n)`.
#[derive(Clone, Debug)]
pub struct Enumeration {
    radius: u32,
    pairs: Vec<ChildIndex>,
    lookup: HashMap<ChildIndex, usize>,
}

impl Enumeration {
    pub fn new(radius: u32) -> Result<Self, ScheduleError> {
        if radius > MAX_SHELL_RADIUS {
            return Err(ScheduleError::InvalidParameter(format!(
                "shell radius {radius} exceeds {MAX_SHELL_RADIUS}"
            )));
        }
        let size = (2 * radius as usize + 1).pow(2);
        let pairs: Vec<ChildIndex> = (1..=size).map(enumerate_pairs).collect();
        let lookup = pairs.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
        Ok(Self { radius, pairs, lookup })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(j_n, k_n)` for 1-based `n`.
    pub fn pair(&self, n: usize) -> Result<ChildIndex, ScheduleError> {
        if n == 0 || n > self.pairs.len() {
            return Err(ScheduleError::BudgetExceeded {
                n,
                size: self.pairs.len(),
            });
        }
        Ok(self.pairs[n - 1])
    }

    pub fn position(&self, idx: ChildIndex) -> Option<usize> {
        self.lookup.get(&idx).copied()
    }

    pub fn pairs(&self) -> &[ChildIndex] {
        &self.pairs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    G,
    H,
}

/// Split of the enumerated children into `{g_k}` and `{h_k}`.
#[derive(Clone, Debug, Serialize)]
pub struct BasisPartition {
    geometric_target: f64,
    scale_step: u32,
    per_scale: usize,
    block_ratio: f64,
    /// enumeration positions of `h_1, h_2, ...`
    h_indices: Vec<usize>,
    /// enumeration positions of `g_1, g_2, ...`
    g_indices: Vec<usize>,
    #[serde(skip)]
    h_children: Vec<ChildIndex>,
    #[serde(skip)]
    g_children: Vec<ChildIndex>,
}

/// Smallest scale step `s ≥ 1` with `2^{-s/2} ≤ target`.
pub fn scale_step_for(geometric_target: f64) -> u32 {
    let s = (2.0 * (1.0 / geometric_target).log2() - 1e-12).ceil();
    (s as u32).max(1)
}

/// Translations ordered by distance of the child center from the origin:
/// `0, 1, -1, 2, -2, ...`.
fn translations(radius: i32) -> impl Iterator<Item = i32> {
    std::iter::once(0).chain((1..=radius).flat_map(|d| [d, -d]))
}

/// Partition per the block-geometric rule described in the module docs.
///
/// `per_scale` caps the translations taken per `h` scale (default: all
/// `2ρ + 1`); `required_h` is the number of `h`'s the caller will consume.
pub fn partition_gh(
    enumeration: &Enumeration,
    geometric_target: f64,
    per_scale: Option<usize>,
    required_h: usize,
) -> Result<BasisPartition, ScheduleError> {
    if !(geometric_target > 0.0 && geometric_target < 1.0) {
        return Err(ScheduleError::InvalidParameter(format!(
            "geometric target must lie in (0, 1), got {geometric_target}"
        )));
    }
    let radius = enumeration.radius() as i32;
    let full = 2 * radius as usize + 1;
    let per_scale = per_scale.unwrap_or(full).clamp(1, full);
    let step = scale_step_for(geometric_target);
    let mut h_children = Vec::new();
    let mut scales = 0;
    let mut j = 0i32;
    while j >= -radius {
        scales += 1;
        h_children.extend(translations(radius).take(per_scale).map(|k| ChildIndex::new(j, k)));
        j -= step as i32;
    }
    if h_children.len() < required_h.max(1) || scales < 2 && required_h > per_scale {
        return Err(ScheduleError::InsufficientNegativeScales {
            available: h_children.len(),
            required: required_h,
            scales,
        });
    }
    let h_set: std::collections::HashSet<ChildIndex> = h_children.iter().copied().collect();
    let mut g_children: Vec<ChildIndex> = enumeration
        .pairs()
        .iter()
        .copied()
        .filter(|c| !h_set.contains(c))
        .collect();
    let rank = |c: &ChildIndex| {
        let k_rank = if c.k >= 1 { 2 * c.k - 1 } else { -2 * c.k };
        (c.j.unsigned_abs(), c.j > 0, k_rank)
    };
    g_children.sort_by_key(rank);
    let position = |c: &ChildIndex| enumeration.position(*c).expect("child is enumerated");
    Ok(BasisPartition {
        geometric_target,
        scale_step: step,
        per_scale,
        block_ratio: 2f64.powf(-(step as f64) / 2.0),
        h_indices: h_children.iter().map(position).collect(),
        g_indices: g_children.iter().map(position).collect(),
        h_children,
        g_children,
    })
}

impl BasisPartition {
    pub fn geometric_target(&self) -> f64 {
        self.geometric_target
    }

    pub fn scale_step(&self) -> u32 {
        self.scale_step
    }

    pub fn per_scale(&self) -> usize {
        self.per_scale
    }

    /// `q = 2^{-s/2}`, the ratio of `D` between consecutive `h` blocks.
    pub fn block_ratio(&self) -> f64 {
        self.block_ratio
    }

    pub fn h_indices(&self) -> &[usize] {
        &self.h_indices
    }

    pub fn g_indices(&self) -> &[usize] {
        &self.g_indices
    }

    pub fn h_children(&self) -> &[ChildIndex] {
        &self.h_children
    }

    pub fn g_children(&self) -> &[ChildIndex] {
        &self.g_children
    }

    /// `h_k` or `g_k` for 1-based `k`.
    pub fn child(&self, which: Family, k: usize) -> Option<ChildIndex> {
        let list = match which {
            Family::G => &self.g_children,
            Family::H => &self.h_children,
        };
        k.checked_sub(1).and_then(|i| list.get(i)).copied()
    }

    /// `m / (1 - q)`.
    pub fn d_sum_ceiling(&self) -> f64 {
        self.per_scale as f64 / (1.0 - self.block_ratio)
    }

    /// Ceiling of `Σ_k k D_{n(k)}` valid for any strictly increasing `n(k)`.
    pub fn weighted_d_ceiling(&self) -> f64 {
        let m = self.per_scale as f64;
        let q = self.block_ratio;
        m * m * q / (1.0 - q).powi(2) + m * (m + 1.0) / (2.0 * (1.0 - q))
    }
}

/// `G_{k,i}` or `H_{k,i}` with its certified `D·A` ceiling.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SupNormGH {
    pub value: f64,
    pub ceiling: f64,
}

pub fn sup_norm_gh(
    part: &BasisPartition,
    mother: &MotherWavelet,
    which: Family,
    k: usize,
    order: usize,
) -> Result<SupNormGH, ScheduleError> {
    let child = part.child(which, k).ok_or(ScheduleError::BudgetExceeded {
        n: k,
        size: match which {
            Family::G => part.g_children.len(),
            Family::H => part.h_children.len(),
        },
    })?;
    let (d, a) = mother.bounds_da(child, order)?;
    Ok(SupNormGH {
        value: mother.child_sup(child, order)?,
        ceiling: d * a,
    })
}

/// Strictly increasing positions `n(1) < n(2) < ...` into the `h` sequence.
#[derive(Clone, Debug, Serialize)]
pub struct PerpSchedule {
    n_of_k: Vec<usize>,
}

impl PerpSchedule {
    pub fn new(n_of_k: Vec<usize>, part: &BasisPartition) -> Result<Self, ScheduleError> {
        for w in n_of_k.windows(2) {
            if w[1] <= w[0] {
                return Err(ScheduleError::InvalidPerpSchedule(format!(
                    "not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&first) = n_of_k.first() {
            if first == 0 {
                return Err(ScheduleError::InvalidPerpSchedule("positions are 1-based".into()));
            }
        }
        if let Some(&last) = n_of_k.last() {
            if last > part.h_indices.len() {
                return Err(ScheduleError::InvalidPerpSchedule(format!(
                    "n({}) = {last} exceeds the {} available h-children",
                    n_of_k.len(),
                    part.h_indices.len()
                )));
            }
        }
        Ok(Self { n_of_k })
    }

    pub fn n_of_k(&self) -> &[usize] {
        &self.n_of_k
    }

    pub fn len(&self) -> usize {
        self.n_of_k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_of_k.is_empty()
    }
}

/// Per-order certificates for the `h` family and the `n(k)` schedule.
#[derive(Clone, Debug, Serialize)]
pub struct OrderCertificate {
    pub order: usize,
    pub a_bound: f64,
    /// `Σ_{k ≤ K} H_{k,i}` over the materialized `h` family
    pub h_sum: f64,
    pub h_sum_ceiling: f64,
    /// `Σ_k k H_{n(k),i}`
    pub weighted_sum: f64,
    pub weighted_ceiling: f64,
    /// `K H_{n(K),i}`, the last increment of the weighted partial sums
    pub last_increment: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummabilityLedger {
    pub h_count: usize,
    pub d_sum: f64,
    pub d_sum_ceiling: f64,
    pub weighted_d_sum: f64,
    pub weighted_d_ceiling: f64,
    pub orders: Vec<OrderCertificate>,
    pub holds: bool,
}

pub fn summability(
    part: &BasisPartition,
    schedule: &PerpSchedule,
    mother: &MotherWavelet,
    i_max: usize,
) -> Result<SummabilityLedger, ScheduleError> {
    let d_sum: f64 = part.h_children.iter().map(|c| scale_bound(c.j)).sum();
    let weighted_d_sum: f64 = schedule
        .n_of_k
        .iter()
        .enumerate()
        .map(|(k, &n)| (k + 1) as f64 * scale_bound(part.h_children[n - 1].j))
        .sum();
    let slack = 1.0 + 1e-12;
    let mut orders = Vec::with_capacity(i_max + 1);
    for order in 0..=i_max {
        let a_bound = mother.a_bound(order)?;
        let mut h_sum = 0.0;
        for c in &part.h_children {
            h_sum += mother.child_sup(*c, order)?;
        }
        let mut weighted_sum = 0.0;
        let mut last_increment = 0.0;
        for (k, &n) in schedule.n_of_k.iter().enumerate() {
            last_increment = (k + 1) as f64 * mother.child_sup(part.h_children[n - 1], order)?;
            weighted_sum += last_increment;
        }
        let h_sum_ceiling = a_bound * part.d_sum_ceiling();
        let weighted_ceiling = a_bound * part.weighted_d_ceiling();
        orders.push(OrderCertificate {
            order,
            a_bound,
            h_sum,
            h_sum_ceiling,
            weighted_sum,
            weighted_ceiling,
            last_increment,
            holds: h_sum <= h_sum_ceiling * slack && weighted_sum <= weighted_ceiling * slack,
        });
    }
    let d_sum_ceiling = part.d_sum_ceiling();
    let weighted_d_ceiling = part.weighted_d_ceiling();
    let holds = d_sum <= d_sum_ceiling * slack
        && weighted_d_sum <= weighted_d_ceiling * slack
        && orders.iter().all(|o| o.holds);
    Ok(SummabilityLedger {
        h_count: part.h_children.len(),
        d_sum,
        d_sum_ceiling,
        weighted_d_sum,
        weighted_d_ceiling,
        orders,
        holds,
    })
}

/// Row of the enumeration table in the schedule dump.
#[derive(Clone, Debug, Serialize)]
pub struct EnumerationRow {
    pub n: usize,
    pub j: i32,
    pub k: i32,
    pub family: Family,
    /// position within its family (1-based)
    pub position: usize,
    pub log2_d: f64,
}

pub fn enumeration_table(enumeration: &Enumeration, part: &BasisPartition) -> Vec<EnumerationRow> {
    let mut role: HashMap<usize, (Family, usize)> = HashMap::new();
    for (i, &n) in part.h_indices.iter().enumerate() {
        role.insert(n, (Family::H, i + 1));
    }
    for (i, &n) in part.g_indices.iter().enumerate() {
        role.insert(n, (Family::G, i + 1));
    }
    enumeration
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (family, position) = role[&(i + 1)];
            EnumerationRow {
                n: i + 1,
                j: c.j,
                k: c.k,
                family,
                position,
                log2_d: log2_scale_bound(c.j),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::BellFunction;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn first_pair_is_origin() {
        assert_eq!(enumerate_pairs(1), ChildIndex::new(0, 0));
        assert_eq!(enumerate_pairs(2), ChildIndex::new(1, 0));
        assert_eq!(enumerate_pairs(9), ChildIndex::new(1, -1));
    }

    #[test]
    fn first_25_cover_shell_two_once() {
        let seen: HashSet<ChildIndex> = (1..=25).map(enumerate_pairs).collect();
        assert_eq!(seen.len(), 25);
        for j in -2..=2 {
            for k in -2..=2 {
                assert!(seen.contains(&ChildIndex::new(j, k)));
            }
        }
    }

    #[test]
    fn shells_are_walked_counterclockwise() {
        // consecutive pairs within a shell are lattice neighbours
        for n in 2..200 {
            let a = enumerate_pairs(n);
            let b = enumerate_pairs(n + 1);
            if a.shell() == b.shell() {
                assert_eq!((a.j - b.j).abs() + (a.k - b.k).abs(), 1, "{a:?} -> {b:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn enumeration_round_trips(n in 1usize..20_000) {
            prop_assert_eq!(pair_position(enumerate_pairs(n)), n);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let e = Enumeration::new(2).unwrap();
        assert_eq!(e.len(), 25);
        assert!(matches!(
            e.pair(26),
            Err(ScheduleError::BudgetExceeded { n: 26, size: 25 })
        ));
        assert!(e.pair(0).is_err());
        assert_eq!(
            e.position(ChildIndex::new(-2, 2)),
            Some(pair_position(ChildIndex::new(-2, 2)))
        );
    }

    #[test]
    fn translation_order_is_center_proximity() {
        let ks: Vec<i32> = translations(3).collect();
        assert_eq!(ks, vec![0, 1, -1, 2, -2, 3, -3]);
    }

    #[test]
    fn partition_is_complete_and_disjoint() {
        let e = Enumeration::new(6).unwrap();
        let p = partition_gh(&e, 0.5, None, 48).unwrap();
        assert_eq!(p.h_indices().len() + p.g_indices().len(), e.len());
        let h: HashSet<usize> = p.h_indices().iter().copied().collect();
        assert!(p.g_indices().iter().all(|n| !h.contains(n)));
        // j non-increasing along h and every h has D ≤ 1
        for w in p.h_children().windows(2) {
            assert!(w[1].j <= w[0].j);
        }
        assert!(p.h_children().iter().all(|c| c.j <= 0));
        assert_eq!(p.scale_step(), 2);
        assert!(p.block_ratio() <= 0.5 + 1e-15);
    }

    #[test]
    fn half_target_has_unit_single_scale_sum() {
        // one translation per scale: Σ D = Σ 2^{-k} ceiling 1/(1-1/2)
        let e = Enumeration::new(40).unwrap();
        let p = partition_gh(&e, 0.5, Some(1), 1).unwrap();
        let sum: f64 = p.h_children().iter().skip(1).map(|c| scale_bound(c.j)).sum();
        assert!(sum <= 1.0);
        assert!(p.h_children().iter().map(|c| scale_bound(c.j)).sum::<f64>() <= p.d_sum_ceiling());
    }

    #[test]
    fn too_small_budget_is_rejected() {
        let e = Enumeration::new(1).unwrap();
        assert!(matches!(
            partition_gh(&e, 0.5, None, 48),
            Err(ScheduleError::InsufficientNegativeScales { .. })
        ));
        assert!(partition_gh(&e, 1.5, None, 1).is_err());
    }

    #[test]
    fn perp_schedule_validation() {
        let e = Enumeration::new(4).unwrap();
        let p = partition_gh(&e, 0.5, None, 10).unwrap();
        assert!(PerpSchedule::new(vec![1, 3, 4], &p).is_ok());
        assert!(PerpSchedule::new(vec![1, 1], &p).is_err());
        assert!(PerpSchedule::new(vec![0, 1], &p).is_err());
        assert!(PerpSchedule::new(vec![1, p.h_indices().len() + 1], &p).is_err());
    }

    #[test]
    fn sup_norms_respect_ceiling_and_reference() {
        let m = MotherWavelet::new(BellFunction::default(), 256, 2).unwrap();
        let e = Enumeration::new(6).unwrap();
        let p = partition_gh(&e, 0.5, None, 48).unwrap();
        for which in [Family::G, Family::H] {
            for k in 1..=20 {
                for order in 0..=2 {
                    let v = sup_norm_gh(&p, &m, which, k, order).unwrap();
                    assert!(v.value <= v.ceiling);
                }
            }
        }
        // an h at scale -1 with the unit target step
        let p1 = partition_gh(&e, std::f64::consts::FRAC_1_SQRT_2, None, 20).unwrap();
        let k = p1.h_children().iter().position(|c| c.j == -1).unwrap() + 1;
        let v = sup_norm_gh(&p1, &m, Family::H, k, 0).unwrap();
        assert!(v.value <= std::f64::consts::FRAC_1_SQRT_2 * m.a_bound(0).unwrap());
        assert!(sup_norm_gh(&p, &m, Family::H, 10_000, 0).is_err());
    }

    #[test]
    fn deep_schedule_partial_sums_are_cauchy() {
        let m = MotherWavelet::new(BellFunction::default(), 256, 0).unwrap();
        let e = Enumeration::new(64).unwrap();
        let p = partition_gh(&e, 0.5, Some(1), 1).unwrap();
        let n: Vec<usize> = (1..=p.h_indices().len()).collect();
        let sched = PerpSchedule::new(n, &p).unwrap();
        let ledger = summability(&p, &sched, &m, 0).unwrap();
        assert!(ledger.holds);
        let increments: Vec<f64> = sched
            .n_of_k()
            .iter()
            .enumerate()
            .map(|(k, &n)| (k + 1) as f64 * m.child_sup(p.h_children()[n - 1], 0).unwrap())
            .collect();
        let tail: f64 = increments.iter().rev().take(5).sum();
        assert!(tail < 1e-6, "tail {tail}");
        let mut partial = 0.0;
        for inc in &increments {
            partial += inc;
            assert!(partial <= ledger.orders[0].weighted_ceiling);
        }
    }

    #[test]
    fn summability_ceilings_hold_for_default_partition() {
        let m = MotherWavelet::new(BellFunction::default(), 256, 2).unwrap();
        let e = Enumeration::new(6).unwrap();
        let p = partition_gh(&e, 0.5, None, 48).unwrap();
        let sched = PerpSchedule::new((1..=40).map(|k| k + k / 5).collect(), &p).unwrap();
        let ledger = summability(&p, &sched, &m, 2).unwrap();
        assert!(ledger.holds, "{ledger:?}");
    }
}
