//! End-to-end orchestration: family → `e`-selection → frames and splitting →
//! basis partition and pairing → Schmidt data → kernels per `r`.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{FamilySource, RunConfig};
use crate::decomposition::{
    complete_frame, d_ledger, hs_summability_report, select_x_sequence, split_family, DLedger, FrameSet, HsLedger,
    SplitOperators, XSelection,
};
use crate::error::Result;
use crate::grid::Grid;
use crate::kernel::{build_pairing, KernelContext, KernelField, UnitaryPairing};
use crate::operator::{
    decay_profile, select_e_sequence, DecayProfile, ESelection, OperatorError, OperatorFamily, PresetParams,
    WitnessSequence,
};
use crate::schedule::{
    partition_gh, summability, BasisPartition, Enumeration, ScheduleError, SummabilityLedger, MAX_SHELL_RADIUS,
};
use crate::schmidt::{schmidt_decompose, SchmidtData};
use crate::wavelet::{BellFunction, MotherWavelet};

/// Family summary for the reports.
#[derive(Clone, Debug, Serialize)]
pub struct FamilySummary {
    pub label: String,
    pub dim: usize,
    pub count: usize,
    pub raw_norms: Vec<f64>,
    pub norms: Vec<f64>,
    pub rescaled: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub family: OperatorFamily,
    pub witness: WitnessSequence,
    pub profile: DecayProfile,
    pub selection: ESelection,
}

impl Analysis {
    pub fn summary(&self) -> FamilySummary {
        FamilySummary {
            label: self.family.label().to_string(),
            dim: self.family.dim(),
            count: self.family.count(),
            raw_norms: self.family.raw_norms().to_vec(),
            norms: self.family.norms().to_vec(),
            rescaled: self.family.was_rescaled(),
        }
    }
}

/// Every intermediate state of a construction run.
pub struct Construction {
    pub config: RunConfig,
    pub analysis: Analysis,
    pub mother: MotherWavelet,
    pub enumeration: Enumeration,
    pub partition: BasisPartition,
    pub frames: FrameSet,
    pub split: SplitOperators,
    pub d_ledger: DLedger,
    pub x_selection: XSelection,
    pub hs_ledger: HsLedger,
    pub pairing: UnitaryPairing,
    pub summability: SummabilityLedger,
    /// Schmidt data of `J_r`, indexed by `r - 1`
    pub schmidt: Vec<SchmidtData>,
    pub grid: Grid,
    /// kernels of `S_r`, indexed by `r - 1`
    pub kernels: Vec<KernelField>,
}

pub fn load_family(cfg: &RunConfig) -> Result<OperatorFamily> {
    let fam = match &cfg.family.source {
        FamilySource::Preset(p) => OperatorFamily::preset(
            *p,
            &PresetParams {
                dim: cfg.family.dim,
                count: cfg.family.count,
                seed: cfg.family.seed,
                decay_exponent: cfg.family.decay_exponent,
            },
        )?,
        FamilySource::Matrix(path) => OperatorFamily::load_matrix_file(path)?,
    };
    Ok(fam)
}

pub fn analyze(cfg: &RunConfig) -> Result<Analysis> {
    let family = load_family(cfg)?;
    let witness = WitnessSequence::canonical(family.dim());
    let profile = decay_profile(&family, &witness)?;
    let selection = select_e_sequence(
        &family,
        &witness,
        &profile,
        cfg.schedule.rule_target,
        cfg.schedule.e_cap,
    )?;
    Ok(Analysis {
        family,
        witness,
        profile,
        selection,
    })
}

pub fn mother_wavelet(cfg: &RunConfig) -> Result<MotherWavelet> {
    let bell = BellFunction::meyer(cfg.schedule.bell_sharpness)?;
    Ok(MotherWavelet::new(
        bell,
        cfg.schedule.quadrature_nodes,
        cfg.schedule.i_max,
    )?)
}

/// The configured shell radius, or the smallest one leaving `dim` `h`'s and
/// `k_e` `g`'s.
pub fn partition_for(cfg: &RunConfig, dim: usize, k_e: usize) -> Result<(Enumeration, BasisPartition)> {
    let attempt = |radius: u32| -> std::result::Result<(Enumeration, BasisPartition), ScheduleError> {
        let enumeration = Enumeration::new(radius)?;
        let part = partition_gh(&enumeration, cfg.schedule.geometric_target, cfg.schedule.per_scale, dim)?;
        if part.g_children().len() < k_e {
            return Err(ScheduleError::BudgetExceeded {
                n: k_e,
                size: part.g_children().len(),
            });
        }
        Ok((enumeration, part))
    };
    if let Some(radius) = cfg.schedule.shell_radius {
        return Ok(attempt(radius)?);
    }
    let mut last = None;
    for radius in 1..=MAX_SHELL_RADIUS {
        match attempt(radius) {
            Ok(found) => return Ok(found),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one radius tried").into())
}

pub fn construct(cfg: &RunConfig) -> Result<Construction> {
    let analysis = analyze(cfg)?;
    let dim = analysis.family.dim();
    let mother = mother_wavelet(cfg)?;
    let (enumeration, partition) = partition_for(cfg, dim, analysis.selection.k_e())?;
    let frames = complete_frame(&analysis.selection.vectors, dim)?;
    let split = split_family(&analysis.family, &frames)?;
    let d_ledger = d_ledger(&split, &frames, &analysis.selection)?;
    let x_selection = select_x_sequence(
        &d_ledger,
        &partition,
        &mother,
        cfg.schedule.i_max,
        cfg.schedule.x_rule_target,
    )?;
    let frames = frames.with_x(x_selection.positions.clone())?;
    let hs_ledger = hs_summability_report(&split, &frames, &analysis.selection);
    let pairing = build_pairing(&frames, &partition)?;
    let summability = summability(&partition, &pairing.schedule, &mother, cfg.schedule.i_max)?;
    let schmidt = split
        .per_r
        .par_iter()
        .map(|op| schmidt_decompose(&op.j, cfg.schedule.drop_tol))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let grid = grid_for(cfg, cfg.grid.extent)?;
    let orders = cfg.orders();
    let kernels = {
        let ctx = KernelContext::new(&mother, &pairing, &frames, grid.clone(), orders)?;
        split
            .per_r
            .iter()
            .zip(&schmidt)
            .map(|(op, sd)| ctx.assemble_k(op, sd))
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    Ok(Construction {
        config: cfg.clone(),
        analysis,
        mother,
        enumeration,
        partition,
        frames,
        split,
        d_ledger,
        x_selection,
        hs_ledger,
        pairing,
        summability,
        schmidt,
        grid,
        kernels,
    })
}

/// Grid of the configured step and the given extent.
pub fn grid_for(cfg: &RunConfig, extent: f64) -> Result<Grid> {
    Grid::new(extent, cfg.grid.step).ok_or_else(|| {
        crate::config::ConfigError::InvalidValue {
            section: "grid".into(),
            key: "extent".into(),
            value: format!("{extent} (step {})", cfg.grid.step),
            reason: "grid needs at least three points".into(),
        }
        .into()
    })
}

impl Construction {
    pub fn orders(&self) -> usize {
        self.config.orders()
    }

    /// Assembly context on another grid, sharing the pairing and frames.
    pub fn context(&self, grid: Grid) -> Result<KernelContext<'_>> {
        Ok(KernelContext::new(
            &self.mother,
            &self.pairing,
            &self.frames,
            grid,
            self.orders(),
        )?)
    }

    /// Kernels of every `S_r` on another grid.
    pub fn kernels_on(&self, grid: Grid) -> Result<Vec<KernelField>> {
        let ctx = self.context(grid)?;
        Ok(self
            .split
            .per_r
            .iter()
            .zip(&self.schmidt)
            .map(|(op, sd)| ctx.assemble_k(op, sd))
            .collect::<std::result::Result<Vec<_>, _>>()?)
    }
}

/// Whether an error means the family has no admissible `e`-sequence.
pub fn is_condition_failure(err: &crate::Error) -> bool {
    matches!(err, crate::Error::Operator(OperatorError::ConditionFails { .. }))
}
