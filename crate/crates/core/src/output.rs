//! Report and table writers. Every file is a pure function of the run
//! state, so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::decomposition::{DLedger, FrameRef, HsLedger, XSelection};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{KernelField, KernelProvenance, PairingRow};
use crate::operator::{DecayProfile, ESelection};
use crate::pipeline::{Analysis, Construction, FamilySummary};
use crate::schedule::{enumeration_table, BasisPartition, EnumerationRow, SummabilityLedger};
use crate::schmidt::{nuclearity_report, quarter_power, schwarz_certify, NuclearityReport, SchwarzReport};
use crate::verify::VerificationReport;
use crate::wavelet::{log2_scale_bound, MotherWavelet};

/// One emitted file, relative to the output directory.
#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    /// multiply the stored `S_r` kernel by this to obtain the `B_r` kernel
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_factor: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub family: String,
    pub grid: Grid,
    pub orders: usize,
    pub files: Vec<ManifestEntry>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

#[derive(Serialize)]
struct AnalysisReport<'a> {
    config: &'a RunConfig,
    family: FamilySummary,
    profile: &'a DecayProfile,
    selection: &'a ESelection,
}

pub fn write_analysis(dir: &Path, cfg: &RunConfig, analysis: &Analysis) -> Result<PathBuf> {
    ensure_dir(dir)?;
    write_json(
        dir,
        "analysis.json",
        &AnalysisReport {
            config: cfg,
            family: analysis.summary(),
            profile: &analysis.profile,
            selection: &analysis.selection,
        },
    )
}

#[derive(Serialize)]
struct ScheduleReport<'a> {
    shell_radius: u32,
    partition: &'a BasisPartition,
    enumeration: Vec<EnumerationRow>,
    n_of_k: &'a [usize],
    summability: &'a SummabilityLedger,
}

#[derive(Serialize)]
struct DecompositionReport<'a> {
    dim: usize,
    e_witnesses: &'a [usize],
    f_order: &'a [FrameRef],
    x_positions: &'a [usize],
    frame_gram_deviation: f64,
    splitting_error: f64,
    rank_form_error: f64,
    d_ledger: &'a DLedger,
    x_selection: &'a XSelection,
    hs_chains: &'a HsLedger,
    pairing: &'a [PairingRow],
}

#[derive(Serialize)]
struct SchmidtEntry {
    r: usize,
    rank: usize,
    singulars: Vec<f64>,
    dropped: Vec<f64>,
    sweeps: usize,
    quarter_singulars: Vec<f64>,
    nuclearity: NuclearityReport,
    schwarz: Option<SchwarzReport>,
}

#[derive(Serialize)]
struct KernelSidecar<'a> {
    csv: String,
    columns: Vec<String>,
    provenance: &'a KernelProvenance,
    p_terms: usize,
    f_terms: usize,
    n_of_k: &'a [usize],
    x_positions: &'a [usize],
}

fn kernel_columns(field: &KernelField) -> Vec<String> {
    let mut cols = vec!["s".to_string(), "t".to_string(), "re_K".to_string(), "im_K".to_string()];
    for &(i, j) in field.k.pairs.iter().skip(1) {
        cols.push(format!("re_K_{i}{j}"));
        cols.push(format!("im_K_{i}{j}"));
    }
    cols
}

/// Kernel samples, one row per `(s, t)` with `s` outer.
pub fn write_kernel_csv(path: &Path, field: &KernelField) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(kernel_columns(field))?;
    let p = field.grid.points();
    let mut record = Vec::with_capacity(4 + 2 * field.k.fields.len());
    for (a, s) in p.iter().enumerate() {
        for (b, t) in p.iter().enumerate() {
            record.clear();
            record.push(s.to_string());
            record.push(t.to_string());
            for f in &field.k.fields {
                let z = f[(a, b)];
                record.push(z.re.to_string());
                record.push(z.im.to_string());
            }
            w.write_record(&record)?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// All construction reports, the kernel files and the manifest.
pub fn write_construction(dir: &Path, c: &Construction) -> Result<Manifest> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    let mut record = |path: PathBuf, kind: &'static str, r: Option<usize>, scale_factor: Option<f64>| {
        files.push(ManifestEntry {
            path: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            kind,
            r,
            scale_factor,
        });
    };
    record(write_analysis(dir, &c.config, &c.analysis)?, "analysis", None, None);
    record(
        write_json(
            dir,
            "schedule.json",
            &ScheduleReport {
                shell_radius: c.enumeration.radius(),
                partition: &c.partition,
                enumeration: enumeration_table(&c.enumeration, &c.partition),
                n_of_k: c.pairing.schedule.n_of_k(),
                summability: &c.summability,
            },
        )?,
        "schedule",
        None,
        None,
    );
    record(
        write_json(
            dir,
            "decomposition.json",
            &DecompositionReport {
                dim: c.frames.dim(),
                e_witnesses: &c.analysis.selection.indices,
                f_order: c.frames.f_order(),
                x_positions: c.frames.x_positions(),
                frame_gram_deviation: c.frames.gram_deviation(),
                splitting_error: c.split.reconstruction_error,
                rank_form_error: c.split.rank_form_error,
                d_ledger: &c.d_ledger,
                x_selection: &c.x_selection,
                hs_chains: &c.hs_ledger,
                pairing: &c.pairing.rows,
            },
        )?,
        "decomposition",
        None,
        None,
    );
    let dim = c.frames.dim();
    let schmidt: Vec<SchmidtEntry> = c
        .split
        .per_r
        .iter()
        .zip(&c.schmidt)
        .map(|(op, sd)| {
            let a = quarter_power(sd, dim, dim);
            let seed = c.config.verify.seed.wrapping_add(op.r as u64);
            SchmidtEntry {
                r: op.r,
                rank: sd.rank(),
                singulars: sd.singulars.clone(),
                dropped: sd.dropped.clone(),
                sweeps: sd.sweeps,
                schwarz: schwarz_certify(&a, &op.j, c.config.verify.schwarz_samples, seed).ok(),
                quarter_singulars: a.singulars,
                nuclearity: nuclearity_report(sd),
            }
        })
        .collect();
    record(write_json(dir, "schmidt.json", &schmidt)?, "schmidt", None, None);
    for field in &c.kernels {
        let name = format!("kernel_r{}.csv", field.r);
        let path = dir.join(&name);
        write_kernel_csv(&path, field)?;
        record(path, "kernel", Some(field.r), Some(field.r as f64));
        let sidecar = KernelSidecar {
            csv: name,
            columns: kernel_columns(field),
            provenance: &field.provenance,
            p_terms: field.provenance.p.terms,
            f_terms: field.provenance.f.terms,
            n_of_k: c.pairing.schedule.n_of_k(),
            x_positions: c.frames.x_positions(),
        };
        record(
            write_json(dir, &format!("kernel_r{}.json", field.r), &sidecar)?,
            "kernel-provenance",
            Some(field.r),
            None,
        );
    }
    let manifest = Manifest {
        family: c.analysis.family.label().to_string(),
        grid: c.grid.clone(),
        orders: c.orders(),
        files,
    };
    write_json(dir, "manifest.json", &manifest)?;
    Ok(manifest)
}

pub fn write_verification(dir: &Path, report: &VerificationReport) -> Result<PathBuf> {
    ensure_dir(dir)?;
    write_json(dir, "verification.json", report)
}

#[derive(Serialize)]
struct WaveletSummary {
    bell_sharpness: f64,
    quadrature_nodes: usize,
    i_max: usize,
    sup_norms: Vec<f64>,
    a_bounds: Vec<f64>,
    log2_d: Vec<(i32, f64)>,
    table: String,
}

/// `wavelet.csv` with `s`, `Re u^{(i)}`, `Im u^{(i)}`, `|u^{(i)}|` for every
/// order, and `wavelet.json` with sup-norms and the `D`/`A` bounds.
pub fn write_wavelet(dir: &Path, mother: &MotherWavelet, grid: &Grid) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let orders = mother.i_max();
    let csv_path = dir.join("wavelet.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["s".to_string()];
    for i in 0..=orders {
        let suffix = if i == 0 { String::new() } else { format!("_d{i}") };
        header.push(format!("re_u{suffix}"));
        header.push(format!("im_u{suffix}"));
        header.push(format!("abs_u{suffix}"));
    }
    w.write_record(&header)?;
    for &s in grid.points() {
        let values = mother.eval_orders(s, orders)?;
        let mut row = vec![s.to_string()];
        for z in values {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
            row.push(z.norm().to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    let summary = WaveletSummary {
        bell_sharpness: mother.bell().transition_sharpness(),
        quadrature_nodes: mother.quadrature_nodes(),
        i_max: orders,
        sup_norms: mother.sup_norms().to_vec(),
        a_bounds: (0..=orders)
            .map(|i| mother.a_bound(i))
            .collect::<std::result::Result<_, _>>()?,
        log2_d: (-6..=6).map(|j| (j, log2_scale_bound(j))).collect(),
        table: "wavelet.csv".into(),
    };
    let json_path = write_json(dir, "wavelet.json", &summary)?;
    Ok(vec![csv_path, json_path])
}
