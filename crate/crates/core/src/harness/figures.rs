use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::gibbs::{GibbsRow, GIBBS_FILE};
use super::output::{write_rows, write_text};
use super::sigma::SIGMA_FILE;
use super::svg::{render, Mark, Series};
use super::verify::{ProfileRow, VERIFY_PROFILES_FILE};
use super::HarnessError;
use crate::current::SigmaCurve;

/// Figures whose data the harness can emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureId {
    /// `log(E f+ E f-)` per site against the product-measure value `12K`.
    /// Columns: `i_over_N, log_product, stderr, reference_12K`.
    LocalGibbs,
    /// Fitted corrections, one curve per coupling. Columns: `k, omega, sigma`.
    Sigma,
    /// Simulated and PDE profiles, one panel per field. Columns as in
    /// [`ProfileRow`].
    PdeComparison,
}

impl FigureId {
    pub const ALL: [FigureId; 3] = [
        FigureId::LocalGibbs,
        FigureId::Sigma,
        FigureId::PdeComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::LocalGibbs => "local-gibbs",
            FigureId::Sigma => "sigma",
            FigureId::PdeComparison => "pde-comparison",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// File each input run directory must provide.
    pub fn input_file(self) -> &'static str {
        match self {
            FigureId::LocalGibbs => GIBBS_FILE,
            FigureId::Sigma => SIGMA_FILE,
            FigureId::PdeComparison => VERIFY_PROFILES_FILE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub k: f64,
    pub omega: f64,
    pub sigma: f64,
}

/// Each curve sampled at `samples + 1` points across its scan range.
pub fn sigma_rows(curves: &[SigmaCurve], samples: usize) -> Vec<SigmaRow> {
    let mut rows = Vec::new();
    for c in curves {
        let w = c.scan_half_width();
        for i in 0..=samples {
            let omega = -w + 2.0 * w * i as f64 / samples as f64;
            rows.push(SigmaRow {
                k: c.k,
                omega,
                sigma: c.eval(omega),
            });
        }
    }
    rows
}

fn finish(
    out: &Path,
    stem: &str,
    svg: Option<String>,
    written: &mut Vec<PathBuf>,
) -> Result<(), HarnessError> {
    written.push(out.join(format!("{stem}.csv")));
    if let Some(text) = svg {
        let p = out.join(format!("{stem}.svg"));
        write_text(&p, &text)?;
        written.push(p);
    }
    Ok(())
}

pub fn emit_local_gibbs(
    rows: &[GibbsRow],
    out: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Missing("local-Gibbs profile rows".into()));
    }
    std::fs::create_dir_all(out)?;
    let stem = "local_gibbs";
    write_rows(&out.join(format!("{stem}.csv")), rows)?;
    let picture = svg.then(|| {
        render(
            "log(E f+ E f-) per site",
            "i/N",
            "log product",
            &[
                Series {
                    label: "measured".into(),
                    points: rows.iter().map(|r| (r.i_over_n, r.log_product)).collect(),
                    mark: Mark::Dots,
                },
                Series {
                    label: "12K".into(),
                    points: vec![(0.0, rows[0].reference_12k), (1.0, rows[0].reference_12k)],
                    mark: Mark::Line,
                },
            ],
        )
    });
    let mut written = Vec::new();
    finish(out, stem, picture, &mut written)?;
    Ok(written)
}

pub fn emit_sigma(
    curves: &[SigmaCurve],
    out: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    if curves.is_empty() {
        return Err(HarnessError::Missing("sigma curves".into()));
    }
    std::fs::create_dir_all(out)?;
    let rows = sigma_rows(curves, 200);
    let stem = "sigma";
    write_rows(&out.join(format!("{stem}.csv")), &rows)?;
    let picture = svg.then(|| {
        let series: Vec<Series> = curves
            .iter()
            .map(|c| Series {
                label: format!("K = {}", c.k),
                points: rows
                    .iter()
                    .filter(|r| r.k == c.k)
                    .map(|r| (r.omega, r.sigma))
                    .collect(),
                mark: Mark::Line,
            })
            .collect();
        render("fitted sigma", "omega", "sigma", &series)
    });
    let mut written = Vec::new();
    finish(out, stem, picture, &mut written)?;
    Ok(written)
}

pub fn emit_pde_comparison(
    rows: &[ProfileRow],
    out: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Missing("PDE comparison profile rows".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut fields: Vec<&str> = rows.iter().map(|r| r.field.as_str()).collect();
    fields.sort_unstable();
    fields.dedup();
    let mut written = Vec::new();
    for field in fields {
        let panel: Vec<ProfileRow> = rows.iter().filter(|r| r.field == field).cloned().collect();
        let stem = format!("pde_comparison_{field}");
        write_rows(&out.join(format!("{stem}.csv")), &panel)?;
        let picture = svg.then(|| {
            let mut ns: Vec<usize> = panel.iter().map(|r| r.n).collect();
            ns.sort_unstable();
            ns.dedup();
            let top = *ns.last().expect("panel is nonempty");
            let largest: Vec<&ProfileRow> = panel.iter().filter(|r| r.n == top).collect();
            let mut series: Vec<Series> = ns
                .iter()
                .map(|&n| Series {
                    label: format!("KMC N = {n}"),
                    points: panel
                        .iter()
                        .filter(|r| r.n == n)
                        .map(|r| (r.x, r.kmc))
                        .collect(),
                    mark: Mark::Dots,
                })
                .collect();
            series.push(Series {
                label: "corrected PDE".into(),
                points: largest.iter().map(|r| (r.x, r.pde_sigma)).collect(),
                mark: Mark::Line,
            });
            series.push(Series {
                label: "sigma = 1 PDE".into(),
                points: largest.iter().map(|r| (r.x, r.pde_one)).collect(),
                mark: Mark::Line,
            });
            render(field, "x", field, &series)
        });
        finish(out, &stem, picture, &mut written)?;
    }
    Ok(written)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<Vec<T>, _>>()?)
}

/// Emits the data of figure `id` from persisted run directories.
///
/// Every input is checked before anything is written, and all missing files
/// are named in the error.
pub fn emit_figure_data(
    inputs: &[PathBuf],
    id: FigureId,
    out: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::Missing("no input run directories".into()));
    }
    let missing: Vec<String> = inputs
        .iter()
        .map(|d| d.join(id.input_file()))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::Missing(missing.join(", ")));
    }
    match id {
        FigureId::LocalGibbs => {
            let mut rows: Vec<GibbsRow> = Vec::new();
            for d in inputs {
                rows.extend(read_rows::<GibbsRow>(&d.join(GIBBS_FILE))?);
            }
            emit_local_gibbs(&rows, out, svg)
        }
        FigureId::Sigma => {
            let curves = inputs
                .iter()
                .map(|d| SigmaCurve::load(&d.join(SIGMA_FILE)))
                .collect::<Result<Vec<_>, _>>()?;
            emit_sigma(&curves, out, svg)
        }
        FigureId::PdeComparison => {
            let mut rows: Vec<ProfileRow> = Vec::new();
            for d in inputs {
                rows.extend(read_rows::<ProfileRow>(&d.join(VERIFY_PROFILES_FILE))?);
            }
            emit_pde_comparison(&rows, out, svg)
        }
    }
}
