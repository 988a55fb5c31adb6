//! Monotonicity and convexity verdicts over stored diagnostics files.
//!
//! Each claim is checked only where its hypotheses hold (speed regime,
//! driving sign, a weight preset whose curvature is certifiably
//! nonnegative, reference columns present); everywhere else the verdict is
//! recorded as not applicable with the reason.  `margin` is the worst
//! violating amount: the most negative slack of the inspected quantity, so
//! a clean pass reports a margin at or below zero.

use std::path::Path;

use serde::Serialize;

use ottolab::diagnostics::{DiagnosticsRecord, CSV_HEADER};
use ottolab::model::Speed;
use ottolab::{ops, tol};
use ottolab::{Error, Result};

use crate::config::{load_keys, ScenarioConfig};
use crate::scenario::{build_reference, sidecar_path, ReferenceAssembly};

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub applicable: bool,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl Verdict {
    pub fn skip(name: &str, why: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            applicable: false,
            pass: true,
            margin: 0.0,
            detail: why.into(),
        }
    }

    pub fn judged(name: &str, margin: f64, slack: f64, detail: String) -> Self {
        Verdict {
            name: name.to_string(),
            applicable: true,
            pass: margin <= slack,
            margin,
            detail,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FileReport {
    pub path: String,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub files: Vec<FileReport>,
    pub all_pass: bool,
}

/// Parse a diagnostics CSV, insisting on the exact header.
pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Invalid(format!(
                "{}: header {:?} does not match the diagnostics schema",
                path.display(),
                other.unwrap_or("")
            )));
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::Invalid(format!(
                    "{}: line {} is not a numeric row",
                    path.display(),
                    lineno + 2
                ))
            })?;
        if cols.len() != 16 {
            return Err(Error::Invalid(format!(
                "{}: line {} has {} columns, the schema has 16",
                path.display(),
                lineno + 2,
                cols.len()
            )));
        }
        rows.push(DiagnosticsRecord {
            t: cols[0],
            mass: cols[1],
            ent_gamma: cols[2],
            dent_dt: cols[3],
            fisher: cols[4],
            grad_ent_norm_sq: cols[5],
            second_moment: cols[6],
            kinetic: cols[7],
            hamiltonian: cols[8],
            lagrangian: cols[9],
            bochner_rhs: cols[10],
            h_cm: cols[11],
            w_cm: cols[12],
            i_cm: cols[13],
            lhs_w_formula: cols[14],
            residual: cols[15],
        });
    }
    Ok(rows)
}

/// Load the sidecar next to a diagnostics CSV and rebuild its config.
pub fn read_sidecar(csv_path: &Path) -> Result<(ScenarioConfig, serde_json::Value)> {
    let side = Path::new(&sidecar_path(&csv_path.display().to_string())).to_path_buf();
    let text = std::fs::read_to_string(&side).map_err(|e| {
        Error::Invalid(format!(
            "{}: missing sidecar {} ({e})",
            csv_path.display(),
            side.display()
        ))
    })?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("{}: sidecar JSON: {e}", side.display())))?;
    let cfg = ScenarioConfig::from_map(load_keys(&text)?)?;
    Ok((cfg, doc))
}

fn row_spacing(rows: &[DiagnosticsRecord]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let dt = rows[1].t - rows[0].t;
    if !(dt > 0.0) {
        return None;
    }
    for (j, r) in rows.iter().enumerate() {
        if (r.t - (rows[0].t + j as f64 * dt)).abs() > 1e-9 * dt.max(1.0) {
            return None;
        }
    }
    Some(dt)
}

/// Whether the configured weight certifies nonnegative curvature: the flat
/// weight is exactly flat, the quadratic weight `a r^2 / 2` with `a >= 0`
/// keeps `a - a^2 r^2 / (m - n)` checkable and is accepted only together
/// with `m > n`; the cosine weight has sign-indefinite curvature.
/// The comparison and monotonicity claims assume nonnegative curvature.
/// That is a pointwise statement on the actual grid: the quadratic weight
/// `a r^2 / 2`, for instance, loses it beyond radius `sqrt((m - n) / a)`,
/// so the node-wise minimum is what gets checked.
fn curvature_certified(cfg: &ScenarioConfig) -> std::result::Result<(), String> {
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let mu = cfg.build_measure(&grid).map_err(|e| e.to_string())?;
    let ric = ops::bakry_emery_curvature(&grid, &mu, cfg.params.m, cfg.params.n)
        .map_err(|e| e.to_string())?;
    let min = ric.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        Ok(())
    } else {
        Err(format!("the curvature dips to {min:.3e} on this grid"))
    }
}

fn slack_for(scale: f64) -> f64 {
    tol::MONOTONICITY_SLACK * scale.max(1.0)
}

/// Measurement-noise floor of a file, from its own balance residuals.  On
/// the equality case (a run that tracks the self-similar profile exactly)
/// the assembled columns carry no signal, only quadrature and stencil
/// noise, and the residual column measures that same noise through the
/// same pipeline.  The median keeps one corrupted row from widening its
/// own gate; files without reference columns store residual = 0 and get a
/// zero floor.
fn noise_floor(rows: &[DiagnosticsRecord]) -> f64 {
    let mut spread: Vec<f64> = rows.iter().map(|r| r.residual.abs()).collect();
    spread.sort_by(|a, b| a.partial_cmp(b).unwrap());
    3.0 * spread[spread.len() / 2]
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Worst increase of a series that should be non-increasing, with the time
/// where it happens.
fn worst_increase(rows: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> (f64, f64) {
    let mut worst = f64::NEG_INFINITY;
    let mut at = rows[0].t;
    for pair in rows.windows(2) {
        let inc = f(&pair[1]) - f(&pair[0]);
        if inc > worst {
            worst = inc;
            at = pair[1].t;
        }
    }
    (worst, at)
}

/// Most negative raw second difference of a series that should be convex.
fn worst_concavity(times: &[f64], values: &[f64]) -> (f64, f64) {
    let mut worst = f64::INFINITY;
    let mut at = times[0];
    for j in 1..values.len() - 1 {
        let d2 = values[j + 1] - 2.0 * values[j] + values[j - 1];
        if d2 < worst {
            worst = d2;
            at = times[j];
        }
    }
    (worst, at)
}

fn claim_h_monotone(cfg: &ScenarioConfig, rows: &[DiagnosticsRecord]) -> Verdict {
    const NAME: &str = "h-monotone";
    if cfg.params.c.finite_value().is_none() {
        return Verdict::skip(NAME, "the Hamiltonian exists only at finite speed");
    }
    let (worst, at) = worst_increase(rows, |r| r.hamiltonian);
    let scale = max_abs(rows.iter().map(|r| r.hamiltonian));
    Verdict::judged(
        NAME,
        worst,
        slack_for(scale),
        format!("worst Hamiltonian increase {worst:.3e} at t = {at}"),
    )
}

fn claim_l_convex(cfg: &ScenarioConfig, rows: &[DiagnosticsRecord]) -> Verdict {
    const NAME: &str = "l-convex";
    if cfg.params.c.finite_value().is_none() {
        return Verdict::skip(NAME, "the Lagrangian exists only at finite speed");
    }
    if cfg.params.potential_sign.value() > 0.0 {
        return Verdict::skip(
            NAME,
            "convexity in time holds under the entropy-as-negative-potential sign",
        );
    }
    if let Err(why) = curvature_certified(cfg) {
        return Verdict::skip(NAME, why);
    }
    if rows.len() < 3 {
        return Verdict::skip(NAME, "needs at least 3 rows for second differences");
    }
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.lagrangian).collect();
    let (worst, at) = worst_concavity(&times, &values);
    let scale = max_abs(values.iter().copied());
    Verdict::judged(
        NAME,
        -worst,
        slack_for(scale),
        format!("most negative Lagrangian second difference {worst:.3e} at t = {at}"),
    )
}

fn claim_w_monotone(
    cfg: &ScenarioConfig,
    rows: &[DiagnosticsRecord],
    has_reference: bool,
) -> Verdict {
    const NAME: &str = "w-monotone";
    if let Err(why) = curvature_certified(cfg) {
        return Verdict::skip(NAME, why);
    }
    if !has_reference {
        return Verdict::skip(NAME, "no reference columns in this file");
    }
    // the stored lhs is the monotone quantity in every regime: the combined
    // W'/b + I/c^2 at finite speed, W' itself in the two limits
    let mut worst = f64::INFINITY;
    let mut at = rows[0].t;
    for r in rows {
        if r.lhs_w_formula < worst {
            worst = r.lhs_w_formula;
            at = r.t;
        }
    }
    let scale = max_abs(rows.iter().map(|r| r.lhs_w_formula));
    Verdict::judged(
        NAME,
        -worst,
        slack_for(scale).max(noise_floor(rows)),
        format!("most negative monotone quantity {worst:.3e} at t = {at}"),
    )
}

fn claim_h0_convex(cfg: &ScenarioConfig, rows: &[DiagnosticsRecord]) -> Verdict {
    const NAME: &str = "h0-convex";
    if cfg.params.c != Speed::Zero {
        return Verdict::skip(NAME, "rescaled-entropy convexity is the c = 0 statement");
    }
    if let Err(why) = curvature_certified(cfg) {
        return Verdict::skip(NAME, why);
    }
    if rows.len() < 3 {
        return Verdict::skip(NAME, "needs at least 3 rows for second differences");
    }
    // t^{2-2k} Ent differs from t^{2-2k} H by an exactly linear reference
    // term (A t), so its raw second differences test the same convexity
    let k = cfg.params.k();
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let values: Vec<f64> = rows
        .iter()
        .map(|r| r.t.powf(2.0 - 2.0 * k) * r.ent_gamma)
        .collect();
    let (worst, at) = worst_concavity(&times, &values);
    let scale = max_abs(values.iter().copied());
    // the residual column carries one time difference of the point noise;
    // second differences amplify it by a further 2 / dt
    let dt = times[1] - times[0];
    Verdict::judged(
        NAME,
        -worst,
        slack_for(scale).max(noise_floor(rows) * 2.0 / dt),
        format!("most negative second difference of the rescaled entropy {worst:.3e} at t = {at}"),
    )
}

fn claim_entropy_compare(
    cfg: &ScenarioConfig,
    rows: &[DiagnosticsRecord],
    reference: Option<&ReferenceAssembly>,
) -> Verdict {
    const NAME: &str = "entropy-compare";
    let asm = match reference {
        Some(asm) => asm,
        None => return Verdict::skip(NAME, "no reference columns in this file"),
    };
    if let Err(why) = curvature_certified(cfg) {
        return Verdict::skip(NAME, why);
    }
    let scale = max_abs(rows.iter().map(|r| r.ent_gamma));
    let slack = slack_for(scale).max(noise_floor(rows));
    let first = &rows[0];
    match cfg.params.c {
        Speed::Zero => {
            if first.h_cm < -slack || first.i_cm < -slack {
                return Verdict::skip(
                    NAME,
                    format!(
                        "entropy/information ordering does not hold at the start \
                         (H = {:.3e}, I = {:.3e})",
                        first.h_cm, first.i_cm
                    ),
                );
            }
        }
        Speed::Infinite => {
            let rate0 = match asm.model.entropy_rate_at(first.t) {
                Ok(r) => r,
                Err(e) => return Verdict::skip(NAME, format!("reference rate unavailable: {e}")),
            };
            if first.h_cm < -slack || first.dent_dt - rate0 < -slack {
                return Verdict::skip(
                    NAME,
                    format!(
                        "entropy/rate ordering does not hold at the start \
                         (H = {:.3e}, relative rate = {:.3e})",
                        first.h_cm,
                        first.dent_dt - rate0
                    ),
                );
            }
        }
        Speed::Finite(_) => {
            return Verdict::skip(NAME, "the comparison statements cover the two limiting regimes");
        }
    }
    let mut worst = f64::INFINITY;
    let mut at = rows[0].t;
    for r in rows {
        if r.h_cm < worst {
            worst = r.h_cm;
            at = r.t;
        }
    }
    Verdict::judged(
        NAME,
        -worst,
        slack,
        format!("most negative relative entropy {worst:.3e} at t = {at}"),
    )
}

/// All claims for one diagnostics file.
pub fn report_file(path: &Path) -> Result<FileReport> {
    let rows = read_diagnostics(path)?;
    if rows.is_empty() {
        return Err(Error::Invalid(format!("{}: no diagnostic rows", path.display())));
    }
    let (cfg, doc) = read_sidecar(path)?;
    if row_spacing(&rows).is_none() {
        return Err(Error::Invalid(format!(
            "{}: rows are not uniformly spaced in time",
            path.display()
        )));
    }
    let has_reference = doc["meta"]["reference_columns"].as_bool().unwrap_or(false);
    let reference = if has_reference { Some(build_reference(&cfg)?) } else { None };

    let verdicts = vec![
        claim_h_monotone(&cfg, &rows),
        claim_l_convex(&cfg, &rows),
        claim_w_monotone(&cfg, &rows, has_reference),
        claim_h0_convex(&cfg, &rows),
        claim_entropy_compare(&cfg, &rows, reference.as_ref()),
    ];
    Ok(FileReport { path: path.display().to_string(), verdicts })
}

pub fn report_files(paths: &[String]) -> Result<Report> {
    let mut files = Vec::with_capacity(paths.len());
    for p in paths {
        files.push(report_file(Path::new(p))?);
    }
    let all_pass = files
        .iter()
        .flat_map(|f| &f.verdicts)
        .all(|v| !v.applicable || v.pass);
    Ok(Report { files, all_pass })
}

/// Audit of the matched-trajectory balance in a stored diagnostics file:
/// the relative columns are rebuilt from the base columns and the two
/// sides of the balance are compared, relative to the larger side.
#[derive(Debug, Serialize)]
pub struct WAudit {
    pub path: String,
    pub rows: usize,
    pub max_abs_residual: f64,
    /// largest magnitude either side of the balance reaches over the run
    pub scale: f64,
    pub relative_residual: f64,
    pub rel_tol: f64,
    /// absolute floor below which a residual passes regardless of scale;
    /// on an exact trajectory both sides vanish and only this arm applies
    pub abs_tol: f64,
    /// worst disagreement between the stored relative columns and the
    /// rebuilt ones; absent when the file was written without them
    pub stored_column_mismatch: Option<f64>,
    pub pass: bool,
}

pub fn wentropy_audit(path: &Path, rel_tol: f64) -> Result<WAudit> {
    if !(rel_tol.is_finite() && rel_tol > 0.0) {
        return Err(Error::Invalid(format!(
            "--rel-tol: must be a positive number, got {rel_tol}"
        )));
    }
    let rows = read_diagnostics(path)?;
    if rows.len() < 5 {
        return Err(Error::Invalid(format!(
            "{}: the balance stencils need at least 5 rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    let (cfg, doc) = read_sidecar(path)?;
    let asm = build_reference(&cfg)?;
    let mut rebuilt = rows.clone();
    crate::scenario::assemble_identity(&asm, &mut rebuilt)?;

    let mut max_res = 0.0f64;
    let mut scale = 0.0f64;
    for rec in &rebuilt {
        let rhs = rec.lhs_w_formula - rec.residual;
        max_res = max_res.max(rec.residual.abs());
        scale = scale.max(rec.lhs_w_formula.abs()).max(rhs.abs());
    }
    let relative = if scale > 0.0 { max_res / scale } else { 0.0 };

    let has_stored = doc
        .get("meta")
        .and_then(|m| m.get("reference_columns"))
        .and_then(|v| v.as_bool())
        .unwrap_or(false);
    let stored_column_mismatch = has_stored.then(|| {
        rows.iter()
            .zip(&rebuilt)
            .map(|(a, b)| {
                (a.h_cm - b.h_cm)
                    .abs()
                    .max((a.i_cm - b.i_cm).abs())
                    .max((a.w_cm - b.w_cm).abs())
                    .max((a.lhs_w_formula - b.lhs_w_formula).abs())
                    .max((a.residual - b.residual).abs())
            })
            .fold(0.0f64, f64::max)
    });

    Ok(WAudit {
        path: path.display().to_string(),
        rows: rows.len(),
        max_abs_residual: max_res,
        scale,
        relative_residual: relative,
        rel_tol,
        abs_tol: tol::IDENTITY_ABS,
        stored_column_mismatch,
        pass: max_res <= (rel_tol * scale).max(tol::IDENTITY_ABS),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scenario::{run_scenario, Drive};

    fn run_reference(dir: &Path, c: &str) -> std::path::PathBuf {
        let out = dir.join(format!("ref-{}.csv", c.replace('.', "_")));
        let text = format!(
            "model.gamma = 2.0\n\
             model.c = {c}\n\
             grid.kind = radial\n\
             grid.points = 2048\n\
             grid.length = 4.0\n\
             weight.preset = zero\n\
             init.preset = barenblatt\n\
             time.delta = 1.0\n\
             time.t_end = 1.4\n\
             time.dt = 0.005\n\
             time.diagnostic_stride = 10\n\
             solver.scheme = central-upwind\n\
             output.path = {}\n",
            out.display()
        );
        let cfg = ScenarioConfig::from_text(&text, &[]).unwrap();
        run_scenario(&cfg, Drive::Analytic, true, None).unwrap();
        out
    }

    #[test]
    fn reference_trajectory_passes_every_applicable_claim() {
        let dir = tempfile::tempdir().unwrap();
        let expectations: [(&str, &[&str]); 3] = [
            ("1.0", &["h-monotone", "w-monotone"]),
            ("0", &["w-monotone", "h0-convex", "entropy-compare"]),
            ("inf", &["w-monotone", "entropy-compare"]),
        ];
        for (c, expected) in expectations {
            let csv = run_reference(dir.path(), c);
            let report = report_file(&csv).unwrap();
            for v in &report.verdicts {
                assert!(
                    v.pass,
                    "c = {c}, {}: {} (margin {:.3e})",
                    v.name, v.detail, v.margin
                );
            }
            let applicable: Vec<&str> = report
                .verdicts
                .iter()
                .filter(|v| v.applicable)
                .map(|v| v.name.as_str())
                .collect();
            for name in expected {
                assert!(applicable.contains(name), "c = {c}: {name} not in {applicable:?}");
            }
        }
    }

    #[test]
    fn corrupted_entropy_column_is_caught_with_its_location() {
        let dir = tempfile::tempdir().unwrap();
        let csv = run_reference(dir.path(), "1.0");
        let text = std::fs::read_to_string(&csv).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // push the Hamiltonian column of the 5th row far upward
        let mut cols: Vec<String> = lines[5].split(',').map(String::from).collect();
        cols[8] = "1000".to_string();
        lines[5] = cols.join(",");
        std::fs::write(&csv, lines.join("\n") + "\n").unwrap();

        let report = report_file(&csv).unwrap();
        let h = report.verdicts.iter().find(|v| v.name == "h-monotone").unwrap();
        assert!(h.applicable && !h.pass, "{h:?}");
        assert!(h.detail.contains("t = "), "{}", h.detail);
    }

    #[test]
    fn schema_violations_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "time,value\n1,2\n").unwrap();
        let err = report_file(&bad).unwrap_err();
        assert!(err.to_string().contains("schema"), "{err}");
    }
}
