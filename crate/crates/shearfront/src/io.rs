//! Output formatting: JSON and CSV emitters with full-precision floats and
//! atomic file writes.
//!
//! Every float is printed with 17 significant digits, enough to round-trip
//! an `f64` exactly, so archived runs can be compared bitwise. Files are
//! written to a temporary sibling and renamed into place only on success.

use crate::cell::CellSolution;
use crate::corrector::DecayReport;
use crate::direct::{GrowthStudy, SpeedTrace};
use crate::ensemble::{EnsembleReport, Route, SampleRecord, SpeedSource, SweepFit};
use crate::front::FrontProfile;
use crate::minmax::SpeedEstimate;
use crate::shear::{ExceedanceReport, ShearSample};
use crate::Result;
use std::fmt::Write as _;
use std::path::Path;

/// Full-precision float: 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Minimal JSON value. Non-finite numbers render as `null`, since JSON has
/// no spelling for them.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Num(f64),
    Int(i64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, 0, false);
        s
    }

    /// Indented rendering for files meant to be read by people.
    pub fn render_pretty(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, 0, true);
        s.push('\n');
        s
    }

    fn write(&self, out: &mut String, depth: usize, pretty: bool) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Num(x) => {
                if x.is_finite() {
                    let _ = write!(out, "{x:.16e}");
                } else {
                    out.push_str("null");
                }
            }
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    if pretty {
                        indent(out, depth + 1);
                    }
                    item.write(out, depth + 1, pretty);
                }
                if pretty && !items.is_empty() {
                    indent(out, depth);
                }
                out.push(']');
            }
            Json::Obj(pairs) => {
                out.push('{');
                for (i, (key, val)) in pairs.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    if pretty {
                        indent(out, depth + 1);
                    }
                    write_escaped(out, key);
                    out.push(':');
                    if pretty {
                        out.push(' ');
                    }
                    val.write(out, depth + 1, pretty);
                }
                if pretty && !pairs.is_empty() {
                    indent(out, depth);
                }
                out.push('}');
            }
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Joins already-formatted fields into one CSV line. Fields must not
/// contain commas; everything this crate emits is numbers and plain words.
pub fn csv_line(fields: &[String]) -> String {
    debug_assert!(fields.iter().all(|f| !f.contains(',')));
    fields.join(",")
}

/// Writes content to a temporary sibling, then renames over the target so
/// a crash never leaves a half-written file.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp~");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Front profile as CSV: `xi,u,du,d2u`.
pub fn profile_csv(fp: &FrontProfile) -> String {
    let mut out = String::from("xi,u,du,d2u\n");
    for i in 0..fp.grid.len() {
        let line = csv_line(&[
            fmt_f64(fp.grid.x(i)),
            fmt_f64(fp.u[i]),
            fmt_f64(fp.du[i]),
            fmt_f64(fp.d2u[i]),
        ]);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Speed estimate as the pinned JSON record.
pub fn estimate_json(est: &SpeedEstimate) -> Json {
    Json::Obj(vec![
        ("delta".into(), Json::Num(est.delta)),
        ("c0".into(), Json::Num(est.c0)),
        ("b_bar".into(), Json::Num(est.b_bar)),
        ("gamma".into(), Json::Num(est.gamma)),
        ("lower".into(), Json::Num(est.lower)),
        ("upper".into(), Json::Num(est.upper)),
        ("asymptotic".into(), Json::Num(est.asymptotic)),
        ("direct".into(), est.direct.map_or(Json::Null, Json::Num)),
        ("admissible".into(), Json::Bool(est.admissible)),
        ("margin".into(), Json::Num(est.margin)),
    ])
}

/// Mode decay report as JSON.
pub fn decay_json(rep: &DecayReport) -> Json {
    let entries = rep
        .entries
        .iter()
        .map(|e| {
            Json::Obj(vec![
                ("jx".into(), Json::Int(e.jx as i64)),
                ("jy".into(), Json::Int(e.jy as i64)),
                ("a".into(), Json::Num(e.a)),
                ("r".into(), Json::Num(e.r)),
                ("s".into(), Json::Num(e.s)),
            ])
        })
        .collect();
    Json::Obj(vec![("entries".into(), Json::Arr(entries)), ("c4".into(), Json::Num(rep.c4))])
}

/// Mode decay table as CSV: `jx,jy,a,r,s`.
pub fn decay_csv(rep: &DecayReport) -> String {
    let mut out = String::from("jx,jy,a,r,s\n");
    for e in &rep.entries {
        out.push_str(&csv_line(&[
            e.jx.to_string(),
            e.jy.to_string(),
            fmt_f64(e.a),
            fmt_f64(e.r),
            fmt_f64(e.s),
        ]));
        out.push('\n');
    }
    out
}

/// Shear sample as CSV: one row per node, coordinates then value.
pub fn sample_csv(sample: &ShearSample) -> String {
    let dim = sample.grid.dim();
    let mut out = String::from(if dim == 1 { "y,b\n" } else { "y,z,b\n" });
    for node in 0..sample.grid.total_nodes() {
        let coords = sample.grid.coords(node);
        let mut fields: Vec<String> = coords[..dim].iter().map(|&c| fmt_f64(c)).collect();
        fields.push(fmt_f64(sample.values[node]));
        out.push_str(&csv_line(&fields));
        out.push('\n');
    }
    out
}

/// Shear sample summary as JSON.
pub fn sample_json(sample: &ShearSample) -> Json {
    Json::Obj(vec![
        ("seed".into(), Json::Int(sample.seed as i64)),
        ("mean".into(), Json::Num(sample.mean)),
        ("sup".into(), Json::Num(sample.sup_norm())),
        ("dim".into(), Json::Int(sample.grid.dim() as i64)),
        ("nodes_per_axis".into(), Json::Int(sample.grid.n_per_axis() as i64)),
        ("width".into(), Json::Num(sample.grid.width())),
    ])
}

/// Cell solution summary as JSON.
pub fn cell_json(cell: &CellSolution) -> Json {
    Json::Obj(vec![
        ("c0".into(), Json::Num(cell.c0)),
        ("grad_sq_avg".into(), Json::Num(cell.grad_sq_avg)),
        ("alpha".into(), Json::Num(cell.alpha)),
        ("gamma".into(), Json::Num(cell.gamma)),
        ("n_modes".into(), Json::Int(cell.modes.len() as i64)),
    ])
}

/// Cell potential as CSV: coordinates, chi, and `|grad chi|^2` per node.
pub fn cell_csv(cell: &CellSolution) -> String {
    let dim = cell.grid.dim();
    let mut out = String::from(if dim == 1 { "y,chi,grad_sq\n" } else { "y,z,chi,grad_sq\n" });
    for node in 0..cell.grid.total_nodes() {
        let coords = cell.grid.coords(node);
        let mut fields: Vec<String> = coords[..dim].iter().map(|&c| fmt_f64(c)).collect();
        fields.push(fmt_f64(cell.chi[node]));
        fields.push(fmt_f64(cell.grad_sq[node]));
        out.push_str(&csv_line(&fields));
        out.push('\n');
    }
    out
}

/// Front position history as CSV: `t,front_pos`.
pub fn trace_csv(trace: &SpeedTrace) -> String {
    let mut out = String::from("t,front_pos\n");
    for (t, x) in trace.times.iter().zip(&trace.front_pos) {
        out.push_str(&csv_line(&[fmt_f64(*t), fmt_f64(*x)]));
        out.push('\n');
    }
    out
}

/// Speed fit and health diagnostics of one direct run as JSON.
pub fn trace_json(trace: &SpeedTrace) -> Json {
    Json::Obj(vec![
        ("fitted_speed".into(), Json::Num(trace.fitted_speed)),
        ("fit_residual".into(), Json::Num(trace.fit_residual)),
        (
            "fit_window".into(),
            Json::Arr(vec![Json::Num(trace.fit_window.0), Json::Num(trace.fit_window.1)]),
        ),
        ("unconverged".into(), Json::Bool(trace.unconverged)),
        ("max_principle_defect".into(), Json::Num(trace.max_principle_defect)),
        ("monotone_defect".into(), Json::Num(trace.monotone_defect)),
        ("shifts".into(), Json::Int(trace.shifts as i64)),
        ("n_observations".into(), Json::Int(trace.times.len() as i64)),
    ])
}

/// Quadratic-law fit as JSON, with the sweep it came from.
pub fn sweep_json(deltas: &[f64], speeds: &[f64], fit: &SweepFit) -> Json {
    Json::Obj(vec![
        ("deltas".into(), Json::Arr(deltas.iter().map(|&d| Json::Num(d)).collect())),
        ("speeds".into(), Json::Arr(speeds.iter().map(|&c| Json::Num(c)).collect())),
        ("c0_hat".into(), Json::Num(fit.c0_hat)),
        ("lin_hat".into(), Json::Num(fit.lin_hat)),
        ("gamma_hat".into(), Json::Num(fit.gamma_hat)),
        ("residual_exponent".into(), Json::Num(fit.residual_exponent)),
        ("rms_window".into(), Json::Num(fit.rms_window)),
        ("rms_window_doubled".into(), Json::Num(fit.rms_window_doubled)),
        ("residuals".into(), Json::Arr(fit.residuals.iter().map(|&r| Json::Num(r)).collect())),
    ])
}

/// Envelope of the speed functional along the front axis as CSV:
/// `x1,psi_min,psi_max`, extrema over the cross section at each station.
/// The field is row-major with the cross index fastest, as produced by
/// the functional evaluator.
pub fn psi_csv(x1: &crate::grid::UniformGrid, field: &[f64]) -> String {
    let n1 = x1.len();
    assert!(
        n1 > 0 && field.len() % n1 == 0,
        "functional field of {} values does not tile {} stations",
        field.len(),
        n1
    );
    let stride = field.len() / n1;
    let mut out = String::from("x1,psi_min,psi_max\n");
    for i in 0..n1 {
        let row = &field[i * stride..(i + 1) * stride];
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&csv_line(&[fmt_f64(x1.x(i)), fmt_f64(lo), fmt_f64(hi)]));
        out.push('\n');
    }
    out
}

/// Sweep table as CSV: `delta,speed,fit_residual`.
pub fn sweep_csv(deltas: &[f64], speeds: &[f64], fit: &SweepFit) -> String {
    let mut out = String::from("delta,speed,fit_residual\n");
    for i in 0..deltas.len() {
        out.push_str(&csv_line(&[
            fmt_f64(deltas[i]),
            fmt_f64(speeds[i]),
            fmt_f64(fit.residuals[i]),
        ]));
        out.push('\n');
    }
    out
}

/// Large-shear trend table as CSV: `delta,speed,c_over_delta,unconverged`.
pub fn growth_csv(study: &GrowthStudy) -> String {
    let mut out = String::from("delta,speed,c_over_delta,unconverged\n");
    for e in &study.entries {
        out.push_str(&csv_line(&[
            fmt_f64(e.delta),
            fmt_f64(e.speed),
            fmt_f64(e.c_over_delta),
            e.unconverged.to_string(),
        ]));
        out.push('\n');
    }
    out
}

/// Large-shear trend study as JSON.
pub fn growth_json(study: &GrowthStudy) -> Json {
    let entries = study
        .entries
        .iter()
        .map(|e| {
            Json::Obj(vec![
                ("delta".into(), Json::Num(e.delta)),
                ("speed".into(), Json::Num(e.speed)),
                ("c_over_delta".into(), Json::Num(e.c_over_delta)),
                ("unconverged".into(), Json::Bool(e.unconverged)),
            ])
        })
        .collect();
    Json::Obj(vec![
        ("entries".into(), Json::Arr(entries)),
        ("cauchy_trend".into(), Json::Bool(study.cauchy_trend)),
    ])
}

fn route_name(route: Route) -> &'static str {
    match route {
        Route::AsymptoticOnly => "asymptotic_only",
        Route::WithBounds => "with_bounds",
        Route::WithDirect => "with_direct",
    }
}

fn source_name(source: SpeedSource) -> &'static str {
    match source {
        SpeedSource::Asymptotic => "asymptotic",
        SpeedSource::SandwichMidpoint => "sandwich_midpoint",
        SpeedSource::Direct => "direct",
    }
}

/// Ensemble aggregates as JSON. Per-sample errors are listed here in
/// full; the per-sample table itself goes to CSV, see
/// [`ensemble_samples_csv`].
pub fn ensemble_json(rep: &EnsembleReport) -> Json {
    let errors: Vec<Json> = rep
        .records
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|msg| {
                Json::Obj(vec![
                    ("index".into(), Json::Int(r.index as i64)),
                    ("message".into(), Json::Str(msg.clone())),
                ])
            })
        })
        .collect();
    Json::Obj(vec![
        ("n_samples".into(), Json::Int(rep.n_samples as i64)),
        ("n_failed".into(), Json::Int(rep.n_failed as i64)),
        ("exceed_frac".into(), Json::Num(rep.exceed_frac)),
        ("exceed_half_width".into(), Json::Num(rep.exceed_half_width)),
        ("inadmissible_frac".into(), Json::Num(rep.inadmissible_frac)),
        ("mean_gamma".into(), Json::Num(rep.mean_gamma)),
        ("se_gamma".into(), Json::Num(rep.se_gamma)),
        (
            "gamma_quartiles".into(),
            Json::Arr(rep.gamma_quartiles.iter().map(|&g| Json::Num(g)).collect()),
        ),
        ("delta".into(), Json::Num(rep.delta)),
        ("q".into(), Json::Num(rep.q)),
        ("kappa".into(), Json::Num(rep.kappa)),
        ("threshold".into(), Json::Num(rep.threshold)),
        ("epsilon_target".into(), Json::Num(rep.epsilon_target)),
        ("meets_target".into(), Json::Bool(rep.meets_target)),
        ("route".into(), Json::Str(route_name(rep.route).into())),
        ("seed".into(), Json::Int(rep.seed as i64)),
        ("warning".into(), rep.warning.as_ref().map_or(Json::Null, |w| Json::Str(w.clone()))),
        ("errors".into(), Json::Arr(errors)),
    ])
}

/// Per-sample ensemble table as CSV. Error text stays in the JSON
/// report (it may contain commas); the table carries a `failed` flag.
pub fn ensemble_samples_csv(rep: &EnsembleReport) -> String {
    let mut out = String::from(
        "index,seed,b_bar,sup_b,gamma,c_asym,c_lower,c_upper,c_direct,admissible,margin,\
         c_event,source,deviation,exceeded,failed\n",
    );
    for r in &rep.records {
        out.push_str(&sample_record_line(r));
        out.push('\n');
    }
    out
}

fn sample_record_line(r: &SampleRecord) -> String {
    csv_line(&[
        r.index.to_string(),
        r.seed.to_string(),
        fmt_f64(r.b_bar),
        fmt_f64(r.sup_b),
        fmt_f64(r.gamma),
        fmt_f64(r.c_asym),
        fmt_f64(r.c_lower),
        fmt_f64(r.c_upper),
        r.c_direct.map_or_else(|| "".into(), fmt_f64),
        r.admissible.to_string(),
        fmt_f64(r.margin),
        fmt_f64(r.c_event),
        source_name(r.source).into(),
        fmt_f64(r.deviation),
        r.exceeded.to_string(),
        (!r.ok()).to_string(),
    ])
}

/// Sup-norm exceedance report as JSON.
pub fn exceedance_json(rep: &ExceedanceReport) -> Json {
    let rows = rep
        .lambdas
        .iter()
        .zip(&rep.empirical)
        .zip(&rep.bound)
        .zip(&rep.std_err)
        .map(|(((l, emp), bound), se)| {
            Json::Obj(vec![
                ("lambda".into(), Json::Num(*l)),
                ("empirical".into(), Json::Num(*emp)),
                ("bound".into(), Json::Num(*bound)),
                ("std_err".into(), Json::Num(*se)),
            ])
        })
        .collect();
    Json::Obj(vec![
        ("rows".into(), Json::Arr(rows)),
        ("n_samples".into(), Json::Int(rep.n_samples as i64)),
        ("mean_sup".into(), Json::Num(rep.mean_sup)),
        ("rng".into(), Json::Str(rep.rng.to_string())),
        ("note".into(), Json::Str(rep.note.to_string())),
    ])
}
