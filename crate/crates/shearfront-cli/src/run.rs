//! One runner per subcommand. Every runner computes all of its output
//! content first, then writes data files and the manifest in one pass, so
//! a solver failure never leaves partial results behind.

use crate::config::{ConfigDoc, RouteKind};
use clap::ValueEnum;
use rayon::prelude::*;
use shearfront::corrector::{decay_report, solvability_defect, solve_modes};
use shearfront::direct::{integrate, linear_growth_study, logistic_ramp};
use shearfront::ensemble::{fit_quadratic_law, run_ensemble, EnsembleConfig};
use shearfront::front::solve_front;
use shearfront::io::{self, Json};
use shearfront::minmax::{build_test_function, eval_psi, speed_estimate};
use shearfront::{cell::solve_cell, Error, Nonlinearity, UniformGrid};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

type Result<T> = std::result::Result<T, Error>;

/// Format of the bulk data tables. Summary reports and manifests are
/// always JSON regardless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Everything a runner needs besides its own config sections.
pub struct Task<'a> {
    pub doc: &'a ConfigDoc,
    pub seed: u64,
    pub out: &'a Path,
    pub format: Format,
}

/// Exit code for a run whose outputs were written but whose solver left
/// an unconverged flag up.
const EXIT_SOLVER: u8 = 3;

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Accumulates output files as (name, content) pairs; `finish` writes
/// them and the manifest.
struct Files<'a> {
    command: &'static str,
    task: &'a Task<'a>,
    started: u64,
    entries: Vec<(String, String)>,
}

impl<'a> Files<'a> {
    fn new(command: &'static str, task: &'a Task<'a>) -> Self {
        Self { command, task, started: now_unix(), entries: Vec::new() }
    }

    /// A bulk data table, CSV by default, column/row JSON on request.
    fn table(&mut self, what: &str, csv: String) {
        match self.task.format {
            Format::Csv => self.entries.push((format!("{}.{what}.csv", self.command), csv)),
            Format::Json => {
                let rendered = csv_table_to_json(&csv).render_pretty();
                self.entries.push((format!("{}.{what}.json", self.command), rendered));
            }
        }
    }

    /// The summary report, always JSON.
    fn summary(&mut self, report: Json) {
        self.entries.push((format!("{}.json", self.command), report.render_pretty()));
    }

    /// Writes all data files, then the manifest; on any write failure the
    /// files already placed this run are removed again.
    fn finish(self, resolved: ConfigDoc, solver_flagged: bool) -> Result<u8> {
        let names: Vec<String> = self.entries.iter().map(|(n, _)| n.clone()).collect();
        let manifest = manifest_json(self.command, self.task.seed, &resolved, &names, self.started)?
            .render_pretty();
        let mut written: Vec<PathBuf> = Vec::new();
        let mut place = |name: &str, content: &str| -> Result<()> {
            let path = self.task.out.join(name);
            io::write_atomic(&path, content)?;
            written.push(path);
            Ok(())
        };
        let result = self
            .entries
            .iter()
            .try_for_each(|(name, content)| place(name, content))
            .and_then(|()| place(&format!("{}.manifest.json", self.command), &manifest));
        if let Err(e) = result {
            for path in &written {
                let _ = std::fs::remove_file(path);
            }
            return Err(e);
        }
        Ok(if solver_flagged { EXIT_SOLVER } else { 0 })
    }
}

fn manifest_json(
    command: &str,
    seed: u64,
    resolved: &ConfigDoc,
    outputs: &[String],
    started: u64,
) -> Result<Json> {
    let value = toml::Value::try_from(resolved)
        .map_err(|e| Error::Parameter(format!("config did not serialize: {e}")))?;
    Ok(Json::Obj(vec![
        ("command".into(), Json::Str(command.into())),
        ("version".into(), Json::Str(env!("CARGO_PKG_VERSION").into())),
        ("seed".into(), Json::Int(seed as i64)),
        ("started_unix".into(), Json::Int(started as i64)),
        ("finished_unix".into(), Json::Int(now_unix() as i64)),
        ("outputs".into(), Json::Arr(outputs.iter().map(|n| Json::Str(n.clone())).collect())),
        ("config".into(), toml_to_json(&value)),
    ]))
}

fn toml_to_json(v: &toml::Value) -> Json {
    match v {
        toml::Value::String(s) => Json::Str(s.clone()),
        toml::Value::Integer(i) => Json::Int(*i),
        toml::Value::Float(f) => Json::Num(*f),
        toml::Value::Boolean(b) => Json::Bool(*b),
        toml::Value::Datetime(d) => Json::Str(d.to_string()),
        toml::Value::Array(a) => Json::Arr(a.iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => {
            Json::Obj(t.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect())
        }
    }
}

/// Re-types a CSV table as `{columns, rows}` JSON. Fields that parse as
/// integers, floats, or booleans keep their type; everything else stays a
/// string. Empty fields become null.
fn csv_table_to_json(csv: &str) -> Json {
    let mut lines = csv.lines();
    let columns: Vec<Json> =
        lines.next().unwrap_or("").split(',').map(|c| Json::Str(c.into())).collect();
    let rows = lines
        .map(|line| Json::Arr(line.split(',').map(csv_field_to_json).collect()))
        .collect();
    Json::Obj(vec![("columns".into(), Json::Arr(columns)), ("rows".into(), Json::Arr(rows))])
}

fn csv_field_to_json(field: &str) -> Json {
    if field.is_empty() {
        return Json::Null;
    }
    if field == "true" || field == "false" {
        return Json::Bool(field == "true");
    }
    if !field.contains(['.', 'e', 'n', 'i']) {
        if let Ok(i) = field.parse::<i64>() {
            return Json::Int(i);
        }
    }
    if let Ok(x) = field.parse::<f64>() {
        return Json::Num(x);
    }
    Json::Str(field.into())
}

fn nl_kind(nl: Nonlinearity) -> &'static str {
    match nl {
        Nonlinearity::Bistable { .. } => "bistable",
        Nonlinearity::Combustion { .. } => "combustion",
    }
}

pub fn front(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let front = task.doc.front.clone().unwrap_or_default();
    let nl = reaction.nonlinearity()?;
    let fp = solve_front(nl, front.half_width, front.n_nodes)?;
    let mut files = Files::new("front", task);
    files.table("profile", io::profile_csv(&fp));
    files.summary(Json::Obj(vec![
        ("c0".into(), Json::Num(fp.c0)),
        ("nonlinearity".into(), Json::Str(nl_kind(nl).into())),
        ("half_width".into(), Json::Num(front.half_width)),
        ("n_nodes".into(), Json::Int(front.n_nodes as i64)),
    ]));
    let resolved = ConfigDoc {
        reaction: Some(reaction),
        front: Some(front),
        ..Default::default()
    };
    files.finish(resolved, false)
}

pub fn sample_field(task: &Task) -> Result<u8> {
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let (sample, basis) = shear.build_sample(&cross, task.seed)?;
    let kl = basis.map_or(Json::Null, |b| {
        let captured: f64 = b.lambdas.iter().sum();
        let total = b.model.sigma2() * b.grid.width().powi(b.grid.dim() as i32);
        Json::Obj(vec![
            ("modes".into(), Json::Int(b.m as i64)),
            ("variance_captured".into(), Json::Num(captured / total)),
        ])
    });
    let mut files = Files::new("sample-field", task);
    files.table("field", io::sample_csv(&sample));
    files.summary(Json::Obj(vec![
        ("sample".into(), io::sample_json(&sample)),
        ("kl".into(), kl),
    ]));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        shear: Some(shear),
        cross: Some(cross),
        ..Default::default()
    };
    files.finish(resolved, false)
}

pub fn cell(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let front = task.doc.front.clone().unwrap_or_default();
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let nl = reaction.nonlinearity()?;
    let fp = solve_front(nl, front.half_width, front.n_nodes)?;
    let (sample, _) = shear.build_sample(&cross, task.seed)?;
    let cell = solve_cell(&sample, fp.c0)?;
    let mut files = Files::new("cell", task);
    files.table("field", io::cell_csv(&cell));
    files.summary(io::cell_json(&cell));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        reaction: Some(reaction),
        front: Some(front),
        shear: Some(shear),
        cross: Some(cross),
        ..Default::default()
    };
    files.finish(resolved, false)
}

pub fn corrector(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let front = task.doc.front.clone().unwrap_or_default();
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let nl = reaction.nonlinearity()?;
    let fp = solve_front(nl, front.half_width, front.n_nodes)?;
    let (sample, _) = shear.build_sample(&cross, task.seed)?;
    let cell = solve_cell(&sample, fp.c0)?;
    let modes = solve_modes(&cell, &fp)?;
    let decay = decay_report(&modes, &fp);
    let field = shearfront::corrector::assemble_corrector(modes, &cell, &fp)?;
    let residual = field.residual(&fp, &cell);
    let solvability = solvability_defect(&fp, cell.alpha);
    let mut files = Files::new("corrector", task);
    files.table("modes", io::decay_csv(&decay));
    files.summary(Json::Obj(vec![
        ("c4".into(), Json::Num(decay.c4)),
        ("residual".into(), Json::Num(residual)),
        ("solvability_defect".into(), Json::Num(solvability)),
        ("n_modes".into(), Json::Int(decay.entries.len() as i64)),
        ("decay".into(), io::decay_json(&decay)),
    ]));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        reaction: Some(reaction),
        front: Some(front),
        shear: Some(shear),
        cross: Some(cross),
        ..Default::default()
    };
    files.finish(resolved, false)
}

pub fn bounds(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let front = task.doc.front.clone().unwrap_or_default();
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let bounds = task.doc.bounds.clone().unwrap_or_default();
    let nl = reaction.nonlinearity()?;
    let fp = solve_front(nl, front.half_width, front.n_nodes)?;
    let (sample, _) = shear.build_sample(&cross, task.seed)?;
    let cell = solve_cell(&sample, fp.c0)?;
    let modes = solve_modes(&cell, &fp)?;
    let x1 = UniformGrid::symmetric(bounds.x1_half_width, bounds.x1_nodes)?;
    let est = speed_estimate(&fp, &cell, &modes, &sample, bounds.delta, &x1)?;
    let mut files = Files::new("bounds", task);
    if est.admissible {
        let tf = build_test_function(&fp, &cell, &modes, &sample, bounds.delta, &x1)?;
        let psi = eval_psi(&tf, &sample)?;
        files.table("psi", io::psi_csv(&tf.x1_grid, &psi));
    } else {
        eprintln!(
            "bounds: test function inadmissible at delta = {} (margin {:.3e}); \
             no functional table, bounds reported as NaN",
            est.delta, est.margin
        );
    }
    files.summary(io::estimate_json(&est));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        reaction: Some(reaction),
        front: Some(front),
        shear: Some(shear),
        cross: Some(cross),
        bounds: Some(bounds),
        ..Default::default()
    };
    files.finish(resolved, false)
}

pub fn direct(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let bounds = task.doc.bounds.clone().unwrap_or_default();
    let sim_sec = task.doc.sim.clone().unwrap_or_default();
    let nl = reaction.nonlinearity()?;
    let (sample, _) = shear.build_sample(&cross, task.seed)?;
    let mut sim = sim_sec.sim_grid(sample.grid.clone())?;
    let stable = sim.stable_dt(nl, bounds.delta, sample.sup_norm());
    if stable < sim.dt {
        eprintln!("direct: dt {} exceeds the stable step, using {stable}", sim.dt);
        sim = sim.with_dt(stable)?;
    }
    let trace = integrate(nl, &sample, bounds.delta, &sim, &logistic_ramp)?;
    if trace.unconverged {
        eprintln!(
            "direct: speed fit did not settle (residual {:.3e}); outputs are flagged",
            trace.fit_residual
        );
    }
    let mut files = Files::new("direct", task);
    files.table("trace", io::trace_csv(&trace));
    files.summary(io::trace_json(&trace));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        reaction: Some(reaction),
        shear: Some(shear),
        cross: Some(cross),
        bounds: Some(bounds),
        sim: Some(sim_sec),
        ..Default::default()
    };
    files.finish(resolved, trace.unconverged)
}

pub fn sweep(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let sim_sec = task.doc.sim.clone().unwrap_or_default();
    let sweep = task.doc.sweep.clone().unwrap_or_default();
    let nl = reaction.nonlinearity()?;
    let (sample, _) = shear.build_sample(&cross, task.seed)?;
    let mut sim = sim_sec.sim_grid(sample.grid.clone())?;
    // One shared time step across the sweep: the quadratic fit then sees a
    // common discretization bias instead of a per-delta one.
    let stable = sweep
        .deltas
        .iter()
        .map(|&d| sim.stable_dt(nl, d, sample.sup_norm()))
        .fold(f64::INFINITY, f64::min);
    if stable < sim.dt {
        eprintln!("sweep: dt {} exceeds the stable step, using {stable} for all runs", sim.dt);
        sim = sim.with_dt(stable)?;
    }
    let traces: Vec<_> = sweep
        .deltas
        .par_iter()
        .map(|&d| integrate(nl, &sample, d, &sim, &logistic_ramp))
        .collect::<Result<_>>()?;
    let stuck: Vec<f64> = sweep
        .deltas
        .iter()
        .zip(&traces)
        .filter(|(_, t)| t.unconverged)
        .map(|(&d, _)| d)
        .collect();
    if !stuck.is_empty() {
        return Err(Error::NonConvergence(format!(
            "sweep runs at delta {stuck:?} did not reach a steady speed; raise t_final"
        )));
    }
    let speeds: Vec<f64> = traces.iter().map(|t| t.fitted_speed).collect();
    let fit = fit_quadratic_law(&sweep.deltas, &speeds)?;
    let mut files = Files::new("sweep", task);
    files.table("points", io::sweep_csv(&sweep.deltas, &speeds, &fit));
    files.summary(io::sweep_json(&sweep.deltas, &speeds, &fit));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        reaction: Some(reaction),
        shear: Some(shear),
        cross: Some(cross),
        sim: Some(sim_sec),
        sweep: Some(sweep),
        ..Default::default()
    };
    files.finish(resolved, false)
}

pub fn ensemble(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let front = task.doc.front.clone().unwrap_or_default();
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let bounds = task.doc.bounds.clone().unwrap_or_default();
    let ens = task.doc.ensemble.clone().unwrap_or_default();
    let model = shear.covariance()?.ok_or_else(|| {
        Error::Parameter(
            "ensemble needs a random shear kind (ornstein_uhlenbeck or squared_exponential)"
                .into(),
        )
    })?;
    let nl = reaction.nonlinearity()?;
    let mut cfg = EnsembleConfig::new(
        model,
        nl,
        ens.n_samples,
        ens.delta,
        ens.q,
        ens.kappa,
        ens.epsilon_target,
        task.seed,
        ens.route(),
    )?;
    cfg.cross_dim = cross.dim;
    cfg.cross_nodes = cross.nodes;
    cfg.cross_len = cross.len;
    cfg.kl_modes = shear.kl_modes;
    cfg.front_half_width = front.half_width;
    cfg.front_nodes = front.n_nodes;
    cfg.x1_half_width = bounds.x1_half_width;
    cfg.x1_nodes = bounds.x1_nodes;
    let mut sim_used = None;
    if ens.route == RouteKind::WithDirect {
        let sim_sec = task.doc.sim.clone().unwrap_or_default();
        cfg.sim = Some(sim_sec.sim_grid(cross.grid()?)?);
        sim_used = Some(sim_sec);
    }
    cfg.validate()?;
    if let Some(note) = cfg.advisory() {
        eprintln!("ensemble: {note}");
    }
    let rep = run_ensemble(&cfg)?;
    if let Some(w) = &rep.warning {
        eprintln!("ensemble: {w}");
    }
    let mut files = Files::new("ensemble", task);
    files.table("samples", io::ensemble_samples_csv(&rep));
    files.summary(io::ensemble_json(&rep));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        reaction: Some(reaction),
        front: Some(front),
        shear: Some(shear),
        cross: Some(cross),
        bounds: Some(bounds),
        ensemble: Some(ens),
        sim: sim_used,
        ..Default::default()
    };
    files.finish(resolved, false)
}

pub fn large_delta(task: &Task) -> Result<u8> {
    let reaction = task.doc.reaction.clone().unwrap_or_default();
    let shear = task.doc.shear.clone().unwrap_or_default();
    let cross = task.doc.cross.clone().unwrap_or_default();
    let sim_sec = task.doc.sim.clone().unwrap_or_default();
    let ld = task.doc.large_delta.clone().unwrap_or_default();
    let nl = reaction.nonlinearity()?;
    let (sample, _) = shear.build_sample(&cross, task.seed)?;
    let sim = sim_sec.sim_grid(sample.grid.clone())?;
    let study = linear_growth_study(nl, &sample, &ld.deltas, &sim, &logistic_ramp)?;
    let flagged = study.entries.iter().any(|e| e.unconverged);
    if flagged {
        eprintln!("large-delta: some entries did not settle; outputs are flagged");
    }
    let mut files = Files::new("large-delta", task);
    files.table("trend", io::growth_csv(&study));
    files.summary(io::growth_json(&study));
    let resolved = ConfigDoc {
        seed: Some(task.seed),
        reaction: Some(reaction),
        shear: Some(shear),
        cross: Some(cross),
        sim: Some(sim_sec),
        large_delta: Some(ld),
        ..Default::default()
    };
    files.finish(resolved, flagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_tables_convert_to_typed_json() {
        let csv = "a,b,c,d\n1,5.0000000000000000e-1,true,\n-2,nan,false,text\n";
        let json = csv_table_to_json(csv).render();
        assert!(json.contains("\"columns\":[\"a\",\"b\",\"c\",\"d\"]"), "{json}");
        assert!(json.contains("[1,5.0000000000000000e-1,true,null]"), "{json}");
        assert!(json.contains("[-2,null,false,\"text\"]"), "nan becomes null: {json}");
    }

    #[test]
    fn toml_values_translate_structurally() {
        let doc: toml::Value = toml::from_str("x = 1\ny = [1.5, true]\n[s]\nk = \"v\"").unwrap();
        let json = toml_to_json(&doc).render();
        assert!(json.contains("\"x\":1"));
        assert!(json.contains("\"y\":[1.5000000000000000e0,true]"));
        assert!(json.contains("\"s\":{\"k\":\"v\"}"));
    }
}
