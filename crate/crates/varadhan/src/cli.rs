//! Command-line orchestrator: one TOML config in, CSV/JSON artifacts and
//! a run manifest out.
//!
//! The orchestrator itself is single-threaded; Monte Carlo commands
//! parallelize internally over replications according to the configured
//! worker count.  Nothing is written before the config parses and
//! validates, every artifact embeds the config hash, and all numeric
//! content is a pure function of `(config, seed)`.
//!
//! Exit codes (mapped in the binary from [`Error::exit_code`]): 0 on
//! success, 2 for config/usage errors, 3 for numerical failures, 4 for
//! violated hypotheses (flat objectives where a unique mean is required).

use crate::asymptotics::{gradient_limit, hessian_limit, j_limit, sigma_t, sigma_zero};
use crate::config::{Config, ExperimentKind, OutputFormat};
use crate::error::{Error, Result};
use crate::manifold::FlatTorus;
use crate::montecarlo::{
    run_clt_function, run_clt_mean, run_clt_variance, run_ulln, ExperimentReport,
};
use crate::report::{experiment_csv, format_f64, write_json, write_text, CsvTable, RunManifest};
use crate::varadhan::{VaradhanFunction, DEFAULT_START_RES};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

/// Smoothed Fréchet means on flat tori: grids, correction terms,
/// small-bandwidth limits, and Monte Carlo experiments.
#[derive(Debug, Parser)]
#[command(name = "varadhan-cli", version, about)]
pub struct Cli {
    /// Pipeline to run.
    #[command(subcommand)]
    pub command: Command,
}

/// One pipeline per subcommand; all share the same argument surface.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the smoothed objective on a grid and locate its minimizers.
    Varadhan(RunArgs),
    /// Tabulate the cut-locus correction term along the delta schedule.
    Jterm(RunArgs),
    /// Small-bandwidth limits: gradient and Hessian gaps, covariance series.
    Asymptotics(RunArgs),
    /// Uniform-convergence Monte Carlo experiment.
    Ulln(RunArgs),
    /// Central-limit Monte Carlo experiment (mean, variance, or function).
    Clt(RunArgs),
}

/// Config path plus the only permitted overrides.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Path to the TOML config.
    pub config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Override the configured RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the configured replication count.
    #[arg(short = 'R', long)]
    pub replications: Option<usize>,
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Varadhan(a) => cmd_varadhan(a),
        Command::Jterm(a) => cmd_jterm(a),
        Command::Asymptotics(a) => cmd_asymptotics(a),
        Command::Ulln(a) => cmd_ulln(a),
        Command::Clt(a) => cmd_clt(a),
    }
}

// ---------------------------------------------------------------------------
// Shared run context
// ---------------------------------------------------------------------------

/// Parsed config with overrides applied, its hash, and the open manifest.
struct Run {
    config: Config,
    hash: String,
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    /// Parse and validate the config, apply CLI overrides, and open the
    /// manifest.  Nothing touches the filesystem on failure.
    fn load(args: &RunArgs) -> Result<Run> {
        let mut config = Config::from_path(&args.config)?;
        if let Some(dir) = &args.output_dir {
            config.output.dir = dir.display().to_string();
        }
        if let Some(seed) = args.seed {
            config.experiment.seed = seed;
        }
        if let Some(r) = args.replications {
            if r == 0 {
                return Err(Error::Config(
                    "replication override must be at least 1".into(),
                ));
            }
            config.experiment.replications = r;
        }
        let hash = config.hash()?;
        let out_dir = PathBuf::from(&config.output.dir);
        let manifest = RunManifest::start(hash.clone(), config.experiment.seed);
        Ok(Run {
            config,
            hash,
            out_dir,
            manifest,
        })
    }

    /// Write one CSV artifact and record it in the manifest.
    fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        write_text(&self.out_dir.join(name), &table.render(&self.hash))?;
        self.manifest.record(name);
        Ok(())
    }

    /// Write one hash-stamped JSON artifact and record it.
    fn write_json<T: serde::Serialize>(&mut self, name: &str, payload: &T) -> Result<()> {
        write_json(&self.out_dir.join(name), &self.hash, payload)?;
        self.manifest.record(name);
        Ok(())
    }

    /// Emit an experiment report in the configured format(s) under the
    /// given file stem and close the run.
    fn emit_experiment(mut self, stem: &str, report: &ExperimentReport) -> Result<()> {
        let format = self.config.output.format;
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            self.write_json(&format!("{stem}_report.json"), report)?;
        }
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let table = experiment_csv(report)?;
            self.write_csv(&format!("{stem}_series.csv"), &table)?;
        }
        self.finish()
    }

    /// Stamp the finish time and write `manifest.json`.
    fn finish(self) -> Result<()> {
        self.manifest.finish(&self.out_dir)
    }
}

fn column_refs(cols: &[String]) -> Vec<&str> {
    cols.iter().map(|s| s.as_str()).collect()
}

// ---------------------------------------------------------------------------
// varadhan: objective surfaces and minimizers
// ---------------------------------------------------------------------------

/// Tabulate the population objective on a uniform grid for every
/// configured `t` (`varadhan_grid.csv`) and locate the minimizer at each
/// (`varadhan_means.csv`).  Flat objectives are reported, not rejected:
/// the means file carries a `flat` flag per row.
fn cmd_varadhan(args: &RunArgs) -> Result<()> {
    let mut run = Run::load(args)?;
    let density = run.config.density()?;
    let kernel = run.config.kernel()?;
    let dim = density.dim();
    let mfd = FlatTorus::new(dim)?;
    let grid = mfd.grid(run.config.experiment.grid_res)?;
    let t_list = run.config.schedules.t_list.clone();
    let res = run.config.experiment.res;

    let mut grid_cols: Vec<String> = vec!["t".into()];
    grid_cols.extend((0..dim).map(|j| format!("x_{j}")));
    grid_cols.push("F_value".into());
    let mut grid_table = CsvTable::new(&column_refs(&grid_cols));

    let mut mean_cols: Vec<String> = vec!["t".into()];
    mean_cols.extend((0..dim).map(|j| format!("mean_{j}")));
    mean_cols.extend(
        ["variance", "uniqueness_margin", "converged", "flat"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut mean_table = CsvTable::new(&column_refs(&mean_cols));

    for &t in &t_list {
        let f = VaradhanFunction::population(density.clone(), t, res, kernel)?;
        for x in &grid {
            let mut row = vec![format_f64(t)];
            row.extend(x.iter().map(|c| format_f64(*c)));
            row.push(format_f64(f.eval(x)?));
            grid_table.push(row)?;
        }
        let m = f.minimize(DEFAULT_START_RES)?;
        let mut row = vec![format_f64(t)];
        row.extend(m.minimizer.iter().map(|c| format_f64(*c)));
        row.push(format_f64(m.value));
        row.push(format_f64(m.uniqueness_margin));
        row.push(u8::from(m.converged).to_string());
        row.push(u8::from(m.flat).to_string());
        mean_table.push(row)?;
    }

    run.write_csv("varadhan_grid.csv", &grid_table)?;
    run.write_csv("varadhan_means.csv", &mean_table)?;
    run.finish()
}

// ---------------------------------------------------------------------------
// jterm: the cut-locus correction term
// ---------------------------------------------------------------------------

/// Tabulate the band integral over the `(delta, t)` schedule at the
/// Fréchet mean (`jterm.csv`): one row per evaluation with the per-delta
/// spread, then a final extrapolated row at `delta = 0, t = 0` with the
/// cross-delta spread.  A flat objective is fine here; the term is
/// well-defined pointwise and is evaluated at the grid minimizer.
fn cmd_jterm(args: &RunArgs) -> Result<()> {
    let mut run = Run::load(args)?;
    let density = run.config.density()?;
    let kernel = run.config.kernel()?;
    let sched = run.config.jterm_schedule()?;
    let dim = density.dim();

    let f = VaradhanFunction::population(density.clone(), 0.0, sched.res, kernel)?;
    let base = f.minimize(DEFAULT_START_RES)?.minimizer;
    let table = j_limit(&density, &base, &sched, &kernel)?;

    let mut cols: Vec<String> = vec!["delta".into(), "t".into()];
    for j in 0..dim {
        for k in 0..dim {
            cols.push(format!("J_{j}_{k}"));
        }
    }
    cols.push("spread".into());
    let mut csv = CsvTable::new(&column_refs(&cols));

    for row in &table.rows {
        let spread = table
            .per_delta
            .iter()
            .find(|s| s.delta == row.delta)
            .map(|s| s.spread)
            .unwrap_or(f64::NAN);
        let mut cells = vec![format_f64(row.delta), format_f64(row.t)];
        cells.extend(row.j.iter().map(|v| format_f64(*v)));
        cells.push(format_f64(spread));
        csv.push(cells)?;
    }
    let mut cells = vec![format_f64(0.0), format_f64(0.0)];
    cells.extend(table.extrapolated.iter().map(|v| format_f64(*v)));
    cells.push(format_f64(table.spread));
    csv.push(cells)?;

    run.write_csv("jterm.csv", &csv)?;
    run.finish()
}

// ---------------------------------------------------------------------------
// asymptotics: small-bandwidth limit diagnostics
// ---------------------------------------------------------------------------

/// Tabulate the small-`t` limit diagnostics (`asymptotics.csv`): per
/// configured `t > 0`, the gradient gap against the log-map target, the
/// Hessian gap against the corrected limit, and the sandwich covariance;
/// then a final `t = 0` row with the limit covariance itself (gap cells
/// empty).  The probe is the first configured probe point, or the
/// Fréchet mean when none is given.
fn cmd_asymptotics(args: &RunArgs) -> Result<()> {
    let mut run = Run::load(args)?;
    let density = run.config.density()?;
    let kernel = run.config.kernel()?;
    let sched = run.config.jterm_schedule()?;
    let t_list = run.config.schedules.t_list.clone();
    let res = run.config.experiment.res;
    let dim = density.dim();
    if let Some(&bad) = t_list.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::Config(format!(
            "asymptotics requires strictly positive diffusion times; got {bad} in [schedules].t_list"
        )));
    }

    let mfd = FlatTorus::new(dim)?;
    let base = match run.config.experiment.probes.first() {
        Some(p) => mfd.canonicalize(p)?,
        None => {
            let f = VaradhanFunction::population(density.clone(), 0.0, res, kernel)?;
            f.minimize(DEFAULT_START_RES)?.minimizer
        }
    };

    let grad = gradient_limit(&density, &base, &t_list, res, &kernel)?;
    let hess = hessian_limit(&density, &base, &sched, &kernel)?;
    let limit = sigma_zero(&density, &sched, &kernel)?;

    let mut cols: Vec<String> = vec!["t".into(), "gradient_gap".into(), "hessian_gap".into()];
    for j in 0..dim {
        for k in 0..dim {
            cols.push(format!("Sigma_{j}_{k}"));
        }
    }
    cols.push("sigma_var".into());
    let mut csv = CsvTable::new(&column_refs(&cols));

    for (row, &t) in grad.rows.iter().zip(&t_list) {
        let cov = sigma_t(&density, t, res, &kernel)?;
        let hess_gap = (&cov.hess - &hess.limit).norm();
        let mut cells = vec![
            format_f64(t),
            format_f64(row.gap),
            format_f64(hess_gap),
        ];
        cells.extend(cov.sigma_t.iter().map(|v| format_f64(*v)));
        cells.push(format_f64(cov.sigma_var));
        csv.push(cells)?;
    }
    let mut cells = vec![format_f64(0.0), String::new(), String::new()];
    cells.extend(limit.sigma_t.iter().map(|v| format_f64(*v)));
    cells.push(format_f64(limit.sigma_var));
    csv.push(cells)?;

    run.write_csv("asymptotics.csv", &csv)?;
    run.finish()
}

// ---------------------------------------------------------------------------
// ulln / clt: Monte Carlo experiments
// ---------------------------------------------------------------------------

/// Run the uniform-convergence experiment configured under
/// `[experiment]` and emit `ulln_report.json` / `ulln_series.csv`.  The
/// CSV holds exactly one row per `(t, n, statistic)`.
fn cmd_ulln(args: &RunArgs) -> Result<()> {
    let run = Run::load(args)?;
    if run.config.experiment.kind != ExperimentKind::Ulln {
        return Err(Error::Config(format!(
            "the ulln subcommand requires [experiment].kind = \"ulln\", got \"{:?}\"",
            run.config.experiment.kind
        )));
    }
    let exp = run.config.experiment_config()?;
    let report = run_ulln(&exp)?;
    run.emit_experiment("ulln", &report)
}

/// Run the central-limit experiment configured under `[experiment]`
/// (mean, variance, or function flavor) and emit `clt_report.json` /
/// `clt_series.csv`.
fn cmd_clt(args: &RunArgs) -> Result<()> {
    let run = Run::load(args)?;
    let exp = run.config.experiment_config()?;
    let report = match run.config.experiment.kind {
        ExperimentKind::CltMean => run_clt_mean(&exp)?,
        ExperimentKind::CltVariance => run_clt_variance(&exp)?,
        ExperimentKind::CltFunction => {
            let probes = run.config.experiment.probes.clone();
            run_clt_function(&exp, &probes)?
        }
        ExperimentKind::Ulln => {
            return Err(Error::Config(
                "the clt subcommand requires a clt_* experiment kind; use the ulln subcommand \
                 for [experiment].kind = \"ulln\""
                    .into(),
            ))
        }
    };
    run.emit_experiment("clt", &report)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use std::path::Path;

    fn args(config: &Path, out: &Path) -> RunArgs {
        RunArgs {
            config: config.to_path_buf(),
            output_dir: Some(out.to_path_buf()),
            seed: None,
            replications: None,
        }
    }

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.toml");
        fs::write(&path, body).unwrap();
        path
    }

    fn base_toml(kind: &str, extra_experiment: &str) -> String {
        format!(
            r#"
[manifold]
dim = 1

[density]
kind = "von_mises"
mu = [0.0]
kappa = [2.0]

[schedules]
t_list = [0.1, 0.05]

[experiment]
kind = "{kind}"
n_list = [20, 40]
R = 4
seed = 7
res = 64
audit_res = 16
grid_res = 8
workers = 1
{extra_experiment}
[output]
dir = "unused"
format = "both"
"#
        )
    }

    fn read(dir: &Path, name: &str) -> String {
        fs::read_to_string(dir.join(name)).unwrap()
    }

    fn data_rows(csv: &str) -> usize {
        // Total lines minus the hash comment and the header.
        csv.lines().count() - 2
    }

    #[test]
    fn varadhan_command_writes_grid_and_means() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), &base_toml("ulln", ""));
        let out = tmp.path().join("out");
        cmd_varadhan(&args(&cfg, &out)).unwrap();

        let grid = read(&out, "varadhan_grid.csv");
        assert!(grid.starts_with("# config_hash="));
        assert!(grid.lines().nth(1).unwrap() == "t,x_0,F_value");
        assert_eq!(data_rows(&grid), 2 * 8);

        let means = read(&out, "varadhan_means.csv");
        assert_eq!(
            means.lines().nth(1).unwrap(),
            "t,mean_0,variance,uniqueness_margin,converged,flat"
        );
        assert_eq!(data_rows(&means), 2);
        for line in means.lines().skip(2) {
            assert!(line.ends_with(",1,0"), "expected converged, non-flat: {line}");
        }

        let manifest = read(&out, "manifest.json");
        assert!(manifest.contains("varadhan_grid.csv"));
        assert!(manifest.contains("varadhan_means.csv"));
        assert!(manifest.contains("manifest.json"));
    }

    #[test]
    fn varadhan_command_flags_flat_objectives() {
        let tmp = tempfile::tempdir().unwrap();
        let toml = base_toml("ulln", "").replace(
            "kind = \"von_mises\"\nmu = [0.0]\nkappa = [2.0]",
            "kind = \"uniform\"",
        );
        let cfg = write_config(tmp.path(), &toml);
        let out = tmp.path().join("out");
        cmd_varadhan(&args(&cfg, &out)).unwrap();
        let means = read(&out, "varadhan_means.csv");
        for line in means.lines().skip(2) {
            assert!(line.ends_with(",1"), "expected flat flag set: {line}");
        }
    }

    #[test]
    fn jterm_command_tabulates_schedule_and_extrapolation() {
        let tmp = tempfile::tempdir().unwrap();
        let toml = base_toml("ulln", "").replace(
            "t_list = [0.1, 0.05]",
            "t_list = [0.04, 0.02, 0.01]\ndelta_list = [0.4, 0.2]",
        );
        let cfg = write_config(tmp.path(), &toml);
        let out = tmp.path().join("out");
        cmd_jterm(&args(&cfg, &out)).unwrap();
        let csv = read(&out, "jterm.csv");
        assert_eq!(csv.lines().nth(1).unwrap(), "delta,t,J_0_0,spread");
        // Two deltas accept all three times (t <= delta^2), plus the
        // extrapolated row.
        assert_eq!(data_rows(&csv), 7);
        let last = csv.lines().last().unwrap();
        assert!(last.starts_with(&format!("{},{},", format_f64(0.0), format_f64(0.0))));
    }

    #[test]
    fn asymptotics_command_tabulates_gaps_and_covariances() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), &base_toml("ulln", ""));
        let out = tmp.path().join("out");
        cmd_asymptotics(&args(&cfg, &out)).unwrap();
        let csv = read(&out, "asymptotics.csv");
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "t,gradient_gap,hessian_gap,Sigma_0_0,sigma_var"
        );
        assert_eq!(data_rows(&csv), 3);
        let last = csv.lines().last().unwrap();
        assert!(last.starts_with(&format!("{},,,", format_f64(0.0))));
    }

    #[test]
    fn ulln_command_emits_exact_row_count() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), &base_toml("ulln", ""));
        let out = tmp.path().join("out");
        cmd_ulln(&args(&cfg, &out)).unwrap();
        let csv = read(&out, "ulln_series.csv");
        // |t| * |n| * 6 statistics (mean tracking active for von Mises).
        assert_eq!(data_rows(&csv), 2 * 2 * 6);
        let json = read(&out, "ulln_report.json");
        assert!(json.contains("\"config_hash\""));
        assert!(json.contains("\"kind\": \"ulln\""));
    }

    #[test]
    fn ulln_command_rejects_clt_configs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), &base_toml("clt_mean", ""));
        let out = tmp.path().join("out");
        let err = cmd_ulln(&args(&cfg, &out)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!out.exists());
    }

    #[test]
    fn clt_command_dispatches_on_kind() {
        let tmp = tempfile::tempdir().unwrap();
        let toml = base_toml("clt_mean", "").replace("R = 4", "R = 100");
        let cfg = write_config(tmp.path(), &toml);
        let out = tmp.path().join("out");
        cmd_clt(&args(&cfg, &out)).unwrap();
        let json = read(&out, "clt_report.json");
        assert!(json.contains("\"kind\": \"clt_mean\""));
        let csv = read(&out, "clt_series.csv");
        assert!(csv.contains(",target_0_0,"));
    }

    #[test]
    fn malformed_config_exits_2_with_no_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), "[manifold\ndim = 1");
        let out = tmp.path().join("out");
        let err = cmd_varadhan(&args(&cfg, &out)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!out.exists(), "no artifact may exist after a parse failure");
    }

    #[test]
    fn seed_and_replication_overrides_change_the_hash() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), &base_toml("ulln", ""));
        let out = tmp.path().join("out");
        let plain = Run::load(&args(&cfg, &out)).unwrap();
        let mut seeded = args(&cfg, &out);
        seeded.seed = Some(8);
        let seeded = Run::load(&seeded).unwrap();
        assert_ne!(plain.hash, seeded.hash);
        assert_eq!(seeded.config.experiment.seed, 8);

        let mut more = args(&cfg, &out);
        more.replications = Some(9);
        let more = Run::load(&more).unwrap();
        assert_ne!(plain.hash, more.hash);

        let mut zero = args(&cfg, &out);
        zero.replications = Some(0);
        let err = match Run::load(&zero) {
            Err(e) => e,
            Ok(_) => panic!("zero replications must be rejected"),
        };
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), &base_toml("ulln", ""));
        let out1 = tmp.path().join("a");
        let out2 = tmp.path().join("b");
        cmd_ulln(&args(&cfg, &out1)).unwrap();
        cmd_ulln(&args(&cfg, &out2)).unwrap();
        assert_eq!(read(&out1, "ulln_series.csv"), read(&out2, "ulln_series.csv"));
        assert_eq!(read(&out1, "ulln_report.json"), read(&out2, "ulln_report.json"));
    }
}
