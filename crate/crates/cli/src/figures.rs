//! Figure reproduction: the experiment runs behind each figure panel, and
//! the conversion of their artifacts into whitespace-delimited `.dat` files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::commands::run_solve;
use crate::config::{parse_config, Overrides};
use crate::error::{CliError, CliResult};
use crate::experiment::{run_sweep, SweepParam};
use crate::output::{self, fmt_f};

pub const FIGURE_PATHS: usize = 20_000;
pub const FIGURE_STEPS: usize = 50;

const BS: &str = "[model]\nkind = \"black-scholes\"\n";
const LD: &str = "[model]\nkind = \"linear-diffusion\"\n";
const HESTON: &str = "[model]\nkind = \"heston\"\n";

/// One solve behind a figure: run name, model block, gamma, psi, pi set.
struct RunSpec {
    name: &'static str,
    model: &'static str,
    gamma: f64,
    psi: f64,
    pi: &'static str,
}

const fn run(name: &'static str, model: &'static str, gamma: f64, psi: f64, pi: &'static str) -> RunSpec {
    RunSpec {
        name,
        model,
        gamma,
        psi,
        pi,
    }
}

const RUNS: [RunSpec; 16] = [
    run("bs_con_g2", BS, 2.0, 1.2, "interval 0 0.5"),
    run("bs_unc_g2", BS, 2.0, 1.2, "full"),
    run("bs_con_g5", BS, 5.0, 1.2, "interval 0 0.5"),
    run("bs_unc_g5", BS, 5.0, 1.2, "full"),
    run("bs_con_psi15", BS, 2.0, 1.5, "interval 0 0.5"),
    run("bs_con_psi20", BS, 2.0, 2.0, "interval 0 0.5"),
    run("ld_con_g2", LD, 2.0, 1.2, "interval 0 0.5"),
    run("ld_unc_g2", LD, 2.0, 1.2, "full"),
    run("ld_con_g5", LD, 5.0, 1.2, "interval 0 0.5"),
    run("ld_unc_g5", LD, 5.0, 1.2, "full"),
    run("h_con_g2", HESTON, 2.0, 1.2, "interval 0 0.1"),
    run("h_con_g5", HESTON, 5.0, 1.2, "interval 0 0.1"),
    run("h_con_g8", HESTON, 8.0, 1.2, "interval 0 0.1"),
    run("h_con_psi15", HESTON, 2.0, 1.5, "interval 0 0.1"),
    run("h_con_psi20", HESTON, 2.0, 2.0, "interval 0 0.1"),
    run("h_unc_g2", HESTON, 2.0, 1.2, "full"),
];

const SWEEP_GAMMAS: [f64; 3] = [2.0, 5.0, 8.0];

fn sweep_values() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn config_text(model: &str, gamma: f64, psi: f64, pi: &str) -> String {
    format!("{model}[preferences]\ngamma = {gamma:?}\npsi = {psi:?}\n[constraints]\npi = \"{pi}\"\n")
}

/// Runs every experiment behind the figures into `dir/runs` and
/// `dir/sweeps`, then writes the `.dat` files. Unset overrides fall back to
/// [`FIGURE_PATHS`] paths and [`FIGURE_STEPS`] steps.
pub fn run_figures(dir: &Path, ov: &Overrides) -> CliResult<Vec<PathBuf>> {
    let ov = Overrides {
        paths: ov.paths.or(Some(FIGURE_PATHS)),
        steps: ov.steps.or(Some(FIGURE_STEPS)),
        seed: ov.seed,
        out: None,
    };
    for spec in &RUNS {
        let cfg = parse_config(&config_text(spec.model, spec.gamma, spec.psi, spec.pi))?;
        let mut res = cfg.resolve(&ov)?;
        res.out = dir.join("runs").join(spec.name);
        run_solve(&res)?;
    }
    let sweeps = dir.join("sweeps");
    output::create_dir(&sweeps)?;
    for (panel, pi, param) in [
        ("fig1a", "interval 0 1", SweepParam::PiUpper),
        ("fig1b", "interval 0 1", SweepParam::PiLower),
    ] {
        for g in SWEEP_GAMMAS {
            let cfg = parse_config(&config_text(BS, g, 1.2, pi))?;
            let res = cfg.resolve(&ov)?;
            let rows = run_sweep(&res, param, &sweep_values())?;
            output::write_sweep(&sweeps.join(format!("{panel}_gamma{g}.csv")), &rows)?;
        }
    }
    emit_plotdata(dir)
}

/// A parsed artifact CSV.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Table> {
        if !path.exists() {
            return Err(CliError::MissingArtifact(path.display().to_string()));
        }
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            // Text columns (the sweep parameter name) read as NaN.
            rows.push(rec.iter().map(|v| v.parse().unwrap_or(f64::NAN)).collect());
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingArtifact(format!("column {name}")))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

fn run_column(dir: &Path, run: &str, file: &str, col: &str) -> CliResult<Vec<f64>> {
    Table::read(&dir.join("runs").join(run).join(file))?.column(col)
}

struct Panel {
    name: &'static str,
    xlabel: &'static str,
    ylabel: &'static str,
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn write_panel(dir: &Path, p: &Panel) -> CliResult<PathBuf> {
    let n = p.columns[0].len();
    if p.columns.iter().any(|c| c.len() != n) {
        return Err(CliError::MissingArtifact(format!("{}: columns of unequal length", p.name)));
    }
    let mut text = p.header.join(" ");
    text.push('\n');
    for i in 0..n {
        let row: Vec<String> = p.columns.iter().map(|c| fmt_f(c[i])).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    let path = dir.join(format!("{}.dat", p.name));
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;

    let mut script = format!(
        "# {name}.dat: first column on the x axis ({xl}), the others as lines ({yl}).\n\
         set xlabel \"{xl}\"\nset ylabel \"{yl}\"\nset key autotitle columnhead\nplot ",
        name = p.name,
        xl = p.xlabel,
        yl = p.ylabel
    );
    let plots: Vec<String> = (2..=p.columns.len())
        .map(|k| format!("\"{}.dat\" using 1:{k} with lines", p.name))
        .collect();
    script.push_str(&plots.join(", \\\n     "));
    script.push('\n');
    let stub = dir.join(format!("{}.gp", p.name));
    fs::write(&stub, script).map_err(|e| CliError::io(&stub, e))?;
    Ok(path)
}

fn by_time(dir: &Path, name: &'static str, ylabel: &'static str, col: &str, runs: &[(&str, &str)]) -> CliResult<Panel> {
    let mut header = vec!["t".to_string()];
    let mut columns = vec![run_column(dir, runs[0].1, "strategy.csv", "t")?];
    for (label, run) in runs {
        header.push(label.to_string());
        columns.push(run_column(dir, run, "strategy.csv", col)?);
    }
    Ok(Panel {
        name,
        xlabel: "t",
        ylabel,
        header,
        columns,
    })
}

fn by_state(dir: &Path, name: &'static str, ylabel: &'static str, col: &str, runs: &[(&str, &str)]) -> CliResult<Panel> {
    let x = run_column(dir, runs[0].1, "strategy_by_state.csv", "x")?;
    let mut header = vec!["x".to_string()];
    let mut columns = vec![x.clone()];
    for (label, run) in runs {
        if run_column(dir, run, "strategy_by_state.csv", "x")? != x {
            return Err(CliError::MissingArtifact(format!("{name}: runs use different state grids")));
        }
        header.push(label.to_string());
        columns.push(run_column(dir, run, "strategy_by_state.csv", col)?);
    }
    Ok(Panel {
        name,
        xlabel: "x",
        ylabel,
        header,
        columns,
    })
}

fn sweep_panel(dir: &Path, name: &'static str) -> CliResult<Panel> {
    let mut header = vec!["Pi".to_string()];
    let mut columns = Vec::new();
    for g in SWEEP_GAMMAS {
        let t = Table::read(&dir.join("sweeps").join(format!("{name}_gamma{g}.csv")))?;
        if columns.is_empty() {
            columns.push(t.column("value")?);
        }
        header.push(format!("pi_gamma{g}"));
        columns.push(t.column("pi_star_0")?);
    }
    Ok(Panel {
        name,
        xlabel: "Pi",
        ylabel: "pi*",
        header,
        columns,
    })
}

/// Writes `fig1a.dat` ... `fig6b.dat` and a gnuplot stub per file from the
/// artifacts under `dir`.
pub fn emit_plotdata(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let panels = [
        sweep_panel(dir, "fig1a")?,
        sweep_panel(dir, "fig1b")?,
        by_time(dir, "fig2a", "pi*", "pi_x0", &[("pi_constrained", "bs_con_g2"), ("pi_unconstrained", "bs_unc_g2")])?,
        by_time(
            dir,
            "fig2b",
            "c_hat*",
            "c_hat_x0",
            &[
                ("c_hat_constrained", "bs_con_g2"),
                ("c_hat_unconstrained", "bs_unc_g2"),
                ("c_hat_constrained_psi1.5", "bs_con_psi15"),
                ("c_hat_constrained_psi2.0", "bs_con_psi20"),
            ],
        )?,
        by_time(
            dir,
            "fig3a",
            "pi*",
            "pi_mean",
            &[
                ("pi_constrained_gamma2", "ld_con_g2"),
                ("pi_unconstrained_gamma2", "ld_unc_g2"),
                ("pi_constrained_gamma5", "ld_con_g5"),
                ("pi_unconstrained_gamma5", "ld_unc_g5"),
            ],
        )?,
        by_time(
            dir,
            "fig3b",
            "c_hat*",
            "c_hat_mean",
            &[
                ("c_hat_constrained_gamma2", "ld_con_g2"),
                ("c_hat_unconstrained_gamma2", "ld_unc_g2"),
                ("c_hat_constrained_gamma5", "ld_con_g5"),
                ("c_hat_unconstrained_gamma5", "ld_unc_g5"),
            ],
        )?,
        by_state(
            dir,
            "fig4a",
            "pi*",
            "pi",
            &[
                ("pi_constrained_gamma2", "bs_con_g2"),
                ("pi_unconstrained_gamma2", "bs_unc_g2"),
                ("pi_constrained_gamma5", "bs_con_g5"),
                ("pi_unconstrained_gamma5", "bs_unc_g5"),
            ],
        )?,
        by_state(
            dir,
            "fig4b",
            "c_hat*",
            "c_hat",
            &[
                ("c_hat_psi1.2", "bs_con_g2"),
                ("c_hat_psi1.5", "bs_con_psi15"),
                ("c_hat_psi2.0", "bs_con_psi20"),
            ],
        )?,
        by_time(
            dir,
            "fig5a",
            "pi*",
            "pi_mean",
            &[
                ("pi_gamma2", "h_con_g2"),
                ("pi_gamma5", "h_con_g5"),
                ("pi_gamma8", "h_con_g8"),
                ("pi_unconstrained", "h_unc_g2"),
            ],
        )?,
        by_time(
            dir,
            "fig5b",
            "c_hat*",
            "c_hat_mean",
            &[
                ("c_hat_psi1.2", "h_con_g2"),
                ("c_hat_psi1.5", "h_con_psi15"),
                ("c_hat_psi2.0", "h_con_psi20"),
                ("c_hat_unconstrained", "h_unc_g2"),
            ],
        )?,
        by_state(
            dir,
            "fig6a",
            "pi*",
            "pi",
            &[("pi_gamma2", "h_con_g2"), ("pi_gamma5", "h_con_g5"), ("pi_gamma8", "h_con_g8")],
        )?,
        by_state(
            dir,
            "fig6b",
            "c_hat*",
            "c_hat",
            &[("c_hat_gamma2", "h_con_g2"), ("c_hat_gamma5", "h_con_g5"), ("c_hat_gamma8", "h_con_g8")],
        )?,
    ];
    panels.iter().map(|p| write_panel(dir, p)).collect()
}
