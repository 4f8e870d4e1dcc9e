//! Command-line front end. Every command writes CSV with a `#` manifest
//! header and floats in 17-significant-digit scientific notation.

use crate::config::{load_config, RunConfig};
use crate::glm::{self, BoundStateSpec};
use crate::hfun;
use crate::krein;
use crate::potential::PotentialCurve;
use crate::refpot;
use crate::gk;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "krein", version, about = "Krein-method inverse scattering on the half line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model config (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample g(k)
    Gk {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        k_min: f64,
        #[arg(long, default_value_t = 1e5)]
        k_max: f64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Evenly spaced samples instead of log-spaced
        #[arg(long)]
        linear: bool,
    },
    /// Tabulate H(r) on r = 0, h, ..., 3n h
    Hfun {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        n: usize,
        /// Add a column from direct quadrature of the cosine transform
        #[arg(long)]
        oracle: bool,
    },
    /// Solve the Krein system for G(x) and V0(x/2) at x = 3 m h, m = 0, s, 2s, ..., n
    Krein {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        n: usize,
        /// Stride s between solved systems
        #[arg(long, default_value_t = 1)]
        every: usize,
        /// Add the Riccati reference column (needs [refpot] in the config)
        #[arg(long)]
        riccati: bool,
    },
    /// Add or remove bound states; operations run in the given order
    States {
        #[command(flatten)]
        common: Common,
        /// Input potential CSV (r,V); a free base on the --step/--n grid otherwise
        #[arg(long)]
        potential: Option<PathBuf>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        /// add:GAMMA:NORM, remove, or bargmann:A:B:NORM
        #[arg(long = "op")]
        ops: Vec<String>,
    },
    /// Fix the tail coefficient b3 so that H(0) = -a of the quadratic seed
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -1e25, allow_hyphen_values = true)]
        b3_lo: f64,
        #[arg(long, default_value_t = -1e24, allow_hyphen_values = true)]
        b3_hi: f64,
    },
}

/// Bad combination of arguments; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("usage: {0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with the manifest header.
pub struct Table {
    header: String,
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(command: &str, config: &Path, params: &[(&str, String)], columns: Vec<&'static str>) -> Self {
        let mut header = String::new();
        let _ = writeln!(header, "# krein {} {command}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(header, "# config: {}", config.display());
        for (k, v) in params {
            let _ = writeln!(header, "# {k}: {v}");
        }
        let _ = writeln!(header, "# timestamp: {}", chrono::Utc::now().to_rfc3339());
        Self { header, columns, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.clone();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| fmt_f(*x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

fn emit(table: &Table, out: &Option<PathBuf>) -> Result<()> {
    let text = table.render();
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("cannot write to stdout"),
    }
}

/// Reads the first two numeric columns of a CSV, skipping `#` lines and a header row.
pub fn read_potential_csv(path: &Path, c: f64) -> Result<PotentialCurve> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let (mut r, mut v) = (Vec::new(), Vec::new());
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let (a, b) = (cells.next().unwrap_or(""), cells.next().unwrap_or(""));
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                r.push(x);
                v.push(y);
            }
            _ if r.is_empty() => continue,
            _ => bail!("{}:{}: expected two numbers", path.display(), lineno + 1),
        }
    }
    Ok(PotentialCurve::new(r, v, c)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gk { common, k_min, k_max, samples, linear } => cmd_gk(&common, k_min, k_max, samples, linear),
        Command::Hfun { common, step, n, oracle } => cmd_hfun(&common, step, n, oracle),
        Command::Krein { common, step, n, every, riccati } => cmd_krein(&common, step, n, every, riccati),
        Command::States { common, potential, step, n, ops } => cmd_states(&common, potential, step, n, &ops),
        Command::Calibrate { common, b3_lo, b3_hi } => cmd_calibrate(&common, b3_lo, b3_hi),
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    Ok(load_config(&common.config)?)
}

fn cmd_gk(common: &Common, k_min: f64, k_max: f64, samples: usize, linear: bool) -> Result<()> {
    if !(k_min <= k_max) {
        return Err(usage(format!("--k-min ({k_min}) must not exceed --k-max ({k_max})")));
    }
    if samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    if !linear && !(k_min > 0.0) {
        return Err(usage("log-spaced samples need --k-min > 0 (or pass --linear)"));
    }
    let cfg = load(common)?;
    let spacing = if linear { "linear" } else { "log" };
    let mut t = Table::new(
        "gk",
        &common.config,
        &[
            ("k_min", fmt_f(k_min)),
            ("k_max", fmt_f(k_max)),
            ("samples", samples.to_string()),
            ("spacing", spacing.into()),
        ],
        vec!["k", "g"],
    );
    for i in 0..samples {
        let frac = if samples == 1 { 0.0 } else { i as f64 / (samples - 1) as f64 };
        let k = if linear { k_min + frac * (k_max - k_min) } else { k_min * (k_max / k_min).powf(frac) };
        t.push(vec![k, gk::eval_gk(&cfg.model, k)]);
    }
    emit(&t, &common.out)
}

fn cmd_hfun(common: &Common, step: f64, n: usize, oracle: bool) -> Result<()> {
    if !(step > 0.0) || n == 0 {
        return Err(usage("--step must be positive and --n at least 1"));
    }
    let cfg = load(common)?;
    let table = hfun::build_h_table(&cfg.model, step, n)?;
    let columns = if oracle { vec!["r", "H", "H_quadrature", "rel_diff"] } else { vec!["r", "H"] };
    let mut t = Table::new(
        "hfun",
        &common.config,
        &[("step", fmt_f(step)), ("n", n.to_string()), ("oracle", oracle.to_string())],
        columns,
    );
    let k_max = cfg.model.k_max_finite();
    for (i, h) in table.values.iter().enumerate() {
        let r = i as f64 * step;
        if oracle {
            let q = hfun::h_quadrature(&cfg.model, r, k_max)?;
            let rel = if *h == 0.0 && q == 0.0 { 0.0 } else { (h - q).abs() / h.abs().max(q.abs()) };
            t.push(vec![r, *h, q, rel]);
        } else {
            t.push(vec![r, *h]);
        }
    }
    emit(&t, &common.out)
}

fn cmd_krein(common: &Common, step: f64, n: usize, every: usize, riccati: bool) -> Result<()> {
    if !(step > 0.0) || n == 0 || every == 0 {
        return Err(usage("--step must be positive, --n and --every at least 1"));
    }
    if n % every != 0 {
        return Err(usage(format!("--n ({n}) must be a multiple of --every ({every})")));
    }
    let cfg = load(common)?;
    let table = hfun::build_h_table(&cfg.model, step, n)?;
    let n_list: Vec<usize> = (0..=n).step_by(every).collect();
    log::info!("solving {} Krein systems, largest {} unknowns", n_list.len(), 3 * n + 1);
    let sol = krein::g_function(&table, &n_list)?;
    let pot = krein::potential_from_g(&sol, cfg.c)?;
    let reference = if riccati {
        let p = cfg.refpot.ok_or_else(|| anyhow!("--riccati needs a [refpot] table in the config"))?;
        let dx = 3.0 * every as f64 * step;
        let steps = n_list.len() - 1;
        let curve = refpot::pseudo_morse_curve(&p, cfg.c, dx, steps);
        Some(refpot::riccati_integrate(&curve, sol.g_values[0].1, dx, steps)?)
    } else {
        None
    };
    let columns = if riccati { vec!["x", "G", "V0", "G_riccati", "diff"] } else { vec!["x", "G", "V0"] };
    let mut t = Table::new(
        "krein",
        &common.config,
        &[
            ("step", fmt_f(step)),
            ("n", n.to_string()),
            ("every", every.to_string()),
            ("riccati", riccati.to_string()),
        ],
        columns,
    );
    for (i, (x, g)) in sol.g_values.iter().enumerate() {
        match &reference {
            Some(r) => t.push(vec![*x, *g, pot.v[i], r[i], g - r[i]]),
            None => t.push(vec![*x, *g, pot.v[i]]),
        }
    }
    emit(&t, &common.out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StateOp {
    Add(BoundStateSpec),
    Remove,
    Bargmann { a: f64, b: f64, norm: f64 },
}

fn parse_op(s: &str) -> Result<StateOp> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| usage(format!("bad number '{t}' in --op {s}")));
    match parts.as_slice() {
        ["add", g, c] => Ok(StateOp::Add(BoundStateSpec::new(num(g)?, num(c)?)?)),
        ["remove"] => Ok(StateOp::Remove),
        ["bargmann", a, b, c] => Ok(StateOp::Bargmann { a: num(a)?, b: num(b)?, norm: num(c)? }),
        _ => Err(usage(format!("--op '{s}': expected add:GAMMA:NORM, remove or bargmann:A:B:NORM"))),
    }
}

fn cmd_states(common: &Common, potential: Option<PathBuf>, step: Option<f64>, n: Option<usize>, ops: &[String]) -> Result<()> {
    let ops = ops.iter().map(|s| parse_op(s)).collect::<Result<Vec<_>>>()?;
    let cfg = load(common)?;
    let mut pot = match (&potential, step, n) {
        (Some(p), None, None) => read_potential_csv(p, cfg.c)?,
        (None, Some(h), Some(n)) if h > 0.0 && n >= 3 => PotentialCurve::zero(h, n, cfg.c),
        _ => return Err(usage("give either --potential or both --step (> 0) and --n (>= 3)")),
    };
    // the eigenfunction of the most recently added level, while it is still the lowest one
    let mut last_added: Option<glm::RegularSolution> = None;
    let mut added: Vec<f64> = Vec::new();
    for op in &ops {
        match *op {
            StateOp::Add(spec) => {
                let (next, psi) = glm::add_bound_state(&pot, spec)?;
                pot = next;
                let lowest = added.iter().all(|g| *g < spec.gamma);
                last_added = lowest.then_some(psi);
                added.push(spec.gamma);
            }
            StateOp::Remove => {
                let psi = match last_added.take() {
                    Some(psi) => psi,
                    None => glm::bound_state(&pot, 0)?.1,
                };
                pot = glm::remove_top_bound_state(&pot, &psi)?;
                added.clear();
            }
            StateOp::Bargmann { a, b, norm } => {
                pot = glm::bargmann_replace(&pot, a, b, norm)?.0;
                last_added = None;
                added.clear();
            }
        }
    }
    let source = match &potential {
        Some(p) => p.display().to_string(),
        None => format!("free, step {}, n {}", fmt_f(step.unwrap()), n.unwrap()),
    };
    let mut t = Table::new(
        "states",
        &common.config,
        &[("base", source), ("ops", if ops.is_empty() { "none".into() } else { format!("{ops:?}") })],
        vec!["r", "V"],
    );
    for (r, v) in pot.r.iter().zip(&pot.v) {
        t.push(vec![*r, *v]);
    }
    emit(&t, &common.out)
}

fn cmd_calibrate(common: &Common, b3_lo: f64, b3_hi: f64) -> Result<()> {
    let cfg = load(common)?;
    let p = cfg.refpot.ok_or_else(|| anyhow!("calibrate needs a [refpot] table in the config"))?;
    let tail = cfg.model.tail().ok_or_else(|| anyhow!("calibrate needs a [tail] table in the config"))?;
    let hint = -hfun::h_total(&cfg.model, 0.0)?;
    let seed = refpot::quadratic_seed(&p, cfg.c, hint)?;
    let cal = refpot::calibrate_b3(&cfg.model, seed.a, (b3_lo, b3_hi))?;
    eprintln!(
        "b3 = {} (was {}), H(0) = {}, |H(0) + a|/|a| = {:.3e}, {} iterations",
        fmt_f(cal.b3),
        fmt_f(tail.sign * tail.b3),
        fmt_f(cal.h0),
        cal.residual.abs() / seed.a.abs(),
        cal.iterations
    );
    let mut t = Table::new(
        "calibrate",
        &common.config,
        &[("b3_lo", fmt_f(b3_lo)), ("b3_hi", fmt_f(b3_hi))],
        vec!["seed_a", "seed_b", "seed_c", "b3", "H0", "residual"],
    );
    t.push(vec![seed.a, seed.b, seed.c, cal.b3, cal.h0, cal.residual]);
    emit(&t, &common.out)
}

/// Entry point used by the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            eprintln!("{first}");
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -9594.963749564579, 1e-300, 6.02214076e23] {
            let s = fmt_f(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn op_parsing() {
        assert_eq!(parse_op("remove").unwrap(), StateOp::Remove);
        assert!(matches!(parse_op("add:1:0.1").unwrap(), StateOp::Add(s) if s.gamma == 1.0));
        assert!(parse_op("add:1").is_err());
        assert!(parse_op("add:-1:0.1").is_err());
        assert!(matches!(parse_op("bargmann:0.8:1:0.1").unwrap(), StateOp::Bargmann { .. }));
    }
}
