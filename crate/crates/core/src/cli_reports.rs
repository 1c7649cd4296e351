//! Scenario configs, the pipeline stages behind each subcommand, and the
//! report/CSV writers.

use crate::boundary_algebra::{approximate, Poly, Series};
use crate::characteristic::{indicial_roots, validation_grid, CharacteristicData, OperatorSpec};
use crate::error::{LabError, Result};
use crate::expansion_engine::{
    borel_sum, construct_example, decompose_vw, expand, BorelResult, ExampleMode, Expansion, ExpansionOptions,
    ManufacturedExample,
};
use crate::fd_oracle::{oracle_compare, solve_bvp, solve_bvp_subtracted, BvpProblem, Mesh};
use crate::grid::{grading_exponent, graded_nodes, log_spaced, GridFunction};
use crate::ode_core::ModelODE;
use crate::singular_integrals::{
    classify_regime, decay_rate_fit, holder_seminorm_est, op_grid, power_log_multiply_check, write_sweep_csv,
    Direction, Kernel, Multiplier, PowerLogSum, SweepRow,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

// ---------------------------------------------------------------- config

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentMode {
    Constant,
    Integer,
    Varying,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedConfig {
    pub mode: ExampleMode,
    pub s: Poly,
    pub psi0: Poly,
    pub m: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    /// `false`: every `c_{i,j}`, j >= 1 vanishes; `true`: some `c_{i,1}` is present by order `[m] + 2`.
    pub log_columns: Option<bool>,
    /// Bound on the recovered psi coefficients of a manufactured solution.
    pub psi_tol: Option<f64>,
    /// Tolerance for the decay slope of a manufactured f (constant exponents only).
    pub f_slope_tol: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_nt")]
    pub nt: usize,
    pub beta: Option<f64>,
}

fn default_nx() -> usize {
    128
}
fn default_nt() -> usize {
    512
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { nx: default_nx(), nt: default_nt(), beta: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub mesh: MeshConfig,
    pub truncations: Vec<usize>,
    pub window: Option<(f64, f64)>,
    /// Solve for the remainder after subtracting the truncated expansion.
    #[serde(default = "yes")]
    pub subtract: bool,
    /// Required slope increase from the first to the last truncation.
    pub min_gain: Option<f64>,
    #[serde(default = "default_oracle_tol")]
    pub slope_tol: f64,
}

fn yes() -> bool {
    true
}
fn default_oracle_tol() -> f64 {
    0.1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AppendixCheck {
    /// Operator on `profile(x) t^power` against its closed form and predicted decay.
    Operator {
        name: String,
        kernel: Kernel,
        a: Poly,
        k: usize,
        alpha: f64,
        power: Option<f64>,
        #[serde(default = "unit_profile")]
        profile: Poly,
        #[serde(default)]
        max_nu: usize,
    },
    /// Multiplier applied to `profile(x) t^power`; Hoelder bounds under refinement.
    Multiplier {
        name: String,
        multiplier: Multiplier,
        #[serde(default)]
        gamma: Poly,
        power: f64,
        #[serde(default = "unit_profile")]
        profile: Poly,
        window: (f64, f64),
        #[serde(default = "default_slope_tol")]
        slope_tol: f64,
        #[serde(default)]
        bounded_at: Vec<f64>,
        #[serde(default)]
        diverges_at: Vec<f64>,
    },
    /// Hoelder-`epsilon` seminorm in t of `profile(x) t^power` against an expected value.
    Holder {
        name: String,
        power: f64,
        #[serde(default = "unit_profile")]
        profile: Poly,
        epsilon: f64,
        expect: f64,
        tol: f64,
    },
}

fn unit_profile() -> Poly {
    Poly::constant(1.0)
}
fn default_slope_tol() -> f64 {
    0.05
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorelConfig {
    pub norms_to: usize,
    #[serde(default)]
    pub coefficients: BorelCoefficients,
    #[serde(default)]
    pub tails: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BorelCoefficients {
    #[default]
    Unit,
    Expansion,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub operator: Option<OperatorSpec>,
    pub exponent_mode: Option<ExponentMode>,
    pub f: Option<Series>,
    pub top_data: Option<Poly>,
    pub manufactured: Option<ManufacturedConfig>,
    pub k: Option<usize>,
    #[serde(default = "unit_alpha")]
    pub alpha: f64,
    pub smoothness: Option<usize>,
    #[serde(default)]
    pub expect: Expectations,
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub appendix: Vec<AppendixCheck>,
    pub borel: Option<BorelConfig>,
    /// Also dump the FD solution as CSV.
    #[serde(default)]
    pub dump_solution: bool,
}

fn unit_alpha() -> f64 {
    1.0
}

/// Schema violations carry serde's line and column.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text)
        .map_err(|e| LabError::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
    if cfg.id.is_empty() || cfg.id.contains(['/', '\\']) {
        return Err(LabError::Config(format!("scenario id {:?} is not a plain name", cfg.id)));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(LabError::Config(format!("alpha = {} outside (0, 1]", cfg.alpha)));
    }
    if cfg.manufactured.is_some() && (cfg.f.is_some() || cfg.top_data.is_some()) {
        return Err(LabError::Config("manufactured scenarios derive f and top_data; drop them".into()));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------- reports

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// What the value was judged against, e.g. "<= 1e-12".
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, tol: f64) -> Check {
        Check { name: name.into(), value, tolerance: format!("<= {tol:e}"), pass: value <= tol }
    }
    fn at_least(name: &str, value: f64, tol: f64) -> Check {
        Check { name: name.into(), value, tolerance: format!(">= {tol}"), pass: value >= tol }
    }
    fn within(name: &str, value: f64, target: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance: format!("{target} +- {tol}"),
            pass: (value - target).abs() <= tol,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.6e} (tolerance {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Roots,
    Expand,
    ConstructExample,
    VerifyDecay,
    HolderCheck,
    OracleCompare,
    Borel,
    Run,
}

impl Command {
    fn wants(&self, stage: Stage) -> bool {
        use Stage::*;
        match self {
            Command::Run => true,
            Command::Roots => stage == Roots,
            Command::ConstructExample => matches!(stage, Roots | Example),
            Command::Expand => matches!(stage, Roots | Example | Expand),
            Command::OracleCompare => matches!(stage, Roots | Example | Expand | Oracle),
            Command::VerifyDecay => stage == AppendixOperators,
            Command::HolderCheck => stage == AppendixMultipliers,
            Command::Borel => matches!(stage, Roots | Expand | Borel),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Roots,
    Example,
    Expand,
    Oracle,
    AppendixOperators,
    AppendixMultipliers,
    Borel,
}

impl Stage {
    fn name(&self) -> &'static str {
        match self {
            Stage::Roots => "roots",
            Stage::Example => "construct-example",
            Stage::Expand => "expand",
            Stage::Oracle => "oracle-compare",
            Stage::AppendixOperators => "verify-decay",
            Stage::AppendixMultipliers => "holder-check",
            Stage::Borel => "borel",
        }
    }
}

/// Failure of one pipeline stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: LabError,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.error)
    }
}

/// Everything a run produces; `report` is written as report.json.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub checks: Vec<Check>,
    pub summaries: Vec<String>,
    pub csv: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// JSON with every float written to 17 significant digits.
pub fn to_json_fixed(v: &Value) -> String {
    fn go(v: &Value, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent + 1);
        match v {
            Value::Number(n) if n.is_f64() => {
                let x = n.as_f64().expect("f64 number");
                let _ = write!(out, "{x:.16e}");
            }
            Value::Array(a) if a.is_empty() => out.push_str("[]"),
            Value::Array(a) => {
                out.push_str("[\n");
                for (k, item) in a.iter().enumerate() {
                    out.push_str(&pad);
                    go(item, indent + 1, out);
                    out.push_str(if k + 1 < a.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Value::Object(m) if m.is_empty() => out.push_str("{}"),
            Value::Object(m) => {
                out.push_str("{\n");
                for (k, (key, item)) in m.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(&Value::String(key.clone()).to_string());
                    out.push_str(": ");
                    go(item, indent + 1, out);
                    out.push_str(if k + 1 < m.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
            other => out.push_str(&other.to_string()),
        }
    }
    let mut out = String::new();
    go(v, 0, &mut out);
    out.push('\n');
    out
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

// ---------------------------------------------------------------- pipeline

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    roots: Option<CharacteristicData>,
    example: Option<ManufacturedExample>,
    expansion: Option<Expansion>,
    ode: Option<ModelODE>,
    stages: serde_json::Map<String, Value>,
    checks: Vec<Check>,
    summaries: Vec<String>,
    csv: Vec<(String, Vec<u8>)>,
}

fn need<'b, T>(v: &'b Option<T>, what: &str) -> Result<&'b T> {
    v.as_ref().ok_or_else(|| LabError::Config(format!("scenario has no {what}")))
}

fn fmt_range(p: &Poly) -> String {
    let (lo, hi) = p.range();
    if (hi - lo).abs() < 1e-12 {
        format!("{}", (lo * 1e12).round() / 1e12)
    } else {
        format!("[{lo:.6}, {hi:.6}]")
    }
}

impl<'a> Context<'a> {
    fn op(&self) -> Result<&'a OperatorSpec> {
        need(&self.cfg.operator, "operator")
    }

    fn roots(&mut self) -> Result<()> {
        let op = self.op()?;
        op.validate()?;
        let cd = indicial_roots(op, &validation_grid())?;
        self.summaries.push(format!(
            "roots: m_upper = {}, m_lower = {}, gamma = {}{}",
            fmt_range(&cd.m_upper),
            fmt_range(&cd.m_lower),
            fmt_range(&cd.gamma),
            if cd.resonant { " (resonant)" } else { "" }
        ));
        if let Some(mode) = self.cfg.exponent_mode {
            let observed = if cd.resonant {
                ExponentMode::Integer
            } else if cd.gamma.is_constant() {
                ExponentMode::Constant
            } else {
                ExponentMode::Varying
            };
            self.checks.push(Check {
                name: "roots.exponent_mode".into(),
                value: if observed == mode { 1.0 } else { 0.0 },
                tolerance: format!("== {mode:?}"),
                pass: observed == mode,
            });
        }
        self.stages.insert("roots".into(), to_value(&cd));
        self.ode = Some(ModelODE::new(&cd, op.r));
        self.roots = Some(cd);
        Ok(())
    }

    fn example(&mut self) -> Result<()> {
        let Some(mc) = &self.cfg.manufactured else { return Ok(()) };
        let op = self.op()?;
        let ex = construct_example(op, mc.mode, &mc.s, &mc.psi0, mc.m)?;
        let xs: Vec<f64> = (0..=16).map(|k| -1.0 + k as f64 / 8.0).collect();
        let ts = log_spaced(1e-5, 1e-3, 60);
        let fg = GridFunction::try_from_fn(&xs, &ts, |x, t| ex.f.evaluate(x, t))?;
        let fit = decay_rate_fit(&fg, (1e-5, 1e-3))?;
        // integer mode keeps the plain t^s block in f
        let predicted = match mc.mode {
            ExampleMode::IntegerConstant => mc.s.range().0,
            _ => mc.s.range().0 + mc.m as f64 + 1.0,
        };
        if mc.mode == ExampleMode::NonintegerConstant {
            let tol = self.cfg.expect.f_slope_tol.unwrap_or(0.05);
            self.checks.push(Check::within("example.f_decay_slope", fit.slope, predicted, tol));
        }
        self.checks.push(Check::at_most("example.cancellation_residual", ex.cancellation_residual, 1e-10));
        self.summaries.push(format!(
            "construct-example: f decays like t^{:.4} (predicted {predicted:.4}), {} psi blocks",
            fit.slope,
            ex.psis.len()
        ));
        self.stages.insert(
            "example".into(),
            json!({
                "mode": mc.mode,
                "psis": ex.psis,
                "f": ex.f.to_json(),
                "f_decay": fit,
                "predicted_slope": predicted,
                "cancellation_residual": ex.cancellation_residual,
            }),
        );
        self.ode = Some(ex.ode.clone());
        self.example = Some(ex);
        Ok(())
    }

    fn data_and_f(&self) -> Result<(Series, Poly)> {
        let op = self.op()?;
        let ode = need(&self.ode, "model ODE")?;
        if let Some(ex) = &self.example {
            let data = if op.r == 1.0 {
                ex.u.at_t_one()
            } else {
                let u = ex.u.clone();
                approximate(&|x| u.evaluate(x, op.r).unwrap_or(f64::NAN), 255, 1e-13)?
            };
            return Ok((ex.f.clone(), data));
        }
        let f = self.cfg.f.clone().unwrap_or_else(|| Series::new(ode.gamma.clone()));
        Ok((f, self.cfg.top_data.clone().unwrap_or_default()))
    }

    fn expand(&mut self) -> Result<()> {
        let op = self.op()?;
        let ode = need(&self.ode, "model ODE")?.clone();
        let cd = need(&self.roots, "roots")?.clone();
        let k = match (self.cfg.k, &self.cfg.oracle) {
            (Some(k), _) => k,
            (None, Some(o)) => o.truncations.iter().copied().max().unwrap_or(0),
            (None, None) => (cd.int_part.max(0) + 2) as usize,
        };
        let (f, data) = self.data_and_f()?;
        let opts = ExpansionOptions { smoothness: self.cfg.smoothness, alpha: self.cfg.alpha, ..Default::default() };
        let e = expand(&ode, op, &f, &data, k, &opts)?;
        let m = cd.int_part;
        match self.cfg.expect.log_columns {
            Some(false) => self.checks.push(Check::at_most("expand.log_columns_vanish", e.max_log_coeff(), 1e-12)),
            Some(true) => {
                let biggest = (m..=m + 2).map(|i| e.c_log_at(i, 1).sup_norm()).fold(0.0, f64::max);
                self.checks.push(Check::at_least("expand.first_log_column", biggest, 1e-6));
            }
            None => {}
        }
        if let (Some(ex), Some(tol)) = (&self.example, self.cfg.expect.psi_tol) {
            let base = ex.ode.int_part;
            let worst = ex
                .psis
                .iter()
                .filter(|p| base + p.i as i32 <= k as i32)
                .map(|p| {
                    let got = if e.resonant && p.j == 0 {
                        e.c_int.get(base as usize + p.i).cloned().unwrap_or_default()
                    } else {
                        e.c_log_at(base + p.i as i32, p.j)
                    };
                    (&got - &p.coeff).sup_norm()
                })
                .fold(0.0, f64::max);
            self.checks.push(Check::at_most("expand.psi_recovery", worst, tol));
        }
        let vw = decompose_vw(&e, op.r);
        self.summaries.push(format!(
            "expand: k = {k}, {} log coefficients, largest j >= 1 entry {:.3e}, {} singular columns",
            e.c_log.len(),
            e.max_log_coeff(),
            vw.w.len()
        ));
        let mut rep = e.to_json();
        rep["singular_columns"] = json!(vw.w.len());
        rep["gamma_min"] = json!(cd.gamma_min());
        self.stages.insert("expansion".into(), rep);
        self.expansion = Some(e);
        Ok(())
    }

    fn oracle(&mut self) -> Result<()> {
        let Some(oc) = &self.cfg.oracle else { return Ok(()) };
        let op = self.op()?;
        let ex = self
            .example
            .as_ref()
            .ok_or_else(|| LabError::Config("oracle comparison needs a manufactured solution".into()))?;
        let e = need(&self.expansion, "expansion")?;
        let cd = need(&self.roots, "roots")?;
        let beta = oc.mesh.beta.unwrap_or_else(|| grading_exponent(cd.gamma_min()));
        let mesh = Mesh::graded(oc.mesh.nx, oc.mesh.nt, op.r, beta, false)?;
        let prob = BvpProblem::manufactured(op, &ex.f, &ex.u);
        let window = oc.window.unwrap_or((1e-3, 1e-1));
        let plain = solve_bvp(&prob, &mesh)?;
        let exact = plain.map(|x, t, _| if t > 0.0 { ex.u.evaluate(x, t).unwrap_or(f64::NAN) } else { 0.0 })?;
        let fd_error = plain.sub(&exact)?.max_abs_above(0.1 * op.r);
        let gamma_min = cd.gamma_min();
        let mut rows = Vec::new();
        let mut slopes = Vec::new();
        let mut csv = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| LabError::Config(format!("csv output: {e}"));
        csv.write_record(["k", "t", "max_abs_remainder"]).map_err(io)?;
        for &kt in &oc.truncations {
            let et = e.truncated(kt);
            let u_fd = if oc.subtract { solve_bvp_subtracted(&prob, &mesh, &et.to_series())? } else { plain.clone() };
            let (rem, report) = oracle_compare(&u_fd, &et, kt as f64 + self.cfg.alpha.min(gamma_min), window, None)?;
            let (_, plain_report) = oracle_compare(&plain, &et, report.predicted, window, Some(fd_error))?;
            for (j, &t) in rem.t_nodes.iter().enumerate() {
                csv.write_record([kt.to_string(), format!("{t:.16e}"), format!("{:.16e}", rem.max_abs_at(j))])
                    .map_err(io)?;
            }
            let first = slopes.is_empty();
            if first {
                self.checks.push(Check::at_least(
                    &format!("oracle.slope_k{kt}"),
                    report.fit.slope,
                    report.predicted - oc.slope_tol,
                ));
            }
            slopes.push(report.fit.slope);
            self.summaries.push(format!(
                "oracle-compare: k = {kt}, fitted slope {:.4} (predicted {:.4}), plain FD slope {:.4}{}",
                report.fit.slope,
                report.predicted,
                plain_report.fit.slope,
                if plain_report.discretization_limited { " [plain FD discretization-limited]" } else { "" }
            ));
            rows.push(json!({ "k": kt, "subtracted": oc.subtract, "report": report, "plain_fd": plain_report }));
        }
        if let (Some(gain), Some(first), Some(last)) = (oc.min_gain, slopes.first(), slopes.last()) {
            self.checks.push(Check::at_least("oracle.slope_gain", last - first, gain));
        }
        self.csv.push(("remainder.csv".into(), csv.into_inner().map_err(|e| LabError::Config(e.to_string()))?));
        if self.cfg.dump_solution {
            let mut out = Vec::new();
            plain.write_csv(&mut out)?;
            self.csv.push(("fd_solution.csv".into(), out));
        }
        self.stages.insert(
            "oracle".into(),
            json!({
                "mesh": { "nx": oc.mesh.nx, "nt": oc.mesh.nt, "beta": beta },
                "window": window,
                "fd_error_above_0.1r": fd_error,
                "truncations": rows,
            }),
        );
        Ok(())
    }

    fn appendix(&mut self, operators: bool) -> Result<()> {
        let mut rows = Vec::new();
        let mut reports = Vec::new();
        for check in &self.cfg.appendix {
            match check {
                AppendixCheck::Operator { name, kernel, a, k, alpha, power, profile, max_nu } if operators => {
                    let reg = classify_regime(*kernel, a, *alpha, *k);
                    let q = power.unwrap_or_else(|| reg.regime.predicted_decay(a, *k, *alpha, 0));
                    let f = PowerLogSum { terms: vec![crate::singular_integrals::PowerLogTerm::new(profile.clone(), q, 0)] };
                    let xs = [-0.75, -0.25, 0.25, 0.75];
                    let ts = log_spaced(1e-4, 1e-1, 40);
                    for nu in 0..=*max_nu {
                        let g = op_grid(*kernel, &f, a, nu, &xs, &ts)?;
                        let falling = (0..nu).fold(1.0, |acc, m| acc * (q - m as f64));
                        let mut rel = 0.0f64;
                        for (i, &x) in xs.iter().enumerate() {
                            let denom = match kernel {
                                Kernel::Lower => a.eval(x) + q,
                                Kernel::Upper => q - a.eval(x),
                            };
                            for (j, &t) in ts.iter().enumerate() {
                                let exact = profile.eval(x) * falling * t.powf(q - nu as f64) / denom;
                                if exact != 0.0 {
                                    rel = rel.max((g.values[i][j] - exact).abs() / exact.abs());
                                }
                            }
                        }
                        let fit = decay_rate_fit(&g, (1e-4, 1e-1))?;
                        let predicted = reg.regime.predicted_decay(a, *k, *alpha, nu);
                        let holder_t = holder_seminorm_est(&g, alpha.min(0.99), Direction::T)?;
                        let holder_x = holder_seminorm_est(&g, alpha.min(0.99), Direction::X)?;
                        let c1 = Check::at_most(&format!("appendix.{name}.nu{nu}.closed_form"), rel, 1e-10);
                        let c2 = Check::within(&format!("appendix.{name}.nu{nu}.decay"), fit.slope, predicted, 0.05);
                        rows.push(SweepRow {
                            scenario: self.cfg.id.clone(),
                            check: format!("{name}/nu={nu}"),
                            regime: to_value(&reg.regime).as_str().unwrap_or_default().to_string(),
                            fitted_slope: fit.slope,
                            predicted_slope: predicted,
                            holder_t,
                            holder_x,
                            tolerance: 0.05,
                            pass: c1.pass && c2.pass,
                        });
                        reports.push(json!({
                            "name": name, "nu": nu, "regime": reg.regime, "warnings": reg.warnings,
                            "input_power": q, "closed_form_rel_error": rel, "decay": fit, "predicted": predicted,
                            "holder_t": holder_t, "holder_x": holder_x,
                        }));
                        self.checks.extend([c1, c2]);
                    }
                }
                AppendixCheck::Multiplier {
                    name,
                    multiplier,
                    gamma,
                    power,
                    profile,
                    window,
                    slope_tol,
                    bounded_at,
                    diverges_at,
                } if !operators => {
                    let xs: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
                    let r = 0.5;
                    let sample = |n: usize, beta: f64| {
                        GridFunction::from_fn(&xs, &graded_nodes(r, n, beta), |x, t| profile.eval(x) * t.powf(*power))
                            .map(|g| g.with_vanishing_order(*power))
                    };
                    let fine = sample(2048, 4.0)?;
                    let eps0 = bounded_at.first().copied().unwrap_or(0.5);
                    let rep = power_log_multiply_check(&fine, gamma, *multiplier, eps0, *window)?;
                    let slope_check =
                        Check::within(&format!("appendix.{name}.decay"), rep.decay.slope, rep.predicted_slope, *slope_tol);
                    let mut study = Vec::new();
                    let mut pass = slope_check.pass;
                    self.checks.push(slope_check);
                    for (eps, bounded) in bounded_at.iter().map(|&e| (e, true)).chain(diverges_at.iter().map(|&e| (e, false))) {
                        let est: Vec<f64> = [256usize, 512, 1024, 2048]
                            .iter()
                            .map(|&n| {
                                let g = sample(n, 4.0)?;
                                let out = power_log_multiply_check(&g, gamma, *multiplier, eps, *window)?;
                                Ok(out.holder_t)
                            })
                            .collect::<Result<_>>()?;
                        let growth: Vec<f64> = est.windows(2).map(|w| w[1] / w[0]).collect();
                        let c = if bounded {
                            Check::at_most(&format!("appendix.{name}.bounded_eps{eps}"), growth[growth.len() - 1] - 1.0, 0.02)
                        } else {
                            let min_growth = growth.iter().copied().fold(f64::INFINITY, f64::min);
                            Check::at_least(&format!("appendix.{name}.diverges_eps{eps}"), min_growth - 1.0, 0.05)
                        };
                        pass &= c.pass;
                        self.checks.push(c);
                        study.push(json!({ "epsilon": eps, "expect_bounded": bounded, "estimates": est }));
                    }
                    rows.push(SweepRow {
                        scenario: self.cfg.id.clone(),
                        check: name.clone(),
                        regime: to_value(multiplier).as_str().unwrap_or_default().to_string(),
                        fitted_slope: rep.decay.slope,
                        predicted_slope: rep.predicted_slope,
                        holder_t: rep.holder_t,
                        holder_x: rep.holder_x,
                        tolerance: *slope_tol,
                        pass,
                    });
                    reports.push(json!({ "name": name, "report": rep, "refinement": study }));
                }
                AppendixCheck::Holder { name, power, profile, epsilon, expect, tol } if !operators => {
                    let xs: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
                    let g = GridFunction::from_fn(&xs, &graded_nodes(1.0, 1024, 4.0), |x, t| {
                        profile.eval(x) * t.powf(*power)
                    })?;
                    let est = holder_seminorm_est(&g, *epsilon, Direction::T)?;
                    let c = Check::within(&format!("appendix.{name}.holder_t"), est, *expect, *tol);
                    self.summaries.push(format!("holder-check: {name}: estimate {est:.6} (expected {expect})"));
                    rows.push(SweepRow {
                        scenario: self.cfg.id.clone(),
                        check: name.clone(),
                        regime: "holder".into(),
                        fitted_slope: f64::NAN,
                        predicted_slope: *power,
                        holder_t: est,
                        holder_x: f64::NAN,
                        tolerance: *tol,
                        pass: c.pass,
                    });
                    reports.push(json!({ "name": name, "epsilon": epsilon, "holder_t": est, "expect": expect }));
                    self.checks.push(c);
                }
                _ => {}
            }
        }
        if rows.is_empty() {
            return Ok(());
        }
        let (key, file) = if operators { ("appendix_operators", "appendix_operators.csv") } else { ("appendix_multipliers", "appendix_multipliers.csv") };
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out)?;
        self.csv.push((file.into(), out));
        let passed = rows.iter().filter(|r| r.pass).count();
        self.summaries.push(format!("{}: {passed}/{} sweep rows pass", if operators { "verify-decay" } else { "holder-check" }, rows.len()));
        self.stages.insert(key.into(), Value::Array(reports));
        Ok(())
    }

    fn borel(&mut self) -> Result<()> {
        let Some(bc) = &self.cfg.borel else { return Ok(()) };
        let r = self.cfg.operator.as_ref().map_or(1.0, |op| op.r);
        let int_part = self.roots.as_ref().map_or(1, |cd| cd.int_part.max(0) as usize).max(1);
        let e = self.expansion.clone();
        let coeff = |i: usize, j: u32| match (bc.coefficients, &e) {
            (BorelCoefficients::Unit, _) => Poly::constant(1.0),
            (BorelCoefficients::Expansion, Some(e)) => e.c_log_at(i as i32, j),
            (BorelCoefficients::Expansion, None) => Poly::zero(),
        };
        let res: BorelResult = borel_sum(&coeff, int_part, bc.norms_to, r)?;
        self.checks.push(Check::at_most(
            "borel.term_norms",
            res.entries.iter().map(|en| en.norm / en.bound).fold(0.0, f64::max),
            1.0,
        ));
        let mut tails = Vec::new();
        for &k in &bc.tails {
            let tn = res.tail_norm(k);
            self.checks.push(Check::at_most(&format!("borel.tail_k{k}"), tn, BorelResult::tail_bound(k)));
            tails.push(json!({ "k": k, "norm": tn, "bound": BorelResult::tail_bound(k) }));
        }
        let mut out = csv::Writer::from_writer(Vec::new());
        for en in &res.entries {
            out.serialize(en).map_err(|e| LabError::Config(format!("csv output: {e}")))?;
        }
        self.csv.push(("borel.csv".into(), out.into_inner().map_err(|e| LabError::Config(e.to_string()))?));
        let lmax = res.entries.iter().map(|en| en.lambda).fold(1.0, f64::max);
        self.summaries.push(format!("borel: {} terms, largest scale 2^{:.0}", res.entries.len(), lmax.log2()));
        self.stages.insert("borel".into(), json!({ "entries": res.entries, "cutoff": res.cutoff, "tails": tails }));
        Ok(())
    }
}

/// Run the stages of `command` on one scenario.
pub fn run_scenario(cfg: &ScenarioConfig, command: Command) -> std::result::Result<Outcome, StageError> {
    let mut cx = Context {
        cfg,
        roots: None,
        example: None,
        expansion: None,
        ode: None,
        stages: serde_json::Map::new(),
        checks: Vec::new(),
        summaries: Vec::new(),
        csv: Vec::new(),
    };
    let has_op = cfg.operator.is_some();
    let plan: [(Stage, bool); 7] = [
        (Stage::Roots, has_op),
        (Stage::Example, has_op),
        (Stage::Expand, has_op),
        (Stage::Oracle, has_op),
        (Stage::AppendixOperators, true),
        (Stage::AppendixMultipliers, true),
        (Stage::Borel, true),
    ];
    for (stage, possible) in plan {
        if !possible || !command.wants(stage) {
            continue;
        }
        if command == Command::Borel && stage == Stage::Expand && cfg.borel.as_ref().map(|b| b.coefficients) != Some(BorelCoefficients::Expansion) {
            continue;
        }
        let res = match stage {
            Stage::Roots => cx.roots(),
            Stage::Example => cx.example(),
            Stage::Expand => cx.expand(),
            Stage::Oracle => cx.oracle(),
            Stage::AppendixOperators => cx.appendix(true),
            Stage::AppendixMultipliers => cx.appendix(false),
            Stage::Borel => cx.borel(),
        };
        res.map_err(|error| StageError { stage: stage.name(), error })?;
    }
    let pass = cx.checks.iter().all(|c| c.pass);
    let report = json!({
        "scenario": cfg.id,
        "description": cfg.description,
        "stages": Value::Object(cx.stages),
        "checks": cx.checks,
        "pass": pass,
    });
    Ok(Outcome { report, checks: cx.checks, summaries: cx.summaries, csv: cx.csv })
}

/// Write report.json and the CSV series into `dir`.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<()> {
    let io = |e: std::io::Error| LabError::Config(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("report.json"), to_json_fixed(&outcome.report)).map_err(io)?;
    for (name, bytes) in &outcome.csv {
        let mut f = std::fs::File::create(dir.join(name)).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
    }
    Ok(())
}

/// Exit codes: 0 all checks pass, 1 a check failed, 2 schema error, 3 numerical error.
pub fn exit_code(result: &std::result::Result<Outcome, StageError>) -> i32 {
    match result {
        Ok(o) if o.passed() => 0,
        Ok(_) => 1,
        Err(StageError { error: LabError::Config(_), .. }) => 2,
        Err(_) => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors_carry_lines() {
        let err = parse_config("{\n  \"id\": \"x\",\n  \"bogus\": 1\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse_config("{ not json").is_err());
        assert!(parse_config(r#"{"id": "a/b"}"#).is_err());
        assert!(parse_config(r#"{"id": "a", "alpha": 1.5}"#).is_err());
    }

    #[test]
    fn fixed_float_format() {
        let v = json!({ "a": 0.1, "b": [1, 2.5], "c": "s", "d": {} });
        let s = to_json_fixed(&v);
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("2.5000000000000000e0"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"], json!(0.1));
        assert_eq!(back["b"][0], json!(1));
    }

    #[test]
    fn roots_summary_for_the_model_operator() {
        let cfg = parse_config(
            r#"{"id": "m", "exponent_mode": "constant",
                "operator": {"a_xx": [[1.0]], "a_tt": [[1.0]], "c": [[-0.75]], "r": 1.0}}"#,
        )
        .unwrap();
        let out = run_scenario(&cfg, Command::Roots).unwrap();
        assert!(out.passed());
        assert_eq!(out.summaries[0], "roots: m_upper = 1.5, m_lower = -0.5, gamma = 0.5");
    }

    #[test]
    fn stage_errors_map_to_exit_three() {
        let cfg = parse_config(
            r#"{"id": "bad", "operator": {"a_tt": [[1.0]], "c": [[0.5]], "r": 1.0}}"#,
        )
        .unwrap();
        let res = run_scenario(&cfg, Command::Roots);
        assert_eq!(exit_code(&res), 3);
        assert_eq!(res.unwrap_err().stage, "roots");
    }
}
