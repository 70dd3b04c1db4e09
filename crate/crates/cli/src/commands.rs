use std::fmt::Write as _;
use std::path::PathBuf;

use hdqkd_core::asymptotic::{max_tolerable_q, rate_general, solve_eta, BasisPolicy};
use hdqkd_core::bell::ErrorRateSet;
use hdqkd_core::finite::{
    aep_rate, coherent_rate, eur_rate, optimize_rate, AttackModel, BoundType, EpsMode,
    FiniteScenario, OptimizerConfig, RateResult, SecuritySplit,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::csv::CsvTable;
use crate::error::{usage, CliError, CliResult};
use crate::figures::{self, clamped_rate, linspace, logspace};
use crate::record::sig12;
use crate::verify;

/// What a command produced, before printing.
pub struct Outcome {
    pub resolved: Value,
    pub result: Value,
    pub text: String,
    pub exit: i32,
}

fn need<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn policy(allow: bool) -> BasisPolicy {
    if allow {
        BasisPolicy::AllowUnguaranteed
    } else {
        BasisPolicy::Guaranteed
    }
}

/// Round counts are accepted as floats so that `1e7` works.
pub fn parse_count(x: f64, flag: &str) -> CliResult<u64> {
    if !(x.is_finite() && x >= 1.0 && x.fract() == 0.0 && x < 9.2e18) {
        return Err(usage(format!(
            "--{flag} must be a positive integer, got {x}"
        )));
    }
    Ok(x as u64)
}

impl From<BoundArg> for BoundType {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::Eur => BoundType::Eur,
            BoundArg::Aep => BoundType::Aep,
        }
    }
}

impl From<AttackArg> for AttackModel {
    fn from(a: AttackArg) -> Self {
        match a {
            AttackArg::Collective => AttackModel::Collective,
            AttackArg::Coherent => AttackModel::Coherent,
        }
    }
}

impl From<EpsModeArg> for EpsMode {
    fn from(e: EpsModeArg) -> Self {
        match e {
            EpsModeArg::DeriveEps => EpsMode::DeriveEps,
            EpsModeArg::FixedEps => EpsMode::FixedEps,
        }
    }
}

fn line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key:<16} {value}").unwrap();
}

pub fn asymptotic(a: &AsymptoticArgs) -> CliResult<Outcome> {
    let d = need(a.d, "d")?;
    let pol = policy(a.allow_unguaranteed);
    let qs: Vec<f64> = if let Some(rates) = &a.rates {
        if a.q.is_some() || a.qx.is_some() || a.qz.is_some() {
            return Err(usage("--rates cannot be combined with --q, --qx or --qz"));
        }
        if let Some(m) = a.m {
            if m != rates.len() {
                return Err(usage(format!("--m {m} but {} rates given", rates.len())));
            }
        }
        rates.clone()
    } else if a.qx.is_some() || a.qz.is_some() {
        if a.q.is_some() {
            return Err(usage("--q cannot be combined with --qx/--qz"));
        }
        if a.m.is_some_and(|m| m != 2) {
            return Err(usage("--qx/--qz describe two bases; use --rates for more"));
        }
        vec![need(a.qz, "qz")?, need(a.qx, "qx")?]
    } else {
        let m = need(a.m, "m")?;
        let q = need(a.q, "q")?;
        if m < 2 {
            return Err(usage(format!("--m must be at least 2, got {m}")));
        }
        vec![q; m]
    };
    let rates = ErrorRateSet::new(d, qs.clone())?;
    let sol = solve_eta(&rates, pol)?;
    let rate = rate_general(&rates, pol)?;

    let resolved = json!({ "d": d, "m": qs.len(), "rates": qs, "policy": format!("{pol:?}") });
    let result = json!({
        "rate": rate,
        "eta": sol.eta,
        "eta_multiplicity": sol.eta_multiplicity(),
        "q": sol.q,
        "v": sol.v,
        "lambda00": sol.lambda00,
        "lambda_z": sol.lambda_z,
        "lambda_k": sol.lambda_k,
        "total_weight": sol.total_weight(),
    });
    let mut text = String::new();
    line(&mut text, "rate", sig12(rate));
    if rate <= 0.0 {
        line(&mut text, "note", "no secret key at these error rates");
    }
    line(&mut text, "eta", sig12(sol.eta));
    line(&mut text, "eta count", sol.eta_multiplicity());
    line(&mut text, "q", sig12(sol.q));
    line(&mut text, "v", sig12(sol.v));
    line(&mut text, "lambda_00", sig12(sol.lambda00));
    line(&mut text, "lambda_Z", sig12(sol.lambda_z));
    for (k, l) in sol.lambda_k.iter().enumerate() {
        line(&mut text, &format!("lambda_XZ^{k}"), sig12(*l));
    }
    Ok(Outcome {
        resolved,
        result,
        text,
        exit: 0,
    })
}

pub fn threshold(a: &ThresholdArgs) -> CliResult<Outcome> {
    let d = need(a.d, "d")?;
    let m = need(a.m, "m")?;
    let pol = policy(a.allow_unguaranteed);
    let q = max_tolerable_q(d, m, pol)?;
    let mut text = String::new();
    line(&mut text, "Q_max", format!("{q:.6}"));
    Ok(Outcome {
        resolved: json!({ "d": d, "m": m, "policy": format!("{pol:?}") }),
        result: json!({ "q_max": q }),
        text,
        exit: 0,
    })
}

#[derive(Debug, Clone, Serialize)]
struct ResolvedFinite {
    d: usize,
    m: usize,
    q: f64,
    eps: f64,
    bound: BoundArg,
    attack: AttackArg,
    c: f64,
    f: f64,
    eps_mode: EpsModeArg,
    policy: String,
}

impl ResolvedFinite {
    fn from_params(p: &FiniteParams) -> CliResult<Self> {
        let d = need(p.d, "d")?;
        let eps = p.eps.unwrap_or(1e-10);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(usage(format!("--eps must lie in (0, 1), got {eps}")));
        }
        let r = Self {
            d,
            m: need(p.m, "m")?,
            q: need(p.q, "q")?,
            eps,
            bound: p.bound.unwrap_or(BoundArg::Aep),
            attack: p.attack.unwrap_or(AttackArg::Collective),
            c: p.c.unwrap_or((d as f64).log2()),
            f: p.f.unwrap_or(1.0),
            eps_mode: p.eps_mode.unwrap_or(EpsModeArg::DeriveEps),
            policy: format!("{:?}", policy(p.allow_unguaranteed)),
        };
        if r.bound == BoundArg::Eur && r.m != 2 {
            return Err(usage(format!("--bound eur needs --m 2, got {}", r.m)));
        }
        if r.bound == BoundArg::Eur && r.attack == AttackArg::Coherent {
            return Err(usage(
                "coherent attacks are only available with --bound aep",
            ));
        }
        Ok(r)
    }

    fn scenario(&self, n: u64, k: u64, allow: bool) -> FiniteScenario {
        FiniteScenario {
            c_bits: self.c,
            f_ec: self.f,
            policy: policy(allow),
            ..FiniteScenario::new(n, k, self.d, self.m, self.q)
        }
    }

    fn optimize(&self, n: u64, allow: bool) -> CliResult<RateResult> {
        let s = self.scenario(n, 1, allow);
        Ok(optimize_rate(
            &s,
            self.eps.log2(),
            self.bound.into(),
            self.attack.into(),
            self.eps_mode.into(),
            &OptimizerConfig::default(),
        )?)
    }
}

fn rate_json(r: &RateResult) -> Value {
    let exp = |x: f64| x.exp2();
    json!({
        "rate": r.rate,
        "feasible": r.feasible,
        "key_length": r.key_length,
        "k": r.k,
        "mu": r.mu,
        "bound": r.bound.name(),
        "attack": r.attack.name(),
        "log2_eps_smooth": r.split.log2_eps_smooth,
        "log2_eps_ec": r.split.log2_eps_ec,
        "log2_eps_pa": r.split.log2_eps_pa,
        "log2_eps_tot": r.split.log2_eps_tot,
        "eps_smooth": exp(r.split.log2_eps_smooth),
        "eps_ec": exp(r.split.log2_eps_ec),
        "eps_pa": exp(r.split.log2_eps_pa),
        "log2_eps_coh": r.log2_eps_coh,
    })
}

fn fmt_log2_eps(x: f64) -> String {
    let v = x.exp2();
    if v > 0.0 {
        format!("{} (2^{})", sig12(v), sig12(x))
    } else {
        format!("2^{}", sig12(x))
    }
}

pub fn finite(a: &FiniteArgs) -> CliResult<Outcome> {
    let n = parse_count(need(a.n, "n")?, "n")?;
    let res = ResolvedFinite::from_params(&a.params)?;
    let allow = a.params.allow_unguaranteed;
    let r = match a.k {
        None => {
            if a.split.is_some() {
                return Err(usage("--split needs --k"));
            }
            res.optimize(n, allow)?
        }
        Some(k) => {
            let k = parse_count(k, "k")?;
            let w = a.split.clone().unwrap_or_else(|| vec![1.0 / 3.0; 3]);
            if w.len() != 3 {
                return Err(usage("--split takes exactly three weights"));
            }
            let split = SecuritySplit::from_weights(res.eps.log2(), [w[0], w[1], w[2]])?;
            let s = res.scenario(n, k, allow);
            match (res.bound, res.attack) {
                (BoundArg::Eur, _) => eur_rate(&s, &split)?,
                (BoundArg::Aep, AttackArg::Collective) => aep_rate(&s, &split)?,
                (BoundArg::Aep, AttackArg::Coherent) => {
                    coherent_rate(&s, &split, res.eps_mode.into())?
                }
            }
        }
    };
    let mut text = String::new();
    line(&mut text, "rate", sig12(r.rate));
    line(&mut text, "feasible", r.feasible);
    line(&mut text, "key length", sig12(r.key_length));
    line(&mut text, "k", r.k);
    line(&mut text, "n", n - r.k);
    line(&mut text, "mu", sig12(r.mu));
    line(&mut text, "eps", fmt_log2_eps(r.split.log2_eps_smooth));
    line(&mut text, "eps_EC", fmt_log2_eps(r.split.log2_eps_ec));
    line(&mut text, "eps_PA", fmt_log2_eps(r.split.log2_eps_pa));
    if let Some(c) = r.log2_eps_coh {
        line(&mut text, "eps_coh", fmt_log2_eps(c));
    }
    let mut resolved = serde_json::to_value(&res).expect("serializable");
    resolved["n"] = json!(n);
    resolved["optimized"] = json!(a.k.is_none());
    Ok(Outcome {
        resolved,
        result: rate_json(&r),
        text,
        exit: 0,
    })
}

pub fn figure(a: &FigureArgs) -> CliResult<Outcome> {
    let name = need(a.name, "name (fig1..fig5)")?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mode = a.eps_mode.unwrap_or(EpsModeArg::DeriveEps);
    let files = figures::generate(name, mode.into())?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Other(anyhow::anyhow!("creating {}: {e}", out.display())))?;
    let mut text = String::new();
    let mut written = Vec::new();
    for f in &files {
        let path = out.join(&f.name);
        std::fs::write(&path, f.table.render())
            .map_err(|e| CliError::Other(anyhow::anyhow!("writing {}: {e}", path.display())))?;
        writeln!(text, "{}", path.display()).unwrap();
        written.push(path.display().to_string());
    }
    Ok(Outcome {
        resolved: json!({ "name": name, "out": out, "eps_mode": mode }),
        result: json!({ "files": written }),
        text,
        exit: 0,
    })
}

pub fn verify(a: &VerifyArgs) -> CliResult<Outcome> {
    let level = a.level.unwrap_or(Level::Quick);
    let seed = a.seed.unwrap_or(1);
    let report = verify::run(level, seed, a.inject_fault);
    let mut text = String::new();
    for s in &report.suites {
        let status = if s.failures.is_empty() {
            "ok"
        } else {
            "FAILED"
        };
        writeln!(
            text,
            "{:<14} {:>5} checks  {:>8.2}s  {status}",
            s.name, s.checks, s.seconds
        )
        .unwrap();
        for f in &s.failures {
            writeln!(text, "    {f}").unwrap();
        }
    }
    let exit = if report.passed() {
        writeln!(text, "all checks passed").unwrap();
        0
    } else {
        writeln!(
            text,
            "first failure: {}",
            report.first_failure().unwrap_or_default()
        )
        .unwrap();
        1
    };
    Ok(Outcome {
        resolved: json!({ "level": level, "seed": seed, "inject_fault": a.inject_fault }),
        result: serde_json::to_value(&report).expect("serializable"),
        text,
        exit,
    })
}

/// Integer grid from a float range, keeping first occurrences.
fn integer_grid(values: &[f64], flag: &str) -> CliResult<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    for &v in values {
        let r = v.round();
        if !(r >= 1.0) {
            return Err(usage(format!(
                "{flag} grid value {v} is not a positive integer"
            )));
        }
        let r = r as u64;
        if out.last() != Some(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

pub fn sweep(a: &SweepArgs) -> CliResult<Outcome> {
    let var = need(a.var, "var")?;
    let start = need(a.start, "start")?;
    let stop = need(a.stop, "stop")?;
    let points = need(a.points, "points")?;
    if points < 2 {
        return Err(usage(format!("--points must be at least 2, got {points}")));
    }
    if !(start.is_finite() && stop.is_finite()) || stop < start {
        return Err(usage(format!(
            "need finite --start <= --stop, got {start}..{stop}"
        )));
    }
    let scale = a.scale.unwrap_or(if var == SweepVar::N {
        Scale::Log
    } else {
        Scale::Linear
    });
    if scale == Scale::Log && start <= 0.0 {
        return Err(usage("log grids need --start > 0"));
    }
    let kind = a.kind.unwrap_or(if var == SweepVar::N {
        RateKind::Finite
    } else {
        RateKind::Asymptotic
    });
    if var == SweepVar::N && kind == RateKind::Asymptotic {
        return Err(usage("an N sweep needs --kind finite"));
    }
    match var {
        SweepVar::Q if !(0.0..=1.0).contains(&start) || stop > 1.0 => {
            return Err(usage("Q must lie in [0, 1]"));
        }
        _ => {}
    }
    let raw = match scale {
        Scale::Linear => linspace(start, stop, points),
        Scale::Log => logspace(start, stop, points),
    };
    let grid: Vec<f64> = match var {
        SweepVar::Q => raw,
        SweepVar::N | SweepVar::D | SweepVar::M => integer_grid(&raw, var_name(var))?
            .into_iter()
            .map(|v| v as f64)
            .collect(),
    };

    let mut params = a.params.clone();
    let allow = params.allow_unguaranteed;
    // fill the swept slot so that resolution does not ask for it
    match var {
        SweepVar::Q => params.q = params.q.or(Some(grid[0])),
        SweepVar::D => params.d = params.d.or(Some(grid[0] as usize)),
        SweepVar::M => params.m = params.m.or(Some(grid[0] as usize)),
        SweepVar::N => {}
    }
    let mut table;
    match kind {
        RateKind::Asymptotic => {
            let d = need(params.d, "d")?;
            let m = need(params.m, "m")?;
            let q = need(params.q, "q")?;
            table = CsvTable::new(&[var_name(var), "rate"])
                .param("sweep", var_name(var))
                .param("kind", "asymptotic")
                .param("clamp", "max(rate,0)");
            if var != SweepVar::D {
                table = table.param("d", d);
            }
            if var != SweepVar::M {
                table = table.param("m", m);
            }
            if var != SweepVar::Q {
                table = table.param("Q", q);
            }
            let pol = policy(allow);
            table.rows = grid
                .par_iter()
                .map(|&x| {
                    let (d, m, q) = match var {
                        SweepVar::Q => (d, m, x),
                        SweepVar::D => (x as usize, m, q),
                        SweepVar::M => (d, x as usize, q),
                        SweepVar::N => unreachable!(),
                    };
                    clamped_rate(d, m, q, pol).map(|r| vec![x, r])
                })
                .collect::<CliResult<Vec<_>>>()?;
        }
        RateKind::Finite => {
            let res = ResolvedFinite::from_params(&params)?;
            let n_fixed = match (var, a.n) {
                (SweepVar::N, _) => 0,
                (_, Some(n)) => parse_count(n, "n")?,
                (_, None) => return Err(usage("finite sweeps over Q, d or m need --n")),
            };
            table = CsvTable::new(&[
                var_name(var),
                "rate",
                "feasible",
                "k",
                "log2_eps_smooth",
                "log2_eps_ec",
                "log2_eps_pa",
            ])
            .param("sweep", var_name(var))
            .param("kind", "finite")
            .param("bound", res.bound.to_possible_value_name())
            .param("attack", res.attack.to_possible_value_name())
            .param("eps_tot", res.eps)
            .param("f", res.f);
            if var != SweepVar::N {
                table = table.param("N", n_fixed);
            }
            if var != SweepVar::D {
                table = table.param("d", res.d).param("C", res.c);
            }
            if var != SweepVar::M {
                table = table.param("m", res.m);
            }
            if var != SweepVar::Q {
                table = table.param("Q", res.q);
            }
            if res.attack == AttackArg::Coherent {
                table = table.param("eps_mode", res.eps_mode.to_possible_value_name());
            }
            table.rows = grid
                .par_iter()
                .map(|&x| {
                    let mut r = res.clone();
                    let mut n = n_fixed;
                    match var {
                        SweepVar::Q => r.q = x,
                        SweepVar::N => n = x as u64,
                        SweepVar::D => {
                            r.d = x as usize;
                            if a.params.c.is_none() {
                                r.c = x.log2();
                            }
                        }
                        SweepVar::M => r.m = x as usize,
                    }
                    if n < 2 {
                        return Err(usage(format!("N = {n} is too small")));
                    }
                    let out = r.optimize(n, allow)?;
                    Ok(vec![
                        x,
                        out.rate,
                        if out.feasible { 1.0 } else { 0.0 },
                        out.k as f64,
                        out.split.log2_eps_smooth,
                        out.split.log2_eps_ec,
                        out.split.log2_eps_pa,
                    ])
                })
                .collect::<CliResult<Vec<_>>>()?;
        }
    }

    let format = a.format.unwrap_or(OutputFormat::Csv);
    let body = match format {
        OutputFormat::Csv => table.render(),
        OutputFormat::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    Value::Object(
                        table
                            .header
                            .iter()
                            .cloned()
                            .zip(r.iter().map(|v| json!(v)))
                            .collect(),
                    )
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("serializable") + "\n"
        }
    };
    let text = match &a.out {
        Some(path) => {
            std::fs::write(path, &body)
                .map_err(|e| CliError::Other(anyhow::anyhow!("writing {}: {e}", path.display())))?;
            format!("{}\n", path.display())
        }
        None => body,
    };
    Ok(Outcome {
        resolved: json!({
            "var": var, "scale": scale, "kind": kind, "points": grid.len(),
            "params": table.params.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
        }),
        result: json!({ "header": table.header, "rows": table.rows }),
        text,
        exit: 0,
    })
}

fn var_name(v: SweepVar) -> &'static str {
    match v {
        SweepVar::Q => "Q",
        SweepVar::N => "N",
        SweepVar::D => "d",
        SweepVar::M => "m",
    }
}

trait ValueName {
    fn to_possible_value_name(&self) -> String;
}

impl<T: clap::ValueEnum> ValueName for T {
    fn to_possible_value_name(&self) -> String {
        self.to_possible_value()
            .map(|p| p.get_name().to_string())
            .unwrap_or_default()
    }
}
