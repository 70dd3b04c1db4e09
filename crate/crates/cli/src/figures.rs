//! CSV data behind the five standard figures.
//!
//! Grid points are evaluated in parallel and collected in grid order, so
//! output does not depend on the thread count.

use hdqkd_core::asymptotic::{max_tolerable_q, rate_symmetric, BasisPolicy};
use hdqkd_core::finite::{
    optimize_rate, AttackModel, BoundType, EpsMode, FiniteScenario, OptimizerConfig, RateResult,
};
use hdqkd_core::Error as CoreError;
use rayon::prelude::*;

use crate::args::FigureName;
use crate::csv::CsvTable;
use crate::error::CliResult;

const POLICY: BasisPolicy = BasisPolicy::Guaranteed;

/// Primes used for the dimension sweeps.
pub const FIG3_DIMS: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
pub const FIG4_DIMS: [usize; 11] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31];
/// Basis counts shown for d = 47; a subset chosen here, not a canonical one.
pub const FIG2_BASES: [usize; 6] = [2, 3, 6, 12, 24, 48];

pub const FIG5_D: usize = 5;
pub const FIG5_Q: f64 = 0.05;
pub const FIG5_EPS: f64 = 1e-10;
pub const FIG5_PER_DECADE: u32 = 20;
pub const FIG5_DECADES: (u32, u32) = (4, 12);

pub struct FigureFile {
    pub name: String,
    pub table: CsvTable,
}

pub fn generate(name: FigureName, eps_mode: EpsMode) -> CliResult<Vec<FigureFile>> {
    match name {
        FigureName::Fig1 => fig1(),
        FigureName::Fig2 => fig2(),
        FigureName::Fig3 => fig3(),
        FigureName::Fig4 => fig4(),
        FigureName::Fig5 => fig5(eps_mode),
    }
}

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    (0..points)
        .map(|i| {
            if i == points - 1 {
                stop
            } else {
                start + (stop - start) * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

pub fn logspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    let (a, b) = (start.log10(), stop.log10());
    linspace(a, b, points)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

/// Asymptotic symmetric rate clamped at zero; infeasible inputs give zero.
pub fn clamped_rate(d: usize, m: usize, q: f64, policy: BasisPolicy) -> CliResult<f64> {
    match rate_symmetric(d, m, q, policy) {
        Ok(r) => Ok(r.max(0.0)),
        Err(CoreError::InfeasibleRates(_) | CoreError::NoFeasibleRoot { .. }) => Ok(0.0),
        Err(e) => Err(e.into()),
    }
}

fn q_curve(d: usize, m: usize, qs: &[f64]) -> CliResult<Vec<Vec<f64>>> {
    qs.par_iter()
        .map(|&q| clamped_rate(d, m, q, POLICY).map(|r| vec![q, r]))
        .collect()
}

fn fig1() -> CliResult<Vec<FigureFile>> {
    let d = 5;
    let qs = linspace(0.0, 0.3, 301);
    (2..=d + 1)
        .map(|m| {
            let mut table = CsvTable::new(&["Q", "rate"])
                .param("figure", "fig1")
                .param("d", d)
                .param("m", m)
                .param("clamp", "max(rate,0)");
            table.rows = q_curve(d, m, &qs)?;
            Ok(FigureFile {
                name: format!("fig1_d{d}_m{m}.csv"),
                table,
            })
        })
        .collect()
}

fn fig2() -> CliResult<Vec<FigureFile>> {
    let d = 47;
    let qs = linspace(0.0, 0.6, 200);
    let set: Vec<String> = FIG2_BASES.iter().map(|m| m.to_string()).collect();
    FIG2_BASES
        .iter()
        .map(|&m| {
            let mut table = CsvTable::new(&["Q", "rate"])
                .param("figure", "fig2")
                .param("d", d)
                .param("m", m)
                .param("m_set", set.join(";"))
                .param("m_set_note", "stand-in-subset")
                .param("clamp", "max(rate,0)");
            table.rows = q_curve(d, m, &qs)?;
            Ok(FigureFile {
                name: format!("fig2_d{d}_m{m}.csv"),
                table,
            })
        })
        .collect()
}

fn fig3() -> CliResult<Vec<FigureFile>> {
    let qs = linspace(0.0, 0.5, 251);
    FIG3_DIMS
        .iter()
        .map(|&d| {
            let mut table = CsvTable::new(&["Q", "rate"])
                .param("figure", "fig3")
                .param("d", d)
                .param("m", 2)
                .param("clamp", "max(rate,0)");
            table.rows = q_curve(d, 2, &qs)?;
            Ok(FigureFile {
                name: format!("fig3_d{d}_m2.csv"),
                table,
            })
        })
        .collect()
}

fn fig4() -> CliResult<Vec<FigureFile>> {
    type BasesOf = fn(usize) -> usize;
    let curves: [(&str, BasesOf); 2] = [("m2", |_| 2), ("mdp1", |d| d + 1)];
    curves
        .iter()
        .map(|&(label, m_of)| {
            let rows = FIG4_DIMS
                .par_iter()
                .map(|&d| {
                    Ok(vec![
                        d as f64,
                        m_of(d) as f64,
                        max_tolerable_q(d, m_of(d), POLICY)?,
                    ])
                })
                .collect::<CliResult<Vec<_>>>()?;
            let mut table = CsvTable::new(&["d", "m", "Q_max"])
                .param("figure", "fig4")
                .param("m", if label == "m2" { "2" } else { "d+1" });
            table.rows = rows;
            Ok(FigureFile {
                name: format!("fig4_{label}.csv"),
                table,
            })
        })
        .collect()
}

/// The N grid for fig5: 20 points per decade from 1e4 to 1e12.
pub fn fig5_grid() -> Vec<u64> {
    let (lo, hi) = FIG5_DECADES;
    (lo * FIG5_PER_DECADE..=hi * FIG5_PER_DECADE)
        .map(|i| 10f64.powf(i as f64 / FIG5_PER_DECADE as f64).round() as u64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fig5Curve {
    pub bound: BoundType,
    pub attack: AttackModel,
    pub m: usize,
}

impl Fig5Curve {
    pub fn label(&self) -> String {
        format!("{}_{}_m{}", self.bound.name(), self.attack.name(), self.m)
    }
}

pub fn fig5_curves() -> Vec<Fig5Curve> {
    let mut curves = vec![Fig5Curve {
        bound: BoundType::Eur,
        attack: AttackModel::Collective,
        m: 2,
    }];
    for attack in [AttackModel::Collective, AttackModel::Coherent] {
        for m in 2..=FIG5_D + 1 {
            curves.push(Fig5Curve {
                bound: BoundType::Aep,
                attack,
                m,
            });
        }
    }
    curves
}

pub fn fig5_point(curve: Fig5Curve, n: u64, eps_mode: EpsMode) -> CliResult<RateResult> {
    let scenario = FiniteScenario::new(n, 1, FIG5_D, curve.m, FIG5_Q);
    Ok(optimize_rate(
        &scenario,
        FIG5_EPS.log2(),
        curve.bound,
        curve.attack,
        eps_mode,
        &OptimizerConfig::default(),
    )?)
}

fn fig5(eps_mode: EpsMode) -> CliResult<Vec<FigureFile>> {
    let grid = fig5_grid();
    let curves = fig5_curves();
    let jobs: Vec<(usize, u64)> = (0..curves.len())
        .flat_map(|c| grid.iter().map(move |&n| (c, n)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, n)| fig5_point(curves[c], n, eps_mode))
        .collect::<CliResult<Vec<_>>>()?;

    let mut files = Vec::new();
    let mut summary_header = vec!["N".to_string()];
    let mut summary_rows: Vec<Vec<f64>> = grid.iter().map(|&n| vec![n as f64]).collect();
    for (c, curve) in curves.iter().enumerate() {
        let mut table = CsvTable::new(&[
            "N",
            "rate",
            "feasible",
            "k",
            "log2_eps_smooth",
            "log2_eps_ec",
            "log2_eps_pa",
        ])
        .param("figure", "fig5")
        .param("d", FIG5_D)
        .param("Q", FIG5_Q)
        .param("eps_tot", FIG5_EPS)
        .param("bound", curve.bound.name())
        .param("attack", curve.attack.name())
        .param("m", curve.m)
        .param("points_per_decade", FIG5_PER_DECADE);
        if curve.attack == AttackModel::Coherent {
            table = table.param("eps_mode", eps_mode.name());
        }
        for (i, &n) in grid.iter().enumerate() {
            let r = &results[c * grid.len() + i];
            table.push(vec![
                n as f64,
                r.rate,
                if r.feasible { 1.0 } else { 0.0 },
                r.k as f64,
                r.split.log2_eps_smooth,
                r.split.log2_eps_ec,
                r.split.log2_eps_pa,
            ]);
            summary_rows[i].push(r.rate);
        }
        summary_header.push(curve.label());
        files.push(FigureFile {
            name: format!("fig5_{}.csv", curve.label()),
            table,
        });
    }
    let headers: Vec<&str> = summary_header.iter().map(String::as_str).collect();
    let mut summary = CsvTable::new(&headers)
        .param("figure", "fig5")
        .param("d", FIG5_D)
        .param("Q", FIG5_Q)
        .param("eps_tot", FIG5_EPS)
        .param("eps_mode", eps_mode.name())
        .param("points_per_decade", FIG5_PER_DECADE);
    summary.rows = summary_rows;
    files.push(FigureFile {
        name: "fig5_summary.csv".to_string(),
        table: summary,
    });
    Ok(files)
}
