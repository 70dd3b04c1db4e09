//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p hd-qkd-ratekit --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use hdqkd_core::asymptotic::{
    max_tolerable_q, rate_general, rate_max_mubs, rate_max_mubs_symmetric, rate_symmetric,
    rate_two_mubs, BasisPolicy,
};
use hdqkd_core::bell::{
    error_rate_in_basis, max_bell_offdiagonal, symmetrize, DensityMatrix, ErrorRateSet,
};
use hdqkd_core::oracle::{oracle_rate, ConstrainedProblem};
use hdqkd_core::weyl::{
    check_mutually_unbiased, computational_basis, max_num_mubs, mub_basis, weyl_op, DenseOperator,
    StateVector,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ratekit::csv::CsvTable;
use ratekit::figures::{fig5_grid, FIG5_D, FIG5_Q};

const POLICY: BasisPolicy = BasisPolicy::Guaranteed;
const FIGURES: [&str; 5] = ["fig1", "fig2", "fig3", "fig4", "fig5"];

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in [2usize, 3, 5] {
        for m in 2..=(d + 1).min(max_num_mubs(d)) {
            let qmax = max_tolerable_q(d, m, POLICY).map_err(err)?;
            for i in 0..5 {
                let q = 0.8 * qmax * i as f64 / 5.0;
                let rates = ErrorRateSet::symmetric(d, m, q).map_err(err)?;
                let analytic = rate_general(&rates, POLICY).map_err(err)?;
                let oracle = oracle_rate(&ConstrainedProblem::new(&rates)).map_err(err)?;
                let diff = (analytic - oracle).abs();
                worst = worst.max(diff);
                cases += 1;
                ensure(diff < 1e-6, || {
                    format!("d={d} m={m} Q={q}: {analytic} vs oracle {oracle}")
                })?;
            }
        }
    }
    Ok(format!("{cases} cases, max |diff| {worst:.1e}"))
}

fn closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2usize, 3, 5, 7, 11] {
        for i in 0..20 {
            let qx = 0.2 * i as f64 / 19.0;
            let qz = 0.15 * (19 - i) as f64 / 19.0;
            let general = rate_general(&ErrorRateSet::new(d, vec![qz, qx]).map_err(err)?, POLICY)
                .map_err(err)?;
            let diff = (general - rate_two_mubs(d, qx, qz).map_err(err)?).abs();
            worst = worst.max(diff);
            ensure(diff < 1e-10, || {
                format!("m=2 d={d} Qx={qx} Qz={qz}: |diff| {diff:e}")
            })?;
        }
    }
    for d in [2usize, 3, 5, 7] {
        for i in 0..20 {
            let q = 0.3 * i as f64 / 19.0 * d as f64 / (d + 1) as f64;
            let rates = ErrorRateSet::symmetric(d, d + 1, q).map_err(err)?;
            let general = rate_general(&rates, POLICY).map_err(err)?;
            let sym = (general - rate_max_mubs_symmetric(d, q).map_err(err)?).abs();
            let full = (general - rate_max_mubs(d, rates.rates()).map_err(err)?).abs();
            worst = worst.max(sym).max(full);
            ensure(sym < 1e-10 && full < 1e-10, || {
                format!("m=d+1 d={d} Q={q}: |diff| {sym:e} {full:e}")
            })?;
        }
    }
    Ok(format!("max |diff| {worst:.1e}"))
}

fn thresholds() -> Outcome {
    let bb84 = max_tolerable_q(2, 2, POLICY).map_err(err)?;
    let six = max_tolerable_q(2, 3, POLICY).map_err(err)?;
    ensure((bb84 - 0.1100).abs() < 5e-4, || {
        format!("Q_max(2,2) = {bb84}")
    })?;
    ensure((six - 0.1262).abs() < 5e-4, || {
        format!("Q_max(2,3) = {six}")
    })?;
    Ok(format!("Q_max(2,2) = {bb84:.6}, Q_max(2,3) = {six:.6}"))
}

fn residual(op: &DenseOperator, v: &StateVector) -> f64 {
    let av = op.apply(v);
    let eig = v.inner(&av);
    (av.amplitudes() - v.amplitudes() * eig).norm()
}

fn wishart(d: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix, String> {
    let n = d * d;
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    DensityMatrix::from_factor(d, &g).map_err(err)
}

fn mub_suite() -> Outcome {
    let (mut unbiased, mut eigen, mut offdiag, mut drift): (f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0);
    for d in [2usize, 3, 5, 7, 11, 13] {
        let mut bases = vec![computational_basis(d).map_err(err)?];
        for k in 0..d {
            let basis = mub_basis(d, k).map_err(err)?;
            let op = weyl_op(d, 1, k).map_err(err)?;
            eigen = basis.iter().map(|v| residual(&op, v)).fold(eigen, f64::max);
            bases.push(basis);
        }
        for i in 0..bases.len() {
            for j in i + 1..bases.len() {
                unbiased =
                    unbiased.max(check_mutually_unbiased(&bases[i], &bases[j]).map_err(err)?);
            }
        }
    }
    ensure(unbiased < 1e-10, || {
        format!("unbiasedness deviation {unbiased:e}")
    })?;
    ensure(eigen < 1e-10, || format!("eigen-residual {eigen:e}"))?;
    for d in [2usize, 3, 5] {
        let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0000 + d as u64);
        let mut bases = vec![computational_basis(d).map_err(err)?];
        for k in 0..d {
            bases.push(mub_basis(d, k).map_err(err)?);
        }
        for _ in 0..20 {
            let rho = wishart(d, &mut rng)?;
            let tw = symmetrize(&rho).map_err(err)?;
            offdiag = offdiag.max(max_bell_offdiagonal(&tw).map_err(err)?);
            for basis in &bases {
                let before = error_rate_in_basis(&rho, basis).map_err(err)?;
                let after = error_rate_in_basis(&tw, basis).map_err(err)?;
                drift = drift.max((before - after).abs());
            }
        }
    }
    ensure(offdiag < 1e-10, || {
        format!("twirled off-diagonal {offdiag:e}")
    })?;
    ensure(drift < 1e-10, || {
        format!("error-rate change under twirl {drift:e}")
    })?;
    Ok(format!(
        "unbiased {unbiased:.0e}, eigen {eigen:.0e}, off-diagonal {offdiag:.0e}, rate drift {drift:.0e}"
    ))
}

fn threshold_trends() -> Outcome {
    let q: Vec<f64> = (2..=6)
        .map(|m| max_tolerable_q(5, m, POLICY))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let steps: Vec<f64> = q.windows(2).map(|w| w[1] - w[0]).collect();
    ensure(steps.iter().all(|&s| s > 0.0), || {
        format!("Q_max(5,m) not increasing: {q:?}")
    })?;
    ensure(steps.windows(2).all(|w| w[1] < w[0]), || {
        format!("increments not shrinking: {steps:?}")
    })?;
    let primes = [2usize, 3, 5, 7, 11];
    for (label, m_of) in [("m=2", (|_| 2) as fn(usize) -> usize), ("m=d+1", |d| d + 1)] {
        let qd: Vec<f64> = primes
            .iter()
            .map(|&d| max_tolerable_q(d, m_of(d), POLICY))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        ensure(qd.windows(2).all(|w| w[1] > w[0]), || {
            format!("{label}: Q_max not increasing in d: {qd:?}")
        })?;
    }
    Ok(format!("Q_max(5,2..6) = {:.4?}", q))
}

struct Fig5 {
    grid: Vec<f64>,
    dir: PathBuf,
}

impl Fig5 {
    fn rates(&self, label: &str) -> Result<Vec<f64>, String> {
        let path = self.dir.join(format!("fig5_{label}.csv"));
        let text =
            std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let table = CsvTable::parse(&text).map_err(err)?;
        let n = table.column("N").ok_or("no N column")?;
        ensure(n == self.grid, || format!("{label}: unexpected N grid"))?;
        table
            .column("rate")
            .ok_or_else(|| "no rate column".to_string())
    }

    fn crossover(&self, attack: &str) -> Result<Option<f64>, String> {
        let m3 = self.rates(&format!("aep_{attack}_m3"))?;
        let m4 = self.rates(&format!("aep_{attack}_m4"))?;
        Ok((0..self.grid.len())
            .find(|&i| m4[i] > m3[i])
            .map(|i| self.grid[i]))
    }
}

fn crossovers(fig: &Fig5) -> Outcome {
    let collective = fig.crossover("collective")?;
    let coherent = fig.crossover("coherent")?;
    let within = |n: Option<f64>, anchor: f64| n.is_some_and(|n| (n / anchor).log10().abs() <= 1.0);
    let msg = format!(
        "collective N* = {collective:?} (anchor 3e6), coherent N* = {coherent:?} (anchor 1e9)"
    );
    ensure(within(collective, 3e6) && within(coherent, 1e9), || {
        msg.clone()
    })?;
    Ok(msg)
}

fn eur_dominance(fig: &Fig5) -> Outcome {
    let eur = fig.rates("eur_collective_m2")?;
    let aep = fig.rates("aep_collective_m2")?;
    let bad: Vec<f64> = (0..fig.grid.len())
        .filter(|&i| eur[i] < aep[i])
        .map(|i| fig.grid[i])
        .collect();
    ensure(bad.is_empty(), || format!("EUR below AEP at N = {bad:?}"))?;
    let gap = eur
        .iter()
        .zip(&aep)
        .map(|(e, a)| e - a)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{} grid points, min(EUR - AEP) = {gap:.3e}",
        fig.grid.len()
    ))
}

fn convergence(fig: &Fig5) -> Outcome {
    let mut worst: f64 = 0.0;
    for m in 2..=FIG5_D + 1 {
        let rates = fig.rates(&format!("aep_collective_m{m}"))?;
        let last = *rates.last().ok_or("empty curve")?;
        ensure(*fig.grid.last().unwrap() == 1e12, || {
            "grid does not end at 1e12".into()
        })?;
        let asym = rate_symmetric(FIG5_D, m, FIG5_Q, POLICY).map_err(err)?;
        let rel = (asym - last).abs() / asym;
        worst = worst.max(rel);
        ensure(rel < 0.01, || {
            format!("m={m}: {last} vs asymptotic {asym} ({:.2}%)", 100.0 * rel)
        })?;
    }
    Ok(format!("max relative gap at N=1e12 {:.3}%", 100.0 * worst))
}

fn render_all(dir: &Path, threads: &str) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(err)?;
    for fig in FIGURES {
        let out = Command::new(env!("CARGO_BIN_EXE_hd-qkd-ratekit"))
            .args(["figure", fig, "--out"])
            .arg(dir)
            .env("HDQKD_THREADS", threads)
            .output()
            .map_err(err)?;
        ensure(out.status.success(), || {
            format!(
                "figure {fig} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
    }
    Ok(())
}

fn listing(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        let bytes = std::fs::read(&path).map_err(err)?;
        files.push((
            path.file_name().unwrap().to_string_lossy().into_owned(),
            bytes,
        ));
    }
    files.sort();
    Ok(files)
}

fn determinism(runs: &[PathBuf; 3]) -> Outcome {
    let base = listing(&runs[0])?;
    ensure(!base.is_empty(), || "no figure files written".into())?;
    for (other, label) in runs[1..].iter().zip(["second run, 1 thread", "4 threads"]) {
        let files = listing(other)?;
        let names = |v: &[(String, Vec<u8>)]| v.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
        ensure(names(&files) == names(&base), || {
            format!("{label}: different file set")
        })?;
        for ((name, a), (_, b)) in base.iter().zip(&files) {
            ensure(a == b, || format!("{label}: {name} differs"))?;
        }
    }
    Ok(format!("{} files identical across 3 runs", base.len()))
}

fn report(id: usize, title: &str, start: Instant, outcome: Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {id} ({title}): PASS [{secs:.1}s] {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {id} ({title}): FAIL [{secs:.1}s] {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, "oracle equivalence", t, oracle_equivalence());
    let t = Instant::now();
    ok &= report(2, "closed forms", t, closed_forms());
    let t = Instant::now();
    ok &= report(3, "known thresholds", t, thresholds());
    let t = Instant::now();
    ok &= report(4, "MUB and twirl suite", t, mub_suite());
    let t = Instant::now();
    ok &= report(5, "threshold trends", t, threshold_trends());

    let scratch = tempfile::tempdir().expect("temp dir");
    let runs = [
        scratch.path().join("a"),
        scratch.path().join("b"),
        scratch.path().join("c"),
    ];
    let t = Instant::now();
    let first = render_all(&runs[0], "1");
    let render_secs = t.elapsed().as_secs_f64();
    println!("rendered all figures once in {render_secs:.1}s");
    let fig = Fig5 {
        grid: fig5_grid().into_iter().map(|n| n as f64).collect(),
        dir: runs[0].clone(),
    };
    let gate = |o: Outcome| first.clone().and(o);
    let t = Instant::now();
    ok &= report(6, "fig5 crossovers", t, gate(crossovers(&fig)));
    let t = Instant::now();
    ok &= report(7, "EUR dominance", t, gate(eur_dominance(&fig)));
    let t = Instant::now();
    ok &= report(8, "asymptotic convergence", t, gate(convergence(&fig)));

    let t = Instant::now();
    let det = first
        .clone()
        .and_then(|_| render_all(&runs[1], "1"))
        .and_then(|_| render_all(&runs[2], "4"))
        .and_then(|_| determinism(&runs));
    ok &= report(9, "determinism", t, det);

    if ok {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
