//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use etcoord::algebra::{self, build_q, reduced_laplacian, solve_lyapunov, GainSet, UBarInputs};
use etcoord::linalg::{match_multisets, spectrum};
use etcoord::report::{self, RunOptions};
use etcoord::scenario::{ScenarioFile, BUNDLED};
use etcoord::sim::{self, coordination_achieved_time, RunResult, Scenario};
use etcoord::{DMatrix, Digraph, EstimatorState, PaceProfile};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, || {
        format!("took {:.2} s, limit {limit} s", elapsed.as_secs_f64())
    })
}

/// Maximum absolute row sum.
fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for n in 2..=32 {
        let q = build_q(n).map_err(|e| e.to_string())?;
        let q = q.matrix();
        let ones = DMatrix::from_element(n, 1, 1.0);
        worst.0 = worst.0.max(inf_norm(&(q * ones)));
        worst.1 = worst.1.max(inf_norm(&(q * q.transpose() - DMatrix::identity(n - 1, n - 1))));
    }
    let q2 = build_q(2).unwrap();
    let r = 1.0 / 2f64.sqrt();
    let q2_err = (q2.matrix()[(0, 0)] - r).abs().max((q2.matrix()[(0, 1)] + r).abs());
    ensure(worst.0 <= 1e-12, || format!("|Q 1| = {:e}", worst.0))?;
    ensure(worst.1 <= 1e-12, || format!("|Q Q^T - I| = {:e}", worst.1))?;
    ensure(q2_err <= 1e-15, || format!("Q2 off by {q2_err:e}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!(
        "n = 2..32: |Q1| <= {:.1e}, |QQ^T - I| <= {:.1e}, Q2 error {q2_err:.1e}",
        worst.0, worst.1
    ))
}

/// Random digraphs with a directed spanning tree, `2 <= n <= 8`.
fn random_digraphs(count: usize) -> Vec<Digraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.random_range(2..=8);
        let p: f64 = rng.random_range(0.15..0.6);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        let g = Digraph::new(n, edges).unwrap();
        if g.has_spanning_tree() {
            out.push(g);
        }
    }
    out
}

fn criterion_2(graphs: &[Digraph]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for g in graphs {
        let n = g.node_count();
        let l = g.laplacian().into_inner();
        let q = build_q(n).unwrap();
        let lbar = q.matrix() * &l * q.matrix().transpose();
        let mut full = spectrum(&l).map_err(|e| e.to_string())?;
        let zero = full
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
            .unwrap();
        full.remove(zero);
        let reduced: Vec<Complex<f64>> = spectrum(&lbar).map_err(|e| e.to_string())?;
        let d = match_multisets(&reduced, &full).ok_or("size mismatch")?;
        worst = worst.max(d);
        ensure(d <= 1e-6, || format!("{g:?}: matched distance {d:e}"))?;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("{} digraphs, worst matched pair {worst:.1e}", graphs.len()))
}

fn criterion_3(graphs: &[Digraph]) -> Outcome {
    let start = Instant::now();
    let (mut worst_res, mut min_psi) = (0.0f64, f64::INFINITY);
    for g in graphs {
        let n = g.node_count();
        let q = build_q(n).unwrap();
        let lbar = reduced_laplacian(&g.laplacian(), &q).unwrap();
        let eye = DMatrix::identity(n - 1, n - 1);
        let cert = solve_lyapunov(&lbar, &eye).map_err(|e| format!("{g:?}: {e}"))?;
        let psi = &cert.psi;
        let res = (lbar.transpose() * psi + psi * &lbar - &eye).norm();
        worst_res = worst_res.max(res);
        ensure(res <= 1e-8, || format!("{g:?}: residual {res:e}"))?;
        ensure((psi - psi.transpose()).amax() == 0.0, || "Psi not symmetric".into())?;
        // positive definite iff the Cholesky factorization exists
        ensure(psi.clone().cholesky().is_some(), || format!("{g:?}: Psi not PD"))?;
        let lo = psi.symmetric_eigenvalues().min();
        min_psi = min_psi.min(lo);
        ensure(lo > 0.0, || format!("{g:?}: lambda_min(Psi) = {lo:e}"))?;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "{} digraphs, worst residual {worst_res:.1e}, smallest lambda_min(Psi) {min_psi:.3e}",
        graphs.len()
    ))
}

fn rk4_estimator(g: f64, gd: f64, pace: f64, b: f64, t: f64, dt: f64) -> (f64, f64) {
    let f = |v: f64| -b * (v - pace);
    let steps = (t / dt).round() as usize;
    let (mut x, mut v) = (g, gd);
    for _ in 0..steps {
        let (k1x, k1v) = (v, f(v));
        let (k2x, k2v) = (v + 0.5 * dt * k1v, f(v + 0.5 * dt * k1v));
        let (k3x, k3v) = (v + 0.5 * dt * k2v, f(v + 0.5 * dt * k2v));
        let (k4x, k4v) = (v + dt * k3v, f(v + dt * k3v));
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    (x, v)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let b: f64 = rng.random_range(0.5..10.0);
        let gd: f64 = rng.random_range(0.0..2.0);
        let pace: f64 = rng.random_range(0.5..1.5);
        let g: f64 = rng.random_range(0.0..5.0);
        let est = EstimatorState {
            gamma: g,
            gamma_dot: gd,
            t_k: 2.0,
            k: 1,
        };
        let closed = est
            .propagate(&PaceProfile::constant(pace), 3.0, b)
            .map_err(|e| e.to_string())?;
        let brute = rk4_estimator(g, gd, pace, b, 1.0, 1e-6);
        let d = (closed.0 - brute.0).abs().max((closed.1 - brute.1).abs());
        worst = worst.max(d);
        ensure(d <= 1e-6, || format!("b={b} gd={gd} pace={pace}: {d:e}"))?;
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("20 draws over 1 s, worst disagreement {worst:.1e}"))
}

/// Bundled scenario at `dt = 1e-3`.
fn bundled() -> Scenario {
    let mut f = ScenarioFile::from_toml_str(BUNDLED).unwrap();
    f.sim.dt = 1e-3;
    f.into_scenario().unwrap()
}

fn criterion_5(scn: &Scenario) -> Result<(String, RunResult), String> {
    let start = Instant::now();
    ensure(scn.agents() == 5, || "expected 5 agents".into())?;
    ensure(
        scn.gains
            == GainSet {
                a: 3.75,
                b: 4.82,
                k_pf: 1.5,
                eta: 12.0,
            },
        || format!("{:?}", scn.gains),
    )?;
    ensure(scn.threshold.c1 == 0.03 && scn.threshold.c2 == 0.0, || "h != 0.03".into())?;
    ensure(scn.trajectories.t_f() == 21.10, || "t_f != 21.10".into())?;
    ensure(
        scn.pace.value_at(9.999) == 1.0 && scn.pace.value_at(10.0) == 1.4,
        || "pace profile".into(),
    )?;
    let r = sim::run(scn).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let tc = coordination_achieved_time(&r, 0.1).ok_or("never coordinated")?;
    ensure((3.0..=10.0).contains(&tc), || format!("coordination at {tc} s"))?;
    let arrivals: Vec<f64> = r
        .arrivals
        .iter()
        .map(|a| a.ok_or("an agent never arrived"))
        .collect::<Result<_, _>>()?;
    let hi = arrivals.iter().copied().fold(f64::MIN, f64::max);
    let lo = arrivals.iter().copied().fold(f64::MAX, f64::min);
    ensure(hi - lo <= 0.1, || format!("arrival spread {}", hi - lo))?;
    ensure(hi < 21.10, || format!("late arrival {hi}"))?;
    for i in 0..5 {
        let m = r.max_e_pf(i);
        ensure(m <= scn.vehicles[i].rho, || format!("agent {} |e_PF| = {m}", i + 1))?;
    }
    let worst_pf = (0..5).map(|i| r.max_e_pf(i)).fold(0.0, f64::max);
    within(elapsed, 20.0)?;
    Ok((
        format!(
            "coordinated at {tc:.3} s, arrivals {lo:.3}..{hi:.3} s (spread {:.3} s), \
             max |e_PF| {worst_pf:.3} m, run {:.2} s",
            hi - lo,
            elapsed.as_secs_f64()
        ),
        r,
    ))
}

fn criterion_6(scn: &Scenario, r: &RunResult) -> Outcome {
    let n = scn.agents();
    let q = build_q(n).unwrap();
    let lbar = reduced_laplacian(&scn.graph.laplacian(), &q).unwrap();
    let cert = solve_lyapunov(&lbar, &DMatrix::identity(n - 1, n - 1)).unwrap();
    let kappa1 = algebra::kappa1(scn.gains.b, 1.0, &cert, n).unwrap();
    let u_bar = algebra::u_bar(&UBarInputs {
        a: scn.gains.a,
        k_pf: scn.gains.k_pf,
        n,
        kappa1,
        kappa2: 0.0,
        xi0_norm: r.series.xi_norm[0],
        c1: scn.threshold.c1,
        c2: scn.threshold.c2,
        rho: scn.vehicles.iter().map(|v| v.rho).fold(0.0, f64::max),
        gamma_ddot_d_max: 0.0,
    });
    let a_norm = (1.0 + scn.gains.b.powi(2)).sqrt();
    let bound = (1.0 + scn.threshold.c1 * a_norm / u_bar).ln() / a_norm;
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for w in r.event_times(i).windows(2) {
            let gap = w[1] - w[0];
            ensure(gap > 0.0, || format!("agent {} zero gap at {}", i + 1, w[0]))?;
            ensure(gap >= bound, || {
                format!("agent {} gap {gap} below bound {bound}", i + 1)
            })?;
            min_gap = min_gap.min(gap);
        }
    }
    Ok(format!(
        "min gap {min_gap:.4} s >= bound {bound:.4e} s (u_bar {u_bar:.4})"
    ))
}

fn criterion_7(scn: &Scenario, r: &RunResult) -> Outcome {
    let summary = sim::summarize(scn, r, None).map_err(|e| e.to_string())?;
    let iss = &summary.iss;
    let n = scn.agents();
    let q = build_q(n).unwrap();
    let lbar = reduced_laplacian(&scn.graph.laplacian(), &q).unwrap();
    let cert = solve_lyapunov(&lbar, &DMatrix::identity(n - 1, n - 1)).unwrap();
    let lambda = scn.gains.a / scn.gains.b * cert.xi_min / (3.0 * cert.psi_max);
    ensure((iss.lambda_tc - lambda).abs() <= 1e-12 * lambda, || "lambda_TC mismatch".into())?;
    let deadline = 3.0 / lambda;
    let threshold = 0.1 * r.series.xi_norm[0] + iss.floor;
    let settle = iss.settle_time.ok_or("never settled")?;
    ensure(settle <= deadline, || format!("settled at {settle} s, deadline {deadline} s"))?;
    // recheck the settle time on the 10 ms grid inside the judged window
    let end = iss.window_end.unwrap_or(f64::INFINITY);
    for x in iss.samples.iter().filter(|x| x.t >= settle && x.t < end) {
        ensure(x.measured <= threshold, || format!("|xi| = {} at {} s", x.measured, x.t))?;
    }
    Ok(format!(
        "|xi_TC| <= 0.1 |xi_TC(0)| + floor ({threshold:.4}) from {settle:.2} s, deadline {deadline:.2} s \
         (lambda_TC {lambda:.4})"
    ))
}

fn criterion_8(scn: &Scenario, r: &RunResult) -> Outcome {
    let tc = coordination_achieved_time(r, 0.1).ok_or("never coordinated")?;
    let t_last = *r.series.t.last().unwrap();
    let steps_after = ((t_last - tc) / scn.dt).round();
    let mut worst_rate: f64 = 0.0;
    for i in 0..scn.agents() {
        let after = r.event_times(i).iter().filter(|&&t| t > tc).count() as f64;
        let rate = after / steps_after;
        worst_rate = worst_rate.max(rate);
        ensure(rate < 0.1, || format!("agent {} rate {rate}", i + 1))?;
    }
    let early: Vec<usize> = (0..scn.agents())
        .map(|i| r.event_times(i).iter().filter(|&&t| t < 2.0).count())
        .collect();
    let quiet = early[0].max(early[1]);
    let busy = early[2..].iter().copied().min().unwrap();
    ensure(busy > quiet, || format!("events in the first 2 s: {early:?}"))?;
    Ok(format!(
        "post-coordination rate <= {:.2e} per step, events in first 2 s {early:?}",
        worst_rate
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("bundled.toml");
    std::fs::write(&path, BUNDLED).map_err(|e| e.to_string())?;
    let opts = RunOptions {
        dt: Some(1e-3),
        ..Default::default()
    };
    let read = |out: &Path, name: &str| std::fs::read(out.join(name)).map_err(|e| e.to_string());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    report::run_command(&path, &a, &opts).map_err(|e| e.to_string())?;
    report::run_command(&path, &b, &opts).map_err(|e| e.to_string())?;
    let mut bytes = 0;
    for name in [report::TIMESERIES_FILE, report::EVENTS_FILE, report::SUMMARY_FILE] {
        let (x, y) = (read(&a, name)?, read(&b, name)?);
        ensure(x == y, || format!("{name} differs"))?;
        bytes += x.len();
    }
    Ok(format!("3 artifacts identical ({bytes} bytes)"))
}

fn main() {
    let graphs = random_digraphs(250);
    let scn = bundled();
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "Q matrix", criterion_1()),
        (2, "reduced spectrum", criterion_2(&graphs)),
        (3, "Lyapunov certificate", criterion_3(&graphs)),
        (4, "estimator closed form", criterion_4()),
    ];
    match criterion_5(&scn) {
        Ok((msg, run)) => {
            results.push((5, "bundled run", Ok(msg)));
            results.push((6, "inter-event bound", criterion_6(&scn, &run)));
            results.push((7, "ISS decay", criterion_7(&scn, &run)));
            results.push((8, "event sparsity", criterion_8(&scn, &run)));
        }
        Err(e) => {
            for (k, name) in [(5, "bundled run"), (6, "inter-event bound"), (7, "ISS decay"), (8, "event sparsity")] {
                results.push((k, name, Err(if k == 5 { e.clone() } else { "bundled run failed".into() })));
            }
        }
    }
    results.push((9, "determinism", criterion_9()));

    let mut failed = 0;
    for (k, name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("criterion {k} ({name}): PASS: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {k} ({name}): FAIL: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
