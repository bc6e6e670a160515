//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the terminal.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use spherical_calabi::curvature::{potential, velocity_bound, Evaluator};
use spherical_calabi::feasibility::{check_bruteforce, check_mincut, subset_margin};
use spherical_calabi::geometry::{edge_side_geometry, edge_side_geometry_k, r_to_k};
use spherical_calabi::instance::Instance;
use spherical_calabi::oracle::{
    fd_gradient, fd_hessian, fd_jacobian, make_synthetic, matrix_relative_error,
    max_relative_error, relative_error, CounterRng, FD_STEP,
};
use spherical_calabi::scalar::{norm_inf, sub};
use spherical_calabi::{
    newton_solve, run, Divergence, FlowConfig, FlowMethod, FlowTrace, Prescription, Verdict,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, || {
        format!("{what} took {:.2} s (limit {limit} s)", elapsed.as_secs_f64())
    })
}

// 1. Edge kernel: analytic partials, symmetry, sine law.
fn variational_kernel() -> Outcome {
    let start = Instant::now();
    let mut rng = CounterRng::new(1);
    let (mut fd_worst, mut sym_worst, mut sine_worst) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..10_000 {
        let rv = rng.uniform(0.05, FRAC_PI_2 - 0.05);
        let rw = rng.uniform(0.05, FRAC_PI_2 - 0.05);
        let phi = rng.uniform(0.05, FRAC_PI_2);
        let g = edge_side_geometry(rv, rw, phi).map_err(|e| e.to_string())?;
        let ctx = || format!("sample {i}: r_v={rv}, r_w={rw}, phi={phi}");
        ensure(g.theta_v > 0.0 && g.theta_v < PI && g.theta_w > 0.0 && g.theta_w < PI, || {
            format!("theta outside (0, pi) at {}", ctx())
        })?;
        ensure(g.d_cross < 0.0 && g.d_pair_v > 0.0 && g.d_pair_w > 0.0, || {
            format!("partial signs wrong at {}", ctx())
        })?;
        let sine = ((g.theta_v / 2.0).sin() * rv.sin() - (g.theta_w / 2.0).sin() * rw.sin()).abs();
        sine_worst = sine_worst.max(sine);

        let (kv, kw) = (r_to_k(rv).unwrap(), r_to_k(rw).unwrap());
        let side = |kv: f64, kw: f64| {
            let g = edge_side_geometry_k(kv, kw, phi).unwrap();
            (g.l_v, g.l_w)
        };
        let h = FD_STEP;
        let (pv, mv) = (side(kv + h, kw), side(kv - h, kw));
        let (pw, mw) = (side(kv, kw + h), side(kv, kw - h));
        let fd = [
            (pv.0 - mv.0) / (2.0 * h),
            (pw.0 - mw.0) / (2.0 * h),
            (pv.1 - mv.1) / (2.0 * h),
            (pw.1 - mw.1) / (2.0 * h),
        ];
        let analytic = [g.d_self_v(), g.d_cross, g.d_cross, g.d_self_w()];
        fd_worst = fd_worst.max(max_relative_error(&analytic, &fd));

        // dL_(e,v)/dK_w and dL_(e,w)/dK_v by the chain rule through
        // theta = 2 atan2(sin phi, cot r_other sin r_self + cos r_self cos phi)
        let (sp, cp) = phi.sin_cos();
        let xv = rw.cos() / rw.sin() * rv.sin() + rv.cos() * cp;
        let xw = rv.cos() / rv.sin() * rw.sin() + rw.cos() * cp;
        let lv_kw = rv.cos() * (-2.0 * sp * (rw.cos() / rw.sin()) * rv.sin() / (sp * sp + xv * xv));
        let lw_kv = rw.cos() * (-2.0 * sp * (rv.cos() / rv.sin()) * rw.sin() / (sp * sp + xw * xw));
        sym_worst = sym_worst.max((lv_kw - lw_kv).abs() / lv_kw.abs().max(1.0));
        sym_worst = sym_worst.max((lv_kw - g.d_cross).abs() / lv_kw.abs().max(1.0));
    }
    ensure(fd_worst <= 1e-6, || format!("finite-difference relative error {fd_worst:.3e} > 1e-6"))?;
    ensure(sym_worst <= 1e-13, || format!("cross-partial symmetry residual {sym_worst:.3e} > 1e-13"))?;
    ensure(sine_worst <= 1e-12, || format!("sine-law residual {sine_worst:.3e} > 1e-12"))?;
    within(start.elapsed(), 5.0, "10^4 kernel checks")?;
    Ok(format!(
        "fd {fd_worst:.2e}, symmetry {sym_worst:.2e}, sine law {sine_worst:.2e}, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

// 2. Jacobian structure on random complexes.
fn jacobian_structure() -> Outcome {
    let (mut asym, mut fd, mut min_margin, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    for seed in 0..200u64 {
        let c = common::random_complex(seed, 12);
        let mut rng = CounterRng::new(seed + 7_000);
        let k: Vec<f64> = rng.uniform_vec(c.n_vertices(), -2.0, 2.0);
        let (_, jac) = Evaluator::new(&c)
            .and_then(|e| e.curvatures_and_jacobian(&k))
            .map_err(|e| format!("seed {seed}: {e}"))?;
        asym = asym.max(jac.asymmetry());
        min_margin = min_margin.min(jac.diagonal_dominance_margin());
        min_eig = min_eig.min(jac.min_symmetric_eigenvalue());
        let n = c.n_vertices();
        for v in 0..n {
            for w in 0..n {
                if v != w && (jac[(v, w)] != 0.0) != c.adjacent(v, w) {
                    return Err(format!("seed {seed}: J[{v},{w}] = {} but adjacency is {}", jac[(v, w)], c.adjacent(v, w)));
                }
            }
        }
        let approx = fd_jacobian(&c, &k, FD_STEP).map_err(|e| e.to_string())?;
        fd = fd.max(matrix_relative_error(&jac, &approx));
    }
    ensure(asym <= 1e-12, || format!("asymmetry {asym:.3e} > 1e-12"))?;
    ensure(min_margin > 0.0, || format!("diagonal dominance margin {min_margin:.3e} <= 0"))?;
    ensure(min_eig > 0.0, || format!("minimum eigenvalue {min_eig:.3e} <= 0"))?;
    ensure(fd <= 1e-6, || format!("fd_jacobian relative error {fd:.3e} > 1e-6"))?;
    Ok(format!(
        "asymmetry {asym:.2e}, min dominance margin {min_margin:.3e}, min eigenvalue {min_eig:.3e}, fd {fd:.2e}"
    ))
}

// 3. Potential: gradient, path independence, Hessian.
fn potential_checks() -> Outcome {
    let (mut grad, mut path, mut hess) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..20u64 {
        let c = common::random_complex(seed + 300, 8);
        let n = c.n_vertices();
        let inst = make_synthetic(&c, seed, (-1.0, 1.0)).map_err(|e| e.to_string())?;
        let lhat = &inst.lhat;
        let mut rng = CounterRng::new(seed + 9_000);
        let k: Vec<f64> = rng.uniform_vec(n, -1.5, 1.5);
        let mid: Vec<f64> = rng.uniform_vec(n, -1.5, 1.5);
        let zero = vec![0.0; n];
        let energy = |x: &[f64], base: &[f64]| potential(&c, lhat, x, base).unwrap();

        let l = Evaluator::new(&c).unwrap().curvatures(&k).unwrap();
        let g = fd_gradient(|x| energy(x, &k), &k, FD_STEP);
        grad = grad.max(max_relative_error(&g, &sub(&l, lhat.values())));

        let direct = energy(&k, &zero);
        let bent = energy(&mid, &zero) + energy(&k, &mid);
        path = path.max((direct - bent).abs());

        let h = fd_hessian(|x| energy(x, &k), &k, FD_STEP);
        let (_, jac) = Evaluator::new(&c).unwrap().curvatures_and_jacobian(&k).unwrap();
        hess = hess.max(matrix_relative_error(&h, &jac.transpose()));
    }
    ensure(grad <= 1e-6, || format!("gradient relative error {grad:.3e} > 1e-6"))?;
    ensure(path <= 1e-9, || format!("two-path disagreement {path:.3e} > 1e-9"))?;
    ensure(hess <= 1e-5, || format!("Hessian relative error {hess:.3e} > 1e-5"))?;
    Ok(format!("gradient {grad:.2e}, paths {path:.2e}, Hessian {hess:.2e}"))
}

struct Recovery {
    instances: Vec<(&'static str, spherical_calabi::oracle::SyntheticInstance<f64>)>,
    /// One trace per (instance, start).
    traces: Vec<(usize, FlowTrace<f64>)>,
    /// First start of each instance.
    starts: Vec<Vec<f64>>,
    elapsed: Duration,
}

fn planted_runs() -> Result<Recovery, String> {
    let start = Instant::now();
    let instances = common::planted_suite(50);
    let mut traces = Vec::new();
    let mut starts = Vec::new();
    let config = FlowConfig {
        max_time: 1e6,
        ..FlowConfig::default()
    };
    for (i, (name, inst)) in instances.iter().enumerate() {
        let mut rng = CounterRng::new(50_000 + i as u64);
        for s in 0..5 {
            let k0: Vec<f64> = rng.uniform_vec(inst.complex.n_vertices(), -2.0, 2.0);
            if s == 0 {
                starts.push(k0.clone());
            }
            let trace = run(&inst.complex, &inst.lhat, &k0, &config)
                .map_err(|f| format!("{name} #{i} start {s}: {f}"))?;
            traces.push((i, trace));
        }
    }
    Ok(Recovery {
        instances,
        traces,
        starts,
        elapsed: start.elapsed(),
    })
}

// 4. Planted-solution recovery.
fn planted_recovery(rec: &Recovery) -> Outcome {
    let (mut res, mut err) = (0.0f64, 0.0f64);
    for (i, trace) in &rec.traces {
        let (name, inst) = &rec.instances[*i];
        ensure(trace.verdict == Verdict::Converged, || {
            format!("{name} #{i}: verdict {} at t = {}", trace.verdict, trace.last().unwrap().t)
        })?;
        let last = trace.last().unwrap();
        res = res.max(last.residual);
        err = err.max(norm_inf(&sub(&last.k, &inst.k_bar)));
    }
    ensure(res <= 1e-10, || format!("residual {res:.3e} > 1e-10"))?;
    ensure(err <= 1e-8, || format!("|K - K_bar| {err:.3e} > 1e-8"))?;
    within(rec.elapsed, 60.0, "250 Calabi runs")?;
    Ok(format!(
        "{} runs, max residual {res:.2e}, max |K - K_bar| {err:.2e}, {:.2} s",
        rec.traces.len(),
        rec.elapsed.as_secs_f64()
    ))
}

// 5. Calabi, curvature flow and Newton reach the same K.
fn method_equivalence(rec: &Recovery) -> Outcome {
    let mut worst = 0.0f64;
    for (i, (name, inst)) in rec.instances.iter().enumerate() {
        let k0 = &rec.starts[i];
        let calabi = rec.traces.iter().find(|(j, _)| *j == i).unwrap().1.final_k().unwrap().to_vec();
        let config = FlowConfig {
            method: FlowMethod::Curvature,
            probe_eigen: false,
            ..FlowConfig::default()
        };
        let curvature = run(&inst.complex, &inst.lhat, k0, &config)
            .map_err(|f| format!("{name} #{i} curvature flow: {f}"))?;
        ensure(curvature.verdict == Verdict::Converged, || {
            format!("{name} #{i}: curvature flow {}", curvature.verdict)
        })?;
        let newton = newton_solve(&inst.complex, &inst.lhat, k0, 1e-12)
            .map_err(|e| format!("{name} #{i} newton: {e}"))?;
        let curv = curvature.final_k().unwrap();
        for (a, b) in [(&calabi[..], curv), (&calabi[..], &newton.k[..]), (curv, &newton.k[..])] {
            worst = worst.max(norm_inf(&sub(a, b)));
        }
    }
    ensure(worst <= 1e-8, || format!("pairwise |K| disagreement {worst:.3e} > 1e-8"))?;
    Ok(format!("{} instances, max pairwise distance {worst:.2e}", rec.instances.len()))
}

// 6. Exponential decay of the Calabi energy.
fn exponential_decay(rec: &Recovery) -> Outcome {
    let (mut worst_r2, mut worst_slope, mut worst_rise) = (1.0f64, f64::NEG_INFINITY, 0.0f64);
    let mut fitted = 0;
    for (i, trace) in &rec.traces {
        let fit = trace
            .fitted_rate
            .ok_or_else(|| format!("instance #{i}: converged trace without a fitted rate"))?;
        if trace.samples.len() < 10 {
            continue;
        }
        fitted += 1;
        worst_r2 = worst_r2.min(fit.r_squared);
        worst_slope = worst_slope.max(fit.slope);
        for w in trace.samples.windows(2) {
            worst_rise = worst_rise.max(w[1].energy - w[0].energy);
        }
    }
    ensure(worst_slope < 0.0, || format!("non-negative slope {worst_slope:.3e}"))?;
    ensure(worst_r2 >= 0.99, || format!("R^2 {worst_r2:.5} < 0.99"))?;
    ensure(worst_rise <= 1e-9, || format!("energy increased by {worst_rise:.3e}"))?;
    Ok(format!(
        "{fitted} traces, max slope {worst_slope:.3e}, min R^2 {worst_r2:.6}, max energy rise {worst_rise:.2e}"
    ))
}

// 7. Speed stays under the a priori bound.
fn velocity_bound_holds(rec: &Recovery) -> Outcome {
    let mut worst = 0.0f64;
    let mut samples = 0usize;
    for (i, trace) in &rec.traces {
        let inst = &rec.instances[*i].1;
        let bound = velocity_bound(&inst.complex, &inst.lhat).map_err(|e| e.to_string())?;
        for s in &trace.samples {
            samples += 1;
            worst = worst.max(s.speed / bound);
        }
    }
    ensure(worst <= 1.0, || format!("speed reached {worst:.3} x bound"))?;
    Ok(format!("{samples} samples, max speed/bound {worst:.3e}"))
}

// 8. Min-cut feasibility agrees with enumeration.
fn feasibility_equivalence() -> Outcome {
    let (mut worst, mut infeasible) = (0.0f64, 0);
    for seed in 0..500u64 {
        let c = common::random_complex(seed + 20_000, 14);
        let lhat = common::random_prescription(&c, seed, (0.3, 1.3));
        let b = check_bruteforce(&c, &lhat).map_err(|e| e.to_string())?;
        let m = check_mincut(&c, &lhat).map_err(|e| e.to_string())?;
        ensure(b.feasible == m.feasible && b.boundary == m.boundary, || {
            format!("seed {seed}: brute force {:?} vs min-cut {:?}", (b.feasible, b.boundary), (m.feasible, m.boundary))
        })?;
        let d = (b.worst_margin - m.worst_margin).abs();
        ensure(d <= 1e-9, || format!("seed {seed}: margins differ by {d:.3e}"))?;
        worst = worst.max(d);
        infeasible += usize::from(!b.feasible);
    }
    Ok(format!("500 instances ({infeasible} infeasible), max margin difference {worst:.2e}"))
}

// 9. Single-vertex violations diverge and carry a certificate.
fn divergence_detection() -> Outcome {
    let start = Instant::now();
    let mut by_escape = 0;
    for i in 0..20u64 {
        let c = common::random_complex(i + 40_000, 10);
        let feasible = make_synthetic(&c, i, (-1.0, 1.0)).map_err(|e| e.to_string())?;
        let mut values = feasible.lhat.values().to_vec();
        let v = CounterRng::new(i).below(c.n_vertices());
        values[v] = 2.0 * common::star_phi(&c, v) + 0.1 + 0.05 * i as f64;
        let lhat = Prescription::new(values).unwrap();
        let trace = run(&c, &lhat, &vec![0.0; c.n_vertices()], &FlowConfig::default())
            .map_err(|f| format!("instance {i}: {f}"))?;
        ensure(trace.verdict == Verdict::Diverged, || {
            format!("instance {i}: verdict {} (max |K| {:.2})", trace.verdict, norm_inf(trace.final_k().unwrap()))
        })?;
        let cert = trace.certificate.as_ref().ok_or(format!("instance {i}: no certificate"))?;
        let margin = subset_margin(&c, &lhat, &cert.worst_subset).map_err(|e| e.to_string())?;
        ensure(margin > 0.0, || format!("instance {i}: certificate margin {margin:.3e} <= 0"))?;
        by_escape += usize::from(trace.divergence == Some(Divergence::Escape));
    }
    Ok(format!(
        "20 instances diverged ({by_escape} by escape, {} by threshold), {:.2} s",
        20 - by_escape,
        start.elapsed().as_secs_f64()
    ))
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn cli<A: AsRef<std::ffi::OsStr>>(args: &[A]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spherical-calabi"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    Ok((out.status.code().unwrap_or(-1), text))
}

// 10. CLI: byte-identical round trips and the exit-code table.
fn cli_contract() -> Outcome {
    let dir = fixtures_dir();
    let mut round_trips = 0;
    for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        if let Ok(inst) = Instance::parse(&text) {
            ensure(inst.to_toml() == text, || format!("{} does not round-trip", path.display()))?;
            round_trips += 1;
        }
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let out = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let (tet, infeasible, boundary) = (f("tetrahedron.toml"), f("tetrahedron_infeasible.toml"), f("tetrahedron_boundary.toml"));
    let (a, b, sol) = (out("a.csv"), out("b.csv"), out("sol.toml"));
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let matrix: Vec<(Vec<String>, i32, Option<&str>)> = vec![
        (s(&["validate", &tet]), 0, Some("valid, chi=2")),
        (s(&["validate", &f("loop.toml")]), 1, Some("'e5'")),
        (s(&["validate", &f("wide_angle.toml")]), 1, Some("'e3'")),
        (s(&["validate", &f("malformed.toml")]), 2, Some("line")),
        (s(&["validate", &f("unknown_edge.toml")]), 2, Some("'e9'")),
        (s(&["validate", &f("missing.toml")]), 2, None),
        (s(&["check", &tet]), 0, Some("feasible")),
        (s(&["check", &infeasible]), 1, Some("infeasible")),
        (s(&["check", &boundary]), 1, Some("boundary")),
        (s(&["check", &f("no_prescription.toml")]), 2, None),
        (s(&["check", &f("loop.toml")]), 1, None),
        (s(&["solve", &tet, "--solution", &sol]), 0, Some("converged")),
        (s(&["solve", &f("cube.toml"), "--method", "curvature"]), 0, Some("converged")),
        (s(&["solve", &infeasible]), 3, Some("worst_subset")),
        (s(&["solve", &f("torus.toml"), "--max-time", "0.5"]), 4, Some("budget-exhausted")),
        (s(&["solve", &f("loop.toml")]), 1, None),
        (s(&["solve", &tet, "--method", "newton", "--step", "0.1"]), 2, None),
        (s(&["solve", &tet, "--step", "-1"]), 2, None),
        (s(&["solve", &f("cube.toml"), "--seed", "1"]), 2, Some("--seed")),
        (s(&["solve", &tet, "--method", "simplex"]), 2, None),
        (s(&["frobnicate"]), 2, None),
        (s(&["solve", &tet, "--seed", "4", "--integrator", "rk4", "--step", "0.05", "--trace", &a]), 0, None),
        (s(&["solve", &tet, "--seed", "4", "--integrator", "rk4", "--step", "0.05", "--trace", &b]), 0, None),
    ];
    for (args, code, needle) in &matrix {
        let (got, text) = cli(args)?;
        ensure(got == *code, || format!("{args:?}: exit {got}, expected {code}\n{text}"))?;
        if let Some(needle) = needle {
            ensure(text.contains(needle), || format!("{args:?}: output lacks {needle:?}\n{text}"))?;
        }
    }
    let (ta, tb) = (std::fs::read(&a).map_err(|e| e.to_string())?, std::fs::read(&b).map_err(|e| e.to_string())?);
    ensure(ta == tb && !ta.is_empty(), || "rk4 traces with equal seeds differ".into())?;

    let doc: toml::Value = toml::from_str(&std::fs::read_to_string(&sol).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    for v in ["v0", "v1", "v2", "v3"] {
        let r = doc["vertices"][v]["r"].as_float().unwrap_or(f64::NAN);
        ensure(relative_error(r, PI / 4.0) < 1e-9, || format!("solution r[{v}] = {r}"))?;
    }
    let (_, check_text) = cli(&["check", &infeasible])?;
    let (_, solve_text) = cli(&["solve", &infeasible])?;
    let subset = |t: &str| t.lines().find(|l| l.starts_with("worst_subset")).map(String::from);
    ensure(subset(&check_text).is_some() && subset(&check_text) == subset(&solve_text), || {
        "solve certificate differs from check".into()
    })?;
    Ok(format!("{round_trips} fixtures round-trip, {} exit-code cases", matrix.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    };
    report(1, "variational kernel", variational_kernel());
    report(2, "Jacobian structure", jacobian_structure());
    report(3, "potential", potential_checks());
    match planted_runs() {
        Ok(rec) => {
            report(4, "planted-solution recovery", planted_recovery(&rec));
            report(5, "method equivalence", method_equivalence(&rec));
            report(6, "exponential decay", exponential_decay(&rec));
            report(7, "velocity bound", velocity_bound_holds(&rec));
        }
        Err(e) => {
            for (n, name) in [(4, "planted-solution recovery"), (5, "method equivalence"), (6, "exponential decay"), (7, "velocity bound")] {
                report(n, name, Err(e.clone()));
            }
        }
    }
    report(8, "feasibility equivalence", feasibility_equivalence());
    report(9, "divergence detection", divergence_detection());
    report(10, "CLI contract", cli_contract());
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
