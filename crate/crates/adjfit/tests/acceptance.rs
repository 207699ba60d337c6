//! End-to-end acceptance checks, one test per criterion, each printing a
//! single `criterion N (<label>): PASS` or `... FAIL` line (visible with
//! `--nocapture`).  Every tolerance is pinned here, in code.

use std::time::{Duration, Instant};

use adjfit::{
    builtin, check_gradient, evaluate_loss, fit, make_continuous_sample, make_discrete_sample,
    perturb, solve_forward, AdjointProblem, Atom, Builtin, Density, ErrorFunctional, FitConfig,
    ParamTriple, SampleData, SamplingMeasure, SolverConfig, TruncNormSpec,
};
use adjfit::odesolve::flow_compose_diff;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

struct Criterion {
    number: usize,
    label: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: usize, label: &'static str) -> Self {
        Criterion {
            number,
            label,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(detail());
        }
    }

    fn check_runtime(&mut self, elapsed: Duration, budget: Duration) {
        self.check(elapsed <= budget, || {
            format!("runtime {elapsed:?} exceeds budget {budget:?}")
        });
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("criterion {} ({}): PASS", self.number, self.label);
        } else {
            println!("criterion {} ({}): FAIL", self.number, self.label);
            for f in &self.failures {
                println!("  - {f}");
            }
            panic!("criterion {} ({}) failed", self.number, self.label);
        }
    }
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

fn reference_solver() -> SolverConfig {
    SolverConfig::with_tol(1e-10, 1e-10)
}

/// Customary observed component per model: infections for `si`, prey for
/// `lotka_volterra`, the single coordinate otherwise.
fn observed_component(name: &str) -> usize {
    if name == "si" {
        1
    } else {
        0
    }
}

/// Noisy (or noiseless) linear-interpolation observations of the true
/// trajectory on a uniform grid.
fn continuous_data(name: &str, noise_std: f64, seed: u64, grid: usize) -> (Builtin, ErrorFunctional) {
    let b = builtin(name).expect("built-in model");
    let obs = observed_component(name);
    let traj = solve_forward(b.model.as_ref(), &b.truth, &reference_solver()).expect("forward solve");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample =
        make_continuous_sample(&traj, obs, noise_std, grid, &mut rng).expect("sample");
    let h = ErrorFunctional::squared(SampleData::Continuous(sample), obs);
    (b, h)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// 1. Closed-form gradient for the exponential model
// ---------------------------------------------------------------------------

// For x' = theta * x observed at a single time tau against a constant datum
// y, the loss (x0 e^{theta tau} - y)^2 has the hand-computable gradient
//   2 (x0 e^{theta tau} - y) * (0, e^{theta tau}, tau x0 e^{theta tau}).
#[test]
fn criterion_1_closed_form_gradient() {
    let mut c = Criterion::new(1, "closed-form gradient, exponential model");
    let started = Instant::now();

    let b = builtin("exponential").unwrap();
    let cfg = reference_solver();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for tau in [0.3, 0.7, 1.0] {
        let sigma = SamplingMeasure::uniform_atoms(&[tau]).unwrap();
        for _ in 0..10 {
            let x0 = 0.5 + rng.random::<f64>();
            let theta = 2.0 * rng.random::<f64>() - 1.0;
            // Keep the residual bounded away from zero so relative error
            // against the closed form is well defined.
            let offset = (0.3 + 0.7 * rng.random::<f64>())
                * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let reached = x0 * (theta * tau).exp();
            let y = reached + offset;

            let h = ErrorFunctional::squared(SampleData::constant(y), 0);
            let triple = ParamTriple::new(0.0, vec![x0], vec![theta]);
            let grad = adjfit::gradient(b.model.as_ref(), &triple, &h, &sigma, &cfg).unwrap();

            let r = reached - y;
            let exact = [
                0.0,
                2.0 * r * (theta * tau).exp(),
                2.0 * r * tau * reached,
            ];
            c.check(grad[0] == 0.0, || {
                format!("t0 slot of an autonomous gradient is {} (want exact 0)", grad[0])
            });
            for i in 1..3 {
                let rel = (grad[i] - exact[i]).abs() / exact[i].abs();
                c.check(rel <= 1e-7, || {
                    format!(
                        "tau={tau}, x0={x0:.4}, theta={theta:.4}: coordinate {i} \
                         rel err {rel:.3e} > 1e-7 (got {}, want {})",
                        grad[i], exact[i]
                    )
                });
            }
        }
    }

    c.check_runtime(started.elapsed(), Duration::from_secs(1));
    c.finish();
}

// ---------------------------------------------------------------------------
// 2. Finite-difference cross-check across models and measures
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_finite_difference_matrix() {
    let mut c = Criterion::new(2, "adjoint vs central differences, si + lotka_volterra");
    let started = Instant::now();

    let solver = SolverConfig::with_tol(1e-9, 1e-9);
    let measures: Vec<(&str, SamplingMeasure)> = vec![
        ("lebesgue", SamplingMeasure::lebesgue()),
        (
            "10 uniform atoms",
            SamplingMeasure::uniform_atoms(
                &(1..=10).map(|j| j as f64 / 10.0).collect::<Vec<_>>(),
            )
            .unwrap(),
        ),
        (
            "density + 3 atoms",
            SamplingMeasure::from_parts(
                Density::piecewise_truncnorm(
                    vec![TruncNormSpec::new(0.5, 0.2, 0.0, 1.0).unwrap()],
                    vec![1.0],
                )
                .unwrap(),
                vec![
                    Atom { tau: 0.25, weight: 0.25 },
                    Atom { tau: 0.5, weight: 0.25 },
                    Atom { tau: 0.9, weight: 0.25 },
                ],
            )
            .unwrap(),
        ),
    ];

    for name in ["si", "lotka_volterra"] {
        let (b, h) = continuous_data(name, 0.0, 202, 1001);
        let truth_flat = b.truth.flatten();
        let (d, k) = (b.truth.dim_state(), b.truth.dim_param());
        let mut rng = ChaCha8Rng::seed_from_u64(203);
        for (mname, sigma) in &measures {
            for trial in 0..20 {
                // Every coordinate within 10% of its true value (zero stays
                // zero).
                let flat: Vec<f64> = truth_flat
                    .iter()
                    .map(|v| v * (1.0 + 0.1 * (2.0 * rng.random::<f64>() - 1.0)))
                    .collect();
                let triple = ParamTriple::unflatten(&flat, d, k).unwrap();
                let report =
                    check_gradient(b.model.as_ref(), &triple, &h, sigma, &solver, 1e-5).unwrap();
                for row in &report.rows {
                    let scale = row.adjoint.abs().max(row.fd.abs());
                    if scale < 1e-6 {
                        c.check(row.abs_diff <= 1e-7, || {
                            format!(
                                "{name}, {mname}, trial {trial}, {}: near-zero coordinate \
                                 abs diff {:.3e} > 1e-7",
                                row.coordinate, row.abs_diff
                            )
                        });
                    } else {
                        let rel = row.abs_diff / scale;
                        c.check(rel <= 1e-4, || {
                            format!(
                                "{name}, {mname}, trial {trial}, {}: rel diff {rel:.3e} > 1e-4 \
                                 (adjoint {}, fd {})",
                                row.coordinate, row.adjoint, row.fd
                            )
                        });
                    }
                }
            }
        }
    }

    c.check_runtime(started.elapsed(), Duration::from_secs(120));
    c.finish();
}

// ---------------------------------------------------------------------------
// 3. Backward solution around one interior atom
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_interior_atom_structure() {
    let mut c = Criterion::new(3, "interior atom: zero above, jump equals source term");

    let (b, h) = continuous_data("si", 0.0, 301, 1001);
    let cfg = SolverConfig::with_tol(1e-9, 1e-9);
    // A perturbed triple so the residual (and hence the jump) is nonzero.
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    let triple = perturb(&b.truth, 0.05, &mut rng);
    let sigma = SamplingMeasure::uniform_atoms(&[0.4]).unwrap();

    let traj = solve_forward(b.model.as_ref(), &triple, &cfg).unwrap();
    let solution = AdjointProblem::new(b.model.as_ref(), &triple, &traj, &h, &sigma, cfg.clone())
        .unwrap()
        .solve()
        .unwrap();

    // Above the atom the backward solution vanishes identically.
    for tau in [0.4000001, 0.41, 0.5, 0.6, 0.75, 0.9, 1.0] {
        let a = solution.eval(tau).unwrap();
        let norm = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        c.check(norm <= 1e-9, || {
            format!("‖a({tau})‖ = {norm:.3e} > 1e-9 above the atom")
        });
    }

    // The single jump reproduces the weighted error gradient exactly.
    c.check(solution.jumps().len() == 1, || {
        format!("expected exactly one jump, got {}", solution.jumps().len())
    });
    let jump = &solution.jumps()[0];
    c.check(jump.tau == 0.4, || format!("jump at {} (want 0.4)", jump.tau));
    let state = traj.eval(triple.t0 + 0.4).unwrap();
    let g = h
        .error_gradient(0.4, &state, b.truth.dim_param())
        .unwrap();
    let weight = sigma.atoms()[0].weight;
    for (i, (got, gi)) in jump.delta.iter().zip(&g).enumerate() {
        let want = weight * gi;
        c.check(*got == want, || {
            format!("jump[{i}] = {got} differs from weight * g = {want}")
        });
    }
    // Crossing the atom backward turns the zero solution into exactly the
    // jump value.
    let at_atom = solution.eval(0.4).unwrap();
    c.check(at_atom == jump.delta, || {
        "value at the atom does not equal the jump delta".to_string()
    });

    c.finish();
}

// ---------------------------------------------------------------------------
// 4. Superposition over atoms
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_superposition() {
    let mut c = Criterion::new(4, "atomic measure gradient is the weighted atom sum");

    let (b, h) = continuous_data("si", 0.0, 301, 1001);
    let cfg = SolverConfig::with_tol(1e-11, 1e-11);
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    let triple = perturb(&b.truth, 0.05, &mut rng);
    let traj = solve_forward(b.model.as_ref(), &triple, &cfg).unwrap();

    let atoms = vec![
        Atom { tau: 0.15, weight: 0.4 },
        Atom { tau: 0.4, weight: 0.3 },
        Atom { tau: 0.65, weight: 0.2 },
        Atom { tau: 0.9, weight: 0.1 },
    ];
    let mixed = SamplingMeasure::from_parts(Density::Zero, atoms).unwrap();
    let grad_mixed = AdjointProblem::new(b.model.as_ref(), &triple, &traj, &h, &mixed, cfg.clone())
        .unwrap()
        .solve()
        .unwrap()
        .gradient()
        .to_vec();

    // Weighted sum of single-atom gradients, using the normalized weights the
    // measure actually carries.
    let mut combined = vec![0.0; grad_mixed.len()];
    for atom in mixed.atoms() {
        let single =
            SamplingMeasure::from_parts(Density::Zero, vec![Atom { tau: atom.tau, weight: 1.0 }])
                .unwrap();
        let g = AdjointProblem::new(b.model.as_ref(), &triple, &traj, &h, &single, cfg.clone())
            .unwrap()
            .solve()
            .unwrap()
            .gradient()
            .to_vec();
        for (acc, v) in combined.iter_mut().zip(&g) {
            *acc += atom.weight * v;
        }
    }

    let diff = max_abs_diff(&grad_mixed, &combined);
    c.check(diff <= 1e-8, || {
        format!("max |mixed - weighted sum| = {diff:.3e} > 1e-8")
    });

    c.finish();
}

// ---------------------------------------------------------------------------
// 5. Terminal value of the backward sweep
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_terminal_condition() {
    let mut c = Criterion::new(5, "terminal value: end-atom weight times source, else zero");

    let (b, h) = continuous_data("si", 0.0, 301, 1001);
    let cfg = SolverConfig::with_tol(1e-9, 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    let triple = perturb(&b.truth, 0.05, &mut rng);
    let traj = solve_forward(b.model.as_ref(), &triple, &cfg).unwrap();

    // With an atom at the window end the sweep starts from weight * g(1),
    // bitwise.
    let sigma = SamplingMeasure::from_parts(
        Density::Zero,
        vec![
            Atom { tau: 0.3, weight: 0.65 },
            Atom { tau: 1.0, weight: 0.35 },
        ],
    )
    .unwrap();
    let solution = AdjointProblem::new(b.model.as_ref(), &triple, &traj, &h, &sigma, cfg.clone())
        .unwrap()
        .solve()
        .unwrap();
    let state = traj.eval(triple.t0 + 1.0).unwrap();
    let g = h.error_gradient(1.0, &state, b.truth.dim_param()).unwrap();
    let weight = sigma
        .atoms()
        .iter()
        .find(|a| a.tau == 1.0)
        .unwrap()
        .weight;
    for (i, (got, gi)) in solution.initial_condition().iter().zip(&g).enumerate() {
        let want = weight * gi;
        c.check(*got == want, || {
            format!(
                "terminal[{i}] = {got} differs from end-atom weight * g = {want}"
            )
        });
    }

    // Without an atom at the end the sweep starts from exact zero.
    for sigma in [
        SamplingMeasure::uniform_atoms(&[0.3, 0.6]).unwrap(),
        SamplingMeasure::lebesgue(),
    ] {
        let solution =
            AdjointProblem::new(b.model.as_ref(), &triple, &traj, &h, &sigma, cfg.clone())
                .unwrap()
                .solve()
                .unwrap();
        c.check(
            solution.initial_condition().iter().all(|v| *v == 0.0),
            || format!("terminal value {:?} is not exactly zero", solution.initial_condition()),
        );
    }

    c.finish();
}

// ---------------------------------------------------------------------------
// 6. Descent makes progress on both models
// ---------------------------------------------------------------------------

fn descent_for_model(c: &mut Criterion, name: &str) {
    let started = Instant::now();

    // Noiseless: 100 line-searched steps from a 5% perturbation cut the loss
    // by 10x in at least 3 of 4 repetitions.
    let (b, h) = continuous_data(name, 0.0, 601, 1001);
    let sigma = SamplingMeasure::lebesgue();
    let fit_cfg = FitConfig {
        steps: 100,
        ..FitConfig::default()
    };
    let mut reduced = 0;
    for rep in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(610 + rep);
        let start = perturb(&b.truth, 0.05, &mut rng);
        match fit(b.model.as_ref(), &h, &sigma, &start, &fit_cfg) {
            Ok(trace) => {
                if trace.final_loss() <= 0.1 * trace.initial_loss() {
                    reduced += 1;
                } else {
                    println!(
                        "  note: {name} rep {rep} reduced {:.3e} -> {:.3e} only",
                        trace.initial_loss(),
                        trace.final_loss()
                    );
                }
            }
            Err(err) => println!("  note: {name} rep {rep} aborted: {err}"),
        }
    }
    c.check(reduced >= 3, || {
        format!("{name}: only {reduced} of 4 noiseless repetitions reached a 10x loss reduction")
    });

    // Noisy: the median loss across 4 repetitions never increases over the
    // first 20 steps.
    let (b, h) = continuous_data(name, 0.1, 602, 1001);
    let noisy_cfg = FitConfig {
        steps: 20,
        ..FitConfig::default()
    };
    let mut traces = Vec::new();
    for rep in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(620 + rep);
        let start = perturb(&b.truth, 0.05, &mut rng);
        match fit(b.model.as_ref(), &h, &sigma, &start, &noisy_cfg) {
            Ok(trace) => traces.push(trace),
            Err(err) => c.check(false, || format!("{name}: noisy rep {rep} aborted: {err}")),
        }
    }
    if traces.len() == 4 {
        let medians: Vec<f64> = (0..=20)
            .map(|step| {
                let mut losses: Vec<f64> = traces
                    .iter()
                    .map(|t| t.records[step].loss.expect("line search evaluates every loss"))
                    .collect();
                losses.sort_by(f64::total_cmp);
                0.5 * (losses[1] + losses[2])
            })
            .collect();
        for step in 1..medians.len() {
            c.check(medians[step] <= medians[step - 1], || {
                format!(
                    "{name}: median loss rose from {:.6e} to {:.6e} at step {step}",
                    medians[step - 1],
                    medians[step]
                )
            });
        }
    }

    c.check_runtime(started.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_6_descent_progress() {
    let mut c = Criterion::new(6, "descent: 10x noiseless reduction, noisy median non-increasing");
    descent_for_model(&mut c, "si");
    descent_for_model(&mut c, "lotka_volterra");
    c.finish();
}

// ---------------------------------------------------------------------------
// 7. Shrinking observation-time jitter drives the weighted loss to zero
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_discrete_limit() {
    let mut c = Criterion::new(7, "companion-weighted loss shrinks with the time jitter");

    // 768 subintervals of the unit window, observing the si infection count,
    // noiseless values.  Each spread regenerates the sample from the same
    // seed: the per-cell inverse-CDF draws consume one uniform each, so the
    // three samples share their quantiles and differ only in spread.
    let n = 768usize;
    let b = builtin("si").unwrap();
    let cfg = reference_solver();
    let traj = solve_forward(b.model.as_ref(), &b.truth, &cfg).unwrap();
    let w = 1.0 / n as f64;

    let mut losses = Vec::new();
    for div in [4.0, 8.0, 16.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (sample, sigma) =
            make_discrete_sample(&traj, 1, n, w / div, 0.0, &mut rng).unwrap();
        let h = ErrorFunctional::squared(SampleData::Discrete(sample), 1);
        let report = evaluate_loss(b.model.as_ref(), &b.truth, &h, &sigma, &cfg).unwrap();
        losses.push(report.value);
    }

    c.check(losses[0] > losses[1] && losses[1] > losses[2], || {
        format!("losses {losses:?} are not strictly decreasing in the spread")
    });
    c.check(losses[2] <= 1e-6, || {
        format!("loss at spread w/16 is {:.3e} > 1e-6", losses[2])
    });

    c.finish();
}

// ---------------------------------------------------------------------------
// 8. Solver quality: conserved quantity and flow composition
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_solver_quality() {
    let mut c = Criterion::new(8, "conserved quantity drift and flow composition");

    // The predator-prey system u' = (a - b v) u, v' = (d u - c) v conserves
    //   V(u, v) = d u - c ln u + b v - a ln v.
    let b = builtin("lotka_volterra").unwrap();
    let cfg = SolverConfig::with_tol(1e-9, 1e-9);
    let traj = solve_forward(b.model.as_ref(), &b.truth, &cfg).unwrap();
    let (a, bb, cc, dd) = (
        b.truth.theta[0],
        b.truth.theta[1],
        b.truth.theta[2],
        b.truth.theta[3],
    );
    let invariant = |u: f64, v: f64| dd * u - cc * u.ln() + bb * v - a * v.ln();
    let v0 = invariant(b.truth.x0[0], b.truth.x0[1]);
    let mut drift = 0.0f64;
    for i in 0..=1000 {
        let t = b.truth.t0 + i as f64 / 1000.0;
        let x = traj.eval(t).unwrap();
        drift = drift.max((invariant(x[0], x[1]) - v0).abs());
    }
    c.check(drift <= 1e-6, || {
        format!("conserved-quantity drift {drift:.3e} > 1e-6 over the window")
    });

    // Stopping at a random interior time and restarting reproduces the
    // direct end state.
    let split_cfg = SolverConfig::with_tol(1e-10, 1e-10);
    for name in ["exponential", "si", "lotka_volterra"] {
        let b = builtin(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(801);
        for _ in 0..50 {
            let s = 0.02 + 0.96 * rng.random::<f64>();
            let diff =
                flow_compose_diff(b.model.as_ref(), &b.truth, s, 1.0 - s, &split_cfg).unwrap();
            c.check(diff <= 1e-7, || {
                format!("{name}: split at {s:.4} leaves a {diff:.3e} end-state gap > 1e-7")
            });
        }
    }

    c.finish();
}

// ---------------------------------------------------------------------------
// 9. Bit-for-bit reproducible fit outputs
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_deterministic_outputs() {
    let mut c = Criterion::new(9, "same seed and config give byte-identical traces");

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = adjfit::ExperimentConfig::default();
    cfg.model = "si".into();
    cfg.noise_std = 0.05;
    cfg.grid_size = 201;
    cfg.repetitions = 2;
    cfg.seed = 9;
    cfg.fit.steps = 5;

    let data = dir.path().join("data.json");
    adjfit::run_generate(&cfg, &data).unwrap();

    let run = |out: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let outcome = adjfit::run_fit(&cfg, &data, out, &[]).unwrap();
        assert_eq!(outcome.successes(), 2);
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };

    let first = run(&dir.path().join("run_a"));
    let second = run(&dir.path().join("run_b"));

    c.check(first.len() == second.len() && !first.is_empty(), || {
        format!("runs produced {} vs {} files", first.len(), second.len())
    });
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        c.check(name_a == name_b, || {
            format!("file name mismatch: {name_a} vs {name_b}")
        });
        c.check(bytes_a == bytes_b, || {
            format!("file {name_a} differs between identically seeded runs")
        });
    }

    c.finish();
}
