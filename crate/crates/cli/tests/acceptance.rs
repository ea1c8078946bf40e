//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Run with `cargo test -p hillgrowth-cli --test acceptance`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hillgrowth::elliptic::{EllipticParams, FluctuationSpec};
use hillgrowth::exact::{gamma_highly_unstable, gamma_theorem1_with_b, AlphaChain};
use hillgrowth::experiments::{
    direct_point, elliptic_point, run_fig1, run_fig2, run_fig3, Experiment, ExperimentConfig,
};
use hillgrowth::hill::{
    cycle_stream, integrate_fundamental, solve_cycle, BarrierShape, HillCycleParams, BASE_STEP,
};
use hillgrowth::symplectic::b_matrix;
use hillgrowth::{lyapunov_direct, DistributionSpec, Mat2, ProductState, StreamHandle};

const N: usize = 1_000_000;
const SEED: u64 = 42;

fn x_spec() -> DistributionSpec {
    DistributionSpec::LogUniform {
        exp_lo: -2.0,
        exp_hi: 2.0,
    }
}

fn xi_draws(n: usize) -> Vec<f64> {
    StreamHandle::new(DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }, SEED)
        .unwrap()
        .substream(1)
        .values_par(n)
}

fn x_draws(n: usize) -> Vec<f64> {
    StreamHandle::new(x_spec(), SEED)
        .unwrap()
        .substream(0)
        .values_par(n)
}

/// Outcome of one sub-check.
struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Check {
    Check {
        ok,
        detail: detail.into(),
    }
}

fn load(exp: Experiment, overrides: &[&str]) -> ExperimentConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::load(exp, None, &o).expect("config")
}

fn within(lo: f64, v: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn c1_theorem1_oracle() -> Vec<Check> {
    [0.0, 0.25, 0.5, 1.0]
        .iter()
        .map(|&a| {
            let start = Instant::now();
            let phi = DistributionSpec::AffineOfUniform {
                offset: 1.0,
                scale: -a,
            };
            let p = direct_point(x_spec(), phi, SEED, N).unwrap();
            let elapsed = start.elapsed();
            let diff = (p.theorem1.gamma - p.direct.gamma).abs();
            let tol = (3.0 * p.joint_std_error()).max(5e-3);
            check(
                diff <= tol && elapsed <= Duration::from_secs(60),
                format!(
                    "A={a}: |diff|={diff:.2e} tol={tol:.2e} t={:.1}s",
                    elapsed.as_secs_f64()
                ),
            )
        })
        .collect()
}

fn c2_highly_unstable() -> Vec<Check> {
    let xs = x_draws(N);
    let direct = lyapunov_direct(xs.iter().map(|&x| b_matrix(x, 1.0)), N).unwrap();
    let hu = gamma_highly_unstable(xs.iter().copied(), N).unwrap();
    let diff = (hu.gamma - direct.gamma).abs();
    let tol = 3.0 * direct.joint_std_error(&hu);
    vec![check(
        diff <= tol,
        format!("|diff|={diff:.2e} tol={tol:.2e}"),
    )]
}

fn c3_fig1_slopes() -> Vec<Check> {
    let t = run_fig1(&load(Experiment::Fig1, &[])).unwrap();
    let s1 = t.note_value("slope_gamma_vs_a").unwrap();
    let s2 = t.note_value("slope_delta_vs_a").unwrap();
    vec![
        check(
            within(0.45, s1, 0.55),
            format!("slope gamma vs a = {s1:.4} (0.50 +- 0.05)"),
        ),
        check(
            within(0.85, s2, 1.15),
            format!("slope delta vs a = {s2:.4} (1.0 +- 0.15)"),
        ),
    ]
}

fn c4_fig2_slopes() -> Vec<Check> {
    let t = run_fig2(&load(Experiment::Fig2, &[])).unwrap();
    let s1 = t.note_value("slope_delta_gamma_vs_A").unwrap();
    let s2 = t.note_value("slope_error_vs_A").unwrap();
    vec![
        check(
            within(0.9, s1, 1.1),
            format!("slope dgamma vs A = {s1:.4} (1.0 +- 0.1)"),
        ),
        check(
            within(1.8, s2, 2.2),
            format!("slope error vs A = {s2:.4} (2.0 +- 0.2)"),
        ),
    ]
}

fn c5_fig3_ordering() -> Vec<Check> {
    let t = run_fig3(&load(Experiment::Fig3, &[])).unwrap();
    let col = |c: &str| t.column(c).unwrap();
    let (amp, g0, direct) = (col("A"), col("gamma0"), col("gamma_direct"));
    let (a1, a2, lower) = (
        col("gamma_approx1"),
        col("gamma_approx2"),
        col("lower_bound"),
    );
    (0..amp.len())
        .map(|i| {
            let ordered = lower[i] <= direct[i] && direct[i] <= g0[i];
            let e1 = (a1[i] - direct[i]).abs();
            let e2 = (a2[i] - direct[i]).abs();
            check(
                ordered && e1 <= 0.05 && e2 <= 0.05,
                format!(
                    "A={}: bound order {ordered}, |approx1|={e1:.1e}, |approx2|={e2:.1e}",
                    amp[i]
                ),
            )
        })
        .collect()
}

fn eta_base() -> DistributionSpec {
    DistributionSpec::Uniform { lo: -1.0, hi: 1.0 }
}

fn c6_theorem4() -> Vec<Check> {
    let p = elliptic_point(
        DistributionSpec::Constant(FRAC_PI_4),
        eta_base(),
        1.0,
        0.3,
        SEED,
        10_000_000,
    )
    .unwrap();
    let closed = p.gamma_theorem4;
    let rel_direct = (p.gamma_direct - closed).abs() / closed;
    let rel_small = (p.gamma_small_eta - closed).abs() / closed;
    vec![
        check(
            (closed - 0.0078711).abs() <= 1e-7,
            format!("closed form {closed:.10} vs 0.0078711 +- 1e-7"),
        ),
        check(
            rel_direct <= 0.10,
            format!("direct {:.6} rel {rel_direct:.3} (<= 0.10)", p.gamma_direct),
        ),
        check(
            rel_small <= 0.05,
            format!(
                "small-eta {:.6} rel {rel_small:.3} (<= 0.05)",
                p.gamma_small_eta
            ),
        ),
    ]
}

fn c7_null_limits() -> Vec<Check> {
    [("theta=pi/2", FRAC_PI_2), ("theta=1e-3", 1e-3)]
        .iter()
        .map(|&(label, theta)| {
            let p = elliptic_point(
                DistributionSpec::Constant(theta),
                eta_base(),
                1.0,
                0.3,
                SEED,
                N,
            )
            .unwrap();
            let g = p.gamma_direct.abs();
            check(
                g <= 3.0 * p.std_error,
                format!("{label}: |gamma|={g:.2e} 3se={:.2e}", 3.0 * p.std_error),
            )
        })
        .collect()
}

fn c8_hill_exactness() -> Vec<Check> {
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let af = 0.01 * (2500f64).powf(i as f64 / 200.0);
        let p = HillCycleParams {
            af,
            q: 0.0,
            shape: BarrierShape::RaisedCosine,
        };
        let (m, _) = integrate_fundamental(&p, BASE_STEP);
        let w = af.sqrt();
        let (h, g) = ((PI * w).cos(), -w * (PI * w).sin());
        worst = worst.max((m.m11 - h).abs()).max((m.m21 - g).abs());
    }
    let p = HillCycleParams {
        af: 0.25,
        q: 2.0,
        shape: BarrierShape::SquareWell(1e-3),
    };
    let c = solve_cycle(&p).unwrap().params;
    let dev = (c.h + 2.0).abs().max((c.g + 1.5).abs());
    vec![
        check(
            worst <= 1e-8,
            format!("q=0 worst |dh|,|dg| = {worst:.1e} (<= 1e-8)"),
        ),
        check(
            dev <= 1e-4,
            format!("w=1e-3: h={:.6} g={:.6}, dev {dev:.1e} (<= 1e-4)", c.h, c.g),
        ),
    ]
}

fn c9_invariants() -> Vec<Check> {
    let start = Instant::now();
    let mut out = Vec::new();

    // determinant 1
    let cycles = cycle_stream(
        DistributionSpec::Uniform { lo: 0.1, hi: 2.0 },
        DistributionSpec::Uniform { lo: 0.0, hi: 1.0 },
        BarrierShape::RaisedCosine,
        SEED,
        10_000,
    )
    .unwrap();
    let worst_cycle = cycles
        .iter()
        .map(|c| (c.fundamental.det() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut state = ProductState::identity();
    for c in &cycles {
        state.push(c.fundamental).unwrap();
    }
    let tracked = (state.determinant() - 1.0).abs();
    let fixed_l: Vec<Mat2> = StreamHandle::new(DistributionSpec::Uniform { lo: 0.0, hi: PI }, SEED)
        .unwrap()
        .values(10_000)
        .iter()
        .map(|&t| EllipticParams::new(t, 3.0).unwrap().matrix().matrix())
        .collect();
    let recomposed = fixed_l.iter().fold(Mat2::IDENTITY, |p, m| *m * p).det();
    out.push(check(
        worst_cycle <= 1e-9 && tracked <= 1e-9 && (recomposed - 1.0).abs() <= 1e-9,
        format!(
            "det-1: cycles {worst_cycle:.1e}, tracked {tracked:.1e}, recomposed {:.1e}",
            (recomposed - 1.0).abs()
        ),
    ));

    // alpha stays in [min phi, 1]
    let xs = x_draws(100_000);
    let us = xi_draws(100_000);
    let mut chain = AlphaChain::new();
    let mut phi_min = f64::INFINITY;
    let mut bad = 0;
    for (&x, &u) in xs.iter().zip(&us) {
        let phi = 1.0 - 0.9 * u;
        phi_min = phi_min.min(phi);
        chain.push(x, phi).unwrap();
        let a = chain.state().unwrap().alpha;
        if !(phi_min - 1e-15 <= a && a <= 1.0 + 1e-15) {
            bad += 1;
        }
    }
    out.push(check(
        bad == 0,
        format!("alpha in [phi_min, 1]: {bad} violations in 1e5"),
    ));

    // b only enters through the boundary term ln((b + a_n x_n) / (b + x_1))
    let stream = || xs.iter().zip(&us).map(|(&x, &u)| (x, 1.0 - 0.5 * u));
    let n = xs.len();
    let mut chain = AlphaChain::new();
    for (x, phi) in stream() {
        chain.push(x, phi).unwrap();
    }
    let end = chain.state().unwrap();
    let (c1, cn) = (xs[0], end.alpha * end.x_prev);
    let g1 = gamma_theorem1_with_b(stream(), n, 1.0).unwrap().gamma;
    let mut worst_b: f64 = 0.0;
    for b in [0.01, 0.1, 10.0, 100.0] {
        let gb = gamma_theorem1_with_b(stream(), n, b).unwrap().gamma;
        let boundary = ((b + cn) / (b + c1)).ln() - ((1.0 + cn) / (1.0 + c1)).ln();
        worst_b = worst_b.max(((gb - g1) * (n - 1) as f64 - boundary).abs());
    }
    out.push(check(
        worst_b <= 1e-6,
        format!("b-independence: sum mismatch {worst_b:.1e}"),
    ));

    // Result 2: b/a and d/c of the product agree
    let mut p = Mat2::IDENTITY;
    for (&x, &u) in xs.iter().zip(&us).take(200) {
        p = b_matrix(x, 1.0 - 0.5 * u) * p;
        p = p.scale(1.0 / p.frobenius());
    }
    let r2 = (p.m12 / p.m11 - p.m22 / p.m21).abs();
    out.push(check(r2 < 1e-6, format!("result 2 at n=200: {r2:.1e}")));

    // Result 3: top-left over bottom-right equals x_N / x_1 at every N
    let mut p = Mat2::IDENTITY;
    let mut worst3: f64 = 0.0;
    for &x in xs.iter().take(200) {
        p = b_matrix(x, 1.0) * p;
        p = p.scale(1.0 / p.frobenius());
        worst3 = worst3.max((p.m11 / p.m22 / (x / xs[0]) - 1.0).abs());
    }
    out.push(check(
        worst3 <= 1e-12,
        format!("result 3 relative error {worst3:.1e}"),
    ));

    // gamma_M = gamma_B + <ln|cos theta|>
    let n = 100_000;
    let f = FluctuationSpec::new(1.0, DistributionSpec::Uniform { lo: -0.3, hi: 0.3 }).unwrap();
    let thetas = StreamHandle::new(DistributionSpec::Uniform { lo: 0.1, hi: 1.4 }, SEED)
        .unwrap()
        .values(n);
    let etas = StreamHandle::new(f.eta, SEED)
        .unwrap()
        .substream(3)
        .values(n);
    let params: Vec<EllipticParams> = thetas
        .iter()
        .zip(&etas)
        .map(|(&t, &e)| EllipticParams::new(t, f.l_at(e)).unwrap())
        .collect();
    let gm = lyapunov_direct(params.iter().map(|p| p.matrix()), n)
        .unwrap()
        .gamma;
    let gb = lyapunov_direct(
        params.iter().map(|p| {
            let (x, phi) = p.to_x_phi().unwrap();
            b_matrix(x, phi)
        }),
        n,
    )
    .unwrap()
    .gamma;
    let mean_cos = params.iter().map(|p| p.theta.cos().abs().ln()).sum::<f64>() / n as f64;
    let dm = (gm - gb - mean_cos).abs();
    out.push(check(
        dm <= 1e-9,
        format!("gamma_M = gamma_B + <ln|cos|>: {dm:.1e}"),
    ));

    let elapsed = start.elapsed();
    out.push(check(
        elapsed <= Duration::from_secs(300),
        format!("suite time {:.1}s (<= 300s)", elapsed.as_secs_f64()),
    ));
    out
}

fn c10_determinism() -> Vec<Check> {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_hillgrowth");
    ["fig1", "fig2", "fig3"]
        .iter()
        .map(|fig| {
            let run = |tag: &str| {
                let path = dir.path().join(format!("{fig}-{tag}.csv"));
                let status = Command::new(bin)
                    .args([fig, "--seed", "7", "--n-cycles", "200000", "--out"])
                    .arg(&path)
                    .status()
                    .unwrap();
                assert!(status.success(), "{fig} exited with {status}");
                std::fs::read(path).unwrap()
            };
            let (a, b) = (run("a"), run("b"));
            check(
                a == b && !a.is_empty(),
                format!("{fig}: {} bytes, identical {}", a.len(), a == b),
            )
        })
        .collect()
}

type Criterion = (&'static str, fn() -> Vec<Check>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("theorem 1 oracle equivalence", c1_theorem1_oracle),
        ("highly unstable closed form", c2_highly_unstable),
        ("fig1 scaling", c3_fig1_slopes),
        ("fig2 scaling", c4_fig2_slopes),
        ("fig3 ordering", c5_fig3_ordering),
        ("theorem 4", c6_theorem4),
        ("null limits", c7_null_limits),
        ("hill integrator exactness", c8_hill_exactness),
        ("structural invariants", c9_invariants),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let checks = run();
        let ok = checks.iter().all(|c| c.ok);
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
        for c in &checks {
            println!("       [{}] {}", if c.ok { "ok" } else { "x" }, c.detail);
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
