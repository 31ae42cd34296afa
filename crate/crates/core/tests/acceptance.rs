//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Long gate-synthesis runs are skipped unless `--include-ignored` or
//! `--ignored` is passed (or `PENDULAR_EXTENDED=1` is set):
//!
//! ```text
//! cargo test -p pendular-core --test acceptance -- --include-ignored
//! ```

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use pendular_core::dynamics::{Direction, Propagator, Pulse, StateVector};
use pendular_core::mtoct::{self, Gate, OptimizationResult, OptimizerConfig, TraceRow};
use pendular_core::pair::{
    pair_from_specs, ratio_map, GridRange, Molecule, PairGeometry, PairSystem,
};
use pendular_core::pendular::DEFAULT_TOLERANCE;
use pendular_core::units;

/// Outcome of one criterion: pass flag plus a one-line summary.
type Outcome = (bool, String);

fn sro(r12_nm: f64) -> PairSystem {
    let m = Molecule::sro();
    pair_from_specs(
        &m.at_field(4.4).unwrap(),
        &m.at_field(6.6).unwrap(),
        PairGeometry::new(r12_nm, 90.0).unwrap(),
        "SrO",
        2,
        DEFAULT_TOLERANCE,
    )
    .unwrap()
}

fn within(v: f64, want: f64, tol: f64) -> bool {
    (v - want).abs() <= tol
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let p = sro(50.0);
    let mut e: Vec<f64> = (0..4).map(|i| p.h_over_b[(i, i)]).collect();
    e.sort_by(f64::total_cmp);
    let c = [p.site1.c0, p.site1.c1, p.site2.c0, p.site2.c1];
    let elapsed = t0.elapsed();
    let ok_e = e
        .iter()
        .zip([-1.65, 1.19, 1.92, 4.77])
        .all(|(&g, w)| within(g, w, 0.02));
    let ok_c = c
        .iter()
        .zip([0.480, -0.208, 0.579, -0.164])
        .all(|(&g, w)| within(g, w, 0.005));
    let ok_t = elapsed < Duration::from_secs(1);
    (
        ok_e && ok_c && ok_t,
        format!(
            "energies/B {:.3?}, (C0, C1, C0', C1') {:.4?}, {:.0?}",
            e, c, elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let shift = |r: f64| {
        let p = sro(r);
        let dw = p.delta_omega_approx();
        (
            units::to_megahertz(dw),
            units::to_nanoseconds(mtoct::default_duration(dw).unwrap()),
        )
    };
    let (dw50, t50) = shift(50.0);
    let (dw75, t75) = shift(75.0);
    let ok = within(dw50, 51.0, 5.1)
        && within(t50, 33.0, 2.0)
        && within(dw75, 14.6, 1.46)
        && within(t75, 110.0, 10.0);
    (
        ok,
        format!("50 nm: {dw50:.1} MHz, T {t50:.1} ns; 75 nm: {dw75:.2} MHz, T {t75:.1} ns"),
    )
}

fn criterion_3() -> Outcome {
    let grid = ratio_map(
        GridRange::new(2.0, 2.0, 1.0),
        GridRange::new(0.0, 3.0, 0.25),
        DEFAULT_TOLERANCE,
    )
    .unwrap();
    let at = grid
        .iter()
        .find(|p| p.x_prime_minus_x == 1.0)
        .unwrap()
        .ratio;
    let monotone = grid.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let peak = grid
        .iter()
        .copied()
        .fold(grid[0], |a, b| if b.ratio > a.ratio { b } else { a });
    (
        within(at, 0.511, 0.002) && monotone,
        format!(
            "ratio(2, 1) = {at:.4}; along x'-x in [0, 3] at x = 2: monotone {monotone}, \
             {:.3} at 0, peak {:.3} at {:.2}, {:.3} at 3",
            grid[0].ratio,
            peak.ratio,
            peak.x_prime_minus_x,
            grid[grid.len() - 1].ratio
        ),
    )
}

fn two_tone(pair: &PairSystem, duration_ps: f64, dt_ps: f64, amplitude: f64) -> Pulse {
    let w1 = pair.site1.gap_over_b() * pair.b();
    let w2 = pair.site2.gap_over_b() * pair.b();
    Pulse::enveloped(duration_ps, dt_ps, |t| {
        0.5 * amplitude * ((w1 * t).cos() + (w2 * t).cos())
    })
    .unwrap()
}

fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let pair = sro(50.0);
    let prop = Propagator::for_pair(&pair);
    let duration = mtoct::default_duration(pair.delta_omega_approx()).unwrap();
    let duration = (duration / 0.25).round() * 0.25;
    let psi0 = StateVector(vec![Complex64::new(0.5, 0.0); 4]);

    let pulse = two_tone(&pair, duration, 0.25, 0.6);
    let end = prop.evolve(&pulse, &psi0, Direction::Forward).unwrap();
    let drift = (end.norm() - 1.0).abs();
    let back = prop.evolve(&pulse, &end, Direction::Backward).unwrap();
    let roundtrip = max_diff(&back, &psi0);

    let h = pair.hamiltonian();
    let eig = SymmetricEigen::new(h);
    let free = Pulse::zeros(duration, 0.25).unwrap();
    let mut phase_err: f64 = 0.0;
    for k in 0..4 {
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let psi = StateVector::from_real(&v);
        let out = prop.evolve(&free, &psi, Direction::Forward).unwrap();
        let want = Complex64::from_polar(1.0, -eig.eigenvalues[k] * duration);
        phase_err = phase_err.max((psi.inner(&out) - want).norm());
    }

    // Self-convergence on a fixed piecewise-linear field.
    let coarse = two_tone(&pair, 2000.0, 1.0, 1.5);
    let run = |f: usize| {
        prop.evolve(&coarse.refined(f), &psi0, Direction::Forward)
            .unwrap()
    };
    let reference = run(64);
    let errs: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&f| max_diff(&run(f), &reference))
        .collect();
    let order = (errs[1] / errs[2]).log2();
    let elapsed = t0.elapsed();

    let ok = drift < 1e-8
        && roundtrip < 1e-8
        && phase_err < 1e-10
        && (3.7..=4.3).contains(&order)
        && elapsed < Duration::from_secs(10);
    (
        ok,
        format!(
            "drift {drift:.1e} over {:.1} ns, round trip {roundtrip:.1e}, phase error {phase_err:.1e}, \
             order {order:.2} (errors {:.1e} {:.1e} {:.1e}), {:.1?}",
            duration / 1000.0,
            errs[0],
            errs[1],
            errs[2],
            elapsed
        ),
    )
}

const SYNTH_GATES: [Gate; 5] = [Gate::Not1, Gate::Not2, Gate::Had1, Gate::Had2, Gate::Cnot];

fn synthesize(pair: &PairSystem, gate: Gate, cfg: &OptimizerConfig) -> OptimizationResult {
    mtoct::optimize(pair, &mtoct::gate_targets(gate), cfg).unwrap()
}

/// F ≤ P̄ on every recorded iteration.
fn bounded(trace: &[TraceRow]) -> bool {
    trace.iter().all(|r| r.fidelity <= r.avg_prob + 1e-12)
}

fn criterion_5_smoke(traces: &mut Vec<Vec<TraceRow>>) -> Outcome {
    let t0 = Instant::now();
    let pair = sro(50.0);
    let cfg = OptimizerConfig {
        dt_ps: 0.5,
        max_iter: 50,
        ..Default::default()
    };
    let mut parts = Vec::new();
    let mut ok = true;
    for gate in SYNTH_GATES {
        let r = synthesize(&pair, gate, &cfg);
        ok &= r.fidelity >= 0.5 && r.pulse.max_abs() <= 5.0;
        parts.push(format!("{gate} {:.3}", r.fidelity));
        traces.push(r.trace);
    }
    let elapsed = t0.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    (
        ok,
        format!(
            "smoke (dt 0.5 ps, 50 iterations): {}, {:.1?}",
            parts.join(", "),
            elapsed
        ),
    )
}

fn full_runs() -> Vec<OptimizationResult> {
    let pair = sro(50.0);
    let cfg = OptimizerConfig::default();
    SYNTH_GATES
        .iter()
        .map(|&g| synthesize(&pair, g, &cfg))
        .collect()
}

fn criterion_5_full(results: &[OptimizationResult]) -> Outcome {
    let pair = sro(50.0);
    let prop = Propagator::for_pair(&pair);
    let psi0 = StateVector(vec![Complex64::new(0.5, 0.0); 4]);
    let mut ok = true;
    let mut parts = Vec::new();
    let mut worst_drift: f64 = 0.0;
    for r in results {
        let peak = r.pulse.max_abs();
        ok &= r.fidelity >= 0.9 && r.iterations_used <= 600 && peak <= 5.0;
        let end = prop.evolve(&r.pulse, &psi0, Direction::Forward).unwrap();
        worst_drift = worst_drift.max((end.norm() - 1.0).abs());
        parts.push(format!(
            "{} F {:.4} in {} it, peak {:.2} kV/cm",
            r.gate, r.fidelity, r.iterations_used, peak
        ));
    }
    (
        ok,
        format!(
            "{}; max norm drift on optimized pulses {worst_drift:.1e}",
            parts.join("; ")
        ),
    )
}

fn fig3_state() -> StateVector {
    let (c, s) = (
        (std::f64::consts::PI / 3.0).cos(),
        (std::f64::consts::PI / 3.0).sin(),
    );
    StateVector::from_real(&[0.0, c, s, 0.0])
}

fn criterion_6(results: &[OptimizationResult]) -> Outcome {
    let pair = sro(50.0);
    let prop = Propagator::for_pair(&pair);
    let end = |g: Gate| {
        let r = results.iter().find(|r| r.gate == g).unwrap();
        prop.evolve(&r.pulse, &fig3_state(), Direction::Forward)
            .unwrap()
            .populations()
    };
    let not1 = end(Gate::Not1);
    let cnot = end(Gate::Cnot);
    let band = |p: f64, lo: f64, hi: f64| (lo..=hi).contains(&p);
    let ok = band(not1[0], 0.70, 0.80)
        && band(not1[3], 0.20, 0.30)
        && band(cnot[3], 0.70, 0.80)
        && band(cnot[1], 0.20, 0.30);
    (
        ok,
        format!(
            "NOT1: p00 {:.3}, p11 {:.3}; CNOT: p11 {:.3}, p01 {:.3}",
            not1[0], not1[3], cnot[3], cnot[1]
        ),
    )
}

fn criterion_7(traces: &[Vec<TraceRow>]) -> Outcome {
    let one = Complex64::new(1.0, 0.0);
    let o = [
        one,
        one,
        one,
        one,
        Complex64::from_polar(1.0, std::f64::consts::PI),
    ];
    let f = mtoct::fidelity(&o);
    let p = mtoct::avg_transition_probability(&o);
    let rows: usize = traces.iter().map(Vec::len).sum();
    let ok = within(f, 0.36, 1e-15) && within(p, 1.0, 1e-15) && traces.iter().all(|t| bounded(t));
    (
        ok,
        format!("F = {f}, P = {p} for {{1,1,1,1,-1}}; F <= P on all {rows} recorded iterations"),
    )
}

fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let pair = sro(75.0);
    let cfg = OptimizerConfig {
        max_iter: 500,
        ..Default::default()
    };
    let r = synthesize(&pair, Gate::Cnot, &cfg);
    let ok = r.fidelity >= 0.85 && r.iterations_used <= 500 && bounded(&r.trace);
    (
        ok,
        format!(
            "75 nm CNOT, T {:.1} ns: F {:.4} in {} it, peak {:.2} kV/cm, {:.0?}",
            r.pulse.duration_ps() / 1000.0,
            r.fidelity,
            r.iterations_used,
            r.pulse.max_abs(),
            t0.elapsed()
        ),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let extended = args
        .iter()
        .any(|a| a == "--include-ignored" || a == "--ignored")
        || std::env::var("PENDULAR_EXTENDED").is_ok_and(|v| v == "1");

    let mut failed = 0;
    let mut report = |label: &str, f: &mut dyn FnMut() -> Outcome| {
        let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !ok {
            failed += 1;
        }
        println!("{} {label}: {detail}", if ok { "PASS" } else { "FAIL" });
    };
    let skip = |label: &str| println!("SKIP {label}: extended run, pass --include-ignored");

    let mut traces = Vec::new();
    report("criterion 1 pendular structure", &mut criterion_1);
    report("criterion 2 frequency shift", &mut criterion_2);
    report("criterion 3 ratio map", &mut criterion_3);
    report("criterion 4 propagator", &mut criterion_4);
    report("criterion 5 gate synthesis (smoke)", &mut || {
        criterion_5_smoke(&mut traces)
    });
    if extended {
        let mut results = Vec::new();
        report("criterion 5 gate synthesis (full)", &mut || {
            results = full_runs();
            criterion_5_full(&results)
        });
        traces.extend(results.iter().map(|r| r.trace.clone()));
        report("criterion 6 population endpoints", &mut || {
            criterion_6(&results)
        });
        report("criterion 7 metric identities", &mut || {
            criterion_7(&traces)
        });
        report("criterion 8 75 nm CNOT", &mut criterion_8);
    } else {
        skip("criterion 5 gate synthesis (full)");
        skip("criterion 6 population endpoints");
        report("criterion 7 metric identities", &mut || {
            criterion_7(&traces)
        });
        skip("criterion 8 75 nm CNOT");
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
