//! Values checked against computations that share no code with the crate:
//! Simpson quadrature, direct O(N^2) sums, Bessel series, log-linear fits.

use std::f64::consts::PI;

use aggdiff::catalog::{
    alpha1_points, branch_expansion, critical_stability_gamma, gamma_points, scalar_points, Phase,
};
use aggdiff::config::preset;
use aggdiff::dynamics::{simulate, StepperOptions};
use aggdiff::operator::{assemble_mode_block, block_leakage, kernel_dimension, parameter_derivative_probe};
use aggdiff::stability::{region_boundary, stability_verdict, RegionBranch};
use aggdiff::stationary::{fixed_point_solve, free_energy, stationarity_residual, trace_branch, SolverOptions};
use aggdiff::{
    cosine_transform, kernel_summary, Discrete, GridState, KernelSpec, ParamKind, ScalarParams,
    System, TorusGrid, TwoSpeciesParams,
};

const L: f64 = 2.0 * PI;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Coefficient of the unit top-hat minus its mean on w_k; the mean drops out.
fn tophat_simpson(r: f64, k: usize) -> f64 {
    let q = 2.0 * PI * k as f64 / L;
    simpson(|x| (2.0 / L).sqrt() * (q * x).cos() / (2.0 * r), -r, r, 20_000)
}

fn cosine_disc(n: usize) -> Discrete {
    let grid = TorusGrid::new(L, n).unwrap();
    Discrete::new(grid, cosine_transform(&KernelSpec::cosine(1, -1.0), L, n / 2 - 1).unwrap()).unwrap()
}

fn two(a1: f64, a2: f64, g: f64) -> TwoSpeciesParams {
    TwoSpeciesParams::new(1.0, L, (a1, a2, g), (1, 1)).unwrap()
}

#[test]
fn tophat_closed_form_vs_simpson() {
    let r = PI / 5.0;
    let s = cosine_transform(&KernelSpec::tophat(r, 1), L, 100).unwrap();
    for k in 1..=100 {
        let q = tophat_simpson(r, k);
        assert!((s.coefficient(k) - q).abs() <= 1e-8, "k = {k}: {} vs {q}", s.coefficient(k));
    }
    assert!((tophat_simpson(r, 7) + 0.12201).abs() < 2e-5);
    let h1 = s.h(1.0, 1).unwrap();
    assert!((h1 * tophat_simpson(r, 1) - (4.0 * PI).sqrt()).abs() < 1e-8);
}

#[test]
fn tophat_critical_values_from_scan() {
    let r = PI / 5.0;
    let coeffs: Vec<f64> = (1..=200).map(|k| tophat_simpson(r, k)).collect();
    let argmin = (0..200).min_by(|&a, &b| coeffs[a].total_cmp(&coeffs[b])).unwrap() + 1;
    let argmax = (0..200).max_by(|&a, &b| coeffs[a].total_cmp(&coeffs[b])).unwrap() + 1;
    assert!(argmin < 200 && argmax < 200);
    let a_plus = -(2.0 * L).sqrt() / coeffs[argmin - 1];
    let a_minus = (2.0 * L).sqrt() / coeffs[argmax - 1];
    assert_eq!((argmin, argmax), (7, 1));
    assert!((a_plus - 29.05).abs() < 0.01 && (a_minus - 6.715).abs() < 2e-3);

    let s = cosine_transform(&KernelSpec::tophat(r, 1), L, 128).unwrap();
    let sum = kernel_summary(&s, 1.0).unwrap();
    assert_eq!((sum.k_w, sum.k_minus_w), (Some(7), Some(1)));
    assert!((sum.alpha_star_plus - a_plus).abs() <= 1e-8 * a_plus);
    assert!((sum.alpha_star_minus - a_minus).abs() <= 1e-8 * a_minus);

    let cat = scalar_points(&s, 1.0);
    let want: Vec<usize> = (1..=128)
        .filter(|&k| tophat_simpson(r, k) < -1e-8)
        .collect();
    let mut got: Vec<usize> = cat.points.iter().map(|p| p.k).collect();
    got.sort();
    assert_eq!(got, want);
    assert_eq!(cat.points[0].k, 7);
    assert!((cat.points[0].value - a_plus).abs() <= 1e-8 * a_plus);
}

#[test]
fn spectral_convolution_vs_direct_sum() {
    let grid = TorusGrid::new(L, 64).unwrap();
    for r in [0.3, 1.0, 2.5] {
        let s = cosine_transform(&KernelSpec::tophat(r, 1), L, 31).unwrap();
        let d = Discrete::new(grid, s.clone()).unwrap();
        let w = |x: f64| -> f64 {
            (1..=31)
                .map(|k| s.coefficient(k) * (2.0 / L).sqrt() * (2.0 * PI * k as f64 * x / L).cos())
                .sum()
        };
        let x = grid.nodes();
        let u: Vec<f64> = x
            .iter()
            .map(|&t| 1.0 / L + 0.3 * t.cos() - 0.2 * (3.0 * t).sin() + 0.1 * (17.0 * t).cos())
            .collect();
        let h = grid.spacing();
        let fast = d.convolve(&u);
        for i in 0..grid.n {
            let direct: f64 = (0..grid.n).map(|j| h * w(x[i] - x[j]) * u[j]).sum();
            assert!((direct - fast[i]).abs() <= 1e-8, "R = {r}, node {i}");
        }
    }
}

#[test]
fn region_boundary_has_zero_margin() {
    let s = cosine_transform(&KernelSpec::tophat(PI / 5.0, 1), L, 128).unwrap();
    let sum = kernel_summary(&s, 1.0).unwrap();
    let (a, b) = (sum.alpha_star_plus, sum.alpha_star_minus);
    let gbar = 0.5 * (a + b);
    for gamma in [0.5, 2.0, 5.0, gbar] {
        let pts = region_boundary(&sum, gamma, 50).unwrap();
        assert!(!pts.is_empty());
        for p in pts {
            let q = TwoSpeciesParams::new(
                1.0,
                L,
                (p.chi1a1.abs(), p.chi2a2.abs(), gamma),
                (if p.chi1a1 < 0.0 { -1 } else { 1 }, if p.chi2a2 < 0.0 { -1 } else { 1 }),
            )
            .unwrap();
            let v = stability_verdict(&q, &sum);
            let scale = 1.0 + a * a + b * b;
            let on_branch = match p.branch {
                RegionBranch::Upper => ((a - p.chi1a1) * (a - p.chi2a2) - gamma * gamma).abs(),
                RegionBranch::Lower => ((b + p.chi1a1) * (b + p.chi2a2) - gamma * gamma).abs(),
            };
            assert!(on_branch <= 1e-9 * scale, "{p:?} at gamma {gamma}");
            assert!(v.margin.abs() <= 1e-9 * scale, "{p:?}: margin {}", v.margin);
        }
    }
    // at gamma-bar both branches pass through the diagonal point
    let c = 0.5 * (a - b);
    let q = TwoSpeciesParams::new(1.0, L, (c.abs(), c.abs(), gbar), (c.signum() as i32, c.signum() as i32)).unwrap();
    assert!(stability_verdict(&q, &sum).margin.abs() <= 1e-9 * (1.0 + a * a + b * b));
}

#[test]
fn mode_blocks_do_not_leak() {
    let d = cosine_disc(256);
    let tophat = Discrete::new(
        TorusGrid::new(L, 256).unwrap(),
        cosine_transform(&KernelSpec::tophat(L / 10.0, 1), L, 127).unwrap(),
    )
    .unwrap();
    let cases = [
        (System::TwoSpecies(two(1.0, 1.0, 1.0)), &d),
        (System::Scalar(ScalarParams::new(1.0, L, 2.0).unwrap()), &d),
        (System::TwoSpecies(TwoSpeciesParams::new(1.0, L, (1.5, 4.35, 1.5), (1, -1)).unwrap()), &tophat),
    ];
    for (sys, disc) in cases {
        for k in [1, 2, 5] {
            let leak = block_leakage(&sys, disc, k).unwrap();
            assert!(leak <= 1e-8, "k = {k}: {leak}");
        }
    }
}

#[test]
fn parameter_derivative_vanishes() {
    let d = cosine_disc(256);
    let s = &d.kernel;
    let a = &alpha1_points(&two(0.0, 1.0, 1.0), s).points[0];
    let g = &gamma_points(&two(1.0, 1.0, 0.0), s).points[0];
    for (bp, sys) in [(a, two(0.0, 1.0, 1.0)), (g, two(1.0, 1.0, 0.0))] {
        let p = parameter_derivative_probe(bp, &System::TwoSpecies(sys), &d).unwrap();
        let worst = p.numeric.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-9, "{}: {worst}", p.label);
    }
}

#[test]
fn determinant_crosses_transversally() {
    let cfg = preset("P1").unwrap();
    let s = cfg.spectral().unwrap();
    let System::TwoSpecies(p) = cfg.system().unwrap() else { unreachable!() };
    let system = System::TwoSpecies(p);
    let mut seen = 0;
    for kind in [ParamKind::Alpha1, ParamKind::Gamma] {
        let cat = if kind == ParamKind::Alpha1 { alpha1_points(&p, &s) } else { gamma_points(&p, &s) };
        for bp in cat.points.iter().take(10) {
            let det = |nu: f64| assemble_mode_block(&system.with_param(kind, nu).unwrap(), &s, bp.k).det;
            assert!(det(bp.value).abs() <= 1e-10);
            let dv = 1e-6 * bp.value.max(1.0);
            let slope = (det(bp.value + dv) - det(bp.value - dv)) / (2.0 * dv);
            assert!(slope.abs() > 1e-6, "{kind:?} k = {}: slope {slope}", bp.k);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn balanced_two_mode_kernel_has_two_dimensional_kernel() {
    let grid = TorusGrid::new(L, 64).unwrap();
    let spec = KernelSpec::from_fn(&grid, |x| -x.cos() + (2.0 * x).cos());
    let s = cosine_transform(&spec, L, 31).unwrap();
    let sum = kernel_summary(&s, 1.0).unwrap();
    assert!((sum.alpha_star_plus - 2.0).abs() < 1e-12 && (sum.alpha_star_minus - 2.0).abs() < 1e-12);
    let sys = System::TwoSpecies(two(0.0, 0.0, 0.0));
    let (dim, ks) = kernel_dimension(&sys, &s, ParamKind::Gamma, 2.0).unwrap();
    assert_eq!((dim, ks), (2, vec![1, 2]));
    assert_eq!(kernel_dimension(&sys, &s, ParamKind::Gamma, 1.3).unwrap().0, 0);
}

fn bessel_i(nu: u32, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..200 {
        term *= (0.25 * x * x) / (m as f64 * (m + nu) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Amplitude on w_1 of the nontrivial scalar state for W = -cos x: the state
/// is exp(kappa cos x)/Z with kappa = alpha I1(kappa)/I0(kappa).
fn exact_cosine_amplitude(alpha: f64) -> f64 {
    let f = |k: f64| alpha * bessel_i(1, k) / bessel_i(0, k) - k;
    let (mut lo, mut hi) = (1e-6, 2.0 * alpha);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / (alpha * PI.sqrt())
}

#[test]
fn stationary_state_chain_at_fine_grid() {
    let d = cosine_disc(256);
    let sys = System::Scalar(ScalarParams::new(1.0, L, 2.2).unwrap());
    let bp = &scalar_points(&d.kernel, 1.0).points[0];
    let predicted = bp.predict_amplitude(2.2).unwrap();
    assert!((predicted - (2.0 * 0.2 / (2.0 * PI)).sqrt()).abs() < 1e-12);
    let seed = branch_expansion(bp, 0.25, &d.grid());
    let (u, report) = fixed_point_solve(&sys, &d, &SolverOptions { seed: Some(seed), ..SolverOptions::default() }).unwrap();
    assert!(report.converged);
    assert!(report.dissipation <= 1e-8, "J = {}", report.dissipation);
    let res = stationarity_residual(&u, &sys, &d).unwrap();
    assert!(res <= 1e-6, "residual {res}");
    assert!(u.min() > 0.0);

    let a = u.amplitudes(1)[0].abs();
    let exact = exact_cosine_amplitude(2.2);
    assert!((a - exact).abs() <= 1e-8, "{a} vs {exact}");
    assert!((a - 0.2523).abs() <= 0.15 * 0.2523);

    let f = free_energy(&u, &sys, &d).unwrap().total;
    assert!(f < -L.ln());
}

#[test]
fn gamma_branch_stays_in_phase() {
    let d = cosine_disc(64);
    let sys = System::TwoSpecies(two(1.0, 1.0, 0.0));
    let bp = gamma_points(&two(1.0, 1.0, 0.0), &d.kernel).points[0].clone();
    assert_eq!(bp.phase, Phase::InPhase);
    let trace = trace_branch(&sys, ParamKind::Gamma, &d, &bp, (1.05, 1.3), 4, &SolverOptions::default()).unwrap();
    assert!(!trace.collapsed);
    for p in &trace.projections {
        assert!(p[0] * p[1] > 0.0, "{p:?}");
    }
}

fn mode_rate(alpha: f64, a0: f64, t_end: f64) -> f64 {
    let d = cosine_disc(64);
    let sys = System::Scalar(ScalarParams::new(1.0, L, alpha).unwrap());
    let u0 = GridState::mode_perturbation(d.grid(), 1, &[a0]);
    let opts = StepperOptions { dt: 0.01, t_end, sample_dt: 0.1, ..StepperOptions::default() };
    let traj = simulate(&u0, &sys, &d, &opts).unwrap();
    let pts: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.l2_dist.ln())).collect();
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let num: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    num / den
}

#[test]
fn small_perturbations_follow_linear_rate() {
    // lambda(1) = -(1 + alpha W~(1)/sqrt(2L)) with W~(1)/sqrt(2L) = -1/2
    let grow = mode_rate(2.2, 1e-3, 10.0);
    assert!((grow - 0.1).abs() <= 0.05 * 0.1, "rate {grow}");
    let decay = mode_rate(1.0, 1e-3, 5.0);
    assert!((decay + 0.5).abs() <= 0.05 * 0.5, "rate {decay}");
}

#[test]
fn out_of_phase_pattern_past_gamma_star() {
    // a negative interaction on species 2 makes the first gamma point sit at k_{-W}
    let s = cosine_transform(&KernelSpec::tophat(L / 10.0, 1), L, 31).unwrap();
    let p = TwoSpeciesParams::new(1.0, L, (1.5, 4.35, 0.0), (1, -1)).unwrap();
    let sum = kernel_summary(&s, 1.0).unwrap();
    let r = critical_stability_gamma(&p, &sum, &s);
    let cp = &r.points[0];
    assert_eq!(Some(cp.point.k), sum.k_minus_w);
    assert!(cp.point.c.unwrap() < 0.0);

    let d = Discrete::new(TorusGrid::new(L, 64).unwrap(), s).unwrap();
    let mut q = p;
    q.gamma = cp.point.value * 1.1;
    let c = cp.point.c.unwrap();
    let u0 = GridState::mode_perturbation(d.grid(), cp.point.k, &[0.01, 0.01 * c]);
    let opts = StepperOptions { dt: 0.02, t_end: 200.0, ..StepperOptions::default() };
    let traj = simulate(&u0, &System::TwoSpecies(q), &d, &opts).unwrap();
    let pr = traj.final_state().amplitudes(cp.point.k);
    assert!(pr[0] * pr[1] < 0.0, "{pr:?}");
}

#[test]
fn heat_flow_entropy_rate() {
    let d = cosine_disc(64);
    let sys = System::TwoSpecies(two(0.0, 0.0, 0.0));
    let u0 = GridState::mode_perturbation(d.grid(), 1, &[0.01, 0.02]);
    let opts = StepperOptions { dt: 0.05, t_end: 5.0, sample_dt: 0.5, ..StepperOptions::default() };
    let traj = simulate(&u0, &sys, &d, &opts).unwrap();
    let s = &traj.samples;
    for w in s.windows(2) {
        let rate = -(w[1].h / w[0].h).ln() / (w[1].t - w[0].t);
        assert!(rate >= 1.0, "rate {rate}");
        assert!((rate - 2.0).abs() < 0.05, "rate {rate}");
    }
}

