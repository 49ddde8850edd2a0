//! Structural and statistical properties of the kernels, samplers and geometry.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aniso::kernels::{dirichlet_energy, envelope_x, GridFunction, KernelSpec, KernelValue, Multiplier};
use aniso::ladder::{geometry_context, ScaleIndex};
use aniso::scaling::PowerTerm;
use aniso::simulate::{exact_stable_sample, rescale_path, sample_x_path, sample_z_path, SimConfig, SmallJumpMode};
use aniso::stats::{correlation, ks_statistic, ks_two_sample};
use aniso::verify::{empirical_density, GridSpec};
use aniso::ScalingFunction;

fn phi_strategy() -> impl Strategy<Value = ScalingFunction> {
    prop_oneof![
        (0.2f64..1.95, 0.1f64..10.0).prop_map(|(a, s)| ScalingFunction::power_law(a, s).unwrap()),
        (0.2f64..1.0, 1.0f64..1.95, 0.1f64..3.0, 0.1f64..3.0).prop_map(|(a, b, ca, cb)| {
            ScalingFunction::sum_of_powers(vec![PowerTerm { c: ca, alpha: a }, PowerTerm { c: cb, alpha: b }]).unwrap()
        }),
    ]
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, d)
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|d| (point(d), point(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn envelope_is_symmetric_in_its_points(phi in phi_strategy(), t in 1e-3f64..1e3, (x, y) in pair()) {
        let a = envelope_x(t, &x, &y, &phi).unwrap().value;
        let b = envelope_x(t, &y, &x, &phi).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(b.abs()));
    }

    #[test]
    fn envelope_is_permutation_equivariant(phi in phi_strategy(), t in 1e-3f64..1e3, (x, y) in pair(), shift in 0usize..4) {
        let d = x.len();
        let rotate = |v: &[f64]| (0..d).map(|i| v[(i + shift) % d]).collect::<Vec<_>>();
        let a = envelope_x(t, &x, &y, &phi).unwrap();
        let b = envelope_x(t, &rotate(&x), &rotate(&y), &phi).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-13 * a.value);
        prop_assert!((a.value - a.prefactor * a.factors.iter().product::<f64>()).abs() <= 1e-13 * a.value);
        prop_assert!(a.factors.iter().all(|&f| f <= 1.0));
    }

    #[test]
    fn envelope_factors_decrease_with_distance(phi in phi_strategy(), t in 1e-3f64..1e3, r in 0.0f64..50.0, step in 1e-6f64..50.0) {
        let near = envelope_x(t, &[0.0], &[r], &phi).unwrap().factors[0];
        let far = envelope_x(t, &[0.0], &[r + step], &phi).unwrap().factors[0];
        prop_assert!(far <= near);
    }

    #[test]
    fn jump_kernel_is_symmetric(phi in phi_strategy(), (x, y) in pair(), axis in 0usize..4, h in -10.0f64..10.0) {
        let spec = KernelSpec::new(phi, 2.0, Multiplier::Checkerboard { period: 0.7, low: 0.5, high: 2.0 }, x.len()).unwrap();
        let mut y_axis = x.clone();
        y_axis[axis % x.len()] += h;
        for other in [&y, &y_axis] {
            let a = spec.jump_kernel(&x, other).unwrap();
            let b = spec.jump_kernel(other, &x).unwrap();
            prop_assert_eq!(a.value(), b.value());
            if let KernelValue::Axis { value, .. } = a {
                prop_assert!(value > 0.0);
            }
        }
    }

    #[test]
    fn inverse_undoes_eval(phi in phi_strategy(), log_r in -8.0f64..8.0) {
        let r = log_r.exp();
        let back = phi.inverse(phi.eval(r).unwrap()).unwrap();
        prop_assert!((back / r - 1.0).abs() < 1e-9, "{} -> {}", r, back);
    }

    #[test]
    fn rescaled_phi_keeps_weak_scaling(phi in phi_strategy(), log_kappa in -6.0f64..6.0) {
        let kappa = log_kappa.exp();
        let scaled = phi.rescale(kappa).unwrap();
        prop_assert!((scaled.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        let report = scaled.check_ws(100).unwrap();
        prop_assert!(report.violations.is_empty(), "{:?}", report.violations.first());
    }

    #[test]
    fn geometry_brackets_each_gap(phi in phi_strategy(), t in 1e-3f64..1e3, (x, y) in pair()) {
        let ctx = geometry_context(&x, &y, t, &phi).unwrap();
        prop_assert!(ctx.n.windows(2).all(|w| w[0] <= w[1]));
        for (k, &axis) in ctx.order.iter().enumerate() {
            let gap = (x[axis] - y[axis]).abs();
            match ctx.n[k] {
                ScaleIndex::Finite(n) => {
                    let unit = (n as f64).exp2() * ctx.kappa;
                    prop_assert!(1.25 * unit <= gap && gap < 2.5 * unit, "gap {} n {} kappa {}", gap, n, ctx.kappa);
                }
                ScaleIndex::NegInfinity => prop_assert_eq!(gap, 0.0),
            }
        }
        let first_far = ctx.n.iter().position(|&s| s >= ScaleIndex::Finite(1)).map_or(x.len() + 1, |p| p + 1);
        prop_assert_eq!(ctx.i0, first_far);
    }
}

fn cauchy(d: usize) -> KernelSpec {
    KernelSpec::reference(ScalingFunction::power_law(1.0, 1.0).unwrap(), d).unwrap()
}

fn terminals(cfg: &SimConfig, x: bool, axis: usize) -> Vec<f64> {
    (0..cfg.n_paths)
        .map(|i| {
            let p = if x { sample_x_path(cfg, i) } else { sample_z_path(cfg, i) };
            p.unwrap().terminal[axis]
        })
        .collect()
}

#[test]
fn unit_multiplier_thinning_matches_z() {
    let spec = KernelSpec::new(ScalingFunction::power_law(1.0, 1.0).unwrap(), 1.0, Multiplier::Constant { c: 1.0 }, 1)
        .unwrap();
    let z = terminals(&SimConfig::new(spec.clone(), 0.01, 1.0, 100_000, 31).unwrap(), false, 0);
    let x = terminals(&SimConfig::new(spec, 0.01, 1.0, 100_000, 32).unwrap(), true, 0);
    let ks = ks_two_sample(&z, &x);
    assert!(ks < 0.015, "KS {ks}");
}

#[test]
fn constant_multiplier_acceptance_rate() {
    let spec = KernelSpec::new(ScalingFunction::power_law(1.0, 1.0).unwrap(), 2.0, Multiplier::Constant { c: 0.5 }, 2)
        .unwrap();
    let cfg = SimConfig::new(spec, 0.01, 1.0, 1, 33).unwrap();
    let (mut proposed, mut accepted) = (0u64, 0u64);
    let mut i = 0;
    while proposed < 1_000_000 {
        let d = sample_x_path(&cfg, i).unwrap().diagnostics;
        proposed += d.proposed;
        accepted += d.accepted;
        i += 1;
    }
    let rate = accepted as f64 / proposed as f64;
    assert!((rate / 0.25 - 1.0).abs() <= 0.02, "acceptance {rate} over {proposed} proposals");
}

#[test]
fn checkerboard_acceptance_follows_local_multiplier() {
    let (low, high, lambda) = (0.5, 2.0, 2.0);
    let multiplier = Multiplier::Checkerboard { period: 1.0, low, high };
    let spec = KernelSpec::new(ScalingFunction::power_law(1.0, 1.0).unwrap(), lambda, multiplier.clone(), 2).unwrap();
    let cfg = SimConfig::new(spec, 0.05, 2.0, 1, 34).unwrap().with_mode(SmallJumpMode::Drop).with_events(true);
    // Buckets keyed by the exact acceptance probability λ(x, x + h e_i) / Λ at the pre-jump state.
    let levels = [(low + low) / 2.0 / lambda, (low + high) / 2.0 / lambda, high / lambda];
    let mut trials = [0u64; 3];
    let mut hits = [0u64; 3];
    for i in 0..4000 {
        let path = sample_x_path(&cfg, i).unwrap();
        let mut pos = path.start.clone();
        for e in &path.events {
            let mut target = pos.clone();
            target[e.axis] += e.size;
            let p = multiplier.value(&pos, &target) / lambda;
            let bucket = levels.iter().position(|&l| (l - p).abs() < 1e-12).expect("unexpected acceptance level");
            trials[bucket] += 1;
            if e.accepted {
                hits[bucket] += 1;
                pos = target;
            }
        }
    }
    assert_eq!(hits[2], trials[2], "certain proposals must always be accepted");
    let chi2: f64 = (0..2)
        .map(|b| {
            let n = trials[b] as f64;
            let expected = n * levels[b];
            (hits[b] as f64 - expected).powi(2) / (expected * (1.0 - levels[b]))
        })
        .sum();
    // 99th percentile of χ² with two degrees of freedom.
    assert!(chi2 < 9.21, "χ² {chi2}, trials {trials:?}, hits {hits:?}");
    assert!(trials.iter().all(|&n| n > 1000), "{trials:?}");
}

#[test]
fn terminal_coordinates_are_uncorrelated() {
    let cfg = SimConfig::new(cauchy(2), 0.01, 1.0, 10_000, 35).unwrap();
    let (a, b): (Vec<f64>, Vec<f64>) = (0..cfg.n_paths)
        .map(|i| {
            let t = sample_z_path(&cfg, i).unwrap().terminal;
            (t[0], t[1])
        })
        .unzip();
    let rho = correlation(&a, &b);
    assert!(rho.abs() <= 0.03, "correlation {rho}");
}

#[test]
fn accepted_jump_sizes_follow_the_tail_law() {
    let phi = ScalingFunction::power_law(1.3, 1.0).unwrap();
    let eps = 0.02;
    let spec = KernelSpec::reference(phi.clone(), 1).unwrap();
    let cfg = SimConfig::new(spec, eps, 1.0, 1, 36).unwrap().with_mode(SmallJumpMode::Drop).with_events(true);
    let mut sizes = Vec::new();
    let mut i = 0;
    while sizes.len() < 100_000 {
        let path = sample_z_path(&cfg, i).unwrap();
        sizes.extend(path.events.iter().filter(|e| e.accepted).map(|e| e.size.abs()));
        i += 1;
    }
    let total = phi.tail_mass(eps).unwrap();
    let ks = ks_statistic(&sizes, |s| if s < eps { 0.0 } else { 1.0 - phi.tail_mass(s).unwrap() / total });
    assert!(ks < 0.01, "KS {ks} on {} jumps", sizes.len());
}

#[test]
fn tail_quantile_inverts_tail_mass() {
    let phi = ScalingFunction::sum_of_powers(vec![PowerTerm { c: 1.0, alpha: 0.5 }, PowerTerm { c: 1.0, alpha: 1.5 }])
        .unwrap();
    let eps = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let draws: Vec<f64> = (0..100_000).map(|_| phi.tail_quantile(eps, rng.random::<f64>()).unwrap()).collect();
    let total = phi.tail_mass(eps).unwrap();
    let ks = ks_statistic(&draws, |s| if s < eps { 0.0 } else { 1.0 - phi.tail_mass(s).unwrap() / total });
    assert!(ks < 0.01, "KS {ks}");
}

#[test]
fn even_multiplier_gives_mirror_symmetric_law() {
    let multiplier = Multiplier::SmoothWave { frequency: 1.0, amplitude: 0.5 };
    let spec = KernelSpec::new(ScalingFunction::power_law(1.2, 1.0).unwrap(), 2.0, multiplier, 2).unwrap();
    let cfg = SimConfig::new(spec, 0.01, 1.0, 100_000, 38).unwrap();
    for axis in 0..2 {
        let all = terminals(&cfg, true, axis);
        let (a, b) = all.split_at(all.len() / 2);
        let mirrored: Vec<f64> = b.iter().map(|v| -v).collect();
        let ks = ks_two_sample(a, &mirrored);
        assert!(ks < 0.015, "axis {axis}: KS {ks}");
    }
}

#[test]
fn power_law_paths_are_self_similar() {
    let alpha = 1.5;
    let kappa: f64 = 2.0;
    let phi = ScalingFunction::power_law(alpha, 1.0).unwrap();
    let spec = KernelSpec::reference(phi.clone(), 1).unwrap();
    let n = 50_000;
    let direct = SimConfig::new(spec.clone(), 0.01, 1.0, n, 39).unwrap();
    let long = SimConfig::new(spec, 0.01 * kappa, kappa.powf(alpha), n, 40).unwrap();
    let a = terminals(&direct, false, 0);
    let b: Vec<f64> = (0..n)
        .map(|i| rescale_path(&sample_z_path(&long, i).unwrap(), kappa, &phi).unwrap().terminal[0])
        .collect();
    let ks = ks_two_sample(&a, &b);
    assert!(ks < 0.015, "KS {ks}");
}

#[test]
fn rescaled_paths_reproduce_the_scaled_experiment() {
    let phi = ScalingFunction::sum_of_powers(vec![PowerTerm { c: 1.0, alpha: 0.6 }, PowerTerm { c: 0.5, alpha: 1.4 }])
        .unwrap();
    let kappa = 3.0;
    let (t, eps, n) = (1.0, 0.01, 20_000);
    let scaled_phi = phi.rescale(kappa).unwrap();
    let time_scale = phi.eval(kappa).unwrap();
    let original = SimConfig::new(KernelSpec::reference(phi.clone(), 2).unwrap(), eps, t, n, 41).unwrap();
    let scaled = SimConfig::new(KernelSpec::reference(scaled_phi.clone(), 2).unwrap(), eps / kappa, t / time_scale, n, 41)
        .unwrap();
    let grid = GridSpec::around(&[0.0, 0.0], t, &phi).unwrap();
    let scaled_grid = GridSpec::new(
        grid.lower.iter().map(|v| v / kappa).collect(),
        grid.width.iter().map(|v| v / kappa).collect(),
        grid.bins.clone(),
    )
    .unwrap();
    let rescaled: Vec<Vec<f64>> = (0..n)
        .map(|i| rescale_path(&sample_z_path(&original, i).unwrap(), kappa, &phi).unwrap().terminal)
        .collect();
    let direct: Vec<Vec<f64>> = (0..n).map(|i| sample_z_path(&scaled, i).unwrap().terminal).collect();
    let a = empirical_density(&rescaled, &scaled_grid).unwrap();
    let b = empirical_density(&direct, &scaled_grid).unwrap();
    assert_eq!(a.counts.iter().sum::<u64>() + a.overflow, n);
    assert_eq!(a.counts, b.counts);
    assert_eq!(a.overflow, b.overflow);
}

#[test]
fn exact_stable_oracle_agrees_with_simulation() {
    // Jump density |s|^{-2.2} has exponent c_α |ξ|^α with α = 1.2.
    let alpha = 1.2;
    let phi = ScalingFunction::power_law(alpha, 1.0).unwrap();
    let cfg = SimConfig::new(KernelSpec::reference(phi, 1).unwrap(), 0.01, 1.0, 50_000, 42).unwrap();
    let simulated = terminals(&cfg, false, 0);
    let c = aniso::simulate::stable_char_constant(alpha).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let exact: Vec<f64> = (0..50_000).map(|_| exact_stable_sample(alpha, c, &mut rng).unwrap()).collect();
    let ks = ks_two_sample(&simulated, &exact);
    assert!(ks < 0.015, "KS {ks}");
}

/// Unit tent on a grid over `[-1.5, 1.5]` with spacing 0.01.
fn tent() -> GridFunction {
    GridFunction::from_fn(vec![-1.5], 0.01, vec![301], |x| (1.0 - x[0].abs()).max(0.0)).unwrap()
}

#[test]
fn truncation_energy_gap_is_bounded() {
    let f = tent();
    let spec = cauchy(1);
    let full = dirichlet_energy(&f, &spec).unwrap();
    let norm = f.norm_sq();
    for lam in [1.0, 2.0, 4.0, 8.0] {
        let gap = full - dirichlet_energy(&f, &spec.truncate(lam).unwrap()).unwrap();
        // (f(x+τ) - f(x))² <= 2 f(x+τ)² + 2 f(x)², and ∫_{|τ|>λ} dτ/τ² = 2/λ.
        let bound = 8.0 * norm / lam;
        assert!(gap >= -1e-9 * full && gap <= bound, "λ={lam}: gap {gap}, bound {bound}");
        if lam >= 2.0 {
            // Beyond the support width only the 2 f(x)² terms remain: gap = 4‖f‖²/λ.
            let exact = 4.0 * norm / lam;
            assert!((gap / exact - 1.0).abs() < 0.02, "λ={lam}: gap {gap}, exact {exact}");
        }
    }
}
