use pdmp_impulse::model::{KernelSpec, RateSpec, TransportSpec};
use pdmp_impulse::oracle::{mc_discount_at_jump, mc_no_impulse_cost};

fn renewal(rate: f64) -> TransportSpec {
    TransportSpec { rate: RateSpec::Constant(rate), kernel: KernelSpec::Dirac(0.0), ..TransportSpec::benchmark() }
}

// Inter-jump times are i.i.d. min(Exp(rate), boundary), so E[e^{-alpha T_N}] = m^N.
fn laplace(rate: f64, alpha: f64, boundary: f64) -> f64 {
    let r = alpha + rate;
    rate / r * (1.0 - (-r * boundary).exp()) + (-r * boundary).exp()
}

#[test]
fn discount_at_jump_matches_renewal_formula() {
    let spec = renewal(1.5);
    let (model, _) = spec.build();
    let m = laplace(1.5, 2.0, 1.0);
    let mut prev = 1.0;
    for n in [0, 1, 3, 6] {
        let est = mc_discount_at_jump(&model, 2.0, &[0.0], n, 100_000, 5).unwrap();
        if n == 0 {
            assert_eq!(est.estimate, 1.0);
            continue;
        }
        let exact = m.powi(n as i32);
        assert!((est.estimate - exact).abs() < 4.0 * est.std_error + 1e-12, "N={n}: {} vs {exact}", est.estimate);
        assert!(est.estimate < prev);
        prev = est.estimate;
    }
}

#[test]
fn running_cost_matches_renewal_equation() {
    // f(x) = 1 - x along a renewal path from 0: V = A / (1 - m) with A the
    // expected discounted cost of one cycle.
    let (rate, alpha) = (1.5f64, 2.0f64);
    let spec = renewal(rate);
    let (model, cost) = spec.build();
    let r = alpha + rate;
    // A = ∫_0^1 e^{-r s} (1 - s) ds
    let a = 1.0 / r - (1.0 - (-r).exp()) / (r * r);
    let exact = a / (1.0 - laplace(rate, alpha, 1.0));
    let est = mc_no_impulse_cost(&model, &cost, &[0.0], 100_000, 15.0, 9).unwrap();
    let err = (est.estimate - exact).abs();
    assert!(err < 4.0 * est.std_error + est.truncation_bound, "{} vs {exact}", est.estimate);
    assert!(est.truncation_bound < 1e-12);
}

#[test]
fn same_seed_same_estimate() {
    let (model, cost) = TransportSpec::benchmark().build();
    let a = mc_no_impulse_cost(&model, &cost, &[0.0], 10_000, 5.0, 3).unwrap();
    let b = mc_no_impulse_cost(&model, &cost, &[0.0], 10_000, 5.0, 3).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    let c = mc_no_impulse_cost(&model, &cost, &[0.0], 10_000, 5.0, 4).unwrap();
    assert_ne!(a.estimate, c.estimate);
}

#[test]
fn bad_arguments_are_rejected() {
    let (model, cost) = TransportSpec::benchmark().build();
    assert!(mc_no_impulse_cost(&model, &cost, &[0.0], 0, 5.0, 1).is_err());
    assert!(mc_no_impulse_cost(&model, &cost, &[0.0], 10, 0.0, 1).is_err());
    assert!(mc_discount_at_jump(&model, 2.0, &[0.0], 2, 0, 1).is_err());
}
