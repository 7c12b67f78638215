mod common;

use pdmp_impulse::model::{benchmark_model, PdmpModel};
use pdmp_impulse::operators::{qop_k, CellOperator, DeltaPolicy, Operators};
use pdmp_impulse::pipeline::survival_check;
use proptest::prelude::*;

#[test]
fn survival_identity_holds() {
    let (model, cost) = benchmark_model();
    let c = survival_check(&model, &cost, 200, 5, 1e-9);
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn flow_shift_identities() {
    let worst = common::semigroup_worst(200, 6);
    assert!(worst < 1e-9, "worst {worst:e}");
}

#[test]
fn l_shift_identity() {
    let worst = common::l_shift_worst(40, 400, 7);
    assert!(worst < 1e-9, "worst {worst:e}");
}

#[test]
fn time_regularity_of_j() {
    let (bad, ratio) = common::time_regularity(300, 8);
    assert_eq!(bad, 0, "largest ratio {ratio}");
}

#[test]
fn time_discretization_bound() {
    let (bad, ratio) = common::discretization(60, 9);
    assert_eq!(bad, 0, "largest ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantized_k_is_monotone(
        z in 0.0f64..0.99,
        succ in prop::collection::vec((0.0f64..1.0, 0.01f64..2.0), 1..6),
        w1 in prop::collection::vec(0.0f64..1.0, 6),
        bump in prop::collection::vec(0.0f64..0.5, 6),
    ) {
        let (model, cost) = benchmark_model();
        let ops = Operators::new(&model, &cost);
        let total: f64 = succ.iter().map(|s| s.0 + 1e-3).sum();
        let rows: Vec<(u32, f64, f64)> =
            succ.iter().enumerate().map(|(j, s)| (j as u32, (s.0 + 1e-3) / total, s.1)).collect();
        let cell = CellOperator::build(&ops, &[z], &rows, &DeltaPolicy::Constant(0.1)).unwrap();
        let w2: Vec<f64> = w1.iter().zip(&bump).map(|(a, b)| a + b).collect();
        prop_assert!(qop_k(&cell, &w1) <= qop_k(&cell, &w2));
    }

    #[test]
    fn continuous_k_below_constant_terminal(x in 0.0f64..0.999, c in 0.0f64..2.0) {
        // K applied to a constant c: F(t*) + c (H1 + I1) <= C_f/alpha + c
        let (model, cost) = benchmark_model();
        let ops = Operators::new(&model, &cost);
        let w = move |_: &[f64]| c;
        let l = model.constants();
        prop_assert!(ops.op_k(&w, &[x]) <= l.c_f / l.alpha + c + 1e-9);
    }
}
