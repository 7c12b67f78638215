use pdmp_impulse::operators::Operators;
use pdmp_impulse::oracle::{brute_force_recursion, ToyInstance};
use pdmp_impulse::solver::{solve_control_values, solve_main, ControlChains, DeltaMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn solve(inst: &ToyInstance) -> (f64, Vec<Vec<f64>>) {
    let (model, cost) = inst.transport_spec(1e-13).build();
    let ops = Operators::new(&model, &cost).with_tol(1e-13);
    let (main, control) = inst.chains();
    let mode = DeltaMode::Constant(inst.delta);
    let cv = solve_control_values(&ops, ControlChains::Pooled(&control), inst.horizon, mode).unwrap();
    let sol = solve_main(&ops, &main, &cv, inst.horizon, mode).unwrap();
    (sol.v0, cv.values)
}

#[test]
fn random_toys_agree_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..60 {
        let horizon = 1 + case % 3;
        let inst = ToyInstance::random(&mut rng, horizon, 4);
        let bf = brute_force_recursion(&inst).unwrap();
        let (v0, tilde) = solve(&inst);
        worst = worst.max(rel(v0, bf.v0));
        for k in 1..=horizon {
            for (a, b) in tilde[k].iter().zip(&bf.tilde[k]) {
                assert!(rel(*a, *b) < 1e-12, "case {case} k {k}: {a} vs {b}");
            }
        }
        assert!(rel(v0, bf.v0) < 1e-12, "case {case}: {v0} vs {}", bf.v0);
    }
    eprintln!("worst relative difference {worst:e}");
}

#[test]
fn single_cell_layers_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for h in 1..=3 {
        let inst = ToyInstance::random(&mut rng, h, 1);
        let bf = brute_force_recursion(&inst).unwrap();
        assert!(rel(solve(&inst).0, bf.v0) < 1e-12);
    }
}

#[test]
fn prohibitive_intervention_cost_gives_pure_k() {
    use pdmp_impulse::oracle::brute_force_pure_k;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let mut inst = ToyInstance::random(&mut rng, 3, 4);
        inst.c0 = 1e3;
        // with interior grid times past every quantized jump, J^ drops below K^
        inst.delta = 1e3;
        let (v0, tilde) = solve(&inst);
        assert!(rel(v0, brute_force_pure_k(&inst, &inst.main, 3)[0]) < 1e-12);
        for k in 1..3 {
            let pure = brute_force_pure_k(&inst, &inst.control, 3 - k);
            for (a, b) in tilde[k].iter().zip(&pure) {
                assert!(rel(*a, *b) < 1e-12, "k {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn horizon_one_needs_only_g() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inst = ToyInstance::random(&mut rng, 1, 3);
    let (_, tilde) = solve(&inst);
    assert_eq!(tilde[1], vec![inst.g; inst.controls.len()]);
}

#[test]
fn oversized_instances_are_refused() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut inst = ToyInstance::random(&mut rng, 3, 4);
    inst.main.cells[2].push((0.5, 0.5));
    inst.main.cells[2].push((0.6, 0.5));
    assert!(matches!(brute_force_recursion(&inst), Err(pdmp_impulse::Error::TooLarge(_))));
}
