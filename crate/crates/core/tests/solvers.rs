use qmr_core::dataio::{add_mixed_noise_with_mask, synth_dataset};
use qmr_core::{
    classify_nqmr, Dictionary, NqmrConfig, NqmrSolver, Quaternion, QuaternionMatrix, QuaternionVector,
    RnqmrConfig, RnqmrSolver, CorruptionRecipe, SynthSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pure(rng: &mut ChaCha8Rng, m: usize, n: usize) -> QuaternionMatrix {
    QuaternionMatrix::from_fn(m, n, |_, _| {
        Quaternion::pure(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))
    })
}

/// `B` in the dictionary span plus a rank-one term above the threshold.
fn span_plus_rank_one(seed: u64) -> (Dictionary, QuaternionMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = (6, 5);
    let atoms: Vec<_> = (0..6).map(|_| random_pure(&mut rng, m, n)).collect();
    let dict = Dictionary::new(atoms).unwrap();
    let x: QuaternionVector = (0..6).map(|_| Quaternion::real(rng.random_range(-1.0..1.0))).collect();
    let u: Vec<f64> = (0..m).map(|_| rng.random()).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let spike = QuaternionMatrix::from_fn(m, n, |r, c| Quaternion::pure(u[r] * v[c], 0.0, 0.0));
    let b = &dict.reconstruct(&x).unwrap() + &spike.scale(3.0);
    (dict, b)
}

#[test]
fn nqmr_dual_falls_below_tolerance_on_span_plus_rank_one() {
    for seed in 0..5 {
        let (dict, b) = span_plus_rank_one(seed);
        let full = NqmrConfig {
            eps_rel: 1e-300,
            ..Default::default()
        };
        let sol = NqmrSolver::new(&dict, full).unwrap().solve(&b).unwrap();
        assert_eq!(sol.iterations, 100);
        assert!(*sol.trace.last().unwrap() < 1e-3, "seed {seed}: {:?}", sol.trace.last());

        let sol = NqmrSolver::new(&dict, NqmrConfig::default()).unwrap().solve(&b).unwrap();
        assert!(sol.converged && sol.iterations < 100, "seed {seed}");
    }
}

#[test]
fn nqmr_classifies_clean_synthetic_queries() {
    let data = synth_dataset(&SynthSpec::new(4, 3, (6, 6), 9)).unwrap();
    for q in &data.test {
        let r = classify_nqmr(&data.train, &q.image, &NqmrConfig::default()).unwrap();
        assert_eq!(r.predicted, q.class);
    }
}

#[test]
fn rnqmr_constraint_residual_shrinks() {
    let data = synth_dataset(&SynthSpec::new(3, 3, (6, 6), 2)).unwrap();
    let solver = RnqmrSolver::new(data.train.dictionary(), RnqmrConfig::default()).unwrap();
    let sol = solver.solve(&data.test[0].image).unwrap();
    assert!(sol.state.residual < 1e-2, "{}", sol.state.residual);
    assert!(sol.trace.iter().all(|d| d.is_finite() && *d >= 0.0));
}

#[test]
fn rnqmr_sparse_term_sits_on_impulses() {
    let data = synth_dataset(&SynthSpec::new(3, 3, (10, 10), 5)).unwrap();
    let recipe = CorruptionRecipe {
        sp_probability: 0.1,
        seed: 3,
        ..CorruptionRecipe::clean()
    };
    let (b, mask) = add_mixed_noise_with_mask(&data.test[0].image, &recipe, &mut recipe.rng_for(0));
    let cfg = RnqmrConfig {
        omega: 0.01,
        alpha: 0.1,
        ..Default::default()
    };
    let sol = RnqmrSolver::new(data.train.dictionary(), cfg).unwrap().solve(&b).unwrap();
    let moduli: Vec<f64> = sol.state.e1.as_slice().iter().map(|q| q.modulus()).collect();
    let on: f64 = moduli.iter().zip(&mask).filter(|(_, h)| **h).map(|(m, _)| *m).sum::<f64>();
    let off: f64 = moduli.iter().zip(&mask).filter(|(_, h)| !**h).map(|(m, _)| *m).sum::<f64>();
    let hits = mask.iter().filter(|h| **h).count() as f64;
    let misses = mask.len() as f64 - hits;
    assert!(on / hits > 5.0 * off / misses.max(1.0), "on {} off {}", on / hits, off / misses);
}
