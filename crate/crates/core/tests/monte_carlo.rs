//! Simulation oracles for the martingale structure.

use tmef::estfun::{optimal_weights, quasi_score, step_quantities, PointSet};
use tmef::models::{simulate, stream_rng, BinaryMarkov, GammaAr1, GaussianAr1, SimSpec, StableAr1};
use tmef::{KernelFamily, ProcessModel};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn assert_zero_mean<M: ProcessModel>(model: &M, ps: &PointSet, theta: &[f64], n: usize) {
    let p = theta.len();
    let scores: Vec<Vec<f64>> = (0..200)
        .map(|rep| {
            let s = simulate(model, &SimSpec::new(theta.to_vec(), n, 77).with_stream(rep)).unwrap();
            quasi_score(model, ps, theta, &s).unwrap()
        })
        .collect();
    for i in 0..p {
        let comp: Vec<f64> = scores.iter().map(|v| v[i]).collect();
        let (mean, se) = mean_and_se(&comp);
        assert!(mean.abs() < 3.0 * se, "{} component {i}: mean {mean}, se {se}", model.name());
    }
}

#[test]
fn quasi_scores_have_zero_mean_at_the_truth() {
    assert_zero_mean(&StableAr1::new(1.5).unwrap(), &PointSet::single(KernelFamily::CfReal, 0.54).unwrap(), &[0.6], 300);
    assert_zero_mean(&GaussianAr1::new(1.0).unwrap(), &PointSet::new(KernelFamily::Mgf, vec![0.3, -0.5]).unwrap(), &[0.5], 300);
    assert_zero_mean(
        &GammaAr1::new(),
        &PointSet::new(KernelFamily::Laplace, vec![0.5, 1.5]).unwrap(),
        &[1.0, 2.0, 3.0],
        300,
    );
}

/// Monte Carlo `E[(s_j - w h_j) h_j' | y_prev]`, which vanishes when `w h_j`
/// is the projection of the score onto the span of `h_j`.
fn assert_orthogonal<M: ProcessModel>(model: &M, ps: &PointSet, theta: &[f64], y_prev: f64) {
    let mut rng = stream_rng(5, 0);
    let draws = 100_000;
    let k = ps.components();
    let mut products: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); k];
    for _ in 0..draws {
        let y = model.sample_next(theta, y_prev, &mut rng);
        let sq = step_quantities(model, ps, theta, y_prev, y).unwrap();
        let proj = (optimal_weights(&sq).unwrap() * &sq.h)[0];
        let s = model.score_step(theta, y_prev, y).unwrap()[0];
        for (c, prod) in products.iter_mut().enumerate() {
            prod.push((s - proj) * sq.h[c]);
        }
    }
    for prod in &products {
        let (mean, se) = mean_and_se(prod);
        assert!(mean.abs() < 3.0 * se.max(1e-15), "{}: mean {mean}, se {se}", model.name());
    }
}

#[test]
fn residual_score_is_orthogonal_to_the_differences() {
    let gauss = GaussianAr1::new(1.0).unwrap();
    assert_orthogonal(&gauss, &PointSet::new(KernelFamily::CfReal, vec![0.7, 1.3]).unwrap(), &[0.4], 1.5);
    assert_orthogonal(&gauss, &PointSet::single(KernelFamily::Mgf, 0.5).unwrap(), &[0.4], -0.8);
    let binary = BinaryMarkov::new();
    assert_orthogonal(&binary, &PointSet::single(KernelFamily::Pgf, 0.5).unwrap(), &[0.3], 1.0);
}
