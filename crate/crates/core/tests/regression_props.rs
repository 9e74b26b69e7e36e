mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use factorcast::regression::{
    ols_fit, predict, prediction_metrics, student_t_cdf, DesignMatrix, RegressionFit,
};

fn design(y: &[f64], cols: &[Vec<f64>]) -> DesignMatrix {
    DesignMatrix::new(
        y.to_vec(),
        cols.iter().enumerate().map(|(j, c)| (format!("x{j}"), c.clone())).collect(),
    )
    .unwrap()
}

/// Random well-conditioned regression instance.
fn instance(seed: u64, n: usize, m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..m).map(|_| common::normals(&mut rng, n, 1.5)).collect();
    let noise = common::normals(&mut rng, n, 1.0);
    let y = (0..n)
        .map(|i| 0.3 + cols.iter().enumerate().map(|(j, c)| (j as f64 - 1.0) * 0.4 * c[i]).sum::<f64>() + noise[i])
        .collect();
    (y, cols)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn in_sample(fit: &RegressionFit, d: &DesignMatrix) -> (f64, f64) {
    let m = prediction_metrics(d.response(), &predict(fit, d).unwrap()).unwrap();
    (m.rmse, m.mae)
}

#[test]
fn matches_pseudo_inverse_on_fixed_instances() {
    for seed in 0..10 {
        let (y, cols) = instance(seed, 60 + seed as usize * 10, 1 + seed as usize % 5);
        let fit = ols_fit(&design(&y, &cols)).unwrap();
        let oracle = common::pinv_ols(&y, &cols);
        for j in 0..fit.beta.len() {
            assert!(close(fit.beta[j], oracle.beta[j], 1e-9));
            assert!(close(fit.t_stats[j], oracle.t_stats[j], 1e-9));
        }
        assert!(close(fit.r_squared, oracle.r_squared, 1e-12));
        for (a, b) in fit.residuals.iter().zip(&oracle.residuals) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn t_cdf_is_symmetric(x in -50.0f64..50.0, dof in 0.5f64..300.0) {
        let s = student_t_cdf(x, dof).unwrap() + student_t_cdf(-x, dof).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12, "sum {}", s);
    }

    #[test]
    fn residuals_orthogonal_to_design(seed in any::<u64>(), n in 12usize..150, m in 1usize..6) {
        let (y, cols) = instance(seed, n, m);
        let fit = ols_fit(&design(&y, &cols)).unwrap();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ones: f64 = fit.residuals.iter().sum();
        prop_assert!(ones.abs() < 1e-8 * y_norm);
        for c in &cols {
            let dot: f64 = c.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-8 * y_norm, "dot {}", dot);
        }
    }

    #[test]
    fn p_values_are_two_sided_t_tails(seed in any::<u64>(), n in 12usize..150, m in 1usize..6) {
        let (y, cols) = instance(seed, n, m);
        let fit = ols_fit(&design(&y, &cols)).unwrap();
        for (t, p) in fit.t_stats.iter().zip(&fit.p_values) {
            let via_cdf = 2.0 * (1.0 - student_t_cdf(t.abs(), fit.dof as f64).unwrap());
            // the direct tail keeps precision where 1 - cdf cancels
            prop_assert!((p.value() - via_cdf).abs() < 1e-12, "p {} vs {}", p.value(), via_cdf);
        }
    }

    #[test]
    fn adding_a_regressor_never_lowers_r2(seed in any::<u64>(), n in 12usize..150, m in 1usize..5) {
        let (y, cols) = instance(seed, n, m + 1);
        let small = ols_fit(&design(&y, &cols[..m])).unwrap();
        let big = ols_fit(&design(&y, &cols)).unwrap();
        prop_assert!(big.r_squared >= small.r_squared - 1e-12);
        prop_assert!(small.r_squared >= -1e-12);
    }

    #[test]
    fn affine_rescaling_of_a_regressor(
        seed in any::<u64>(),
        n in 12usize..150,
        m in 1usize..5,
        scale in prop_oneof![-50.0f64..-0.02, 0.02f64..50.0],
        shift in -20.0f64..20.0,
    ) {
        let (y, cols) = instance(seed, n, m);
        let d0 = design(&y, &cols);
        let base = ols_fit(&d0).unwrap();
        let mut scaled = cols.clone();
        scaled[0].iter_mut().for_each(|v| *v = scale * *v + shift);
        let d1 = design(&y, &scaled);
        let fit = ols_fit(&d1).unwrap();
        prop_assert!(close(fit.beta[1] * scale, base.beta[1], 1e-8));
        for j in 1..base.beta.len() {
            // a negative scale flips the sign of that regressor's t
            let sign = if j == 1 { scale.signum() } else { 1.0 };
            prop_assert!(close(sign * fit.t_stats[j], base.t_stats[j], 1e-7));
            prop_assert!((fit.p_values[j].value() - base.p_values[j].value()).abs() < 1e-9);
        }
        prop_assert!(close(fit.r_squared, base.r_squared, 1e-10));
        let (r0, a0) = in_sample(&base, &d0);
        let (r1, a1) = in_sample(&fit, &d1);
        prop_assert!(close(r0, r1, 1e-9) && close(a0, a1, 1e-9));
    }

    #[test]
    fn column_order_does_not_matter(seed in any::<u64>(), n in 12usize..100, m in 2usize..6) {
        let (y, cols) = instance(seed, n, m);
        let named: Vec<(String, Vec<f64>)> = cols.iter().enumerate().map(|(j, c)| (format!("x{j}"), c.clone())).collect();
        let mut reversed = named.clone();
        reversed.reverse();
        let a = ols_fit(&DesignMatrix::new(y.clone(), named).unwrap()).unwrap();
        let b = ols_fit(&DesignMatrix::new(y, reversed).unwrap()).unwrap();
        for j in 0..m {
            let name = format!("x{j}");
            let (ba, _, ta, _) = a.coefficient(&name).unwrap();
            let (bb, _, tb, _) = b.coefficient(&name).unwrap();
            prop_assert!(close(ba, bb, 1e-9) && close(ta, tb, 1e-9));
        }
        prop_assert!(close(a.r_squared, b.r_squared, 1e-12));
    }
}
