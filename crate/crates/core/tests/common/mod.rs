//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use factorcast::ingest::{AlignedDataset, YearMonth};
use factorcast::lstm::{LstmParams, WindowSample};

pub fn months(first: YearMonth, n: usize) -> Vec<YearMonth> {
    (0..n as u32).map(|i| YearMonth::from_ordinal(first.ordinal() + i)).collect()
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// A monthly table in the layout of the Ken French library files: a text
/// banner, a header whose first field is blank, `YYYYMM` rows, then an
/// annual table that the parser must ignore.
pub fn french_csv(banner: &str, columns: &[&str], dates: &[YearMonth], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    writeln!(out, "{banner}").unwrap();
    writeln!(out, "The 1-month TBill rate data are from Ibbotson Associates.").unwrap();
    writeln!(out).unwrap();
    writeln!(out, ",{}", columns.join(",")).unwrap();
    for (d, row) in dates.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>8.2}")).collect();
        writeln!(out, "{d},{}", cells.join(",")).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, " Annual Factors: January-December ").unwrap();
    writeln!(out, ",{}", columns.join(",")).unwrap();
    writeln!(out, "  {},{}", dates[0].year(), vec!["   1.00"; columns.len()].join(",")).unwrap();
    out
}

pub struct FixtureFiles {
    pub factors: Vec<PathBuf>,
    pub portfolios: PathBuf,
    pub first: YearMonth,
    pub last: YearMonth,
}

/// Synthetic three-factor, momentum, five-factor and five-industry files
/// (returns rounded to two decimals as in the published files).
pub fn write_french_fixture(dir: &Path, n: usize, seed: u64) -> FixtureFiles {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = YearMonth::new(2004, 1).unwrap();
    let dates = months(first, n);
    let mkt = normals(&mut rng, n, 4.0);
    let smb = normals(&mut rng, n, 2.5);
    let hml = normals(&mut rng, n, 3.0);
    let mom = normals(&mut rng, n, 4.0);
    let rmw = normals(&mut rng, n, 2.0);
    let cma = normals(&mut rng, n, 1.8);
    let smb5: Vec<f64> = smb.iter().zip(normals(&mut rng, n, 0.3)).map(|(a, b)| a + b).collect();
    let rf: Vec<f64> = (0..n).map(|i| 0.05 + 0.3 * (i as f64 / n as f64)).collect();

    let row = |cols: &[&Vec<f64>], i: usize| cols.iter().map(|c| c[i]).collect::<Vec<f64>>();
    let ff3: Vec<Vec<f64>> = (0..n).map(|i| row(&[&mkt, &smb, &hml, &rf], i)).collect();
    let momentum: Vec<Vec<f64>> = (0..n).map(|i| row(&[&mom], i)).collect();
    let ff5: Vec<Vec<f64>> = (0..n)
        .map(|i| row(&[&mkt, &smb5, &hml, &rmw, &cma, &rf], i))
        .collect();

    let loadings: [[f64; 5]; 5] = [
        [0.8, -0.1, 0.1, 0.3, 0.2],
        [0.95, 0.05, 0.03, 0.15, -0.1],
        [1.2, 0.1, -0.4, -0.3, -0.5],
        [0.7, -0.2, -0.2, 0.1, 0.3],
        [1.0, 0.2, 0.3, 0.05, 0.1],
    ];
    let noise: Vec<Vec<f64>> = (0..5).map(|_| normals(&mut rng, n, 1.2)).collect();
    let industries: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..5)
                .map(|k| {
                    let b = loadings[k];
                    rf[i] + 0.1
                        + b[0] * mkt[i]
                        + b[1] * smb5[i]
                        + b[2] * hml[i]
                        + b[3] * rmw[i]
                        + b[4] * cma[i]
                        + 0.05 * mom[i]
                        + noise[k][i]
                })
                .collect()
        })
        .collect();

    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let f3 = write(
        "F-F_Research_Data_Factors.CSV",
        french_csv("This file was created using the CRSP database.", &["Mkt-RF", "SMB", "HML", "RF"], &dates, &ff3),
    );
    let fm = write(
        "F-F_Momentum_Factor.CSV",
        french_csv("Missing data are indicated by -99.99.", &["Mom   "], &dates, &momentum),
    );
    let f5 = write(
        "F-F_Research_Data_5_Factors_2x3.CSV",
        french_csv(
            "This file was created using the CRSP database.",
            &["Mkt-RF", "SMB", "HML", "RMW", "CMA", "RF"],
            &dates,
            &ff5,
        ),
    );
    let mut industry_text = french_csv(
        "  Average Value Weighted Returns -- Monthly",
        &["Cnsmr", "Manuf", "HiTec", "Hlth ", "Other"],
        &dates,
        &industries,
    );
    industry_text.push_str("\n  Average Equal Weighted Returns -- Monthly\n,Cnsmr,Manuf,HiTec,Hlth ,Other\n");
    industry_text.push_str(&format!("{},9.99,9.99,9.99,9.99,9.99\n", dates[0]));
    let ind = write("5_Industry_Portfolios.CSV", industry_text);

    FixtureFiles {
        factors: vec![f3, fm, f5],
        portfolios: ind,
        first,
        last: dates[n - 1],
    }
}

/// Directory holding the published French library files, if one is configured
/// through `FACTORCAST_DATA_DIR`.
pub fn real_data_files() -> Result<FixtureFiles, String> {
    let dir = std::env::var_os("FACTORCAST_DATA_DIR")
        .map(PathBuf::from)
        .ok_or("FACTORCAST_DATA_DIR is not set")?;
    let need = [
        "F-F_Research_Data_Factors.CSV",
        "F-F_Momentum_Factor.CSV",
        "F-F_Research_Data_5_Factors_2x3.CSV",
        "5_Industry_Portfolios.CSV",
    ];
    let paths: Vec<PathBuf> = need.iter().map(|n| dir.join(n)).collect();
    if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
        return Err(format!("{} not found", missing.display()));
    }
    Ok(FixtureFiles {
        factors: paths[..3].to_vec(),
        portfolios: paths[3].clone(),
        first: YearMonth::new(2004, 1).unwrap(),
        last: YearMonth::new(2024, 1).unwrap(),
    })
}

/// Factors drawn at random with the sector excess return
/// `0.9·mkt_t + 0.5·tanh(3·mean(SMB_{t-5..t})) + noise`.
pub fn nonlinear_fixture(n: usize, seed: u64, noise_sd: f64) -> AlignedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dates = months(YearMonth::new(2004, 1).unwrap(), n);
    let mkt = normals(&mut rng, n, 1.0);
    let smb = normals(&mut rng, n, 1.0);
    let hml = normals(&mut rng, n, 1.0);
    let rmw = normals(&mut rng, n, 1.0);
    let cma = normals(&mut rng, n, 1.0);
    let noise = normals(&mut rng, n, noise_sd);
    let sector: Vec<f64> = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(5);
            let mean = smb[lo..=t].iter().sum::<f64>() / (t - lo + 1) as f64;
            0.9 * mkt[t] + 0.5 * (3.0 * mean).tanh() + noise[t]
        })
        .collect();
    AlignedDataset::from_columns(
        dates,
        vec![
            ("Mkt-RF".into(), mkt),
            ("SMB".into(), smb),
            ("HML".into(), hml),
            ("RMW".into(), rmw),
            ("CMA".into(), cma),
            ("RF".into(), vec![0.0; n]),
        ],
        vec![("Synth".into(), sector)],
    )
    .unwrap()
}

pub struct OracleFit {
    pub beta: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Least squares through the SVD pseudo-inverse with an intercept column.
pub fn pinv_ols(y: &[f64], columns: &[Vec<f64>]) -> OracleFit {
    let n = y.len();
    let p = columns.len() + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let yv = DVector::from_column_slice(y);
    let pinv = x.clone().pseudo_inverse(1e-13).unwrap();
    let beta = &pinv * &yv;
    let resid = &yv - &x * &beta;
    let sse = resid.norm_squared();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sigma2 = sse / (n - p) as f64;
    let cov = &pinv * pinv.transpose();
    let t_stats = (0..p).map(|j| beta[j] / (sigma2 * cov[(j, j)]).sqrt()).collect();
    OracleFit {
        beta: beta.iter().copied().collect(),
        t_stats,
        r_squared: 1.0 - sse / sst,
        residuals: resid.iter().copied().collect(),
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Student-t CDF by quadrature. With t = √ν·tan θ the density kernel becomes
/// cos^(ν−1) θ on [0, π/2), normalised by its own integral.
pub fn t_cdf_quadrature(x: f64, dof: f64) -> f64 {
    let kernel = |theta: f64| theta.cos().powf(dof - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let total = adaptive_simpson(&kernel, 0.0, half_pi, 1e-15);
    let upto = adaptive_simpson(&kernel, 0.0, (x.abs() / dof.sqrt()).atan(), 1e-15);
    0.5 + 0.5 * x.signum() * upto / total
}

/// P(F > x) by quadrature of sin^(d1−1) φ · cos^(d2−1) φ, where
/// sin² φ = d1·x / (d1·x + d2).
pub fn f_sf_quadrature(x: f64, d1: f64, d2: f64) -> f64 {
    let kernel = |phi: f64| phi.sin().powf(d1 - 1.0) * phi.cos().powf(d2 - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let s = d1 * x / (d1 * x + d2);
    let phi = s.sqrt().asin();
    let total = adaptive_simpson(&kernel, 0.0, half_pi, 1e-15);
    adaptive_simpson(&kernel, phi, half_pi, 1e-15) / total
}

pub fn random_sample(rng: &mut ChaCha8Rng, d: usize, len: usize) -> WindowSample {
    WindowSample {
        inputs: (0..d * len).map(|_| rng.random_range(-1.0..1.0)).collect(),
        target: rng.random_range(-1.0..1.0),
        target_date: YearMonth::new(2010, 1).unwrap(),
    }
}

/// Central finite-difference gradient of the batch loss.
pub fn finite_difference_gradient(
    batch: &[WindowSample],
    params: &LstmParams,
    eps: f64,
    loss: impl Fn(&[WindowSample], &LstmParams) -> f64,
) -> Vec<f64> {
    let flat = params.to_flat();
    let mut probe = params.clone();
    (0..flat.len())
        .map(|k| {
            let mut v = flat.clone();
            v[k] = flat[k] + eps;
            probe.set_flat(&v);
            let up = loss(batch, &probe);
            v[k] = flat[k] - eps;
            probe.set_flat(&v);
            let down = loss(batch, &probe);
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Batch-mean squared error computed from a plain forward pass.
pub fn mse_loss(batch: &[WindowSample], params: &LstmParams) -> f64 {
    batch
        .iter()
        .map(|s| {
            let (pred, _) = factorcast::lstm::forward_sequence(&s.inputs, params).unwrap();
            (pred - s.target).powi(2)
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Largest |a−n| / max(|a|, |n|, 1e−6) over each named tensor.
pub fn gradient_check(analytic: &LstmParams, numeric: &[f64]) -> Vec<(String, f64)> {
    let mut offset = 0;
    analytic
        .tensors()
        .into_iter()
        .map(|(name, t)| {
            let worst = t
                .iter()
                .zip(&numeric[offset..offset + t.len()])
                .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
                .fold(0.0, f64::max);
            offset += t.len();
            (name, worst)
        })
        .collect()
}
