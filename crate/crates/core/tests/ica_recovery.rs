use nalgebra::DMatrix;
use stockcast_core::ica::covariance;
use stockcast_core::{amari_index, fastica, run_ica, select_variables, whiten, Error, IcaConfig};
use stockcast_testkit::{gaussian_matrix, non_gaussian_sources, random_mixing};

fn mixtures(seed: u64, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let sources = non_gaussian_sources(seed, n, 4);
    let mixing = random_mixing(seed + 1_000, 8, 4);
    let noise = gaussian_matrix(seed + 2_000, n, 8, 0.01);
    (&sources * mixing.transpose() + noise, mixing)
}

fn max_offdiag_identity_gap(m: &DMatrix<f64>) -> f64 {
    let k = m.nrows();
    (m - DMatrix::<f64>::identity(k, k)).abs().max()
}

#[test]
fn four_sources_into_eight_variables() {
    let config = IcaConfig { n_components: Some(4), ..Default::default() };
    for seed in 0..10 {
        let (data, mixing) = mixtures(seed, 2_000);
        let result = run_ica(&data, &config, seed).unwrap();
        assert_eq!(result.unmixing.shape(), (4, 8));
        let index = amari_index(&(&result.unmixing * &mixing));
        assert!(index < 0.1, "seed {seed}: {index}");
    }
}

#[test]
fn orthogonal_two_by_two_mixing() {
    let sources = non_gaussian_sources(21, 4_000, 2);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mixing = DMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
    let data = &sources * mixing.transpose();
    let result = run_ica(&data, &IcaConfig::default(), 3).unwrap();
    assert!(result.converged);
    assert!(amari_index(&(&result.unmixing * &mixing)) < 0.05);
}

#[test]
fn identity_mixing_gives_signed_permutation() {
    // Columns 0 and 4 of the generator are both uniform.
    let sources = non_gaussian_sources(4, 5_000, 5);
    let data = sources.select_columns(&[0, 4]);
    let whitened = whiten(&data).unwrap();
    let result = fastica(&whitened, 2, 1, 1e-6, 500).unwrap();
    let gain = &result.unmixing;
    for row in gain.row_iter() {
        let mut mags: Vec<f64> = row.iter().map(|v| v.abs()).collect();
        mags.sort_by(f64::total_cmp);
        assert!((mags[1] - 1.0).abs() < 0.05 && mags[0] < 0.05, "{row}");
    }
}

#[test]
fn whitening_diagonal_covariance() {
    let base = non_gaussian_sources(5, 1_000, 2);
    let data = DMatrix::from_fn(1_000, 2, |i, j| if j == 0 { 2.0 * base[(i, 0)] } else { base[(i, 1)] });
    let whitened = whiten(&data).unwrap();
    assert!(max_offdiag_identity_gap(&covariance(&whitened.data)) < 1e-8);
    let back = &whitened.transform.whitening * &whitened.transform.dewhitening;
    assert!(max_offdiag_identity_gap(&back) < 1e-10);
}

#[test]
fn components_are_white() {
    let (data, _) = mixtures(6, 1_500);
    let result = run_ica(&data, &IcaConfig::default(), 6).unwrap();
    let cov = &result.unmixing * covariance(&data) * result.unmixing.transpose();
    assert!(max_offdiag_identity_gap(&cov) < 1e-6);
    let gram = &result.rotation * result.rotation.transpose();
    assert!(max_offdiag_identity_gap(&gram) < 1e-8);
}

#[test]
fn same_seed_same_result() {
    let (data, _) = mixtures(7, 800);
    let a = run_ica(&data, &IcaConfig::default(), 99).unwrap();
    let b = run_ica(&data, &IcaConfig::default(), 99).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gaussian_sources_do_not_crash() {
    let data = gaussian_matrix(8, 300, 3, 1.0);
    let config = IcaConfig { max_iter: 50, ..Default::default() };
    let result = run_ica(&data, &config, 1).unwrap();
    assert_eq!(result.n_components(), 3);
    assert!(result.unmixing.iter().all(|v| v.is_finite()));
}

#[test]
fn constant_column_is_named() {
    let mut data = gaussian_matrix(9, 100, 3, 1.0);
    data.column_mut(1).fill(4.0);
    match whiten(&data) {
        Err(Error::RankDeficient { columns }) => assert_eq!(columns, [1]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn selection_size_within_bounds() {
    let sources = non_gaussian_sources(10, 600, 12);
    let data = &sources * random_mixing(11, 40, 12).transpose() + gaussian_matrix(12, 600, 40, 0.05);
    let names: Vec<String> = (0..40).map(|j| format!("v{j}")).collect();
    let result = run_ica(&data, &IcaConfig::default(), 10).unwrap();
    assert_eq!(result.n_components(), 10);
    let subset = select_variables(&result, &names, 3, 7).unwrap();
    assert_eq!(subset.selected_names.len(), 7);
    assert!(subset.scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(subset.selected_names.iter().all(|n| names.contains(n)));
    assert!(select_variables(&result, &names, 41, 50).is_err());
}
