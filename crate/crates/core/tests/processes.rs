use std::f64::consts::PI;

use num_bigint::BigUint;

use degapprox::blocks::{BlockGenerator, BlockSequence};
use degapprox::diag::{
    fernique_integral, lacunar_criteria, psi_functional, sigma_e_series, u_from_variance, u_functional,
    watanabe_check, block_variance, ErrorMode, SeriesKernel, Verdict, FERNIQUE_NODES, U_LOG_LAMBDA_RANGE,
};
use degapprox::franklin::{
    arctan_metric, beta_estimate, beta_profile, ff_coeffs, franklin_basis, kappa_profile, monotone_sup_criterion,
    SequenceSampler,
};
use degapprox::grid::{Grid, GridFn};
use degapprox::kernel::{sample_grid, GridKernel, KernelSpec};
use degapprox::lacunar::LacunarSpec;
use degapprox::mercer::{nystrom_decompose, MercerDecomposition, DEFAULT_DROP_TOL};
use degapprox::paths::{
    covariance_zscore, expected_modulus, kl_simulate, lacunar_simulate, lemma41_check, lil_example, sup_moment_growth,
    tau_estimate, tau_profile, LacunarProcess, PathEnsemble, ProfileVerdict, LIL_T0,
};
use degapprox::trig::vp_sum;

fn bridge(n: usize) -> MercerDecomposition {
    let gk = sample_grid(&KernelSpec::BrownianBridge, &Grid::unit(n).unwrap()).unwrap();
    nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap()
}

fn periodic_bridge(n: usize) -> MercerDecomposition {
    let g = Grid::periodic(n).unwrap();
    let gk = GridKernel::from_fn(&g, |t, s| {
        let (u, v) = (t / (2.0 * PI), s / (2.0 * PI));
        u.min(v) - u * v
    })
    .unwrap();
    nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap()
}

#[test]
fn kl_covariance_and_determinism() {
    let md = bridge(128);
    let ens = kl_simulate(&md, 64, 4000, 11).unwrap();
    let target = md.reconstruct(64);
    assert!(covariance_zscore(&ens, &target) <= 5.0);
    let again = kl_simulate(&md, 64, 4000, 11).unwrap();
    assert_eq!(ens.paths, again.paths);
}

#[test]
fn tau_closed_forms() {
    let g = Grid::periodic(256).unwrap();
    let gk = GridKernel::from_fn(&g, |t, s| t.cos() * s.cos()).unwrap();
    let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
    let e = tau_estimate(&md, 0, 1, 4000, 3).unwrap();
    assert!((e.mean - (2.0 / PI).sqrt()).abs() <= 3.0 * e.std_error);
    assert_eq!(tau_estimate(&md, 1, 4, 200, 3).unwrap().mean, 0.0);
    let blocks = BlockSequence::generate(BlockGenerator::Dyadic, 5).unwrap();
    let p = tau_profile(&md, &blocks, 200, 3).unwrap();
    assert!(p.estimates.iter().skip(1).all(|e| e.mean == 0.0));
}

#[test]
fn tau_triangle_and_envelope() {
    let md = bridge(256);
    let (n, k, m) = (2, 6, 20);
    let a = tau_estimate(&md, n, k, 2000, 5).unwrap();
    let b = tau_estimate(&md, k, m, 2000, 5).unwrap();
    let c = tau_estimate(&md, n, m, 2000, 5).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2) + c.std_error.powi(2)).sqrt();
    assert!(c.mean <= a.mean + b.mean + 6.0 * se);
    let env: f64 = (n + 1..=m).map(|j| md.eigenvalues[j - 1].sqrt() * md.eigenfunction_sup(j)).sum::<f64>()
        * (2.0 / PI).sqrt();
    assert!(c.mean <= env + 3.0 * c.std_error);
}

#[test]
fn theta_profiles_and_envelope() {
    let spec = LacunarSpec::theta_family(1.5, 5, 64).unwrap();
    let p = LacunarProcess::new(spec.clone()).unwrap();
    let blocks = BlockSequence::generate(BlockGenerator::Dyadic, 7).unwrap();
    let prof = tau_profile(&p, &blocks, 400, 9).unwrap();
    for e in &prof.estimates {
        let upper: f64 = (e.n + 1..=e.m).map(|k| spec.coefficient(k)).sum();
        let lower: f64 = upper * (2.0 / PI).sqrt() / ((e.m - e.n) as f64).sqrt();
        assert!(e.mean <= upper + 3.0 * e.std_error);
        assert!(e.mean >= lower - 3.0 * e.std_error);
    }
    assert!(prof.non_increasing);
    let slow = LacunarProcess::new(LacunarSpec::theta_family(0.75, 5, 64).unwrap()).unwrap();
    assert_eq!(tau_profile(&slow, &blocks, 400, 9).unwrap().verdict, ProfileVerdict::Violated);
}

#[test]
fn moments_lil_and_lemma41() {
    let md = bridge(256);
    let ens = kl_simulate(&md, md.n_kept, 1000, 2).unwrap();
    let r = sup_moment_growth(&ens, &[1.0, 2.0, 16.0], 3.0).unwrap();
    assert!((r.rows[0].ratio - 1.0).abs() < 1e-12);
    assert!(r.bounded);
    let zero = PathEnsemble { paths: vec![0.0; ens.paths.len()], ..ens.clone() };
    assert!(sup_moment_growth(&zero, &[2.0], 3.0).unwrap().degenerate);

    let lil = lil_example(500, &[LIL_T0, 1e-3, 1e-6], 4).unwrap();
    assert!(lil.rows[2].frac_sup_le_2_5 >= 0.95);
    assert!(lil.rows[2].median_range > 0.25 * lil.rows[1].median_range);

    let spec = LacunarSpec::theta_family(1.5, 5, 8).unwrap();
    let rep = lemma41_check(&spec, &[2, 3, 4, 5, 6, 7, 8], 500, 1, 2.0).unwrap();
    assert!(rep.bounded, "{:?}", rep.rows);
}

#[test]
fn expected_modulus_of_bridge_shrinks() {
    let md = bridge(512);
    let ens = kl_simulate(&md, md.n_kept, 300, 8).unwrap();
    let w = expected_modulus(&ens, &[0.25, 1.0 / 64.0]).unwrap();
    assert!(w[1] < 0.5 * w[0]);
}

#[test]
fn sigma_e_on_frequency_blocks() {
    let l = LacunarSpec::geometric(4.0, 5, 50).unwrap();
    let blocks = BlockSequence::explicit(l.frequencies().to_vec()).unwrap();
    let r = sigma_e_series(SeriesKernel::Lacunar(&l), &blocks, ErrorMode::SupLacunar, 40).unwrap();
    assert_eq!(r.verdict, Verdict::Converges);
    for k in 1..=40usize {
        // [5^k / 2] ∈ [5^(k-1), 5^k), so the tail starts at index k.
        let tail: f64 = (k..=50).map(|j| 4f64.powi(-(j as i32))).sum();
        let want = tail.sqrt() * (((k + 1) as f64) * 5f64.ln()).sqrt();
        assert!((r.terms[k - 1] - want).abs() < 1e-12 * want);
    }
    let slow = LacunarSpec::theta_family(0.75, 5, 400).unwrap().covariance();
    let sd = BlockSequence::generate(BlockGenerator::SuperDyadic, 12).unwrap();
    let r = sigma_e_series(SeriesKernel::Lacunar(&slow), &sd, ErrorMode::SupLacunar, 11).unwrap();
    assert_eq!(r.verdict, Verdict::Diverges);
}

#[test]
fn fernique_bridge_envelope() {
    let bb = sample_grid(&KernelSpec::BrownianBridge, &Grid::unit(1024).unwrap()).unwrap();
    let r = fernique_integral(&bb, None, FERNIQUE_NODES).unwrap();
    assert_eq!(r.verdict, Verdict::Converges);
    // ω(R, δ) ≤ 2δ, so the integrand is at most √2 e^{-x²/2}.
    assert!(*r.partial_sums.last().unwrap() <= PI.sqrt());
}

fn super_lacunar(count: u32) -> Vec<BigUint> {
    (1..=count).map(|k| BigUint::from(3u32).pow(1u32 << k)).collect()
}

#[test]
fn lacunar_gap_between_criteria() {
    let spec = LacunarSpec::theta_on(1.5, super_lacunar(16)).unwrap();
    let r = lacunar_criteria(&spec);
    assert_eq!(r.absolute_sum.verdict, Verdict::Converges);
    assert_eq!(r.tail_root.verdict, Verdict::Diverges);
    let w = watanabe_check(&LacunarSpec::theta_on(0.75, super_lacunar(12)).unwrap());
    assert_eq!(w.verdict, Verdict::Diverges);
}

#[test]
fn psi_matches_monte_carlo() {
    let md = periodic_bridge(256);
    let psi = psi_functional(&md, (8, 16), 1.0).unwrap();
    let ens = kl_simulate(&md, md.n_kept, 3000, 21).unwrap();
    let per_path: Vec<f64> = ens
        .iter()
        .map(|p| {
            let f = GridFn::new(md.grid.clone(), p.to_vec()).unwrap();
            let a = vp_sum(&f, 16).unwrap().sample(&md.grid).unwrap();
            let b = vp_sum(&f, 8).unwrap().sample(&md.grid).unwrap();
            a.values.iter().zip(&b.values).map(|(x, y)| (x - y).exp()).sum::<f64>() / p.len() as f64
        })
        .collect();
    let m = per_path.len() as f64;
    let mean = per_path.iter().sum::<f64>() / m;
    let se = (per_path.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
    assert!((psi - mean).abs() <= 3.0 * se, "psi {psi} mc {mean} se {se}");
}

#[test]
fn psi_monotone_and_u_stable() {
    let md = periodic_bridge(256);
    let mut last = 0.0;
    for l in [0.1, 0.5, 1.0, 3.0, 10.0] {
        let p = psi_functional(&md, (4, 16), l).unwrap();
        assert!(p >= last);
        last = p;
    }
    let v = block_variance(&md, (4, 16)).unwrap();
    let a = u_from_variance(&v, 16.0, U_LOG_LAMBDA_RANGE, 1e-8).unwrap();
    let b = u_from_variance(&v, 16.0, U_LOG_LAMBDA_RANGE, 1e-11).unwrap();
    assert!((a.u - b.u).abs() <= 1e-6 * b.u);
    // U never exceeds σ √(2 log N) with σ² the peak block variance.
    for (lo, hi) in [(2usize, 4usize), (4, 8), (8, 16), (16, 32)] {
        let v = block_variance(&md, (lo, hi)).unwrap();
        let sigma = v.iter().fold(0.0_f64, |a, b| a.max(*b)).sqrt();
        let u = u_functional(&md, (lo, hi)).unwrap().u;
        let ratio = u / (sigma * (hi as f64).ln().sqrt());
        assert!(ratio <= 2f64.sqrt() + 1e-9 && ratio >= 1.0, "{lo},{hi}: {ratio}");
    }
}

#[test]
fn franklin_reconstruction_of_bridge_improves() {
    let md = periodic_bridge(1024);
    let ens = kl_simulate(&md, md.n_kept, 1, 3).unwrap();
    let path = GridFn::new(md.grid.clone(), ens.path(0).to_vec()).unwrap();
    let mut last = f64::INFINITY;
    for m in [8usize, 16, 32, 64] {
        let b = franklin_basis(m, &md.grid).unwrap();
        let z = ff_coeffs(&path, &b).unwrap();
        let r = b.reconstruct(&z, 0, m);
        let err = r.iter().zip(&path.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < last);
        last = err;
    }
}

#[test]
fn beta_bounds_and_triangle() {
    let md = periodic_bridge(512);
    let basis = franklin_basis(64, &md.grid).unwrap();
    let ens = kl_simulate(&md, md.n_kept, 600, 4).unwrap();
    let (n, k, m) = (4, 16, 64);
    let a = beta_estimate(&ens, &basis, n, k).unwrap();
    let b = beta_estimate(&ens, &basis, k, m).unwrap();
    let c = beta_estimate(&ens, &basis, n, m).unwrap();
    for e in [a, b, c] {
        assert!(e.mean >= 0.0 && e.mean <= PI / 2.0);
    }
    let se = (a.std_error.powi(2) + b.std_error.powi(2) + c.std_error.powi(2)).sqrt();
    assert!(c.mean <= a.mean + b.mean + 6.0 * se);
    let zero = PathEnsemble { paths: vec![0.0; ens.paths.len()], ..ens };
    assert_eq!(beta_estimate(&zero, &basis, 1, 64).unwrap().mean, 0.0);
}

#[test]
fn beta_profile_of_discontinuous_process_stays_up() {
    let grid = Grid::periodic(512).unwrap();
    let basis = franklin_basis(64, &grid).unwrap();
    let p = LacunarProcess::new(LacunarSpec::theta_family(0.75, 5, 256).unwrap()).unwrap();
    let ens = lacunar_simulate(&p, &grid, 300, 6).unwrap();
    let blocks: Vec<(usize, usize)> = (1..=5).map(|j| (1 << j, 2 << j)).collect();
    let betas = beta_profile(&ens, &basis, &blocks).unwrap();
    // Odd frequencies are orthogonal to the level-1 functions, so that block vanishes.
    assert!(betas[0].mean < 1e-12);
    assert!(betas[1..].iter().all(|b| b.mean >= 0.3), "{betas:?}");
}

#[test]
fn six_sampler_cross_validation() {
    for s in SequenceSampler::ALL {
        let mono = monotone_sup_criterion(s, 256, 300, 12, None).unwrap();
        let kp = kappa_profile(s, 8, 300, 12).unwrap();
        assert!(mono.monotone);
        assert_eq!(mono.verdict, kp.verdict, "{s}");
        let decays = mono.verdict == degapprox::franklin::DecayVerdict::Decays;
        assert_eq!(decays, s.tends_to_zero(), "{s}");
    }
}

#[test]
fn arctan_metric_triangle() {
    let n = 5000;
    let x: Vec<f64> = (0..n).map(|i| degapprox::rng::normal(1, 0, i)).collect();
    let y: Vec<f64> = (0..n).map(|i| degapprox::rng::normal(1, 1, i)).collect();
    let z: Vec<f64> = (0..n).map(|i| 2.0 * degapprox::rng::normal(1, 2, i)).collect();
    let xy = arctan_metric(&x, &y).unwrap().mean;
    let yz = arctan_metric(&y, &z).unwrap().mean;
    let xz = arctan_metric(&x, &z).unwrap().mean;
    assert!(xz <= xy + yz);
    assert_eq!(arctan_metric(&x, &y).unwrap().mean, arctan_metric(&y, &x).unwrap().mean);
}
