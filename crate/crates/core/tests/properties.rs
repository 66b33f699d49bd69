use proptest::prelude::*;
use std::f64::consts::PI;

use degapprox::diag::{classify_series, lemma61_check};
use degapprox::franklin::{ff_coeffs, franklin_basis, kappa_gamma, SeqMode, SequenceSampler};
use degapprox::grid::{Grid, GridFn};
use degapprox::kernel::GridKernel;
use degapprox::lacunar::LacunarSpec;
use degapprox::lacunar_sup::{LacunarMaximizer, DEFAULT_MIN_STATES};
use degapprox::mercer::{nystrom_decompose, operator_svd, svd_truncation, tail_errors, DEFAULT_DROP_TOL};
use degapprox::modulus::modulus_of_continuity;
use degapprox::trig::{best_error, vp_sum, vp_sum_direct, ApproxTarget, BestErrorMode, Spectrum2d, TrigPolynomial};

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// `Σ_k w_k cos(k(t - s)) + c_k cos(kt) cos(ks)`: PSD for non-negative weights.
fn psd_kernel(g: &Grid, w: &[f64], c: &[f64]) -> GridKernel {
    GridKernel::from_fn(g, |t, s| {
        w.iter()
            .zip(c)
            .enumerate()
            .map(|(k, (a, b))| {
                let k = k as f64;
                a * (k * (t - s)).cos() + b * (k * t).cos() * (k * s).cos()
            })
            .sum()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn nystrom_order_orthonormality_and_trace(
        w in prop::collection::vec(0.0f64..2.0, 1..6),
        c in prop::collection::vec(0.0f64..2.0, 6),
    ) {
        let g = Grid::periodic(64).unwrap();
        let gk = psd_kernel(&g, &w, &c[..w.len()]);
        let md = nystrom_decompose(&gk, DEFAULT_DROP_TOL).unwrap();
        prop_assert!(md.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
        let gram = md.eigenfunctions.transpose() * &md.eigenfunctions * g.weight();
        for i in 0..md.n_kept {
            for j in 0..md.n_kept {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - want).abs() < 1e-9);
            }
        }
        let total: f64 = md.eigenvalues.iter().sum::<f64>() + md.trace_residual;
        prop_assert!((total - gk.trace()).abs() <= 1e-10 * gk.trace().abs().max(1e-300));
        let full = (md.reconstruct(md.n_kept) - &gk.values).amax();
        prop_assert!(full <= 1e-9 * gk.sup().max(1e-300));
        let errs: Vec<f64> = (0..=md.n_kept).map(|n| tail_errors(&md, n).unwrap().err_l2).collect();
        prop_assert!(errs.windows(2).all(|p| p[1] <= p[0] + 1e-15));
    }

    #[test]
    fn svd_rank_2n_plus_1_beats_best_trig(
        w in prop::collection::vec(-1.0f64..1.0, 25),
    ) {
        // Random trigonometric kernel Σ w_kl e_k(t) e_l(s) with real basis functions of degree ≤ 4.
        let basis = |k: usize, t: f64| match k {
            0 => 1.0,
            k if k % 2 == 1 => (((k + 1) / 2) as f64 * t).cos(),
            k => ((k / 2) as f64 * t).sin(),
        };
        let g = Grid::periodic(64).unwrap();
        let gk = GridKernel::from_fn(&g, |t, s| {
            (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).map(|(i, j)| w[i * 5 + j] * basis(i, t) * basis(j, s)).sum()
        }).unwrap();
        let svd = operator_svd(&gk).unwrap();
        let sp = Spectrum2d::new(&gk).unwrap();
        let norm = gk.values.norm() * g.weight();
        for n in 1..=3usize {
            let e = sp.l2_tail(n, n);
            let d = svd_truncation(&gk, &svd, 2 * n + 1, 2 * n + 1).1.err_l2;
            prop_assert!(d <= e + 1e-9 * norm.max(e));
        }
    }

    #[test]
    fn vp_multiplier_equals_convolution(seed in 0u64..10_000, n in 4usize..15) {
        let g = Grid::periodic(64).unwrap();
        let f = GridFn::new(g.clone(), degapprox::rng::normals(seed, 0, 0, 64)).unwrap();
        let a = vp_sum(&f, n).unwrap().sample(&g).unwrap();
        let b = vp_sum_direct(&f, n).unwrap();
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-10);
    }

    #[test]
    fn vp_reproduces_low_degree(
        cos in prop::collection::vec(-1.0f64..1.0, 1..7),
        n in 12usize..15,
    ) {
        let g = Grid::periodic(128).unwrap();
        let p = TrigPolynomial::from_cos_sin(&cos, &cos);
        let f = p.sample(&g).unwrap();
        let v = vp_sum(&f, n).unwrap().sample(&g).unwrap();
        let diff = f.values.iter().zip(&v.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-10 * f.sup_norm().max(1.0));
    }

    #[test]
    fn l2_best_error_monotone(seed in 0u64..10_000) {
        let g = Grid::periodic(64).unwrap();
        let f = GridFn::new(g.clone(), degapprox::rng::normals(seed, 1, 0, 64)).unwrap();
        let e: Vec<f64> = (0..=32).map(|n| best_error(ApproxTarget::Function(&f), (n, 0), BestErrorMode::L2_1d).unwrap()).collect();
        prop_assert!(e.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        prop_assert!(e[32] < 1e-12);
    }

    #[test]
    fn modulus_monotone_and_subadditive(seed in 0u64..10_000, a in 1usize..20, b in 1usize..20) {
        let g = Grid::periodic(128).unwrap();
        let f = GridFn::new(g.clone(), degapprox::rng::normals(seed, 2, 0, 128)).unwrap();
        let h = g.weight();
        let (da, db) = (a as f64 * h, b as f64 * h);
        let wa = modulus_of_continuity(&f, da).unwrap();
        let wb = modulus_of_continuity(&f, db).unwrap();
        let wab = modulus_of_continuity(&f, da + db).unwrap();
        let ordered = if a <= b { wa <= wb } else { wb <= wa };
        prop_assert!(ordered);
        prop_assert!(wab <= wa + wb + 1e-12);
    }

    #[test]
    fn lacunar_tail_and_nu_monotone(theta in 0.6f64..3.0, k in 1usize..30) {
        let l = LacunarSpec::theta_family(theta, 5, 30).unwrap();
        prop_assert!(l.tail_sum_sq(k) <= l.tail_sum_sq(k - 1));
        prop_assert!(l.tail_sum(k) <= l.tail_sum(k - 1));
        let a = num_bigint::BigUint::from(5u64.pow(k.min(20) as u32));
        let b = &a * 3u32;
        prop_assert!(l.nu(&a) <= l.nu(&b));
    }

    #[test]
    fn lacunar_sup_bracketed(c in prop::collection::vec(0.01f64..1.0, 1..8)) {
        let m = LacunarMaximizer::new(5, DEFAULT_MIN_STATES).unwrap();
        let r = m.max(&c);
        let total: f64 = c.iter().sum();
        prop_assert!(r.value <= total + 1e-12);
        prop_assert!(r.value + r.gap_bound >= total - 1e-12);
    }

    #[test]
    fn classifier_scale_invariant(base in 0.1f64..0.95, scale in 1e-3f64..1e3, k in 8usize..40) {
        let terms: Vec<f64> = (0..k).map(|i| base.powi(i as i32)).collect();
        let scaled: Vec<f64> = terms.iter().map(|t| t * scale).collect();
        prop_assert_eq!(classify_series(&terms).0, classify_series(&scaled).0);
    }

    #[test]
    fn lemma61_absolute_variant(cos in prop::collection::vec(-1.0f64..1.0, 2..10), sin in prop::collection::vec(-1.0f64..1.0, 2..10)) {
        let p = TrigPolynomial::from_cos_sin(&cos, &sin);
        prop_assume!(p.degree >= 1 && !p.is_zero());
        let r = lemma61_check(&p).unwrap();
        prop_assert!(r.abs_holds);
    }

    #[test]
    fn franklin_coefficients_linear(seed in 0u64..10_000, a in -3.0f64..3.0) {
        let g = Grid::periodic(256).unwrap();
        let b = franklin_basis(16, &g).unwrap();
        let x = GridFn::new(g.clone(), degapprox::rng::normals(seed, 3, 0, 256)).unwrap();
        let y = GridFn::new(g.clone(), degapprox::rng::normals(seed, 4, 0, 256)).unwrap();
        let s = GridFn::new(g.clone(), x.values.iter().zip(&y.values).map(|(p, q)| a * p + q).collect()).unwrap();
        let (zx, zy, zs) = (ff_coeffs(&x, &b).unwrap(), ff_coeffs(&y, &b).unwrap(), ff_coeffs(&s, &b).unwrap());
        for k in 0..16 {
            prop_assert!((zs[k] - (a * zx[k] + zy[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn kappa_gamma_in_range(idx in 0usize..6, n in 1usize..50, len in 1usize..50, seed in 0u64..1000) {
        let s = SequenceSampler::ALL[idx];
        for mode in [SeqMode::Kappa, SeqMode::Gamma] {
            let e = kappa_gamma(s, n, n + len, 100, mode, seed).unwrap();
            prop_assert!(e.mean >= 0.0 && e.mean <= PI / 2.0);
        }
    }

    #[test]
    fn normals_are_counter_addressable(seed in any::<u64>(), stream in any::<u64>(), off in 0u64..1000) {
        let block = degapprox::rng::normals(seed, stream, off, 8);
        for (i, z) in block.iter().enumerate() {
            prop_assert_eq!(*z, degapprox::rng::normal(seed, stream, off + i as u64));
        }
    }
}
