//! Acceptance suite. Each test prints one `criterion N ...: PASS|FAIL` line
//! and fails when its criterion is not met.
//!
//! `cargo test --test acceptance -- --nocapture` shows the lines.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psadmm::detector::{iteration_bound, update_layer, update_x0, IterationBound, ValidationReport};
use psadmm::diagnostics::{certify, flop_estimate};
use psadmm::harness::config::{parse_config, DetectorKind};
use psadmm::harness::{find_preset, records_to_csv, run_experiment, BerRecord};
use psadmm::numerics::{factor_regularized, gram, spectrum_bounds_lenient, ComplexVector, SpectrumBounds};
use psadmm::signal::{
    bits_to_layers, decompose, hard_decision, noise_sigma, random_bits, rayleigh_channel, recompose, transmit,
};
use psadmm::{ChannelInstance, DetectorParams, InitMode, Modulation, PsAdmm};

fn report(n: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {n} ({name}): {} {detail}", if pass { "PASS" } else { "FAIL" });
}

struct SuiteCase {
    instance: ChannelInstance,
    params: DetectorParams,
    modulation: Modulation,
    bounds: SpectrumBounds,
}

/// 100 random instances with B in 4..=16, U in 2..=8 (U <= B), Q in {1, 2},
/// and parameters satisfying both convergence conditions:
/// `ρ = 1.5·√2·λ_max`, `α_q = 0.5·4^(q−1)·ρ`.
fn certificate_suite() -> Vec<SuiteCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    (0..100)
        .map(|_| {
            let b = rng.random_range(4..=16);
            let u = rng.random_range(2..=8usize.min(b));
            let modulation = Modulation::new(rng.random_range(1..=2)).unwrap();
            let h = rayleigh_channel(b, u, &mut rng).unwrap();
            let bits = random_bits(modulation.bits_per_symbol() * u, &mut rng);
            let x = recompose(&bits_to_layers(&bits, modulation, u).unwrap());
            let snr_db = rng.random_range(0.0..20.0);
            let instance = transmit(&h, &x, noise_sigma(snr_db, u, modulation), &mut rng).unwrap();
            let bounds = spectrum_bounds_lenient(&gram(&h), 1e-9, 20_000).unwrap();
            let rho = 1.5 * std::f64::consts::SQRT_2 * bounds.lambda_max;
            let alphas = (0..modulation.layers()).map(|q| 0.5 * 4f64.powi(q as i32) * rho).collect();
            SuiteCase {
                instance,
                params: DetectorParams::new(rho, alphas),
                modulation,
                bounds,
            }
        })
        .collect()
}

#[test]
fn criterion_1_certificates() {
    let start = Instant::now();
    let mut runs = 0;
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut nonconforming = 0;
    for (i, case) in certificate_suite().iter().enumerate() {
        let report = ValidationReport::evaluate(&case.params, &case.bounds);
        if !report.conforming() {
            nonconforming += 1;
        }
        let (detection, states) = PsAdmm::new(&case.instance, &case.params, case.modulation)
            .unwrap()
            .run_recording()
            .unwrap();
        let certs = certify(&detection.trace, &states, &case.instance, &case.params, &report);
        runs += 1;
        checked += certs.lemma1.checked() + certs.lemma2.checked() + certs.lemma3.checked();
        failures.extend(certs.failure_lines().into_iter().map(|l| format!("instance {i}: {l}")));
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && nonconforming == 0 && elapsed < Duration::from_secs(60);
    report(
        1,
        "certificate suite",
        pass,
        format!(
            "{runs} runs, {checked} inequality checks, {} failures, {nonconforming} non-conforming, {:.1}s",
            failures.len(),
            elapsed.as_secs_f64()
        ),
    );
    for f in failures.iter().take(10) {
        println!("  {f}");
    }
    assert!(pass);
}

#[test]
fn criterion_2_iteration_bound() {
    let eps = 1e-5;
    let cap = 20_000;
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut worst_ratio = 0.0f64;
    for (i, case) in certificate_suite().iter().enumerate() {
        let report = ValidationReport::evaluate(&case.params, &case.bounds);
        if !(report.c > 0.0) {
            continue;
        }
        let params = case.params.clone().with_max_iters(cap).with_residual_tol(eps);
        let detection = PsAdmm::new(&case.instance, &params, case.modulation).unwrap().run().unwrap();
        let trace = &detection.trace;
        let l1 = trace.records[0].lagrangian;
        let lstar = trace.records[trace.len() - 1].lagrangian;
        let IterationBound::Bound(bound) = iteration_bound(&report, l1, lstar, eps) else {
            unreachable!("C > 0")
        };
        checked += 1;
        match trace.first_crossing(eps) {
            Some(t) => {
                worst_ratio = worst_ratio.max(t as f64 / bound.max(f64::MIN_POSITIVE));
                if t as f64 > bound {
                    violations.push(format!("instance {i}: first crossing {t} > bound {bound:.3}"));
                }
            }
            None if bound < cap as f64 => {
                violations.push(format!("instance {i}: no crossing in {cap} iterations, bound {bound:.3}"))
            }
            None => {}
        }
    }
    let pass = violations.is_empty() && checked > 0;
    report(
        2,
        "iteration bound",
        pass,
        format!(
            "{checked} runs with C > 0, {} violations, max t_obs/bound {worst_ratio:.3e}",
            violations.len()
        ),
    );
    for v in &violations {
        println!("  {v}");
    }
    assert!(pass);
}

/// The augmented Lagrangian restricted to one real coordinate `t` of layer
/// `q` (single user). `a` is the matching coordinate of
/// `x_0 − Σ_{i≠q} 2^i x_i` and `y` of the dual; terms constant in `t` drop.
fn scalar_lagrangian(t: f64, a: f64, y: f64, weight: f64, alpha: f64, rho: f64) -> f64 {
    let gap = a - weight * t;
    -0.5 * alpha * t * t + gap * y + 0.5 * rho * gap * gap
}

fn grid_argmin(f: impl Fn(f64) -> f64) -> f64 {
    let steps = 200_000;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let t = -1.0 + 2.0 * i as f64 / steps as f64;
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}

#[test]
fn criterion_3_subproblem_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = |rng: &mut ChaCha8Rng, s: f64| Complex64::new(rng.random_range(-s..s), rng.random_range(-s..s));
    let mut worst_layer = 0.0f64;
    for _ in 0..1000 {
        let layers_n = rng.random_range(1..=3usize);
        let q = rng.random_range(0..layers_n);
        let rho = rng.random_range(0.5..50.0);
        let alphas: Vec<f64> = (0..layers_n)
            .map(|i| rng.random_range(0.0..0.99) * 4f64.powi(i as i32) * rho)
            .collect();
        let params = DetectorParams::new(rho, alphas);
        let layers: Vec<ComplexVector> = (0..layers_n).map(|_| vec![c(&mut rng, 1.0)].into()).collect();
        let x0 = [c(&mut rng, 4.0)];
        let y = [c(&mut rng, 20.0)];
        let got = update_layer(q, &layers, &x0, &y, &params)[0];
        let others: Complex64 = (0..layers_n)
            .filter(|&i| i != q)
            .map(|i| layers[i][0] * f64::from(1u32 << i))
            .sum();
        let a = x0[0] - others;
        let (w, al) = (f64::from(1u32 << q), params.alphas[q]);
        let re = grid_argmin(|t| scalar_lagrangian(t, a.re, y[0].re, w, al, rho));
        let im = grid_argmin(|t| scalar_lagrangian(t, a.im, y[0].im, w, al, rho));
        worst_layer = worst_layer.max((got.re - re).abs()).max((got.im - im).abs());
    }

    let mut worst_x0 = 0.0f64;
    for _ in 0..100 {
        let b = rng.random_range(1..=16);
        let u = rng.random_range(1..=b);
        let layers_n = rng.random_range(1..=3usize);
        let h = rayleigh_channel(b, u, &mut rng).unwrap();
        let r: Vec<Complex64> = (0..b).map(|_| c(&mut rng, 5.0)).collect();
        let rho = rng.random_range(0.1..100.0);
        let params = DetectorParams::new(rho, vec![0.0; layers_n]);
        let layers: Vec<ComplexVector> = (0..layers_n)
            .map(|_| (0..u).map(|_| c(&mut rng, 1.0)).collect::<Vec<_>>().into())
            .collect();
        let y: Vec<Complex64> = (0..u).map(|_| c(&mut rng, 10.0)).collect();
        let g = gram(&h);
        let matched = h.adjoint_mul_vec(&r);
        let x0 = update_x0(&layers, &y, &factor_regularized(&g, rho).unwrap(), &matched, &params).unwrap();
        // (G + ρI) x0 − (H^H r + ρ s − y), evaluated entrywise
        let s = recompose_oracle(&layers);
        for i in 0..u {
            let mut lhs = rho * x0[i];
            for j in 0..u {
                lhs += g[(i, j)] * x0[j];
            }
            let rhs = matched[i] + rho * s[i] - y[i];
            worst_x0 = worst_x0.max((lhs - rhs).norm());
        }
    }
    let pass = worst_layer <= 2e-5 && worst_x0 <= 1e-10;
    report(
        3,
        "subproblem exactness",
        pass,
        format!("max layer gap {worst_layer:.2e} (tol 2e-5), max x0 residual {worst_x0:.2e} (tol 1e-10)"),
    );
    assert!(pass);
}

fn recompose_oracle(layers: &[ComplexVector]) -> Vec<Complex64> {
    (0..layers[0].len())
        .map(|u| layers.iter().enumerate().map(|(q, l)| l[u] * f64::from(1u32 << q)).sum())
        .collect()
}

fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn find<'a>(records: &'a [BerRecord], detector: &str, snr: f64) -> &'a BerRecord {
    records
        .iter()
        .find(|r| r.detector == detector && r.snr_db == snr)
        .expect("record present")
}

#[test]
fn criterion_4_ml_oracle() {
    let start = Instant::now();
    let config = parse_config(
        "B = 8\nU = 2\nQ = 1\nsnr_db = [10]\ntrials = 500\nseed = 4\nrho = 40\nalpha = [20]\ndetectors = [\"psadmm\", \"ml\"]\n",
    )
    .unwrap();
    let records = run_experiment(&config, None).unwrap();
    let ps = find(&records, "psadmm", 10.0);
    let ml = find(&records, "ml", 10.0);
    // standard error of the difference of the two proportions
    let sigma = binomial_sigma(ml.ber, ml.bits_total).hypot(binomial_sigma(ps.ber, ps.bits_total));
    let elapsed = start.elapsed();
    let pass = ps.ber >= ml.ber - 3.0 * sigma && ps.ber <= 3.0 * ml.ber + 3.0 * sigma && elapsed < Duration::from_secs(120);
    report(
        4,
        "ML oracle sanity",
        pass,
        format!(
            "psadmm BER {} ({} errors), ml BER {} ({} errors), 3 sigma {:.3e}, {:.1}s",
            ps.ber,
            ps.bit_errors,
            ml.ber,
            ml.bit_errors,
            3.0 * sigma,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_degeneration() {
    let base = "B = 8\nU = 4\nQ = 2\nsnr_db = [6, 12, inf]\ntrials = 60\nseed = 55\nrho = 50\n";
    let ps = parse_config(&format!("{base}alpha = [0, 0]\ndetectors = [\"psadmm\"]\n")).unwrap();
    let bx = parse_config(&format!("{base}alpha = [3, 7]\ndetectors = [\"box_admm\"]\n")).unwrap();
    let ps_csv = records_to_csv(&run_experiment(&ps, Some(2)).unwrap());
    let bx_csv = records_to_csv(&run_experiment(&bx, Some(2)).unwrap());
    let normalized = bx_csv.replace("box_admm,", "psadmm,");
    let pass = ps_csv == normalized && ps_csv.lines().count() == 4;
    report(
        5,
        "degeneration identity",
        pass,
        format!("{} data rows compared, detector column normalized", ps_csv.lines().count() - 1),
    );
    assert!(pass);
}

/// One-sided two-proportion z statistic for `p_a < p_b`.
fn z_less(a: &BerRecord, b: &BerRecord) -> f64 {
    let (na, nb) = (a.bits_total as f64, b.bits_total as f64);
    let pooled = (a.bit_errors + b.bit_errors) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (b.ber - a.ber) / se
}

#[test]
fn criterion_6_trend_32x32() {
    let start = Instant::now();
    let config = parse_config(
        "B = 32\nU = 32\nQ = 1\nsnr_db = [8, 10, 12]\ntrials = 1000\nseed = 6\nrho = 120\nalpha = [80]\n\
         max_iters = 30\nresidual_tol = 1e-5\ndetectors = [\"psadmm\", \"box_admm\", \"mmse\"]\n",
    )
    .unwrap();
    let records = run_experiment(&config, None).unwrap();
    let elapsed = start.elapsed();
    for r in &records {
        println!("  {} {} dB: BER {}", r.detector, r.snr_db, r.ber);
    }
    let ps = find(&records, "psadmm", 12.0);
    let z_mmse = z_less(ps, find(&records, "mmse", 12.0));
    let z_box = z_less(ps, find(&records, "box_admm", 12.0));
    // 95% one-sided
    let pass = z_mmse >= 1.645 && z_box >= 1.645 && elapsed < Duration::from_secs(300);
    report(
        6,
        "32x32 trend at 12 dB",
        pass,
        format!(
            "z(psadmm < mmse) = {z_mmse:.2}, z(psadmm < box_admm) = {z_box:.2} (need >= 1.645), {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_decomposition_bijection() {
    let mut mismatches = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for q in 1..=3 {
        let m = Modulation::new(q).unwrap();
        let points = m.constellation();
        for &p in &points {
            if recompose(&decompose(&[p], m).unwrap())[0] != p {
                mismatches += 1;
            }
        }
        let span = m.max_level() + 2.0;
        for _ in 0..100_000 {
            let z = Complex64::new(rng.random_range(-span..span), rng.random_range(-span..span));
            let got = hard_decision(&[z], m)[0];
            let best = points
                .iter()
                .min_by(|a, b| (*a - z).norm_sqr().total_cmp(&(*b - z).norm_sqr()))
                .unwrap();
            if got != *best {
                mismatches += 1;
            }
        }
    }
    report(7, "decomposition bijection", mismatches == 0, format!("{mismatches} mismatches"));
    assert_eq!(mismatches, 0);
}

#[test]
fn criterion_8_cost_formula() {
    let value = flop_estimate(128, 16, 2, 30);
    // 128·16 + 128·256/2 + 16³/3 + 30·(256 + 32) in exact sixths
    let oracle = (6 * 128 * 16 + 3 * 128 * 256 + 2 * 4096 + 6 * 30 * 288 + 3) / 6;
    let mut linear = true;
    for (b, u, q) in [(128u64, 16u64, 2u64), (64, 64, 3), (8, 3, 1), (1, 1, 1)] {
        let per = u * u + q * u;
        for k in [0u64, 1, 7, 30, 1000] {
            linear &= flop_estimate(b, u, q, k) == flop_estimate(b, u, q, 0) + k * per;
        }
    }
    let pass = value == 28437 && oracle == 28437 && linear;
    report(8, "cost formula", pass, format!("flop_estimate(128,16,2,30) = {value}, K-linearity {linear}"));
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let config = parse_config(
        "B = 10\nU = 4\nQ = 2\nsnr_db = [4, 12]\ntrials = 80\nseed = 99\nrho = 60\nalpha = [10, 40]\n\
         detectors = [\"psadmm\", \"box_admm\", \"mmse\", \"zf\"]\n",
    )
    .unwrap();
    let one = records_to_csv(&run_experiment(&config, Some(1)).unwrap());
    let four = records_to_csv(&run_experiment(&config, Some(4)).unwrap());
    let again = records_to_csv(&run_experiment(&config, Some(3)).unwrap());
    let pass = one == four && one == again;
    report(9, "determinism", pass, format!("{} bytes, workers 1/3/4", one.len()));
    assert!(pass);
}

/// Full-scale 128×128 4-QAM run. Slow; run with `--ignored`.
#[test]
#[ignore]
fn full_scale_128x128() {
    let mut config = find_preset("fig1d").unwrap().config();
    config.detectors = vec![DetectorKind::Psadmm, DetectorKind::BoxAdmm, DetectorKind::Mmse];
    config.psadmm = Some(config.psadmm.unwrap().with_init(InitMode::Zeros));
    let records = run_experiment(&config, None).unwrap();
    print!("{}", records_to_csv(&records));
}
