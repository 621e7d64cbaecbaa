//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rsu_radar::correction::{correct_covariance, toeplitz_psd_project};
use rsu_radar::harness::{mean_by, rows_to_csv, run_congruence, run_experiment, ExperimentConfig, ResultRow, Strategy};
use rsu_radar::linalg::{frobenius, min_eigenvalue, CMatrix};
use rsu_radar::radar::{
    bias_gamma, radar_covariance, reference_rx, simplified_rx, ChirpConfig, EmitterTarget, MixerOffsets,
};
use rsu_radar::rng::rng_from;
use rsu_radar::spectra::{
    compute_aps, compute_aps_clamped, raw_aps, rpe, similarity, similarity_trace_form, steering_column,
};
use rsu_radar::CovarianceMatrix;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} [{}] {name}: {} ({:.1} s of {} s budget)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn cov(m: CMatrix) -> CovarianceMatrix {
    CovarianceMatrix::new(m, 0.0).unwrap()
}

fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

fn random_psd<R: Rng>(n: usize, rank: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(n, rank, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &a * a.adjoint()
}

fn outer(v: &rsu_radar::CVector, p: f64) -> CMatrix {
    v * v.adjoint() * Complex64::new(p, 0.0)
}

fn receiver_equivalence() -> Outcome {
    let mut rng = rng_from(0xC1);
    let mut worst = 0.0_f64;
    for scene in 0..50 {
        let n_r = if scene % 2 == 0 { 8 } else { 64 };
        let cfg = ChirpConfig { samples: 256, n_chirps: 3, ..ChirpConfig::default() };
        let n_targets = rng.random_range(1..=5);
        let targets: Vec<EmitterTarget> = (0..n_targets)
            .map(|_| EmitterTarget {
                alpha: Complex64::from_polar(rng.random_range(1e-4..1e-2), rng.random::<f64>() * 2.0 * PI),
                delay: rng.random_range(20e-9..1e-6),
                angle: rng.random_range(-1.2..1.2),
            })
            .collect();
        let offsets = MixerOffsets::draw(&cfg, &mut rng);
        let r_ref = radar_covariance(&reference_rx(&cfg, &targets, n_r, &mut rng).unwrap()).unwrap();
        let r_simp = radar_covariance(&simplified_rx(&cfg, &targets, n_r, &offsets, &mut rng).unwrap()).unwrap();
        let err = frobenius(&(r_ref.matrix() - r_simp.matrix())) / r_ref.frobenius();
        worst = worst.max(err);
    }
    Outcome { pass: worst <= 1e-9, detail: format!("max relative Frobenius error {worst:.2e} (tol 1e-9)") }
}

fn bias_law() -> Outcome {
    let (f_r, b_r, n_r) = (76e9, 1.2e9, 256);
    let n_grid = 16 * n_r;
    let tol = 2.0 / n_grid as f64;
    let gamma = bias_gamma(f_r, b_r);
    let cfg = ChirpConfig { start_hz: f_r, bandwidth_hz: b_r, n_chirps: 1, ..ChirpConfig::default() };
    let mut worst_raw = 0.0_f64;
    let mut worst_corr = 0.0_f64;
    let mut rng = rng_from(0xC2);
    for deg in (-50..=50).step_by(10) {
        let theta = (deg as f64).to_radians();
        let target = EmitterTarget { alpha: Complex64::new(1e-3, 0.0), delay: 200e-9, angle: theta };
        let raw = radar_covariance(&reference_rx(&cfg, &[target], n_r, &mut rng).unwrap()).unwrap();
        let peak_raw = compute_aps(&raw, n_grid).unwrap().peak_sin();
        worst_raw = worst_raw.max((peak_raw - gamma * theta.sin()).abs());
        let corrected = correct_covariance(&raw, 0.0, gamma).unwrap();
        let peak_corr = compute_aps_clamped(&corrected, n_grid).unwrap().peak_sin();
        worst_corr = worst_corr.max((peak_corr - theta.sin()).abs());
    }
    Outcome {
        pass: worst_raw <= tol && worst_corr <= tol && (gamma - 1.0 - 7.9e-3).abs() < 5e-5,
        detail: format!(
            "gamma-1 = {:.3e}; max |sin_hat - gamma sin| = {worst_raw:.2e}, corrected max |sin_hat - sin| = {worst_corr:.2e} (tol {tol:.2e})",
            gamma - 1.0
        ),
    }
}

fn random_toeplitz_psd<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let mut t = CMatrix::identity(n, n) * Complex64::new(rng.random::<f64>() * 0.1, 0.0);
    for _ in 0..rng.random_range(1..=6) {
        let a = steering_column(n, rng.random_range(-1.0..1.0));
        t += outer(&a, rng.random::<f64>());
    }
    t
}

fn projection_invariants() -> Outcome {
    let n = 16;
    let mut rng = rng_from(0xC3);
    let mats: Vec<CMatrix> = (0..200).map(|_| random_hermitian(n, &mut rng)).collect();
    let proj = |m: &CMatrix| toeplitz_psd_project(&cov(m.clone()), 0.0).unwrap().covariance.into_matrix();
    let images: Vec<CMatrix> = mats.iter().map(proj).collect();
    let (mut fixed, mut idem, mut toeplitz, mut psd, mut dual, mut comp, mut expand) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, f64::NEG_INFINITY);
    for (k, (a, p)) in mats.iter().zip(&images).enumerate() {
        let t = random_toeplitz_psd(n, &mut rng);
        fixed = fixed.max(frobenius(&(proj(&t) - &t)) / frobenius(&t));
        idem = idem.max(frobenius(&(proj(p) - p)));
        for q in 0..n - 1 {
            for c in 0..n - 1 {
                toeplitz = toeplitz.max((p[(q, c)] - p[(q + 1, c + 1)]).norm() / frobenius(p));
            }
        }
        psd = psd.max(-min_eigenvalue(p) / p.trace().re);
        // Toeplitz PSD matrices are the conic hull of steering outer
        // products, so the polar cone is { G : a(s)* G a(s) <= 0 for all s }.
        let g = a - p;
        let worst = raw_aps(&g, 1024).into_iter().fold(f64::NEG_INFINITY, f64::max);
        dual = dual.max(worst / frobenius(a));
        let inner: f64 = g.iter().zip(p.iter()).map(|(x, y)| (x.conj() * y).re).sum();
        comp = comp.max(inner.abs() / frobenius(a).powi(2));
        let b = &mats[(k + 1) % mats.len()];
        let pb = &images[(k + 1) % mats.len()];
        expand = expand.max(frobenius(&(p - pb)) - frobenius(&(a - b)));
        let near = a + random_hermitian(n, &mut rng) * Complex64::new(1e-2, 0.0);
        expand = expand.max(frobenius(&(p - proj(&near))) - frobenius(&(a - &near)));
    }
    let pass = fixed <= 1e-10 && idem <= 1e-8 && toeplitz <= 1e-8 && psd <= 1e-8 && dual <= 1e-8 && expand <= 1e-8;
    Outcome {
        pass,
        detail: format!(
            "fixed point {fixed:.1e} (tol 1e-10), idempotence {idem:.1e}, Toeplitz defect {toeplitz:.1e}, \
             negative eigenvalue {psd:.1e}, polar cone {dual:.1e}, max ||P(A)-P(B)|| - ||A-B|| {expand:.1e} (tol 1e-8); \
             complementarity {comp:.1e}"
        ),
    }
}

fn metric_equivalences() -> Outcome {
    let mut rng = rng_from(0xC4);
    let (n, n_grid) = (16, 64);
    let mut route_err = 0.0_f64;
    for _ in 0..100 {
        let r1 = cov(random_psd(n, rng.random_range(1..=n), &mut rng));
        let r2 = cov(random_psd(n, rng.random_range(1..=n), &mut rng));
        let l = rng.random_range(1..=4);
        let s = similarity(&compute_aps(&r1, n_grid).unwrap(), &compute_aps(&r2, n_grid).unwrap(), l).unwrap();
        let t = similarity_trace_form(&r1, &r2, l, n_grid).unwrap();
        route_err = route_err.max((s - t).abs());
    }
    let grid = rsu_radar::spectra::sin_grid(n);
    let mut grid_err = 0.0_f64;
    let on_grid = |rng: &mut rand_chacha::ChaCha8Rng| {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let p = rng.random_range(0.1..1.0);
        cov(outer(&steering_column(n, grid[i]), 1.0 + p) + outer(&steering_column(n, grid[j]), p))
    };
    for k in 0..100 {
        let (r1, r2) = (on_grid(&mut rng), on_grid(&mut rng));
        let l = 1 + k % 2;
        let s = similarity(&compute_aps(&r1, n).unwrap(), &compute_aps(&r2, n).unwrap(), l).unwrap();
        grid_err = grid_err.max((s - rpe(&r1, &r2, l).unwrap()).abs());
    }
    Outcome {
        pass: route_err <= 1e-12 && grid_err <= 1e-9,
        detail: format!("spectrum vs trace route {route_err:.1e} (tol 1e-12), on-grid S vs RPE {grid_err:.1e} (tol 1e-9)"),
    }
}

fn congruence() -> Outcome {
    let mut cfg = ExperimentConfig::desk();
    cfg.congruence.n_drops = 100;
    cfg.metric.n = vec![32, 64, 128];
    let rows = match run_congruence(&cfg) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: format!("run failed: {e}") },
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for &l in &cfg.metric.l {
        let mut gaps = Vec::new();
        for &n in &cfg.metric.n {
            let raw = mean_by(&rows, n, l, |r| r.s_raw).unwrap();
            let corr = mean_by(&rows, n, l, |r| r.s_corrected).unwrap();
            pass &= corr >= raw;
            gaps.push(corr - raw);
        }
        let grows = gaps.windows(2).all(|w| w[1] >= w[0]) && gaps[gaps.len() - 1] > gaps[0];
        pass &= grows;
        parts.push(format!(
            "L={l}: gap {}",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(" / ")
        ));
    }
    Outcome { pass, detail: format!("mean S_corrected - S_raw over N = 32/64/128; {}", parts.join("; ")) }
}

fn mean_rate<'a>(rows: impl Iterator<Item = &'a ResultRow>) -> Option<f64> {
    let v: Vec<f64> = rows.map(|r| r.rate_bps).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn radar_curve(rows: &[ResultRow], t_coh: f64, n_rsu: usize, drop_filter: impl Fn(&ResultRow) -> bool) -> Vec<f64> {
    (1..=n_rsu)
        .map(|m| {
            mean_rate(
                rows.iter().filter(|r| r.strategy == Strategy::Radar && r.t_coh == t_coh && r.n_beams == m && drop_filter(r)),
            )
            .unwrap_or(f64::NAN)
        })
        .collect()
}

fn rate_shape(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Outcome {
    let n = cfg.comm.n_rsu;
    let finite = (4 * n * cfg.comm.n_v) as f64;
    let exh = |t: f64| mean_rate(rows.iter().filter(|r| r.strategy == Strategy::Exhaustive && r.t_coh == t)).unwrap();
    let inf_curve = radar_curve(rows, f64::INFINITY, n, |_| true);
    let monotone = inf_curve.windows(2).all(|w| w[1] >= w[0]);
    let full_ratio = inf_curve[n - 1] / exh(f64::INFINITY);
    let fin_curve = radar_curve(rows, finite, n, |_| true);
    let (best_m, best) = fin_curve.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i + 1, v) } else { a });
    let exh_fin = exh(finite);
    Outcome {
        pass: monotone && full_ratio >= 0.99 && best > exh_fin,
        detail: format!(
            "T_coh=inf: non-decreasing in M = {monotone}, radar/exhaustive at M=N_RSU = {full_ratio:.4}; \
             T_coh={finite}: radar best {:.4} Gbit/s at M={best_m} vs exhaustive {:.4} Gbit/s",
            best / 1e9,
            exh_fin / 1e9
        ),
    }
}

fn nlos_ordering(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Outcome {
    let n = cfg.comm.n_rsu;
    let n_nlos = rows.iter().filter(|r| !r.los && r.strategy == Strategy::Exhaustive).count() / cfg.t_coh_values().len();
    if n_nlos == 0 {
        return Outcome { pass: false, detail: "no NLOS drops in the run".into() };
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for t in cfg.t_coh_values() {
        let radar = radar_curve(rows, t, n, |r| !r.los).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let loc = mean_rate(rows.iter().filter(|r| !r.los && r.strategy == Strategy::Location && r.t_coh == t)).unwrap();
        pass &= radar >= loc;
        parts.push(format!("T_coh={t}: radar best {:.4} vs location {:.4} Gbit/s", radar / 1e9, loc / 1e9));
    }
    Outcome { pass, detail: format!("{n_nlos} NLOS drops; {}", parts.join("; ")) }
}

fn main() {
    let mut all = true;
    all &= report(1, "receiver equivalence", Duration::from_secs(10), receiver_equivalence);
    all &= report(2, "angle bias law", Duration::from_secs(60), bias_law);
    all &= report(3, "projection invariants", Duration::from_secs(60), projection_invariants);
    all &= report(4, "metric equivalences", Duration::from_secs(30), metric_equivalences);
    all &= report(5, "correction improves congruence", Duration::from_secs(300), congruence);

    let cfg = ExperimentConfig::desk();
    let start = Instant::now();
    let first = run_experiment(&cfg);
    let second = run_experiment(&cfg);
    let desk_time = start.elapsed();
    let budget = Duration::from_secs(600);
    match (first, second) {
        (Ok(a), Ok(b)) => {
            let bundled = desk_time;
            let timed = |o: Outcome| move || Outcome { pass: o.pass && bundled <= budget, detail: o.detail };
            all &= report(6, "rate curve shape (desk)", budget, timed(rate_shape(&cfg, &a.rows)));
            all &= report(7, "NLOS ordering (desk)", budget, timed(nlos_ordering(&cfg, &a.rows)));
            let same = rows_to_csv(&a.rows) == rows_to_csv(&b.rows);
            all &= report(8, "determinism (desk)", budget, timed(Outcome {
                pass: same,
                detail: format!("CSV byte-identical across two runs = {same}; both runs took {:.1} s", desk_time.as_secs_f64()),
            }));
        }
        (a, b) => {
            for (id, name) in [(6, "rate curve shape (desk)"), (7, "NLOS ordering (desk)"), (8, "determinism (desk)")] {
                let msg = format!("desk run failed: {:?} / {:?}", a.as_ref().err(), b.as_ref().err());
                all &= report(id, name, budget, || Outcome { pass: false, detail: msg });
            }
        }
    }
    if !all {
        std::process::exit(1);
    }
}
