//! Temporary calibration probes (deleted before finalizing).

use levrec_cli::harness::*;
use levrec_core::datagen::{gen_coherent_lowrank, sample_uniform, GenSpec};
use levrec_core::leverage::{compute_leverage, estimate_leverage, EstimationParams};
use levrec_core::linalg::{truncated_svd, SparseObservation};
use std::time::Instant;

#[test]
#[ignore]
fn calibrate_estimation_density() {
    // criterion 5: find p where max additive error <= 0.05 on >= 90% of 20 seeds
    let (n1, n2, k) = (400usize, 240usize, 5usize);
    for p in [0.3, 0.5, 0.7] {
        let mut ok = 0;
        let mut worst: f64 = 0.0;
        let t0 = Instant::now();
        for seed in 0..20u64 {
            let l0 = gen_coherent_lowrank(&GenSpec::new(n1, n2, k, seed)).unwrap();
            let omega = sample_uniform(n1, n2, p, seed ^ 0xabc).unwrap();
            let obs = SparseObservation::from_mask(&l0, &omega).unwrap();
            let mut params = EstimationParams::new(k, 10.0);
            params.seed = seed;
            let est = estimate_leverage(&obs, &params).unwrap();
            let exact = compute_leverage(&truncated_svd(&l0, k).unwrap(), k, false).unwrap();
            let err = est
                .scores()
                .iter()
                .zip(exact.scores())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            worst = worst.max(err);
            if err <= 0.05 {
                ok += 1;
            }
        }
        eprintln!("p={p}: ok={ok}/20 worst={worst:.4} elapsed={:?}", t0.elapsed());
    }
}

#[test]
#[ignore]
fn calibrate_weighting_trace() {
    let t0 = Instant::now();
    let params = WeightingTraceParams::default();
    let opts = HarnessOptions::new(std::env::temp_dir().join("cal_fig3"), vec![0, 1]);
    let cells = run_weighting_trace(&params, &opts).unwrap();
    for c in &cells {
        eprintln!(
            "p={} seed={} steps={} l1 {:.4}->{:.4} coh {:.2}->{:.2}",
            c.p, c.seed, c.steps, c.initial_l1, c.final_l1, c.initial_coherence, c.final_coherence
        );
    }
    eprintln!("fig3 2 seeds elapsed={:?}", t0.elapsed());
}

#[test]
#[ignore]
fn calibrate_completion_error() {
    let t0 = Instant::now();
    let params = CompletionErrorParams::default();
    let opts = HarnessOptions::new(std::env::temp_dir().join("cal_fig7"), vec![0]);
    let cells = run_completion_error(&params, &opts).unwrap();
    for method in ["unweighted", "type1", "type2"] {
        let best = best_errors_by_seed(&cells, method, &[0]);
        eprintln!("{method}: best={:?}", best);
        for c in cells.iter().filter(|c| c.method == method) {
            eprintln!("  lam_mult={:.0e} err={:.4}", c.lambda_mult, c.error);
        }
    }
    eprintln!("fig7 1 seed elapsed={:?}", t0.elapsed());
}

#[test]
#[ignore]
fn calibrate_rounds() {
    let t0 = Instant::now();
    let params = RoundsParams::default();
    let opts = HarnessOptions::new(std::env::temp_dir().join("cal_fig4"), vec![0, 1]);
    let cells = run_rounds(&params, &opts).unwrap();
    for c in &cells {
        eprintln!(
            "seed={} round={} true_coh={:.3} true_l1={:.4} rec_coh={:.3} err={:.4}",
            c.seed, c.round, c.true_coherence, c.true_l1, c.recovered_coherence, c.error
        );
    }
    eprintln!("fig4 2 seeds elapsed={:?}", t0.elapsed());
}

#[test]
#[ignore]
fn calibrate_rpca_error() {
    let t0 = Instant::now();
    let params = RpcaErrorParams::default();
    let opts = HarnessOptions::new(std::env::temp_dir().join("cal_fig8"), vec![0, 1]);
    let cells = run_rpca_error(&params, &opts).unwrap();
    for c in &cells {
        eprintln!(
            "p={} seed={} {} err={:.4} conv={}",
            c.p, c.seed, c.method, c.error, c.converged
        );
    }
    eprintln!("fig8 2 seeds elapsed={:?}", t0.elapsed());
}

#[test]
#[ignore]
fn calibrate_loss_compare() {
    let t0 = Instant::now();
    let params = LossCompareParams::default();
    let opts = HarnessOptions::new(std::env::temp_dir().join("cal_appb"), vec![0, 1, 2]);
    let cells = run_loss_compare(&params, &opts).unwrap();
    for c in &cells {
        eprintln!(
            "seed={} {} steps={} l1 {:.4}->{:.4} half@{}",
            c.seed,
            c.variant,
            c.steps,
            c.initial_l1,
            c.final_l1,
            if c.steps_to_half_l1 == usize::MAX { "never".into() } else { c.steps_to_half_l1.to_string() }
        );
    }
    eprintln!("appB 3 seeds elapsed={:?}", t0.elapsed());
}
