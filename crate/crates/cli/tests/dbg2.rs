use levrec_core::datagen::{gen_planted_lowrank, sample_uniform};
use levrec_core::leverage::{compute_leverage, estimate_leverage, EstimationParams};
use levrec_core::linalg::{truncated_svd, SparseObservation};
use std::time::Instant;

#[test]
fn dbg_planted_estimation() {
    let (n1, n2, k) = (400usize, 240usize, 5usize);
    // Planted: three heavy rows, uniform rest; kappa = 1.5/1.1.
    let mut mu = vec![0.0; n1];
    mu[7] = 0.30;
    mu[133] = 0.25;
    mu[298] = 0.15;
    let rest = (k as f64 - 0.70) / (n1 as f64 - 3.0);
    for i in 0..n1 {
        if mu[i] == 0.0 { mu[i] = rest; }
    }
    let sigma: Vec<f64> = (0..k).map(|c| 100.0 * (1.5 - 0.1 * c as f64)).collect();
    for p in [0.7, 0.8, 0.85, 0.9] {
        let t0 = Instant::now();
        let mut ok = 0;
        let mut worst: f64 = 0.0;
        for seed in 0..20u64 {
            let l0 = gen_planted_lowrank(n1, n2, &sigma, &mu, seed).unwrap();
            let omega = sample_uniform(n1, n2, p, seed ^ 0xabc).unwrap();
            let obs = SparseObservation::from_mask(&l0, &omega).unwrap();
            let mut params = EstimationParams::new(k, 10.0);
            params.seed = seed;
            let est = estimate_leverage(&obs, &params).unwrap();
            let exact = compute_leverage(&truncated_svd(&l0, k).unwrap(), k, false).unwrap();
            let err = est.scores().iter().zip(exact.scores()).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            worst = worst.max(err);
            if err <= 0.05 { ok += 1; }
        }
        eprintln!("p={p}: ok={ok}/20 worst={worst:.4} elapsed={:?}", t0.elapsed());
    }
}
