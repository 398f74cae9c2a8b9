#![allow(dead_code)]

use chemotaxis::kernels::{KernelSpec, Redistribution, Response, TumblingKernel};
use chemotaxis::particles::{Dynamics, Particle, ParticleEnsemble, TumbleEvent};
use chemotaxis::signal::{SignalFamily, SignalSpec};
use chemotaxis::velocity::VelocitySet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

/// 1% critical value of the one-sample Kolmogorov–Smirnov statistic, times √n.
pub const KS_CRITICAL_1PCT: f64 = 1.6276;

pub fn kernel(response: Response) -> TumblingKernel {
    let spec = KernelSpec::new(response, 1.0, Redistribution::UniformOnV).unwrap();
    TumblingKernel::new(spec, VelocitySet::line(8, 1.0).unwrap()).unwrap()
}

pub fn constant_signal() -> SignalSpec {
    SignalSpec::new(SignalFamily::Constant { value: 1.0 }, 1, 20.0).unwrap()
}

/// Particles at `x = 10` with a fixed internal state and independent candidate clocks at the
/// thinning majorant `majorant`.
pub fn frozen(count: usize, m: f64, seed: u64, eps: f64, majorant: f64) -> ParticleEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let particles = (0..count)
        .map(|i| Particle {
            x: [10.0, 0.0],
            v: (i % 8) as u32,
            m,
            next_candidate: rng.sample::<f64, _>(Exp1) / majorant,
        })
        .collect();
    ParticleEnsemble::from_particles(particles, 1, eps, 0.0, seed).unwrap()
}

fn inter_tumble_times(events: &[TumbleEvent], horizon: f64, window: f64) -> Vec<f64> {
    let mut gaps = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for e in events {
        let start = match last {
            Some((p, t)) if p == e.particle => t,
            _ => 0.0,
        };
        // only gaps that started early enough to be observed in full are unbiased
        if start <= horizon - window {
            gaps.push(e.time - start);
        }
        last = Some((e.particle, e.time));
    }
    gaps
}

/// KS statistic of Flat-kernel inter-tumble times against Exp(λ₀ = 1), with the sample size.
pub fn flat_inter_tumble_ks(particles: usize, seed: u64) -> (f64, usize) {
    let horizon = 40.0;
    let mut ens = frozen(particles, 1.0, seed, 0.1, 1.0);
    let mut events = Vec::new();
    ens.evolve(horizon, &constant_signal(), &kernel(Response::Flat), Dynamics::default(), Some(&mut events))
        .unwrap();
    let mut gaps = inter_tumble_times(&events, horizon, 25.0);
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let f = 1.0 - (-g).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    (d, gaps.len())
}
