//! Classifies simulated CEV paths over a range of seeds and prints one line
//! per run: `cargo run --release --example synthetic_sweep -- <theta> [seeds] [key=value ...]`.

use bubblescope::pipeline::{bounded_curve, estimate_series, extrapolate, select_knots, verdict_for};
use bubblescope::sde_sim::{simulate, SimSpec};
use bubblescope::RunConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let theta: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let mut cfg = RunConfig::default();
    for kv in args {
        let (k, v) = kv.split_once('=').expect("overrides are key=value");
        cfg.set(k, v).expect("known config key");
    }
    for seed in 0..seeds {
        let spec = SimSpec { sigma0: 0.5, theta, s0: 1.0, steps: 50_000, horizon: 1.0, seed };
        let series = simulate(&spec).expect("valid spec");
        let outcome = estimate_series(&series, &cfg)
            .and_then(|est| {
                let knots = select_knots(&est, &cfg)?;
                let curve = bounded_curve(&knots, &cfg)?;
                let opt = extrapolate(&knots, &curve, &cfg)?;
                let v = verdict_for(&opt.model, &cfg)?;
                Ok((knots.len(), opt.m, v))
            });
        match outcome {
            Ok((k, m, v)) => println!(
                "seed {seed:>3} range [{:.3}, {:.3}] knots {k:>2} m {m:>7.3} alpha {:>6.3} {}",
                series.min(),
                series.max(),
                v.alpha,
                v.classification
            ),
            Err(e) => println!("seed {seed:>3} error: {e}"),
        }
    }
}
