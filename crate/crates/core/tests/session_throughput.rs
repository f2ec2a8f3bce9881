use std::time::Instant;

use stealth_core::energy::ReflectivitySpec;
use stealth_core::optimize::{run_schedule, HyperParams, OptimizerState, Problem};
use stealth_core::session::{SessionHooks, SessionHub};
use stealth_core::shapes;

fn run_ms(with_idle_client: bool) -> f64 {
    let params = HyperParams {
        stage_iters: [4, 0, 0],
        n_gradient: 2,
        ..HyperParams::default()
    };
    let mesh = shapes::icosphere(2).normalize_scale().unwrap();
    let problem = Problem::new(mesh, ReflectivitySpec::stealth(), &params).unwrap();
    let mut state = OptimizerState::new(problem, params, 1).unwrap();
    let hub = SessionHub::new();
    // a client that never reads
    let _idle = with_idle_client.then(|| hub.subscribe());
    let mut hooks = SessionHooks::new(hub, &state, false);
    let start = Instant::now();
    run_schedule(&mut state, &mut hooks).unwrap();
    start.elapsed().as_secs_f64() * 1e3
}

#[test]
fn an_idle_client_does_not_slow_the_optimizer() {
    let (mut alone, mut watched) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..3 {
        alone = alone.min(run_ms(false));
        watched = watched.min(run_ms(true));
    }
    assert!(watched <= 1.05 * alone, "{watched:.1} ms with a client vs {alone:.1} ms without");
}
