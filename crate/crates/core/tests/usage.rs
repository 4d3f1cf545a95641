use svrhmc_core::model::synthetic_quadratic;
use svrhmc_core::samplers::{run_chain, IterateFn, KineticState, SamplerConfig, SamplerKind};

#[test]
fn run_and_collect_a_path() -> Result<(), svrhmc_core::Error> {
    let (potential, _target) = synthetic_quadratic(50, 2, 0)?;
    let config = SamplerConfig::theorem_defaults(0.1, &potential, 1_000)?;
    let mut path = Vec::new();
    let outcome = run_chain(
        &potential,
        SamplerKind::SvrHmc,
        &config,
        KineticState::zeros(2),
        &mut IterateFn(|_k: usize, x: &[f64]| path.push(x.to_vec())),
    )?;
    assert_eq!(path.len(), 1_000);
    assert_eq!(path.last().unwrap(), &outcome.state.x);
    assert_eq!(outcome.grad_evals, 20 * 50 + 2 * 1_000);
    Ok(())
}
