use nalgebra::DVector;

use dyadnet::array::ArrayStructure;
use dyadnet::estimators::SeKind;
use dyadnet::exec::Execution;
use dyadnet::fit::{fit, FittedParams};
use dyadnet::gee::{gee_fit, GeeConfig, WorkingParams};
use dyadnet::simulation::{gravity_panel_fixture, run_coverage, ErrorModel, SimDesign};

#[test]
fn gravity_panel_fits_every_structure() {
    let fx = gravity_panel_fixture(10, 3, 11).unwrap();
    let ds = &fx.dataset;
    let slots = [
        (ArrayStructure::FullExch, 10),
        (ArrayStructure::Stationary, 15),
        (ArrayStructure::Unrestricted, 30),
        (ArrayStructure::LayerIndependent, 5),
    ];
    let mut betas = Vec::new();
    for (structure, expected) in slots {
        let r = fit(ds, SeKind::Exch, structure).unwrap();
        let Some(FittedParams::Array(p)) = &r.params else {
            panic!("array parameters expected")
        };
        assert_eq!(p.distinct_slot_count(), expected);
        assert!(r.standard_errors().iter().all(|s| s.is_finite() && *s > 0.0));
        betas.push(r.beta_hat);
    }
    assert!(betas.windows(2).all(|w| w[0] == w[1]));
    // the fixture's signal is strong enough to recover the slopes' signs
    let truth = DVector::from_vec(fx.beta_true.clone());
    for k in 1..truth.len() {
        assert_eq!(betas[0][k].signum(), truth[k].signum(), "coefficient {k}");
    }
}

#[test]
fn gee_on_panel_converges_and_tracks_array_params() {
    let fx = gravity_panel_fixture(8, 2, 12).unwrap();
    let cfg = GeeConfig::for_dataset(&fx.dataset);
    let r = gee_fit(&fx.dataset, &cfg).unwrap();
    assert!(r.converged);
    assert!(matches!(r.param_trajectory.last(), Some(WorkingParams::Array(_))));
    let ols = fit(&fx.dataset, SeKind::Exch, ArrayStructure::FullExch).unwrap();
    assert!((&r.beta_hat - &ols.beta_hat).amax() < 0.5);
}

#[test]
fn coverage_report_is_complete_and_mode_independent() {
    let mut d = SimDesign::new(10, ErrorModel::NonExch, 5);
    d.n_design_draws = 3;
    d.n_error_reps = 30;
    let par = run_coverage(&d, Execution::Parallel).unwrap();
    let seq = run_coverage(&d, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
    assert_eq!(par.cells.len(), 12);
    assert_eq!(par.mc_true_se.len(), 3);
    for c in &par.cells {
        assert_eq!(c.coverage.len(), 3);
        assert!(c.coverage_q10 <= c.median_coverage && c.median_coverage <= c.coverage_q90);
    }
}
