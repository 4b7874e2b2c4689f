use std::f64::consts::{PI, TAU};

use detbound::anomaly::{anomaly_general, anomaly_general_with_gradient, anomaly_radial, anomaly_radial_with_gradient};
use detbound::bounds::{lemma3_calibration, lemma3_probe_shapes, lemma3_report, mt_deficit};
use detbound::geometry::{BundleDegree, GridConfig, MeanZero, SphereField};
use detbound::optimizer::{profile_family_on, search_sup, SearchConfig, SearchStatus};
use detbound::rearrangement::{monotone_envelope, HalfLineFunction};
use detbound::spectral::{circle_eig_check, monodromy_eigenvalues, CircleMetric};

fn field(a: f64, b: f64) -> SphereField {
    let grid = GridConfig::default().t_grid().unwrap();
    SphereField::from_fn(grid, 64, |t, th| {
        let x = (t / 2.0).tanh();
        let s = 1.0 / (t / 2.0).cosh();
        a * x + b * s * th.cos() + 0.3 * s * s * (2.0 * th).sin()
    })
    .unwrap()
}

#[test]
fn degree_zero_anomaly_is_onofri_deficit_minus_energy() {
    for (a, b) in [(0.5, 0.2), (1.5, -0.7), (-2.0, 1.0)] {
        let phi = field(a, b);
        let lhs = anomaly_general(&phi, BundleDegree::new(0)).unwrap().total;
        let rhs = mt_deficit(&phi).unwrap() - phi.dirichlet_integral() / (16.0 * PI);
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        assert!(lhs <= 0.0);
    }
}

#[test]
fn lifted_gradient_folds_to_radial_gradient() {
    let grid = GridConfig::default().t_grid().unwrap();
    let f = profile_family_on(grid, "fourier", &[17.0, 0.8]).unwrap();
    let nt = 16;
    for n in [0, 2, -3] {
        let n = BundleDegree::new(n);
        let (r, gr) = anomaly_radial_with_gradient(&f, n).unwrap();
        let (g, gg) = anomaly_general_with_gradient(&f.lift(nt), n).unwrap();
        assert!((r.total - g.total).abs() < 1e-10);
        let folded: Vec<f64> = gg.total().chunks(nt).map(|row| row.iter().sum()).collect();
        for (a, b) in gr.total().iter().zip(&folded) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn radial_sup_for_degree_one_is_stable_under_refinement() {
    let run = |t_nodes: usize| {
        let cfg = SearchConfig {
            n: 1,
            restarts: 20,
            seed: 3,
            grid: GridConfig { t_nodes, ..GridConfig::default() },
            ..SearchConfig::default()
        };
        let out = search_sup(&cfg).unwrap();
        assert!(out.traces.iter().all(|t| t.status == SearchStatus::Plateaued));
        out.best_value()
    };
    let (coarse, fine) = (run(512), run(1024));
    assert!(coarse.is_finite() && fine.is_finite());
    assert!((coarse - fine).abs() < 1e-2, "{coarse} vs {fine}");
}

#[test]
fn best_iterate_is_mean_zero_and_reproduces_its_value() {
    let out = search_sup(&SearchConfig { n: 2, restarts: 2, seed: 5, ..SearchConfig::default() }).unwrap();
    let best = out.best_trace();
    let detbound::optimizer::SearchIterate::Radial(f) = &best.best else { panic!("radial search") };
    assert!(f.mean().abs() < 1e-12);
    let value = anomaly_radial(f, BundleDegree::new(2)).unwrap().total;
    assert_eq!(value, best.best_value);
}

#[test]
fn envelope_report_stays_below_probe_calibration() {
    let shapes = lemma3_probe_shapes(40, 1, 40.0, 1025).unwrap();
    let ladder: Vec<f64> = (0..13).map(|k| 0.25 * 2f64.powf(k as f64 / 2.0)).collect();
    let c = lemma3_calibration(&shapes, 3, &ladder).unwrap();
    let f = HalfLineFunction::from_fn(HalfLineFunction::uniform_grid(40.0, 1025), |t| {
        0.2 + 1.5 * (1.0 - (-0.8 * t).exp()) + 0.1 * (-(t - 3.0).powi(2)).exp()
    })
    .unwrap();
    let env = monotone_envelope(&f).unwrap();
    let report = lemma3_report(&env.u, 3, Some(c)).unwrap();
    assert!(report.x.is_finite());
    assert!(report.slack.unwrap() >= -0.05 * c.abs().max(1.0), "{report:?}");
}

#[test]
fn finite_volume_and_monodromy_spectra_agree() {
    let phi = CircleMetric::from_fn(512, |x| 0.6 * (TAU * x).sin() + 0.2 * (2.0 * TAU * x).cos()).unwrap();
    let fv = circle_eig_check(&phi, 6).unwrap();
    let exact = monodromy_eigenvalues(&phi, fv[5] * 1.05).unwrap();
    assert!(exact.len() >= 6);
    for (a, b) in fv.iter().zip(&exact) {
        assert!((a - b).abs() <= 1e-3 * b.abs().max(1.0), "{a} vs {b}");
    }
}
