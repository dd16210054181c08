use embedopt::config::{bundled, Overrides, ScenarioFile, BUNDLED_NAMES};
use embedopt::control::Variant;
use embedopt::costs::CostSet;
use embedopt::plant::{vdp_preset, Exosystem};
use embedopt::sim::{metrics, pe_monitor, run, Trajectory};
use embedopt::Error;

fn load(name: &str, o: Overrides) -> ScenarioFile {
    let mut f = ScenarioFile::parse(bundled(name).unwrap()).unwrap();
    f.apply(&o);
    f
}

#[test]
fn every_bundled_file_parses() {
    for name in BUNDLED_NAMES {
        ScenarioFile::parse(bundled(name).unwrap()).unwrap();
    }
    assert!(bundled("nope").is_none());
}

#[test]
fn paper_file_matches_hand_built_agents() {
    let sc = load("paper_vdp", Overrides::default()).build().unwrap();
    let reference = vdp_preset(1.0, 1.0, &Exosystem::paper([1.0, 0.0])).unwrap();
    for a in &sc.agents {
        assert_eq!(a.model.true_theta(), reference.true_theta());
        assert_eq!(a.model.basis().names(), reference.basis().names());
        assert_eq!(a.initial.theta_hat, vec![0.0; 4]);
        assert_eq!(a.initial.r, a.initial.x[0]);
    }
    let y_file = sc.y_star().unwrap();
    let y_lib = CostSet::paper()
        .minimize_global((-100.0, 100.0), 1e-10)
        .unwrap();
    assert!((y_file - y_lib).abs() < 1e-9);
    assert_eq!(sc.topology.laplacian().as_matrix()[(0, 0)], 2.0);
}

#[test]
fn disconnected_file_names_connectivity() {
    let err = load("disconnected_graph", Overrides::default())
        .build()
        .unwrap_err();
    assert!(matches!(err, Error::Disconnected));
    assert!(err.to_string().contains("not connected"));
    assert!(err.is_validation());
}

#[test]
fn average_consensus_reaches_the_mean() {
    let sc = load("average_consensus", Overrides::default())
        .build()
        .unwrap();
    let traj = run(&sc).unwrap();
    let m = metrics(&traj, 0.05);
    assert!((m.y_star - 2.5).abs() < 1e-9);
    assert!(m.max_final_gap < 0.05, "{m:?}");
    assert!(m.lambda_sum_drift < 1e-6);
}

#[test]
fn excited_parameters_converge_given_time() {
    // Near the optimum the sinusoid estimates move on a ~80 s time scale at
    // these gains, so give the loop 300 s.
    let sc = load(
        "paper_vdp",
        Overrides {
            t_end: Some(300.0),
            ..Overrides::default()
        },
    )
    .build()
    .unwrap();
    let traj = run(&sc).unwrap();
    let last = traj.len() - 1;
    let pe = pe_monitor(&traj, &sc).unwrap();
    for (a, p) in traj.agents.iter().zip(&pe.agents) {
        assert!(p.bounded);
        for j in 0..4 {
            if p.component_excited[j] {
                let err = (a.theta_hat[last][j] - a.true_theta[j]).abs();
                assert!(err < 0.05, "component {} error {err}", j + 1);
            }
        }
        assert!(!p.component_excited[1]);
        assert!(p.component_excited[0] && p.component_excited[2] && p.component_excited[3]);
    }
}

#[test]
fn runs_are_bitwise_deterministic() {
    let sc = load(
        "paper_vdp",
        Overrides {
            variant: Some(Variant::SigmaMod),
            t_end: Some(3.0),
            ..Overrides::default()
        },
    )
    .build()
    .unwrap();
    let a = run(&sc).unwrap();
    let b = run(&sc).unwrap();
    assert_eq!(a, b);

    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    assert_eq!(Trajectory::read_csv(buf.as_slice(), &sc).unwrap(), a);
}

#[test]
fn large_step_is_reported_as_divergence() {
    let sc = load(
        "paper_vdp",
        Overrides {
            epsilon: Some(0.02),
            step: Some(0.05),
            t_end: Some(20.0),
            ..Overrides::default()
        },
    )
    .build()
    .unwrap();
    assert!(!sc.warnings().is_empty());
    match run(&sc) {
        Err(e @ Error::AgentsDiverged { .. }) => assert!(!e.is_validation()),
        other => panic!("expected divergence, got {:?}", other.map(|t| t.len())),
    }
}
