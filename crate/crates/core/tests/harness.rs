use proptest::prelude::*;
use sgm_core::field::{divergence, Grid2D};
use sgm_core::harness::config::{Mode, XiSpec};
use sgm_core::harness::{preset, run_experiment, ExperimentConfig, HarnessError, Prepared, PRESETS};

#[test]
fn presets_validate() {
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        cfg.prepare().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert!(matches!(preset("other"), Err(HarnessError::Usage(_))));
}

#[test]
fn stream_noise_is_divergence_free() {
    let mut cfg = preset("euler2d_kelvin").unwrap();
    cfg.grid = Some(Grid2D::new(32, 16, 4.0, 3.0).unwrap());
    cfg.noise.xis = vec![XiSpec::Stream {
        modes: vec![Mode::new(1, 2, 0.4, 0.3), Mode::new(-3, 1, 0.2, 0.0)],
    }];
    cfg.initial = sgm_core::harness::config::InitialCondition::Fields {
        vorticity: sgm_core::harness::config::FieldSource::Fourier {
            modes: vec![Mode::new(1, 1, 1.0, 0.0)],
        },
        buoyancy: None,
    };
    let Prepared::Fluid { noise, .. } = cfg.prepare().unwrap() else { unreachable!() };
    let xi = &noise.xis()[0];
    assert!(xi.max_norm() > 0.1);
    assert!(divergence(xi).max_abs() < 1e-12);
}

#[test]
fn nonzero_mean_vorticity_is_rejected() {
    let mut cfg = preset("euler2d_kelvin").unwrap();
    cfg.initial = sgm_core::harness::config::InitialCondition::Fields {
        vorticity: sgm_core::harness::config::FieldSource::Fourier {
            modes: vec![Mode::new(0, 0, 1.0, 0.0)],
        },
        buoyancy: None,
    };
    assert!(matches!(cfg.prepare(), Err(HarnessError::Config(m)) if m.contains("zero mean")));
}

#[test]
fn mismatched_model_and_state_are_rejected() {
    let mut cfg = preset("heavy_top").unwrap();
    if let sgm_core::harness::config::InitialCondition::Momentum { a, .. } = &mut cfg.initial {
        *a = None;
    }
    assert!(matches!(cfg.prepare(), Err(HarnessError::Config(_))));
    let mut cfg = preset("rigid_body").unwrap();
    cfg.t_final = 0.0105;
    assert!(matches!(cfg.prepare(), Err(HarnessError::Config(m)) if m.contains("whole number")));
    let mut cfg = preset("boussinesq_budget").unwrap();
    cfg.model = sgm_core::dynamics::LagrangianModel::Euler2d;
    assert!(matches!(cfg.prepare(), Err(HarnessError::Config(m)) if m.contains("buoyancy")));
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&preset("rigid_body").unwrap().to_json()).unwrap();
    v["tolerance"] = serde_json::json!(1.0);
    assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn rerun_is_byte_identical() {
    let mut cfg = preset("heavy_top").unwrap();
    cfg.t_final = 1.0;
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sa = run_experiment(&cfg, 3, &a).unwrap();
    let sb = run_experiment(&cfg, 3, &b).unwrap();
    assert_eq!(sa, sb);
    for f in ["states.csv", "summary.json", "config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    // the emitted config reproduces the run
    let again = ExperimentConfig::load(&a.join("config.json")).unwrap();
    let c = dir.path().join("c");
    run_experiment(&again, again.seed, &c).unwrap();
    assert_eq!(std::fs::read(a.join("states.csv")).unwrap(), std::fs::read(c.join("states.csv")).unwrap());
    // every stored value is written with 17 significant digits
    let text = std::fs::read_to_string(a.join("states.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.split(',').all(|v| v.split('e').next().unwrap().trim_start_matches('-').len() == 18));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn config_round_trip_is_a_fixed_point(
        which in 0usize..4,
        dt_exp in 2i32..5,
        steps in 1usize..400,
        seed in any::<u64>(),
        amp in -2.0f64..2.0,
        save in proptest::option::of(1usize..50),
    ) {
        let mut cfg = preset(PRESETS[which]).unwrap();
        cfg.dt = 10f64.powi(-dt_exp);
        cfg.t_final = steps as f64 * cfg.dt;
        cfg.seed = seed;
        cfg.noise.amplitude = amp;
        cfg.save_every = save;
        let once = cfg.normalized().to_json();
        let parsed = ExperimentConfig::from_json(&once).unwrap();
        prop_assert_eq!(&parsed.normalized().to_json(), &once);
        prop_assert_eq!(parsed.normalized(), parsed.clone());
    }
}
