use latopt_core::lattice::{rasterize, LatticeUnit};
use latopt_core::pipeline::{
    assemble_structure, build_bridge_problem, load_macro_state, load_micro_state, macro_stage,
    micro_stage, run_pipeline, MacroConfig, MacroProblem, PipelineConfig,
};
use latopt_core::templates::{build_angle, UnitTemplate, DEFAULT_GAMMA, DEFAULT_KS_K};
use latopt_core::Error;

#[test]
fn dotted_keys_override_defaults() {
    let text = "output_dir = \"runs/a\"\nmacro.nx = 20\nmacro.ny = 10\nmacro.K_clusters = 3\nmicro.V_star = 0.3\nmicro.template = \"selfsupport10\"\nmicro.lambda_B = 0.4\n";
    let c = PipelineConfig::from_toml_str(text).unwrap();
    assert_eq!((c.macro_.nx, c.macro_.ny, c.macro_.k_clusters), (20, 10, 3));
    assert_eq!(c.micro.v_star, 0.3);
    assert_eq!(c.micro.lambda_b, 0.4);
    assert_eq!(c.micro.template, UnitTemplate::Selfsupport10);
    assert_eq!(c.micro.n, 40);
    assert_eq!(c.output_dir, std::path::PathBuf::from("runs/a"));
}

#[test]
fn json_and_text_round_trip() {
    let c = PipelineConfig::smoke();
    let back = PipelineConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, c);
    let j = PipelineConfig::from_json_str(
        r#"{"macro": {"nx": 8, "ny": 4, "K_clusters": 2}, "micro": {"N": 20}}"#,
    )
    .unwrap();
    assert_eq!((j.macro_.nx, j.micro.n), (8, 20));
}

#[test]
fn unknown_and_invalid_keys_are_config_errors() {
    for text in [
        "macro.nx_typo = 3\n",
        "micro.V_star = 1.5\n",
        "micro.N = 21\n",
        "macro.K_clusters = 0\n",
        "micro.p_min = 0.6\n",
        "macro.fixed_dofs = [1, 2, 3]\n",
        "macro.problem = \"custom\"\n",
    ] {
        match PipelineConfig::from_toml_str(text) {
            Err(Error::Config(_)) => {}
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn bridge_problem_layout() {
    let p = build_bridge_problem(&MacroConfig::default()).unwrap();
    assert_eq!(p.mesh.n_elements(), 48 * 24);
    assert_eq!(p.mesh.n_dofs(), 2 * 49 * 25);
    assert_eq!(p.mesh.fixed_dofs.len(), 3);
    let loaded: Vec<(usize, f64)> = p
        .mesh
        .loads
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| *v != 0.0)
        .collect();
    assert_eq!(loaded.len(), 1);
    let top = p.mesh.node(24, 24);
    assert_eq!(loaded[0], (2 * top + 1, -0.1));
    assert!((p.t0 - 0.35 * 1152.0 * p.t_high).abs() < 1e-9);
    assert!((p.t_low - 3.0 * p.delta).abs() < 1e-15);
}

#[test]
fn custom_problem_uses_configured_supports() {
    let mut m = MacroConfig {
        nx: 4,
        ny: 2,
        k_clusters: 2,
        problem: MacroProblem::Custom,
        ..MacroConfig::default()
    };
    m.fixed_dofs = vec![0, 1, 10];
    m.point_loads = vec![(29, -0.5)];
    let p = build_bridge_problem(&m).unwrap();
    assert_eq!(p.mesh.fixed_dofs, vec![0, 1, 10]);
    assert_eq!(p.mesh.loads[29], -0.5);
}

#[test]
fn uniform_labels_tile_without_connectors() {
    let unit = UnitTemplate::Selfsupport10.unit(0.05, DEFAULT_KS_K, DEFAULT_GAMMA);
    let a = assemble_structure(&[0; 6], &[unit], 3, 2, 20, 0.5).unwrap();
    assert!(a.tile.connectors.is_empty());
    assert!(a.connector_failures.is_empty());
    assert_eq!(a.connectivity.components, 1);
    assert_eq!((a.image.width, a.image.height), (60, 40));
}

#[test]
fn tile_volume_is_weighted_mean_of_units() {
    let a = UnitTemplate::Selfsupport10.unit(0.06, DEFAULT_KS_K, DEFAULT_GAMMA);
    let b = UnitTemplate::Full21.unit(0.02, DEFAULT_KS_K, DEFAULT_GAMMA);
    let labels = [0, 1, 1, 0, 0, 1, 0, 0];
    let asm = assemble_structure(&labels, &[a.clone(), b.clone()], 4, 2, 20, 0.5).unwrap();
    let (va, vb) = (
        rasterize(&a, 20).unwrap().volume_fraction(),
        rasterize(&b, 20).unwrap().volume_fraction(),
    );
    let expected = (5.0 * va + 3.0 * vb) / 8.0;
    let got = asm.image.volume_fraction();
    assert!((got - expected).abs() <= 0.02, "{got} vs {expected}");
}

#[test]
fn staged_run_matches_manifest_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::smoke();
    cfg.micro.template = UnitTemplate::Selfsupport10;
    let manifest = run_pipeline(&cfg, dir.path()).unwrap();
    for key in [
        "schema",
        "config",
        "resolved",
        "macro",
        "units",
        "assembly",
        "reference_values",
        "timings_s",
    ] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["reference_values"]["asserted"], false);
    let k = cfg.macro_.k_clusters;
    assert_eq!(manifest["units"].as_array().unwrap().len(), k);
    for name in [
        "macro_tensors.csv",
        "macro_tensors_free.csv",
        "cluster_labels.csv",
        "fmo_log.csv",
        "structure.pgm",
        "connectors.json",
        "manifest.json",
    ] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    for c in 0..k {
        for ext in ["json", "csv", "pgm"] {
            assert!(dir.path().join(format!("unit_{c}.{ext}")).is_file());
        }
        let text = std::fs::read_to_string(dir.path().join(format!("unit_{c}.json"))).unwrap();
        let unit: LatticeUnit = serde_json::from_str(&text).unwrap();
        for b in &unit.bars {
            let a = build_angle(b);
            assert!(
                [0.0, 45.0, 90.0].iter().any(|t| (a - t).abs() < 1e-9),
                "bar at {a} degrees"
            );
        }
    }

    let state = load_macro_state(dir.path()).unwrap();
    assert_eq!(state.targets.len(), k);
    assert_eq!(
        manifest["macro"]["free_compliance"].as_f64().unwrap(),
        state.free_compliance
    );
    let units = load_micro_state(dir.path()).unwrap();
    assert_eq!(units.len(), k);

    let again = tempfile::tempdir().unwrap();
    let m = macro_stage(&cfg, again.path()).unwrap();
    assert_eq!(m.state, state);
    let u = micro_stage(&cfg, again.path(), &m.state).unwrap();
    assert_eq!(u, units);
}
