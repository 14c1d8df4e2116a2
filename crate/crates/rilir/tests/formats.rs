use std::path::Path;

use rilir::codec::{decode_dataset, decode_params, encode_dataset, encode_params, load_dataset, save_dataset};
use rilir::config::{parse_perturbation, print_perturbation, RunConfig, KEYS};
use rilir::core::diffcore::{ParameterSet, Tensor};
use rilir::core::envsim::{collect_expert, EnvId, PerturbationKind};
use rilir::pgm::encode_p2;
use rilir::HarnessError;

#[test]
fn dataset_round_trip_is_bit_identical() {
    let ds = collect_expert(EnvId::PendulumSwing, 3, 12, 9).unwrap();
    let bytes = encode_dataset(&ds);
    assert_eq!(&bytes[..8], b"RILIRDS1");
    let back = decode_dataset(&bytes, Path::new("mem")).unwrap();
    assert_eq!(back.env_id, ds.env_id);
    assert_eq!(back.trajectories(), ds.trajectories());
    assert_eq!(encode_dataset(&back), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.rds");
    save_dataset(&ds, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap().trajectories(), ds.trajectories());
}

#[test]
fn dataset_header_layout() {
    let ds = collect_expert(EnvId::PointReach, 2, 5, 1).unwrap();
    let bytes = encode_dataset(&ds);
    let name_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    assert_eq!(&bytes[12..12 + name_len], b"point_reach");
    let header: Vec<u64> = bytes[12 + name_len..12 + name_len + 48]
        .chunks(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(header, [2, 5, 2, 2, 16, 16]);
    let per_traj = 6 * 512 + 5 * 2 + 5;
    assert_eq!(bytes.len(), 12 + name_len + 48 + 2 * per_traj * 8);
}

#[test]
fn truncated_or_foreign_files_are_rejected() {
    let ds = collect_expert(EnvId::PointReach, 1, 4, 1).unwrap();
    let bytes = encode_dataset(&ds);
    let short = decode_dataset(&bytes[..bytes.len() - 3], Path::new("x"));
    assert!(matches!(short, Err(HarnessError::Format { .. })));
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(decode_dataset(&long, Path::new("x")), Err(HarnessError::Format { .. })));
    assert!(matches!(decode_dataset(b"RILIRPS1", Path::new("x")), Err(HarnessError::Format { .. })));
    assert!(matches!(decode_params(b"nope", Path::new("x")), Err(HarnessError::Format { .. })));
}

#[test]
fn params_round_trip() {
    let mut p = ParameterSet::new();
    p.push("a.w", Tensor::matrix(2, 3, vec![1.0, -2.5, 3.0, f64::MIN_POSITIVE, 0.0, -0.0]).unwrap());
    p.push("a.b", Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap());
    let bytes = encode_params(&p);
    assert_eq!(&bytes[..8], b"RILIRPS1");
    let back = decode_params(&bytes, Path::new("mem")).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back.get("a.w"), p.get("a.w"));
    assert_eq!(back.get("a.b"), p.get("a.b"));
    assert_eq!(encode_params(&back), bytes);
}

#[test]
fn config_defaults_print_and_reparse() {
    let cfg = RunConfig::default();
    let text = cfg.to_text();
    assert_eq!(text.lines().count(), KEYS.len());
    let back = RunConfig::parse(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_text(), text);
}

#[test]
fn config_canonicalization_is_idempotent() {
    let text = "# comment\n  eta=0.25 \nperturbation = random_mask( 4, 2 )\nencoder_hidden = 64, 32\n\
                reward_space = raw_pixels  # trailing\nno_discriminator = yes\nlr = 1e-3\ndataset = d.rds\n";
    let a = RunConfig::parse(text).unwrap();
    let printed = a.to_text();
    let b = RunConfig::parse(&printed).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.to_text(), printed);
    assert_eq!(a.train.reward.eta, 0.25);
    assert_eq!(a.train.agent.encoder_hidden, vec![64, 32]);
    assert!(a.train.no_discriminator);
    assert_eq!(a.get("lr").unwrap(), "0.001");
}

#[test]
fn bad_config_names_the_key() {
    let err = RunConfig::parse("stepz = 4").unwrap_err();
    assert!(matches!(&err, HarnessError::Config { key, .. } if key == "stepz"));
    let err = RunConfig::parse("steps = many").unwrap_err();
    assert!(matches!(&err, HarnessError::Config { key, .. } if key == "steps"));
    let err = RunConfig::parse("gamma = 1.5").unwrap_err();
    assert!(matches!(&err, HarnessError::Config { key, .. } if key == "gamma"));
    let err = RunConfig::parse("perturbation = random_mask(40,1)").unwrap_err();
    assert!(matches!(&err, HarnessError::Config { key, .. } if key == "perturbation"));
    let err = RunConfig::parse("just words").unwrap_err();
    assert!(matches!(err, HarnessError::Config { .. }));
    assert_eq!(RunConfig::parse("eta = -1").unwrap_err().exit_code(), 2);
}

#[test]
fn perturbation_text_round_trips() {
    for k in [
        PerturbationKind::None,
        PerturbationKind::WhiteNoise { sigma: 0.1 },
        PerturbationKind::RandomMask { patch_size: 4, patch_count: 2 },
        PerturbationKind::BackgroundShift { texture_count: 3, change_period: 7 },
    ] {
        assert_eq!(parse_perturbation(&print_perturbation(&k)).unwrap(), k);
    }
    assert!(parse_perturbation("random_mask(4)").is_err());
}

#[test]
fn pgm_rescales_to_255() {
    let (text, max) = encode_p2(&[0.0, 1.0, 2.0, 4.0], 2, 2);
    assert_eq!(max, 4.0);
    assert_eq!(text, "P2\n2 2\n255\n0 64\n128 255\n");
    let (zero, _) = encode_p2(&[0.0; 3], 3, 1);
    assert_eq!(zero, "P2\n3 1\n255\n0 0 0\n");
}
