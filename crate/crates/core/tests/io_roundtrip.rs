mod common;

use rand::Rng;
use qgibbs::marked::{load_marked, load_marked_expecting, save_marked, MarkedRecord, MarkedSet};
use qgibbs::rng::stream;
use qgibbs::{Error, Manifest, NumberFormat, StudyKind, Window};

fn random_set(format: NumberFormat, records: usize) -> MarkedSet {
    let mut rng = stream(77);
    let window = Window::cube(3, -2.0, 2.0).unwrap();
    let mut set = MarkedSet::new(window, 2, 0.75, format);
    for k in 0..records {
        let n = rng.random_range(0..6);
        set.records.push(MarkedRecord {
            seed: rng.random(),
            coords: (0..3 * n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            spins: (0..2 * n).map(|_| rng.random::<f64>() * 10f64.powi(k as i32 % 9 - 4)).collect(),
        });
    }
    set
}

fn saved(set: &MarkedSet) -> Vec<u8> {
    let mut buf = Vec::new();
    save_marked(set, &mut buf).unwrap();
    buf
}

#[test]
fn empty_marked_set_round_trips() {
    let set = MarkedSet::new(Window::cube(2, 0.0, 1.0).unwrap(), 1, 1.0, NumberFormat::Decimal);
    let bytes = saved(&set);
    let back = load_marked(&bytes[..]).unwrap();
    assert_eq!(back, set);
    assert!(back.records.is_empty());
}

#[test]
fn marked_records_round_trip_bit_exactly() {
    for format in [NumberFormat::Decimal, NumberFormat::Hex] {
        let set = random_set(format, 1_000);
        let bytes = saved(&set);
        let back = load_marked(&bytes[..]).unwrap();
        for (a, b) in set.records.iter().zip(&back.records) {
            assert_eq!(a.seed, b.seed);
            assert!(a.coords.iter().zip(&b.coords).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert!(a.spins.iter().zip(&b.spins).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back, set);
        assert_eq!(saved(&back), bytes);
    }
}

#[test]
fn marked_load_rejects_mismatched_dimensions() {
    let bytes = saved(&random_set(NumberFormat::Decimal, 3));
    let err = load_marked_expecting(&bytes[..], 2, 2).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3, .. }), "{err}");
    assert!(err.to_string().contains("point dimension"));
    assert!(load_marked_expecting(&bytes[..], 3, 1).is_err());
    assert!(load_marked_expecting(&bytes[..], 3, 2).is_ok());
}

#[test]
fn marked_load_rejects_corrupt_files() {
    let text = String::from_utf8(saved(&random_set(NumberFormat::Decimal, 3))).unwrap();
    let bad_version = text.replace("version 1", "version 9");
    assert!(matches!(load_marked(bad_version.as_bytes()), Err(Error::Parse { line: 2, .. })));
    let bad_dim = text.replace("dimension 3", "dimension 2");
    assert!(load_marked(bad_dim.as_bytes()).is_err());
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    let truncated = lines.join("\n");
    assert!(load_marked(truncated.as_bytes()).is_err());
    let bad_row = text.replacen(" | ", " ", 1);
    assert!(load_marked(bad_row.as_bytes()).is_err());
}

const GRAPH_STATS: &str = r#"
study = "graph-stats"
seed = 7

[window]
lower = [0.0, 0.0]
upper = [10.0, 10.0]

[process]
kind = "poisson"
intensity = 1.0
"#;

#[test]
fn manifest_defaults_and_echo() {
    let m = Manifest::from_toml(GRAPH_STATS).unwrap();
    assert_eq!(m.study, StudyKind::GraphStats);
    assert_eq!(m.volumes.count, 8);
    assert_eq!(m.volumes.ratio, 1.3);
    assert_eq!(m.sampler.target_acceptance, 0.3);
    let echo = m.to_toml();
    assert!(echo.contains("ratio = 1.3"));
    assert!(echo.contains("target_acceptance = 0.3"));
    assert_eq!(Manifest::from_toml(&echo).unwrap(), m);
}

#[test]
fn manifest_errors_name_line_and_field() {
    let broken = GRAPH_STATS.replace("seed = 7", "seed = ");
    match Manifest::from_toml(&broken) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let unknown = format!("{GRAPH_STATS}\n[volumes]\ncuont = 3\n");
    let err = Manifest::from_toml(&unknown).unwrap_err().to_string();
    assert!(err.contains("cuont"), "{err}");
    let missing = GRAPH_STATS.replace("seed = 7", "");
    assert!(Manifest::from_toml(&missing).unwrap_err().to_string().contains("seed"));
}

#[test]
fn manifest_overrides() {
    let m = Manifest::from_toml_with_overrides(
        GRAPH_STATS,
        &[
            "seed=11".into(),
            "graph_stats.radius=0.5".into(),
            "sampler.sweeps=123".into(),
            "study=correlation".into(),
        ],
    )
    .unwrap();
    assert_eq!(m.seed, 11);
    assert_eq!(m.graph_stats.radius, 0.5);
    assert_eq!(m.sampler.sweeps, 123);
    assert_eq!(m.study, StudyKind::Correlation);
    assert!(Manifest::from_toml_with_overrides(GRAPH_STATS, &["novalue".into()]).is_err());
    assert!(Manifest::from_toml_with_overrides(GRAPH_STATS, &["seed.x=1".into()]).is_err());
}
