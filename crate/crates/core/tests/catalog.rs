use wineland_core::bounds::TangentSearch;
use wineland_core::catalog::{builtin_catalog, figure_rows, load_catalog, save_catalog, Source};
use wineland_core::{Error, ExperimentEntry, SummaryStats};

/// FNV-1a over the published integers, pinning the builtin table.
fn fingerprint(entries: &[ExperimentEntry]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for e in entries {
        feed(e.n_spins as u64);
        feed(e.m_reported);
        feed(e.m_required_mu0.unwrap());
        feed(e.m_required_mu01.unwrap());
        for b in e.citation_key.bytes() {
            feed(b as u64);
        }
    }
    h
}

#[test]
fn builtin_table_is_pinned() {
    let cat = builtin_catalog();
    let sums = cat.iter().fold((0u64, 0u64, 0u64, 0u64), |acc, e| {
        (
            acc.0 + e.n_spins as u64,
            acc.1 + e.m_reported,
            acc.2 + e.m_required_mu0.unwrap(),
            acc.3 + e.m_required_mu01.unwrap(),
        )
    });
    assert_eq!(sums, (1_396_586, 62_440, 152_368_738, 185_001_390));
    assert_eq!(fingerprint(&cat), fingerprint(&builtin_catalog()));
    assert_eq!(fingerprint(&cat), PINNED_FINGERPRINT);
}

const PINNED_FINGERPRINT: u64 = 0x4b9e_41e0_84a6_cf6b;

#[test]
fn save_then_load_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("catalog.json");
    let cat = builtin_catalog();
    save_catalog(&path, &cat).unwrap();
    assert_eq!(load_catalog(&path).unwrap(), cat);
}

#[test]
fn load_reports_field_and_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"[{"name": "a", "citation_key": "k", "n_spins": 4, "m_reported": "many"}]"#,
    )
    .unwrap();
    match load_catalog(&path) {
        Err(Error::Parse(msg)) => assert!(msg.contains("m_reported"), "{msg}"),
        other => panic!("{other:?}"),
    }
    std::fs::write(
        &path,
        r#"[{"name": "a", "citation_key": "k", "n_spins": 0, "m_reported": 40}]"#,
    )
    .unwrap();
    assert!(matches!(load_catalog(&path), Err(Error::Validation(_))));
    assert!(matches!(
        load_catalog(&dir.path().join("missing.json")),
        Err(Error::Io(_))
    ));
}

#[test]
fn figure_rows_from_summaries() {
    let mut entry = builtin_catalog().remove(0);
    let bare = figure_rows(&[entry.clone()], 0.05, &TangentSearch::default()).unwrap();
    assert_eq!(bare[0].m_upper_sufficient, Some(21200));
    assert_eq!(bare[0].m_lower_necessary, None);
    assert_eq!(bare[0].source, Some(Source::Published));

    entry.m_required_mu0 = None;
    entry.summary = Some(SummaryStats {
        n_spins: 2,
        s_perp: 0.3,
        mu_par: 0.9,
        mu_perp: 0.0,
        m_par: 5000,
        m_perp: 5000,
    });
    let rows = figure_rows(&[entry], 0.05, &TangentSearch::default()).unwrap();
    assert_eq!(rows[0].source, Some(Source::Computed));
    let upper = rows[0].m_upper_sufficient.unwrap();
    let lower = rows[0].m_lower_necessary.unwrap();
    assert!(lower < upper, "{lower} >= {upper}");
    assert!((rows[0].xi2_observed.unwrap() - 0.6 / 0.81).abs() < 1e-12);
}
