use proptest::prelude::*;
use ratekit::csv::CsvTable;

#[test]
fn layout() {
    let mut t = CsvTable::new(&["Q", "rate"]).param("d", 5).param("m", 3);
    t.push(vec![0.0, 5f64.log2()]);
    t.push(vec![0.1, -0.0]);
    let text = t.render();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# hd-qkd-ratekit v"));
    assert_eq!(lines[1], "# d=5 m=3");
    assert_eq!(lines[2], "Q,rate");
    assert_eq!(lines[3], "0,2.321928094887362");
    assert_eq!(CsvTable::parse(&text).unwrap(), t);
}

#[test]
fn rejects_malformed() {
    assert!(CsvTable::parse("").is_err());
    assert!(CsvTable::parse("# other-tool v1.0\n# a=1\nx\n1\n").is_err());
    assert!(CsvTable::parse("# hd-qkd-ratekit v0.1\n# a\nx\n1\n").is_err());
    assert!(CsvTable::parse("# hd-qkd-ratekit v0.1\n# a=1\nx,y\n1\n").is_err());
    assert!(CsvTable::parse("# hd-qkd-ratekit v0.1\n# a=1\nx\nabc\n").is_err());
    let ok = CsvTable::parse("# hd-qkd-ratekit v0.1\n# \nx\n").unwrap();
    assert!(ok.params.is_empty() && ok.rows.is_empty());
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        -1e3f64..1e3,
        Just(0.0),
        Just(f64::MIN_POSITIVE),
        Just(1e300),
    ]
}

proptest! {
    #[test]
    fn round_trip_is_bitwise(rows in prop::collection::vec(prop::collection::vec(finite_f64(), 3), 0..20),
                             keys in prop::collection::vec("[a-z_]{1,8}", 0..4)) {
        let mut t = CsvTable::new(&["a", "b", "c"]);
        for (i, k) in keys.iter().enumerate() {
            t = t.param(k, i);
        }
        for r in &rows {
            t.push(r.clone());
        }
        let back = CsvTable::parse(&t.render()).unwrap();
        prop_assert_eq!(back.rows.len(), rows.len());
        for (x, y) in back.rows.iter().flatten().zip(rows.iter().flatten()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(back.params, t.params);
    }
}
