use super::*;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("crossing-lab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = call(args);
    assert_eq!(code, 0, "{err}");
    out
}

fn usage_error(args: &[&str], flag: &str) {
    let (code, out, err) = call(args);
    assert_eq!(code, 1, "{args:?}");
    assert!(out.is_empty());
    assert!(err.contains(flag), "{args:?}: {err}");
}

fn csv_rows<T: serde::de::DeserializeOwned>(text: &str) -> Vec<T> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn constants_table_flags_each_row() {
    let out = ok(&["constants", "--format", "csv"]);
    let r1 = out.lines().find(|l| l.starts_with("INT_R1,")).unwrap();
    assert!(r1.contains(",0.734874192,") && r1.ends_with(",pass"), "{r1}");
    assert_eq!(out.lines().count(), 1 + 16);
    assert!(!out.contains('\r'));
}

#[test]
fn degree_one_expectation_is_one() {
    let out = ok(&["expect", "--n", "1", "--k", "5", "--tol", "1e-8"]);
    let doc: Envelope<IntervalCount> = serde_json::from_str(&out).unwrap();
    assert_eq!(doc.data.len(), 5);
    let total = doc.data.last().unwrap();
    assert_eq!((total.a, total.b), (f64::NEG_INFINITY, f64::INFINITY));
    assert!((total.expected - 1.0).abs() < 1e-6);
    assert_eq!(doc.meta.command, "expect");
    assert_eq!(doc.meta.seed, None);
}

#[test]
fn single_interval_accepts_infinite_endpoints() {
    let out = ok(&["expect", "--n", "4", "--k", "-1", "--a", "-inf", "--b", "0"]);
    let doc: Envelope<IntervalCount> = serde_json::from_str(&out).unwrap();
    assert_eq!(doc.data.len(), 1);
    assert_eq!(doc.data[0].a, f64::NEG_INFINITY);
    assert!(out.contains("\"-inf\""));
}

#[test]
fn compare_reports_agreement() {
    let out = ok(&[
        "compare", "--n", "10", "--k", "0", "--trials", "20000", "--seed", "42", "--tol", "1e-7",
    ]);
    let doc: Envelope<CompareRow> = serde_json::from_str(&out).unwrap();
    let row = &doc.data[0];
    assert_eq!(row.verdict, WITHIN);
    assert_eq!(doc.meta.seed, Some(42));
    assert_eq!(
        row.diff_quadrature_monte_carlo,
        (row.quadrature - row.monte_carlo).abs()
    );
}

#[test]
fn json_output_round_trips() {
    fn check<T: Serialize + serde::de::DeserializeOwned>(args: &[&str]) {
        let out = ok(args);
        let doc: Envelope<T> = serde_json::from_str(&out).unwrap();
        let again = encode(Format::Json, doc.meta.clone(), &doc.data).unwrap();
        assert_eq!(again, out, "{args:?}");
    }
    check::<DensitySample>(&["density", "--n", "7", "--k", "0.5", "--points", "9"]);
    check::<IntervalCount>(&["expect", "--n", "3", "--k", "2"]);
    check::<asymptotics::AsymptoticReport>(&["asym", "--n", "100", "--k", "1", "--regime", "n12"]);
    check::<McRow>(&["mc", "--n", "6", "--k", "1", "--trials", "300", "--seed", "5"]);
    check::<CompareRow>(&["compare", "--n", "4", "--k", "1", "--trials", "300", "--seed", "5"]);
}

#[test]
fn csv_and_json_carry_the_same_values() {
    let args = ["mc", "--n", "9", "--k", "0.3", "--trials", "500", "--seed", "12"];
    let json: Envelope<McRow> = serde_json::from_str(&ok(&args)).unwrap();
    let csv_args: Vec<&str> = args.iter().copied().chain(["--format", "csv"]).collect();
    assert_eq!(csv_rows::<McRow>(&ok(&csv_args)), json.data);

    let args = [
        "density", "--n", "11", "--k", "-2", "--x-min", "-5", "--x-max", "0.7", "--points", "13",
    ];
    let json: Envelope<DensitySample> = serde_json::from_str(&ok(&args)).unwrap();
    let csv_args: Vec<&str> = args.iter().copied().chain(["--format", "csv"]).collect();
    assert_eq!(csv_rows::<DensitySample>(&ok(&csv_args)), json.data);

    let args = ["asym", "--n", "12", "--k", "0.25"];
    let json: Envelope<asymptotics::AsymptoticReport> = serde_json::from_str(&ok(&args)).unwrap();
    let csv_args: Vec<&str> = args.iter().copied().chain(["--format", "csv"]).collect();
    assert_eq!(csv_rows::<asymptotics::AsymptoticReport>(&ok(&csv_args)), json.data);
}

#[test]
fn density_grid_hits_both_ends() {
    let out = ok(&[
        "density", "--n", "5", "--k", "0", "--x-min", "-2", "--x-max", "2", "--points", "5",
    ]);
    let doc: Envelope<DensitySample> = serde_json::from_str(&out).unwrap();
    let xs: Vec<f64> = doc.data.iter().map(|s| s.x).collect();
    assert_eq!(xs, [-2.0, -1.0, 0.0, 1.0, 2.0]);
    assert!(doc.data.iter().all(|s| s.fn_value > 0.0));
}

#[test]
fn asym_itemizes_terms_and_honours_parity() {
    let doc: Envelope<asymptotics::AsymptoticReport> =
        serde_json::from_str(&ok(&["asym", "--n", "10", "--k", "1", "--parity", "odd"])).unwrap();
    let r = &doc.data[0];
    assert_eq!(r.parity, Parity::Odd);
    let sum = r.leading_log + r.constant_term + r.sqrt_correction + r.k2_term + r.c1_term;
    assert_eq!(sum, r.total);
}

#[test]
fn output_file_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let curves = dir.path().join("curves");
    let args = [
        "compare",
        "--n",
        "6",
        "--k",
        "0.5",
        "--trials",
        "200",
        "--seed",
        "1",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
        "--emit-curves",
        curves.to_str().unwrap(),
    ];
    assert!(ok(&args).is_empty());
    let first: Vec<Vec<u8>> = ["cmp.csv", "curves/density.csv", "curves/growth.csv"]
        .iter()
        .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        .collect();
    let growth: Vec<GrowthPoint> = csv_rows(std::str::from_utf8(&first[2]).unwrap());
    assert_eq!(growth.iter().map(|g| g.n).collect::<Vec<_>>(), [1, 2, 4, 6]);
    assert!((growth[0].expected - 1.0).abs() < 1e-6);
    let density: Vec<CurvePoint> = csv_rows(std::str::from_utf8(&first[1]).unwrap());
    assert_eq!(density.len(), 121);
    ok(&args);
    for (f, before) in ["cmp.csv", "curves/density.csv", "curves/growth.csv"]
        .iter()
        .zip(&first)
    {
        assert_eq!(&std::fs::read(dir.path().join(f)).unwrap(), before, "{f}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        &["density", "--n", "8", "--k", "1"][..],
        &["expect", "--n", "8", "--k", "1", "--format", "csv"],
        &["asym", "--n", "8", "--k", "1"],
        &["mc", "--n", "8", "--k", "1", "--trials", "400", "--seed", "3"],
        &[
            "mc", "--n", "70", "--k", "1", "--trials", "20", "--seed", "3", "--format", "csv",
        ],
    ] {
        assert_eq!(ok(args), ok(args), "{args:?}");
    }
}

#[test]
fn usage_errors_name_the_flag() {
    usage_error(&["expect", "--k", "1"], "--n");
    usage_error(&["expect", "--n", "0", "--k", "1"], "--n");
    usage_error(&["expect", "--n", "3", "--k", "nan"], "--k");
    usage_error(&["expect", "--n", "3", "--k", "1", "--a", "0"], "--b");
    usage_error(&["expect", "--n", "3", "--k", "1", "--b", "0"], "--a");
    usage_error(&["expect", "--n", "3", "--k", "1", "--a", "2", "--b", "1"], "--b");
    usage_error(&["expect", "--n", "3", "--k", "1", "--tol", "0"], "--tol");
    usage_error(&["density", "--n", "3", "--k", "1", "--points", "1"], "--points");
    usage_error(
        &["density", "--n", "3", "--k", "1", "--x-min", "1", "--x-max", "1"],
        "--x-max",
    );
    usage_error(
        &["mc", "--n", "3", "--k", "1", "--trials", "0", "--seed", "1"],
        "--trials",
    );
    usage_error(
        &[
            "mc",
            "--n",
            "61",
            "--k",
            "1",
            "--trials",
            "5",
            "--seed",
            "1",
            "--mode",
            "exact-sturm",
        ],
        "--mode",
    );
    usage_error(&["asym", "--n", "3", "--k", "1", "--regime", "n13"], "--regime");
    usage_error(&["constants", "--format", "xml"], "--format");
    usage_error(&["bogus"], "bogus");
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("compare"));
}

#[test]
fn unreachable_tolerance_is_a_numerical_failure() {
    let (code, out, err) = call(&["expect", "--n", "40", "--k", "1", "--tol", "1e-300"]);
    assert_eq!(code, 2, "{err}");
    assert!(out.is_empty());
    assert!(err.contains("tolerance"), "{err}");
}

#[test]
fn exit_codes_follow_error_class() {
    assert_eq!(CliError::from(SimulationError::ZeroPolynomial).exit_code(), 3);
    assert_eq!(CliError::from(AsymptoticError::Domain(-1.0)).exit_code(), 3);
    assert_eq!(CliError::from(SimulationError::NoTrials).exit_code(), 1);
    assert_eq!(CliError::usage("--n", "x").exit_code(), 1);
}
