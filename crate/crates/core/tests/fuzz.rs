#[path = "common/fuzz.rs"]
mod fuzz;

#[test]
fn hundred_thousand_mutated_frames() {
    let report = fuzz::run(100_000, 0x5eed);
    assert!(
        report.crashes.is_empty(),
        "{:#?}",
        &report.crashes[..report.crashes.len().min(5)]
    );
    assert_eq!(report.frames, 100_000);
    eprintln!("{report:?}");
    // The mutations reach the error paths.
    assert!(
        report.decode_errors > 0
            && report.frame_errors > 0
            && report.engine_rejects > 0
            && report.served > 0,
        "{report:?}"
    );
}
