#[path = "common/corpus.rs"]
mod corpus;

#[test]
fn corpus_is_large_enough() {
    assert!(corpus::entries().len() >= 200);
}

#[test]
fn values_match_reference_bytes() {
    let (checked, failures) = corpus::value_failures();
    assert!(
        failures.is_empty(),
        "{} mismatches:\n{}",
        failures.len(),
        failures.join("\n")
    );
    assert!(checked >= 200);
}

#[test]
fn messages_match_reference_bytes() {
    let (checked, failures) = corpus::message_failures();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
    assert!(checked > 0);
}
