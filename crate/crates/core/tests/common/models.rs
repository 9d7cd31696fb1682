//! Random device models and a brute-force lookup to check the image search against.

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use uaengine::codec::NodeId;
use uaengine::nsimage::{compile_source, verify, NamespaceImage, Record};

pub type Ids = BTreeSet<(u16, bool, u32)>;

pub fn id_text(ns: u16, numeric: bool, key: u32) -> String {
    if numeric {
        format!("ns={ns};i={key}")
    } else {
        format!("ns={ns};s=n{key}")
    }
}

/// A model with the given extra variables under a single folder.
pub fn model(ids: &Ids) -> String {
    let mut src = String::from("namespace urn:a\nnamespace urn:b\ninclude ns0\n");
    src.push_str("Object ns=1;s=root Root parent=i=85 ref=Organizes\n");
    for (k, &(ns, numeric, key)) in ids.iter().enumerate() {
        let ty = ["Int32", "Double", "String", "Boolean"][k % 4];
        let value = ["7", "1.5", "hi", "true"][k % 4];
        src.push_str(&format!(
            "Variable {} V{k} type={ty} access=rw value={value} parent=ns=1;s=root\n",
            id_text(ns, numeric, key)
        ));
    }
    src
}

pub fn linear(img: &NamespaceImage, id: &NodeId) -> Option<Record> {
    img.records().find(|r| &r.id == id)
}

pub fn probe_bound(n: usize) -> u32 {
    (usize::BITS - n.leading_zeros()) + 1
}

pub fn ids() -> impl Strategy<Value = Ids> {
    prop::collection::btree_set((1u16..3, any::<bool>(), 0u32..5000), 0..200).prop_map(|mut s| {
        s.remove(&(1, false, 0));
        s
    })
}

pub fn queries() -> impl Strategy<Value = Vec<(u16, bool, u32)>> {
    prop::collection::vec((0u16..4, any::<bool>(), 0u32..5000), 0..50)
}

/// Looks up every node of `img` plus `extra` both ways.
pub fn check_image(
    img: &NamespaceImage,
    extra: impl IntoIterator<Item = NodeId>,
) -> Result<(), TestCaseError> {
    let bound = probe_bound(img.node_count());
    let all: Vec<NodeId> = img.records().map(|r| r.id).collect();
    for id in all.into_iter().chain(extra) {
        let (found, probes) = img.lookup(&id);
        prop_assert_eq!(&found, &linear(img, &id));
        prop_assert!(
            probes <= bound,
            "{} probes for {} nodes",
            probes,
            img.node_count()
        );
    }
    Ok(())
}

pub fn check_model(present: &Ids, queries: &[(u16, bool, u32)]) -> Result<(), TestCaseError> {
    let (bytes, report) = compile_source(&model(present)).unwrap();
    prop_assert!(verify(&bytes).is_empty());
    prop_assert_eq!(
        report.sections().iter().map(|s| s.1).sum::<usize>(),
        report.total
    );
    let img = NamespaceImage::load(bytes).unwrap();
    let extra = queries
        .iter()
        .map(|&(ns, n, k)| id_text(ns, n, k).parse::<NodeId>().unwrap());
    check_image(&img, extra)
}
