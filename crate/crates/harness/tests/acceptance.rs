//! The full acceptance suite. Prints one line per criterion and fails if
//! any criterion fails. Takes roughly half an hour on one core.

use relaycast_harness::acceptance::{run_all, Scale};

#[test]
fn acceptance_criteria() {
    let results = run_all(&Scale::full(), None, |r| eprintln!("{r}"));
    println!();
    for r in &results {
        println!("{r}");
    }
    assert_eq!(results.len(), 12);
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
