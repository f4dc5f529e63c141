//! Record linkage for journals: title normalization, identifier-graph
//! clustering, metadata correction through a resolver, and aggregation
//! into a counts matrix.
//!
//! ```bash
//! cargo run -p ecoref --example cluster_outputs
//! ```

use ecoref::ingest::{
    aggregate, cluster_journals, enrich_with_doi_metadata, normalize_title, DoiMetadata,
    OutputType, RawOutput, StaticResolver,
};

fn article(id: &str, inst: &str, doi: Option<&str>, issn: Option<&str>, title: &str) -> RawOutput {
    RawOutput {
        output_id: id.to_string(),
        institution: inst.to_string(),
        output_type: OutputType::JournalArticle,
        doi: doi.map(str::to_string),
        issns: issn.map(str::to_string).into_iter().collect(),
        isbn: None,
        volume_title: Some(title.to_string()),
    }
}

fn main() {
    for title in [
        "The Review of Economic Studies",
        "Review of Economic Studies",
        "Économie et Statistique",
    ] {
        println!("{title:?} -> {:?}", normalize_title(title).unwrap());
    }

    let mut outputs = vec![
        // Two title variants merge through the shared ISSN.
        article("o1", "uni-a", None, Some("0034-6527"), "The Review of Economic Studies"),
        article("o2", "uni-b", None, Some("0034-6527"), "Review of Economic Studies"),
        article("o3", "uni-b", None, Some("0034-6527"), "Rev. Econ. Stud."),
        // A hand-entry error: right title, wrong ISSN (another journal's).
        article("o4", "uni-a", Some("10.4007/annals.2"), Some("0001-8708"), "Annals of Mathematics"),
        article("o5", "uni-b", None, Some("0001-8708"), "Advances in Mathematics"),
        RawOutput {
            output_id: "o6".to_string(),
            institution: "uni-a".to_string(),
            output_type: OutputType::Conference,
            doi: None,
            issns: vec![],
            isbn: None,
            volume_title: None,
        },
    ];

    println!("\nbefore metadata correction:");
    for c in cluster_journals(&outputs) {
        println!("  [{}] {} ({} articles)", c.journal_id, c.display_title, c.article_count());
    }

    // The registry knows the DOI's real journal; its metadata replaces the
    // hand-entered fields and the spurious merge disappears.
    let resolver = StaticResolver::new([(
        "10.4007/annals.2".to_string(),
        DoiMetadata {
            container_title: Some("Annals of Mathematics".to_string()),
            issns: vec!["0003-486X".to_string()],
        },
    )]);
    let report = enrich_with_doi_metadata(&mut outputs, &resolver);
    println!("\nresolved {} DOIs, {} unresolved", report.resolved, report.unresolved.len());

    let clusters = cluster_journals(&outputs);
    println!("after correction:");
    for c in &clusters {
        println!("  [{}] {} ({} articles)", c.journal_id, c.display_title, c.article_count());
    }

    let counts = aggregate(&clusters, &outputs, 2).unwrap();
    println!("\ncounts matrix ({} x {}):", counts.n_institutions(), counts.n_columns());
    print!("{:<10}", "");
    for col in counts.columns() {
        print!("{:>28}", col.name);
    }
    println!();
    for (i, inst) in counts.institutions().iter().enumerate() {
        print!("{inst:<10}");
        for j in 0..counts.n_columns() {
            print!("{:>28}", counts.count(i, j));
        }
        println!();
    }
}
