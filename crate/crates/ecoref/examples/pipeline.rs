//! The whole pipeline through the library API: generate a raw submissions
//! and results pair, then ingest, fit (both methods, both levels),
//! cross-validate and report, writing every artifact into
//! `target/pipeline-demo/`. The `ecoref` binary drives exactly these
//! stages from the command line.
//!
//! ```bash
//! cargo run -p ecoref --example pipeline
//! ```

use std::fmt::Write as _;

use ecoref::cli::{cmd_cv, cmd_fit, cmd_ingest, cmd_report, ChainSettings, CvSettings, RunConfig};
use ecoref::ingest::ColumnKind;
use ecoref::synthetic::{generate, SyntheticConfig};

fn main() {
    let data = generate(&SyntheticConfig {
        institutions: 10,
        journals: 6,
        articles_per_institution: 30,
        pi4_range: (0.15, 0.7),
        cumulative_gap: 1.4,
        preference_sd: 2.0,
        seed: 12,
    });

    // Lay the dataset out as the raw CSV pair a real run starts from.
    let input_dir = std::path::PathBuf::from("target/pipeline-demo/input");
    std::fs::create_dir_all(&input_dir).unwrap();
    let mut submissions =
        String::from("output_id,institution,uoa,output_type,doi,issn_list,isbn,volume_title\n");
    let mut serial = 0;
    let counts = &data.counts;
    for (i, inst) in counts.institutions().iter().enumerate() {
        for (j, column) in counts.columns().iter().enumerate() {
            for copy in 0..counts.count(i, j) {
                serial += 1;
                match column.kind {
                    ColumnKind::NamedJournal => writeln!(
                        submissions,
                        "o{serial:05},{inst},demo,journal-article,,{:04}-000X,,{}",
                        1000 + j,
                        column.name
                    )
                    .unwrap(),
                    ColumnKind::OtherJournals => writeln!(
                        submissions,
                        "o{serial:05},{inst},demo,journal-article,,,,Tiny Venue {i}-{copy}"
                    )
                    .unwrap(),
                    _ => writeln!(submissions, "o{serial:05},{inst},demo,other,,,,").unwrap(),
                }
            }
        }
    }
    let mut results = String::from(
        "institution,uoa,fte,outputs_pct_4,outputs_pct_3,outputs_pct_2,outputs_pct_1,outputs_pct_u,envir_pct_4\n",
    );
    for p in &data.profiles {
        let n = f64::from(p.total_outputs);
        let pct4 = f64::from(p.y4) / n * 100.0;
        let pct3 = f64::from(p.y34 - p.y4) / n * 100.0;
        writeln!(
            results,
            "{},demo,{},{pct4},{pct3},{},0,0,25",
            p.institution,
            p.fte,
            100.0 - pct4 - pct3
        )
        .unwrap();
    }
    std::fs::write(input_dir.join("submissions.csv"), submissions).unwrap();
    std::fs::write(input_dir.join("results.csv"), results).unwrap();

    let config = RunConfig {
        submissions: Some(input_dir.join("submissions.csv")),
        results: Some(input_dir.join("results.csv")),
        threshold: 3,
        out_dir: "target/pipeline-demo/out".into(),
        seed: 99,
        // Short chains keep the demo to seconds; defaults are the real
        // setting.
        chains: ChainSettings {
            chains: 2,
            warmup_iters: 200,
            sample_iters: 100,
            ..ChainSettings::default()
        },
        cv: CvSettings {
            folds: 5,
            grid: vec![0.5, 1.0, 2.0],
        },
        ..RunConfig::default()
    };

    cmd_ingest(&config).expect("ingest");
    cmd_fit(&config).expect("fit");
    cmd_cv(&config).expect("cv");
    cmd_report(&config).expect("report");
    println!("\nartifacts in target/pipeline-demo/out:");
    let mut names: Vec<_> = std::fs::read_dir("target/pipeline-demo/out")
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }
}
