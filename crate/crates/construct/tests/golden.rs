//! Golden-file checks for the prompt corpus: every rendered template must
//! byte-match its checked-in golden on the invoice fixture, and rendering
//! must never leave a placeholder unresolved.
//!
//! Regenerate goldens with `REGEN_GOLDENS=1 cargo test --test golden`.

mod common;

use rand::rngs::StdRng;
use rand::SeedableRng;

use construct::templates::TemplateSet;
use construct::types::TemplateId;

const GOLDEN_CASES: [(TemplateId, &str, Option<&str>); 8] = [
    (TemplateId::T1, "t1_doc_score", None),
    (TemplateId::T2Numeric, "t2_field_scores_numeric", None),
    (TemplateId::T3Likert, "t3_field_scores_likert", None),
    (TemplateId::T4FlagAccuracy, "t4_flag_accuracy", None),
    (TemplateId::T5FlagConfidence, "t5_flag_confidence", None),
    (TemplateId::JudgeDocument, "judge_document", None),
    (TemplateId::JudgeFieldsSingle, "judge_fields_single", None),
    (TemplateId::JudgeFieldsMulti, "judge_fields_multi", Some("currency")),
];

#[test]
fn rendered_templates_match_goldens() {
    let set = TemplateSet::builtin();
    let task = common::invoice_task();
    let regen = std::env::var_os("REGEN_GOLDENS").is_some();

    for (id, name, relevant_field) in GOLDEN_CASES {
        let rendered = set.render(id, &task, relevant_field).expect("renders");
        let path = common::golden_dir().join(format!("{name}.golden.txt"));
        if regen {
            std::fs::write(&path, &rendered).expect("golden writable");
            continue;
        }
        let golden = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
        assert_eq!(rendered, golden, "template {id} drifted from its golden file");
    }
}

#[test]
fn no_unresolved_placeholders_on_random_tasks() {
    let set = TemplateSet::builtin();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let placeholder_tokens = [
        "{input_to_generator}",
        "{schema_text}",
        "{generated_output_text}",
        "{relevant_field}",
        "{PLACEHOLDER",
    ];
    for _ in 0..1000 {
        let task = common::random_task(&mut rng);
        let relevant = task.output_schema.top_level_fields()[0].clone();
        for (id, _, needs_field) in GOLDEN_CASES {
            let field = needs_field.map(|_| relevant.as_str());
            let rendered = set.render(id, &task, field).expect("renders");
            for token in placeholder_tokens {
                assert!(
                    !rendered.contains(token),
                    "{id} left {token} unresolved"
                );
            }
        }
    }
}
