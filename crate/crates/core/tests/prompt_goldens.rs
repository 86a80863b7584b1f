//! Snapshot tests: rendered prompts must match the stored goldens
//! byte-exactly. Regenerate with UPDATE_GOLDENS=1 after a deliberate
//! template change and review the diff.

use revise_core::model::{Answer, AnswerKind, ChainStep, Problem, Stage};
use revise_core::prompts::{
    render_question_gen_prompt, render_resample_prompt, render_sampling_prompt,
    render_selection_prompt, ChainPosition, ResampleEncoding, TemplateLibrary,
};
use rust_decimal::Decimal;
use std::path::PathBuf;

fn goldens_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/goldens")
}

fn check(name: &str, rendered: &str) {
    let path = goldens_dir().join(format!("{name}.txt"));
    if std::env::var("UPDATE_GOLDENS").is_ok() {
        std::fs::write(&path, rendered).unwrap();
        return;
    }
    let stored = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden {name}: {e} (set UPDATE_GOLDENS=1 to create)"));
    assert_eq!(
        stored, rendered,
        "golden {name} diverged; regenerate deliberately with UPDATE_GOLDENS=1"
    );
}

fn gsm8k_problem() -> Problem {
    Problem {
        id: "gsm8k-test".into(),
        question: "Gunter is trying to count the jelly beans in a jar. He asks his friends how many they think are in the jar. One says 80. Another says 20 more than half the first one. A third says 25% more than the first one. What is their average guess?".into(),
        answer_kind: AnswerKind::Numeric,
        oracle_subquestions: Some(vec![
            "How many jelly beans does the second friend guess?".into(),
            "How many jelly beans does the third friend guess?".into(),
            "What is their average guess?".into(),
        ]),
        facts: None,
        gold: Answer::numeric(Decimal::from(80)),
    }
}

fn strategyqa_problem() -> Problem {
    Problem {
        id: "strategyqa-test".into(),
        question: "Would Alexander Hamilton have known about koalas?".into(),
        answer_kind: AnswerKind::Boolean,
        oracle_subquestions: Some(vec![
            "When did Alexander Hamilton die?".into(),
            "When was the koala first depicted?".into(),
            "Is #2 before #1?".into(),
        ]),
        facts: Some(vec![
            "Alexander Hamilton died in 1804.".into(),
            "The first published depiction of a koala was in 1810.".into(),
        ]),
        gold: Answer::boolean(false),
    }
}

fn autodebug_problem() -> Problem {
    Problem {
        id: "autodebug-test".into(),
        question: "s = 'abc'\nt = s.upper()\nWhat is the value of t at the end of this program?"
            .into(),
        answer_kind: AnswerKind::FreeText,
        oracle_subquestions: None,
        facts: None,
        gold: Answer::free_text("ABC"),
    }
}

#[test]
fn gsm8k_sampling_cot_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("gsm8k", Stage::Sampling, "cot").unwrap();
    assert_eq!(t.default_shots(), 5);
    let rendered = render_sampling_prompt(t, &gsm8k_problem(), None, None).unwrap();
    assert!(rendered.starts_with("I am a highly intelligent question answering bot"));
    check("gsm8k_sampling_cot", &rendered);
}

#[test]
fn gsm8k_sampling_subq_midchain_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("gsm8k", Stage::Sampling, "subq").unwrap();
    assert_eq!(t.default_shots(), 5);
    let problem = gsm8k_problem();
    let answered = [ChainStep::new(
        "How many jelly beans does the second friend guess?",
        "The second friend guesses 20 + 80/2 = <<20+80/2=60>>60 jelly beans. The answer is 60",
    )];
    let rendered = render_sampling_prompt(
        t,
        &problem,
        Some(ChainPosition {
            answered: &answered,
            current_question: "How many jelly beans does the third friend guess?",
            is_final: false,
        }),
        None,
    )
    .unwrap();
    check("gsm8k_sampling_subq_midchain", &rendered);
}

#[test]
fn gsm8k_resample_self_ask_cot_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("gsm8k", Stage::Resampling, "self_ask_cot").unwrap();
    assert_eq!(t.default_shots(), 4);
    let rendered = render_resample_prompt(
        t,
        &gsm8k_problem(),
        ResampleEncoding::WholeTrace {
            answer: "The average guess is (80 + 60 + 1.25*80)/3 = <<(80+60+1.25*80)/3=85>>85 jelly beans. The answer is 85",
        },
        None,
        None,
    )
    .unwrap();
    // 4-shot verdict prompt with two correct and two incorrect demonstrations
    assert_eq!(rendered.matches("Yes, the reasoning is correct").count(), 2);
    assert_eq!(rendered.matches("No, the reasoning is incorrect").count(), 2);
    check("gsm8k_resample_self_ask_cot", &rendered);
}

#[test]
fn gsm8k_resample_self_ask_subq_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("gsm8k", Stage::Resampling, "self_ask_subq").unwrap();
    let problem = gsm8k_problem();
    let prefix = [ChainStep::new(
        "How many jelly beans does the second friend guess?",
        "The second friend guesses 20 + 80/2 = <<20+80/2=60>>60 jelly beans. The answer is 60",
    )];
    let rendered = render_resample_prompt(
        t,
        &problem,
        ResampleEncoding::ChainStep {
            prefix: &prefix,
            question: "How many jelly beans does the third friend guess?",
            answer: "The third friend guesses 80*1.25 = <<80*1.25=100>>100 jelly beans. The answer is 100",
        },
        None,
        None,
    )
    .unwrap();
    assert_eq!(rendered.matches("Yes, the reasoning is correct").count(), 2);
    assert_eq!(rendered.matches("No, the reasoning is incorrect").count(), 2);
    check("gsm8k_resample_self_ask_subq", &rendered);
}

#[test]
fn gsm8k_selection_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("gsm8k", Stage::Selection, "select").unwrap();
    assert_eq!(t.default_shots(), 2);
    let choices = vec![
        "The second person guesses 20 + 1/2*80 = <<20+1/2*80=60>>60 jelly beans. The third person guesses 80*1.25 = <<80*1.25=100>>100 jelly beans. The total number of jelly beans is 80 + 60 + 100 = <<80+60+100=240>>240. The average guess is 240/3 = <<240/3=80>>80. The answer is 80".to_string(),
        "The average guess is (80 + 60 + 1.25*80)/3 = <<(80+60+1.25*80)/3=85>>85 jelly beans. The answer is 85".to_string(),
    ];
    let rendered = render_selection_prompt(t, &gsm8k_problem(), &choices, None).unwrap();
    assert!(rendered.ends_with("Answer: ("));
    check("gsm8k_selection", &rendered);
}

#[test]
fn gsm8k_question_gen_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("gsm8k", Stage::QuestionGen, "qg").unwrap();
    assert_eq!(t.default_shots(), 2);
    let rendered = render_question_gen_prompt(t, &gsm8k_problem(), None).unwrap();
    assert!(rendered.ends_with("Subquestions:"));
    check("gsm8k_question_gen", &rendered);
}

#[test]
fn strategyqa_sampling_cot_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("strategyqa", Stage::Sampling, "cot").unwrap();
    assert_eq!(t.default_shots(), 5);
    let rendered = render_sampling_prompt(t, &strategyqa_problem(), None, None).unwrap();
    check("strategyqa_sampling_cot", &rendered);
}

#[test]
fn strategyqa_sampling_subq_final_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("strategyqa", Stage::Sampling, "subq").unwrap();
    assert_eq!(t.default_shots(), 5);
    let problem = strategyqa_problem();
    let answered = [
        ChainStep::new("When did Alexander Hamilton die?", "Alexander Hamilton died in 1804."),
        ChainStep::new(
            "When was the koala first depicted?",
            "The first published depiction of a koala was in 1810.",
        ),
        ChainStep::new("Is #2 before #1?", "1810 is after 1804."),
    ];
    let rendered = render_sampling_prompt(
        t,
        &problem,
        Some(ChainPosition {
            answered: &answered,
            current_question: &problem.question,
            is_final: true,
        }),
        None,
    )
    .unwrap();
    assert!(rendered.ends_with("Final Answer:"));
    check("strategyqa_sampling_subq_final", &rendered);
}

#[test]
fn strategyqa_resample_self_ask_cot_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib
        .get("strategyqa", Stage::Resampling, "self_ask_cot")
        .unwrap();
    assert_eq!(t.default_shots(), 4);
    let rendered = render_resample_prompt(
        t,
        &strategyqa_problem(),
        ResampleEncoding::WholeTrace {
            answer: "Alexander Hamilton died in 1804. The first koala specimen was collected in 1792. It is possible that Hamilton knew about koalas. The answer is True",
        },
        None,
        None,
    )
    .unwrap();
    assert_eq!(rendered.matches("Yes, the reasoning is correct").count(), 2);
    assert_eq!(rendered.matches("No, the reasoning is incorrect").count(), 2);
    check("strategyqa_resample_self_ask_cot", &rendered);
}

#[test]
fn strategyqa_resample_self_ask_subq_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib
        .get("strategyqa", Stage::Resampling, "self_ask_subq")
        .unwrap();
    let problem = strategyqa_problem();
    let prefix = [ChainStep::new(
        "When did Alexander Hamilton die?",
        "Alexander Hamilton died in 1804.",
    )];
    let rendered = render_resample_prompt(
        t,
        &problem,
        ResampleEncoding::ChainStep {
            prefix: &prefix,
            question: "When was the koala first depicted?",
            answer: "The first koala specimen was collected in 1792.",
        },
        None,
        None,
    )
    .unwrap();
    check("strategyqa_resample_self_ask_subq", &rendered);
}

#[test]
fn strategyqa_resample_facts_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("strategyqa", Stage::Resampling, "facts").unwrap();
    assert_eq!(t.default_shots(), 4);
    let problem = strategyqa_problem();
    let facts = problem.facts.clone().unwrap();
    let rendered = render_resample_prompt(
        t,
        &problem,
        ResampleEncoding::QuestionOnly,
        Some(&facts),
        None,
    )
    .unwrap();
    let facts_pos = rendered.rfind("Facts:").unwrap();
    let cue_pos = rendered.rfind("Answer:").unwrap();
    assert!(facts_pos < cue_pos, "Facts block precedes the answer cue");
    check("strategyqa_resample_facts", &rendered);
}

#[test]
fn strategyqa_selection_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("strategyqa", Stage::Selection, "select").unwrap();
    let choices = vec![
        "Alexander Hamilton died in 1804. The first koala specimen was collected in 1792. It is possible that Hamilton knew about koalas. The answer is True".to_string(),
        "Alexander Hamilton died in 1804. The first published depiction of a koala was in 1810. He could not have known about koalas. The answer is False".to_string(),
    ];
    let rendered = render_selection_prompt(t, &strategyqa_problem(), &choices, None).unwrap();
    check("strategyqa_selection", &rendered);
}

#[test]
fn strategyqa_question_gen_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("strategyqa", Stage::QuestionGen, "qg").unwrap();
    let rendered = render_question_gen_prompt(t, &strategyqa_problem(), None).unwrap();
    check("strategyqa_question_gen", &rendered);
}

#[test]
fn autodebug_sampling_cot_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("autodebug", Stage::Sampling, "cot").unwrap();
    assert_eq!(t.default_shots(), 1);
    let rendered = render_sampling_prompt(t, &autodebug_problem(), None, None).unwrap();
    check("autodebug_sampling_cot", &rendered);
}

#[test]
fn autodebug_sampling_answer_only_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("autodebug", Stage::Sampling, "answer_only").unwrap();
    assert_eq!(t.default_shots(), 1);
    let rendered = render_sampling_prompt(t, &autodebug_problem(), None, None).unwrap();
    check("autodebug_sampling_answer_only", &rendered);
}

#[test]
fn autodebug_resample_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib
        .get("autodebug", Stage::Resampling, "self_ask_cot")
        .unwrap();
    assert_eq!(t.default_shots(), 2);
    let rendered = render_resample_prompt(
        t,
        &autodebug_problem(),
        ResampleEncoding::WholeTrace { answer: "abc" },
        None,
        None,
    )
    .unwrap();
    assert_eq!(rendered.matches("Yes, the answer is correct").count(), 1);
    assert_eq!(rendered.matches("No, the answer is incorrect").count(), 1);
    assert!(rendered.ends_with("Verdict:"));
    check("autodebug_resample", &rendered);
}

#[test]
fn autodebug_selection_golden() {
    let lib = TemplateLibrary::builtin();
    let t = lib.get("autodebug", Stage::Selection, "select").unwrap();
    let choices = vec!["abc".to_string(), "ABC".to_string()];
    let rendered = render_selection_prompt(t, &autodebug_problem(), &choices, None).unwrap();
    check("autodebug_selection", &rendered);
}

#[test]
fn goldens_cover_all_published_templates() {
    let stored: Vec<String> = std::fs::read_dir(goldens_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".txt"))
        .collect();
    assert!(
        stored.len() >= 10,
        "need at least 10 golden snapshots, have {}",
        stored.len()
    );
    println!(
        "criterion 7: PASS — {} prompt goldens matched byte-exactly",
        stored.len()
    );
}
