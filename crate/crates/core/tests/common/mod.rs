//! Shared fixture: a 12-example synthetic dataset with a fully scripted
//! backend whose behavior is declared in a truth table, plus an independent
//! brute-force tracer that recomputes the expected metrics from that table
//! without touching the pipeline.

use revise_core::datasets::synthetic_problems;
use revise_core::gateway::MockScript;
use revise_core::model::Problem;

/// Which side a scripted selector prefers for a revised episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorPick {
    Original,
    Revision,
}

/// Declarative behavior of the scripted backend for one problem.
#[derive(Debug, Clone, Copy)]
pub struct CaseSpec {
    pub sample_correct: bool,
    pub gate_no: bool,
    /// Only meaningful when `gate_no`.
    pub revision_correct: bool,
    /// Only meaningful when `gate_no`.
    pub selector_pick: SelectorPick,
}

/// The 12-case truth table: sampling solves 6; the gate fires on 5 of them,
/// fixing three wrong answers and breaking two correct ones; the scripted
/// selector recovers every pair except case 8, where it prefers the wrong
/// original.
pub fn acceptance_cases() -> Vec<CaseSpec> {
    let mut cases = Vec::new();
    for i in 0..12usize {
        let sample_correct = i < 6;
        let gate_no = matches!(i, 0 | 1 | 6 | 7 | 8);
        let revision_correct = matches!(i, 6 | 7 | 8);
        let selector_pick = match i {
            0 | 1 => SelectorPick::Original,
            6 | 7 => SelectorPick::Revision,
            8 => SelectorPick::Original, // deliberately wrong choice
            _ => SelectorPick::Original,
        };
        cases.push(CaseSpec {
            sample_correct,
            gate_no,
            revision_correct,
            selector_pick,
        });
    }
    cases
}

pub fn acceptance_problems() -> Vec<Problem> {
    let problems = synthetic_problems(12, 42);
    let mut questions: Vec<_> = problems.iter().map(|p| p.question.clone()).collect();
    questions.sort();
    questions.dedup();
    assert_eq!(questions.len(), 12, "fixture questions must be distinct");
    problems
}

fn gold_of(problem: &Problem) -> i64 {
    problem.gold.display().parse().expect("synthetic golds are integers")
}

/// Scripted backend implementing the truth table. Rule order matters: the
/// selection and gate prompts for a problem also contain its question text,
/// so more specific rules come first.
pub fn acceptance_script(problems: &[Problem], cases: &[CaseSpec]) -> MockScript {
    let mut script = MockScript::new();

    // Selection prompts: pick the label whose choice line ends with the
    // preferred marker.
    for (problem, case) in problems.iter().zip(cases) {
        let gold = gold_of(problem);
        let preferred = match (case.gate_no, case.selector_pick, case.sample_correct) {
            // marker of the candidate the selector should choose
            (true, SelectorPick::Original, true) => gold,
            (true, SelectorPick::Original, false) => gold + 1,
            (true, SelectorPick::Revision, _) => {
                if case.revision_correct {
                    gold
                } else {
                    gold + 1
                }
            }
            _ => gold,
        };
        let marker = format!("The answer is {preferred}");
        script = script.on_fn(
            ["Answer choices:".to_string(), format!("Question: {}", problem.question)],
            move |req| {
                for line in req.prompt.lines() {
                    if line.starts_with('(') && line.ends_with(marker.as_str()) {
                        return format!("{})", &line[1..2]);
                    }
                }
                "A)".to_string()
            },
        );
    }

    // Gate prompts.
    for (problem, case) in problems.iter().zip(cases) {
        let gold = gold_of(problem);
        let response = if case.gate_no {
            let revised = if case.revision_correct { gold } else { gold + 1 };
            format!(
                "No, the reasoning is incorrect. Final Answer: Refreshed count. The answer is {revised}"
            )
        } else {
            let restated = if case.sample_correct { gold } else { gold + 1 };
            format!(
                "Yes, the reasoning is correct. Final Answer: Restated count. The answer is {restated}"
            )
        };
        script = script.on(
            ["`Yes' or `No'".to_string(), format!("Question: {}", problem.question)],
            response,
        );
    }

    // Sampling prompts.
    for (problem, case) in problems.iter().zip(cases) {
        let gold = gold_of(problem);
        let sampled = if case.sample_correct { gold } else { gold + 1 };
        script = script.on(
            [format!("Question: {}", problem.question)],
            format!("Count it step by step. The answer is {sampled}"),
        );
    }

    script
}

/// Metrics recomputed from the truth table alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedMetrics {
    pub sampling_correct: usize,
    pub always_next_correct: usize,
    pub selector_correct: usize,
    pub any_candidate_correct: usize,
    pub resampled: usize,
}

/// Independent brute-force trace of the fixture (no pipeline code involved).
pub fn trace_expected(cases: &[CaseSpec]) -> TracedMetrics {
    let mut sampling = 0;
    let mut always_next = 0;
    let mut selector = 0;
    let mut any = 0;
    let mut resampled = 0;
    for case in cases {
        if case.sample_correct {
            sampling += 1;
        }
        if case.gate_no {
            resampled += 1;
            if case.revision_correct {
                always_next += 1;
            }
            let picked_correct = match case.selector_pick {
                SelectorPick::Original => case.sample_correct,
                SelectorPick::Revision => case.revision_correct,
            };
            if picked_correct {
                selector += 1;
            }
            if case.sample_correct || case.revision_correct {
                any += 1;
            }
        } else {
            if case.sample_correct {
                always_next += 1;
                selector += 1;
                any += 1;
            }
        }
    }
    TracedMetrics {
        sampling_correct: sampling,
        always_next_correct: always_next,
        selector_correct: selector,
        any_candidate_correct: any,
        resampled,
    }
}
