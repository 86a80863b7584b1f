//! Dataset loaders: grade-school math (JSON Lines with "####" golds and the
//! subquestion-annotated variant), the multi-hop boolean corpus (JSON array
//! with facts and decompositions), the code-debugging task file, and a
//! synthetic arithmetic generator for desk-scale end-to-end tests.

use crate::error::{Error, Result};
use crate::model::{parse_gold, Answer, AnswerKind, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Gsm8k,
    Strategyqa,
    Autodebug,
    Synthetic,
}

impl DatasetName {
    /// Task key used for template lookup.
    pub fn task(&self) -> &'static str {
        match self {
            DatasetName::Gsm8k => "gsm8k",
            DatasetName::Strategyqa => "strategyqa",
            DatasetName::Autodebug => "autodebug",
            DatasetName::Synthetic => "synthetic",
        }
    }
}

impl std::str::FromStr for DatasetName {
    type Err = Error;
    fn from_str(s: &str) -> Result<DatasetName> {
        match s {
            "gsm8k" => Ok(DatasetName::Gsm8k),
            "strategyqa" => Ok(DatasetName::Strategyqa),
            "autodebug" => Ok(DatasetName::Autodebug),
            "synthetic" => Ok(DatasetName::Synthetic),
            other => Err(Error::InvalidConfig(format!("unknown dataset {other}"))),
        }
    }
}

/// Where and how to load a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: DatasetName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Subquestion-annotated companion file (gsm8k only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub socratic_path: Option<PathBuf>,
    #[serde(default)]
    pub offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    /// Record held out as the in-prompt demonstration (autodebug only);
    /// defaults to the first record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo_id: Option<String>,
    /// Generator seed (synthetic only).
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(name: DatasetName) -> DatasetSpec {
        DatasetSpec {
            name,
            path: None,
            socratic_path: None,
            offset: 0,
            limit: None,
            demo_id: None,
            seed: 0,
        }
    }
}

/// Default split size for the multi-hop boolean corpus.
pub const STRATEGYQA_DEFAULT_LIMIT: usize = 490;
/// Default size of the generated synthetic dataset.
pub const SYNTHETIC_DEFAULT_LIMIT: usize = 12;

/// Loads the problems a spec describes, in file order.
pub fn load(spec: &DatasetSpec) -> Result<Vec<Problem>> {
    let problems = match spec.name {
        DatasetName::Gsm8k => load_gsm8k(spec)?,
        DatasetName::Strategyqa => load_strategyqa(spec)?,
        DatasetName::Autodebug => load_autodebug(spec)?,
        DatasetName::Synthetic => {
            synthetic_problems(spec.limit.unwrap_or(SYNTHETIC_DEFAULT_LIMIT), spec.seed)
        }
    };
    for p in &problems {
        p.validate()
            .map_err(|m| Error::Dataset { path: spec_path(spec), message: m })?;
    }
    Ok(problems)
}

fn spec_path(spec: &DatasetSpec) -> String {
    spec.path
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| spec.name.task().to_string())
}

fn required_path<'a>(spec: &'a DatasetSpec) -> Result<&'a Path> {
    spec.path.as_deref().ok_or_else(|| {
        Error::InvalidConfig(format!("dataset {} requires a path", spec.name.task()))
    })
}

fn apply_split<T>(records: Vec<T>, spec: &DatasetSpec, default_limit: Option<usize>) -> Vec<T> {
    let limit = spec.limit.or(default_limit).unwrap_or(usize::MAX);
    records
        .into_iter()
        .skip(spec.offset)
        .take(limit)
        .collect()
}

#[derive(Deserialize)]
struct Gsm8kRecord {
    question: String,
    answer: String,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Dataset {
        path: path.display().to_string(),
        message: format!("cannot open: {e}"),
    })?;
    let mut records = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            path: path.display().to_string(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Gold answer is the normalized number after the final "####" delimiter.
fn gsm8k_gold(answer: &str, path: &Path, lineno: usize) -> Result<Answer> {
    let tail = answer.rsplit("####").next().unwrap_or("").trim();
    parse_gold(tail, AnswerKind::Numeric).ok_or_else(|| Error::Dataset {
        path: path.display().to_string(),
        message: format!("record {lineno}: gold {tail:?} is not a number"),
    })
}

/// Subquestions are the text before " ** " on each solution line.
fn socratic_subquestions(answer: &str) -> Vec<String> {
    answer
        .lines()
        .filter(|l| !l.trim_start().starts_with("####"))
        .filter_map(|l| l.split(" ** ").next())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Loads the math word-problem corpus; a companion subquestion file, when
/// given, populates `oracle_subquestions` record by record.
pub fn load_gsm8k(spec: &DatasetSpec) -> Result<Vec<Problem>> {
    let path = required_path(spec)?;
    let records: Vec<Gsm8kRecord> = read_jsonl(path)?;
    let socratic: Option<Vec<Gsm8kRecord>> = spec
        .socratic_path
        .as_deref()
        .map(read_jsonl)
        .transpose()?;
    if let Some(soc) = &socratic {
        if soc.len() != records.len() {
            return Err(Error::Dataset {
                path: path.display().to_string(),
                message: format!(
                    "subquestion file has {} records, main file has {}",
                    soc.len(),
                    records.len()
                ),
            });
        }
    }
    let mut problems = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let gold = gsm8k_gold(&record.answer, path, i + 1)?;
        let oracle_subquestions = match &socratic {
            Some(soc) => {
                let questions = socratic_subquestions(&soc[i].answer);
                if questions.is_empty() {
                    return Err(Error::Dataset {
                        path: path.display().to_string(),
                        message: format!("record {}: no subquestions in companion file", i + 1),
                    });
                }
                Some(questions)
            }
            None => None,
        };
        problems.push(Problem {
            id: format!("gsm8k-{i:05}"),
            question: record.question.trim().to_string(),
            answer_kind: AnswerKind::Numeric,
            oracle_subquestions,
            facts: None,
            gold,
        });
    }
    Ok(apply_split(problems, spec, None))
}

#[derive(Deserialize)]
struct StrategyQaRecord {
    #[serde(default)]
    qid: Option<String>,
    question: String,
    answer: bool,
    #[serde(default)]
    facts: Vec<String>,
    #[serde(default)]
    decomposition: Vec<String>,
}

/// Loads the multi-hop boolean corpus (JSON array). The default split takes
/// the first 490 records.
pub fn load_strategyqa(spec: &DatasetSpec) -> Result<Vec<Problem>> {
    let path = required_path(spec)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Dataset {
        path: path.display().to_string(),
        message: format!("cannot open: {e}"),
    })?;
    let records: Vec<StrategyQaRecord> =
        serde_json::from_str(&text).map_err(|e| Error::Dataset {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let problems = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| Problem {
            id: r.qid.unwrap_or_else(|| format!("strategyqa-{i:04}")),
            question: r.question.trim().to_string(),
            answer_kind: AnswerKind::Boolean,
            oracle_subquestions: (!r.decomposition.is_empty()).then_some(r.decomposition),
            facts: (!r.facts.is_empty()).then_some(r.facts),
            gold: Answer::boolean(r.answer),
        })
        .collect();
    Ok(apply_split(problems, spec, Some(STRATEGYQA_DEFAULT_LIMIT)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TargetField {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
struct BigBenchExample {
    input: String,
    target: TargetField,
}

#[derive(Deserialize)]
struct BigBenchTask {
    examples: Vec<BigBenchExample>,
}

/// Loads the code-debugging task file, excluding the record held out as the
/// in-prompt demonstration (the first record unless `demo_id` overrides it).
pub fn load_autodebug(spec: &DatasetSpec) -> Result<Vec<Problem>> {
    let path = required_path(spec)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Dataset {
        path: path.display().to_string(),
        message: format!("cannot open: {e}"),
    })?;
    let task: BigBenchTask = serde_json::from_str(&text).map_err(|e| Error::Dataset {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut problems = Vec::with_capacity(task.examples.len());
    for (i, example) in task.examples.into_iter().enumerate() {
        let target = match example.target {
            TargetField::One(t) => t,
            TargetField::Many(ts) => ts.into_iter().next().unwrap_or_default(),
        };
        let gold = parse_gold(&target, AnswerKind::FreeText).ok_or_else(|| Error::Dataset {
            path: path.display().to_string(),
            message: format!("example {i}: empty target"),
        })?;
        problems.push(Problem {
            id: format!("autodebug-{i:02}"),
            question: example.input.trim().to_string(),
            answer_kind: AnswerKind::FreeText,
            oracle_subquestions: None,
            facts: None,
            gold,
        });
    }
    let demo_id = spec
        .demo_id
        .clone()
        .or_else(|| problems.first().map(|p| p.id.clone()))
        .unwrap_or_default();
    let before = problems.len();
    problems.retain(|p| p.id != demo_id);
    if problems.len() == before {
        return Err(Error::Dataset {
            path: path.display().to_string(),
            message: format!("demonstration id {demo_id:?} not found"),
        });
    }
    Ok(apply_split(problems, spec, None))
}

/// Deterministic two-step arithmetic problems with known golds, oracle
/// subquestions, and facts, for offline end-to-end tests.
pub fn synthetic_problems(n: usize, seed: u64) -> Vec<Problem> {
    const NAMES: [&str; 6] = ["Liam", "Maya", "Omar", "Sana", "Theo", "Iris"];
    const ITEMS: [&str; 6] = ["marbles", "stickers", "coins", "apples", "cards", "beads"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let name = NAMES[rng.random_range(0..NAMES.len())];
            let item = ITEMS[rng.random_range(0..ITEMS.len())];
            let start = rng.random_range(2..20u32);
            let morning = rng.random_range(1..10u32);
            let evening = rng.random_range(1..10u32);
            let total = morning + evening;
            let gold = start + total;
            let question = format!(
                "{name} has {start} {item}. They get {morning} more in the morning and \
                 {evening} more in the evening. How many {item} does {name} have now?"
            );
            Problem {
                id: format!("synthetic-{i:04}"),
                question,
                answer_kind: AnswerKind::Numeric,
                oracle_subquestions: Some(vec![
                    format!("How many {item} does {name} get in total?"),
                    format!("How many {item} does {name} have now?"),
                ]),
                facts: Some(vec![
                    format!("{name} starts with {start} {item}."),
                    format!("{name} gets {total} {item} in total."),
                ]),
                gold: Answer::numeric(gold.into()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::answers_equal;
    use rust_decimal::Decimal;
    use std::io::Write;

    fn fixture(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/fixtures/datasets")
            .join(name)
    }

    #[test]
    fn gsm8k_fixture_parses_with_subquestions() {
        let mut spec = DatasetSpec::new(DatasetName::Gsm8k);
        spec.path = Some(fixture("gsm8k_sample.jsonl"));
        spec.socratic_path = Some(fixture("gsm8k_socratic_sample.jsonl"));
        let problems = load(&spec).unwrap();
        assert_eq!(problems.len(), 5);
        let natalia = &problems[0];
        assert!(natalia.question.starts_with("Natalia sold clips"));
        assert!(answers_equal(
            &natalia.gold,
            &Answer::numeric(Decimal::from(72))
        ));
        let subqs = natalia.oracle_subquestions.as_ref().unwrap();
        assert_eq!(subqs.len(), 2);
        assert!(subqs[0].ends_with('?'));
        // separator-formatted gold normalizes
        assert!(answers_equal(
            &problems[4].gold,
            &Answer::numeric(Decimal::from(1048))
        ));
    }

    #[test]
    fn gsm8k_limit_zero_is_empty() {
        let mut spec = DatasetSpec::new(DatasetName::Gsm8k);
        spec.path = Some(fixture("gsm8k_sample.jsonl"));
        spec.limit = Some(0);
        assert!(load(&spec).unwrap().is_empty());
    }

    #[test]
    fn gsm8k_malformed_gold_aborts_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, r#"{{"question": "ok?", "answer": "x #### 12"}}"#).unwrap();
        writeln!(f, r#"{{"question": "bad?", "answer": "no delimiter here"}}"#).unwrap();
        let mut spec = DatasetSpec::new(DatasetName::Gsm8k);
        spec.path = Some(path);
        match load(&spec).unwrap_err() {
            Error::Dataset { message, .. } => assert!(message.contains("record 2")),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn strategyqa_fixture_parses_facts_and_decomposition() {
        let mut spec = DatasetSpec::new(DatasetName::Strategyqa);
        spec.path = Some(fixture("strategyqa_sample.json"));
        let problems = load(&spec).unwrap();
        assert_eq!(problems.len(), 5);
        let koala = problems
            .iter()
            .find(|p| p.question.contains("koalas"))
            .unwrap();
        assert!(answers_equal(&koala.gold, &Answer::boolean(false)));
        assert!(koala.facts.as_ref().unwrap().len() >= 2);
        assert!(!koala.oracle_subquestions.as_ref().unwrap().is_empty());
    }

    #[test]
    fn strategyqa_missing_answer_is_a_record_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"[{"question": "q?", "facts": []}]"#).unwrap();
        let mut spec = DatasetSpec::new(DatasetName::Strategyqa);
        spec.path = Some(path);
        assert!(matches!(load(&spec), Err(Error::Dataset { .. })));
    }

    #[test]
    fn autodebug_excludes_the_demonstration_record() {
        let mut spec = DatasetSpec::new(DatasetName::Autodebug);
        spec.path = Some(fixture("autodebug_sample.json"));
        let problems = load(&spec).unwrap();
        // fixture has 4 examples; the first is the demonstration
        assert_eq!(problems.len(), 3);
        assert!(problems.iter().all(|p| p.id != "autodebug-00"));
        assert!(problems.iter().all(|p| p.answer_kind == AnswerKind::FreeText));
    }

    #[test]
    fn autodebug_demo_exclusion_is_configurable_and_validated() {
        let mut spec = DatasetSpec::new(DatasetName::Autodebug);
        spec.path = Some(fixture("autodebug_sample.json"));
        spec.demo_id = Some("autodebug-02".into());
        let problems = load(&spec).unwrap();
        assert!(problems.iter().any(|p| p.id == "autodebug-00"));
        assert!(problems.iter().all(|p| p.id != "autodebug-02"));

        spec.demo_id = Some("autodebug-99".into());
        assert!(matches!(load(&spec), Err(Error::Dataset { .. })));
    }

    #[test]
    fn loaders_are_deterministic_and_order_preserving() {
        let mut spec = DatasetSpec::new(DatasetName::Gsm8k);
        spec.path = Some(fixture("gsm8k_sample.jsonl"));
        let a = load(&spec).unwrap();
        let b = load(&spec).unwrap();
        assert_eq!(a, b);
        let ids: Vec<_> = a.iter().map(|p| p.id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn golds_roundtrip_through_equality() {
        for spec in [
            {
                let mut s = DatasetSpec::new(DatasetName::Gsm8k);
                s.path = Some(fixture("gsm8k_sample.jsonl"));
                s
            },
            {
                let mut s = DatasetSpec::new(DatasetName::Strategyqa);
                s.path = Some(fixture("strategyqa_sample.json"));
                s
            },
        ] {
            for p in load(&spec).unwrap() {
                assert!(answers_equal(&p.gold, &p.gold));
            }
        }
    }

    #[test]
    fn synthetic_generator_is_deterministic_with_consistent_golds() {
        let a = synthetic_problems(12, 7);
        let b = synthetic_problems(12, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        for p in &a {
            p.validate().unwrap();
            assert_eq!(p.oracle_subquestions.as_ref().unwrap().len(), 2);
            assert_eq!(p.facts.as_ref().unwrap().len(), 2);
        }
        let c = synthetic_problems(12, 8);
        assert_ne!(a, c);
    }
}
