//! Templates shipped with the crate. The source of truth is the TOML files
//! under `crates/core/templates/`; they are embedded here so binaries are
//! self-contained.

pub const BUILTIN_TEMPLATES: &[&str] = &[
    include_str!("../../templates/gsm8k/sampling_cot.toml"),
    include_str!("../../templates/gsm8k/sampling_subq.toml"),
    include_str!("../../templates/gsm8k/resampling_self_ask_cot.toml"),
    include_str!("../../templates/gsm8k/resampling_self_ask_subq.toml"),
    include_str!("../../templates/gsm8k/selection_select.toml"),
    include_str!("../../templates/gsm8k/question_gen_qg.toml"),
    include_str!("../../templates/strategyqa/sampling_cot.toml"),
    include_str!("../../templates/strategyqa/sampling_subq.toml"),
    include_str!("../../templates/strategyqa/resampling_self_ask_cot.toml"),
    include_str!("../../templates/strategyqa/resampling_self_ask_subq.toml"),
    include_str!("../../templates/strategyqa/resampling_facts.toml"),
    include_str!("../../templates/strategyqa/selection_select.toml"),
    include_str!("../../templates/strategyqa/question_gen_qg.toml"),
    include_str!("../../templates/autodebug/sampling_cot.toml"),
    include_str!("../../templates/autodebug/sampling_answer_only.toml"),
    include_str!("../../templates/autodebug/resampling_self_ask_cot.toml"),
    include_str!("../../templates/autodebug/selection_select.toml"),
    include_str!("../../templates/synthetic/sampling_cot.toml"),
    include_str!("../../templates/synthetic/sampling_answer_only.toml"),
    include_str!("../../templates/synthetic/sampling_subq.toml"),
    include_str!("../../templates/synthetic/resampling_self_ask_cot.toml"),
    include_str!("../../templates/synthetic/resampling_self_ask_subq.toml"),
    include_str!("../../templates/synthetic/resampling_facts.toml"),
    include_str!("../../templates/synthetic/selection_select.toml"),
    include_str!("../../templates/synthetic/question_gen_qg.toml"),
];
