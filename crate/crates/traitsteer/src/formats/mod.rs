pub mod jsonl;
pub mod lexicon;
pub mod model;
pub mod questionnaire;
pub mod tables;
