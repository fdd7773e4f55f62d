//! Metamorphic testing of automated protein function prediction tools.
//!
//! A campaign takes canonical protein sequences and documented variants,
//! builds source/follow-up test case pairs, runs (or ingests) each tool on
//! every sequence, and checks that the predicted GO term sets change when the
//! sequence changes. Results are aggregated per tool, per protein and per
//! variant.

pub mod campaign;
pub mod config;
pub mod mockbench;
pub mod mr;
pub mod ontology;
pub mod predictions;
pub mod report;
pub mod runner;
pub mod sequence;
pub mod variants;

pub use config::{CampaignConfig, ConfigError, ToolConfig};
pub use mockbench::{mock_as_adapter, mock_predict, MockBehavior, MockError, MockSpec};
pub use mr::{
    check_mr_change, diagnostic_difference, evaluate_pair, ChangeOutcome, MetamorphicRelation, MrVerdict, Outcome,
    RelationRegistry, DEFAULT_NAMESPACES, VARIANT_CHANGE_MR,
};
pub use ontology::{load_obo, parse_obo, GoTermId, Namespace, Ontology, OntologyError, Relation, Term};
pub use predictions::{
    parse_predictions, to_annotation_set, AnnotationSet, IngestWarning, Prediction, PredictionError, PredictionFormat,
};
pub use report::{aggregate, pass_percentage, Counts, ReportError, ReportMetadata, TestReport};
pub use runner::{execute_campaign, run_tool, AdapterMode, RunResult, RunStatus, RunnerError, ToolAdapter};
pub use sequence::{parse_fasta, write_fasta, AminoAcidSequence, ProteinRecord, SequenceError};
pub use variants::{
    allocate_variant_counts, apply_variant, generate_pairs, select_variants, TestCasePair, VariantCategory, VariantError,
    VariantKind, VariantSpec,
};
