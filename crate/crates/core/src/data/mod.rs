//! Tabular CTR data: CSV ingestion, per-field vocabularies, seeded splits and
//! minibatch iteration.

mod dataset;
mod table;
mod vocab;

pub use dataset::{batches, encode, split, Batch, Batches, EncodedDataset};
pub use table::{load_table, write_table, DatasetSchema, RawTable};
pub use vocab::{build_vocab, FieldVocab, Vocabulary};
