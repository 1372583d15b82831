//! Model documents, CSV tables and synthetic datasets.

mod document;
pub mod synthetic;
mod table;

pub use document::{
    load_model, model_from_str, model_to_string, save_model, LoadedModel, ModelError, SCHEMA_VERSION,
    TABLE_PREFIX,
};
pub use synthetic::{generate_synthetic_building_load, generate_synthetic_solar, BuildingLoadParams};
pub use table::{load_csv_table, Column, ColumnType, Table, TableError, TableStore, INFERENCE_ROWS};
