pub mod assembly;
pub mod bsp;
pub mod engine;
pub mod fragment;
pub mod matcher;
pub mod oracle;
pub mod par;
pub mod query;
pub mod rdf;
pub mod sparql;
