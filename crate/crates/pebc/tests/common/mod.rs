pub mod modelgen;
