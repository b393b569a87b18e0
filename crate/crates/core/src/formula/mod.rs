//! Model formulas, CSV ingestion and design-matrix construction.
//!
//! ```
//! use countdiag::formula::{build_design, parse_formula, read_table_from};
//!
//! let table = read_table_from("y,x\n0,1.5\n2,0.5\n1,2.0\n".as_bytes(), None).unwrap();
//! let ast = parse_formula("y ~ x + x^2").unwrap();
//! let data = build_design(&ast, &table).unwrap();
//! assert_eq!(data.count.column_names(), &["(Intercept)", "x", "x^2"]);
//! ```

mod design;
mod parse;
mod table;

pub use design::{build_design, build_matrix, ModelData};
pub use parse::{parse_formula, FormulaAst, Term, TermList};
pub use table::{read_table, read_table_from, Column, DataTable, Schema};
