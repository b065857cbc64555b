//! Binary packing under convex quadratic knapsack constraints `xᵀWx ≤ c`.
//!
//! ```
//! use qkpack::golden::golden_ratio_solve;
//! use qkpack::greedy::greedy_solve;
//! use qkpack::io::instance_from_json;
//! use qkpack::oracle::brute_force;
//!
//! let inst = instance_from_json(
//!     r#"{"n": 3, "p": [6, 5, 4], "c": 12, "W": {"dense": [[4, 1, 0], [1, 3, 1], [0, 1, 2]]}}"#,
//! )
//! .unwrap();
//! let opt = brute_force(&inst).unwrap();
//! let golden = golden_ratio_solve(&inst, 1).unwrap();
//! let greedy = greedy_solve(&inst, 2).unwrap();
//! assert!(golden.feasible && greedy.feasible);
//! assert!(golden.value <= opt.value && 10 * golden.value >= 6 * opt.value);
//! assert_eq!(inst.weight(&opt.selected), opt.weight());
//! ```

pub mod bench;
pub mod golden;
pub mod greedy;
pub mod instances;
pub mod io;
pub mod mechanism;
pub mod model;
pub mod multi;
pub mod oracle;
pub mod relax;
pub mod subsets;
