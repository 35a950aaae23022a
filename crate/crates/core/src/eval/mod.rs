//! Cross-dataset evaluation: class-intersection filtering, macro F1, the
//! results store and the fold-averaged performance tensor.

mod evaluate;
mod f1;
mod results;
mod tensor;

pub use evaluate::{class_intersection_filter, evaluate_model, EvalOutcome, EvalResult, FilteredTest, MissingPair};
pub use f1::{macro_f1, per_class_f1, ConfusionMatrix};
pub use results::{
    missing_to_csv, parse_missing_csv, parse_results_csv, read_results_csv, results_to_csv, EvalKey, EvalRow,
    ResultsStore, MISSING_CSV, RESULTS_CSV, RESULTS_HEADER,
};
pub use tensor::{build_performance_tensor, PerformanceTensor, TensorKey};
