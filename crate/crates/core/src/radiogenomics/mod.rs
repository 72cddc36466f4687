//! Survival prediction from fused radiomic and genomic features: ingestion,
//! fusion, recursive feature elimination, SVM and ANN models, k-fold
//! evaluation and Shapley attribution.

pub mod ann;
pub mod evaluate;
pub mod fusion;
pub mod genes;
pub mod rfe;
pub mod shap;
pub mod survival;
pub mod svm;

pub use evaluate::{evaluate_survival, train_survival_model, SurvivalConfig, SurvivalEvaluation, SurvivalModel, SurvivalModelKind};
pub use fusion::{fuse, ColumnSource, FusedFeatureSet, RadiomicTable, Standardizer};
pub use genes::{load_gene_expression, GeneExpressionMatrix};
pub use rfe::{rfe_select, RfeConfig, RfeResult};
pub use shap::{rank_features_by_shap, shap_attribution, shap_exact, shap_sampled, ShapValues};
pub use survival::{classify_survival, SurvivalClass, SurvivalRecord, Thresholds};
