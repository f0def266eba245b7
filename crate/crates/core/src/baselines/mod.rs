//! Single-modality baselines: hand-crafted features with a linear SVM, a
//! convolutional text classifier and attention-pooling sequence classifiers.

pub mod attention_pool;
pub mod handcrafted;
pub mod lexicon;
pub mod svm;
pub mod textcnn;

pub use attention_pool::AttentionPoolClassifier;
pub use handcrafted::{FeatureGroup, HandcraftedExtractor, HandcraftedFeatureVector, TfIdfVocab};
pub use lexicon::{CategoryLexicon, Lexicon, LexiconSet};
pub use svm::{train_svm, ColumnNormalizer, LinearSvm, SvmConfig};
pub use textcnn::{TextCnn, TextCnnConfig};
