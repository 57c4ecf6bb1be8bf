//! Neighbor-sentence graph embeddings.
//!
//! Each follower and the accounts it follows form one shuffled "sentence";
//! word2vec over those sentences places accounts with overlapping audiences
//! close together. Accounts left out of the vocabulary borrow the mean of
//! their embedded neighbors.

mod sentences;
mod table;
mod word2vec;

pub use sentences::{build_sentences, SentenceCorpus};
pub use table::{coldstart_embedding, fill_coldstart, EmbeddingTable};
pub use word2vec::{sgns_gradient, sgns_objective, train_embeddings, Mode, SgnsGradient, TrainConfig, Word2Vec};
