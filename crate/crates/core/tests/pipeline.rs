mod common;

use common::{hem_config, small_corpus};
use hemfair::corpus::load_manifest;
use hemfair::embeddings::EmbeddingTable;
use hemfair::pipeline::{corpus_hem, talk_hem};
use hemfair::synth::write_corpus;

#[test]
fn files_reproduce_in_memory_scores() {
    let c = small_corpus(12, 41);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&c, dir.path()).unwrap();
    let loaded = load_manifest(dir.path().join("manifest.jsonl")).unwrap();
    let table = EmbeddingTable::load_with_dim(dir.path().join("embeddings.txt"), 16).unwrap();
    let from_files = corpus_hem(&loaded, &table, &hem_config(), 41, 1).unwrap();
    let in_memory = corpus_hem(&c.talks, &c.embeddings, &hem_config(), 41, 1).unwrap();
    assert_eq!(from_files, in_memory);
}

#[test]
fn parallel_scores_equal_sequential() {
    let c = small_corpus(10, 42);
    let seq = corpus_hem(&c.talks, &c.embeddings, &hem_config(), 1, 1).unwrap();
    let par = corpus_hem(&c.talks, &c.embeddings, &hem_config(), 1, 3).unwrap();
    assert_eq!(seq, par);
    // a talk's score does not depend on its position in the corpus
    let alone = talk_hem(&c.talks[7], &c.embeddings, &hem_config(), 1).unwrap();
    assert_eq!(alone, seq[7]);
}

#[test]
fn errors_name_the_talk() {
    let mut c = small_corpus(3, 43);
    c.talks[1].transcript.clear();
    let err = corpus_hem(&c.talks, &c.embeddings, &hem_config(), 1, 1).unwrap_err();
    assert!(err.to_string().contains(&c.talks[1].id), "{err}");
}
