//! Token feature vectors: word embedding, POS embedding and character CNN.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use concept_tagger::chunking::{chunk_sentence, ChunkConfig};
use concept_tagger::corpus::{build_vocab, parse_corpus};
use concept_tagger::features::{
    char_cnn_forward, featurize_chunk, hashed_vector, CharCnnParams, EmbeddingTable, PosEmbedding, WordVectors,
};

fn main() {
    let corpus = parse_corpus("Pt NN O\nhas VBZ O\nDM2 NN B\n".as_bytes()).expect("valid corpus");
    let vocab = build_vocab(&corpus, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // words missing from the embedding file get a hashed vector
    let mut vectors = WordVectors::new(4);
    vectors.vectors.insert("pt".into(), vec![0.5, -0.5, 0.25, 0.0]);
    let words = EmbeddingTable::from_vectors(&vectors, &vocab);
    println!("hashed vector for `dm2`: {:?}", hashed_vector("dm2", 4));

    let pos = PosEmbedding::init(vocab.pos.len(), 3, &mut rng);
    let chars = CharCnnParams::init(vocab.chars.len(), 5, &[2, 3], 4, &mut rng);
    for word in ["pt", "dm2", "hypertension"] {
        let features = char_cnn_forward(&vocab.chars_of(word), &chars);
        let shown: Vec<String> = features.iter().map(|x| format!("{x:.3}")).collect();
        println!("char features {word:<13} [{}]", shown.join(", "));
    }

    let chunk = &chunk_sentence(&corpus.sentences[0], &vocab, &ChunkConfig::default())[0];
    let m = featurize_chunk(chunk, &words, &pos, &chars);
    println!(
        "chunk matrix {}x{} with {} real rows (word {} + pos {} + chars {})",
        m.rows.rows(),
        m.rows.cols(),
        m.real_len(),
        words.dim(),
        pos.dim(),
        chars.output_dim()
    );
}
