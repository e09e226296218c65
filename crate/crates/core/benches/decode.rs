use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lexbeam::lexicon::{build_open_vocab, LabelAlphabet};
use lexbeam::parallel::map_sequential;
use lexbeam::prefix_tree::PrefixTree;
use lexbeam::scorer::{EncoderState, ScoreMatrix, Scorer, SegmentInput};
use lexbeam::search::{BeamLimits, Decoder, LmSlots, SearchConfig};
use lexbeam::topology::{make_preset, Preset};

const LABELS: usize = 40;

fn setup(utterances: usize, frames: usize) -> (Decoder, Vec<EncoderState>) {
    let mut symbols: Vec<String> = (0..LABELS - 1).map(|i| format!("l{i}")).collect();
    symbols.push("<b>".into());
    let alphabet = LabelAlphabet::new(symbols).unwrap().with_specials(Some("<b>"), None).unwrap();
    let lexicon = Arc::new(build_open_vocab(&alphabet).unwrap());
    let config = SearchConfig {
        label_beam: BeamLimits::new(8.0, 64),
        word_end_beam: BeamLimits::new(8.0, 64),
        ..SearchConfig::default()
    };
    let scorer = Arc::new(Scorer::precomputed(LABELS));
    let decoder = Decoder::new(
        Arc::new(PrefixTree::build(lexicon)),
        make_preset(Preset::Ctc, &alphabet).unwrap(),
        scorer.clone(),
        LmSlots::default(),
        config,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = (0..utterances)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..frames)
                .map(|_| (0..LABELS).map(|_| rng.random_range(0.1..6.0)).collect())
                .collect();
            scorer.init_segment(SegmentInput::Matrix(ScoreMatrix::from_rows(&rows).unwrap())).unwrap()
        })
        .collect();
    (decoder, inputs)
}

fn corpus(c: &mut Criterion) {
    let (decoder, inputs) = setup(16, 200);
    let decode = |enc: &EncoderState| decoder.decode(enc).unwrap().best().cost;
    let mut group = c.benchmark_group("corpus");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| map_sequential(&inputs, decode)));
    #[cfg(feature = "parallel")]
    for workers in [2, 4] {
        group.bench_with_input(BenchmarkId::new("parallel", workers), &workers, |b, &w| {
            b.iter(|| lexbeam::parallel::map_parallel(&inputs, w, decode))
        });
    }
    group.finish();
}

criterion_group!(benches, corpus);
criterion_main!(benches);
