//! Fixtures shared by the pipeline benchmarks.

use emgcode::dsp::extract_series;
use emgcode::eval::ScorePool;
use emgcode::{
    ChannelSelection, FdtConfig, FeatureSeries, RecordKey, SignalRecord, SynthConfig, Synthesizer,
    WindowSpec,
};

/// Full-length synthetic recording with the default grid and seed.
pub fn record(key: RecordKey) -> SignalRecord {
    Synthesizer::new(&SynthConfig::default())
        .and_then(|s| s.record(&key))
        .expect("default synthetic config is valid")
}

/// Forearm feature series of every trial of one (session, subject, gesture).
pub fn trials(session: u16, subject: u16, gesture: u16) -> Vec<FeatureSeries> {
    let s = Synthesizer::new(&SynthConfig::default()).expect("valid config");
    (1..=7)
        .map(|t| {
            let rec = s
                .record(&RecordKey::new(session, subject, gesture, t))
                .expect("record");
            extract_series(
                &rec,
                &ChannelSelection::forearm(),
                &WindowSpec::default(),
                &FdtConfig::default(),
            )
            .expect("features")
        })
        .collect()
}

/// Deterministic score pools, impostors shifted upwards by `m`-dependent offsets.
pub fn pools(m: usize, genuine: usize, impostor: usize) -> Vec<ScorePool> {
    let wave = |i: usize, k: usize| ((i * 7919 + k * 104_729) % 1000) as f64 / 1000.0;
    (0..m)
        .map(|k| {
            ScorePool::new(
                (0..genuine).map(|i| 2.0 * wave(i, k)).collect(),
                (0..impostor).map(|i| 1.0 + 2.0 * wave(i, k + 11)).collect(),
            )
        })
        .collect()
}
