//! Basic (threshold) attacks: the utterance-level dispersion score, the
//! speaker-level consistency score and the decision rule.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{Dataset, Frames, Membership, SpeakerGroup};

/// Attack granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Utterance,
    Speaker,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Utterance => "utterance",
            Level::Speaker => "speaker",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Vector comparison used by the basic attacks. At utterance level the
/// metric acts as a distance, at speaker level as a similarity (euclidean
/// similarity is the negated distance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Metric::Cosine => cosine_distance(a, b),
            Metric::Euclidean => Ok(euclidean_distance(a, b)),
        }
    }

    pub fn similarity(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Metric::Cosine => cosine_similarity(a, b),
            Metric::Euclidean => Ok(-euclidean_distance(a, b)),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sums with pairwise (cascade) summation; error grows as O(log n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let (lo, hi) = values.split_at(values.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(Error::DegenerateVector { index: 0 });
    }
    if nb == 0.0 {
        return Err(Error::DegenerateVector { index: 1 });
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_similarity(a, b).map(|s| 1.0 - s)
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean of `measure` over all unordered pairs `i < j` of `vectors`.
/// Callers must ensure at least two vectors.
pub fn mean_pairwise<F>(vectors: &[&[f64]], mut measure: F) -> Result<f64>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let n = vectors.len();
    debug_assert!(n >= 2);
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            terms.push(measure(i, j)?);
        }
    }
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}

/// Mean pairwise cosine similarity with norms computed once per vector.
fn mean_pairwise_cosine(vectors: &[&[f64]]) -> Result<f64> {
    let norms: Vec<f64> = vectors.iter().map(|v| norm(v)).collect();
    if let Some(index) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateVector { index });
    }
    mean_pairwise(vectors, |i, j| {
        Ok((dot(vectors[i], vectors[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0))
    })
}

/// Average pairwise frame distance, `2/(m(m-1)) * sum_{i<j} d(h_i, h_j)`.
pub fn utterance_score(frames: &Frames, metric: Metric) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            actual: frames.len(),
        });
    }
    let rows: Vec<&[f64]> = frames.iter_rows().collect();
    match metric {
        Metric::Cosine => mean_pairwise_cosine(&rows).map(|s| 1.0 - s),
        Metric::Euclidean => mean_pairwise(&rows, |i, j| Ok(euclidean_distance(rows[i], rows[j]))),
    }
}

/// Arithmetic mean over the frames of one utterance.
pub fn mean_embedding(frames: &Frames) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::TooFewFrames { required: 1, actual: 0 });
    }
    let m = frames.len() as f64;
    let mut acc = vec![0.0; frames.dim()];
    for row in frames.iter_rows() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= m);
    Ok(acc)
}

/// One utterance-level representation per utterance of the group.
pub fn speaker_mean_embeddings(group: &SpeakerGroup<'_>) -> Result<Vec<Vec<f64>>> {
    group.sequences.iter().map(|s| mean_embedding(&s.frames)).collect()
}

/// Average pairwise similarity of a speaker's utterance embeddings.
pub fn speaker_score(group: &SpeakerGroup<'_>, metric: Metric) -> Result<f64> {
    if group.len() < 2 {
        return Err(Error::TooFewUtterances {
            required: 2,
            actual: group.len(),
        });
    }
    let means = speaker_mean_embeddings(group)?;
    let refs: Vec<&[f64]> = means.iter().map(Vec::as_slice).collect();
    match metric {
        Metric::Cosine => mean_pairwise_cosine(&refs),
        Metric::Euclidean => mean_pairwise(&refs, |i, j| Ok(-euclidean_distance(refs[i], refs[j]))),
    }
}

/// "Score above threshold means seen".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub threshold: f64,
}

impl ThresholdRule {
    pub fn new(threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::Validation(format!("threshold {threshold} is not finite")));
        }
        Ok(ThresholdRule { threshold })
    }
}

/// Seen iff `score > threshold`; ties go to unseen.
pub fn decide(score: f64, rule: ThresholdRule) -> Membership {
    if score > rule.threshold {
        Membership::Seen
    } else {
        Membership::Unseen
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub score: f64,
    pub membership: Membership,
}

/// Per-item scores with ground-truth membership.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    kind: Level,
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(kind: Level, rows: Vec<ScoreRow>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(rows.len());
        for r in &rows {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate score id {:?}", r.id)));
            }
            if !r.score.is_finite() {
                return Err(Error::Validation(format!("score for {:?} is not finite", r.id)));
            }
        }
        Ok(ScoreTable { kind, rows })
    }

    /// Convenience constructor from `(id, score, membership)` triples.
    pub fn from_triples<S: Into<String>>(
        kind: Level,
        rows: impl IntoIterator<Item = (S, f64, Membership)>,
    ) -> Result<Self> {
        ScoreTable::new(
            kind,
            rows.into_iter()
                .map(|(id, score, membership)| ScoreRow {
                    id: id.into(),
                    score,
                    membership,
                })
                .collect(),
        )
    }

    pub fn kind(&self) -> Level {
        self.kind
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "score", "membership"])?;
        for r in &self.rows {
            w.write_record([r.id.as_str(), &format_score(r.score), r.membership.as_str()])?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing csv: {e}")))?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv_from<R: std::io::Read>(kind: Level, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["id", "score", "membership"] {
            return Err(Error::Validation(format!(
                "score csv header must be id,score,membership, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let score: f64 = rec[1]
                .parse()
                .map_err(|_| Error::Validation(format!("bad score {:?} for {:?}", &rec[1], &rec[0])))?;
            rows.push(ScoreRow {
                id: rec[0].to_string(),
                score,
                membership: rec[2].parse()?,
            });
        }
        ScoreTable::new(kind, rows)
    }

    pub fn read_csv(kind: Level, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ScoreTable::read_csv_from(kind, std::io::BufReader::new(file))
    }
}

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn format_score(v: f64) -> String {
    format!("{v:.16e}")
}

/// An item the batch driver could not score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    pub table: ScoreTable,
    pub skipped: Vec<Skipped>,
}

/// Scores every utterance (or speaker) of a dataset. Items violating a
/// precondition land in `skipped` with the reason; row order follows the
/// manifest (speakers by first appearance).
pub fn score_dataset(dataset: &Dataset, level: Level, metric: Metric) -> Result<ScoreOutcome> {
    let results: Vec<(String, Membership, Result<f64>)> = match level {
        Level::Utterance => dataset
            .entries()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(e, s)| (e.utterance_id.clone(), e.membership, utterance_score(&s.frames, metric)))
            .collect(),
        Level::Speaker => dataset
            .speaker_groups()
            .into_par_iter()
            .map(|g| (g.speaker_id.to_string(), g.membership, speaker_score(&g, metric)))
            .collect(),
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (id, membership, res) in results {
        match res {
            Ok(score) => rows.push(ScoreRow { id, score, membership }),
            Err(e @ (Error::TooFewFrames { .. } | Error::TooFewUtterances { .. } | Error::DegenerateVector { .. })) => {
                skipped.push(Skipped {
                    id,
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ScoreOutcome {
        table: ScoreTable::new(level, rows)?,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{FeatureSequence, Manifest};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frames(rows: &[&[f64]]) -> Frames {
        Frames::from_rows(rows).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn naive_cos(a: &[f64], b: &[f64]) -> f64 {
        let mut ab = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for k in 0..a.len() {
            ab += a[k] * b[k];
            aa += a[k] * a[k];
            bb += b[k] * b[k];
        }
        ab / (aa.sqrt() * bb.sqrt())
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert!(close(cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0, 1e-15));
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(close(
            cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            1e-15
        ));
        assert!(matches!(
            cosine_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateVector { index: 0 })
        ));
    }

    #[test]
    fn utterance_examples() {
        let e1: &[f64] = &[1.0, 0.0];
        let e2: &[f64] = &[0.0, 1.0];
        assert_eq!(utterance_score(&frames(&[e1, e1]), Metric::Cosine).unwrap(), 0.0);
        let s = utterance_score(&frames(&[e1, e2, e1]), Metric::Cosine).unwrap();
        assert!(close(s, 2.0 / 3.0, 1e-15));
        assert!(matches!(
            utterance_score(&frames(&[e1]), Metric::Cosine),
            Err(Error::TooFewFrames { required: 2, actual: 1 })
        ));
        assert!(matches!(
            utterance_score(&frames(&[e1, e2, &[0.0, 0.0]]), Metric::Cosine),
            Err(Error::DegenerateVector { index: 2 })
        ));
        // euclidean: |e1-e2| = sqrt 2 twice, 0 once
        let s = utterance_score(&frames(&[e1, e2, e1]), Metric::Euclidean).unwrap();
        assert!(close(s, 2.0 * 2f64.sqrt() / 3.0, 1e-15));
    }

    #[test]
    fn random_utterance_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let f = Frames::from_rows(&rows).unwrap();
        let mut acc = 0.0;
        let mut count = 0;
        for i in 0..7 {
            for j in i + 1..7 {
                acc += 1.0 - naive_cos(&rows[i], &rows[j]);
                count += 1;
            }
        }
        assert!(close(
            utterance_score(&f, Metric::Cosine).unwrap(),
            acc / count as f64,
            1e-12
        ));
    }

    fn group<'a>(seqs: &'a [FeatureSequence]) -> SpeakerGroup<'a> {
        SpeakerGroup {
            speaker_id: "s",
            sequences: seqs.iter().collect(),
            membership: Membership::Unknown,
        }
    }

    fn fs(id: &str, rows: &[&[f64]]) -> FeatureSequence {
        FeatureSequence::new(id, "s", frames(rows))
    }

    #[test]
    fn mean_embedding_examples() {
        let seqs = [fs("a", &[&[0.0, 0.0], &[2.0, 4.0]]), fs("b", &[&[3.0, -1.0]])];
        let means = speaker_mean_embeddings(&group(&seqs)).unwrap();
        assert_eq!(means[0], vec![1.0, 2.0]);
        assert_eq!(means[1], vec![3.0, -1.0]);
        let empty = FeatureSequence::new("e", "s", Frames::new(0, 2, vec![]).unwrap());
        assert!(matches!(mean_embedding(&empty.frames), Err(Error::TooFewFrames { .. })));
    }

    #[test]
    fn speaker_examples() {
        let same = [fs("a", &[&[1.0, 2.0], &[3.0, 4.0]]), fs("b", &[&[2.0, 3.0]])];
        assert!(close(speaker_score(&group(&same), Metric::Cosine).unwrap(), 1.0, 1e-15));
        let ortho = [
            fs("a", &[&[1.0, 0.0, 0.0]]),
            fs("b", &[&[0.0, 2.0, 0.0]]),
            fs("c", &[&[0.0, 0.0, 3.0]]),
        ];
        assert_eq!(speaker_score(&group(&ortho), Metric::Cosine).unwrap(), 0.0);
        assert!(matches!(
            speaker_score(&group(&same[..1]), Metric::Cosine),
            Err(Error::TooFewUtterances { required: 2, actual: 1 })
        ));
    }

    #[test]
    fn random_speaker_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seqs: Vec<FeatureSequence> = (0..6)
            .map(|i| {
                let m = rng.random_range(1..6);
                let rows: Vec<Vec<f64>> = (0..m)
                    .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                FeatureSequence::new(format!("u{i}"), "s", Frames::from_rows(&rows).unwrap())
            })
            .collect();
        let means: Vec<Vec<f64>> = seqs
            .iter()
            .map(|s| {
                let mut m = [0.0; 4];
                for r in s.frames.iter_rows() {
                    for k in 0..4 {
                        m[k] += r[k];
                    }
                }
                m.iter().map(|v| v / s.frames.len() as f64).collect()
            })
            .collect();
        let mut acc = 0.0;
        for i in 0..6 {
            for j in i + 1..6 {
                acc += naive_cos(&means[i], &means[j]);
            }
        }
        let got = speaker_score(&group(&seqs), Metric::Cosine).unwrap();
        assert!(close(got, acc / 15.0, 1e-12));
    }

    #[test]
    fn decide_examples() {
        let r = ThresholdRule::new(0.5).unwrap();
        assert_eq!(decide(0.9, r), Membership::Seen);
        assert_eq!(decide(0.5, r), Membership::Unseen);
        assert_eq!(decide(-0.2, ThresholdRule::new(0.0).unwrap()), Membership::Unseen);
        assert!(ThresholdRule::new(f64::NAN).is_err());
    }

    fn dataset(seqs: Vec<(&str, &str, Membership, Frames)>) -> Dataset {
        let entries = seqs
            .iter()
            .map(|(u, s, m, _)| crate::store::ManifestEntry {
                utterance_id: u.to_string(),
                speaker_id: s.to_string(),
                path: format!("{u}.miaf"),
                membership: *m,
            })
            .collect();
        let manifest = Manifest {
            root: ".".into(),
            meta: None,
            entries,
        };
        let seqs = seqs
            .into_iter()
            .map(|(u, s, _, f)| FeatureSequence::new(u, s, f))
            .collect();
        Dataset::from_parts(manifest, seqs).unwrap()
    }

    #[test]
    fn batch_driver_skips() {
        let ds = dataset(vec![
            ("u1", "A", Membership::Seen, frames(&[&[1.0, 0.0], &[0.0, 1.0]])),
            ("u_bad", "A", Membership::Seen, frames(&[&[1.0, 0.0]])),
            ("u3", "B", Membership::Unseen, frames(&[&[1.0, 1.0], &[1.0, 0.0]])),
        ]);
        let out = score_dataset(&ds, Level::Utterance, Metric::Cosine).unwrap();
        assert_eq!(out.table.len(), 2);
        assert_eq!(out.table.rows()[1].id, "u3");
        assert_eq!(out.table.rows()[1].membership, Membership::Unseen);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].id, "u_bad");

        let out = score_dataset(&ds, Level::Speaker, Metric::Cosine).unwrap();
        assert_eq!(out.table.len(), 1);
        assert_eq!(out.table.rows()[0].id, "A");
        assert_eq!(out.skipped[0].id, "B");
    }

    #[test]
    fn three_utterances_three_rows() {
        let ds = dataset(vec![
            ("x", "A", Membership::Seen, frames(&[&[1.0, 0.0], &[0.0, 1.0]])),
            ("y", "A", Membership::Seen, frames(&[&[1.0, 0.2], &[0.3, 1.0]])),
            ("z", "B", Membership::Unknown, frames(&[&[1.0, 1.0], &[1.0, 0.0]])),
        ]);
        let out = score_dataset(&ds, Level::Utterance, Metric::Cosine).unwrap();
        let ids: Vec<&str> = out.table.rows().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["x", "y", "z"]);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn csv_round_trip_and_quoting() {
        let t = ScoreTable::from_triples(
            Level::Utterance,
            [("a,b", 2.0 / 3.0, Membership::Seen), ("c", 1e-300, Membership::Unknown)],
        )
        .unwrap();
        let s = t.to_csv_string().unwrap();
        assert!(
            s.starts_with("id,score,membership\n\"a,b\",6.6666666666666663e-1,seen\n"),
            "{s}"
        );
        let back = ScoreTable::read_csv_from(Level::Utterance, s.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn table_rejects_duplicates_and_nan() {
        assert!(ScoreTable::from_triples(
            Level::Speaker,
            [("a", 1.0, Membership::Seen), ("a", 2.0, Membership::Seen)]
        )
        .is_err());
        assert!(ScoreTable::from_triples(Level::Speaker, [("a", f64::NAN, Membership::Seen)]).is_err());
    }

    #[test]
    fn pairwise_sum_matches() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), 249750.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    fn frames_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..12, 1usize..8).prop_flat_map(|(m, q)| {
            proptest::collection::vec(
                proptest::collection::vec((-10.0f64..10.0).prop_filter("away from zero", |v| v.abs() > 1e-3), q),
                m,
            )
        })
    }

    proptest! {
        #[test]
        fn utterance_score_range_and_equal_distance(rows in frames_strategy()) {
            let f = Frames::from_rows(&rows).unwrap();
            let s = utterance_score(&f, Metric::Cosine).unwrap();
            prop_assert!((0.0..=2.0).contains(&s));
        }

        #[test]
        fn constant_pair_distance_is_exact(m in 2usize..40, c in 0.1f64..5.0) {
            let rows = [vec![c, 0.0], vec![0.0, 0.0]];
            let f = Frames::from_rows(&rows).unwrap();
            prop_assert_eq!(utterance_score(&f, Metric::Euclidean).unwrap(), c);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| vec![c, 1.0]).collect();
            prop_assert_eq!(utterance_score(&Frames::from_rows(&rows).unwrap(), Metric::Euclidean).unwrap(), 0.0);
        }

        #[test]
        fn speaker_score_range(rows in frames_strategy()) {
            let seqs: Vec<FeatureSequence> = rows.iter().enumerate()
                .map(|(i, r)| fs(&format!("u{i}"), &[r.as_slice()]))
                .collect();
            let s = speaker_score(&group(&seqs), Metric::Cosine).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn simplex_vertices_have_equal_pair_distances() {
        // Standard basis vectors: every cosine distance is exactly 1.
        for q in 2..12 {
            let rows: Vec<Vec<f64>> = (0..q)
                .map(|i| (0..q).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let f = Frames::from_rows(&rows).unwrap();
            assert_eq!(utterance_score(&f, Metric::Cosine).unwrap(), 1.0);
        }
    }
}
