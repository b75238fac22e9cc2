//! Dataset ingestion, synthetic data generation, rebalancing and
//! splitting.
//!
//! The on-disk format is sparse text, one example per line:
//!
//! ```text
//! <label> <index>:<value> <index>:<value> ...
//! ```
//!
//! Labels are `+1`/`-1` (or `0`/`1`, with 0 mapped to -1); other label
//! alphabets need an explicit two-entry map. Indices are 1-based in the
//! file and strictly increasing; `#` starts a comment line; both `\n`
//! and `\r\n` line endings are accepted.

use crate::error::{Error, Result};
use crate::model::{Dataset, Example};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};

/// Parameters of the two-Gaussian synthetic test bed: spherical unit
/// variance components with means `+-(margin/2) e_1`, labels equal to
/// the component sign, then a fraction of labels flipped independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    pub margin: f64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, dim: usize, margin: f64, noise_rate: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "synthetic dataset needs at least 2 examples, got {n}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        crate::error::ensure_positive(margin, "margin")?;
        if !(0.0..0.5).contains(&noise_rate) {
            return Err(Error::InvalidConfig(format!(
                "noise_rate must lie in [0, 0.5), got {noise_rate}"
            )));
        }
        Ok(Self {
            n,
            dim,
            margin,
            noise_rate,
            seed,
        })
    }
}

/// Options for [`parse_sparse_text`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Explicit two-entry label map for sources whose labels are not
    /// already in `{-1, +1}` or `{0, 1}` (for example digit pairs).
    pub label_map: Option<[(f64, i8); 2]>,
    /// Declared dimension; must not be smaller than the largest index
    /// observed. Lets train/test files with different supports agree.
    pub declared_dim: Option<usize>,
}

/// Parse the sparse text format into a [`Dataset`].
///
/// The dimension is the largest 1-based index seen unless a larger one
/// is declared. Malformed lines report their 1-based line number.
pub fn parse_sparse_text<R: BufRead>(reader: R, options: &ParseOptions) -> Result<Dataset> {
    let mut examples = Vec::new();
    let mut max_dim = 0usize;
    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let label_token = tokens.next().expect("non-empty line has a first token");
        let label = parse_label(label_token, options.label_map.as_ref(), line_no)?;

        let mut features = Vec::new();
        let mut prev_index: Option<usize> = None;
        for token in tokens {
            let (idx_str, val_str) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected <index>:<value>, got {token:?}"),
            })?;
            let file_index: usize = idx_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric feature index {idx_str:?}"),
            })?;
            if file_index == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based; got 0".into(),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric feature value {val_str:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite feature value {value}"),
                });
            }
            let index = file_index - 1;
            if let Some(p) = prev_index {
                if index <= p {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!(
                            "feature indices must be strictly increasing ({} then {})",
                            p + 1,
                            file_index
                        ),
                    });
                }
            }
            prev_index = Some(index);
            max_dim = max_dim.max(index + 1);
            features.push((index, value));
        }
        examples.push(Example::new(features, label).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?);
    }

    let dim = match options.declared_dim {
        Some(declared) => {
            if declared < max_dim {
                return Err(Error::InvalidConfig(format!(
                    "declared dimension {declared} is smaller than the observed maximum {max_dim}"
                )));
            }
            declared
        }
        None => max_dim.max(1),
    };
    Dataset::new(examples, dim)
}

fn parse_label(token: &str, map: Option<&[(f64, i8); 2]>, line_no: usize) -> Result<i8> {
    let raw: f64 = token.parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("non-numeric label {token:?}"),
    })?;
    match map {
        Some(entries) => entries
            .iter()
            .find(|(value, _)| *value == raw)
            .map(|&(_, mapped)| mapped)
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("label {raw} not covered by the label map"),
            }),
        None => {
            if raw == 1.0 {
                Ok(1)
            } else if raw == -1.0 || raw == 0.0 {
                Ok(-1)
            } else {
                Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown label value {raw} (supply a label map)"),
                })
            }
        }
    }
}

/// Serialize a dataset back to the sparse text format (1-based indices,
/// `\n` terminators). Re-parsing the output yields an identical dataset
/// as long as the dimension is declared.
pub fn write_sparse_text<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    for ex in dataset.examples() {
        if ex.label() == 1 {
            write!(writer, "+1")?;
        } else {
            write!(writer, "-1")?;
        }
        for &(index, value) in ex.features() {
            write!(writer, " {}:{}", index + 1, value)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Generate the two-Gaussian synthetic dataset described by `spec`.
/// Deterministic for a fixed seed.
pub fn synth_two_gaussians(spec: &SyntheticSpec) -> Dataset {
    let mut rng = crate::rng::RngHandle::from_seed(spec.seed);
    let n_pos = spec.n - spec.n / 2;
    let offset = spec.margin / 2.0;
    let mut examples = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let component: i8 = if i < n_pos { 1 } else { -1 };
        let mean0 = f64::from(component) * offset;
        let features: Vec<(usize, f64)> = (0..spec.dim)
            .map(|j| {
                let noise: f64 = rng.sample(StandardNormal);
                let value = if j == 0 { mean0 + noise } else { noise };
                (j, value)
            })
            .collect();
        examples.push(Example::new(features, component).expect("generated example is valid"));
    }
    // independent label flips with probability noise_rate
    if spec.noise_rate > 0.0 {
        for example in examples.iter_mut() {
            if rng.random::<f64>() < spec.noise_rate {
                let flipped = example
                    .with_label(-example.label())
                    .expect("label stays valid");
                *example = flipped;
            }
        }
    }
    Dataset::new(examples, spec.dim).expect("generated dataset is valid")
}

/// Subsample the majority class uniformly without replacement until the
/// class counts differ by at most one (here: exactly the minority count).
pub fn rebalance<R: Rng>(dataset: &Dataset, rng: &mut R) -> Result<Dataset> {
    let (pos, neg) = dataset.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if pos == neg {
        return Ok(dataset.clone());
    }
    let (majority_label, keep) = if pos > neg { (1, neg) } else { (-1, pos) };
    let mut majority_indices: Vec<usize> = dataset
        .examples()
        .iter()
        .enumerate()
        .filter(|(_, ex)| ex.label() == majority_label)
        .map(|(i, _)| i)
        .collect();
    majority_indices.shuffle(rng);
    majority_indices.truncate(keep);
    majority_indices.sort_unstable();

    let mut cursor = majority_indices.iter().peekable();
    let examples: Vec<Example> = dataset
        .examples()
        .iter()
        .enumerate()
        .filter(|(i, ex)| {
            if ex.label() != majority_label {
                true
            } else if cursor.peek() == Some(&i) {
                cursor.next();
                true
            } else {
                false
            }
        })
        .map(|(_, ex)| ex.clone())
        .collect();
    Dataset::new(examples, dataset.dim())
}

/// Shuffled disjoint train/test partition; the test size rounds
/// `n * test_fraction` to the nearest integer.
pub fn split<R: Rng>(
    dataset: &Dataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if test_fraction.is_nan() || test_fraction <= 0.0 || test_fraction >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let test_n = ((n as f64) * test_fraction).round() as usize;
    let (test_idx, train_idx) = order.split_at(test_n);
    let pick = |indices: &[usize]| -> Vec<Example> {
        indices
            .iter()
            .map(|&i| dataset.examples()[i].clone())
            .collect()
    };
    Ok((
        Dataset::new(pick(train_idx), dataset.dim())?,
        Dataset::new(pick(test_idx), dataset.dim())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::l2_norm;
    use crate::rng::RngHandle;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Dataset> {
        parse_sparse_text(Cursor::new(text), &ParseOptions::default())
    }

    #[test]
    fn parse_basic_line() {
        let data = parse("+1 1:0.5 3:2\n").unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.dim(), 3);
        let ex = &data.examples()[0];
        assert_eq!(ex.label(), 1);
        assert_eq!(ex.features(), &[(0, 0.5), (2, 2.0)]);
    }

    #[test]
    fn parse_empty_support() {
        let data = parse("-1\n").unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.examples()[0].features(), &[]);
        assert_eq!(data.examples()[0].label(), -1);
    }

    #[test]
    fn parse_malformed_label_reports_line() {
        match parse("abc 1:1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_lines_are_one_based() {
        let text = "+1 1:1\n-1 2:1\n+1 oops\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_non_increasing_indices() {
        assert!(matches!(
            parse("+1 3:1 2:1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("+1 2:1 2:5\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_rejects_zero_index() {
        assert!(matches!(
            parse("+1 0:1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_zero_one_labels() {
        let data = parse("0 1:1\n1 1:2\n").unwrap();
        assert_eq!(data.examples()[0].label(), -1);
        assert_eq!(data.examples()[1].label(), 1);
    }

    #[test]
    fn parse_label_map_for_digit_pairs() {
        let opts = ParseOptions {
            label_map: Some([(3.0, 1), (8.0, -1)]),
            declared_dim: None,
        };
        let data = parse_sparse_text(Cursor::new("3 1:1\n8 2:1\n"), &opts).unwrap();
        assert_eq!(data.examples()[0].label(), 1);
        assert_eq!(data.examples()[1].label(), -1);
        // unmapped label errors
        assert!(parse_sparse_text(Cursor::new("5 1:1\n"), &opts).is_err());
    }

    #[test]
    fn parse_unknown_label_without_map_errors() {
        assert!(matches!(
            parse("3 1:1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_comments_and_crlf() {
        let data = parse("# header\r\n+1 1:1\r\n\r\n-1 1:-1\r\n").unwrap();
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn declared_dim_override() {
        let opts = ParseOptions {
            label_map: None,
            declared_dim: Some(10),
        };
        let data = parse_sparse_text(Cursor::new("+1 2:1\n"), &opts).unwrap();
        assert_eq!(data.dim(), 10);
        let too_small = ParseOptions {
            label_map: None,
            declared_dim: Some(1),
        };
        assert!(parse_sparse_text(Cursor::new("+1 2:1\n"), &too_small).is_err());
    }

    #[test]
    fn round_trip_through_text() {
        let text = "+1 1:0.5 3:2\n-1\n-1 2:-3.25 5:1e-3\n";
        let data = parse(text).unwrap();
        let mut buf = Vec::new();
        write_sparse_text(&data, &mut buf).unwrap();
        let opts = ParseOptions {
            label_map: None,
            declared_dim: Some(data.dim()),
        };
        let reparsed = parse_sparse_text(Cursor::new(buf), &opts).unwrap();
        assert_eq!(data, reparsed);
    }

    #[test]
    fn synth_separable_is_classified_by_the_mean_direction() {
        let spec = SyntheticSpec::new(1000, 5, 10.0, 0.0, 7).unwrap();
        let data = synth_two_gaussians(&spec);
        assert_eq!(data.len(), 1000);
        // the first-axis separator errs on at most 1% of points
        let mut weights = vec![0.0; 5];
        weights[0] = 1.0;
        let model = crate::model::ModelState::from_weights(weights, 0.0);
        let errors = data
            .examples()
            .iter()
            .filter(|ex| model.predict(ex.features()).unwrap() != ex.label())
            .count();
        assert!(
            (errors as f64) / 1000.0 <= 0.01,
            "separable data misclassified {errors} times"
        );
    }

    #[test]
    fn synth_noise_rate_observed() {
        let spec = SyntheticSpec::new(20_000, 3, 4.0, 0.2, 11).unwrap();
        let noisy = synth_two_gaussians(&spec);
        let clean = synth_two_gaussians(&SyntheticSpec { noise_rate: 0.0, ..spec });
        let flips = noisy
            .examples()
            .iter()
            .zip(clean.examples())
            .filter(|(a, b)| a.label() != b.label())
            .count();
        // binomial 4-sigma window around 20%
        let n = 20_000f64;
        let sigma = (0.2 * 0.8 / n).sqrt();
        let rate = flips as f64 / n;
        assert!(
            (rate - 0.2).abs() <= 4.0 * sigma,
            "flip rate {rate} outside 0.2 +- {}",
            4.0 * sigma
        );
        // features are untouched by label noise
        assert_eq!(
            noisy.examples()[0].features(),
            clean.examples()[0].features()
        );
    }

    #[test]
    fn synth_component_means_separated_along_first_axis() {
        let spec = SyntheticSpec::new(10_000, 4, 3.0, 0.0, 13).unwrap();
        let data = synth_two_gaussians(&spec);
        let (mut pos_sum, mut pos_n, mut neg_sum, mut neg_n) = (0.0, 0u32, 0.0, 0u32);
        for ex in data.examples() {
            let x0 = ex.features()[0].1;
            if ex.label() == 1 {
                pos_sum += x0;
                pos_n += 1;
            } else {
                neg_sum += x0;
                neg_n += 1;
            }
        }
        let gap = pos_sum / f64::from(pos_n) - neg_sum / f64::from(neg_n);
        // each class mean has SE 1/sqrt(n/2); allow 4 combined SEs
        let se = (2.0 / 5000.0f64).sqrt() * std::f64::consts::SQRT_2;
        assert!(
            (gap - 3.0).abs() <= 4.0 * se,
            "class-mean gap {gap} not within 4 SE of 3.0"
        );
    }

    #[test]
    fn synth_deterministic_under_seed() {
        let spec = SyntheticSpec::new(100, 3, 2.0, 0.1, 21).unwrap();
        assert_eq!(synth_two_gaussians(&spec), synth_two_gaussians(&spec));
    }

    #[test]
    fn rebalance_equal_classes_unchanged() {
        let spec = SyntheticSpec::new(200, 2, 2.0, 0.0, 3).unwrap();
        let data = synth_two_gaussians(&spec);
        let mut rng = RngHandle::from_seed(1);
        let balanced = rebalance(&data, &mut rng).unwrap();
        assert_eq!(balanced.len(), data.len());
    }

    #[test]
    fn rebalance_subsamples_majority() {
        // 300 positives, 100 negatives
        let mut examples = Vec::new();
        for i in 0..400 {
            let label = if i < 300 { 1 } else { -1 };
            examples.push(Example::new(vec![(0, i as f64)], label).unwrap());
        }
        let data = Dataset::new(examples, 1).unwrap();
        let mut rng = RngHandle::from_seed(5);
        let balanced = rebalance(&data, &mut rng).unwrap();
        let (pos, neg) = balanced.class_counts();
        assert_eq!(neg, 100);
        assert!(pos.abs_diff(neg) <= 1, "counts {pos}/{neg} not balanced");
    }

    #[test]
    fn rebalance_single_class_errors() {
        let ex = Example::new(vec![(0, 1.0)], 1).unwrap();
        let data = Dataset::new(vec![ex], 1).unwrap();
        let mut rng = RngHandle::from_seed(1);
        assert!(matches!(rebalance(&data, &mut rng), Err(Error::SingleClass)));
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let spec = SyntheticSpec::new(100, 2, 2.0, 0.0, 9).unwrap();
        let data = synth_two_gaussians(&spec);
        let mut rng = RngHandle::from_seed(2);
        let (train, test) = split(&data, 0.2, &mut rng).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        // union as multisets: compare sorted first-feature values, which
        // are almost surely distinct
        let mut all: Vec<f64> = train
            .examples()
            .iter()
            .chain(test.examples())
            .map(|e| e.features()[0].1)
            .collect();
        let mut orig: Vec<f64> = data.examples().iter().map(|e| e.features()[0].1).collect();
        all.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
    }

    #[test]
    fn split_deterministic_and_validated() {
        let spec = SyntheticSpec::new(50, 2, 2.0, 0.0, 9).unwrap();
        let data = synth_two_gaussians(&spec);
        let (a_train, a_test) = split(&data, 0.3, &mut RngHandle::from_seed(4)).unwrap();
        let (b_train, b_test) = split(&data, 0.3, &mut RngHandle::from_seed(4)).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        assert!(split(&data, 0.0, &mut RngHandle::from_seed(4)).is_err());
        assert!(split(&data, 1.0, &mut RngHandle::from_seed(4)).is_err());
    }

    #[test]
    fn synthetic_spec_validation() {
        assert!(SyntheticSpec::new(1, 2, 1.0, 0.0, 0).is_err());
        assert!(SyntheticSpec::new(10, 0, 1.0, 0.0, 0).is_err());
        assert!(SyntheticSpec::new(10, 2, 0.0, 0.0, 0).is_err());
        assert!(SyntheticSpec::new(10, 2, 1.0, 0.5, 0).is_err());
        assert!(SyntheticSpec::new(10, 2, 1.0, 0.49, 0).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_example() -> impl Strategy<Value = (Vec<(usize, f64)>, i8)> {
            (
                proptest::collection::btree_map(0usize..40, -100.0f64..100.0, 0..10),
                prop_oneof![Just(1i8), Just(-1i8)],
            )
                .prop_map(|(m, label)| (m.into_iter().collect(), label))
        }

        proptest! {
            #[test]
            fn serialize_parse_round_trip(rows in proptest::collection::vec(arb_example(), 1..20)) {
                let examples: Vec<Example> = rows
                    .into_iter()
                    .map(|(f, l)| Example::new(f, l).unwrap())
                    .collect();
                let data = Dataset::new(examples, 40).unwrap();
                let mut buf = Vec::new();
                write_sparse_text(&data, &mut buf).unwrap();
                let opts = ParseOptions { label_map: None, declared_dim: Some(40) };
                let reparsed = parse_sparse_text(std::io::Cursor::new(buf), &opts).unwrap();
                prop_assert_eq!(data, reparsed);
            }
        }
    }

    #[test]
    fn norm_helper_sanity() {
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
    }
}
