use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ArmDecision, Policy};

/// Rows are class codewords over `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingMatrix {
    rows: Vec<Vec<i8>>,
}

impl CodingMatrix {
    /// `+1` on the diagonal, `-1` elsewhere: one binary problem per class.
    pub fn one_vs_all(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::config("ECOC needs at least two classes"));
        }
        let rows = (0..classes)
            .map(|c| (0..classes).map(|b| if b == c { 1 } else { -1 }).collect())
            .collect();
        Ok(CodingMatrix { rows })
    }

    pub fn new(rows: Vec<Vec<i8>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 || width == 0 {
            return Err(Error::config("a coding matrix needs two or more nonempty rows"));
        }
        for r in &rows {
            if r.len() != width {
                return Err(Error::Shape {
                    expected: width,
                    got: r.len(),
                });
            }
            if r.iter().any(|&b| b != 1 && b != -1) {
                return Err(Error::config("coding matrix entries must be +1 or -1"));
            }
        }
        for i in 0..rows.len() {
            if rows[i + 1..].contains(&rows[i]) {
                return Err(Error::config("coding matrix rows must be distinct"));
            }
        }
        Ok(CodingMatrix { rows })
    }

    pub fn classes(&self) -> usize {
        self.rows.len()
    }

    pub fn code_length(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, class: usize) -> &[i8] {
        &self.rows[class]
    }
}

/// The class whose row is nearest in Hamming distance; ties go to the
/// lowest class index.
pub fn hamming_decode(codeword: &[i8], matrix: &CodingMatrix) -> Result<usize> {
    if codeword.len() != matrix.code_length() {
        return Err(Error::Shape {
            expected: matrix.code_length(),
            got: codeword.len(),
        });
    }
    let mut best = (usize::MAX, 0);
    for (c, row) in matrix.rows.iter().enumerate() {
        let d = row.iter().zip(codeword).filter(|(a, b)| a != b).count();
        if d < best.0 {
            best = (d, c);
        }
    }
    Ok(best.1)
}

/// Maps codeword bits to context coordinates: `-1 -> 0`, `+1 -> 1`.
pub fn codeword_context(codeword: &[i8]) -> Vec<f64> {
    codeword.iter().map(|&b| (b as f64 + 1.0) / 2.0).collect()
}

/// Online mean and variance per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningScaler {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningScaler {
    pub fn new(dims: usize) -> Self {
        RunningScaler {
            count: 0,
            mean: vec![0.0; dims],
            m2: vec![0.0; dims],
        }
    }

    pub fn observe(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    /// Zero-mean, unit-variance version of `x`; features without observed
    /// spread are only centered.
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let var = if self.count > 1 {
                    self.m2[i] / (self.count - 1) as f64
                } else {
                    0.0
                };
                let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                (v - self.mean[i]) / sd
            })
            .collect()
    }
}

/// Classic perceptron with unit learning rate. A zero score predicts `-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perceptron {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Perceptron {
    pub fn new(dims: usize) -> Self {
        Perceptron {
            weights: vec![0.0; dims],
            bias: 0.0,
        }
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.score(x) > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Moves toward `target` if the current prediction is wrong.
    pub fn train(&mut self, x: &[f64], target: i8) {
        let y = target as f64;
        if y * self.score(x) <= 0.0 {
            for (w, v) in self.weights.iter_mut().zip(x) {
                *w += y * v;
            }
            self.bias += y;
        }
    }
}

/// One classification round: the standardized features, the predicted
/// codeword, its context embedding and the true label.
#[derive(Debug, Clone, PartialEq)]
pub struct EcocRound {
    pub features: Vec<f64>,
    pub codeword: Vec<i8>,
    pub context: Vec<f64>,
    pub label: usize,
}

impl EcocRound {
    /// Zero for the correct class, one otherwise.
    pub fn loss(&self, arm: usize) -> f64 {
        if arm == self.label {
            0.0
        } else {
            1.0
        }
    }
}

/// Binary classifiers, one per codeword bit, feeding codeword contexts to a
/// bandit that picks the class.
#[derive(Debug, Clone)]
pub struct EcocSetup {
    matrix: CodingMatrix,
    perceptrons: Vec<Perceptron>,
    scaler: RunningScaler,
}

impl EcocSetup {
    pub fn new(matrix: CodingMatrix, feature_dims: usize) -> Self {
        EcocSetup {
            perceptrons: vec![Perceptron::new(feature_dims); matrix.code_length()],
            scaler: RunningScaler::new(feature_dims),
            matrix,
        }
    }

    pub fn matrix(&self) -> &CodingMatrix {
        &self.matrix
    }

    pub fn perceptrons(&self) -> &[Perceptron] {
        &self.perceptrons
    }

    /// Updates the running statistics with `features` and predicts a
    /// codeword from their standardized form.
    pub fn observe(&mut self, features: &[f64], label: usize) -> Result<EcocRound> {
        if label >= self.matrix.classes() {
            return Err(Error::domain(format!(
                "label {label} out of range for {} classes",
                self.matrix.classes()
            )));
        }
        if features.len() != self.scaler.mean.len() {
            return Err(Error::Shape {
                expected: self.scaler.mean.len(),
                got: features.len(),
            });
        }
        self.scaler.observe(features);
        let x = self.scaler.standardize(features);
        let codeword: Vec<i8> = self.perceptrons.iter().map(|p| p.predict(&x)).collect();
        Ok(EcocRound {
            context: codeword_context(&codeword),
            codeword,
            features: x,
            label,
        })
    }

    /// Trains every bit classifier on the round's true codeword.
    pub fn train(&mut self, round: &EcocRound) {
        let row = &self.matrix.rows[round.label];
        for (p, &target) in self.perceptrons.iter_mut().zip(row) {
            p.train(&round.features, target);
        }
    }
}

/// Decodes the context codeword directly, without learning.
#[derive(Debug, Clone)]
pub struct HammingDecoder {
    matrix: CodingMatrix,
}

impl HammingDecoder {
    pub fn new(matrix: CodingMatrix) -> Self {
        HammingDecoder { matrix }
    }
}

impl Policy for HammingDecoder {
    fn arms(&self) -> usize {
        self.matrix.classes()
    }

    fn select(&mut self, context: &[f64], _rng: &mut dyn RngCore) -> Result<ArmDecision> {
        let codeword: Vec<i8> = context.iter().map(|&v| if v >= 0.5 { 1 } else { -1 }).collect();
        let arm = hamming_decode(&codeword, &self.matrix)?;
        let mut simplex = vec![0.0; self.arms()];
        simplex[arm] = 1.0;
        Ok(ArmDecision {
            arm,
            simplex,
            cell: 0,
            round: 0,
        })
    }

    fn update(&mut self, _decision: &ArmDecision, loss: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::domain(format!("loss {loss} is outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Samples whose class `c` has feature `c` near 4 and every other class has
/// it within `[-1, 1]`, so each one-vs-all problem is linearly separable
/// with margin. Remaining features are uniform noise.
pub fn separable_dataset(classes: usize, dims: usize, samples: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    if classes < 2 || dims < classes {
        return Err(Error::config(format!(
            "need at least two classes and dims >= classes, got {classes} and {dims}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples)
        .map(|_| {
            let label = rng.gen_range(0..classes);
            let mut features: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            features[label] += 4.0;
            LabeledSample { features, label }
        })
        .collect())
}

/// Reads a CSV with a header row, numeric feature columns and a final
/// 0-based integer label column.
pub fn load_labeled_csv(path: &Path) -> Result<Vec<LabeledSample>> {
    parse_labeled_csv(File::open(path)?)
}

pub fn parse_labeled_csv<R: Read>(input: R) -> Result<Vec<LabeledSample>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let n = record.len();
        if n < 2 {
            return Err(Error::Parse {
                line,
                message: "expected features and a label".into(),
            });
        }
        let features = (0..n - 1)
            .map(|i| record[i].trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        let label = record[n - 1].trim().parse::<usize>().map_err(|e| Error::Parse {
            line,
            message: format!("label: {e}"),
        })?;
        out.push(LabeledSample { features, label });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoding_examples() {
        let m = CodingMatrix::one_vs_all(3).unwrap();
        assert_eq!(hamming_decode(&[1, -1, -1], &m).unwrap(), 0);
        assert_eq!(hamming_decode(&[-1, -1, -1], &m).unwrap(), 0);
        for c in 0..3 {
            assert_eq!(hamming_decode(m.row(c), &m).unwrap(), c);
        }
        assert!(matches!(hamming_decode(&[1, 1], &m), Err(Error::Shape { .. })));
    }

    #[test]
    fn matrix_validation() {
        assert!(CodingMatrix::new(vec![vec![1, -1], vec![1, -1]]).is_err());
        assert!(CodingMatrix::new(vec![vec![1, 0], vec![1, -1]]).is_err());
        assert!(CodingMatrix::new(vec![vec![1, 1], vec![-1, 1]]).is_ok());
    }

    #[test]
    fn codeword_embedding() {
        assert_eq!(codeword_context(&[-1, 1, -1]), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn scaler_standardizes() {
        let mut s = RunningScaler::new(1);
        for v in [1.0, 2.0, 3.0, 4.0] {
            s.observe(&[v]);
        }
        let z = s.standardize(&[2.5]);
        assert!(z[0].abs() < 1e-12);
        let z = s.standardize(&[4.0]);
        assert!((z[0] - 1.5 / (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn perceptrons_learn_separable_data() {
        let data = separable_dataset(4, 8, 3000, 1).unwrap();
        let mut setup = EcocSetup::new(CodingMatrix::one_vs_all(4).unwrap(), 8);
        let mut errors_late = 0;
        for (i, s) in data.iter().enumerate() {
            let round = setup.observe(&s.features, s.label).unwrap();
            let guess = hamming_decode(&round.codeword, setup.matrix()).unwrap();
            if i >= 2000 && guess != s.label {
                errors_late += 1;
            }
            setup.train(&round);
        }
        assert!(errors_late < 20, "{errors_late}");
        assert!(setup.observe(&data[0].features, 4).is_err());
    }

    #[test]
    fn labeled_csv() {
        let text = "a,b,label\n0.5,1,2\n1,2,0\n";
        let rows = parse_labeled_csv(text.as_bytes()).unwrap();
        assert_eq!(rows[0], LabeledSample { features: vec![0.5, 1.0], label: 2 });
        assert!(matches!(
            parse_labeled_csv("a,label\nx,1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
