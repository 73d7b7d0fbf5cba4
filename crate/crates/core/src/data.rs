//! Biaxial stress-stretch datasets: CSV ingestion, the fixed train/dev split, and synthetic data
//! drawn from a known Gaussian model.
//!
//! CSV schema (UTF-8, `#` starts a comment line):
//!
//! ```text
//! experiment,orientation,direction,sample,lambda1,lambda2,stress_kpa
//! strip-w,0-90,1,1,1.0012,1.0,0.8421
//! ```
//!
//! Each (experiment, direction) pair is one curve. Mirror-image experiments of the ±45 mount
//! (`strip-y`, `off-y`, and the second direction of `equibiax-45`) carry no new information and
//! are normally stored only through their partners, which leaves 15 unique curves.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{eval_library, N_TERMS};
use crate::error::{Error, Result};
use crate::kinematics::{invariants, DeformationState, Orientation};
use crate::stress::{sample_weights_with, GaussianModel};

pub const CSV_HEADER: [&str; 7] = [
    "experiment",
    "orientation",
    "direction",
    "sample",
    "lambda1",
    "lambda2",
    "stress_kpa",
];

/// The five stretch ratios of each mount. `W`/`S` name the 0/90 axes (warp along axis 1), `X`/`Y`
/// the ±45 axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    StripW,
    StripS,
    OffW,
    OffS,
    Equibiax,
    StripX,
    StripY,
    OffX,
    OffY,
    EquibiaxOff,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::StripW,
        Experiment::OffW,
        Experiment::Equibiax,
        Experiment::OffS,
        Experiment::StripS,
        Experiment::StripX,
        Experiment::OffX,
        Experiment::EquibiaxOff,
        Experiment::OffY,
        Experiment::StripY,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::StripW => "strip-w",
            Experiment::StripS => "strip-s",
            Experiment::OffW => "off-w",
            Experiment::OffS => "off-s",
            Experiment::Equibiax => "equibiax",
            Experiment::StripX => "strip-x",
            Experiment::StripY => "strip-y",
            Experiment::OffX => "off-x",
            Experiment::OffY => "off-y",
            Experiment::EquibiaxOff => "equibiax-45",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.tag() == tag)
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Experiment::StripW
            | Experiment::StripS
            | Experiment::OffW
            | Experiment::OffS
            | Experiment::Equibiax => Orientation::Aligned0_90,
            _ => Orientation::Offset45,
        }
    }

    /// Fraction of the stretch increment applied along each axis.
    pub fn stretch_ratio(self) -> (f64, f64) {
        match self {
            Experiment::StripW | Experiment::StripX => (1.0, 0.0),
            Experiment::OffW | Experiment::OffX => (1.0, 0.5),
            Experiment::Equibiax | Experiment::EquibiaxOff => (1.0, 1.0),
            Experiment::OffS | Experiment::OffY => (0.5, 1.0),
            Experiment::StripS | Experiment::StripY => (0.0, 1.0),
        }
    }

    /// State after stretching the leading axis by `1 + increment`.
    pub fn state_at(self, increment: f64) -> Result<DeformationState> {
        let (r1, r2) = self.stretch_ratio();
        DeformationState::new(1.0 + r1 * increment, 1.0 + r2 * increment, self.orientation())
    }

    /// The stretch plotted on the horizontal axis: that of the fully loaded axis.
    pub fn loaded_stretch(self, lambda1: f64, lambda2: f64) -> f64 {
        let (r1, _) = self.stretch_ratio();
        if r1 == 1.0 {
            lambda1
        } else {
            lambda2
        }
    }

    /// The ±45 mount is symmetric about the warp fiber, so swapping the loading axes maps these
    /// experiments onto a partner: returns the partner for experiments usually stored that way.
    pub fn mirror_source(self) -> Option<Experiment> {
        match self {
            Experiment::StripY => Some(Experiment::StripX),
            Experiment::OffY => Some(Experiment::OffX),
            _ => None,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Dir1,
    Dir2,
}

impl Direction {
    pub fn number(self) -> u8 {
        match self {
            Direction::Dir1 => 1,
            Direction::Dir2 => 2,
        }
    }

    pub fn from_number(n: &str) -> Option<Self> {
        match n {
            "1" => Some(Direction::Dir1),
            "2" => Some(Direction::Dir2),
            _ => None,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Direction::Dir1 => Direction::Dir2,
            Direction::Dir2 => Direction::Dir1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Dev,
}

/// Which observations an evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    All,
}

impl Split {
    fn admits(self, tag: SplitTag) -> bool {
        match self {
            Split::All => true,
            Split::Train => tag == SplitTag::Train,
            Split::Dev => tag == SplitTag::Dev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Measured stress in the curve's direction (kPa).
    pub stress: f64,
    pub sample: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: String,
    pub orientation: Orientation,
    pub experiment: Experiment,
    pub direction: Direction,
    pub points: Vec<CurvePoint>,
}

pub fn curve_id(experiment: Experiment, direction: Direction) -> String {
    format!("{}:{}", experiment.tag(), direction.number())
}

/// Stress values measured at the same position along a curve across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGroup {
    pub lambda1: f64,
    pub lambda2: f64,
    pub values: Vec<f64>,
}

impl PointGroup {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance (divides by the number of samples).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }
}

impl Curve {
    pub fn new(experiment: Experiment, direction: Direction) -> Self {
        Self {
            id: curve_id(experiment, direction),
            orientation: experiment.orientation(),
            experiment,
            direction,
            points: Vec::new(),
        }
    }

    pub fn state(&self, p: &CurvePoint) -> Result<DeformationState> {
        DeformationState::new(p.lambda1, p.lambda2, self.orientation)
    }

    /// Groups the k-th point of every sample together. All samples of a curve are assumed to
    /// share one stretch grid; the group stretch is the average over its members.
    pub fn point_groups(&self) -> Vec<PointGroup> {
        let mut position: HashMap<u32, usize> = HashMap::new();
        let mut groups: Vec<(f64, f64, Vec<f64>)> = Vec::new();
        for p in &self.points {
            let k = position.entry(p.sample).or_insert(0);
            if *k == groups.len() {
                groups.push((0.0, 0.0, Vec::new()));
            }
            let g = &mut groups[*k];
            g.0 += p.lambda1;
            g.1 += p.lambda2;
            g.2.push(p.stress);
            *k += 1;
        }
        groups
            .into_iter()
            .map(|(l1, l2, values)| {
                let n = values.len() as f64;
                PointGroup {
                    lambda1: l1 / n,
                    lambda2: l2 / n,
                    values,
                }
            })
            .collect()
    }

    pub fn samples(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.points.iter().map(|p| p.sample).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BiaxialDataset {
    pub curves: Vec<Curve>,
    pub split_assignment: BTreeMap<String, SplitTag>,
}

impl BiaxialDataset {
    /// Builds a dataset with every curve in the training split.
    pub fn from_curves(curves: Vec<Curve>) -> Self {
        let split_assignment = curves
            .iter()
            .map(|c| (c.id.clone(), SplitTag::Train))
            .collect();
        Self {
            curves,
            split_assignment,
        }
    }

    pub fn curve(&self, id: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.id == id)
    }

    pub fn split_of(&self, id: &str) -> SplitTag {
        self.split_assignment
            .get(id)
            .copied()
            .unwrap_or(SplitTag::Train)
    }

    pub fn curves_in(&self, split: Split) -> impl Iterator<Item = &Curve> {
        self.curves
            .iter()
            .filter(move |c| split.admits(self.split_of(&c.id)))
    }

    pub fn n_observations(&self, split: Split) -> usize {
        self.curves_in(split).map(|c| c.points.len()).sum()
    }

    /// Largest stretch along either axis among the split's observations.
    pub fn max_stretch(&self, split: Split) -> f64 {
        self.curves_in(split)
            .flat_map(|c| c.points.iter())
            .map(|p| p.lambda1.max(p.lambda2))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn curve_ids(&self) -> Vec<&str> {
        self.curves.iter().map(|c| c.id.as_str()).collect()
    }
}

/// Curves held out for development: the s-stress of strip-w and the w-stress of the equibiaxial
/// test in the 0/90 mount, and the x-stress of strip-x in the ±45 mount.
pub const DEV_CURVES: [(Experiment, Direction); 3] = [
    (Experiment::StripW, Direction::Dir2),
    (Experiment::Equibiax, Direction::Dir1),
    (Experiment::StripX, Direction::Dir1),
];

pub fn paper_split(data: &BiaxialDataset) -> Result<BiaxialDataset> {
    let dev: Vec<String> = DEV_CURVES.iter().map(|(e, d)| curve_id(*e, *d)).collect();
    let missing: Vec<&String> = dev.iter().filter(|id| data.curve(id).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "dev curves {:?} missing; available curves: {}",
            missing,
            data.curve_ids().join(", ")
        )));
    }
    let mut out = data.clone();
    out.split_assignment = data
        .curves
        .iter()
        .map(|c| {
            let tag = if dev.contains(&c.id) {
                SplitTag::Dev
            } else {
                SplitTag::Train
            };
            (c.id.clone(), tag)
        })
        .collect();
    Ok(out)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<BiaxialDataset> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::Data(format!("no such data file: {}", path.display())));
    }
    let (data, warnings) = parse_csv(std::fs::File::open(path)?)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(data)
}

/// Parses CSV text into a dataset (all curves in the training split) and a list of warnings.
pub fn parse_csv(reader: impl Read) -> Result<(BiaxialDataset, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut curves: Vec<Curve> = Vec::new();
    let mut index: HashMap<(Experiment, Direction), usize> = HashMap::new();
    let mut warnings = Vec::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| Error::Parse { line, message };
        if record.len() != CSV_HEADER.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let experiment = Experiment::from_tag(&record[0])
            .ok_or_else(|| err(format!("unknown experiment tag `{}`", &record[0])))?;
        let orientation = Orientation::from_tag(&record[1])
            .ok_or_else(|| err(format!("unknown orientation `{}`", &record[1])))?;
        if orientation != experiment.orientation() {
            return Err(err(format!(
                "experiment {experiment} is not a {} experiment",
                orientation.tag()
            )));
        }
        let direction = Direction::from_number(&record[2])
            .ok_or_else(|| err(format!("direction must be 1 or 2, found `{}`", &record[2])))?;
        let sample: u32 = record[3]
            .parse()
            .map_err(|_| err(format!("invalid sample id `{}`", &record[3])))?;
        let number = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| err(format!("invalid {} `{}`", CSV_HEADER[i], &record[i])))
        };
        let (lambda1, lambda2, stress) = (number(4)?, number(5)?, number(6)?);
        if !(lambda1 > 0.0 && lambda2 > 0.0) || !lambda1.is_finite() || !lambda2.is_finite() {
            return Err(Error::Domain(format!(
                "line {line}: stretches must be positive, got λ1 = {lambda1}, λ2 = {lambda2}"
            )));
        }
        if !stress.is_finite() {
            return Err(err(format!("non-finite stress `{}`", &record[6])));
        }
        if lambda1 < 1.0 - 1e-9 || lambda2 < 1.0 - 1e-9 {
            warnings.push(format!("line {line}: compressive stretch in a tension protocol"));
        }

        let k = *index.entry((experiment, direction)).or_insert_with(|| {
            curves.push(Curve::new(experiment, direction));
            curves.len() - 1
        });
        let curve = &mut curves[k];
        if let Some(last) = curve.points.last() {
            if sample < last.sample {
                warnings.push(format!(
                    "line {line}: sample id {sample} after {} in curve {}",
                    last.sample, curve.id
                ));
            }
        }
        curve.points.push(CurvePoint {
            lambda1,
            lambda2,
            stress,
            sample,
        });
    }

    if curves.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    Ok((BiaxialDataset::from_curves(curves), warnings))
}

/// Writes the dataset in the ingestion schema. Numbers use the shortest representation that
/// parses back to the same value.
pub fn write_csv(data: &BiaxialDataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for c in &data.curves {
        for p in &c.points {
            w.write_record([
                c.experiment.tag().to_string(),
                c.orientation.tag().to_string(),
                c.direction.number().to_string(),
                p.sample.to_string(),
                p.lambda1.to_string(),
                p.lambda2.to_string(),
                p.stress.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &BiaxialDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

/// A loading protocol to synthesize: one experiment, the stress directions to record, and the
/// largest stretch along the leading axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub experiment: Experiment,
    pub directions: Vec<Direction>,
    pub lambda_max: f64,
}

/// The protocol set that produces the 15 unique curves: both directions of all five 0/90
/// experiments, both directions of strip-x and off-x, and one direction of the ±45 equibiaxial
/// test. Strip-y and off-y are the mirror images of strip-x and off-x.
pub fn standard_protocols(lambda_max: f64) -> Vec<Protocol> {
    use Direction::*;
    use Experiment::*;
    let both = || vec![Dir1, Dir2];
    vec![
        Protocol { experiment: StripW, directions: both(), lambda_max },
        Protocol { experiment: OffW, directions: both(), lambda_max },
        Protocol { experiment: Equibiax, directions: both(), lambda_max },
        Protocol { experiment: OffS, directions: both(), lambda_max },
        Protocol { experiment: StripS, directions: both(), lambda_max },
        Protocol { experiment: StripX, directions: both(), lambda_max },
        Protocol { experiment: OffX, directions: both(), lambda_max },
        Protocol { experiment: EquibiaxOff, directions: vec![Dir1], lambda_max },
    ]
}

/// Generates virtual samples from `model`: one weight vector per sample, shared by every
/// protocol, evaluated at `n_points` evenly spaced stretches (identity excluded).
pub fn synthesize(
    model: &GaussianModel,
    protocols: &[Protocol],
    n_samples: usize,
    n_points: usize,
    seed: u64,
) -> Result<BiaxialDataset> {
    if n_samples == 0 || n_points == 0 {
        return Err(Error::Domain(
            "synthesis needs at least one sample and one point".into(),
        ));
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = sample_weights_with(model, n_samples, &mut rng);

    let mut curves = Vec::new();
    for protocol in protocols {
        if !(protocol.lambda_max > 1.0) {
            return Err(Error::Domain(format!(
                "protocol {} needs lambda_max > 1",
                protocol.experiment
            )));
        }
        let mut stations = Vec::with_capacity(n_points);
        for k in 1..=n_points {
            let inc = (protocol.lambda_max - 1.0) * k as f64 / n_points as f64;
            let state = protocol.experiment.state_at(inc)?;
            let evals = eval_library(&invariants(&state), &model.w_star)?;
            stations.push((state, evals));
        }
        for &direction in &protocol.directions {
            let mut curve = Curve::new(protocol.experiment, direction);
            for (s, w) in weights.iter().enumerate() {
                for (state, evals) in &stations {
                    let stress: f64 = (0..N_TERMS)
                        .map(|i| {
                            let unit = match direction {
                                Direction::Dir1 => evals[i].f,
                                Direction::Dir2 => evals[i].g,
                            };
                            w[i] * unit
                        })
                        .sum();
                    curve.points.push(CurvePoint {
                        lambda1: state.lambda1(),
                        lambda2: state.lambda2(),
                        stress,
                        sample: s as u32 + 1,
                    });
                }
            }
            curves.push(curve);
        }
    }
    Ok(BiaxialDataset::from_curves(curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stress::CovarianceParam;

    fn small_model() -> GaussianModel {
        let mut w_mu = [0.0; N_TERMS];
        w_mu[0] = 5.0;
        w_mu[9] = 20.0;
        GaussianModel {
            w_mu,
            w_star: [1.0; N_TERMS],
            covariance: CovarianceParam::independent([0.2; N_TERMS]),
        }
    }

    #[test]
    fn tags_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_tag(e.tag()), Some(e));
        }
        assert_eq!(Experiment::ALL.len(), 10);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "experiment,orientation,direction,sample,lambda1,lambda2,stress_kpa\n\
                    # comment\n\
                    strip-w,0-90,1,1,1.01,1.0,2.5\n\
                    strip-w,0-90,1,1,0,1.0,2.5\n";
        match parse_csv(text.as_bytes()) {
            Err(Error::Domain(msg)) => assert!(msg.contains("line 4"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
        let bad_tag = "experiment,orientation,direction,sample,lambda1,lambda2,stress_kpa\n\
                       strip-q,0-90,1,1,1.01,1.0,2.5\n";
        match parse_csv(bad_tag.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown experiment"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_has_no_observations() {
        let text = "experiment,orientation,direction,sample,lambda1,lambda2,stress_kpa\n";
        match parse_csv(text.as_bytes()) {
            Err(Error::Data(msg)) => assert_eq!(msg, "no observations"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn orientation_must_match_experiment() {
        let text = "experiment,orientation,direction,sample,lambda1,lambda2,stress_kpa\n\
                    strip-x,0-90,1,1,1.01,1.0,2.5\n";
        assert!(matches!(parse_csv(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn non_monotone_samples_warn() {
        let text = "experiment,orientation,direction,sample,lambda1,lambda2,stress_kpa\n\
                    strip-w,0-90,1,2,1.01,1.0,2.5\n\
                    strip-w,0-90,1,1,1.01,1.0,2.4\n";
        let (data, warnings) = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(data.curves.len(), 1);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn standard_protocols_give_fifteen_curves() {
        let data = synthesize(&small_model(), &standard_protocols(1.1), 5, 100, 1).unwrap();
        assert_eq!(data.curves.len(), 15);
        assert_eq!(data.n_observations(Split::All), 7_500);
        for c in &data.curves {
            assert_eq!(c.points.len(), 500);
            assert!(c.points.iter().all(|p| p.lambda1 >= 1.0 && p.lambda2 >= 1.0));
        }
    }

    #[test]
    fn paper_split_partitions_curves() {
        let data = synthesize(&small_model(), &standard_protocols(1.1), 5, 100, 1).unwrap();
        let split = paper_split(&data).unwrap();
        assert_eq!(split.curves_in(Split::Dev).count(), 3);
        assert_eq!(split.n_observations(Split::Dev), 1_500);
        assert_eq!(split.n_observations(Split::Train), 6_000);
        let dev: Vec<&str> = split.curves_in(Split::Dev).map(|c| c.id.as_str()).collect();
        assert_eq!(dev, ["strip-w:2", "equibiax:1", "strip-x:1"]);
        for c in &split.curves {
            let in_train = split.curves_in(Split::Train).any(|t| t.id == c.id);
            let in_dev = split.curves_in(Split::Dev).any(|t| t.id == c.id);
            assert!(in_train ^ in_dev);
        }
        assert_eq!(split, paper_split(&data).unwrap());
    }

    #[test]
    fn paper_split_requires_offset_mount() {
        let only_aligned: Vec<Protocol> = standard_protocols(1.1)
            .into_iter()
            .filter(|p| p.experiment.orientation() == Orientation::Aligned0_90)
            .collect();
        let data = synthesize(&small_model(), &only_aligned, 2, 5, 1).unwrap();
        match paper_split(&data) {
            Err(Error::Data(msg)) => assert!(msg.contains("strip-w:1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_model_gives_identical_samples() {
        let mut m = small_model();
        m.covariance = CovarianceParam::deterministic();
        let data = synthesize(&m, &standard_protocols(1.1), 4, 10, 9).unwrap();
        for c in &data.curves {
            for g in c.point_groups() {
                assert_eq!(g.values.len(), 4);
                assert!(g.values.iter().all(|v| *v == g.values[0]));
            }
        }
    }

    #[test]
    fn synthesis_is_seeded() {
        let a = synthesize(&small_model(), &standard_protocols(1.1), 3, 7, 42).unwrap();
        let b = synthesize(&small_model(), &standard_protocols(1.1), 3, 7, 42).unwrap();
        assert_eq!(a, b);
        assert!(synthesize(&small_model(), &standard_protocols(1.1), 0, 7, 42).is_err());
    }
}
