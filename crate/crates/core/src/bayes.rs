//! Discrete histogram Bayes filter.
//!
//! Beliefs live on a fixed `width × height` grid (row-major, `height == 1`
//! for a corridor). Motion is a finite shift kernel per command; mass that
//! would leave the grid stays in the boundary cell. Observations select a
//! tabulated likelihood over cells.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridBelief {
    cells: Vec<f64>,
    width: usize,
    height: usize,
    cell_size: f64,
}

impl GridBelief {
    /// Normalizes `mass` into a belief. Fails on negative, non-finite or
    /// all-zero mass, or when the length is not `width * height`.
    pub fn new(mass: Vec<f64>, width: usize, height: usize, cell_size: f64) -> Result<Self> {
        if width == 0 || height == 0 || mass.len() != width * height {
            return Err(Error::InvalidModel(format!(
                "belief has {} cells, grid is {width}x{height}",
                mass.len()
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidModel("cell_size must be positive".into()));
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidModel("belief mass must be finite and non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidModel("belief has no mass".into()));
        }
        let cells = mass.into_iter().map(|m| m / total).collect();
        Ok(Self { cells, width, height, cell_size })
    }

    /// 1D belief with unit cells.
    pub fn line(mass: Vec<f64>) -> Result<Self> {
        let n = mass.len();
        Self::new(mass, n, 1, 1.0)
    }

    pub fn uniform(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        Self::new(vec![1.0; width * height], width, height, cell_size)
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Index of the most probable cell (lowest index on ties).
    pub fn argmax(&self) -> usize {
        self.cells
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }

    fn with_mass(&self, mass: Vec<f64>) -> Result<Self> {
        Self::new(mass, self.width, self.height, self.cell_size)
    }
}

/// One tap of a shift kernel: move `(dx, dy)` cells with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub dx: i64,
    #[serde(default)]
    pub dy: i64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Shift>", into = "Vec<Shift>")]
pub struct ShiftKernel {
    taps: Vec<Shift>,
}

impl ShiftKernel {
    pub fn new(taps: Vec<Shift>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidModel("kernel has no taps".into()));
        }
        if taps.iter().any(|t| !(t.p.is_finite() && t.p >= 0.0)) {
            return Err(Error::InvalidModel("kernel probabilities must be non-negative".into()));
        }
        let total: f64 = taps.iter().map(|t| t.p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidModel(format!("kernel sums to {total}, not 1")));
        }
        Ok(Self { taps })
    }

    pub fn identity() -> Self {
        Self { taps: vec![Shift { dx: 0, dy: 0, p: 1.0 }] }
    }

    /// With probability 1 move `dx` cells along the row.
    pub fn deterministic(dx: i64) -> Self {
        Self { taps: vec![Shift { dx, dy: 0, p: 1.0 }] }
    }

    pub fn taps(&self) -> &[Shift] {
        &self.taps
    }

    /// Destination cell of `from` under `tap`, clamped to the grid.
    fn target(tap: &Shift, from: usize, width: usize, height: usize) -> usize {
        let (x, y) = ((from % width) as i64, (from / width) as i64);
        let nx = (x + tap.dx).clamp(0, width as i64 - 1) as usize;
        let ny = (y + tap.dy).clamp(0, height as i64 - 1) as usize;
        ny * width + nx
    }
}

impl TryFrom<Vec<Shift>> for ShiftKernel {
    type Error = Error;
    fn try_from(taps: Vec<Shift>) -> Result<Self> {
        Self::new(taps)
    }
}

impl From<ShiftKernel> for Vec<Shift> {
    fn from(k: ShiftKernel) -> Self {
        k.taps
    }
}

/// `p(x_t | u_t, x_{t-1})` as a shift kernel per named command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MotionModel {
    kernels: BTreeMap<String, ShiftKernel>,
}

impl MotionModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, command: impl Into<String>, kernel: ShiftKernel) -> Self {
        self.kernels.insert(command.into(), kernel);
        self
    }

    pub fn kernel(&self, command: &str) -> Result<&ShiftKernel> {
        self.kernels
            .get(command)
            .ok_or_else(|| Error::InvalidModel(format!("unknown command {command:?}")))
    }

    pub fn commands(&self) -> impl Iterator<Item = &str> {
        self.kernels.keys().map(String::as_str)
    }
}

/// `p(z_t | x_t)` tabulated over cells per named observation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementModel {
    likelihoods: BTreeMap<String, Vec<f64>>,
}

impl MeasurementModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a likelihood table; rejects negative entries and all-zero tables.
    pub fn with(mut self, observation: impl Into<String>, likelihood: Vec<f64>) -> Result<Self> {
        validate_likelihood(&likelihood)?;
        self.likelihoods.insert(observation.into(), likelihood);
        Ok(self)
    }

    pub fn likelihood(&self, observation: &str) -> Result<&[f64]> {
        self.likelihoods
            .get(observation)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidModel(format!("unknown observation {observation:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.likelihoods.values().try_for_each(|l| validate_likelihood(l))
    }

    pub fn observations(&self) -> impl Iterator<Item = &str> {
        self.likelihoods.keys().map(String::as_str)
    }
}

fn validate_likelihood(l: &[f64]) -> Result<()> {
    if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidModel("likelihood entries must be non-negative".into()));
    }
    if !l.iter().any(|&v| v > 0.0) {
        return Err(Error::InvalidModel("likelihood is identically zero".into()));
    }
    Ok(())
}

/// `μ̄(x) = Σ_{x'} p(x | u, x') μ(x')`.
pub fn predict(belief: &GridBelief, motion: &MotionModel, command: &str) -> Result<GridBelief> {
    let kernel = motion.kernel(command)?;
    let (w, h) = (belief.width, belief.height);
    let mut out = vec![0.0; belief.len()];
    for (from, &mass) in belief.cells.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for tap in &kernel.taps {
            out[ShiftKernel::target(tap, from, w, h)] += tap.p * mass;
        }
    }
    belief.with_mass(out)
}

/// `μ(x) = η p(z | x) μ̄(x)`.
pub fn correct(belief: &GridBelief, meas: &MeasurementModel, observation: &str) -> Result<GridBelief> {
    let likelihood = meas.likelihood(observation)?;
    if likelihood.len() != belief.len() {
        return Err(Error::InvalidModel(format!(
            "likelihood {observation:?} has {} cells, belief has {}",
            likelihood.len(),
            belief.len()
        )));
    }
    let product: Vec<f64> = belief.cells.iter().zip(likelihood).map(|(b, l)| b * l).collect();
    if !(product.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroLikelihood);
    }
    belief.with_mass(product)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStep {
    pub command: String,
    pub observation: String,
}

impl FilterStep {
    pub fn new(command: impl Into<String>, observation: impl Into<String>) -> Self {
        Self { command: command.into(), observation: observation.into() }
    }
}

/// Posterior after each step, predict then correct.
pub fn filter_run(
    initial: &GridBelief,
    steps: &[FilterStep],
    motion: &MotionModel,
    meas: &MeasurementModel,
) -> Result<Vec<GridBelief>> {
    meas.validate()?;
    let mut trace = Vec::with_capacity(steps.len());
    let mut belief = initial.clone();
    for step in steps {
        belief = correct(&predict(&belief, motion, &step.command)?, meas, &step.observation)?;
        trace.push(belief.clone());
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn stay_or_step() -> ShiftKernel {
        ShiftKernel::new(vec![Shift { dx: 0, dy: 0, p: 0.5 }, Shift { dx: 1, dy: 0, p: 0.5 }]).unwrap()
    }

    #[test]
    fn predict_examples() {
        let motion = MotionModel::new()
            .with("right", ShiftKernel::deterministic(1))
            .with("stay", ShiftKernel::identity())
            .with("maybe", stay_or_step());
        let b = GridBelief::line(vec![1., 0., 0., 0.]).unwrap();
        assert_eq!(predict(&b, &motion, "right").unwrap().cells(), &[0., 1., 0., 0.]);

        let u = GridBelief::uniform(5, 1, 1.0).unwrap();
        assert_eq!(predict(&u, &motion, "stay").unwrap(), u);

        let b = GridBelief::line(vec![1., 0., 0.]).unwrap();
        assert_eq!(predict(&b, &motion, "maybe").unwrap().cells(), &[0.5, 0.5, 0.]);
    }

    #[test]
    fn boundary_absorbs_mass() {
        let motion = MotionModel::new().with("right", ShiftKernel::deterministic(2));
        let b = GridBelief::line(vec![0., 0.5, 0.5]).unwrap();
        assert_eq!(predict(&b, &motion, "right").unwrap().cells(), &[0., 0., 1.]);
    }

    #[test]
    fn two_dimensional_shift_is_row_major() {
        let kernel = ShiftKernel::new(vec![Shift { dx: 0, dy: 1, p: 1.0 }]).unwrap();
        let motion = MotionModel::new().with("up", kernel);
        let mut mass = vec![0.0; 6];
        mass[1] = 1.0;
        let b = GridBelief::new(mass, 3, 2, 0.5).unwrap();
        assert_eq!(predict(&b, &motion, "up").unwrap().argmax(), 4);
    }

    #[test]
    fn correct_examples() {
        let meas = MeasurementModel::new()
            .with("flat", vec![0.3, 0.3, 0.3])
            .unwrap()
            .with("z", vec![0.2, 0.8, 1.0])
            .unwrap();
        let b = GridBelief::line(vec![0.5, 0.5, 0.]).unwrap();
        assert!(close(correct(&b, &meas, "flat").unwrap().cells(), b.cells(), 1e-15));
        assert!(close(correct(&b, &meas, "z").unwrap().cells(), &[0.2, 0.8, 0.], 1e-15));

        let meas = MeasurementModel::new().with("far", vec![0., 1.]).unwrap();
        let b = GridBelief::line(vec![1., 0.]).unwrap();
        assert!(matches!(correct(&b, &meas, "far"), Err(Error::ZeroLikelihood)));
    }

    #[test]
    fn filter_run_examples() {
        let motion = MotionModel::new().with("stay", ShiftKernel::identity());
        let meas = MeasurementModel::new().with("any", vec![1.0; 4]).unwrap();
        let prior = GridBelief::line(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(filter_run(&prior, &[], &motion, &meas).unwrap().is_empty());
        let out = filter_run(&prior, &[FilterStep::new("stay", "any")], &motion, &meas).unwrap();
        assert!(close(out[0].cells(), prior.cells(), 1e-15));
    }

    #[test]
    fn corridor_by_hand() {
        // uniform prior, "maybe" then "door"(cell 0 and 2), twice
        let motion = MotionModel::new().with("maybe", stay_or_step());
        let meas = MeasurementModel::new().with("door", vec![0.9, 0.1, 0.9]).unwrap();
        let prior = GridBelief::uniform(3, 1, 1.0).unwrap();
        let steps = vec![FilterStep::new("maybe", "door"); 2];
        let out = filter_run(&prior, &steps, &motion, &meas).unwrap();
        // step 1: predict [1/6, 1/3, 1/2]; times likelihood [.15, 1/30, .45], sum 19/30
        let one = [0.15 * 30. / 19., (1. / 30.) * 30. / 19., 0.45 * 30. / 19.];
        assert!(close(out[0].cells(), &one, 1e-12));
        // step 2: predict [one0/2, (one0+one1)/2, one1/2 + one2]
        let pred = [one[0] / 2., (one[0] + one[1]) / 2., one[1] / 2. + one[2]];
        let raw = [pred[0] * 0.9, pred[1] * 0.1, pred[2] * 0.9];
        let s: f64 = raw.iter().sum();
        assert!(close(out[1].cells(), &raw.map(|r| r / s), 1e-12));
    }

    #[test]
    fn model_validation() {
        assert!(ShiftKernel::new(vec![Shift { dx: 1, dy: 0, p: 0.6 }]).is_err());
        assert!(ShiftKernel::new(vec![]).is_err());
        assert!(MeasurementModel::new().with("z", vec![0., 0.]).is_err());
        assert!(MeasurementModel::new().with("z", vec![-1., 2.]).is_err());
        assert!(GridBelief::line(vec![0., 0.]).is_err());
        assert!(GridBelief::new(vec![1.; 5], 2, 2, 1.0).is_err());
        let b = GridBelief::line(vec![1., 1.]).unwrap();
        assert!(predict(&b, &MotionModel::new(), "nope").is_err());
    }

    #[test]
    fn models_deserialize_from_json() {
        let motion: MotionModel =
            serde_json::from_str(r#"{"right": [{"dx": 1, "p": 0.8}, {"dx": 0, "p": 0.2}]}"#).unwrap();
        assert_eq!(motion.kernel("right").unwrap().taps().len(), 2);
        assert!(serde_json::from_str::<MotionModel>(r#"{"bad": [{"dx": 1, "p": 0.5}]}"#).is_err());
    }

    /// Transition matrix `T[to][from]` built tap by tap.
    fn transition_matrix(kernel: &ShiftKernel, n: usize) -> Vec<Vec<f64>> {
        let mut t = vec![vec![0.0; n]; n];
        for from in 0..n {
            for tap in kernel.taps() {
                let to = (from as i64 + tap.dx).clamp(0, n as i64 - 1) as usize;
                t[to][from] += tap.p;
            }
        }
        t
    }

    fn kernel_strategy() -> impl Strategy<Value = ShiftKernel> {
        prop::collection::vec((-2i64..=2, 0.01..1.0f64), 1..4).prop_map(|raw| {
            let total: f64 = raw.iter().map(|r| r.1).sum();
            let mut taps: Vec<Shift> = raw.iter().map(|&(dx, p)| Shift { dx, dy: 0, p: p / total }).collect();
            let rest: f64 = taps[1..].iter().map(|t| t.p).sum();
            taps[0].p = 1.0 - rest;
            ShiftKernel::new(taps).unwrap()
        })
    }

    /// Marginal of the final state from summing over every state path.
    fn brute_force(
        prior: &[f64],
        kernels: &[ShiftKernel],
        likelihoods: &[Vec<f64>],
    ) -> Vec<f64> {
        let n = prior.len();
        let mats: Vec<_> = kernels.iter().map(|k| transition_matrix(k, n)).collect();
        let t = kernels.len();
        let mut marginal = vec![0.0; n];
        let paths = n.pow(t as u32 + 1);
        for code in 0..paths {
            let mut path = Vec::with_capacity(t + 1);
            let mut c = code;
            for _ in 0..=t {
                path.push(c % n);
                c /= n;
            }
            let mut w = prior[path[0]];
            for k in 0..t {
                w *= mats[k][path[k + 1]][path[k]] * likelihoods[k][path[k + 1]];
            }
            marginal[path[t]] += w;
        }
        let s: f64 = marginal.iter().sum();
        marginal.iter().map(|m| m / s).collect()
    }

    proptest! {
        #[test]
        fn one_pass_update_matches_predict_then_correct(
            prior in prop::collection::vec(0.0..1.0f64, 10),
            kernel in kernel_strategy(),
            like in prop::collection::vec(0.0..1.0f64, 10),
        ) {
            prop_assume!(prior.iter().sum::<f64>() > 0.1 && like.iter().any(|&l| l > 0.05));
            let b = GridBelief::line(prior).unwrap();
            let motion = MotionModel::new().with("u", kernel.clone());
            let meas = MeasurementModel::new().with("z", like.clone()).unwrap();
            let Ok(two_step) = correct(&predict(&b, &motion, "u").unwrap(), &meas, "z") else {
                return Ok(());
            };
            let t = transition_matrix(&kernel, 10);
            let raw: Vec<f64> = (0..10)
                .map(|x| like[x] * (0..10).map(|xp| t[x][xp] * b.cells()[xp]).sum::<f64>())
                .collect();
            let eta = 1.0 / raw.iter().sum::<f64>();
            let direct: Vec<f64> = raw.iter().map(|r| eta * r).collect();
            prop_assert!(close(two_step.cells(), &direct, 1e-12));
        }

        #[test]
        fn filter_matches_path_enumeration(
            n in 1usize..=5,
            steps in 0usize..=4,
            seed_kernels in prop::collection::vec(kernel_strategy(), 4),
            raw_like in prop::collection::vec(prop::collection::vec(0.05..1.0f64, 5), 4),
            raw_prior in prop::collection::vec(0.01..1.0f64, 5),
        ) {
            let prior = GridBelief::line(raw_prior[..n].to_vec()).unwrap();
            let mut motion = MotionModel::new();
            let mut meas = MeasurementModel::new();
            let mut plan = Vec::new();
            for k in 0..steps {
                motion = motion.with(format!("u{k}"), seed_kernels[k].clone());
                meas = meas.with(format!("z{k}"), raw_like[k][..n].to_vec()).unwrap();
                plan.push(FilterStep::new(format!("u{k}"), format!("z{k}")));
            }
            let trace = filter_run(&prior, &plan, &motion, &meas).unwrap();
            prop_assert_eq!(trace.len(), steps);
            for (k, belief) in trace.iter().enumerate() {
                let oracle = brute_force(
                    prior.cells(),
                    &seed_kernels[..=k],
                    &raw_like[..=k].iter().map(|l| l[..n].to_vec()).collect::<Vec<_>>(),
                );
                prop_assert!(close(belief.cells(), &oracle, 1e-9));
                prop_assert!((belief.total() - 1.0).abs() <= NORMALIZATION_TOLERANCE);
            }
        }

        #[test]
        fn mass_stays_non_negative_and_dead_cells_stay_dead(
            prior in prop::collection::vec(0.0..1.0f64, 8),
            kernel in kernel_strategy(),
            mut like in prop::collection::vec(0.1..1.0f64, 8),
            dead in 0usize..8,
        ) {
            prop_assume!(prior.iter().sum::<f64>() > 0.1);
            like[dead] = 0.0;
            let b = GridBelief::line(prior).unwrap();
            let p = predict(&b, &MotionModel::new().with("u", kernel), "u").unwrap();
            prop_assert!(p.cells().iter().all(|&c| c >= 0.0));
            prop_assert!((p.total() - 1.0).abs() <= NORMALIZATION_TOLERANCE);
            if let Ok(c) = correct(&p, &MeasurementModel::new().with("z", like).unwrap(), "z") {
                prop_assert_eq!(c.cells()[dead], 0.0);
                prop_assert!((c.total() - 1.0).abs() <= NORMALIZATION_TOLERANCE);
            }
        }
    }
}
