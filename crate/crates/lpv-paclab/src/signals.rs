//! Sampled signals, datasets and the data-generating process.
//!
//! All signals are piecewise constant on a uniform grid: the value vector at
//! index `k` holds on `[k ts, (k+1) ts)`. Input and scheduling signals store
//! the `K` interval values. Output signals store the samples taken at the
//! interval *right endpoints* `ts, 2 ts, ..., K ts = T`; the initial output at
//! `t = 0` is identically zero (zero initial state) and is not stored. With
//! this alignment all three signals of a trajectory share `ts`, length `K`
//! and horizon `T = K ts`, and evaluation at `t = T` returns the last stored
//! value for each of them.

use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpv::{simulate, LpvSystem, Method};

/// A signal constant on each interval `[k ts, (k+1) ts)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantSignal {
    ts: f64,
    values: Vec<DVector<f64>>,
}

impl PiecewiseConstantSignal {
    pub fn new(ts: f64, values: Vec<DVector<f64>>) -> Result<Self> {
        if !(ts > 0.0) {
            return Err(Error::Config(format!("sample period must be positive, got {ts}")));
        }
        if values.is_empty() {
            return Err(Error::Domain("signal must contain at least one sample".into()));
        }
        let d = values[0].len();
        if d == 0 {
            return Err(Error::Config("signal values must have dimension >= 1".into()));
        }
        if values.iter().any(|v| v.len() != d) {
            return Err(Error::Config("all signal values must share one dimension".into()));
        }
        Ok(Self { ts, values })
    }

    /// Scalar signal from a slice of sample values.
    pub fn scalar(ts: f64, values: &[f64]) -> Result<Self> {
        Self::new(ts, values.iter().map(|&v| DVector::from_element(1, v)).collect())
    }

    /// Dimension-zero scheduling signal for time-invariant models
    /// (`n_p = 0`): `k` empty sample vectors at period `ts`.
    pub fn empty_scheduling(ts: f64, k: usize) -> Result<Self> {
        if !(ts > 0.0) {
            return Err(Error::Config(format!("sample period must be positive, got {ts}")));
        }
        if k == 0 {
            return Err(Error::Domain("signal must contain at least one sample".into()));
        }
        Ok(Self {
            ts,
            values: vec![DVector::zeros(0); k],
        })
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Number of intervals `K`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // enforced non-empty at construction
    }

    /// Value dimension `d`.
    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Horizon `T = K ts`.
    pub fn horizon(&self) -> f64 {
        self.values.len() as f64 * self.ts
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &DVector<f64> {
        &self.values[k]
    }

    /// Evaluate at time `t`: `values[floor(t/ts)]` on `[0, K ts)`; evaluation
    /// at exactly `t = K ts` returns the last value (right-endpoint
    /// convention).
    pub fn at(&self, t: f64) -> Result<&DVector<f64>> {
        let horizon = self.horizon();
        if t < 0.0 || t > horizon * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "evaluation time {t} outside [0, {horizon}]"
            )));
        }
        let k = ((t / self.ts) as usize).min(self.values.len() - 1);
        Ok(&self.values[k])
    }

    /// Last stored sample (the value at `t = T` under the signal alignment).
    pub fn final_value(&self) -> &DVector<f64> {
        self.values.last().expect("non-empty by construction")
    }
}

/// L2 norm over `[0, T]`: exact for piecewise-constant signals,
/// `sqrt(ts * sum_k ||values[k]||^2)`.
pub fn l2_norm(u: &PiecewiseConstantSignal) -> f64 {
    (u.ts * u.values.iter().map(|v| v.norm_squared()).sum::<f64>()).sqrt()
}

/// One recorded input/scheduling/output triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: PiecewiseConstantSignal,
    pub p: PiecewiseConstantSignal,
    pub y: PiecewiseConstantSignal,
}

impl Trajectory {
    pub fn new(
        u: PiecewiseConstantSignal,
        p: PiecewiseConstantSignal,
        y: PiecewiseConstantSignal,
    ) -> Result<Self> {
        let ts = u.ts();
        let k = u.len();
        for (name, s) in [("p", &p), ("y", &y)] {
            if (s.ts() - ts).abs() > 1e-12 * ts.max(1.0) {
                return Err(Error::Config(format!(
                    "signal {name} sample period {} differs from u's {ts}",
                    s.ts()
                )));
            }
            if s.len() != k {
                return Err(Error::Config(format!(
                    "signal {name} has {} samples, expected {k}",
                    s.len()
                )));
            }
        }
        Ok(Self { u, p, y })
    }
}

/// How drawn samples are shifted to zero mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Subtract the distribution mean `(lo + hi)/2` per channel (deterministic).
    #[default]
    DistributionMean,
    /// Subtract each drawn signal's own empirical mean per channel.
    PerSignalEmpirical,
    /// Leave samples as drawn.
    None,
}

/// Law of the random input/scheduling signals and the output noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    /// Per input channel `[lo, hi]` of the uniform sample law.
    pub u_range: Vec<[f64; 2]>,
    /// Per scheduling channel `[lo, hi]` of the uniform sample law.
    pub p_range: Vec<[f64; 2]>,
    #[serde(default)]
    pub centering: Centering,
    /// Variance of the i.i.d. Gaussian noise added to every output sample.
    pub noise_variance: f64,
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.u_range.is_empty() || self.p_range.is_empty() {
            return Err(Error::Config("u_range and p_range must be non-empty".into()));
        }
        for (name, ranges) in [("u_range", &self.u_range), ("p_range", &self.p_range)] {
            for r in ranges {
                if !(r[0] <= r[1]) {
                    return Err(Error::Config(format!("{name} has lo > hi: {r:?}")));
                }
            }
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::Config(format!(
                "noise_variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// A-priori bound on the centered per-sample magnitude of channel `r`.
    fn channel_envelope(r: [f64; 2], centering: Centering) -> f64 {
        match centering {
            Centering::DistributionMean => (r[1] - r[0]) / 2.0,
            // the empirical mean lies inside [lo, hi], so shifted samples
            // stay within +/- (hi - lo)
            Centering::PerSignalEmpirical => r[1] - r[0],
            Centering::None => r[0].abs().max(r[1].abs()),
        }
    }

    /// Worst-case `||u||_{L2([0,T])}` under this law: every sample at the
    /// envelope magnitude.
    pub fn worst_case_u_l2(&self, t_final: f64) -> f64 {
        let sq: f64 = self
            .u_range
            .iter()
            .map(|&r| Self::channel_envelope(r, self.centering).powi(2))
            .sum();
        (t_final * sq).sqrt()
    }
}

/// Generation metadata persisted alongside a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub ts: f64,
    pub law: DistributionSpec,
    pub n: usize,
    pub system_id: String,
}

/// A collection of trajectories drawn from one law.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// SplitMix64 step, used to derive independent seeds from a base seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for trajectory `index` of the dataset seeded by `seed`.
///
/// Distinct indices select distinct ChaCha streams of the same key, giving
/// statistically independent substreams whose draws do not depend on how
/// generation work is scheduled.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_signal(
    rng: &mut ChaCha8Rng,
    ranges: &[[f64; 2]],
    centering: Centering,
    k: usize,
    ts: f64,
) -> Result<PiecewiseConstantSignal> {
    let d = ranges.len();
    let dists: Vec<Uniform<f64>> = ranges.iter().map(|&r| Uniform::new_inclusive(r[0], r[1])).collect();
    let mut values: Vec<DVector<f64>> = (0..k)
        .map(|_| DVector::from_iterator(d, dists.iter().map(|dist| dist.sample(rng))))
        .collect();
    match centering {
        Centering::DistributionMean => {
            let means = DVector::from_iterator(d, ranges.iter().map(|r| (r[0] + r[1]) / 2.0));
            for v in &mut values {
                *v -= &means;
            }
        }
        Centering::PerSignalEmpirical => {
            let mut mean = DVector::zeros(d);
            for v in &values {
                mean += v;
            }
            mean /= k as f64;
            for v in &mut values {
                *v -= &mean;
            }
        }
        Centering::None => {}
    }
    PiecewiseConstantSignal::new(ts, values)
}

/// Draw `n` trajectories from `spec`, simulate `system` (Euler at step `ts`)
/// and add i.i.d. Gaussian output noise to every stored output sample.
///
/// Fully deterministic given `seed`; trajectory `i` uses its own RNG
/// substream, so the result does not depend on the rayon worker count.
pub fn generate_dataset(
    n: usize,
    spec: &DistributionSpec,
    t_final: f64,
    ts: f64,
    system: &LpvSystem,
    seed: u64,
    system_id: &str,
) -> Result<Dataset> {
    spec.validate()?;
    if !(ts > 0.0) || !(t_final > 0.0) {
        return Err(Error::Config("T and ts must be positive".into()));
    }
    let k_float = t_final / ts;
    let k = k_float.round() as usize;
    if k == 0 || (k as f64 - k_float).abs() > 1e-9 * k_float.max(1.0) {
        return Err(Error::Config(format!(
            "T/ts = {k_float} must be a positive integer"
        )));
    }
    if spec.u_range.len() != system.n_in() || spec.p_range.len() != system.n_p() {
        return Err(Error::Config(format!(
            "law dimensions (u {}, p {}) do not match system (n_in {}, n_p {})",
            spec.u_range.len(),
            spec.p_range.len(),
            system.n_in(),
            system.n_p()
        )));
    }
    let noise_sd = spec.noise_variance.sqrt();
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|e| Error::Config(format!("invalid noise distribution: {e}")))?;

    let trajectories: Result<Vec<Trajectory>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(seed, i as u64);
            let u = draw_signal(&mut rng, &spec.u_range, spec.centering, k, ts)?;
            let p = draw_signal(&mut rng, &spec.p_range, spec.centering, k, ts)?;
            let sim = simulate(system, &u, &p, Method::Euler, ts)?;
            let mut y_values: Vec<DVector<f64>> = sim.y.values().to_vec();
            for v in &mut y_values {
                for e in v.iter_mut() {
                    *e += noise.sample(&mut rng);
                }
            }
            Trajectory::new(u, p, PiecewiseConstantSignal::new(ts, y_values)?)
        })
        .collect();

    Ok(Dataset {
        trajectories: trajectories?,
        meta: DatasetMeta {
            seed,
            t_final,
            ts,
            law: spec.clone(),
            n,
            system_id: system_id.to_string(),
        },
    })
}

/// Per-trajectory verdicts for the bounded-signal assumption.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalBoundsReport {
    pub l_u: f64,
    pub c_y: f64,
    /// `||u_i||_{L2} <= L_u` per trajectory.
    pub u_ok: Vec<bool>,
    /// `|y_i(T)| <= c_y` per trajectory.
    pub y_ok: Vec<bool>,
    /// Largest observed `||u||_{L2}` (0 for an empty dataset).
    pub max_u_l2: f64,
    /// Largest observed `|y(T)|` (0 for an empty dataset).
    pub max_y_final: f64,
    pub all_ok: bool,
}

/// Check `||u_i||_{L2} <= L_u` and `|y_i(T)| <= c_y` for every trajectory and
/// report the observed maxima (usable to estimate the constants from data).
pub fn check_signal_bounds(ds: &Dataset, l_u: f64, c_y: f64) -> SignalBoundsReport {
    let mut u_ok = Vec::with_capacity(ds.len());
    let mut y_ok = Vec::with_capacity(ds.len());
    let mut max_u = 0.0_f64;
    let mut max_y = 0.0_f64;
    for tr in &ds.trajectories {
        let un = l2_norm(&tr.u);
        let yn = tr.y.final_value().norm();
        u_ok.push(un <= l_u);
        y_ok.push(yn <= c_y);
        max_u = max_u.max(un);
        max_y = max_y.max(yn);
    }
    let all_ok = u_ok.iter().all(|&b| b) && y_ok.iter().all(|&b| b);
    SignalBoundsReport {
        l_u,
        c_y,
        u_ok,
        y_ok,
        max_u_l2: max_u,
        max_y_final: max_y,
        all_ok,
    }
}

/// Round-trip-safe decimal rendering (17 significant digits).
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Write a dataset as CSV (`traj,k,t,u0..,p0..,y0..`, rows sorted by
/// `(traj, k)`) plus a `<name>.meta.json` sidecar.
pub fn save_dataset(ds: &Dataset, csv_path: &Path) -> Result<()> {
    let n_in = ds.trajectories.first().map_or(ds.meta.law.u_range.len(), |t| t.u.dim());
    let n_p = ds.trajectories.first().map_or(ds.meta.law.p_range.len(), |t| t.p.dim());
    let n_out = ds.trajectories.first().map_or(1, |t| t.y.dim());

    let file = std::fs::File::create(csv_path)?;
    let mut w = BufWriter::new(file);
    let mut header = vec!["traj".to_string(), "k".to_string(), "t".to_string()];
    header.extend((0..n_in).map(|i| format!("u{i}")));
    header.extend((0..n_p).map(|i| format!("p{i}")));
    header.extend((0..n_out).map(|i| format!("y{i}")));
    writeln!(w, "{}", header.join(","))?;

    for (traj, tr) in ds.trajectories.iter().enumerate() {
        for k in 0..tr.u.len() {
            let mut row = vec![
                traj.to_string(),
                k.to_string(),
                format_f64(k as f64 * ds.meta.ts),
            ];
            row.extend(tr.u.value(k).iter().map(|&v| format_f64(v)));
            row.extend(tr.p.value(k).iter().map(|&v| format_f64(v)));
            row.extend(tr.y.value(k).iter().map(|&v| format_f64(v)));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    w.flush()?;

    let meta_json = serde_json::to_string_pretty(&ds.meta)?;
    std::fs::write(sidecar_path(csv_path), meta_json)?;
    Ok(())
}

/// Load a dataset written by [`save_dataset`], validating row structure,
/// timing consistency and the metadata sidecar.
pub fn load_dataset(csv_path: &Path) -> Result<Dataset> {
    let meta_path = sidecar_path(csv_path);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| {
        Error::Parse(format!("missing metadata sidecar {}: {e}", meta_path.display()))
    })?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)?;

    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| Error::Parse(format!("cannot open {}: {e}", csv_path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("bad header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name}")))
    };
    for required in ["traj", "k", "t", "u0", "p0", "y0"] {
        col(required)?;
    }
    let count_prefix = |prefix: &str| {
        let mut n = 0;
        while headers.iter().any(|h| h == format!("{prefix}{n}")) {
            n += 1;
        }
        n
    };
    let (n_in, n_p, n_out) = (count_prefix("u"), count_prefix("p"), count_prefix("y"));
    let (c_traj, c_k, c_t) = (col("traj")?, col("k")?, col("t")?);
    let c_u = col("u0")?;
    let c_p = col("p0")?;
    let c_y = col("y0")?;

    let parse = |field: &str, row_no: usize, what: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| {
            Error::Parse(format!("row {row_no}: cannot parse {what} value {field:?}"))
        })
    };

    // rows grouped by trajectory; (traj, k) must arrive sorted and contiguous
    let mut rows_by_traj: Vec<Vec<(DVector<f64>, DVector<f64>, DVector<f64>)>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 2; // header is row 1
        let record = record.map_err(|e| Error::Parse(format!("row {row_no}: {e}")))?;
        let traj = record[c_traj]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("row {row_no}: bad traj index")))?;
        let k = record[c_k]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("row {row_no}: bad k index")))?;
        let t = parse(&record[c_t], row_no, "t")?;
        if (t - k as f64 * meta.ts).abs() > 1e-9 * meta.ts.max(1.0) {
            return Err(Error::Parse(format!(
                "trajectory {traj}: inconsistent sample timing at row {row_no} (t = {t}, expected k*ts = {})",
                k as f64 * meta.ts
            )));
        }
        if traj == rows_by_traj.len() {
            rows_by_traj.push(Vec::new());
        } else if traj + 1 != rows_by_traj.len() {
            return Err(Error::Parse(format!(
                "row {row_no}: trajectory index {traj} out of order"
            )));
        }
        let rows = rows_by_traj.last_mut().expect("pushed above");
        if k != rows.len() {
            return Err(Error::Parse(format!(
                "trajectory {traj}: expected k = {} at row {row_no}, found {k}",
                rows.len()
            )));
        }
        let grab = |start: usize, d: usize, what: &str| -> Result<DVector<f64>> {
            let mut v = DVector::zeros(d);
            for i in 0..d {
                v[i] = parse(&record[start + i], row_no, what)?;
            }
            Ok(v)
        };
        rows.push((
            grab(c_u, n_in, "u")?,
            grab(c_p, n_p, "p")?,
            grab(c_y, n_out, "y")?,
        ));
    }

    let k_expected = (meta.t_final / meta.ts).round() as usize;
    let mut trajectories = Vec::with_capacity(rows_by_traj.len());
    for (traj, rows) in rows_by_traj.into_iter().enumerate() {
        if rows.len() != k_expected {
            return Err(Error::Parse(format!(
                "trajectory {traj}: {} rows, expected K = {k_expected}",
                rows.len()
            )));
        }
        let mut us = Vec::with_capacity(rows.len());
        let mut ps = Vec::with_capacity(rows.len());
        let mut ys = Vec::with_capacity(rows.len());
        for (u, p, y) in rows {
            us.push(u);
            ps.push(p);
            ys.push(y);
        }
        trajectories.push(Trajectory::new(
            PiecewiseConstantSignal::new(meta.ts, us)?,
            PiecewiseConstantSignal::new(meta.ts, ps)?,
            PiecewiseConstantSignal::new(meta.ts, ys)?,
        )?);
    }
    if trajectories.len() != meta.n {
        return Err(Error::Parse(format!(
            "file holds {} trajectories, metadata says {}",
            trajectories.len(),
            meta.n
        )));
    }
    Ok(Dataset { trajectories, meta })
}
