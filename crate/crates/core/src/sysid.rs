//! Output-error identification of second-order actuator models from averaged
//! PWM step responses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plant::{DiscretePlant, InflationSign, SecondOrderModel};
use crate::scalar::Real;

/// Sample time of the identification experiments (seconds).
pub const DEFAULT_TS: f64 = 0.0625;

/// PWM levels used for synthetic identification data.
pub const SYNTHETIC_LEVELS: [f64; 4] = [25.0, 50.0, 75.0, 100.0];

/// Minimum samples per level needed to fit.
pub const MIN_SAMPLES: usize = 8;

/// Step responses recorded at one constant PWM level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelData<T> {
    pub pwm: T,
    /// Angle sequences in degrees, sampled from the moment the step is applied.
    pub trials: Vec<Vec<T>>,
    /// Sample-wise mean of `trials`.
    pub averaged: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponseDataset<T> {
    pub ts: T,
    pub levels: Vec<LevelData<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult<T> {
    pub model: SecondOrderModel<T>,
    /// Normalized-RMSE fit, 100 is perfect.
    pub fit_percent: T,
    /// ‖y − ŷ‖₂ over all levels, degrees.
    pub residual_norm: T,
}

/// Groups raw trials by level and averages them sample by sample.
pub fn average_trials<T: Real>(ts: T, raw: Vec<(T, Vec<Vec<T>>)>) -> Result<StepResponseDataset<T>> {
    if !(ts > T::zero()) {
        return Err(Error::NonPositiveStep(ts.to_f64_lossy()));
    }
    let mut levels = Vec::with_capacity(raw.len());
    for (pwm, trials) in raw {
        let first = trials.first().ok_or(Error::EmptyLevel(pwm.to_f64_lossy()))?;
        let n = first.len();
        if trials.iter().any(|t| t.len() != n) {
            return Err(Error::RaggedTrials(pwm.to_f64_lossy()));
        }
        let count = T::from_usize(trials.len()).unwrap();
        let averaged = (0..n)
            .map(|k| trials.iter().map(|t| t[k]).sum::<T>() / count)
            .collect();
        levels.push(LevelData {
            pwm,
            trials,
            averaged,
        });
    }
    Ok(StepResponseDataset { ts, levels })
}

/// `100·(1 − ‖y − ŷ‖ / ‖y − ȳ‖)`.
pub fn fit_metric<T: Real>(y: &[T], yhat: &[T]) -> Result<T> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if y.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: y.len(),
        });
    }
    let mean = y.iter().copied().sum::<T>() / T::from_usize(y.len()).unwrap();
    let spread = y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>().sqrt();
    if spread == T::zero() {
        return Err(Error::DegenerateData);
    }
    let resid = y
        .iter()
        .zip(yhat)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt();
    Ok(T::lit(100.0) * (T::one() - resid / spread))
}

/// Output of `model` from rest under each level's constant PWM, one sequence
/// per level matching the dataset's lengths.
pub fn simulate_levels<T: Real>(
    model: &SecondOrderModel<T>,
    data: &StepResponseDataset<T>,
) -> Result<Vec<Vec<T>>> {
    let longest = data.levels.iter().map(|l| l.averaged.len()).max().unwrap_or(0);
    let unit = unit_response(model, data.ts, longest)?;
    Ok(data
        .levels
        .iter()
        .map(|l| unit[..l.averaged.len()].iter().map(|&v| v * l.pwm).collect())
        .collect())
}

// Inputs stay within [0, 100], so the clamp never engages and responses scale linearly.
fn unit_response<T: Real>(model: &SecondOrderModel<T>, ts: T, n: usize) -> Result<Vec<T>> {
    let plant = DiscretePlant::discretize(*model, ts, T::zero(), InflationSign::Increasing)?;
    Ok(plant.step_response(T::one(), n))
}

fn concat<T: Copy>(seqs: impl IntoIterator<Item = impl AsRef<[T]>>) -> Vec<T> {
    let mut out = Vec::new();
    for s in seqs {
        out.extend_from_slice(s.as_ref());
    }
    out
}

/// Log-space simplex coordinates: `(ln b, a1, ln a0)`.
fn encode<T: Real>(m: &SecondOrderModel<T>) -> [T; 3] {
    [m.b.ln(), m.a1, m.a0.ln()]
}

fn decode<T: Real>(p: &[T; 3]) -> SecondOrderModel<T> {
    SecondOrderModel::new(p[0].exp(), p[1], p[2].exp())
}

/// Fits `(b, a1, a0)` by output-error least squares.
///
/// Runs a Nelder–Mead search from `init` and from the eight corners of the
/// log-space cube around it (each parameter scaled by 2 or 1/2), keeps the
/// lowest residual and polishes it with one more simplex run.
pub fn fit_second_order<T: Real>(
    data: &StepResponseDataset<T>,
    init: &SecondOrderModel<T>,
) -> Result<FitResult<T>> {
    let usable = data.levels.iter().any(|l| l.averaged.len() >= MIN_SAMPLES);
    if !usable {
        let got = data.levels.iter().map(|l| l.averaged.len()).max().unwrap_or(0);
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got,
        });
    }
    init.validate()?;
    let measured = concat(data.levels.iter().map(|l| &l.averaged));
    // rejects flat data before any search
    fit_metric(&measured, &vec![T::zero(); measured.len()])?;

    let cost = |p: &[T; 3]| -> T {
        let model = decode(p);
        match simulate_levels(&model, data) {
            Ok(sim) => {
                let mut sse = T::zero();
                for (level, s) in data.levels.iter().zip(&sim) {
                    for (&y, &yh) in level.averaged.iter().zip(s) {
                        sse += (y - yh) * (y - yh);
                    }
                }
                if sse.is_finite() {
                    sse
                } else {
                    T::infinity()
                }
            }
            Err(_) => T::infinity(),
        }
    };

    let mut starts = vec![*init];
    for corner in 0..8u32 {
        let mut model = *init;
        let factor = |bit: u32| if corner & (1 << bit) != 0 { T::lit(2.0) } else { T::lit(0.5) };
        model.b = model.b * factor(0);
        model.a1 = model.a1 * factor(1);
        model.a0 = model.a0 * factor(2);
        starts.push(model);
    }

    let mut runs: Vec<([T; 3], T)> = starts
        .par_iter()
        .map(|m| {
            let p0 = encode(m);
            let (p, _) = nelder_mead(&cost, p0, &simplex_steps(&p0), &SimplexOptions::default());
            nelder_mead(&cost, p, &simplex_steps(&p), &SimplexOptions::default())
        })
        .collect();
    runs.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| lexicographic(&a.0, &b.0))
    });
    let (best, _) = runs[0];
    let (best, _) = nelder_mead(&cost, best, &simplex_steps(&best), &SimplexOptions::default());

    let model = decode(&best);
    let simulated = concat(simulate_levels(&model, data)?);
    let fit_percent = fit_metric(&measured, &simulated)?;
    let residual_norm = measured
        .iter()
        .zip(&simulated)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt();
    Ok(FitResult {
        model,
        fit_percent,
        residual_norm,
    })
}

fn lexicographic<T: Real>(a: &[T; 3], b: &[T; 3]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn simplex_steps<T: Real>(p: &[T; 3]) -> [T; 3] {
    [T::lit(0.1), T::lit(0.1) * p[1].abs().max(T::lit(0.1)), T::lit(0.1)]
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this (relative).
    pub ftol: f64,
    /// Stop when the simplex diameter falls below this.
    pub xtol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            ftol: 1e-15,
            xtol: 1e-12,
        }
    }
}

/// Nelder–Mead minimization in `N` dimensions with standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
pub fn nelder_mead<T: Real, const N: usize, F>(
    f: &F,
    x0: [T; N],
    steps: &[T; N],
    opts: &SimplexOptions,
) -> ([T; N], T)
where
    F: Fn(&[T; N]) -> T + ?Sized,
{
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut simplex: Vec<([T; N], T)> = Vec::with_capacity(N + 1);
    simplex.push((x0, f(&x0)));
    for i in 0..N {
        let mut x = x0;
        x[i] += steps[i];
        simplex.push((x, f(&x)));
    }
    let mut evals = N + 1;
    let order = |s: &mut Vec<([T; N], T)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Greater));
    };
    let along = |from: &[T; N], to: &[T; N], t: T| -> [T; N] {
        let mut out = *from;
        for k in 0..N {
            out[k] = from[k] + t * (to[k] - from[k]);
        }
        out
    };
    while evals < opts.max_evals {
        order(&mut simplex);
        let best = simplex[0].1;
        let worst = simplex[N].1;
        let spread = (worst - best).abs();
        let scale = best.abs() + worst.abs() + T::min_positive_value();
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), T::max);
        if (spread <= T::lit(opts.ftol) * scale && diameter <= T::lit(opts.xtol).sqrt())
            || diameter <= T::lit(opts.xtol)
        {
            break;
        }
        let mut centroid = [T::zero(); N];
        for (x, _) in &simplex[..N] {
            for k in 0..N {
                centroid[k] += x[k];
            }
        }
        let inv = T::one() / T::from_usize(N).unwrap();
        for c in centroid.iter_mut() {
            *c *= inv;
        }
        let worst_x = simplex[N].0;
        let reflected = along(&centroid, &worst_x, -T::one());
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = along(&centroid, &worst_x, -two);
            let fe = f(&expanded);
            evals += 1;
            simplex[N] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst { (reflected, fr) } else { (worst_x, worst) };
            let contracted = along(&centroid, &target, half);
            let fc = f(&contracted);
            evals += 1;
            if fc < ft {
                simplex[N] = (contracted, fc);
            } else {
                let best_x = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let x = along(&best_x, &entry.0, half);
                    *entry = (x, f(&x));
                    evals += 1;
                }
            }
        }
    }
    order(&mut simplex);
    simplex[0]
}

/// Noisy step-response data generated from a known model.
///
/// Each level gets `trials` sequences of `duration/ts + 1` samples; noise is
/// Gaussian with standard deviation `noise_frac` times that level's final
/// value (`pwm · dc_gain`).
pub fn synthetic_dataset<T: Real>(
    model: &SecondOrderModel<T>,
    ts: T,
    levels: &[T],
    duration: T,
    trials: usize,
    noise_frac: f64,
    seed: u64,
) -> Result<StepResponseDataset<T>> {
    let n = (duration / ts).round().to_usize().unwrap_or(0) + 1;
    let unit = unit_response(model, ts, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(levels.len());
    for &pwm in levels {
        let final_value = (pwm * model.dc_gain()).to_f64_lossy().abs();
        let sd = noise_frac * final_value;
        let normal = Normal::new(0.0, sd.max(0.0)).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        let seqs = (0..trials.max(1))
            .map(|_| {
                unit.iter()
                    .map(|&v| {
                        let eps = if sd > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                        v * pwm + T::lit(eps)
                    })
                    .collect()
            })
            .collect();
        raw.push((pwm, seqs));
    }
    average_trials(ts, raw)
}
