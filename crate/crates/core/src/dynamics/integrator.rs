//! Explicit adaptive Dormand-Prince 8(5,3) integrator.
//!
//! Coefficients and step-size control follow Hairer, Norsett & Wanner's
//! DOP853. Samples are hit exactly by shortening the step that would
//! overshoot them; the unshortened proposal is kept for the following step.

use crate::error::{Error, Result};

/// Right-hand side of an autonomous or non-autonomous ODE `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on `|h|`; `None` means the whole interval.
    pub h_max: Option<f64>,
    /// Initial step; `None` selects it automatically.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dop853 {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_max: None, h_init: None, max_steps: 50_000_000 }
    }
}

/// Outcome of a successful run.
#[derive(Clone, Debug)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: StepStats,
}

/// What the step observer sees after each accepted step.
pub struct StepEvent<'a> {
    pub t: f64,
    pub y: &'a [f64],
    /// Index into the requested sample times when this step lands on one.
    pub sample: Option<usize>,
}

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.333;
const FAC2: f64 = 6.0;
const BETA: f64 = 0.0;

impl Dop853 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn with_h_max(mut self, h: f64) -> Self {
        self.h_max = Some(h);
        self
    }

    pub fn with_h_init(mut self, h: f64) -> Self {
        self.h_init = Some(h);
        self
    }

    /// Integrate from `(t0, y0)` to `t_end` (either direction).
    ///
    /// `sample_times` must be ordered in the direction of integration and
    /// lie in `(t0, t_end]`; each is hit exactly and reported through
    /// `observer`, which is called after every accepted step. Returning an
    /// error from the observer aborts the run with that error.
    pub fn solve<S, O>(&self, sys: &S, t0: f64, y0: &[f64], t_end: f64, sample_times: &[f64], mut observer: O) -> Result<Solution>
    where
        S: OdeSystem + ?Sized,
        O: FnMut(StepEvent<'_>) -> Result<()>,
    {
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y0.len() });
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Validation("rtol and atol must be positive".into()));
        }
        let mut stats = StepStats::default();
        let mut t = t0;
        let mut y = y0.to_vec();
        if t_end == t0 {
            return Ok(Solution { t, y, stats });
        }
        let dir = (t_end - t0).signum();
        let span = (t_end - t0).abs();
        let h_max = self.h_max.unwrap_or(span).min(span);

        let mut w = Workspace::new(n);
        sys.rhs(t, &y, &mut w.k[0]);
        stats.evaluations += 1;

        let mut h = match self.h_init {
            Some(h) => h.abs().min(h_max),
            None => {
                stats.evaluations += 1;
                self.initial_step(sys, t, &y, &w.k[0], dir, h_max)
            }
        };
        let mut facold: f64 = 1e-4;
        let mut last_rejected = false;
        let mut next_sample = 0usize;
        let expo1 = 1.0 / 8.0 - BETA * 0.2;
        let facc1 = 1.0 / FAC1;
        let facc2 = 1.0 / FAC2;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::StepBudget { max_steps: self.max_steps, last_good_t: t });
            }
            // next stopping point: a sample or the end
            let target = sample_times.get(next_sample).copied().unwrap_or(t_end);
            let remaining = (target - t) * dir;
            let mut clipped = false;
            let mut h_step = h;
            if h_step >= remaining {
                h_step = remaining;
                clipped = true;
            }
            if h_step.abs() <= 10.0 * f64::EPSILON * t.abs().max(1.0) && !clipped {
                return Err(Error::StepUnderflow { last_good_t: t });
            }
            let hs = h_step * dir;

            let err = w.step(sys, t, &y, hs, self.rtol, self.atol);
            stats.evaluations += 11;

            let fac11 = err.powf(expo1);
            let fac = (fac11 / facold.powf(BETA)).clamp(facc2 * SAFE, facc1 * SAFE) / SAFE;
            let h_new = h_step / fac;

            if err <= 1.0 {
                facold = err.max(1e-4);
                stats.accepted += 1;
                t = if clipped { target } else { t + hs };
                std::mem::swap(&mut y, &mut w.y_new);
                // FSAL: derivative at the new point
                sys.rhs(t, &y, &mut w.k[0]);
                stats.evaluations += 1;

                let sample = if clipped && next_sample < sample_times.len() {
                    next_sample += 1;
                    Some(next_sample - 1)
                } else {
                    None
                };
                observer(StepEvent { t, y: &y, sample })?;

                if clipped && target == t_end && next_sample >= sample_times.len() {
                    return Ok(Solution { t, y, stats });
                }
                let mut proposal = h_new.abs().min(h_max);
                if last_rejected {
                    proposal = proposal.min(h_step);
                }
                // keep the natural step size after a sample-induced clip
                h = if clipped { proposal.max(h) } else { proposal };
                last_rejected = false;
            } else {
                stats.rejected += 1;
                h = h_step / facc1.min(fac11 / SAFE);
                last_rejected = true;
            }
        }
    }

    fn initial_step<S: OdeSystem + ?Sized>(&self, sys: &S, t: f64, y: &[f64], f0: &[f64], dir: f64, h_max: f64) -> f64 {
        let n = y.len();
        let sk: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let rms = |v: &[f64]| (v.iter().zip(&sk).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d0 = rms(y);
        let d1 = rms(f0);
        let mut h = if d0 <= 1e-10 || d1 <= 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        h = h.min(h_max);
        let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h * b).collect();
        let mut f1 = vec![0.0; n];
        sys.rhs(t + dir * h, &y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h;
        let der = d1.max(d2);
        let h1 = if der <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der).powf(1.0 / 8.0) };
        (100.0 * h).min(h1).min(h_max)
    }
}

struct Workspace {
    k: [Vec<f64>; 12],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], y_new: vec![0.0; n] }
    }

    /// Stage `s` at `t + C[s] h` from `y + h sum_j A[s][j] k_j`.
    fn stage<S: OdeSystem + ?Sized>(&mut self, sys: &S, s: usize, t: f64, y: &[f64], h: f64) {
        let row = &A[s];
        for i in 0..y.len() {
            let mut acc = 0.0;
            for (j, &a) in row.iter().enumerate().take(s) {
                if a != 0.0 {
                    acc += a * self.k[j][i];
                }
            }
            self.tmp[i] = y[i] + h * acc;
        }
        let (_, rest) = self.k.split_at_mut(s);
        sys.rhs(t + C[s] * h, &self.tmp, &mut rest[0]);
    }

    /// One trial step; writes the 8th-order result into `y_new` and returns
    /// the scaled error norm (accept iff <= 1).
    fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &[f64], h: f64, rtol: f64, atol: f64) -> f64 {
        for s in 1..12 {
            self.stage(sys, s, t, y, h);
        }
        let n = y.len();
        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..n {
            let mut incr = 0.0;
            let mut e5 = 0.0;
            for s in 0..12 {
                incr += B[s] * self.k[s][i];
                e5 += ER[s] * self.k[s][i];
            }
            let yn = y[i] + h * incr;
            self.y_new[i] = yn;
            let sk = atol + rtol * y[i].abs().max(yn.abs());
            let e3 = incr - BHH[0] * self.k[0][i] - BHH[1] * self.k[8][i] - BHH[2] * self.k[11][i];
            err += (e5 / sk).powi(2);
            err2 += (e3 / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        h.abs() * err * (1.0 / (deno * n as f64)).sqrt()
    }
}

#[allow(clippy::excessive_precision)]
const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510e+00,
    0.281649658092772603273242802490e+00,
    0.333333333333333333333333333333e+00,
    0.25e+00,
    0.307692307692307692307692307692e+00,
    0.651282051282051282051282051282e+00,
    0.6e+00,
    0.857142857142857142857142857142e+00,
    1.0,
];

#[allow(clippy::excessive_precision)]
const A: [[f64; 12]; 12] = [
    [0.0; 12],
    [5.26001519587677318785587544488e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.97250569845378994544595329183e-2, 5.91751709536136983633785987549e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.95875854768068491816892993775e-2, 0.0, 8.87627564304205475450678981324e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.41365134159266685502369798665e-1,
        0.0,
        -8.84549479328286085344864962717e-1,
        9.24834003261792003115737966543e-1,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.7037037037037037037037037037e-2,
        0.0,
        0.0,
        1.70828608729473871279604482173e-1,
        1.25467687566822425016691814123e-1,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.7109375e-2,
        0.0,
        0.0,
        1.70252211019544039314978060272e-1,
        6.02165389804559606850219397283e-2,
        -1.7578125e-2,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.70920001185047927108779319836e-2,
        0.0,
        0.0,
        1.70383925712239993810214054705e-1,
        1.07262030446373284651809199168e-1,
        -1.53194377486244017527936158236e-2,
        8.27378916381402288758473766002e-3,
        0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        6.24110958716075717114429577812e-1,
        0.0,
        0.0,
        -3.36089262944694129406857109825e0,
        -8.68219346841726006818189891453e-1,
        2.75920996994467083049415600797e1,
        2.01540675504778934086186788979e1,
        -4.34898841810699588477366255144e1,
        0.0, 0.0, 0.0, 0.0,
    ],
    [
        4.77662536438264365890433908527e-1,
        0.0,
        0.0,
        -2.48811461997166764192642586468e0,
        -5.90290826836842996371446475743e-1,
        2.12300514481811942347288949897e1,
        1.52792336328824235832596922938e1,
        -3.32882109689848629194453265587e1,
        -2.03312017085086261358222928593e-2,
        0.0, 0.0, 0.0,
    ],
    [
        -9.3714243008598732571704021658e-1,
        0.0,
        0.0,
        5.18637242884406370830023853209e0,
        1.09143734899672957818500254654e0,
        -8.14978701074692612513997267357e0,
        -1.85200656599969598641566180701e1,
        2.27394870993505042818970056734e1,
        2.49360555267965238987089396762e0,
        -3.0467644718982195003823669022e0,
        0.0, 0.0,
    ],
    [
        2.27331014751653820792359768449e0,
        0.0,
        0.0,
        -1.05344954667372501984066689879e1,
        -2.00087205822486249909675718444e0,
        -1.79589318631187989172765950534e1,
        2.79488845294199600508499808837e1,
        -2.85899827713502369474065508674e0,
        -8.87285693353062954433549289258e0,
        1.23605671757943030647266201528e1,
        6.43392746015763530355970484046e-1,
        0.0,
    ],
];

#[allow(clippy::excessive_precision)]
const B: [f64; 12] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566e0,
    1.89151789931450038304281599044e0,
    -5.8012039600105847814672114227e0,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

#[allow(clippy::excessive_precision)]
const BHH: [f64; 3] = [
    0.244094488188976377952755905512e+00,
    0.733846688281611857341361741547e+00,
    0.220588235294117647058823529412e-01,
];

#[allow(clippy::excessive_precision)]
const ER: [f64; 12] = [
    0.1312004499419488073250102996e-01,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e+01,
    -0.4957589496572501915214079952e+00,
    0.1664377182454986536961530415e+01,
    -0.3503288487499736816886487290e+00,
    0.3341791187130174790297318841e+00,
    0.8192320648511571246570742613e-01,
    -0.2235530786388629525884427845e-01,
];
