//! Monte Carlo link simulation of the four-slot scheme.
//!
//! Symbols, relay noise and destination noise are drawn from separate
//! ChaCha8 streams of the batch seed: stream 0 for symbols, 1 and 2 for the
//! relay noise of slots 1 and 2, and `16 + 4m + q` for the noise of
//! destination `m` in slot `q`. Destinations can therefore be simulated in
//! any order with identical results.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relaycast_linalg::Complex64;

use crate::model::BeamformerSolution;
use crate::scenario::{complex_gaussian, stream_rng, ChannelRealization};
use crate::CoreError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constellation {
    Bpsk,
    Qpsk,
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Bpsk => 1,
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    pub fn size(self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Gray-labelled point for `label`, unit average energy.
    pub fn point(self, label: usize) -> Complex64 {
        match self {
            Constellation::Bpsk => Complex64::new(if label & 1 == 0 { 1.0 } else { -1.0 }, 0.0),
            Constellation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Complex64::new(
                    if label & 1 == 0 { s } else { -s },
                    if label & 2 == 0 { s } else { -s },
                )
            }
            Constellation::Qam16 => {
                let k = 1.0 / 10f64.sqrt();
                Complex64::new(gray_level(label & 3) * k, gray_level(label >> 2) * k)
            }
        }
    }

    pub fn points(self) -> Vec<Complex64> {
        (0..self.size()).map(|l| self.point(l)).collect()
    }

    /// Label of the nearest point.
    pub fn decide(self, z: Complex64) -> usize {
        match self {
            Constellation::Bpsk => usize::from(z.re < 0.0),
            Constellation::Qpsk => usize::from(z.re < 0.0) | (usize::from(z.im < 0.0) << 1),
            Constellation::Qam16 => {
                let k = 10f64.sqrt();
                gray_label(z.re * k) | (gray_label(z.im * k) << 2)
            }
        }
    }
}

/// Gray labels 0,1,3,2 on levels −3,−1,1,3.
fn gray_level(bits: usize) -> f64 {
    match bits {
        0 => -3.0,
        1 => -1.0,
        3 => 1.0,
        _ => 3.0,
    }
}

fn gray_label(x: f64) -> usize {
    if x < -2.0 {
        0
    } else if x < 0.0 {
        1
    } else if x < 2.0 {
        3
    } else {
        2
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransmissionBatch {
    pub constellation: Constellation,
    pub n_pairs: u64,
    pub seed: u64,
    /// Multiplies every noise amplitude; 0 gives a noiseless run. The
    /// detector always uses the nominal noise powers.
    pub noise_scale: f64,
}

impl TransmissionBatch {
    pub fn new(n_pairs: u64, seed: u64) -> Self {
        Self {
            constellation: Constellation::Qpsk,
            n_pairs,
            seed,
            noise_scale: 1.0,
        }
    }
}

/// `h_{m,1} = α₁ w₁ᴴ G_m f + α₃ d_m`, `h_{m,2} = α₁ w₂ᴴ G_m f* + α₄ d_m`.
pub fn equivalent_gains(ch: &ChannelRealization, sol: &BeamformerSolution, m: usize) -> (Complex64, Complex64) {
    let a1 = sol.alpha1();
    let g = &ch.g[m];
    let mut h1 = ZERO;
    let mut h2 = ZERO;
    for r in 0..ch.relay_count() {
        h1 += sol.w1()[r].conj() * g[r] * ch.f[r];
        h2 += sol.w2()[r].conj() * g[r] * ch.f[r].conj();
    }
    (h1 * a1 + sol.alpha3() * ch.d[m], h2 * a1 + sol.alpha4() * ch.d[m])
}

/// `σ_{m,34}² = σ_η²(w₁ᴴ𝒢_m w₁ + w₂ᴴ𝒢_m w₂) + σ_ν²`.
pub fn sigma34_sq(ch: &ChannelRealization, sol: &BeamformerSolution, m: usize) -> f64 {
    let g = &ch.g[m];
    let s: f64 = (0..ch.relay_count())
        .map(|r| g[r].norm_sqr() * (sol.w1()[r].norm_sqr() + sol.w2()[r].norm_sqr()))
        .sum();
    ch.sigma_eta_sq * s + ch.sigma_nu_sq
}

/// The 4×2 equivalent channel `H_m`.
pub fn channel_matrix(ch: &ChannelRealization, sol: &BeamformerSolution, m: usize) -> [[Complex64; 2]; 4] {
    let (h1, h2) = equivalent_gains(ch, sol, m);
    let ad = ch.d[m] * sol.alpha1();
    [[ad, ZERO], [ZERO, ad.conj()], [h1, h2], [-h2.conj(), h1.conj()]]
}

/// Linear detector `B = (1/c²)(ΓH)ᴴΓ` of one destination.
#[derive(Clone, Debug)]
pub struct Detector {
    pub b: [[Complex64; 4]; 2],
    /// Diagonal of `Γ`.
    pub gamma: [f64; 4],
    pub h: [[Complex64; 2]; 4],
    pub c: f64,
}

impl Detector {
    pub fn new(ch: &ChannelRealization, sol: &BeamformerSolution, m: usize) -> Result<Self, CoreError> {
        let h = channel_matrix(ch, sol, m);
        let s34 = sigma34_sq(ch, sol, m);
        let g0 = (s34 / ch.sigma_nu_sq).sqrt();
        let gamma = [g0, g0, 1.0, 1.0];
        let c_sq: f64 = (0..4).map(|i| gamma[i] * gamma[i] * h[i][0].norm_sqr()).sum();
        if !(c_sq > 0.0) {
            return Err(CoreError::InvalidInput(format!("destination {m} has no usable channel (c = 0)")));
        }
        let mut b = [[ZERO; 4]; 2];
        for k in 0..2 {
            for i in 0..4 {
                b[k][i] = (h[i][k] * gamma[i]).conj() * gamma[i] / c_sq;
            }
        }
        Ok(Self { b, gamma, h, c: c_sq.sqrt() })
    }

    /// `ŝ = B y`.
    pub fn estimate(&self, y: &[Complex64; 4]) -> [Complex64; 2] {
        let mut s = [ZERO; 2];
        for k in 0..2 {
            for i in 0..4 {
                s[k] += self.b[k][i] * y[i];
            }
        }
        s
    }

    /// Symbol-by-symbol hard decisions.
    pub fn detect(&self, y: &[Complex64; 4], cons: Constellation) -> ([Complex64; 2], [usize; 2]) {
        let s = self.estimate(y);
        (s, [cons.decide(s[0]), cons.decide(s[1])])
    }

    /// Exhaustive `argmin ‖Γy − ΓHs‖²` over all symbol pairs.
    pub fn joint_ml(&self, y: &[Complex64; 4], cons: Constellation) -> [usize; 2] {
        let pts = cons.points();
        let mut best = (f64::INFINITY, [0, 0]);
        for (i, &a) in pts.iter().enumerate() {
            for (j, &b) in pts.iter().enumerate() {
                let d: f64 = (0..4)
                    .map(|r| ((y[r] - self.h[r][0] * a - self.h[r][1] * b) * self.gamma[r]).norm_sqr())
                    .sum();
                if d < best.0 {
                    best = (d, [i, j]);
                }
            }
        }
        best.1
    }
}

/// Everything that happens for one symbol pair.
#[derive(Clone, Debug)]
pub struct PairRecord {
    pub labels: [usize; 2],
    pub s: [Complex64; 2],
    pub t3: Vec<Complex64>,
    pub t4: Vec<Complex64>,
    /// `y_m = [y₁, y₂*, y₃, y₄*]` per destination.
    pub y: Vec<[Complex64; 4]>,
    /// `n_m = y_m − H_m s` per destination.
    pub n: Vec<[Complex64; 4]>,
}

/// Streaming transmitter; yields one [`PairRecord`] per symbol pair.
pub struct Transmitter<'a> {
    ch: &'a ChannelRealization,
    batch: TransmissionBatch,
    a1: f64,
    a3: Complex64,
    a4: Complex64,
    w1c: Vec<Complex64>,
    w2c: Vec<Complex64>,
    h: Vec<[[Complex64; 2]; 4]>,
    sym: ChaCha8Rng,
    eta1: ChaCha8Rng,
    eta2: ChaCha8Rng,
    nu: Vec<[ChaCha8Rng; 4]>,
    sent: u64,
}

impl<'a> Transmitter<'a> {
    pub fn new(sol: &BeamformerSolution, ch: &'a ChannelRealization, batch: TransmissionBatch) -> Result<Self, CoreError> {
        ch.validate()?;
        if sol.relay_count() != ch.relay_count() || sol.w.len() != 2 * (ch.relay_count() + 1) {
            return Err(CoreError::InvalidInput("solution and channels disagree on the relay count".into()));
        }
        if !(sol.a > 0.0) {
            return Err(CoreError::NonPositivePowerFactor(sol.a));
        }
        let seed = batch.seed;
        let nu = (0..ch.destination_count() as u64)
            .map(|m| std::array::from_fn(|q| stream_rng(seed, 16 + 4 * m + q as u64)))
            .collect();
        Ok(Self {
            ch,
            batch,
            a1: sol.alpha1(),
            a3: sol.alpha3(),
            a4: sol.alpha4(),
            w1c: sol.w1().iter().map(|w| w.conj()).collect(),
            w2c: sol.w2().iter().map(|w| w.conj()).collect(),
            h: (0..ch.destination_count()).map(|m| channel_matrix(ch, sol, m)).collect(),
            sym: stream_rng(seed, 0),
            eta1: stream_rng(seed, 1),
            eta2: stream_rng(seed, 2),
            nu,
            sent: 0,
        })
    }

    fn draw_symbol(&mut self) -> (usize, Complex64) {
        let l = self.sym.random_range(0..self.batch.constellation.size());
        (l, self.batch.constellation.point(l))
    }
}

impl Iterator for Transmitter<'_> {
    type Item = PairRecord;

    fn next(&mut self) -> Option<PairRecord> {
        if self.sent == self.batch.n_pairs {
            return None;
        }
        self.sent += 1;
        let ch = self.ch;
        let r = ch.relay_count();
        let (l1, s1) = self.draw_symbol();
        let (l2, s2) = self.draw_symbol();
        let eta_amp = ch.sigma_eta_sq.sqrt() * self.batch.noise_scale;
        let nu_amp = ch.sigma_nu_sq.sqrt() * self.batch.noise_scale;

        // Slots 1–2 at the relays, then the Alamouti-style relay encoding.
        let mut t3 = Vec::with_capacity(r);
        let mut t4 = Vec::with_capacity(r);
        for i in 0..r {
            let x1 = ch.f[i] * self.a1 * s1 + complex_gaussian(&mut self.eta1) * eta_amp;
            let x2 = ch.f[i] * self.a1 * s2.conj() + complex_gaussian(&mut self.eta2) * eta_amp;
            t3.push(self.w1c[i] * x1 + self.w2c[i] * x2.conj());
            t4.push(-self.w2c[i] * x1.conj() + self.w1c[i] * x2);
        }

        let mut ys = Vec::with_capacity(ch.destination_count());
        let mut ns = Vec::with_capacity(ch.destination_count());
        for m in 0..ch.destination_count() {
            let rng = &mut self.nu[m];
            let mut nu = [ZERO; 4];
            for (q, v) in nu.iter_mut().enumerate() {
                *v = complex_gaussian(&mut rng[q]) * nu_amp;
            }
            let d = ch.d[m];
            let g = &ch.g[m];
            let gt3: Complex64 = g.iter().zip(&t3).map(|(g, t)| g * t).sum();
            let gt4: Complex64 = g.iter().zip(&t4).map(|(g, t)| g * t).sum();
            let y1 = d * self.a1 * s1 + nu[0];
            let y2 = d * self.a1 * s2.conj() + nu[1];
            let y3 = gt3 + d * self.a3 * s1 + d * self.a4 * s2 + nu[2];
            let y4 = gt4 - d * self.a4 * s1.conj() + d * self.a3 * s2.conj() + nu[3];
            let y = [y1, y2.conj(), y3, y4.conj()];
            let h = &self.h[m];
            let n = std::array::from_fn(|i| y[i] - h[i][0] * s1 - h[i][1] * s2);
            ys.push(y);
            ns.push(n);
        }
        Some(PairRecord {
            labels: [l1, l2],
            s: [s1, s2],
            t3,
            t4,
            y: ys,
            n: ns,
        })
    }
}

pub fn transmit<'a>(
    sol: &BeamformerSolution,
    ch: &'a ChannelRealization,
    batch: TransmissionBatch,
) -> Result<Transmitter<'a>, CoreError> {
    Transmitter::new(sol, ch, batch)
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean of a scalar with its standard error.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    s1: Accumulator,
    s2: Accumulator,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.s1.add(x);
        self.s2.add(x * x);
    }

    fn estimate(&self, n: f64) -> Estimate {
        let mean = self.s1.value() / n;
        let var = (self.s2.value() / n - mean * mean).max(0.0);
        Estimate {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Complex entry of an estimated covariance matrix with the standard errors
/// of its real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovEntry {
    pub value: Complex64,
    pub std_err_re: f64,
    pub std_err_im: f64,
}

#[derive(Clone, Debug)]
pub struct DestinationStats {
    /// `E{|ŝ_k − s_k|²}` for both components.
    pub error_power: [Estimate; 2],
    /// `1/E{|ŝ_k − s_k|²}`.
    pub snr: [f64; 2],
    /// Relative standard error of each SNR estimate.
    pub snr_rel_err: [f64; 2],
    /// `1/E{|ŝ − s|²/2}` over both components.
    pub snr_pooled: f64,
    /// Empirical `E{n nᴴ}`, 4×4.
    pub noise_cov: [[CovEntry; 4]; 4],
    /// Empirical `E{e eᴴ}` with `e = ŝ − s`, 2×2.
    pub error_cov: [[CovEntry; 2]; 2],
    pub symbol_errors: u64,
    pub bit_errors: u64,
}

impl DestinationStats {
    pub fn symbol_error_rate(&self, n_pairs: u64) -> f64 {
        self.symbol_errors as f64 / (2 * n_pairs) as f64
    }
}

#[derive(Clone, Debug)]
pub struct LinkStats {
    pub n_pairs: u64,
    pub constellation: Constellation,
    pub destinations: Vec<DestinationStats>,
    /// `E{|t_{r,3}|²}` per relay.
    pub relay_power_slot3: Vec<Estimate>,
    pub relay_power_slot4: Vec<Estimate>,
    /// Empirical source power over the four slots.
    pub source_power: f64,
}

impl LinkStats {
    pub fn bit_error_rate(&self, m: usize) -> f64 {
        self.destinations[m].bit_errors as f64 / (2 * self.n_pairs * self.constellation.bits_per_symbol() as u64) as f64
    }

    pub fn min_snr(&self) -> f64 {
        self.destinations
            .iter()
            .map(|d| d.snr_pooled)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("destination,snr1,snr2,snr_pooled,snr1_rel_err,snr2_rel_err,symbol_error_rate,bit_error_rate\n");
        for (m, d) in self.destinations.iter().enumerate() {
            out.push_str(&format!(
                "{m},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                d.snr[0],
                d.snr[1],
                d.snr_pooled,
                d.snr_rel_err[0],
                d.snr_rel_err[1],
                d.symbol_error_rate(self.n_pairs),
                self.bit_error_rate(m)
            ));
        }
        out
    }
}

#[derive(Clone)]
struct CovAcc<const N: usize> {
    re: [[Moments; N]; N],
    im: [[Moments; N]; N],
}

impl<const N: usize> CovAcc<N> {
    fn new() -> Self {
        Self {
            re: [[Moments::default(); N]; N],
            im: [[Moments::default(); N]; N],
        }
    }

    fn push(&mut self, v: &[Complex64; N]) {
        for i in 0..N {
            for j in 0..N {
                let p = v[i] * v[j].conj();
                self.re[i][j].push(p.re);
                self.im[i][j].push(p.im);
            }
        }
    }

    fn finish(&self, n: f64) -> [[CovEntry; N]; N] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let re = self.re[i][j].estimate(n);
                let im = self.im[i][j].estimate(n);
                CovEntry {
                    value: Complex64::new(re.mean, im.mean),
                    std_err_re: re.std_err,
                    std_err_im: im.std_err,
                }
            })
        })
    }
}

fn bit_differences(a: usize, b: usize) -> u64 {
    (a ^ b).count_ones() as u64
}

/// Runs a batch and collects per-destination statistics.
pub fn measure(sol: &BeamformerSolution, ch: &ChannelRealization, batch: TransmissionBatch) -> Result<LinkStats, CoreError> {
    let detectors = (0..ch.destination_count())
        .map(|m| Detector::new(ch, sol, m))
        .collect::<Result<Vec<_>, _>>()?;
    let r = ch.relay_count();
    let mut err = vec![[Moments::default(); 2]; detectors.len()];
    let mut noise = vec![CovAcc::<4>::new(); detectors.len()];
    let mut ecov = vec![CovAcc::<2>::new(); detectors.len()];
    let mut sym_err = vec![0u64; detectors.len()];
    let mut bit_err = vec![0u64; detectors.len()];
    let mut p3 = vec![Moments::default(); r];
    let mut p4 = vec![Moments::default(); r];
    let mut src = Accumulator::default();
    let cons = batch.constellation;
    let (a1, a3, a4) = (sol.alpha1(), sol.alpha3(), sol.alpha4());

    for rec in transmit(sol, ch, batch)? {
        for i in 0..r {
            p3[i].push(rec.t3[i].norm_sqr());
            p4[i].push(rec.t4[i].norm_sqr());
        }
        let [s1, s2] = rec.s;
        src.add(
            (a1 * s1).norm_sqr()
                + (a1 * s2).norm_sqr()
                + (a3 * s1 + a4 * s2).norm_sqr()
                + (-a4 * s1.conj() + a3 * s2.conj()).norm_sqr(),
        );
        for (m, det) in detectors.iter().enumerate() {
            let (est, dec) = det.detect(&rec.y[m], cons);
            let e = [est[0] - rec.s[0], est[1] - rec.s[1]];
            for k in 0..2 {
                err[m][k].push(e[k].norm_sqr());
                if dec[k] != rec.labels[k] {
                    sym_err[m] += 1;
                    bit_err[m] += bit_differences(dec[k], rec.labels[k]);
                }
            }
            noise[m].push(&rec.n[m]);
            ecov[m].push(&e);
        }
    }

    let n = batch.n_pairs as f64;
    let destinations = (0..detectors.len())
        .map(|m| {
            let ep = [err[m][0].estimate(n), err[m][1].estimate(n)];
            let pooled = (ep[0].mean + ep[1].mean) / 2.0;
            DestinationStats {
                error_power: ep,
                snr: [1.0 / ep[0].mean, 1.0 / ep[1].mean],
                snr_rel_err: [ep[0].std_err / ep[0].mean, ep[1].std_err / ep[1].mean],
                snr_pooled: 1.0 / pooled,
                noise_cov: noise[m].finish(n),
                error_cov: ecov[m].finish(n),
                symbol_errors: sym_err[m],
                bit_errors: bit_err[m],
            }
        })
        .collect();
    Ok(LinkStats {
        n_pairs: batch.n_pairs,
        constellation: cons,
        destinations,
        relay_power_slot3: p3.iter().map(|p| p.estimate(n)).collect(),
        relay_power_slot4: p4.iter().map(|p| p.estimate(n)).collect(),
        source_power: src.value() / n,
    })
}
