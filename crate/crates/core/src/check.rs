//! Randomised property suites behind `scpgan check`.
//!
//! Each suite carries its own oracle and never trusts the code under test to
//! grade itself.

use crate::autonn::{Gradients, NetConfig, ParamSet, Tape, Var};
use crate::dsp::{self, Complex64, Spectrogram, StftParams, StftPlan, Window};
use crate::losses::CleanStar;
use crate::metrics::SsnrParams;
use crate::surgery::{combine, sc2_weights, sc3_weights, sign_tolerance, GradVector, ScWeights};
use crate::trainer::{disc_loss_graph, gen_loss_graph, init_nets, Example, Nets, ScMode, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

pub const SURGERY_CASES: usize = 10_000;
pub const DSP_CASES: usize = 100;
pub const AUTODIFF_NETS: usize = 20;

const WEIGHT_RTOL: f64 = 1e-9;
const RECON_RTOL: f64 = 1e-6;
const PROJECTION_RTOL: f64 = 1e-6;
const COLA_TOL: f64 = 1e-10;
const FD_RTOL: f64 = 1e-4;
/// Gradient entries below this fraction of the largest one are compared
/// against it instead of against themselves.
const FD_FLOOR: f64 = 1e-3;
const FD_STEP: f64 = 1e-6;
/// A coordinate whose one-sided differences disagree by more than this has
/// a ReLU or |x| kink inside the stencil and is skipped.
const KINK_RTOL: f64 = 1e-3;
/// More skipped coordinates than this fraction fails the net.
const MAX_KINK_FRACTION: f64 = 0.05;
const MAX_DETAILS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Surgery,
    Dsp,
    Autodiff,
    All,
}

impl Suite {
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Surgery, Suite::Dsp, Suite::Autodiff],
            s => vec![s],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Surgery => "surgery",
            Suite::Dsp => "dsp",
            Suite::Autodiff => "autodiff",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "surgery" => Ok(Suite::Surgery),
            "dsp" => Ok(Suite::Dsp),
            "autodiff" => Ok(Suite::Autodiff),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite `{other}` (surgery, dsp, autodiff, all)")),
        }
    }
}

/// Outcome of one property inside a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error, in the property's own units.
    pub worst: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
    /// First few failing cases, human readable.
    pub details: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.properties.iter().map(|p| p.failures).sum()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "suite {} (seed {}): {} in {:.2}s",
            self.suite.as_str(),
            self.seed,
            if self.passed() { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64()
        )?;
        for p in &self.properties {
            writeln!(
                f,
                "  {:<28} {:>6} cases {:>4} failed  worst {:.3e}",
                p.name, p.cases, p.failures, p.worst
            )?;
        }
        for d in &self.details {
            writeln!(f, "  ! {d}")?;
        }
        Ok(())
    }
}

struct Tally {
    props: Vec<PropertyResult>,
    details: Vec<String>,
}

impl Tally {
    fn new(names: &[&str]) -> Self {
        Self {
            props: names
                .iter()
                .map(|n| PropertyResult {
                    name: n.to_string(),
                    cases: 0,
                    failures: 0,
                    worst: 0.0,
                })
                .collect(),
            details: Vec::new(),
        }
    }

    /// Records one case of property `i`; `err` is compared against `bound`.
    fn record(&mut self, i: usize, err: f64, bound: f64, detail: impl FnOnce() -> String) {
        let p = &mut self.props[i];
        p.cases += 1;
        if err.is_nan() || err > p.worst {
            p.worst = err;
        }
        if !(err <= bound) {
            p.failures += 1;
            if self.details.len() < MAX_DETAILS {
                self.details.push(format!("{}: {}", p.name, detail()));
            }
        }
    }

    fn fail(&mut self, i: usize, detail: String) {
        self.record(i, f64::INFINITY, 0.0, || detail);
    }

    fn finish(self, suite: Suite, seed: u64, start: Instant) -> SuiteReport {
        SuiteReport {
            suite,
            seed,
            properties: self.props,
            details: self.details,
            elapsed: start.elapsed(),
        }
    }
}

pub fn run(suite: Suite, seed: u64) -> Vec<SuiteReport> {
    suite
        .expand()
        .into_iter()
        .map(|s| match s {
            Suite::Surgery => surgery_suite(seed, SURGERY_CASES),
            Suite::Dsp => dsp_suite(seed, DSP_CASES),
            Suite::Autodiff => autodiff_suite(seed, AUTODIFF_NETS),
            Suite::All => unreachable!("expanded"),
        })
        .collect()
}

// ---------------------------------------------------------------- surgery

/// Kahan-compensated dot product on pre-scaled operands.
fn oracle_dot(a: &[f64], b: &[f64]) -> f64 {
    let sa = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sb = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sa == 0.0 || sb == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let term = (x / sa) * (y / sb) - c;
        let t = sum + term;
        c = (t - sum) - term;
        sum = t;
    }
    sum * sa * sb
}

fn oracle_norm(a: &[f64]) -> f64 {
    oracle_dot(a, a).sqrt()
}

/// Weight `w` that makes `base + w·dir` orthogonal to `dir`, found by
/// projecting `base` onto the unit vector along `dir`.
fn orthogonalising_weight(base: &[f64], dir: &[f64]) -> f64 {
    let n = oracle_norm(dir);
    let unit: Vec<f64> = dir.iter().map(|v| v / n).collect();
    -oracle_dot(base, &unit) / n
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let scale = log_uniform(rng, 1e-6, 1e6);
    let mixed = rng.gen_bool(0.5);
    (0..dim)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            // Heterogeneous cases also spread components over six decades.
            let k = if mixed { log_uniform(rng, 1e-3, 1e3) } else { 1.0 };
            g * scale * k
        })
        .collect()
}

/// Part vector correlated with `anchor` so both acute and obtuse pairs
/// occur often.
fn correlated(rng: &mut ChaCha8Rng, anchor: &[f64]) -> Vec<f64> {
    let fresh = random_vector(rng, anchor.len());
    let (na, nf) = (oracle_norm(anchor), oracle_norm(&fresh));
    let along = rng.gen_range(-1.0..1.0) * nf / na.max(f64::MIN_POSITIVE);
    let mix = log_uniform(rng, 1e-3, 1.0);
    anchor.iter().zip(&fresh).map(|(a, f)| along * a + mix * f).collect()
}

fn gv(v: Vec<f64>) -> GradVector {
    GradVector::new(v).expect("finite")
}

pub fn surgery_suite(seed: u64, cases: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(&[
        "sc2 <g,gc> >= -tau",
        "sc2 <g,ge> >= -tau",
        "sc3 <g,gn> >= -tau",
        "sc2 w_e vs oracle",
        "sc3 w_e vs oracle",
        "sc3 w_n vs oracle",
    ]);
    for case in 0..cases {
        let dim = rng.gen_range(2..=2000);
        let gc = random_vector(&mut rng, dim);
        let ge = correlated(&mut rng, &gc);
        let gn = if rng.gen_bool(0.5) {
            correlated(&mut rng, &gc)
        } else {
            correlated(&mut rng, &ge)
        };
        let (gc, ge, gn) = (gv(gc), gv(ge), gv(gn));
        check_sc2(&mut t, case, &gc, &ge);
        check_sc3(&mut t, case, &gc, &ge, &gn);
    }
    t.finish(Suite::Surgery, seed, start)
}

fn sign_violation(g: &GradVector, part: &GradVector, tau: f64) -> f64 {
    // <= 0 when satisfied; expressed in units of tau.
    let d = oracle_dot(g.as_slice(), part.as_slice());
    if tau > 0.0 {
        -d / tau
    } else if d < 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn weight_error(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale).max(f64::MIN_POSITIVE)
}

fn check_sc2(t: &mut Tally, case: usize, gc: &GradVector, ge: &GradVector) {
    let w = match sc2_weights(gc, ge) {
        Ok(w) => w,
        Err(e) => return t.fail(0, format!("case {case}: {e}")),
    };
    let g = combine(gc, ge, None, &w).expect("same length");
    let tau = sign_tolerance(&g, &[gc, ge]);
    let vc = sign_violation(&g, gc, tau);
    t.record(0, vc, 1.0, || format!("case {case}: <g,gc> = {:.3e} tau {tau:.3e}", -vc * tau));
    let ve = sign_violation(&g, ge, tau);
    t.record(1, ve, 1.0, || format!("case {case}: <g,ge> = {:.3e} tau {tau:.3e}", -ve * tau));
    if w.degenerate {
        return;
    }
    let dot = oracle_dot(gc.as_slice(), ge.as_slice());
    let want = if dot > 0.0 { 1.0 } else { orthogonalising_weight(gc.as_slice(), ge.as_slice()) };
    if boundary(dot, gc, ge) && (w.w_e == 1.0) != (want == 1.0) {
        return;
    }
    let scale = gc.norm() / ge.norm();
    let err = weight_error(w.w_e, want, scale);
    t.record(3, err, WEIGHT_RTOL, || format!("case {case}: w_e {} vs {want}", w.w_e));
}

/// True when a dot product is too close to zero for its sign to be trusted.
fn boundary(dot: f64, a: &GradVector, b: &GradVector) -> bool {
    dot.abs() <= 1e-12 * a.norm() * b.norm()
}

fn check_sc3(t: &mut Tally, case: usize, gc: &GradVector, ge: &GradVector, gn: &GradVector) {
    let w: ScWeights = match sc3_weights(gc, ge, gn) {
        Ok(w) => w,
        Err(e) => return t.fail(2, format!("case {case}: {e}")),
    };
    let g = combine(gc, ge, Some(gn), &w).expect("same length");
    let tau = sign_tolerance(&g, &[gc, ge, gn]);
    let vn = sign_violation(&g, gn, tau);
    t.record(2, vn, 1.0, || format!("case {case}: <g,gn> = {:.3e} tau {tau:.3e}", -vn * tau));
    if w.degenerate {
        return;
    }
    let (c, e, n) = (gc.as_slice(), ge.as_slice(), gn.as_slice());
    let dot_ce = oracle_dot(c, e);
    if boundary(dot_ce, gc, ge) && (w.w_e == 1.0) != (dot_ce > 0.0) {
        return;
    }
    let w_e = if dot_ce > 0.0 { 1.0 } else { orthogonalising_weight(c, e) };
    t.record(4, weight_error(w.w_e, w_e, gc.norm() / ge.norm()), WEIGHT_RTOL, || {
        format!("case {case}: w_e {} vs {w_e}", w.w_e)
    });
    // Oracle pair direction built explicitly, then orthogonalised against gn.
    let pair: Vec<f64> = c.iter().zip(e).map(|(a, b)| a + w_e * b).collect();
    let pair_dot = oracle_dot(&pair, n);
    let pair_scale = gc.norm() + w_e.abs() * ge.norm();
    if pair_dot.abs() <= 1e-9 * pair_scale * gn.norm() {
        return;
    }
    let w_n = if pair_dot > 0.0 { 1.0 } else { orthogonalising_weight(&pair, n) };
    let got = w.w_n.unwrap_or(f64::NAN);
    t.record(5, weight_error(got, w_n, pair_scale / gn.norm()), WEIGHT_RTOL, || {
        format!("case {case}: w_n {got} vs {w_n}")
    });
}

// -------------------------------------------------------------------- dsp

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn spec_planes(s: &Spectrogram) -> Vec<f64> {
    s.bins().iter().flat_map(|c| [c.re, c.im]).collect()
}

fn random_spec(rng: &mut ChaCha8Rng, params: StftParams, len: usize) -> Spectrogram {
    let plan_frames = params.n_frames(len).expect("frames");
    let bins: Vec<Complex64> = (0..plan_frames * params.n_bins())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    Spectrogram::from_bins(bins, params, len).expect("shape")
}

pub fn dsp_suite(seed: u64, cases: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(&["round trip", "projection idempotent", "projection linear", "cola"]);
    let configs = dsp::shipped_configs();
    let plans: Vec<StftPlan> = configs.iter().map(|p| StftPlan::new(*p).expect("shipped config")).collect();
    for case in 0..cases {
        let plan = &plans[case % 4];
        let len = rng.gen_range(256..=32000);
        let amp = log_uniform(&mut rng, 1e-3, 1e3);
        let x: Vec<f64> = (0..len).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();
        let round = dsp::stft_with(plan, &x).and_then(|s| dsp::istft_with(plan, &s, len));
        match round {
            Ok(y) => {
                let err = rel_err(&y, &x);
                t.record(0, err, RECON_RTOL, || format!("case {case}: len {len} err {err:.3e}"));
            }
            Err(e) => t.fail(0, format!("case {case}: {e}")),
        }

        let plen = rng.gen_range(256..=4000);
        let params = *plan.params();
        let s1 = random_spec(&mut rng, params, plen);
        let s2 = random_spec(&mut rng, params, plen);
        let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let projected = (|| {
            let p1 = dsp::consistency_project_with(plan, &s1)?;
            let pp1 = dsp::consistency_project_with(plan, &p1)?;
            let p2 = dsp::consistency_project_with(plan, &s2)?;
            let mix = s1.linear_combination(a, &s2, b)?;
            let pmix = dsp::consistency_project_with(plan, &mix)?;
            let want = p1.linear_combination(a, &p2, b)?;
            Ok::<_, dsp::DspError>((p1, pp1, pmix, want))
        })();
        match projected {
            Ok((p1, pp1, pmix, want)) => {
                let idem = rel_err(&spec_planes(&pp1), &spec_planes(&p1));
                t.record(1, idem, PROJECTION_RTOL, || format!("case {case}: err {idem:.3e}"));
                let lin = rel_err(&spec_planes(&pmix), &spec_planes(&want));
                t.record(2, lin, PROJECTION_RTOL, || format!("case {case}: err {lin:.3e}"));
            }
            Err(e) => t.fail(1, format!("case {case}: {e}")),
        }
    }
    for p in &configs {
        let dev = cola_oracle(p);
        t.record(3, dev, COLA_TOL, || format!("{p:?}: deviation {dev:.3e}"));
    }
    t.finish(Suite::Dsp, seed, start)
}

/// Overlap-add of the window product computed directly over a long
/// stretch of frames, normalised by its mean.
fn cola_oracle(p: &StftParams) -> f64 {
    let n = p.fft_size;
    // Hann × rectangle and sqrt-Hann × sqrt-Hann are both sin².
    let product: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2))
        .collect();
    let frames = 4 * n / p.hop;
    let total = (frames - 1) * p.hop + n;
    let mut acc = vec![0.0; total];
    for f in 0..frames {
        for (i, w) in product.iter().enumerate() {
            acc[f * p.hop + i] += w;
        }
    }
    let steady = &acc[n..total - n];
    let mean = steady.iter().sum::<f64>() / steady.len() as f64;
    steady.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max)
}

// --------------------------------------------------------------- autodiff

/// Micro nets: a generator of 117 parameters and a comparable critic.
pub fn micro_net_config() -> NetConfig {
    NetConfig {
        gen_channels: 2,
        disc_channels: 2,
        kernel: 3,
        disc_pool: 2,
        disc_hidden: 3,
        mask_bias_init: 0.5,
    }
}

pub fn micro_stft() -> StftParams {
    StftParams {
        fft_size: 16,
        hop: 8,
        window: Window::SqrtHann,
        center_pad: true,
    }
}

fn micro_ssnr() -> SsnrParams {
    SsnrParams {
        frame_len: 64,
        ..SsnrParams::default()
    }
}

/// Small random mixture built the same way the trainer builds its inputs.
pub fn micro_example(rng: &mut ChaCha8Rng, plan: &StftPlan, len: usize, compression: f64) -> Example {
    let f: Vec<f64> = (0..3).map(|_| rng.gen_range(0.02..0.45)).collect();
    let clean: Vec<f64> = (0..len)
        .map(|i| f.iter().enumerate().map(|(k, fk)| (0.5 / (k + 1) as f64) * (std::f64::consts::TAU * fk * i as f64).sin()).sum())
        .collect();
    let noisy: Vec<f64> = clean
        .iter()
        .map(|c| c + 0.2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let star = CleanStar::compute(plan, &clean).expect("valid clean");
    Example::build("micro".into(), 0.0, noisy, clean, star, plan, compression, &micro_ssnr()).expect("valid example")
}

fn micro_config(cp: bool, nd: bool) -> TrainConfig {
    let mut cfg = TrainConfig::new("", "");
    cfg.net = micro_net_config();
    cfg.stft = micro_stft();
    cfg.ssnr = micro_ssnr();
    cfg.cp = cp;
    cfg.gen_loss.cp_enabled = cp;
    cfg.nd = nd;
    cfg.sc = if nd { ScMode::Sc3 } else { ScMode::Sc2 };
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Gen,
    DiscClean,
    DiscEnhanced,
    DiscNoisy,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Gen => "generator total",
            Target::DiscClean => "disc L_C",
            Target::DiscEnhanced => "disc L_E",
            Target::DiscNoisy => "disc L_N",
        }
    }
}

fn loss_and_grad(
    nets: &Nets,
    batch: &[&Example],
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
    target: Target,
    want_grad: bool,
) -> Result<(f64, Vec<f64>), String> {
    let mut tape = Tape::new();
    let on_gen = target == Target::Gen;
    let gvars = nets.gen.params.bind(&mut tape, on_gen && want_grad).map_err(|e| e.to_string())?;
    let dvars = nets.disc.params.bind(&mut tape, !on_gen && want_grad).map_err(|e| e.to_string())?;
    let loss = if on_gen {
        gen_loss_graph(&mut tape, batch, nets, &gvars, &dvars, cfg, plan).map_err(|e| e.to_string())?.0
    } else {
        let d = disc_loss_graph(&mut tape, batch, nets, &gvars, &dvars, cfg, plan).map_err(|e| e.to_string())?;
        match target {
            Target::DiscClean => d.l_c,
            Target::DiscEnhanced => d.l_e,
            _ => d.l_n.ok_or("noisy branch disabled")?,
        }
    };
    let value = tape.scalar(loss);
    if !want_grad {
        return Ok((value, Vec::new()));
    }
    let grads = tape.backward(loss).map_err(|e| e.to_string())?;
    let (params, vars) = if on_gen { (&nets.gen.params, &gvars) } else { (&nets.disc.params, &dvars) };
    Ok((value, flat(&grads, vars, params)))
}

fn flat(g: &Gradients, vars: &[Var], params: &ParamSet) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.numel());
    for (i, v) in vars.iter().enumerate() {
        match g.get(*v) {
            Some(s) => out.extend_from_slice(s),
            None => out.extend(std::iter::repeat(0.0).take(params.tensor_at(i).numel())),
        }
    }
    out
}

/// Outcome of one finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOutcome {
    pub max_rel_err: f64,
    pub coords: usize,
    pub kinks: usize,
}

fn fd_check(
    nets: &Nets,
    batch: &[&Example],
    cfg: &TrainConfig,
    plan: &Arc<StftPlan>,
    target: Target,
) -> Result<FdOutcome, String> {
    let (f0, analytic) = loss_and_grad(nets, batch, cfg, plan, target, true)?;
    let on_gen = target == Target::Gen;
    let base = if on_gen { nets.gen.params.flat_values() } else { nets.disc.params.flat_values() };
    let gmax = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (FD_FLOOR * gmax).max(1e-12);
    let mut probe = nets.clone();
    let mut eval = |theta: &[f64]| -> Result<f64, String> {
        let params = if on_gen { &mut probe.gen.params } else { &mut probe.disc.params };
        params.set_flat_values(theta).map_err(|e| e.to_string())?;
        Ok(loss_and_grad(&probe, batch, cfg, plan, target, false)?.0)
    };
    let mut out = FdOutcome {
        max_rel_err: 0.0,
        coords: base.len(),
        kinks: 0,
    };
    let mut theta = base.clone();
    for i in 0..base.len() {
        let h = FD_STEP * base[i].abs().max(1.0);
        theta[i] = base[i] + h;
        let fp = eval(&theta)?;
        theta[i] = base[i] - h;
        let fm = eval(&theta)?;
        theta[i] = base[i];
        let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
        if (fwd - bwd).abs() > KINK_RTOL * fwd.abs().max(bwd.abs()).max(floor) {
            out.kinks += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(floor);
        out.max_rel_err = out.max_rel_err.max(err);
    }
    Ok(out)
}

pub fn autodiff_suite(seed: u64, nets: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = [Target::Gen, Target::DiscClean, Target::DiscEnhanced, Target::DiscNoisy];
    let mut t = Tally::new(&[
        "generator total (cp)",
        "generator total",
        "disc L_C",
        "disc L_E",
        "disc L_N",
    ]);
    let plan = Arc::new(StftPlan::new(micro_stft()).expect("micro stft"));
    for k in 0..nets {
        let cp = k % 2 == 0;
        let mut cfg = micro_config(cp, true);
        cfg.seed = rng.gen();
        cfg.net.mask_bias_init = rng.gen_range(-1.0..1.0);
        let net = init_nets(&cfg);
        let examples: Vec<Example> = (0..2)
            .map(|_| {
                let len = rng.gen_range(64..=96);
                micro_example(&mut rng, &plan, len, cfg.gen_loss.mag_compression)
            })
            .collect();
        let batch: Vec<&Example> = examples.iter().collect();
        for target in targets {
            let slot = match target {
                Target::Gen if cp => 0,
                Target::Gen => 1,
                Target::DiscClean => 2,
                Target::DiscEnhanced => 3,
                Target::DiscNoisy => 4,
            };
            match fd_check(&net, &batch, &cfg, &plan, target) {
                Ok(o) if (o.kinks as f64) > MAX_KINK_FRACTION * o.coords as f64 => {
                    t.fail(slot, format!("net {k}: {} of {} coordinates straddle a kink", o.kinks, o.coords))
                }
                Ok(o) => t.record(slot, o.max_rel_err, FD_RTOL, || {
                    format!("net {k} {} cp={cp}: max rel err {:.3e}", target.name(), o.max_rel_err)
                }),
                Err(e) => t.fail(slot, format!("net {k} {}: {e}", target.name())),
            }
        }
    }
    t.finish(Suite::Autodiff, seed, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_dot_handles_wide_ranges() {
        assert!((oracle_dot(&[1e-300, 3.0], &[1e300, 2.0]) - 7.0).abs() < 7.0 * 4.0 * f64::EPSILON);
        assert_eq!(oracle_dot(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn orthogonalising_weight_zeroes_the_inner_product() {
        let w = orthogonalising_weight(&[1.0, 0.0], &[-1.0, 1.0]);
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_runs_pass() {
        assert!(surgery_suite(3, 200).passed());
        assert!(dsp_suite(3, 4).passed());
    }

    #[test]
    fn micro_generator_has_117_parameters() {
        let cfg = micro_config(true, true);
        assert_eq!(init_nets(&cfg).gen.params.numel(), 117);
    }

    #[test]
    fn suite_names_parse() {
        for s in [Suite::Surgery, Suite::Dsp, Suite::Autodiff, Suite::All] {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
