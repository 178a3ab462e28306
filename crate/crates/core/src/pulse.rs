//! Pulse envelopes, drive instructions and timed schedules.
//!
//! Envelopes are in GHz (cyclic Rabi units) and times in ns. Every Gaussian
//! edge uses the lifted convention: the Gaussian is shifted down so that it
//! vanishes at its endpoints and rescaled so that its peak is still `amp`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::device::{transition_frequencies, DeviceParams, Subspace, Transmon, DIM, LEVELS, TWO_PI};
use crate::error::{Error, Result};
use crate::linalg::{cis, ComplexMatrix, C64, ONE, ZERO};

/// Largest accepted `|amp|` in GHz.
pub const MAX_AMP_GHZ: f64 = 1.0;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseShape {
    Gaussian {
        amp_ghz: f64,
        sigma_ns: f64,
        duration_ns: f64,
    },
    GaussianSquare {
        amp_ghz: f64,
        sigma_ns: f64,
        risefall_ns: f64,
        width_ns: f64,
    },
    DragGaussian {
        amp_ghz: f64,
        sigma_ns: f64,
        duration_ns: f64,
        beta_ns: f64,
    },
}

/// Lifted Gaussian at offset `x` from its center, zero at `|x| = half`.
fn lifted(x: f64, sigma: f64, half: f64) -> f64 {
    let g = (-x * x / (2.0 * sigma * sigma)).exp();
    let g0 = (-half * half / (2.0 * sigma * sigma)).exp();
    (g - g0) / (1.0 - g0)
}

/// Time derivative of [`lifted`].
fn lifted_derivative(x: f64, sigma: f64, half: f64) -> f64 {
    let g = (-x * x / (2.0 * sigma * sigma)).exp();
    let g0 = (-half * half / (2.0 * sigma * sigma)).exp();
    -x / (sigma * sigma) * g / (1.0 - g0)
}

impl PulseShape {
    pub fn amp(&self) -> f64 {
        match *self {
            PulseShape::Gaussian { amp_ghz, .. }
            | PulseShape::GaussianSquare { amp_ghz, .. }
            | PulseShape::DragGaussian { amp_ghz, .. } => amp_ghz,
        }
    }

    pub fn with_amp(mut self, amp: f64) -> Self {
        match &mut self {
            PulseShape::Gaussian { amp_ghz, .. }
            | PulseShape::GaussianSquare { amp_ghz, .. }
            | PulseShape::DragGaussian { amp_ghz, .. } => *amp_ghz = amp,
        }
        self
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            PulseShape::Gaussian { sigma_ns, .. }
            | PulseShape::GaussianSquare { sigma_ns, .. }
            | PulseShape::DragGaussian { sigma_ns, .. } => sigma_ns,
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            PulseShape::Gaussian { duration_ns, .. } | PulseShape::DragGaussian { duration_ns, .. } => {
                duration_ns
            }
            PulseShape::GaussianSquare {
                risefall_ns,
                width_ns,
                ..
            } => width_ns + 2.0 * risefall_ns,
        }
    }

    pub fn validate(&self, amp_cap: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !self.amp().is_finite() || self.amp().abs() > amp_cap {
            return bad(format!("amplitude {} GHz exceeds the {amp_cap} GHz cap", self.amp()));
        }
        if !(self.sigma() > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma()));
        }
        match *self {
            PulseShape::Gaussian { duration_ns, .. } => {
                if !(duration_ns > 0.0) {
                    return bad(format!("duration must be positive, got {duration_ns}"));
                }
            }
            PulseShape::DragGaussian {
                duration_ns, beta_ns, ..
            } => {
                if !(duration_ns > 0.0) || !beta_ns.is_finite() {
                    return bad(format!("invalid DRAG pulse {self:?}"));
                }
            }
            PulseShape::GaussianSquare {
                risefall_ns,
                width_ns,
                ..
            } => {
                if !(risefall_ns > 0.0) || !(width_ns >= 0.0) {
                    return bad(format!("invalid Gaussian-square timing {self:?}"));
                }
            }
        }
        Ok(())
    }

    /// Complex envelope at `t` ∈ [0, duration], `None` outside.
    pub fn sample_clamped(&self, t: f64) -> Option<C64> {
        let d = self.duration();
        if !(0.0..=d).contains(&t) {
            return None;
        }
        Some(match *self {
            PulseShape::Gaussian {
                amp_ghz,
                sigma_ns,
                duration_ns,
            } => C64::new(amp_ghz * lifted(t - duration_ns / 2.0, sigma_ns, duration_ns / 2.0), 0.0),
            PulseShape::DragGaussian {
                amp_ghz,
                sigma_ns,
                duration_ns,
                beta_ns,
            } => {
                let x = t - duration_ns / 2.0;
                let half = duration_ns / 2.0;
                C64::new(
                    amp_ghz * lifted(x, sigma_ns, half),
                    beta_ns * amp_ghz * lifted_derivative(x, sigma_ns, half),
                )
            }
            PulseShape::GaussianSquare {
                amp_ghz,
                sigma_ns,
                risefall_ns,
                width_ns,
            } => {
                let v = if t < risefall_ns {
                    lifted(t - risefall_ns, sigma_ns, risefall_ns)
                } else if t > risefall_ns + width_ns {
                    lifted(t - risefall_ns - width_ns, sigma_ns, risefall_ns)
                } else {
                    1.0
                };
                C64::new(amp_ghz * v, 0.0)
            }
        })
    }

    /// Integral of the real envelope over the pulse (GHz·ns), Simpson's rule.
    pub fn area(&self) -> f64 {
        let d = self.duration();
        let n = 4000;
        let h = d / n as f64;
        let f = |k: usize| self.sample_clamped(k as f64 * h).map_or(0.0, |z| z.re);
        let mut s = f(0) + f(n);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        s * h / 3.0
    }

    /// Integral of `|envelope|²` over the pulse.
    pub fn energy(&self) -> f64 {
        let d = self.duration();
        let n = 4000;
        let h = d / n as f64;
        let f = |k: usize| self.sample_clamped(k as f64 * h).map_or(0.0, |z| z.norm_sqr());
        let mut s = f(0) + f(n);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
        }
        s * h / 3.0
    }
}

/// Complex envelope (GHz) of `shape` at time `t` from the pulse start.
pub fn sample_envelope(shape: &PulseShape, t: f64) -> Result<C64> {
    shape.sample_clamped(t).ok_or(Error::OutOfRange {
        value: t,
        lo: 0.0,
        hi: shape.duration(),
    })
}

/// CSV of the sampled envelope, columns `t_ns,re,im`.
pub fn envelope_csv(shape: &PulseShape, step_ns: f64) -> String {
    let mut out = String::from("t_ns,re,im\n");
    let n = (shape.duration() / step_ns).round() as usize;
    for k in 0..=n {
        let t = (k as f64 * step_ns).min(shape.duration());
        let z = shape.sample_clamped(t).unwrap_or(ZERO);
        let _ = writeln!(out, "{t},{},{}", z.re, z.im);
    }
    out
}

/// The transition whose virtual phase frame a pulse follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRef {
    pub transmon: Transmon,
    pub subspace: Subspace,
}

/// A drive pulse on one transmon's line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Play {
    pub channel: Transmon,
    pub start_ns: f64,
    pub shape: PulseShape,
    pub carrier_ghz: f64,
    pub phase_rad: f64,
    /// Defaults to the 0–1 transition of the driven transmon. CR pulses follow
    /// the target transmon's frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameRef>,
}

impl Play {
    pub fn new(channel: Transmon, start_ns: f64, shape: PulseShape, carrier_ghz: f64, phase_rad: f64) -> Self {
        Self {
            channel,
            start_ns,
            shape,
            carrier_ghz,
            phase_rad,
            frame: None,
        }
    }

    pub fn with_frame(mut self, transmon: Transmon, subspace: Subspace) -> Self {
        self.frame = Some(FrameRef { transmon, subspace });
        self
    }

    pub fn frame_ref(&self) -> FrameRef {
        self.frame.unwrap_or(FrameRef {
            transmon: self.channel,
            subspace: Subspace::S01,
        })
    }

    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.shape.duration()
    }

    /// `2π·Re[env(t−start)·e^{−i(2π f t + φ + virtual)}]` in rad/ns.
    pub fn drive_term(&self, t: f64, virtual_phase: f64) -> Result<f64> {
        let env = sample_envelope(&self.shape, t - self.start_ns)?;
        let arg = TWO_PI * self.carrier_ghz * t + self.phase_rad + virtual_phase;
        Ok(TWO_PI * (env * cis(-arg)).re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseShiftKind {
    PhaseShift,
}

/// Zero-duration advance of one transition's phase frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseShift {
    pub kind: PhaseShiftKind,
    #[serde(default = "first_transmon")]
    pub channel: Transmon,
    pub subspace: Subspace,
    pub angle_rad: f64,
    #[serde(default)]
    pub start_ns: f64,
}

fn first_transmon() -> Transmon {
    Transmon::One
}

impl PhaseShift {
    pub fn new(channel: Transmon, subspace: Subspace, angle_rad: f64) -> Self {
        Self {
            kind: PhaseShiftKind::PhaseShift,
            channel,
            subspace,
            angle_rad,
            start_ns: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instruction {
    PhaseShift(PhaseShift),
    Play(Play),
}

impl Instruction {
    pub fn start_ns(&self) -> f64 {
        match self {
            Instruction::Play(p) => p.start_ns,
            Instruction::PhaseShift(s) => s.start_ns,
        }
    }

    pub fn end_ns(&self) -> f64 {
        match self {
            Instruction::Play(p) => p.end_ns(),
            Instruction::PhaseShift(s) => s.start_ns,
        }
    }

    fn shift(&mut self, dt: f64) {
        match self {
            Instruction::Play(p) => p.start_ns += dt,
            Instruction::PhaseShift(s) => s.start_ns += dt,
        }
    }

    /// Drive contribution at `t`; phase shifts never drive.
    pub fn drive_term(&self, t: f64, virtual_phase: f64) -> Result<f64> {
        match self {
            Instruction::Play(p) => p.drive_term(t, virtual_phase),
            Instruction::PhaseShift(_) => Ok(0.0),
        }
    }
}

/// Accumulated virtual phases, indexed `[transmon][subspace]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FramePhases(pub [[f64; 2]; 2]);

impl FramePhases {
    pub fn get(&self, t: Transmon, s: Subspace) -> f64 {
        self.0[t.index()][sub_index(s)]
    }

    fn add(&mut self, t: Transmon, s: Subspace, angle: f64) {
        self.0[t.index()][sub_index(s)] += angle;
    }

    /// `diag(1, e^{iφ01}, e^{i(φ01+φ12)})` of one transmon.
    pub fn level_phases(&self, t: Transmon) -> [f64; LEVELS] {
        let p01 = self.get(t, Subspace::S01);
        let p12 = self.get(t, Subspace::S12);
        [0.0, p01, p01 + p12]
    }

    /// The frame change these phases represent, as a 9×9 diagonal.
    pub fn matrix(&self) -> ComplexMatrix {
        let l1 = self.level_phases(Transmon::One);
        let l2 = self.level_phases(Transmon::Two);
        let diag: Vec<C64> = (0..DIM).map(|k| cis(l1[k / LEVELS] + l2[k % LEVELS])).collect();
        ComplexMatrix::from_diagonal(&diag)
    }
}

fn sub_index(s: Subspace) -> usize {
    match s {
        Subspace::S01 => 0,
        Subspace::S12 => 1,
    }
}

/// A play with every preceding virtual phase folded into its phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedPlay {
    pub play: Play,
    pub total_phase: f64,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub plays: Vec<ResolvedPlay>,
    pub final_phases: FramePhases,
}

/// Ordered instructions. Phase shifts act on every later play (in list order)
/// that follows the shifted frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    instructions: Vec<Instruction>,
}

impl Schedule {
    pub fn new(instructions: Vec<Instruction>) -> Result<Self> {
        let s = Self { instructions };
        s.validate(MAX_AMP_GHZ)?;
        Ok(s)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn validate(&self, amp_cap: f64) -> Result<()> {
        let mut plays: Vec<&Play> = Vec::new();
        for ins in &self.instructions {
            if ins.start_ns() < 0.0 || !ins.start_ns().is_finite() {
                return Err(Error::InvalidParams(format!("negative start time in {ins:?}")));
            }
            if let Instruction::Play(p) = ins {
                p.shape.validate(amp_cap)?;
                if !p.carrier_ghz.is_finite() || !p.phase_rad.is_finite() {
                    return Err(Error::InvalidParams(format!("non-finite carrier in {p:?}")));
                }
                plays.push(p);
            }
        }
        for (k, a) in plays.iter().enumerate() {
            for b in &plays[k + 1..] {
                if a.channel == b.channel
                    && a.start_ns < b.end_ns() - TIME_EPS
                    && b.start_ns < a.end_ns() - TIME_EPS
                {
                    return Err(Error::InvalidParams(format!(
                        "overlapping pulses on channel {:?}: [{}, {}] and [{}, {}]",
                        a.channel,
                        a.start_ns,
                        a.end_ns(),
                        b.start_ns,
                        b.end_ns()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Latest instruction end time.
    pub fn duration(&self) -> f64 {
        self.instructions.iter().map(Instruction::end_ns).fold(0.0, f64::max)
    }

    pub fn push(&mut self, ins: Instruction) -> Result<()> {
        self.instructions.push(ins);
        if let Err(e) = self.validate(MAX_AMP_GHZ) {
            self.instructions.pop();
            return Err(e);
        }
        Ok(())
    }

    /// Append a `diag(1, e^{iφa}, e^{iφb})` virtual gate on one transmon.
    pub fn push_zdiag(&mut self, t: Transmon, phi_a: f64, phi_b: f64) {
        let at = self.duration();
        for (s, a) in [(Subspace::S01, phi_a), (Subspace::S12, phi_b - phi_a)] {
            if a != 0.0 {
                let mut ps = PhaseShift::new(t, s, a);
                ps.start_ns = at;
                self.instructions.push(Instruction::PhaseShift(ps));
            }
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        let mut s = self.clone();
        for ins in &mut s.instructions {
            ins.shift(dt);
        }
        s
    }

    pub fn resolve(&self) -> Resolved {
        let mut acc = FramePhases::default();
        let mut plays = Vec::new();
        for ins in &self.instructions {
            match ins {
                Instruction::PhaseShift(s) => acc.add(s.channel, s.subspace, s.angle_rad),
                Instruction::Play(p) => {
                    let f = p.frame_ref();
                    plays.push(ResolvedPlay {
                        play: *p,
                        total_phase: p.phase_rad + acc.get(f.transmon, f.subspace),
                    });
                }
            }
        }
        Resolved {
            plays,
            final_phases: acc,
        }
    }

    pub fn final_phases(&self) -> FramePhases {
        self.resolve().final_phases
    }

    /// Lab-frame drive coefficient (rad/ns) on each channel at time `t`.
    pub fn drive_coefficients(&self, t: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for rp in self.resolve().plays {
            if let Ok(v) = rp.play.drive_term(t, rp.total_phase - rp.play.phase_rad) {
                out[rp.play.channel.index()] += v;
            }
        }
        out
    }

    pub fn plays(&self) -> impl Iterator<Item = &Play> {
        self.instructions.iter().filter_map(|i| match i {
            Instruction::Play(p) => Some(p),
            _ => None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sched: Self = serde_json::from_str(s)?;
        sched.validate(MAX_AMP_GHZ)?;
        Ok(sched)
    }
}

/// Play schedules back to back; virtual phases carry over.
pub fn concat(schedules: &[&Schedule]) -> Schedule {
    let mut out = Vec::new();
    let mut offset = 0.0;
    for s in schedules {
        out.extend(s.shifted(offset).instructions);
        offset += s.duration();
    }
    Schedule { instructions: out }
}

/// A single Gaussian-square CR pulse on transmon one, at the dressed
/// frequency of the chosen transmon-two transition.
pub fn build_cr_schedule(
    p: &DeviceParams,
    subspace: Subspace,
    amp: f64,
    width: f64,
    risefall: f64,
    phase: f64,
) -> Result<Schedule> {
    let tr = transition_frequencies(p, true)?;
    let shape = PulseShape::GaussianSquare {
        amp_ghz: amp,
        sigma_ns: risefall / 2.0,
        risefall_ns: risefall,
        width_ns: width,
    };
    let play = Play::new(Transmon::One, 0.0, shape, tr.get(Transmon::Two, subspace), phase)
        .with_frame(Transmon::Two, subspace);
    Schedule::new(vec![Instruction::Play(play)])
}

/// Shared `e^{iφ}` diagonal helper for one qutrit.
pub fn zdiag(phi_a: f64, phi_b: f64) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&[ONE, cis(phi_a), cis(phi_b)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn gsq(amp: f64) -> PulseShape {
        PulseShape::GaussianSquare {
            amp_ghz: amp,
            sigma_ns: 10.0,
            risefall_ns: 20.0,
            width_ns: 160.0,
        }
    }

    fn drag() -> PulseShape {
        PulseShape::DragGaussian {
            amp_ghz: 0.02,
            sigma_ns: 10.0,
            duration_ns: 40.0,
            beta_ns: 0.7,
        }
    }

    #[test]
    fn plateau_and_peak() {
        let z = sample_envelope(&gsq(0.06), 20.0 + 80.0).unwrap();
        assert_eq!(z, C64::new(0.06, 0.0));
        let g = PulseShape::Gaussian {
            amp_ghz: 0.3,
            sigma_ns: 7.0,
            duration_ns: 30.0,
        };
        assert!((sample_envelope(&g, 15.0).unwrap() - C64::new(0.3, 0.0)).norm() < 1e-15);
        let d = sample_envelope(&drag(), 20.0).unwrap();
        assert_eq!(d.im, 0.0);
        assert!((d.re - 0.02).abs() < 1e-15);
    }

    #[test]
    fn lifted_edges_vanish() {
        for s in [gsq(0.5), drag()] {
            assert!(sample_envelope(&s, 0.0).unwrap().re.abs() < 1e-15);
            assert!(sample_envelope(&s, s.duration()).unwrap().re.abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(sample_envelope(&drag(), 40.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(sample_envelope(&drag(), -1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn drag_quadrature_is_scaled_derivative() {
        let s = drag();
        let h = 1e-5;
        for t in [5.0, 13.0, 31.0] {
            let d = (sample_envelope(&s, t + h).unwrap().re - sample_envelope(&s, t - h).unwrap().re) / (2.0 * h);
            let im = sample_envelope(&s, t).unwrap().im;
            assert!((im - 0.7 * d).abs() < 1e-9, "{im} vs {}", 0.7 * d);
        }
    }

    #[test]
    fn drive_term_cosine_and_quadrature() {
        let shape = PulseShape::Gaussian {
            amp_ghz: 0.1,
            sigma_ns: 5.0,
            duration_ns: 20.0,
        };
        // carrier 0.5 GHz: phase vanishes mod 2π at t = 10 ns
        let p = Play::new(Transmon::One, 0.0, shape, 0.5, 0.0);
        assert!((p.drive_term(10.0, 0.0).unwrap() - TWO_PI * 0.1).abs() < 1e-12);
        let q = Play::new(Transmon::One, 0.0, shape, 0.5, PI / 2.0);
        for t in [3.0, 7.7, 12.1] {
            let env = sample_envelope(&shape, t).unwrap().re;
            let expect = TWO_PI * env * (TWO_PI * 0.5 * t).sin() * -1.0;
            // cos(x + π/2) = −sin x
            assert!((q.drive_term(t, 0.0).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_shift_is_virtual() {
        let ps = Instruction::PhaseShift(PhaseShift::new(Transmon::One, Subspace::S01, 0.4));
        assert_eq!(ps.drive_term(5.0, 0.0).unwrap(), 0.0);
        let play = Play::new(Transmon::One, 0.0, drag(), 4.9, 0.1);
        let s = Schedule::new(vec![ps, Instruction::Play(play)]).unwrap();
        let r = s.resolve();
        assert!((r.plays[0].total_phase - 0.5).abs() < 1e-15);
        assert_eq!(s.duration(), 40.0);
        assert!((r.final_phases.get(Transmon::One, Subspace::S01) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn phase_shift_commutes_with_time_shift_on_other_channel() {
        let p2 = Play::new(Transmon::Two, 50.0, drag(), 5.5, 0.0);
        let ps = Instruction::PhaseShift(PhaseShift::new(Transmon::One, Subspace::S01, 1.1));
        let a = Schedule::new(vec![ps, Instruction::Play(p2)]).unwrap();
        let b = Schedule::new(vec![Instruction::Play(p2), ps]).unwrap();
        for t in [50.0, 61.3, 70.0, 89.9] {
            assert_eq!(a.drive_coefficients(t), b.drive_coefficients(t));
        }
    }

    #[test]
    fn cr_schedule_carriers() {
        let p = DeviceParams::default();
        let s01 = build_cr_schedule(&p, Subspace::S01, 0.5, 100.0, 20.0, 0.0).unwrap();
        let s12 = build_cr_schedule(&p, Subspace::S12, 0.5, 100.0, 20.0, 0.0).unwrap();
        let c01 = s01.plays().next().unwrap().carrier_ghz;
        let c12 = s12.plays().next().unwrap().carrier_ghz;
        assert!((c01 - 5.5).abs() < 1e-4);
        assert!((c12 - 5.2).abs() < 1e-4);
        let zero = build_cr_schedule(&p, Subspace::S01, 0.5, 0.0, 20.0, 0.0).unwrap();
        assert_eq!(zero.duration(), 40.0);
        assert!(build_cr_schedule(&p, Subspace::S01, 1.5, 10.0, 20.0, 0.0).is_err());
    }

    #[test]
    fn concat_durations() {
        let p = DeviceParams::default();
        let s = build_cr_schedule(&p, Subspace::S01, 0.2, 60.0, 20.0, 0.0).unwrap();
        assert_eq!(concat(&[&s]), s);
        let two = concat(&[&s, &s]);
        assert_eq!(two.duration(), 2.0 * s.duration());
        assert_eq!(concat(&[&s, &s, &s]).duration(), 300.0);
    }

    #[test]
    fn concat_carries_virtual_phases() {
        let mut a = Schedule::empty();
        a.push(Instruction::Play(Play::new(Transmon::Two, 0.0, drag(), 5.5, 0.0))).unwrap();
        a.push_zdiag(Transmon::Two, 0.3, 0.5);
        let b = Schedule::new(vec![Instruction::Play(Play::new(Transmon::Two, 0.0, drag(), 5.2, 0.0).with_frame(Transmon::Two, Subspace::S12))]).unwrap();
        let c = concat(&[&a, &b]);
        let r = c.resolve();
        assert_eq!(r.plays[1].play.start_ns, 40.0);
        assert!((r.plays[1].total_phase - 0.2).abs() < 1e-15);
        assert_eq!(r.final_phases.level_phases(Transmon::Two), [0.0, 0.3, 0.5]);
    }

    #[test]
    fn overlapping_pulses_rejected() {
        let a = Play::new(Transmon::One, 0.0, drag(), 4.9, 0.0);
        let b = Play::new(Transmon::One, 39.0, drag(), 4.9, 0.0);
        let c = Play::new(Transmon::Two, 10.0, drag(), 5.5, 0.0);
        assert!(Schedule::new(vec![Instruction::Play(a), Instruction::Play(b)]).is_err());
        assert!(Schedule::new(vec![Instruction::Play(a), Instruction::Play(c)]).is_ok());
    }

    #[test]
    fn schedule_json_format() {
        let json = r#"[
            {"channel":1,"start_ns":0,"shape":{"kind":"gaussian_square","amp_ghz":0.06,"sigma_ns":10,"risefall_ns":20,"width_ns":160},"carrier_ghz":5.5,"phase_rad":0.0},
            {"kind":"phase_shift","channel":2,"subspace":"01","angle_rad":1.5708}
        ]"#;
        let s = Schedule::from_json(json).unwrap();
        assert_eq!(s.instructions().len(), 2);
        assert_eq!(s.duration(), 200.0);
        let back = Schedule::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(Schedule::from_json(r#"[{"channel":3,"start_ns":0,"shape":{"kind":"gaussian","amp_ghz":0.1,"sigma_ns":1,"duration_ns":4},"carrier_ghz":5.5,"phase_rad":0}]"#).is_err());
    }

    #[test]
    fn envelope_csv_rows() {
        let csv = envelope_csv(&drag(), 1.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t_ns,re,im");
        assert_eq!(lines.len(), 42);
    }

    #[test]
    fn area_of_flat_top() {
        // plateau 160 ns plus two lifted half-Gaussians
        let a = gsq(1.0).area();
        let g0 = (-2.0f64).exp();
        let half = (10.0 * (2.0 * PI).sqrt() / 2.0 * erf_approx(20.0 / (10.0 * 2f64.sqrt())) - 20.0 * g0) / (1.0 - g0);
        assert!((a - (160.0 + 2.0 * half)).abs() < 1e-6, "{a}");
    }

    // Abramowitz–Stegun 7.1.26 is too coarse; use a series for the test oracle.
    fn erf_approx(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = x;
        for n in 0..80 {
            sum += term / (2 * n + 1) as f64;
            term *= -x * x / (n + 1) as f64;
        }
        2.0 / PI.sqrt() * sum
    }

    proptest! {
        #[test]
        fn envelope_is_continuous(amp in -1.0f64..1.0, t in 0.0f64..199.99) {
            let s = gsq(amp);
            let eps = 0.01;
            let a = sample_envelope(&s, t).unwrap();
            let b = sample_envelope(&s, t + eps).unwrap();
            prop_assert!((a - b).norm() <= amp.abs() * eps / s.sigma() * 2.0 + 1e-15);
        }

        #[test]
        fn energy_scales_with_amp_squared(a in 0.01f64..0.5, scale in 1.01f64..1.9) {
            let e1 = drag().with_amp(a).energy();
            let e2 = drag().with_amp(a * scale).energy();
            prop_assert!(e2 > e1);
            prop_assert!((e2 / e1 - scale * scale).abs() < 1e-9);
        }
    }
}
