//! Running schedules on the full device model.
//!
//! Results are reported in the computational frame, where each transmon's
//! levels rotate at their own dressed ladder energies. A drive resonant with a
//! dressed transition produces a fixed-axis rotation there, independent of when
//! it starts. Virtual phase shifts are folded in at the end of the schedule.

use crate::device::{rotating_frame_hamiltonian, ComputationalFrame, DeviceHamiltonian, DeviceParams, FrameSpec, RwaSpec, DIM};
use crate::error::Result;
use crate::linalg::{ComplexMatrix, StateVector};
use crate::propagator::{evolve_columns, evolve_state_report, Evolution, EvolveOptions, Integrator, NORM_DRIFT_FATAL};
use crate::pulse::Schedule;
use crate::Error;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct Simulator {
    params: DeviceParams,
    opts: EvolveOptions,
    sim_frame: FrameSpec,
    comp: ComputationalFrame,
}

impl Simulator {
    pub fn new(p: &DeviceParams, opts: &EvolveOptions) -> Result<Self> {
        p.validate()?;
        opts.validate()?;
        Ok(Self {
            params: p.clone(),
            opts: *opts,
            sim_frame: opts.frame.unwrap_or_else(|| FrameSpec::bare(p)),
            comp: ComputationalFrame::new(p)?,
        })
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn options(&self) -> &EvolveOptions {
        &self.opts
    }

    /// Same device, different integration options.
    pub fn with_options(&self, opts: &EvolveOptions) -> Result<Self> {
        Self::new(&self.params, opts)
    }

    pub fn computational_frame(&self) -> &ComputationalFrame {
        &self.comp
    }

    pub fn hamiltonian(&self, schedule: &Schedule) -> Result<DeviceHamiltonian> {
        let rwa = self.opts.rwa.then_some(RwaSpec {
            cutoff_ghz: self.opts.rwa_cutoff_ghz,
        });
        rotating_frame_hamiltonian(&self.params, &self.sim_frame, schedule, rwa)
    }

    /// Gate realized by the schedule over `[0, duration]`.
    pub fn unitary(&self, schedule: &Schedule) -> Result<Evolution<ComplexMatrix>> {
        let cols: Vec<usize> = (0..DIM).collect();
        self.unitary_columns(schedule, &cols)
    }

    /// Only the listed columns of the gate; the rest are zero.
    pub fn unitary_columns(&self, schedule: &Schedule, cols: &[usize]) -> Result<Evolution<ComplexMatrix>> {
        let h = self.hamiltonian(schedule)?;
        let t1 = schedule.duration();
        let ev = evolve_columns(&h, cols, 0.0, t1, &self.opts)?;
        let u = self.comp.unitary_from_sim(&ev.value, &self.sim_frame, 0.0, t1);
        let z = schedule.final_phases().matrix();
        Ok(Evolution {
            value: &z * &u,
            ..ev
        })
    }

    /// Final state of `psi0` (computational frame at t = 0) under the schedule.
    pub fn evolve(&self, schedule: &Schedule, psi0: &StateVector) -> Result<Evolution<StateVector>> {
        let h = self.hamiltonian(schedule)?;
        let t1 = schedule.duration();
        let start = self.comp.state_to_sim(psi0, &self.sim_frame, 0.0);
        let ev = evolve_state_report(&h, &start, 0.0, t1, &self.opts)?;
        let out = self.comp.state_from_sim(&ev.value, &self.sim_frame, t1);
        let z = schedule.final_phases().matrix();
        Ok(Evolution {
            value: z.apply(&out)?,
            ..ev
        })
    }

    /// States at each of the increasing `times`, computational frame, without
    /// virtual phase corrections.
    pub fn sample(&self, schedule: &Schedule, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
            return Err(Error::InvalidParams("sample times must be non-negative and increasing".into()));
        }
        let h = self.hamiltonian(schedule)?;
        let mut integ = Integrator::new(&h, &self.opts)?;
        let mut y = self.comp.state_to_sim(psi0, &self.sim_frame, 0.0).into_amplitudes();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &tk in times {
            integ.advance(&mut y, t, tk)?;
            t = tk;
            let psi = StateVector::from_raw(y.clone());
            let drift = (psi.norm_sqr() - 1.0).abs();
            if drift > NORM_DRIFT_FATAL {
                return Err(Error::NormDrift(drift));
            }
            out.push(self.comp.state_from_sim(&psi, &self.sim_frame, t));
        }
        Ok(out)
    }
}

/// One continuation of a shared prefix: from `split_ns`, follow `schedule`
/// up to its end.
#[derive(Debug, Clone)]
pub struct Branch {
    pub split_ns: f64,
    pub schedule: Schedule,
}

impl Simulator {
    /// Integrate `prefix` once, stopping at each branch's split time, and
    /// finish every branch under its own schedule. Branches must agree with
    /// `prefix` before their split. Final states are in the computational
    /// frame without virtual phase corrections, in the order given.
    pub fn evolve_branches(&self, prefix: &Schedule, psi0: &StateVector, branches: &[Branch]) -> Result<Vec<StateVector>> {
        let mut order: Vec<usize> = (0..branches.len()).collect();
        order.sort_by(|&a, &b| branches[a].split_ns.total_cmp(&branches[b].split_ns));
        if branches.iter().any(|b| b.split_ns < 0.0 || b.split_ns > b.schedule.duration() + 1e-9) {
            return Err(Error::InvalidParams("branch split outside its schedule".into()));
        }
        let h = self.hamiltonian(prefix)?;
        let mut integ = Integrator::new(&h, &self.opts)?;
        let mut y = self.comp.state_to_sim(psi0, &self.sim_frame, 0.0).into_amplitudes();
        let mut t = 0.0;
        let mut starts = vec![Vec::new(); branches.len()];
        for &k in &order {
            integ.advance(&mut y, t, branches[k].split_ns)?;
            t = branches[k].split_ns;
            starts[k] = y.clone();
        }
        branches
            .par_iter()
            .zip(starts)
            .map(|(b, mut y)| {
                let h = self.hamiltonian(&b.schedule)?;
                let t1 = b.schedule.duration();
                Integrator::new(&h, &self.opts)?.advance(&mut y, b.split_ns, t1)?;
                let psi = StateVector::from_raw(y);
                let drift = (psi.norm_sqr() - 1.0).abs();
                if drift > NORM_DRIFT_FATAL {
                    return Err(Error::NormDrift(drift));
                }
                Ok(self.comp.state_from_sim(&psi, &self.sim_frame, t1))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{Subspace, Transmon};
    use crate::pulse::{build_cr_schedule, Instruction, PhaseShift, Play, PulseShape};

    #[test]
    fn empty_schedule_applies_only_virtual_phases() {
        let p = DeviceParams::default();
        let sim = Simulator::new(&p, &EvolveOptions::default()).unwrap();
        let u = sim.unitary(&Schedule::empty()).unwrap().value;
        assert!(u.max_abs_diff(&ComplexMatrix::identity(DIM)) < 1e-15);
        let s = Schedule::new(vec![Instruction::PhaseShift(PhaseShift::new(Transmon::Two, Subspace::S12, 0.7))]).unwrap();
        let u = sim.unitary(&s).unwrap().value;
        assert!((u[(2, 2)] - crate::linalg::cis(0.7)).norm() < 1e-15);
        assert!((u[(1, 1)] - crate::linalg::ONE).norm() < 1e-15);
    }

    #[test]
    fn state_and_unitary_agree() {
        let p = DeviceParams::default();
        let sim = Simulator::new(&p, &EvolveOptions::rwa()).unwrap();
        let s = build_cr_schedule(&p, Subspace::S01, 0.3, 40.0, 20.0, 0.2).unwrap();
        let u = sim.unitary(&s).unwrap().value;
        let psi = StateVector::two_qutrit(1, 0);
        let out = sim.evolve(&s, &psi).unwrap().value;
        let expect = u.apply(&psi).unwrap();
        assert!((out.inner(&expect).unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn resonant_pulse_axis_is_start_independent() {
        // the same pulse played at two start times gives the same gate in the computational frame
        let p = DeviceParams::default();
        let sim = Simulator::new(&p, &EvolveOptions::rwa()).unwrap();
        let tr = crate::device::transition_frequencies(&p, true).unwrap();
        let shape = PulseShape::Gaussian {
            amp_ghz: 0.02,
            sigma_ns: 10.0,
            duration_ns: 40.0,
        };
        let make = |start: f64| {
            Schedule::new(vec![Instruction::Play(Play::new(Transmon::Two, start, shape, tr.w01_2, 0.0))]).unwrap()
        };
        let a = sim.evolve(&make(0.0), &StateVector::two_qutrit(0, 0)).unwrap().value;
        let b = sim.evolve(&make(13.7), &StateVector::two_qutrit(0, 0)).unwrap().value;
        assert!((a.amplitudes()[1] - b.amplitudes()[1]).norm() < 1e-4, "{a:?} {b:?}");
    }

    #[test]
    fn branches_match_direct_runs() {
        let p = DeviceParams::default();
        let sim = Simulator::new(&p, &EvolveOptions::rwa()).unwrap();
        let psi = StateVector::two_qutrit(0, 0);
        let long = build_cr_schedule(&p, Subspace::S01, 0.3, 100.0, 20.0, 0.1).unwrap();
        let branches: Vec<Branch> = [60.0, 10.0, 35.0]
            .iter()
            .map(|&w| Branch {
                split_ns: 20.0 + w,
                schedule: build_cr_schedule(&p, Subspace::S01, 0.3, w, 20.0, 0.1).unwrap(),
            })
            .collect();
        let out = sim.evolve_branches(&long, &psi, &branches).unwrap();
        for (b, o) in branches.iter().zip(&out) {
            let direct = sim.evolve(&b.schedule, &psi).unwrap().value;
            assert!((direct.inner(o).unwrap().norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sample_rejects_decreasing_times() {
        let p = DeviceParams::default();
        let sim = Simulator::new(&p, &EvolveOptions::rwa()).unwrap();
        assert!(sim.sample(&Schedule::empty(), &StateVector::two_qutrit(0, 0), &[2.0, 1.0]).is_err());
    }
}
