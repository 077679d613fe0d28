//! Numeric evaluation of the compiled model functions.

use crate::contact::{
    hertz_patch, kalker_entries, kalker_forces, saturation_scale, ContactPatch, Curvatures,
    HertzTable, KalkerTable, Material, PatchError,
};
use crate::integrator::Matrix;
use crate::symcore::{EvalStatus, TapeRunner};

use super::{AssembledDynamics, Dims, Function, SymbolIndex, KIN_PER_CONTACT};

/// Per-contact numeric state after [`Evaluator::update_contacts`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactNumerics {
    pub curvature: Curvatures,
    pub patch: ContactPatch,
    /// `[k11, k22, k23, k33]`.
    pub k: [f64; 4],
    /// Creepage numerators and the (clamped) denominator.
    pub nu: [f64; 3],
    pub v: f64,
    /// `[ξ_x, ξ_y, φ_z]`.
    pub creep: [f64; 3],
    /// `[f_x, f_y, m_z]`.
    pub force: [f64; 3],
    pub table_clamped: bool,
    /// Entries were scaled down to respect the friction limit.
    pub saturated: bool,
}

/// Owns one runner per model function; all buffers are allocated once.
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub dims: Dims,
    pub symbols: SymbolIndex,
    runners: Vec<TapeRunner>,
    pub contacts: Vec<ContactNumerics>,
}

impl Evaluator {
    pub fn new(model: &AssembledDynamics) -> Self {
        Self {
            dims: model.dims,
            symbols: model.symbols.clone(),
            runners: Function::ALL
                .iter()
                .map(|&f| TapeRunner::new(model.tape(f).clone()))
                .collect(),
            contacts: vec![ContactNumerics::default(); model.dims.nc],
        }
    }

    fn runner(&mut self, f: Function) -> &mut TapeRunner {
        &mut self.runners[f.index()]
    }

    pub fn run(&mut self, f: Function, x: &[f64]) -> EvalStatus {
        self.runner(f).run(x)
    }

    /// Outputs of the last `run` of `f`, row-major.
    pub fn out(&self, f: Function) -> &[f64] {
        &self.runners[f.index()].out
    }

    /// Copies the last output of `f` into `m` (shapes must agree).
    pub fn copy_into(&self, f: Function, m: &mut Matrix) {
        m.as_mut_slice().copy_from_slice(self.out(f));
    }

    /// Contact kinematics, Hertz patch, Kalker coefficients and creep
    /// forces for the normal loads `normal` (N, compression positive).
    /// Writes the `k` and force symbols into `x`.
    pub fn update_contacts(
        &mut self,
        x: &mut [f64],
        normal: &[f64],
        hertz: &HertzTable,
        kalker: &KalkerTable,
        material: &Material,
        v_min: f64,
    ) -> Result<EvalStatus, PatchError> {
        let status = self.run(Function::ContactKinematics, x);
        for i in 0..self.dims.nc {
            let o = &self.runners[Function::ContactKinematics.index()].out
                [i * KIN_PER_CONTACT..(i + 1) * KIN_PER_CONTACT];
            let curvature = Curvatures {
                wheel_x: o[0],
                wheel_y: o[1],
                rail_x: o[2],
                rail_y: o[3],
            };
            let nu = [o[4], o[5], o[6]];
            let v = o[7].max(v_min);
            let patch = hertz_patch(hertz, normal[i], &curvature, material)?;
            let (mut k, table_clamped) = kalker_entries(kalker, &patch, material.nu);
            let creep = nu.map(|n| n / v);
            let mut force = kalker_forces(material.g, k, creep);
            let mut saturated = false;
            if let Some(mu) = material.friction {
                let f = saturation_scale(force, mu, normal[i]);
                if f < 1.0 {
                    k = k.map(|c| c * f);
                    force = force.map(|c| c * f);
                    saturated = true;
                }
            }
            for (s, val) in self.symbols.kalker[i].iter().zip(k) {
                x[s.index()] = val;
            }
            for (s, val) in self.symbols.forces[i].iter().zip(force) {
                x[s.index()] = val;
            }
            self.contacts[i] = ContactNumerics {
                curvature,
                patch,
                k,
                nu,
                v,
                creep,
                force,
                table_clamped,
                saturated,
            };
        }
        Ok(status)
    }

    /// Sets every creep force symbol in `x` to zero.
    pub fn clear_forces(&self, x: &mut [f64]) {
        for f in &self.symbols.forces {
            for s in f {
                x[s.index()] = 0.0;
            }
        }
    }

    /// `C^K = Σ_i block_i / V_i` using the denominators from the last
    /// [`Evaluator::update_contacts`].
    pub fn kalker_damping(&mut self, x: &[f64], out: &mut Matrix) -> EvalStatus {
        let nq = self.dims.nq;
        let status = self.run(Function::Kalker, x);
        out.fill(0.0);
        let blocks = &self.runners[Function::Kalker.index()].out;
        let dst = out.as_mut_slice();
        for (i, c) in self.contacts.iter().enumerate() {
            let inv = 1.0 / c.v;
            let b = &blocks[i * nq * nq..(i + 1) * nq * nq];
            for (d, s) in dst.iter_mut().zip(b) {
                *d += inv * s;
            }
        }
        status
    }

    /// ECCF system `[M, Jᵀ; J, 0]·[q̈; λ] = [δ; γⁿ]` at `x` (forces taken from
    /// `x`). `a` must be `(nq+nc)²`, `rhs` of length `nq+nc`.
    pub fn reduced_system(&mut self, x: &[f64], a: &mut Matrix, rhs: &mut [f64]) -> EvalStatus {
        let Dims { nq, nc, .. } = self.dims;
        let mut st = self.run(Function::MassMatrix, x);
        st.non_finite |= self.run(Function::Delta, x).non_finite;
        st.non_finite |= self.run(Function::JacNq, x).non_finite;
        st.non_finite |= self.run(Function::GammaN, x).non_finite;
        a.fill(0.0);
        let mm = self.out(Function::MassMatrix);
        for i in 0..nq {
            for j in 0..nq {
                a[(i, j)] = mm[i * nq + j];
            }
        }
        let jn = self.out(Function::JacNq);
        for c in 0..nc {
            for j in 0..nq {
                a[(nq + c, j)] = jn[c * nq + j];
                a[(j, nq + c)] = jn[c * nq + j];
            }
        }
        rhs[..nq].copy_from_slice(self.out(Function::Delta));
        rhs[nq..nq + nc].copy_from_slice(self.out(Function::GammaN));
        st
    }

    /// Augmented system with contact-coordinate accelerations and tangent
    /// multipliers. Unknowns `[q̈; s̈; λⁿ; λᵈ]`, dimension `nq + 2 ns + nc`.
    pub fn accf_system(&mut self, x: &[f64]) -> (Matrix, Vec<f64>) {
        let Dims { nq, ns, nc } = self.dims;
        let n = nq + ns + nc + ns;
        let mut a = Matrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        for f in [
            Function::MassMatrix,
            Function::Delta,
            Function::JacNq,
            Function::JacNs,
            Function::JacDq,
            Function::JacDs,
            Function::GammaN,
            Function::GammaD,
        ] {
            self.run(f, x);
        }
        let (r_s, r_n, r_d) = (nq, nq + ns, nq + ns + nc);
        let mm = self.out(Function::MassMatrix);
        for i in 0..nq {
            for j in 0..nq {
                a[(i, j)] = mm[i * nq + j];
            }
        }
        // (rows offset, jacobian wrt q, wrt s, count)
        for (row0, fq, fs, cnt) in [
            (r_n, Function::JacNq, Function::JacNs, nc),
            (r_d, Function::JacDq, Function::JacDs, ns),
        ] {
            let jq = self.out(fq).to_vec();
            let js = self.out(fs).to_vec();
            for c in 0..cnt {
                for j in 0..nq {
                    a[(row0 + c, j)] = jq[c * nq + j];
                    a[(j, row0 + c)] = jq[c * nq + j];
                }
                for j in 0..ns {
                    a[(row0 + c, r_s + j)] = js[c * ns + j];
                    a[(r_s + j, row0 + c)] = js[c * ns + j];
                }
            }
        }
        rhs[..nq].copy_from_slice(self.out(Function::Delta));
        rhs[r_n..r_n + nc].copy_from_slice(self.out(Function::GammaN));
        rhs[r_d..r_d + ns].copy_from_slice(self.out(Function::GammaD));
        (a, rhs)
    }

    /// Kinetic and potential energy.
    pub fn energy(&mut self, x: &[f64]) -> (f64, f64) {
        self.run(Function::Energy, x);
        let o = self.out(Function::Energy);
        (o[0], o[1])
    }
}
