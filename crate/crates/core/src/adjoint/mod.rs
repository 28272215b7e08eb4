//! Exact reverse-mode gradients of the flow-based ELBO estimators.
//!
//! The Hamiltonian flow is a fixed composition of shears (leapfrog half-kicks
//! and drifts) and scalings (tempering), so its adjoint is written out by hand
//! and replayed over the stored trajectory. The only model quantities needed
//! beyond `∇_z U` and `∇_θ log p` are the Hessian-vector product of `U` and the
//! mixed `θ`-derivative of `∇_z U`.

mod backprop;
mod params;
mod planar;

pub use backprop::{
    backprop_his, backprop_his_config, backprop_his_scaled, backprop_vanilla, ConstrainedGradient,
    GradientBundle,
};
pub use params::{TemperingKind, UnconstrainedParams};
pub use planar::{backprop_planar, planar_from_raw, planar_raw_len, PlanarGradient};

/// Central differences `(f(p + h e_i) - f(p - h e_i)) / 2h` for every
/// coordinate.
pub fn finite_diff_gradient<F>(mut f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let hi = f(&p);
            p[i] = orig - step;
            let lo = f(&p);
            p[i] = orig;
            (hi - lo) / (2.0 * step)
        })
        .collect()
}
