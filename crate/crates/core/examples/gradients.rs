//! Checks the hand-written adjoint of the HIS bound against central finite
//! differences for every parameter block.

use hvi::adjoint::{backprop_his, finite_diff_gradient, TemperingKind, UnconstrainedParams};
use hvi::bench::generate_dataset;
use hvi::estimators::HisNoise;
use hvi::model::{make_true_params, MeanFieldGaussian, MeanFieldParams};
use hvi::model::GaussianModel;
use hvi::rng::stream;

fn main() -> hvi::Result<()> {
    let d = 3;
    let data = generate_dataset(d, 5, 11)?;
    let model = GaussianModel::new(d);
    let theta = make_true_params(d).to_theta();
    let prior = MeanFieldGaussian::new(d);
    let phi = MeanFieldParams::new(vec![0.1, -0.1, 0.2], vec![0.5, 0.8, 1.2])?.to_phi();
    let noise = HisNoise::sample(&mut stream(5, &[]), d, d);

    for kind in [TemperingKind::None, TemperingKind::Fixed, TemperingKind::Free] {
        let fp = UnconstrainedParams::new(4, 0.5, kind, vec![-4.0, -3.5, -5.0], vec![0.3; kind.num_raw(4)])?;
        let (est, g) = backprop_his(&model, &theta, &data, &fp, &prior, &phi, &noise)?;

        let fd_theta = finite_diff_gradient(
            |t| backprop_his(&model, t, &data, &fp, &prior, &phi, &noise).map_or(f64::NAN, |r| r.0.value),
            &theta,
            1e-5,
        );
        let fd_flow = finite_diff_gradient(
            |v| {
                let mut q = fp.clone();
                q.set_from_slice(v).expect("length");
                backprop_his(&model, &theta, &data, &q, &prior, &phi, &noise).map_or(f64::NAN, |r| r.0.value)
            },
            &fp.to_vec(),
            1e-5,
        );
        let fd_phi = finite_diff_gradient(
            |p| backprop_his(&model, &theta, &data, &fp, &prior, p, &noise).map_or(f64::NAN, |r| r.0.value),
            &phi,
            1e-5,
        );
        let worst = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1e-8)).fold(0.0, f64::max)
        };
        println!(
            "{kind:?}: elbo {:.5}  max rel err theta {:.2e} flow {:.2e} prior {:.2e}",
            est.value,
            worst(&g.d_theta, &fd_theta),
            worst(&g.d_flow(), &fd_flow),
            worst(&g.d_prior, &fd_phi),
        );
    }
    Ok(())
}
