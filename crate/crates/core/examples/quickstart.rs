use hoskip_core::analytic::{self, TauMode};
use hoskip_core::model::{MobilityModel, NetworkParams, SpeedDistribution, UtilityParams};
use hoskip_core::quadrature::QuadSpec;

fn main() -> Result<(), hoskip_core::analytic::AnalyticError> {
    let spec = QuadSpec::default();
    let net = NetworkParams::new(10.0, 3.0, 0.0)?;
    let mobility = MobilityModel::new(SpeedDistribution::Constant(1e-5))?;
    let util = UtilityParams::new(10.0)?;

    let t0 = analytic::t0(&net, &spec)?;
    let t1 = analytic::t1(1000, &net, &mobility, TauMode::Exact, &spec)?;
    let h1 = analytic::h1(1000, &net, &mobility, &spec)?;
    let u1 = analytic::utility(t1.value, h1.value, &util);
    let best = analytic::sopt(net.beta, &util, &spec)?;

    println!("always-execute rate {:.6} nats/slot", t0.value);
    println!("s=1000 utility {u1:.6}, optimum near s = {}", best.s_rounded);
    Ok(())
}
