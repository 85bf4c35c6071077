//! Both sides of the integral inequality for a two-level step profile, by
//! closed form and by quadrature, over a range of h.

use pinchlab::inequality::{
    closed_form_rhs, gap_report, lhs_value, ratio_expansion, Method, Resolution,
};
use pinchlab::signals::StepProfile;

fn main() -> pinchlab::Result<()> {
    let step = StepProfile::new(vec![2.0, 2.0 / 3.0], vec![0.25, 0.75])?;
    let profile = step.to_profile();
    let res = Resolution::default();
    println!(
        "{:>8} {:>14} {:>14} {:>14} {:>10}",
        "h", "lhs", "rhs (closed)", "rhs (quad)", "ratio"
    );
    for h in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let cf = closed_form_rhs(&step, h)?;
        let quad = gap_report(&profile, h, Method::Quadrature, &res)?;
        println!(
            "{h:>8} {:>14.10} {:>14.10} {:>14.10} {:>10.6}",
            lhs_value(h)?,
            cf.rhs,
            quad.rhs,
            cf.rhs / lhs_value(h)?
        );
    }
    let exp = ratio_expansion(&step)?;
    println!("small-h ratio expansion: {exp:?}");
    Ok(())
}
