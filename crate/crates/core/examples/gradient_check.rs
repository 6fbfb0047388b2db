//! Finite-difference check of the down-scaled model, with and without the
//! Frobenius penalty, and with a deliberately broken backward pass.

use learngraph::training::{
    gradcheck, gradcheck_instance, gradcheck_model, gradcheck_params, GradcheckOptions,
    GradcheckReport,
};

fn print(title: &str, report: &GradcheckReport) {
    println!("{title}: max relative error {:.3e}", report.max_rel_error());
    for p in &report.params {
        println!(
            "  {:<10} {:>3} entries  rel {:.2e}  abs {:.2e}",
            p.name, p.entries, p.max_rel_error, p.max_abs_error
        );
    }
    println!("  {}", if report.passed() { "PASS" } else { "FAIL" });
}

fn main() -> learngraph::Result<()> {
    let (f, l) = gradcheck_instance(6, 8, 0);
    print("gamma = 0", &gradcheck(&f, &l, 0.0, 0)?);

    let (f1, l1) = gradcheck_instance(6, 8, 1);
    print("gamma = 0.1", &gradcheck(&f1, &l1, 0.1, 1)?);

    let params = gradcheck_model(8, 0)?;
    let broken = gradcheck_params(
        &params,
        &f,
        &l,
        0.0,
        GradcheckOptions {
            break_backward: true,
        },
    )?;
    print("broken tanh adjoint", &broken);
    Ok(())
}
