use num_complex::Complex64;
use wedgefield_core::*;

fn main() {
    // reference two-point for the MC oracle test
    let f = TestFunction::unit_gaussian();
    let g = TestFunction::gaussian(
        Complex64::new(1.0, 0.0),
        FourVector::new(0.2, -0.4, 0.1, 0.3),
        [1.0; 4],
        FourVector::new(0.5, 0.3, 0.0, 0.0),
    );
    let mu = MassShellMeasure::fixed_grid(1.0, 6.0, 48);
    let v = two_point(&f, &g, &mu).unwrap();
    println!("two_point frozen = {:+.15e} {:+.15e}i", v.re, v.im);
    let mu64 = MassShellMeasure::fixed_grid(1.0, 6.0, 64);
    let v64 = two_point(&f, &g, &mu64).unwrap();
    println!("check vs n=64 diff = {:.2e}", (v - v64).norm());
}
