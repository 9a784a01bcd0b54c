use std::time::Instant;
use gauss_varlp::kernels::{verify_orthogonality, ProfileFunction, Variant};
use gauss_varlp::operators::{apply, standard_family, OperatorSpec};
use gauss_varlp::quad::QuadratureScheme;

#[test]
fn timing() {
    let s = QuadratureScheme::gauss_hermite(2, 32);
    let mut p = ProfileFunction::coordinate(2);
    verify_orthogonality(&mut p, &s).unwrap();
    let spec = OperatorSpec::new(Variant::Alternative, p.clone(), 2, 2).unwrap().with_scale_const(2.0);

    let fam = standard_family(2);
    for f in [&fam[6], &fam[8]] {
        println!("--- field {}", f.name);
        for i in [0usize, 5, 10, 14, 15, 16, 17, 18, 19] {
            let x = [0.3 * i as f64 - 3.0, 0.4];
            let t0 = Instant::now();
            let out = apply(&spec, f, &x).unwrap();
            println!("  x=({:.1},0.4): {:>12?}  val {:+.6e} flag {}", x[0], t0.elapsed(), out.value, out.flagged);
        }
    }
}
