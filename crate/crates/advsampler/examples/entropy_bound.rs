//! Numeric check of the cycle-consistency entropy bound.
//!
//! For a sampler `x = h(eps)`, the entropy of the sample distribution is
//! lower-bounded by `H(q0) + E[log t(eps | h(eps))]` for any probabilistic
//! inverse `t(eps|x) = N(eps; mu(x), I)`. With the identity sampler both
//! sides are closed-form; a worse inverse map only loosens the bound.
//!
//! ```text
//! cargo run --release --example entropy_bound
//! ```

use advsampler::ras::{entropy_bound_identity, entropy_bound_mc};
use advsampler::seed::{stream_rng, Stream};
use ndarray::Array1;

fn main() {
    println!("identity sampler on N(0, I_d), perfect inverse (closed form):");
    for d in [1usize, 2, 5] {
        let b = entropy_bound_identity(d);
        println!(
            "  d = {d}: entropy {:.4} >= bound {:.4}  ({})",
            b.entropy,
            b.bound,
            if b.holds() { "holds" } else { "VIOLATED" }
        );
    }

    println!("Monte-Carlo bound with deliberately bad inverse maps (d = 2):");
    let mut rng = stream_rng(0, Stream::Eval);
    let maps: [(&str, Box<dyn Fn(ndarray::ArrayView1<f64>) -> Array1<f64>>); 3] = [
        ("mu(x) = x (perfect)", Box::new(|x: ndarray::ArrayView1<f64>| x.to_owned())),
        ("mu(x) = 0", Box::new(|x: ndarray::ArrayView1<f64>| Array1::zeros(x.len()))),
        ("mu(x) = -x", Box::new(|x: ndarray::ArrayView1<f64>| x.mapv(|v| -v))),
    ];
    for (label, map) in maps {
        let b = entropy_bound_mc(2, map, 50_000, &mut rng);
        println!(
            "  {label:>18}: entropy {:.4} >= bound {:.4}  ({})",
            b.entropy,
            b.bound,
            if b.holds() { "holds" } else { "VIOLATED" }
        );
    }
}
