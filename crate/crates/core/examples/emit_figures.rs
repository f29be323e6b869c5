//! Writes figure tables and SVG previews from in-memory results: the sigma
//! curve figure from two constant curves and a hand-drawn plot.

use surface_hydro::current::SigmaCurve;
use surface_hydro::harness::emit_sigma;
use surface_hydro::harness::svg::{render, Mark, Series};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("surface-hydro-example-figures");
    let _ = std::fs::remove_dir_all(&out);
    let curves = [
        SigmaCurve::constant(1.0, 0.25),
        SigmaCurve::constant(0.8, 2.0),
    ];
    for path in emit_sigma(&curves, &out, true)? {
        println!("wrote {}", path.display());
    }
    let parabola = Series {
        label: "w^2".into(),
        points: (0..=40)
            .map(|i| {
                let w = -2.0 + 0.1 * i as f64;
                (w, w * w)
            })
            .collect(),
        mark: Mark::Line,
    };
    let svg = render("demo", "w", "value", &[parabola]);
    let path = out.join("demo.svg");
    std::fs::write(&path, svg)?;
    println!("wrote {}", path.display());
    Ok(())
}
