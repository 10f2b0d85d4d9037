//! Values and gradients of the reference elements at their centroids.

use tracefem::basis::ReferenceElement;

fn main() -> tracefem::Result<()> {
    let elements = [
        ("tet P1", ReferenceElement::tet(1)?, [0.25; 3]),
        ("tet P2", ReferenceElement::tet(2)?, [0.25; 3]),
        ("tri6", ReferenceElement::triangle(2)?, [1.0 / 3.0, 1.0 / 3.0, 0.0]),
        ("quad8", ReferenceElement::quad8(), [0.0; 3]),
    ];
    for (name, el, r) in elements {
        let n = el.values(&r);
        let g = el.gradients(&r);
        let sum: f64 = n.iter().sum();
        let gsum: [f64; 3] = std::array::from_fn(|i| g.iter().map(|d| d[i]).sum());
        println!("{name:>6}: {} nodes, sum N = {sum:.15}, sum grad N = {gsum:?}", el.node_count());
    }
    Ok(())
}
