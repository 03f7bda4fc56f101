//! Build a grid in code, write it out, read it back.

use gridcascade::grid::{connected_components, validate_grid};
use gridcascade::gridfile::{emit_grid, read_grid};
use gridcascade::{GridEdge, GridNode, GridTopology, NodeId};

fn main() -> gridcascade::Result<()> {
    let g = GridTopology::validated(
        vec![
            GridNode::new(1, 1.5, 1.0, 0.6),
            GridNode::new(2, -0.5, 1.0, 0.6),
            GridNode::new(3, -1.0, 2.0, 0.8),
        ],
        vec![
            GridEdge::new(1, 2, 2.0),
            GridEdge::new(2, 3, 1.5),
            GridEdge::new(1, 3, 1.0),
        ],
    )?;
    let text = emit_grid(&g);
    print!("{text}");
    assert_eq!(read_grid(&text)?, g);

    let broken = read_grid(
        "gridfile v1\n[nodes]\n1, 1.0, 1.0, 0.6\n2, -0.5, 1.0, 0.6\n[edges]\n1, 2, 1.0\n",
    );
    println!("\nunbalanced grid: {}", broken.unwrap_err());

    let split = g
        .remove_edge(NodeId(2), NodeId(3))?
        .remove_edge(NodeId(1), NodeId(3))?;
    println!(
        "after two cuts: components {:?}",
        connected_components(&split)
    );
    println!("violations: {:?}", validate_grid(&split));
    Ok(())
}
