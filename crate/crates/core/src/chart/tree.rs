use alloc::vec;
use alloc::vec::Vec;

use super::{
    Canvas, ChartError, Idiom, LayoutResult, MarkGeometry, Point, Rect, ScaleMeta, Shape,
    StyleSpec, TreeNode,
};

/// Horizontal slot (leaf units) and depth of one tree node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSlot {
    pub slot: f64,
    pub depth: usize,
}

/// Returns the root index after checking parent links.
pub(crate) fn check_tree(nodes: &[TreeNode]) -> Result<usize, ChartError> {
    let n = nodes.len();
    let roots: Vec<usize> = (0..n).filter(|&i| nodes[i].parent.is_none()).collect();
    for (i, node) in nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            if p >= n {
                return Err(ChartError::TreeParentOutOfRange { node: i, parent: p });
            }
        }
    }
    if roots.len() != 1 {
        // A parent cycle with no root at all is still reported as a cycle.
        if roots.is_empty() && n > 0 {
            return Err(ChartError::TreeCycle { node: 0 });
        }
        return Err(ChartError::TreeRoots(roots.len()));
    }
    // Walking up from any node must reach the root within n steps.
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = nodes[cur].parent {
            cur = p;
            steps += 1;
            if steps > n {
                return Err(ChartError::TreeCycle { node: start });
            }
        }
    }
    Ok(roots[0])
}

/// Layered slot assignment: leaves take consecutive unit slots in
/// depth-first order and every internal node sits at the mean slot of
/// its children.
pub fn tree_slots(nodes: &[TreeNode]) -> Result<Vec<TreeSlot>, ChartError> {
    if nodes.is_empty() {
        return Err(ChartError::EmptyData);
    }
    let root = check_tree(nodes)?;
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            children[p].push(i);
        }
    }

    let mut slots = vec![
        TreeSlot {
            slot: 0.0,
            depth: 0
        };
        nodes.len()
    ];
    let mut next_leaf = 0.0;
    // Post-order traversal with an explicit stack of (node, expanded).
    let mut stack = vec![(root, false)];
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            let kids = &children[node];
            if kids.is_empty() {
                slots[node].slot = next_leaf;
                next_leaf += 1.0;
            } else {
                let sum: f64 = kids.iter().map(|&k| slots[k].slot).sum();
                slots[node].slot = sum / kids.len() as f64;
            }
            continue;
        }
        stack.push((node, true));
        for &k in children[node].iter().rev() {
            slots[k].depth = slots[node].depth + 1;
            stack.push((k, false));
        }
    }
    Ok(slots)
}

pub fn tidy_tree_layout(
    nodes: &[TreeNode],
    canvas: Canvas,
    style: &StyleSpec,
) -> Result<LayoutResult, ChartError> {
    let plot = super::layout::plot_area(canvas, style)?;
    let slots = tree_slots(nodes)?;
    let mut has_child = vec![false; nodes.len()];
    for node in nodes {
        if let Some(p) = node.parent {
            has_child[p] = true;
        }
    }
    let leaves = has_child.iter().filter(|&&c| !c).count().max(1);
    let max_depth = slots.iter().map(|s| s.depth).max().unwrap_or(0);
    let unit = plot.width / leaves as f64;
    let position = |s: &TreeSlot| {
        let x = plot.x + (s.slot + 0.5) * unit;
        let y = if max_depth == 0 {
            plot.y + plot.height / 2.0
        } else {
            plot.y + s.depth as f64 * plot.height / max_depth as f64
        };
        Point::new(x, y)
    };

    let mut marks = Vec::with_capacity(nodes.len() * 2);
    for (i, node) in nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            marks.push(MarkGeometry {
                shape: Shape::Polyline {
                    points: vec![position(&slots[p]), position(&slots[i])],
                    width: style.stroke_width,
                },
                series: 0,
                depth_layer: 1,
            });
        }
    }
    for s in &slots {
        marks.push(MarkGeometry {
            shape: Shape::Point {
                center: position(s),
                radius: style.mark_size / 2.0,
            },
            series: 0,
            depth_layer: 0,
        });
    }
    Ok(LayoutResult {
        idiom: Idiom::Tree,
        canvas,
        plot_area: Rect::new(plot.x, plot.y, plot.width, plot.height),
        marks,
        scale: ScaleMeta::default(),
    })
}
