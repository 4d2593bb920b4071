use proptest::prelude::*;
use relaywalk::config::Objective;
use relaywalk::sim::path_cost_links;

/// Every sink-bound path as the list of nodes it visits, source first.
fn all_paths(node_links: &[Vec<f64>], from: usize) -> Vec<Vec<usize>> {
    if from == 0 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for back in 1..=node_links[from - 1].len() {
        for mut tail in all_paths(node_links, from - back) {
            tail.insert(0, from);
            out.push(tail);
        }
    }
    out
}

fn enumerate(node_links: &[Vec<f64>], objective: Objective) -> f64 {
    all_paths(node_links, node_links.len())
        .iter()
        .map(|path| {
            let hops = path.windows(2).map(|w| node_links[w[0] - 1][w[0] - w[1] - 1]);
            match objective {
                Objective::Sum => hops.sum(),
                Objective::Max => hops.fold(0.0, f64::max),
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, u32)> {
    (1u32..=3, 1usize..=6).prop_flat_map(|(n, nodes)| {
        let rows: Vec<_> = (1..=nodes)
            .map(|node| {
                let visible = (n as usize).min(node);
                (1..=visible).prop_flat_map(|k| prop::collection::vec(0.001f64..2.0, k))
            })
            .collect();
        (rows, Just(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn dynamic_program_matches_enumeration((links, n) in instance()) {
        for objective in [Objective::Sum, Objective::Max] {
            let dp = path_cost_links(&links, objective, n).unwrap();
            let brute = enumerate(&links, objective);
            prop_assert!((dp - brute).abs() <= 1e-12 * brute.max(1.0), "{objective}: {dp} vs {brute}");
        }
    }
}

#[test]
fn exhaustive_shapes_up_to_six_nodes() {
    for n in 1..=3u32 {
        for nodes in 1..=6usize {
            let links: Vec<Vec<f64>> = (1..=nodes)
                .map(|node| {
                    (1..=(n as usize).min(node))
                        .map(|back| ((node * 7 + back * 3) % 11) as f64 * 0.1 + 0.05)
                        .collect()
                })
                .collect();
            for objective in [Objective::Sum, Objective::Max] {
                let dp = path_cost_links(&links, objective, n).unwrap();
                assert!((dp - enumerate(&links, objective)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn malformed_links_rejected() {
    assert!(path_cost_links(&[vec![]], Objective::Sum, 1).is_err());
    assert!(path_cost_links(&[vec![0.1, 0.2]], Objective::Sum, 2).is_err());
    assert!(path_cost_links(&[vec![0.1], vec![0.1, 0.2, 0.3]], Objective::Max, 2).is_err());
}
