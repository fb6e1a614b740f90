//! Cost-based logical planning.
//!
//! Unstructured filters are costed from their measured per-row speed (an
//! exponential moving average over past invocations); everything else uses
//! fixed per-row constants and a simple cardinality model. Plans are built
//! greedily from a table of partial plans.

mod cost;
mod greedy;
mod plan;
mod speed;

pub use cost::{indexable, relative_direction, CostModel, PlanContext};
pub use greedy::{Optimized, Optimizer, Step};
pub use plan::{LogicalOp, PlanNode};
pub use speed::{FilterSpeedStats, SpeedRegistry, DEFAULT_K};

use std::sync::Arc;

use thiserror::Error;

use crate::query::QueryGraph;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("speed update with zero input rows")]
    ZeroRows,
    #[error("invalid filter cost {0}")]
    InvalidCost(f64),
    #[error("no complete plan: {0}")]
    Unsatisfiable(String),
}

/// Greedy plan for `qg`.
pub fn optimize(qg: &QueryGraph, ctx: &PlanContext, model: &CostModel) -> Result<Arc<PlanNode>, PlanError> {
    Ok(Optimizer::new(qg, ctx, model).optimize()?.plan)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::graph::fixture::sports_graph;
    use crate::query::{parse, to_query_graph};

    fn qg(text: &str) -> QueryGraph {
        to_query_graph(&parse(text).unwrap()).unwrap()
    }

    fn fig7_ctx() -> PlanContext {
        let mut g = sports_graph();
        g.create_index(None, "name");
        PlanContext::capture(&g, &SpeedRegistry::default())
    }

    const FIG7: &str = "MATCH (n1)-[:hasPet]->(n3) WHERE n1.name = 'Michael Jordan' RETURN n3.photo->animal";

    #[test]
    fn fig7_steps() {
        let q = qg(FIG7);
        let ctx = fig7_ctx();
        let model = CostModel::default();
        let o = Optimizer::new(&q, &ctx, &model).optimize().unwrap();
        // step 1 picks the name filter, which replaces the bare scan of n1
        assert!(o.steps[0].best.starts_with("Filter"), "{}", o.steps[0].best);
        assert!(o.steps[0].candidates.iter().any(|(c, _)| c.starts_with("Expand")));
        assert!(!o.steps[0].table.iter().any(|t| t == "AllNodeScan(n1)"));
        assert!(o.steps[0].table.iter().any(|t| t == "AllNodeScan(n3)"));
        // step 2 expands from the filtered n1 and drops the scan of n3
        assert!(o.steps[1].best.starts_with("Expand(n1)"), "{}", o.steps[1].best);
        assert_eq!(o.steps[1].table.len(), 1);
        assert_eq!(o.iterations, 2);
        let names: Vec<&str> = o.plan.walk().iter().map(|n| n.op.name()).collect();
        assert_eq!(names, ["AllNodeScan", "Filter", "Expand", "Projection"]);
    }

    #[test]
    fn fig7_explain_golden() {
        let q = qg(FIG7);
        let plan = optimize(&q, &fig7_ctx(), &CostModel::default()).unwrap();
        let want = "\
Projection(n3.photo->animal) (cost=1.781e-5, rows=0.1)
  Expand(n1)-[_e0:hasPet]->(n3) (cost=1.780e-5, rows=0.1)
    Filter (n1.name = 'Michael Jordan') (index) (cost=1.600e-5, rows=0.8)
      AllNodeScan(n1) (cost=8.000e-6, rows=8)
";
        assert_eq!(plan.explain(), want);
    }

    #[test]
    fn smallest_plan() {
        let q = qg("MATCH (n:Person) WHERE n.name = 'x' RETURN n.name");
        let plan = optimize(&q, &fig7_ctx(), &CostModel::default()).unwrap();
        assert_eq!(plan.explain().lines().count(), 3);
        let names: Vec<&str> = plan.walk().iter().map(|n| n.op.name()).collect();
        assert_eq!(names, ["NodeByLabelScan", "Filter", "Projection"]);
    }

    #[test]
    fn expensive_filter_runs_after_expand() {
        // 100 pets, one owner selected by name
        let mut g = crate::graph::GraphStore::new();
        let owners: Vec<_> =
            (0..100).map(|i| g.create_node(["Person"], [("name", crate::graph::Value::from(format!("p{i}")))])).collect();
        for o in &owners {
            let pet = g.create_node(["Pet"], [("photo", crate::graph::Value::Integer(0))]);
            g.create_rel(*o, pet, "hasPet", Vec::<(&str, crate::graph::Value)>::new()).unwrap();
        }
        let reg = SpeedRegistry::default();
        reg.record("animal=", 100.0, 1).unwrap();
        let ctx = PlanContext::capture(&g, &reg);
        let q = qg("MATCH (n:Person)-[:hasPet]->(m:Pet) WHERE n.name = 'p7' AND m.photo->animal = 'cat' RETURN n.name");
        let model = CostModel::default();
        let plan = optimize(&q, &ctx, &model).unwrap();
        let names: Vec<&str> = plan.walk().iter().map(|n| n.op.name()).collect();
        let at = |name| names.iter().position(|n| *n == name).unwrap();
        assert!(at("UnstructuredFilter") > at("Expand") && at("UnstructuredFilter") > at("Filter"), "{names:?}");
        let naive = Optimizer::new(&q, &ctx, &model).naive().unwrap();
        assert!(naive.cost > 10.0 * plan.cost, "{} vs {}", naive.cost, plan.cost);
        let unstructured = naive.walk().into_iter().find(|n| n.op.name() == "UnstructuredFilter").unwrap();
        assert_eq!(unstructured.inputs[0].card, 100.0);
    }

    #[test]
    fn disconnected_nodes_use_cartesian_product() {
        let q = qg("MATCH (n:Person),(m:Person) WHERE n.name='a' AND m.name='b' RETURN n.photo ~: m.photo");
        let plan = optimize(&q, &fig7_ctx(), &CostModel::default()).unwrap();
        assert!(plan.walk().iter().any(|n| n.op.name() == "CartesianProduct"));
        assert!(plan.explain().starts_with("Projection"));
    }

    #[test]
    fn shortest_path_is_planned_below_projection() {
        let q = qg("MATCH (n),(m) RETURN shortestPath((n)-[*1..3]-(m))");
        let plan = optimize(&q, &fig7_ctx(), &CostModel::default()).unwrap();
        assert_eq!(plan.inputs[0].op.name(), "ShortestPath");
        match &plan.op {
            LogicalOp::Projection { items, .. } => assert_eq!(items[0].column(), "shortestPath((n)-[*1..3]-(m))"),
            op => panic!("{op:?}"),
        }
    }

    #[test]
    fn no_match_plans_single_row() {
        let plan = optimize(&qg("RETURN 1"), &PlanContext::default(), &CostModel::default()).unwrap();
        assert_eq!(plan.inputs[0].op, LogicalOp::SingleRow);
    }

    #[test]
    fn pick_best_is_deterministic() {
        let q = qg("MATCH (a)-[:T]->(b), (c)-[:T]->(b) RETURN a");
        let ctx = PlanContext::default();
        let model = CostModel::default();
        let first = optimize(&q, &ctx, &model).unwrap().fingerprint();
        for _ in 0..100 {
            assert_eq!(optimize(&q, &ctx, &model).unwrap().fingerprint(), first);
        }
    }

    /// Cheapest complete plan over every sequence of candidate picks.
    #[test]
    fn greedy_never_beats_exhaustive() {
        let ctx = fig7_ctx();
        let model = CostModel::default();
        for text in [
            FIG7,
            "MATCH (a:Person)-[:teamMate]->(b:Person)-[:teamMate]->(c) WHERE a.name = 'x' RETURN c",
            "MATCH (a),(b) WHERE a.photo ~: b.photo RETURN a",
            "MATCH (a)-[:hasPet]->(b), (a)-[:teamMate]->(c) RETURN b, c",
        ] {
            let q = qg(text);
            let o = Optimizer::new(&q, &ctx, &model);
            let greedy = o.optimize().unwrap().plan;
            let best = o.exhaustive().unwrap();
            assert!(greedy.cost >= best.cost - 1e-15, "{text}");
        }
    }

    #[test]
    fn explain_is_injective_on_small_plans() {
        let ctx = fig7_ctx();
        let model = CostModel::default();
        let q = qg("MATCH (a)-[:T]->(b) WHERE a.x = 1 RETURN a");
        let o = Optimizer::new(&q, &ctx, &model);
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        let mut frontier = vec![o.leaf_table()];
        while let Some(t) = frontier.pop() {
            for c in o.candidates(&t) {
                if c.op_count() <= 4 {
                    let text = c.explain();
                    if let Some(prev) = seen.insert(text.clone(), c.fingerprint()) {
                        assert_eq!(prev, c.fingerprint(), "{text}");
                    }
                    let mut next = t.clone();
                    o.commit(&mut next, c);
                    frontier.push(next);
                }
            }
        }
        assert!(seen.len() > 4);
    }
}
