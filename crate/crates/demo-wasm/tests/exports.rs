use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn probing_more_buckets_never_loses_neighbours() {
    let mut last = 0.0;
    for nprobe in [1, 2, 4, 8] {
        let j = parse(blobgraph_demo::knn(400, 8, 10, nprobe, 7, 0.3, 0.6));
        let r = j["recall"].as_f64().unwrap();
        assert!(r >= last, "nprobe {nprobe}: {r} < {last}");
        last = r;
    }
    assert_eq!(last, 1.0);
}

#[test]
fn ema_converges_to_constant_speed() {
    let samples = std::iter::repeat("0.5/5").take(40).collect::<Vec<_>>().join(",");
    let j = parse(blobgraph_demo::ema(4.0, &format!("10/1,{samples}")));
    let curve = j["curve"].as_array().unwrap();
    assert_eq!(curve[0]["v"], 10.0);
    assert!((curve.last().unwrap()["v"].as_f64().unwrap() - 0.1).abs() < 1e-3);
}

#[test]
fn playground_explains_every_strategy() {
    let p = blobgraph_demo::logic::Playground::new().unwrap();
    let j: Value = serde_json::from_str(&p.explain("MATCH (n:Person)-[:teamMate]->(m) RETURN m.name")).unwrap();
    let names: Vec<&str> = j["plans"].as_array().unwrap().iter().map(|p| p["strategy"].as_str().unwrap()).collect();
    assert_eq!(names, ["greedy", "naive", "exhaustive"]);
}
