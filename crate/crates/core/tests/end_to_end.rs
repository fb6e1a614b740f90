use std::collections::{BTreeSet, HashMap};
use std::fs;

use blobgraph::engine::ingest::{load, IngestSpec};
use blobgraph::engine::{Config, Database};
use blobgraph::graph::Value;
use blobgraph::replication::tcp::replicate_over_tcp;
use blobgraph::replication::{ClusterSim, SimConfig};

fn names(db: &Database, text: &str) -> BTreeSet<String> {
    let r = db.query(text, &HashMap::new()).unwrap();
    r.rows.iter().map(|row| row[0].to_string()).collect()
}

#[test]
fn csv_load_query_and_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    fs::write(input.join("tom.raw"), b"cat tabby").unwrap();
    fs::write(input.join("rex.raw"), b"dog terrier").unwrap();
    fs::write(
        input.join("nodes.csv"),
        "id,labels,name,blob_path\n1,Person,Michael Jordan,\n2,Person,Scott Pippen,\n3,Pet,Tom,tom.raw\n4,Pet,Rex,rex.raw\n",
    )
    .unwrap();
    fs::write(input.join("rels.csv"), "src,tgt,type\n1,3,hasPet\n2,4,hasPet\n1,2,teamMate\n").unwrap();
    let spec = IngestSpec {
        nodes: vec![input.join("nodes.csv")],
        rels: vec![input.join("rels.csv")],
        ..IngestSpec::default()
    };

    let cat_owners = "MATCH (n:Person)-[:hasPet]->(m:Pet) WHERE m.photo->animal = 'cat' RETURN n.name";
    {
        let db = Database::init(&data, Config::default()).unwrap();
        let report = load(&db, &spec).unwrap();
        assert_eq!((report.nodes_created, report.rels_created, report.blobs_created), (4, 3, 2));
        assert!(report.rejected.is_empty());
        assert_eq!(names(&db, cat_owners), BTreeSet::from(["Michael Jordan".to_string()]));
        db.query("MATCH (n:Person) WHERE n.name = 'Scott Pippen' SET n.number = 33", &HashMap::new()).unwrap();
        db.checkpoint().unwrap();
    }
    let db = Database::open(&data, Config::default()).unwrap();
    assert!(load(&db, &spec).unwrap().already_loaded);
    assert_eq!(names(&db, cat_owners), BTreeSet::from(["Michael Jordan".to_string()]));
    assert_eq!(names(&db, "MATCH (n:Person) WHERE n.number = 33 RETURN n.name"), BTreeSet::from(["Scott Pippen".to_string()]));
    let r = db.query("MATCH (n:Pet) WHERE n.name = 'Rex' RETURN n.photo", &HashMap::new()).unwrap();
    assert_eq!(r.rows.len(), 1);
}

#[test]
fn cluster_reads_follow_writes_after_quiescence() {
    let mut sim = ClusterSim::new(SimConfig { replicas: 3, drop_rate: 0.2, max_delay: 20, seed: 99, ..SimConfig::default() }).unwrap();
    for i in 0..30 {
        sim.submit(&format!("CREATE (:Item {{k: {i}}})")).unwrap();
        sim.tick();
    }
    sim.submit("MATCH (n:Item) WHERE n.k < 10 DETACH DELETE n").unwrap();
    sim.run_until_quiescent(100_000);
    for id in 0..3 {
        let r = sim.read_on(id, "MATCH (n:Item) RETURN n.k").unwrap();
        assert_eq!(r.result.rows.len(), 20, "replica {id}");
    }
    let follower = replicate_over_tcp(sim.leader_node().unwrap(), 7).unwrap();
    assert_eq!(follower.engine.digest(), sim.digests()[0]);
    let r = follower.engine.query("MATCH (n:Item) WHERE n.k = 15 RETURN n.k", &HashMap::new()).unwrap();
    assert_eq!(r.rows[0][0].to_string(), Value::Integer(15).to_string());
}
