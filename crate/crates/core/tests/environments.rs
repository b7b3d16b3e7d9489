use netmpg::environments::{job_balancing_model, sensor_coverage_model, JobBalancingSpec, SensorCoverageSpec};
use netmpg::evaluation::certify_decay;
use netmpg::learning::JointPolicy;
use netmpg::model::GameModel;
use netmpg::network::AgentGraph;

fn decay_holds_everywhere(model: &GameModel) {
    let diameter = model.graph().diameter().unwrap();
    let policies = [
        JointPolicy::uniform(model, diameter).unwrap(),
        JointPolicy::random(model, diameter, 2.0, 17).unwrap(),
    ];
    for policy in &policies {
        for i in 0..model.num_agents() {
            for kappa in 0..=diameter {
                let c = certify_decay(model, policy, i, kappa).unwrap();
                assert!(c.pass, "{}", c.to_record());
            }
        }
    }
}

#[test]
fn small_job_balancing_satisfies_decay() {
    let model = job_balancing_model(&JobBalancingSpec::new(AgentGraph::line(3).unwrap(), 3)).unwrap();
    assert_eq!(model.state_sizes(), &[3, 3, 3]);
    decay_holds_everywhere(&model);
}

#[test]
fn small_sensor_coverage_satisfies_decay() {
    let spec = SensorCoverageSpec {
        graph: AgentGraph::line(3).unwrap(),
        grid_side: 2,
        detect_prob: vec![0.7, 0.5, 0.9],
        gamma: 0.9,
    };
    decay_holds_everywhere(&sensor_coverage_model(&spec).unwrap());
}
