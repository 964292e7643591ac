//! Drives a robot with ideal, unit-length moves through the benchmark maze
//! using the tree-search planner alone.

use hbr::geom::Pose2;
use hbr::planner::{apply_motion, mcts_plan, Maze, MctsParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hbr::Result<()> {
    let maze = Maze::benchmark();
    let moves: Vec<Pose2> = (0..16)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 16.0;
            Pose2 {
                x: 0.8 * a.cos(),
                y: 0.8 * a.sin(),
                yaw: 0.0,
            }
        })
        .collect();
    let p = MctsParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pose = maze.start_pose();
    for step in 1..=80 {
        let plan = mcts_plan(&maze, &pose, &moves, &p, &mut rng)?;
        let (next, hit) = apply_motion(&maze, &pose, &moves[plan.choice]);
        pose = next;
        println!(
            "{step:2}: move {:2} -> ({:.2}, {:.2}){}  goal distance {:.2}",
            plan.choice,
            pose.x,
            pose.y,
            if hit { " [wall]" } else { "" },
            maze.goal_distance(pose.x, pose.y)
        );
        if maze.at_goal(&pose) {
            println!("goal reached after {step} moves");
            return Ok(());
        }
    }
    println!("goal not reached");
    Ok(())
}
