//! Two particles meet head on, swap velocities, and fly apart.

use causalkit::quantum::{ca_step, CaParticle, CaWorld};

fn main() {
    let mut world = CaWorld {
        phi: vec![0.0; 12],
        particles: vec![
            CaParticle { id: 0, pos: 2, vel: 1, species: 0 },
            CaParticle { id: 1, pos: 8, vel: -1, species: 1 },
        ],
    };
    world.phi[6] = 1.0;
    let p0 = world.momentum();
    for step in 0..8 {
        let cells: Vec<String> = world.particles.iter().map(|p| format!("{}@{}v{:+}", p.id, p.pos, p.vel)).collect();
        println!("{step}: {} phi[6]={:.4}", cells.join(" "), world.phi[6]);
        world = ca_step(&world, 0.2).expect("particles stay on the grid");
        assert_eq!(world.momentum(), p0);
    }
}
