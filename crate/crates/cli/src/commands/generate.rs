use std::io::Write;

use gm_core::exec::Exec;
use gm_core::session::{generate_synthetic, write_session, NoiseSpec, SceneSpec};

use crate::args::GenerateArgs;
use crate::failure::{Failure, ResultExt};

pub fn load_scene(spec: &str) -> Result<SceneSpec, Failure> {
    let scene = if spec == "default" {
        SceneSpec::default()
    } else {
        let text = std::fs::read_to_string(spec).input(&format!("cannot read scene {spec}"))?;
        toml::from_str(&text).input(&format!("invalid scene {spec}"))?
    };
    scene.validate().input("invalid scene")?;
    Ok(scene)
}

pub fn run(args: &GenerateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let scene = load_scene(&args.scene)?;
    if args.print_scene {
        let text = toml::to_string(&scene).input("scene does not serialize")?;
        write!(out, "{text}").environment("stdout")?;
        return Ok(());
    }
    let noise = NoiseSpec {
        seed: args.seed,
        gps_sigma_m: args.gps_noise,
        depth_sigma_m: args.depth_noise,
        rotation_jitter_deg: args.rotation_jitter,
    };
    noise.validate().input("invalid noise")?;
    let session = generate_synthetic(&scene, &scene.stations(), &noise, Exec::default())
        .input("cannot generate session")?;
    let dir = args.out.as_ref().expect("clap requires --out");
    write_session(&session, dir).environment(&format!("cannot write {}", dir.display()))?;
    writeln!(
        out,
        "wrote {} frames ({} captures) to {}",
        session.frames.len(),
        session.capture_indices.len(),
        dir.display()
    )
    .environment("stdout")?;
    Ok(())
}
