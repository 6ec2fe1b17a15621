use std::fs;
use std::io;

use camtraj_core::encoder::{CameraEncoder, EncoderConfig, EncoderError};
use camtraj_core::metrics::{evaluate, rotation_angle_between};
use camtraj_core::npy::{from_npy_bytes, write_npy, NpyError};
use camtraj_core::plucker::plucker_sequence;
use camtraj_core::pose_io::{
    parse_pose_bytes, parse_trajectory_spec, strided_indices, to_trajectory, trajectory_from_json,
    trajectory_to_json,
};
use camtraj_core::{Convention, Tensor, Trajectory};

use crate::output::{read_bytes, read_text, write_atomic, CliError, Staged};
use crate::{EmbedArgs, EncodeArgs, EvalArgs, ParseArgs, SynthArgs};

fn convention_name(c: Convention) -> &'static str {
    match c {
        Convention::WorldToCamera => "world_to_camera",
        Convention::CameraToWorld => "camera_to_world",
    }
}

fn write_npy_to(t: &Tensor, w: &mut dyn io::Write) -> io::Result<()> {
    write_npy(t, w).map_err(|e| match e {
        NpyError::Io(e) => e,
        other => io::Error::other(other),
    })
}

fn load_trajectory(path: &std::path::Path) -> Result<Trajectory, CliError> {
    trajectory_from_json(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

pub fn parse(a: ParseArgs) -> Result<(), CliError> {
    let bytes = read_bytes(&a.input)?;
    let pf = parse_pose_bytes(&bytes).map_err(|e| CliError::data(&a.input, e))?;
    let indices = match (&a.frames, a.stride, a.count) {
        (Some(list), _, _) => list.clone(),
        (None, Some(stride), Some(count)) => {
            if stride == 0 {
                return Err(CliError::Usage("--stride must be positive".into()));
            }
            strided_indices(a.start, stride, count)
        }
        _ => (0..pf.frames.len()).collect(),
    };
    let traj = to_trajectory(&pf, a.width as usize, a.height as usize, &indices)
        .map_err(|e| CliError::data(&a.input, e))?;
    write_atomic(&a.out, trajectory_to_json(&traj).as_bytes())?;
    println!(
        "frames: {}\nconvention: {}",
        traj.len(),
        convention_name(traj.convention())
    );
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let text = read_text(&a.spec)?;
    let plan = parse_trajectory_spec(&text).map_err(|e| CliError::data(&a.spec, e))?;
    let traj = plan.build().map_err(|e| CliError::data(&a.spec, e))?;
    write_atomic(&a.out, trajectory_to_json(&traj).as_bytes())?;

    let c2w = traj.to_convention(Convention::CameraToWorld);
    let first = &c2w.poses()[0];
    let last = &c2w.poses()[c2w.len() - 1];
    let angle = rotation_angle_between(last.extrinsics.rotation(), first.extrinsics.rotation());
    let center = last.camera_center();
    println!("frames: {}", traj.len());
    println!("convention: {}", convention_name(traj.convention()));
    println!("last_frame_rotation_deg: {}", angle.to_degrees());
    println!(
        "last_frame_center: [{}, {}, {}]",
        center.x, center.y, center.z
    );
    Ok(())
}

pub fn embed(a: EmbedArgs) -> Result<(), CliError> {
    let traj = load_trajectory(&a.traj)?;
    let seq = plucker_sequence(&traj, a.pixel_origin.into());
    Staged::new(&a.out, |w| write_npy_to(seq.tensor(), w))?.commit()?;
    println!("shape: {:?}", seq.tensor().shape());

    if a.verify {
        let back = from_npy_bytes(&read_bytes(&a.out)?).map_err(|e| CliError::data(&a.out, e))?;
        if !back.bit_eq(seq.tensor()) {
            return Err(CliError::data(
                &a.out,
                "re-read tensor differs from the written one",
            ));
        }
        let (mut max_moment, mut max_norm_err) = (0f64, 0f64);
        let plane = seq.height() * seq.width();
        for f in 0..seq.frames() {
            let frame = seq.frame(f);
            for p in 0..plane {
                let ch = |c: usize| frame[c * plane + p] as f64;
                max_moment = max_moment
                    .max(ch(0).abs())
                    .max(ch(1).abs())
                    .max(ch(2).abs());
                let norm = (ch(3).powi(2) + ch(4).powi(2) + ch(5).powi(2)).sqrt();
                max_norm_err = max_norm_err.max((norm - 1.0).abs());
            }
        }
        println!("verified: {}", a.out.display());
        println!("max_abs_moment: {max_moment}");
        println!("max_direction_norm_error: {max_norm_err}");
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let gt = load_trajectory(&a.gt)?;
    let gen = load_trajectory(&a.gen)?;
    let report = evaluate(&gt, &gen).map_err(|e| CliError::Data(e.to_string()))?;
    let mut json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    json.push('\n');
    write_atomic(&a.out, json.as_bytes())?;
    println!("rot_err: {}", report.rot_err_total);
    println!("trans_err: {}", report.trans_err_total);
    println!("rescale_factor: {}", report.rescale_factor);
    Ok(())
}

pub fn encode(a: EncodeArgs) -> Result<(), CliError> {
    let scale_channels: [usize; 4] = a.channels.as_slice().try_into().map_err(|_| {
        CliError::Usage(format!(
            "--channels takes exactly four values, got {}",
            a.channels.len()
        ))
    })?;
    let cfg = EncoderConfig {
        unshuffle_factor: a.unshuffle,
        scale_channels,
        heads: a.heads,
        mlp_ratio: a.mlp_ratio,
        seed: a.seed,
        pos_emb: !a.no_pos_emb,
        ..EncoderConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let input =
        from_npy_bytes(&read_bytes(&a.plucker)?).map_err(|e| CliError::data(&a.plucker, e))?;
    let encoder = CameraEncoder::new(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let features = encoder.forward(&input).map_err(|e| match e {
        EncoderError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::data(&a.plucker, other),
    })?;

    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let staged = features
        .scales
        .iter()
        .enumerate()
        .map(|(i, fm)| {
            let path = a.out_dir.join(format!("scale{}.npy", i + 1));
            Staged::new(&path, |w| write_npy_to(fm.tensor(), w))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for s in staged {
        s.commit()?;
    }
    for (i, fm) in features.scales.iter().enumerate() {
        println!("scale{}: {:?}", i + 1, fm.shape());
    }
    Ok(())
}
