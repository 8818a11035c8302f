use std::fs::File;
use std::io::Write;

use gm_core::exec::Exec;
use gm_core::metrics::{
    evaluate, predictions_from_export, predictions_from_results, write_csv, Evaluation,
};
use gm_core::osw::parse_workspace_str;
use gm_core::pipeline::process_session;
use gm_core::session::read_session;

use crate::args::EvalArgs;
use crate::failure::{Failure, ResultExt};
use crate::settings::Settings;

pub fn run(
    args: &EvalArgs,
    settings: &Settings,
    out: &mut dyn Write,
) -> Result<Evaluation, Failure> {
    if !(args.gate > 0.0 && args.gate.is_finite()) {
        return Err(Failure::input("--gate must be a positive distance"));
    }
    let session = read_session(&args.session)
        .input(&format!("cannot read session {}", args.session.display()))?;
    let truth = session.ground_truth.as_ref().ok_or_else(|| {
        Failure::input(format!(
            "session {} has no ground truth",
            args.session.display()
        ))
    })?;
    let predictions = match &args.pred {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).input(&format!("cannot read {}", path.display()))?;
            let ws =
                parse_workspace_str(&text).input(&format!("invalid export {}", path.display()))?;
            predictions_from_export(&ws)
        }
        None => {
            let results = process_session(&session, &settings.pipeline, Exec::default())
                .input("cannot process session")?;
            predictions_from_results(&results)
        }
    };
    let ev = evaluate(truth, &predictions, args.gate);
    let rows = ev.rows();
    let file =
        File::create(&args.out).environment(&format!("cannot create {}", args.out.display()))?;
    write_csv(&rows, file).environment(&format!("cannot write {}", args.out.display()))?;
    write_csv(&rows, &mut *out).environment("stdout")?;
    writeln!(out, "unmatched predictions: {}", ev.unmatched_predictions).environment("stdout")?;
    Ok(ev)
}
