use super::landscape::json_num;
use super::recovery::RecoveryReport;
use super::train::{TrainConfig, TrainResult};

fn config_json(cfg: &TrainConfig) -> String {
    let f = |k: &str, v: f64| format!("\"{k}\":{}", json_num(v));
    let i = |k: &str, v: usize| format!("\"{k}\":{v}");
    [
        f("lr", cfg.lr),
        i("steps_max", cfg.steps_max),
        f("lambda", cfg.lambda),
        f("lambda_warmup_frac", cfg.lambda_warmup_frac),
        f("anneal_start_frac", cfg.anneal_start_frac),
        f("anneal_floor", cfg.anneal_floor),
        f("polish_frac", cfg.polish_frac),
        f("lr_final_frac", cfg.lr_final_frac),
        f("adam_beta1", cfg.adam_beta1),
        f("adam_beta2", cfg.adam_beta2),
        f("adam_eps", cfg.adam_eps),
        f("init_scale", cfg.init_scale),
        f("loss_tol", cfg.loss_tol),
        i("stability_window", cfg.stability_window),
        i("log_every", cfg.log_every),
    ]
    .join(",")
}

/// Result document of one training run: the resolved config, the run
/// summary, its recovery report and the logged trajectory. Floats carry 17
/// significant digits and key order is fixed, so identical runs produce
/// identical bytes.
pub fn train_result_json(table_id: &str, m: usize, cfg: &TrainConfig, res: &TrainResult, report: &RecoveryReport) -> String {
    let trajectory: Vec<String> = res
        .trajectory
        .iter()
        .map(|p| {
            format!(
                "{{\"step\":{},\"lambda\":{},\"recon_loss\":{},\"flatness\":{},\"decode_accuracy\":{}}}",
                p.step,
                json_num(p.lambda),
                json_num(p.recon_loss),
                json_num(p.flatness),
                json_num(p.decode_accuracy)
            )
        })
        .collect();
    let rep = format!(
        "{{\"exact\":{},\"cell_accuracy\":{},\"observed_accuracy\":{},\"unobserved_accuracy\":{},\"flatness_final\":{},\"bound_3n2\":{},\"margin_min\":{}}}",
        report.exact,
        json_num(report.cell_accuracy),
        json_num(report.observed_accuracy),
        json_num(report.unobserved_accuracy),
        json_num(report.flatness_final),
        json_num(report.bound_3n2),
        json_num(report.margin_min)
    );
    format!(
        "{{\"table_id\":{},\"n\":{},\"m\":{},\"seed\":{},\"config\":{{{}}},\"converged\":{},\"steps_used\":{},\"recon_loss_final\":{},\"flatness_final\":{},\"report\":{},\"trajectory\":[{}]}}\n",
        serde_json::to_string(table_id).expect("string serializes"),
        res.params.n(),
        m,
        res.seed,
        config_json(cfg),
        res.converged,
        res.steps_used,
        json_num(res.recon_loss_final),
        json_num(res.flatness_final),
        rep,
        trajectory.join(",")
    )
}
