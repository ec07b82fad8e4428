use std::fmt::Write;

use ccs_core::model::{param_breakdown, token_mixing_params, MixerConfig};

fn grouped(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Total and per-layer-type parameter counts.
pub fn render_table(label: &str, config: &MixerConfig) -> String {
    let b = param_breakdown(config);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{label}: mixer={} norm={} N={} L={} C={} r={} p={} G={} classes={}",
        config.token_mixer,
        config.norm,
        config.tokens,
        config.depth,
        config.hidden,
        config.ratio,
        config.patch,
        config.groups,
        config.num_classes
    );
    let rows = [
        ("patch_embed", b.patch_embed),
        ("norms", b.norms),
        ("channel_mixing", b.channel_mixing),
        ("token_mixing", b.token_mixing),
        ("head", b.head),
    ];
    for (name, v) in rows {
        let _ = writeln!(s, "  {name:<16}{:>14}", grouped(v));
    }
    let _ = writeln!(s, "  {:<16}{:>14}", "token_mix/layer", grouped(token_mixing_params(config)));
    let _ = writeln!(s, "  {:<16}{:>14}", "total", grouped(b.total()));
    s
}
