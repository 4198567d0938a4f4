use std::io::Write;

use smartex_core::dataflow::{hardware_preset, hardware_preset_names, template, TemplateItem};
use smartex_core::workload::{workload_preset, workload_preset_names};
use smartex_core::Style;

use crate::args::PresetsCommand;
use crate::CliError;

fn template_text(style: Style) -> Result<String, CliError> {
    let items = template(style)?;
    Ok(items
        .iter()
        .map(|i| match i {
            TemplateItem::Slot(s) => format!("{}:{}", s.level.tag(), s.dim.letter()),
            TemplateItem::Refresh(b, t) => format!("{}.{t}", b.tag()),
        })
        .collect::<Vec<_>>()
        .join(" "))
}

pub fn run(cmd: PresetsCommand, out: &mut dyn Write) -> Result<(), CliError> {
    let mut text = String::new();
    match cmd {
        PresetsCommand::List => {
            text.push_str("workloads:\n");
            for n in workload_preset_names() {
                let w = workload_preset(n)?;
                text.push_str(&format!("  {n} ({} layers)\n", w.layers.len()));
            }
            text.push_str("hardware:\n");
            for n in hardware_preset_names() {
                let hw = hardware_preset(n)?;
                text.push_str(&format!("  {n} ({} PEs)\n", hw.n_pe));
            }
            text.push_str("styles:\n");
            for s in Style::PRESETS {
                text.push_str(&format!("  {}\n", s.tag()));
            }
        }
        PresetsCommand::Show { name } => {
            if let Ok(w) = workload_preset(&name) {
                text = w.to_json();
            } else if let Ok(hw) = hardware_preset(&name) {
                text = hw.to_json();
            } else if let Some(style) = Style::from_tag(&name).filter(|s| *s != Style::Custom) {
                text = template_text(style)?;
            } else {
                return Err(CliError::usage(format!(
                    "unknown preset `{name}`; run `smartex presets list`"
                )));
            }
            text.push('\n');
        }
    }
    let _ = out.write_all(text.as_bytes());
    Ok(())
}
