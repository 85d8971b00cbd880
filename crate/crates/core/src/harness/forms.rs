//! Yes/No rating forms for human raters, one Markdown file per entry.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::report::{EntryReport, StructuralReport};

/// The eight evaluation questions, verbatim.
pub const QUESTIONS: [&str; 8] = [
    "Do you think the task goal, domain, and topic described below appropriately reflect the user's high-level and overall goal?",
    "Do you think the set of intents cover all key aspects of the user prompt without missing anything important?",
    "Do you think the intents are meaningfully distinct from each other without redundancy?",
    "Do you think this intent is relevant to the user prompt?",
    "Do you think this intent dimension is relevant to the user prompt?",
    "Do you think the UI component (e.g., hashtags, slider, radio buttons) is appropriate to control this intent dimension's value?",
    "Do you think this intent dimension value in this UI component is appropriate to the user's prompt?",
    "Does the highlighted part correspond to the intent?",
];

const YES_NO: &str = "[ ] Yes  [ ] No";

fn question(s: &mut String, n: usize) {
    let _ = writeln!(s, "### Q{} {}\n", n + 1, QUESTIONS[n]);
}

fn fenced(s: &mut String, text: &str) {
    let _ = writeln!(s, "````text\n{text}\n````\n");
}

pub fn render_form(entry: &EntryReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Rating form {}\n", entry.session_id);
    let _ = writeln!(s, "- Writing context: {}", entry.writing_context);
    let _ = writeln!(s, "- Task: {}", entry.task);
    let _ = writeln!(s, "- Topic: {}\n", entry.topic);
    let _ = writeln!(s, "## User prompt\n");
    fenced(&mut s, &entry.prompt);

    let Some(out) = &entry.output else {
        let _ = writeln!(s, "The pipeline produced no output for this entry: {}\n", entry.error.as_deref().unwrap_or("unknown error"));
        for n in 0..QUESTIONS.len() {
            question(&mut s, n);
            let _ = writeln!(s, "Not applicable.\n");
        }
        return s;
    };

    let _ = writeln!(s, "## Generated document\n");
    fenced(&mut s, &out.document);

    question(&mut s, 0);
    let _ = writeln!(s, "- Task goal: {}\n- Writing domain: {}\n- Topic: {}\n", out.task_goal, out.writing_domain, out.topic);
    let _ = writeln!(s, "{YES_NO}\n");

    let intents: String = out.intents.iter().enumerate().map(|(i, t)| format!("{}. {t}\n", i + 1)).collect();
    question(&mut s, 1);
    let _ = writeln!(s, "{intents}\n{YES_NO}\n");
    question(&mut s, 2);
    let _ = writeln!(s, "{intents}\n{YES_NO}\n");

    question(&mut s, 3);
    for t in &out.intents {
        let _ = writeln!(s, "- {t}: {YES_NO}");
    }
    let _ = writeln!(s);

    for n in 4..7 {
        question(&mut s, n);
        for d in &out.dimensions {
            let line = match n {
                4 => d.title.clone(),
                5 => format!("{} ({}; options: {})", d.title, d.ui_kind, d.domain.join(", ")),
                _ => format!("{} ({}) = {}", d.title, d.ui_kind, d.value.join(", ")),
            };
            let _ = writeln!(s, "- {line}: {YES_NO}");
        }
        let _ = writeln!(s);
    }

    question(&mut s, 7);
    for l in &out.links {
        let _ = writeln!(s, "- Intent: {}", l.intent);
        if l.passages.is_empty() {
            let _ = writeln!(s, "  - (no highlighted part)");
        }
        for p in &l.passages {
            let _ = writeln!(s, "  - Highlighted: \"{p}\" {YES_NO}");
        }
    }
    s
}

/// Writes one form per entry into `out_dir` and returns their paths.
pub fn export_rating_forms(report: &StructuralReport, out_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    for e in &report.entries {
        let path = out_dir.join(format!("{}.md", e.session_id));
        std::fs::write(&path, render_form(e))?;
        paths.push(path);
    }
    Ok(paths)
}
