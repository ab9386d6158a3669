//! Versioned prompt templates. Each template file carries a `task:` tag
//! line and a system preamble above the `---` divider, then the user body
//! with `{placeholder}` slots.

use super::ChatMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    GenerateQueries,
    OptimizeCitations,
    OptimizeFluency,
    OptimizeStatistics,
    AnswerQuery,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::GenerateQueries => "generate-queries",
            Task::OptimizeCitations => "optimize-citations",
            Task::OptimizeFluency => "optimize-fluency",
            Task::OptimizeStatistics => "optimize-statistics",
            Task::AnswerQuery => "answer-query",
        }
    }

    fn raw(self) -> &'static str {
        match self {
            Task::GenerateQueries => include_str!("../../templates/query_generation.txt"),
            Task::OptimizeCitations => include_str!("../../templates/optimize_citations.txt"),
            Task::OptimizeFluency => include_str!("../../templates/optimize_fluency.txt"),
            Task::OptimizeStatistics => include_str!("../../templates/optimize_statistics.txt"),
            Task::AnswerQuery => include_str!("../../templates/answer_query.txt"),
        }
    }

    /// Render the system and user messages, substituting `{key}` slots.
    pub fn render(self, substitutions: &[(&str, &str)]) -> Vec<ChatMessage> {
        let raw = self.raw();
        let (system, user) = raw.split_once("\n---\n").unwrap_or((raw, ""));
        let mut body = user.trim().to_string();
        for (key, value) in substitutions {
            body = body.replace(&format!("{{{key}}}"), value);
        }
        vec![
            ChatMessage {
                role: "system".to_string(),
                content: system.trim().to_string(),
            },
            ChatMessage {
                role: "user".to_string(),
                content: body,
            },
        ]
    }
}

/// The `task:` tag of a rendered prompt, used by the mock engine to
/// dispatch and by telemetry to label calls.
pub fn task_of(messages: &[ChatMessage]) -> Option<&str> {
    messages
        .iter()
        .find(|m| m.role == "system")
        .and_then(|m| m.content.lines().next())
        .and_then(|line| line.strip_prefix("task: "))
        .map(str::trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_placeholders() {
        let messages = Task::GenerateQueries.render(&[
            ("subcategory", "beach holidays"),
            ("count", "5"),
        ]);
        assert_eq!(messages.len(), 2);
        assert!(messages[1].content.contains("Subcategory: beach holidays"));
        assert!(messages[1].content.contains("Count: 5"));
        assert_eq!(task_of(&messages), Some("generate-queries"));
    }

    #[test]
    fn every_template_carries_its_task_tag() {
        for task in [
            Task::GenerateQueries,
            Task::OptimizeCitations,
            Task::OptimizeFluency,
            Task::OptimizeStatistics,
            Task::AnswerQuery,
        ] {
            let messages = task.render(&[]);
            assert_eq!(task_of(&messages), Some(task.name()));
        }
    }
}
