use crate::skills::SkillRegistry;
use crate::toolkit::ToolSpec;

pub const DEFAULT_SYSTEM_TEMPLATE: &str = "You configure, run and repair OpenFOAM-style CFD cases.\n\
Work only inside the working directory {workdir}; every path you pass to a tool is relative to it.\n\
Plan multi-step work with the task tools and keep task status current.\n\
Prefer adapting an existing tutorial case (find_cases, clone_case) over writing dictionaries from scratch.\n\
When a run fails you will receive its diagnostic and log tail; fix the cause, then reply without tool calls so the run can be relaunched.\n\
\n\
Tools:\n{tools}\n\
\n\
Skills (call load_skill for the full instructions):\n{skills_index}\n";

pub fn render_system_prompt(template: &str, tools: &[ToolSpec], skills: &SkillRegistry, workdir: &str) -> String {
    let tools_list = tools
        .iter()
        .map(|t| format!("- {}: {}", t.name, t.description))
        .collect::<Vec<_>>()
        .join("\n");
    template
        .replace("{tools}", &tools_list)
        .replace("{skills_index}", &skills.index())
        .replace("{workdir}", workdir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_are_filled() {
        let tools = crate::toolkit::atomic_tool_specs();
        let p = render_system_prompt("{workdir}|{tools}|{skills_index}", &tools, &SkillRegistry::default(), "/w");
        assert!(p.starts_with("/w|- read_file: "));
        assert!(p.ends_with("|(no skills installed)"));
        assert!(!DEFAULT_SYSTEM_TEMPLATE.is_empty());
    }
}
