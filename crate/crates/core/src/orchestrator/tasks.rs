use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    InProgress,
    Completed,
    Failed,
}

impl TaskStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Pending => "pending",
            TaskStatus::InProgress => "in_progress",
            TaskStatus::Completed => "completed",
            TaskStatus::Failed => "failed",
        }
    }

    pub fn can_move_to(self, to: TaskStatus) -> bool {
        use TaskStatus::*;
        matches!(
            (self, to),
            (Pending, InProgress) | (InProgress, Completed) | (InProgress, Failed) | (Failed, Pending)
        )
    }
}

impl std::str::FromStr for TaskStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(TaskStatus::Pending),
            "in_progress" => Ok(TaskStatus::InProgress),
            "completed" => Ok(TaskStatus::Completed),
            "failed" => Ok(TaskStatus::Failed),
            other => Err(format!("unknown task status '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskItem {
    pub id: u64,
    pub title: String,
    pub status: TaskStatus,
    #[serde(default)]
    pub depends_on: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("unknown task {0}")]
    UnknownTask(u64),
    #[error("task {id}: {from:?} -> {to:?} is not a legal transition")]
    IllegalTransition { id: u64, from: TaskStatus, to: TaskStatus },
    #[error("task {id} depends on unfinished task(s) {unmet:?}")]
    DependencyUnmet { id: u64, unmet: Vec<u64> },
    #[error("task title must be non-empty")]
    EmptyTitle,
}

/// New task with the next id. Dependencies must already exist, so the graph
/// stays acyclic by construction.
pub fn plan_create(tasks: &[TaskItem], title: &str, depends_on: Vec<u64>) -> Result<TaskItem, TaskError> {
    if title.trim().is_empty() {
        return Err(TaskError::EmptyTitle);
    }
    if let Some(missing) = depends_on.iter().find(|d| !tasks.iter().any(|t| t.id == **d)) {
        return Err(TaskError::UnknownTask(*missing));
    }
    let mut deps = depends_on;
    deps.sort_unstable();
    deps.dedup();
    Ok(TaskItem {
        id: tasks.iter().map(|t| t.id).max().unwrap_or(0) + 1,
        title: title.trim().to_string(),
        status: TaskStatus::Pending,
        depends_on: deps,
    })
}

pub fn plan_update(tasks: &[TaskItem], id: u64, to: TaskStatus) -> Result<TaskItem, TaskError> {
    let t = tasks.iter().find(|t| t.id == id).ok_or(TaskError::UnknownTask(id))?;
    if !t.status.can_move_to(to) {
        return Err(TaskError::IllegalTransition { id, from: t.status, to });
    }
    if to == TaskStatus::InProgress {
        let unmet: Vec<u64> = t
            .depends_on
            .iter()
            .copied()
            .filter(|d| tasks.iter().find(|x| x.id == *d).is_none_or(|x| x.status != TaskStatus::Completed))
            .collect();
        if !unmet.is_empty() {
            return Err(TaskError::DependencyUnmet { id, unmet });
        }
    }
    Ok(TaskItem { status: to, ..t.clone() })
}

pub fn render_tasks(tasks: &[TaskItem]) -> String {
    if tasks.is_empty() {
        return "(no tasks)".into();
    }
    tasks
        .iter()
        .map(|t| {
            let deps = if t.depends_on.is_empty() {
                String::new()
            } else {
                format!(" (after {})", t.depends_on.iter().map(u64::to_string).collect::<Vec<_>>().join(", "))
            };
            format!("#{} [{}] {}{deps}", t.id, t.status.as_str(), t.title)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// True when the dependency graph has no cycle.
pub fn is_acyclic(tasks: &[TaskItem]) -> bool {
    let mut done: Vec<u64> = Vec::new();
    let mut remaining: Vec<&TaskItem> = tasks.iter().collect();
    while !remaining.is_empty() {
        let before = remaining.len();
        remaining.retain(|t| {
            let ready = t.depends_on.iter().all(|d| done.contains(d) || !tasks.iter().any(|x| x.id == *d));
            if ready {
                done.push(t.id);
            }
            !ready
        });
        if remaining.len() == before {
            return false;
        }
    }
    true
}
