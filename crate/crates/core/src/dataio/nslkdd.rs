//! Column layout of NSL-KDD connection records.

/// The 41 connection features, in file order.
pub const FEATURE_COLUMNS: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

/// Trailing non-feature columns: attack label and difficulty level.
pub const LABEL_COLUMN: &str = "label";
pub const DIFFICULTY_COLUMN: &str = "difficulty";

/// Total record width: 41 features, label, difficulty.
pub const RECORD_WIDTH: usize = 43;

/// Default forecast target.
pub const DEFAULT_TARGET: &str = "src_bytes";

/// Full 43-entry column name list.
pub fn column_names() -> Vec<String> {
    FEATURE_COLUMNS
        .iter()
        .copied()
        .chain([LABEL_COLUMN, DIFFICULTY_COLUMN])
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_widths() {
        assert_eq!(column_names().len(), RECORD_WIDTH);
        assert!(FEATURE_COLUMNS.contains(&DEFAULT_TARGET));
    }
}
