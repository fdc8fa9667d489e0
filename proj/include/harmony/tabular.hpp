#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace harmony {

/// Regression, or classification over an ordered class list.
class TaskKind {
public:
    static TaskKind regression();
    /// Classes are deduplicated and sorted lexicographically.
    static TaskKind classification(std::vector<std::string> classes);

    bool is_regression() const noexcept { return classes_.empty(); }
    bool is_classification() const noexcept { return !classes_.empty(); }
    const std::vector<std::string>& classes() const noexcept { return classes_; }
    int n_classes() const noexcept { return static_cast<int>(classes_.size()); }

    /// Index of `label` in the class list; throws DataError listing known classes.
    int class_index(const std::string& label) const;

    bool operator==(const TaskKind&) const = default;

private:
    std::vector<std::string> classes_;
};

/// Samples without targets. Test-time code paths receive only this.
struct UnlabeledData {
    Eigen::MatrixXd features;           // m x p, column-major
    std::vector<std::string> sites;     // m
    Eigen::MatrixXd covariates;         // m x c; zero columns when absent

    Eigen::Index rows() const { return features.rows(); }
};

/// n samples x p features with site labels, a target, and optional covariates.
/// Classification targets are stored as class indices into task.classes().
struct Dataset {
    Eigen::MatrixXd features;
    std::vector<std::string> sites;
    Eigen::VectorXd target;
    Eigen::MatrixXd covariates;
    std::vector<std::string> feature_names;
    std::vector<std::string> covariate_names;
    TaskKind task = TaskKind::regression();

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index n_features() const { return features.cols(); }

    /// Target values as printable labels (class names or numbers).
    std::string target_label(Eigen::Index row) const;

    UnlabeledData unlabeled() const;

    /// Throws DataError on any invariant violation.
    void validate() const;
};

Dataset subset(const Dataset& data, std::span<const int> rows);
UnlabeledData subset(const UnlabeledData& data, std::span<const int> rows);

/// Sorted distinct site labels.
std::vector<std::string> distinct_sites(std::span<const std::string> sites);

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column-role mapping. feature_cols entries may be shell globs (`f*`).
struct Schema {
    std::string site_col;
    std::string target_col;
    std::vector<std::string> feature_cols;
    std::vector<std::string> covariate_cols;
    bool classification = true;
};

/// Raw CSV contents. Cells are kept as text so files can be rewritten with
/// untouched non-feature columns.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of `name`, or -1.
    int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Feature column names matched by the schema, in header order, globs expanded.
std::vector<std::string> resolve_feature_columns(const CsvTable& table, const Schema& schema);

Dataset dataset_from_table(const CsvTable& table, const Schema& schema);
Dataset load_dataset(const std::filesystem::path& path, const Schema& schema);

/// Writes id, site, target, features, covariates in the standard layout.
CsvTable dataset_to_table(const Dataset& data, bool with_id = true);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Target encoding

/// Regression: one column of raw values. Classification with K classes:
/// K-1 indicator columns against the first class (class indices in `target`).
Eigen::MatrixXd encode_target_covariate(const Eigen::VectorXd& target, const TaskKind& task);

/// Same encoding from class labels; throws DataError on unseen labels.
Eigen::MatrixXd encode_target_labels(std::span<const std::string> labels, const TaskKind& task);

/// Width of encode_target_covariate's output for `task`.
int target_covariate_width(const TaskKind& task);

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldSplit {
    std::vector<int> train;
    std::vector<int> test;
    int fold = 0;
    int repeat = 0;
};

struct FoldPlan {
    std::vector<FoldSplit> splits;
    int k = 0;
    int repeats = 0;
    std::uint64_t seed = 0;
    bool stratified = false;
};

/// Folds over n rows. With `strata`, rows sharing a stratum are spread across
/// folds so each fold holds floor or ceil of its share. Pure function of inputs.
FoldPlan make_folds(Eigen::Index n, std::span<const int> strata, int k, int repeats,
                    std::uint64_t seed);

/// Stratifies by class for classification when `stratify` is set.
FoldPlan make_folds(const Dataset& data, int k, int repeats, bool stratify, std::uint64_t seed);

/// Dense integer ids for arbitrary string keys (sorted order).
std::vector<int> factorize(std::span<const std::string> keys);

} // namespace harmony
